//! Pre-norm bidirectional encoder with a classification head on position 0,
//! and its hand-written backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TransformerConfig;
use super::params::{LayerParams, Params};
use crate::attention::AttentionRecord;
use crate::data::{CLS_ID, PAD_ID};
use crate::error::{config, domain, Result};
use crate::scalar::Scalar;

/// A transformer weak learner: embeddings, `L` encoder layers and an
/// `M`-way linear head reading the final hidden state of position 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformer<T> {
    config: TransformerConfig,
    params: Params<T>,
}

struct NormCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

struct LayerCache<T> {
    /// Destination rows carried past the attention block.
    rows: usize,
    norm1: NormCache<T>,
    u: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// `[head][dest][source]`.
    probs: Vec<T>,
    ctx: Vec<T>,
    drop1: Option<Vec<T>>,
    norm2: NormCache<T>,
    u2: Vec<T>,
    pre: Vec<T>,
    act: Vec<T>,
    drop2: Option<Vec<T>>,
}

pub(crate) struct ForwardCache<T> {
    tokens: Vec<u32>,
    layers: Vec<LayerCache<T>>,
    final_norm: NormCache<T>,
    pooled: Vec<T>,
    pub(crate) logits: Vec<T>,
}

impl<T: Scalar> Transformer<T> {
    /// Randomly initialized learner; the seed fixes every parameter.
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        Self::check_config(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Params::init(&config, &mut rng);
        Ok(Self { config, params })
    }

    pub fn from_params(config: TransformerConfig, params: Params<T>) -> Result<Self> {
        Self::check_config(&config)?;
        let expected = Params::<T>::zeros(&config);
        let shapes_match = expected
            .slots()
            .iter()
            .zip(params.slots())
            .all(|(a, b)| a.len() == b.len())
            && expected.layers.len() == params.layers.len();
        if !shapes_match {
            return Err(config_err("parameter shapes do not match the config"));
        }
        Ok(Self { config, params })
    }

    fn check_config(config: &TransformerConfig) -> Result<()> {
        config.validate()?;
        if config.precision != T::DTYPE {
            return Err(config_err(format!(
                "config precision {:?} does not match element type {:?}",
                config.precision,
                T::DTYPE
            )));
        }
        Ok(())
    }

    /// Copies every parameter of `previous`, including embedding rows of
    /// tokens no longer in use.
    pub fn init_from(previous: &Self, config: &TransformerConfig) -> Result<Self> {
        if previous.config != *config {
            return Err(domain("init_from requires an identical transformer config"));
        }
        Ok(previous.clone())
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    pub(crate) fn validate_tokens(&self, tokens: &[u32]) -> Result<()> {
        if tokens.is_empty() {
            return Err(domain("empty token sequence"));
        }
        if tokens[0] != CLS_ID {
            return Err(domain("position 0 must hold the classification token"));
        }
        if tokens.len() > self.config.max_seq_len {
            return Err(domain(format!(
                "sequence length {} exceeds max_seq_len {}",
                tokens.len(),
                self.config.max_seq_len
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(domain(format!(
                "token id {bad} out of range for vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Inference-mode logits.
    pub fn predict(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(tokens, None::<&mut ChaCha8Rng>)?;
        Ok(cache.logits.iter().map(|v| v.as_f64()).collect())
    }

    /// Inference-mode logits together with the head-averaged attention of
    /// every layer.
    pub fn forward(&self, tokens: &[u32]) -> Result<(Vec<f64>, AttentionRecord)> {
        let cache = self.forward_cached(tokens, None::<&mut ChaCha8Rng>)?;
        let logits = cache.logits.iter().map(|v| v.as_f64()).collect();
        Ok((logits, self.attention_from(&cache)?))
    }

    fn attention_from(&self, cache: &ForwardCache<T>) -> Result<AttentionRecord> {
        let s = cache.tokens.len();
        let h = self.config.heads;
        let inv = 1.0 / h as f64;
        let layers = cache
            .layers
            .iter()
            .map(|lc| {
                let mut m = vec![0.0; s * s];
                for head in 0..h {
                    let block = &lc.probs[head * s * s..(head + 1) * s * s];
                    for (dst, src) in m.iter_mut().zip(block) {
                        *dst += src.as_f64() * inv;
                    }
                }
                m
            })
            .collect();
        AttentionRecord::new(s, layers)
    }

    pub(crate) fn forward_cached<R: Rng>(
        &self,
        tokens: &[u32],
        mut dropout: Option<&mut R>,
    ) -> Result<ForwardCache<T>> {
        self.validate_tokens(tokens)?;
        let cfg = &self.config;
        let d = cfg.d_model;
        let s = tokens.len();
        let p = &self.params;

        let mut x = vec![T::zero(); s * d];
        for (t, &tok) in tokens.iter().enumerate() {
            let e = &p.token_embedding[tok as usize * d..(tok as usize + 1) * d];
            let pos = &p.position_embedding[t * d..(t + 1) * d];
            for ((o, a), b) in x[t * d..(t + 1) * d].iter_mut().zip(e).zip(pos) {
                *o = *a + *b;
            }
        }
        let source_mask: Vec<bool> = tokens.iter().map(|&t| t != PAD_ID).collect();

        let mut layers = Vec::with_capacity(cfg.layers);
        for (l, lp) in p.layers.iter().enumerate() {
            // Only position 0 of the last layer reaches the head.
            let rows = if l + 1 == cfg.layers { 1 } else { s };
            let (next, cache) =
                self.layer_forward(lp, &x, s, rows, &source_mask, dropout.as_deref_mut());
            x = next;
            layers.push(cache);
        }

        let (pooled, final_norm) = layer_norm(
            &x[..d],
            &p.final_norm_gain,
            &p.final_norm_bias,
            1,
            d,
            T::from_f64(cfg.layer_norm_eps),
        );
        let logits = affine(&pooled, &p.head_weight, &p.head_bias, 1, d, cfg.num_classes);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(crate::error::Error::Numeric("non-finite logits".into()));
        }
        Ok(ForwardCache {
            tokens: tokens.to_vec(),
            layers,
            final_norm,
            pooled,
            logits,
        })
    }

    fn layer_forward<R: Rng>(
        &self,
        lp: &LayerParams<T>,
        x: &[T],
        s: usize,
        rows: usize,
        source_mask: &[bool],
        mut dropout: Option<&mut R>,
    ) -> (Vec<T>, LayerCache<T>) {
        let cfg = &self.config;
        let d = cfg.d_model;
        let f = cfg.d_ff;
        let h = cfg.heads;
        let dh = cfg.head_dim();
        let eps = T::from_f64(cfg.layer_norm_eps);
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());

        let (u, norm1) = layer_norm(x, &lp.attn_norm_gain, &lp.attn_norm_bias, s, d, eps);
        let q = affine(&u, &lp.wq, &lp.bq, s, d, d);
        let k = affine(&u, &lp.wk, &lp.bk, s, d, d);
        let v = affine(&u, &lp.wv, &lp.bv, s, d, d);

        let mut probs = vec![T::zero(); h * s * s];
        let mut ctx = vec![T::zero(); rows * d];
        for head in 0..h {
            let off = head * dh;
            for j in 0..s {
                let row = &mut probs[(head * s + j) * s..(head * s + j + 1) * s];
                let qj = &q[j * d + off..j * d + off + dh];
                let mut max = T::neg_infinity();
                for i in 0..s {
                    if source_mask[i] {
                        let ki = &k[i * d + off..i * d + off + dh];
                        let sc = dot(qj, ki) * scale;
                        row[i] = sc;
                        if sc > max {
                            max = sc;
                        }
                    }
                }
                let mut total = T::zero();
                for i in 0..s {
                    if source_mask[i] {
                        let e = (row[i] - max).exp();
                        row[i] = e;
                        total += e;
                    } else {
                        row[i] = T::zero();
                    }
                }
                for r in row.iter_mut() {
                    *r /= total;
                }
                if j < rows {
                    let out = &mut ctx[j * d + off..j * d + off + dh];
                    for i in 0..s {
                        let a = row[i];
                        if a != T::zero() {
                            let vi = &v[i * d + off..i * d + off + dh];
                            for (o, vv) in out.iter_mut().zip(vi) {
                                *o += a * *vv;
                            }
                        }
                    }
                }
            }
        }

        let mut attn_out = affine(&ctx, &lp.wo, &lp.bo, rows, d, d);
        let drop1 = dropout
            .as_deref_mut()
            .map(|rng| apply_dropout(&mut attn_out, cfg.dropout, rng));
        let mut h1: Vec<T> = x[..rows * d].to_vec();
        for (a, b) in h1.iter_mut().zip(&attn_out) {
            *a += *b;
        }

        let (u2, norm2) = layer_norm(&h1, &lp.ffn_norm_gain, &lp.ffn_norm_bias, rows, d, eps);
        let pre = affine(&u2, &lp.w1, &lp.b1, rows, d, f);
        let act: Vec<T> = pre.iter().map(|&a| gelu(a)).collect();
        let mut ffn_out = affine(&act, &lp.w2, &lp.b2, rows, f, d);
        let drop2 = dropout.map(|rng| apply_dropout(&mut ffn_out, cfg.dropout, rng));
        for (a, b) in h1.iter_mut().zip(&ffn_out) {
            *a += *b;
        }

        let cache = LayerCache {
            rows,
            norm1,
            u,
            q,
            k,
            v,
            probs,
            ctx,
            drop1,
            norm2,
            u2,
            pre,
            act,
            drop2,
        };
        (h1, cache)
    }

    /// Accumulates parameter gradients for `dlogits = ∂loss/∂logits` into `grads`.
    pub(crate) fn backward(&self, cache: &ForwardCache<T>, dlogits: &[T], grads: &mut Params<T>) {
        let cfg = &self.config;
        let d = cfg.d_model;
        let s = cache.tokens.len();
        let p = &self.params;

        let dpooled = affine_backward(
            &cache.pooled,
            &p.head_weight,
            dlogits,
            1,
            d,
            cfg.num_classes,
            &mut grads.head_weight,
            &mut grads.head_bias,
        );
        let mut dx = layer_norm_backward(
            &dpooled,
            &cache.final_norm,
            &p.final_norm_gain,
            1,
            d,
            &mut grads.final_norm_gain,
            &mut grads.final_norm_bias,
        );

        for l in (0..cfg.layers).rev() {
            dx = self.layer_backward(&p.layers[l], &cache.layers[l], &dx, s, &mut grads.layers[l]);
        }

        for (t, &tok) in cache.tokens.iter().enumerate() {
            let row = &dx[t * d..(t + 1) * d];
            let e = &mut grads.token_embedding[tok as usize * d..(tok as usize + 1) * d];
            for (g, v) in e.iter_mut().zip(row) {
                *g += *v;
            }
            let pos = &mut grads.position_embedding[t * d..(t + 1) * d];
            for (g, v) in pos.iter_mut().zip(row) {
                *g += *v;
            }
        }
    }

    fn layer_backward(
        &self,
        lp: &LayerParams<T>,
        lc: &LayerCache<T>,
        dout: &[T],
        s: usize,
        g: &mut LayerParams<T>,
    ) -> Vec<T> {
        let cfg = &self.config;
        let d = cfg.d_model;
        let f = cfg.d_ff;
        let h = cfg.heads;
        let dh = cfg.head_dim();
        let r = lc.rows;
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());

        // Feed-forward branch.
        let mut dffn = dout.to_vec();
        if let Some(mask) = &lc.drop2 {
            for (a, m) in dffn.iter_mut().zip(mask) {
                *a *= *m;
            }
        }
        let mut dact = affine_backward(&lc.act, &lp.w2, &dffn, r, f, d, &mut g.w2, &mut g.b2);
        for (da, &a) in dact.iter_mut().zip(&lc.pre) {
            *da *= gelu_grad(a);
        }
        let du2 = affine_backward(&lc.u2, &lp.w1, &dact, r, d, f, &mut g.w1, &mut g.b1);
        let dh1_norm = layer_norm_backward(
            &du2,
            &lc.norm2,
            &lp.ffn_norm_gain,
            r,
            d,
            &mut g.ffn_norm_gain,
            &mut g.ffn_norm_bias,
        );
        let mut dh1 = dout.to_vec();
        for (a, b) in dh1.iter_mut().zip(&dh1_norm) {
            *a += *b;
        }

        // Attention branch.
        let mut dattn = dh1.clone();
        if let Some(mask) = &lc.drop1 {
            for (a, m) in dattn.iter_mut().zip(mask) {
                *a *= *m;
            }
        }
        let dctx = affine_backward(&lc.ctx, &lp.wo, &dattn, r, d, d, &mut g.wo, &mut g.bo);

        let mut dq = vec![T::zero(); r * d];
        let mut dk = vec![T::zero(); s * d];
        let mut dv = vec![T::zero(); s * d];
        let mut dprob = vec![T::zero(); s];
        for head in 0..h {
            let off = head * dh;
            for j in 0..r {
                let row = &lc.probs[(head * s + j) * s..(head * s + j + 1) * s];
                let dcj = &dctx[j * d + off..j * d + off + dh];
                let mut weighted = T::zero();
                for i in 0..s {
                    let a = row[i];
                    if a == T::zero() {
                        dprob[i] = T::zero();
                        continue;
                    }
                    let vi = &lc.v[i * d + off..i * d + off + dh];
                    dprob[i] = dot(dcj, vi);
                    weighted += a * dprob[i];
                    let dvi = &mut dv[i * d + off..i * d + off + dh];
                    for (o, c) in dvi.iter_mut().zip(dcj) {
                        *o += a * *c;
                    }
                }
                let qj = &lc.q[j * d + off..j * d + off + dh];
                for i in 0..s {
                    let a = row[i];
                    if a == T::zero() {
                        continue;
                    }
                    let ds = a * (dprob[i] - weighted) * scale;
                    let ki = &lc.k[i * d + off..i * d + off + dh];
                    let dqj = &mut dq[j * d + off..j * d + off + dh];
                    for (o, kk) in dqj.iter_mut().zip(ki) {
                        *o += ds * *kk;
                    }
                    let dki = &mut dk[i * d + off..i * d + off + dh];
                    for (o, qq) in dki.iter_mut().zip(qj) {
                        *o += ds * *qq;
                    }
                }
            }
        }

        let mut du = affine_backward(&lc.u[..r * d], &lp.wq, &dq, r, d, d, &mut g.wq, &mut g.bq);
        du.resize(s * d, T::zero());
        let du_k = affine_backward(&lc.u, &lp.wk, &dk, s, d, d, &mut g.wk, &mut g.bk);
        let du_v = affine_backward(&lc.u, &lp.wv, &dv, s, d, d, &mut g.wv, &mut g.bv);
        for ((a, b), c) in du.iter_mut().zip(&du_k).zip(&du_v) {
            *a += *b + *c;
        }
        let mut dx = layer_norm_backward(
            &du,
            &lc.norm1,
            &lp.attn_norm_gain,
            s,
            d,
            &mut g.attn_norm_gain,
            &mut g.attn_norm_bias,
        );
        for (a, b) in dx[..r * d].iter_mut().zip(&dh1) {
            *a += *b;
        }
        dx
    }
}

fn config_err(msg: impl Into<String>) -> crate::error::Error {
    config(msg)
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

/// `a[n×k] · w[k×m] + b[m]`.
fn affine<T: Scalar>(a: &[T], w: &[T], b: &[T], n: usize, k: usize, m: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        out.extend_from_slice(b);
        let row = &mut out[i * m..(i + 1) * m];
        for (p, &x) in a[i * k..(i + 1) * k].iter().enumerate() {
            if x == T::zero() {
                continue;
            }
            for (o, wv) in row.iter_mut().zip(&w[p * m..(p + 1) * m]) {
                *o += x * *wv;
            }
        }
    }
    out
}

/// Accumulates `dw += aᵀ·dout`, `db += Σ dout` and returns `dout · wᵀ`.
#[allow(clippy::too_many_arguments)]
fn affine_backward<T: Scalar>(
    a: &[T],
    w: &[T],
    dout: &[T],
    n: usize,
    k: usize,
    m: usize,
    dw: &mut [T],
    db: &mut [T],
) -> Vec<T> {
    let mut da = vec![T::zero(); n * k];
    for i in 0..n {
        let drow = &dout[i * m..(i + 1) * m];
        for (g, v) in db.iter_mut().zip(drow) {
            *g += *v;
        }
        let arow = &a[i * k..(i + 1) * k];
        for p in 0..k {
            let wrow = &w[p * m..(p + 1) * m];
            da[i * k + p] = dot(drow, wrow);
            let x = arow[p];
            if x != T::zero() {
                for (g, v) in dw[p * m..(p + 1) * m].iter_mut().zip(drow) {
                    *g += x * *v;
                }
            }
        }
    }
    da
}

fn layer_norm<T: Scalar>(
    x: &[T],
    gain: &[T],
    bias: &[T],
    rows: usize,
    d: usize,
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let mut out = vec![T::zero(); rows * d];
    let mut xhat = vec![T::zero(); rows * d];
    let mut rstd = vec![T::zero(); rows];
    let inv_d = T::from_f64(1.0 / d as f64);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let rs = (var + eps).sqrt().recip();
        rstd[r] = rs;
        for c in 0..d {
            let xh = (row[c] - mean) * rs;
            xhat[r * d + c] = xh;
            out[r * d + c] = xh * gain[c] + bias[c];
        }
    }
    (out, NormCache { xhat, rstd })
}

fn layer_norm_backward<T: Scalar>(
    dout: &[T],
    cache: &NormCache<T>,
    gain: &[T],
    rows: usize,
    d: usize,
    dgain: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let mut dx = vec![T::zero(); rows * d];
    let inv_d = T::from_f64(1.0 / d as f64);
    let mut dxhat = vec![T::zero(); d];
    for r in 0..rows {
        let dy = &dout[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = T::zero();
        let mut mean_dxhat_xhat = T::zero();
        for c in 0..d {
            dgain[c] += dy[c] * xh[c];
            dbias[c] += dy[c];
            dxhat[c] = dy[c] * gain[c];
            mean_dxhat += dxhat[c];
            mean_dxhat_xhat += dxhat[c] * xh[c];
        }
        mean_dxhat *= inv_d;
        mean_dxhat_xhat *= inv_d;
        let rs = cache.rstd[r];
        for c in 0..d {
            dx[r * d + c] = rs * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/π)
const GELU_A: f64 = 0.044_715;

fn gelu<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let inner = T::from_f64(GELU_C) * (x + T::from_f64(GELU_A) * x * x * x);
    half * x * (T::one() + inner.tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let c = T::from_f64(GELU_C);
    let a = T::from_f64(GELU_A);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::from_f64(3.0) * a * x * x)
}

/// Zeroes entries with probability `rate` and rescales survivors; returns the mask.
fn apply_dropout<T: Scalar, R: Rng>(values: &mut [T], rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<T> = values
        .iter()
        .map(|_| {
            if rate > 0.0 && rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    for (v, m) in values.iter_mut().zip(&mask) {
        *v *= *m;
    }
    mask
}
