//! Attention-path token importance and vocabulary pruning.
//!
//! Positions are 0-based; position 0 holds the classification token. For a
//! content position `p`:
//!
//! * self-importance is the last-layer attention that the classification
//!   token draws from `p`;
//! * rest-importance follows a greedy path from `p`: at each layer below the
//!   last it moves to the destination `j ≠ p` that draws most from the current
//!   position (smallest index on ties), multiplies those maxima, and finishes
//!   with the last-layer attention from the path's end to position 0.
//!
//! A word's importance sums both terms over all of its occurrences.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attention::AttentionRecord;
use crate::error::{domain, Result};

/// Score per vocabulary token id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImportanceTable {
    scores: BTreeMap<u32, f64>,
}

impl ImportanceTable {
    /// All-zero table over `vocab`.
    pub fn zeros(vocab: &VocabSubset) -> Self {
        Self {
            scores: vocab.iter().map(|id| (id, 0.0)).collect(),
        }
    }

    pub fn from_scores(scores: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let scores: BTreeMap<u32, f64> = scores.into_iter().collect();
        if scores.values().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(domain("importance scores must be finite and non-negative"));
        }
        Ok(Self { scores })
    }

    pub fn score(&self, id: u32) -> Option<f64> {
        self.scores.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `(id, score)` in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.scores.iter().map(|(&k, &v)| (k, v))
    }

    /// Adds per-position scores (see [`position_importance`]) for the
    /// content tokens of `tokens` that lie in the table's domain.
    pub fn accumulate(&mut self, tokens: &[u32], position_scores: &[f64]) -> Result<()> {
        if tokens.len() != position_scores.len() {
            return Err(domain("position scores do not match the token sequence"));
        }
        for (tok, score) in tokens.iter().zip(position_scores).skip(1) {
            if let Some(s) = self.scores.get_mut(tok) {
                *s += score;
            }
        }
        Ok(())
    }
}

/// A nested vocabulary subset `V_t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSubset {
    ids: BTreeSet<u32>,
    parent_size: Option<usize>,
}

impl VocabSubset {
    pub fn new(ids: impl IntoIterator<Item = u32>) -> Self {
        Self {
            ids: ids.into_iter().collect(),
            parent_size: None,
        }
    }

    /// Every id in `0..size`.
    pub fn full(size: usize) -> Self {
        Self::new(0..size as u32)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Size of the subset this one was pruned from.
    pub fn parent_size(&self) -> Option<usize> {
        self.parent_size
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.ids.iter().copied()
    }

    pub fn is_subset_of(&self, other: &VocabSubset) -> bool {
        self.ids.is_subset(&other.ids)
    }
}

/// Self-importance `a(p, 0; L)` of content position `p`.
pub fn self_importance(attention: &AttentionRecord, position: usize) -> Result<f64> {
    check_position(attention, position)?;
    Ok(attention.weight(attention.num_layers() - 1, position, 0))
}

/// Rest-importance with a flag set when the sequence has no other position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestImportance {
    pub value: f64,
    pub degenerate: bool,
}

pub fn rest_importance(attention: &AttentionRecord, position: usize) -> Result<RestImportance> {
    let s = attention.seq_len();
    if s < 2 {
        return Ok(RestImportance {
            value: 0.0,
            degenerate: true,
        });
    }
    check_position(attention, position)?;
    let last = attention.num_layers() - 1;
    let mut current = position;
    let mut product = 1.0;
    for layer in 0..last {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..s).filter(|&j| j != position) {
            let w = attention.weight(layer, current, j);
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((j, w));
            }
        }
        let (next, max) = best.expect("s >= 2 leaves a destination");
        product *= max;
        current = next;
    }
    Ok(RestImportance {
        value: product * attention.weight(last, current, 0),
        degenerate: false,
    })
}

fn check_position(attention: &AttentionRecord, position: usize) -> Result<()> {
    if position == 0 || position >= attention.seq_len() {
        return Err(domain(format!(
            "position {position} is not a content position of a length-{} sequence",
            attention.seq_len()
        )));
    }
    Ok(())
}

/// Self- plus rest-importance for every position; entry 0 (the
/// classification token) is 0.
pub fn position_importance(attention: &AttentionRecord) -> Result<Vec<f64>> {
    let mut out = vec![0.0; attention.seq_len()];
    for (p, slot) in out.iter_mut().enumerate().skip(1) {
        *slot = self_importance(attention, p)? + rest_importance(attention, p)?.value;
    }
    Ok(out)
}

/// Sums self- and rest-importance over every occurrence of each token of
/// `vocab`. Occurrences of tokens outside `vocab` are ignored.
pub fn aggregate_importance<'a, I>(samples: I, vocab: &VocabSubset) -> Result<ImportanceTable>
where
    I: IntoIterator<Item = (&'a [u32], &'a AttentionRecord)>,
{
    let mut table = ImportanceTable::zeros(vocab);
    for (tokens, attention) in samples {
        if tokens.len() != attention.seq_len() {
            return Err(domain("attention record does not match its token sequence"));
        }
        table.accumulate(tokens, &position_importance(attention)?)?;
    }
    Ok(table)
}

/// Result of [`prune_vocab`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub subset: VocabSubset,
    /// Set when nothing could be pruned because only protected ids remain.
    pub unchanged: bool,
}

/// Keeps the `⌈σ · n⌉` highest-scoring unprotected ids of `table` (ties by
/// ascending id), where `n` counts unprotected ids, then adds every protected
/// id present in the table.
pub fn prune_vocab(table: &ImportanceTable, keep_fraction: f64, protected: &[u32]) -> Result<Pruned> {
    if !(keep_fraction > 0.0 && keep_fraction < 1.0) {
        return Err(domain(format!("keep fraction {keep_fraction} outside (0, 1)")));
    }
    let parent_size = table.len();
    let mut candidates: Vec<(u32, f64)> = table
        .iter()
        .filter(|(id, _)| !protected.contains(id))
        .collect();
    if candidates.is_empty() {
        log::warn!("vocabulary holds only protected tokens; nothing to prune");
        return Ok(Pruned {
            subset: VocabSubset {
                ids: table.scores.keys().copied().collect(),
                parent_size: Some(parent_size),
            },
            unchanged: true,
        });
    }
    let budget = keep_budget(candidates.len(), keep_fraction);
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut ids: BTreeSet<u32> = candidates[..budget].iter().map(|(id, _)| *id).collect();
    ids.extend(protected.iter().filter(|id| table.scores.contains_key(id)));
    Ok(Pruned {
        subset: VocabSubset {
            ids,
            parent_size: Some(parent_size),
        },
        unchanged: false,
    })
}

/// `⌈σ n⌉`, ignoring floating-point dust above an integer.
pub fn keep_budget(n: usize, keep_fraction: f64) -> usize {
    ((keep_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Drops tokens outside `vocab`, keeping order; position 0 always survives.
pub fn filter_sample(tokens: &[u32], vocab: &VocabSubset) -> Vec<u32> {
    let mut out = Vec::with_capacity(tokens.len());
    if let Some((&first, rest)) = tokens.split_first() {
        out.push(first);
        out.extend(rest.iter().copied().filter(|&t| vocab.contains(t)));
    }
    out
}
