use std::collections::HashMap;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::CorpusRecord;
use super::{CLS_ID, NUM_SPECIAL, PAD_ID, UNK_ID};
use crate::error::{domain, Result};

const SPECIAL_STRINGS: [&str; 3] = ["[CLS]", "[UNK]", "[PAD]"];

/// An encoded sample: token ids starting with the classification token and a
/// 0-based class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub tokens: Vec<u32>,
    pub label: usize,
}

/// Whitespace tokenizer over a frequency-ranked vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tokenizer {
    /// Id → string; the first `NUM_SPECIAL` entries are the special tokens.
    words: Vec<String>,
    lowercase: bool,
    min_freq: usize,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

impl Tokenizer {
    /// Counts casefolded whitespace tokens, drops those seen fewer than
    /// `min_freq` times and keeps at most `max_size` words ordered by
    /// descending frequency, then lexicographically.
    pub fn build<'a, I>(texts: I, min_freq: usize, max_size: Option<usize>) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut seen_any = false;
        for text in texts {
            seen_any = true;
            for word in split(text, true) {
                if SPECIAL_STRINGS.iter().any(|s| s.eq_ignore_ascii_case(&word)) {
                    continue;
                }
                *counts.entry(word).or_default() += 1;
            }
        }
        if !seen_any {
            return Err(domain("cannot build a vocabulary from an empty corpus"));
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_freq.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(cap) = max_size {
            ranked.truncate(cap);
        }
        let words = SPECIAL_STRINGS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(w, _)| w))
            .collect();
        Ok(Self::from_words(words, true, min_freq))
    }

    pub fn build_from_records(
        records: &[CorpusRecord],
        min_freq: usize,
        max_size: Option<usize>,
    ) -> Result<Self> {
        Self::build(records.iter().map(|r| r.text.as_str()), min_freq, max_size)
    }

    fn from_words(words: Vec<String>, lowercase: bool, min_freq: usize) -> Self {
        let mut tok = Self {
            words,
            lowercase,
            min_freq,
            lookup: HashMap::new(),
        };
        tok.rebuild_lookup();
        tok
    }

    /// Restores the string → id index after deserialization.
    pub fn rebuild_lookup(&mut self) {
        self.lookup = self
            .words
            .iter()
            .enumerate()
            .skip(NUM_SPECIAL as usize)
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
    }

    /// Total id count including special tokens.
    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn id(&self, word: &str) -> u32 {
        let key = if self.lowercase {
            word.to_lowercase()
        } else {
            word.to_string()
        };
        self.lookup.get(&key).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    /// `[CLS]` followed by word ids, truncated to `max_len` ids in total.
    pub fn encode_text(&self, text: &str, max_len: usize) -> Vec<u32> {
        let mut ids = vec![CLS_ID];
        ids.extend(
            split(text, self.lowercase)
                .map(|w| self.lookup.get(&w).copied().unwrap_or(UNK_ID))
                .take(max_len.saturating_sub(1)),
        );
        ids
    }

    /// Encodes a record; labels go from 1-based to 0-based here.
    pub fn encode(&self, record: &CorpusRecord, max_len: usize) -> Result<Sample> {
        if record.label == 0 {
            return Err(domain("labels are 1-based"));
        }
        Ok(Sample {
            tokens: self.encode_text(&record.text, max_len),
            label: record.label - 1,
        })
    }

    /// Strings for each id, skipping the classification token and padding.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .filter(|&&id| id != CLS_ID && id != PAD_ID)
            .map(|&id| self.word(id).unwrap_or(SPECIAL_STRINGS[1]).to_string())
            .collect()
    }
}

fn split(text: &str, lowercase: bool) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(move |w| {
        if lowercase {
            w.to_lowercase()
        } else {
            w.to_string()
        }
    })
}

/// Pads every sequence with `PAD` up to the longest one.
pub fn pad_batch(batch: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let width = batch.iter().map(Vec::len).max().unwrap_or(0);
    batch
        .iter()
        .map(|s| {
            let mut p = s.clone();
            p.resize(width, PAD_ID);
            p
        })
        .collect()
}

/// Deletes `⌊fraction · (len − 1)⌋` uniformly chosen non-CLS tokens,
/// preserving the order of the rest.
pub fn remove_random_tokens<R: Rng>(tokens: &[u32], fraction: f64, rng: &mut R) -> Vec<u32> {
    let content = tokens.len().saturating_sub(1);
    let drop = (fraction * content as f64).floor() as usize;
    if drop == 0 {
        return tokens.to_vec();
    }
    let mut removed = vec![false; content];
    for i in sample_indices(rng, content, drop) {
        removed[i] = true;
    }
    std::iter::once(tokens[0])
        .chain(
            tokens[1..]
                .iter()
                .zip(&removed)
                .filter(|(_, &r)| !r)
                .map(|(&t, _)| t),
        )
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builds_ranked_vocab() {
        let tok = Tokenizer::build(["a a b"], 1, None).unwrap();
        assert_eq!(tok.vocab_size(), 5);
        assert_eq!(tok.id("a"), 3);
        assert_eq!(tok.id("b"), 4);
        assert_eq!(tok.id("A"), 3);
    }

    #[test]
    fn min_freq_maps_rare_words_to_unk() {
        let tok = Tokenizer::build(["a a b"], 2, None).unwrap();
        assert_eq!(tok.vocab_size(), 4);
        assert_eq!(tok.id("b"), UNK_ID);
    }

    #[test]
    fn equal_frequency_ties_are_lexicographic() {
        let tok = Tokenizer::build(["zeta alpha mid"], 1, None).unwrap();
        assert_eq!(tok.id("alpha"), 3);
        assert_eq!(tok.id("mid"), 4);
        assert_eq!(tok.id("zeta"), 5);
    }

    #[test]
    fn max_size_truncates() {
        let tok = Tokenizer::build(["c c c b b a"], 1, Some(2)).unwrap();
        assert_eq!(tok.vocab_size(), 5);
        assert_eq!(tok.id("a"), UNK_ID);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(Tokenizer::build(std::iter::empty::<&str>(), 1, None).is_err());
    }

    #[test]
    fn special_strings_never_enter_the_vocab() {
        let tok = Tokenizer::build(["[CLS] [PAD] x"], 1, None).unwrap();
        assert_eq!(tok.vocab_size(), 4);
        assert_eq!(tok.id("[CLS]"), UNK_ID);
    }

    #[test]
    fn encode_examples() {
        let tok = Tokenizer::build(["a b"], 1, None).unwrap();
        let rec = CorpusRecord {
            text: "a b".into(),
            label: 2,
        };
        let s = tok.encode(&rec, 16).unwrap();
        assert_eq!(s.tokens, vec![CLS_ID, tok.id("a"), tok.id("b")]);
        assert_eq!(s.label, 1);
        assert_eq!(tok.encode_text("a zzz", 16), vec![CLS_ID, 3, UNK_ID]);
        assert_eq!(tok.encode_text("a b a b a b", 4).len(), 4);
        assert_eq!(tok.encode_text("a b a b a b", 4)[0], CLS_ID);
    }

    #[test]
    fn decode_round_trips_known_words() {
        let tok = Tokenizer::build(["the cat sat"], 1, None).unwrap();
        let ids = tok.encode_text("the cat sat", 10);
        assert_eq!(tok.decode(&ids), vec!["the", "cat", "sat"]);
    }

    #[test]
    fn lookup_survives_serde() {
        let tok = Tokenizer::build(["x y"], 1, None).unwrap();
        let json = serde_json::to_string(&tok).unwrap();
        let mut back: Tokenizer = serde_json::from_str(&json).unwrap();
        back.rebuild_lookup();
        assert_eq!(back, tok);
    }

    #[test]
    fn padding_extends_to_longest() {
        let padded = pad_batch(&[vec![0, 5], vec![0, 5, 6, 7]]);
        assert_eq!(padded[0], vec![0, 5, PAD_ID, PAD_ID]);
        assert_eq!(padded[1].len(), 4);
    }

    #[test]
    fn random_removal_drops_exact_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tokens: Vec<u32> = std::iter::once(CLS_ID).chain(10..21).collect();
        let out = remove_random_tokens(&tokens, 0.2, &mut rng);
        assert_eq!(out.len(), tokens.len() - 2);
        assert_eq!(out[0], CLS_ID);
        assert!(out.windows(2).skip(1).all(|w| w[0] < w[1]));
        assert_eq!(remove_random_tokens(&[CLS_ID, 4, 5], 0.2, &mut rng), vec![CLS_ID, 4, 5]);
    }
}
