//! Character-level byte-pair tokenizer trained on SMILES corpora.
//!
//! Training greedily merges the most frequent adjacent symbol pair; frequency
//! ties break toward the lexicographically smaller pair, so retraining on the
//! same corpus reproduces the same vocabulary. Encoding applies the learned
//! merges in priority order, each swept left-to-right.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const CLS_ID: u32 = 0;
pub const MASK_ID: u32 = 1;
pub const PAD_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
/// First id available to alphabet and merged tokens.
pub const BASE_ID: u32 = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vocab size {given} is below the base alphabet size {alphabet}")]
    VocabTooSmall { given: usize, alphabet: usize },
    #[error("invalid vocabulary file: {0}")]
    Invalid(String),
}

/// Trained vocabulary: base alphabet plus an ordered merge list. The id table
/// is fully determined by (alphabet, merges); special ids sit below
/// [`BASE_ID`], outside the merged-token range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpeVocab {
    alphabet: Vec<char>,
    merges: Vec<(String, String)>,
    #[serde(skip)]
    token_to_id: BTreeMap<String, u32>,
    #[serde(skip)]
    id_to_token: Vec<String>,
}

impl BpeVocab {
    /// Train on a corpus with a target vocabulary size counted as
    /// `alphabet + merges` (specials are extra).
    pub fn train(corpus: &[String], vocab_size: usize) -> Result<Self, VocabError> {
        if corpus.is_empty() || corpus.iter().all(|s| s.is_empty()) {
            return Err(VocabError::EmptyCorpus);
        }
        let mut alphabet: Vec<char> = corpus.iter().flat_map(|s| s.chars()).collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        if vocab_size < alphabet.len() {
            return Err(VocabError::VocabTooSmall { given: vocab_size, alphabet: alphabet.len() });
        }
        let n_merges = vocab_size - alphabet.len();

        let mut sequences: Vec<Vec<String>> = corpus
            .iter()
            .map(|s| s.chars().map(String::from).collect())
            .collect();

        let mut merges = Vec::with_capacity(n_merges);
        for _ in 0..n_merges {
            let mut counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
            for seq in &sequences {
                for pair in seq.windows(2) {
                    *counts.entry((pair[0].as_str(), pair[1].as_str())).or_insert(0) += 1;
                }
            }
            // max count, ties to the lexicographically smaller pair: BTreeMap
            // iterates keys in ascending order, so strictly-greater wins keep
            // the first (smallest) pair among equals.
            let best = counts.iter().fold(None, |acc: Option<((&str, &str), u64)>, (&k, &v)| {
                match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((k, v)),
                }
            });
            let Some(((a, b), _)) = best else { break };
            let merge = (a.to_string(), b.to_string());
            for seq in &mut sequences {
                apply_merge(seq, &merge);
            }
            merges.push(merge);
        }

        let mut vocab = BpeVocab { alphabet, merges, token_to_id: BTreeMap::new(), id_to_token: Vec::new() };
        vocab.rebuild_tables();
        Ok(vocab)
    }

    /// Recreate the id tables from (alphabet, merges); returns an error if a
    /// merge references symbols that cannot exist at that point.
    pub fn rebuild(mut self) -> Result<Self, VocabError> {
        let mut known: std::collections::BTreeSet<String> =
            self.alphabet.iter().map(|c| c.to_string()).collect();
        if known.len() != self.alphabet.len() {
            return Err(VocabError::Invalid("duplicate alphabet entries".into()));
        }
        for (a, b) in &self.merges {
            if !known.contains(a) || !known.contains(b) {
                return Err(VocabError::Invalid(format!("merge ({a},{b}) references unknown symbol")));
            }
            known.insert(format!("{a}{b}"));
        }
        self.rebuild_tables();
        Ok(self)
    }

    fn rebuild_tables(&mut self) {
        self.id_to_token = vec!["[CLS]".into(), "[MASK]".into(), "[PAD]".into(), "[UNK]".into()];
        self.token_to_id.clear();
        for c in &self.alphabet {
            let t = c.to_string();
            self.token_to_id.insert(t.clone(), self.id_to_token.len() as u32);
            self.id_to_token.push(t);
        }
        for (a, b) in &self.merges {
            let t = format!("{a}{b}");
            // a merged token may already exist if two merge paths produce the
            // same string; keep the first id
            if !self.token_to_id.contains_key(&t) {
                self.token_to_id.insert(t.clone(), self.id_to_token.len() as u32);
                self.id_to_token.push(t);
            }
        }
    }

    pub fn alphabet_len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Total number of ids, specials included.
    pub fn n_ids(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Encode to a CLS-prefixed id sequence. Characters outside the training
    /// alphabet become UNK and break merge continuity.
    pub fn encode(&self, s: &str) -> Vec<u32> {
        let mut out = vec![CLS_ID];
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, out: &mut Vec<u32>| {
            if run.is_empty() {
                return;
            }
            for (a, b) in &self.merges {
                apply_merge(run, &(a.clone(), b.clone()));
            }
            for tok in run.drain(..) {
                out.push(self.token_to_id[&tok]);
            }
        };
        for c in s.chars() {
            if self.token_to_id.contains_key(c.to_string().as_str()) {
                run.push(c.to_string());
            } else {
                flush(&mut run, &mut out);
                out.push(UNK_ID);
            }
        }
        flush(&mut run, &mut out);
        out
    }

    /// Concatenate token strings; specials contribute nothing.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| id >= BASE_ID)
            .filter_map(|&id| self.id_to_token.get(id as usize))
            .cloned()
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vocab serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, VocabError> {
        let v: BpeVocab =
            serde_json::from_str(s).map_err(|e| VocabError::Invalid(e.to_string()))?;
        v.rebuild()
    }
}

/// Replace every non-overlapping occurrence of the pair, left to right.
fn apply_merge(seq: &mut Vec<String>, merge: &(String, String)) {
    let mut i = 0;
    while i + 1 < seq.len() {
        if seq[i] == merge.0 && seq[i + 1] == merge.1 {
            let joined = format!("{}{}", seq[i], seq[i + 1]);
            seq[i] = joined;
            seq.remove(i + 1);
        }
        i += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        // hand-counted pairs: (C,C) appears 3 times, (C,O) twice, (C,N) once
        let c = corpus(&["CCO", "CCO", "CCN"]);
        let v = BpeVocab::train(&c, 3 + 1).unwrap(); // alphabet {C,N,O} plus one merge
        assert_eq!(v.merges(), &[("C".to_string(), "C".to_string())]);
    }

    #[test]
    fn zero_merges_gives_character_vocab() {
        let c = corpus(&["CCO"]);
        let v = BpeVocab::train(&c, 2).unwrap(); // alphabet {C,O}
        assert!(v.merges().is_empty());
        assert_eq!(v.n_ids(), 4 + 2);
    }

    #[test]
    fn training_is_deterministic() {
        let c = corpus(&["CC(=O)Oc1ccccc1C(=O)O", "CC(C)Cc1ccc(cc1)C(C)C(=O)O", "c1ccccc1"]);
        let a = BpeVocab::train(&c, 40).unwrap();
        let b = BpeVocab::train(&c, 40).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_is_cls_prefixed_and_roundtrips() {
        let c = corpus(&["CCO", "CCN", "c1ccccc1"]);
        let v = BpeVocab::train(&c, 16).unwrap();
        assert_eq!(v.encode(""), vec![CLS_ID]);
        for s in ["CCO", "c1ccccc1", "NCCO", "CON"] {
            let ids = v.encode(s);
            assert_eq!(ids[0], CLS_ID);
            assert_eq!(v.decode(&ids), s, "roundtrip {s}");
        }
    }

    #[test]
    fn unknown_characters_become_unk() {
        let v = BpeVocab::train(&corpus(&["CCO"]), 8).unwrap();
        let ids = v.encode("CXC");
        assert!(ids.contains(&UNK_ID));
        assert_eq!(v.decode(&ids), "CC");
    }

    /// Slow oracle: repeatedly find the highest-priority merge present
    /// anywhere in the sequence and apply only its leftmost occurrence.
    fn encode_one_at_a_time(v: &BpeVocab, s: &str) -> Vec<u32> {
        let mut seq: Vec<String> = s.chars().map(String::from).collect();
        loop {
            let mut applied = false;
            'merges: for (a, b) in v.merges() {
                for i in 0..seq.len().saturating_sub(1) {
                    if &seq[i] == a && &seq[i + 1] == b {
                        seq[i] = format!("{a}{b}");
                        seq.remove(i + 1);
                        applied = true;
                        break 'merges;
                    }
                }
            }
            if !applied {
                break;
            }
        }
        let mut out = vec![CLS_ID];
        out.extend(seq.iter().map(|t| v.token_id(t).unwrap()));
        out
    }

    #[test]
    fn greedy_encode_matches_slow_oracle() {
        let strings = [
            "CC(=O)Oc1ccccc1C(=O)O",
            "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
            "c1ccc2ccccc2c1",
            "N[C@@H](C)C(=O)O",
            "CCCCCCCC",
            "c1ccccc1",
            "OCC(O)CO",
            "CC(C)(C)OC(=O)N",
        ];
        let c: Vec<String> = strings.iter().map(|s| s.to_string()).collect();
        let v = BpeVocab::train(&c, 48).unwrap();
        for s in &c {
            assert_eq!(v.encode(s), encode_one_at_a_time(&v, s), "mismatch for {s}");
        }
    }

    #[test]
    fn json_roundtrip_rebuilds_id_table() {
        let v = BpeVocab::train(&corpus(&["CCO", "CCN"]), 8).unwrap();
        let loaded = BpeVocab::from_json(&v.to_json()).unwrap();
        assert_eq!(v, loaded);
        assert_eq!(v.encode("CCO"), loaded.encode("CCO"));
    }

    #[test]
    fn invalid_vocab_files_are_rejected() {
        assert!(BpeVocab::from_json("{").is_err());
        // merge referencing a symbol that cannot exist yet
        let bad = r#"{"alphabet":["C"],"merges":[["C","Z"]]}"#;
        assert!(matches!(BpeVocab::from_json(bad), Err(VocabError::Invalid(_))));
    }

    #[test]
    fn errors() {
        assert_eq!(BpeVocab::train(&[], 10), Err(VocabError::EmptyCorpus));
        assert!(matches!(
            BpeVocab::train(&corpus(&["CCO"]), 1),
            Err(VocabError::VocabTooSmall { .. })
        ));
    }
}
