//! Contextual independence: a word-to-word Rescorla-Wagner network in
//! which the words of an utterance serve both as cues and as outcomes.
//! A word's contextual independence is its weight to itself.
//!
//! Weights are stored sparsely per cue. An update only visits outcomes
//! that are present in the utterance or already hold a weight from one of
//! its cues; every other outcome has zero activation and zero target, so
//! its weights would not change.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexicon::UtteranceStream;

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceNetwork {
    rate: f64,
    vocab: HashMap<String, u32>,
    words: Vec<String>,
    /// cue id -> (outcome id -> weight)
    rows: Vec<HashMap<u32, f64>>,
    utterances_seen: u64,
}

impl CooccurrenceNetwork {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {rate}")));
        }
        Ok(CooccurrenceNetwork {
            rate,
            vocab: HashMap::new(),
            words: Vec::new(),
            rows: Vec::new(),
            utterances_seen: 0,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn utterances_seen(&self) -> u64 {
        self.utterances_seen
    }

    /// Words in order of first sight; a word's position is its id.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.vocab.get(word).copied()
    }

    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.vocab.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.vocab.insert(word.to_string(), id);
        self.words.push(word.to_string());
        self.rows.push(HashMap::new());
        id
    }

    /// Weight from `cue` to `outcome`; 0 for absent entries or unseen words.
    pub fn weight(&self, cue: &str, outcome: &str) -> f64 {
        match (self.id(cue), self.id(outcome)) {
            (Some(c), Some(o)) => self.weight_by_id(c, o),
            _ => 0.0,
        }
    }

    pub fn weight_by_id(&self, cue: u32, outcome: u32) -> f64 {
        self.rows[cue as usize].get(&outcome).copied().unwrap_or(0.0)
    }

    pub fn nonzero_count(&self) -> usize {
        self.rows.iter().map(HashMap::len).sum()
    }

    /// One Rescorla-Wagner step on an utterance. Repeated words count once;
    /// activations are taken from the weights before the update.
    pub fn update<S: AsRef<str>>(&mut self, utterance: &[S]) -> Result<()> {
        let mut cues: Vec<u32> = Vec::with_capacity(utterance.len());
        for w in utterance {
            let id = self.intern(w.as_ref());
            if !cues.contains(&id) {
                cues.push(id);
            }
        }
        if cues.is_empty() {
            return Ok(());
        }
        let mut present = cues.clone();
        present.sort_unstable();

        let mut affected = present.clone();
        for &c in &cues {
            affected.extend(self.rows[c as usize].keys().copied());
        }
        affected.sort_unstable();
        affected.dedup();

        let deltas: Vec<(u32, f64)> = affected
            .iter()
            .map(|&o| {
                let activation: f64 = cues.iter().map(|&c| self.weight_by_id(c, o)).sum();
                let target = if present.binary_search(&o).is_ok() { 1.0 } else { 0.0 };
                (o, self.rate * (target - activation))
            })
            .filter(|&(_, d)| d != 0.0)
            .collect();

        for &c in &cues {
            let row = &mut self.rows[c as usize];
            for &(o, d) in &deltas {
                let w = row.entry(o).or_insert(0.0);
                *w += d;
                if !w.is_finite() {
                    return Err(Error::Divergence {
                        stage: "rescorla-wagner",
                        step: self.utterances_seen as usize,
                        detail: format!("non-finite weight {} -> {}", self.words[c as usize], self.words[o as usize]),
                    });
                }
            }
        }
        self.utterances_seen += 1;
        Ok(())
    }

    /// Diagonal weight of `word`; 0 for unseen words.
    pub fn contextual_independence(&self, word: &str) -> f64 {
        self.id(word).map_or(0.0, |i| self.weight_by_id(i, i))
    }

    /// `cue<TAB>outcome<TAB>weight` for every stored weight, by cue id then outcome id.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (c, row) in self.rows.iter().enumerate() {
            let mut entries: Vec<(&u32, &f64)> = row.iter().collect();
            entries.sort_unstable_by_key(|(o, _)| **o);
            for (&o, w) in entries {
                writeln!(out, "{}\t{}\t{}", self.words[c], self.words[o as usize], w)?;
            }
        }
        Ok(())
    }

    pub fn write_vocab<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for w in &self.words {
            writeln!(out, "{w}")?;
        }
        Ok(())
    }

    /// Rebuild from a vocabulary listing and weight triplets.
    pub fn from_parts(rate: f64, utterances_seen: u64, vocab: &str, triplets: &str, label: &Path) -> Result<Self> {
        let mut net = CooccurrenceNetwork::new(rate)?;
        for w in vocab.lines().filter(|l| !l.is_empty()) {
            if net.vocab.contains_key(w) {
                return Err(Error::Duplicate(w.to_string()));
            }
            net.intern(w);
        }
        for (n, line) in triplets.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut f = line.split('\t');
            let (Some(c), Some(o), Some(w), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(Error::parse(label, n + 1, "expected cue<TAB>outcome<TAB>weight"));
            };
            let (Some(c), Some(o)) = (net.id(c), net.id(o)) else {
                return Err(Error::parse(label, n + 1, "word not in vocabulary"));
            };
            let w: f64 = w
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(label, n + 1, format!("bad weight {w:?}")))?;
            net.rows[c as usize].insert(o, w);
        }
        net.utterances_seen = utterances_seen;
        Ok(net)
    }
}

/// Apply `net.update` to `utterance`.
pub fn rw_update<S: AsRef<str>>(net: &mut CooccurrenceNetwork, utterance: &[S]) -> Result<()> {
    net.update(utterance)
}

/// One pass over the corpus in order.
pub fn train_cind<R: BufRead>(net: &mut CooccurrenceNetwork, corpus: UtteranceStream<R>) -> Result<()> {
    let mut corpus = corpus;
    while let Some(utt) = corpus.next() {
        let utt = utt?;
        net.update(&utt).map_err(|e| match e {
            Error::Divergence { stage, detail, .. } => Error::Divergence {
                stage,
                step: corpus.line(),
                detail: format!("{detail} (corpus line {})", corpus.line()),
            },
            other => other,
        })?;
    }
    Ok(())
}

pub fn contextual_independence(net: &CooccurrenceNetwork, word: &str) -> f64 {
    net.contextual_independence(word)
}

/// `ln(value + epsilon)`; `None` for negative values or a non-positive epsilon.
pub fn log_transform_cind(value: f64, epsilon: f64) -> Option<f64> {
    (value >= 0.0 && epsilon > 0.0).then(|| (value + epsilon).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn train(net: &mut CooccurrenceNetwork, text: &str) {
        train_cind(net, UtteranceStream::new(Cursor::new(text.to_string()), "<t>", true)).unwrap();
    }

    #[test]
    fn single_word_geometric() {
        let mut net = CooccurrenceNetwork::new(0.1).unwrap();
        net.update(&["a"]).unwrap();
        assert!((net.weight("a", "a") - 0.1).abs() < 1e-15);
        net.update(&["a"]).unwrap();
        net.update(&["a"]).unwrap();
        assert!((net.contextual_independence("a") - 0.271).abs() < 1e-12);
    }

    #[test]
    fn pair_converges_to_half() {
        let mut net = CooccurrenceNetwork::new(0.1).unwrap();
        for _ in 0..500 {
            net.update(&["a", "b"]).unwrap();
        }
        for (c, o) in [("a", "a"), ("b", "a"), ("a", "b"), ("b", "b")] {
            assert!((net.weight(c, o) - 0.5).abs() <= 1e-6, "{c}->{o}");
        }
    }

    #[test]
    fn update_is_local() {
        let mut net = CooccurrenceNetwork::new(0.1).unwrap();
        for _ in 0..4 {
            net.update(&["a"]).unwrap();
        }
        let before = net.weight("a", "a");
        net.update(&["b"]).unwrap();
        assert_eq!(net.weight("a", "a").to_bits(), before.to_bits());
        assert_eq!(net.weight("a", "b"), 0.0);
        assert_eq!(net.weight("b", "a"), 0.0);
    }

    #[test]
    fn duplicates_within_utterance_collapse() {
        let mut a = CooccurrenceNetwork::new(0.1).unwrap();
        let mut b = CooccurrenceNetwork::new(0.1).unwrap();
        a.update(&["x", "y", "x"]).unwrap();
        b.update(&["x", "y"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corpus_closed_form_and_order() {
        let mut net = CooccurrenceNetwork::new(0.001).unwrap();
        train(&mut net, &"a\n".repeat(50));
        let expect = 1.0 - 0.999f64.powi(50);
        assert!((net.contextual_independence("a") - expect).abs() < 1e-12);

        let mut empty = CooccurrenceNetwork::new(0.1).unwrap();
        train(&mut empty, "\n\n");
        assert_eq!(empty, CooccurrenceNetwork::new(0.1).unwrap());

        // hand computation, rate 0.1:
        // "a b" then "a": w(a,a) = 0.1, then 0.1 + 0.1 * (1 - 0.1) = 0.19
        // "a" then "a b": w(a,a) = 0.1, then activation 0.1 + 0 -> 0.1 + 0.1 * 0.9 = 0.19
        // outcome b differs, so compare w(a,b): 0.1 - 0.1 * 0.1 = 0.09 vs 0.1
        let mut first = CooccurrenceNetwork::new(0.1).unwrap();
        train(&mut first, "a b\na\n");
        let mut second = CooccurrenceNetwork::new(0.1).unwrap();
        train(&mut second, "a\na b\n");
        assert!((first.weight("a", "b") - 0.09).abs() < 1e-15);
        assert!((second.weight("a", "b") - 0.1).abs() < 1e-15);
    }

    #[test]
    fn unseen_word_is_zero() {
        let net = CooccurrenceNetwork::new(0.1).unwrap();
        assert_eq!(contextual_independence(&net, "zzz"), 0.0);
    }

    #[test]
    fn log_transform() {
        assert!(log_transform_cind(1.0, 1e-9).unwrap().abs() < 1e-8);
        assert_eq!(log_transform_cind(0.0, 1e-9).unwrap(), 1e-9f64.ln());
        assert!(log_transform_cind(0.2, 1e-9).unwrap() < log_transform_cind(0.3, 1e-9).unwrap());
        assert_eq!(log_transform_cind(-0.1, 1e-9), None);
    }

    #[test]
    fn triplet_round_trip_is_exact() {
        let mut net = CooccurrenceNetwork::new(0.013).unwrap();
        train(&mut net, "a b c\nb c\nc d a\na\nd b\n");
        let mut trip = Vec::new();
        let mut vocab = Vec::new();
        net.write_triplets(&mut trip).unwrap();
        net.write_vocab(&mut vocab).unwrap();
        let back = CooccurrenceNetwork::from_parts(
            0.013,
            net.utterances_seen(),
            std::str::from_utf8(&vocab).unwrap(),
            std::str::from_utf8(&trip).unwrap(),
            Path::new("<t>"),
        )
        .unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn divergence_is_reported() {
        let mut net = CooccurrenceNetwork::new(1e300).unwrap();
        let text = "a b c d e\n".repeat(10);
        let err = train_cind(&mut net, UtteranceStream::new(Cursor::new(text), "<t>", true)).unwrap_err();
        assert!(matches!(err, Error::Divergence { stage: "rescorla-wagner", .. }), "{err:?}");
    }
}
