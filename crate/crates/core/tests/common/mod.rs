//! Fixtures and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use lexilearn::encoding::{build_form_matrix, CueInventory, FormMatrix};
use lexilearn::lexicon::{EmbeddingTable, FrequencyTable};
use lexilearn::semantic::{build_semantic_matrix, SemanticMatrix};
use lexilearn::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

/// Three-word lexicon whose cue matrix has rank 3.
pub fn cup_cut_cub_words() -> Vec<String> {
    strings(&["cup", "cut", "cub"])
}

pub fn cup_cut_cub_semantics() -> Matrix {
    Matrix::from_rows(&[
        vec![0.37, 0.66, 0.61, 0.16],
        vec![0.38, 0.93, 0.95, 0.86],
        vec![0.52, 0.53, 0.08, 0.9],
    ])
    .unwrap()
}

/// A word list with its form matrix, gold semantics and token frequencies.
pub struct Task {
    pub words: Vec<String>,
    pub inventory: CueInventory,
    pub c: FormMatrix,
    pub s: SemanticMatrix,
    pub freq: FrequencyTable,
}

fn trigram_set(word: &str) -> BTreeSet<String> {
    lexilearn::encoding::extract_trigrams(word).unwrap().into_iter().collect()
}

/// `n` words over `alphabet` of length `min_len..=max_len` with pairwise
/// distinct trigram sets, random non-constant embeddings of `dim`
/// components and frequencies in `1..=max_freq`.
pub fn random_task(seed: u64, n: usize, alphabet: &[char], min_len: usize, max_len: usize, dim: usize, max_freq: u64) -> Task {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = Vec::new();
    let mut seen_sets = BTreeSet::new();
    while words.len() < n {
        let len = rng.random_range(min_len..=max_len);
        let w: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        if seen_sets.insert(trigram_set(&w)) {
            words.push(w);
        }
    }
    let mut emb = EmbeddingTable::new(dim);
    for w in &words {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        emb.insert(w.clone(), v).unwrap();
    }
    let freq: FrequencyTable = words
        .iter()
        .map(|w| (w.clone(), rng.random_range(1..=max_freq)))
        .collect();
    let inventory = CueInventory::build(&words, 3).unwrap();
    let c = build_form_matrix(&words, &inventory).unwrap();
    let s = build_semantic_matrix(&words, &emb).unwrap();
    Task {
        words,
        inventory,
        c,
        s,
        freq,
    }
}

/// The pinned 20-word task used for the deep network criteria.
pub fn fiddl_toy() -> Task {
    random_task(20, 20, &['a', 'b'], 2, 6, 5, 40)
}

pub const FIDDL_TOY_HIDDEN: usize = 32;
pub const FIDDL_TOY_RATE: f64 = 0.01;
pub const FIDDL_TOY_BATCH: usize = 16;
pub const FIDDL_TOY_SCALE: u64 = 1;
pub const FIDDL_TOY_EPOCHS: usize = 200;
pub const FIDDL_TOY_SEED: u64 = 7;

/// Dense matrix of a sparse form matrix, built cell by cell.
pub fn dense(c: &FormMatrix) -> Vec<Vec<f64>> {
    (0..c.rows())
        .map(|i| (0..c.cols()).map(|j| f64::from(c.get(i, j))).collect())
        .collect()
}

/// Dense Rescorla-Wagner reference: full vocabulary, every outcome
/// updated on every utterance, activations summed in utterance order.
pub struct DenseRw {
    pub rate: f64,
    pub ids: HashMap<String, usize>,
    pub w: Vec<Vec<f64>>,
}

impl DenseRw {
    pub fn new(rate: f64) -> Self {
        DenseRw {
            rate,
            ids: HashMap::new(),
            w: Vec::new(),
        }
    }

    fn id(&mut self, word: &str) -> usize {
        if let Some(&i) = self.ids.get(word) {
            return i;
        }
        let i = self.w.len();
        self.ids.insert(word.to_string(), i);
        for row in &mut self.w {
            row.push(0.0);
        }
        self.w.push(vec![0.0; i + 1]);
        i
    }

    pub fn update(&mut self, utterance: &[String]) {
        let mut cues = Vec::new();
        for u in utterance {
            let i = self.id(u);
            if !cues.contains(&i) {
                cues.push(i);
            }
        }
        let n = self.w.len();
        let deltas: Vec<f64> = (0..n)
            .map(|o| {
                let mut a = 0.0;
                for &c in &cues {
                    a += self.w[c][o];
                }
                let t = if cues.contains(&o) { 1.0 } else { 0.0 };
                self.rate * (t - a)
            })
            .collect();
        for &c in &cues {
            for (w, d) in self.w[c].iter_mut().zip(&deltas) {
                *w += d;
            }
        }
    }

    pub fn weight(&self, cue: &str, outcome: &str) -> f64 {
        match (self.ids.get(cue), self.ids.get(outcome)) {
            (Some(&c), Some(&o)) => self.w[c][o],
            _ => 0.0,
        }
    }
}

/// Coltheart N by direct pairwise comparison.
pub fn brute_ncount(word: &str, lexicon: &[String]) -> usize {
    let w: Vec<char> = word.chars().collect();
    let distinct: BTreeSet<&String> = lexicon.iter().collect();
    distinct
        .into_iter()
        .filter(|v| {
            let v: Vec<char> = v.chars().collect();
            v.len() == w.len() && v.iter().zip(&w).filter(|(a, b)| a != b).count() == 1
        })
        .count()
}

/// Pearson correlation by the textbook formula.
pub fn pearson_direct(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Index of the gold row most correlated with `v` (first on ties).
pub fn nearest_direct(v: &[f64], s: &Matrix) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..s.rows() {
        let r = pearson_direct(v, s.row(i));
        if r > best.1 {
            best = (i, r);
        }
    }
    best.0
}

/// Share of rows of `pred` whose nearest gold row is their own.
pub fn self_accuracy(pred: &Matrix, s: &Matrix) -> f64 {
    let hits = (0..pred.rows()).filter(|&i| nearest_direct(pred.row(i), s) == i).count();
    hits as f64 / pred.rows() as f64
}

/// Fresh copy of the three-word end-to-end fixture in a temporary
/// directory; its config is `toy.conf` and outputs go to `out/`.
pub fn toy_workspace() -> tempfile::TempDir {
    let src = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy");
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(&src).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}
