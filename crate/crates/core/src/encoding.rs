//! Boundary-marked letter n-gram cues and the sparse binary form matrix.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const BOUNDARY: char = '#';
pub const DEFAULT_NGRAM: usize = 3;

fn validate_word(word: &str) -> Result<()> {
    if word.is_empty() {
        return Err(Error::InvalidWord {
            word: word.to_string(),
            reason: "empty word",
        });
    }
    if word.contains(BOUNDARY) {
        return Err(Error::InvalidWord {
            word: word.to_string(),
            reason: "contains the boundary symbol '#'",
        });
    }
    if word.chars().any(char::is_whitespace) {
        return Err(Error::InvalidWord {
            word: word.to_string(),
            reason: "contains whitespace",
        });
    }
    Ok(())
}

/// Overlapping character n-grams of `#word#`, left to right, first
/// occurrence kept. A padded string shorter than `n` is its own single cue.
pub fn extract_ngrams(word: &str, n: usize) -> Result<Vec<String>> {
    validate_word(word)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n-gram size must be positive".into()));
    }
    let padded: Vec<char> = std::iter::once(BOUNDARY)
        .chain(word.chars())
        .chain(std::iter::once(BOUNDARY))
        .collect();
    if padded.len() < n {
        return Ok(vec![padded.into_iter().collect()]);
    }
    let mut out: Vec<String> = Vec::with_capacity(padded.len() - n + 1);
    for window in padded.windows(n) {
        let gram: String = window.iter().collect();
        if !out.contains(&gram) {
            out.push(gram);
        }
    }
    Ok(out)
}

pub fn extract_trigrams(word: &str) -> Result<Vec<String>> {
    extract_ngrams(word, DEFAULT_NGRAM)
}

/// Ordered cue set; the position of a cue is its column in the form matrix.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CueInventory {
    cues: Vec<String>,
    index: HashMap<String, u32>,
    ngram: usize,
}

impl CueInventory {
    /// Union of all cues of `words` in first-encounter order.
    pub fn build(words: &[String], ngram: usize) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptyWordList);
        }
        let per_word = words
            .par_iter()
            .map(|w| extract_ngrams(w, ngram))
            .collect::<Result<Vec<_>>>()?;
        let mut inv = CueInventory {
            cues: Vec::new(),
            index: HashMap::new(),
            ngram,
        };
        for grams in per_word {
            for g in grams {
                inv.push(g);
            }
        }
        Ok(inv)
    }

    /// Rebuild from an explicit cue list (e.g. a saved inventory).
    pub fn from_cues(cues: Vec<String>, ngram: usize) -> Result<Self> {
        let mut inv = CueInventory {
            cues: Vec::with_capacity(cues.len()),
            index: HashMap::new(),
            ngram,
        };
        for c in cues {
            if inv.index.contains_key(&c) {
                return Err(Error::Duplicate(c));
            }
            inv.push(c);
        }
        Ok(inv)
    }

    fn push(&mut self, cue: String) {
        if !self.index.contains_key(&cue) {
            self.index.insert(cue.clone(), self.cues.len() as u32);
            self.cues.push(cue);
        }
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    pub fn ngram(&self) -> usize {
        self.ngram
    }

    pub fn cues(&self) -> &[String] {
        &self.cues
    }

    pub fn id(&self, cue: &str) -> Option<u32> {
        self.index.get(cue).copied()
    }
}

pub fn build_cue_inventory(words: &[String]) -> Result<CueInventory> {
    CueInventory::build(words, DEFAULT_NGRAM)
}

/// Binary word-by-cue matrix in compressed row form. Stored cells are 1,
/// absent cells 0; column ids within a row are ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormMatrix {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    row_words: Vec<String>,
}

impl FormMatrix {
    /// Rows given as lists of active column ids; duplicates collapse.
    pub fn from_rows(cols: usize, rows: Vec<Vec<u32>>, row_words: Vec<String>) -> Result<Self> {
        if rows.len() != row_words.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} row words",
                rows.len(),
                row_words.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (mut r, w) in rows.into_iter().zip(&row_words) {
            r.sort_unstable();
            r.dedup();
            if let Some(&c) = r.last() {
                if c as usize >= cols {
                    return Err(Error::Shape(format!(
                        "row {w:?} has column {c} outside 0..{cols}"
                    )));
                }
            }
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        Ok(FormMatrix {
            cols,
            row_ptr,
            col_idx,
            row_words,
        })
    }

    /// Binary matrix from a dense 0/1 matrix; anything other than 0 or 1 is rejected.
    pub fn from_dense(dense: &Matrix, row_words: Vec<String>) -> Result<Self> {
        let mut rows = Vec::with_capacity(dense.rows());
        for (i, r) in dense.iter_rows().enumerate() {
            let mut active = Vec::new();
            for (j, &v) in r.iter().enumerate() {
                if v == 1.0 {
                    active.push(j as u32);
                } else if v != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "form matrix cell ({i},{j}) = {v} is not binary"
                    )));
                }
            }
            rows.push(active);
        }
        FormMatrix::from_rows(dense.cols(), rows, row_words)
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_words(&self) -> &[String] {
        &self.row_words
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        u8::from(self.row(i).binary_search(&(j as u32)).is_ok())
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows(), self.cols);
        for i in 0..self.rows() {
            for &j in self.row(i) {
                m[(i, j as usize)] = 1.0;
            }
        }
        m
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &FormMatrix) -> Result<FormMatrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot stack {} and {} columns",
                self.cols, other.cols
            )));
        }
        let rows = (0..self.rows())
            .map(|i| self.row(i).to_vec())
            .chain((0..other.rows()).map(|i| other.row(i).to_vec()))
            .collect();
        let words = self
            .row_words
            .iter()
            .chain(&other.row_words)
            .cloned()
            .collect();
        FormMatrix::from_rows(self.cols, rows, words)
    }

    /// Subset of rows, in the given order (rows may repeat).
    pub fn select_rows(&self, ids: &[usize]) -> FormMatrix {
        let rows = ids.iter().map(|&i| self.row(i).to_vec()).collect();
        let words = ids.iter().map(|&i| self.row_words[i].clone()).collect();
        FormMatrix::from_rows(self.cols, rows, words).expect("rows of a valid matrix")
    }

    /// Dense TSV dump: header of cue labels, then `word` and one 0/1 per cue.
    pub fn write_dense_tsv<W: Write>(&self, inventory: &CueInventory, mut out: W) -> std::io::Result<()> {
        write!(out, "word")?;
        for c in inventory.cues() {
            write!(out, "\t{c}")?;
        }
        writeln!(out)?;
        for i in 0..self.rows() {
            write!(out, "{}", self.row_words[i])?;
            let mut active = self.row(i).iter().peekable();
            for j in 0..self.cols as u32 {
                let v = if active.peek() == Some(&&j) {
                    active.next();
                    1
                } else {
                    0
                };
                write!(out, "\t{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Sparse TSV: `word<TAB>id id id` per row.
    pub fn write_sparse_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.rows() {
            write!(out, "{}\t", self.row_words[i])?;
            let ids: Vec<String> = self.row(i).iter().map(u32::to_string).collect();
            writeln!(out, "{}", ids.join(" "))?;
        }
        Ok(())
    }

    pub fn read_sparse_tsv(text: &str, cols: usize, label: &std::path::Path) -> Result<FormMatrix> {
        let mut rows = Vec::new();
        let mut words = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (w, ids) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(label, n + 1, "expected word<TAB>ids"))?;
            let ids = ids
                .split_whitespace()
                .map(|s| s.parse::<u32>())
                .collect::<std::result::Result<Vec<u32>, _>>()
                .map_err(|e| Error::parse(label, n + 1, e.to_string()))?;
            words.push(w.to_string());
            rows.push(ids);
        }
        FormMatrix::from_rows(cols, rows, words)
    }
}

/// Encode `words` against `inventory`; cell (i, j) is 1 iff cue j occurs in word i.
pub fn build_form_matrix(words: &[String], inventory: &CueInventory) -> Result<FormMatrix> {
    let rows = words
        .par_iter()
        .map(|w| {
            extract_ngrams(w, inventory.ngram())?
                .into_iter()
                .map(|g| {
                    inventory.id(&g).ok_or_else(|| Error::UnknownCue {
                        word: w.clone(),
                        cue: g.clone(),
                    })
                })
                .collect::<Result<Vec<u32>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    FormMatrix::from_rows(inventory.len(), rows, words.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn trigram_examples() {
        assert_eq!(extract_trigrams("cup").unwrap(), ["#cu", "cup", "up#"]);
        assert_eq!(extract_trigrams("cut").unwrap(), ["#cu", "cut", "ut#"]);
        assert_eq!(extract_trigrams("a").unwrap(), ["#a#"]);
        assert_eq!(extract_trigrams("aaaa").unwrap(), ["#aa", "aaa", "aa#"]);
    }

    #[test]
    fn trigram_rejects_bad_words() {
        assert!(matches!(extract_trigrams(""), Err(Error::InvalidWord { .. })));
        assert!(matches!(extract_trigrams("a#b"), Err(Error::InvalidWord { .. })));
        assert!(matches!(extract_trigrams("a b"), Err(Error::InvalidWord { .. })));
    }

    #[test]
    fn trigrams_count_unicode_scalars() {
        assert_eq!(extract_trigrams("öö").unwrap(), ["#öö", "öö#"]);
    }

    #[test]
    fn inventory_first_encounter_order() {
        let inv = build_cue_inventory(&words(&["cup", "cut", "cub"])).unwrap();
        assert_eq!(inv.cues(), ["#cu", "cup", "up#", "cut", "ut#", "cub", "ub#"]);
        let once = build_cue_inventory(&words(&["cup"])).unwrap();
        let twice = build_cue_inventory(&words(&["cup", "cup"])).unwrap();
        assert_eq!(once, twice);
        assert!(matches!(build_cue_inventory(&[]), Err(Error::EmptyWordList)));
        match build_cue_inventory(&words(&["ok", "b#d"])) {
            Err(Error::InvalidWord { word, .. }) => assert_eq!(word, "b#d"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn form_matrix_single_word_and_unknown_cue() {
        let inv = build_cue_inventory(&words(&["cup"])).unwrap();
        let c = build_form_matrix(&words(&["cup"]), &inv).unwrap();
        assert_eq!(c.to_dense().as_slice(), &[1.0, 1.0, 1.0]);
        match build_form_matrix(&words(&["cub"]), &inv) {
            Err(Error::UnknownCue { word, cue }) => {
                assert_eq!(word, "cub");
                assert_eq!(cue, "cub");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dense_dump_has_labels() {
        let ws = words(&["cup", "cut"]);
        let inv = build_cue_inventory(&ws).unwrap();
        let c = build_form_matrix(&ws, &inv).unwrap();
        let mut buf = Vec::new();
        c.write_dense_tsv(&inv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "word\t#cu\tcup\tup#\tcut\tut#\ncup\t1\t1\t1\t0\t0\ncut\t1\t0\t0\t1\t1\n"
        );
    }

    #[test]
    fn sparse_round_trip() {
        let ws = words(&["kass", "kassi", "ema"]);
        let inv = build_cue_inventory(&ws).unwrap();
        let c = build_form_matrix(&ws, &inv).unwrap();
        let mut buf = Vec::new();
        c.write_sparse_tsv(&mut buf).unwrap();
        let back = FormMatrix::read_sparse_tsv(
            std::str::from_utf8(&buf).unwrap(),
            inv.len(),
            std::path::Path::new("<t>"),
        )
        .unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #[test]
        fn row_sums_equal_distinct_trigrams(ws in prop::collection::vec("[abcõ]{1,7}", 1..12)) {
            let inv = build_cue_inventory(&ws).unwrap();
            let c = build_form_matrix(&ws, &inv).unwrap();
            let again = build_form_matrix(&ws, &build_cue_inventory(&ws).unwrap()).unwrap();
            prop_assert_eq!(&c, &again);
            for (i, w) in ws.iter().enumerate() {
                let grams = extract_trigrams(w).unwrap();
                prop_assert_eq!(c.row(i).len(), grams.len());
                for g in &grams {
                    prop_assert_eq!(c.get(i, inv.id(g).unwrap() as usize), 1);
                }
                let chars: Vec<char> = w.chars().collect();
                let mut padded = vec!['#'];
                padded.extend(&chars);
                padded.push('#');
                let mut distinct: Vec<&[char]> = Vec::new();
                for win in padded.windows(3) {
                    if !distinct.contains(&win) {
                        distinct.push(win);
                    }
                }
                prop_assert_eq!(grams.len(), distinct.len());
                if distinct.len() == padded.len() - 2 {
                    // no repeated trigram: one cue per letter
                    prop_assert_eq!(c.row(i).len(), chars.len());
                }
            }
            prop_assert!(c.to_dense().as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}
