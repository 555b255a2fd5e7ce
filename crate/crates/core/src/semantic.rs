//! Gold semantic matrix, Pearson correlation and correlation-based
//! nearest-neighbor lookup.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lexicon::EmbeddingTable;
use crate::matrix::Matrix;

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Centered, unit-norm copy of `v`. Pearson correlation is the dot product
/// of two standardized vectors.
pub fn standardize(v: &[f64]) -> Result<Vec<f64>> {
    if v.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two components"));
    }
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::UndefinedCorrelation("non-finite component"));
    }
    if lo == hi {
        return Err(Error::UndefinedCorrelation("constant vector"));
    }
    let mean = compensated_sum(v.iter().copied()) / v.len() as f64;
    let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = compensated_sum(centered.iter().map(|d| d * d)).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok(centered.into_iter().map(|d| d / norm).collect())
}

pub(crate) fn dot_standardized(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y)).clamp(-1.0, 1.0)
}

/// Product-moment correlation of two equal-length, non-constant vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "pearson on lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dot_standardized(&standardize(a)?, &standardize(b)?))
}

/// Word-by-dimension gold embeddings aligned with the form matrix rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMatrix {
    values: Matrix,
    standardized: Matrix,
    row_words: Vec<String>,
}

impl SemanticMatrix {
    /// Rejects constant rows, for which correlation is undefined.
    pub fn new(values: Matrix, row_words: Vec<String>) -> Result<Self> {
        if values.rows() != row_words.len() {
            return Err(Error::Shape(format!(
                "{} semantic rows for {} words",
                values.rows(),
                row_words.len()
            )));
        }
        let mut standardized = Matrix::zeros(values.rows(), values.cols());
        for (i, word) in row_words.iter().enumerate() {
            let z = standardize(values.row(i)).map_err(|_| Error::ConstantRow(word.clone()))?;
            standardized.row_mut(i).copy_from_slice(&z);
        }
        Ok(SemanticMatrix {
            values,
            standardized,
            row_words,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn row_words(&self) -> &[String] {
        &self.row_words
    }

    pub(crate) fn standardized_row(&self, i: usize) -> &[f64] {
        self.standardized.row(i)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &SemanticMatrix) -> Result<SemanticMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::Shape("cannot stack different dimensions".into()));
        }
        let mut data = self.values.as_slice().to_vec();
        data.extend_from_slice(other.values.as_slice());
        let words = self.row_words.iter().chain(&other.row_words).cloned().collect();
        SemanticMatrix::new(Matrix::from_vec(self.rows() + other.rows(), self.dim(), data)?, words)
    }

    pub fn select_rows(&self, ids: &[usize]) -> SemanticMatrix {
        let mut data = Vec::with_capacity(ids.len() * self.dim());
        for &i in ids {
            data.extend_from_slice(self.row(i));
        }
        let words = ids.iter().map(|&i| self.row_words[i].clone()).collect();
        SemanticMatrix::new(
            Matrix::from_vec(ids.len(), self.dim(), data).expect("consistent shape"),
            words,
        )
        .expect("rows of a valid matrix")
    }
}

/// Row `i` is the embedding of `words[i]`; every missing word is reported.
pub fn build_semantic_matrix(words: &[String], emb: &EmbeddingTable) -> Result<SemanticMatrix> {
    let missing: Vec<String> = words.iter().filter(|w| emb.get(w).is_none()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingEmbeddings(missing));
    }
    let mut data = Vec::with_capacity(words.len() * emb.dim());
    for w in words {
        data.extend_from_slice(emb.get(w).expect("checked above"));
    }
    SemanticMatrix::new(Matrix::from_vec(words.len(), emb.dim(), data)?, words.to_vec())
}

/// Row of `s` with the highest correlation to `query`; ties go to the lowest row id.
pub fn nearest_by_correlation(query: &[f64], s: &SemanticMatrix) -> Result<(usize, f64)> {
    if query.len() != s.dim() {
        return Err(Error::Shape(format!(
            "query has {} components, semantic space {}",
            query.len(),
            s.dim()
        )));
    }
    let z = standardize(query)?;
    nearest_standardized(&z, s)
}

pub(crate) fn nearest_standardized(z: &[f64], s: &SemanticMatrix) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..s.rows() {
        let r = dot_standardized(z, s.standardized_row(i));
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((i, r));
        }
    }
    best.ok_or(Error::Shape("empty semantic matrix".into()))
}

/// Nearest row for every row of `predictions`, computed in parallel.
/// A constant prediction yields `None`.
pub fn nearest_rows(predictions: &Matrix, s: &SemanticMatrix) -> Result<Vec<Option<(usize, f64)>>> {
    if predictions.cols() != s.dim() {
        return Err(Error::Shape(format!(
            "predictions have {} columns, semantic space {}",
            predictions.cols(),
            s.dim()
        )));
    }
    (0..predictions.rows())
        .into_par_iter()
        .map(|i| match standardize(predictions.row(i)) {
            Ok(z) => nearest_standardized(&z, s).map(Some),
            Err(_) => Ok(None),
        })
        .collect()
}
