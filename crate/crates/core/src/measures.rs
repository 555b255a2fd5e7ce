//! Per-word measures from a comprehension mapping: target correlation and
//! whether the prediction's nearest gold neighbor is the word itself.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lexicon::FrequencyTable;
use crate::matrix::Matrix;
use crate::semantic::{dot_standardized, nearest_rows, standardize, SemanticMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelTag {
    Fil,
    Endstate,
    Fiddl,
    Wh,
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] = [ModelTag::Endstate, ModelTag::Fil, ModelTag::Fiddl, ModelTag::Wh];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Fil => "FIL",
            ModelTag::Endstate => "ENDSTATE",
            ModelTag::Fiddl => "FIDDL",
            ModelTag::Wh => "WH",
        }
    }

    /// Lower-case name used for subcommand arguments and file names.
    pub fn slug(self) -> &'static str {
        match self {
            ModelTag::Fil => "fil",
            ModelTag::Endstate => "endstate",
            ModelTag::Fiddl => "fiddl",
            ModelTag::Wh => "wh",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s || t.slug() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRecord {
    pub word: String,
    /// `None` when the predicted vector is constant.
    pub target_correlation: Option<f64>,
    pub correct_type: bool,
    pub model_tag: ModelTag,
}

fn check_shapes(pred: &Matrix, s: &SemanticMatrix) -> Result<()> {
    if pred.shape() != s.values().shape() {
        return Err(Error::Shape(format!(
            "prediction is {:?}, gold matrix {:?}",
            pred.shape(),
            s.values().shape()
        )));
    }
    Ok(())
}

/// Correlation of each predicted row with its gold row.
pub fn target_correlations(pred: &Matrix, s: &SemanticMatrix) -> Result<Vec<Option<f64>>> {
    check_shapes(pred, s)?;
    Ok((0..pred.rows())
        .into_par_iter()
        .map(|i| {
            standardize(pred.row(i))
                .ok()
                .map(|z| dot_standardized(&z, s.standardized_row(i)))
        })
        .collect())
}

/// Whether each prediction's nearest gold row is its own; undefined
/// predictions count as incorrect.
pub fn correct_types(pred: &Matrix, s: &SemanticMatrix) -> Result<Vec<bool>> {
    check_shapes(pred, s)?;
    Ok(nearest_rows(pred, s)?
        .into_iter()
        .enumerate()
        .map(|(i, n)| n.is_some_and(|(j, _)| j == i))
        .collect())
}

pub fn type_accuracy(pred: &Matrix, s: &SemanticMatrix) -> Result<f64> {
    let correct = correct_types(pred, s)?;
    if correct.is_empty() {
        return Err(Error::Shape("no rows to evaluate".into()));
    }
    Ok(correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64)
}

fn token_fraction(correct: &[bool], freqs: &[u64]) -> f64 {
    let (hit, total) = correct
        .iter()
        .zip(freqs)
        .fold((0u128, 0u128), |(h, t), (&c, &f)| {
            (h + if c { f as u128 } else { 0 }, t + f as u128)
        });
    hit as f64 / total as f64
}

/// Frequency-weighted share of correctly recognized words.
pub fn token_accuracy(pred: &Matrix, s: &SemanticMatrix, freq: &FrequencyTable) -> Result<f64> {
    let freqs = freq.lookup_all(s.row_words())?;
    let correct = correct_types(pred, s)?;
    if correct.is_empty() {
        return Err(Error::Shape("no rows to evaluate".into()));
    }
    Ok(token_fraction(&correct, &freqs))
}

/// Records plus accuracy summary for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub model_tag: ModelTag,
    pub records: Vec<MeasureRecord>,
    pub type_accuracy: f64,
    pub token_accuracy: Option<f64>,
    /// Words whose predicted vector was constant.
    pub undefined: Vec<String>,
}

pub fn evaluate(
    pred: &Matrix,
    s: &SemanticMatrix,
    model_tag: ModelTag,
    freq: Option<&FrequencyTable>,
) -> Result<Evaluation> {
    let correlations = target_correlations(pred, s)?;
    let correct = correct_types(pred, s)?;
    if correct.is_empty() {
        return Err(Error::Shape("no rows to evaluate".into()));
    }
    let token_accuracy = match freq {
        Some(f) => Some(token_fraction(&correct, &f.lookup_all(s.row_words())?)),
        None => None,
    };
    let mut undefined = Vec::new();
    let records = s
        .row_words()
        .iter()
        .zip(correlations)
        .zip(&correct)
        .map(|((w, r), &ok)| {
            if r.is_none() {
                undefined.push(w.clone());
            }
            MeasureRecord {
                word: w.clone(),
                target_correlation: r,
                correct_type: ok,
                model_tag,
            }
        })
        .collect();
    if !undefined.is_empty() {
        log::warn!("{model_tag}: {} constant predictions", undefined.len());
    }
    Ok(Evaluation {
        model_tag,
        records,
        type_accuracy: correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64,
        token_accuracy,
        undefined,
    })
}

pub const MEASURE_HEADER: [&str; 4] = ["word", "model_tag", "target_correlation", "correct_type"];

/// `word,model_tag,target_correlation,correct_type`; undefined correlations are empty fields.
pub fn write_measures_csv<W: Write>(records: &[MeasureRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<measures csv>", std::io::Error::other(e));
    w.write_record(MEASURE_HEADER).map_err(io)?;
    for r in records {
        let corr = r.target_correlation.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.word.as_str(),
            r.model_tag.as_str(),
            corr.as_str(),
            if r.correct_type { "true" } else { "false" },
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<measures csv>", e))
}

pub fn read_measures_csv(text: &str, label: &std::path::Path) -> Result<Vec<MeasureRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::parse(label, line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(Error::parse(label, line, "expected 4 fields"));
        }
        let target_correlation = match &rec[2] {
            "" => None,
            v => Some(v.parse::<f64>().map_err(|e| Error::parse(label, line, e.to_string()))?),
        };
        out.push(MeasureRecord {
            word: rec[0].to_string(),
            model_tag: rec[1].parse()?,
            target_correlation,
            correct_type: &rec[3] == "true",
        });
    }
    Ok(out)
}
