//! Line-based `key = value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors. Relative paths resolve against the config file's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stimuli: PathBuf,
    pub frequencies: PathBuf,
    pub embeddings: PathBuf,
    pub output_dir: PathBuf,
    pub corpus: Option<PathBuf>,
    pub lemma_forms: Option<PathBuf>,
    pub pronunciations: Option<PathBuf>,
    pub ncount_lexicon: Option<PathBuf>,
    /// `None` selects the bundled Estonian table.
    pub manner_table: Option<PathBuf>,
    pub ngram: usize,
    pub ridge: f64,
    pub lambda: f64,
    pub cind_epsilon: f64,
    pub scale: u64,
    pub hidden: usize,
    pub rate: f64,
    pub batch: usize,
    pub epochs: Option<usize>,
    pub seed: u64,
    pub wh_rate: f64,
    pub wh_passes: usize,
    pub dump_dense_form_matrix: bool,
}

const PATH_KEYS: [&str; 9] = [
    "stimuli",
    "frequencies",
    "embeddings",
    "output_dir",
    "corpus",
    "lemma_forms",
    "pronunciations",
    "ncount_lexicon",
    "manner_table",
];

const VALUE_KEYS: [&str; 13] = [
    "ngram",
    "ridge",
    "lambda",
    "cind_epsilon",
    "scale",
    "hidden",
    "rate",
    "batch",
    "epochs",
    "seed",
    "wh_rate",
    "wh_passes",
    "dump_dense_form_matrix",
];

fn parse_value<T: FromStr>(entries: &BTreeMap<String, (usize, String)>, key: &str, default: T) -> Result<T> {
    match entries.get(key) {
        None => Ok(default),
        Some((line, v)) => v
            .parse()
            .map_err(|_| Error::Config(format!("line {line}: invalid value {v:?} for `{key}`"))),
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {n}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !PATH_KEYS.contains(&key) && !VALUE_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {n}: unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("line {n}: empty value for `{key}`")));
            }
            if entries.insert(key.to_string(), (n, value.to_string())).is_some() {
                return Err(Error::Config(format!("line {n}: `{key}` given twice")));
            }
        }

        let path = |key: &str| entries.get(key).map(|(_, v)| base.join(v));
        let required = |key: &str| path(key).ok_or_else(|| Error::Config(format!("missing required key `{key}`")));

        let cfg = PipelineConfig {
            stimuli: required("stimuli")?,
            frequencies: required("frequencies")?,
            embeddings: required("embeddings")?,
            output_dir: required("output_dir")?,
            corpus: path("corpus"),
            lemma_forms: path("lemma_forms"),
            pronunciations: path("pronunciations"),
            ncount_lexicon: path("ncount_lexicon"),
            manner_table: path("manner_table"),
            ngram: parse_value(&entries, "ngram", crate::encoding::DEFAULT_NGRAM)?,
            ridge: parse_value(&entries, "ridge", 0.0)?,
            lambda: parse_value(&entries, "lambda", 0.001)?,
            cind_epsilon: parse_value(&entries, "cind_epsilon", 1e-9)?,
            scale: parse_value(&entries, "scale", 1000)?,
            hidden: parse_value(&entries, "hidden", 1000)?,
            rate: parse_value(&entries, "rate", 0.001)?,
            batch: parse_value(&entries, "batch", 512)?,
            epochs: entries
                .contains_key("epochs")
                .then(|| parse_value(&entries, "epochs", 0))
                .transpose()?,
            seed: parse_value(&entries, "seed", 0)?,
            wh_rate: parse_value(&entries, "wh_rate", 0.001)?,
            wh_passes: parse_value(&entries, "wh_passes", 1)?,
            dump_dense_form_matrix: parse_value(&entries, "dump_dense_form_matrix", false)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.ngram == 0 {
            return bad("ngram must be at least 1");
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return bad("ridge must be a non-negative number");
        }
        for (name, v) in [("lambda", self.lambda), ("rate", self.rate), ("wh_rate", self.wh_rate), ("cind_epsilon", self.cind_epsilon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be a positive number")));
            }
        }
        if self.scale == 0 || self.hidden == 0 || self.batch == 0 {
            return bad("scale, hidden and batch must be positive");
        }
        let inputs = [&self.stimuli, &self.frequencies, &self.embeddings]
            .into_iter()
            .chain(self.corpus.as_ref())
            .chain(self.lemma_forms.as_ref())
            .chain(self.pronunciations.as_ref())
            .chain(self.ncount_lexicon.as_ref())
            .chain(self.manner_table.as_ref());
        for p in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for f in ["s.tsv", "f.tsv", "e.txt"] {
            std::fs::write(dir.path().join(f), "").unwrap();
        }
        dir
    }

    const MINIMAL: &str = "stimuli = s.tsv\nfrequencies = f.tsv\nembeddings = e.txt\noutput_dir = out\n";

    #[test]
    fn defaults_and_relative_paths() {
        let dir = base();
        let cfg = PipelineConfig::parse(&format!("# toy\n\n{MINIMAL}seed = 7\n"), dir.path()).unwrap();
        assert_eq!(cfg.stimuli, dir.path().join("s.tsv"));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.ngram, 3);
        assert_eq!(cfg.lambda, 0.001);
        assert_eq!(cfg.scale, 1000);
        assert_eq!(cfg.hidden, 1000);
        assert_eq!(cfg.batch, 512);
        assert_eq!(cfg.epochs, None);
        assert!(!cfg.dump_dense_form_matrix);
    }

    #[test]
    fn rejects_bad_input() {
        let dir = base();
        let p = dir.path();
        for text in [
            format!("{MINIMAL}colour = red\n"),
            format!("{MINIMAL}seed = 1\nseed = 2\n"),
            format!("{MINIMAL}seed = many\n"),
            format!("{MINIMAL}ridge = -1\n"),
            format!("{MINIMAL}corpus = nowhere.txt\n"),
            format!("{MINIMAL}lambda\n"),
            format!("{MINIMAL}hidden =\n"),
            "stimuli = s.tsv\n".to_string(),
        ] {
            let err = PipelineConfig::parse(&text, p).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}: {err}");
        }
    }
}
