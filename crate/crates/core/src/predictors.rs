//! Classical lexical predictors: word length, log frequency, square-root
//! paradigm size, log neighborhood count, pronunciation entropy flag and
//! manner of articulation of the first letter.
//!
//! Characters are Unicode scalar values throughout, so `õ` or `š` count
//! as one character for length and neighbor comparison.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lexicon::{FrequencyTable, LemmaFormTable, PronunciationDictionary, Stimulus};

/// Counts same-length words differing in exactly one position.
///
/// Each lexicon word is filed under every `(position, word with that
/// position removed)` key. A neighbor of `w` shares exactly one key with
/// it; `w` itself shares all of them.
#[derive(Debug, Clone, Default)]
pub struct NeighborIndex {
    keys: HashMap<(usize, String), u32>,
    words: HashSet<String>,
}

fn deletion_keys(word: &str) -> impl Iterator<Item = (usize, String)> + '_ {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    (0..chars.len()).map(move |p| {
        let start = chars[p].0;
        let end = start + chars[p].1.len_utf8();
        (p, format!("{}{}", &word[..start], &word[end..]))
    })
}

impl NeighborIndex {
    pub fn new<I, S>(lexicon: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut index = NeighborIndex::default();
        for w in lexicon {
            let w = w.into();
            if w.is_empty() || index.words.contains(&w) {
                continue;
            }
            for key in deletion_keys(&w) {
                *index.keys.entry(key).or_insert(0) += 1;
            }
            index.words.insert(w);
        }
        index
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn ncount(&self, word: &str) -> usize {
        let shared: usize = deletion_keys(word)
            .map(|k| self.keys.get(&k).copied().unwrap_or(0) as usize)
            .sum();
        if self.contains(word) {
            shared - word.chars().count()
        } else {
            shared
        }
    }
}

pub fn ncount(word: &str, lexicon: &NeighborIndex) -> usize {
    lexicon.ncount(word)
}

/// Distinct attested forms of `lemma`; 0 for an unknown lemma.
pub fn paradigm_size(lemma: &str, table: &LemmaFormTable) -> usize {
    table.forms(lemma).map_or(0, |f| f.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedPredictors {
    pub log_frequency: f64,
    pub paradigm_size_sqrt: f64,
    pub ncount_log: f64,
}

/// `(ln freq, sqrt paradigm, ln(ncount + 1))`. A zero frequency is an
/// error so callers decide explicitly how to treat unattested words.
pub fn transform_predictors(frequency: u64, paradigm: usize, ncount: usize) -> Result<TransformedPredictors> {
    if frequency < 1 {
        return Err(Error::InvalidArgument("frequency must be at least 1 for the log transform".into()));
    }
    Ok(TransformedPredictors {
        log_frequency: (frequency as f64).ln(),
        paradigm_size_sqrt: (paradigm as f64).sqrt(),
        ncount_log: ((ncount + 1) as f64).ln(),
    })
}

/// 1 when the form has several possible pronunciations, else 0. Absent
/// forms give 0; callers that need to report them check the dictionary.
pub fn entropy_flag(word: &str, dict: &PronunciationDictionary) -> u8 {
    u8::from(dict.get(word).is_some_and(|n| n >= 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manner {
    Approximant,
    Fricative,
    Nasal,
    Plosive,
    Trill,
    Vowel,
    Unknown,
}

impl Manner {
    pub fn as_str(self) -> &'static str {
        match self {
            Manner::Approximant => "approximant",
            Manner::Fricative => "fricative",
            Manner::Nasal => "nasal",
            Manner::Plosive => "plosive",
            Manner::Trill => "trill",
            Manner::Vowel => "vowel",
            Manner::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Manner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Manner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "approximant" => Manner::Approximant,
            "fricative" => Manner::Fricative,
            "nasal" => Manner::Nasal,
            "plosive" => Manner::Plosive,
            "trill" => Manner::Trill,
            "vowel" => Manner::Vowel,
            "unknown" => Manner::Unknown,
            _ => return Err(Error::InvalidArgument(format!("unknown manner class {s:?}"))),
        })
    }
}

fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// Letter to manner class lookup, keyed case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MannerTable {
    classes: HashMap<char, Manner>,
}

const ESTONIAN_DEFAULT: &str = include_str!("../data/manner_et.tsv");

impl MannerTable {
    /// Reads `character<TAB>class`; `unknown` is not a valid class here.
    pub fn from_reader<R: BufRead>(reader: R, label: &Path) -> Result<Self> {
        let mut classes = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| Error::io(label, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (ch, class) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(label, n, "expected character<TAB>class"))?;
            let mut chars = ch.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(Error::parse(label, n, format!("{ch:?} is not a single character")));
            };
            let class: Manner = class
                .trim()
                .parse()
                .ok()
                .filter(|m| *m != Manner::Unknown)
                .ok_or_else(|| Error::parse(label, n, format!("invalid manner class {class:?}")))?;
            if let Some(prev) = classes.insert(fold(c), class) {
                if prev != class {
                    return Err(Error::parse(label, n, format!("conflicting classes for {c:?}")));
                }
            }
        }
        Ok(MannerTable { classes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(f), path)
    }

    /// The bundled assignment for Estonian orthography.
    pub fn estonian() -> Self {
        Self::from_reader(ESTONIAN_DEFAULT.as_bytes(), Path::new("manner_et.tsv")).expect("bundled table parses")
    }

    pub fn get(&self, c: char) -> Option<Manner> {
        self.classes.get(&fold(c)).copied()
    }
}

pub fn manner_of_first_segment(word: &str, table: &MannerTable) -> Manner {
    word.chars().next().and_then(|c| table.get(c)).unwrap_or(Manner::Unknown)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorRecord {
    pub word: String,
    pub length: usize,
    pub log_frequency: f64,
    pub paradigm_size_sqrt: f64,
    pub ncount_log: f64,
    pub entropy_flag: u8,
    pub manner: Manner,
}

/// Words that fell back to a default value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictorDiagnostics {
    pub absent_pronunciation: Vec<String>,
    pub unmapped_manner: Vec<String>,
    pub unknown_lemma: Vec<String>,
}

pub struct PredictorResources<'a> {
    pub frequencies: &'a FrequencyTable,
    pub lemma_forms: &'a LemmaFormTable,
    pub neighbors: &'a NeighborIndex,
    pub pronunciations: &'a PronunciationDictionary,
    pub manner: &'a MannerTable,
}

/// Predictors for every stimulus, in stimulus order. Paradigm size and
/// neighborhood count use the stimulus lemma; the rest use the word form.
pub fn compute_predictors(
    stimuli: &[Stimulus],
    res: &PredictorResources<'_>,
) -> Result<(Vec<PredictorRecord>, PredictorDiagnostics)> {
    let words: Vec<String> = stimuli.iter().map(|s| s.word.clone()).collect();
    let freqs = res.frequencies.lookup_all(&words)?;
    let records = stimuli
        .par_iter()
        .zip(freqs)
        .map(|(s, f)| {
            let t = transform_predictors(
                f,
                paradigm_size(&s.lemma, res.lemma_forms),
                res.neighbors.ncount(&s.lemma),
            )?;
            Ok(PredictorRecord {
                word: s.word.clone(),
                length: s.word.chars().count(),
                log_frequency: t.log_frequency,
                paradigm_size_sqrt: t.paradigm_size_sqrt,
                ncount_log: t.ncount_log,
                entropy_flag: entropy_flag(&s.word, res.pronunciations),
                manner: manner_of_first_segment(&s.word, res.manner),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut diag = PredictorDiagnostics::default();
    for (s, r) in stimuli.iter().zip(&records) {
        if res.pronunciations.get(&s.word).is_none() {
            diag.absent_pronunciation.push(s.word.clone());
        }
        if r.manner == Manner::Unknown {
            diag.unmapped_manner.push(s.word.clone());
        }
        if res.lemma_forms.forms(&s.lemma).is_none() {
            diag.unknown_lemma.push(s.word.clone());
        }
    }
    Ok((records, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_ncount(word: &str, lexicon: &[String]) -> usize {
        let w: Vec<char> = word.chars().collect();
        let distinct: HashSet<&String> = lexicon.iter().collect();
        distinct
            .into_iter()
            .filter(|v| {
                let v: Vec<char> = v.chars().collect();
                v.len() == w.len() && v.iter().zip(&w).filter(|(a, b)| a != b).count() == 1
            })
            .count()
    }

    fn lex(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ncount_examples() {
        let index = NeighborIndex::new(lex(&["cup", "cut", "cub", "cap", "map"]));
        assert_eq!(index.ncount("cup"), 3);
        assert_eq!(NeighborIndex::new(lex(&["cup"])).ncount("cup"), 0);
        assert_eq!(NeighborIndex::new(lex(&["house", "mouse"])).ncount("cup"), 0);
        let et = NeighborIndex::new(lex(&["õun", "aun", "õun", "õus"]));
        assert_eq!(et.ncount("õun"), 2);
        assert_eq!(et.len(), 3);
    }

    proptest! {
        #[test]
        fn ncount_matches_brute_force(words in prop::collection::vec("[abõ]{1,4}", 1..60), probe in "[abõ]{1,4}") {
            let index = NeighborIndex::new(words.clone());
            prop_assert_eq!(index.ncount(&probe), brute_ncount(&probe, &words));
            for w in &words {
                prop_assert_eq!(index.ncount(w), brute_ncount(w, &words));
            }
        }
    }

    #[test]
    fn paradigm_senat() {
        let text = "senat\tsenat\nsenat\tsenati\nsenat\tsenatile\nsenat\tsenatis\nsenat\tsenati\n";
        let t = LemmaFormTable::from_reader(text.as_bytes(), Path::new("<t>")).unwrap();
        assert_eq!(paradigm_size("senat", &t), 4);
        assert_eq!(paradigm_size("kass", &t), 0);
    }

    #[test]
    fn transforms() {
        let t = transform_predictors(1, 4, 0).unwrap();
        assert_eq!(t.log_frequency, 0.0);
        assert_eq!(t.paradigm_size_sqrt, 2.0);
        assert_eq!(t.ncount_log, 0.0);
        assert!(transform_predictors(0, 1, 1).is_err());
    }

    #[test]
    fn entropy_and_manner() {
        let d: PronunciationDictionary = [("tee".to_string(), 1), ("kalla".to_string(), 2)].into_iter().collect();
        assert_eq!(entropy_flag("tee", &d), 0);
        assert_eq!(entropy_flag("kalla", &d), 1);
        assert_eq!(entropy_flag("puudub", &d), 0);

        let m = MannerTable::estonian();
        assert_eq!(manner_of_first_segment("kass", &m), Manner::Plosive);
        assert_eq!(manner_of_first_segment("ema", &m), Manner::Vowel);
        assert_eq!(manner_of_first_segment("Õun", &m), Manner::Vowel);
        assert_eq!(manner_of_first_segment("šokk", &m), Manner::Fricative);
        assert_eq!(manner_of_first_segment("1x", &m), Manner::Unknown);
    }

    #[test]
    fn manner_table_validation() {
        let p = Path::new("<t>");
        assert!(MannerTable::from_reader("k\tplosive\n".as_bytes(), p).is_ok());
        assert!(MannerTable::from_reader("k\tunknown\n".as_bytes(), p).is_err());
        assert!(MannerTable::from_reader("kk\tplosive\n".as_bytes(), p).is_err());
        assert!(MannerTable::from_reader("k\tplosive\nK\tnasal\n".as_bytes(), p).is_err());
        assert!(MannerTable::from_reader("k plosive\n".as_bytes(), p).is_err());
    }

    #[test]
    fn compute_predictors_tallies_defaults() {
        let freq: FrequencyTable = [("kass".to_string(), 20), ("xyz".to_string(), 1)].into_iter().collect();
        let forms = LemmaFormTable::from_reader("kass\tkass\nkass\tkassi\n".as_bytes(), Path::new("<t>")).unwrap();
        let neighbors = NeighborIndex::new(lex(&["kass", "kast", "pass"]));
        let pron: PronunciationDictionary = [("kass".to_string(), 1)].into_iter().collect();
        let manner = MannerTable::from_reader("k\tplosive\n".as_bytes(), Path::new("<t>")).unwrap();
        let stimuli = vec![
            Stimulus { word: "kass".into(), lemma: "kass".into(), pos: None },
            Stimulus { word: "xyz".into(), lemma: "xyz".into(), pos: None },
        ];
        let res = PredictorResources {
            frequencies: &freq,
            lemma_forms: &forms,
            neighbors: &neighbors,
            pronunciations: &pron,
            manner: &manner,
        };
        let (records, diag) = compute_predictors(&stimuli, &res).unwrap();
        assert_eq!(records[0].length, 4);
        assert_eq!(records[0].log_frequency, 20f64.ln());
        assert_eq!(records[0].paradigm_size_sqrt, 2f64.sqrt());
        assert_eq!(records[0].ncount_log, 3f64.ln());
        assert_eq!(records[1].manner, Manner::Unknown);
        assert_eq!(diag.absent_pronunciation, vec!["xyz".to_string()]);
        assert_eq!(diag.unmapped_manner, vec!["xyz".to_string()]);
        assert_eq!(diag.unknown_lemma, vec!["xyz".to_string()]);

        let missing = vec![Stimulus { word: "koer".into(), lemma: "koer".into(), pos: None }];
        assert!(matches!(compute_predictors(&missing, &res), Err(Error::MissingFrequencies(_))));
    }
}
