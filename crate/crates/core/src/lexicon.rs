//! Loaders for the external lexical resources: frequency lists, embeddings,
//! utterance corpora, lemma/form tables, pronunciation counts and stimulus
//! lists.
//!
//! All text inputs are UTF-8 and words are compared by exact code-point
//! sequence. Tables are immutable once loaded.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Iterate `(line_number, line)` pairs with the trailing `\r` stripped.
fn numbered_lines<'a, R: BufRead + 'a>(
    reader: R,
    label: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader.lines().enumerate().map(move |(i, line)| {
        let mut line = line.map_err(|e| Error::io(label, e))?;
        if line.ends_with('\r') {
            line.pop();
        }
        Ok((i + 1, line))
    })
}

fn check_word(word: &str, label: &Path, line: usize) -> Result<()> {
    if word.is_empty() {
        return Err(Error::parse(label, line, "empty word"));
    }
    if word.chars().any(char::is_whitespace) {
        return Err(Error::parse(
            label,
            line,
            format!("word {word:?} contains whitespace"),
        ));
    }
    Ok(())
}

fn split_tab<'a>(line: &'a str, label: &Path, n: usize) -> Result<(&'a str, &'a str)> {
    line.split_once('\t')
        .ok_or_else(|| Error::parse(label, n, "expected two tab-separated fields"))
}

fn parse_positive_count(field: &str, label: &Path, line: usize) -> Result<u64> {
    let count: u64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(label, line, format!("invalid count {field:?}")))?;
    if count == 0 {
        return Err(Error::parse(label, line, "count must be at least 1"));
    }
    Ok(count)
}

/// Token counts per orthographic form. Homographs are cumulated on load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    entries: HashMap<String, u64>,
}

impl FrequencyTable {
    pub fn from_reader<R: BufRead>(reader: R, label: &Path) -> Result<Self> {
        let mut entries: HashMap<String, u64> = HashMap::new();
        for item in numbered_lines(reader, label) {
            let (n, line) = item?;
            if line.trim().is_empty() {
                continue;
            }
            let (word, count) = split_tab(&line, label, n)?;
            check_word(word, label, n)?;
            let count = parse_positive_count(count, label, n)?;
            let slot = entries.entry(word.to_string()).or_insert(0);
            *slot = slot
                .checked_add(count)
                .ok_or_else(|| Error::parse(label, n, "cumulated count overflows u64"))?;
        }
        Ok(FrequencyTable { entries })
    }

    pub fn get(&self, word: &str) -> Option<u64> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Frequencies for `words` in order, or every word lacking one.
    pub fn lookup_all(&self, words: &[String]) -> Result<Vec<u64>> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(words.len());
        for w in words {
            match self.get(w) {
                Some(f) => out.push(f),
                None => missing.push(w.clone()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::MissingFrequencies(missing))
        }
    }
}

impl FromIterator<(String, u64)> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        let mut entries = HashMap::new();
        for (w, c) in iter {
            *entries.entry(w).or_insert(0) += c;
        }
        FrequencyTable { entries }
    }
}

pub fn load_frequency_list(path: &Path) -> Result<FrequencyTable> {
    FrequencyTable::from_reader(open(path)?, path)
}

/// Word vectors of a fixed dimensionality, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            duplicates: 0,
        }
    }

    /// Insert or replace; a replaced word bumps the duplicate counter.
    pub fn insert(&mut self, word: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::InconsistentDimension {
                word,
                expected: self.dim,
                found: vector.len(),
            });
        }
        match self.index.get(&word) {
            Some(&i) => {
                self.vectors[i] = vector;
                self.duplicates += 1;
            }
            None => {
                self.index.insert(word.clone(), self.words.len());
                self.words.push(word);
                self.vectors.push(vector);
            }
        }
        Ok(())
    }

    pub fn from_reader<R: BufRead>(reader: R, label: &Path) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        let mut declared: Option<(usize, usize)> = None;
        for item in numbered_lines(reader, label) {
            let (n, line) = item?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if n == 1 && fields.len() == 2 {
                if let (Ok(rows), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>())
                {
                    if dim == 0 {
                        return Err(Error::parse(label, n, "embedding dimension must be positive"));
                    }
                    declared = Some((rows, dim));
                    table = Some(EmbeddingTable::new(dim));
                    continue;
                }
            }
            let word = fields[0];
            let values = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| {
                            Error::parse(label, n, format!("non-numeric component {f:?} for {word:?}"))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() {
                return Err(Error::parse(label, n, format!("no vector for {word:?}")));
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            table.insert(word.to_string(), values)?;
        }
        let table = table.unwrap_or_else(|| EmbeddingTable::new(0));
        if let Some((rows, _)) = declared {
            if rows != table.len() + table.duplicates {
                log::warn!(
                    "{}: header declares {rows} vectors, file holds {}",
                    label.display(),
                    table.len() + table.duplicates
                );
            }
        }
        if table.duplicates > 0 {
            log::warn!(
                "{}: {} duplicate embedding entries, last occurrence kept",
                label.display(),
                table.duplicates
            );
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// How many entries were overwritten by a later line for the same word.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Writes the text format with an `N D` header and 17 significant digits,
    /// which reloads bit-exactly.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (w, v) in self.words.iter().zip(&self.vectors) {
            write!(out, "{w}")?;
            for x in v {
                write!(out, " {x:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    EmbeddingTable::from_reader(open(path)?, path)
}

/// Line-oriented utterance source: one utterance per line, whitespace
/// tokenized, empty lines skipped.
pub struct UtteranceStream<R> {
    reader: R,
    label: PathBuf,
    dedup: bool,
    line: usize,
    buf: String,
}

impl<R: BufRead> UtteranceStream<R> {
    pub fn new(reader: R, label: impl Into<PathBuf>, dedup: bool) -> Self {
        UtteranceStream {
            reader,
            label: label.into(),
            dedup,
            line: 0,
            buf: String::new(),
        }
    }

    /// Line number of the most recently returned utterance.
    pub fn line(&self) -> usize {
        self.line
    }
}

impl UtteranceStream<BufReader<File>> {
    pub fn open(path: &Path, dedup: bool) -> Result<Self> {
        Ok(UtteranceStream::new(open(path)?, path, dedup))
    }
}

impl<R: BufRead> Iterator for UtteranceStream<R> {
    type Item = Result<Vec<String>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line += 1;
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    return Some(Err(Error::parse(
                        &self.label,
                        self.line,
                        format!("read failed: {e}"),
                    )))
                }
            }
            let mut words: Vec<String> = Vec::new();
            for tok in self.buf.split_whitespace() {
                if self.dedup && words.iter().any(|w| w == tok) {
                    continue;
                }
                words.push(tok.to_string());
            }
            if !words.is_empty() {
                return Some(Ok(words));
            }
        }
    }
}

/// Distinct attested forms per lemma.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaFormTable {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl LemmaFormTable {
    pub fn from_reader<R: BufRead>(reader: R, label: &Path) -> Result<Self> {
        let mut entries: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for item in numbered_lines(reader, label) {
            let (n, line) = item?;
            if line.trim().is_empty() {
                continue;
            }
            let (lemma, form) = split_tab(&line, label, n)?;
            check_word(lemma, label, n)?;
            check_word(form, label, n)?;
            entries
                .entry(lemma.to_string())
                .or_default()
                .insert(form.to_string());
        }
        Ok(LemmaFormTable { entries })
    }

    pub fn forms(&self, lemma: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(lemma)
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn load_lemma_forms(path: &Path) -> Result<LemmaFormTable> {
    LemmaFormTable::from_reader(open(path)?, path)
}

/// Number of possible pronunciations per written form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PronunciationDictionary {
    entries: HashMap<String, u64>,
}

impl PronunciationDictionary {
    /// Repeated forms (homograph entries) have their counts summed.
    pub fn from_reader<R: BufRead>(reader: R, label: &Path) -> Result<Self> {
        let mut entries: HashMap<String, u64> = HashMap::new();
        for item in numbered_lines(reader, label) {
            let (n, line) = item?;
            if line.trim().is_empty() {
                continue;
            }
            let (form, count) = split_tab(&line, label, n)?;
            check_word(form, label, n)?;
            let count = parse_positive_count(count, label, n)?;
            *entries.entry(form.to_string()).or_insert(0) += count;
        }
        Ok(PronunciationDictionary { entries })
    }

    pub fn get(&self, form: &str) -> Option<u64> {
        self.entries.get(form).copied()
    }
}

impl FromIterator<(String, u64)> for PronunciationDictionary {
    fn from_iter<I: IntoIterator<Item = (String, u64)>>(iter: I) -> Self {
        PronunciationDictionary {
            entries: iter.into_iter().collect(),
        }
    }
}

pub fn load_pronunciations(path: &Path) -> Result<PronunciationDictionary> {
    PronunciationDictionary::from_reader(open(path)?, path)
}

/// One stimulus row: the word, its dictionary form and an optional
/// part-of-speech tag passed through to the output table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    pub word: String,
    pub lemma: String,
    pub pos: Option<String>,
}

/// Reads `word[<TAB>lemma[<TAB>pos]]`; the lemma defaults to the word.
pub fn load_stimuli(path: &Path) -> Result<Vec<Stimulus>> {
    let mut out: Vec<Stimulus> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for item in numbered_lines(open(path)?, path) {
        let (n, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let word = fields.next().unwrap_or_default();
        check_word(word, path, n)?;
        let lemma = match fields.next() {
            Some(l) if !l.is_empty() => {
                check_word(l, path, n)?;
                l.to_string()
            }
            _ => word.to_string(),
        };
        let pos = fields.next().filter(|p| !p.is_empty()).map(str::to_string);
        if !seen.insert(word.to_string()) {
            return Err(Error::Duplicate(word.to_string()));
        }
        out.push(Stimulus {
            word: word.to_string(),
            lemma,
            pos,
        });
    }
    Ok(out)
}

/// Plain word list: the first tab-separated field of every non-empty line.
pub fn load_word_list(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for item in numbered_lines(open(path)?, path) {
        let (n, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let word = line.split('\t').next().unwrap_or_default();
        check_word(word, path, n)?;
        out.push(word.to_string());
    }
    Ok(out)
}
