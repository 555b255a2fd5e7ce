//! Stage commands behind the CLI. Stages communicate only through files in
//! the output directory. Every stage writes a JSON manifest holding the
//! SHA-256 of each input that influenced it, its parameters and the hash of
//! each output; a stage whose manifest still matches is skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cind::{log_transform_cind, train_cind, CooccurrenceNetwork};
use crate::config::PipelineConfig;
use crate::deep::{expand_token_schedule, train_fiddl, DeepMap, FiddlConfig};
use crate::encoding::{build_form_matrix, CueInventory, FormMatrix};
use crate::error::{Error, Result};
use crate::lexicon::{
    load_embeddings, load_frequency_list, load_lemma_forms, load_pronunciations, load_stimuli, load_word_list,
    EmbeddingTable, FrequencyTable, UtteranceStream,
};
use crate::linear::{predict_semantics, solve_endstate, solve_fil, train_widrow_hoff, LinearMap};
use crate::measures::{evaluate, read_measures_csv, write_measures_csv, Evaluation, MeasureRecord, ModelTag};
use crate::predictors::{compute_predictors, MannerTable, NeighborIndex, PredictorResources};
use crate::semantic::{build_semantic_matrix, SemanticMatrix};

pub const CUES_FILE: &str = "cues.tsv";
pub const FORM_FILE: &str = "form_matrix.tsv";
pub const FORM_DENSE_FILE: &str = "form_matrix_dense.tsv";
pub const SEMANTIC_FILE: &str = "semantic.txt";
pub const CIND_FILE: &str = "cind.tsv";
pub const CIND_VOCAB_FILE: &str = "cind_vocab.txt";
pub const CIND_WEIGHTS_FILE: &str = "cind_weights.tsv";
pub const SUMMARY_FILE: &str = "accuracy_summary.csv";
pub const PREDICTORS_FILE: &str = "predictors.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

pub const PREDICTOR_HEADER: [&str; 11] = [
    "word",
    "length",
    "log_frequency",
    "paradigm_size_sqrt",
    "ncount_log",
    "entropy_flag",
    "manner",
    "target_correlation_fil",
    "target_correlation_fiddl",
    "cind",
    "log_cind",
];

pub fn checkpoint_file(tag: ModelTag) -> String {
    format!("{}.bin", tag.slug())
}

pub fn measures_file(tag: ModelTag) -> String {
    format!("measures_{}.csv", tag.slug())
}

fn manifest_file(stage: &str) -> String {
    format!("{stage}.manifest.json")
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub inputs: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub details: BTreeMap<String, String>,
}

impl Manifest {
    fn new(stage: &str) -> Self {
        Manifest {
            stage: stage.to_string(),
            inputs: BTreeMap::new(),
            parameters: BTreeMap::new(),
            outputs: BTreeMap::new(),
            details: BTreeMap::new(),
        }
    }

    fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.insert(name.to_string(), sha256_file(path)?);
        Ok(())
    }

    fn param(&mut self, name: &str, value: impl fmt::Display) {
        self.parameters.insert(name.to_string(), value.to_string());
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    /// Record output hashes and write the manifest into `dir`.
    fn finish(mut self, dir: &Path, outputs: &[&str]) -> Result<Manifest> {
        for name in outputs {
            self.outputs.insert(name.to_string(), sha256_file(&dir.join(name))?);
        }
        let path = dir.join(manifest_file(&self.stage));
        let mut text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        text.push('\n');
        write_file(&path, text.as_bytes())?;
        Ok(self)
    }

    /// The stored manifest, if it has the same inputs and parameters and
    /// every recorded output is still on disk unchanged.
    fn cached(&self, dir: &Path) -> Option<Manifest> {
        let stored = Manifest::load(&dir.join(manifest_file(&self.stage))).ok()?;
        if stored.inputs != self.inputs || stored.parameters != self.parameters || stored.outputs.is_empty() {
            return None;
        }
        for (name, hash) in &stored.outputs {
            if sha256_file(&dir.join(name)).ok().as_ref() != Some(hash) {
                return None;
            }
        }
        log::info!("{}: up to date", self.stage);
        Some(stored)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn require(path: PathBuf, step: &str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact {
            path,
            step: step.to_string(),
        })
    }
}

fn ensure_output_dir(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))
}

/// Build the cue inventory, form matrix and semantic matrix for the stimuli.
pub fn cmd_encode(cfg: &PipelineConfig) -> Result<Manifest> {
    ensure_output_dir(cfg)?;
    let dir = &cfg.output_dir;
    let mut m = Manifest::new("encode");
    m.input("stimuli", &cfg.stimuli)?;
    m.input("embeddings", &cfg.embeddings)?;
    m.param("ngram", cfg.ngram);
    m.param("dump_dense_form_matrix", cfg.dump_dense_form_matrix);
    if let Some(done) = m.cached(dir) {
        return Ok(done);
    }

    let words: Vec<String> = load_stimuli(&cfg.stimuli)?.into_iter().map(|s| s.word).collect();
    let emb = load_embeddings(&cfg.embeddings)?;
    let s = build_semantic_matrix(&words, &emb)?;
    let inventory = CueInventory::build(&words, cfg.ngram)?;
    let c = build_form_matrix(&words, &inventory)?;

    let mut cues = String::new();
    for cue in inventory.cues() {
        cues.push_str(cue);
        cues.push('\n');
    }
    write_file(&dir.join(CUES_FILE), cues.as_bytes())?;

    let mut buf = Vec::new();
    c.write_sparse_tsv(&mut buf).map_err(|e| Error::io(dir.join(FORM_FILE), e))?;
    write_file(&dir.join(FORM_FILE), &buf)?;

    let mut outputs = vec![CUES_FILE, FORM_FILE, SEMANTIC_FILE];
    if cfg.dump_dense_form_matrix {
        let mut buf = Vec::new();
        c.write_dense_tsv(&inventory, &mut buf)
            .map_err(|e| Error::io(dir.join(FORM_DENSE_FILE), e))?;
        write_file(&dir.join(FORM_DENSE_FILE), &buf)?;
        outputs.push(FORM_DENSE_FILE);
    }

    let mut table = EmbeddingTable::new(s.dim());
    for (i, w) in words.iter().enumerate() {
        table.insert(w.clone(), s.row(i).to_vec())?;
    }
    let mut buf = Vec::new();
    table.write_to(&mut buf).map_err(|e| Error::io(dir.join(SEMANTIC_FILE), e))?;
    write_file(&dir.join(SEMANTIC_FILE), &buf)?;

    m.details.insert("words".into(), words.len().to_string());
    m.details.insert("cues".into(), inventory.len().to_string());
    m.details.insert("dim".into(), s.dim().to_string());
    m.details.insert("nonzeros".into(), c.nnz().to_string());
    log::info!("encode: {} words, {} cues, {} dims", words.len(), inventory.len(), s.dim());
    m.finish(dir, &outputs)
}

/// Form and semantic matrices read back from the encode stage.
pub struct Encoded {
    pub cues: Vec<String>,
    pub c: FormMatrix,
    pub s: SemanticMatrix,
}

pub fn load_encoded(cfg: &PipelineConfig) -> Result<Encoded> {
    let dir = &cfg.output_dir;
    let read = |name: &str| -> Result<(PathBuf, String)> {
        let p = require(dir.join(name), "encode")?;
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok((p, text))
    };
    let (_, cues) = read(CUES_FILE)?;
    let cues: Vec<String> = cues.lines().map(str::to_string).collect();
    let (p, form) = read(FORM_FILE)?;
    let c = FormMatrix::read_sparse_tsv(&form, cues.len(), &p)?;
    let (p, sem) = read(SEMANTIC_FILE)?;
    let table = EmbeddingTable::from_reader(sem.as_bytes(), &p)?;
    let s = build_semantic_matrix(c.row_words(), &table)?;
    Ok(Encoded { cues, c, s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrainTarget {
    Model(ModelTag),
    Cind,
}

impl TrainTarget {
    pub const DEFAULT: [TrainTarget; 4] = [
        TrainTarget::Model(ModelTag::Endstate),
        TrainTarget::Model(ModelTag::Fil),
        TrainTarget::Model(ModelTag::Fiddl),
        TrainTarget::Cind,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            TrainTarget::Model(t) => t.slug(),
            TrainTarget::Cind => "cind",
        }
    }
}

impl FromStr for TrainTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "cind" {
            Ok(TrainTarget::Cind)
        } else {
            s.parse().map(TrainTarget::Model)
        }
    }
}

impl fmt::Display for TrainTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

pub fn cmd_train(cfg: &PipelineConfig, which: &[TrainTarget]) -> Result<Vec<Manifest>> {
    ensure_output_dir(cfg)?;
    let mut encoded = None;
    let mut out = Vec::new();
    for &target in which {
        let m = match target {
            TrainTarget::Cind => train_cind_stage(cfg)?,
            TrainTarget::Model(tag) => {
                if encoded.is_none() {
                    encoded = Some(load_encoded(cfg)?);
                }
                train_model_stage(cfg, tag, encoded.as_ref().expect("loaded above"))?
            }
        };
        out.push(m);
    }
    Ok(out)
}

fn train_model_stage(cfg: &PipelineConfig, tag: ModelTag, enc: &Encoded) -> Result<Manifest> {
    let dir = &cfg.output_dir;
    let mut m = Manifest::new(tag.slug());
    m.input(FORM_FILE, &dir.join(FORM_FILE))?;
    m.input(SEMANTIC_FILE, &dir.join(SEMANTIC_FILE))?;
    if tag != ModelTag::Endstate {
        m.input("frequencies", &cfg.frequencies)?;
    }
    match tag {
        ModelTag::Endstate | ModelTag::Fil => m.param("ridge", cfg.ridge),
        ModelTag::Wh => {
            m.param("wh_rate", cfg.wh_rate);
            m.param("wh_passes", cfg.wh_passes);
            m.param("scale", cfg.scale);
            m.param("seed", cfg.seed);
        }
        ModelTag::Fiddl => {
            let epochs = cfg
                .epochs
                .ok_or_else(|| Error::Config("`epochs` is required to train fiddl".into()))?;
            m.param("hidden", cfg.hidden);
            m.param("rate", cfg.rate);
            m.param("batch", cfg.batch);
            m.param("epochs", epochs);
            m.param("scale", cfg.scale);
            m.param("seed", cfg.seed);
        }
    }
    if let Some(done) = m.cached(dir) {
        return Ok(done);
    }

    let file = checkpoint_file(tag);
    let path = dir.join(&file);
    let words = enc.c.row_words();
    let s = enc.s.values();
    let freq = || load_frequency_list(&cfg.frequencies);
    let count = match tag {
        ModelTag::Fiddl => {
            let schedule = expand_token_schedule(&freq()?, words, cfg.scale, cfg.seed)?;
            let config = FiddlConfig {
                hidden: cfg.hidden,
                rate: cfg.rate,
                batch: cfg.batch,
                ..FiddlConfig::new(cfg.epochs.expect("checked above"), cfg.seed)
            };
            let net = train_fiddl(&enc.c, s, &schedule, &config)?;
            m.details.insert("tokens_per_epoch".into(), schedule.len().to_string());
            if let Some(loss) = net.epoch_losses().last() {
                m.details.insert("final_epoch_loss".into(), loss.to_string());
            }
            net.save(&path)?;
            net.parameter_count()
        }
        _ => {
            let map = match tag {
                ModelTag::Endstate => solve_endstate(&enc.c, s, cfg.ridge)?,
                ModelTag::Fil => solve_fil(&enc.c, s, &freq()?, cfg.ridge)?,
                _ => {
                    let once = expand_token_schedule(&freq()?, words, cfg.scale, cfg.seed)?;
                    let schedule: Vec<usize> = once.tokens().repeat(cfg.wh_passes);
                    train_widrow_hoff(&enc.c, s, &schedule, cfg.wh_rate)?
                }
            };
            let meta = map.metadata();
            m.details.insert("solver".into(), meta.solver.as_str().to_string());
            if let Some(rank) = meta.rank {
                m.details.insert("rank".into(), rank.to_string());
            }
            if meta.tokens > 0 {
                m.details.insert("tokens".into(), meta.tokens.to_string());
            }
            map.save(&path)?;
            map.parameter_count()
        }
    };
    m.details.insert("parameters".into(), count.to_string());
    log::info!("train {}: {} parameters", tag.slug(), count);
    m.finish(dir, &[&file])
}

fn train_cind_stage(cfg: &PipelineConfig) -> Result<Manifest> {
    let dir = &cfg.output_dir;
    let corpus = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| Error::Config("`corpus` is required to train cind".into()))?;
    let mut m = Manifest::new("cind");
    m.input("corpus", corpus)?;
    m.param("lambda", cfg.lambda);
    m.param("cind_epsilon", cfg.cind_epsilon);
    if let Some(done) = m.cached(dir) {
        return Ok(done);
    }

    let mut net = CooccurrenceNetwork::new(cfg.lambda)?;
    train_cind(&mut net, UtteranceStream::open(corpus, true)?)?;

    let mut vocab = Vec::new();
    net.write_vocab(&mut vocab).map_err(|e| Error::io(dir.join(CIND_VOCAB_FILE), e))?;
    write_file(&dir.join(CIND_VOCAB_FILE), &vocab)?;
    let mut weights = Vec::new();
    net.write_triplets(&mut weights)
        .map_err(|e| Error::io(dir.join(CIND_WEIGHTS_FILE), e))?;
    write_file(&dir.join(CIND_WEIGHTS_FILE), &weights)?;

    let mut table = String::from("word\tcind\tlog_cind\n");
    for w in net.words() {
        let v = net.contextual_independence(w);
        let log = log_transform_cind(v, cfg.cind_epsilon).map(|x| x.to_string()).unwrap_or_default();
        table.push_str(&format!("{w}\t{v}\t{log}\n"));
    }
    write_file(&dir.join(CIND_FILE), table.as_bytes())?;

    m.details.insert("utterances".into(), net.utterances_seen().to_string());
    m.details.insert("vocabulary".into(), net.words().len().to_string());
    m.details.insert("nonzero_weights".into(), net.nonzero_count().to_string());
    log::info!("cind: {} utterances, {} words", net.utterances_seen(), net.words().len());
    m.finish(dir, &[CIND_VOCAB_FILE, CIND_WEIGHTS_FILE, CIND_FILE])
}

/// Rebuild a trained network from the cind stage's files.
pub fn load_cind_network(cfg: &PipelineConfig) -> Result<CooccurrenceNetwork> {
    let dir = &cfg.output_dir;
    let manifest = Manifest::load(&require(dir.join(manifest_file("cind")), "train --which cind")?)?;
    let utterances: u64 = manifest
        .details
        .get("utterances")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let vocab_path = require(dir.join(CIND_VOCAB_FILE), "train --which cind")?;
    let weights_path = require(dir.join(CIND_WEIGHTS_FILE), "train --which cind")?;
    let vocab = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let weights = fs::read_to_string(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
    CooccurrenceNetwork::from_parts(cfg.lambda, utterances, &vocab, &weights, &weights_path)
}

/// Predicted semantic matrix of a trained comprehension model.
pub fn predict_with_checkpoint(path: &Path, c: &FormMatrix) -> Result<crate::Matrix> {
    match read_magic(path)? {
        m if &m == DeepMap::MAGIC => DeepMap::load(path)?.predict(c),
        _ => {
            let map = LinearMap::load(path)?;
            if map.direction() != crate::linear::Direction::Comprehension {
                return Err(Error::Checkpoint {
                    path: path.to_path_buf(),
                    reason: "not a comprehension map".into(),
                });
            }
            predict_semantics(c, &map)
        }
    }
}

fn read_magic(path: &Path) -> Result<[u8; 8]> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic).map_err(|_| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: "truncated header".into(),
    })?;
    Ok(magic)
}

/// Number of trainable parameters stored in a linear or deep checkpoint.
pub fn count_parameters(path: &Path) -> Result<usize> {
    match read_magic(path)? {
        m if &m == LinearMap::MAGIC => Ok(LinearMap::load(path)?.parameter_count()),
        m if &m == DeepMap::MAGIC => Ok(DeepMap::load(path)?.parameter_count()),
        _ => Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: "unrecognized checkpoint format".into(),
        }),
    }
}

pub const DEFAULT_MEASURES: [ModelTag; 3] = [ModelTag::Endstate, ModelTag::Fil, ModelTag::Fiddl];

pub fn cmd_measures(cfg: &PipelineConfig, which: &[ModelTag]) -> Result<Vec<Evaluation>> {
    let dir = &cfg.output_dir;
    let enc = load_encoded(cfg)?;
    let freq = load_frequency_list(&cfg.frequencies)?;
    let mut out = Vec::new();
    for &tag in which {
        let ckpt = require(dir.join(checkpoint_file(tag)), &format!("train --which {}", tag.slug()))?;
        let file = measures_file(tag);
        let mut m = Manifest::new(&format!("measures_{}", tag.slug()));
        m.input(&checkpoint_file(tag), &ckpt)?;
        m.input(FORM_FILE, &dir.join(FORM_FILE))?;
        m.input(SEMANTIC_FILE, &dir.join(SEMANTIC_FILE))?;
        m.input("frequencies", &cfg.frequencies)?;

        let pred = predict_with_checkpoint(&ckpt, &enc.c)?;
        let eval = evaluate(&pred, &enc.s, tag, Some(&freq))?;
        let mut buf = Vec::new();
        write_measures_csv(&eval.records, &mut buf)?;
        write_file(&dir.join(&file), &buf)?;
        m.details.insert("type_accuracy".into(), eval.type_accuracy.to_string());
        if let Some(t) = eval.token_accuracy {
            m.details.insert("token_accuracy".into(), t.to_string());
        }
        m.finish(dir, &[&file])?;
        log::info!(
            "measures {}: type accuracy {:.4}, token accuracy {:.4}",
            tag.slug(),
            eval.type_accuracy,
            eval.token_accuracy.unwrap_or(f64::NAN)
        );
        out.push(eval);
    }
    write_summary(dir, &freq)?;
    Ok(out)
}

fn read_measures(path: &Path) -> Result<Vec<MeasureRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_measures_csv(&text, path)
}

/// `accuracy_summary.csv` over every model with a measures file on disk.
fn write_summary(dir: &Path, freq: &FrequencyTable) -> Result<()> {
    let path = dir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::io(&path, std::io::Error::other(e));
    w.write_record(["model_tag", "type_accuracy", "token_accuracy", "words", "undefined_correlations"])
        .map_err(io)?;
    for tag in ModelTag::ALL {
        let p = dir.join(measures_file(tag));
        if !p.is_file() {
            continue;
        }
        let records = read_measures(&p)?;
        if records.is_empty() {
            continue;
        }
        let words: Vec<String> = records.iter().map(|r| r.word.clone()).collect();
        let counts = freq.lookup_all(&words)?;
        let correct = records.iter().filter(|r| r.correct_type).count();
        let (hit, total) = records.iter().zip(&counts).fold((0u128, 0u128), |(h, t), (r, &f)| {
            (h + if r.correct_type { f as u128 } else { 0 }, t + f as u128)
        });
        let undefined = records.iter().filter(|r| r.target_correlation.is_none()).count();
        w.write_record([
            tag.as_str().to_string(),
            (correct as f64 / records.len() as f64).to_string(),
            (hit as f64 / total as f64).to_string(),
            records.len().to_string(),
            undefined.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(&path, std::io::Error::other(e.to_string())))?;
    write_file(&path, &bytes)
}

/// Words that received an empty field or a default value in the export.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportDiagnostics {
    pub unseen_in_corpus: Vec<String>,
    pub negative_cind: Vec<String>,
    pub undefined_correlation_fil: Vec<String>,
    pub undefined_correlation_fiddl: Vec<String>,
    pub unmapped_manner: Vec<String>,
    pub absent_pronunciation: Vec<String>,
    pub unknown_lemma: Vec<String>,
}

fn correlation_map(path: &Path) -> Result<HashMap<String, Option<f64>>> {
    let mut map = HashMap::new();
    for r in read_measures(path)? {
        if map.insert(r.word.clone(), r.target_correlation).is_some() {
            return Err(Error::Duplicate(r.word));
        }
    }
    Ok(map)
}

fn cind_map(path: &Path) -> Result<HashMap<String, f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let mut f = line.split('\t');
        let (Some(w), Some(v)) = (f.next(), f.next()) else {
            return Err(Error::parse(path, i + 1, "expected word<TAB>cind<TAB>log_cind"));
        };
        let v: f64 = v
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad value {v:?}")))?;
        if map.insert(w.to_string(), v).is_some() {
            return Err(Error::Duplicate(w.to_string()));
        }
    }
    Ok(map)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Join every per-word measure into `predictors.csv` and write
/// `diagnostics.json`.
pub fn cmd_export(cfg: &PipelineConfig) -> Result<ExportDiagnostics> {
    ensure_output_dir(cfg)?;
    let dir = &cfg.output_dir;
    let needed = |p: &Option<PathBuf>, key: &str| {
        p.clone()
            .ok_or_else(|| Error::Config(format!("`{key}` is required for export")))
    };
    let lemma_path = needed(&cfg.lemma_forms, "lemma_forms")?;
    let pron_path = needed(&cfg.pronunciations, "pronunciations")?;
    let lexicon_path = needed(&cfg.ncount_lexicon, "ncount_lexicon")?;
    let fil_path = require(dir.join(measures_file(ModelTag::Fil)), "measures --which fil")?;
    let fiddl_path = require(dir.join(measures_file(ModelTag::Fiddl)), "measures --which fiddl")?;
    let cind_path = require(dir.join(CIND_FILE), "train --which cind")?;

    let mut m = Manifest::new("export");
    m.input("stimuli", &cfg.stimuli)?;
    m.input("frequencies", &cfg.frequencies)?;
    m.input("lemma_forms", &lemma_path)?;
    m.input("pronunciations", &pron_path)?;
    m.input("ncount_lexicon", &lexicon_path)?;
    if let Some(p) = &cfg.manner_table {
        m.input("manner_table", p)?;
    }
    m.input(&measures_file(ModelTag::Fil), &fil_path)?;
    m.input(&measures_file(ModelTag::Fiddl), &fiddl_path)?;
    m.input(CIND_FILE, &cind_path)?;
    m.param("cind_epsilon", cfg.cind_epsilon);

    let stimuli = load_stimuli(&cfg.stimuli)?;
    let frequencies = load_frequency_list(&cfg.frequencies)?;
    let lemma_forms = load_lemma_forms(&lemma_path)?;
    let pronunciations = load_pronunciations(&pron_path)?;
    let neighbors = NeighborIndex::new(load_word_list(&lexicon_path)?);
    let manner = match &cfg.manner_table {
        Some(p) => MannerTable::load(p)?,
        None => MannerTable::estonian(),
    };
    let res = PredictorResources {
        frequencies: &frequencies,
        lemma_forms: &lemma_forms,
        neighbors: &neighbors,
        pronunciations: &pronunciations,
        manner: &manner,
    };
    let (records, pdiag) = compute_predictors(&stimuli, &res)?;
    let fil = correlation_map(&fil_path)?;
    let fiddl = correlation_map(&fiddl_path)?;
    let cind = cind_map(&cind_path)?;

    let mut diag = ExportDiagnostics {
        unmapped_manner: pdiag.unmapped_manner,
        absent_pronunciation: pdiag.absent_pronunciation,
        unknown_lemma: pdiag.unknown_lemma,
        ..Default::default()
    };
    let with_pos = stimuli.iter().any(|s| s.pos.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let out_path = dir.join(PREDICTORS_FILE);
    let io = |e: csv::Error| Error::io(&out_path, std::io::Error::other(e));
    let mut header: Vec<&str> = PREDICTOR_HEADER.to_vec();
    if with_pos {
        header.push("pos");
    }
    w.write_record(&header).map_err(io)?;

    for (stim, rec) in stimuli.iter().zip(&records) {
        let lookup = |map: &HashMap<String, Option<f64>>, path: &Path, tag: ModelTag| {
            map.get(&stim.word).copied().ok_or_else(|| Error::MissingArtifact {
                path: path.to_path_buf(),
                step: format!("measures --which {} (no row for {:?})", tag.slug(), stim.word),
            })
        };
        let tc_fil = lookup(&fil, &fil_path, ModelTag::Fil)?;
        let tc_fiddl = lookup(&fiddl, &fiddl_path, ModelTag::Fiddl)?;
        if tc_fil.is_none() {
            diag.undefined_correlation_fil.push(stim.word.clone());
        }
        if tc_fiddl.is_none() {
            diag.undefined_correlation_fiddl.push(stim.word.clone());
        }
        let ci = cind.get(&stim.lemma).copied();
        let log_ci = ci.and_then(|v| log_transform_cind(v, cfg.cind_epsilon));
        match ci {
            None => diag.unseen_in_corpus.push(stim.word.clone()),
            Some(_) if log_ci.is_none() => diag.negative_cind.push(stim.word.clone()),
            Some(_) => {}
        }
        let mut row = vec![
            rec.word.clone(),
            rec.length.to_string(),
            rec.log_frequency.to_string(),
            rec.paradigm_size_sqrt.to_string(),
            rec.ncount_log.to_string(),
            rec.entropy_flag.to_string(),
            rec.manner.to_string(),
            fmt_opt(tc_fil),
            fmt_opt(tc_fiddl),
            fmt_opt(ci),
            fmt_opt(log_ci),
        ];
        if with_pos {
            row.push(stim.pos.clone().unwrap_or_default());
        }
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(&out_path, std::io::Error::other(e.to_string())))?;
    write_file(&out_path, &bytes)?;

    let mut report = serde_json::to_string_pretty(&diag).expect("diagnostics serialize");
    report.push('\n');
    write_file(&dir.join(DIAGNOSTICS_FILE), report.as_bytes())?;
    for (what, list) in [
        ("not in corpus", &diag.unseen_in_corpus),
        ("undefined FIL correlation", &diag.undefined_correlation_fil),
        ("undefined FIDDL correlation", &diag.undefined_correlation_fiddl),
        ("unmapped manner", &diag.unmapped_manner),
    ] {
        if !list.is_empty() {
            log::warn!("export: {} words {what}", list.len());
        }
    }
    m.details.insert("rows".into(), stimuli.len().to_string());
    m.finish(dir, &[PREDICTORS_FILE, DIAGNOSTICS_FILE])?;
    Ok(diag)
}
