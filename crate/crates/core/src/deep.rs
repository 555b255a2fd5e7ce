//! Frequency-informed deep comprehension network.
//!
//! A single hidden rectifier layer maps binary cue vectors to embeddings
//! through a linear output layer. Training walks a token schedule in which
//! every word appears `ceil(freq / scale)` times, in minibatches, with Adam
//! updates on the mean squared error.
//!
//! Per-example work runs in parallel, but every reduction over a batch sums
//! examples in schedule order, so the trained parameters are bit-identical
//! for any thread count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoding::FormMatrix;
use crate::error::{Error, Result};
use crate::lexicon::FrequencyTable;
use crate::matrix::Matrix;

/// Seeded shuffle of the frequency-expanded token multiset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSchedule {
    tokens: Vec<usize>,
    scale: u64,
    seed: u64,
}

impl TokenSchedule {
    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Explicit order, for callers that build their own schedule.
    pub fn from_tokens(tokens: Vec<usize>) -> Self {
        TokenSchedule {
            tokens,
            scale: 1,
            seed: 0,
        }
    }
}

/// `ceil(freq / scale)`, which keeps every attested type.
pub fn scaled_token_count(freq: u64, scale: u64) -> u64 {
    freq / scale + u64::from(!freq.is_multiple_of(scale))
}

pub fn expand_token_schedule(
    freq: &FrequencyTable,
    words: &[String],
    scale: u64,
    seed: u64,
) -> Result<TokenSchedule> {
    if scale == 0 {
        return Err(Error::InvalidArgument("scale must be at least 1".into()));
    }
    let counts = freq.lookup_all(words)?;
    let total: u64 = counts.iter().map(|&f| scaled_token_count(f, scale)).sum();
    let mut tokens = Vec::with_capacity(total as usize);
    for (row, &f) in counts.iter().enumerate() {
        let n = scaled_token_count(f, scale) as usize;
        tokens.extend(std::iter::repeat_n(row, n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tokens.shuffle(&mut rng);
    Ok(TokenSchedule { tokens, scale, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiddlConfig {
    pub hidden: usize,
    pub rate: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl FiddlConfig {
    /// 1000 hidden units, learning rate 0.001, batch size 512, Adam 0.9/0.999/1e-8.
    pub fn new(epochs: usize, seed: u64) -> Self {
        FiddlConfig {
            hidden: 1000,
            rate: 0.001,
            batch: 512,
            epochs,
            seed,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch == 0 {
            return Err(Error::InvalidArgument("hidden and batch must be positive".into()));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::InvalidArgument("rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument("invalid Adam constants".into()));
        }
        Ok(())
    }
}

/// One set of network-shaped buffers: parameters, gradients or Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// inputs x hidden, row-major
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// hidden x outputs, row-major
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Params {
    fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Params {
            w1: vec![0.0; inputs * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * outputs],
            b2: vec![0.0; outputs],
        }
    }

    fn groups(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn groups_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn len(&self) -> usize {
        self.groups().iter().map(|g| g.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_abs(&self) -> f64 {
        self.groups()
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

pub const GROUP_NAMES: [&str; 4] = ["layer1.weight", "layer1.bias", "layer2.weight", "layer2.bias"];

/// Forward-pass intermediates for one example.
struct Trace {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepMap {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    params: Params,
    first_moment: Params,
    second_moment: Params,
    step: u64,
    config: FiddlConfig,
    epochs_trained: usize,
    epoch_losses: Vec<f64>,
    trailing_loss: Option<f64>,
}

const TRAILING_WINDOW: usize = 16;

impl DeepMap {
    /// Uniform initialization in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    pub fn init(inputs: usize, outputs: usize, config: &FiddlConfig) -> Result<Self> {
        config.validate()?;
        if inputs == 0 || outputs == 0 {
            return Err(Error::InvalidArgument("network needs inputs and outputs".into()));
        }
        let hidden = config.hidden;
        let mut params = Params::zeros(inputs, hidden, outputs);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        // separate stream from the schedule shuffle
        rng.set_stream(1);
        let a1 = (6.0 / (inputs + hidden) as f64).sqrt();
        for w in params.w1.iter_mut() {
            *w = rng.random_range(-a1..a1);
        }
        let a2 = (6.0 / (hidden + outputs) as f64).sqrt();
        for w in params.w2.iter_mut() {
            *w = rng.random_range(-a2..a2);
        }
        Ok(DeepMap {
            inputs,
            hidden,
            outputs,
            first_moment: Params::zeros(inputs, hidden, outputs),
            second_moment: Params::zeros(inputs, hidden, outputs),
            params,
            step: 0,
            config: config.clone(),
            epochs_trained: 0,
            epoch_losses: Vec::new(),
            trailing_loss: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn config(&self) -> &FiddlConfig {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    /// Mean per-token squared error of every completed epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    /// Mean loss over the last few minibatches of training.
    pub fn trailing_loss(&self) -> Option<f64> {
        self.trailing_loss
    }

    /// `inputs*hidden + hidden + hidden*outputs + outputs`.
    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn check_active(&self, active: &[u32]) -> Result<()> {
        match active.iter().find(|&&j| j as usize >= self.inputs) {
            Some(j) => Err(Error::Shape(format!("cue {j} outside network input size {}", self.inputs))),
            None => Ok(()),
        }
    }

    fn trace(&self, active: &[u32]) -> Trace {
        let h = self.hidden;
        let mut pre = self.params.b1.clone();
        for &j in active {
            let row = &self.params.w1[j as usize * h..(j as usize + 1) * h];
            for (z, w) in pre.iter_mut().zip(row) {
                *z += w;
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let mut output = self.params.b2.clone();
        for (k, &a) in hidden.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.params.w2[k * self.outputs..(k + 1) * self.outputs];
            for (o, w) in output.iter_mut().zip(row) {
                *o += a * w;
            }
        }
        Trace { pre, hidden, output }
    }

    /// Network output for a binary input given by its active cue ids.
    pub fn forward(&self, active: &[u32]) -> Result<Vec<f64>> {
        self.check_active(active)?;
        Ok(self.trace(active).output)
    }

    /// Gradient of the hidden pre-activation error for one example, given
    /// the output error `dy`.
    fn hidden_error(&self, trace: &Trace, dy: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|k| {
                if trace.pre[k] <= 0.0 {
                    return 0.0;
                }
                let row = &self.params.w2[k * self.outputs..(k + 1) * self.outputs];
                row.iter().zip(dy).map(|(w, d)| w * d).sum()
            })
            .collect()
    }

    /// Parameter gradients of the per-example loss `mean_d (f(c)_d - s_d)^2`.
    pub fn example_gradient(&self, active: &[u32], target: &[f64]) -> Result<Params> {
        self.check_active(active)?;
        if target.len() != self.outputs {
            return Err(Error::Shape("target length differs from network output".into()));
        }
        let t = self.trace(active);
        let scale = 2.0 / self.outputs as f64;
        let dy: Vec<f64> = t.output.iter().zip(target).map(|(y, s)| scale * (y - s)).collect();
        let dz = self.hidden_error(&t, &dy);
        let mut g = Params::zeros(self.inputs, self.hidden, self.outputs);
        for &j in active {
            g.w1[j as usize * self.hidden..(j as usize + 1) * self.hidden].copy_from_slice(&dz);
        }
        g.b1.copy_from_slice(&dz);
        for (k, &a) in t.hidden.iter().enumerate() {
            for (gw, d) in g.w2[k * self.outputs..(k + 1) * self.outputs].iter_mut().zip(&dy) {
                *gw = a * d;
            }
        }
        g.b2.copy_from_slice(&dy);
        Ok(g)
    }

    pub fn example_loss(&self, active: &[u32], target: &[f64]) -> Result<f64> {
        let y = self.forward(active)?;
        Ok(mse(&y, target))
    }

    fn adam_step(&mut self, grad: &Params) {
        self.step += 1;
        let cfg = &self.config;
        let (b1, b2, eps, lr) = (cfg.beta1, cfg.beta2, cfg.epsilon, cfg.rate);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let params = self.params.groups_mut();
        let ms = self.first_moment.groups_mut();
        let vs = self.second_moment.groups_mut();
        let gs = grad.groups();
        for (((p, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(gs) {
            p.par_iter_mut()
                .zip(m.par_iter_mut())
                .zip(v.par_iter_mut())
                .zip(g.par_iter())
                .for_each(|(((p, m), v), &g)| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let mh = *m / c1;
                    let vh = *v / c2;
                    *p -= lr * mh / (vh.sqrt() + eps);
                });
        }
    }

    /// One minibatch: returns the mean per-token squared error before the update.
    fn train_batch(&mut self, c: &FormMatrix, s: &Matrix, batch: &[usize], grad: &mut Params, touched: &mut Vec<usize>) -> f64 {
        let (h, d) = (self.hidden, self.outputs);
        let scale = 2.0 / (batch.len() * d) as f64;
        let per_example: Vec<(Trace, Vec<f64>, Vec<f64>, f64)> = batch
            .par_iter()
            .map(|&i| {
                let t = self.trace(c.row(i));
                let target = s.row(i);
                let loss = mse(&t.output, target);
                let dy: Vec<f64> = t.output.iter().zip(target).map(|(y, s)| scale * (y - s)).collect();
                let dz = self.hidden_error(&t, &dy);
                (t, dy, dz, loss)
            })
            .collect();

        // layer 2: each row reduced over examples in batch order
        grad.w2
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(k, row)| {
                row.iter_mut().for_each(|g| *g = 0.0);
                for (t, dy, _, _) in &per_example {
                    let a = t.hidden[k];
                    if a != 0.0 {
                        for (g, e) in row.iter_mut().zip(dy) {
                            *g += a * e;
                        }
                    }
                }
            });
        grad.b2.iter_mut().for_each(|g| *g = 0.0);
        grad.b1.iter_mut().for_each(|g| *g = 0.0);
        for &j in touched.iter() {
            grad.w1[j * h..(j + 1) * h].iter_mut().for_each(|g| *g = 0.0);
        }
        touched.clear();
        let mut loss = 0.0;
        for (&i, (_, dy, dz, l)) in batch.iter().zip(&per_example) {
            loss += l;
            for (g, e) in grad.b2.iter_mut().zip(dy) {
                *g += e;
            }
            for (g, e) in grad.b1.iter_mut().zip(dz) {
                *g += e;
            }
            for &j in c.row(i) {
                let j = j as usize;
                touched.push(j);
                for (g, e) in grad.w1[j * h..(j + 1) * h].iter_mut().zip(dz) {
                    *g += e;
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        self.adam_step(grad);
        loss / batch.len() as f64
    }

    /// Network output for every row of `c`.
    pub fn predict(&self, c: &FormMatrix) -> Result<Matrix> {
        if c.cols() != self.inputs {
            return Err(Error::Shape(format!(
                "form matrix has {} cues, network expects {}",
                c.cols(),
                self.inputs
            )));
        }
        let rows: Vec<Vec<f64>> = (0..c.rows())
            .into_par_iter()
            .map(|i| self.trace(c.row(i)).output)
            .collect();
        let mut data = Vec::with_capacity(c.rows() * self.outputs);
        for r in rows {
            data.extend(r);
        }
        Matrix::from_vec(c.rows(), self.outputs, data)
    }

    pub const MAGIC: &'static [u8; 8] = b"LXDEEP01";

    /// Binary checkpoint of shape, hyperparameters, parameters and optimizer state.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(Self::MAGIC)?;
        for v in [
            self.inputs as u64,
            self.hidden as u64,
            self.outputs as u64,
            self.config.batch as u64,
            self.config.epochs as u64,
            self.config.seed,
            self.step,
            self.epochs_trained as u64,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in [self.config.rate, self.config.beta1, self.config.beta2, self.config.epsilon] {
            out.write_all(&v.to_le_bytes())?;
        }
        for p in [&self.params, &self.first_moment, &self.second_moment] {
            for g in p.groups() {
                for v in g {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        out.write_all(&(self.epoch_losses.len() as u64).to_le_bytes())?;
        for v in &self.epoch_losses {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&self.trailing_loss.unwrap_or(f64::NAN).to_le_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_from<R: Read>(mut input: R, label: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Checkpoint {
            path: label.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != Self::MAGIC {
            return Err(bad("not a deep map checkpoint"));
        }
        let mut b8 = [0u8; 8];
        let mut word = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut b8).map_err(|_| bad("truncated checkpoint"))?;
            Ok(b8)
        };
        let mut ints = [0u64; 8];
        for v in ints.iter_mut() {
            *v = u64::from_le_bytes(word(&mut input)?);
        }
        let [inputs, hidden, outputs, batch, epochs, seed, step, epochs_trained] = ints;
        let mut floats = [0f64; 4];
        for v in floats.iter_mut() {
            *v = f64::from_le_bytes(word(&mut input)?);
        }
        let [rate, beta1, beta2, epsilon] = floats;
        let (inputs, hidden, outputs) = (inputs as usize, hidden as usize, outputs as usize);
        if inputs.checked_mul(hidden).is_none() || hidden.checked_mul(outputs).is_none() {
            return Err(bad("shape overflows"));
        }
        let mut read_params = |input: &mut R| -> Result<Params> {
            let mut p = Params::zeros(inputs, hidden, outputs);
            for g in p.groups_mut() {
                for v in g.iter_mut() {
                    *v = f64::from_le_bytes(word(input)?);
                }
            }
            Ok(p)
        };
        let params = read_params(&mut input)?;
        let first_moment = read_params(&mut input)?;
        let second_moment = read_params(&mut input)?;
        let n_losses = u64::from_le_bytes(word(&mut input)?) as usize;
        let mut epoch_losses = Vec::with_capacity(n_losses.min(1 << 20));
        for _ in 0..n_losses {
            epoch_losses.push(f64::from_le_bytes(word(&mut input)?));
        }
        let trailing = f64::from_le_bytes(word(&mut input)?);
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(|e| Error::io(label, e))? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(DeepMap {
            inputs,
            hidden,
            outputs,
            params,
            first_moment,
            second_moment,
            step,
            config: FiddlConfig {
                hidden,
                rate,
                batch: batch as usize,
                epochs: epochs as usize,
                seed,
                beta1,
                beta2,
                epsilon,
            },
            epochs_trained: epochs_trained as usize,
            epoch_losses,
            trailing_loss: (!trailing.is_nan()).then_some(trailing),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        DeepMap::read_from(BufReader::new(file), path)
    }
}

fn mse(y: &[f64], s: &[f64]) -> f64 {
    y.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Train a freshly initialized network for `config.epochs` passes over the
/// schedule. A batch larger than the schedule becomes a single batch; the
/// final partial batch is kept.
pub fn train_fiddl(c: &FormMatrix, s: &Matrix, schedule: &TokenSchedule, config: &FiddlConfig) -> Result<DeepMap> {
    if c.rows() != s.rows() {
        return Err(Error::Shape(format!("{} form rows, {} semantic rows", c.rows(), s.rows())));
    }
    if let Some(&bad) = schedule.tokens().iter().find(|&&i| i >= c.rows()) {
        return Err(Error::InvalidArgument(format!("scheduled row {bad} out of range")));
    }
    let mut net = DeepMap::init(c.cols(), s.cols(), config)?;
    continue_training(&mut net, c, s, schedule, config.epochs)?;
    Ok(net)
}

/// Further epochs on an existing network.
pub fn continue_training(
    net: &mut DeepMap,
    c: &FormMatrix,
    s: &Matrix,
    schedule: &TokenSchedule,
    epochs: usize,
) -> Result<()> {
    if c.cols() != net.inputs || s.cols() != net.outputs {
        return Err(Error::Shape("data shape differs from network shape".into()));
    }
    if schedule.is_empty() {
        return Ok(());
    }
    let batch_size = net.config.batch.min(schedule.len());
    let mut grad = Params::zeros(net.inputs, net.hidden, net.outputs);
    let mut touched = Vec::new();
    let mut window: std::collections::VecDeque<f64> = std::collections::VecDeque::new();
    for epoch in 0..epochs {
        let mut epoch_loss = 0.0;
        for batch in schedule.tokens().chunks(batch_size) {
            let loss = net.train_batch(c, s, batch, &mut grad, &mut touched);
            if !loss.is_finite() || !net.params.is_finite() {
                return Err(Error::Divergence {
                    stage: "fiddl",
                    step: net.step as usize,
                    detail: format!("non-finite loss or parameter in epoch {epoch}"),
                });
            }
            epoch_loss += loss * batch.len() as f64;
            window.push_back(loss);
            if window.len() > TRAILING_WINDOW {
                window.pop_front();
            }
        }
        net.epoch_losses.push(epoch_loss / schedule.len() as f64);
        net.epochs_trained += 1;
        log::debug!("fiddl epoch {} loss {:.6e}", net.epochs_trained, net.epoch_losses.last().unwrap());
    }
    if !window.is_empty() {
        net.trailing_loss = Some(window.iter().sum::<f64>() / window.len() as f64);
    }
    Ok(())
}

pub fn predict_fiddl(c: &FormMatrix, net: &DeepMap) -> Result<Matrix> {
    net.predict(c)
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Per parameter group, in [`GROUP_NAMES`] order; `None` when nothing in
    /// the group was checked.
    pub per_group: [Option<f64>; 4],
    pub checked: usize,
    /// Parameters skipped because a perturbation could cross a rectifier kink.
    pub skipped: usize,
}

/// Relative error floor: differences of gradients smaller than this in
/// magnitude count as relative to this value.
const RELATIVE_FLOOR: f64 = 1e-6;

/// Compare analytic gradients of the per-example loss with central
/// differences of step `h` over a seeded subset of at least `samples`
/// parameters (all of them when the network is smaller). Parameters feeding
/// a hidden unit with `|pre-activation| < 10 h` are skipped.
pub fn finite_difference_check(
    net: &DeepMap,
    active: &[u32],
    target: &[f64],
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<GradientCheck> {
    if !(1e-6..=1e-4).contains(&h) {
        return Err(Error::InvalidArgument(format!("perturbation {h} outside [1e-6, 1e-4]")));
    }
    let analytic = net.example_gradient(active, target)?;
    let pre = net.trace(active).pre;
    let sizes = analytic.groups().map(|g| g.len());
    let total: usize = sizes.iter().sum();
    let want = samples.max(100);
    let mut indices: Vec<usize> = (0..total).collect();
    if total > want {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        indices.truncate(want);
        indices.sort_unstable();
    }

    let mut scratch = net.clone();
    let mut per_group = [None::<f64>; 4];
    let mut checked = 0;
    let mut skipped = 0;
    for flat in indices {
        let (mut group, mut idx) = (0, flat);
        while idx >= sizes[group] {
            idx -= sizes[group];
            group += 1;
        }
        let unit = match group {
            0 => Some(idx % net.hidden),
            1 => Some(idx),
            _ => None,
        };
        if let Some(k) = unit {
            if pre[k].abs() < 10.0 * h {
                skipped += 1;
                continue;
            }
        }
        let original = net.params.groups()[group][idx];
        scratch.params.groups_mut()[group][idx] = original + h;
        let plus = scratch.example_loss(active, target)?;
        scratch.params.groups_mut()[group][idx] = original - h;
        let minus = scratch.example_loss(active, target)?;
        scratch.params.groups_mut()[group][idx] = original;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.groups()[group][idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        let slot = &mut per_group[group];
        *slot = Some(slot.map_or(rel, |m: f64| m.max(rel)));
        checked += 1;
    }
    Ok(GradientCheck {
        max_relative_error: per_group.iter().flatten().fold(0.0, |m, &v| m.max(v)),
        per_group,
        checked,
        skipped,
    })
}
