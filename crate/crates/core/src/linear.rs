//! Linear form-to-meaning (F) and meaning-to-form (G) mappings.
//!
//! Batch solutions minimize the (optionally frequency-weighted) squared
//! error plus a ridge penalty. The normal equations are solved by Cholesky
//! when well conditioned; otherwise the minimum-norm solution is computed
//! from a singular value decomposition with cutoff
//! `max(rows, cols) * eps * sigma_max`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::encoding::FormMatrix;
use crate::error::{Error, Result};
use crate::lexicon::FrequencyTable;
use crate::matrix::Matrix;

/// Reciprocal condition estimate below which Cholesky is abandoned.
const RCOND_FLOOR: f64 = 1e-12;
/// Above this many design-matrix cells the pseudo-inverse is taken from the
/// eigendecomposition of the Gram matrix instead of an SVD of the design.
const DENSE_SVD_LIMIT: usize = 40_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Endstate,
    FrequencyInformed,
    Incremental,
}

impl MapKind {
    fn code(self) -> u8 {
        match self {
            MapKind::Endstate => 0,
            MapKind::FrequencyInformed => 1,
            MapKind::Incremental => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => MapKind::Endstate,
            1 => MapKind::FrequencyInformed,
            2 => MapKind::Incremental,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Endstate => "endstate",
            MapKind::FrequencyInformed => "frequency_informed",
            MapKind::Incremental => "incremental",
        }
    }
}

/// Comprehension maps cues to dimensions (F); production maps dimensions to cues (G).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Comprehension,
    Production,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    Cholesky,
    PseudoInverse,
    GramEigen,
    DeltaRule,
}

impl SolverPath {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverPath::Cholesky => "cholesky",
            SolverPath::PseudoInverse => "svd_pseudo_inverse",
            SolverPath::GramEigen => "gram_eigen_pseudo_inverse",
            SolverPath::DeltaRule => "delta_rule",
        }
    }
}

/// How a map was obtained. Not part of the binary checkpoint; the pipeline
/// writes it into the sidecar manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct MapMetadata {
    pub solver: SolverPath,
    /// Numerical rank used by the pseudo-inverse paths.
    pub rank: Option<usize>,
    /// Number of delta-rule updates applied.
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    weights: Matrix,
    kind: MapKind,
    direction: Direction,
    ridge: f64,
    metadata: MapMetadata,
}

impl LinearMap {
    pub fn new(weights: Matrix, kind: MapKind, direction: Direction, ridge: f64) -> Self {
        LinearMap {
            weights,
            kind,
            direction,
            ridge,
            metadata: MapMetadata {
                solver: SolverPath::Cholesky,
                rank: None,
                tokens: 0,
            },
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn metadata(&self) -> &MapMetadata {
        &self.metadata
    }

    /// Number of connection weights.
    pub fn parameter_count(&self) -> usize {
        self.weights.rows() * self.weights.cols()
    }

    pub const MAGIC: &'static [u8; 8] = b"LXLMAP01";

    /// Binary checkpoint: magic, kind, direction, ridge, shape, row-major
    /// little-endian weights.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(Self::MAGIC)?;
        out.write_all(&[self.kind.code(), u8::from(self.direction == Direction::Production)])?;
        out.write_all(&self.ridge.to_le_bytes())?;
        out.write_all(&(self.weights.rows() as u64).to_le_bytes())?;
        out.write_all(&(self.weights.cols() as u64).to_le_bytes())?;
        for v in self.weights.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
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
            return Err(bad("not a linear map checkpoint"));
        }
        let mut flags = [0u8; 2];
        input.read_exact(&mut flags).map_err(|_| bad("truncated header"))?;
        let kind = MapKind::from_code(flags[0]).ok_or_else(|| bad("unknown map kind"))?;
        let direction = match flags[1] {
            0 => Direction::Comprehension,
            1 => Direction::Production,
            _ => return Err(bad("unknown direction")),
        };
        let mut b8 = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut b8).map_err(|_| bad("truncated checkpoint"))?;
            Ok(b8)
        };
        let ridge = f64::from_le_bytes(next(&mut input)?);
        let rows = u64::from_le_bytes(next(&mut input)?) as usize;
        let cols = u64::from_le_bytes(next(&mut input)?) as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| bad("shape overflows"))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(next(&mut input)?));
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(|e| Error::io(label, e))? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(LinearMap::new(Matrix::from_vec(rows, cols, data)?, kind, direction, ridge))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        LinearMap::read_from(BufReader::new(file), path)
    }
}

fn check_ridge(ridge: f64) -> Result<()> {
    if ridge.is_finite() && ridge >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("ridge must be finite and >= 0, got {ridge}")))
    }
}

/// Design matrix for a least-squares problem: sparse binary or dense.
enum Design<'a> {
    Sparse(&'a FormMatrix),
    Dense(&'a Matrix),
}

impl Design<'_> {
    fn rows(&self) -> usize {
        match self {
            Design::Sparse(c) => c.rows(),
            Design::Dense(m) => m.rows(),
        }
    }

    fn cols(&self) -> usize {
        match self {
            Design::Sparse(c) => c.cols(),
            Design::Dense(m) => m.cols(),
        }
    }

    /// `X^T W X` and `X^T W Y`.
    fn normal_equations(&self, targets: &Matrix, weights: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.cols();
        let q = targets.cols();
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DMatrix::<f64>::zeros(p, q);
        match self {
            Design::Sparse(c) => {
                for (i, &w) in weights.iter().enumerate().take(c.rows()) {
                    let active = c.row(i);
                    for &j in active {
                        for &k in active {
                            gram[(j as usize, k as usize)] += w;
                        }
                        for (d, &s) in targets.row(i).iter().enumerate() {
                            rhs[(j as usize, d)] += w * s;
                        }
                    }
                }
            }
            Design::Dense(x) => {
                let xw = weighted_rows(x, weights, false);
                let xm = x.to_nalgebra();
                gram = xw.transpose() * &xm;
                rhs = xw.transpose() * targets.to_nalgebra();
            }
        }
        (gram, rhs)
    }

    /// `W^(1/2) X` as a dense matrix.
    fn sqrt_weighted_dense(&self, weights: &[f64]) -> DMatrix<f64> {
        let dense = match self {
            Design::Sparse(c) => c.to_dense(),
            Design::Dense(m) => (*m).clone(),
        };
        weighted_rows(&dense, weights, true)
    }
}

fn weighted_rows(m: &Matrix, weights: &[f64], sqrt: bool) -> DMatrix<f64> {
    let mut out = m.to_nalgebra();
    for (i, &w) in weights.iter().enumerate() {
        let f = if sqrt { w.sqrt() } else { w };
        out.row_mut(i).scale_mut(f);
    }
    out
}

fn cholesky_solve(gram: &DMatrix<f64>, rhs: &DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    let p = gram.nrows();
    let mut a = gram.clone();
    for i in 0..p {
        a[(i, i)] += ridge;
    }
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let (lo, hi) = (0..p).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let d = l[(i, i)].abs();
        (lo.min(d), hi.max(d))
    });
    if p > 0 && (hi == 0.0 || (lo / hi).powi(2) < RCOND_FLOOR) {
        return None;
    }
    Some(chol.solve(rhs))
}

fn pseudo_inverse_solve(
    design: &Design,
    targets: &Matrix,
    weights: &[f64],
    ridge: f64,
) -> Result<(DMatrix<f64>, usize)> {
    let xw = design.sqrt_weighted_dense(weights);
    let yw = weighted_rows(targets, weights, true);
    let (n, p) = xw.shape();
    let svd = xw.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = n.max(p) as f64 * f64::EPSILON * sigma_max;
    let uty = u.transpose() * yw;
    let mut scaled = DMatrix::<f64>::zeros(v_t.nrows(), targets.cols());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            rank += 1;
            let f = s / (s * s + ridge);
            for d in 0..targets.cols() {
                scaled[(k, d)] = uty[(k, d)] * f;
            }
        }
    }
    Ok((v_t.transpose() * scaled, rank))
}

fn gram_eigen_solve(gram: &DMatrix<f64>, rhs: &DMatrix<f64>, ridge: f64, n: usize) -> (DMatrix<f64>, usize) {
    let p = gram.nrows();
    let eig = gram.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    // Eigenvalues of the Gram matrix carry absolute error ~eps * lmax.
    let cutoff = n.max(p) as f64 * f64::EPSILON * lmax;
    let vt_rhs = eig.eigenvectors.transpose() * rhs;
    let mut scaled = DMatrix::<f64>::zeros(p, rhs.ncols());
    let mut rank = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff {
            rank += 1;
            let f = 1.0 / (l + ridge);
            for d in 0..rhs.ncols() {
                scaled[(k, d)] = vt_rhs[(k, d)] * f;
            }
        }
    }
    (&eig.eigenvectors * scaled, rank)
}

fn weighted_least_squares(
    design: Design,
    targets: &Matrix,
    weights: &[f64],
    ridge: f64,
) -> Result<(Matrix, MapMetadata)> {
    check_ridge(ridge)?;
    if design.rows() != targets.rows() {
        return Err(Error::Shape(format!(
            "design has {} rows, targets {}",
            design.rows(),
            targets.rows()
        )));
    }
    if design.rows() == 0 {
        return Err(Error::Shape("no rows to fit".into()));
    }
    debug_assert_eq!(weights.len(), design.rows());
    let (gram, rhs) = design.normal_equations(targets, weights);
    let (solution, solver, rank) = match cholesky_solve(&gram, &rhs, ridge) {
        Some(sol) => (sol, SolverPath::Cholesky, None),
        None if design.rows() * design.cols() <= DENSE_SVD_LIMIT => {
            let (sol, rank) = pseudo_inverse_solve(&design, targets, weights, ridge)?;
            (sol, SolverPath::PseudoInverse, Some(rank))
        }
        None => {
            let (sol, rank) = gram_eigen_solve(&gram, &rhs, ridge, design.rows());
            (sol, SolverPath::GramEigen, Some(rank))
        }
    };
    if rank.is_some() {
        log::info!("normal equations ill conditioned; used {}", solver.as_str());
    }
    let weights = Matrix::from_nalgebra(&solution);
    if !weights.is_finite() {
        return Err(Error::Divergence {
            stage: "least-squares",
            step: 0,
            detail: "non-finite solution".into(),
        });
    }
    Ok((
        weights,
        MapMetadata {
            solver,
            rank,
            tokens: 0,
        },
    ))
}

/// Least-squares comprehension map: minimizes `|CF - S|^2 + ridge |F|^2`.
pub fn solve_endstate(c: &FormMatrix, s: &Matrix, ridge: f64) -> Result<LinearMap> {
    let weights = vec![1.0; c.rows()];
    let (f, metadata) = weighted_least_squares(Design::Sparse(c), s, &weights, ridge)?;
    Ok(LinearMap {
        weights: f,
        kind: MapKind::Endstate,
        direction: Direction::Comprehension,
        ridge,
        metadata,
    })
}

/// Weighted least squares with one non-negative weight per row of `c`.
pub fn solve_weighted(c: &FormMatrix, s: &Matrix, weights: &[f64], ridge: f64) -> Result<LinearMap> {
    if weights.len() != c.rows() {
        return Err(Error::Shape(format!(
            "{} weights for {} rows",
            weights.len(),
            c.rows()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("weights must be finite and >= 0".into()));
    }
    let (f, metadata) = weighted_least_squares(Design::Sparse(c), s, weights, ridge)?;
    Ok(LinearMap {
        weights: f,
        kind: MapKind::FrequencyInformed,
        direction: Direction::Comprehension,
        ridge,
        metadata,
    })
}

/// Frequency-informed map: every word's squared error weighted by its raw token count.
pub fn solve_fil(c: &FormMatrix, s: &Matrix, freq: &FrequencyTable, ridge: f64) -> Result<LinearMap> {
    let weights: Vec<f64> = freq
        .lookup_all(c.row_words())?
        .into_iter()
        .map(|f| f as f64)
        .collect();
    solve_weighted(c, s, &weights, ridge)
}

/// Production map G minimizing `|SG - C|^2 + ridge |G|^2`.
pub fn solve_production(c: &FormMatrix, s: &Matrix, ridge: f64) -> Result<LinearMap> {
    let weights = vec![1.0; s.rows()];
    let (g, metadata) = weighted_least_squares(Design::Dense(s), &c.to_dense(), &weights, ridge)?;
    Ok(LinearMap {
        weights: g,
        kind: MapKind::Endstate,
        direction: Direction::Production,
        ridge,
        metadata,
    })
}

/// Delta-rule learning from zero weights, one update per scheduled row:
/// `F += rate * c_i^T (s_i - c_i F)`.
pub fn train_widrow_hoff(c: &FormMatrix, s: &Matrix, schedule: &[usize], rate: f64) -> Result<LinearMap> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidArgument(format!("rate must be > 0, got {rate}")));
    }
    if c.rows() != s.rows() {
        return Err(Error::Shape(format!("{} form rows, {} semantic rows", c.rows(), s.rows())));
    }
    if let Some(&bad) = schedule.iter().find(|&&i| i >= c.rows()) {
        return Err(Error::InvalidArgument(format!("scheduled row {bad} out of range")));
    }
    let dim = s.cols();
    let mut f = Matrix::zeros(c.cols(), dim);
    let mut err = vec![0.0; dim];
    for (t, &i) in schedule.iter().enumerate() {
        let active = c.row(i);
        err.copy_from_slice(s.row(i));
        for &j in active {
            for (e, w) in err.iter_mut().zip(f.row(j as usize)) {
                *e -= w;
            }
        }
        for &j in active {
            let row = f.row_mut(j as usize);
            for (w, e) in row.iter_mut().zip(&err) {
                *w += rate * e;
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::Divergence {
                    stage: "widrow-hoff",
                    step: t,
                    detail: format!("non-finite weight after rate {rate}"),
                });
            }
        }
    }
    Ok(LinearMap {
        weights: f,
        kind: MapKind::Incremental,
        direction: Direction::Comprehension,
        ridge: 0.0,
        metadata: MapMetadata {
            solver: SolverPath::DeltaRule,
            rank: None,
            tokens: schedule.len(),
        },
    })
}

/// `S_hat = C F`, rows aligned with `c`.
pub fn predict_semantics(c: &FormMatrix, map: &LinearMap) -> Result<Matrix> {
    let f = map.weights();
    if c.cols() != f.rows() {
        return Err(Error::Shape(format!(
            "form matrix has {} cues, map expects {}",
            c.cols(),
            f.rows()
        )));
    }
    let mut out = Matrix::zeros(c.rows(), f.cols());
    for i in 0..c.rows() {
        let row = out.row_mut(i);
        for &j in c.row(i) {
            for (o, w) in row.iter_mut().zip(f.row(j as usize)) {
                *o += w;
            }
        }
    }
    Ok(out)
}

/// `C_hat = S G`.
pub fn predict_forms(s: &Matrix, map: &LinearMap) -> Result<Matrix> {
    s.matmul(map.weights())
}
