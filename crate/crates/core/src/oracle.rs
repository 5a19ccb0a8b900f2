//! Numerical ground truth for colored graphs: random realizations of the
//! weighted family, system assembly `ẋ = Ax + Bu`, Kalman and Hautus
//! controllability tests, and the zero-extension (balancing set) procedure.
//!
//! Weight convention: the weight of edge `(j, i)` sits at row `i`, column
//! `j` of `W` and `A`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{ColoredDigraph, VertexSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("the graph has no leader set")]
    NoLeaders,
    #[error("trials must be at least 1")]
    InvalidTrials,
}

/// Relative cutoff for the null space of a balance system.
pub const NULL_SPACE_RTOL: f64 = 1e-9;
/// A white coordinate counts as zero on the whole null space when its basis
/// row norm is below this fraction of the basis norm.
pub const VANISH_RTOL: f64 = 1e-8;
/// Probability that a sampled diagonal entry is exactly zero.
pub const ZERO_DIAGONAL_PROB: f64 = 0.1;

/// One point of the weighted family: a value per color and a diagonal.
/// `color_values[c]` is the weight of color id `c`; `diagonal[v]` the
/// self-loop weight of vertex `v` (0-based index, 1-based in JSON order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub color_values: Vec<f64>,
    pub diagonal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub leaders: VertexSet,
}

pub fn sample_realization_with<R: Rng>(g: &ColoredDigraph, rng: &mut R) -> Realization {
    let color_values = (0..g.palette_size())
        .map(|_| {
            let m: f64 = rng.random_range(0.5..=2.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    let diagonal = (0..g.n())
        .map(|_| {
            if rng.random_bool(ZERO_DIAGONAL_PROB) {
                0.0
            } else {
                rng.random_range(-1.0..=1.0)
            }
        })
        .collect();
    Realization {
        color_values,
        diagonal,
    }
}

/// Deterministic in `seed`.
pub fn sample_realization(g: &ColoredDigraph, seed: u64) -> Realization {
    sample_realization_with(g, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Off-diagonal weights only: `W_ij` is the value of the color of `(j, i)`.
pub fn weighted_adjacency(g: &ColoredDigraph, r: &Realization) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(g.n(), g.n());
    for e in g.edges() {
        w[(e.head, e.tail)] = r.color_values[e.color];
    }
    w
}

pub fn input_matrix(n: usize, leaders: VertexSet) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, leaders.len());
    for (j, v) in leaders.iter().enumerate() {
        b[(v, j)] = 1.0;
    }
    b
}

pub fn assemble(g: &ColoredDigraph, r: &Realization) -> Result<SystemMatrices, OracleError> {
    let leaders = g.leaders().ok_or(OracleError::NoLeaders)?;
    Ok(assemble_with(g, r, leaders))
}

pub fn assemble_with(g: &ColoredDigraph, r: &Realization, leaders: VertexSet) -> SystemMatrices {
    let mut a = weighted_adjacency(g, r);
    for (i, d) in r.diagonal.iter().enumerate() {
        a[(i, i)] = *d;
    }
    SystemMatrices {
        b: input_matrix(g.n(), leaders),
        a,
        leaders,
    }
}

/// `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix(sys: &SystemMatrices) -> DMatrix<f64> {
    let n = sys.a.nrows();
    let m = sys.b.ncols();
    let mut k = DMatrix::zeros(n, n * m);
    let mut block = sys.b.clone();
    for p in 0..n {
        k.columns_mut(p * m, m).copy_from(&block);
        block = &sys.a * block;
    }
    k
}

/// Singular values in decreasing order.
fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank of an `n`-row matrix together with how close it came.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    pub rows: usize,
    pub tolerance: f64,
    /// The `rows`-th largest singular value (0 when there are fewer columns).
    pub sigma_min: f64,
}

impl RankReport {
    pub fn full_row_rank(&self) -> bool {
        self.rank == self.rows
    }

    /// `sigma_min` within a factor of 10 of the tolerance, on either side.
    pub fn is_borderline(&self) -> bool {
        self.sigma_min >= self.tolerance / 10.0 && self.sigma_min <= self.tolerance * 10.0
    }
}

/// Rank with cutoff `rows · eps · σ_max`, or `rtol · σ_max` when given.
pub fn rank_report(m: &DMatrix<f64>, rtol: Option<f64>) -> RankReport {
    let rows = m.nrows();
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    let tolerance = rtol.unwrap_or(rows as f64 * f64::EPSILON) * smax;
    RankReport {
        rank: s.iter().filter(|&&x| x > tolerance).count(),
        rows,
        tolerance,
        sigma_min: s.get(rows.wrapping_sub(1)).copied().unwrap_or(0.0),
    }
}

pub fn kalman_report(sys: &SystemMatrices, rtol: Option<f64>) -> RankReport {
    rank_report(&controllability_matrix(sys), rtol)
}

pub fn is_controllable_rank(sys: &SystemMatrices) -> bool {
    kalman_report(sys, None).full_row_rank()
}

/// Relative rank cutoff used by the Hautus test; eigenvalues of non-normal
/// matrices carry more error than the Kalman matrix itself.
pub const PBH_RTOL: f64 = 1e-8;

/// Smallest relative `σ_n([A − λI, B]) / σ_max` over the eigenvalues of `A`.
pub fn pbh_margin(sys: &SystemMatrices) -> f64 {
    let n = sys.a.nrows();
    let m = sys.b.ncols();
    if n == 0 {
        return f64::INFINITY;
    }
    let mut worst = f64::INFINITY;
    for lambda in sys.a.complex_eigenvalues().iter() {
        let mut pencil = DMatrix::<Complex64>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                pencil[(i, j)] = Complex64::new(sys.a[(i, j)], 0.0);
            }
            pencil[(i, i)] -= lambda;
            for j in 0..m {
                pencil[(i, n + j)] = Complex64::new(sys.b[(i, j)], 0.0);
            }
        }
        let mut s: Vec<f64> = pencil.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        let ratio = if s[0] == 0.0 { 0.0 } else { s[n - 1] / s[0] };
        worst = worst.min(ratio);
    }
    worst
}

pub fn is_controllable_pbh(sys: &SystemMatrices) -> bool {
    pbh_margin(sys) > PBH_RTOL
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroExtensionStep {
    /// Zero vertices with at least one white out-neighbor.
    pub x: VertexSet,
    pub y: VertexSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroExtensionTrace {
    pub initial: VertexSet,
    pub steps: Vec<ZeroExtensionStep>,
    #[serde(rename = "final")]
    pub final_set: VertexSet,
}

/// Orthonormal basis (as columns) of `{x : m x = 0}`.
fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad with zero rows so the SVD returns a full set of right vectors.
    let mut sq = DMatrix::zeros(rows.max(cols), cols);
    sq.rows_mut(0, rows).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let tol = NULL_SPACE_RTOL * smax;
    let null: Vec<usize> = (0..cols)
        .filter(|&i| svd.singular_values[i] <= tol)
        .collect();
    let mut basis = DMatrix::zeros(cols, null.len());
    for (k, &i) in null.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).transpose());
    }
    basis
}

/// The balance system at zero set `zero`: rows are zero vertices `j`, columns
/// white vertices `k`, entry `W_kj`.
fn balance_system(w: &DMatrix<f64>, zero: VertexSet, white: &[usize]) -> DMatrix<f64> {
    let zs = zero.to_vec();
    DMatrix::from_fn(zs.len(), white.len(), |r, c| w[(white[c], zs[r])])
}

/// White vertices that vanish on every solution of the balance system,
/// together with a null-space basis over `white`.
fn forced_by_balance(w: &DMatrix<f64>, zero: VertexSet) -> (VertexSet, Vec<usize>, DMatrix<f64>) {
    let n = w.nrows();
    let white = (VertexSet::full(n) - zero).to_vec();
    let basis = null_space(&balance_system(w, zero, &white));
    let cutoff = VANISH_RTOL * basis.norm();
    let forced = white
        .iter()
        .enumerate()
        .filter(|&(i, _)| basis.ncols() == 0 || basis.row(i).norm() < cutoff)
        .map(|(_, &v)| v)
        .collect();
    (forced, white, basis)
}

fn active_zero(w: &DMatrix<f64>, zero: VertexSet) -> VertexSet {
    let white = VertexSet::full(w.nrows()) - zero;
    zero.iter()
        .filter(|&j| white.iter().any(|k| w[(k, j)] != 0.0))
        .collect()
}

/// `D_z(C)`: repeatedly solve the balance equations
/// `Σ_k x_k W_kj = 0` (`j` zero, `k` white) and add every white vertex that
/// is zero on all solutions.
pub fn zero_extension_derived_set(w: &DMatrix<f64>, coloring: VertexSet) -> ZeroExtensionTrace {
    let mut zero = coloring;
    let mut steps = Vec::new();
    loop {
        let (forced, _, _) = forced_by_balance(w, zero);
        if forced.is_empty() {
            break;
        }
        steps.push(ZeroExtensionStep {
            x: active_zero(w, zero),
            y: forced,
        });
        zero = zero | forced;
    }
    ZeroExtensionTrace {
        initial: coloring,
        steps,
        final_set: zero,
    }
}

/// Same fixpoint, but each round adds only a random nonempty subset of the
/// forced vertices. Used to check that the result is order independent.
pub fn zero_extension_shuffled<R: Rng>(
    w: &DMatrix<f64>,
    coloring: VertexSet,
    rng: &mut R,
) -> VertexSet {
    let mut zero = coloring;
    loop {
        let (forced, _, _) = forced_by_balance(w, zero);
        if forced.is_empty() {
            return zero;
        }
        let mut order = forced.to_vec();
        order.shuffle(rng);
        let take = rng.random_range(1..=order.len());
        zero = zero | order[..take].iter().copied().collect();
    }
}

pub fn is_balancing_set(w: &DMatrix<f64>, leaders: VertexSet) -> bool {
    zero_extension_derived_set(w, leaders).final_set == VertexSet::full(w.nrows())
}

/// For a non-balancing `leaders`, a diagonal that makes `(W + D, B)`
/// uncontrollable: pick a generic solution `x` of the final balance system
/// and set `d_j = −(Σ_k x_k W_kj) / x_j` on its support, so `xᵀA = 0` and
/// `xᵀB = 0`. Returns `None` when `leaders` is balancing or no usable `x`
/// was found.
pub fn uncontrollable_diagonal<R: Rng>(
    w: &DMatrix<f64>,
    leaders: VertexSet,
    rng: &mut R,
) -> Option<Vec<f64>> {
    let n = w.nrows();
    let zero = zero_extension_derived_set(w, leaders).final_set;
    let (_, white, basis) = forced_by_balance(w, zero);
    if white.is_empty() || basis.ncols() == 0 {
        return None;
    }
    let coeffs = DMatrix::from_fn(basis.ncols(), 1, |_, _| rng.random_range(-1.0..=1.0));
    let y = &basis * coeffs;
    let mut x = vec![0.0; n];
    for (i, &v) in white.iter().enumerate() {
        x[v] = y[(i, 0)];
    }
    let scale = y.norm();
    let mut diagonal = vec![0.0; n];
    for &j in &white {
        if x[j].abs() < 1e-6 * scale {
            return None;
        }
        let s: f64 = (0..n).filter(|&k| k != j).map(|k| x[k] * w[(k, j)]).sum();
        diagonal[j] = -s / x[j];
    }
    Some(diagonal)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SampledVerdict {
    Corroborated {
        trials: usize,
    },
    Counterexample {
        seed_offset: u64,
        realization: Realization,
    },
}

impl SampledVerdict {
    pub fn is_corroborated(&self) -> bool {
        matches!(self, SampledVerdict::Corroborated { .. })
    }
}

/// Checks the balancing property on `trials` realizations; trial `i` uses
/// seed `seed + i`. The first failing trial is reported.
pub fn sampled_verdict(
    g: &ColoredDigraph,
    leaders: VertexSet,
    trials: usize,
    seed: u64,
) -> Result<SampledVerdict, OracleError> {
    if trials == 0 {
        return Err(OracleError::InvalidTrials);
    }
    for i in 0..trials as u64 {
        let r = sample_realization(g, seed.wrapping_add(i));
        if !is_balancing_set(&weighted_adjacency(g, &r), leaders) {
            return Ok(SampledVerdict::Counterexample {
                seed_offset: i,
                realization: r,
            });
        }
    }
    Ok(SampledVerdict::Corroborated { trials })
}
