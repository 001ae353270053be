//! Starting points for the solvers.

use nalgebra::DMatrix;

use crate::dualbasis::{universe_size, SampleSet};
use crate::error::{EdgError, Result};
use crate::linalg::top_abs_eigenpairs;
use crate::manifold::{project_tangent_product, retract_structured, LowRankFactor};
use crate::sampling::Observations;
use crate::solvers::Problem;

/// Seed of the start block used by the iterative eigensolver.
pub const EIGEN_START_SEED: u64 = 0x1e17_0057;

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleConfig {
    /// Number of refinement rounds `S`; the samples are split into `S + 1`
    /// groups.
    pub partitions: usize,
    /// Coherence level used by [`trim`].
    pub nu: f64,
    pub rank: usize,
}

/// `(L/m)·H_r(R_Ω(X))` from the observed distances.
///
/// The result may be rank deficient (fewer than `r` nonzero eigenvalues);
/// check [`LowRankFactor::is_rank_deficient`].
pub fn init_one_step(omega: &SampleSet, obs: &Observations, r: usize) -> Result<LowRankFactor> {
    one_step(&Problem::new(omega, obs)?, r)
}

fn one_step(problem: &Problem, r: usize) -> Result<LowRankFactor> {
    let n = problem.n();
    if r == 0 || r > n {
        return Err(EdgError::invalid(format!("rank {r} out of range for n = {n}")));
    }
    let scale = universe_size(n) as f64 / problem.m() as f64;
    let op = problem.operator();
    let values = problem.values();
    let (vals, vecs) = top_abs_eigenpairs(n, r, |v| op.dual_apply(values, v) * scale, EIGEN_START_SEED);
    if vals.len() < r {
        return Err(EdgError::RankDeficient);
    }
    Ok(LowRankFactor::from_parts_unchecked(vecs, vals))
}

/// Row cap `√(νr/n)` applied by [`trim`].
pub fn trim_threshold(n: usize, nu: f64, r: usize) -> f64 {
    (nu * r as f64 / n as f64).sqrt()
}

/// The basis with every row rescaled to norm `min(‖row‖, √(νr/n))`.
pub fn trim_rows(f: &LowRankFactor, nu: f64, r: usize) -> DMatrix<f64> {
    let cap = trim_threshold(f.n(), nu, r);
    let mut a = f.basis().clone();
    for mut row in a.row_iter_mut() {
        let norm = row.norm();
        if norm > cap {
            row *= cap / norm;
        }
    }
    a
}

/// `A·diag(d)·Aᵀ` with `A` = [`trim_rows`], re-factored with an orthonormal
/// basis. Returns `f` itself when no row exceeds the cap.
pub fn trim(f: &LowRankFactor, nu: f64, r: usize) -> Result<LowRankFactor> {
    if !(nu >= 1.0) || !nu.is_finite() {
        return Err(EdgError::invalid(format!("trim level ν = {nu} must be finite and ≥ 1")));
    }
    if r == 0 {
        return Err(EdgError::invalid("trim rank must be at least 1"));
    }
    let cap = trim_threshold(f.n(), nu, r);
    if f.basis().row_iter().all(|row| row.norm() <= cap) {
        return Ok(f.clone());
    }
    let a = trim_rows(f, nu, r);
    LowRankFactor::from_symmetric_product(&a, &DMatrix::from_diagonal(f.spectrum()), f.rank())
}

/// Resampled initialization: a one-step estimate from the first group, then
/// `S` rounds of trimming followed by a tangent correction with fixed step
/// `L/m̂` on a fresh group.
pub fn init_resampled(omega: &SampleSet, obs: &Observations, cfg: &ResampleConfig) -> Result<LowRankFactor> {
    let groups = omega.partition(cfg.partitions + 1)?;
    let n = omega.n();
    let l = universe_size(n) as f64;
    let mut z = one_step(&Problem::new(&groups[0], obs)?, cfg.rank)?;
    for group in &groups[1..] {
        let problem = Problem::new(group, obs)?;
        let trimmed = trim(&z, cfg.nu, cfg.rank)?;
        let res = problem.residuals(&trimmed);
        let gu = problem.operator().dual_apply(&res, trimmed.basis());
        let xi = project_tangent_product(&trimmed, &gu)?;
        z = retract_structured(&xi, l / problem.m() as f64, cfg.rank)?;
    }
    Ok(z)
}
