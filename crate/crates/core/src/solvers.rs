//! Riemannian descent for distance completion.
//!
//! Both solvers keep the iterate `X_l = U·diag(d)·Uᵀ` factored. Each step
//! evaluates the iterate at the sampled pairs, forms the residual direction
//! only through its product with `U`, projects onto the tangent space,
//! picks the exact minimizing step along the projected direction for the
//! quadratic model, and retracts with the `2r×2r` structured eigensolve.

use std::fmt;

use nalgebra::DMatrix;

use crate::dualbasis::{SampleSet, SamplingOperator};
use crate::error::{EdgError, Result};
use crate::geometry::PointConfig;
use crate::linalg::SymLowRank;
use crate::manifold::{project_tangent_product, retract_structured, LowRankFactor, TangentVector};
use crate::sampling::Observations;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Gradient of `½⟨Y − X, F_Ω(Y − X)⟩`, with `F_Ω = Σ⟨·,w_α⟩w_α`.
    FrameDescent,
    /// `R_Ω(X − X_l)` used in place of a gradient, with the step clamped at 0.
    PseudoGradient,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::FrameDescent => "frame",
            Variant::PseudoGradient => "pseudo",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub rank: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub variant: Variant,
    /// Ground truth, used only to fill `truth_error_trace`.
    pub track_truth: Option<LowRankFactor>,
}

impl SolverConfig {
    pub const DEFAULT_MAX_ITERS: usize = 1000;
    pub const DEFAULT_REL_TOL: f64 = 1e-5;

    pub fn new(rank: usize, variant: Variant) -> Self {
        SolverConfig {
            rank,
            max_iters: Self::DEFAULT_MAX_ITERS,
            rel_tol: Self::DEFAULT_REL_TOL,
            variant,
            track_truth: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(EdgError::invalid("solver rank must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(EdgError::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(EdgError::invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    StepClampedToZero,
    RankDeficient,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::StepClampedToZero => "step_clamped",
            SolverStatus::RankDeficient => "rank_deficient",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub status: SolverStatus,
    pub rel_change_trace: Vec<f64>,
    pub truth_error_trace: Option<Vec<f64>>,
    pub step_trace: Vec<f64>,
}

/// The sampled data of a completion problem in sparse form.
#[derive(Debug, Clone)]
pub struct Problem {
    op: SamplingOperator,
    values: Vec<f64>,
}

impl Problem {
    pub fn new(omega: &SampleSet, obs: &Observations) -> Result<Self> {
        let values = obs.aligned(omega)?;
        Ok(Problem {
            op: SamplingOperator::new(omega),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    /// Multiset cardinality `m`.
    pub fn m(&self) -> usize {
        self.op.m()
    }

    pub fn operator(&self) -> &SamplingOperator {
        &self.op
    }

    /// Observed value of each distinct pair, aligned with `operator().pairs()`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `D_α − ⟨X_l, w_α⟩` for each distinct sampled pair.
    pub fn residuals(&self, f: &LowRankFactor) -> Vec<f64> {
        let x = f.entries();
        self.op
            .pairs()
            .iter()
            .zip(&self.values)
            .map(|(p, d)| d - w_coeff(&x, p.pair.i(), p.pair.j()))
            .collect()
    }

    /// `G·V` for the descent direction `G` built from per-pair residuals.
    pub fn direction_apply(&self, variant: Variant, res: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
        match variant {
            Variant::FrameDescent => self.op.frame_apply(res, v),
            Variant::PseudoGradient => self.op.dual_apply(res, v),
        }
    }

    /// Dense descent direction `G` (`n×n`), for inspection.
    pub fn direction_dense(&self, variant: Variant, res: &[f64]) -> DMatrix<f64> {
        match variant {
            Variant::FrameDescent => self.op.frame_dense(res),
            Variant::PseudoGradient => self.op.r_omega_dense(res),
        }
    }

    /// `⟨ξ, F_Ω ξ⟩` or `⟨ξ, R_Ω ξ⟩` for a tangent vector, in `O(mr + nr)`.
    pub fn curvature(&self, variant: Variant, xi: &TangentVector<'_>) -> f64 {
        let y = xi.entries();
        match variant {
            Variant::FrameDescent => self
                .op
                .pairs()
                .iter()
                .map(|p| {
                    let c = w_coeff(&y, p.pair.i(), p.pair.j());
                    p.mult * c * c
                })
                .sum(),
            Variant::PseudoGradient => {
                let rho = y.row_means();
                let grand = rho.iter().sum::<f64>() / rho.len() as f64;
                self.op
                    .pairs()
                    .iter()
                    .map(|p| {
                        let (i, j) = (p.pair.i(), p.pair.j());
                        let cw = w_coeff(&y, i, j);
                        let cv = -(y.entry(i, j) - rho[i] - rho[j] + grand);
                        p.mult * cw * cv
                    })
                    .sum()
            }
        }
    }
}

#[inline]
fn w_coeff(y: &SymLowRank, i: usize, j: usize) -> f64 {
    y.entry(i, i) + y.entry(j, j) - 2.0 * y.entry(i, j)
}

/// Restricted frame descent on `½⟨Y − X, F_Ω(Y − X)⟩`.
pub fn frame_descent(
    omega: &SampleSet,
    obs: &Observations,
    cfg: &SolverConfig,
    x0: &LowRankFactor,
) -> Result<(LowRankFactor, SolverReport)> {
    solve(&Problem::new(omega, obs)?, cfg, x0, Variant::FrameDescent)
}

/// Riemannian pseudo-gradient descent with direction `R_Ω(X − X_l)`.
pub fn pseudo_gradient(
    omega: &SampleSet,
    obs: &Observations,
    cfg: &SolverConfig,
    x0: &LowRankFactor,
) -> Result<(LowRankFactor, SolverReport)> {
    solve(&Problem::new(omega, obs)?, cfg, x0, Variant::PseudoGradient)
}

/// Runs the variant named in `cfg`.
pub fn run_solver(
    omega: &SampleSet,
    obs: &Observations,
    cfg: &SolverConfig,
    x0: &LowRankFactor,
) -> Result<(LowRankFactor, SolverReport)> {
    solve(&Problem::new(omega, obs)?, cfg, x0, cfg.variant)
}

/// Solver loop on a prepared [`Problem`].
pub fn solve(
    problem: &Problem,
    cfg: &SolverConfig,
    x0: &LowRankFactor,
    variant: Variant,
) -> Result<(LowRankFactor, SolverReport)> {
    cfg.validate()?;
    if x0.n() != problem.n() {
        return Err(EdgError::DimensionMismatch(format!(
            "initial factor has n = {}, samples have n = {}",
            x0.n(),
            problem.n()
        )));
    }
    if x0.rank() != cfg.rank {
        return Err(EdgError::DimensionMismatch(format!(
            "initial factor has rank {}, solver rank is {}",
            x0.rank(),
            cfg.rank
        )));
    }
    let truth = match &cfg.track_truth {
        Some(t) if t.n() != problem.n() => {
            return Err(EdgError::DimensionMismatch("tracked truth over different n".into()))
        }
        Some(t) => {
            let norm = t.frob_norm();
            if norm == 0.0 {
                return Err(EdgError::ZeroNorm);
            }
            Some((t, norm))
        }
        None => None,
    };

    let mut x = x0.clone();
    let mut report = SolverReport {
        iterations: 0,
        status: SolverStatus::MaxIters,
        rel_change_trace: Vec::new(),
        truth_error_trace: truth.map(|_| Vec::new()),
        step_trace: Vec::new(),
    };

    for _ in 0..cfg.max_iters {
        let res = problem.residuals(&x);
        if res.iter().all(|&v| v == 0.0) {
            report.status = SolverStatus::Converged;
            break;
        }
        let gu = problem.direction_apply(variant, &res, x.basis());
        let xi = project_tangent_product(&x, &gu)?;
        let num = xi.norm().powi(2);
        let den = problem.curvature(variant, &xi);
        let step = if num > 0.0 && den > 0.0 { num / den } else { 0.0 };
        if !(step > 0.0) || !step.is_finite() {
            report.status = SolverStatus::StepClampedToZero;
            break;
        }
        let next = retract_structured(&xi, step, cfg.rank)?;
        let change = next.distance(&x)? / x.frob_norm().max(1e-30);

        report.iterations += 1;
        report.step_trace.push(step);
        report.rel_change_trace.push(change);
        if let (Some(trace), Some((t, norm))) = (report.truth_error_trace.as_mut(), truth) {
            trace.push(next.distance(t)? / norm);
        }
        x = next;
        if x.is_rank_deficient() {
            report.status = SolverStatus::RankDeficient;
            break;
        }
        if change <= cfg.rel_tol {
            report.status = SolverStatus::Converged;
            break;
        }
    }
    Ok((x, report))
}

/// Points from a recovered factor: `diag(√max(d_k, 0))·Uᵀ` over the first
/// `r` spectrum entries, centered. The flag reports a clamped negative
/// `d_k`.
pub fn run_to_points(result: &LowRankFactor, r: usize) -> Result<(PointConfig, bool)> {
    if r == 0 {
        return Err(EdgError::invalid("point dimension must be at least 1"));
    }
    let n = result.n();
    let keep = r.min(result.rank());
    let mut coords = DMatrix::zeros(r, n);
    let mut negative = false;
    for k in 0..keep {
        let d = result.spectrum()[k];
        if d < 0.0 {
            negative = true;
        }
        let s = d.max(0.0).sqrt();
        for i in 0..n {
            coords[(k, i)] = s * result.basis()[(i, k)];
        }
    }
    Ok((PointConfig::new(coords)?.centered(), negative))
}
