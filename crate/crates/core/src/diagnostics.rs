//! Measurable forms of the recovery conditions: coherence, flatness,
//! condition number and the empirical restricted-isometry deviation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dualbasis::{universe_size, SampleSet, SamplingOperator};
use crate::error::{EdgError, Result};
use crate::geometry::GramMatrix;
use crate::linalg::{center_columns, frob_inner, gaussian_matrix, symmetrize};
use crate::manifold::{condition_number, project_tangent_product, LowRankFactor, TangentVector};

/// Relative change of the power-iteration estimate that ends the iteration.
pub const RIP_STAGNATION_TOL: f64 = 1e-12;

const ZERO_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub nu_hat: f64,
    pub mu1_hat: f64,
    pub kappa: f64,
    /// Power-iteration lower bound on `‖(L/m)P_𝕋R_ΩP_𝕋 − P_𝕋‖`.
    pub rip_deviation: f64,
    pub rip_samples: usize,
    pub power_iters: usize,
}

impl DiagnosticsReport {
    /// Flat `key=value` record, one field per line. The two threshold flags
    /// compare the estimate, which is a lower bound, so they are labeled
    /// as estimated.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nu_hat={}", self.nu_hat);
        let _ = writeln!(s, "mu1_hat={}", self.mu1_hat);
        let _ = writeln!(s, "kappa={}", self.kappa);
        let _ = writeln!(s, "rip_deviation={}", self.rip_deviation);
        let _ = writeln!(s, "rip_samples={}", self.rip_samples);
        let _ = writeln!(s, "power_iters={}", self.power_iters);
        let _ = writeln!(s, "rip_below_quarter_estimated={}", self.rip_deviation < 0.25);
        let _ = writeln!(s, "rip_below_1_22_estimated={}", self.rip_deviation < 1.0 / 22.0);
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| EdgError::Parse {
                path: "<report>".into(),
                line: k + 1,
                msg: "expected key=value".into(),
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let real = |key: &str| -> Result<f64> {
            map.get(key)
                .ok_or_else(|| EdgError::invalid(format!("missing field {key}")))?
                .parse()
                .map_err(|_| EdgError::invalid(format!("field {key} is not a number")))
        };
        Ok(DiagnosticsReport {
            nu_hat: real("nu_hat")?,
            mu1_hat: real("mu1_hat")?,
            kappa: real("kappa")?,
            rip_deviation: real("rip_deviation")?,
            rip_samples: real("rip_samples")? as usize,
            power_iters: real("power_iters")? as usize,
        })
    }
}

/// All diagnostics of a ground-truth factor under a sample set.
pub fn diagnose(truth: &LowRankFactor, omega: &SampleSet, power_iters: usize, seed: u64) -> Result<DiagnosticsReport> {
    Ok(DiagnosticsReport {
        nu_hat: coherence_nu(truth),
        mu1_hat: mu1_factor(truth)?,
        kappa: condition_number(truth)?,
        rip_deviation: rip_deviation(truth, omega, power_iters, seed)?,
        rip_samples: omega.len(),
        power_iters,
    })
}

/// Smallest `ν ≥ 1` such that, for every pair `α = (i, j)`, `i < j`,
///
/// `‖P_U e_ij‖², ‖P_𝕋 e_ij‖² ≤ νr/128n`,
/// `‖P_U w_α‖², ‖P_𝕋 w_α‖² ≤ νr/8n`,
/// `‖P_U v_α‖², ‖P_𝕋 v_α‖² ≤ νr/2n`.
///
/// Every norm has a closed form in the rows `u_i` of `U`; the cost is
/// `O(n²r)`.
pub fn coherence_nu(f: &LowRankFactor) -> f64 {
    let n = f.n();
    let r = f.rank();
    let nf = n as f64;
    let u = f.basis();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| u.row(i).iter().copied().collect()).collect();
    let mean: Vec<f64> = (0..r).map(|c| u.column(c).sum() / nf).collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let sq: Vec<f64> = rows.iter().map(|row| dot(row, row)).collect();
    let csq: Vec<f64> = centered.iter().map(|row| dot(row, row)).collect();

    // a = e_i − 1/n, b = e_j − 1/n
    let aa = 1.0 - 1.0 / nf;
    let ab = -1.0 / nf;
    let e_scale = 128.0 * nf / r as f64;
    let w_scale = 8.0 * nf / r as f64;
    let v_scale = 2.0 * nf / r as f64;

    let worst = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut m = 0.0f64;
            for j in (i + 1)..n {
                let pu_e = sq[i];
                let pt_e = sq[i] + (1.0 - sq[i]) * sq[j];

                let q: f64 = rows[i].iter().zip(&rows[j]).map(|(x, y)| (x - y) * (x - y)).sum();
                let pu_w = 2.0 * q;
                let pt_w = 2.0 * q + (2.0 - q) * q;

                let (xx, yy) = (csq[i], csq[j]);
                let xy = dot(&centered[i], &centered[j]);
                let pu_v = 0.25 * (aa * (xx + yy) + 2.0 * ab * xy);
                let perp = 0.25 * ((aa - xx) * yy + (aa - yy) * xx + 2.0 * (ab - xy) * xy);
                let pt_v = pu_v + perp;

                m = m
                    .max(e_scale * pu_e.max(pt_e))
                    .max(w_scale * pu_w.max(pt_w))
                    .max(v_scale * pu_v.max(pt_v));
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    worst.max(1.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖X‖_∞·n / (√r·‖X‖)` with `‖X‖` the spectral norm `|d₁|` of `f`.
pub fn mu1(x: &GramMatrix, f: &LowRankFactor) -> Result<f64> {
    if x.n() != f.n() {
        return Err(EdgError::DimensionMismatch("Gram matrix and factor over different n".into()));
    }
    mu1_from_sup(x.entries().amax(), f)
}

/// [`mu1`] with `‖X‖_∞` read off the factor itself.
pub fn mu1_factor(f: &LowRankFactor) -> Result<f64> {
    let x = f.entries();
    let n = f.n();
    let sup = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| x.entry(i, j).abs()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    mu1_from_sup(sup, f)
}

fn mu1_from_sup(sup: f64, f: &LowRankFactor) -> Result<f64> {
    let spec = f.spectrum()[0].abs();
    if spec == 0.0 {
        return Err(EdgError::ZeroNorm);
    }
    Ok(sup * f.n() as f64 / ((f.rank() as f64).sqrt() * spec))
}

/// Tangent vector at `f` as a bare (core, wing) pair.
#[derive(Clone)]
struct Tan {
    core: DMatrix<f64>,
    wing: DMatrix<f64>,
}

impl Tan {
    fn inner(&self, o: &Tan) -> f64 {
        frob_inner(&self.core, &o.core) + 2.0 * frob_inner(&self.wing, &o.wing)
    }

    fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn scaled(&self, s: f64) -> Tan {
        Tan {
            core: &self.core * s,
            wing: &self.wing * s,
        }
    }
}

/// `(L/m)P_𝕋R_ΩP_𝕋 − P_𝕋` and its adjoint restricted to `𝕋 ∩ 𝕊`.
struct RipOperator<'a> {
    f: &'a LowRankFactor,
    op: SamplingOperator,
    scale: f64,
}

impl<'a> RipOperator<'a> {
    fn view(&self, t: &Tan) -> TangentVector<'a> {
        TangentVector::new(self.f, t.core.clone(), t.wing.clone()).expect("shapes fixed by anchor")
    }

    fn restrict(&self, gu: DMatrix<f64>) -> Tan {
        let xi = project_tangent_product(self.f, &gu).expect("shapes fixed by anchor");
        self.clean(Tan {
            core: xi.core().clone(),
            wing: xi.wing().clone(),
        })
    }

    /// Drops what no sample sees (antisymmetric core, wing along `1` or `U`);
    /// `A` maps those parts to their negatives.
    fn clean(&self, t: Tan) -> Tan {
        let u = self.f.basis();
        let wing = center_columns(&t.wing);
        let wing = &wing - u * (u.transpose() * &wing);
        Tan {
            core: symmetrize(&t.core),
            wing,
        }
    }

    fn apply(&self, t: &Tan, adjoint: bool) -> Tan {
        let y = self.view(t).entries();
        let gu = if adjoint {
            let rho = y.row_means();
            let grand = rho.iter().sum::<f64>() / rho.len() as f64;
            let coeffs: Vec<f64> = self
                .op
                .pairs()
                .iter()
                .map(|p| {
                    let (i, j) = (p.pair.i(), p.pair.j());
                    -(y.entry(i, j) - rho[i] - rho[j] + grand)
                })
                .collect();
            self.op.frame_apply(&coeffs, self.f.basis())
        } else {
            let coeffs: Vec<f64> = self
                .op
                .pairs()
                .iter()
                .map(|p| {
                    let (i, j) = (p.pair.i(), p.pair.j());
                    y.entry(i, i) + y.entry(j, j) - 2.0 * y.entry(i, j)
                })
                .collect();
            self.op.dual_apply(&coeffs, self.f.basis())
        };
        let mut out = self.restrict(gu * self.scale);
        out.core -= &t.core;
        out.wing -= &t.wing;
        self.clean(out)
    }
}

/// Estimates `‖(L/m)P_𝕋R_ΩP_𝕋 − P_𝕋‖` on `𝕋 ∩ 𝕊` by power iteration on
/// `A*A`, started from a seeded random tangent vector. The estimate
/// `‖Aξ‖` for unit `ξ` is a lower bound on the norm.
pub fn rip_deviation(f: &LowRankFactor, omega: &SampleSet, power_iters: usize, seed: u64) -> Result<f64> {
    if f.n() != omega.n() {
        return Err(EdgError::DimensionMismatch("factor and samples over different n".into()));
    }
    if power_iters == 0 {
        return Err(EdgError::invalid("power iteration needs at least one step"));
    }
    let n = f.n();
    let r = f.rank();
    let a = RipOperator {
        f,
        op: SamplingOperator::new(omega),
        scale: universe_size(n) as f64 / omega.len() as f64,
    };

    let mut start = gaussian_matrix(n + r, r, seed);
    let core = symmetrize(&start.rows(0, r).into_owned());
    let wing = start.rows_mut(r, n).into_owned();
    let mut x = a.restrict(f.basis() * core + wing);
    let norm = x.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    x = x.scaled(1.0 / norm);

    let mut estimate = 0.0;
    for _ in 0..power_iters {
        let ax = a.apply(&x, false);
        let next_estimate = ax.norm();
        if next_estimate <= ZERO_TOL * (1.0 + a.scale) {
            // A vanishes on x to working precision; renormalizing would amplify roundoff
            return Ok(next_estimate.max(estimate));
        }
        let ata = a.apply(&ax, true);
        let len = ata.norm();
        let stagnated = (next_estimate - estimate).abs() <= RIP_STAGNATION_TOL * next_estimate;
        estimate = next_estimate;
        if len == 0.0 || stagnated {
            break;
        }
        x = ata.scaled(1.0 / len);
    }
    Ok(estimate)
}
