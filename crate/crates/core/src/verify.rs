//! Self-check suite behind `edg verify`: the dual-basis identities and the
//! operator properties, each evaluated against a dense construction.

use nalgebra::DMatrix;

use crate::dualbasis::{
    f_omega, h_entry, h_inverse_entry, r_omega, r_omega_star, sum_v_squared, universe, v_basis, w_basis,
    IndexPair, SampleSet,
};
use crate::geometry::{gram_from_points, PointConfig};
use crate::linalg::{frob_inner, gaussian_matrix, sym_eigen_desc, symmetrize};
use crate::manifold::{hard_threshold, project_tangent, retract_structured};
use crate::sampling::{sample_bernoulli, sample_uniform_replacement};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest observed deviation (or the offending value).
    pub worst: f64,
    pub tol: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} (worst {:.3e}, tol {:.0e})", self.name, self.worst, self.tol)
    }
}

fn check(name: impl Into<String>, worst: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        passed: worst <= tol,
        worst,
        tol,
    }
}

fn pairs(n: usize) -> Vec<IndexPair> {
    universe(n).collect()
}

fn h_dense(n: usize) -> DMatrix<f64> {
    let ps = pairs(n);
    DMatrix::from_fn(ps.len(), ps.len(), |a, b| h_entry(ps[a], ps[b]))
}

fn random_gram(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
    let p = PointConfig::new(gaussian_matrix(r, n, seed)).expect("finite").centered();
    gram_from_points(&p).into_entries()
}

/// Runs every check for ambient sizes up to `max_n` (at least 4).
pub fn run_suite(max_n: usize) -> Vec<Check> {
    let max_n = max_n.max(4);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for n in 3..=max_n {
        let ps = pairs(n);
        let ws: Vec<_> = ps.iter().map(|&a| w_basis(a, n)).collect();
        let vs: Vec<_> = ps.iter().map(|&a| v_basis(a, n)).collect();
        for (a, w) in ws.iter().enumerate() {
            for (b, v) in vs.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((frob_inner(w, v) - target).abs());
            }
        }
    }
    out.push(check(format!("bi-orthogonality <w_a, v_b> = delta, n = 3..{max_n}"), worst, 1e-12));

    let mut worst = 0.0f64;
    for n in 3..=max_n.min(8) {
        let ps = pairs(n);
        let inv = h_dense(n).try_inverse().expect("H is invertible");
        for a in 0..ps.len() {
            for b in 0..ps.len() {
                worst = worst.max((inv[(a, b)] - h_inverse_entry(ps[a], ps[b], n)).abs());
            }
        }
    }
    out.push(check("closed-form inverse of H matches dense inversion", worst, 1e-10));

    let mut worst_h = 0.0f64;
    let mut worst_inv = 0.0f64;
    for n in 3..=max_n {
        let (vals, _) = sym_eigen_desc(&h_dense(n));
        let lmax = vals[0];
        let lmin = vals[vals.len() - 1];
        worst_h = worst_h.max((lmax - 2.0 * n as f64).abs());
        // λmax(H⁻¹) = 1/λmin(H): 1/2 from n = 4 on, 1/3 at n = 3
        let expected = if n == 3 { 1.0 / 3.0 } else { 0.5 };
        worst_inv = worst_inv.max((1.0 / lmin - expected).abs());
    }
    out.push(check("lambda_max(H) = 2n", worst_h, 1e-9));
    out.push(check("lambda_max(H^-1) = 1/2 (n >= 4; 1/3 at n = 3)", worst_inv, 1e-9));

    let mut worst = 0.0f64;
    for n in 2..=15 {
        let mut acc = DMatrix::zeros(n, n);
        for a in universe(n) {
            let v = v_basis(a, n);
            acc += &v * &v;
        }
        worst = worst.max((acc - sum_v_squared(n)).amax());
    }
    out.push(check("sum of v_a^2 closed form, n = 2..15", worst, 1e-12));

    let mut worst_norm = 0.0f64;
    for n in 3..=max_n {
        for a in universe(n) {
            let (wv, _) = sym_eigen_desc(&w_basis(a, n));
            let (vv, _) = sym_eigen_desc(&v_basis(a, n));
            let wn = wv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let vn = vv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            worst_norm = worst_norm.max((wn - 2.0).abs()).max((vn - 0.5).abs());
        }
    }
    out.push(check("spectral norms ||w_a|| = 2, ||v_a|| = 1/2", worst_norm, 1e-12));

    let mut worst = 0.0f64;
    for n in [5, 12, 30] {
        let x = random_gram(n, 3, n as u64);
        let full = SampleSet::full(n).expect("n ≥ 2");
        worst = worst.max((r_omega(&x, &full).expect("sizes match") - &x).amax() / (1.0 + x.amax()));
    }
    out.push(check("expansion X = sum <X, w_a> v_a", worst, 1e-10));

    let n = 50;
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let x = random_gram(n, 3, 100 + seed);
        let omega = sample_uniform_replacement(n, 200, 200 + seed).expect("m ≥ 1");
        let fast = r_omega(&x, &omega).expect("sizes match");
        let mut slow = DMatrix::zeros(n, n);
        for &a in omega.pairs() {
            slow += v_basis(a, n) * frob_inner(&x, &w_basis(a, n));
        }
        worst = worst.max((fast - slow).amax());
    }
    out.push(check("R_Omega centering path equals explicit sum", worst, 1e-10));

    let n = 30;
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let a = random_gram(n, 4, 300 + seed);
        let b = random_gram(n, 4, 400 + seed);
        let omega = sample_uniform_replacement(n, 100, 500 + seed).expect("m ≥ 1");
        let lhs = frob_inner(&r_omega(&a, &omega).expect("sizes match"), &b);
        let rhs = frob_inner(&a, &r_omega_star(&b, &omega).expect("sizes match"));
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    out.push(check("adjoint <R(A), B> = <A, R*(B)>", worst, 1e-10));

    let n = 20;
    let omega = sample_uniform_replacement(n, 80, 9).expect("m ≥ 1");
    let mut worst_sa = 0.0f64;
    let mut most_negative = 0.0f64;
    for seed in 0..20 {
        let a = symmetrize(&gaussian_matrix(n, n, 600 + seed));
        let b = symmetrize(&gaussian_matrix(n, n, 700 + seed));
        let fa = f_omega(&a, &omega).expect("sizes match");
        let fb = f_omega(&b, &omega).expect("sizes match");
        worst_sa = worst_sa.max((frob_inner(&fa, &b) - frob_inner(&a, &fb)).abs());
        most_negative = most_negative.max(-frob_inner(&a, &fa));
    }
    out.push(check("F_Omega self-adjoint", worst_sa, 1e-10));
    out.push(check("F_Omega positive semi-definite", most_negative, 0.0));

    let n = 15;
    let omega = sample_bernoulli(n, 0.4, 11).expect("nonempty");
    let x = random_gram(n, 3, 12);
    let once = r_omega(&x, &omega).expect("sizes match");
    let twice = r_omega(&once, &omega).expect("sizes match");
    out.push(check("R_Omega idempotent without repeats", (twice - once).amax(), 1e-10));

    let n = 40;
    let x = random_gram(n, 3, 13);
    let f = hard_threshold(&x, 3).expect("rank fits");
    let y = symmetrize(&gaussian_matrix(n, n, 14));
    let p1 = project_tangent(&f, &y).expect("sizes match");
    let p2 = project_tangent(&f, &p1.densify()).expect("sizes match");
    out.push(check("tangent projection idempotent", (p1.densify() - p2.densify()).amax(), 1e-10));

    let g = project_tangent(&f, &y).expect("sizes match");
    let fast = retract_structured(&g, 0.7, 3).expect("rank fits").densify();
    let dense = hard_threshold(&(f.densify() + g.densify() * 0.7), 3).expect("rank fits").densify();
    out.push(check("structured retraction equals dense thresholding", (fast - dense).amax(), 1e-9));

    out
}
