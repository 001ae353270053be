//! Dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::rng::rng_from_seed;

/// Largest order for which the top eigenpairs of an operator are computed by
/// materializing it and running a dense symmetric eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 256;

const KRYLOV_TOL: f64 = 1e-11;
const KRYLOV_MAX_DIM: usize = 720;
const KRYLOV_OVERSAMPLE: usize = 8;

/// Frobenius inner product `tr(AᵀB)`.
pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Applies the centering projection `J = I − 11ᵀ/n` to every column of `v`.
pub fn center_columns(v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v.nrows() as f64;
    let mut out = v.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// `J·A·J` for a square `A`, in `O(n²)`.
pub fn double_center(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = a.row_iter().map(|r| r.sum() / nf).collect();
    let col_means: Vec<f64> = a.column_iter().map(|c| c.sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| a[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Flips each column so that its first nonzero coordinate is positive.
pub fn normalize_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let scale = col.amax();
        if scale == 0.0 {
            continue;
        }
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12 * scale) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Index order retaining the first positions of a stable sort on `|λ|`
/// descending, applied to eigenvalues pre-sorted by signed value descending.
pub fn abs_descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    idx
}

/// Full symmetric eigendecomposition with eigenvalues sorted descending by
/// signed value and eigenvectors sign-normalized.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = DVector::from_iterator(idx.len(), idx.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = eig.eigenvectors.select_columns(&idx);
    normalize_signs(&mut vecs);
    (vals, vecs)
}

/// The `k` eigenpairs of a symmetric matrix with largest `|λ|`.
pub fn sym_eigen_top_abs(m: &DMatrix<f64>, k: usize) -> (DVector<f64>, DMatrix<f64>) {
    let (vals, vecs) = sym_eigen_desc(m);
    select_abs_top(&vals, &vecs, k)
}

fn select_abs_top(vals: &DVector<f64>, vecs: &DMatrix<f64>, k: usize) -> (DVector<f64>, DMatrix<f64>) {
    let order = abs_descending_order(vals.as_slice());
    let keep: Vec<usize> = order.into_iter().take(k).collect();
    let out_vals = DVector::from_iterator(keep.len(), keep.iter().map(|&i| vals[i]));
    (out_vals, vecs.select_columns(&keep))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Thin QR factorization `A = Q·R` with `Q` of size `n×k` (`k = ncols(A) ≤ n`).
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Row-major evaluation of entries of `Y = B·S·Bᵀ` in `O(k)` per entry.
#[derive(Debug, Clone)]
pub struct SymLowRank {
    n: usize,
    k: usize,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl SymLowRank {
    pub fn new(basis: &DMatrix<f64>, middle: &DMatrix<f64>) -> Self {
        let n = basis.nrows();
        let k = basis.ncols();
        let bs = basis * middle;
        let mut left = Vec::with_capacity(n * k);
        let mut right = Vec::with_capacity(n * k);
        for i in 0..n {
            for c in 0..k {
                left.push(bs[(i, c)]);
                right.push(basis[(i, c)]);
            }
        }
        SymLowRank { n, k, left, right }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let a = &self.left[i * self.k..(i + 1) * self.k];
        let b = &self.right[j * self.k..(j + 1) * self.k];
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Mean of each row of `Y`.
    pub fn row_means(&self) -> Vec<f64> {
        let nf = self.n as f64;
        let mut col_sum = vec![0.0; self.k];
        for j in 0..self.n {
            for c in 0..self.k {
                col_sum[c] += self.right[j * self.k + c];
            }
        }
        (0..self.n)
            .map(|i| {
                let a = &self.left[i * self.k..(i + 1) * self.k];
                a.iter().zip(&col_sum).map(|(x, y)| x * y).sum::<f64>() / nf
            })
            .collect()
    }
}

/// The `r` eigenpairs of largest `|λ|` of the symmetric operator `apply`
/// (which maps an `n×b` block to `A·block`).
///
/// Small problems are solved densely. Larger ones use a block Krylov space
/// with full reorthogonalization and Rayleigh–Ritz extraction, grown until
/// every wanted Ritz pair has residual below `1e-11·|θ₁|`, the space becomes
/// invariant, or it reaches its size cap.
pub fn top_abs_eigenpairs<F>(n: usize, r: usize, apply: F, seed: u64) -> (DVector<f64>, DMatrix<f64>)
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let r = r.min(n);
    if n <= DENSE_EIGEN_LIMIT {
        let dense = apply(&DMatrix::identity(n, n));
        return sym_eigen_top_abs(&dense, r);
    }

    let block = (r + KRYLOV_OVERSAMPLE).min(n);
    let max_dim = KRYLOV_MAX_DIM.min(n);
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut aq: Vec<DVector<f64>> = Vec::new();
    let mut t = DMatrix::<f64>::zeros(0, 0);

    let mut candidates: Vec<DVector<f64>> = gaussian_matrix(n, block, seed)
        .column_iter()
        .map(|c| c.into_owned())
        .collect();
    let mut best = (DVector::zeros(r), DMatrix::zeros(n, r));

    loop {
        let fresh = extend_orthonormal(&mut q, candidates);
        if fresh.is_empty() {
            break;
        }
        let k0 = aq.len();
        let blk = DMatrix::from_columns(&fresh);
        let ablk = apply(&blk);
        aq.extend(ablk.column_iter().map(|c| c.into_owned()));

        let k = q.len();
        let mut grown = DMatrix::<f64>::zeros(k, k);
        grown.view_mut((0, 0), (k0, k0)).copy_from(&t);
        for j in k0..k {
            for i in 0..k {
                let v = q[i].dot(&aq[j]);
                grown[(i, j)] = v;
                grown[(j, i)] = v;
            }
        }
        t = grown;

        let (theta, s) = sym_eigen_top_abs(&t, r);
        let qm = DMatrix::from_columns(&q);
        let aqm = DMatrix::from_columns(&aq);
        let y = &qm * &s;
        let ay = &aqm * &s;
        let scale = theta.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let converged = (0..theta.len()).all(|c| {
            let res = (ay.column(c) - y.column(c) * theta[c]).norm();
            res <= KRYLOV_TOL * scale
        });
        let mut y = y;
        normalize_signs(&mut y);
        best = (theta, y);
        if converged || k >= max_dim {
            break;
        }
        candidates = ablk.column_iter().map(|c| c.into_owned()).collect();
    }
    best
}

/// Orthonormalizes `candidates` against `basis` and each other (two passes of
/// Gram–Schmidt), appending survivors to `basis` and returning them.
fn extend_orthonormal(basis: &mut Vec<DVector<f64>>, candidates: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let n = candidates.first().map_or(0, |c| c.len());
    let mut fresh = Vec::new();
    for mut c in candidates {
        if basis.len() >= n {
            break;
        }
        let before = c.norm();
        if before == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = b.dot(&c);
                c.axpy(-proj, b, 1.0);
            }
        }
        let after = c.norm();
        if after <= 1e-10 * before {
            continue;
        }
        c /= after;
        basis.push(c.clone());
        fresh.push(c);
    }
    fresh
}
