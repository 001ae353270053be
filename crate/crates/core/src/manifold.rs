//! Fixed-rank symmetric matrices in factored form.
//!
//! A rank-`r` point is stored as `U·diag(d)·Uᵀ` with orthonormal `U` (`n×r`)
//! and `d` ordered by decreasing `|d_k|`. Tangent vectors at that point are
//! `U·C·Uᵀ + W·Uᵀ + U·Wᵀ` with a symmetric `r×r` core `C` and an `n×r` wing
//! `W` orthogonal to `U`. Nothing here forms an `n×n` matrix except the
//! explicit dense entry points ([`project_tangent`], [`hard_threshold`] and
//! the `densify` methods).

use nalgebra::{DMatrix, DVector};

use crate::error::{EdgError, Result};
use crate::linalg::{gaussian_matrix, normalize_signs, sym_eigen_top_abs, symmetrize, thin_qr, SymLowRank};

/// `|d_r| ≤ RANK_TOL·|d_1|` marks a factor as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    basis: DMatrix<f64>,
    spectrum: DVector<f64>,
}

impl LowRankFactor {
    /// Validates orthonormality of `basis` (to `1e-10`) and sorts the pairs by
    /// decreasing `|d|`.
    pub fn new(basis: DMatrix<f64>, spectrum: DVector<f64>) -> Result<Self> {
        if basis.ncols() != spectrum.len() || basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(EdgError::DimensionMismatch(format!(
                "basis {}×{} does not match spectrum of length {}",
                basis.nrows(),
                basis.ncols(),
                spectrum.len()
            )));
        }
        let r = basis.ncols();
        let gram = basis.transpose() * &basis - DMatrix::<f64>::identity(r, r);
        if gram.norm() > 1e-10 {
            return Err(EdgError::invalid("factor basis is not orthonormal"));
        }
        Ok(Self::sorted(basis, spectrum))
    }

    fn sorted(basis: DMatrix<f64>, spectrum: DVector<f64>) -> Self {
        let order = crate::linalg::abs_descending_order(spectrum.as_slice());
        let spectrum = DVector::from_iterator(order.len(), order.iter().map(|&k| spectrum[k]));
        let basis = basis.select_columns(&order);
        LowRankFactor { basis, spectrum }
    }

    /// Factors `B·S·Bᵀ` (for any `n×k` `B` and symmetric `k×k` `S`) and keeps
    /// the `r` pairs of largest `|λ|`, in `O(nk² + k³)`.
    pub fn from_symmetric_product(b: &DMatrix<f64>, s: &DMatrix<f64>, r: usize) -> Result<Self> {
        if b.ncols() != s.nrows() || !s.is_square() {
            return Err(EdgError::DimensionMismatch("B·S·Bᵀ factors do not conform".into()));
        }
        if r == 0 || r > b.nrows() {
            return Err(EdgError::invalid(format!("rank {r} out of range for n = {}", b.nrows())));
        }
        let (q, rm) = thin_qr(b);
        let core = symmetrize(&(&rm * s * rm.transpose()));
        let (vals, vecs) = sym_eigen_top_abs(&core, r);
        let mut basis = q * vecs;
        let mut spectrum = vals;
        if basis.ncols() < r {
            // fewer directions than requested: pad with zero-weight orthonormal columns
            let mut seed = gaussian_matrix(b.nrows(), r, 0x5eed);
            seed.columns_mut(0, basis.ncols()).copy_from(&basis);
            let (full_q, _) = thin_qr(&seed);
            let mut padded = full_q;
            padded.columns_mut(0, basis.ncols()).copy_from(&basis);
            basis = padded;
            spectrum = DVector::from_fn(r, |k, _| if k < spectrum.len() { spectrum[k] } else { 0.0 });
        }
        normalize_signs(&mut basis);
        Ok(Self::sorted(basis, spectrum))
    }

    /// Factor of the Gram matrix of a centered configuration.
    pub fn from_points(p: &crate::geometry::PointConfig) -> Result<Self> {
        let c = p.centered();
        let r = c.dim().min(c.count());
        let k = c.dim();
        Self::from_symmetric_product(&c.coords().transpose(), &DMatrix::identity(k, k), r)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn spectrum(&self) -> &DVector<f64> {
        &self.spectrum
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_rank_deficient(&self) -> bool {
        let first = self.spectrum[0].abs();
        let last = self.spectrum[self.rank() - 1].abs();
        first == 0.0 || last <= RANK_TOL * first
    }

    /// `‖U·diag(d)·Uᵀ‖_F = ‖d‖₂`.
    pub fn frob_norm(&self) -> f64 {
        self.spectrum.norm()
    }

    pub fn densify(&self) -> DMatrix<f64> {
        let scaled = &self.basis * DMatrix::from_diagonal(&self.spectrum);
        scaled * self.basis.transpose()
    }

    /// Entry evaluator for `X = U·diag(d)·Uᵀ`.
    pub fn entries(&self) -> SymLowRank {
        SymLowRank::new(&self.basis, &DMatrix::from_diagonal(&self.spectrum))
    }

    /// `‖self − other‖_F`, computed in a shared orthonormal basis so the
    /// difference of nearly equal points keeps full relative accuracy.
    pub fn distance(&self, other: &LowRankFactor) -> Result<f64> {
        if self.n() != other.n() {
            return Err(EdgError::DimensionMismatch("factors over different n".into()));
        }
        let ra = self.rank();
        let rb = other.rank();
        let mut stacked = DMatrix::zeros(self.n(), ra + rb);
        stacked.columns_mut(0, ra).copy_from(&self.basis);
        stacked.columns_mut(ra, rb).copy_from(&other.basis);
        let k = (ra + rb).min(self.n());
        let (_, rm) = thin_qr(&stacked);
        let rm = rm.rows(0, k).into_owned();
        let ca = rm.columns(0, ra);
        let cb = rm.columns(ra, rb);
        let diff = &ca * DMatrix::from_diagonal(&self.spectrum) * ca.transpose()
            - &cb * DMatrix::from_diagonal(&other.spectrum) * cb.transpose();
        Ok(diff.norm())
    }

    /// `‖self − other‖_F / ‖other‖_F`.
    pub fn relative_error(&self, truth: &LowRankFactor) -> Result<f64> {
        let denom = truth.frob_norm();
        if denom == 0.0 {
            return Err(EdgError::ZeroNorm);
        }
        Ok(self.distance(truth)? / denom)
    }

    pub(crate) fn from_parts_unchecked(basis: DMatrix<f64>, spectrum: DVector<f64>) -> Self {
        Self::sorted(basis, spectrum)
    }
}

/// Element of the tangent space at `anchor`, in factored form.
#[derive(Debug, Clone)]
pub struct TangentVector<'a> {
    anchor: &'a LowRankFactor,
    core: DMatrix<f64>,
    wing: DMatrix<f64>,
}

impl<'a> TangentVector<'a> {
    /// Assembles a tangent vector; the wing is re-projected onto the
    /// orthogonal complement of the anchor basis.
    pub fn new(anchor: &'a LowRankFactor, core: DMatrix<f64>, wing: DMatrix<f64>) -> Result<Self> {
        let r = anchor.rank();
        if core.shape() != (r, r) || wing.shape() != (anchor.n(), r) {
            return Err(EdgError::DimensionMismatch("tangent core/wing shapes do not match anchor".into()));
        }
        let u = anchor.basis();
        let wing = &wing - u * (u.transpose() * &wing);
        Ok(TangentVector {
            anchor,
            core: symmetrize(&core),
            wing,
        })
    }

    pub fn anchor(&self) -> &'a LowRankFactor {
        self.anchor
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    pub fn wing(&self) -> &DMatrix<f64> {
        &self.wing
    }

    /// `‖U·C·Uᵀ + W·Uᵀ + U·Wᵀ‖_F = √(‖C‖² + 2‖W‖²)`.
    pub fn norm(&self) -> f64 {
        (self.core.norm_squared() + 2.0 * self.wing.norm_squared()).sqrt()
    }

    pub fn scale(&self, s: f64) -> TangentVector<'a> {
        TangentVector {
            anchor: self.anchor,
            core: &self.core * s,
            wing: &self.wing * s,
        }
    }

    /// Entry evaluator `Y = [U W]·[[C, I], [I, 0]]·[U W]ᵀ`.
    pub fn entries(&self) -> SymLowRank {
        let (b, s) = self.stacked();
        SymLowRank::new(&b, &s)
    }

    fn stacked(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.anchor.n();
        let r = self.anchor.rank();
        let mut b = DMatrix::zeros(n, 2 * r);
        b.columns_mut(0, r).copy_from(self.anchor.basis());
        b.columns_mut(r, r).copy_from(&self.wing);
        let mut s = DMatrix::zeros(2 * r, 2 * r);
        s.view_mut((0, 0), (r, r)).copy_from(&self.core);
        s.view_mut((0, r), (r, r)).fill_with_identity();
        s.view_mut((r, 0), (r, r)).fill_with_identity();
        (b, s)
    }

    pub fn densify(&self) -> DMatrix<f64> {
        let (b, s) = self.stacked();
        &b * s * b.transpose()
    }
}

/// Tangent projection given the product `G·U` of a symmetric `G` with the
/// anchor basis: core `UᵀGU`, wing `(I − UUᵀ)GU`.
pub fn project_tangent_product<'a>(f: &'a LowRankFactor, gu: &DMatrix<f64>) -> Result<TangentVector<'a>> {
    let core = f.basis().transpose() * gu;
    let wing = gu - f.basis() * &core;
    TangentVector::new(f, core, wing)
}

/// `P_𝕋 Y = P_U Y + Y P_U − P_U Y P_U` in factored form.
pub fn project_tangent<'a>(f: &'a LowRankFactor, y: &DMatrix<f64>) -> Result<TangentVector<'a>> {
    if y.shape() != (f.n(), f.n()) {
        return Err(EdgError::DimensionMismatch("matrix does not match factor size".into()));
    }
    let gu = symmetrize(y) * f.basis();
    project_tangent_product(f, &gu)
}

/// Best rank-`r` approximation of a symmetric matrix: keeps the `r`
/// eigenpairs of largest `|λ|`, breaking ties by signed order.
pub fn hard_threshold(y: &DMatrix<f64>, r: usize) -> Result<LowRankFactor> {
    if !y.is_square() {
        return Err(EdgError::DimensionMismatch("hard threshold needs a square matrix".into()));
    }
    if r == 0 || r > y.nrows() {
        return Err(EdgError::invalid(format!("rank {r} out of range for n = {}", y.nrows())));
    }
    let (vals, vecs) = sym_eigen_top_abs(y, r);
    Ok(LowRankFactor::from_parts_unchecked(vecs, vals))
}

/// `H_r(X + step·ξ)` for a point `X` and tangent vector `ξ` anchored at it.
///
/// The wing is orthonormalized by thin QR (`W = Q·R`), and
/// `X + step·ξ = [U Q]·K·[U Q]ᵀ` with the `2r×2r` core
/// `K = [[diag(d) + step·C, step·Rᵀ], [step·R, 0]]`, so only `K` is
/// eigendecomposed. Memory is `O(nr)`.
pub fn retract_structured(g: &TangentVector<'_>, step: f64, r: usize) -> Result<LowRankFactor> {
    let f = g.anchor();
    let rf = f.rank();
    if r == 0 || r > 2 * rf || r > f.n() {
        return Err(EdgError::invalid(format!("retraction rank {r} out of range")));
    }
    let n = f.n();
    if 2 * rf > n {
        // the stacked basis would not fit; fall back to the n×n path
        let w = f.densify() + g.densify() * step;
        return hard_threshold(&w, r);
    }
    let (q, rm) = thin_qr(g.wing());
    let mut k = DMatrix::zeros(2 * rf, 2 * rf);
    let mut top = DMatrix::from_diagonal(f.spectrum());
    top += g.core() * step;
    k.view_mut((0, 0), (rf, rf)).copy_from(&top);
    k.view_mut((rf, 0), (rf, rf)).copy_from(&(&rm * step));
    k.view_mut((0, rf), (rf, rf)).copy_from(&(rm.transpose() * step));
    let (vals, vecs) = sym_eigen_top_abs(&k, r);

    let mut stacked = DMatrix::zeros(n, 2 * rf);
    stacked.columns_mut(0, rf).copy_from(f.basis());
    stacked.columns_mut(rf, rf).copy_from(&q);
    let mut basis = stacked * vecs;
    normalize_signs(&mut basis);
    Ok(LowRankFactor::from_parts_unchecked(basis, vals))
}

/// `κ = |d₁| / |d_r|`.
pub fn condition_number(f: &LowRankFactor) -> Result<f64> {
    if f.is_rank_deficient() {
        return Err(EdgError::RankDeficient);
    }
    Ok(f.spectrum()[0].abs() / f.spectrum()[f.rank() - 1].abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob_inner, sym_eigen_desc};

    fn random_sym(n: usize, seed: u64) -> DMatrix<f64> {
        symmetrize(&gaussian_matrix(n, n, seed))
    }

    fn random_factor(n: usize, r: usize, seed: u64) -> LowRankFactor {
        let u = thin_qr(&gaussian_matrix(n, r, seed)).0;
        let d = DVector::from_fn(r, |k, _| 5.0 - k as f64 * (if k % 2 == 0 { 1.0 } else { -1.5 }));
        LowRankFactor::new(u, d).unwrap()
    }

    fn dense_projection(f: &LowRankFactor, y: &DMatrix<f64>) -> DMatrix<f64> {
        let pu = f.basis() * f.basis().transpose();
        &pu * y + y * &pu - &pu * y * &pu
    }

    #[test]
    fn factor_validation_and_sorting() {
        let u = thin_qr(&gaussian_matrix(6, 3, 1)).0;
        let f = LowRankFactor::new(u.clone(), DVector::from_vec(vec![1.0, -4.0, 2.0])).unwrap();
        assert_eq!(f.spectrum().as_slice(), &[-4.0, 2.0, 1.0]);
        assert!((f.densify() - {
            let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -4.0, 2.0]));
            &u * d * u.transpose()
        })
        .amax()
            < 1e-12);
        assert!(LowRankFactor::new(gaussian_matrix(6, 2, 2), DVector::from_vec(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn projection_fixes_tangent_elements() {
        let f = random_factor(20, 3, 3);
        let z = gaussian_matrix(20, 3, 4);
        let y = f.basis() * z.transpose() + &z * f.basis().transpose();
        let t = project_tangent(&f, &y).unwrap();
        assert!((t.densify() - &y).amax() < 1e-10);
    }

    #[test]
    fn projection_kills_orthogonal_complement() {
        let f = random_factor(20, 3, 5);
        let u = f.basis();
        let pperp = DMatrix::<f64>::identity(20, 20) - u * u.transpose();
        let y = &pperp * random_sym(20, 6) * &pperp;
        let t = project_tangent(&f, &y).unwrap();
        assert!(t.densify().amax() < 1e-10);
    }

    #[test]
    fn projection_matches_three_term_formula() {
        let f = random_factor(40, 3, 7);
        let y = random_sym(40, 8);
        let t = project_tangent(&f, &y).unwrap();
        assert!((t.densify() - dense_projection(&f, &y)).amax() < 1e-10);
        assert!((f.basis().transpose() * t.wing()).amax() < 1e-10);
        assert!((t.norm() - t.densify().norm()).abs() < 1e-10);
    }

    #[test]
    fn projection_is_idempotent_and_self_adjoint() {
        let f = random_factor(25, 4, 9);
        let a = random_sym(25, 10);
        let b = random_sym(25, 11);
        let pa = project_tangent(&f, &a).unwrap().densify();
        let ppa = project_tangent(&f, &pa).unwrap().densify();
        assert!((&ppa - &pa).amax() < 1e-10);
        let pb = project_tangent(&f, &b).unwrap().densify();
        assert!((frob_inner(&pa, &b) - frob_inner(&a, &pb)).abs() < 1e-10);
    }

    #[test]
    fn hard_threshold_orders_by_magnitude() {
        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -2.0, 1.0]));
        let f = hard_threshold(&y, 1).unwrap();
        assert_eq!(f.spectrum().as_slice(), &[3.0]);
        assert_eq!(f.basis().column(0).as_slice(), &[1.0, 0.0, 0.0]);

        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 0.0]));
        let f = hard_threshold(&y, 2).unwrap();
        assert_eq!(f.spectrum().as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn hard_threshold_residual_is_tail_energy() {
        let y = random_sym(30, 12);
        let f = hard_threshold(&y, 4).unwrap();
        let (vals, _) = sym_eigen_desc(&y);
        let mut mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = mags[4..].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(((&y - f.densify()).norm() - tail).abs() < 1e-10);
    }

    #[test]
    fn retraction_matches_dense_path() {
        let f = random_factor(60, 3, 13);
        let g = random_sym(60, 14);
        let t = project_tangent(&f, &g).unwrap();
        let fast = retract_structured(&t, 0.7, 3).unwrap();
        let dense = hard_threshold(&(f.densify() + t.densify() * 0.7), 3).unwrap();
        assert!((fast.densify() - dense.densify()).amax() < 1e-9);
        let ortho = fast.basis().transpose() * fast.basis() - DMatrix::<f64>::identity(3, 3);
        assert!(ortho.norm() < 1e-10);
    }

    #[test]
    fn retraction_with_zero_step_or_zero_tangent() {
        let f = random_factor(30, 3, 15);
        let g = random_sym(30, 16);
        let t = project_tangent(&f, &g).unwrap();
        let same = retract_structured(&t, 0.0, 3).unwrap();
        assert!((same.densify() - f.densify()).amax() < 1e-12);
        let zero = TangentVector::new(&f, DMatrix::zeros(3, 3), DMatrix::zeros(30, 3)).unwrap();
        let same = retract_structured(&zero, 1.0, 3).unwrap();
        assert!((same.densify() - f.densify()).amax() < 1e-12);
        assert!((same.spectrum() - f.spectrum()).amax() < 1e-12);
    }

    #[test]
    fn distance_in_shared_basis() {
        let a = random_factor(30, 3, 17);
        let b = random_factor(30, 3, 18);
        assert!((a.distance(&b).unwrap() - (a.densify() - b.densify()).norm()).abs() < 1e-10);
        assert!(a.distance(&a).unwrap() < 1e-12);
    }

    #[test]
    fn condition_number_cases() {
        let u = thin_qr(&gaussian_matrix(5, 3, 19)).0;
        let f = LowRankFactor::new(u.clone(), DVector::from_element(3, 5.0)).unwrap();
        assert_eq!(condition_number(&f).unwrap(), 1.0);
        let f = LowRankFactor::new(u.columns(0, 2).into_owned(), DVector::from_vec(vec![10.0, 2.0])).unwrap();
        assert_eq!(condition_number(&f).unwrap(), 5.0);
        let f = LowRankFactor::new(u, DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert!(matches!(condition_number(&f), Err(EdgError::RankDeficient)));
    }

    #[test]
    fn condition_number_matches_full_spectrum() {
        let p = gaussian_matrix(3, 15, 20);
        let x = p.transpose() * &p;
        let f = hard_threshold(&x, 3).unwrap();
        let sv = x.clone().svd(false, false).singular_values;
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!((condition_number(&f).unwrap() - sv[0] / sv[2]).abs() < 1e-8);
    }

    #[test]
    fn symmetric_product_factorization() {
        let b = gaussian_matrix(12, 4, 21);
        let s = random_sym(4, 22);
        let f = LowRankFactor::from_symmetric_product(&b, &s, 4).unwrap();
        assert!((f.densify() - &b * &s * b.transpose()).amax() < 1e-10);
    }
}
