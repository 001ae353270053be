//! Point configurations and the coupled Gram / squared-distance views.

use nalgebra::{DMatrix, DVector};

use crate::error::{EdgError, Result};
use crate::linalg::{double_center, sym_eigen_desc};

/// Relative eigenvalue level below which a Gram spectrum counts as indefinite.
pub const NON_EUCLIDEAN_TOL: f64 = 1e-8;

/// `n` points in `r` dimensions stored as the columns of an `r×n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    coords: DMatrix<f64>,
}

impl PointConfig {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() == 0 || coords.ncols() == 0 {
            return Err(EdgError::invalid("point configuration needs r ≥ 1 and n ≥ 1"));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(EdgError::invalid("point coordinates must be finite"));
        }
        Ok(PointConfig { coords })
    }

    /// Builds a configuration from a list of points of equal dimension.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let r = points.first().map_or(0, |p| p.len());
        if points.iter().any(|p| p.len() != r) {
            return Err(EdgError::DimensionMismatch("points have different dimensions".into()));
        }
        Self::new(DMatrix::from_fn(r, n, |k, i| points[i][k]))
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DMatrix<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    pub fn count(&self) -> usize {
        self.coords.ncols()
    }

    /// Mean point (the column mean).
    pub fn centroid(&self) -> DVector<f64> {
        self.coords.column_mean()
    }

    pub fn is_centered(&self) -> bool {
        let sum = self.coords.column_sum().norm();
        sum <= 1e-10 * self.coords.norm().max(1.0)
    }

    /// Translates the configuration so that its centroid is the origin.
    pub fn centered(&self) -> PointConfig {
        let mean = self.centroid();
        let mut coords = self.coords.clone();
        for mut col in coords.column_iter_mut() {
            col -= &mean;
        }
        PointConfig { coords }
    }

    /// Pads (with zero rows) or truncates the coordinate dimension to `r`.
    pub fn with_dim(&self, r: usize) -> PointConfig {
        let n = self.count();
        let coords = DMatrix::from_fn(r, n, |k, i| if k < self.dim() { self.coords[(k, i)] } else { 0.0 });
        PointConfig { coords }
    }
}

/// Symmetric `n×n` Gram matrix `X = PᵀP`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps a square matrix, rejecting inputs that are not symmetric to
    /// `1e-10·(1 + ‖X‖_F)`.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(EdgError::DimensionMismatch("Gram matrix must be square and nonempty".into()));
        }
        let tol = 1e-10 * (1.0 + entries.norm());
        if (&entries - entries.transpose()).amax() > tol {
            return Err(EdgError::invalid("Gram matrix must be symmetric"));
        }
        Ok(GramMatrix { entries })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Membership in `𝕊`: zero row sums to `1e-8·(1 + ‖X‖_F)`.
    pub fn has_zero_row_sums(&self) -> bool {
        self.entries.column_sum().norm() <= 1e-8 * (1.0 + self.entries.norm())
    }
}

/// Hollow symmetric matrix of nonnegative squared distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SqDistMatrix {
    entries: DMatrix<f64>,
}

impl SqDistMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(EdgError::DimensionMismatch("distance matrix must be square and nonempty".into()));
        }
        let n = entries.nrows();
        let tol = 1e-10 * (1.0 + entries.norm());
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(EdgError::invalid(format!("distance matrix diagonal entry {i} is nonzero")));
            }
            for j in 0..n {
                let v = entries[(i, j)];
                if !(v >= 0.0) {
                    return Err(EdgError::invalid(format!("negative squared distance at ({i}, {j})")));
                }
                if (v - entries[(j, i)]).abs() > tol {
                    return Err(EdgError::invalid("distance matrix must be symmetric"));
                }
            }
        }
        Ok(SqDistMatrix { entries })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

/// `X = PᵀP` of the centered configuration.
pub fn gram_from_points(p: &PointConfig) -> GramMatrix {
    let c = if p.is_centered() { p.clone() } else { p.centered() };
    let x = c.coords.transpose() * &c.coords;
    GramMatrix { entries: x }
}

/// `D = diag(X)1ᵀ + 1diag(X)ᵀ − 2X`.
pub fn dist_from_gram(x: &GramMatrix) -> SqDistMatrix {
    let e = &x.entries;
    let n = e.nrows();
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            e[(i, i)] + e[(j, j)] - 2.0 * e[(i, j)]
        }
    });
    SqDistMatrix { entries: d }
}

/// `X = −½·J·D·J`.
pub fn gram_from_dist(d: &SqDistMatrix) -> GramMatrix {
    let mut x = double_center(&d.entries) * -0.5;
    x = (&x + x.transpose()) * 0.5;
    GramMatrix { entries: x }
}

/// Output of [`classical_mds`].
#[derive(Debug, Clone)]
pub struct MdsEmbedding {
    pub points: PointConfig,
    /// Top eigenvalues of the Gram matrix before clamping.
    pub eigenvalues: Vec<f64>,
    /// The Gram spectrum has an eigenvalue below `−1e-8·λmax`.
    pub non_euclidean: bool,
    /// At least one of the retained eigenvalues was negative and clamped to 0.
    pub clamped: bool,
}

/// Classical (Torgerson) multidimensional scaling into `r` dimensions.
pub fn classical_mds(d: &SqDistMatrix, r: usize) -> Result<MdsEmbedding> {
    let n = d.n();
    if r == 0 || r > n {
        return Err(EdgError::invalid(format!("embedding dimension {r} must lie in 1..={n}")));
    }
    let x = gram_from_dist(d);
    let (vals, vecs) = sym_eigen_desc(&x.entries);
    let lmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = NON_EUCLIDEAN_TOL * lmax;
    let non_euclidean = vals.iter().any(|&v| v < -tol);
    let top: Vec<f64> = vals.iter().take(r).copied().collect();
    let clamped = top.iter().any(|&v| v < -tol);

    let mut coords = DMatrix::zeros(r, n);
    for k in 0..r {
        let s = top[k].max(0.0).sqrt();
        for i in 0..n {
            coords[(k, i)] = s * vecs[(i, k)];
        }
    }
    let points = PointConfig { coords }.centered();
    Ok(MdsEmbedding {
        points,
        eigenvalues: top,
        non_euclidean,
        clamped,
    })
}

/// Orthogonally registers `a` onto `b` (reflections allowed).
///
/// Both inputs are centered first. Returns `Q·a` for the optimal orthogonal
/// `Q` together with `√(‖Q·a − b‖²_F / n)`.
pub fn procrustes_align(a: &PointConfig, b: &PointConfig) -> Result<(PointConfig, f64)> {
    if a.dim() != b.dim() || a.count() != b.count() {
        return Err(EdgError::DimensionMismatch(format!(
            "cannot align {}×{} onto {}×{}",
            a.dim(),
            a.count(),
            b.dim(),
            b.count()
        )));
    }
    let a = a.centered();
    let b = b.centered();
    let cross = &b.coords * a.coords.transpose();
    let svd = cross.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(EdgError::invalid("SVD of cross-covariance failed")),
    };
    let q = u * vt;
    let aligned = &q * &a.coords;
    let rmse = ((&aligned - &b.coords).norm_squared() / a.count() as f64).sqrt();
    Ok((PointConfig { coords: aligned }, rmse))
}

/// `‖X_rev − X‖_F / ‖X‖_F`.
pub fn relative_gram_error(x_rev: &GramMatrix, x_true: &GramMatrix) -> Result<f64> {
    if x_rev.n() != x_true.n() {
        return Err(EdgError::DimensionMismatch("Gram matrices differ in size".into()));
    }
    let denom = x_true.entries.norm();
    if denom == 0.0 {
        return Err(EdgError::ZeroNorm);
    }
    Ok((&x_rev.entries - &x_true.entries).norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    fn two_points() -> PointConfig {
        PointConfig::new(DMatrix::from_row_slice(1, 2, &[-0.5, 0.5])).unwrap()
    }

    fn random_centered(r: usize, n: usize, seed: u64) -> PointConfig {
        PointConfig::new(gaussian_matrix(r, n, seed)).unwrap().centered()
    }

    #[test]
    fn two_point_gram_and_distance() {
        let x = gram_from_points(&two_points());
        let expected = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert!((x.entries() - &expected).amax() < 1e-15);
        let d = dist_from_gram(&x);
        assert_eq!(d.entries(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let back = gram_from_dist(&d);
        assert!((back.entries() - &expected).amax() < 1e-15);
    }

    #[test]
    fn zero_configuration_maps_to_zero() {
        let p = PointConfig::new(DMatrix::zeros(2, 4)).unwrap();
        let x = gram_from_points(&p);
        assert_eq!(x.entries().amax(), 0.0);
        assert_eq!(dist_from_gram(&x).entries().amax(), 0.0);
        let d = SqDistMatrix::new(DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(gram_from_dist(&d).entries().amax(), 0.0);
    }

    #[test]
    fn gram_matches_entrywise_dot_products() {
        let p = random_centered(3, 20, 4);
        let x = gram_from_points(&p);
        for i in 0..20 {
            for j in 0..20 {
                let dot = p.coords().column(i).dot(&p.coords().column(j));
                assert!((x.entries()[(i, j)] - dot).abs() < 1e-12);
            }
        }
        assert!(x.has_zero_row_sums());
    }

    #[test]
    fn uncentered_points_are_centered_first() {
        let mut coords = gaussian_matrix(2, 10, 8);
        coords.row_mut(0).add_scalar_mut(5.0);
        let p = PointConfig::new(coords).unwrap();
        assert!(!p.is_centered());
        assert_eq!(gram_from_points(&p), gram_from_points(&p.centered()));
    }

    #[test]
    fn distances_match_brute_force_pairs() {
        let p = random_centered(3, 20, 5);
        let d = dist_from_gram(&gram_from_points(&p));
        for i in 0..20 {
            for j in 0..20 {
                let diff = p.coords().column(i) - p.coords().column(j);
                assert!((d.entries()[(i, j)] - diff.norm_squared()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gram_round_trip_through_distances() {
        let p = random_centered(3, 30, 6);
        let x = gram_from_points(&p);
        let back = gram_from_dist(&dist_from_gram(&x));
        assert!((back.entries() - x.entries()).amax() < 1e-10);
        assert!(back.entries().column_sum().norm() <= 1e-10 * (1.0 + back.entries().norm()));
    }

    #[test]
    fn mds_two_points() {
        let d = SqDistMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let emb = classical_mds(&d, 1).unwrap();
        let mut xs: Vec<f64> = emb.points.coords().iter().copied().collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 0.5).abs() < 1e-12 && (xs[1] - 0.5).abs() < 1e-12);
        assert!(!emb.non_euclidean && !emb.clamped);
    }

    #[test]
    fn mds_recovers_configuration() {
        let p = random_centered(3, 50, 7);
        let d = dist_from_gram(&gram_from_points(&p));
        let emb = classical_mds(&d, 3).unwrap();
        let (_, rmse) = procrustes_align(&emb.points, &p).unwrap();
        assert!(rmse <= 1e-8, "rmse {rmse}");
    }

    #[test]
    fn mds_flags_non_euclidean_input() {
        let p = random_centered(2, 12, 9);
        let mut d = dist_from_gram(&gram_from_points(&p)).entries().clone();
        // stretch a single distance far beyond the triangle inequality
        d[(0, 1)] *= 25.0;
        d[(1, 0)] *= 25.0;
        let emb = classical_mds(&SqDistMatrix::new(d).unwrap(), 2).unwrap();
        assert!(emb.non_euclidean);
        assert_eq!(emb.points.count(), 12);
    }

    #[test]
    fn mds_rejects_rank_above_n() {
        let d = SqDistMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert!(classical_mds(&d, 4).is_err());
    }

    #[test]
    fn procrustes_exact_orbit_and_identity() {
        let a = random_centered(3, 15, 10);
        let rot = crate::linalg::thin_qr(&gaussian_matrix(3, 3, 11)).0;
        let b = PointConfig::new(&rot * a.coords()).unwrap();
        let (_, rmse) = procrustes_align(&a, &b).unwrap();
        assert!(rmse < 1e-12);
        let (aligned, rmse) = procrustes_align(&a, &a).unwrap();
        assert!(rmse < 1e-12);
        assert!((aligned.coords() - a.coords()).amax() < 1e-12);
    }

    #[test]
    fn procrustes_attains_svd_minimum() {
        let a = random_centered(3, 20, 12);
        let b = random_centered(3, 20, 13);
        let (aligned, rmse) = procrustes_align(&a, &b).unwrap();
        let direct = ((aligned.coords() - b.coords()).norm_squared() / 20.0).sqrt();
        assert!((rmse - direct).abs() < 1e-12);
        // no orthogonal matrix from a random family does better
        for s in 0..50 {
            let q = crate::linalg::thin_qr(&gaussian_matrix(3, 3, 100 + s)).0;
            let other = ((&q * a.coords() - b.coords()).norm_squared() / 20.0).sqrt();
            assert!(rmse <= other + 1e-12);
        }
    }

    #[test]
    fn procrustes_rejects_shape_mismatch() {
        assert!(procrustes_align(&random_centered(2, 5, 1), &random_centered(3, 5, 2)).is_err());
    }

    #[test]
    fn relative_error_cases() {
        let x = gram_from_points(&random_centered(3, 10, 14));
        assert_eq!(relative_gram_error(&x, &x).unwrap(), 0.0);
        let doubled = GramMatrix::new(x.entries() * 2.0).unwrap();
        assert!((relative_gram_error(&doubled, &x).unwrap() - 1.0).abs() < 1e-15);

        let e = gaussian_matrix(10, 10, 15);
        let e = (&e + e.transpose()) * 0.5;
        let s = 0.01 * x.entries().norm() / e.norm();
        let e = e * s;
        let perturbed = GramMatrix::new(x.entries() + e).unwrap();
        assert!((relative_gram_error(&perturbed, &x).unwrap() - 0.01).abs() < 1e-14);

        let zero = GramMatrix::new(DMatrix::zeros(10, 10)).unwrap();
        assert!(matches!(relative_gram_error(&x, &zero), Err(EdgError::ZeroNorm)));
    }
}
