//! The basis `{w_α}` of `𝕊`, its explicit dual `{v_α}`, and the sampling
//! operators built from them.
//!
//! Index pairs are stored 0-based with `i < j`; the text format used for
//! sample sets is 1-based.
//!
//! All three operators treat a [`SampleSet`] as a multiset: a pair drawn `c`
//! times contributes its term `c` times.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{EdgError, Result};
use crate::linalg::center_columns;

/// A strictly upper-triangular index pair `(i, j)`, `i < j`, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexPair {
    i: u32,
    j: u32,
}

impl IndexPair {
    /// 0-based constructor; requires `i < j`.
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if i >= j {
            return Err(EdgError::invalid(format!("index pair ({i}, {j}) is not strictly upper triangular")));
        }
        Ok(IndexPair { i: i as u32, j: j as u32 })
    }

    /// Unordered constructor: sorts the two distinct indices.
    pub fn unordered(a: usize, b: usize) -> Result<Self> {
        Self::new(a.min(b), a.max(b))
    }

    pub fn i(&self) -> usize {
        self.i as usize
    }

    pub fn j(&self) -> usize {
        self.j as usize
    }

    pub fn fits(&self, n: usize) -> bool {
        self.j() < n
    }

    /// Number of indices shared with `other` (0, 1 or 2).
    pub fn overlap(&self, other: &IndexPair) -> usize {
        if self == other {
            2
        } else if self.i == other.i || self.i == other.j || self.j == other.i || self.j == other.j {
            1
        } else {
            0
        }
    }
}

impl fmt::Display for IndexPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i + 1, self.j + 1)
    }
}

/// Number of strictly upper-triangular pairs, `L = n(n−1)/2`.
pub fn universe_size(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// All pairs of `𝕀` in row-major order.
pub fn universe(n: usize) -> impl Iterator<Item = IndexPair> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| IndexPair { i: i as u32, j: j as u32 }))
}

/// Ordered multiset of index pairs over `n` points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    n: usize,
    pairs: Vec<IndexPair>,
}

impl SampleSet {
    pub fn new(n: usize, pairs: Vec<IndexPair>) -> Result<Self> {
        if n < 2 {
            return Err(EdgError::invalid("sample sets need n ≥ 2"));
        }
        if pairs.is_empty() {
            return Err(EdgError::invalid("sample set must contain at least one pair"));
        }
        if let Some(bad) = pairs.iter().find(|p| !p.fits(n)) {
            return Err(EdgError::invalid(format!("pair {bad} exceeds n = {n}")));
        }
        Ok(SampleSet { n, pairs })
    }

    /// `𝕀` with every pair present once.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, universe(n).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cardinality `m`, repeats counted.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[IndexPair] {
        &self.pairs
    }

    /// Distinct pairs with their multiplicities, sorted by pair.
    pub fn counts(&self) -> Vec<(IndexPair, u32)> {
        let mut map: BTreeMap<IndexPair, u32> = BTreeMap::new();
        for p in &self.pairs {
            *map.entry(*p).or_insert(0) += 1;
        }
        map.into_iter().collect()
    }

    pub fn is_duplicate_free(&self) -> bool {
        self.counts().len() == self.pairs.len()
    }

    /// Concatenates two sample sets over the same `n`.
    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        if self.n != other.n {
            return Err(EdgError::DimensionMismatch("sample sets over different n".into()));
        }
        let mut pairs = self.pairs.clone();
        pairs.extend_from_slice(&other.pairs);
        SampleSet::new(self.n, pairs)
    }

    /// Splits into `groups` consecutive sub-multisets in sampling order; the
    /// first `m mod groups` groups receive one extra pair.
    pub fn partition(&self, groups: usize) -> Result<Vec<SampleSet>> {
        let m = self.pairs.len();
        if groups == 0 || m < groups {
            return Err(EdgError::invalid(format!("cannot split {m} samples into {groups} groups")));
        }
        let base = m / groups;
        let extra = m % groups;
        let mut out = Vec::with_capacity(groups);
        let mut start = 0;
        for g in 0..groups {
            let len = base + usize::from(g < extra);
            out.push(SampleSet {
                n: self.n,
                pairs: self.pairs[start..start + len].to_vec(),
            });
            start += len;
        }
        Ok(out)
    }

    /// Writes `# n=<n>` followed by one `i j count` line (1-based) per
    /// distinct pair, in order of first occurrence.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n={}", self.n)?;
        let mut order: Vec<IndexPair> = Vec::new();
        let mut counts: BTreeMap<IndexPair, u32> = BTreeMap::new();
        for p in &self.pairs {
            let c = counts.entry(*p).or_insert(0);
            if *c == 0 {
                order.push(*p);
            }
            *c += 1;
        }
        for p in order {
            writeln!(w, "{} {} {}", p.i + 1, p.j + 1, counts[&p])?;
        }
        Ok(())
    }

    /// Reads the format produced by [`SampleSet::write_to`]. Without an
    /// `# n=` header, `n` is the largest index seen.
    pub fn read_from<R: BufRead>(r: R, source: &str) -> Result<SampleSet> {
        let mut n: Option<usize> = None;
        let mut pairs = Vec::new();
        let mut max_index = 0;
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| EdgError::io(source, e))?;
            let parse_err = |msg: String| EdgError::Parse {
                path: source.to_string(),
                line: lineno + 1,
                msg,
            };
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("n=") {
                    n = Some(v.trim().parse().map_err(|_| parse_err(format!("bad header value {v:?}")))?);
                }
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected `i j count`, got {t:?}")));
            }
            let nums: Vec<usize> = fields
                .iter()
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(e.to_string()))?;
            let (i, j, count) = (nums[0], nums[1], nums[2]);
            if i == 0 || j == 0 || i >= j || count == 0 {
                return Err(parse_err(format!("invalid entry {t:?}")));
            }
            max_index = max_index.max(j);
            let p = IndexPair::new(i - 1, j - 1)?;
            pairs.extend(std::iter::repeat(p).take(count));
        }
        SampleSet::new(n.unwrap_or(max_index), pairs)
    }
}

/// `w_α = e_ii + e_jj − e_ij − e_ji`.
pub fn w_basis(alpha: IndexPair, n: usize) -> DMatrix<f64> {
    let (i, j) = (alpha.i(), alpha.j());
    let mut w = DMatrix::zeros(n, n);
    w[(i, i)] = 1.0;
    w[(j, j)] = 1.0;
    w[(i, j)] = -1.0;
    w[(j, i)] = -1.0;
    w
}

/// `v_α = −½(abᵀ + baᵀ)` with `a = e_i − 1/n`, `b = e_j − 1/n`.
pub fn v_basis(alpha: IndexPair, n: usize) -> DMatrix<f64> {
    let inv = 1.0 / n as f64;
    let a = |k: usize| if k == alpha.i() { 1.0 - inv } else { -inv };
    let b = |k: usize| if k == alpha.j() { 1.0 - inv } else { -inv };
    DMatrix::from_fn(n, n, |p, q| -0.5 * (a(p) * b(q) + b(p) * a(q)))
}

/// `⟨w_α, w_β⟩`: 4, 1 or 0 by overlap.
pub fn h_entry(alpha: IndexPair, beta: IndexPair) -> f64 {
    match alpha.overlap(&beta) {
        2 => 4.0,
        1 => 1.0,
        _ => 0.0,
    }
}

/// Closed-form entry of `H⁻¹`, equal to `⟨v_α, v_β⟩`.
pub fn h_inverse_entry(alpha: IndexPair, beta: IndexPair, n: usize) -> f64 {
    let nf = n as f64;
    match alpha.overlap(&beta) {
        2 => 0.5 * (1.0 - 2.0 / nf + 2.0 / (nf * nf)),
        1 => -1.0 / (2.0 * nf) + 1.0 / (nf * nf),
        _ => 1.0 / (nf * nf),
    }
}

/// `⟨Y, w_α⟩ = Y_ii + Y_jj − Y_ij − Y_ji`.
pub fn w_coefficient(y: &DMatrix<f64>, alpha: IndexPair) -> f64 {
    let (i, j) = (alpha.i(), alpha.j());
    y[(i, i)] + y[(j, j)] - y[(i, j)] - y[(j, i)]
}

/// `Σ_α v_α² = ((n² − 2n + 2) / 4n)·J`.
pub fn sum_v_squared(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    let c = (nf * nf - 2.0 * nf + 2.0) / (4.0 * nf);
    DMatrix::from_fn(n, n, |p, q| c * (if p == q { 1.0 } else { 0.0 } - 1.0 / nf))
}

fn check_square(y: &DMatrix<f64>, n: usize) -> Result<()> {
    if y.nrows() != n || y.ncols() != n {
        return Err(EdgError::DimensionMismatch(format!(
            "expected {n}×{n} matrix, got {}×{}",
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

/// `R_Ω(X) = Σ_{α∈Ω} ⟨X, w_α⟩ v_α`, evaluated as `−½·J·P_Ω(D)·J`.
pub fn r_omega(x: &DMatrix<f64>, omega: &SampleSet) -> Result<DMatrix<f64>> {
    check_square(x, omega.n())?;
    let ops = SamplingOperator::new(omega);
    let coeffs: Vec<f64> = ops.pairs.iter().map(|p| w_coefficient(x, p.pair)).collect();
    Ok(ops.r_omega_dense(&coeffs))
}

/// `R_Ω*(Y) = Σ_{α∈Ω} ⟨Y, v_α⟩ w_α`.
pub fn r_omega_star(y: &DMatrix<f64>, omega: &SampleSet) -> Result<DMatrix<f64>> {
    check_square(y, omega.n())?;
    let ops = SamplingOperator::new(omega);
    let n = omega.n() as f64;
    let row_means: Vec<f64> = y.row_iter().map(|r| r.sum() / n).collect();
    let col_means: Vec<f64> = y.column_iter().map(|c| c.sum() / n).collect();
    let grand = row_means.iter().sum::<f64>() / n;
    // ⟨Y, v_α⟩ = −½(aᵀYb + bᵀYa)
    let coeffs: Vec<f64> = ops
        .pairs
        .iter()
        .map(|p| {
            let (i, j) = (p.pair.i(), p.pair.j());
            let ayb = y[(i, j)] - row_means[i] - col_means[j] + grand;
            let bya = y[(j, i)] - row_means[j] - col_means[i] + grand;
            -0.5 * (ayb + bya)
        })
        .collect();
    Ok(ops.frame_dense(&coeffs))
}

/// `F_Ω(Y) = Σ_{α∈Ω} ⟨Y, w_α⟩ w_α`.
pub fn f_omega(y: &DMatrix<f64>, omega: &SampleSet) -> Result<DMatrix<f64>> {
    check_square(y, omega.n())?;
    let ops = SamplingOperator::new(omega);
    let coeffs: Vec<f64> = ops.pairs.iter().map(|p| w_coefficient(y, p.pair)).collect();
    Ok(ops.frame_dense(&coeffs))
}

/// A distinct sampled pair with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPair {
    pub pair: IndexPair,
    pub mult: f64,
}

/// Sparse form of a sample set: distinct pairs with multiplicities.
///
/// Given per-pair coefficients `c_α` (one per distinct pair, multiplicity
/// not yet applied) it applies
/// `Σ mult_α c_α v_α` and `Σ mult_α c_α w_α` to blocks of vectors in
/// `O(m·k + n·k)` without forming `n×n` matrices.
#[derive(Debug, Clone)]
pub struct SamplingOperator {
    n: usize,
    m: usize,
    pairs: Vec<WeightedPair>,
}

impl SamplingOperator {
    pub fn new(omega: &SampleSet) -> Self {
        let pairs = omega
            .counts()
            .into_iter()
            .map(|(pair, c)| WeightedPair { pair, mult: c as f64 })
            .collect();
        SamplingOperator {
            n: omega.n(),
            m: omega.len(),
            pairs,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Multiset cardinality.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pairs(&self) -> &[WeightedPair] {
        &self.pairs
    }

    /// `S·V` where `S` is the hollow symmetric matrix with
    /// `S_ij = S_ji = mult_α c_α`.
    fn masked_apply(&self, coeffs: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
        let k = v.ncols();
        let mut out = DMatrix::zeros(self.n, k);
        for (p, &c) in self.pairs.iter().zip(coeffs) {
            let s = p.mult * c;
            let (i, j) = (p.pair.i(), p.pair.j());
            for col in 0..k {
                out[(i, col)] += s * v[(j, col)];
                out[(j, col)] += s * v[(i, col)];
            }
        }
        out
    }

    /// `(Σ mult_α c_α v_α)·V = −½·J·S·J·V`.
    pub fn dual_apply(&self, coeffs: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
        let jv = center_columns(v);
        center_columns(&self.masked_apply(coeffs, &jv)) * -0.5
    }

    /// `(Σ mult_α c_α w_α)·V`.
    pub fn frame_apply(&self, coeffs: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
        let k = v.ncols();
        let mut out = DMatrix::zeros(self.n, k);
        for (p, &c) in self.pairs.iter().zip(coeffs) {
            let s = p.mult * c;
            let (i, j) = (p.pair.i(), p.pair.j());
            for col in 0..k {
                let d = s * (v[(i, col)] - v[(j, col)]);
                out[(i, col)] += d;
                out[(j, col)] -= d;
            }
        }
        out
    }

    /// Dense `Σ mult_α c_α v_α`, in `O(m + n²)`.
    pub fn r_omega_dense(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n, self.n);
        for (p, &c) in self.pairs.iter().zip(coeffs) {
            let v = p.mult * c;
            s[(p.pair.i(), p.pair.j())] += v;
            s[(p.pair.j(), p.pair.i())] += v;
        }
        crate::linalg::double_center(&s) * -0.5
    }

    /// Dense `Σ mult_α c_α w_α`, in `O(m + n²)`.
    pub fn frame_dense(&self, coeffs: &[f64]) -> DMatrix<f64> {
        let mut f = DMatrix::zeros(self.n, self.n);
        for (p, &c) in self.pairs.iter().zip(coeffs) {
            let v = p.mult * c;
            let (i, j) = (p.pair.i(), p.pair.j());
            f[(i, i)] += v;
            f[(j, j)] += v;
            f[(i, j)] -= v;
            f[(j, i)] -= v;
        }
        f
    }
}
