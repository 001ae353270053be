//! Observation patterns and measurement extraction.

use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::dualbasis::{universe_size, IndexPair, SampleSet};
use crate::error::{EdgError, Result};
use crate::geometry::{GramMatrix, PointConfig};
use crate::manifold::LowRankFactor;
use crate::rng::rng_from_seed;

/// Observed squared distances, one value per distinct sampled pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    n: usize,
    values: BTreeMap<IndexPair, f64>,
}

impl Observations {
    pub fn new(n: usize, values: BTreeMap<IndexPair, f64>) -> Result<Self> {
        if let Some(p) = values.keys().find(|p| !p.fits(n)) {
            return Err(EdgError::invalid(format!("observed pair {p} exceeds n = {n}")));
        }
        Ok(Observations { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, alpha: &IndexPair) -> Option<f64> {
        self.values.get(alpha).copied()
    }

    pub fn values(&self) -> &BTreeMap<IndexPair, f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values aligned with the distinct pairs of `omega` (sorted order);
    /// fails if any sampled pair is unobserved.
    pub fn aligned(&self, omega: &SampleSet) -> Result<Vec<f64>> {
        if omega.n() != self.n {
            return Err(EdgError::DimensionMismatch("observations and samples over different n".into()));
        }
        omega
            .counts()
            .iter()
            .map(|(p, _)| {
                self.get(p)
                    .ok_or_else(|| EdgError::invalid(format!("no observed value for sampled pair {p}")))
            })
            .collect()
    }
}

/// `D_ij = ⟨X, w_α⟩` for each distinct pair of `omega`.
pub fn measure(x: &GramMatrix, omega: &SampleSet) -> Result<Observations> {
    if x.n() != omega.n() {
        return Err(EdgError::DimensionMismatch("Gram matrix and samples over different n".into()));
    }
    let e = x.entries();
    let values = omega
        .counts()
        .into_iter()
        .map(|(p, _)| {
            let (i, j) = (p.i(), p.j());
            (p, e[(i, i)] + e[(j, j)] - 2.0 * e[(i, j)])
        })
        .collect();
    Observations::new(omega.n(), values)
}

/// Same as [`measure`] but reads squared distances straight off the points.
pub fn measure_points(p: &PointConfig, omega: &SampleSet) -> Result<Observations> {
    if p.count() != omega.n() {
        return Err(EdgError::DimensionMismatch("points and samples over different n".into()));
    }
    let c = p.coords();
    let values = omega
        .counts()
        .into_iter()
        .map(|(a, _)| (a, (c.column(a.i()) - c.column(a.j())).norm_squared()))
        .collect();
    Observations::new(omega.n(), values)
}

/// Same as [`measure`] for a factored Gram matrix, in `O(r)` per pair.
pub fn measure_factor(f: &LowRankFactor, omega: &SampleSet) -> Result<Observations> {
    if f.n() != omega.n() {
        return Err(EdgError::DimensionMismatch("factor and samples over different n".into()));
    }
    let x = f.entries();
    let values = omega
        .counts()
        .into_iter()
        .map(|(a, _)| {
            let (i, j) = (a.i(), a.j());
            (a, x.entry(i, i) + x.entry(j, j) - 2.0 * x.entry(i, j))
        })
        .collect();
    Observations::new(omega.n(), values)
}

/// Maps a row-major position in `𝕀` to its pair.
struct PairIndexer {
    n: usize,
    row_start: Vec<usize>,
}

impl PairIndexer {
    fn new(n: usize) -> Self {
        let mut row_start = Vec::with_capacity(n);
        let mut acc = 0;
        for i in 0..n {
            row_start.push(acc);
            acc += n - 1 - i;
        }
        PairIndexer { n, row_start }
    }

    fn pair(&self, k: usize) -> IndexPair {
        let i = self.row_start.partition_point(|&s| s <= k) - 1;
        let j = i + 1 + (k - self.row_start[i]);
        debug_assert!(j < self.n);
        IndexPair::new(i, j).expect("row-major position is in range")
    }
}

/// `m` independent uniform draws from `𝕀`.
pub fn sample_uniform_replacement(n: usize, m: usize, seed: u64) -> Result<SampleSet> {
    if m == 0 {
        return Err(EdgError::invalid("at least one sample is required"));
    }
    if n < 2 {
        return Err(EdgError::invalid("uniform sampling needs n ≥ 2"));
    }
    let total = universe_size(n);
    let indexer = PairIndexer::new(n);
    let mut rng = rng_from_seed(seed);
    let pairs = (0..m).map(|_| indexer.pair(rng.gen_range(0..total))).collect();
    SampleSet::new(n, pairs)
}

/// Each pair of `𝕀` independently with probability `p`, duplicate-free.
pub fn sample_bernoulli(n: usize, p: f64, seed: u64) -> Result<SampleSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EdgError::invalid(format!("Bernoulli rate {p} outside [0, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let pairs = crate::dualbasis::universe(n).filter(|_| rng.gen_bool(p)).collect();
    SampleSet::new(n, pairs)
}

/// Parameters of the anchor-based observation scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSpec {
    /// Number of pseudoanchors `m_a`.
    pub anchors: usize,
    /// Fully observed node (0-based); `None` picks the median free index.
    pub central: Option<usize>,
    /// Bernoulli rate inside the pseudoanchor block.
    pub e_rate: f64,
    /// Pseudoanchor partners per mobile node.
    pub k: usize,
}

/// Node roles produced by [`StructuredSpec::layout`] (0-based indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredLayout {
    pub pseudoanchors: Vec<usize>,
    pub central: usize,
    pub mobile: Vec<usize>,
}

impl StructuredSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.anchors == 0 || self.anchors + 1 > n {
            return Err(EdgError::invalid(format!("need 1 ≤ anchors and anchors + 1 ≤ n, got {} and n = {n}", self.anchors)));
        }
        if self.k == 0 || self.k > self.anchors {
            return Err(EdgError::invalid(format!("column samples k = {} must lie in 1..={}", self.k, self.anchors)));
        }
        if !(0.0..=1.0).contains(&self.e_rate) {
            return Err(EdgError::invalid(format!("E-block rate {} outside [0, 1]", self.e_rate)));
        }
        if let Some(c) = self.central {
            if c >= n {
                return Err(EdgError::invalid(format!("central index {c} out of range")));
            }
        }
        Ok(())
    }

    /// Pseudoanchors at `round(1 + t(n−1)/(m_a−1))` (1-based, deduplicated);
    /// the central anchor is the free index closest to the median.
    pub fn layout(&self, n: usize) -> Result<StructuredLayout> {
        self.validate(n)?;
        let ma = self.anchors;
        let mut anchors: Vec<usize> = if ma == 1 {
            vec![0]
        } else {
            (0..ma)
                .map(|t| (1.0 + t as f64 * (n - 1) as f64 / (ma - 1) as f64).round() as usize - 1)
                .collect()
        };
        anchors.dedup();
        let central = match self.central {
            Some(c) => {
                anchors.retain(|&a| a != c);
                c
            }
            None => {
                let median = (n - 1) as f64 / 2.0;
                let mut candidates: Vec<usize> = (0..n).filter(|i| !anchors.contains(i)).collect();
                candidates.sort_by(|&a, &b| {
                    ((a as f64 - median).abs())
                        .total_cmp(&(b as f64 - median).abs())
                        .then(a.cmp(&b))
                });
                candidates[0]
            }
        };
        let mobile = (0..n).filter(|i| *i != central && !anchors.contains(i)).collect();
        Ok(StructuredLayout {
            pseudoanchors: anchors,
            central,
            mobile,
        })
    }
}

/// Anchor-structured, duplicate-free observation pattern: the central node's
/// full row, a Bernoulli(`e_rate`) subset of pseudoanchor pairs, and `k`
/// distinct pseudoanchor partners per mobile node. Mobile–mobile pairs are
/// never observed.
pub fn sample_structured(n: usize, spec: &StructuredSpec, seed: u64) -> Result<SampleSet> {
    let layout = spec.layout(n)?;
    let k = spec.k.min(layout.pseudoanchors.len());
    let mut rng = rng_from_seed(seed);
    let mut pairs = Vec::new();
    for j in (0..n).filter(|&j| j != layout.central) {
        pairs.push(IndexPair::unordered(layout.central, j)?);
    }
    let pa = &layout.pseudoanchors;
    for a in 0..pa.len() {
        for b in (a + 1)..pa.len() {
            if rng.gen_bool(spec.e_rate) {
                pairs.push(IndexPair::unordered(pa[a], pa[b])?);
            }
        }
    }
    for &node in &layout.mobile {
        let mut chosen: Vec<usize> = sample_indices(&mut rng, pa.len(), k).into_iter().map(|t| pa[t]).collect();
        chosen.sort_unstable();
        for a in chosen {
            pairs.push(IndexPair::unordered(node, a)?);
        }
    }
    SampleSet::new(n, pairs)
}
