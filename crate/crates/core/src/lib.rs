//! Reconstruction of point configurations from partially observed squared
//! distances.
//!
//! A configuration of `n` points in `r` dimensions is recovered through its
//! centered Gram matrix `X = PᵀP`, a rank-`r` element of the space `𝕊` of
//! symmetric matrices with zero row sums. Observed squared distances are the
//! coefficients `D_ij = ⟨X, w_ij⟩` of `X` in a non-orthogonal basis of `𝕊`,
//! and the solvers run Riemannian descent over the manifold of rank-`r`
//! symmetric matrices with a hard-thresholding retraction.
//!
//! Module map:
//!
//! - [`geometry`]: points, Gram and distance matrices, classical MDS, Procrustes.
//! - [`dualbasis`]: the basis `{w_α}`, its dual `{v_α}`, sampling operators.
//! - [`manifold`]: factored rank-`r` points, tangent projection, retraction.
//! - [`sampling`]: observation patterns and measurement extraction.
//! - [`solvers`]: frame descent and pseudo-gradient descent.
//! - [`init`]: one-step, resampled and trimmed initializations.
//! - [`diagnostics`]: coherence, flatness, condition number, empirical RIP.
//! - [`experiment`]: datasets, file ingestion, trial sweeps and CSV output.
//! - [`verify`]: the self-check suite run by `edg verify`.

pub mod diagnostics;
pub mod dualbasis;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod init;
pub mod linalg;
pub mod manifold;
pub mod rng;
pub mod sampling;
pub mod solvers;
pub mod verify;

pub use dualbasis::{IndexPair, SampleSet};
pub use error::{EdgError, Result};
pub use geometry::{GramMatrix, PointConfig, SqDistMatrix};
pub use manifold::{LowRankFactor, TangentVector};
pub use sampling::Observations;
pub use solvers::{SolverConfig, SolverReport, SolverStatus, Variant};
