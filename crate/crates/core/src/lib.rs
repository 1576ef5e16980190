//! Constructive symplectic displacement and folding for rectifiable sets.
//!
//! The library models countably m-rectifiable subsets of ℝ^ℓ as finite unions
//! of Lipschitz charts, estimates Hausdorff/box dimension through explicit
//! grid coverings, builds the explicit symplectic maps that displace such sets
//! by linear Hamiltonian flows and squeeze them by iterated folding, and
//! certifies every constructed map numerically (symplecticity residuals,
//! injectivity margins, containment fractions) on seeded sample clouds.
//!
//! Conventions, fixed once and used everywhere:
//! - Coordinates on ℝ^{2n} are ordered (q₁, p₁, q₂, p₂, …). "q" and "p" with
//!   no index mean the first factor's coordinates.
//! - ω_st(u, v) = uᵀ J v with J block-diagonal, each 2×2 block [[0, 1], [−1, 0]].
//! - Hamiltonian flow solves ẋ = J ∇H(x); for linear H(x) = ω_st(v₀, x) the
//!   flow is the translation x ↦ x + t·v₀.
//! - All verification verdicts are finite-sample statements about the clouds
//!   they were computed on; reports record the sample sizes and seeds.

pub mod cutoff;
pub mod displacement;
pub mod error;
pub mod folding;
pub mod geom;
pub mod grid;
pub mod hausdorff;
pub mod ode;
pub mod rng;
pub mod set_model;
pub mod sympmap;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
