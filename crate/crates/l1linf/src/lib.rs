//! Numerical library for the L¹–L∞ geometry of Teichmüller space at desk scale.
//!
//! The crate is organized around five subsystems:
//!
//! - [`jet`]: second-order infinitesimal calculus on coordinate charts of a
//!   complex manifold — the four bundles TTM, T*TM, TT*M, T*T*M, their
//!   transition laws, the flip/switch/dualization maps, pairings, the
//!   canonical holomorphic symplectic form, Hamiltonian vector fields, and
//!   Lie brackets.
//! - [`finsler`]: convex complex-homogeneous Finsler metrics on ℂⁿ fibers,
//!   dual-metric computation by closed form or multistart optimization,
//!   supporting functionals, and the regularity expansion of the dual metric.
//! - [`torus`]: the fully explicit genus-1 Teichmüller space — norms,
//!   Teichmüller–Beltrami maps, ∂-derivatives, Levi matrices, and the
//!   machine verification of the infinitesimal duality diagram.
//! - [`qdiff`]: quadratic differentials as sampled fields on planar domains
//!   and flat-torus fundamental domains, with the L¹ variational formula,
//!   strict convexity, and the L∞–L¹ pairing.
//! - [`integral`]: the Cauchy transform T, the Beurling transform H
//!   (principal value), their ∂/∂̄ identities, and the Ahlfors–Weill kernel.
//!
//! All quantities are dense complex vectors of small runtime dimension;
//! finite differences appear only as independent oracles against the
//! closed forms.

pub mod finsler;
pub mod grid;
pub mod integral;
pub mod jet;
pub mod qdiff;
pub mod tolerances;
pub mod torus;

pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C = Complex64;
