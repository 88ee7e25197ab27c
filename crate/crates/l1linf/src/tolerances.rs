//! Pinned numeric thresholds.
//!
//! Every tolerance used by the verification suites lives here so that no
//! check carries an ad-hoc magic number. Values fall into three buckets:
//! closed-form identities (near machine precision), finite-difference
//! oracles (truncation-limited), and optimizer-backed quantities
//! (termination-limited).

/// Jacobians with |det J| below this are treated as singular.
pub const SINGULAR_JACOBIAN: f64 = 1e-12;

/// Default step for central first differences.
pub const FD_STEP: f64 = 1e-5;

/// Step for the finite-difference chart-transition fallback.
pub const FD_CHART_STEP: f64 = 1e-6;

/// Relative tolerance on the Whitney-sum constraint for curve pairs.
pub const WHITNEY_CONSTRAINT: f64 = 1e-10;

/// Componentwise bound for flip/switch/dualize chart equivariance.
pub const JET_EQUIVARIANCE: f64 = 1e-9;

/// Bound for the Hamiltonian defining identity with analytic gradients.
pub const HAMILTONIAN_IDENTITY: f64 = 1e-8;

/// Bound for the two Lie-bracket routes on polynomial fields.
pub const LIE_BRACKET_AGREEMENT: f64 = 1e-9;

/// Residual bound for the derivative-of-pairing identity at h = 1e-5.
pub const PAIRING_DERIVATIVE: f64 = 1e-6;

/// Closed-form torus identities (infinitesimal duality, TB round trip).
pub const TORUS_CLOSED_FORM: f64 = 1e-12;

/// Finite-difference checks of the torus ∂-derivatives.
pub const TORUS_FD: f64 = 1e-7;

/// Analytic dual-metric agreement for builtin norms.
pub const DUAL_ANALYTIC: f64 = 1e-10;

/// Blackbox-optimizer dual-metric agreement.
pub const DUAL_BLACKBOX: f64 = 1e-3;

/// Strict-convexity margin distinguishing flat facets from roundoff.
pub const STRICT_CONVEXITY_MARGIN: f64 = 1e-9;

/// Relative cutoff under which grid nodes count as zeros of q.
pub const ZERO_SET_RELATIVE: f64 = 1e-12;

/// CR-relation residual bound at a 256² grid.
pub const CR_RESIDUAL_256: f64 = 1e-2;

/// Disk-indicator Cauchy transform agreement at 512².
pub const CAUCHY_DISK_512: f64 = 2e-3;

/// Poincaré curvature defect at grid spacing 0.01.
pub const CURVATURE_DEFECT: f64 = 1e-3;

/// ℂ-linearity defect of the restricted TB₀ differential.
pub const CR_LINEARITY: f64 = 1e-6;
