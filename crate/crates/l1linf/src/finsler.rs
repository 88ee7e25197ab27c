//! Convex complex-homogeneous Finsler metrics on ℂⁿ fibers and their duals.
//!
//! A metric is a function G(x, η) ≥ 0, convex and complex homogeneous in the
//! fiber variable η, over a parameter point x. The dual metric is the support
//! function F(x, ξ) = sup { Re(η·ξ) | G(x, η) = 1 }. Builtin norms (ℓ¹, ℓ²,
//! ℓ∞, weighted ℓ², the genus-1 L¹/Teichmüller pair) use closed forms; any
//! metric can also be treated as a black box and maximized by seeded
//! multistart compass search over the realified fiber.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tolerances;
use crate::C;

#[derive(Debug, Error, PartialEq)]
pub enum FinslerError {
    #[error("dual metric of the zero vector where a maximizer is required")]
    ZeroVector,
    #[error("vector lengths do not match the metric dimension")]
    DimensionMismatch,
    #[error("supporting functional is not unique for this metric and direction")]
    NonUniqueSupport,
    #[error("metric supplies no x-derivative")]
    XDerivativeUnavailable,
    #[error("weights must be strictly positive")]
    NonPositiveWeight,
    #[error("parameter point invalid: {0}")]
    InvalidParameter(&'static str),
    #[error("optimizer failed to converge; best lower bound {best}")]
    OptimizerNoConvergence { best: f64 },
}

/// Identifies the closed-form family a metric belongs to, if any.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    /// G(x, η) = Σ|η_j|.
    L1,
    /// G(x, η) = (Σ|η_j|²)^{1/2}.
    L2,
    /// G(x, η) = max|η_j|.
    LInf,
    /// G(x, η) = |x₀|·(Σ w_j²|η_j|²)^{1/2} with x₀ the first parameter.
    WeightedL2 { weights: Vec<f64> },
    /// Genus-1 L¹ norm G(τ, q) = 2|q|·Im τ on the one-dimensional fiber.
    TorusL1,
    /// Genus-1 Teichmüller metric F(τ, μ) = |μ|/(2 Im τ).
    TorusTeich,
    /// No closed form; evaluated through the stored callable only.
    Blackbox,
}

/// Capability flags declared by the metric.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricFlags {
    pub claims_convex: bool,
    pub claims_strictly_convex: bool,
    pub claims_c1_in_fiber: bool,
}

type EvalFn = dyn Fn(&[C], &[C]) -> f64 + Send + Sync;
type XDerivFn = dyn Fn(&[C], &[C]) -> Vec<C> + Send + Sync;

/// A fiberwise positive convex complex-homogeneous function G(x, η).
#[derive(Clone)]
pub struct FinslerMetric {
    pub kind: MetricKind,
    pub dim: usize,
    pub flags: MetricFlags,
    blackbox_eval: Option<Arc<EvalFn>>,
    /// Coefficients a with A_{x,η}(Δx) = Σ a_j Δx_j in the first-order
    /// expansion G(x+Δx, η) = G(x, η) + A(Δx) + conj(A(Δx)) + o(|Δx|).
    x_derivative: Option<Arc<XDerivFn>>,
}

impl std::fmt::Debug for FinslerMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FinslerMetric")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .finish()
    }
}

fn l2w(weights: &[f64], eta: &[C]) -> f64 {
    weights
        .iter()
        .zip(eta)
        .map(|(w, e)| (w * e.norm()).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl FinslerMetric {
    pub fn l1(dim: usize) -> Self {
        Self {
            kind: MetricKind::L1,
            dim,
            flags: MetricFlags { claims_convex: true, claims_strictly_convex: false, claims_c1_in_fiber: false },
            blackbox_eval: None,
            x_derivative: None,
        }
    }

    pub fn l2(dim: usize) -> Self {
        Self {
            kind: MetricKind::L2,
            dim,
            flags: MetricFlags { claims_convex: true, claims_strictly_convex: true, claims_c1_in_fiber: true },
            blackbox_eval: None,
            x_derivative: None,
        }
    }

    pub fn linf(dim: usize) -> Self {
        Self {
            kind: MetricKind::LInf,
            dim,
            flags: MetricFlags { claims_convex: true, claims_strictly_convex: false, claims_c1_in_fiber: false },
            blackbox_eval: None,
            x_derivative: None,
        }
    }

    /// G(x, η) = |x₀| · (Σ w_j²|η_j|²)^{1/2}.
    pub fn weighted_l2(weights: Vec<f64>) -> Result<Self, FinslerError> {
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(FinslerError::NonPositiveWeight);
        }
        let dim = weights.len();
        let w = weights.clone();
        Ok(Self {
            kind: MetricKind::WeightedL2 { weights },
            dim,
            flags: MetricFlags { claims_convex: true, claims_strictly_convex: true, claims_c1_in_fiber: true },
            blackbox_eval: None,
            // |x₀+Δ| = |x₀| + Re(x̄₀Δ)/|x₀| + o, so A(Δ) = x̄₀ g(η) Δ / (2|x₀|).
            x_derivative: Some(Arc::new(move |x: &[C], eta: &[C]| {
                let g = l2w(&w, eta);
                vec![x[0].conj() / (2.0 * x[0].norm()) * g]
            })),
        })
    }

    /// The genus-1 L¹ norm G(τ, q) = 2|q| Im τ; the parameter is x = [τ].
    pub fn torus_l1() -> Self {
        Self {
            kind: MetricKind::TorusL1,
            dim: 1,
            flags: MetricFlags { claims_convex: true, claims_strictly_convex: true, claims_c1_in_fiber: true },
            blackbox_eval: None,
            // Im(τ+Δ) = Im τ + Δ/(2i) + conj(Δ/(2i)), so A(Δτ) = −i|q|Δτ.
            x_derivative: Some(Arc::new(|_x: &[C], eta: &[C]| {
                vec![C::new(0.0, -eta[0].norm())]
            })),
        }
    }

    /// The genus-1 Teichmüller metric F(τ, μ) = |μ|/(2 Im τ).
    pub fn torus_teich() -> Self {
        Self {
            kind: MetricKind::TorusTeich,
            dim: 1,
            flags: MetricFlags { claims_convex: true, claims_strictly_convex: true, claims_c1_in_fiber: true },
            blackbox_eval: None,
            x_derivative: Some(Arc::new(|x: &[C], eta: &[C]| {
                // |μ|/(2 Im(τ+Δ)) expands with −Im(Δ)/Im(τ)² inside:
                // A(Δτ) = |μ|/(2) · (−1/Im τ²) · Δτ/(2i) · ... = i|μ|Δτ/(8 Im τ²)·2
                let im = x[0].im;
                vec![C::new(0.0, eta[0].norm() / (4.0 * im * im))]
            })),
        }
    }

    /// Wraps an arbitrary evaluator; dual computation goes through the
    /// multistart optimizer.
    pub fn blackbox(dim: usize, eval: impl Fn(&[C], &[C]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: MetricKind::Blackbox,
            dim,
            flags: MetricFlags { claims_convex: true, ..Default::default() },
            blackbox_eval: Some(Arc::new(eval)),
            x_derivative: None,
        }
    }

    /// Re-wraps any metric as a blackbox, discarding closed-form knowledge.
    pub fn as_blackbox(&self) -> Self {
        let inner = self.clone();
        Self::blackbox(self.dim, move |x, eta| inner.evaluate(x, eta))
    }

    pub fn evaluate(&self, x: &[C], eta: &[C]) -> f64 {
        match &self.kind {
            MetricKind::L1 => eta.iter().map(|e| e.norm()).sum(),
            MetricKind::L2 => eta.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt(),
            MetricKind::LInf => eta.iter().map(|e| e.norm()).fold(0.0, f64::max),
            MetricKind::WeightedL2 { weights } => x[0].norm() * l2w(weights, eta),
            MetricKind::TorusL1 => 2.0 * eta[0].norm() * x[0].im,
            MetricKind::TorusTeich => eta[0].norm() / (2.0 * x[0].im),
            MetricKind::Blackbox => (self.blackbox_eval.as_ref().expect("blackbox eval"))(x, eta),
        }
    }

    /// The coefficients of the complex-linear functional A_{x,η} on Δx.
    pub fn x_derivative(&self, x: &[C], eta: &[C]) -> Result<Vec<C>, FinslerError> {
        self.x_derivative
            .as_ref()
            .map(|f| f(x, eta))
            .ok_or(FinslerError::XDerivativeUnavailable)
    }

    /// The closed-form dual of a builtin metric (ℓ¹ ↔ ℓ∞, ℓ² self-dual,
    /// weighted ℓ² with reciprocal weights, torus L¹ ↔ Teichmüller).
    pub fn analytic_dual(&self) -> Option<FinslerMetric> {
        match &self.kind {
            MetricKind::L1 => Some(Self::linf(self.dim)),
            MetricKind::LInf => Some(Self::l1(self.dim)),
            MetricKind::L2 => Some(Self::l2(self.dim)),
            MetricKind::WeightedL2 { weights } => {
                // F(x, ξ) = (Σ |ξ_j|²/w_j²)^{1/2} / |x₀| — realized by an
                // inline evaluator since it divides by |x₀| instead of
                // multiplying.
                let w = weights.clone();
                let mut m = Self::blackbox(self.dim, move |x: &[C], xi: &[C]| {
                    let inv: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
                    l2w(&inv, xi) / x[0].norm()
                });
                m.flags.claims_strictly_convex = true;
                m.flags.claims_c1_in_fiber = true;
                Some(m)
            }
            MetricKind::TorusL1 => Some(Self::torus_teich()),
            MetricKind::TorusTeich => Some(Self::torus_l1()),
            MetricKind::Blackbox => None,
        }
    }
}

/// Knobs of the dual-metric optimizer.
#[derive(Debug, Clone, Copy)]
pub struct DualOpts {
    pub multistart: usize,
    pub max_iterations: usize,
    pub step_termination: f64,
    pub seed: u64,
    /// Route builtin metrics through the optimizer as well.
    pub force_blackbox: bool,
}

impl Default for DualOpts {
    fn default() -> Self {
        Self {
            multistart: 64,
            max_iterations: 200,
            step_termination: 1e-10,
            seed: 0,
            force_blackbox: false,
        }
    }
}

/// Outcome of a dual-metric computation.
#[derive(Debug, Clone)]
pub struct SupportResult {
    /// F(x, ξ).
    pub value: f64,
    /// Maximizer η on the G-unit sphere; `None` for ξ = 0.
    pub maximizer: Option<Vec<C>>,
    pub report: OptimizerReport,
    /// True when distinct maximizers attain the same value (flat facet).
    pub non_unique: bool,
}

#[derive(Debug, Clone, Default)]
pub struct OptimizerReport {
    pub iterations: usize,
    pub multistart_count: usize,
    /// Pessimistic bound on the distance to the true supremum.
    pub gap_estimate: f64,
}

fn is_zero_vec(v: &[C]) -> bool {
    v.iter().all(|c| c.norm() == 0.0)
}

fn re_pair(eta: &[C], xi: &[C]) -> f64 {
    eta.iter().zip(xi).map(|(a, b)| (a * b).re).sum()
}

/// F(x, ξ) = sup { Re(η·ξ) | G(x, η) = 1 } with maximizer.
pub fn dual_metric(
    g: &FinslerMetric,
    x: &[C],
    xi: &[C],
    opts: &DualOpts,
) -> Result<SupportResult, FinslerError> {
    if xi.len() != g.dim {
        return Err(FinslerError::DimensionMismatch);
    }
    if is_zero_vec(xi) {
        // F(x, 0) = 0 by homogeneity; no maximizer exists.
        return Ok(SupportResult {
            value: 0.0,
            maximizer: None,
            report: OptimizerReport::default(),
            non_unique: false,
        });
    }
    if !opts.force_blackbox {
        if let Some(res) = analytic_support(g, x, xi)? {
            return Ok(res);
        }
    }
    blackbox_support(g, x, xi, opts)
}

/// Closed-form support data for the builtin families.
fn analytic_support(
    g: &FinslerMetric,
    x: &[C],
    xi: &[C],
) -> Result<Option<SupportResult>, FinslerError> {
    let exact = |value: f64, maximizer: Vec<C>, non_unique: bool| SupportResult {
        value,
        maximizer: Some(maximizer),
        report: OptimizerReport { iterations: 0, multistart_count: 0, gap_estimate: 0.0 },
        non_unique,
    };
    let res = match &g.kind {
        MetricKind::L2 => {
            let f = xi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let eta = xi.iter().map(|c| c.conj() / f).collect();
            exact(f, eta, false)
        }
        MetricKind::L1 => {
            // dual of ℓ¹ is ℓ∞: put all mass on a largest component
            let (jmax, amax) = xi
                .iter()
                .map(|c| c.norm())
                .enumerate()
                .fold((0, 0.0), |acc, (j, a)| if a > acc.1 { (j, a) } else { acc });
            let ties = xi
                .iter()
                .filter(|c| (c.norm() - amax).abs() <= 1e-12 * amax)
                .count();
            let mut eta = vec![C::new(0.0, 0.0); g.dim];
            eta[jmax] = xi[jmax].conj() / amax;
            exact(amax, eta, ties > 1)
        }
        MetricKind::LInf => {
            // dual of ℓ∞ is ℓ¹: align every component's phase
            let f: f64 = xi.iter().map(|c| c.norm()).sum();
            let scale: f64 = xi.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let mut non_unique = false;
            let eta = xi
                .iter()
                .map(|c| {
                    let a = c.norm();
                    if a <= 1e-12 * scale {
                        // any phase works on a vanishing slot
                        non_unique = true;
                        C::new(1.0, 0.0)
                    } else {
                        c.conj() / a
                    }
                })
                .collect();
            exact(f, eta, non_unique)
        }
        MetricKind::WeightedL2 { weights } => {
            let ax = x[0].norm();
            if ax <= 0.0 {
                return Err(FinslerError::InvalidParameter("weighted metric needs |x₀| > 0"));
            }
            let inv: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
            let f = l2w(&inv, xi) / ax;
            let c = 1.0 / (ax * ax * f);
            let eta = xi
                .iter()
                .zip(weights)
                .map(|(z, w)| z.conj() * (c / (w * w)))
                .collect();
            exact(f, eta, false)
        }
        MetricKind::TorusL1 => {
            let im = x[0].im;
            if im <= 0.0 {
                return Err(FinslerError::InvalidParameter("torus metric needs Im τ > 0"));
            }
            let f = xi[0].norm() / (2.0 * im);
            let eta = vec![xi[0].conj() / (2.0 * xi[0].norm() * im)];
            exact(f, eta, false)
        }
        MetricKind::TorusTeich => {
            let im = x[0].im;
            if im <= 0.0 {
                return Err(FinslerError::InvalidParameter("torus metric needs Im τ > 0"));
            }
            let f = 2.0 * xi[0].norm() * im;
            let eta = vec![xi[0].conj() * (2.0 * im / xi[0].norm())];
            exact(f, eta, false)
        }
        MetricKind::Blackbox => return Ok(None),
    };
    Ok(Some(res))
}

/// Multistart compass search on the realified fiber. The objective is the
/// ray-quotient Re(ζ·ξ)/G(x, ζ), invariant under positive real scaling, so
/// the search is unconstrained away from ζ = 0 and the result is normalized
/// to the unit sphere at the end.
fn blackbox_support(
    g: &FinslerMetric,
    x: &[C],
    xi: &[C],
    opts: &DualOpts,
) -> Result<SupportResult, FinslerError> {
    let n = g.dim;
    let objective = |zeta: &[C]| -> f64 {
        let gv = g.evaluate(x, zeta);
        if gv <= 0.0 {
            f64::NEG_INFINITY
        } else {
            re_pair(zeta, xi) / gv
        }
    };

    struct StartOutcome {
        value: f64,
        eta: Vec<C>,
        iterations: usize,
        final_step: f64,
    }

    let run_start = |start_index: u64| -> StartOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(start_index));
        let mut zeta: Vec<C> = (0..n)
            .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        if is_zero_vec(&zeta) {
            zeta[0] = C::new(1.0, 0.0);
        }
        // normalize to the unit sphere so step sizes are comparable
        let g0 = g.evaluate(x, &zeta);
        if g0 > 0.0 {
            for c in zeta.iter_mut() {
                *c /= g0;
            }
        }
        let mut best = objective(&zeta);
        let mut step = 0.5;
        let mut iterations = 0;
        while iterations < opts.max_iterations && step > opts.step_termination {
            iterations += 1;
            let mut improved = false;
            // 4n coordinate polls, 2n per-coordinate phase rotations
            // (tangential moves that leave every modulus fixed, needed to
            // escape corners of polyhedral unit spheres), and 2n random
            // directions per sweep
            for k in 0..(4 * n + 2 * n + 2 * n) {
                let mut cand = zeta.clone();
                if k < 4 * n {
                    let slot = k / 4;
                    let delta = match k % 4 {
                        0 => C::new(step, 0.0),
                        1 => C::new(-step, 0.0),
                        2 => C::new(0.0, step),
                        _ => C::new(0.0, -step),
                    };
                    cand[slot] += delta;
                } else if k < 4 * n + 2 * n {
                    let slot = (k - 4 * n) / 2;
                    let angle = if k % 2 == 0 { step } else { -step };
                    cand[slot] *= C::from_polar(1.0, angle);
                } else {
                    for c in cand.iter_mut() {
                        *c += C::new(rng.gen_range(-step..step), rng.gen_range(-step..step));
                    }
                }
                let v = objective(&cand);
                if v > best {
                    // sufficient-decrease forcing: only improvements
                    // commensurate with the step keep it from shrinking,
                    // so marginal random-poll gains cannot stall refinement
                    if v > best + 1e-4 * step * step {
                        improved = true;
                    }
                    best = v;
                    zeta = cand;
                }
            }
            // pattern-search step control: expand on a successful sweep,
            // contract on a failed one
            if improved {
                step = (step * 2.0).min(0.5);
            } else {
                step *= 0.5;
            }
        }
        let gv = g.evaluate(x, &zeta);
        let eta: Vec<C> = zeta.iter().map(|c| c / gv).collect();
        StartOutcome { value: best, eta, iterations, final_step: step }
    };

    let outcomes: Vec<StartOutcome> = (0..opts.multistart as u64).map(run_start).collect();
    let best = outcomes
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or(FinslerError::OptimizerNoConvergence { best: f64::NEG_INFINITY })?;
    if !best.value.is_finite() {
        return Err(FinslerError::OptimizerNoConvergence { best: best.value });
    }
    // Near-optimal starts that landed far apart indicate a flat facet.
    let tol_val = 1e-5 * (1.0 + best.value.abs());
    let non_unique = outcomes.iter().any(|o| {
        o.value >= best.value - tol_val
            && o.eta
                .iter()
                .zip(&best.eta)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                > 1e-2
    });
    let spread = outcomes
        .iter()
        .map(|o| best.value - o.value)
        .filter(|d| *d < tol_val)
        .fold(0.0, f64::max);
    Ok(SupportResult {
        value: best.value,
        maximizer: Some(best.eta.clone()),
        report: OptimizerReport {
            iterations: best.iterations,
            multistart_count: opts.multistart,
            gap_estimate: best.final_step.max(spread),
        },
        non_unique,
    })
}

/// The maximizer η_{x,ξ} on the G-unit sphere. Errors when the support is
/// detectably non-unique (possible only for non-strictly-convex G).
pub fn supporting_functional(
    g: &FinslerMetric,
    x: &[C],
    xi: &[C],
) -> Result<Vec<C>, FinslerError> {
    let res = dual_metric(g, x, xi, &DualOpts::default())?;
    if res.non_unique {
        return Err(FinslerError::NonUniqueSupport);
    }
    res.maximizer.ok_or(FinslerError::ZeroVector)
}

/// d/dt F(x, ξ + t h) at t = 0, which equals Re(η₀·h) for the supporting
/// functional η₀ of ξ.
pub fn directional_derivative_dual(
    g: &FinslerMetric,
    x: &[C],
    xi: &[C],
    h: &[C],
) -> Result<f64, FinslerError> {
    let eta0 = supporting_functional(g, x, xi)?;
    Ok(re_pair(&eta0, h))
}

/// First-order prediction of F(x+Δx, ξ+Δξ) − F(x, ξ):
/// −F(x,ξ)·2Re(A_{x,η₀}(Δx)) + Re(η₀·Δξ).
pub fn royden_expansion(
    g: &FinslerMetric,
    x: &[C],
    xi: &[C],
    dx: &[C],
    dxi: &[C],
) -> Result<f64, FinslerError> {
    let res = dual_metric(g, x, xi, &DualOpts::default())?;
    let eta0 = res.maximizer.ok_or(FinslerError::ZeroVector)?;
    let a = g.x_derivative(x, &eta0)?;
    let a_dx: C = a.iter().zip(dx).map(|(c, d)| c * d).sum();
    Ok(-res.value * 2.0 * a_dx.re + re_pair(&eta0, dxi))
}

/// Report of the homogeneity / convexity / strictness probe.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub homogeneity_max_err: f64,
    pub convexity_violations: usize,
    /// Pairs of distinct unit vectors whose midpoint stays on the sphere
    /// (within the strictness margin), i.e. witnesses against strictness.
    pub strict_convexity_witnesses: Vec<(Vec<C>, Vec<C>)>,
    /// Smallest observed 1 − G(midpoint) over pairs at fiber distance ≥ ε,
    /// an estimate of the uniform-convexity modulus δ(ε) at ε = 0.5.
    pub uniform_convexity_modulus: f64,
}

impl ConvexityReport {
    pub fn is_strict(&self) -> bool {
        self.strict_convexity_witnesses.is_empty()
    }
}

/// Samples homogeneity, the triangle inequality, and midpoint strictness.
pub fn convexity_probe(g: &FinslerMetric, x: &[C], samples: usize, seed: u64) -> ConvexityReport {
    let n = g.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rand_fiber = |rng: &mut ChaCha8Rng| -> Vec<C> {
        loop {
            let v: Vec<C> = (0..n)
                .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            if !is_zero_vec(&v) {
                return v;
            }
        }
    };
    let unit = |g: &FinslerMetric, v: &[C]| -> Vec<C> {
        let s = g.evaluate(x, v);
        v.iter().map(|c| c / s).collect()
    };

    let mut homogeneity_max_err: f64 = 0.0;
    let mut convexity_violations = 0;
    let mut witnesses: Vec<(Vec<C>, Vec<C>)> = Vec::new();
    let mut modulus = f64::INFINITY;
    const EPS_SEPARATION: f64 = 0.5;

    let probe_midpoint = |g: &FinslerMetric, uv: &[C], uw: &[C], witnesses: &mut Vec<(Vec<C>, Vec<C>)>, modulus: &mut f64| {
        let dist = uv
            .iter()
            .zip(uw)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if dist > 1e-6 {
            let mid: Vec<C> = uv.iter().zip(uw).map(|(a, b)| (a + b) * 0.5).collect();
            let gap = 1.0 - g.evaluate(x, &mid);
            if gap <= tolerances::STRICT_CONVEXITY_MARGIN && witnesses.len() < 4 {
                witnesses.push((uv.to_vec(), uw.to_vec()));
            }
            if dist >= EPS_SEPARATION {
                *modulus = modulus.min(gap);
            }
        }
    };

    // deterministic facet probes: pairs of distinct basis directions (with
    // a phase-rotated variant) witness flat facets that random sampling
    // almost surely misses
    for i in 0..n {
        for j in (i + 1)..n {
            for phase in [C::new(1.0, 0.0), C::new(0.0, 1.0)] {
                let mut ev = vec![C::new(0.0, 0.0); n];
                let mut ew = vec![C::new(0.0, 0.0); n];
                ev[i] = C::new(1.0, 0.0);
                ew[j] = phase;
                let uv = unit(g, &ev);
                let uw = unit(g, &ew);
                probe_midpoint(g, &uv, &uw, &mut witnesses, &mut modulus);
            }
        }
    }

    for _ in 0..samples {
        let v = rand_fiber(&mut rng);
        let w = rand_fiber(&mut rng);
        // complex homogeneity
        let alpha = C::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let scaled: Vec<C> = v.iter().map(|c| c * alpha).collect();
        let lhs = g.evaluate(x, &scaled);
        let rhs = alpha.norm() * g.evaluate(x, &v);
        let err = (lhs - rhs).abs() / (1.0 + rhs);
        homogeneity_max_err = homogeneity_max_err.max(err);
        // triangle inequality
        let sum: Vec<C> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
        if g.evaluate(x, &sum) > g.evaluate(x, &v) + g.evaluate(x, &w) + 1e-12 {
            convexity_violations += 1;
        }
        // midpoint strictness on the unit sphere
        let uv = unit(g, &v);
        let uw = unit(g, &w);
        probe_midpoint(g, &uv, &uw, &mut witnesses, &mut modulus);
    }
    ConvexityReport {
        homogeneity_max_err,
        convexity_violations,
        strict_convexity_witnesses: witnesses,
        uniform_convexity_modulus: if modulus.is_finite() { modulus } else { 0.0 },
    }
}

/// Max relative |G − G**| over a sampled grid of fiber points, where
/// G** is the dual of the dual. The intermediate dual F always uses the
/// closed form when one exists (so that `force_blackbox` exercises the
/// optimizer on exactly one level); a metric with no closed-form dual gets
/// a nested optimizer with a reduced per-evaluation budget, since every
/// outer objective evaluation pays for a full inner maximization.
pub fn reflexive_duality_gap(
    g: &FinslerMetric,
    x: &[C],
    grid: usize,
    seed: u64,
    opts: &DualOpts,
) -> Result<f64, FinslerError> {
    let n = g.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xc = x.to_vec();
    let f_metric: FinslerMetric = match g.analytic_dual() {
        Some(d) => d,
        None => {
            let base = g.clone();
            let inner = DualOpts {
                multistart: 8,
                max_iterations: 100,
                force_blackbox: false,
                ..*opts
            };
            let xcap = xc.clone();
            FinslerMetric::blackbox(n, move |_x, xi| {
                dual_metric(&base, &xcap, xi, &inner).map(|r| r.value).unwrap_or(f64::NAN)
            })
        }
    };
    let mut max_rel: f64 = 0.0;
    for _ in 0..grid {
        let eta: Vec<C> = (0..n)
            .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        if is_zero_vec(&eta) {
            continue;
        }
        let g_val = g.evaluate(x, &eta);
        let g_star_star = dual_metric(&f_metric, x, &eta, opts)?.value;
        max_rel = max_rel.max((g_val - g_star_star).abs() / g_val.max(1e-300));
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn r(x: f64) -> C {
        C::new(x, 0.0)
    }

    const NO_X: &[C] = &[];

    #[test]
    fn l2_dual_is_l2_with_known_maximizer() {
        let g = FinslerMetric::l2(2);
        let res = dual_metric(&g, NO_X, &[r(3.0), r(4.0)], &DualOpts::default()).unwrap();
        assert_relative_eq!(res.value, 5.0, max_relative = 1e-14);
        let m = res.maximizer.unwrap();
        assert!((m[0] - r(0.6)).norm() < 1e-14 && (m[1] - r(0.8)).norm() < 1e-14);
    }

    #[test]
    fn l1_dual_is_linf() {
        let g = FinslerMetric::l1(3);
        let xi = [r(1.0), c(0.0, 2.0), r(-3.0)];
        let res = dual_metric(&g, NO_X, &xi, &DualOpts::default()).unwrap();
        assert_relative_eq!(res.value, 3.0, max_relative = 1e-14);
        // maximizer on the ℓ¹ sphere achieving Re(η·ξ) = 3
        let m = res.maximizer.unwrap();
        assert_relative_eq!(re_pair(&m, &xi), 3.0, max_relative = 1e-14);
        assert_relative_eq!(g.evaluate(NO_X, &m), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn torus_l1_dual_matches_teich() {
        let g = FinslerMetric::torus_l1();
        let tau = [c(0.7, 1.3)];
        let mu = [c(0.4, -2.1)];
        let res = dual_metric(&g, &tau, &mu, &DualOpts::default()).unwrap();
        assert_relative_eq!(res.value, mu[0].norm() / (2.0 * 1.3), max_relative = 1e-14);
        let m = res.maximizer.unwrap();
        assert_relative_eq!(g.evaluate(&tau, &m), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn torus_supporting_functional_at_i() {
        // ξ = 1 at τ = i: maximizer q = 1/2 on the sphere 2|q| = 1
        let g = FinslerMetric::torus_l1();
        let eta = supporting_functional(&g, &[c(0.0, 1.0)], &[r(1.0)]).unwrap();
        assert!((eta[0] - r(0.5)).norm() < 1e-14);
    }

    #[test]
    fn zero_vector_returns_zero_value() {
        let g = FinslerMetric::l2(2);
        let res = dual_metric(&g, NO_X, &[r(0.0), r(0.0)], &DualOpts::default()).unwrap();
        assert_eq!(res.value, 0.0);
        assert!(res.maximizer.is_none());
    }

    #[test]
    fn l1_tie_reports_non_unique_support() {
        let g = FinslerMetric::l1(2);
        let err = supporting_functional(&g, NO_X, &[r(1.0), r(1.0)]).unwrap_err();
        assert_eq!(err, FinslerError::NonUniqueSupport);
    }

    #[test]
    fn blackbox_matches_analytic_l2() {
        let g = FinslerMetric::l2(2).as_blackbox();
        let xi = [c(1.0, 0.5), c(-0.3, 0.8)];
        let opts = DualOpts { seed: 11, ..Default::default() };
        let res = dual_metric(&g, NO_X, &xi, &opts).unwrap();
        let exact = xi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!((res.value - exact).abs() < 1e-3 * exact, "{} vs {}", res.value, exact);
    }

    #[test]
    fn blackbox_matches_analytic_l1() {
        let g = FinslerMetric::l1(3).as_blackbox();
        let xi = [r(1.0), c(0.0, 2.0), r(-3.0)];
        let opts = DualOpts { seed: 5, ..Default::default() };
        let res = dual_metric(&g, NO_X, &xi, &opts).unwrap();
        assert!((res.value - 3.0).abs() < 1e-3, "{}", res.value);
    }

    #[test]
    fn directional_derivative_euler_and_orthogonal() {
        let g = FinslerMetric::l2(2);
        let xi = [r(1.0), r(0.0)];
        // h = ξ → F(x, ξ) by homogeneity
        let d = directional_derivative_dual(&g, NO_X, &xi, &xi).unwrap();
        assert_relative_eq!(d, 1.0, max_relative = 1e-12);
        // orthogonal direction → 0
        let d = directional_derivative_dual(&g, NO_X, &xi, &[r(0.0), r(1.0)]).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn directional_derivative_matches_fd_weighted() {
        let g = FinslerMetric::weighted_l2(vec![1.0, 2.0]).unwrap();
        let x = [c(0.8, -0.4)];
        let xi = [c(0.3, 1.1), c(-0.7, 0.2)];
        let h = [c(0.5, -0.2), c(0.1, 0.9)];
        let d = directional_derivative_dual(&g, &x, &xi, &h).unwrap();
        let f = |t: f64| -> f64 {
            let shifted: Vec<C> = xi.iter().zip(&h).map(|(a, b)| a + b * t).collect();
            dual_metric(&g, &x, &shifted, &DualOpts::default()).unwrap().value
        };
        let step = 1e-5;
        let fd = (f(step) - f(-step)) / (2.0 * step);
        assert!((d - fd).abs() < 1e-6, "{d} vs {fd}");
    }

    #[test]
    fn royden_expansion_zero_displacement() {
        let g = FinslerMetric::torus_l1();
        let p = royden_expansion(&g, &[c(0.0, 1.0)], &[r(1.0)], &[r(0.0)], &[r(0.0)]).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn royden_expansion_torus_scale_halving() {
        let g = FinslerMetric::torus_l1();
        let x = [c(0.3, 1.2)];
        let xi = [c(0.9, -0.5)];
        let dx0 = [c(0.4, 0.7)];
        let dxi0 = [c(-0.6, 0.2)];
        let f0 = dual_metric(&g, &x, &xi, &DualOpts::default()).unwrap().value;
        let mut prev = f64::INFINITY;
        for k in 0..3 {
            let s = 1e-2 * 0.5_f64.powi(k);
            let dx = [dx0[0] * s];
            let dxi = [dxi0[0] * s];
            let pred = royden_expansion(&g, &x, &xi, &dx, &dxi).unwrap();
            let actual = dual_metric(&g, &[x[0] + dx[0]], &[xi[0] + dxi[0]], &DualOpts::default())
                .unwrap()
                .value;
            let rel = ((actual - f0) - pred).abs() / s;
            assert!(rel < prev + 1e-12, "scale {s}: {rel} vs {prev}");
            prev = rel;
        }
        // the normalized residual must vanish with the scale
        assert!(prev < 1e-2);
    }

    #[test]
    fn convexity_probe_l2_strict_l1_flat() {
        let l2 = FinslerMetric::l2(2);
        let rep = convexity_probe(&l2, NO_X, 400, 3);
        assert!(rep.homogeneity_max_err < 1e-10);
        assert_eq!(rep.convexity_violations, 0);
        assert!(rep.is_strict());
        assert!(rep.uniform_convexity_modulus > 0.0);

        let l1 = FinslerMetric::l1(2);
        let rep = convexity_probe(&l1, NO_X, 400, 3);
        assert_eq!(rep.convexity_violations, 0);
        assert!(!rep.is_strict(), "ℓ¹ has flat facets");
    }

    #[test]
    fn convexity_probe_torus_strict() {
        let g = FinslerMetric::torus_l1();
        let rep = convexity_probe(&g, &[c(0.2, 1.5)], 400, 9);
        assert_eq!(rep.convexity_violations, 0);
        assert!(rep.is_strict());
    }

    #[test]
    fn reflexive_duality_analytic_paths() {
        let opts = DualOpts { seed: 21, ..Default::default() };
        let l2 = FinslerMetric::l2(2);
        assert!(reflexive_duality_gap(&l2, NO_X, 50, 1, &opts).unwrap() < 1e-12);
        let torus = FinslerMetric::torus_l1();
        assert!(reflexive_duality_gap(&torus, &[c(0.1, 0.9)], 50, 1, &opts).unwrap() < 1e-12);
    }

    #[test]
    fn reflexive_duality_optimizer_l1() {
        // analytic ℓ∞ intermediate, second dual through the optimizer
        let g = FinslerMetric::l1(2);
        let opts = DualOpts { seed: 4, force_blackbox: true, ..Default::default() };
        let gap = reflexive_duality_gap(&g, NO_X, 10, 2, &opts).unwrap();
        assert!(gap < 1e-3, "{gap}");
    }

    #[test]
    fn reflexive_duality_nested_blackbox() {
        // no closed-form dual at all: both levels optimize on reduced
        // budgets, so only a coarse bound is meaningful
        let g = FinslerMetric::l2(2).as_blackbox();
        let opts = DualOpts {
            seed: 8,
            multistart: 8,
            max_iterations: 100,
            ..Default::default()
        };
        let gap = reflexive_duality_gap(&g, NO_X, 3, 2, &opts).unwrap();
        assert!(gap < 1e-2, "{gap}");
    }

    #[test]
    fn dual_homogeneity_property() {
        let g = FinslerMetric::l1(3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let xi: Vec<C> = (0..3)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let alpha = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if is_zero_vec(&xi) || alpha.norm() == 0.0 {
                continue;
            }
            let f1 = dual_metric(&g, NO_X, &xi, &DualOpts::default()).unwrap().value;
            let scaled: Vec<C> = xi.iter().map(|z| z * alpha).collect();
            let f2 = dual_metric(&g, NO_X, &scaled, &DualOpts::default()).unwrap().value;
            assert!((f2 - alpha.norm() * f1).abs() < 1e-9 * (1.0 + f2));
        }
    }
}
