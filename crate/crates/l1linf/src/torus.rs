//! The fully explicit genus-1 Teichmüller geometry.
//!
//! The Teichmüller space of tori is the upper half-plane ℍ, with the
//! cotangent fiber trivialized by a coordinate q and the tangent fiber by a
//! coordinate μ. Every object — norms, the Teichmüller–Beltrami map, the
//! ∂-derivatives, the Levi matrices — has a closed form:
//!
//! - n(τ, q) = 2|q|·Im τ and τ(τ, μ) = |μ|/(2 Im τ) (the Poincaré metric of
//!   curvature −4),
//! - TB(τ, q) = (τ, 4q̄·Im τ²) with inverse (τ, μ) ↦ (τ, μ̄/(4 Im τ²)),
//! - ∂n = −i|q| dτ + Im τ·(q̄/|q|) dq and the squared versions below.
//!
//! Finite differences appear only as independent oracles; the infinitesimal
//! duality and Hamiltonian-section identities are verified through the
//! generic machinery of [`crate::jet`], not by substituting closed forms on
//! both sides.

use nalgebra::Matrix2;
use thiserror::Error;

use crate::jet::{
    self, BundleKind, JetError, ScalarFieldOnCotangent, SecondOrderPoint,
};
use crate::C;

#[derive(Debug, Error, PartialEq)]
pub enum TorusError {
    #[error("Im τ = {0} is not strictly positive")]
    NotInUpperHalfPlane(f64),
    #[error("operation needs fiber role {expected:?}, got {got:?}")]
    WrongFiberRole { expected: FiberRole, got: FiberRole },
    #[error("differential undefined on the zero section")]
    ZeroDifferential,
    #[error("point is not on the unit sphere bundle")]
    NotOnSphere,
    #[error("grid touches the boundary of ℍ")]
    GridTouchesBoundary,
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Whether the fiber coordinate is a tangent (Beltrami) or cotangent
/// (quadratic-differential) coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberRole {
    TangentMu,
    CotangentQ,
}

/// A point of the trivialized (co)tangent bundle ℍ × ℂ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusFiberPoint {
    pub tau: C,
    pub fiber: C,
    pub role: FiberRole,
}

const MIN_IM_TAU: f64 = 1e-12;

impl TorusFiberPoint {
    pub fn new(tau: C, fiber: C, role: FiberRole) -> Result<Self, TorusError> {
        if tau.im <= MIN_IM_TAU {
            return Err(TorusError::NotInUpperHalfPlane(tau.im));
        }
        Ok(Self { tau, fiber, role })
    }

    pub fn cotangent(tau: C, q: C) -> Result<Self, TorusError> {
        Self::new(tau, q, FiberRole::CotangentQ)
    }

    pub fn tangent(tau: C, mu: C) -> Result<Self, TorusError> {
        Self::new(tau, mu, FiberRole::TangentMu)
    }

    fn expect_role(&self, expected: FiberRole) -> Result<(), TorusError> {
        if self.role == expected {
            Ok(())
        } else {
            Err(TorusError::WrongFiberRole { expected, got: self.role })
        }
    }

    fn nonzero_fiber(&self) -> Result<(), TorusError> {
        if self.fiber.norm() == 0.0 {
            Err(TorusError::ZeroDifferential)
        } else {
            Ok(())
        }
    }
}

/// n(τ, q) = 2|q|·Im τ.
pub fn l1_norm(p: &TorusFiberPoint) -> Result<f64, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    Ok(2.0 * p.fiber.norm() * p.tau.im)
}

/// τ(τ, μ) = |μ|/(2 Im τ).
pub fn teich_metric(p: &TorusFiberPoint) -> Result<f64, TorusError> {
    p.expect_role(FiberRole::TangentMu)?;
    Ok(p.fiber.norm() / (2.0 * p.tau.im))
}

/// TB(τ, q) = (τ, 4q̄·Im τ²).
pub fn tb_map(p: &TorusFiberPoint) -> Result<TorusFiberPoint, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    let im = p.tau.im;
    TorusFiberPoint::tangent(p.tau, p.fiber.conj() * (4.0 * im * im))
}

/// The closed-form inverse of TB: (τ, μ) ↦ (τ, μ̄/(4 Im τ²)).
pub fn tb_inverse(p: &TorusFiberPoint) -> Result<TorusFiberPoint, TorusError> {
    p.expect_role(FiberRole::TangentMu)?;
    let im = p.tau.im;
    TorusFiberPoint::cotangent(p.tau, p.fiber.conj() / (4.0 * im * im))
}

/// TB₀(τ, q) = n⁻¹·TB = (τ, 2(q̄/|q|)·Im τ), always on the unit sphere.
pub fn tb0_map(p: &TorusFiberPoint) -> Result<TorusFiberPoint, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    p.nonzero_fiber()?;
    TorusFiberPoint::tangent(p.tau, p.fiber.conj() / p.fiber.norm() * (2.0 * p.tau.im))
}

/// ∂n|_(τ,q) = −i|q| dτ + Im τ·(q̄/|q|) dq as a T*T*𝒯₁ tuple.
pub fn d_n(p: &TorusFiberPoint) -> Result<SecondOrderPoint, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    p.nonzero_fiber()?;
    let a = p.fiber.norm();
    Ok(SecondOrderPoint::scalar(
        BundleKind::TStarTStar,
        p.tau,
        p.fiber,
        C::new(0.0, -a),
        p.fiber.conj() / a * p.tau.im,
    ))
}

/// ∂τ|_(τ,μ) = −(|μ|/(4i Im τ²)) dτ + (μ̄/(4|μ| Im τ)) dμ as a T*T𝒯₁ tuple.
pub fn d_tau(p: &TorusFiberPoint) -> Result<SecondOrderPoint, TorusError> {
    p.expect_role(FiberRole::TangentMu)?;
    p.nonzero_fiber()?;
    let a = p.fiber.norm();
    let im = p.tau.im;
    Ok(SecondOrderPoint::scalar(
        BundleKind::TStarT,
        p.tau,
        p.fiber,
        C::new(0.0, a / (4.0 * im * im)),
        p.fiber.conj() / (4.0 * a * im),
    ))
}

/// ∂n²|_(τ,q) = −4i|q|²·Im τ dτ + 4q̄·Im τ² dq; smooth across q = 0.
pub fn d_n2(p: &TorusFiberPoint) -> Result<SecondOrderPoint, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    let im = p.tau.im;
    Ok(SecondOrderPoint::scalar(
        BundleKind::TStarTStar,
        p.tau,
        p.fiber,
        C::new(0.0, -4.0 * p.fiber.norm_sqr() * im),
        p.fiber.conj() * (4.0 * im * im),
    ))
}

/// ∂τ²|_(τ,μ) = −(|μ|²/(4i Im τ³)) dτ + (μ̄/(4 Im τ²)) dμ.
pub fn d_tau2(p: &TorusFiberPoint) -> Result<SecondOrderPoint, TorusError> {
    p.expect_role(FiberRole::TangentMu)?;
    let im = p.tau.im;
    Ok(SecondOrderPoint::scalar(
        BundleKind::TStarT,
        p.tau,
        p.fiber,
        C::new(0.0, p.fiber.norm_sqr() / (4.0 * im * im * im)),
        p.fiber.conj() / (4.0 * im * im),
    ))
}

/// Max componentwise gap in the infinitesimal duality identity
/// Swh ∘ dual⁻¹(−∂n²|_(τ,q)) = ∂τ²|_TB(τ,q), with the left side routed
/// through the generic switch/dualize machinery. Coordinates here grow
/// like |q|²·Im τ, so each component gap is measured relative to its
/// magnitude (plus one) to stay meaningful across scales.
pub fn infinitesimal_duality_gap(p: &TorusFiberPoint) -> Result<f64, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    p.nonzero_fiber()?;
    let mut minus = d_n2(p)?;
    minus.jet1[0] = -minus.jet1[0];
    minus.jet2[0] = -minus.jet2[0];
    let lhs = jet::switch(&jet::dualize_inverse(&minus)?)?;
    let rhs = d_tau2(&tb_map(p)?)?;
    let rel = |a: C, b: C| (a - b).norm() / (1.0 + b.norm());
    Ok(rel(lhs.base[0], rhs.base[0])
        .max(rel(lhs.fiber[0], rhs.fiber[0]))
        .max(rel(lhs.jet1[0], rhs.jet1[0]))
        .max(rel(lhs.jet2[0], rhs.jet2[0])))
}

/// Gap in the canonical-section identity: the horizontal part of
/// −½·𝒳_{n²}|_(τ,q) must be the TB image 4q̄·Im τ², with 𝒳 built by the
/// generic Hamiltonian machinery from the analytic gradient ∂n².
pub fn hamiltonian_duality_check(p: &TorusFiberPoint) -> Result<f64, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    p.nonzero_fiber()?;
    let n2 = ScalarFieldOnCotangent::with_gradient(
        |z, w| {
            let v = 2.0 * w[0].norm() * z[0].im;
            C::new(v * v, 0.0)
        },
        |z, w| {
            let im = z[0].im;
            (
                vec![C::new(0.0, -4.0 * w[0].norm_sqr() * im)],
                vec![w[0].conj() * (4.0 * im * im)],
            )
        },
    );
    let x = jet::hamiltonian_field(&n2, &[p.tau], &[p.fiber])?;
    // −½𝒳 projected by DΠ†: base stays τ, horizontal slot is the α block.
    let horizontal = -x.jet1[0] * 0.5;
    let target = tb_map(p)?;
    Ok((horizontal - target.fiber).norm() / (1.0 + target.fiber.norm())
        + (x.base[0] - target.tau).norm() / (1.0 + target.tau.norm()))
}

/// Closed-form Levi data of the L¹ norm at (τ, q).
#[derive(Debug, Clone)]
pub struct LeviN {
    /// The full Levi matrix (1/(2|q|))·[[0, −iq],[iq̄, Im τ]].
    pub matrix: Matrix2<C>,
    /// The bracketed matrix [[0, −iq],[iq̄, Im τ]] before the 1/(2|q|) scale.
    pub unscaled: Matrix2<C>,
    /// λ± = (Im τ ± √(Im τ² + 4|q|²))/2, the eigenvalues of `unscaled`.
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

impl LeviN {
    /// Levi form value Σ_ij M_ij v_i v̄_j of the full matrix on (v_τ, v_q),
    /// the convention matching M_ij = ∂²n/∂z_i∂z̄_j.
    pub fn form_value(&self, v: (C, C)) -> f64 {
        let (a, b) = v;
        let m = &self.matrix;
        (m[(0, 0)] * a * a.conj()
            + m[(0, 1)] * a * b.conj()
            + m[(1, 0)] * b * a.conj()
            + m[(1, 1)] * b * b.conj())
        .re
    }
}

/// Levi matrix of n at (τ, q), its closed-form eigenvalues, and signature.
pub fn levi_n(p: &TorusFiberPoint) -> Result<LeviN, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    p.nonzero_fiber()?;
    let q = p.fiber;
    let im = p.tau.im;
    let zero = C::new(0.0, 0.0);
    let unscaled = Matrix2::new(zero, -C::i() * q, C::i() * q.conj(), C::new(im, 0.0));
    let scale = 1.0 / (2.0 * q.norm());
    let matrix = unscaled.map(|e| e * scale);
    let disc = (im * im + 4.0 * q.norm_sqr()).sqrt();
    Ok(LeviN {
        matrix,
        unscaled,
        lambda_plus: (im + disc) / 2.0,
        lambda_minus: (im - disc) / 2.0,
    })
}

/// Levi matrix of the Teichmüller metric τ at (τ, μ); positive definite.
pub fn levi_tau(p: &TorusFiberPoint) -> Result<Matrix2<C>, TorusError> {
    p.expect_role(FiberRole::TangentMu)?;
    p.nonzero_fiber()?;
    let mu = p.fiber;
    let a = mu.norm();
    let im = p.tau.im;
    Ok(Matrix2::new(
        C::new(a / (4.0 * im * im * im), 0.0),
        C::i() * mu / (8.0 * a * im * im),
        -C::i() * mu.conj() / (8.0 * a * im * im),
        C::new(1.0 / (8.0 * a * im), 0.0),
    ))
}

/// Both leading principal minors of `levi_tau` are positive.
pub fn levi_tau_positive_definite(m: &Matrix2<C>) -> bool {
    let m00 = m[(0, 0)].re;
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    m00 > 0.0 && det > 0.0
}

/// Result of the horizontal CR check of TB₀ at a unit-sphere point.
#[derive(Debug, Clone, Copy)]
pub struct HorizontalCr {
    /// |D TB₀(horizontal) − (Im τ, −4iq̄·Im τ²)| componentwise max.
    pub deviation: f64,
    /// |D TB₀(i·horizontal) − i·D TB₀(horizontal)| componentwise max.
    pub linearity_defect: f64,
}

fn tb0_fiber(tau: C, q: C) -> C {
    q.conj() / q.norm() * (2.0 * tau.im)
}

/// Central real-coordinate finite difference of TB₀ along a direction
/// (v_τ, v_q) at (τ, q), returned as the pair of derivatives (base, fiber).
fn d_tb0_fd(tau: C, q: C, v: (C, C), h: f64) -> (C, C) {
    let at = |s: f64| -> (C, C) {
        let t = tau + v.0 * s;
        let qq = q + v.1 * s;
        (t, tb0_fiber(t, qq))
    };
    let (tp, fp) = at(h);
    let (tm, fm) = at(-h);
    ((tp - tm) / (2.0 * h), (fp - fm) / (2.0 * h))
}

/// Verifies that D TB₀ restricted to the horizontal direction
/// (Im τ)∂_τ + iq∂_q is ℂ-linear and maps it to
/// (Im τ)∂_τ − 4iq̄·Im τ²·∂_μ, by central finite differences.
pub fn horizontal_cr_check(p: &TorusFiberPoint) -> Result<HorizontalCr, TorusError> {
    p.expect_role(FiberRole::CotangentQ)?;
    p.nonzero_fiber()?;
    if (l1_norm(p)? - 1.0).abs() > 1e-9 {
        return Err(TorusError::NotOnSphere);
    }
    let tau = p.tau;
    let q = p.fiber;
    let im = tau.im;
    let horiz = (C::new(im, 0.0), C::i() * q);
    let h = 1e-6;
    let d = d_tb0_fd(tau, q, horiz, h);
    let expect = (C::new(im, 0.0), -C::new(0.0, 4.0) * q.conj() * im * im);
    let deviation = (d.0 - expect.0).norm().max((d.1 - expect.1).norm());
    // ℂ-linearity: derivative along i·(direction) must be i·(derivative)
    let rotated = (C::i() * horiz.0, C::i() * horiz.1);
    let di = d_tb0_fd(tau, q, rotated, h);
    let linearity_defect = (di.0 - C::i() * d.0)
        .norm()
        .max((di.1 - C::i() * d.1).norm());
    Ok(HorizontalCr { deviation, linearity_defect })
}

/// Max |K + 4| of the 5-point FD Gaussian curvature of the Poincaré metric
/// λ(τ) = 1/(2 Im τ) over the interior of the rectangle
/// [x0, x1] × [y0, y1] ⊂ ℍ at spacing h. The boundary margin must exceed
/// five spacings.
pub fn curvature_check(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<f64, TorusError> {
    if y0 <= 5.0 * h {
        return Err(TorusError::GridTouchesBoundary);
    }
    curvature_defect(|_x, y| 1.0 / (2.0 * y), -4.0, x0, x1, y0, y1, h)
}

/// Shared FD curvature scan: K = −(Δ log λ)/λ², compared against `target`.
pub fn curvature_defect(
    lambda: impl Fn(f64, f64) -> f64,
    target: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    h: f64,
) -> Result<f64, TorusError> {
    let nx = ((x1 - x0) / h).round() as usize;
    let ny = ((y1 - y0) / h).round() as usize;
    let log_l = |x: f64, y: f64| lambda(x, y).ln();
    let mut max_defect: f64 = 0.0;
    for i in 1..nx {
        for j in 1..ny {
            let x = x0 + i as f64 * h;
            let y = y0 + j as f64 * h;
            let lap = (log_l(x + h, y) + log_l(x - h, y) + log_l(x, y + h) + log_l(x, y - h)
                - 4.0 * log_l(x, y))
                / (h * h);
            let l = lambda(x, y);
            let k = -lap / (l * l);
            max_defect = max_defect.max((k - target).abs());
        }
    }
    Ok(max_defect)
}
