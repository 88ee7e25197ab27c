//! Quadratic differentials as sampled fields: L¹ norms, the variational
//! formula of Royden's lemma, Teichmüller–Beltrami differentials, the
//! L∞–L¹ pairing, and strict convexity of the unit sphere.
//!
//! Fields live on [`GridField`] grids; integrands of the form q̄/|q| exclude
//! nodes below a relative zero cutoff (the singularities are measure-zero
//! and the integrands bounded, so midpoint exclusion converges). All
//! integrals use the dxdy normalization.

use thiserror::Error;

use crate::grid::{GridError, GridField};
use crate::tolerances;
use crate::C;

#[derive(Debug, Error, PartialEq)]
pub enum QdiffError {
    #[error("differential is identically zero on the grid")]
    IdenticallyZero,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("input is not L¹-normalized")]
    NotNormalized,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// q(z) = Σ c_k z^k on a planar domain; on a torus only the constant term
/// is meaningful (periodic holomorphic functions are constant).
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialDifferential {
    pub coefficients: Vec<C>,
}

impl PolynomialDifferential {
    pub fn new(coefficients: Vec<C>) -> Self {
        Self { coefficients }
    }

    pub fn eval(&self, z: C) -> C {
        // Horner evaluation
        self.coefficients
            .iter()
            .rev()
            .fold(C::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| c.norm() == 0.0)
    }
}

/// Relative cutoff below which q-samples count as zeros of the zero set.
fn zero_cutoff(q: &GridField) -> f64 {
    tolerances::ZERO_SET_RELATIVE * q.sup_abs()
}

/// ‖q‖ = ∬ |q| dxdy by the midpoint rule.
pub fn l1_norm_grid(q: &GridField) -> Result<f64, QdiffError> {
    Ok(q.integrate(|_, s| C::new(s.norm(), 0.0))?.re)
}

/// ‖q₀ + tφ‖ for a complex step t.
fn shifted_l1_norm(q0: &GridField, phi: &GridField, t: C) -> Result<f64, QdiffError> {
    let mut field = q0.clone();
    for j in 0..q0.ny {
        for i in 0..q0.nx {
            let idx = j * q0.nx + i;
            if field.mask[idx] {
                field.samples[idx] = q0.sample(i, j) + t * phi.sample(i, j);
            }
        }
    }
    l1_norm_grid(&field)
}

/// The two coefficients of Royden's variational formula for
/// f(t) = ‖q₀ + tφ‖:
/// f(t) = f(0) + t·A + t̄·B + o(t) with
/// A = ½∬ q̄₀φ/|q₀|, B = ½∬ q₀φ̄/|q₀|; zero-set nodes are excluded.
pub fn l1_variation(q0: &GridField, phi: &GridField) -> Result<(C, C), QdiffError> {
    if !q0.same_grid(phi) {
        return Err(QdiffError::GridMismatch);
    }
    let eps = zero_cutoff(q0);
    if eps == 0.0 {
        return Err(QdiffError::IdenticallyZero);
    }
    let mut a_terms = Vec::new();
    let mut b_terms = Vec::new();
    for j in 0..q0.ny {
        for i in 0..q0.nx {
            if !q0.masked_in(i, j) {
                continue;
            }
            let q = q0.sample(i, j);
            if q.norm() < eps {
                continue;
            }
            let p = phi.sample(i, j);
            a_terms.push(q.conj() * p / q.norm());
            b_terms.push(q * p.conj() / q.norm());
        }
    }
    let area = q0.cell_area();
    Ok((
        crate::grid::tree_sum(&a_terms) * (0.5 * area),
        crate::grid::tree_sum(&b_terms) * (0.5 * area),
    ))
}

/// One row of the finite-difference convergence study of the variational
/// formula.
#[derive(Debug, Clone, Copy)]
pub struct VariationStep {
    pub t: f64,
    /// |[‖q₀+tφ‖ − ‖q₀‖]/t − 2Re(A+B)/2 …| at real t.
    pub real_residual: f64,
    /// Max residual of the full complex expansion over t on the circle of
    /// radius |t| (probed at the four phases ±1, ±i).
    pub circle_residual: f64,
}

#[derive(Debug, Clone)]
pub struct VariationReport {
    pub steps: Vec<VariationStep>,
    /// Empirical order from the first two real residuals, when meaningful.
    pub empirical_order: Option<f64>,
}

/// Compares the formula of [`l1_variation`] against finite differences of
/// the norm itself, at real steps and on small complex circles.
pub fn fd_check_l1_variation(
    q0: &GridField,
    phi: &GridField,
    steps: &[f64],
) -> Result<VariationReport, QdiffError> {
    if !q0.same_grid(phi) {
        return Err(QdiffError::GridMismatch);
    }
    let (a, b) = l1_variation(q0, phi)?;
    let f0 = l1_norm_grid(q0)?;
    let norm_at = |t: C| shifted_l1_norm(q0, phi, t);
    let mut rows = Vec::with_capacity(steps.len());
    for &t in steps {
        let fd = (norm_at(C::new(t, 0.0))? - f0) / t;
        // at real t the expansion gives f(t) − f(0) ≈ t·(A + B) with A+B real
        let real_residual = (fd - (a + b).re).abs();
        let mut circle_residual: f64 = 0.0;
        for phase in [C::new(1.0, 0.0), C::new(-1.0, 0.0), C::i(), -C::i()] {
            let tc = phase * t;
            let predicted = (tc * a + tc.conj() * b).re;
            let actual = norm_at(tc)? - f0;
            circle_residual = circle_residual.max((actual - predicted).abs() / t);
        }
        rows.push(VariationStep { t, real_residual, circle_residual });
    }
    let empirical_order = match rows.as_slice() {
        [first, second, ..]
            if second.real_residual > 0.0
                && first.real_residual > second.real_residual
                && second.t > 0.0 =>
        {
            Some(
                (first.real_residual / second.real_residual).ln()
                    / (first.t / second.t).ln(),
            )
        }
        _ => None,
    };
    Ok(VariationReport { steps: rows, empirical_order })
}

/// Recovers the t and t̄ coefficients of f(t) − f(0) from the four probes
/// t ∈ {s, −s, is, −is}: A+B from the real pair, A−B from the imaginary
/// pair.
pub fn phase_probe_coefficients(
    q0: &GridField,
    phi: &GridField,
    s: f64,
) -> Result<(C, C), QdiffError> {
    if !q0.same_grid(phi) {
        return Err(QdiffError::GridMismatch);
    }
    let g = |t: C| shifted_l1_norm(q0, phi, t);
    // f(t) − f(0) = tA + t̄B + o: real probes give s(A+B)+o, imaginary
    // probes give is(A−B)+o before taking the real part
    let sum = (g(C::new(s, 0.0))? - g(C::new(-s, 0.0))?) / (2.0 * s);
    let diff = (g(C::new(0.0, s))? - g(C::new(0.0, -s))?) / (2.0 * s);
    // sum = Re(A+B) but A+B is determined only through real data; recover
    // complex A, B from the two real numbers plus the formula structure:
    // f real ⇒ B = Ā, so A = (sum + i·diff)/… — see below.
    // With B = conj(A): tA + t̄Ā = 2Re(tA). Real t=s: 2s·Re A. So
    // Re A = sum/2. Imag t=is: 2Re(isA) = −2s·Im A ⇒ Im A = −diff/2.
    let a = C::new(sum / 2.0, -diff / 2.0);
    Ok((a, a.conj()))
}

/// The Teichmüller–Beltrami differential k·q̄/|q| with zero-set nodes set
/// to 0 and masked out of the essential-sup bookkeeping.
pub fn tb_differential(q: &GridField, k: f64) -> Result<GridField, QdiffError> {
    let eps = zero_cutoff(q);
    if eps == 0.0 {
        return Err(QdiffError::IdenticallyZero);
    }
    Ok(q.map(|_, s| {
        if s.norm() < eps {
            C::new(0.0, 0.0)
        } else {
            s.conj() / s.norm() * k
        }
    }))
}

/// ⟨μ, q⟩ = ∬ μ(z)q(z) dxdy.
pub fn pairing_mu_q(mu: &GridField, q: &GridField) -> Result<C, QdiffError> {
    if !mu.same_grid(q) {
        return Err(QdiffError::GridMismatch);
    }
    let mut terms = Vec::new();
    for j in 0..q.ny {
        for i in 0..q.nx {
            if q.masked_in(i, j) {
                terms.push(mu.sample(i, j) * q.sample(i, j));
            }
        }
    }
    Ok(crate::grid::tree_sum(&terms) * q.cell_area())
}

/// Outcome of the strict-convexity probe on a normalized pair.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityMargin {
    /// 2 − ‖q₁ + q₂‖, strictly positive for distinct normalized inputs.
    pub margin: f64,
    /// The equality-analysis diagnostic ∬ (1 − Re(q̄₁q₂/|q₁q₂|))|q₂|,
    /// zero exactly when the two differentials share phase a.e.
    pub phase_diagnostic: f64,
    /// Set when the pair is L¹-indistinguishable (the excluded equality
    /// case); margin is then ≈ 0 by construction.
    pub degenerate: bool,
}

/// 2 − ‖q₁+q₂‖ for unit-norm inputs, with the phase-alignment diagnostic.
pub fn strict_convexity_probe(
    q1: &GridField,
    q2: &GridField,
) -> Result<ConvexityMargin, QdiffError> {
    if !q1.same_grid(q2) {
        return Err(QdiffError::GridMismatch);
    }
    let n1 = l1_norm_grid(q1)?;
    let n2 = l1_norm_grid(q2)?;
    if (n1 - 1.0).abs() > 1e-9 || (n2 - 1.0).abs() > 1e-9 {
        return Err(QdiffError::NotNormalized);
    }
    let mut sum_terms = Vec::new();
    let mut diag_terms = Vec::new();
    let mut l1_dist_terms = Vec::new();
    let eps1 = zero_cutoff(q1);
    let eps2 = zero_cutoff(q2);
    for j in 0..q1.ny {
        for i in 0..q1.nx {
            if !q1.masked_in(i, j) {
                continue;
            }
            let a = q1.sample(i, j);
            let b = q2.sample(i, j);
            sum_terms.push(C::new((a + b).norm(), 0.0));
            l1_dist_terms.push(C::new((a - b).norm(), 0.0));
            if a.norm() >= eps1 && b.norm() >= eps2 {
                let cos = (a.conj() * b).re / (a.norm() * b.norm());
                diag_terms.push(C::new((1.0 - cos) * b.norm(), 0.0));
            }
        }
    }
    let area = q1.cell_area();
    let margin = 2.0 - crate::grid::tree_sum(&sum_terms).re * area;
    let phase_diagnostic = crate::grid::tree_sum(&diag_terms).re * area;
    let l1_distance = crate::grid::tree_sum(&l1_dist_terms).re * area;
    Ok(ConvexityMargin {
        margin,
        phase_diagnostic,
        degenerate: l1_distance <= 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    const UNIT_SQUARE: Domain = Domain::Rectangle { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    fn disk(n: usize, f: impl Fn(C) -> C) -> GridField {
        GridField::from_fn(Domain::UnitDisk, n, n, f).unwrap()
    }

    #[test]
    fn constant_on_square_has_unit_norm() {
        let g = GridField::from_fn(UNIT_SQUARE, 64, 64, |_| c(1.0, 0.0)).unwrap();
        assert_relative_eq!(l1_norm_grid(&g).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn z_on_disk_norm() {
        // ∬_𝔻 |z| dA = 2π/3
        let g = disk(512, |z| z);
        let exact = 2.0 * std::f64::consts::PI / 3.0;
        assert!((l1_norm_grid(&g).unwrap() - exact).abs() < 2e-3);
    }

    #[test]
    fn torus_norm_matches_closed_form() {
        // grid field −2i·q_coord integrates to 2|q_coord|·Im τ
        let tau = c(0.3, 1.7);
        let qc = c(0.8, -0.5);
        let g = GridField::from_fn(Domain::TorusFundamental { tau }, 32, 32, |_| {
            -C::new(0.0, 2.0) * qc
        })
        .unwrap();
        let closed = crate::torus::l1_norm(
            &crate::torus::TorusFiberPoint::cotangent(tau, qc).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(l1_norm_grid(&g).unwrap(), closed, max_relative = 1e-12);
    }

    #[test]
    fn variation_of_q_along_itself() {
        let g = disk(128, |z| z + c(0.2, 0.1));
        let (a, b) = l1_variation(&g, &g).unwrap();
        let half_norm = l1_norm_grid(&g).unwrap() / 2.0;
        assert_relative_eq!(a.re, half_norm, max_relative = 1e-12);
        assert!(a.im.abs() < 1e-12);
        assert_relative_eq!(b.re, half_norm, max_relative = 1e-12);
    }

    #[test]
    fn variation_phase_factor_pulls_out() {
        let g = disk(128, |z| z * z + c(0.1, 0.0));
        let phi = g.map(|_, s| C::i() * s);
        let (a, _) = l1_variation(&g, &phi).unwrap();
        let half_norm = l1_norm_grid(&g).unwrap() / 2.0;
        assert!(a.re.abs() < 1e-12);
        assert_relative_eq!(a.im, half_norm, max_relative = 1e-12);
    }

    #[test]
    fn variation_rotational_antisymmetry() {
        // q₀ = z, φ = 1: ∬ z̄/|z| dA = 0 by the angular integral
        let q0 = disk(256, |z| z);
        let phi = disk(256, |_| c(1.0, 0.0));
        let (a, b) = l1_variation(&q0, &phi).unwrap();
        assert!(a.norm() < 1e-10, "{a}");
        assert!(b.norm() < 1e-10, "{b}");
    }

    #[test]
    fn variation_zero_field_rejected() {
        let g = disk(16, |_| c(0.0, 0.0));
        let phi = disk(16, |_| c(1.0, 0.0));
        assert_eq!(l1_variation(&g, &phi).unwrap_err(), QdiffError::IdenticallyZero);
    }

    #[test]
    fn fd_check_affine_scalar() {
        // q₀ ≡ 1, φ ≡ 1 on [0,1]²: f(t) = |1+t| so df/dt = 1 at t → 0⁺
        let q0 = GridField::from_fn(UNIT_SQUARE, 32, 32, |_| c(1.0, 0.0)).unwrap();
        let rep = fd_check_l1_variation(&q0, &q0, &[1e-4]).unwrap();
        assert!(rep.steps[0].real_residual < 1e-8, "{:?}", rep.steps[0]);
    }

    #[test]
    fn fd_check_z_on_disk_decreases() {
        let q0 = disk(256, |z| z);
        let phi = disk(256, |_| c(1.0, 0.0));
        let rep = fd_check_l1_variation(&q0, &phi, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(rep.steps[0].real_residual > rep.steps[1].real_residual);
        assert!(rep.steps[1].real_residual >= rep.steps[2].real_residual - 1e-6);
        assert!(rep.steps[2].real_residual < 1e-3, "{:?}", rep.steps[2]);
    }

    #[test]
    fn phase_probe_recovers_coefficients() {
        let q0 = disk(128, |z| z + c(0.3, 0.2));
        let phi = disk(128, |z| z * z - c(0.1, 0.4));
        let (a, b) = l1_variation(&q0, &phi).unwrap();
        let (pa, pb) = phase_probe_coefficients(&q0, &phi, 1e-4).unwrap();
        assert!((pa - a).norm() < 1e-2 * (1.0 + a.norm()), "{pa} vs {a}");
        assert!((pb - b).norm() < 1e-2 * (1.0 + b.norm()), "{pb} vs {b}");
    }

    #[test]
    fn tb_differential_unimodular() {
        let q = disk(64, |z| z);
        let mu = tb_differential(&q, 1.0).unwrap();
        let eps = 1e-12 * q.sup_abs();
        for j in 0..q.ny {
            for i in 0..q.nx {
                if q.masked_in(i, j) && q.sample(i, j).norm() >= eps {
                    assert!((mu.sample(i, j).norm() - 1.0).abs() < 1e-14);
                }
            }
        }
        let half = tb_differential(&q, 0.5).unwrap();
        assert_relative_eq!(half.sup_abs(), 0.5, max_relative = 1e-14);
        let zero = tb_differential(&q, 0.0).unwrap();
        assert_eq!(zero.sup_abs(), 0.0);
    }

    #[test]
    fn pairing_with_tb_gives_norm() {
        let q = disk(128, |z| z * z + c(0.4, -0.1));
        let mu = tb_differential(&q, 1.0).unwrap();
        let p = pairing_mu_q(&mu, &q).unwrap();
        assert_relative_eq!(p.re, l1_norm_grid(&q).unwrap(), max_relative = 1e-12);
        assert!(p.im.abs() < 1e-12);
    }

    #[test]
    fn pairing_holder_bound() {
        let mu = disk(64, |z| c(0.3, 0.0) * (z * 3.0).exp() / (z * 3.0).exp().norm());
        let q = disk(64, |z| z + c(0.2, 0.6));
        let p = pairing_mu_q(&mu, &q).unwrap();
        let bound = mu.sup_abs() * l1_norm_grid(&q).unwrap();
        assert!(p.re.abs() <= bound + 1e-12);
    }

    #[test]
    fn pairing_extremality_gap_for_perturbed_mu() {
        let q = disk(128, |z| z + c(0.1, 0.3));
        let norm = l1_norm_grid(&q).unwrap();
        // unit-sup μ differing from q̄/|q| on a positive-measure set
        let mu = q.map(|z, s| {
            let aligned = s.conj() / s.norm();
            if z.re > 0.0 {
                aligned * C::from_polar(1.0, 1.0)
            } else {
                aligned
            }
        });
        let p = pairing_mu_q(&mu, &q).unwrap();
        assert!(p.re < norm - 1e-3, "{} vs {}", p.re, norm);
    }

    fn normalized(g: &GridField) -> GridField {
        let n = l1_norm_grid(g).unwrap();
        g.map(|_, s| s / n)
    }

    #[test]
    fn strict_convexity_margin_positive() {
        let q1 = normalized(&disk(128, |_| c(1.0, 0.0)));
        let q2 = normalized(&disk(128, |z| z * 2.0));
        let rep = strict_convexity_probe(&q1, &q2).unwrap();
        assert!(rep.margin > 0.05, "{}", rep.margin);
        assert!(rep.phase_diagnostic > 0.0);
        assert!(!rep.degenerate);
    }

    #[test]
    fn rotated_pair_margin_two_minus_sqrt_two() {
        let q1 = normalized(&disk(128, |z| z + c(0.3, 0.1)));
        let q2 = q1.map(|_, s| C::i() * s);
        let rep = strict_convexity_probe(&q1, &q2).unwrap();
        assert!((rep.margin - (2.0 - 2.0_f64.sqrt())).abs() < 1e-9, "{}", rep.margin);
    }

    #[test]
    fn equal_pair_flagged_degenerate() {
        let q1 = normalized(&disk(64, |z| z + c(0.5, 0.0)));
        let rep = strict_convexity_probe(&q1, &q1).unwrap();
        assert!(rep.degenerate);
        assert!(rep.margin.abs() < 1e-9);
    }

    #[test]
    fn unnormalized_input_rejected() {
        let q1 = disk(32, |_| c(2.0, 0.0));
        assert_eq!(
            strict_convexity_probe(&q1, &q1).unwrap_err(),
            QdiffError::NotNormalized
        );
    }

    #[test]
    fn polynomial_eval_horner() {
        let p = PolynomialDifferential::new(vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0)]);
        let z = c(0.5, -0.3);
        let expect = c(1.0, 0.0) + c(0.0, 2.0) * z - z * z;
        assert!((p.eval(z) - expect).norm() < 1e-15);
        assert!(!p.is_zero());
        assert!(PolynomialDifferential::new(vec![c(0.0, 0.0)]).is_zero());
    }
}
