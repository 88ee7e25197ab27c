//! Second-order infinitesimal calculus on coordinate charts.
//!
//! Points of the four second-order bundles TTM, T*TM, TT*M, T*T*M are
//! chart-coordinate tuples (base, fiber, two jet slots) in ℂⁿ⁴. A chart
//! change w = w(z) acts by one of four block-triangular laws built from the
//! Jacobian J, the tensors Γ(η), Γ′(H), Γ″(ω), and the inverse Jacobian.
//! On top of the transport laws sit the flip, the switch TT*M → T*TM, the
//! dualization TT*M → T*T*M, the canonical pairings, the holomorphic
//! symplectic form Σ dω_j ∧ dz_j, Hamiltonian vector fields, and the Lie
//! bracket of (1,0) fields.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tolerances;
use crate::C;

/// Which of the four second-order bundles a point lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BundleKind {
    /// TTM, coordinates (z, η, ξ, ζ).
    TT,
    /// T*TM, coordinates (z, η, λ, μ).
    TStarT,
    /// TT*M, coordinates (z, ω, α, β).
    TTStar,
    /// T*T*M, coordinates (z, ω, ν, τ).
    TStarTStar,
}

#[derive(Debug, Error, PartialEq)]
pub enum JetError {
    #[error("coordinate blocks have mismatched lengths")]
    DimensionMismatch,
    #[error("|det J| = {det_abs:e} below the singularity threshold")]
    SingularJacobian { det_abs: f64 },
    #[error("operation requires bundle kind {expected:?}, got {got:?}")]
    WrongBundleKind { expected: BundleKind, got: BundleKind },
    #[error("points are not a legal dual pair of bundles")]
    BundlePairMismatch,
    #[error("points sit over different fiber points")]
    FiberPointMismatch,
    #[error("tangent and cotangent tuples have different base points")]
    BasePointMismatch,
    #[error("scalar field offers no gradient")]
    GradientUnavailable,
    #[error("vector field offers no derivative")]
    DerivativeUnavailable,
    #[error("hessian is not symmetric in its last two indices")]
    AsymmetricHessian,
    #[error("base tangents of the two curves disagree (Whitney-sum constraint)")]
    WhitneyConstraintViolated,
}

/// A point of one of the four second-order bundles in a fixed chart.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderPoint {
    pub kind: BundleKind,
    pub base: Vec<C>,
    pub fiber: Vec<C>,
    pub jet1: Vec<C>,
    pub jet2: Vec<C>,
}

impl SecondOrderPoint {
    pub fn new(
        kind: BundleKind,
        base: Vec<C>,
        fiber: Vec<C>,
        jet1: Vec<C>,
        jet2: Vec<C>,
    ) -> Result<Self, JetError> {
        let n = base.len();
        if n == 0 || fiber.len() != n || jet1.len() != n || jet2.len() != n {
            return Err(JetError::DimensionMismatch);
        }
        Ok(Self { kind, base, fiber, jet1, jet2 })
    }

    /// One-dimensional point from scalar coordinates.
    pub fn scalar(kind: BundleKind, z: C, f: C, a: C, b: C) -> Self {
        Self { kind, base: vec![z], fiber: vec![f], jet1: vec![a], jet2: vec![b] }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    fn expect_kind(&self, expected: BundleKind) -> Result<(), JetError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(JetError::WrongBundleKind { expected, got: self.kind })
        }
    }

    /// Largest componentwise distance between the coordinate tuples.
    pub fn max_distance(&self, other: &Self) -> f64 {
        let blocks = [
            (&self.base, &other.base),
            (&self.fiber, &other.fiber),
            (&self.jet1, &other.jet1),
            (&self.jet2, &other.jet2),
        ];
        blocks
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }
}

/// Data of a holomorphic coordinate change at one point: the value w,
/// the Jacobian J = [∂w_i/∂z_j], and the symmetric second-derivative
/// tensor [∂²w_i/∂z_j∂z_k]. Inverse data is derived on construction.
#[derive(Debug, Clone)]
pub struct ChartTransition {
    pub value: Vec<C>,
    pub jacobian: DMatrix<C>,
    pub hessian: Vec<DMatrix<C>>,
    /// K = [∂z_i/∂w_j], the matrix inverse of the Jacobian.
    inv_jacobian: DMatrix<C>,
    det_abs: f64,
}

impl ChartTransition {
    pub fn new(
        value: Vec<C>,
        jacobian: DMatrix<C>,
        hessian: Vec<DMatrix<C>>,
    ) -> Result<Self, JetError> {
        let n = value.len();
        if jacobian.nrows() != n || jacobian.ncols() != n || hessian.len() != n {
            return Err(JetError::DimensionMismatch);
        }
        for h in &hessian {
            if h.nrows() != n || h.ncols() != n {
                return Err(JetError::DimensionMismatch);
            }
            for j in 0..n {
                for k in (j + 1)..n {
                    if (h[(j, k)] - h[(k, j)]).norm() > 1e-9 * (1.0 + h[(j, k)].norm()) {
                        return Err(JetError::AsymmetricHessian);
                    }
                }
            }
        }
        let det = jacobian.clone().determinant();
        let det_abs = det.norm();
        if det_abs < tolerances::SINGULAR_JACOBIAN {
            return Err(JetError::SingularJacobian { det_abs });
        }
        let inv_jacobian = jacobian
            .clone()
            .try_inverse()
            .ok_or(JetError::SingularJacobian { det_abs })?;
        Ok(Self { value, jacobian, hessian, inv_jacobian, det_abs })
    }

    /// Identity transition in dimension n (J = I, vanishing hessian).
    pub fn identity(z: &[C]) -> Self {
        let n = z.len();
        Self {
            value: z.to_vec(),
            jacobian: DMatrix::identity(n, n),
            hessian: vec![DMatrix::zeros(n, n); n],
            inv_jacobian: DMatrix::identity(n, n),
            det_abs: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }

    pub fn det_abs(&self) -> f64 {
        self.det_abs
    }

    /// Condition number estimate ‖J‖·‖J⁻¹‖ in the Frobenius norm.
    pub fn condition_estimate(&self) -> f64 {
        self.jacobian.norm() * self.inv_jacobian.norm()
    }

    fn apply_j(&self, v: &[C]) -> Vec<C> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.jacobian[(i, j)] * v[j]).sum())
            .collect()
    }

    /// J† = [∂z_j/∂w_i] applied to a covector block: (J†v)_i = Σ_j K_{ji} v_j.
    fn apply_j_dagger(&self, v: &[C]) -> Vec<C> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.inv_jacobian[(j, i)] * v[j]).sum())
            .collect()
    }

    /// Γ_{ij}(η) = Σ_k η_k ∂²w_i/∂z_j∂z_k.
    fn gamma(&self, eta: &[C]) -> DMatrix<C> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| eta[k] * self.hessian[i][(j, k)]).sum()
        })
    }

    /// ∂²z_j/∂w_i∂w_l = −Σ_p K_{jp} Σ_{q,r} (∂²w_p/∂z_q∂z_r) K_{qi} K_{rl}.
    fn inverse_hessian_entry(&self, j: usize, i: usize, l: usize) -> C {
        let n = self.dim();
        let mut acc = C::new(0.0, 0.0);
        for p in 0..n {
            let mut inner = C::new(0.0, 0.0);
            for q in 0..n {
                for r in 0..n {
                    inner += self.hessian[p][(q, r)]
                        * self.inv_jacobian[(q, i)]
                        * self.inv_jacobian[(r, l)];
                }
            }
            acc += self.inv_jacobian[(j, p)] * inner;
        }
        -acc
    }

    /// Γ′_{ij}(H) = Σ_l H_l ∂²z_j/∂w_i∂w_l.
    fn gamma_prime(&self, h: &[C]) -> DMatrix<C> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|l| h[l] * self.inverse_hessian_entry(j, i, l))
                .sum()
        })
    }

    /// Γ″_{ij}(ω) = Σ_k ω_k ∂(∂z_k/∂w_i)/∂z_j
    ///            = −Σ_k ω_k Σ_{a,b} K_{ka} (∂²w_a/∂z_b∂z_j) K_{bi}.
    fn gamma_double_prime(&self, omega: &[C]) -> DMatrix<C> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            let mut acc = C::new(0.0, 0.0);
            for k in 0..n {
                let mut inner = C::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        inner += self.inv_jacobian[(k, a)]
                            * self.hessian[a][(b, j)]
                            * self.inv_jacobian[(b, i)];
                    }
                }
                acc += omega[k] * inner;
            }
            -acc
        })
    }
}

fn mat_vec(m: &DMatrix<C>, v: &[C]) -> Vec<C> {
    let n = v.len();
    (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

fn add(a: &[C], b: &[C]) -> Vec<C> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[C], b: &[C]) -> Vec<C> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Coordinates of the same geometric object in the w-chart, applying the
/// block-triangular transition law selected by the bundle kind.
pub fn transport(p: &SecondOrderPoint, t: &ChartTransition) -> Result<SecondOrderPoint, JetError> {
    if t.dim() != p.dim() {
        return Err(JetError::DimensionMismatch);
    }
    let (fiber, jet1, jet2) = match p.kind {
        BundleKind::TT => {
            // H = Jη, Ξ = Jξ, Z = Γ(η)ξ + Jζ
            let h = t.apply_j(&p.fiber);
            let xi = t.apply_j(&p.jet1);
            let z = add(&mat_vec(&t.gamma(&p.fiber), &p.jet1), &t.apply_j(&p.jet2));
            (h, xi, z)
        }
        BundleKind::TStarT => {
            // H = Jη, Λ = J†λ + Γ′(H)μ, M = J†μ
            let h = t.apply_j(&p.fiber);
            let lam = add(
                &t.apply_j_dagger(&p.jet1),
                &mat_vec(&t.gamma_prime(&h), &p.jet2),
            );
            let mu = t.apply_j_dagger(&p.jet2);
            (h, lam, mu)
        }
        BundleKind::TTStar => {
            // Ω = J†ω, A = Jα, B = Γ″(ω)α + J†β
            let om = t.apply_j_dagger(&p.fiber);
            let a = t.apply_j(&p.jet1);
            let b = add(
                &mat_vec(&t.gamma_double_prime(&p.fiber), &p.jet1),
                &t.apply_j_dagger(&p.jet2),
            );
            (om, a, b)
        }
        BundleKind::TStarTStar => {
            // Ω = J†ω, N = J†ν − Γ″(ω)τ, T = Jτ
            let om = t.apply_j_dagger(&p.fiber);
            let n = sub(
                &t.apply_j_dagger(&p.jet1),
                &mat_vec(&t.gamma_double_prime(&p.fiber), &p.jet2),
            );
            let tau = t.apply_j(&p.jet2);
            (om, n, tau)
        }
    };
    Ok(SecondOrderPoint {
        kind: p.kind,
        base: t.value.clone(),
        fiber,
        jet1,
        jet2,
    })
}

/// The flip involution of TTM: (z, η, ξ, ζ) ↦ (z, ξ, η, ζ).
pub fn flip(p: &SecondOrderPoint) -> Result<SecondOrderPoint, JetError> {
    p.expect_kind(BundleKind::TT)?;
    Ok(SecondOrderPoint {
        kind: BundleKind::TT,
        base: p.base.clone(),
        fiber: p.jet1.clone(),
        jet1: p.fiber.clone(),
        jet2: p.jet2.clone(),
    })
}

/// The switch TT*M → T*TM: (z, ω, α, β) ↦ (z, α, β, ω).
pub fn switch(p: &SecondOrderPoint) -> Result<SecondOrderPoint, JetError> {
    p.expect_kind(BundleKind::TTStar)?;
    Ok(SecondOrderPoint {
        kind: BundleKind::TStarT,
        base: p.base.clone(),
        fiber: p.jet1.clone(),
        jet1: p.jet2.clone(),
        jet2: p.fiber.clone(),
    })
}

/// The dualization TT*M → T*T*M: (z, ω, α, β) ↦ (z, ω, β, −α).
pub fn dualize(p: &SecondOrderPoint) -> Result<SecondOrderPoint, JetError> {
    p.expect_kind(BundleKind::TTStar)?;
    Ok(SecondOrderPoint {
        kind: BundleKind::TStarTStar,
        base: p.base.clone(),
        fiber: p.fiber.clone(),
        jet1: p.jet2.clone(),
        jet2: p.jet1.iter().map(|a| -a).collect(),
    })
}

/// Inverse of the dualization: (z, ω, ν, τ) ↦ (z, ω, −τ, ν).
pub fn dualize_inverse(p: &SecondOrderPoint) -> Result<SecondOrderPoint, JetError> {
    p.expect_kind(BundleKind::TStarTStar)?;
    Ok(SecondOrderPoint {
        kind: BundleKind::TTStar,
        base: p.base.clone(),
        fiber: p.fiber.clone(),
        jet1: p.jet2.iter().map(|a| -a).collect(),
        jet2: p.jet1.clone(),
    })
}

fn same_tuple(a: &[C], b: &[C]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).norm() <= 1e-12 * (1.0 + x.norm()))
}

/// The base pairing P_M(Ση_j∂_{z_j}, Σω_j dz_j) = Ση_jω_j over a common
/// base point.
pub fn pairing_base(z_v: &[C], eta: &[C], z_w: &[C], omega: &[C]) -> Result<C, JetError> {
    if eta.len() != omega.len() || z_v.len() != z_w.len() {
        return Err(JetError::DimensionMismatch);
    }
    if !same_tuple(z_v, z_w) {
        return Err(JetError::BasePointMismatch);
    }
    Ok(eta.iter().zip(omega).map(|(a, b)| a * b).sum())
}

/// Pairing of a second-order vector with a second-order covector over the
/// same fiber point: Σ_j (jet1_V·jet1_Ω + jet2_V·jet2_Ω). Legal pairs are
/// (TT, T*T) and (TT*, T*T*).
pub fn pairing_second_order(v: &SecondOrderPoint, omega: &SecondOrderPoint) -> Result<C, JetError> {
    let legal = matches!(
        (v.kind, omega.kind),
        (BundleKind::TT, BundleKind::TStarT) | (BundleKind::TTStar, BundleKind::TStarTStar)
    );
    if !legal {
        return Err(JetError::BundlePairMismatch);
    }
    if v.dim() != omega.dim() {
        return Err(JetError::DimensionMismatch);
    }
    if !same_tuple(&v.base, &omega.base) || !same_tuple(&v.fiber, &omega.fiber) {
        return Err(JetError::FiberPointMismatch);
    }
    let p1: C = v.jet1.iter().zip(&omega.jet1).map(|(a, b)| a * b).sum();
    let p2: C = v.jet2.iter().zip(&omega.jet2).map(|(a, b)| a * b).sum();
    Ok(p1 + p2)
}

/// The canonical holomorphic symplectic form ω_M = Σ dω_j ∧ dz_j on T*M,
/// with the wedge convention dω∧dz(X,Y) = ½(dω(X)dz(Y) − dω(Y)dz(X)).
/// For W_k = (z, ω, α^k, β^k) this is ½Σ_j(β¹_jα²_j − β²_jα¹_j).
pub fn symplectic_form(w1: &SecondOrderPoint, w2: &SecondOrderPoint) -> Result<C, JetError> {
    w1.expect_kind(BundleKind::TTStar)?;
    w2.expect_kind(BundleKind::TTStar)?;
    if w1.dim() != w2.dim() {
        return Err(JetError::DimensionMismatch);
    }
    if !same_tuple(&w1.base, &w2.base) || !same_tuple(&w1.fiber, &w2.fiber) {
        return Err(JetError::FiberPointMismatch);
    }
    let mut acc = C::new(0.0, 0.0);
    for j in 0..w1.dim() {
        acc += w1.jet2[j] * w2.jet1[j] - w2.jet2[j] * w1.jet1[j];
    }
    Ok(acc * 0.5)
}

/// How the ∂-gradient of a scalar on T*M is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

/// A C¹ scalar on the cotangent bundle with access to its (1,0)-gradient
/// ∂H = (Σ H_{z_j} dz_j, Σ H_{ω_j} dω_j).
pub struct ScalarFieldOnCotangent {
    eval: Box<dyn Fn(&[C], &[C]) -> C>,
    gradient: Option<Box<dyn Fn(&[C], &[C]) -> (Vec<C>, Vec<C>)>>,
    pub mode: GradientMode,
    pub fd_step: f64,
}

impl ScalarFieldOnCotangent {
    pub fn with_gradient(
        eval: impl Fn(&[C], &[C]) -> C + 'static,
        gradient: impl Fn(&[C], &[C]) -> (Vec<C>, Vec<C>) + 'static,
    ) -> Self {
        Self {
            eval: Box::new(eval),
            gradient: Some(Box::new(gradient)),
            mode: GradientMode::Analytic,
            fd_step: tolerances::FD_STEP,
        }
    }

    /// Gradient by central Wirtinger differences with the documented step.
    pub fn finite_difference(eval: impl Fn(&[C], &[C]) -> C + 'static) -> Self {
        Self {
            eval: Box::new(eval),
            gradient: None,
            mode: GradientMode::FiniteDifference,
            fd_step: tolerances::FD_STEP,
        }
    }

    pub fn value(&self, z: &[C], omega: &[C]) -> C {
        (self.eval)(z, omega)
    }

    /// ∂H at (z, ω) as the pair of coefficient blocks (ν, τ).
    pub fn del(&self, z: &[C], omega: &[C]) -> (Vec<C>, Vec<C>) {
        if let Some(g) = &self.gradient {
            return g(z, omega);
        }
        let h = self.fd_step;
        let wirtinger = |slot: usize, in_base: bool| -> C {
            let probe = |dz: C| -> C {
                let mut zz = z.to_vec();
                let mut ww = omega.to_vec();
                if in_base {
                    zz[slot] += dz;
                } else {
                    ww[slot] += dz;
                }
                (self.eval)(&zz, &ww)
            };
            let dx = (probe(C::new(h, 0.0)) - probe(C::new(-h, 0.0))) / (2.0 * h);
            let dy = (probe(C::new(0.0, h)) - probe(C::new(0.0, -h))) / (2.0 * h);
            // ∂/∂z = ½(∂x − i∂y)
            (dx - C::i() * dy) * 0.5
        };
        let nu = (0..z.len()).map(|j| wirtinger(j, true)).collect();
        let tau = (0..omega.len()).map(|j| wirtinger(j, false)).collect();
        (nu, tau)
    }
}

/// The Hamiltonian vector field 𝒳_H = 2·dual⁻¹(∂H) at a point of T*M,
/// returned as a TT*M tuple. The defining identity ω_M(𝒳_H, V) = ∂H(V)
/// holds for all V over the same fiber point.
pub fn hamiltonian_field(
    h: &ScalarFieldOnCotangent,
    z: &[C],
    omega: &[C],
) -> Result<SecondOrderPoint, JetError> {
    let (nu, tau) = h.del(z, omega);
    let del_h = SecondOrderPoint::new(
        BundleKind::TStarTStar,
        z.to_vec(),
        omega.to_vec(),
        nu,
        tau,
    )?;
    let mut x = dualize_inverse(&del_h)?;
    for a in x.jet1.iter_mut() {
        *a *= 2.0;
    }
    for b in x.jet2.iter_mut() {
        *b *= 2.0;
    }
    Ok(x)
}

/// A (1,0) vector field with access to its coefficient derivative matrix.
pub struct VectorField10 {
    eval: Box<dyn Fn(&[C]) -> Vec<C>>,
    derivative: Option<Box<dyn Fn(&[C]) -> DMatrix<C>>>,
    pub fd_step: f64,
}

impl VectorField10 {
    pub fn with_derivative(
        eval: impl Fn(&[C]) -> Vec<C> + 'static,
        derivative: impl Fn(&[C]) -> DMatrix<C> + 'static,
    ) -> Self {
        Self { eval: Box::new(eval), derivative: Some(Box::new(derivative)), fd_step: tolerances::FD_STEP }
    }

    pub fn finite_difference(eval: impl Fn(&[C]) -> Vec<C> + 'static) -> Self {
        Self { eval: Box::new(eval), derivative: None, fd_step: tolerances::FD_STEP }
    }

    pub fn value(&self, z: &[C]) -> Vec<C> {
        (self.eval)(z)
    }

    /// [∂X_i/∂z_j] at z, analytic or by central Wirtinger differences.
    pub fn derivative(&self, z: &[C]) -> DMatrix<C> {
        if let Some(d) = &self.derivative {
            return d(z);
        }
        let n = z.len();
        let h = self.fd_step;
        DMatrix::from_fn(n, n, |i, j| {
            let probe = |dz: C| -> C {
                let mut zz = z.to_vec();
                zz[j] += dz;
                (self.eval)(&zz)[i]
            };
            let dx = (probe(C::new(h, 0.0)) - probe(C::new(-h, 0.0))) / (2.0 * h);
            let dy = (probe(C::new(0.0, h)) - probe(C::new(0.0, -h))) / (2.0 * h);
            (dx - C::i() * dy) * 0.5
        })
    }
}

/// Coefficients of [X, Y] at p by the direct formula
/// Σ_i X_i ∂Y_j/∂z_i − Σ_i Y_i ∂X_j/∂z_i.
pub fn lie_bracket(x: &VectorField10, y: &VectorField10, p: &[C]) -> Vec<C> {
    let xv = x.value(p);
    let yv = y.value(p);
    let dx = x.derivative(p);
    let dy = y.derivative(p);
    let n = p.len();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| xv[i] * dy[(j, i)] - yv[i] * dx[(j, i)])
                .sum()
        })
        .collect()
}

/// The same bracket read off the flip construction: the vertical part of
/// α_M(pr¹⁰(DY(X))) − pr¹⁰(DX(Y)) through the vertical inclusion.
pub fn lie_bracket_via_flip(
    x: &VectorField10,
    y: &VectorField10,
    p: &[C],
) -> Result<Vec<C>, JetError> {
    let xv = x.value(p);
    let yv = y.value(p);
    let dx = x.derivative(p);
    let dy = y.derivative(p);
    // DY(X) at Y_p as a TT point (z, Y, X, DY·X); flip swaps the two
    // first-order slots.
    let dy_x = SecondOrderPoint::new(
        BundleKind::TT,
        p.to_vec(),
        yv.clone(),
        xv.clone(),
        mat_vec(&dy, &xv),
    )?;
    let flipped = flip(&dy_x)?;
    // DX(Y) at X_p: (z, X, Y, DX·Y). The difference with the flipped point
    // is vertical; its ζ slot is the bracket.
    let dx_y = SecondOrderPoint::new(
        BundleKind::TT,
        p.to_vec(),
        xv,
        yv,
        mat_vec(&dx, &y.value(p)),
    )?;
    Ok(sub(&flipped.jet2, &dx_y.jet2))
}

/// A differentiable curve t ↦ (base(t), fiber(t)) in TM or T*M.
pub type FiberCurve = Box<dyn Fn(f64) -> (Vec<C>, Vec<C>)>;

fn curve_tangent(curve: &FiberCurve, h: f64) -> (Vec<C>, Vec<C>, Vec<C>, Vec<C>) {
    let (zp, fp) = curve(h);
    let (zm, fm) = curve(-h);
    let (z0, f0) = curve(0.0);
    let dz = zp
        .iter()
        .zip(&zm)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    let df = fp
        .iter()
        .zip(&fm)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    (z0, f0, dz, df)
}

/// Residual of the derivative-of-pairing identity along a curve pair:
/// |d/dt P_M(v(t), ω(t))|₀ − P_TM(α_M(V₁), Swh_M(V₂))| with tangents and
/// the t-derivative taken by central differences of step h.
pub fn pairing_derivative_check(
    curve_v: &FiberCurve,
    curve_w: &FiberCurve,
    h: f64,
) -> Result<f64, JetError> {
    let (zv, eta, dzv, deta) = curve_tangent(curve_v, h);
    let (zw, omega, dzw, domega) = curve_tangent(curve_w, h);
    if !same_tuple(&zv, &zw) {
        return Err(JetError::BasePointMismatch);
    }
    // Whitney-sum constraint: the base tangents must agree.
    let scale = dzv.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let defect = dzv
        .iter()
        .zip(&dzw)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if defect > tolerances::WHITNEY_CONSTRAINT * scale.max(1.0) {
        return Err(JetError::WhitneyConstraintViolated);
    }
    let v1 = SecondOrderPoint::new(BundleKind::TT, zv.clone(), eta, dzv, deta)?;
    let v2 = SecondOrderPoint::new(BundleKind::TTStar, zw, omega, dzw, domega)?;
    let structural = pairing_second_order(&flip(&v1)?, &switch(&v2)?)?;

    let pairing_at = |t: f64| -> C {
        let (_, e) = curve_v(t);
        let (_, o) = curve_w(t);
        e.iter().zip(&o).map(|(a, b)| a * b).sum()
    };
    let fd = (pairing_at(h) - pairing_at(-h)) / (2.0 * h);
    Ok((fd - structural).norm())
}

/// A polynomial chart map ℂⁿ → ℂⁿ given by monomial terms, with analytic
/// Jacobian and Hessian. Serves as the default transition supplier; a
/// finite-difference fallback is available through
/// [`transition_from_fn`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyMap {
    pub dim: usize,
    /// components[i] lists (coefficient, exponent multi-index) monomials.
    pub components: Vec<Vec<(C, Vec<u32>)>>,
}

impl PolyMap {
    pub fn new(dim: usize, components: Vec<Vec<(C, Vec<u32>)>>) -> Self {
        assert_eq!(components.len(), dim);
        Self { dim, components }
    }

    /// The one-dimensional map z ↦ Σ c_k z^k.
    pub fn scalar(coeffs: &[C]) -> Self {
        let comps = vec![coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (*c, vec![k as u32]))
            .collect()];
        Self { dim: 1, components: comps }
    }

    pub fn eval(&self, z: &[C]) -> Vec<C> {
        self.components
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|(c, exps)| {
                        let mono: C = exps
                            .iter()
                            .zip(z)
                            .map(|(&e, zj)| zj.powu(e))
                            .product();
                        c * mono
                    })
                    .sum()
            })
            .collect()
    }

    fn partial(&self, i: usize, wrt: &[usize], z: &[C]) -> C {
        // derivative of component i with respect to the listed variables
        self.components[i]
            .iter()
            .map(|(c, exps)| {
                let mut exps: Vec<i64> = exps.iter().map(|&e| e as i64).collect();
                let mut factor = 1.0;
                for &v in wrt {
                    factor *= exps[v] as f64;
                    exps[v] -= 1;
                }
                if factor == 0.0 {
                    return C::new(0.0, 0.0);
                }
                let mono: C = exps
                    .iter()
                    .zip(z)
                    .map(|(&e, zj)| if e <= 0 { C::new(1.0, 0.0) } else { zj.powu(e as u32) })
                    .product();
                c * factor * mono
            })
            .sum()
    }

    /// Analytic transition data at the evaluation point.
    pub fn transition_at(&self, z: &[C]) -> Result<ChartTransition, JetError> {
        let n = self.dim;
        if z.len() != n {
            return Err(JetError::DimensionMismatch);
        }
        let value = self.eval(z);
        let jacobian = DMatrix::from_fn(n, n, |i, j| self.partial(i, &[j], z));
        let hessian = (0..n)
            .map(|i| DMatrix::from_fn(n, n, |j, k| self.partial(i, &[j, k], z)))
            .collect();
        ChartTransition::new(value, jacobian, hessian)
    }
}

/// Transition data from an arbitrary chart map by central Wirtinger
/// differences with step h (default [`tolerances::FD_CHART_STEP`]); the
/// truncation error is O(h²).
pub fn transition_from_fn(
    f: &dyn Fn(&[C]) -> Vec<C>,
    z: &[C],
    h: f64,
) -> Result<ChartTransition, JetError> {
    let n = z.len();
    let value = f(z);
    if value.len() != n {
        return Err(JetError::DimensionMismatch);
    }
    let wirtinger = |i: usize, j: usize, at: &[C]| -> C {
        let probe = |dz: C| -> C {
            let mut zz = at.to_vec();
            zz[j] += dz;
            f(&zz)[i]
        };
        let dx = (probe(C::new(h, 0.0)) - probe(C::new(-h, 0.0))) / (2.0 * h);
        let dy = (probe(C::new(0.0, h)) - probe(C::new(0.0, -h))) / (2.0 * h);
        (dx - C::i() * dy) * 0.5
    };
    let jacobian = DMatrix::from_fn(n, n, |i, j| wirtinger(i, j, z));
    // second derivatives: difference the first Wirtinger derivative
    let hessian: Vec<DMatrix<C>> = (0..n)
        .map(|i| {
            DMatrix::from_fn(n, n, |j, k| {
                let probe = |dz: C| -> C {
                    let mut zz = z.to_vec();
                    zz[k] += dz;
                    wirtinger(i, j, &zz)
                };
                let dx = (probe(C::new(h, 0.0)) - probe(C::new(-h, 0.0))) / (2.0 * h);
                let dy = (probe(C::new(0.0, h)) - probe(C::new(0.0, -h))) / (2.0 * h);
                (dx - C::i() * dy) * 0.5
            })
        })
        .collect();
    // symmetrize: FD noise breaks exact index symmetry
    let hessian = hessian
        .into_iter()
        .map(|m| {
            let mt = m.transpose();
            (m + mt) * C::new(0.5, 0.0)
        })
        .collect();
    ChartTransition::new(value, jacobian, hessian)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn r(x: f64) -> C {
        C::new(x, 0.0)
    }

    #[test]
    fn transport_identity_is_identity() {
        let p = SecondOrderPoint::scalar(BundleKind::TT, c(0.3, 0.2), r(1.0), c(2.0, -1.0), r(3.0));
        let t = ChartTransition::identity(&p.base);
        let q = transport(&p, &t).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn transport_linear_scales_all_blocks() {
        // w = 2z: second derivatives vanish, every block scales by 2
        let map = PolyMap::scalar(&[r(0.0), r(2.0)]);
        let p = SecondOrderPoint::scalar(BundleKind::TT, r(1.0), r(1.0), r(1.0), r(1.0));
        let t = map.transition_at(&p.base).unwrap();
        let q = transport(&p, &t).unwrap();
        let expect = SecondOrderPoint::scalar(BundleKind::TT, r(2.0), r(2.0), r(2.0), r(2.0));
        assert!(q.max_distance(&expect) < 1e-14);
    }

    #[test]
    fn transport_square_map_tt() {
        // w = z² at z = 1: J = 2, Γ(η) = 2η; (1,1,1,0) → (1,2,2,2)
        let map = PolyMap::scalar(&[r(0.0), r(0.0), r(1.0)]);
        let p = SecondOrderPoint::scalar(BundleKind::TT, r(1.0), r(1.0), r(1.0), r(0.0));
        let t = map.transition_at(&p.base).unwrap();
        let q = transport(&p, &t).unwrap();
        let expect = SecondOrderPoint::scalar(BundleKind::TT, r(1.0), r(2.0), r(2.0), r(2.0));
        assert!(q.max_distance(&expect) < 1e-14, "{q:?}");
    }

    #[test]
    fn singular_jacobian_rejected() {
        let map = PolyMap::scalar(&[r(0.0), r(0.0), r(1.0)]);
        let err = map.transition_at(&[r(0.0)]).unwrap_err();
        assert!(matches!(err, JetError::SingularJacobian { .. }));
    }

    #[test]
    fn flip_coordinates_and_involution() {
        let p = SecondOrderPoint::scalar(BundleKind::TT, r(0.0), r(1.0), r(2.0), r(3.0));
        let f = flip(&p).unwrap();
        assert_eq!(f, SecondOrderPoint::scalar(BundleKind::TT, r(0.0), r(2.0), r(1.0), r(3.0)));
        assert_eq!(flip(&f).unwrap(), p);
    }

    #[test]
    fn flip_rejects_other_bundles() {
        let p = SecondOrderPoint::scalar(BundleKind::TTStar, r(0.0), r(1.0), r(2.0), r(3.0));
        assert!(matches!(flip(&p), Err(JetError::WrongBundleKind { .. })));
    }

    #[test]
    fn switch_coordinates_and_projection() {
        let p = SecondOrderPoint::scalar(BundleKind::TTStar, r(0.0), r(1.0), r(2.0), r(3.0));
        let s = switch(&p).unwrap();
        assert_eq!(s, SecondOrderPoint::scalar(BundleKind::TStarT, r(0.0), r(2.0), r(3.0), r(1.0)));
        // base-and-first-fiber of the output is (z, α)
        assert_eq!(s.base, p.base);
        assert_eq!(s.fiber, p.jet1);
    }

    #[test]
    fn dualize_coordinates_and_round_trip() {
        let p = SecondOrderPoint::scalar(BundleKind::TTStar, r(0.0), r(1.0), r(2.0), r(3.0));
        let d = dualize(&p).unwrap();
        assert_eq!(
            d,
            SecondOrderPoint::scalar(BundleKind::TStarTStar, r(0.0), r(1.0), r(3.0), r(-2.0))
        );
        assert_eq!(dualize_inverse(&d).unwrap(), p);
    }

    #[test]
    fn base_pairing_values() {
        let z = [r(0.0), r(0.0)];
        assert_eq!(
            pairing_base(&z, &[r(1.0), r(0.0)], &z, &[r(0.0), r(1.0)]).unwrap(),
            r(0.0)
        );
        assert_eq!(
            pairing_base(&z, &[r(2.0), r(3.0)], &z, &[r(5.0), r(7.0)]).unwrap(),
            r(31.0)
        );
        assert!(matches!(
            pairing_base(&[r(0.0)], &[r(1.0)], &[r(1.0)], &[r(1.0)]),
            Err(JetError::BasePointMismatch)
        ));
    }

    #[test]
    fn second_order_pairing_single_slot() {
        let v = SecondOrderPoint::scalar(BundleKind::TT, r(0.0), r(1.0), r(1.0), r(0.0));
        let o = SecondOrderPoint::scalar(BundleKind::TStarT, r(0.0), r(1.0), r(1.0), r(0.0));
        assert_eq!(pairing_second_order(&v, &o).unwrap(), r(1.0));
    }

    #[test]
    fn symplectic_half_convention() {
        let w1 = SecondOrderPoint::scalar(BundleKind::TTStar, r(0.0), r(0.0), r(1.0), r(0.0));
        let w2 = SecondOrderPoint::scalar(BundleKind::TTStar, r(0.0), r(0.0), r(0.0), r(1.0));
        assert_eq!(symplectic_form(&w1, &w2).unwrap(), r(-0.5));
        assert_eq!(symplectic_form(&w1, &w1).unwrap(), r(0.0));
    }

    #[test]
    fn dualization_pairing_identity_random() {
        // P_{T*M}(V, dual(W)) = 2 ω_M(W, V) for random pairs, n = 2
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rc = |rng: &mut rand_chacha::ChaCha8Rng| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for _ in 0..50 {
            let z = vec![rc(&mut rng), rc(&mut rng)];
            let om = vec![rc(&mut rng), rc(&mut rng)];
            let v = SecondOrderPoint::new(
                BundleKind::TTStar,
                z.clone(),
                om.clone(),
                vec![rc(&mut rng), rc(&mut rng)],
                vec![rc(&mut rng), rc(&mut rng)],
            )
            .unwrap();
            let w = SecondOrderPoint::new(
                BundleKind::TTStar,
                z,
                om,
                vec![rc(&mut rng), rc(&mut rng)],
                vec![rc(&mut rng), rc(&mut rng)],
            )
            .unwrap();
            let lhs = pairing_second_order(&v, &dualize(&w).unwrap()).unwrap();
            let rhs = symplectic_form(&w, &v).unwrap() * 2.0;
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn hamiltonian_of_constant_is_zero() {
        let h = ScalarFieldOnCotangent::with_gradient(
            |_, _| r(5.0),
            |z, w| (vec![r(0.0); z.len()], vec![r(0.0); w.len()]),
        );
        let x = hamiltonian_field(&h, &[r(1.0)], &[r(2.0)]).unwrap();
        assert_eq!(x.jet1, vec![r(0.0)]);
        assert_eq!(x.jet2, vec![r(0.0)]);
    }

    #[test]
    fn hamiltonian_of_omega_z() {
        // H = ωz: ∂H = (ω, z), X_H = (z, ω, −2z, 2ω)
        let h = ScalarFieldOnCotangent::with_gradient(
            |z, w| z[0] * w[0],
            |z, w| (vec![w[0]], vec![z[0]]),
        );
        let z = c(0.4, 0.1);
        let w = c(-0.3, 0.7);
        let x = hamiltonian_field(&h, &[z], &[w]).unwrap();
        assert!((x.jet1[0] + 2.0 * z).norm() < 1e-15);
        assert!((x.jet2[0] - 2.0 * w).norm() < 1e-15);
    }

    #[test]
    fn hamiltonian_defining_identity_fd_gradient() {
        // ω_M(X_H, V) = ∂H(V) for an FD-gradient H on n = 2
        let h = ScalarFieldOnCotangent::finite_difference(|z, w| {
            z[0] * w[0] + z[1] * z[1] * w[1] + w[0] * w[1]
        });
        let z = vec![c(0.3, -0.2), c(0.5, 0.4)];
        let om = vec![c(-0.1, 0.6), c(0.7, 0.2)];
        let x = hamiltonian_field(&h, &z, &om).unwrap();
        let (nu, tau) = h.del(&z, &om);
        let v = SecondOrderPoint::new(
            BundleKind::TTStar,
            z.clone(),
            om.clone(),
            vec![c(0.9, 0.1), c(-0.4, 0.3)],
            vec![c(0.2, -0.8), c(0.6, 0.5)],
        )
        .unwrap();
        let lhs = symplectic_form(&x, &v).unwrap();
        let rhs: C = nu.iter().zip(&v.jet1).map(|(a, b)| a * b).sum::<C>()
            + tau.iter().zip(&v.jet2).map(|(a, b)| a * b).sum::<C>();
        assert!((lhs - rhs).norm() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn lie_bracket_simple() {
        // [∂_z, z∂_z] = ∂_z
        let x = VectorField10::with_derivative(
            |z| vec![r(1.0); z.len()],
            |z| DMatrix::zeros(z.len(), z.len()),
        );
        let y = VectorField10::with_derivative(
            |z| vec![z[0]],
            |_| DMatrix::from_element(1, 1, r(1.0)),
        );
        let b = lie_bracket(&x, &y, &[r(1.0)]);
        assert!((b[0] - r(1.0)).norm() < 1e-15);
        let b2 = lie_bracket_via_flip(&x, &y, &[r(1.0)]).unwrap();
        assert!((b2[0] - r(1.0)).norm() < 1e-15);
    }

    #[test]
    fn lie_bracket_antisymmetry() {
        let x = VectorField10::finite_difference(|z| vec![z[0] * z[0], z[0] * z[1]]);
        let p = vec![c(0.3, 0.2), c(-0.5, 0.1)];
        let b = lie_bracket(&x, &x, &p);
        assert!(b.iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn pairing_derivative_linear_curves() {
        // (z,η)(t) = (t, 1+t), (z,ω)(t) = (t, 2+3t): d(ηω)/dt|₀ = 5
        let cv: FiberCurve = Box::new(|t| (vec![r(t)], vec![r(1.0 + t)]));
        let cw: FiberCurve = Box::new(|t| (vec![r(t)], vec![r(2.0 + 3.0 * t)]));
        let res = pairing_derivative_check(&cv, &cw, 1e-5).unwrap();
        assert!(res < 1e-8, "{res}");
    }

    #[test]
    fn pairing_derivative_whitney_violation() {
        let cv: FiberCurve = Box::new(|t| (vec![r(t)], vec![r(1.0)]));
        let cw: FiberCurve = Box::new(|t| (vec![r(2.0 * t)], vec![r(1.0)]));
        // base curves differ: base points disagree away from 0
        let res = pairing_derivative_check(&cv, &cw, 1e-5);
        assert!(res.is_err());
    }

    #[test]
    fn flip_commutes_with_transport_square_map() {
        let map = PolyMap::scalar(&[r(0.0), r(0.0), r(1.0)]);
        let p = SecondOrderPoint::scalar(BundleKind::TT, r(1.0), c(0.3, 0.1), c(-0.2, 0.7), r(0.4));
        let t = map.transition_at(&p.base).unwrap();
        let a = flip(&transport(&p, &t).unwrap()).unwrap();
        let b = transport(&flip(&p).unwrap(), &t).unwrap();
        assert!(a.max_distance(&b) < 1e-13);
    }

    #[test]
    fn switch_commutes_with_transport_square_map() {
        let map = PolyMap::scalar(&[r(0.0), r(0.0), r(1.0)]);
        let p = SecondOrderPoint::scalar(BundleKind::TTStar, r(1.0), r(1.0), r(1.0), r(1.0));
        let t = map.transition_at(&p.base).unwrap();
        let a = switch(&transport(&p, &t).unwrap()).unwrap();
        let b = transport(&switch(&p).unwrap(), &t).unwrap();
        assert!(a.max_distance(&b) < 1e-13, "{a:?}\n{b:?}");
    }

    #[test]
    fn dualize_commutes_with_transport_square_map() {
        let map = PolyMap::scalar(&[r(0.0), r(0.0), r(1.0)]);
        let p = SecondOrderPoint::scalar(BundleKind::TTStar, r(1.0), c(0.2, 0.5), c(1.1, -0.3), c(0.6, 0.9));
        let t = map.transition_at(&p.base).unwrap();
        let a = dualize(&transport(&p, &t).unwrap()).unwrap();
        let b = transport(&dualize(&p).unwrap(), &t).unwrap();
        assert!(a.max_distance(&b) < 1e-13);
    }

    #[test]
    fn fd_transition_matches_analytic() {
        let map = PolyMap::new(
            2,
            vec![
                vec![(r(1.0), vec![1, 0]), (c(0.3, 0.1), vec![2, 0]), (r(0.2), vec![1, 1])],
                vec![(r(1.0), vec![0, 1]), (c(-0.4, 0.2), vec![0, 2])],
            ],
        );
        let z = vec![c(0.2, -0.1), c(0.3, 0.4)];
        let exact = map.transition_at(&z).unwrap();
        let f = |zz: &[C]| map.eval(zz);
        let approx = transition_from_fn(&f, &z, tolerances::FD_CHART_STEP).unwrap();
        assert!((exact.jacobian.clone() - approx.jacobian.clone()).norm() < 1e-8);
        for i in 0..2 {
            assert!((exact.hessian[i].clone() - approx.hessian[i].clone()).norm() < 1e-4);
        }
    }
}
