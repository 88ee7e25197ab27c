//! The named checks behind `l1linf verify`.
//!
//! Every check is a pure function of the suite configuration: its PRNG is
//! a substream of the master seed keyed by the (hashed) check name, so a
//! report is byte-identical across runs and worker counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use l1linf::finsler::{
    dual_metric, royden_expansion, convexity_probe, reflexive_duality_gap, DualOpts,
    FinslerMetric,
};
use l1linf::grid::{Domain, GridField};
use l1linf::integral::{ahlfors_weill, beurling_transform, cauchy_transform, verify_cr_relations};
use l1linf::jet::{
    self, flip, hamiltonian_field, lie_bracket, lie_bracket_via_flip, pairing_derivative_check,
    switch, transport, BundleKind, FiberCurve, PolyMap, ScalarFieldOnCotangent,
    SecondOrderPoint, VectorField10,
};
use l1linf::qdiff::{
    fd_check_l1_variation, l1_norm_grid, l1_variation, pairing_mu_q,
    phase_probe_coefficients, strict_convexity_probe, tb_differential, PolynomialDifferential,
};
use l1linf::torus::{
    self, curvature_check, horizontal_cr_check, levi_n, levi_tau, levi_tau_positive_definite,
    tb_inverse, tb_map, TorusFiberPoint,
};
use l1linf::{tolerances, C};

use crate::Suite;

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub seed: u64,
    pub samples: usize,
    pub grid: usize,
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.samples == 0 {
            return Err("samples must be ≥ 1".into());
        }
        if self.grid < 16 {
            return Err("grid must be ≥ 16".into());
        }
        Ok(())
    }
}

type CheckFn = Box<dyn Fn(&SuiteConfig) -> Result<f64, String> + Send + Sync>;

pub struct Check {
    pub name: &'static str,
    pub tolerance: f64,
    pub run: CheckFn,
}

fn check(name: &'static str, tolerance: f64, run: impl Fn(&SuiteConfig) -> Result<f64, String> + Send + Sync + 'static) -> Check {
    Check { name, tolerance, run: Box::new(run) }
}

/// FNV-1a over the check name; deterministic across platforms and builds,
/// unlike the std hasher.
fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn substream(cfg: &SuiteConfig, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ fnv1a(name))
}

fn cbox(rng: &mut ChaCha8Rng) -> C {
    C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn suite_checks(suite: Suite, _cfg: &SuiteConfig) -> Vec<Check> {
    let mut list = Vec::new();
    if matches!(suite, Suite::Jet | Suite::All) {
        list.extend(jet_checks());
    }
    if matches!(suite, Suite::Finsler | Suite::All) {
        list.extend(finsler_checks());
    }
    if matches!(suite, Suite::Torus | Suite::All) {
        list.extend(torus_checks());
    }
    if matches!(suite, Suite::Qdiff | Suite::All) {
        list.extend(qdiff_checks());
    }
    if matches!(suite, Suite::Integral | Suite::All) {
        list.extend(integral_checks());
    }
    list
}

// ---------------------------------------------------------------------------
// jet suite
// ---------------------------------------------------------------------------

/// A random polynomial chart map close to the identity (degree ≤ 3) with a
/// base point at which its Jacobian is comfortably invertible.
fn random_transition(rng: &mut ChaCha8Rng) -> (PolyMap, Vec<C>) {
    loop {
        let dim = rng.gen_range(1..=3usize);
        let mut components = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut terms: Vec<(C, Vec<u32>)> = Vec::new();
            let mut unit = vec![0u32; dim];
            unit[i] = 1;
            terms.push((C::new(1.0, 0.0), unit));
            for _ in 0..3 {
                let mut exps = vec![0u32; dim];
                let degree = rng.gen_range(0..=3u32);
                for _ in 0..degree {
                    let slot = rng.gen_range(0..dim);
                    exps[slot] += 1;
                }
                terms.push((cbox(rng) * 0.2, exps));
            }
            components.push(terms);
        }
        let map = PolyMap::new(dim, components);
        let z: Vec<C> = (0..dim).map(|_| cbox(rng) * 0.5).collect();
        match map.transition_at(&z) {
            Ok(t) if t.det_abs() > 1e-2 => return (map, z),
            _ => continue,
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, kind: BundleKind, z: &[C]) -> SecondOrderPoint {
    let n = z.len();
    let rand_vec = |rng: &mut ChaCha8Rng| (0..n).map(|_| cbox(rng)).collect::<Vec<C>>();
    SecondOrderPoint::new(kind, z.to_vec(), rand_vec(rng), rand_vec(rng), rand_vec(rng))
        .expect("matching dimensions")
}

fn equivariance_residual(
    cfg: &SuiteConfig,
    name: &'static str,
    kind: BundleKind,
    op: impl Fn(&SecondOrderPoint) -> Result<SecondOrderPoint, jet::JetError>,
) -> Result<f64, String> {
    let mut rng = substream(cfg, name);
    let cases = cfg.samples.min(1000);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (map, z) = random_transition(&mut rng);
        let t = map.transition_at(&z).map_err(err)?;
        let p = random_point(&mut rng, kind, &z);
        let a = op(&transport(&p, &t).map_err(err)?).map_err(err)?;
        let b = transport(&op(&p).map_err(err)?, &t).map_err(err)?;
        worst = worst.max(a.max_distance(&b));
    }
    Ok(worst)
}

fn jet_checks() -> Vec<Check> {
    vec![
        check("jet.equivariance_dualize", tolerances::JET_EQUIVARIANCE, |cfg| {
            equivariance_residual(cfg, "jet.equivariance_dualize", BundleKind::TTStar, jet::dualize)
        }),
        check("jet.equivariance_flip", tolerances::JET_EQUIVARIANCE, |cfg| {
            equivariance_residual(cfg, "jet.equivariance_flip", BundleKind::TT, flip)
        }),
        check("jet.equivariance_switch", tolerances::JET_EQUIVARIANCE, |cfg| {
            equivariance_residual(cfg, "jet.equivariance_switch", BundleKind::TTStar, switch)
        }),
        check("jet.flip_involution", 1e-15, |cfg| {
            let mut rng = substream(cfg, "jet.flip_involution");
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples {
                let n = rng.gen_range(1..=3usize);
                let z: Vec<C> = (0..n).map(|_| cbox(&mut rng)).collect();
                let p = random_point(&mut rng, BundleKind::TT, &z);
                let back = flip(&flip(&p).map_err(err)?).map_err(err)?;
                worst = worst.max(p.max_distance(&back));
            }
            Ok(worst)
        }),
        check("jet.hamiltonian_linear", tolerances::HAMILTONIAN_IDENTITY, |cfg| {
            // H(z, ω) = ω·z has 𝒳 = (z, ω, −2z, 2ω)
            let h = ScalarFieldOnCotangent::with_gradient(
                |z, w| z.iter().zip(w).map(|(a, b)| a * b).sum(),
                |z, w| (w.to_vec(), z.to_vec()),
            );
            let mut rng = substream(cfg, "jet.hamiltonian_linear");
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples {
                let n = rng.gen_range(1..=3usize);
                let z: Vec<C> = (0..n).map(|_| cbox(&mut rng)).collect();
                let w: Vec<C> = (0..n).map(|_| cbox(&mut rng)).collect();
                let x = hamiltonian_field(&h, &z, &w).map_err(err)?;
                let expect = SecondOrderPoint::new(
                    BundleKind::TTStar,
                    z.clone(),
                    w.clone(),
                    z.iter().map(|a| -2.0 * a).collect(),
                    w.iter().map(|b| 2.0 * b).collect(),
                )
                .map_err(err)?;
                worst = worst.max(x.max_distance(&expect));
            }
            Ok(worst)
        }),
        check("jet.lie_bracket_flip", tolerances::LIE_BRACKET_AGREEMENT, |cfg| {
            let mut rng = substream(cfg, "jet.lie_bracket_flip");
            let cases = (cfg.samples / 10).max(10);
            let mut worst: f64 = 0.0;
            for _ in 0..cases {
                let cx: Vec<C> = (0..8).map(|_| cbox(&mut rng)).collect();
                let cy: Vec<C> = (0..8).map(|_| cbox(&mut rng)).collect();
                let field = |c: Vec<C>| {
                    VectorField10::finite_difference(move |z: &[C]| {
                        vec![
                            c[0] + c[1] * z[0] + c[2] * z[1] + c[3] * z[0] * z[1],
                            c[4] + c[5] * z[0] + c[6] * z[1] + c[7] * z[0] * z[0],
                        ]
                    })
                };
                let x = field(cx);
                let y = field(cy);
                let p = vec![cbox(&mut rng), cbox(&mut rng)];
                let direct = lie_bracket(&x, &y, &p);
                let via = lie_bracket_via_flip(&x, &y, &p).map_err(err)?;
                let d = direct
                    .iter()
                    .zip(&via)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                worst = worst.max(d);
            }
            Ok(worst)
        }),
        check("jet.pairing_derivative", tolerances::PAIRING_DERIVATIVE, |cfg| {
            let mut rng = substream(cfg, "jet.pairing_derivative");
            let cases = (cfg.samples / 5).max(20);
            let mut worst: f64 = 0.0;
            for _ in 0..cases {
                let (cv, cw) = random_curve_pair(&mut rng);
                worst = worst.max(pairing_derivative_check(&cv, &cw, tolerances::FD_STEP).map_err(err)?);
            }
            Ok(worst)
        }),
    ]
}

/// A pair of curves in TM and T*M over the same base curve (quadratic in
/// t so the Whitney constraint holds to machine precision).
pub fn random_curve_pair(rng: &mut ChaCha8Rng) -> (FiberCurve, FiberCurve) {
    let n = rng.gen_range(1..=2usize);
    let coeffs = |rng: &mut ChaCha8Rng| -> Vec<[C; 3]> {
        (0..n).map(|_| [cbox(rng), cbox(rng), cbox(rng)]).collect()
    };
    let base = coeffs(rng);
    let fib_v = coeffs(rng);
    let fib_w = coeffs(rng);
    let eval = |cs: &[[C; 3]], t: f64| -> Vec<C> {
        cs.iter().map(|c| c[0] + c[1] * t + c[2] * (t * t)).collect()
    };
    let (b1, b2) = (base.clone(), base);
    let cv: FiberCurve = Box::new(move |t| (eval(&b1, t), eval(&fib_v, t)));
    let cw: FiberCurve = Box::new(move |t| (eval(&b2, t), eval(&fib_w, t)));
    (cv, cw)
}

// ---------------------------------------------------------------------------
// finsler suite
// ---------------------------------------------------------------------------

fn linf_norm(xi: &[C]) -> f64 {
    xi.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn l2_norm(xi: &[C]) -> f64 {
    xi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn finsler_checks() -> Vec<Check> {
    vec![
        check("finsler.dual_l1_linf_analytic", tolerances::DUAL_ANALYTIC, |cfg| {
            let mut rng = substream(cfg, "finsler.dual_l1_linf_analytic");
            let opts = DualOpts { seed: cfg.seed, ..Default::default() };
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples.min(400) {
                let n = rng.gen_range(1..=4usize);
                let xi: Vec<C> = (0..n).map(|_| cbox(&mut rng)).collect();
                let res = dual_metric(&FinslerMetric::l1(n), &[], &xi, &opts).map_err(err)?;
                worst = worst.max((res.value - linf_norm(&xi)).abs());
                let res = dual_metric(&FinslerMetric::linf(n), &[], &xi, &opts).map_err(err)?;
                let l1: f64 = xi.iter().map(|c| c.norm()).sum();
                worst = worst.max((res.value - l1).abs());
            }
            Ok(worst)
        }),
        check("finsler.dual_l2_self_analytic", tolerances::DUAL_ANALYTIC, |cfg| {
            let mut rng = substream(cfg, "finsler.dual_l2_self_analytic");
            let opts = DualOpts { seed: cfg.seed, ..Default::default() };
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples.min(400) {
                let n = rng.gen_range(1..=4usize);
                let xi: Vec<C> = (0..n).map(|_| cbox(&mut rng)).collect();
                let res = dual_metric(&FinslerMetric::l2(n), &[], &xi, &opts).map_err(err)?;
                worst = worst.max((res.value - l2_norm(&xi)).abs());
                if let Some(eta) = res.maximizer {
                    let pair: f64 = eta.iter().zip(&xi).map(|(a, b)| (a * b).re).sum();
                    worst = worst.max((pair - res.value).abs());
                }
            }
            Ok(worst)
        }),
        check("finsler.dual_blackbox", tolerances::DUAL_BLACKBOX, |cfg| {
            let mut rng = substream(cfg, "finsler.dual_blackbox");
            let opts = DualOpts { seed: cfg.seed, ..Default::default() };
            let mut worst: f64 = 0.0;
            for _ in 0..(cfg.samples / 50).max(6) {
                let n = rng.gen_range(1..=3usize);
                let xi: Vec<C> = (0..n).map(|_| cbox(&mut rng)).collect();
                for metric in [FinslerMetric::l1(n), FinslerMetric::l2(n)] {
                    let exact = dual_metric(&metric, &[], &xi, &opts).map_err(err)?.value;
                    let opt = dual_metric(&metric.as_blackbox(), &[], &xi, &opts)
                        .map_err(err)?
                        .value;
                    worst = worst.max((opt - exact).abs());
                }
            }
            Ok(worst)
        }),
        check("finsler.reflexive_duality", tolerances::DUAL_BLACKBOX, |cfg| {
            let opts = DualOpts { seed: cfg.seed, force_blackbox: true, ..Default::default() };
            reflexive_duality_gap(&FinslerMetric::l1(2), &[], 3, cfg.seed, &opts).map_err(err)
        }),
        check("finsler.royden_expansion", 1e-3, |cfg| {
            let mut rng = substream(cfg, "finsler.royden_expansion");
            let weighted = FinslerMetric::weighted_l2(vec![1.5, 0.7]).map_err(err)?;
            let instances: Vec<(FinslerMetric, Vec<C>)> = vec![
                (weighted, vec![C::new(1.2, 0.3)]),
                (FinslerMetric::torus_l1(), vec![C::new(0.2, 1.3)]),
            ];
            let opts = DualOpts { seed: cfg.seed, ..Default::default() };
            let mut worst: f64 = 0.0;
            for (g, x) in &instances {
                let xi: Vec<C> = (0..g.dim).map(|_| cbox(&mut rng)).collect();
                let dx: Vec<C> = (0..x.len()).map(|_| cbox(&mut rng)).collect();
                let dxi: Vec<C> = (0..g.dim).map(|_| cbox(&mut rng)).collect();
                let f0 = dual_metric(g, x, &xi, &opts).map_err(err)?.value;
                let weight: f64 = dx.iter().chain(&dxi).map(|c| c.norm()).sum();
                let mut prev = f64::INFINITY;
                for s in [1e-2, 1e-3, 1e-4] {
                    let sdx: Vec<C> = dx.iter().map(|c| c * s).collect();
                    let sdxi: Vec<C> = dxi.iter().map(|c| c * s).collect();
                    let pred = royden_expansion(g, x, &xi, &sdx, &sdxi).map_err(err)?;
                    let x2: Vec<C> = x.iter().zip(&sdx).map(|(a, b)| a + b).collect();
                    let xi2: Vec<C> = xi.iter().zip(&sdxi).map(|(a, b)| a + b).collect();
                    let actual = dual_metric(g, &x2, &xi2, &opts).map_err(err)?.value - f0;
                    let scaled = (actual - pred).abs() / (s * weight);
                    if scaled > prev * 1.05 {
                        return Err(format!(
                            "residual/scale not decreasing: {scaled} after {prev} at scale {s}"
                        ));
                    }
                    prev = scaled;
                    worst = worst.max(if s == 1e-4 { scaled } else { 0.0 });
                }
            }
            Ok(worst)
        }),
        check("finsler.convexity_homogeneity", 1e-9, |cfg| {
            let rep = convexity_probe(&FinslerMetric::l2(3), &[], cfg.samples.min(500), cfg.seed);
            Ok(rep.homogeneity_max_err + rep.convexity_violations as f64)
        }),
        check("finsler.strictness_classification", 0.5, |cfg| {
            let strict = convexity_probe(&FinslerMetric::l2(3), &[], cfg.samples.min(500), cfg.seed);
            let flat = convexity_probe(&FinslerMetric::l1(3), &[], cfg.samples.min(500), cfg.seed);
            // 0 when ℓ² is strict and ℓ¹ exhibits a flat facet witness
            let misclassified =
                (!strict.is_strict()) as usize as f64 + flat.is_strict() as usize as f64;
            Ok(misclassified)
        }),
        check("finsler.torus_dual_closed_form", tolerances::DUAL_ANALYTIC, |cfg| {
            let mut rng = substream(cfg, "finsler.torus_dual_closed_form");
            let opts = DualOpts { seed: cfg.seed, ..Default::default() };
            let g = FinslerMetric::torus_l1();
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples.min(500) {
                let tau = C::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..4.0));
                let xi = [cbox(&mut rng)];
                let res = dual_metric(&g, &[tau], &xi, &opts).map_err(err)?;
                let expect = xi[0].norm() / (2.0 * tau.im);
                worst = worst.max((res.value - expect).abs() / (1.0 + expect));
            }
            Ok(worst)
        }),
    ]
}

// ---------------------------------------------------------------------------
// torus suite
// ---------------------------------------------------------------------------

fn random_tau_q(rng: &mut ChaCha8Rng) -> (C, C) {
    let tau = C::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..10.0));
    // log-uniform modulus so the small-|q| corner is exercised
    let r = 10f64.powf(rng.gen_range(-3.0..1.0));
    let q = C::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU));
    (tau, q)
}

fn torus_checks() -> Vec<Check> {
    vec![
        check("torus.curvature_defect", tolerances::CURVATURE_DEFECT, |_cfg| {
            curvature_check(-1.0, 1.0, 0.5, 2.5, 0.01).map_err(err)
        }),
        check("torus.hamiltonian_duality", tolerances::TORUS_CLOSED_FORM, |cfg| {
            let mut rng = substream(cfg, "torus.hamiltonian_duality");
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples {
                let (tau, q) = random_tau_q(&mut rng);
                let p = TorusFiberPoint::cotangent(tau, q).map_err(err)?;
                worst = worst.max(torus::hamiltonian_duality_check(&p).map_err(err)?);
            }
            Ok(worst)
        }),
        check("torus.horizontal_cr_deviation", tolerances::CR_LINEARITY, |cfg| {
            let mut rng = substream(cfg, "torus.horizontal_cr_deviation");
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples.min(200) {
                let p = random_unit_sphere_point(&mut rng)?;
                worst = worst.max(horizontal_cr_check(&p).map_err(err)?.deviation);
            }
            Ok(worst)
        }),
        check("torus.horizontal_cr_linearity", tolerances::CR_LINEARITY, |cfg| {
            let mut rng = substream(cfg, "torus.horizontal_cr_linearity");
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples.min(200) {
                let p = random_unit_sphere_point(&mut rng)?;
                worst = worst.max(horizontal_cr_check(&p).map_err(err)?.linearity_defect);
            }
            Ok(worst)
        }),
        check("torus.infinitesimal_duality", tolerances::TORUS_CLOSED_FORM, |cfg| {
            let mut rng = substream(cfg, "torus.infinitesimal_duality");
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples {
                let (tau, q) = random_tau_q(&mut rng);
                let p = TorusFiberPoint::cotangent(tau, q).map_err(err)?;
                worst = worst.max(torus::infinitesimal_duality_gap(&p).map_err(err)?);
            }
            Ok(worst)
        }),
        check("torus.levi_eigenvalues", tolerances::DUAL_ANALYTIC, |cfg| {
            let mut rng = substream(cfg, "torus.levi_eigenvalues");
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples.min(2000) {
                let (tau, q) = random_tau_q(&mut rng);
                let l = levi_n(&TorusFiberPoint::cotangent(tau, q).map_err(err)?).map_err(err)?;
                let m = nalgebra_eigs(&l.unscaled)?;
                let scale = l.lambda_plus.abs().max(1.0);
                worst = worst
                    .max((m.1 - l.lambda_plus).abs() / scale)
                    .max((m.0 - l.lambda_minus).abs() / scale);
            }
            Ok(worst)
        }),
        check("torus.levi_signature", 0.5, |cfg| {
            let mut rng = substream(cfg, "torus.levi_signature");
            let mut violations = 0usize;
            for _ in 0..cfg.samples {
                let (tau, q) = random_tau_q(&mut rng);
                let p = TorusFiberPoint::cotangent(tau, q).map_err(err)?;
                let l = levi_n(&p).map_err(err)?;
                if l.lambda_plus <= 0.0 || l.lambda_minus >= 0.0 {
                    violations += 1;
                }
                // vertical value positive, horizontal value negative
                if l.form_value((C::new(0.0, 0.0), q)) <= 0.0
                    || l.form_value((C::new(tau.im, 0.0), C::i() * q)) >= 0.0
                {
                    violations += 1;
                }
                let mu = TorusFiberPoint::tangent(tau, cbox(&mut rng) + C::new(2.0, 0.0))
                    .map_err(err)?;
                if !levi_tau_positive_definite(&levi_tau(&mu).map_err(err)?) {
                    violations += 1;
                }
            }
            Ok(violations as f64)
        }),
        check("torus.tb_round_trip", tolerances::TORUS_CLOSED_FORM, |cfg| {
            let mut rng = substream(cfg, "torus.tb_round_trip");
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.samples {
                let (tau, q) = random_tau_q(&mut rng);
                let p = TorusFiberPoint::cotangent(tau, q).map_err(err)?;
                let back = tb_inverse(&tb_map(&p).map_err(err)?).map_err(err)?;
                worst = worst
                    .max((back.tau - p.tau).norm())
                    .max((back.fiber - p.fiber).norm() / (1.0 + p.fiber.norm()));
            }
            Ok(worst)
        }),
    ]
}

fn random_unit_sphere_point(rng: &mut ChaCha8Rng) -> Result<TorusFiberPoint, String> {
    let tau = C::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..5.0));
    let q = C::from_polar(
        1.0 / (2.0 * tau.im),
        rng.gen_range(0.0..std::f64::consts::TAU),
    );
    TorusFiberPoint::cotangent(tau, q).map_err(err)
}

fn nalgebra_eigs(m: &nalgebra::Matrix2<C>) -> Result<(f64, f64), String> {
    let d = nalgebra::DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
    let eig = d
        .eigenvalues()
        .ok_or_else(|| "eigen decomposition failed".to_string())?;
    let mut vals: Vec<f64> = eig.iter().map(|e| e.re).collect();
    vals.sort_by(f64::total_cmp);
    Ok((vals[0], vals[1]))
}

// ---------------------------------------------------------------------------
// qdiff suite
// ---------------------------------------------------------------------------

fn disk(n: usize, f: impl Fn(C) -> C) -> Result<GridField, String> {
    GridField::from_fn(Domain::UnitDisk, n, n, f).map_err(err)
}

fn normalized(g: &GridField) -> Result<GridField, String> {
    let n = l1_norm_grid(g).map_err(err)?;
    if n == 0.0 {
        return Err("cannot normalize the zero differential".into());
    }
    Ok(g.map(|_, s| s / n))
}

fn qdiff_checks() -> Vec<Check> {
    vec![
        check("qdiff.extremality_equality", 1e-9, |cfg| {
            let q = disk(cfg.grid, |z| z + C::new(0.1, 0.3))?;
            let mu = tb_differential(&q, 1.0).map_err(err)?;
            let p = pairing_mu_q(&mu, &q).map_err(err)?;
            let norm = l1_norm_grid(&q).map_err(err)?;
            Ok((p.re - norm).abs() / norm + p.im.abs() / norm)
        }),
        check("qdiff.extremality_gap", 1e-12, |cfg| {
            let mut rng = substream(cfg, "qdiff.extremality_gap");
            let q = disk(cfg.grid.min(256), |z| z + C::new(0.1, 0.3))?;
            let norm = l1_norm_grid(&q).map_err(err)?;
            let mut min_gap = f64::INFINITY;
            for _ in 0..50 {
                let theta = rng.gen_range(0.3..std::f64::consts::PI);
                let split = rng.gen_range(-0.5..0.5);
                // unit-sup μ differing from q̄/|q| on a half-plane cut
                let mu = q.map(|z, s| {
                    if s.norm() == 0.0 {
                        C::new(0.0, 0.0)
                    } else {
                        let aligned = s.conj() / s.norm();
                        if z.re > split {
                            aligned * C::from_polar(1.0, theta)
                        } else {
                            aligned
                        }
                    }
                });
                let p = pairing_mu_q(&mu, &q).map_err(err)?;
                min_gap = min_gap.min(norm - p.re);
            }
            // residual is the shortfall against the required 1e-3 gap
            Ok((1e-3 - min_gap).max(0.0))
        }),
        check("qdiff.phase_probe", 1e-2, |cfg| {
            let n = cfg.grid.min(256);
            let q0 = disk(n, |z| z + C::new(0.3, 0.2))?;
            let phi = disk(n, |z| z * z - C::new(0.1, 0.4))?;
            let (a, b) = l1_variation(&q0, &phi).map_err(err)?;
            let (pa, pb) = phase_probe_coefficients(&q0, &phi, 1e-4).map_err(err)?;
            Ok(((pa - a).norm() / (1.0 + a.norm())).max((pb - b).norm() / (1.0 + b.norm())))
        }),
        check("qdiff.strict_convexity", 1e-3, |cfg| {
            let mut rng = substream(cfg, "qdiff.strict_convexity");
            let n = cfg.grid.min(128);
            let mut min_margin = f64::INFINITY;
            for _ in 0..(cfg.samples / 50).max(10) {
                let (c1, c2, c3) = (cbox(&mut rng), cbox(&mut rng), cbox(&mut rng));
                let (d1, d2, d3) = (cbox(&mut rng), cbox(&mut rng), cbox(&mut rng));
                let q1 = normalized(&disk(n, |z| c1 + c2 * z + c3 * z * z)?)?;
                let q2 = normalized(&disk(n, |z| d1 + d2 * z + d3 * z * z)?)?;
                let rep = strict_convexity_probe(&q1, &q2).map_err(err)?;
                if !rep.degenerate {
                    min_margin = min_margin.min(rep.margin);
                }
            }
            let positivity_defect = (-min_margin).max(0.0);
            let q1 = normalized(&disk(n, |z| z + C::new(0.3, 0.1))?)?;
            let q2 = q1.map(|_, s| C::i() * s);
            let rotated = strict_convexity_probe(&q1, &q2).map_err(err)?;
            Ok(positivity_defect + (rotated.margin - (2.0 - 2.0_f64.sqrt())).abs())
        }),
        check("qdiff.variation_fd", 1e-3, |cfg| {
            let q0 = disk(cfg.grid, |z| z)?;
            let phi = disk(cfg.grid, |_| C::new(1.0, 0.0))?;
            let rep = fd_check_l1_variation(&q0, &phi, &[1e-2, 1e-3, 1e-4]).map_err(err)?;
            let last = rep.steps.last().ok_or("empty variation report")?;
            Ok(last.real_residual.max(last.circle_residual))
        }),
    ]
}

// ---------------------------------------------------------------------------
// integral suite
// ---------------------------------------------------------------------------

fn integral_checks() -> Vec<Check> {
    vec![
        check("integral.ahlfors_weill", 1e-12, |_cfg| {
            // φ(w) = w⁴ gives the real profile −½(|z|²−1)²
            let phi = PolynomialDifferential::new(vec![
                C::new(0.0, 0.0),
                C::new(0.0, 0.0),
                C::new(0.0, 0.0),
                C::new(0.0, 0.0),
                C::new(1.0, 0.0),
            ]);
            let mut worst: f64 = 0.0;
            for z in [C::new(0.0, 0.0), C::new(0.3, 0.4), C::new(0.9, 0.0)] {
                let v = ahlfors_weill(&phi, z).map_err(err)?;
                let expect = C::new(-0.5 * (z.norm_sqr() - 1.0).powi(2), 0.0);
                worst = worst.max((v - expect).norm());
            }
            Ok(worst)
        }),
        check("integral.cauchy_disk", tolerances::CAUCHY_DISK_512, |cfg| {
            let n = (2 * cfg.grid).max(512);
            let f = GridField::from_fn(Domain::UnitDisk, n, n, |_| C::new(1.0, 0.0))
                .map_err(err)?;
            let mut worst: f64 = 0.0;
            for z in [C::new(0.5, 0.0), C::new(-0.2, 0.3), C::new(0.1, -0.6)] {
                worst = worst.max((cauchy_transform(&f, z) - z.conj()).norm());
            }
            for z in [C::new(2.0, 0.0), C::new(-1.5, 1.0)] {
                worst = worst.max((cauchy_transform(&f, z) - 1.0 / z).norm());
            }
            Ok(worst)
        }),
        check("integral.cr_residuals", tolerances::CR_RESIDUAL_256, |cfg| {
            let omega = |z: C| C::new((-4.0 * z.norm_sqr()).exp(), 0.0);
            let report = verify_cr_relations(
                omega,
                Domain::Rectangle { x0: -2.0, x1: 2.0, y0: -2.0, y1: 2.0 },
                cfg.grid,
                &[C::new(0.0, 0.0), C::new(0.3, -0.2), C::new(-0.4, 0.5)],
                |z| 2.0 - z.norm(),
            )
            .map_err(err)?;
            Ok(report.max_residual())
        }),
        check("integral.transform_linearity", 1e-10, |_cfg| {
            let mk = |f: Box<dyn Fn(C) -> C>| {
                GridField::from_fn(Domain::UnitDisk, 64, 64, |z| f(z)).map_err(err)
            };
            let f1 = mk(Box::new(|z| z))?;
            let f2 = mk(Box::new(|z| z * z + C::new(0.3, 0.0)))?;
            let (a, b) = (C::new(2.0, -1.0), C::new(0.5, 0.7));
            let combo = mk(Box::new(move |z| a * z + b * (z * z + C::new(0.3, 0.0))))?;
            let z = C::new(0.2, 0.1);
            let mut worst: f64 = 0.0;
            for op in [cauchy_transform, beurling_transform] {
                let lhs = op(&combo, z);
                let rhs = a * op(&f1, z) + b * op(&f2, z);
                worst = worst.max((lhs - rhs).norm() / (1.0 + rhs.norm()));
            }
            Ok(worst)
        }),
        check("integral.variation_torus_cross_check", 1e-10, |cfg| {
            // the grid field −2i·q on the fundamental domain integrates to
            // the closed-form torus norm 2|q|·Im τ
            let mut rng = substream(cfg, "integral.variation_torus_cross_check");
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let tau = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.3..3.0));
                let qc = cbox(&mut rng) + C::new(1.5, 0.0);
                let g = GridField::from_fn(
                    Domain::TorusFundamental { tau },
                    cfg.grid.min(64),
                    cfg.grid.min(64),
                    |_| -C::new(0.0, 2.0) * qc,
                )
                .map_err(err)?;
                let closed = torus::l1_norm(&TorusFiberPoint::cotangent(tau, qc).map_err(err)?)
                    .map_err(err)?;
                let grid_norm = l1_norm_grid(&g).map_err(err)?;
                worst = worst.max((grid_norm - closed).abs() / closed);
            }
            Ok(worst)
        }),
    ]
}
