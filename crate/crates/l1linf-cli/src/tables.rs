//! Deterministic CSV tables: Levi eigenvalue scans, dual-norm comparisons,
//! and the CR-relation convergence study.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use l1linf::finsler::{dual_metric, DualOpts, FinslerMetric};
use l1linf::grid::Domain;
use l1linf::integral::verify_cr_relations;
use l1linf::torus::{levi_n, TorusFiberPoint};
use l1linf::C;

use crate::report::fmt_f64;
use crate::TableKind;

pub fn emit(
    kind: TableKind,
    seed: u64,
    lattice: usize,
    metric: &str,
    dim: usize,
    count: usize,
    resolutions: &str,
    out: &Path,
) -> Result<bool, String> {
    let body = match kind {
        TableKind::LeviScan => levi_scan(lattice)?,
        TableKind::DualNormTable => dual_norm_table(metric, dim, count, seed)?,
        TableKind::CrConvergence => cr_convergence(resolutions)?,
    };
    std::fs::write(out, body).map_err(|e| format!("writing {}: {e}", out.display()))?;
    Ok(true)
}

/// λ± of the unscaled Levi matrix over a (τ, q) lattice, with the
/// signature verdict per row.
fn levi_scan(lattice: usize) -> Result<String, String> {
    if lattice < 2 {
        return Err("lattice must be ≥ 2".into());
    }
    let mut s = String::from("re_tau,im_tau,re_q,im_q,lambda_plus,lambda_minus,sign_ok\n");
    for j in 0..lattice {
        for i in 0..lattice {
            let u = i as f64 / (lattice - 1) as f64;
            let v = j as f64 / (lattice - 1) as f64;
            let tau = C::new(-0.9 + 1.8 * u, 0.5 + 2.0 * v);
            let q = C::from_polar(0.1 + 2.0 * v, std::f64::consts::TAU * u);
            let p = TorusFiberPoint::cotangent(tau, q).map_err(|e| e.to_string())?;
            let l = levi_n(&p).map_err(|e| e.to_string())?;
            let sign_ok = l.lambda_plus > 0.0 && l.lambda_minus < 0.0;
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_f64(tau.re),
                fmt_f64(tau.im),
                fmt_f64(q.re),
                fmt_f64(q.im),
                fmt_f64(l.lambda_plus),
                fmt_f64(l.lambda_minus),
                sign_ok
            ));
        }
    }
    Ok(s)
}

/// Analytic vs optimizer dual-norm values on random ξ.
fn dual_norm_table(metric: &str, dim: usize, count: usize, seed: u64) -> Result<String, String> {
    let g = match metric {
        "l1" => FinslerMetric::l1(dim),
        "l2" => FinslerMetric::l2(dim),
        "linf" => FinslerMetric::linf(dim),
        other => return Err(format!("unknown metric `{other}` (expected l1, l2, or linf)")),
    };
    if dim == 0 {
        return Err("dim must be ≥ 1".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let analytic_opts = DualOpts { seed, ..Default::default() };
    let blackbox_opts = DualOpts { seed, force_blackbox: true, ..Default::default() };
    let mut s = String::from("metric,dim,xi_index,analytic,optimized,gap\n");
    for k in 0..count {
        let xi: Vec<C> = (0..dim)
            .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let analytic = dual_metric(&g, &[], &xi, &analytic_opts)
            .map_err(|e| e.to_string())?
            .value;
        let optimized = dual_metric(&g, &[], &xi, &blackbox_opts)
            .map_err(|e| e.to_string())?
            .value;
        s.push_str(&format!(
            "{metric},{dim},{k},{},{},{}\n",
            fmt_f64(analytic),
            fmt_f64(optimized),
            fmt_f64((analytic - optimized).abs())
        ));
    }
    Ok(s)
}

/// Residuals of the CR relations of the Gaussian-bump study at each
/// resolution, with the empirical order between consecutive rows.
fn cr_convergence(resolutions: &str) -> Result<String, String> {
    let res: Vec<usize> = resolutions
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad resolution `{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    if res.is_empty() {
        return Err("need at least one resolution".into());
    }
    let omega = |z: C| C::new((-4.0 * z.norm_sqr()).exp(), 0.0);
    let probes = [C::new(0.0, 0.0), C::new(0.3, -0.2), C::new(-0.4, 0.5)];
    let mut s = String::from("resolution,residual_T,residual_H,order\n");
    let mut prev: Option<(usize, f64)> = None;
    for &n in &res {
        let rep = verify_cr_relations(
            omega,
            Domain::Rectangle { x0: -2.0, x1: 2.0, y0: -2.0, y1: 2.0 },
            n,
            &probes,
            |z| 2.0 - z.norm(),
        )
        .map_err(|e| e.to_string())?;
        let rt = rep.t_zbar_residual;
        let rh = rep.t_z_residual;
        let order = match prev {
            Some((pn, pr)) if rt > 0.0 => {
                let o = (pr / rt).ln() / (n as f64 / pn as f64).ln();
                fmt_f64(o)
            }
            _ => String::new(),
        };
        s.push_str(&format!("{n},{},{},{order}\n", fmt_f64(rt), fmt_f64(rh)));
        prev = Some((n, rt));
    }
    Ok(s)
}
