//! s-harmonic replacement on balls, the average inequality at a maximum, and
//! the exterior mass that drives the contraction `u^+(0) <= (1 - m) A`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{DensityShell, DomainSpec};
use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::kernel::{legendre16, legendre8, norm, poisson_integral, BallQuadrature, FracParams};
use crate::operator::{tail_integral, FracLaplacian, QuadratureSpec, TailGeometry};
use crate::quadrature::gauss_jacobi;
use crate::report::{Status, VerificationReport};

/// Ball quadrature resolving kinks of lattice data at spacing `h`.
fn lattice_ball_quadrature(u: &GridFunction, center: &[f64], r: f64) -> BallQuadrature {
    let h = u.grid.h.iter().copied().fold(f64::INFINITY, f64::min);
    let lo = u.grid.lower();
    let hi = u.grid.upper();
    let reach = (0..center.len())
        .map(|k| (center[k] - lo[k]).abs().max((hi[k] - center[k]).abs()))
        .fold(0.0, |a: f64, b| a.hypot(b));
    BallQuadrature { max_panel: h, dense_until: reach + r, ..BallQuadrature::default() }
}

/// `û(x) = ∫_{|y-c|>r} P_r(y - c, x - c) u^+(y) dy` at one point inside the ball.
pub fn replacement_value(p: &FracParams, u_plus: &GridFunction, center: &[f64], r: f64, x: &[f64]) -> Result<f64> {
    let opts = lattice_ball_quadrature(u_plus, center, r);
    poisson_integral(p, r, center, x, &opts, |y| u_plus.evaluate(y).max(0.0))
}

/// Replace `u^+` inside `B_r(center)` by its Poisson integral. Lattice values
/// outside the ball, and the exterior model, are left untouched.
pub fn harmonic_replacement(p: &FracParams, u_plus: &GridFunction, center: &[f64], r: f64) -> Result<GridFunction> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    if let Some(v) = u_plus.values.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidParameter(format!("replacement needs nonnegative data, found {v}")));
    }
    let g = &u_plus.grid;
    let lo = g.lower();
    let hi = g.upper();
    if (0..center.len()).any(|k| center[k] - r < lo[k] || center[k] + r > hi[k]) {
        return Err(Error::InvalidParameter("replacement ball must lie inside the grid hull".into()));
    }
    let opts = lattice_ball_quadrature(u_plus, center, r);
    let inside: Vec<usize> = (0..g.len())
        .filter(|&f| {
            let x = g.point(f);
            let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
            norm(&d) < r * (1.0 - 1e-9)
        })
        .collect();
    let vals: Result<Vec<f64>> = inside
        .par_iter()
        .map(|&f| poisson_integral(p, r, center, &g.point(f), &opts, |y| u_plus.evaluate(y).max(0.0)))
        .collect();
    let mut out = u_plus.clone();
    for (&f, v) in inside.iter().zip(vals?) {
        out.values[f] = v;
    }
    Ok(out)
}

/// Low-discrepancy points in `B_{fill r}(center)` for `n = 1, 2`.
pub fn ball_probes(center: &[f64], r: f64, count: usize, fill: f64) -> Vec<Vec<f64>> {
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    // plastic-number sequence for the plane
    let g2 = 1.324_717_957_244_746_f64;
    let (a1, a2) = (1.0 / g2, 1.0 / (g2 * g2));
    (0..count)
        .map(|i| {
            let i = i as f64 + 1.0;
            match center.len() {
                1 => vec![center[0] + fill * r * (2.0 * (0.5 + i * golden).fract() - 1.0)],
                _ => {
                    let u = (0.5 + i * a1).fract();
                    let v = (0.5 + i * a2).fract();
                    let rad = fill * r * u.sqrt();
                    let th = 2.0 * PI * v;
                    let mut x = center.to_vec();
                    x[0] += rad * th.cos();
                    x[1] += rad * th.sin();
                    x
                }
            }
        })
        .collect()
}

/// `(-Δ)^s u + c u <= tol` at the probes where `u > 0`.
pub fn check_subharmonic_premise(
    p: &FracParams,
    u: &GridFunction,
    probes: &[Vec<f64>],
    c: f64,
    q: &QuadratureSpec,
) -> Result<VerificationReport> {
    let op = FracLaplacian::for_grid(p, &u.grid, q)?;
    let vals: Result<Vec<(usize, f64)>> = probes
        .par_iter()
        .enumerate()
        .filter(|(_, x)| u.evaluate(x) > 0.0)
        .map(|(i, x)| Ok((i, op.eval(u, x)? + c * u.evaluate(x))))
        .collect();
    let vals = vals?;
    let (mut worst, mut at) = (f64::NEG_INFINITY, None);
    for &(i, v) in &vals {
        if v > worst {
            worst = v;
            at = Some(i);
        }
    }
    let ok = worst <= q.tol;
    let mut r = VerificationReport::new(
        "subharmonic_premise",
        Status::from_bool(ok),
        format!("max of (-Δ)^s u + c u over {} positive probes: {worst:.3e}", vals.len()),
    )
    .quantity("max_operator_value", if vals.is_empty() { 0.0 } else { worst })
    .quantity("positive_probes", vals.len() as f64)
    .quantity("tolerance", q.tol);
    if let Some(i) = at {
        r = r.witness("worst_probe", probes[i].clone(), worst);
    }
    Ok(r)
}

/// `u^+ <= û` at the probes inside `B_r(center)`.
///
/// With a failed `premise` report the outcome is labeled PREMISE-FAIL: a
/// violation then says nothing about the comparison principle.
pub fn check_subharmonic_dominance(
    p: &FracParams,
    u: &GridFunction,
    center: &[f64],
    r: f64,
    probes: &[Vec<f64>],
    tol: f64,
    premise: Option<&VerificationReport>,
) -> Result<VerificationReport> {
    let opts = lattice_ball_quadrature(u, center, r);
    let inside: Vec<&Vec<f64>> = probes
        .iter()
        .filter(|x| {
            let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
            norm(&d) < r
        })
        .collect();
    let margins: Result<Vec<(f64, f64)>> = inside
        .par_iter()
        .map(|x| {
            let hat = poisson_integral(p, r, center, x, &opts, |y| u.evaluate(y).max(0.0))?;
            Ok((hat - u.evaluate(x).max(0.0), hat))
        })
        .collect();
    let margins = margins?;
    let sup_plus = u.values.iter().fold(0.0f64, |a, v| a.max(*v));
    let (mut worst, mut at) = (f64::INFINITY, 0);
    for (i, (m, _)) in margins.iter().enumerate() {
        if *m < worst {
            worst = *m;
            at = i;
        }
    }
    if margins.is_empty() {
        worst = 0.0;
    }
    let premises_ok = premise.is_none_or(|r| r.passed());
    let status = if !premises_ok {
        Status::PremiseFail
    } else {
        Status::from_bool(worst >= -tol)
    };
    let mut rep = VerificationReport::new(
        "subharmonic_dominance",
        status,
        format!("worst margin û - u+ = {worst:.3e} over {} probes", margins.len()),
    )
    .quantity("worst_margin", worst)
    .quantity("tolerance", tol)
    .quantity("A", sup_plus)
    .quantity("radius", r);
    if let Some(pr) = premise {
        rep = rep.premise("subharmonic_premise", pr.passed(), pr.summary.clone());
    }
    if !margins.is_empty() {
        rep = rep.witness("worst_probe", inside[at].clone(), worst);
    }
    rep.config = serde_json::json!({ "center": center, "radius": r, "probes": probes.len() });
    Ok(rep)
}

/// `C_0/C_{n,s} r^{2s} (-Δ)^s u(x̄) + C_0 ∫_{B_r^c(x̄)} r^{2s} |x̄-y|^{-n-2s} u(y) dy - u(x̄)`.
pub fn average_inequality_residual(p: &FracParams, u: &GridFunction, xbar: &[f64], r: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let mut q2 = q.clone();
    q2.r_outer = Some(q.r_outer.unwrap_or(0.0).max(1.5 * r));
    let op = FracLaplacian::for_grid(p, &u.grid, &q2)?;
    let lap = op.eval(u, xbar)?;
    let half = op.kernel().half_widths();
    let s = p.s;
    let h = u.grid.h.iter().copied().fold(f64::INFINITY, f64::min);
    let rule = legendre8();
    let near = match p.n {
        1 => {
            let a = half[0];
            let panels = ((a - r) / (0.5 * h)).ceil().max(1.0) as usize;
            let dt = (a - r) / panels as f64;
            let mut acc = 0.0;
            for k in 0..panels {
                let lo = r + k as f64 * dt;
                acc += rule.integrate(lo, lo + dt, |t| {
                    (u.evaluate(&[xbar[0] + t]) + u.evaluate(&[xbar[0] - t])) * t.powf(-1.0 - 2.0 * s)
                });
            }
            acc
        }
        2 => {
            let (a, b) = (half[0], half[1]);
            let thc = (b / a).atan();
            let corners = [-thc, thc, PI - thc, PI + thc, 2.0 * PI - thc];
            let per_arc = (op.spec().nodes_angular / 64).max(1);
            let rt = legendre16();
            let mut acc = 0.0;
            for w in corners.windows(2) {
                for k in 0..per_arc {
                    let l = w[0] + (w[1] - w[0]) * k as f64 / per_arc as f64;
                    let hgt = w[0] + (w[1] - w[0]) * (k + 1) as f64 / per_arc as f64;
                    acc += rt.integrate(l, hgt, |th| {
                        let (c, sn) = (th.cos(), th.sin());
                        let rho = (a / c.abs()).min(b / sn.abs());
                        let panels = ((rho - r) / (0.5 * h)).ceil().max(1.0) as usize;
                        let dt = (rho - r) / panels as f64;
                        let mut line = 0.0;
                        for j in 0..panels {
                            let lo = r + j as f64 * dt;
                            line += rule.integrate(lo, lo + dt, |t| {
                                u.evaluate(&[xbar[0] + t * c, xbar[1] + t * sn]) * t.powf(-1.0 - 2.0 * s)
                            });
                        }
                        line
                    });
                }
            }
            acc
        }
        n => return Err(Error::Unsupported(format!("average inequality implemented for n = 1, 2 (got {n})"))),
    };
    let far = op.tail(&u.exterior, xbar)?;
    let w = p.c0 * r.powf(2.0 * s);
    Ok(w / p.c_ns * lap + w * (near + far) - u.evaluate(xbar))
}

/// `∫_{|y|>r} r^{2s} |y|^{-n-2s} φ(x̄ + y) dy` for an exterior model alone,
/// used when the whole ball complement lies outside the lattice hull.
pub fn exterior_average(p: &FracParams, phi: &crate::field::ExteriorModel, xbar: &[f64], r: f64) -> Result<f64> {
    if p.n != 1 {
        return Err(Error::Unsupported("exterior_average is one-dimensional".into()));
    }
    let geo = TailGeometry::new(p.s, vec![r], 64);
    Ok(p.c0 * r.powf(2.0 * p.s) * tail_integral(phi, xbar, &geo, Default::default())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellMass {
    pub k: i32,
    /// Kernel mass of the whole shell.
    pub kernel_mass: f64,
    /// Kernel-weighted fraction of the shell in `D^c`.
    pub fraction: f64,
    pub mass: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionMass {
    pub m: f64,
    /// 95% half-width of the Monte-Carlo error.
    pub ci: f64,
    /// `max(m - ci, 0)`.
    pub lower_bound: f64,
    pub shells: Vec<ShellMass>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionOptions {
    pub samples_per_shell: usize,
    pub seed: u64,
    /// Fail when the confidence half-width exceeds this.
    pub max_ci: f64,
}

impl Default for ContractionOptions {
    fn default() -> Self {
        Self { samples_per_shell: 100_000, seed: 0, max_ci: f64::INFINITY }
    }
}

/// Radial nodes and weights of the exterior kernel on `2^k r < |y| < 2^{k+1} r`,
/// including the sphere measure.
fn shell_nodes(p: &FracParams, r: f64, k: i32) -> Vec<(f64, f64)> {
    let s = p.s;
    let lo = r * 2f64.powi(k);
    let hi = 2.0 * lo;
    let pref = p.b_ns * p.omega * r.powf(2.0 * s);
    let mut out = Vec::new();
    if k == 0 {
        // (t - r)^{-s} singular at the ring
        let gj = gauss_jacobi(24, 0.0, -s);
        let half = 0.5 * (hi - lo);
        let scale = half.powf(1.0 - s);
        for (x, w) in gj.nodes.iter().zip(&gj.weights) {
            let t = lo + half * (1.0 + x);
            out.push((t, pref * w * scale * (t + r).powf(-s) / t));
        }
    } else {
        let rule = legendre16();
        let zs = 2f64.ln();
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let z = 0.5 * zs * (1.0 + x);
            let t = lo * z.exp();
            // dt = t dz
            out.push((t, pref * 0.5 * zs * w * (t * t - r * r).powf(-s)));
        }
    }
    out
}

/// Kernel mass `m` of `D^c ∩ {|y - center| > r}` over the shells `k0..=kmax`.
pub fn contraction_mass(
    p: &FracParams,
    d: &DomainSpec,
    center: &[f64],
    r: f64,
    k0: i32,
    kmax: i32,
    opts: &ContractionOptions,
) -> Result<ContractionMass> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    if k0 < 0 || kmax < k0 {
        return Err(Error::InvalidParameter("shell range must satisfy 0 <= k0 <= kmax".into()));
    }
    let n = p.n;
    let ks: Vec<i32> = (k0..=kmax).collect();
    let shells: Vec<ShellMass> = ks
        .par_iter()
        .map(|&k| {
            let nodes = shell_nodes(p, r, k);
            let kernel_mass: f64 = nodes.iter().map(|t| t.1).sum();
            let per_node = (opts.samples_per_shell / nodes.len()).max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let mut mass = 0.0;
            let mut var = 0.0;
            let mut y = vec![0.0; n];
            for &(t, w) in &nodes {
                let (hits, total) = if n == 1 {
                    // the "sphere" is two points; exact
                    let mut h = 0;
                    for sign in [-1.0, 1.0] {
                        y[0] = center[0] + sign * t;
                        if !d.contains(&y) {
                            h += 1;
                        }
                    }
                    (h, 2)
                } else {
                    let mut h = 0;
                    for _ in 0..per_node {
                        random_direction(&mut rng, &mut y);
                        for (v, c) in y.iter_mut().zip(center) {
                            *v = c + t * *v;
                        }
                        if !d.contains(&y) {
                            h += 1;
                        }
                    }
                    (h, per_node)
                };
                let f = hits as f64 / total as f64;
                mass += w * f;
                if n > 1 {
                    var += w * w * f * (1.0 - f) / total as f64;
                }
            }
            ShellMass { k, kernel_mass, fraction: mass / kernel_mass, mass, ci: 1.96 * var.sqrt() }
        })
        .collect();
    let m: f64 = shells.iter().map(|s| s.mass).sum::<f64>().clamp(0.0, 1.0);
    let ci = shells.iter().map(|s| s.ci * s.ci).sum::<f64>().sqrt();
    if ci > opts.max_ci {
        return Err(Error::SamplingBudget(format!("contraction mass half-width {ci:.3e} above target {:.3e}", opts.max_ci)));
    }
    Ok(ContractionMass { m, ci, lower_bound: (m - ci).max(0.0), shells })
}

fn random_direction(rng: &mut ChaCha8Rng, y: &mut [f64]) {
    if y.len() == 2 {
        let th = rng.gen_range(0.0..2.0 * PI);
        y[0] = th.cos();
        y[1] = th.sin();
        return;
    }
    loop {
        let mut r2 = 0.0;
        for v in y.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
            r2 += *v * *v;
        }
        if r2 > 1e-6 && r2 <= 1.0 {
            let r = r2.sqrt();
            y.iter_mut().for_each(|v| *v /= r);
            return;
        }
    }
}

/// First shell whose measured density exceeds half the tail minimum.
pub fn default_k0(profile: &[DensityShell]) -> Option<i32> {
    if profile.is_empty() {
        return None;
    }
    let tail = &profile[profile.len() / 2..];
    let tmin = tail.iter().map(|s| s.rho).fold(f64::INFINITY, f64::min);
    if !(tmin > 0.0) {
        return None;
    }
    profile.iter().find(|s| s.rho > 0.5 * tmin).map(|s| s.k)
}
