//! Fractional parameters, normalization constants, and the explicit kernels:
//! the Poisson kernel of a ball, its exterior convolution kernel, and the
//! weighted tail kernel behind the average inequality.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_jacobi, gauss_legendre, jacobi_integrate, Rule};
use crate::special::{gamma, sphere_area};

/// Relative band around the singular ring `|y| = r` inside which kernel
/// evaluators refuse to return a value.
pub const DEFAULT_RING_BAND: f64 = 1e-12;

/// Dimension, order, and the constants that go with them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    pub n: usize,
    pub s: f64,
    /// Operator normalization `C_{n,s}` (Fourier-symbol convention).
    pub c_ns: f64,
    /// Poisson constant `B(n,s)`.
    pub b_ns: f64,
    /// Average-inequality constant `C_0 = 2s / |S^{n-1}|`.
    pub c0: f64,
    /// `|S^{n-1}|`.
    pub omega: f64,
}

impl FracParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter(format!("dimension must be >= 1, got {n}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("order s must lie in (0, 1), got {s}")));
        }
        let half_n = n as f64 / 2.0;
        let omega = sphere_area(n);
        let c_ns = 4f64.powf(s) * gamma(half_n + s) / (PI.powf(half_n) * gamma(-s).abs());
        let b_ns = gamma(half_n) / PI.powf(half_n + 1.0) * (PI * s).sin();
        let c0 = 2.0 * s / omega;
        Ok(Self { n, s, c_ns, b_ns, c0, omega })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Shorthand for [`FracParams::new`].
pub fn make_params(n: usize, s: f64) -> Result<FracParams> {
    FracParams::new(n, s)
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn check_ring(r: f64, t: f64, band: f64) -> Result<()> {
    if ((t - r) / r).abs() <= band {
        return Err(Error::SingularRing { radius: r, at: t });
    }
    Ok(())
}

/// Poisson kernel `P_r(y, x)` of the ball `B_r(0)`, coordinates relative to
/// the center. Zero when `|y| < r`.
pub fn poisson_kernel(p: &FracParams, r: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    poisson_kernel_with_band(p, r, x, y, DEFAULT_RING_BAND)
}

pub fn poisson_kernel_with_band(p: &FracParams, r: f64, x: &[f64], y: &[f64], band: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let ax = norm(x);
    if ax >= r {
        return Err(Error::OutsideBall { radius: r, at: ax });
    }
    let ay = norm(y);
    check_ring(r, ay, band)?;
    if ay < r {
        return Ok(0.0);
    }
    let ratio = (r * r - ax * ax) / (ay * ay - r * r);
    Ok(p.b_ns * ratio.powf(p.s) * dist(x, y).powi(-(p.n as i32)))
}

/// Exterior kernel `E^{(r)}(x) = B r^{2s} (|x|^2 - r^2)^{-s} |x|^{-n}` for
/// `|x| > r`, zero inside the ball.
pub fn exterior_kernel(p: &FracParams, r: f64, x: &[f64]) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let ax = norm(x);
    check_ring(r, ax, DEFAULT_RING_BAND)?;
    if ax < r {
        return Ok(0.0);
    }
    Ok(exterior_kernel_radial(p, r, ax))
}

pub(crate) fn exterior_kernel_radial(p: &FracParams, r: f64, t: f64) -> f64 {
    p.b_ns * r.powf(2.0 * p.s) * (t * t - r * r).powf(-p.s) * t.powi(-(p.n as i32))
}

/// Weighted tail kernel `r^{2s} |y|^{-n-2s}` of the average inequality.
pub fn average_kernel(p: &FracParams, r: f64, y: &[f64]) -> f64 {
    r.powf(2.0 * p.s) * norm(y).powf(-(p.n as f64) - 2.0 * p.s)
}

// ---------------------------------------------------------------------------
// Radial / angular quadrature around a ball.

pub(crate) fn legendre16() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

pub(crate) fn legendre8() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(8))
}

/// Number of log-radial panels; the radius grows by `e` per panel, so 40
/// panels reach `e^40 ~ 2e17` times the starting scale.
const LOG_PANELS: usize = 40;

/// `∫_{|y|>r} |y|^{-n-2s} dy` by log-radial Gauss–Legendre quadrature in
/// `t = r e^z`. No closed form is used.
pub fn tail_power_mass(p: &FracParams, r: f64) -> f64 {
    let rule = legendre16();
    let rate = 2.0 * p.s;
    // ∫_r^∞ t^{-1-2s} dt = r^{-2s} ∫_0^∞ e^{-2s z} dz
    let zmax = 45.0 / rate;
    let panels = 90;
    let dz = zmax / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let z0 = k as f64 * dz;
        acc += rule.integrate(z0, z0 + dz, |z| (-rate * z).exp());
    }
    p.omega * r.powf(-rate) * acc
}

/// `C_0 ∫_{|y|>r} r^{2s}|y|^{-n-2s} dy`, which should equal one.
pub fn c0_identity(p: &FracParams, r: f64) -> f64 {
    p.c0 * r.powf(2.0 * p.s) * tail_power_mass(p, r)
}

/// Options for integrals against the Poisson kernel.
#[derive(Debug, Clone, Copy)]
pub struct BallQuadrature {
    /// Points of the Gauss–Jacobi rule on the panel touching the ring.
    pub edge_nodes: usize,
    /// Minimum angular resolution for `n = 2`.
    pub min_angular: usize,
    /// Cap on radial panel width; used to resolve kinks of sampled data.
    pub max_panel: f64,
    /// Distance from the center up to which `max_panel` applies.
    pub dense_until: f64,
}

impl Default for BallQuadrature {
    fn default() -> Self {
        Self { edge_nodes: 24, min_angular: 64, max_panel: f64::INFINITY, dense_until: 0.0 }
    }
}

fn jacobi_rule(n: usize, s: f64) -> Rule {
    // weight (1+x)^{-s} on the reference interval
    gauss_jacobi(n, 0.0, -s)
}

/// Radial nodes `(t, weight)` for `∫_r^∞ F(t) (t - r)^{-s} dt`, graded from the
/// ring at scale `d`. The weights absorb the `(t - r)^{-s}` factor.
fn graded_radial_nodes(s: f64, r: f64, d: f64, max_panel: f64, dense_until: f64, edge_nodes: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    // panel 0: t - r in [0, d], singular weight handled by Gauss–Jacobi.
    let gj = jacobi_rule(edge_nodes, s);
    let first = d.min(max_panel);
    let half = 0.5 * first;
    let scale = half.powf(1.0 - s);
    for (x, w) in gj.nodes.iter().zip(&gj.weights) {
        out.push((r + half * (1.0 + x), w * scale));
    }
    // further panels: geometric in (t - r), each split to respect max_panel.
    let gl = legendre16();
    let mut lo = first;
    let far = r * (LOG_PANELS as f64).exp();
    while lo < far {
        let mut hi = (lo * std::f64::consts::E).max(lo + first);
        if r + lo < dense_until && hi - lo > max_panel {
            hi = lo + max_panel;
        }
        let h = 0.5 * (hi - lo);
        let m = 0.5 * (hi + lo);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let u = m + h * x;
            out.push((r + u, w * h * u.powf(-s)));
        }
        lo = hi;
    }
    out
}

/// `∫_{|y - center| > r} P_r(y - center, x - center) g(y) dy`.
///
/// `g` must be bounded; beyond `r e^40` it is treated as constant along rays.
pub fn poisson_integral<G>(p: &FracParams, r: f64, center: &[f64], x: &[f64], opts: &BallQuadrature, mut g: G) -> Result<f64>
where
    G: FnMut(&[f64]) -> f64,
{
    let n = p.n;
    if r <= 0.0 {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let rel: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
    let a = norm(&rel);
    if a >= r {
        return Err(Error::OutsideBall { radius: r, at: a });
    }
    let s = p.s;
    let d = if a == 0.0 { r } else { (r - a).min(r) };
    let nodes = graded_radial_nodes(s, r, d, opts.max_panel, opts.dense_until, opts.edge_nodes);
    let pref = p.b_ns * (r * r - a * a).powf(s);
    let far = nodes.last().map(|t| t.0).unwrap_or(r);
    let mut y = vec![0.0; n];
    match n {
        1 => {
            let mut acc = 0.0;
            for &(t, w) in &nodes {
                let radial = w * (t + r).powf(-s);
                for sign in [-1.0, 1.0] {
                    y[0] = center[0] + sign * t;
                    acc += radial * g(&y) / (rel[0] - sign * t).abs();
                }
            }
            // remainder beyond `far`, g frozen at its value there
            let mut rem = 0.0;
            for sign in [-1.0, 1.0] {
                y[0] = center[0] + sign * far;
                rem += g(&y);
            }
            acc += rem * far.powf(-2.0 * s) / (2.0 * s);
            Ok(pref * acc)
        }
        2 => {
            let q = a / r;
            let mut nth = opts.min_angular.max(32);
            if q > 0.0 {
                let need = (36.0 / -q.ln()).ceil() as usize + 8;
                nth = nth.max(need.min(8192));
            }
            let dth = 2.0 * PI / nth as f64;
            let dirs: Vec<(f64, f64)> = (0..nth).map(|k| ((k as f64 * dth).cos(), (k as f64 * dth).sin())).collect();
            let mut acc = 0.0;
            for &(t, w) in &nodes {
                let radial = w * (t + r).powf(-s) * t; // t^{n-1}
                let mut ang = 0.0;
                for &(c, sn) in &dirs {
                    let yx = t * c;
                    let yy = t * sn;
                    y[0] = center[0] + yx;
                    y[1] = center[1] + yy;
                    let dx = rel[0] - yx;
                    let dy = rel[1] - yy;
                    ang += g(&y) / (dx * dx + dy * dy);
                }
                acc += radial * ang * dth;
            }
            let mut rem = 0.0;
            for &(c, sn) in &dirs {
                y[0] = center[0] + far * c;
                y[1] = center[1] + far * sn;
                rem += g(&y);
            }
            acc += rem * dth * far.powf(-2.0 * s) / (2.0 * s);
            Ok(pref * acc)
        }
        _ => Err(Error::Unsupported(format!("ball quadrature implemented for n = 1, 2 (got n = {n})"))),
    }
}

/// `∫_{|x|>r} E^{(r)}(x) dx` by edge-desingularized radial quadrature.
pub fn exterior_kernel_mass(p: &FracParams, r: f64) -> f64 {
    // Radial form: B ω r^{2s} ∫_r^∞ (t - r)^{-s} (t + r)^{-s} t^{-1} dt.
    let nodes = graded_radial_nodes(p.s, r, r, f64::INFINITY, 0.0, 24);
    let mut acc = 0.0;
    for &(t, w) in &nodes {
        acc += w * (t + r).powf(-p.s) / t;
    }
    let far = nodes.last().map(|t| t.0).unwrap_or(r);
    acc += far.powf(-2.0 * p.s) / (2.0 * p.s);
    p.b_ns * p.omega * r.powf(2.0 * p.s) * acc
}

/// Kernel mass of `E^{(r)}` on the shell `lo < |x| < hi` (`lo >= r`).
pub fn exterior_shell_mass(p: &FracParams, r: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo >= r && hi > lo);
    let f = |t: f64| (t * t - r * r).powf(-p.s) / t;
    let mut acc = 0.0;
    let edge = lo <= r * (1.0 + 1e-14);
    if edge {
        let gj = jacobi_rule(24, p.s);
        let split = (lo + (hi - lo) * 0.5).min(2.0 * r);
        acc += jacobi_integrate(&gj, p.s, r, split, |t| (t + r).powf(-p.s) / t);
        acc += log_panels(split, hi, f);
    } else {
        acc += log_panels(lo, hi, f);
    }
    p.b_ns * p.omega * r.powf(2.0 * p.s) * acc
}

fn log_panels<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    let rule = legendre16();
    let zs = (hi / lo).ln();
    let panels = (zs / 0.5).ceil().max(1.0) as usize;
    let dz = zs / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let z0 = k as f64 * dz;
        acc += rule.integrate(z0, z0 + dz, |z| {
            let t = lo * z.exp();
            f(t) * t
        });
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_closed_forms() {
        let p = make_params(1, 0.5).unwrap();
        assert!((p.b_ns - 1.0 / PI).abs() < 1e-15);
        assert!((p.c0 - 0.5).abs() < 1e-15);
        assert!((p.c_ns - 1.0 / PI).abs() < 1e-14);
        let p = make_params(2, 0.75).unwrap();
        assert!((p.c0 - 0.75 / PI).abs() < 1e-15);
        assert!(p.c_ns > 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(make_params(1, 1.0).is_err());
        assert!(make_params(1, 0.0).is_err());
        assert!(make_params(0, 0.5).is_err());
        assert!(make_params(2, f64::NAN).is_err());
    }

    #[test]
    fn c_ns_matches_known_one_dimensional_value() {
        // C_{1,s} = s 4^s Gamma(1/2 + s) / (sqrt(pi) Gamma(1 - s))
        for &s in &[0.1, 0.25, 0.6, 0.9] {
            let p = make_params(1, s).unwrap();
            let alt = s * 4f64.powf(s) * gamma(0.5 + s) / (PI.sqrt() * gamma(1.0 - s));
            assert!(((p.c_ns - alt) / alt).abs() < 1e-13);
        }
    }

    #[test]
    fn poisson_kernel_closed_form_value() {
        let p = make_params(1, 0.5).unwrap();
        let v = poisson_kernel(&p, 1.0, &[0.0], &[2.0]).unwrap();
        let want = (1.0 / PI) * (1.0 / 3f64.sqrt()) * 0.5;
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn poisson_kernel_at_center_is_exterior_kernel() {
        let p = make_params(2, 0.3).unwrap();
        for y in [[1.5, 0.2], [-3.0, 4.0], [0.0, -1.01]] {
            let a = poisson_kernel(&p, 1.0, &[0.0, 0.0], &y).unwrap();
            let b = exterior_kernel(&p, 1.0, &y).unwrap();
            assert!((a - b).abs() <= 1e-14 * b);
        }
    }

    #[test]
    fn kernels_reject_ring_and_outside() {
        let p = make_params(2, 0.5).unwrap();
        assert!(poisson_kernel(&p, 1.0, &[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(poisson_kernel(&p, 1.0, &[1.0, 0.0], &[2.0, 0.0]).is_err());
        assert!(exterior_kernel(&p, 1.0, &[0.0, 1.0]).is_err());
        assert_eq!(exterior_kernel(&p, 1.0, &[0.2, 0.1]).unwrap(), 0.0);
        assert_eq!(poisson_kernel(&p, 1.0, &[0.2, 0.1], &[0.5, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn exterior_kernel_scaling() {
        let p = make_params(2, 0.6).unwrap();
        for k in 0..10 {
            let x = [1.3 + 0.37 * k as f64, -0.8 + 0.21 * k as f64];
            let a = exterior_kernel(&p, 2.0, &[2.0 * x[0], 2.0 * x[1]]).unwrap();
            let b = exterior_kernel(&p, 1.0, &x).unwrap();
            assert!((a - b / 4.0).abs() < 1e-14 * b);
        }
    }

    #[test]
    fn normalizations() {
        for n in [1, 2] {
            for s in [0.25, 0.5, 0.75] {
                let p = make_params(n, s).unwrap();
                for r in [0.5, 1.0, 4.0] {
                    assert!((exterior_kernel_mass(&p, r) - 1.0).abs() < 1e-8);
                    assert!((c0_identity(&p, r) - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}
