//! Domain predicates, the dyadic-annulus density condition, and vertical widths.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{Status, VerificationReport};

/// A decidable subset of `R^n`. Bounded pieces are open sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    FullSpace,
    /// `{x : direction · x > offset}`
    HalfSpace { direction: Vec<f64>, offset: f64 },
    /// `{x : lo < x_axis < hi}`
    Slab { axis: usize, lo: f64, hi: f64 },
    /// `{x : 2k < x_n < 2k + 1 for some integer k}`
    Stripes,
    /// `{x : 2k < |x| < 2k + 1 for some integer k}`
    AnnulusFamily,
    /// Points within `half_width` of the planar curve `r = a + b θ`, `θ >= 0`.
    SpiralBand {
        #[serde(default)]
        a: f64,
        #[serde(default = "default_spiral_b")]
        b: f64,
        #[serde(default = "default_spiral_half_width")]
        half_width: f64,
    },
    Ellipsoid {
        #[serde(default)]
        center: Option<Vec<f64>>,
        semi_axes: Vec<f64>,
    },
    /// Open box between two corners.
    Rectangle { lo: Vec<f64>, hi: Vec<f64> },
    Complement { inner: Box<DomainSpec> },
    Intersection { parts: Vec<DomainSpec> },
    /// `{x : x - shift ∈ inner}`
    Translate { inner: Box<DomainSpec>, shift: Vec<f64> },
}

fn default_spiral_b() -> f64 {
    1.0 / (2.0 * PI)
}

fn default_spiral_half_width() -> f64 {
    0.2
}

/// One dyadic shell of a density profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityShell {
    pub k: i32,
    pub rho: f64,
    pub ci: f64,
    pub samples: usize,
}

impl DomainSpec {
    pub fn rectangle(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        DomainSpec::Rectangle { lo, hi }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        DomainSpec::Rectangle { lo: vec![lo], hi: vec![hi] }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        let n = center.len();
        DomainSpec::Ellipsoid { center: Some(center), semi_axes: vec![radius; n] }
    }

    pub fn complement(self) -> Self {
        DomainSpec::Complement { inner: Box::new(self) }
    }

    pub fn translate(self, shift: Vec<f64>) -> Self {
        DomainSpec::Translate { inner: Box::new(self), shift }
    }

    /// `Ω - τ e_n` in dimension `n`.
    pub fn slide_down(self, n: usize, tau: f64) -> Self {
        let mut v = vec![0.0; n];
        v[n - 1] = -tau;
        self.translate(v)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            DomainSpec::HalfSpace { direction, .. } => {
                if direction.len() != n || direction.iter().all(|d| *d == 0.0) {
                    return bad("half-space direction must be a nonzero vector of the domain dimension");
                }
            }
            DomainSpec::Slab { axis, lo, hi } => {
                if *axis >= n || !(lo < hi) {
                    return bad("slab needs a valid axis and lo < hi");
                }
            }
            DomainSpec::SpiralBand { b, half_width, .. } => {
                if n != 2 || !(*b > 0.0) || !(*half_width > 0.0) {
                    return bad("spiral band is planar and needs b > 0, half_width > 0");
                }
            }
            DomainSpec::Ellipsoid { center, semi_axes } => {
                if semi_axes.len() != n || semi_axes.iter().any(|a| !(*a > 0.0)) {
                    return bad("ellipsoid needs n positive semi-axes");
                }
                if center.as_ref().is_some_and(|c| c.len() != n) {
                    return bad("ellipsoid center has the wrong dimension");
                }
            }
            DomainSpec::Rectangle { lo, hi } => {
                if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return bad("rectangle corners must satisfy lo < hi componentwise");
                }
            }
            DomainSpec::Complement { inner } => inner.validate(n)?,
            DomainSpec::Intersection { parts } => parts.iter().try_for_each(|p| p.validate(n))?,
            DomainSpec::Translate { inner, shift } => {
                if shift.len() != n {
                    return bad("translation vector has the wrong dimension");
                }
                inner.validate(n)?
            }
            _ => {}
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::FullSpace => true,
            DomainSpec::HalfSpace { direction, offset } => {
                direction.iter().zip(x).map(|(d, v)| d * v).sum::<f64>() > *offset
            }
            DomainSpec::Slab { axis, lo, hi } => x[*axis] > *lo && x[*axis] < *hi,
            DomainSpec::Stripes => {
                let t = x[x.len() - 1];
                let k = (t / 2.0).floor();
                let r = t - 2.0 * k;
                r > 0.0 && r < 1.0
            }
            DomainSpec::AnnulusFamily => {
                let t = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let k = (t / 2.0).floor();
                let r = t - 2.0 * k;
                r > 0.0 && r < 1.0
            }
            DomainSpec::SpiralBand { a, b, half_width } => spiral_distance(*a, *b, x[0], x[1]) < *half_width,
            DomainSpec::Ellipsoid { center, semi_axes } => {
                let q: f64 = semi_axes
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let c = center.as_ref().map_or(0.0, |c| c[k]);
                        ((x[k] - c) / s).powi(2)
                    })
                    .sum();
                q < 1.0
            }
            DomainSpec::Rectangle { lo, hi } => (0..lo.len()).all(|k| x[k] > lo[k] && x[k] < hi[k]),
            DomainSpec::Complement { inner } => !inner.contains(x),
            DomainSpec::Intersection { parts } => parts.iter().all(|p| p.contains(x)),
            DomainSpec::Translate { inner, shift } => {
                let y: Vec<f64> = x.iter().zip(shift).map(|(a, b)| a - b).collect();
                inner.contains(&y)
            }
        }
    }

    /// Enclosing box for bounded variants.
    pub fn bbox(&self, n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            DomainSpec::Slab { axis, lo, hi } if n == 1 && *axis == 0 => Some((vec![*lo], vec![*hi])),
            DomainSpec::Ellipsoid { center, semi_axes } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; n]);
                Some((
                    c.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                    c.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
                ))
            }
            DomainSpec::Rectangle { lo, hi } => Some((lo.clone(), hi.clone())),
            DomainSpec::Translate { inner, shift } => inner.bbox(n).map(|(lo, hi)| {
                (
                    lo.iter().zip(shift).map(|(a, b)| a + b).collect(),
                    hi.iter().zip(shift).map(|(a, b)| a + b).collect(),
                )
            }),
            DomainSpec::Intersection { parts } => {
                let mut acc: Option<(Vec<f64>, Vec<f64>)> = None;
                for p in parts {
                    if let Some((lo, hi)) = p.bbox(n) {
                        acc = Some(match acc {
                            None => (lo, hi),
                            Some((l, h)) => (
                                l.iter().zip(&lo).map(|(a, b)| a.max(*b)).collect(),
                                h.iter().zip(&hi).map(|(a, b)| a.min(*b)).collect(),
                            ),
                        });
                    }
                }
                acc
            }
            _ => None,
        }
    }

    pub fn is_bounded(&self, n: usize) -> bool {
        self.bbox(n).is_some()
    }

    /// Declared convexity along vertical lines.
    pub fn convex_in_xn(&self) -> bool {
        match self {
            DomainSpec::FullSpace
            | DomainSpec::HalfSpace { .. }
            | DomainSpec::Slab { .. }
            | DomainSpec::Ellipsoid { .. }
            | DomainSpec::Rectangle { .. } => true,
            DomainSpec::Translate { inner, .. } => inner.convex_in_xn(),
            DomainSpec::Intersection { parts } => parts.iter().all(|p| p.convex_in_xn()),
            _ => false,
        }
    }

    /// Random vertical segments with both endpoints in the set must have
    /// their midpoints in the set. Returns the number of violations.
    pub fn spot_check_convexity(&self, n: usize, trials: usize, seed: u64) -> usize {
        let (lo, hi) = self
            .bbox(n)
            .unwrap_or_else(|| (vec![-10.0; n], vec![10.0; n]));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = 0;
        let mut found = 0;
        let mut attempts = 0;
        while found < trials && attempts < 100 * trials {
            attempts += 1;
            let mut a: Vec<f64> = (0..n).map(|k| rng.gen_range(lo[k]..=hi[k])).collect();
            let mut b = a.clone();
            b[n - 1] = rng.gen_range(lo[n - 1]..=hi[n - 1]);
            if !(self.contains(&a) && self.contains(&b)) {
                continue;
            }
            found += 1;
            a[n - 1] = 0.5 * (a[n - 1] + b[n - 1]);
            if !self.contains(&a) {
                bad += 1;
            }
        }
        bad
    }

    /// Range of `x_n` over the set.
    pub fn xn_range(&self, n: usize) -> Result<(f64, f64)> {
        if let Some((lo, hi)) = self.exact_box(n) {
            return Ok((lo[n - 1], hi[n - 1]));
        }
        let (lo, hi) = self
            .bbox(n)
            .ok_or_else(|| Error::Unbounded("vertical width needs a bounded domain".into()))?;
        // lattice scan of the bounding box
        let m: usize = if n == 1 { 20000 } else { 400 };
        let mut best = (f64::INFINITY, f64::NEG_INFINITY);
        let total = m.pow(n as u32);
        let mut x = vec![0.0; n];
        for f in 0..total {
            let mut r = f;
            for k in (0..n).rev() {
                let i = r % m;
                r /= m;
                x[k] = lo[k] + (hi[k] - lo[k]) * (i as f64 + 0.5) / m as f64;
            }
            if self.contains(&x) {
                best.0 = best.0.min(x[n - 1]);
                best.1 = best.1.max(x[n - 1]);
            }
        }
        if best.0 > best.1 {
            return Ok((0.0, 0.0));
        }
        Ok(best)
    }

    /// Box equal to the closure of the set, for box-shaped variants.
    fn exact_box(&self, n: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            DomainSpec::Rectangle { .. } | DomainSpec::Ellipsoid { .. } => self.bbox(n),
            DomainSpec::Slab { .. } => self.bbox(n),
            DomainSpec::Translate { inner, .. } => {
                inner.exact_box(n)?;
                self.bbox(n)
            }
            DomainSpec::Intersection { parts } => {
                let mut ellipsoids = 0;
                for p in parts {
                    match p.exact_box(n) {
                        Some(_) if p.is_ellipsoid() => ellipsoids += 1,
                        Some(_) => {}
                        None => return None,
                    }
                }
                if ellipsoids > 0 && parts.len() > 1 {
                    return None;
                }
                let (lo, hi) = self.bbox(n)?;
                if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
                    return Some((vec![0.0; n], vec![0.0; n]));
                }
                Some((lo, hi))
            }
            _ => None,
        }
    }

    fn is_ellipsoid(&self) -> bool {
        match self {
            DomainSpec::Ellipsoid { .. } => true,
            DomainSpec::Translate { inner, .. } => inner.is_ellipsoid(),
            _ => false,
        }
    }
}

/// Euclidean distance from `(x, y)` to the curve `r = a + b θ`, `θ >= 0`.
fn spiral_distance(a: f64, b: f64, x: f64, y: f64) -> f64 {
    let curve = |t: f64| {
        let r = a + b * t;
        (r * t.cos(), r * t.sin())
    };
    let d2 = |t: f64| {
        let (cx, cy) = curve(t);
        (cx - x).powi(2) + (cy - y).powi(2)
    };
    let rad = (x * x + y * y).sqrt();
    let phi = y.atan2(x).rem_euclid(2.0 * PI);
    let jc = ((rad - a) / (2.0 * PI * b) - phi / (2.0 * PI)).round() as i64;
    let mut best = d2(0.0);
    for j in (jc - 1)..=(jc + 1) {
        let t0 = phi + 2.0 * PI * j as f64;
        if t0 < -PI {
            continue;
        }
        // coarse scan of one turn around the candidate, then Newton on d2
        let mut t = t0.max(0.0);
        let mut bv = d2(t);
        for i in -8..=8 {
            let tt = t0 + i as f64 * PI / 8.0;
            if tt >= 0.0 {
                let v = d2(tt);
                if v < bv {
                    bv = v;
                    t = tt;
                }
            }
        }
        for _ in 0..20 {
            let e = 1e-6 * (1.0 + t);
            let g = (d2(t + e) - d2(t - e)) / (2.0 * e);
            let hss = (d2(t + e) - 2.0 * d2(t) + d2(t - e)) / (e * e);
            if !(hss > 0.0) {
                break;
            }
            let nt = (t - g / hss).max(0.0);
            if (nt - t).abs() < 1e-12 * (1.0 + t) {
                t = nt;
                break;
            }
            t = nt;
        }
        best = best.min(d2(t)).min(bv);
    }
    best.sqrt()
}

/// Monte-Carlo density of `D^c` in the shells `2^k <= |y - q| < 2^{k+1}`.
pub fn density_profile(
    d: &DomainSpec,
    q: &[f64],
    k_lo: i32,
    k_hi: i32,
    samples_per_shell: usize,
    seed: u64,
) -> Result<Vec<DensityShell>> {
    if !d.contains(q) {
        return Err(Error::PointNotInDomain(q.to_vec()));
    }
    if samples_per_shell < 1000 {
        return Err(Error::InvalidParameter("density profile needs at least 1000 samples per shell".into()));
    }
    if k_hi < k_lo {
        return Err(Error::InvalidParameter("empty shell range".into()));
    }
    let n = q.len();
    let ks: Vec<i32> = (k_lo..=k_hi).collect();
    ks.par_iter()
        .map(|&k| {
            let inner = 2f64.powi(k);
            let outer = 2.0 * inner;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as i64 as u64));
            let mut hits = 0usize;
            let mut accepted = 0usize;
            let mut drawn = 0usize;
            let budget = samples_per_shell.saturating_mul(1000);
            let mut y = vec![0.0; n];
            while accepted < samples_per_shell {
                drawn += 1;
                if drawn > budget {
                    return Err(Error::SamplingBudget(format!("shell {k}")));
                }
                let mut r2 = 0.0;
                for v in y.iter_mut() {
                    *v = rng.gen_range(-outer..outer);
                    r2 += *v * *v;
                }
                if r2 < inner * inner || r2 >= outer * outer {
                    continue;
                }
                accepted += 1;
                for (v, c) in y.iter_mut().zip(q) {
                    *v += c;
                }
                if !d.contains(&y) {
                    hits += 1;
                }
            }
            let rho = hits as f64 / accepted as f64;
            let ci = 1.96 * (rho * (1.0 - rho) / accepted as f64).sqrt();
            Ok(DensityShell { k, rho, ci, samples: accepted })
        })
        .collect()
}

pub fn write_profile_csv<W: Write>(profile: &[DensityShell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "rho", "ci"])?;
    for sh in profile {
        w.write_record([sh.k.to_string(), format!("{:e}", sh.rho), format!("{:e}", sh.ci)])?;
    }
    w.flush()?;
    Ok(())
}

/// Passes iff `min(ρ_k - ci)` over the second half of the k-range is at
/// least `threshold`.
pub fn check_density_condition(profile: &[DensityShell], threshold: f64) -> VerificationReport {
    if profile.is_empty() {
        return VerificationReport::new("density_condition", Status::Fail, "empty profile");
    }
    let tail = &profile[profile.len() / 2..];
    let (mut worst, mut at) = (f64::INFINITY, tail[0]);
    for sh in tail {
        let lb = sh.rho - sh.ci;
        if lb < worst {
            worst = lb;
            at = *sh;
        }
    }
    let status = Status::from_bool(worst >= threshold);
    let mut r = VerificationReport::new(
        "density_condition",
        status,
        format!("tail minimum of rho - ci is {worst:.4} against threshold {threshold}"),
    )
    .quantity("tail_lower_bound", worst)
    .quantity("threshold", threshold)
    .quantity("witness_shell", at.k as f64)
    .quantity("witness_rho", at.rho)
    .note("finite shell range: the tail minimum stands in for the liminf")
    .note("only the supplied base point is checked; independence from it is not verified");
    r.config = serde_json::json!({ "shells": profile.iter().map(|s| s.k).collect::<Vec<_>>() });
    r
}

/// `d_n(D)`, the extent of `D` along the last axis.
pub fn width_xn(d: &DomainSpec, n: usize) -> Result<f64> {
    let (lo, hi) = d.xn_range(n)?;
    Ok((hi - lo).max(0.0))
}

/// `d_n(D) |c_inf|^{1/(2s)}`.
pub fn narrow_premise_product(d: &DomainSpec, n: usize, s: f64, c_inf: f64) -> Result<f64> {
    Ok(width_xn(d, n)? * c_inf.abs().powf(1.0 / (2.0 * s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        let h = DomainSpec::HalfSpace { direction: vec![0.0, 1.0], offset: 0.0 };
        assert!(h.contains(&[0.0, 1.0]));
        assert!(DomainSpec::Stripes.contains(&[0.0, 2.5]));
        assert!(!DomainSpec::Stripes.contains(&[0.0, 3.5]));
        assert!(DomainSpec::Stripes.contains(&[0.0, -1.5]));
        let e = DomainSpec::Ellipsoid { center: None, semi_axes: vec![1.0, 0.25] };
        let t = e.clone().slide_down(2, 0.3);
        for p in [[0.0, -0.2], [0.0, -0.5], [0.9, 0.0], [0.1, -0.3]] {
            assert_eq!(t.contains(&p), e.contains(&[p[0], p[1] + 0.3]));
        }
    }

    #[test]
    fn complement_involution() {
        let d = DomainSpec::AnnulusFamily;
        let cc = d.clone().complement().complement();
        for i in 0..200 {
            let p = [0.173 * i as f64 - 17.0, 0.071 * i as f64 - 7.0];
            assert_eq!(cc.contains(&p), d.contains(&p));
        }
    }

    #[test]
    fn widths() {
        let r = DomainSpec::rectangle(vec![0.0, 0.0], vec![2.0, 3.0]);
        assert_eq!(width_xn(&r, 2).unwrap(), 3.0);
        let e = DomainSpec::Ellipsoid { center: None, semi_axes: vec![1.0, 0.25] };
        assert_eq!(width_xn(&e, 2).unwrap(), 0.5);
        for tau in [0.5, 1.0, 2.9] {
            let d = DomainSpec::Intersection { parts: vec![r.clone(), r.clone().slide_down(2, tau)] };
            assert!((width_xn(&d, 2).unwrap() - (3.0 - tau)).abs() < 1e-12);
        }
        assert!(width_xn(&DomainSpec::Stripes, 2).is_err());
        assert!((narrow_premise_product(&DomainSpec::interval(0.0, 0.1), 1, 0.5, -1.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(narrow_premise_product(&r, 2, 0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn spiral_membership() {
        let d = DomainSpec::SpiralBand { a: 0.0, b: default_spiral_b(), half_width: 0.2 };
        // curve points at θ = 2π (r = 1) and θ = 5π (r = 2.5)
        assert!(d.contains(&[1.0, 0.0]));
        assert!(d.contains(&[-2.5, 0.0]));
        assert!(d.contains(&[1.15, 0.0]));
        // halfway between turns
        assert!(!d.contains(&[1.5, 0.0]));
        assert!(!d.contains(&[-2.0, 0.0]));
        assert!((spiral_distance(0.0, 1.0 / (2.0 * PI), 1.3, 0.0) - 0.3).abs() < 0.02);
    }

    #[test]
    fn density_basic() {
        let full = DomainSpec::FullSpace;
        let p = density_profile(&full, &[0.0, 0.0], 1, 4, 2000, 7).unwrap();
        assert!(p.iter().all(|s| s.rho == 0.0));
        assert_eq!(check_density_condition(&p, 0.1).status, Status::Fail);
        let e = DomainSpec::Ellipsoid { center: None, semi_axes: vec![0.5, 0.5] };
        let p = density_profile(&e, &[0.0, 0.0], 1, 4, 2000, 7).unwrap();
        assert!(p.iter().all(|s| s.rho == 1.0));
        assert_eq!(check_density_condition(&p, 0.99).status, Status::Pass);
        assert!(density_profile(&e, &[3.0, 0.0], 1, 4, 2000, 7).is_err());
        let again = density_profile(&e, &[0.0, 0.0], 1, 4, 2000, 7).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn halfspace_density_is_half() {
        let d = DomainSpec::HalfSpace { direction: vec![0.0, 1.0], offset: 0.0 };
        let p = density_profile(&d, &[0.0, 1.0], 4, 8, 20000, 3).unwrap();
        let last = p.last().unwrap();
        assert!((last.rho - 0.5).abs() < last.ci + 0.01);
    }

    #[test]
    fn convexity_flags() {
        let r = DomainSpec::rectangle(vec![-1.0, -1.0], vec![1.0, 1.0]);
        assert!(r.convex_in_xn());
        assert_eq!(r.spot_check_convexity(2, 500, 1), 0);
        let ann = DomainSpec::Intersection { parts: vec![DomainSpec::AnnulusFamily, DomainSpec::ball(vec![0.0, 0.0], 4.0)] };
        assert!(!ann.convex_in_xn());
        assert!(ann.spot_check_convexity(2, 500, 1) > 0);
    }
}
