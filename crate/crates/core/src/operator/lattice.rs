//! Translation-invariant lattice weights for the truncated singular integral.
//!
//! For a point `x` and spacing `h`, the integral of `(u(x) - u(x + y)) |y|^{-n-2s}`
//! over the box `Π [-M_k h_k, M_k h_k]` is approximated by
//! `Σ_{j ≠ 0} W_j (u(x) - u(x + j ⊙ h))`:
//!
//! - inner box `Π [-m h_k, m h_k]`: second-order Taylor expansion with the
//!   Hessian diagonal taken from centered second differences;
//! - remaining cells: product integration of the multilinear interpolant
//!   against the kernel, plus a curvature correction that cancels the
//!   leading interpolation error.
//!
//! All weights are positive, so the assembled operator has the sign
//! structure of an M-matrix.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::kernel::{legendre16, legendre8};

#[derive(Debug, Clone)]
pub struct LatticeKernel {
    pub(crate) n: usize,
    pub(crate) s: f64,
    pub(crate) h: Vec<f64>,
    /// Inner half-width in cells.
    pub(crate) m: usize,
    /// Box half-width in cells, per axis.
    pub(crate) half: Vec<usize>,
    /// Dense weights over offsets `[-M_k, M_k]`, row-major.
    pub(crate) weights: Vec<f64>,
    /// `Σ_{j≠0} W_j`.
    pub(crate) weight_sum: f64,
    /// `∫` of the kernel over the complement of the box.
    pub(crate) tail_mass: f64,
}

impl LatticeKernel {
    pub fn build(s: f64, h: &[f64], m: usize, half: &[usize]) -> Result<Self> {
        let n = h.len();
        if m == 0 {
            return Err(Error::InvalidParameter("inner radius must be at least one spacing".into()));
        }
        if half.iter().any(|&hm| hm < m + 2) {
            return Err(Error::InvalidParameter("outer box must extend beyond the inner box".into()));
        }
        let (weights, tail_mass) = match n {
            1 => build_1d(s, h[0], m, half[0]),
            2 => build_2d(s, h, m, half),
            _ => return Err(Error::Unsupported(format!("lattice kernel implemented for n = 1, 2 (got {n})"))),
        };
        let center = offset_index(half, &vec![0; n]);
        let weight_sum = weights
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != center)
            .map(|(_, w)| w)
            .sum();
        Ok(Self { n, s, h: h.to_vec(), m, half: half.to_vec(), weights, weight_sum, tail_mass })
    }

    /// Shared instance for the given parameters.
    pub fn cached(s: f64, h: &[f64], m: usize, half: &[usize]) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<Vec<u64>, Arc<LatticeKernel>>>> = OnceLock::new();
        let mut key = vec![s.to_bits(), m as u64];
        key.extend(h.iter().map(|v| v.to_bits()));
        key.extend(half.iter().map(|&v| v as u64));
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(k) = cache.lock().unwrap().get(&key) {
            return Ok(k.clone());
        }
        let k = Arc::new(Self::build(s, h, m, half)?);
        let mut guard = cache.lock().unwrap();
        if guard.len() > 64 {
            guard.clear();
        }
        guard.insert(key, k.clone());
        Ok(k)
    }

    pub fn weight(&self, offset: &[isize]) -> f64 {
        for (k, &o) in offset.iter().enumerate() {
            if o.unsigned_abs() > self.half[k] {
                return 0.0;
            }
        }
        let mut idx = 0usize;
        for (k, &o) in offset.iter().enumerate() {
            idx = idx * (2 * self.half[k] + 1) + (o + self.half[k] as isize) as usize;
        }
        self.weights[idx]
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    /// Kernel mass of the complement of the box.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.half.iter().zip(&self.h).map(|(&m, h)| m as f64 * h).collect()
    }

    pub fn min_weight(&self) -> f64 {
        let center = offset_index(&self.half, &vec![0; self.n]);
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != center)
            .map(|(_, w)| *w)
            .fold(f64::INFINITY, f64::min)
    }
}

fn offset_index(half: &[usize], offset: &[isize]) -> usize {
    let mut idx = 0usize;
    for (k, &o) in offset.iter().enumerate() {
        idx = idx * (2 * half[k] + 1) + (o + half[k] as isize) as usize;
    }
    idx
}

fn build_1d(s: f64, h: f64, m: usize, big_m: usize) -> (Vec<f64>, f64) {
    let p = 1.0 + 2.0 * s;
    let w = |y: f64| y.powf(-p);
    let mut pos = vec![0.0; big_m + 2];
    let rule = legendre16();
    // stencils may not reach the interior of the inner box, which carries no mass
    let clamp = |c: usize| c.clamp(m + 1, big_m - 1);
    for k in m..big_m {
        let a = k as f64 * h;
        let b = a + h;
        let mut left = 0.0;
        let mut right = 0.0;
        let mut bubble = 0.0;
        let half = 0.5 * h;
        let mid = a + half;
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let y = mid + half * x;
            let kv = wt * half * w(y);
            left += kv * (b - y) / h;
            right += kv * (y - a) / h;
            bubble += kv * 0.5 * (y - a) * (b - y);
        }
        pos[k] += left;
        pos[k + 1] += right;
        // -bubble * f'' with f'' averaged from second differences at both ends
        for c in [clamp(k), clamp(k + 1)] {
            let coef = bubble / (2.0 * h * h);
            pos[c + 1] -= coef;
            pos[c] += 2.0 * coef;
            pos[c - 1] -= coef;
        }
    }
    let rho = m as f64 * h;
    let inner = 2.0 * rho.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    pos[1] += inner / (2.0 * h * h);
    let mut weights = vec![0.0; 2 * big_m + 1];
    weights[big_m] = pos[0];
    for j in 1..=big_m {
        weights[big_m + j] = pos[j];
        weights[big_m - j] = pos[j];
    }
    let r = big_m as f64 * h;
    let tail = 2.0 * r.powf(-2.0 * s) / (2.0 * s);
    (weights, tail)
}

fn build_2d(s: f64, h: &[f64], m: usize, half: &[usize]) -> (Vec<f64>, f64) {
    let (h1, h2) = (h[0], h[1]);
    let (m1, m2) = (half[0] as isize, half[1] as isize);
    let mi = m as isize;
    let stride = (2 * m2 + 1) as usize;
    let mut weights = vec![0.0; (2 * m1 + 1) as usize * stride];
    let idx = |i: isize, j: isize| ((i + m1) as usize) * stride + (j + m2) as usize;
    let p = 2.0 + 2.0 * s;
    let rule = legendre8();
    for i in -m1..m1 {
        for j in -m2..m2 {
            if i >= -mi && i < mi && j >= -mi && j < mi {
                continue;
            }
            let (a1, b1) = (i as f64 * h1, (i + 1) as f64 * h1);
            let (a2, b2) = (j as f64 * h2, (j + 1) as f64 * h2);
            let mut corner = [0.0; 4];
            let (mut e1, mut e2) = (0.0, 0.0);
            for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
                let y1 = 0.5 * (a1 + b1) + 0.5 * h1 * x;
                let t1 = (y1 - a1) / h1;
                for (z, wz) in rule.nodes.iter().zip(&rule.weights) {
                    let y2 = 0.5 * (a2 + b2) + 0.5 * h2 * z;
                    let t2 = (y2 - a2) / h2;
                    let kv = wx * wz * 0.25 * h1 * h2 * (y1 * y1 + y2 * y2).powf(-0.5 * p);
                    corner[0] += kv * (1.0 - t1) * (1.0 - t2);
                    corner[1] += kv * (1.0 - t1) * t2;
                    corner[2] += kv * t1 * (1.0 - t2);
                    corner[3] += kv * t1 * t2;
                    e1 += kv * 0.5 * (y1 - a1) * (b1 - y1);
                    e2 += kv * 0.5 * (y2 - a2) * (b2 - y2);
                }
            }
            weights[idx(i, j)] += corner[0];
            weights[idx(i, j + 1)] += corner[1];
            weights[idx(i + 1, j)] += corner[2];
            weights[idx(i + 1, j + 1)] += corner[3];
            for (ci, cj) in [(i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)] {
                // second differences at clamped centers, kept off the inner box
                let c1 = away_from_inner(ci, cj, mi).clamp(-m1 + 1, m1 - 1);
                let k1 = e1 / (4.0 * h1 * h1);
                weights[idx(c1 + 1, cj)] -= k1;
                weights[idx(c1, cj)] += 2.0 * k1;
                weights[idx(c1 - 1, cj)] -= k1;
                let c2 = away_from_inner(cj, ci, mi).clamp(-m2 + 1, m2 - 1);
                let k2 = e2 / (4.0 * h2 * h2);
                weights[idx(ci, c2 + 1)] -= k2;
                weights[idx(ci, c2)] += 2.0 * k2;
                weights[idx(ci, c2 - 1)] -= k2;
            }
        }
    }
    let (j1, j2) = inner_second_moments(s, m as f64 * h1, m as f64 * h2);
    weights[idx(1, 0)] += j1 / (2.0 * h1 * h1);
    weights[idx(-1, 0)] += j1 / (2.0 * h1 * h1);
    weights[idx(0, 1)] += j2 / (2.0 * h2 * h2);
    weights[idx(0, -1)] += j2 / (2.0 * h2 * h2);
    let tail = rect_complement_mass(s, m1 as f64 * h1, m2 as f64 * h2);
    (weights, tail)
}

/// Center along one axis for a stencil at `(c, other)`: when the line meets
/// the open inner box, move the center so that both neighbors lie outside.
fn away_from_inner(c: isize, other: isize, m: isize) -> isize {
    if other.abs() >= m || c.abs() > m {
        c
    } else if c >= 0 {
        m + 1
    } else {
        -m - 1
    }
}

/// `∫_{[-a,a]×[-b,b]} y_i^2 |y|^{-2-2s} dy` for `i = 1, 2`.
fn inner_second_moments(s: f64, a: f64, b: f64) -> (f64, f64) {
    let e = 2.0 - 2.0 * s;
    let thc = (b / a).atan();
    let rule = legendre16();
    let mut j1 = 0.0;
    let mut j2 = 0.0;
    for (lo, hi, vertical_side) in [(0.0, thc, true), (thc, 0.5 * PI, false)] {
        for piece in 0..4 {
            let l = lo + (hi - lo) * piece as f64 / 4.0;
            let u = lo + (hi - lo) * (piece + 1) as f64 / 4.0;
            j1 += rule.integrate(l, u, |th| {
                let rho = if vertical_side { a / th.cos() } else { b / th.sin() };
                th.cos().powi(2) * rho.powf(e) / e
            });
            j2 += rule.integrate(l, u, |th| {
                let rho = if vertical_side { a / th.cos() } else { b / th.sin() };
                th.sin().powi(2) * rho.powf(e) / e
            });
        }
    }
    (4.0 * j1, 4.0 * j2)
}

/// `∫` of `|y|^{-2-2s}` outside the rectangle `[-a,a]×[-b,b]`.
pub(crate) fn rect_complement_mass(s: f64, a: f64, b: f64) -> f64 {
    let thc = (b / a).atan();
    let rule = legendre16();
    let mut acc = 0.0;
    for (lo, hi, vertical_side) in [(0.0, thc, true), (thc, 0.5 * PI, false)] {
        for piece in 0..4 {
            let l = lo + (hi - lo) * piece as f64 / 4.0;
            let u = lo + (hi - lo) * (piece + 1) as f64 / 4.0;
            acc += rule.integrate(l, u, |th| {
                let rho = if vertical_side { a / th.cos() } else { b / th.sin() };
                rho.powf(-2.0 * s) / (2.0 * s)
            });
        }
    }
    4.0 * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_positive_and_symmetric_1d() {
        for s in [0.1, 0.25, 0.5, 0.75, 0.9] {
            for m in [1, 2, 3] {
                let k = LatticeKernel::build(s, &[0.01], m, &[400]).unwrap();
                assert!(k.min_weight() >= 0.0, "s = {s}, m = {m}");
                for j in 1..=400isize {
                    assert_eq!(k.weight(&[j]), k.weight(&[-j]));
                }
            }
        }
    }

    #[test]
    fn weights_positive_2d() {
        for s in [0.25, 0.5, 0.75] {
            let k = LatticeKernel::build(s, &[0.1, 0.1], 2, &[20, 20]).unwrap();
            assert!(k.min_weight() >= 0.0, "s = {s}");
            assert!((k.weight(&[3, 5]) - k.weight(&[-3, -5])).abs() < 1e-12 * k.weight(&[3, 5]));
            assert!((k.weight(&[3, 5]) - k.weight(&[5, 3])).abs() < 1e-9 * k.weight(&[3, 5]));
        }
    }

    #[test]
    fn middle_mass_is_exact() {
        // Σ W over the middle region equals the kernel mass between the boxes
        // (the inner Taylor stencil adds mass only at ±1).
        let s = 0.4;
        let h = 0.05;
        let k = LatticeKernel::build(s, &[h], 2, &[100]).unwrap();
        let inner = 2.0 * (2.0 * h).powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) / (2.0 * h * h);
        let total: f64 = k.weights.iter().sum::<f64>() - 2.0 * inner;
        let exact = 2.0 * ((2.0 * h).powf(-2.0 * s) - (100.0 * h).powf(-2.0 * s)) / (2.0 * s);
        assert!(((total - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn rectangle_complement_mass_matches_disk_bounds() {
        // the complement of the square [-1,1]^2 lies between the complements
        // of the disks of radius 1 and sqrt(2)
        let s = 0.3;
        let t = rect_complement_mass(s, 1.0, 1.0);
        let disk = |r: f64| 2.0 * PI * r.powf(-2.0 * s) / (2.0 * s);
        assert!(t < disk(1.0) && t > disk(2f64.sqrt()));
    }
}
