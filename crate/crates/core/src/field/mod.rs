//! Globally defined functions: lattice samples inside a box, an analytic
//! model outside it, and the shift/difference algebra used for sliding.

mod exterior;
mod grid;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use exterior::{Analytic, ExteriorModel, Profile, VerticalInfo};
pub use grid::Grid;

use crate::error::{Error, Result};

/// Declared regularity. Only reported, never verified from samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    #[default]
    C11Local,
    Lipschitz,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub exterior: ExteriorModel,
    pub smoothness: Smoothness,
}

/// Hull/exterior agreement on the boundary ring of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityCheck {
    pub max_abs_mismatch: f64,
    pub max_rel_mismatch: f64,
    pub within_tolerance: bool,
}

pub const DEFAULT_CONTINUITY_TOL: f64 = 1e-6;

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, exterior: ExteriorModel) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} grid values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid value {i} is not finite")));
        }
        exterior.validate(grid.dim()).map_err(Error::InvalidParameter)?;
        Ok(Self { grid, values, exterior, smoothness: Smoothness::default() })
    }

    /// Sample `f` on the lattice.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, exterior: ExteriorModel, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid, values, exterior)
    }

    /// Lattice samples of the exterior model itself.
    pub fn from_exterior(grid: Grid, exterior: ExteriorModel) -> Result<Self> {
        let values = (0..grid.len()).map(|i| exterior.eval(&grid.point(i))).collect();
        Self::new(grid, values, exterior)
    }

    pub fn with_smoothness(mut self, tag: Smoothness) -> Self {
        self.smoothness = tag;
        self
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Total evaluation: multilinear inside the hull, exterior model outside.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        if self.grid.in_hull(x) {
            self.interpolate(x)
        } else {
            self.exterior.eval(x)
        }
    }

    fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        match g.dim() {
            1 => {
                let (i, t) = g.locate_axis(0, x[0]);
                let a = self.values[i];
                let b = self.values[i + 1];
                if t == 0.0 {
                    a
                } else if t == 1.0 {
                    b
                } else {
                    a + t * (b - a)
                }
            }
            2 => {
                let (i, t) = g.locate_axis(0, x[0]);
                let (j, u) = g.locate_axis(1, x[1]);
                let ny = g.shape[1];
                let v00 = self.values[i * ny + j];
                let v01 = self.values[i * ny + j + 1];
                let v10 = self.values[(i + 1) * ny + j];
                let v11 = self.values[(i + 1) * ny + j + 1];
                let a = if u == 0.0 { v00 } else { v00 + u * (v01 - v00) };
                let b = if u == 0.0 { v10 } else { v10 + u * (v11 - v10) };
                if t == 0.0 {
                    a
                } else {
                    a + t * (b - a)
                }
            }
            n => {
                let loc: Vec<(usize, f64)> = (0..n).map(|k| g.locate_axis(k, x[k])).collect();
                let strides = g.strides();
                let mut acc = 0.0;
                for corner in 0..(1usize << n) {
                    let mut w = 1.0;
                    let mut f = 0;
                    for (k, &(i, t)) in loc.iter().enumerate() {
                        let bit = (corner >> k) & 1;
                        w *= if bit == 1 { t } else { 1.0 - t };
                        f += (i + bit) * strides[k];
                    }
                    if w != 0.0 {
                        acc += w * self.values[f];
                    }
                }
                acc
            }
        }
    }

    /// Compare boundary-ring samples with the exterior model.
    pub fn continuity(&self, tol: f64) -> ContinuityCheck {
        let g = &self.grid;
        let mut max_abs: f64 = 0.0;
        let mut max_rel: f64 = 0.0;
        for f in 0..g.len() {
            let idx = g.multi(f);
            let on_ring = idx.iter().zip(&g.shape).any(|(&i, &s)| i == 0 || i + 1 == s);
            if !on_ring {
                continue;
            }
            let x = g.coord(&idx);
            let e = self.exterior.eval(&x);
            let d = (e - self.values[f]).abs();
            max_abs = max_abs.max(d);
            max_rel = max_rel.max(d / e.abs().max(1.0));
        }
        ContinuityCheck { max_abs_mismatch: max_abs, max_rel_mismatch: max_rel, within_tolerance: max_rel <= tol }
    }

    pub fn max_value(&self) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    /// Pointwise positive part; the exterior gets the positive-part model.
    pub fn positive_part(&self) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.max(0.0)).collect(),
            exterior: self.exterior.positive_part(),
            smoothness: Smoothness::Lipschitz,
        }
    }

    /// Write `index..., coordinate..., value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..n).map(|k| format!("i{k}")).collect();
        header.extend((0..n).map(|k| format!("x{k}")));
        header.push("value".into());
        w.write_record(&header)?;
        for f in 0..self.grid.len() {
            let idx = self.grid.multi(f);
            let x = self.grid.coord(&idx);
            let mut rec: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            rec.extend(x.iter().map(|v| format!("{v:.17e}")));
            rec.push(format!("{:.17e}", self.values[f]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Values from a CSV written by [`GridFunction::write_csv`] on the same grid.
    pub fn read_csv_values<P: AsRef<Path>>(path: P, grid: &Grid) -> Result<Vec<f64>> {
        let mut r = csv::Reader::from_path(path)?;
        let n = grid.dim();
        let mut values = vec![f64::NAN; grid.len()];
        for rec in r.records() {
            let rec = rec?;
            let idx: Vec<usize> = (0..n)
                .map(|k| rec[k].parse::<usize>().map_err(|e| Error::Scenario(format!("bad index: {e}"))))
                .collect::<Result<_>>()?;
            if idx.iter().zip(&grid.shape).any(|(i, s)| i >= s) {
                return Err(Error::Scenario("CSV index outside the grid".into()));
            }
            let v: f64 = rec[2 * n].parse().map_err(|e| Error::Scenario(format!("bad value: {e}")))?;
            values[grid.flat(&idx)] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Scenario("CSV does not cover every lattice point".into()));
        }
        Ok(values)
    }
}

/// `u^τ(x) = u(x', x_n + τ)`.
pub fn shift_vertical(u: &GridFunction, tau: f64) -> GridFunction {
    let mut grid = u.grid.clone();
    let n = grid.dim();
    grid.origin[n - 1] -= tau;
    GridFunction {
        grid,
        values: u.values.clone(),
        exterior: u.exterior.shifted(tau),
        smoothness: u.smoothness,
    }
}

/// Whether `tau` is a whole multiple of the vertical spacing.
pub fn tau_aligned(grid: &Grid, tau: f64) -> bool {
    let h = grid.h[grid.dim() - 1];
    let k = tau / h;
    (k - k.round()).abs() < 1e-9
}

/// `a u + b v` on the union lattice of the two hulls.
pub fn linear_combination(a: f64, u: &GridFunction, b: f64, v: &GridFunction) -> Result<GridFunction> {
    let grid = u.grid.union(&v.grid)?;
    let values = (0..grid.len())
        .map(|f| {
            let x = grid.point(f);
            a * u.evaluate(&x) + b * v.evaluate(&x)
        })
        .collect();
    let exterior = ExteriorModel::linear_combination(a, &u.exterior, b, &v.exterior);
    let mut w = GridFunction::new(grid, values, exterior)?;
    w.smoothness = if u.smoothness == v.smoothness { u.smoothness } else { Smoothness::Unknown };
    Ok(w)
}

/// `u - v`.
pub fn difference(u: &GridFunction, v: &GridFunction) -> Result<GridFunction> {
    linear_combination(1.0, u, -1.0, v)
}

/// Dyadic-shell profile of the weighted tail `∫ |u| (1 + |y|)^{-n-2s}`.
#[derive(Debug, Clone, PartialEq)]
pub struct L2sReport {
    pub declared_growth: f64,
    pub shell_masses: Vec<f64>,
    /// Ratios of successive shell masses over the last shells.
    pub tail_ratios: Vec<f64>,
    pub admissible: bool,
}

/// Membership gate for the weighted integrability class: the declared growth
/// exponent must be below `2s`, and the shell masses must decay.
pub fn l2s_gate(u: &GridFunction, s: f64) -> Result<L2sReport> {
    let alpha = u.exterior.growth_class();
    let n = u.dim();
    let rule = crate::quadrature::gauss_legendre(16);
    let mut shells = Vec::new();
    let base = u
        .grid
        .lower()
        .iter()
        .chain(u.grid.upper().iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let weight = |r: f64| (1.0 + r).powf(-(n as f64) - 2.0 * s);
    for k in 0..24 {
        let lo = base * 2f64.powi(k);
        let hi = 2.0 * lo;
        let mass = match n {
            1 => rule.integrate(lo, hi, |t| (u.evaluate(&[t]).abs() + u.evaluate(&[-t]).abs()) * weight(t)),
            2 => {
                let m = 64;
                let mut acc = 0.0;
                for j in 0..m {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    acc += rule.integrate(lo, hi, |t| u.evaluate(&[t * th.cos(), t * th.sin()]).abs() * weight(t) * t);
                }
                acc * 2.0 * std::f64::consts::PI / m as f64
            }
            _ => return Err(Error::Unsupported("weighted tail gate implemented for n = 1, 2".into())),
        };
        shells.push(mass);
    }
    let tail_ratios: Vec<f64> = shells
        .windows(2)
        .skip(shells.len() - 6)
        .map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] })
        .collect();
    let decaying = tail_ratios.iter().all(|r| *r < 1.0);
    Ok(L2sReport {
        declared_growth: alpha,
        shell_masses: shells,
        tail_ratios,
        admissible: alpha < 2.0 * s && decaying,
    })
}
