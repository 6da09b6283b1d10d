//! Pointwise evaluation and matrix assembly of `(-Δ)^s` on grid functions.
//!
//! `(-Δ)^s u(x) = C_{n,s} [ Σ_{j≠0} W_j (u(x) - u(x + j⊙h)) + T u(x) - ∫_{S^c} u(x+y) |y|^{-n-2s} dy ]`
//! where `S` is a lattice box large enough that `x + S` covers the grid
//! hull, `W_j` are the lattice weights of [`LatticeKernel`], and `T` is the
//! kernel mass of `S^c`. The last integral only sees the exterior model.

mod lattice;
mod tail;

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use lattice::LatticeKernel;
pub(crate) use tail::{tail_integral, TailGeometry};

use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::field::{ExteriorModel, Grid, GridFunction};
use crate::kernel::FracParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    /// Pick the best available method for each exterior model.
    #[default]
    Auto,
    /// Closed form; only constant exteriors are accepted.
    AnalyticConstant,
    /// Log-radial quadrature for any model.
    RadialNumeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Inner split radius; defaults to two grid spacings.
    #[serde(default)]
    pub rho_inner: Option<f64>,
    /// Minimum half-width of the lattice box; the box always covers the hull.
    #[serde(default)]
    pub r_outer: Option<f64>,
    #[serde(default = "default_angular")]
    pub nodes_angular: usize,
    #[serde(default)]
    pub tail_mode: TailMode,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_angular() -> usize {
    256
}

fn default_tol() -> f64 {
    1e-3
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rho_inner: None, r_outer: None, nodes_angular: default_angular(), tail_mode: TailMode::Auto, tol: default_tol() }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("quadrature tol must be positive".into()));
        }
        if let Some(r) = self.rho_inner {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter("rho_inner must be positive".into()));
            }
            if let Some(big) = self.r_outer {
                if !(r < big) {
                    return Err(Error::InvalidParameter("rho_inner must be below r_outer".into()));
                }
            }
        }
        Ok(())
    }

    fn inner_cells(&self, h: &[f64]) -> usize {
        let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
        match self.rho_inner {
            Some(r) => ((r / hmin).round() as usize).max(1),
            None => 2,
        }
    }
}

/// Discrete operator bound to a lattice spacing and box size.
#[derive(Debug, Clone)]
pub struct FracLaplacian {
    params: FracParams,
    spec: QuadratureSpec,
    kernel: Arc<LatticeKernel>,
    geo: TailGeometry,
}

impl FracLaplacian {
    pub fn for_grid(p: &FracParams, grid: &Grid, q: &QuadratureSpec) -> Result<Self> {
        q.validate()?;
        if grid.dim() != p.n {
            return Err(Error::InvalidParameter(format!("grid dimension {} differs from n = {}", grid.dim(), p.n)));
        }
        let m = q.inner_cells(&grid.h);
        let half: Vec<usize> = (0..grid.dim())
            .map(|k| {
                let cover = grid.shape[k] - 1;
                let want = q.r_outer.map_or(0, |r| (r / grid.h[k]).ceil() as usize);
                cover.max(want).max(m + 2)
            })
            .collect();
        let kernel = LatticeKernel::cached(p.s, &grid.h, m, &half)?;
        let geo = TailGeometry::new(p.s, kernel.half_widths(), q.nodes_angular);
        Ok(Self { params: *p, spec: q.clone(), kernel, geo })
    }

    pub fn kernel(&self) -> &LatticeKernel {
        &self.kernel
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// Radius of the region handled by the second-difference stencil.
    pub fn inner_radius(&self) -> f64 {
        self.kernel.m as f64 * self.kernel.h.iter().copied().fold(0.0, f64::max)
    }

    /// `C_{n,s} T`, the diagonal contribution of the far field.
    pub fn far_mass(&self) -> f64 {
        self.params.c_ns * self.geo.mass()
    }

    /// `∫_{S^c} φ(x + y) |y|^{-n-2s} dy`.
    pub fn tail(&self, phi: &ExteriorModel, x: &[f64]) -> Result<f64> {
        tail_integral(phi, x, &self.geo, self.spec.tail_mode)
    }

    fn check_function(&self, u: &GridFunction) -> Result<()> {
        let g = &u.grid;
        if g.dim() != self.params.n {
            return Err(Error::InvalidParameter("function dimension differs from parameters".into()));
        }
        for k in 0..g.dim() {
            if ((g.h[k] - self.kernel.h[k]) / g.h[k]).abs() > 1e-12 {
                return Err(Error::IncompatibleGrids("spacing differs from the operator lattice".into()));
            }
        }
        let alpha = u.exterior.growth_class();
        if !(alpha < 2.0 * self.params.s) {
            return Err(Error::TailNotIntegrable { alpha, two_s: 2.0 * self.params.s });
        }
        Ok(())
    }

    fn check_point(&self, u: &GridFunction, x: &[f64]) -> Result<()> {
        let g = &u.grid;
        if x.len() != g.dim() {
            return Err(Error::InvalidParameter("point dimension differs from grid".into()));
        }
        let margin = g.hull_margin(x);
        let need = self.inner_radius();
        if margin < need * (1.0 - 1e-9) {
            return Err(Error::TooCloseToBoundary { point: x.to_vec(), margin, required: need });
        }
        for k in 0..g.dim() {
            let reach = (x[k] - g.origin[k]).max(g.upper_axis(k) - x[k]);
            if reach > self.kernel.half[k] as f64 * g.h[k] * (1.0 + 1e-12) {
                return Err(Error::IncompatibleGrids("lattice box does not cover the grid hull".into()));
            }
        }
        Ok(())
    }

    /// `(-Δ)^s u(x)`.
    pub fn eval(&self, u: &GridFunction, x: &[f64]) -> Result<f64> {
        self.check_function(u)?;
        self.check_point(u, x)?;
        let near = match u.grid.index_of(x, 1e-9) {
            Some(idx) => self.lattice_sum(u, &idx),
            None => self.offgrid_sum(u, x),
        };
        let u0 = u.evaluate(x);
        let far = self.tail(&u.exterior, x)?;
        Ok(self.params.c_ns * (near + u0 * self.geo.mass() - far))
    }

    fn lattice_sum(&self, u: &GridFunction, idx: &[usize]) -> f64 {
        let g = &u.grid;
        let k = &self.kernel;
        let value = |mi: &[isize]| -> f64 {
            let inside = mi.iter().enumerate().all(|(a, &i)| i >= 0 && (i as usize) < g.shape[a]);
            if inside {
                let mut f = 0usize;
                for (a, &i) in mi.iter().enumerate() {
                    f = f * g.shape[a] + i as usize;
                }
                u.values[f]
            } else {
                let x: Vec<f64> = mi.iter().enumerate().map(|(a, &i)| g.origin[a] + i as f64 * g.h[a]).collect();
                u.exterior.eval(&x)
            }
        };
        let i0: Vec<isize> = idx.iter().map(|&i| i as isize).collect();
        let u0 = value(&i0);
        match g.dim() {
            1 => {
                let mut acc = 0.0;
                let c = k.half[0];
                for j in 1..=c as isize {
                    let w = k.weights[c + j as usize];
                    acc += w * (2.0 * u0 - value(&[i0[0] + j]) - value(&[i0[0] - j]));
                }
                acc
            }
            _ => {
                let (m1, m2) = (k.half[0] as isize, k.half[1] as isize);
                let stride = (2 * m2 + 1) as usize;
                let mut acc = 0.0;
                for a in -m1..=m1 {
                    for b in -m2..=m2 {
                        if a == 0 && b == 0 {
                            continue;
                        }
                        let w = k.weights[(a + m1) as usize * stride + (b + m2) as usize];
                        acc += w * (u0 - value(&[i0[0] + a, i0[1] + b]));
                    }
                }
                acc
            }
        }
    }

    fn offgrid_sum(&self, u: &GridFunction, x: &[f64]) -> f64 {
        let k = &self.kernel;
        let u0 = u.evaluate(x);
        match x.len() {
            1 => {
                let c = k.half[0];
                let h = k.h[0];
                let mut acc = 0.0;
                for j in 1..=c {
                    let w = k.weights[c + j];
                    let d = j as f64 * h;
                    acc += w * (2.0 * u0 - u.evaluate(&[x[0] + d]) - u.evaluate(&[x[0] - d]));
                }
                acc
            }
            _ => {
                let (m1, m2) = (k.half[0] as isize, k.half[1] as isize);
                let stride = (2 * m2 + 1) as usize;
                let mut acc = 0.0;
                for a in -m1..=m1 {
                    for b in -m2..=m2 {
                        if a == 0 && b == 0 {
                            continue;
                        }
                        let w = k.weights[(a + m1) as usize * stride + (b + m2) as usize];
                        let y = [x[0] + a as f64 * k.h[0], x[1] + b as f64 * k.h[1]];
                        acc += w * (u0 - u.evaluate(&y));
                    }
                }
                acc
            }
        }
    }
}

/// `(-Δ)^s u(x)` with quadrature settings `q`.
pub fn frac_laplacian_at(p: &FracParams, u: &GridFunction, x: &[f64], q: &QuadratureSpec) -> Result<f64> {
    FracLaplacian::for_grid(p, &u.grid, q)?.eval(u, x)
}

/// Batched [`frac_laplacian_at`]; results do not depend on scheduling.
pub fn frac_laplacian_field(p: &FracParams, u: &GridFunction, points: &[Vec<f64>], q: &QuadratureSpec) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let op = FracLaplacian::for_grid(p, &u.grid, q)?;
    points.par_iter().map(|x| op.eval(u, x)).collect()
}

/// Matrix of the operator on the lattice unknowns inside a domain, together
/// with what is needed to build the exterior load.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub grid: Grid,
    /// Flat grid indices of the unknowns.
    pub unknowns: Vec<usize>,
    pub matrix: DMatrix<f64>,
    slot: Vec<Option<usize>>,
    op: FracLaplacian,
}

impl LinearSystem {
    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }

    pub fn operator(&self) -> &FracLaplacian {
        &self.op
    }

    /// Position of grid node `flat` in the unknown vector.
    pub fn slot(&self, flat: usize) -> Option<usize> {
        self.slot[flat]
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.unknowns.iter().map(|&f| self.grid.point(f)).collect()
    }

    /// `g(φ)`: contribution of the prescribed values `φ` at every lattice
    /// node that is not an unknown, and of the far field.
    pub fn exterior_load(&self, phi: &ExteriorModel) -> Result<DVector<f64>> {
        let g = &self.grid;
        let k = &self.op.kernel;
        let c = self.op.params.c_ns;
        let rows: Result<Vec<f64>> = self
            .unknowns
            .par_iter()
            .map(|&f| {
                let idx = g.multi(f);
                let x = g.coord(&idx);
                let mut acc = 0.0;
                match g.dim() {
                    1 => {
                        let m = k.half[0] as isize;
                        let i0 = idx[0] as isize;
                        for j in -m..=m {
                            if j == 0 {
                                continue;
                            }
                            let i = i0 + j;
                            if i >= 0 && (i as usize) < g.shape[0] && self.slot[i as usize].is_some() {
                                continue;
                            }
                            let w = k.weights[(j + m) as usize];
                            acc += w * phi.eval(&[g.origin[0] + i as f64 * g.h[0]]);
                        }
                    }
                    _ => {
                        let (m1, m2) = (k.half[0] as isize, k.half[1] as isize);
                        let stride = (2 * m2 + 1) as usize;
                        let (i0, j0) = (idx[0] as isize, idx[1] as isize);
                        for a in -m1..=m1 {
                            for b in -m2..=m2 {
                                if a == 0 && b == 0 {
                                    continue;
                                }
                                let (i, j) = (i0 + a, j0 + b);
                                if i >= 0 && j >= 0 && (i as usize) < g.shape[0] && (j as usize) < g.shape[1] {
                                    let fl = i as usize * g.shape[1] + j as usize;
                                    if self.slot[fl].is_some() {
                                        continue;
                                    }
                                }
                                let w = k.weights[(a + m1) as usize * stride + (b + m2) as usize];
                                let y = [g.origin[0] + i as f64 * g.h[0], g.origin[1] + j as f64 * g.h[1]];
                                acc += w * phi.eval(&y);
                            }
                        }
                    }
                }
                let far = self.op.tail(phi, &x)?;
                Ok(-c * (acc + far))
            })
            .collect();
        Ok(DVector::from_vec(rows?))
    }

    /// Full grid function with unknown values `u` and `φ` everywhere else.
    pub fn grid_function(&self, u: &[f64], phi: &ExteriorModel) -> Result<GridFunction> {
        let values = (0..self.grid.len())
            .map(|f| match self.slot[f] {
                Some(r) => u[r],
                None => phi.eval(&self.grid.point(f)),
            })
            .collect();
        GridFunction::new(self.grid.clone(), values, phi.clone())
    }

    /// Unknown values read off a grid function on the same grid.
    pub fn restrict(&self, u: &GridFunction) -> Vec<f64> {
        self.unknowns.iter().map(|&f| u.values[f]).collect()
    }

    /// Nonzero entries as `(row, col, value)` lines.
    pub fn write_triplets_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "value"])?;
        for j in 0..self.matrix.ncols() {
            for i in 0..self.matrix.nrows() {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    w.write_record([i.to_string(), j.to_string(), format!("{v:e}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Assemble the operator on lattice points of `grid` inside `omega`.
pub fn assemble_linear_operator(p: &FracParams, grid: &Grid, omega: &DomainSpec, q: &QuadratureSpec) -> Result<LinearSystem> {
    if !omega.is_bounded(grid.dim()) {
        return Err(Error::Unbounded("assembly needs a bounded domain".into()));
    }
    let op = FracLaplacian::for_grid(p, grid, q)?;
    let mut slot = vec![None; grid.len()];
    let mut unknowns = Vec::new();
    for (f, s) in slot.iter_mut().enumerate() {
        if omega.contains(&grid.point(f)) {
            *s = Some(unknowns.len());
            unknowns.push(f);
        }
    }
    if unknowns.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let nu = unknowns.len();
    let c = p.c_ns;
    let diag = c * (op.kernel.weight_sum + op.geo.mass());
    let mut matrix = DMatrix::<f64>::zeros(nu, nu);
    let multi: Vec<Vec<isize>> = unknowns
        .iter()
        .map(|&f| grid.multi(f).into_iter().map(|i| i as isize).collect())
        .collect();
    let kernel = &op.kernel;
    // symmetric: column r equals row r
    matrix
        .as_mut_slice()
        .par_chunks_mut(nu)
        .enumerate()
        .for_each(|(r, col)| {
            let a = &multi[r];
            for (t, b) in multi.iter().enumerate() {
                col[t] = if t == r {
                    diag
                } else {
                    let off: Vec<isize> = b.iter().zip(a).map(|(x, y)| x - y).collect();
                    -c * kernel.weight(&off)
                };
            }
        });
    Ok(LinearSystem { grid: grid.clone(), unknowns, matrix, slot, op })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Analytic, Profile};
    use crate::kernel::make_params;

    fn cos_fn(h: f64, half: f64) -> GridFunction {
        let grid = Grid::covering(&[-half], &[half], h).unwrap();
        let ext = ExteriorModel::closed_form(Analytic::Cosine { wave: vec![1.0], phase: 0.0, amplitude: 1.0 });
        GridFunction::from_exterior(grid, ext).unwrap()
    }

    #[test]
    fn constants_vanish() {
        let p = make_params(1, 0.4).unwrap();
        let grid = Grid::covering(&[-2.0], &[2.0], 0.05).unwrap();
        let u = GridFunction::from_exterior(grid, ExteriorModel::constant(3.0)).unwrap();
        let v = frac_laplacian_at(&p, &u, &[0.3], &QuadratureSpec::default()).unwrap();
        assert!(v.abs() < 1e-11, "{v}");
        let p2 = make_params(2, 0.6).unwrap();
        let g2 = Grid::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.1).unwrap();
        let u2 = GridFunction::from_exterior(g2, ExteriorModel::constant(-2.0)).unwrap();
        let v2 = frac_laplacian_at(&p2, &u2, &[0.1, -0.2], &QuadratureSpec::default()).unwrap();
        assert!(v2.abs() < 1e-10, "{v2}");
    }

    #[test]
    fn cosine_symbol_1d() {
        for s in [0.25, 0.5, 0.75] {
            let p = make_params(1, s).unwrap();
            let u = cos_fn(0.01, 4.0);
            for x in [0.0, 0.7, -1.3] {
                let v = frac_laplacian_at(&p, &u, &[x], &QuadratureSpec::default()).unwrap();
                assert!((v - x.cos()).abs() < 1e-3, "s = {s}, x = {x}: {v} vs {}", x.cos());
            }
        }
    }

    #[test]
    fn gaussian_symbol_2d() {
        let p = make_params(2, 0.5).unwrap();
        let grid = Grid::covering(&[-3.0, -3.0], &[3.0, 3.0], 0.1).unwrap();
        let ext = ExteriorModel::closed_form(Analytic::Gaussian { center: vec![0.0, 0.0], width: 1.0, amplitude: 1.0 });
        let u = GridFunction::from_exterior(grid, ext).unwrap();
        let v = frac_laplacian_at(&p, &u, &[0.0, 0.0], &QuadratureSpec::default()).unwrap();
        // Fourier: (-Δ)^s e^{-|x|^2} at 0 in the plane is 4^s Γ(1+s)
        let exact = 2.0 * crate::special::gamma(1.5);
        assert!(((v - exact) / exact).abs() < 1e-2, "{v} vs {exact}");
    }

    #[test]
    fn batch_matches_pointwise_bitwise() {
        let p = make_params(1, 0.5).unwrap();
        let u = cos_fn(0.05, 3.0);
        let pts = vec![vec![0.0], vec![0.123], vec![-1.0]];
        let q = QuadratureSpec::default();
        let batch = frac_laplacian_field(&p, &u, &pts, &q).unwrap();
        for (x, b) in pts.iter().zip(&batch) {
            assert_eq!(frac_laplacian_at(&p, &u, x, &q).unwrap().to_bits(), b.to_bits());
        }
        assert!(frac_laplacian_field(&p, &u, &[], &q).unwrap().is_empty());
    }

    #[test]
    fn boundary_margin_enforced() {
        let p = make_params(1, 0.5).unwrap();
        let u = cos_fn(0.05, 1.0);
        let e = frac_laplacian_at(&p, &u, &[0.95], &QuadratureSpec::default());
        assert!(matches!(e, Err(Error::TooCloseToBoundary { .. })));
        let grow = GridFunction::from_exterior(
            Grid::covering(&[-1.0], &[1.0], 0.05).unwrap(),
            ExteriorModel::closed_form(Analytic::PowerGrowth { exponent: 1.2, amplitude: 1.0 }),
        )
        .unwrap();
        assert!(matches!(
            frac_laplacian_at(&p, &grow, &[0.0], &QuadratureSpec::default()),
            Err(Error::TailNotIntegrable { .. })
        ));
    }

    #[test]
    fn assembly_reproduces_pointwise() {
        let p = make_params(1, 0.6).unwrap();
        let grid = Grid::covering(&[-1.6], &[1.6], 0.05).unwrap();
        let omega = DomainSpec::interval(-1.0, 1.0);
        let q = QuadratureSpec::default();
        let sys = assemble_linear_operator(&p, &grid, &omega, &q).unwrap();
        let phi = ExteriorModel::profile(Profile::Tanh { center: 0.1, width: 0.5, lo: -1.0, hi: 1.0 });
        let u: Vec<f64> = (0..sys.len()).map(|i| ((i * 37 % 11) as f64 / 11.0) - 0.5).collect();
        let g = sys.exterior_load(&phi).unwrap();
        let lhs = &sys.matrix * DVector::from_column_slice(&u) + &g;
        let gf = sys.grid_function(&u, &phi).unwrap();
        for (r, pt) in sys.points().iter().enumerate() {
            let v = frac_laplacian_at(&p, &gf, pt, &q).unwrap();
            assert!((v - lhs[r]).abs() < 1e-9 * (1.0 + v.abs()), "row {r}: {v} vs {}", lhs[r]);
        }
        // constants
        let one = sys.exterior_load(&ExteriorModel::constant(1.0)).unwrap();
        let ones = DVector::from_element(sys.len(), 1.0);
        let res = &sys.matrix * ones + one;
        assert!(res.amax() < 1e-9);
        // sign structure
        for i in 0..sys.len() {
            assert!(sys.matrix[(i, i)] > 0.0);
            for j in 0..sys.len() {
                if i != j {
                    assert!(sys.matrix[(i, j)] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn empty_interior_rejected() {
        let p = make_params(1, 0.5).unwrap();
        let grid = Grid::covering(&[-1.0], &[1.0], 0.1).unwrap();
        let omega = DomainSpec::interval(0.01, 0.09);
        assert!(matches!(
            assemble_linear_operator(&p, &grid, &omega, &QuadratureSpec::default()),
            Err(Error::EmptyInterior)
        ));
    }
}
