//! Damped Newton for `(-Δ)^s u = f(u)` in a bounded domain with prescribed
//! exterior values, and the truncated whole-line layer problem.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::field::{ExteriorModel, Grid, GridFunction, Profile};
use crate::kernel::FracParams;
use crate::linalg::solve_dense;
use crate::operator::{assemble_linear_operator, FracLaplacian, LinearSystem, QuadratureSpec};

/// Largest δ for which `u - u^3` is nonincreasing on `[1 - δ, 1]`.
pub fn cubic_flat_limit() -> f64 {
    1.0 - 1.0 / 3f64.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reaction {
    /// `u - u^3`
    CubicDeGiorgi,
    Linear { slope: f64, intercept: f64 },
    /// Piecewise linear through `(u[i], f[i])`, constant beyond the ends.
    Tabulated { u: Vec<f64>, f: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nonlinearity {
    pub variant: Reaction,
    #[serde(default)]
    pub lipschitz_const: Option<f64>,
    #[serde(default)]
    pub flat_delta: Option<f64>,
    /// Range on which the Lipschitz bound is declared.
    #[serde(default = "default_range")]
    pub value_range: [f64; 2],
}

fn default_range() -> [f64; 2] {
    [-1.0, 1.0]
}

impl Nonlinearity {
    pub fn cubic() -> Self {
        Self { variant: Reaction::CubicDeGiorgi, lipschitz_const: Some(2.0), flat_delta: Some(0.4), value_range: default_range() }
    }

    pub fn linear(slope: f64, intercept: f64) -> Self {
        Self {
            variant: Reaction::Linear { slope, intercept },
            lipschitz_const: Some(slope.abs()),
            flat_delta: None,
            value_range: default_range(),
        }
    }

    pub fn zero() -> Self {
        Self::linear(0.0, 0.0)
    }

    pub fn tabulated(u: Vec<f64>, f: Vec<f64>) -> Self {
        Self { variant: Reaction::Tabulated { u, f }, lipschitz_const: None, flat_delta: None, value_range: default_range() }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &self.variant {
            Reaction::CubicDeGiorgi => u - u * u * u,
            Reaction::Linear { slope, intercept } => slope * u + intercept,
            Reaction::Tabulated { u: xs, f } => {
                if u <= xs[0] {
                    return f[0];
                }
                if u >= xs[xs.len() - 1] {
                    return f[f.len() - 1];
                }
                let i = xs.partition_point(|x| *x <= u) - 1;
                let t = (u - xs[i]) / (xs[i + 1] - xs[i]);
                f[i] + t * (f[i + 1] - f[i])
            }
        }
    }

    /// `f'(u)`: analytic for the smooth variants, central difference otherwise.
    pub fn derivative(&self, u: f64) -> f64 {
        match &self.variant {
            Reaction::CubicDeGiorgi => 1.0 - 3.0 * u * u,
            Reaction::Linear { slope, .. } => *slope,
            Reaction::Tabulated { .. } => {
                let e = 1e-6 * (1.0 + u.abs());
                (self.eval(u + e) - self.eval(u - e)) / (2.0 * e)
            }
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self.variant, Reaction::Tabulated { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if let Reaction::Tabulated { u, f } = &self.variant {
            if u.len() < 2 || u.len() != f.len() {
                return bad("tabulated nonlinearity needs at least two (u, f) pairs of equal length");
            }
            if u.windows(2).any(|w| !(w[1] > w[0])) || f.iter().any(|v| !v.is_finite()) {
                return bad("tabulated abscissae must be strictly increasing and values finite");
            }
        }
        if let Some(l) = self.lipschitz_const {
            if !(l >= 0.0) {
                return bad("lipschitz_const must be nonnegative");
            }
        }
        if !(self.value_range[1] > self.value_range[0]) {
            return bad("value_range must be increasing");
        }
        if let Some(d) = self.flat_delta {
            if !(d > 0.0 && d <= 1.0) {
                return bad("flat_delta must lie in (0, 1]");
            }
            if matches!(self.variant, Reaction::CubicDeGiorgi) && d > cubic_flat_limit() + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "u - u^3 is not nonincreasing on [1 - {d}, 1]; flat_delta must be at most {:.6}",
                    cubic_flat_limit()
                )));
            }
        }
        Ok(())
    }

    /// Largest observed `|f(a) - f(b)| / |a - b|` over random pairs in the
    /// declared range.
    pub fn spot_check_lipschitz(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [lo, hi] = self.value_range;
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let a = rng.gen_range(lo..=hi);
            let b = rng.gen_range(lo..=hi);
            if (a - b).abs() > 1e-12 {
                worst = worst.max((self.eval(a) - self.eval(b)).abs() / (a - b).abs());
            }
        }
        worst
    }

    /// `f` nonincreasing on `[-1, -1 + δ]` and `[1 - δ, 1]`, sampled.
    pub fn check_flat(&self, samples: usize) -> bool {
        let Some(d) = self.flat_delta else { return false };
        let tol = 1e-12;
        let mono = |a: f64, b: f64| {
            (0..samples).all(|k| {
                let t0 = a + (b - a) * k as f64 / samples as f64;
                let t1 = a + (b - a) * (k + 1) as f64 / samples as f64;
                self.eval(t1) <= self.eval(t0) + tol
            })
        };
        mono(-1.0, -1.0 + d) && mono(1.0 - d, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGuess {
    /// Linear in `x_n` between the exterior limits across the domain, clipped to `[-1, 1]`.
    #[default]
    VerticalRamp,
    /// Solution of the problem with `f ≡ 0`.
    ExteriorHarmonic,
    /// Values at every grid node.
    Supplied { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub residual_tol: f64,
    pub max_newton_iters: usize,
    pub damping: f64,
    pub initial_guess: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { residual_tol: 1e-10, max_newton_iters: 50, damping: 0.5, initial_guess: InitialGuess::VerticalRamp }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter("residual_tol must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::InvalidParameter("damping must lie in (0, 1)".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::InvalidParameter("max_newton_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverLog {
    pub unknowns: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm residual before each step and after the last.
    pub residual_history: Vec<f64>,
    /// Line-search step per Newton iteration, or the pseudo time step after a restart.
    pub step_lengths: Vec<f64>,
    /// Largest `r_{k+1} / r_k^2` once `r_k < 1e-4`.
    pub quadratic_constant: Option<f64>,
    pub restarted: bool,
    pub config: SolverConfig,
    pub nonlinearity: Nonlinearity,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridFunction,
    pub log: SolverLog,
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

fn residual(sys: &LinearSystem, g: &DVector<f64>, f: &Nonlinearity, u: &DVector<f64>) -> DVector<f64> {
    let mut r = &sys.matrix * u + g;
    for (ri, ui) in r.iter_mut().zip(u.iter()) {
        *ri -= f.eval(*ui);
    }
    r
}

fn initial_values(
    sys: &LinearSystem,
    g: &DVector<f64>,
    omega: &DomainSpec,
    phi: &ExteriorModel,
    guess: &InitialGuess,
) -> Result<DVector<f64>> {
    let n = sys.grid.dim();
    match guess {
        InitialGuess::Supplied { values } => {
            if values.len() != sys.grid.len() {
                return Err(Error::InvalidParameter(format!(
                    "supplied initial guess has {} values for {} grid nodes",
                    values.len(),
                    sys.grid.len()
                )));
            }
            Ok(DVector::from_iterator(sys.len(), sys.unknowns.iter().map(|&f| values[f])))
        }
        InitialGuess::ExteriorHarmonic => {
            solve_dense(sys.matrix.clone(), &(-g)).ok_or(Error::SingularJacobian { iteration: 0, iterate: vec![] })
        }
        InitialGuess::VerticalRamp => {
            let pts = sys.points();
            let vals: Vec<f64> = match phi.vertical_info() {
                Some(info) => {
                    let (lo, hi) = omega.xn_range(n)?;
                    let span = (hi - lo).max(f64::MIN_POSITIVE);
                    pts.iter()
                        .map(|x| {
                            let t = (x[n - 1] - lo) / span;
                            (info.lower_limit + t * (info.upper_limit - info.lower_limit)).clamp(-1.0, 1.0)
                        })
                        .collect()
                }
                None => pts.iter().map(|x| phi.eval(x)).collect(),
            };
            Ok(DVector::from_vec(vals))
        }
    }
}

fn newton(
    sys: &LinearSystem,
    g: &DVector<f64>,
    f: &Nonlinearity,
    mut u: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, Vec<f64>, Vec<f64>)> {
    let mut r = residual(sys, g, f, &u);
    let mut rn = max_norm(&r);
    let mut history = vec![rn];
    let mut steps = Vec::new();
    for it in 0..cfg.max_newton_iters {
        if rn <= cfg.residual_tol {
            return Ok((u, history, steps));
        }
        let mut jac = sys.matrix.clone();
        for (i, ui) in u.iter().enumerate() {
            jac[(i, i)] -= f.derivative(*ui);
        }
        let du = solve_dense(jac, &r).ok_or_else(|| Error::SingularJacobian { iteration: it, iterate: u.iter().copied().collect() })?;
        // Armijo on |F|_2, for which the Newton step is a descent direction
        let r2 = r.norm();
        let mut t = 1.0;
        loop {
            let trial = &u - t * &du;
            let rt = residual(sys, g, f, &trial);
            let rtn = max_norm(&rt);
            if rt.norm() <= (1.0 - 1e-4 * t) * r2 || rtn <= cfg.residual_tol {
                u = trial;
                r = rt;
                rn = rtn;
                break;
            }
            t *= cfg.damping;
            if t < 1e-3 {
                return Err(Error::NewtonStagnation { iterations: it, residual: rn, history });
            }
        }
        steps.push(t);
        history.push(rn);
    }
    if rn <= cfg.residual_tol {
        return Ok((u, history, steps));
    }
    Err(Error::NewtonStagnation { iterations: cfg.max_newton_iters, residual: rn, history })
}

/// Pseudo-transient continuation: Newton on `u_t = -F(u)` with shift
/// `I / dt`, `dt` grown as the residual falls. Ends in plain Newton steps.
fn continuation(
    sys: &LinearSystem,
    g: &DVector<f64>,
    f: &Nonlinearity,
    mut u: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, Vec<f64>, Vec<f64>)> {
    let mut r = residual(sys, g, f, &u);
    let mut rn = max_norm(&r);
    let mut r2 = r.norm();
    let mut history = vec![rn];
    let mut steps = Vec::new();
    let mut dt = 1.0;
    let budget = 4 * cfg.max_newton_iters;
    for it in 0..budget {
        if rn <= cfg.residual_tol {
            return Ok((u, history, steps));
        }
        let mut jac = sys.matrix.clone();
        let shift = if dt > 1e12 { 0.0 } else { 1.0 / dt };
        for (i, ui) in u.iter().enumerate() {
            jac[(i, i)] += shift - f.derivative(*ui);
        }
        let du = solve_dense(jac, &r).ok_or_else(|| Error::SingularJacobian { iteration: it, iterate: u.iter().copied().collect() })?;
        let trial = &u - &du;
        let rt = residual(sys, g, f, &trial);
        let rt2 = rt.norm();
        if rt2 > 10.0 * r2 {
            dt *= cfg.damping;
            continue;
        }
        u = trial;
        r = rt;
        rn = max_norm(&r);
        let ratio = r2 / rt2.max(f64::MIN_POSITIVE);
        let grow = if ratio > 1.0 { ratio.max(2.0) } else { ratio };
        dt = (dt * grow.min(10.0)).max(1e-3);
        r2 = rt2;
        steps.push(dt.min(1e12));
        history.push(rn);
    }
    if rn <= cfg.residual_tol {
        return Ok((u, history, steps));
    }
    Err(Error::NewtonStagnation { iterations: budget, residual: rn, history })
}

fn quadratic_constant(history: &[f64]) -> Option<f64> {
    history
        .windows(2)
        .filter(|w| w[0] < 1e-4 && w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] / (w[0] * w[0]))
        .reduce(f64::max)
}

/// Solve on the lattice points of `grid` inside `omega`, with `u = φ` at
/// every other point.
pub fn solve_dirichlet(
    p: &FracParams,
    omega: &DomainSpec,
    phi: &ExteriorModel,
    f: &Nonlinearity,
    grid: &Grid,
    q: &QuadratureSpec,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    f.validate()?;
    omega.validate(grid.dim())?;
    phi.validate(grid.dim()).map_err(Error::InvalidParameter)?;
    if phi.growth_class() > 0.0 {
        return Err(Error::InvalidParameter("exterior data must be bounded".into()));
    }
    let sys = assemble_linear_operator(p, grid, omega, q)?;
    let g = sys.exterior_load(phi)?;
    let u0 = initial_values(&sys, &g, omega, phi, &cfg.initial_guess)?;
    let mut restarted = false;
    let (u, history, steps) = match newton(&sys, &g, f, u0, cfg) {
        Ok(out) => out,
        Err(Error::NewtonStagnation { .. }) if cfg.initial_guess != InitialGuess::ExteriorHarmonic => {
            restarted = true;
            let u0 = initial_values(&sys, &g, omega, phi, &InitialGuess::ExteriorHarmonic)?;
            continuation(&sys, &g, f, u0, cfg)?
        }
        Err(e) => return Err(e),
    };
    let values: Vec<f64> = u.iter().copied().collect();
    let log = SolverLog {
        unknowns: sys.len(),
        iterations: steps.len(),
        converged: true,
        quadratic_constant: quadratic_constant(&history),
        residual_history: history,
        step_lengths: steps,
        restarted,
        config: cfg.clone(),
        nonlinearity: f.clone(),
    };
    Ok(Solution { u: sys.grid_function(&values, phi)?, log })
}

/// Grid for the layer problem on `(-L, L)`: two exterior nodes on each side.
pub fn layer_grid(l: f64, h: f64) -> Result<Grid> {
    let m = (l / h).round();
    if ((m * h) - l).abs() > 1e-9 * l.max(1.0) {
        return Err(Error::InvalidParameter(format!("L = {l} is not a multiple of h = {h}")));
    }
    Grid::covering(&[-l - 2.0 * h], &[l + 2.0 * h], h)
}

/// Exterior data of the truncated layer problem.
pub fn layer_exterior() -> ExteriorModel {
    ExteriorModel::profile(Profile::Step { at: 0.0, lo: -1.0, hi: 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLayer {
    pub margin: f64,
    /// `|u(-(L - margin)) + 1|`
    pub lower_gap: f64,
    /// `|u(L - margin) - 1|`
    pub upper_gap: f64,
}

#[derive(Debug, Clone)]
pub struct LayerSolution {
    pub half_length: f64,
    pub u: GridFunction,
    pub log: SolverLog,
    pub boundary_layer: Vec<BoundaryLayer>,
}

pub const LAYER_GAP_NOTE: &str = "the layer statements concern all of space; this solution is \
     the truncated problem on (-L, L) with exterior data -1 / +1, and only truncation-stable \
     properties are certified";

/// Solve the truncated layer problem on `(-L, L)`.
pub fn solve_layer_1d(
    p: &FracParams,
    l: f64,
    f: &Nonlinearity,
    grid: &Grid,
    q: &QuadratureSpec,
    cfg: &SolverConfig,
) -> Result<LayerSolution> {
    if p.n != 1 {
        return Err(Error::InvalidParameter("the layer solver is one-dimensional".into()));
    }
    if f.flat_delta.is_none() {
        return Err(Error::InvalidParameter("layer problems need a nonlinearity with flat_delta".into()));
    }
    if !(l > 0.0) {
        return Err(Error::InvalidParameter("L must be positive".into()));
    }
    // nodes at ±L belong to the exterior even after rounding
    let eps = 1e-9 * grid.h[0];
    let omega = DomainSpec::interval(-l + eps, l - eps);
    let phi = layer_exterior();
    let sol = solve_dirichlet(p, &omega, &phi, f, grid, q, cfg)?;
    let boundary_layer = [0.5, 1.0, 2.0, 5.0, 10.0]
        .iter()
        .filter(|m| **m < l)
        .map(|&m| BoundaryLayer {
            margin: m,
            lower_gap: (sol.u.evaluate(&[-(l - m)]) + 1.0).abs(),
            upper_gap: (sol.u.evaluate(&[l - m]) - 1.0).abs(),
        })
        .collect();
    Ok(LayerSolution { half_length: l, u: sol.u, log: sol.log, boundary_layer })
}

/// Initial guess that interpolates a previous solution onto `grid`.
pub fn warm_start(prev: &GridFunction, grid: &Grid) -> InitialGuess {
    InitialGuess::Supplied { values: (0..grid.len()).map(|i| prev.evaluate(&grid.point(i))).collect() }
}

/// `max |(-Δ)^s u - f(u)|` over the probes that lie in `omega`.
pub fn residual_field(
    p: &FracParams,
    u: &GridFunction,
    f: &Nonlinearity,
    omega: &DomainSpec,
    probes: &[Vec<f64>],
    q: &QuadratureSpec,
) -> Result<f64> {
    let op = FracLaplacian::for_grid(p, &u.grid, q)?;
    let vals: Result<Vec<f64>> = probes
        .par_iter()
        .filter(|x| omega.contains(x))
        .map(|x| Ok((op.eval(u, x)? - f.eval(u.evaluate(x))).abs()))
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::make_params;

    #[test]
    fn constants_solve_homogeneous_problem() {
        let p = make_params(1, 0.5).unwrap();
        let grid = Grid::covering(&[-1.2], &[1.2], 0.05).unwrap();
        let sol = solve_dirichlet(
            &p,
            &DomainSpec::interval(-1.0, 1.0),
            &ExteriorModel::constant(0.7),
            &Nonlinearity::zero(),
            &grid,
            &QuadratureSpec::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(sol.u.values.iter().all(|v| (v - 0.7).abs() < 1e-10));
    }

    #[test]
    fn linear_problem_matches_direct_solve() {
        let p = make_params(1, 0.5).unwrap();
        let grid = Grid::covering(&[-1.2], &[1.2], 0.05).unwrap();
        let omega = DomainSpec::interval(-1.0, 1.0);
        let phi = ExteriorModel::profile(Profile::Step { at: 0.0, lo: 0.0, hi: 1.0 });
        let q = QuadratureSpec::default();
        let sol = solve_dirichlet(&p, &omega, &phi, &Nonlinearity::zero(), &grid, &q, &SolverConfig::default()).unwrap();
        let sys = assemble_linear_operator(&p, &grid, &omega, &q).unwrap();
        let g = sys.exterior_load(&phi).unwrap();
        let direct = sys.matrix.clone().lu().solve(&(-g)).unwrap();
        for (k, &f) in sys.unknowns.iter().enumerate() {
            assert!((sol.u.values[f] - direct[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn cubic_flat_delta_bound() {
        let mut f = Nonlinearity::cubic();
        assert!(f.validate().is_ok() && f.check_flat(200));
        f.flat_delta = Some(0.5);
        assert!(f.validate().is_err());
        assert!(f.spot_check_lipschitz(1000, 1) <= 2.0);
    }

    #[test]
    fn tabulated_interpolates() {
        let f = Nonlinearity::tabulated(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]);
        assert!(f.validate().is_ok());
        assert_eq!(f.eval(0.5), 0.5);
        assert!((f.derivative(0.5) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_layer_is_odd_and_increasing() {
        let p = make_params(1, 0.5).unwrap();
        let l = 4.0;
        let grid = layer_grid(l, 0.05).unwrap();
        let q = QuadratureSpec::default();
        let lin = solve_layer_1d(&p, l, &Nonlinearity { flat_delta: Some(0.4), ..Nonlinearity::zero() }, &grid, &q, &SolverConfig::default())
            .unwrap();
        let n = grid.len();
        for i in 0..n {
            assert!((lin.u.values[i] + lin.u.values[n - 1 - i]).abs() < 1e-9);
        }
        let cub = solve_layer_1d(&p, l, &Nonlinearity::cubic(), &grid, &q, &SolverConfig::default()).unwrap();
        assert!(cub.log.converged);
        assert!(cub.u.values[2..n - 2].windows(2).all(|w| w[1] > w[0]));
        let probes: Vec<Vec<f64>> = (0..20).map(|k| vec![-3.0 + 0.3 * k as f64 + 0.013]).collect();
        let res = residual_field(&p, &cub.u, &Nonlinearity::cubic(), &DomainSpec::interval(-l, l), &probes, &q).unwrap();
        assert!(res < 0.05, "{res}");
    }

    #[test]
    fn zero_function_has_zero_residual() {
        let p = make_params(1, 0.3).unwrap();
        let grid = Grid::covering(&[-2.0], &[2.0], 0.1).unwrap();
        let u = GridFunction::from_exterior(grid, ExteriorModel::Zero).unwrap();
        let probes = vec![vec![0.0], vec![0.33]];
        let r = residual_field(&p, &u, &Nonlinearity::cubic(), &DomainSpec::interval(-1.0, 1.0), &probes, &QuadratureSpec::default()).unwrap();
        assert_eq!(r, 0.0);
    }
}
