//! JSON scenarios and the command implementations behind the `fraclab` binary.
//!
//! A scenario names the parameters, domain, exterior data, nonlinearity,
//! grid and quadrature, plus optional sections for each command. Every
//! report carries the full scenario as its config echo.

use std::cell::OnceCell;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domains::{check_density_condition, density_profile, write_profile_csv, DomainSpec};
use crate::error::{Error, Result};
use crate::field::{difference, shift_vertical, Analytic, ExteriorModel, Grid, GridFunction};
use crate::kernel::{make_params, FracParams};
use crate::operator::{frac_laplacian_field, QuadratureSpec};
use crate::poisson::average_inequality_residual;
use crate::report::{Status, VerificationReport};
use crate::sliding::{
    aligned_taus, box_probes, c_tau_field, check_hypothesis_h, direction_sweep, measure_a, overlap_domain, tau_scan,
    verify_large_tau, verify_max_principle_unbounded, verify_narrow_region, SlidingScan, VerifyOptions,
};
use crate::solver::{layer_exterior, layer_grid, LAYER_GAP_NOTE, solve_dirichlet, solve_layer_1d, Nonlinearity, SolverConfig, SolverLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub n: usize,
    pub s: f64,
}

/// Uniform grid covering `[lo, hi]` with spacing `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Problem {
    /// `(-Δ)^s u = f(u)` in the domain, `u = φ` outside.
    #[default]
    Dirichlet,
    /// Truncated layer on `(-L, L)` with exterior data `∓1`; the grid is
    /// built from `grid.h` and the domain must be the interval.
    Layer { half_length: f64 },
}

/// Which function a check looks at: `"solution"`, `"sampled"` or
/// `{"shift_difference": {"tau": ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// Solution of the scenario problem.
    #[default]
    Solution,
    /// The exterior model sampled on the grid.
    Sampled,
    /// `u - u^τ` of the solution.
    ShiftDifference { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    /// `(-Δ)^s` of `A cos(k·x + p)` is `|k|^{2s} A cos(k·x + p)`.
    Fourier,
    /// The exact value is zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    /// Defaults to every lattice node of the domain far enough from the hull.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub oracle: Option<Oracle>,
    #[serde(default = "default_eval_tol")]
    pub tolerance: f64,
}

fn default_eval_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlideSpec {
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub tau_values: Option<Vec<f64>>,
    #[serde(default = "default_tau_count")]
    pub count: usize,
    #[serde(default = "default_conclusion_tol")]
    pub tolerance: f64,
}

impl Default for SlideSpec {
    fn default() -> Self {
        Self { source: Source::Solution, tau_values: None, count: default_tau_count(), tolerance: default_conclusion_tol() }
    }
}

fn default_tau_count() -> usize {
    20
}

fn default_conclusion_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    /// Base point; defaults to the origin.
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub k_lo: i32,
    #[serde(default = "default_k_hi")]
    pub k_hi: i32,
    #[serde(default = "default_samples")]
    pub samples_per_shell: usize,
    #[serde(default = "default_density_threshold")]
    pub threshold: f64,
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self { q: None, k_lo: 0, k_hi: default_k_hi(), samples_per_shell: default_samples(), threshold: default_density_threshold() }
    }
}

fn default_k_hi() -> i32 {
    8
}

fn default_samples() -> usize {
    100_000
}

fn default_density_threshold() -> f64 {
    0.25
}

fn default_probes() -> usize {
    200
}

fn default_segment_samples() -> usize {
    500
}

fn default_threshold_c() -> f64 {
    1.0
}

fn default_cutoff() -> f64 {
    1e-10
}

fn default_radii() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_avg_tol() -> f64 {
    1e-3
}

fn default_large_probes() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    #[serde(rename = "hypothesis_H")]
    HypothesisH {
        #[serde(default = "default_segment_samples")]
        segment_samples: usize,
    },
    TauScan {
        #[serde(default)]
        slide: SlideSpec,
    },
    NarrowRegion {
        /// Defaults to the largest scanned τ, where the overlap is narrowest.
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default = "default_threshold_c")]
        threshold_c: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
        #[serde(default = "default_conclusion_tol")]
        tolerance: f64,
    },
    MaxPrinciple {
        #[serde(default)]
        source: Source,
        /// Defaults to the scenario domain.
        #[serde(default)]
        domain: Option<DomainSpec>,
        #[serde(default)]
        coefficient: f64,
        #[serde(default = "default_probes")]
        probes: usize,
        #[serde(default)]
        density: DensitySpec,
        #[serde(default = "default_conclusion_tol")]
        tolerance: f64,
    },
    /// Evaluated at the largest lattice value inside the domain.
    AverageInequality {
        #[serde(default)]
        source: Source,
        #[serde(default = "default_radii")]
        radii: Vec<f64>,
        #[serde(default = "default_avg_tol")]
        tolerance: f64,
    },
    LargeTau {
        /// Defaults to the measured slab threshold.
        #[serde(default)]
        a: Option<f64>,
        /// Defaults to `2a`.
        #[serde(default)]
        tau: Option<f64>,
        #[serde(default = "default_large_probes")]
        probes: usize,
        #[serde(default = "default_conclusion_tol")]
        tolerance: f64,
    },
    DirectionSweep {
        #[serde(default)]
        source: Source,
        nu: Vec<f64>,
        tau_values: Vec<f64>,
        #[serde(default = "default_probes")]
        probes: usize,
        #[serde(default = "default_conclusion_tol")]
        tolerance: f64,
    },
    DensityCondition {
        #[serde(default)]
        density: DensitySpec,
    },
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::HypothesisH { .. } => "hypothesis_H",
            CheckSpec::TauScan { .. } => "tau_scan",
            CheckSpec::NarrowRegion { .. } => "narrow_region",
            CheckSpec::MaxPrinciple { .. } => "max_principle",
            CheckSpec::AverageInequality { .. } => "average_inequality",
            CheckSpec::LargeTau { .. } => "large_tau",
            CheckSpec::DirectionSweep { .. } => "direction_sweep",
            CheckSpec::DensityCondition { .. } => "density_condition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub params: ParamsSpec,
    pub domain: DomainSpec,
    pub exterior: ExteriorModel,
    #[serde(default = "Nonlinearity::zero")]
    pub nonlinearity: Nonlinearity,
    pub grid: GridSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub problem: Problem,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    /// Checks that end DEGENERATE still count as success.
    #[serde(default)]
    pub allow_degenerate: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eval: Option<EvalSpec>,
    #[serde(default)]
    pub slide: Option<SlideSpec>,
    #[serde(default)]
    pub density: Option<DensitySpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
            other => Error::Scenario(format!("{}: {other}", path.display())),
        })
    }

    pub fn params(&self) -> Result<FracParams> {
        make_params(self.params.n, self.params.s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.params.n;
        self.params()?;
        if !(1..=2).contains(&n) {
            return Err(Error::Scenario(format!("dimension {n} is not supported (n = 1 or 2)")));
        }
        self.domain.validate(n)?;
        self.exterior.validate(n).map_err(Error::Scenario)?;
        self.nonlinearity.validate()?;
        self.quadrature.validate()?;
        self.solver.validate()?;
        if self.grid.lo.len() != n || self.grid.hi.len() != n {
            return Err(Error::Scenario(format!("grid corners must have {n} coordinates")));
        }
        self.grid()?;
        if let Problem::Layer { half_length } = self.problem {
            if n != 1 {
                return Err(Error::Scenario("layer problems are one-dimensional".into()));
            }
            if self.domain != DomainSpec::interval(-half_length, half_length) || self.exterior != layer_exterior() {
                return Err(Error::Scenario(
                    "a layer scenario needs domain (-L, L) and the step exterior from -1 to 1 at 0".into(),
                ));
            }
        }
        for c in &self.checks {
            if let CheckSpec::DirectionSweep { nu, .. } = c {
                if nu.len() != n {
                    return Err(Error::Scenario("direction_sweep: nu has the wrong dimension".into()));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        match self.problem {
            Problem::Layer { half_length } => layer_grid(half_length, self.grid.h),
            Problem::Dirichlet => Grid::covering(&self.grid.lo, &self.grid.hi, self.grid.h),
        }
    }

    fn sampled(&self) -> Result<GridFunction> {
        GridFunction::from_exterior(self.grid()?, self.exterior.clone())
    }
}

/// Command-line overrides shared by every command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { out: PathBuf::from("."), seed: None, tol_scale: 1.0 }
    }
}

/// Reports of one command and the exit decision.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: String,
    pub reports: Vec<VerificationReport>,
    pub artifacts: Vec<PathBuf>,
    pub allow_degenerate: bool,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.reports
            .iter()
            .all(|r| r.status == Status::Pass || (self.allow_degenerate && r.status == Status::Degenerate))
    }

    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }

    /// Machine-parsable last line of standard output.
    pub fn status_line(&self) -> String {
        let count = |s: Status| self.reports.iter().filter(|r| r.status == s).count();
        format!(
            "STATUS {} command={} checks={} pass={} fail={} premise_fail={} degenerate={}",
            if self.success() { "OK" } else { "FAILED" },
            self.command,
            self.reports.len(),
            count(Status::Pass),
            count(Status::Fail),
            count(Status::PremiseFail),
            count(Status::Degenerate)
        )
    }
}

/// Write `path` through a temporary file in the same directory, so that a
/// failure leaves nothing behind.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

struct Ctx<'a> {
    sc: &'a Scenario,
    p: FracParams,
    opts: &'a RunOptions,
    seed: u64,
    solution: OnceCell<(GridFunction, SolverLog)>,
}

impl<'a> Ctx<'a> {
    fn new(sc: &'a Scenario, opts: &'a RunOptions) -> Result<Self> {
        Ok(Self { sc, p: sc.params()?, opts, seed: opts.seed.unwrap_or(sc.seed), solution: OnceCell::new() })
    }

    fn solve(&self) -> Result<&(GridFunction, SolverLog)> {
        if let Some(s) = self.solution.get() {
            return Ok(s);
        }
        let sc = self.sc;
        let grid = sc.grid()?;
        let t = Instant::now();
        let out = match sc.problem {
            Problem::Dirichlet => {
                let s = solve_dirichlet(&self.p, &sc.domain, &sc.exterior, &sc.nonlinearity, &grid, &sc.quadrature, &sc.solver)?;
                (s.u, s.log)
            }
            Problem::Layer { half_length } => {
                let s = solve_layer_1d(&self.p, half_length, &sc.nonlinearity, &grid, &sc.quadrature, &sc.solver)?;
                (s.u, s.log)
            }
        };
        println!(
            "solved {} unknowns in {} Newton steps, residual {:.3e} ({:.2?})",
            out.1.unknowns,
            out.1.iterations,
            out.1.residual_history.last().copied().unwrap_or(f64::NAN),
            t.elapsed()
        );
        Ok(self.solution.get_or_init(|| out))
    }

    fn function(&self, src: &Source) -> Result<GridFunction> {
        match src {
            Source::Solution => Ok(self.solve()?.0.clone()),
            Source::Sampled => self.sc.sampled(),
            Source::ShiftDifference { tau } => {
                let u = &self.solve()?.0;
                difference(u, &shift_vertical(u, *tau))
            }
        }
    }

    fn tol(&self, t: f64) -> f64 {
        t * self.opts.tol_scale
    }

    fn quadrature(&self) -> QuadratureSpec {
        let mut q = self.sc.quadrature.clone();
        q.tol *= self.opts.tol_scale;
        q
    }

    fn finish(&self, mut r: VerificationReport, check: serde_json::Value) -> VerificationReport {
        r.scenario = self.sc.name.clone();
        if matches!(self.sc.problem, Problem::Layer { .. }) {
            r = r.note(LAYER_GAP_NOTE);
        }
        r.config = serde_json::json!({
            "scenario": self.sc,
            "seed": self.seed,
            "tol_scale": self.opts.tol_scale,
            "check": check,
            "details": r.config,
        });
        r
    }

    fn scan(&self, spec: &SlideSpec) -> Result<SlidingScan> {
        let u = self.function(&spec.source)?;
        let n = self.p.n;
        let taus = match &spec.tau_values {
            Some(t) => t.clone(),
            None => {
                let (lo, hi) = self.sc.domain.xn_range(n)?;
                aligned_taus(&u.grid, hi - lo, spec.count)
            }
        };
        tau_scan(&u, &self.sc.domain, &taus, self.tol(spec.tolerance))
    }

    fn density(&self, spec: &DensitySpec, d: &DomainSpec) -> Result<(Vec<crate::domains::DensityShell>, VerificationReport)> {
        let n = self.p.n;
        let q = spec.q.clone().unwrap_or_else(|| vec![0.0; n]);
        let profile = density_profile(d, &q, spec.k_lo, spec.k_hi, spec.samples_per_shell, self.seed)?;
        let r = check_density_condition(&profile, spec.threshold);
        Ok((profile, r))
    }

    fn run_check(&self, c: &CheckSpec) -> Result<VerificationReport> {
        let sc = self.sc;
        let p = &self.p;
        let n = p.n;
        let q = self.quadrature();
        let echo = serde_json::to_value(c)?;
        let r = match c {
            CheckSpec::HypothesisH { segment_samples } => {
                let u = &self.solve()?.0;
                check_hypothesis_h(u, &sc.domain, &sc.exterior, *segment_samples)?
            }
            CheckSpec::TauScan { slide } => self.scan(slide)?.report(),
            CheckSpec::NarrowRegion { tau, threshold_c, cutoff, tolerance } => {
                let u = &self.solve()?.0;
                let tau = match tau {
                    Some(t) => *t,
                    None => {
                        let (lo, hi) = sc.domain.xn_range(n)?;
                        aligned_taus(&u.grid, hi - lo, default_tau_count())[0]
                    }
                };
                let d = overlap_domain(&sc.domain, n, tau);
                let ct = c_tau_field(u, tau, &sc.nonlinearity, &d, *cutoff)?;
                let neg = GridFunction::new(ct.grid.clone(), ct.values.iter().map(|v| -v).collect(), ExteriorModel::Zero)?;
                let w = difference(&shift_vertical(u, tau), u)?;
                let opts = VerifyOptions { tol: self.tol(*tolerance), ..Default::default() };
                verify_narrow_region(p, &d, &neg, &w, &q, *threshold_c, &opts)?.quantity("tau", tau)
            }
            CheckSpec::MaxPrinciple { source, domain, coefficient, probes, density, tolerance } => {
                let u = self.function(source)?;
                let d = domain.clone().unwrap_or_else(|| sc.domain.clone());
                let (_, dr) = self.density(density, &d)?;
                let c = GridFunction::from_exterior(u.grid.clone(), ExteriorModel::constant(*coefficient))?;
                let pts = box_probes(&u.grid, *probes);
                let opts = VerifyOptions { tol: self.tol(*tolerance), probes: *probes };
                verify_max_principle_unbounded(p, &d, &c, &u, &q, &pts, Some(&dr), &opts)?
            }
            CheckSpec::AverageInequality { source, radii, tolerance } => {
                let u = self.function(source)?;
                let at = crate::sliding::lattice_nodes_in(&u.grid, &sc.domain)
                    .into_iter()
                    .fold(None, |best: Option<usize>, f| match best {
                        Some(b) if u.values[b] >= u.values[f] => Some(b),
                        _ => Some(f),
                    })
                    .ok_or(Error::EmptyInterior)?;
                let xbar = u.grid.point(at);
                let mut worst = f64::INFINITY;
                let mut r = VerificationReport::new("average_inequality", Status::Pass, "");
                for &rad in radii {
                    let res = average_inequality_residual(p, &u, &xbar, rad, &q)?;
                    worst = worst.min(res);
                    r = r.quantity(&format!("residual_r={rad}"), res);
                }
                let tol = self.tol(*tolerance);
                r.status = Status::from_bool(worst >= -tol);
                r.summary = format!("smallest residual at the maximum {worst:.3e} (tolerance {tol:e})");
                r.quantity("min_residual", worst).quantity("tolerance", tol).witness("argmax", xbar, u.values[at])
            }
            CheckSpec::LargeTau { a, tau, probes, tolerance } => {
                let u = &self.solve()?.0;
                let delta = sc
                    .nonlinearity
                    .flat_delta
                    .ok_or_else(|| Error::Scenario("large_tau needs nonlinearity.flat_delta".into()))?;
                let a = a.unwrap_or_else(|| measure_a(u, delta));
                let tau = tau.unwrap_or(2.0 * a);
                let pts = box_probes(&u.grid, *probes);
                let opts = VerifyOptions { tol: self.tol(*tolerance), probes: *probes };
                verify_large_tau(u, &sc.nonlinearity, a, tau, &pts, &opts)?
            }
            CheckSpec::DirectionSweep { source, nu, tau_values, probes, tolerance } => {
                let u = self.function(source)?;
                let pts = box_probes(&u.grid, *probes);
                let opts = VerifyOptions { tol: self.tol(*tolerance), probes: *probes };
                direction_sweep(&u, nu, tau_values, &pts, &opts)?
            }
            CheckSpec::DensityCondition { density } => self.density(density, &sc.domain)?.1,
        };
        Ok(self.finish(r, echo))
    }
}

fn oracle_value(oracle: Oracle, phi: &ExteriorModel, s: f64, x: &[f64]) -> Result<f64> {
    match oracle {
        Oracle::Zero => Ok(0.0),
        Oracle::Fourier => match phi {
            ExteriorModel::ClosedForm { form: Analytic::Cosine { wave, phase, amplitude } } => {
                let k2: f64 = wave.iter().map(|k| k * k).sum();
                let arg: f64 = wave.iter().zip(x).map(|(k, y)| k * y).sum::<f64>() + phase;
                Ok(amplitude * k2.powf(s) * arg.cos())
            }
            _ => Err(Error::Scenario("the Fourier oracle needs a closed-form cosine exterior".into())),
        },
    }
}

/// Evaluate the operator on the sampled exterior model.
pub fn cmd_eval(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let ctx = Ctx::new(sc, opts)?;
    let spec = sc.eval.clone().unwrap_or(EvalSpec { points: None, oracle: None, tolerance: default_eval_tol() });
    let u = sc.sampled()?;
    let q = ctx.quadrature();
    let points = match &spec.points {
        Some(p) => p.clone(),
        None => {
            let reach = crate::operator::FracLaplacian::for_grid(&ctx.p, &u.grid, &q)?.inner_radius();
            (0..u.grid.len())
                .map(|f| u.grid.point(f))
                .filter(|x| sc.domain.contains(x) && u.grid.hull_margin(x) >= reach)
                .collect()
        }
    };
    let t = Instant::now();
    let values = frac_laplacian_field(&ctx.p, &u, &points, &q)?;
    println!("evaluated {} points ({:.2?})", points.len(), t.elapsed());
    let csv_path = opts.out.join("eval.csv");
    write_atomic(&csv_path, |w| {
        let mut cw = csv::Writer::from_writer(w);
        let mut head = vec!["index".to_string()];
        head.extend((0..ctx.p.n).map(|k| format!("x{k}")));
        head.push("value".into());
        cw.write_record(&head)?;
        for (i, (x, v)) in points.iter().zip(&values).enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(x.iter().map(|c| format!("{c:.17e}")));
            rec.push(format!("{v:.17e}"));
            cw.write_record(&rec)?;
        }
        cw.flush()?;
        Ok(())
    })?;
    let mut r = VerificationReport::new("eval", Status::Pass, format!("{} points evaluated", points.len()))
        .quantity("points", points.len() as f64)
        .quantity("max_abs_value", values.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
    if let Some(oracle) = spec.oracle {
        let tol = ctx.tol(spec.tolerance);
        let mut worst = (0.0, 0);
        for (i, (x, v)) in points.iter().zip(&values).enumerate() {
            let e = (v - oracle_value(oracle, &sc.exterior, ctx.p.s, x)?).abs();
            if e > worst.0 {
                worst = (e, i);
            }
        }
        r.status = Status::from_bool(worst.0 <= tol);
        r.summary = format!("max oracle error {:.3e} over {} points (tolerance {tol:e})", worst.0, points.len());
        r = r.quantity("max_oracle_error", worst.0).quantity("tolerance", tol);
        if !points.is_empty() {
            r = r.witness("worst_point", points[worst.1].clone(), worst.0);
        }
    }
    let r = ctx.finish(r, serde_json::to_value(&spec)?);
    let report_path = opts.out.join("eval_report.json");
    write_json(&report_path, &r)?;
    Ok(Outcome { command: "eval".into(), reports: vec![r], artifacts: vec![csv_path, report_path], allow_degenerate: sc.allow_degenerate })
}

/// Solve the scenario problem and write the solution and the solver log.
pub fn cmd_solve(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let ctx = Ctx::new(sc, opts)?;
    let log_path = opts.out.join("solver_log.json");
    let (u, log) = match ctx.solve() {
        Ok(s) => s,
        Err(e) => {
            let failure = serde_json::json!({
                "scenario": sc.name,
                "status": "FAIL",
                "error": e.to_string(),
                "residual_history": match &e { Error::NewtonStagnation { history, .. } => history.clone(), _ => vec![] },
                "config": sc,
            });
            write_json(&log_path, &failure)?;
            return Err(e);
        }
    };
    let csv_path = opts.out.join("solution.csv");
    write_atomic(&csv_path, |w| u.write_csv(w))?;
    write_json(&log_path, &serde_json::json!({ "scenario": sc.name, "status": "PASS", "log": log, "config": sc }))?;
    let r = VerificationReport::new(
        "solve",
        Status::from_bool(log.converged),
        format!("{} unknowns, {} Newton steps", log.unknowns, log.iterations),
    )
    .quantity("residual", log.residual_history.last().copied().unwrap_or(f64::NAN))
    .quantity("unknowns", log.unknowns as f64)
    .quantity("iterations", log.iterations as f64);
    let r = ctx.finish(r, serde_json::Value::Null);
    Ok(Outcome { command: "solve".into(), reports: vec![r], artifacts: vec![csv_path, log_path], allow_degenerate: sc.allow_degenerate })
}

/// τ scan of the solution (read from `solution.csv` in the output
/// directory when present, solved inline otherwise).
pub fn cmd_slide(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let ctx = Ctx::new(sc, opts)?;
    let spec = sc.slide.clone().unwrap_or_default();
    if spec.source == Source::Solution {
        let prior = opts.out.join("solution.csv");
        if prior.exists() {
            let grid = sc.grid()?;
            let values = GridFunction::read_csv_values(&prior, &grid)?;
            let u = GridFunction::new(grid, values, sc.exterior.clone())?;
            println!("using prior solution {}", prior.display());
            let _ = ctx.solution.set((u, empty_log(sc)));
        }
    }
    let scan = ctx.scan(&spec)?;
    let csv_path = opts.out.join("scan.csv");
    write_atomic(&csv_path, |w| scan.write_csv(w))?;
    let r = ctx.finish(scan.report(), serde_json::to_value(&spec)?);
    let cert_path = opts.out.join("slide_report.json");
    write_json(&cert_path, &serde_json::json!({ "report": r, "scan": scan }))?;
    Ok(Outcome { command: "slide".into(), reports: vec![r], artifacts: vec![csv_path, cert_path], allow_degenerate: sc.allow_degenerate })
}

fn empty_log(sc: &Scenario) -> SolverLog {
    SolverLog {
        unknowns: 0,
        iterations: 0,
        converged: true,
        residual_history: vec![],
        step_lengths: vec![],
        quadratic_constant: None,
        restarted: false,
        config: sc.solver.clone(),
        nonlinearity: sc.nonlinearity.clone(),
    }
}

/// Dyadic density profile of the scenario domain.
pub fn cmd_density(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let ctx = Ctx::new(sc, opts)?;
    let spec = sc.density.clone().unwrap_or_default();
    let t = Instant::now();
    let (profile, r) = ctx.density(&spec, &sc.domain)?;
    println!("sampled {} shells ({:.2?})", profile.len(), t.elapsed());
    let csv_path = opts.out.join("density_profile.csv");
    write_atomic(&csv_path, |w| write_profile_csv(&profile, w))?;
    let r = ctx.finish(r, serde_json::to_value(&spec)?);
    let report_path = opts.out.join("density_report.json");
    write_json(&report_path, &r)?;
    Ok(Outcome { command: "density".into(), reports: vec![r], artifacts: vec![csv_path, report_path], allow_degenerate: sc.allow_degenerate })
}

/// Run every check listed in the scenario.
pub fn cmd_verify(sc: &Scenario, opts: &RunOptions) -> Result<Outcome> {
    let ctx = Ctx::new(sc, opts)?;
    let mut reports = Vec::new();
    for c in &sc.checks {
        let t = Instant::now();
        let mut r = ctx.run_check(c)?;
        r.elapsed = Some(t.elapsed());
        println!("{:<20} {:<13} {} ({:.2?})", c.name(), r.status.label(), r.summary, t.elapsed());
        reports.push(r);
    }
    let path = opts.out.join("verify_reports.json");
    write_json(&path, &reports)?;
    Ok(Outcome { command: "verify".into(), reports, artifacts: vec![path], allow_degenerate: sc.allow_degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_scenario() -> Scenario {
        Scenario::from_json(
            r#"{
                "name": "constant",
                "params": {"n": 1, "s": 0.5},
                "domain": {"kind": "rectangle", "lo": [-1.0], "hi": [1.0]},
                "exterior": {"kind": "constant", "value": 2.0},
                "grid": {"lo": [-1.5], "hi": [1.5], "h": 0.05},
                "eval": {"oracle": "zero", "tolerance": 1e-10}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn bad_order_rejected() {
        let err = Scenario::from_json(
            r#"{"name": "x", "params": {"n": 1, "s": 1.2}, "domain": {"kind": "full_space"},
                "exterior": {"kind": "zero"}, "grid": {"lo": [-1], "hi": [1], "h": 0.1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("s"), "{err}");
    }

    #[test]
    fn unknown_field_rejected_with_position() {
        let err = Scenario::from_json(
            "{\"name\": \"x\",\n \"params\": {\"n\": 1, \"s\": 0.5, \"bogus\": 1}}",
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn eval_and_solve_constant() {
        let sc = constant_scenario();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { out: dir.path().to_path_buf(), ..Default::default() };
        let ev = cmd_eval(&sc, &opts).unwrap();
        assert!(ev.success(), "{}", ev.reports[0].summary);
        let sol = cmd_solve(&sc, &opts).unwrap();
        assert!(sol.success());
        let grid = sc.grid().unwrap();
        let vals = GridFunction::read_csv_values(dir.path().join("solution.csv"), &grid).unwrap();
        assert!(vals.iter().all(|v| (v - 2.0).abs() < 1e-10));
        let slide = cmd_slide(&sc, &opts).unwrap();
        assert_eq!(slide.reports[0].status, Status::Degenerate);
        assert_eq!(slide.exit_code(), 1);
        assert!(slide.status_line().starts_with("STATUS FAILED"));
    }

    #[test]
    fn empty_interior_errors() {
        let mut sc = constant_scenario();
        sc.domain = DomainSpec::interval(0.01, 0.02);
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { out: dir.path().to_path_buf(), ..Default::default() };
        assert!(matches!(cmd_solve(&sc, &opts), Err(Error::EmptyInterior)));
        assert!(!dir.path().join("solution.csv").exists());
    }
}
