//! Acceptance criteria. Runs as a plain binary so the PASS/FAIL lines are
//! always visible: `cargo test --release --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fraclab::domains::{check_density_condition, density_profile, DomainSpec};
use fraclab::field::{difference, shift_vertical, Analytic, ExteriorModel, Grid, GridFunction, Profile};
use fraclab::kernel::{c0_identity, exterior_kernel_mass, make_params, poisson_integral, BallQuadrature};
use fraclab::operator::{frac_laplacian_at, QuadratureSpec};
use fraclab::poisson::{average_inequality_residual, ball_probes, check_subharmonic_dominance, check_subharmonic_premise};
use fraclab::report::{Status, VerificationReport};
use fraclab::scenario::{cmd_verify, RunOptions, Scenario};
use fraclab::sliding::{
    aligned_taus, box_probes, c_tau_field, check_hypothesis_h, measure_a, overlap_domain, tau_scan, verify_large_tau,
    verify_narrow_region, Certificate, VerifyOptions,
};
use fraclab::solver::{solve_dirichlet, solve_layer_1d, warm_start, Nonlinearity, SolverConfig};
use fraclab::special::gamma;

type Check = fraclab::Result<(bool, String)>;

struct Run {
    results: Vec<(usize, bool)>,
}

impl Run {
    fn criterion(&mut self, id: usize, title: &str, limit: Duration, f: impl FnOnce() -> Check) {
        let t = Instant::now();
        let out = f();
        let elapsed = t.elapsed();
        let (ok, detail) = match out {
            Ok((ok, d)) => (ok, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= limit;
        let pass = ok && in_time;
        println!(
            "criterion {id:>2} {} {title}: {detail} [{:.1} s, limit {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
        self.results.push((id, pass));
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

/// Sum of Gaussians whose first term dominates, so the maximum sits near
/// the first center.
fn random_bumps(rng: &mut ChaCha8Rng, n: usize) -> Analytic {
    let terms = rng.gen_range(1..=3);
    let mut out = Vec::new();
    for k in 0..terms {
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let width = rng.gen_range(0.4..1.2);
        let amplitude = if k == 0 { rng.gen_range(1.0..2.0) } else { rng.gen_range(-0.4..0.4) };
        out.push(Analytic::Gaussian { center, width, amplitude });
    }
    Analytic::Sum { terms: out }
}

fn argmax(u: &GridFunction) -> Vec<f64> {
    let (_, at) = u.max_value();
    u.grid.point(at)
}

fn kernel_normalizations() -> Check {
    let mut worst_ext: f64 = 0.0;
    let mut worst_poisson: f64 = 0.0;
    let fractions = [0.0, 0.3, -0.55, 0.8, 0.95];
    for n in [1, 2] {
        for s in [0.25, 0.5, 0.75] {
            let p = make_params(n, s)?;
            for r in [0.5, 1.0, 4.0] {
                worst_ext = worst_ext.max((exterior_kernel_mass(&p, r) - 1.0).abs());
                for (k, f) in fractions.iter().enumerate() {
                    let x: Vec<f64> = if n == 1 {
                        vec![f * r]
                    } else {
                        let th = 0.7 + 1.9 * k as f64;
                        vec![f * r * f64::cos(th), f * r * f64::sin(th)]
                    };
                    let center = vec![0.0; n];
                    let v = poisson_integral(&p, r, &center, &x, &BallQuadrature::default(), |_| 1.0)?;
                    worst_poisson = worst_poisson.max((v - 1.0).abs());
                }
            }
        }
    }
    Ok((
        worst_ext <= 1e-6 && worst_poisson <= 1e-6,
        format!("max |mass - 1| = {worst_ext:.2e} (exterior kernel), {worst_poisson:.2e} (Poisson kernel)"),
    ))
}

fn c0_identity_check() -> Check {
    let mut worst: f64 = 0.0;
    for n in [1, 2] {
        for s in [0.25, 0.5, 0.75] {
            let p = make_params(n, s)?;
            let omega = if n == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
            worst = worst.max((p.c0 - 2.0 * s / omega).abs());
            for r in [0.5, 1.0, 4.0] {
                worst = worst.max((c0_identity(&p, r) - 1.0).abs());
            }
        }
    }
    Ok((worst <= 1e-8, format!("max deviation {worst:.2e}")))
}

fn operator_oracles() -> Check {
    let q = QuadratureSpec::default();
    let mut cos_ok = true;
    let mut lines = Vec::new();
    for s in [0.25, 0.5, 0.75] {
        let p = make_params(1, s)?;
        let mut errs = Vec::new();
        for h in [0.01, 0.005] {
            let grid = Grid::covering(&[-4.0], &[4.0], h)?;
            let u = GridFunction::from_exterior(
                grid,
                ExteriorModel::closed_form(Analytic::Cosine { wave: vec![1.0], phase: 0.0, amplitude: 1.0 }),
            )?;
            let mut e: f64 = 0.0;
            for x in [0.0, 0.7, -1.3, 2.1] {
                // the Fourier symbol of cos(x) is 1
                e = e.max((frac_laplacian_at(&p, &u, &[x], &q)? - f64::cos(x)).abs());
            }
            errs.push(e);
        }
        cos_ok &= errs[0] <= 1e-3 && errs[0] >= 2.0 * errs[1];
        lines.push(format!("s={s}: cos err {:.1e} -> {:.1e}", errs[0], errs[1]));
    }
    let mut spread_ok = true;
    for s in [0.25, 0.5, 0.75] {
        let p = make_params(1, s)?;
        let grid = Grid::covering(&[-2.0], &[2.0], 0.01)?;
        let u = GridFunction::from_exterior(
            grid,
            ExteriorModel::closed_form(Analytic::PowerBump { center: vec![0.0], radius: 1.0, exponent: s, amplitude: 1.0 }),
        )?;
        let vals: Vec<f64> =
            [-0.6, -0.3, 0.0, 0.3, 0.6].iter().map(|x| frac_laplacian_at(&p, &u, &[*x], &q)).collect::<Result<_, _>>()?;
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        let spread = (hi - lo) / hi.abs();
        // known value in one dimension: Γ(1 + 2s)
        let exact = gamma(1.0 + 2.0 * s);
        spread_ok &= spread <= 1e-3;
        lines.push(format!("s={s}: bump spread {spread:.1e}, mean/Γ(1+2s) - 1 = {:.1e}", hi / exact - 1.0));
    }
    Ok((cos_ok && spread_ok, lines.join("; ")))
}

fn maximum_point_sign() -> Check {
    let q = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut smallest = f64::INFINITY;
    let mut bad = 0;
    for k in 0..100 {
        let n = 1 + k % 2;
        let s = rng.gen_range(0.1..0.95);
        let p = make_params(n, s)?;
        let (half, h) = if n == 1 { (4.0, 0.01) } else { (3.0, 0.1) };
        let grid = Grid::covering(&vec![-half; n], &vec![half; n], h)?;
        let u = GridFunction::from_exterior(grid, ExteriorModel::closed_form(random_bumps(&mut rng, n)))?;
        let v = frac_laplacian_at(&p, &u, &argmax(&u), &q)?;
        smallest = smallest.min(v);
        if v.is_nan() || v <= 0.0 {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("{bad} of 100 nonpositive; smallest value {smallest:.3e}")))
}

fn average_inequality() -> Check {
    let q = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for k in 0..100 {
        let n = if k % 5 == 4 { 2 } else { 1 };
        let s = rng.gen_range(0.1..0.95);
        let p = make_params(n, s)?;
        let (half, h) = if n == 1 { (4.0, 0.01) } else { (3.5, 0.1) };
        let grid = Grid::covering(&vec![-half; n], &vec![half; n], h)?;
        let u = GridFunction::from_exterior(grid, ExteriorModel::closed_form(random_bumps(&mut rng, n)))?;
        let xbar = argmax(&u);
        for r in [0.5, 1.0, 2.0] {
            let res = average_inequality_residual(&p, &u, &xbar, r, &q)?;
            worst = worst.min(res);
            if res < -1e-3 {
                violations += 1;
            }
        }
    }
    Ok((violations == 0, format!("{violations} violations in 300 evaluations; smallest residual {worst:.3e}")))
}

/// `a (1 - min((|x - x0| / R0)^{2s-n}, M))`: the truncated fundamental
/// solution is s-superharmonic, so this is s-subharmonic everywhere and
/// positive exactly outside `B_{R0}(x0)`. The ball straddles that sphere.
fn subharmonic_input(rng: &mut ChaCha8Rng, n: usize) -> fraclab::Result<(fraclab::FracParams, GridFunction, Vec<f64>, f64)> {
    let s = if n == 1 { rng.gen_range(0.15..0.4) } else { rng.gen_range(0.2..0.8) };
    let p = make_params(n, s)?;
    let a = rng.gen_range(0.5..2.0);
    let m = rng.gen_range(1.5..3.0);
    let r0 = rng.gen_range(0.4..1.0);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let (half, h) = if n == 1 { (6.0, 0.01) } else { (4.0, 0.05) };
    let grid = Grid::covering(&vec![-half; n], &vec![half; n], h)?;
    let e = 2.0 * s - n as f64;
    let u = GridFunction::from_fn(grid, ExteriorModel::constant(a), |x| {
        let d = x.iter().zip(&x0).map(|(y, c)| (y - c).powi(2)).sum::<f64>().sqrt();
        a * (1.0 - (d / r0).powf(e).min(m))
    })?;
    let dir: Vec<f64> = if n == 1 {
        vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }]
    } else {
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        vec![th.cos(), th.sin()]
    };
    let offset = r0 * rng.gen_range(0.8..1.6);
    let center: Vec<f64> = x0.iter().zip(&dir).map(|(c, d)| c + offset * d).collect();
    let r = rng.gen_range(0.5..1.2);
    Ok((p, u, center, r))
}

fn poisson_dominance() -> Check {
    let q = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::INFINITY;
    let mut failed = 0;
    let mut premise_worst = f64::NEG_INFINITY;
    let mut nontrivial = 0;
    for k in 0..20 {
        let n = if k % 4 == 3 { 2 } else { 1 };
        let (p, u, center, r) = subharmonic_input(&mut rng, n)?;
        let probes = ball_probes(&center, r, 200, 0.95);
        let premise = check_subharmonic_premise(&p, &u, &probes, 0.0, &q)?;
        if premise.get("positive_probes").unwrap_or(0.0) > 0.0 {
            nontrivial += 1;
            premise_worst = premise_worst.max(premise.get("max_operator_value").unwrap_or(f64::NAN));
        }
        let rep = check_subharmonic_dominance(&p, &u, &center, r, &probes, 1e-3, Some(&premise))?;
        worst = worst.min(rep.get("worst_margin").unwrap_or(f64::NAN));
        if rep.status != Status::Pass {
            failed += 1;
        }
    }
    Ok((
        failed == 0 && nontrivial == 20,
        format!(
            "{failed} of 20 not PASS; {nontrivial} with u > 0 in the ball; worst margin {worst:.3e}; largest premise value {premise_worst:.3e}"
        ),
    ))
}

fn density() -> Check {
    let mut lines = Vec::new();
    let stripes = density_profile(&DomainSpec::Stripes, &[0.0, 0.5], 0, 8, 100_000, 7)?;
    let tail: Vec<f64> = stripes.iter().filter(|sh| (5..=8).contains(&sh.k)).map(|sh| sh.rho).collect();
    let stripes_ok = tail.len() == 4 && tail.iter().all(|r| (r - 0.5).abs() <= 0.05);
    lines.push(format!("stripes rho_5..8 = {tail:.4?}"));

    let full = check_density_condition(&density_profile(&DomainSpec::FullSpace, &[0.0, 0.0], 0, 8, 100_000, 7)?, 0.25);
    let full_ok = full.status == Status::Fail;
    lines.push(format!("full space {}", full.status));

    let mut bounded_ok = true;
    for d in [DomainSpec::ball(vec![0.0, 0.0], 1.0), DomainSpec::rectangle(vec![-1.0, -0.5], vec![0.5, 1.0])] {
        let prof = density_profile(&d, &[0.0, 0.0], 1, 8, 100_000, 7)?;
        let rep = check_density_condition(&prof, 0.25);
        bounded_ok &= rep.status == Status::Pass && prof.iter().all(|sh| sh.rho == 1.0);
    }
    lines.push(format!("bounded domains {}", if bounded_ok { "rho = 1" } else { "wrong" }));

    let spiral = check_density_condition(
        &density_profile(&DomainSpec::SpiralBand { a: 0.0, b: 1.0 / (2.0 * std::f64::consts::PI), half_width: 0.2 }, &[0.0, 0.0], 0, 8, 100_000, 7)?,
        0.25,
    );
    lines.push(format!("spiral {}", spiral.status));
    Ok((stripes_ok && full_ok && bounded_ok && spiral.status == Status::Pass, lines.join("; ")))
}

struct Pipeline {
    p: fraclab::FracParams,
    q: QuadratureSpec,
    f: Nonlinearity,
    omega: DomainSpec,
    u: GridFunction,
}

fn dirichlet_setup() -> fraclab::Result<(Pipeline, f64)> {
    let p = make_params(1, 0.5)?;
    let q = QuadratureSpec::default();
    let f = Nonlinearity::cubic();
    let omega = DomainSpec::interval(-8.0, 8.0);
    let phi = ExteriorModel::profile(Profile::Tanh { center: 0.0, width: 1.0, lo: -1.0, hi: 1.0 });
    let grid = Grid::covering(&[-8.2], &[8.2], 0.02)?;
    let sol = solve_dirichlet(&p, &omega, &phi, &f, &grid, &q, &SolverConfig::default())?;
    let res = sol.log.residual_history.last().copied().unwrap_or(f64::INFINITY);
    Ok((Pipeline { p, q, f, omega, u: sol.u }, res))
}

fn dirichlet_pipeline(pipe: &mut Option<Pipeline>) -> Check {
    let (pl, residual) = dirichlet_setup()?;
    let phi = pl.u.exterior.clone();
    let h = check_hypothesis_h(&pl.u, &pl.omega, &phi, 500)?;
    let taus = aligned_taus(&pl.u.grid, 16.0, 20);
    let scan = tau_scan(&pl.u, &pl.omega, &taus, 1e-8)?;
    let ok = residual <= 1e-10 && h.status == Status::Pass && scan.certificate == Certificate::Monotone && taus.len() == 20;
    let detail = format!(
        "residual {residual:.2e}; interior sandwich and exterior order {} (margin {:.2e}); scan {} over {} τ, smallest minimum {:.3e}",
        h.status,
        h.get("sandwich_margin").unwrap_or(f64::NAN),
        scan.certificate.label(),
        taus.len(),
        scan.per_tau.iter().filter_map(|t| t.min_w).fold(f64::INFINITY, f64::min)
    );
    *pipe = Some(pl);
    Ok((ok, detail))
}

fn layer() -> Check {
    let p = make_params(1, 0.5)?;
    let q = QuadratureSpec::default();
    let f = Nonlinearity::cubic();
    let h = 0.02;
    let g20 = fraclab::solver::layer_grid(20.0, h)?;
    let l20 = solve_layer_1d(&p, 20.0, &f, &g20, &q, &SolverConfig::default())?;
    let u = &l20.u;
    let len = u.values.len();
    let increasing = u.values[2..len - 2].windows(2).all(|w| w[1] > w[0]);
    let (lo, hi) = (u.evaluate(&[-19.0]), u.evaluate(&[19.0]));
    let tails_ok = lo.abs() >= 0.95 && hi.abs() >= 0.95;

    let g40 = fraclab::solver::layer_grid(40.0, h)?;
    let cfg = SolverConfig { initial_guess: warm_start(u, &g40), ..Default::default() };
    let l40 = solve_layer_1d(&p, 40.0, &f, &g40, &q, &cfg)?;
    let mut change: f64 = 0.0;
    for i in 0..g20.len() {
        let x = g20.point(i);
        if x[0] > -10.0 && x[0] < 10.0 {
            change = change.max((u.values[i] - l40.u.evaluate(&x)).abs());
        }
    }
    let delta = f.flat_delta.unwrap();
    let a = measure_a(u, delta);
    let probes = box_probes(&u.grid, 1000);
    let lt = verify_large_tau(u, &f, a, 2.0 * a, &probes, &VerifyOptions::default())?;
    let ok = increasing && tails_ok && change <= 1e-3 && lt.status == Status::Pass;
    Ok((
        ok,
        format!(
            "increasing {increasing}; u(-19) = {lo:.5}, u(19) = {hi:.5}; sup change on (-10,10) {change:.2e}; large-τ check {} at τ = 2a = {:.2}",
            lt.status,
            2.0 * a
        ),
    ))
}

fn narrow_region(pipe: &Option<Pipeline>) -> Check {
    let pl = match pipe {
        Some(p) => p,
        None => return Ok((false, "no solved scenario".into())),
    };
    let (lo, hi) = pl.omega.xn_range(1)?;
    let tau = aligned_taus(&pl.u.grid, hi - lo, 20)[0];
    let d = overlap_domain(&pl.omega, 1, tau);
    let ct = c_tau_field(&pl.u, tau, &pl.f, &d, 1e-10)?;
    let neg = GridFunction::new(ct.grid.clone(), ct.values.iter().map(|v| -v).collect(), ExteriorModel::Zero)?;
    let w = difference(&shift_vertical(&pl.u, tau), &pl.u)?;
    let rep = verify_narrow_region(&pl.p, &d, &neg, &w, &pl.q, 1.0, &VerifyOptions::default())?;
    let product = rep.get("premise_product");
    Ok((
        rep.status == Status::Pass && product.is_some(),
        format!(
            "τ = {tau:.2}, {} {}; premise product {:.3e}",
            rep.status,
            rep.certificate.clone().unwrap_or_default(),
            product.unwrap_or(f64::NAN)
        ),
    ))
}

fn run_bin(args: &[&str], out: &Path) -> fraclab::Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_fraclab")).args(args).arg("--out").arg(out).output()?;
    if status.status.code().is_none() {
        return Err(fraclab::Error::Scenario("fraclab terminated by a signal".into()));
    }
    Ok(())
}

fn same_bytes(a: &Path, b: &Path) -> fraclab::Result<bool> {
    let mut names: Vec<_> = std::fs::read_dir(a)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    names.sort();
    if names.is_empty() {
        return Ok(false);
    }
    for name in names {
        if std::fs::read(a.join(&name))? != std::fs::read(b.join(&name))? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir()?;
    let mut lines = Vec::new();
    let mut ok = true;
    let runs: [(&str, &str); 4] = [
        ("verify", "cubic_dirichlet.json"),
        ("density", "stripes_density.json"),
        ("eval", "cosine_eval.json"),
        ("verify", "bump_premise.json"),
    ];
    for (cmd, file) in runs {
        let path = scenario_path(file);
        let path = path.to_str().unwrap();
        let a = dir.path().join(format!("{file}-{cmd}-a"));
        let b = dir.path().join(format!("{file}-{cmd}-b"));
        for out in [&a, &b] {
            run_bin(&[cmd, "--scenario", path, "--threads", "1", "--seed", "11"], out)?;
        }
        let same = same_bytes(&a, &b)?;
        ok &= same;
        lines.push(format!("{cmd} {file}: {}", if same { "identical" } else { "differs" }));
    }
    // in-process reports against a fresh run
    let sc = Scenario::load(scenario_path("constant.json"))?;
    let report = |d: &Path| -> fraclab::Result<Vec<VerificationReport>> {
        Ok(cmd_verify(&sc, &RunOptions { out: d.to_path_buf(), seed: Some(3), tol_scale: 1.0 })?.reports)
    };
    let r1 = serde_json::to_string(&report(&dir.path().join("c1"))?)?;
    let r2 = serde_json::to_string(&report(&dir.path().join("c2"))?)?;
    ok &= r1 == r2;
    lines.push(format!("in-process verify: {}", if r1 == r2 { "identical" } else { "differs" }));
    Ok((ok, lines.join("; ")))
}

fn main() {
    // `cargo test` passes harness flags; a filter that excludes us is a no-op.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().ok();
    let mut run = Run { results: Vec::new() };
    run.criterion(1, "kernel normalizations", secs(10), kernel_normalizations);
    run.criterion(2, "C0 identity", secs(1), c0_identity_check);
    run.criterion(3, "operator oracles", secs(60), operator_oracles);
    run.criterion(4, "maximum-point sign", secs(60), maximum_point_sign);
    run.criterion(5, "average inequality", secs(120), average_inequality);
    run.criterion(6, "Poisson dominance", secs(120), poisson_dominance);
    run.criterion(7, "density condition", secs(120), density);
    let mut pipe = None;
    run.criterion(8, "monotone Dirichlet pipeline", secs(300), || dirichlet_pipeline(&mut pipe));
    run.criterion(9, "truncated layer", secs(300), layer);
    run.criterion(10, "narrow-region verifier", secs(60), || narrow_region(&pipe));
    run.criterion(11, "determinism", secs(300), determinism);
    let failed: Vec<usize> = run.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    let passed = run.results.len() - failed.len();
    println!("acceptance: {passed} of {} criteria PASS", run.results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
