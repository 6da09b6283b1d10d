//! The sliding engine: vertical-ordering checks on exterior data, scans of
//! `w^τ = u^τ - u`, and verifiers for the narrow-region principle, the
//! maximum principle in unbounded domains and the large-τ comparison.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::DomainSpec;
use crate::error::{Error, Result};
use crate::field::{tau_aligned, ExteriorModel, Grid, GridFunction};
use crate::kernel::FracParams;
use crate::operator::{FracLaplacian, QuadratureSpec};
use crate::poisson::{contraction_mass, replacement_value, ContractionOptions};
use crate::report::{Status, VerificationReport};
use crate::solver::{Nonlinearity, Reaction};

/// Strict inequalities are certified against this multiple of the tolerance.
pub const STRICT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Conclusion tolerance.
    pub tol: f64,
    /// Premise spot-check budget.
    pub probes: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { tol: 1e-8, probes: 200 }
    }
}

impl VerifyOptions {
    pub fn strict_tol(&self) -> f64 {
        STRICT_FACTOR * self.tol
    }
}

/// Flat indices of lattice nodes of `grid` lying in `d`.
pub fn lattice_nodes_in(grid: &Grid, d: &DomainSpec) -> Vec<usize> {
    (0..grid.len()).filter(|&f| d.contains(&grid.point(f))).collect()
}

/// At most `count` of `nodes`, evenly strided.
fn stride_pick(nodes: &[usize], count: usize) -> Vec<usize> {
    if nodes.len() <= count {
        return nodes.to_vec();
    }
    (0..count).map(|k| nodes[k * nodes.len() / count]).collect()
}

fn with_last(x: &[f64], dt: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    *y.last_mut().unwrap() += dt;
    y
}

/// `count` low-discrepancy points in the grid hull (additive recurrence
/// with the generalized golden ratio of the dimension).
pub fn box_probes(grid: &Grid, count: usize) -> Vec<Vec<f64>> {
    let n = grid.dim();
    let mut phi = 2.0f64;
    for _ in 0..32 {
        phi = (1.0 + phi).powf(1.0 / (n as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=n).map(|k| phi.powi(-(k as i32)).fract()).collect();
    let lo = grid.lower().to_vec();
    let hi = grid.upper();
    (1..=count)
        .map(|i| {
            (0..n)
                .map(|k| lo[k] + (0.5 + i as f64 * alpha[k]).fract() * (hi[k] - lo[k]))
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// vertical ordering hypothesis

/// Check the vertical ordering of exterior data around the solution.
///
/// On every vertical lattice line through `omega`: for interior `x` and
/// exterior `y` below, `z` above, `φ(y) < u(x) < φ(z)` (interior sandwich);
/// for exterior `y < x < z`, `φ(y) <= φ(x) <= φ(z)` (exterior order).
pub fn check_hypothesis_h(u: &GridFunction, omega: &DomainSpec, phi: &ExteriorModel, segment_samples: usize) -> Result<VerificationReport> {
    let g = &u.grid;
    let n = g.dim();
    if !omega.is_bounded(n) {
        return Err(Error::Unbounded("hypothesis check needs a bounded domain".into()));
    }
    let (lo, hi) = omega.xn_range(n)?;
    let span = (hi - lo).max(g.h[n - 1]);
    let mut ts: Vec<f64> = (0..segment_samples.max(2))
        .map(|k| lo - span + 3.0 * span * k as f64 / (segment_samples.max(2) - 1) as f64)
        .collect();
    ts.extend([lo - 100.0 * span, lo - 10.0 * span, hi + 10.0 * span, hi + 100.0 * span]);
    // lines: one per lattice column of the horizontal coordinates
    let cols = g.len() / g.shape[n - 1];
    let ny = g.shape[n - 1];
    struct Line {
        margin: f64,
        witness: Vec<f64>,
        triples: f64,
        order_violations: usize,
        worst_order: f64,
        interior: usize,
    }
    let lines: Vec<Line> = (0..cols)
        .into_par_iter()
        .filter_map(|c| {
            let base = g.point(c * ny);
            let nodes: Vec<(f64, Vec<f64>)> = (0..ny).map(|j| (base[n - 1] + j as f64 * g.h[n - 1], g.point(c * ny + j))).collect();
            let interior: Vec<(f64, f64, Vec<f64>)> = nodes
                .iter()
                .enumerate()
                .filter(|(_, (_, x))| omega.contains(x))
                .map(|(j, (t, x))| (*t, u.values[c * ny + j], x.clone()))
                .collect();
            if interior.is_empty() {
                return None;
            }
            let mut ext: Vec<(f64, f64)> = nodes
                .iter()
                .map(|(t, _)| *t)
                .chain(ts.iter().copied())
                .filter_map(|t| {
                    let mut x = base.clone();
                    x[n - 1] = t;
                    (!omega.contains(&x)).then(|| (t, phi.eval(&x)))
                })
                .collect();
            ext.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut order_violations = 0;
            let mut worst_order: f64 = 0.0;
            for w in ext.windows(2) {
                let d = w[1].1 - w[0].1;
                if d < 0.0 {
                    order_violations += 1;
                    worst_order = worst_order.min(d);
                }
            }
            let mut prefix_max = vec![f64::NEG_INFINITY; ext.len() + 1];
            for (k, e) in ext.iter().enumerate() {
                prefix_max[k + 1] = prefix_max[k].max(e.1);
            }
            let mut suffix_min = vec![f64::INFINITY; ext.len() + 1];
            for k in (0..ext.len()).rev() {
                suffix_min[k] = suffix_min[k + 1].min(ext[k].1);
            }
            let (mut margin, mut witness, mut triples) = (f64::INFINITY, Vec::new(), 0.0);
            for (t, val, x) in &interior {
                let below = ext.partition_point(|e| e.0 < *t);
                let above = ext.partition_point(|e| e.0 <= *t);
                triples += below as f64 * (ext.len() - above) as f64;
                let m = (val - prefix_max[below]).min(suffix_min[above] - val);
                if m < margin {
                    margin = m;
                    witness = x.clone();
                }
            }
            Some(Line { margin, witness, triples, order_violations, worst_order, interior: interior.len() })
        })
        .collect();
    if lines.is_empty() {
        return Ok(VerificationReport::new("hypothesis_H", Status::Degenerate, "no lattice nodes inside the domain"));
    }
    let worst = lines.iter().min_by(|a, b| a.margin.total_cmp(&b.margin)).unwrap();
    let triples: f64 = lines.iter().map(|l| l.triples).sum();
    let violations: usize = lines.iter().map(|l| l.order_violations).sum();
    let worst_order = lines.iter().map(|l| l.worst_order).fold(0.0, f64::min);
    let sandwich = worst.margin > 0.0;
    let order = violations == 0;
    let mut r = VerificationReport::new(
        "hypothesis_H",
        Status::from_bool(sandwich && order),
        format!(
            "interior sandwich {} (margin {:.3e}, {triples:.0} triples); exterior order {} ({violations} violations)",
            if sandwich { "holds" } else { "fails" },
            worst.margin,
            if order { "holds" } else { "fails" },
        ),
    )
    .quantity("sandwich_margin", worst.margin)
    .quantity("sandwich_pass", sandwich as u8 as f64)
    .quantity("sandwich_triples", triples)
    .quantity("order_violations", violations as f64)
    .quantity("order_worst_drop", worst_order)
    .quantity("order_pass", order as u8 as f64)
    .quantity("lines", lines.len() as f64)
    .quantity("interior_nodes", lines.iter().map(|l| l.interior).sum::<usize>() as f64)
    .witness("tightest_interior_node", worst.witness.clone(), worst.margin);
    r.config = serde_json::json!({ "segment_samples": segment_samples });
    Ok(r)
}

// ---------------------------------------------------------------------------
// τ scans

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRecord {
    pub tau: f64,
    /// Lattice nodes in `D^τ`.
    pub overlap: usize,
    pub min_w: Option<f64>,
    pub witness: Option<Vec<f64>>,
    /// False when τ is not a multiple of the vertical spacing and `u^τ` is
    /// interpolated.
    #[serde(default = "yes")]
    pub aligned: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    #[serde(rename = "MONOTONE")]
    Monotone,
    #[serde(rename = "NON-STRICT")]
    NonStrict,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Certificate {
    pub fn label(self) -> &'static str {
        match self {
            Certificate::Monotone => "MONOTONE",
            Certificate::NonStrict => "NON-STRICT",
            Certificate::Fail => "FAIL",
        }
    }

    pub fn status(self) -> Status {
        match self {
            Certificate::Monotone => Status::Pass,
            Certificate::NonStrict => Status::Degenerate,
            Certificate::Fail => Status::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingScan {
    pub tau_values: Vec<f64>,
    pub per_tau: Vec<TauRecord>,
    /// Vertical extent of the domain: `D^τ` is empty from here on.
    pub tau_tilde: f64,
    /// Smallest scanned τ down to which every scanned minimum stays above `-tolerance`.
    pub tau_zero_estimate: Option<f64>,
    pub tolerance: f64,
    pub strict_tol: f64,
    pub certificate: Certificate,
    /// Requested τ values with empty overlap.
    pub skipped: Vec<f64>,
}

impl SlidingScan {
    pub fn report(&self) -> VerificationReport {
        let scanned: Vec<&TauRecord> = self.per_tau.iter().filter(|r| r.overlap > 0).collect();
        let worst = scanned.iter().min_by(|a, b| a.min_w.unwrap().total_cmp(&b.min_w.unwrap()));
        let mut r = VerificationReport::new(
            "tau_scan",
            self.certificate.status(),
            format!(
                "{} over {} τ values; smallest minimum {:.3e}",
                self.certificate.label(),
                scanned.len(),
                worst.map_or(f64::NAN, |w| w.min_w.unwrap())
            ),
        )
        .certify(self.certificate.label())
        .quantity("tau_tilde", self.tau_tilde)
        .quantity("tolerance", self.tolerance)
        .quantity("strict_tol", self.strict_tol)
        .quantity("scanned", scanned.len() as f64)
        .quantity("skipped", self.skipped.len() as f64);
        if let Some(t0) = self.tau_zero_estimate {
            r = r.quantity("tau_zero_estimate", t0);
        }
        if let Some(w) = worst {
            r = r.quantity("min_w", w.min_w.unwrap()).witness(
                &format!("tau={}", w.tau),
                w.witness.clone().unwrap_or_default(),
                w.min_w.unwrap(),
            );
        }
        for t in &self.skipped {
            r = r.note(format!("τ = {t} skipped: empty overlap"));
        }
        let unaligned: Vec<f64> = self.per_tau.iter().filter(|t| !t.aligned).map(|t| t.tau).collect();
        if !unaligned.is_empty() {
            r = r.quantity("unaligned", unaligned.len() as f64);
            for t in unaligned {
                r = r.note(format!("τ = {t} is not a multiple of the vertical spacing; u^τ interpolated"));
            }
        }
        r.config = serde_json::json!({ "tau_values": self.tau_values });
        r
    }

    /// Columns `tau, overlap, min_w, x1..xn`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.per_tau.iter().find_map(|r| r.witness.as_ref().map(|x| x.len())).unwrap_or(0);
        let mut head = vec!["tau".to_string(), "overlap".into(), "min_w".into()];
        head.extend((1..=n).map(|k| format!("x{k}")));
        w.write_record(&head)?;
        for r in &self.per_tau {
            let mut row = vec![format!("{:e}", r.tau), r.overlap.to_string(), r.min_w.map_or(String::new(), |v| format!("{v:e}"))];
            match &r.witness {
                Some(x) => row.extend(x.iter().map(|v| format!("{v:e}"))),
                None => row.extend((0..n).map(|_| String::new())),
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `τ_k = k h_n` multiples spread over `(0, τ̃)`, descending.
pub fn aligned_taus(grid: &Grid, tau_tilde: f64, count: usize) -> Vec<f64> {
    let h = grid.h[grid.dim() - 1];
    // two spacings short of τ̃ so the overlap keeps a lattice node
    let kmax = (((tau_tilde / h) - 1e-9).ceil() as usize).saturating_sub(2).max(1);
    let mut ks: Vec<usize> = (1..=count).map(|j| (j * kmax).div_ceil(count).max(1)).collect();
    ks.dedup();
    ks.iter().rev().map(|&k| k as f64 * h).collect()
}

/// Minimum of `w^τ = u^τ - u` over the lattice nodes of `D^τ` for every τ.
pub fn tau_scan(u: &GridFunction, omega: &DomainSpec, tau_values: &[f64], tolerance: f64) -> Result<SlidingScan> {
    let g = &u.grid;
    let n = g.dim();
    if !omega.is_bounded(n) {
        return Err(Error::Unbounded("τ scans need a bounded domain".into()));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidParameter("tolerance must be nonnegative".into()));
    }
    if tau_values.windows(2).any(|w| !(w[1] < w[0])) || tau_values.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("τ values must be positive and strictly decreasing".into()));
    }
    let (lo, hi) = omega.xn_range(n)?;
    let tau_tilde = hi - lo;
    let inside = lattice_nodes_in(g, omega);
    let ny = g.shape[n - 1];
    let per_tau: Vec<TauRecord> = tau_values
        .par_iter()
        .map(|&tau| {
            let aligned = tau_aligned(g, tau);
            let k = (tau / g.h[n - 1]).round() as usize;
            let mut best: Option<(f64, usize)> = None;
            let mut count = 0;
            for &f in &inside {
                let w = if aligned {
                    let j = f % ny;
                    if j + k >= ny || !omega.contains(&g.point(f + k)) {
                        continue;
                    }
                    u.values[f + k] - u.values[f]
                } else {
                    let up = with_last(&g.point(f), tau);
                    if !omega.contains(&up) {
                        continue;
                    }
                    u.evaluate(&up) - u.values[f]
                };
                count += 1;
                if best.is_none_or(|(b, _)| w < b) {
                    best = Some((w, f));
                }
            }
            TauRecord { tau, overlap: count, min_w: best.map(|b| b.0), witness: best.map(|b| g.point(b.1)), aligned }
        })
        .collect();
    let strict_tol = STRICT_FACTOR * tolerance;
    let scanned: Vec<&TauRecord> = per_tau.iter().filter(|r| r.overlap > 0).collect();
    let skipped = per_tau.iter().filter(|r| r.overlap == 0).map(|r| r.tau).collect();
    let certificate = if scanned.is_empty() {
        Certificate::NonStrict
    } else if scanned.iter().any(|r| r.min_w.unwrap() < -tolerance) {
        Certificate::Fail
    } else if scanned.iter().all(|r| r.min_w.unwrap() > strict_tol) {
        Certificate::Monotone
    } else {
        Certificate::NonStrict
    };
    let mut tau_zero_estimate = None;
    for r in &scanned {
        if r.min_w.unwrap() >= -tolerance {
            tau_zero_estimate = Some(r.tau);
        } else {
            break;
        }
    }
    Ok(SlidingScan {
        tau_values: tau_values.to_vec(),
        per_tau,
        tau_tilde,
        tau_zero_estimate,
        tolerance,
        strict_tol,
        certificate,
        skipped,
    })
}

/// `D^τ = Ω ∩ (Ω - τ e_n)`.
pub fn overlap_domain(omega: &DomainSpec, n: usize, tau: f64) -> DomainSpec {
    DomainSpec::Intersection { parts: vec![omega.clone(), omega.clone().slide_down(n, tau)] }
}

/// `c^τ = (f(u^τ) - f(u)) / (u^τ - u)` on the lattice nodes in `region`,
/// with `f'(u)` where the two values are within `cutoff`. Zero elsewhere.
pub fn c_tau_field(u: &GridFunction, tau: f64, f: &Nonlinearity, region: &DomainSpec, cutoff: f64) -> Result<GridFunction> {
    if f.lipschitz_const.is_none() {
        return Err(Error::MissingLipschitz);
    }
    let g = &u.grid;
    let values = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            if !region.contains(&x) {
                return 0.0;
            }
            if let Reaction::Linear { slope, .. } = f.variant {
                return slope;
            }
            let a = u.values[i];
            let b = u.evaluate(&with_last(&x, tau));
            if (b - a).abs() > cutoff {
                (f.eval(b) - f.eval(a)) / (b - a)
            } else {
                f.derivative(a)
            }
        })
        .collect();
    GridFunction::new(g.clone(), values, ExteriorModel::Zero)
}

// ---------------------------------------------------------------------------
// verifiers

/// Points beyond the hull of `grid` at which exterior models are sampled.
fn exterior_ring(grid: &Grid) -> Vec<Vec<f64>> {
    let n = grid.dim();
    let lo = grid.lower().to_vec();
    let hi = grid.upper();
    let mut out = Vec::new();
    for scale in [0.5, 2.0, 10.0, 100.0] {
        for k in 0..n {
            for side in [-1.0, 1.0] {
                let width = hi[k] - lo[k];
                let mut x: Vec<f64> = (0..n).map(|j| 0.5 * (lo[j] + hi[j])).collect();
                x[k] = if side < 0.0 { lo[k] - scale * width } else { hi[k] + scale * width };
                out.push(x);
            }
        }
    }
    out
}

/// Narrow-region principle: premises, conclusion `w >= 0` on `D`, and the
/// dichotomy `w > 0` or `w ≡ 0`.
pub fn verify_narrow_region(
    p: &FracParams,
    d: &DomainSpec,
    c: &GridFunction,
    w: &GridFunction,
    q: &QuadratureSpec,
    threshold_c: f64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let n = p.n;
    if !d.is_bounded(n) {
        return Err(Error::Unbounded("narrow-region verification needs a bounded region".into()));
    }
    let g = &w.grid;
    let nodes = lattice_nodes_in(g, d);
    if nodes.is_empty() {
        return Ok(VerificationReport::new("narrow_region", Status::Degenerate, "region has no lattice nodes"));
    }
    let tol = opts.tol;
    // coefficient bound and width product
    let c_min = nodes.iter().map(|&f| c.evaluate(&g.point(f))).fold(f64::INFINITY, f64::min);
    let c_minus = (-c_min).max(0.0);
    let product = crate::domains::narrow_premise_product(d, n, p.s, c_minus)?;
    let narrow_ok = product <= threshold_c;
    // sign outside the region
    let outside_min = (0..g.len())
        .filter(|f| !d.contains(&g.point(*f)))
        .map(|f| w.values[f])
        .chain(exterior_ring(g).iter().filter(|x| !d.contains(x)).map(|x| w.evaluate(x)))
        .fold(f64::INFINITY, f64::min);
    let outside_ok = outside_min >= -tol;
    // differential inequality at lattice probes
    let op = FracLaplacian::for_grid(p, g, q)?;
    let reach = op.inner_radius();
    let usable: Vec<usize> = nodes.iter().copied().filter(|&f| g.hull_margin(&g.point(f)) >= reach).collect();
    let probes = stride_pick(&usable, opts.probes);
    let vals: Result<Vec<(f64, usize)>> = probes
        .par_iter()
        .map(|&f| {
            let x = g.point(f);
            Ok((op.eval(w, &x)? + c.evaluate(&x) * w.values[f], f))
        })
        .collect();
    let vals = vals?;
    let (ineq_min, ineq_at) = vals.iter().fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { *b } else { a });
    let ineq_ok = !vals.is_empty() && ineq_min >= -q.tol;

    let mut r = VerificationReport::new("narrow_region", Status::Pass, "")
        .premise("narrow_width", narrow_ok, format!("d_n(D) · (c^-)^(1/2s) = {product:.4e} against threshold {threshold_c}"))
        .premise("sign_outside", outside_ok, format!("min of w outside D: {outside_min:.3e}"))
        .premise(
            "differential_inequality",
            ineq_ok,
            format!("min of (-Δ)^s w + c w over {} probes: {ineq_min:.3e}", vals.len()),
        )
        .quantity("premise_product", product)
        .quantity("threshold_C", threshold_c)
        .quantity("c_lower_bound", c_min)
        .quantity("outside_min", outside_min)
        .quantity("inequality_min", if vals.is_empty() { f64::NAN } else { ineq_min })
        .quantity("probes", vals.len() as f64)
        .quantity("tolerance", tol)
        .quantity("strict_tol", opts.strict_tol());
    if ineq_at != usize::MAX {
        r = r.witness("inequality_probe", g.point(ineq_at), ineq_min);
    }
    if usable.len() < nodes.len() {
        r = r.note(format!("{} region nodes too close to the hull for operator probes", nodes.len() - usable.len()));
    }
    if !r.premises_hold() {
        r.status = Status::PremiseFail;
        r.summary = "premise check failed; conclusion not evaluated".into();
        return Ok(r);
    }
    let (w_min, w_at) = nodes.iter().map(|&f| (w.values[f], f)).fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    r = r.quantity("min_w", w_min).witness("min_w", g.point(w_at), w_min);
    if w_min < -tol {
        r.status = Status::Fail;
        r.summary = format!("w reaches {w_min:.3e} in D");
        return Ok(r);
    }
    if w_min > opts.strict_tol() {
        r.summary = format!("w > 0 in D (min {w_min:.3e})");
        return Ok(r.certify("STRICTLY-POSITIVE"));
    }
    // interior zero: w must vanish identically
    let global = (0..g.len())
        .map(|f| w.values[f].abs())
        .chain(exterior_ring(g).iter().map(|x| w.evaluate(x).abs()))
        .fold(0.0, f64::max);
    r = r.quantity("max_abs_w", global);
    if global <= tol {
        r.summary = "w vanishes identically".into();
        Ok(r.certify("IDENTICALLY-ZERO"))
    } else {
        r.status = Status::Fail;
        r.summary = format!("w has an interior zero (min {w_min:.3e}) but is not identically zero (max |w| {global:.3e})");
        Ok(r)
    }
}

/// Maximum principle in an unbounded domain, gated on its premises.
#[allow(clippy::too_many_arguments)]
pub fn verify_max_principle_unbounded(
    p: &FracParams,
    d: &DomainSpec,
    c: &GridFunction,
    u: &GridFunction,
    q: &QuadratureSpec,
    probes: &[Vec<f64>],
    density: Option<&VerificationReport>,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let g = &u.grid;
    let tol = opts.tol;
    let op = FracLaplacian::for_grid(p, g, q)?;
    let reach = op.inner_radius();
    let (inside, outside): (Vec<&Vec<f64>>, Vec<&Vec<f64>>) = probes.iter().partition(|x| d.contains(x));
    let c_min = inside.iter().map(|x| c.evaluate(x)).fold(f64::INFINITY, f64::min);
    let outside_max = (0..g.len())
        .filter(|f| !d.contains(&g.point(*f)))
        .map(|f| u.values[f])
        .chain(outside.iter().map(|x| u.evaluate(x)))
        .chain(exterior_ring(g).iter().filter(|x| !d.contains(x)).map(|x| u.evaluate(x)))
        .fold(f64::NEG_INFINITY, f64::max);
    let positive: Vec<&Vec<f64>> = inside.iter().copied().filter(|x| u.evaluate(x) > 0.0).collect();
    let too_close = positive.iter().filter(|x| g.hull_margin(x) < reach).count();
    let vals: Result<Vec<(f64, usize)>> = positive
        .par_iter()
        .enumerate()
        .filter(|(_, x)| g.hull_margin(x) >= reach)
        .map(|(i, x)| Ok((op.eval(u, x)? + c.evaluate(x) * u.evaluate(x), i)))
        .collect();
    let vals = vals?;
    let (ineq_max, ineq_at) = vals.iter().fold((f64::NEG_INFINITY, usize::MAX), |a, b| if b.0 > a.0 { *b } else { a });
    let density_ok = density.is_some_and(|r| r.passed());
    let mut r = VerificationReport::new("max_principle", Status::Pass, "")
        .premise(
            "density_condition",
            density_ok,
            density.map_or("no density report attached".to_string(), |d| d.summary.clone()),
        )
        .premise("coefficient_nonnegative", c_min >= -tol, format!("min of c on probes: {c_min:.3e}"))
        .premise("nonpositive_outside", outside_max <= tol, format!("max of u outside D: {outside_max:.3e}"))
        .premise(
            "differential_inequality",
            vals.is_empty() || ineq_max <= q.tol,
            format!("max of (-Δ)^s u + c u over {} positive probes: {ineq_max:.3e}", vals.len()),
        )
        .quantity("outside_max", outside_max)
        .quantity("positive_probes", vals.len() as f64)
        .quantity("tolerance", tol);
    if !vals.is_empty() {
        r = r.quantity("inequality_max", ineq_max).witness("inequality_probe", positive[ineq_at].clone(), ineq_max);
    }
    if too_close > 0 {
        r = r.note(format!("{too_close} positive probes too close to the hull for the operator"));
    }
    if !r.premises_hold() {
        r.status = Status::PremiseFail;
        r.summary = "premise check failed; conclusion not evaluated".into();
        return Ok(r);
    }
    let nodes = lattice_nodes_in(g, d);
    let mut sup = f64::NEG_INFINITY;
    let mut at = Vec::new();
    for x in inside.iter().map(|x| (*x).clone()).chain(nodes.iter().map(|&f| g.point(f))) {
        let v = u.evaluate(&x);
        if v > sup {
            sup = v;
            at = x;
        }
    }
    r = r.quantity("A", sup.max(0.0)).quantity("max_u", sup);
    if sup <= tol {
        r.summary = format!("u <= 0 in D (max {sup:.3e})");
        return Ok(r);
    }
    r.status = Status::Fail;
    r.summary = format!("u reaches {sup:.3e} in D");
    r = r.witness("max_u", at.clone(), sup);
    // chain diagnostics at the witness
    let radius = 1.0;
    let hull_ok = (0..at.len()).all(|k| at[k] - radius >= g.lower()[k] && at[k] + radius <= g.upper()[k]);
    if hull_ok {
        let up = u.positive_part();
        let hat = replacement_value(p, &up, &at, radius, &at)?;
        r = r.quantity("replacement_at_witness", hat);
    }
    let mass = contraction_mass(p, d, &at, radius, 0, 12, &ContractionOptions { samples_per_shell: 20_000, ..Default::default() })?;
    Ok(r.quantity("contraction_mass", mass.m).quantity("contraction_mass_ci", mass.ci))
}

/// Smallest lattice `a` with `u >= 1 - δ` above `a` and `u <= -1 + δ` below `-a`.
pub fn measure_a(u: &GridFunction, delta: f64) -> f64 {
    let g = &u.grid;
    let n = g.dim();
    let h = g.h[n - 1];
    let mut a: f64 = 0.0;
    // one spacing past the last offending node, so interpolated values qualify too
    for f in 0..g.len() {
        let t = g.point(f)[n - 1];
        let v = u.values[f];
        if v < 1.0 - delta {
            a = a.max(t + h);
        }
        if v > -1.0 + delta {
            a = a.max(-t + h);
        }
    }
    a
}

/// `U^τ = u - u^τ <= 0` for `τ >= 2a`.
pub fn verify_large_tau(
    u: &GridFunction,
    f: &Nonlinearity,
    a: f64,
    tau: f64,
    probes: &[Vec<f64>],
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let delta = f.flat_delta.ok_or_else(|| Error::InvalidParameter("large-τ check needs flat_delta".into()))?;
    let g = &u.grid;
    let n = g.dim();
    let pts: Vec<Vec<f64>> = probes.iter().cloned().chain((0..g.len()).map(|i| g.point(i))).collect();
    let slab_violation = pts
        .iter()
        .map(|x| {
            let t = x[n - 1];
            let v = u.evaluate(x);
            if t >= a {
                (1.0 - delta) - v
            } else if t <= -a {
                v - (-1.0 + delta)
            } else {
                f64::NEG_INFINITY
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let bound_m = probes.iter().map(|x| x[n - 1].abs()).fold(0.0, f64::max);
    let mut r = VerificationReport::new("large_tau", Status::Pass, "")
        .premise("flat_limits", slab_violation <= 0.0, format!("largest slab violation {slab_violation:.3e} with δ = {delta}"))
        .premise("tau_range", tau == 0.0 || tau >= 2.0 * a, format!("τ = {tau}, 2a = {}", 2.0 * a))
        .quantity("a", a)
        .quantity("M", bound_m)
        .quantity("tau", tau)
        .quantity("delta", delta)
        .quantity("tolerance", opts.tol);
    if !r.premises_hold() {
        r.status = Status::PremiseFail;
        r.summary = "premise check failed; conclusion not evaluated".into();
        return Ok(r);
    }
    let (worst, at) = probes
        .par_iter()
        .map(|x| (u.evaluate(x) - u.evaluate(&with_last(x, tau)), x))
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
        .map(|(v, x)| (v, x.clone()))
        .unwrap_or((f64::NEG_INFINITY, vec![]));
    r = r.quantity("max_U", worst).quantity("probes", probes.len() as f64);
    if !at.is_empty() {
        r = r.witness("max_U", at, worst);
    }
    r.status = Status::from_bool(worst <= opts.tol);
    r.summary = format!("max of u - u^τ over {} probes: {worst:.3e}", probes.len());
    Ok(r)
}

/// `u(x + τν) >= u(x) - tol` for each τ; for horizontal ν also reports
/// whether the increments vanish.
pub fn direction_sweep(u: &GridFunction, nu: &[f64], tau_values: &[f64], probes: &[Vec<f64>], opts: &VerifyOptions) -> Result<VerificationReport> {
    let n = u.dim();
    if nu.len() != n {
        return Err(Error::InvalidParameter(format!("direction has {} components, expected {n}", nu.len())));
    }
    let len = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(len > 0.0) {
        return Err(Error::InvalidParameter("direction must be nonzero".into()));
    }
    if (len - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("direction must be a unit vector (length {len})")));
    }
    if nu[n - 1] < 0.0 {
        return Err(Error::InvalidParameter("direction must have a nonnegative last component".into()));
    }
    let incs: Vec<(f64, f64, usize)> = tau_values
        .par_iter()
        .flat_map_iter(|&tau| {
            probes.iter().enumerate().map(move |(i, x)| {
                let y: Vec<f64> = x.iter().zip(nu).map(|(a, b)| a + tau * b).collect();
                (u.evaluate(&y) - u.evaluate(x), tau, i)
            })
        })
        .collect();
    let (min_inc, tau_at, at) = incs.iter().fold((f64::INFINITY, 0.0, 0), |a, b| if b.0 < a.0 { *b } else { a });
    let max_abs = incs.iter().map(|v| v.0.abs()).fold(0.0, f64::max);
    let horizontal = nu[n - 1].abs() < 1e-12;
    let mut r = VerificationReport::new(
        "direction_sweep",
        Status::from_bool(incs.is_empty() || min_inc >= -opts.tol),
        format!("min increment {min_inc:.3e}, max |increment| {max_abs:.3e} over {} pairs", incs.len()),
    )
    .quantity("min_increment", min_inc)
    .quantity("max_abs_increment", max_abs)
    .quantity("nu_n", nu[n - 1])
    .quantity("tolerance", opts.tol);
    if !incs.is_empty() {
        r = r.witness(&format!("tau={tau_at}"), probes[at].clone(), min_inc);
    }
    if horizontal {
        r = r.quantity("horizontal_variation", max_abs);
        if max_abs <= opts.tol {
            r = r.certify("ONE-DIMENSIONAL");
        }
    }
    r.config = serde_json::json!({ "nu": nu, "tau_values": tau_values });
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Analytic, Profile};
    use crate::kernel::make_params;

    fn ramp_1d(h: f64) -> (GridFunction, DomainSpec, ExteriorModel) {
        let phi = ExteriorModel::profile(Profile::Tanh { center: 0.0, width: 1.0, lo: -1.0, hi: 1.0 });
        let grid = Grid::covering(&[-2.5], &[2.5], h).unwrap();
        let u = GridFunction::from_exterior(grid, phi.clone()).unwrap();
        (u, DomainSpec::interval(-2.0, 2.0), phi)
    }

    #[test]
    fn monotone_profile_satisfies_h() {
        let (u, omega, phi) = ramp_1d(0.05);
        let r = check_hypothesis_h(&u, &omega, &phi, 200).unwrap();
        assert!(r.passed(), "{}", r.summary);
    }

    #[test]
    fn constant_exterior_separates_clauses() {
        let grid = Grid::covering(&[-2.5], &[2.5], 0.05).unwrap();
        let phi = ExteriorModel::constant(0.3);
        let u = GridFunction::from_exterior(grid, phi.clone()).unwrap();
        let r = check_hypothesis_h(&u, &DomainSpec::interval(-2.0, 2.0), &phi, 100).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.get("order_pass"), Some(1.0));
        assert_eq!(r.get("sandwich_pass"), Some(0.0));
    }

    #[test]
    fn scan_certificates() {
        let (u, omega, _) = ramp_1d(0.05);
        let taus = aligned_taus(&u.grid, 4.0, 10);
        let scan = tau_scan(&u, &omega, &taus, 1e-10).unwrap();
        assert_eq!(scan.certificate, Certificate::Monotone);
        let c = GridFunction::from_exterior(u.grid.clone(), ExteriorModel::constant(1.0)).unwrap();
        let flat = tau_scan(&c, &omega, &taus, 1e-10).unwrap();
        assert_eq!(flat.certificate, Certificate::NonStrict);
        assert!(flat.per_tau.iter().all(|r| r.min_w == Some(0.0)));
        let off = tau_scan(&u, &omega, &[0.033], 1e-10).unwrap();
        assert!(!off.per_tau[0].aligned);
        assert_eq!(off.certificate, Certificate::Monotone);
        assert_eq!(off.report().get("unaligned"), Some(1.0));
        assert!(tau_scan(&u, &omega, &[0.5, 1.0], 1e-10).is_err());
        let skip = tau_scan(&u, &omega, &[4.5, 1.0], 1e-10).unwrap();
        assert_eq!(skip.skipped, vec![4.5]);
    }

    #[test]
    fn linear_c_tau_is_exact() {
        let (u, omega, _) = ramp_1d(0.05);
        let c = c_tau_field(&u, 0.5, &Nonlinearity::linear(-0.7, 0.2), &omega, 1e-10).unwrap();
        for f in 0..c.grid.len() {
            if omega.contains(&c.grid.point(f)) {
                assert_eq!(c.values[f], -0.7);
            }
        }
        let no_l = Nonlinearity::tabulated(vec![0.0, 1.0], vec![0.0, 1.0]);
        assert!(matches!(c_tau_field(&u, 0.5, &no_l, &omega, 1e-10), Err(Error::MissingLipschitz)));
    }

    #[test]
    fn narrow_region_trivial_cases() {
        let p = make_params(1, 0.5).unwrap();
        let grid = Grid::covering(&[-2.0], &[2.0], 0.05).unwrap();
        let d = DomainSpec::interval(-0.2, 0.2);
        let zero_c = GridFunction::from_exterior(grid.clone(), ExteriorModel::Zero).unwrap();
        let q = QuadratureSpec::default();
        let opts = VerifyOptions::default();
        let r0 = verify_narrow_region(&p, &d, &zero_c, &zero_c, &q, 1.0, &opts).unwrap();
        assert!(r0.passed() && r0.certificate.as_deref() == Some("IDENTICALLY-ZERO"));
        let one = GridFunction::from_exterior(grid, ExteriorModel::constant(1.0)).unwrap();
        let r1 = verify_narrow_region(&p, &d, &zero_c, &one, &q, 1.0, &opts).unwrap();
        assert!(r1.passed() && r1.get("min_w") == Some(1.0));
    }

    #[test]
    fn max_principle_gating() {
        let p = make_params(1, 0.5).unwrap();
        let grid = Grid::covering(&[-4.0], &[4.0], 0.05).unwrap();
        let d = DomainSpec::interval(-1.0, 1.0).complement();
        let zero_c = GridFunction::from_exterior(grid.clone(), ExteriorModel::Zero).unwrap();
        let density = VerificationReport::new("density_condition", Status::Pass, "ok");
        let probes: Vec<Vec<f64>> = (0..40).map(|k| vec![-3.0 + 0.15 * k as f64 + 0.01]).collect();
        let q = QuadratureSpec::default();
        let opts = VerifyOptions::default();
        let neg = GridFunction::from_exterior(grid.clone(), ExteriorModel::constant(-1.0)).unwrap();
        let r = verify_max_principle_unbounded(&p, &d, &zero_c, &neg, &q, &probes, Some(&density), &opts).unwrap();
        assert!(r.passed(), "{}", r.summary);
        let bump = ExteriorModel::closed_form(Analytic::Gaussian { center: vec![2.5], width: 0.5, amplitude: 1.0 });
        let b = GridFunction::from_exterior(grid, bump).unwrap();
        let r = verify_max_principle_unbounded(&p, &d, &zero_c, &b, &q, &probes, Some(&density), &opts).unwrap();
        assert_eq!(r.status, Status::PremiseFail);
        assert!(r.get("max_u").is_none());
    }

    #[test]
    fn large_tau_and_sweep_on_exact_profile() {
        let (u, _, _) = ramp_1d(0.05);
        let f = Nonlinearity::cubic();
        let a = measure_a(&u, 0.4);
        let probes: Vec<Vec<f64>> = (0..100).map(|k| vec![-6.0 + 0.12 * k as f64]).collect();
        let opts = VerifyOptions::default();
        assert!(verify_large_tau(&u, &f, a, 2.0 * a, &probes, &opts).unwrap().passed());
        let r0 = verify_large_tau(&u, &f, a, 0.0, &probes, &opts).unwrap();
        assert!(r0.passed() && r0.get("max_U") == Some(0.0));
        assert!(direction_sweep(&u, &[1.0], &[0.1, 1.0], &probes, &opts).unwrap().passed());
        assert!(direction_sweep(&u, &[0.0], &[0.1], &probes, &opts).is_err());
    }

    #[test]
    fn horizontal_sweep_of_vertical_function() {
        let phi = ExteriorModel::profile(Profile::Tanh { center: 0.0, width: 1.0, lo: -1.0, hi: 1.0 });
        let grid = Grid::covering(&[-2.0, -2.0], &[2.0, 2.0], 0.1).unwrap();
        let u = GridFunction::from_exterior(grid, phi).unwrap();
        let probes: Vec<Vec<f64>> = (0..50).map(|k| vec![-1.5 + 0.06 * k as f64, 1.3 - 0.05 * k as f64]).collect();
        let r = direction_sweep(&u, &[1.0, 0.0], &[0.2, 0.5], &probes, &VerifyOptions::default()).unwrap();
        assert_eq!(r.certificate.as_deref(), Some("ONE-DIMENSIONAL"));
    }
}
