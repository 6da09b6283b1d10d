//! Monotonicity of a Dirichlet solution by sliding: solve the cubic problem
//! on (-8, 8), check the ordering of the exterior data, scan τ, and certify
//! the narrowest overlap region.

use fraclab::domains::DomainSpec;
use fraclab::field::{difference, shift_vertical, ExteriorModel, Grid, GridFunction, Profile};
use fraclab::operator::QuadratureSpec;
use fraclab::sliding::{aligned_taus, c_tau_field, check_hypothesis_h, overlap_domain, tau_scan, verify_narrow_region, VerifyOptions};
use fraclab::solver::{solve_dirichlet, Nonlinearity, SolverConfig};
use fraclab::make_params;

fn main() -> fraclab::Result<()> {
    let p = make_params(1, 0.5)?;
    let q = QuadratureSpec::default();
    let f = Nonlinearity::cubic();
    let omega = DomainSpec::interval(-8.0, 8.0);
    let phi = ExteriorModel::profile(Profile::Tanh { center: 0.0, width: 1.0, lo: -1.0, hi: 1.0 });
    let grid = Grid::covering(&[-8.2], &[8.2], 0.02)?;

    let sol = solve_dirichlet(&p, &omega, &phi, &f, &grid, &q, &SolverConfig::default())?;
    println!("Newton residuals: {:?}", sol.log.residual_history.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>());
    let u = sol.u;

    let h = check_hypothesis_h(&u, &omega, &phi, 500)?;
    println!("hypothesis H: {} ({})", h.status, h.summary);

    let taus = aligned_taus(&grid, 16.0, 20);
    let scan = tau_scan(&u, &omega, &taus, 1e-8)?;
    for rec in &scan.per_tau {
        println!("  τ = {:6.2}  min w = {}", rec.tau, rec.min_w.map_or("-".into(), |m| format!("{m:.4e}")));
    }
    println!("scan: {}", scan.certificate.label());

    let tau = taus[0];
    let d = overlap_domain(&omega, 1, tau);
    let ct = c_tau_field(&u, tau, &f, &d, 1e-10)?;
    let c = GridFunction::new(ct.grid.clone(), ct.values.iter().map(|v| -v).collect(), ExteriorModel::Zero)?;
    let w = difference(&shift_vertical(&u, tau), &u)?;
    let nr = verify_narrow_region(&p, &d, &c, &w, &q, 1.0, &VerifyOptions::default())?;
    println!(
        "narrow region at τ = {tau}: {} {} (premise product {:.3e})",
        nr.status,
        nr.certificate.as_deref().unwrap_or(""),
        nr.get("premise_product").unwrap_or(f64::NAN)
    );
    Ok(())
}
