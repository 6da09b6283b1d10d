//! Maximum principle in unbounded domains, gated on the density condition.

use fraclab::domains::{check_density_condition, density_profile, DomainSpec};
use fraclab::field::{Analytic, ExteriorModel, Grid, GridFunction};
use fraclab::operator::QuadratureSpec;
use fraclab::sliding::{box_probes, verify_max_principle_unbounded, VerifyOptions};
use fraclab::make_params;

fn main() -> fraclab::Result<()> {
    let p = make_params(1, 0.5)?;
    let q = QuadratureSpec::default();
    let grid = Grid::covering(&[-6.0], &[6.0], 0.02)?;
    let c = GridFunction::from_exterior(grid.clone(), ExteriorModel::constant(0.5))?;
    let probes = box_probes(&grid, 200);
    let opts = VerifyOptions::default();
    let u = GridFunction::from_exterior(
        grid.clone(),
        ExteriorModel::closed_form(Analytic::Gaussian { center: vec![0.3], width: 1.0, amplitude: -1.0 }),
    )?;

    for (name, d) in [("stripes", DomainSpec::Stripes), ("whole line", DomainSpec::FullSpace)] {
        let profile = density_profile(&d, &[0.5], 0, 8, 20_000, 1)?;
        let density = check_density_condition(&profile, 0.25);
        let rep = verify_max_principle_unbounded(&p, &d, &c, &u, &q, &probes, Some(&density), &opts)?;
        println!("{name}: {} {}", rep.status, rep.summary);
        for pr in &rep.premises {
            println!("  premise {:<26} {}", pr.name, if pr.passed { "holds" } else { "fails" });
        }
    }
    Ok(())
}
