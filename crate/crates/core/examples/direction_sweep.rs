//! A planar field built from a one-dimensional layer, swept along
//! directions ν with ν_2 >= 0. The horizontal direction certifies that the
//! field does not depend on x_1.

use fraclab::field::{ExteriorModel, Grid, GridFunction, Profile};
use fraclab::operator::QuadratureSpec;
use fraclab::sliding::{box_probes, direction_sweep, VerifyOptions};
use fraclab::solver::{layer_grid, solve_layer_1d, Nonlinearity, SolverConfig};
use fraclab::make_params;

fn main() -> fraclab::Result<()> {
    let p = make_params(1, 0.5)?;
    let layer = solve_layer_1d(&p, 6.0, &Nonlinearity::cubic(), &layer_grid(6.0, 0.05)?, &QuadratureSpec::default(), &SolverConfig::default())?;
    let profile = layer.u;
    let grid = Grid::covering(&[-6.0, -6.0], &[6.0, 6.0], 0.05)?;
    let u = GridFunction::from_fn(
        grid.clone(),
        ExteriorModel::profile(Profile::Step { at: 0.0, lo: -1.0, hi: 1.0 }),
        |x| profile.evaluate(&[x[1]]),
    )?;
    // probes shifted by at most 2 stay inside the hull
    let probes: Vec<Vec<f64>> = box_probes(&grid, 400).into_iter().map(|x| vec![x[0] / 3.0, x[1] / 2.0]).collect();
    let taus = [0.1, 0.5, 1.0, 2.0];
    for deg in [0.0f64, 15.0, 45.0, 90.0, 135.0, 180.0] {
        let th = deg.to_radians();
        let nu = [th.cos(), th.sin().max(0.0)];
        let rep = direction_sweep(&u, &nu, &taus, &probes, &VerifyOptions::default())?;
        println!(
            "θ = {deg:>5}°: {} {} min increment {:.3e}",
            rep.status,
            rep.certificate.as_deref().unwrap_or(""),
            rep.get("min_increment").unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
