//! Residual of the generalized average inequality at the maximum of a bump,
//! and away from it where it may be negative.

use fraclab::field::{Analytic, ExteriorModel, Grid, GridFunction};
use fraclab::operator::QuadratureSpec;
use fraclab::poisson::average_inequality_residual;
use fraclab::make_params;

fn main() -> fraclab::Result<()> {
    let q = QuadratureSpec::default();
    let grid = Grid::covering(&[-5.0], &[5.0], 0.01)?;
    let form = Analytic::Sum {
        terms: vec![
            Analytic::Gaussian { center: vec![0.2], width: 0.8, amplitude: 1.5 },
            Analytic::Gaussian { center: vec![-1.0], width: 0.5, amplitude: -0.3 },
        ],
    };
    let u = GridFunction::from_exterior(grid, ExteriorModel::closed_form(form))?;
    let (_, at) = u.max_value();
    let xbar = u.grid.point(at);
    for s in [0.25, 0.5, 0.75] {
        let p = make_params(1, s)?;
        for r in [0.5, 1.0, 2.0] {
            let top = average_inequality_residual(&p, &u, &xbar, r, &q)?;
            let side = average_inequality_residual(&p, &u, &[2.0], r, &q)?;
            println!("s = {s}, r = {r}: residual at max {top:+.4e}, at x = 2 {side:+.4e}");
        }
    }
    Ok(())
}
