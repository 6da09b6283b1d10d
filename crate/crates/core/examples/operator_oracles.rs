//! The discrete operator against exact values: the Fourier symbol of cos and
//! the constant value of (-Δ)^s (1 - x^2)_+^s.

use fraclab::field::{Analytic, ExteriorModel, Grid, GridFunction};
use fraclab::operator::{frac_laplacian_at, QuadratureSpec};
use fraclab::special::gamma;
use fraclab::make_params;

fn main() -> fraclab::Result<()> {
    let q = QuadratureSpec::default();
    for s in [0.25, 0.5, 0.75] {
        let p = make_params(1, s)?;
        for h in [0.02, 0.01, 0.005] {
            let grid = Grid::covering(&[-4.0], &[4.0], h)?;
            let u = GridFunction::from_exterior(
                grid,
                ExteriorModel::closed_form(Analytic::Cosine { wave: vec![2.0], phase: 0.3, amplitude: 1.0 }),
            )?;
            let mut err: f64 = 0.0;
            for x in [-1.0f64, 0.0, 0.4, 1.7] {
                let exact = 2f64.powf(2.0 * s) * (2.0 * x + 0.3).cos();
                err = err.max((frac_laplacian_at(&p, &u, &[x], &q)? - exact).abs());
            }
            println!("s = {s}, h = {h}: max error on cos(2x + 0.3) = {err:.3e}");
        }
        let grid = Grid::covering(&[-2.0], &[2.0], 0.01)?;
        let bump = GridFunction::from_exterior(
            grid,
            ExteriorModel::closed_form(Analytic::PowerBump { center: vec![0.0], radius: 1.0, exponent: s, amplitude: 1.0 }),
        )?;
        let vals: Vec<String> = [-0.6, -0.3, 0.0, 0.3, 0.6]
            .iter()
            .map(|x| frac_laplacian_at(&p, &bump, &[*x], &q).map(|v| format!("{v:.5}")))
            .collect::<Result<_, _>>()?;
        println!("  (1 - x^2)_+^s: [{}], exact Γ(1+2s) = {:.5}", vals.join(", "), gamma(1.0 + 2.0 * s));
    }
    Ok(())
}
