//! s-harmonic replacement of a function in a ball, and the dominance check
//! u+ <= û for a function that is s-subharmonic where positive.

use fraclab::field::{ExteriorModel, Grid, GridFunction};
use fraclab::operator::{frac_laplacian_at, QuadratureSpec};
use fraclab::poisson::{ball_probes, check_subharmonic_dominance, check_subharmonic_premise, harmonic_replacement};
use fraclab::make_params;

fn main() -> fraclab::Result<()> {
    let s = 0.3;
    let p = make_params(1, s)?;
    let q = QuadratureSpec::default();
    let grid = Grid::covering(&[-6.0], &[6.0], 0.01)?;
    // 1 - min(|x|^{2s-1}, 2) is s-subharmonic and positive for |x| > 1
    let u = GridFunction::from_fn(grid, ExteriorModel::constant(1.0), |x| 1.0 - x[0].abs().powf(2.0 * s - 1.0).min(2.0))?;
    let (center, r) = ([1.2], 0.8);

    let hat = harmonic_replacement(&p, &u.positive_part(), &center, r)?;
    for x in [0.8, 1.2, 1.6] {
        println!(
            "x = {x}: u+ = {:.5}, û = {:.5}, (-Δ)^s û = {:.2e}",
            u.evaluate(&[x]).max(0.0),
            hat.evaluate(&[x]),
            frac_laplacian_at(&p, &hat, &[x], &q)?
        );
    }

    let probes = ball_probes(&center, r, 200, 0.95);
    let premise = check_subharmonic_premise(&p, &u, &probes, 0.0, &q)?;
    let rep = check_subharmonic_dominance(&p, &u, &center, r, &probes, 1e-3, Some(&premise))?;
    println!("{}: {} ({})", premise.check, premise.status, premise.summary);
    println!("{}: {} ({})", rep.check, rep.status, rep.summary);
    Ok(())
}
