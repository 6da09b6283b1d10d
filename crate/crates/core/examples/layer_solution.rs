//! Truncated layer solutions on (-L, L) for growing L, and the large-τ
//! comparison on the result.

use fraclab::operator::QuadratureSpec;
use fraclab::sliding::{box_probes, measure_a, verify_large_tau, VerifyOptions};
use fraclab::solver::{layer_grid, solve_layer_1d, warm_start, Nonlinearity, SolverConfig};
use fraclab::make_params;

fn main() -> fraclab::Result<()> {
    let p = make_params(1, 0.5)?;
    let q = QuadratureSpec::default();
    let f = Nonlinearity::cubic();
    let h = 0.02;
    let mut prev = None;
    for l in [5.0, 10.0, 20.0] {
        let grid = layer_grid(l, h)?;
        let cfg = match &prev {
            Some(u) => SolverConfig { initial_guess: warm_start(u, &grid), ..Default::default() },
            None => SolverConfig::default(),
        };
        let sol = solve_layer_1d(&p, l, &f, &grid, &q, &cfg)?;
        let u = &sol.u;
        println!(
            "L = {l:>4}: {} Newton steps, u(0.5) = {:.6}, u(L-1) = {:.6}",
            sol.log.iterations,
            u.evaluate(&[0.5]),
            u.evaluate(&[l - 1.0])
        );
        for b in &sol.boundary_layer {
            println!("    within {:>4} of ±L: gap to ±1 in [{:.3e}, {:.3e}]", b.margin, b.lower_gap, b.upper_gap);
        }
        prev = Some(sol.u);
    }
    let u = prev.unwrap();
    let a = measure_a(&u, f.flat_delta.unwrap());
    let rep = verify_large_tau(&u, &f, a, 2.0 * a, &box_probes(&u.grid, 1000), &VerifyOptions::default())?;
    println!("a = {a:.3}; large-τ check at τ = 2a: {} ({})", rep.status, rep.summary);
    Ok(())
}
