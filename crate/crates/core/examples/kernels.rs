//! Normalization constants and kernel identities for a few orders.

use fraclab::kernel::{c0_identity, exterior_kernel, exterior_kernel_mass, make_params, poisson_integral, BallQuadrature};

fn main() -> fraclab::Result<()> {
    println!("{:>2} {:>5} {:>14} {:>14} {:>8} {:>14} {:>14}", "n", "s", "C_ns", "B_ns", "C0", "mass(E)-1", "C0 id - 1");
    for n in [1, 2] {
        for s in [0.25, 0.5, 0.75] {
            let p = make_params(n, s)?;
            println!(
                "{n:>2} {s:>5} {:>14.10} {:>14.10} {:>8.5} {:>14.2e} {:>14.2e}",
                p.c_ns,
                p.b_ns,
                p.c0,
                exterior_kernel_mass(&p, 1.0) - 1.0,
                c0_identity(&p, 1.0) - 1.0
            );
        }
    }
    // Poisson integral of 1 is 1 at any point of the ball
    let p = make_params(2, 0.3)?;
    for x in [[0.0, 0.0], [0.5, 0.2], [0.0, -0.9]] {
        let v = poisson_integral(&p, 1.0, &[0.0, 0.0], &x, &BallQuadrature::default(), |_| 1.0)?;
        println!("∫ P_1(y, {x:?}) dy = {v:.12}");
    }
    println!("E^(1)([2, 0]) = {:.6e}", exterior_kernel(&p, 1.0, &[2.0, 0.0])?);
    Ok(())
}
