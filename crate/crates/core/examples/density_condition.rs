//! Monte-Carlo density profiles of domain complements in dyadic shells.

use fraclab::domains::{check_density_condition, density_profile, DomainSpec};

fn main() -> fraclab::Result<()> {
    let cases = [
        ("stripes", DomainSpec::Stripes, vec![0.0, 0.5]),
        ("annuli", DomainSpec::AnnulusFamily, vec![0.5, 0.0]),
        ("spiral band", DomainSpec::SpiralBand { a: 0.0, b: 1.0 / (2.0 * std::f64::consts::PI), half_width: 0.2 }, vec![0.0, 0.0]),
        ("unit ball", DomainSpec::ball(vec![0.0, 0.0], 1.0), vec![0.0, 0.0]),
        ("half plane", DomainSpec::HalfSpace { direction: vec![0.0, 1.0], offset: 0.0 }, vec![0.0, 1.0]),
        ("full space", DomainSpec::FullSpace, vec![0.0, 0.0]),
    ];
    for (name, d, q) in cases {
        let profile = density_profile(&d, &q, 0, 8, 100_000, 7)?;
        let rho: Vec<String> = profile.iter().map(|sh| format!("{:.3}", sh.rho)).collect();
        let rep = check_density_condition(&profile, 0.25);
        println!("{name:<12} {:<6} rho_k = [{}]", rep.status.label(), rho.join(" "));
    }
    Ok(())
}
