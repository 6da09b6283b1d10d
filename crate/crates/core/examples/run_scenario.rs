//! Load a scenario file and run its checks, as `fraclab verify` does.
//!
//! cargo run --release --example run_scenario -- crates/core/scenarios/cubic_dirichlet.json

use fraclab::scenario::{cmd_verify, RunOptions, Scenario};

fn main() -> fraclab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/cubic_dirichlet.json").to_string());
    let sc = Scenario::load(&path)?;
    let out = tempfile::tempdir()?;
    let outcome = cmd_verify(&sc, &RunOptions { out: out.path().to_path_buf(), ..Default::default() })?;
    for r in &outcome.reports {
        println!("{}", r.to_json());
    }
    println!("{}", outcome.status_line());
    Ok(())
}
