use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fraclab::scenario::{cmd_density, cmd_eval, cmd_slide, cmd_solve, cmd_verify, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Fractional Laplacian laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the operator on the sampled exterior model.
    Eval(Common),
    /// Solve the scenario problem.
    Solve(Common),
    /// Scan w = u(x + τ e_n) - u(x) over decreasing τ.
    Slide(Common),
    /// Dyadic density profile of the domain complement.
    Density(Common),
    /// Run the scenario's list of checks.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplies every check tolerance.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, run): (&str, &Common, fn(&Scenario, &RunOptions) -> fraclab::Result<_>) = match &cli.command {
        Command::Eval(c) => ("eval", c, cmd_eval),
        Command::Solve(c) => ("solve", c, cmd_solve),
        Command::Slide(c) => ("slide", c, cmd_slide),
        Command::Density(c) => ("density", c, cmd_density),
        Command::Verify(c) => ("verify", c, cmd_verify),
    };
    if let Some(k) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if !(common.tol_scale > 0.0 && common.tol_scale.is_finite()) {
        eprintln!("error: --tol-scale must be positive");
        println!("STATUS ERROR command={name}");
        return ExitCode::from(2);
    }
    let outcome = Scenario::load(&common.scenario).and_then(|sc| {
        let opts = RunOptions { out: common.out.clone(), seed: common.seed, tol_scale: common.tol_scale };
        run(&sc, &opts)
    });
    match outcome {
        Ok(o) => {
            for a in &o.artifacts {
                println!("wrote {}", a.display());
            }
            println!("{}", o.status_line());
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("STATUS ERROR command={name}");
            ExitCode::from(2)
        }
    }
}
