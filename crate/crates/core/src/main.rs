use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use blockmono::cli::{exit_code, load_config, run_from_config};

/// Solve a coupled convection-diffusion-reaction system by monotone block iterations.
#[derive(Parser, Debug)]
#[command(name = "blockmono", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result =
        load_config(&args.config).and_then(|cfg| run_from_config(&cfg, args.out.as_deref()));
    match result {
        Ok(outcome) => {
            if !args.quiet {
                let s = &outcome.summary;
                println!(
                    "{}: {} iterations, converged = {}, |max - min| = {:.3e}, {:.1} ms -> {}",
                    s.method,
                    s.iterations,
                    s.converged,
                    s.max_minus_min_norm,
                    s.wall_ms,
                    outcome.output_dir.display()
                );
                if let Some(c) = &outcome.comparison {
                    let show = |n: Option<usize>| n.map_or("-".to_string(), |n| n.to_string());
                    println!(
                        "iterations to tol: jacobi {}, gauss-seidel {}; sandwich ok = {}",
                        show(c.iters_jacobi),
                        show(c.iters_gs),
                        c.sandwich_ok
                    );
                }
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            if let blockmono::Error::Precondition { nodes, .. } = &err {
                for n in nodes.iter().take(10) {
                    eprintln!("  {n}");
                }
            }
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
