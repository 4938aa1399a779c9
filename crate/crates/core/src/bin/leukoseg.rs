use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use leukoseg::batch::{
    parse_seed_range, run_eval, run_phantoms, run_segment, EvalArgs, PhantomArgs, SegmentArgs, EXIT_INVALID,
};

#[derive(Parser)]
#[command(name = "leukoseg", version, about = "Leukocyte segmentation for blood smear images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment PNG/PPM images (files or directories) and write masks, overlays and a manifest.
    Segment {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// TOML pipeline config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write every intermediate stage per site.
        #[arg(long)]
        debug: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Ground-truth directory of `<stem>_cell.*` masks to evaluate against.
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Compare `<stem>_cell.*` prediction masks with ground truth.
    Eval {
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate seeded synthetic smears with ground-truth masks.
    Phantom {
        /// Inclusive seed range `N..M` or a single seed.
        #[arg(long, default_value = "1..10")]
        seed: String,
        #[arg(long)]
        out: PathBuf,
        /// TOML phantom parameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    Ok(match cli.command {
        Command::Segment {
            inputs,
            out,
            config,
            debug,
            threads,
            gt,
        } => {
            let args = SegmentArgs {
                inputs,
                out,
                config,
                debug,
                threads,
                gt,
            };
            let (outcome, manifest) = run_segment(&args)?;
            for r in &manifest.images {
                match &r.error {
                    Some(e) => eprintln!("{}: {e}", r.path.display()),
                    None => println!("{}: {} site(s), {:.1} ms", r.path.display(), r.sites.len(), r.millis),
                }
            }
            println!("ATPIS {:.4} s", manifest.atpis_seconds);
            outcome.exit_code()
        }
        Command::Eval { pred, gt, out } => {
            let (outcome, report) = run_eval(&EvalArgs { pred, gt, out })?;
            if let Some(s) = report.summary {
                println!(
                    "{} pairs: SA {:.2} ± {:.2}, OR {:.4}, UR {:.4}, ER {:.4}",
                    s.count, s.sa_mean, s.sa_sd, s.or_mean, s.ur_mean, s.er_mean
                );
            }
            outcome.exit_code()
        }
        Command::Phantom { seed, out, config } => {
            let seeds = parse_seed_range(&seed)?;
            let (outcome, manifest) = run_phantoms(&PhantomArgs {
                params: config,
                seeds,
                out,
            })?;
            for p in manifest.phantoms.iter().filter(|p| p.error.is_some()) {
                eprintln!("seed {}: {}", p.seed, p.error.as_deref().unwrap_or_default());
            }
            outcome.exit_code()
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID as u8)
        }
    }
}
