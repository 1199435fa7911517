use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chaoseq::config::RunConfig;
use chaoseq::fluctuations_kind;
use chaoseq::{analyze, classical_cmd, evolve, resolve_config, tools, CliError, CliResult};

#[derive(Parser)]
#[command(name = "chaoseq", version, about = "Equilibration experiments on chaotic quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Named configuration preset.
    #[arg(long)]
    preset: Option<String>,
    /// Configuration file with `key = value` lines, applied over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single `key=value` override, applied last. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the configured wave packet and write snapshots.
    Evolve(RunArgs),
    /// Solve the billiard spectrum and compare it with the Weyl law.
    Eigensolve(RunArgs),
    /// Long-time analysis of an `evolve` output directory.
    Analyze {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classical ensembles and orbits matching the configured packet.
    Classical(RunArgs),
    /// Husimi section of the last snapshot of a Henon-Heiles run.
    Husimi {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Component statistics of random unit vectors.
    Oracle {
        /// `complex` or `real`.
        #[arg(long, default_value = "complex")]
        kind: String,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest-neighbour level spacing statistics per symmetry sector.
    SpacingStats(RunArgs),
}

fn configured(args: &RunArgs, command: &str) -> CliResult<(RunConfig, PathBuf)> {
    let cfg = resolve_config(args.preset.as_deref(), args.config.as_deref(), &args.overrides, args.seed)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(command));
    Ok((cfg, out))
}

fn derived_out(out: &Option<PathBuf>, run_dir: &Path, suffix: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| run_dir.join(suffix))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Evolve(a) => {
            let (cfg, out) = configured(&a, "evolve")?;
            let s = evolve::evolve(&cfg, &out)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", s.root.display());
        }
        Command::Eigensolve(a) => {
            let (cfg, out) = configured(&a, "eigensolve")?;
            let r = tools::eigensolve(&cfg, &out)?;
            for (b, (sector, d)) in r.spectrum.sectors.iter().zip(&r.weyl) {
                println!("{sector}: {} levels, max relative Weyl deviation {d:.4}", b.energies.len());
            }
            println!("wrote {}", out.display());
        }
        Command::Analyze { run_dir, out } => {
            let out = derived_out(&out, &run_dir, "analysis");
            analyze::analyze(&run_dir, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Classical(a) => {
            let (cfg, out) = configured(&a, "classical")?;
            classical_cmd::classical(&cfg, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Husimi { run_dir, out } => {
            let out = derived_out(&out, &run_dir, "husimi");
            let r = tools::husimi(&run_dir, &out)?;
            println!("band fraction within 3 sigma_E: {:.4}", r.band_fraction);
            println!("wrote {}", out.display());
        }
        Command::Oracle { kind, n, draws, seed, out } => {
            let kind = fluctuations_kind(&kind)?;
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join("oracle"));
            let r = tools::oracle(kind, n, draws, seed, &out)?;
            println!(
                "KS distance: exponential {:.4e}, Porter-Thomas {:.4e}",
                r.ks_exponential, r.ks_porter_thomas
            );
            println!("wrote {}", out.display());
        }
        Command::SpacingStats(a) => {
            let (cfg, out) = configured(&a, "spacing-stats")?;
            for s in tools::spacing_stats(&cfg, &out)? {
                println!(
                    "{}: {} spacings, KS Wigner {:.4}, KS Poisson {:.4}",
                    s.sector,
                    s.spacings.len(),
                    s.ks_wigner,
                    s.ks_poisson
                );
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
