use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmflow::harness::{self, Outcome, Overrides, RunConfig, VerifyOptions, EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK};

/// Normalized anisotropic curvature flow of support functions.
#[derive(Parser)]
#[command(name = "cmflow", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for random initial modes.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Run even when psi fails the admissibility certificate.
    #[arg(long, global = true)]
    force: bool,
    /// Accept a psi that is not antipodally even.
    #[arg(long, global = true)]
    allow_uneven: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evenness and admissibility of psi.
    CheckPsi,
    /// Normalized flow to convergence; writes trace, summary, final field.
    Evolve,
    /// Unnormalized flow plus its rescaling.
    EvolveRaw,
    /// Oracle suite.
    Verify {
        /// Base latitude count.
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
    /// Cartesian sweep over the [sweep] axes.
    Sweep,
    /// OBJ/PLY of a field file, or of the final state of a run.
    ExportMesh {
        /// One value per node, latitude-major (e.g. u_final.txt).
        #[arg(long, value_name = "PATH")]
        field: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> cmflow::Result<Outcome> {
    if let Command::Verify { resolution } = cli.command {
        let rep = harness::verify(VerifyOptions {
            resolution,
            ..VerifyOptions::default()
        });
        return Ok(Outcome {
            code: if rep.all_passed() { EXIT_OK } else { EXIT_INVARIANT },
            report: rep.table(),
            artifacts: Vec::new(),
        });
    }
    let path = cli
        .config
        .ok_or_else(|| cmflow::Error::InvalidConfig("this command needs --config PATH".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    cfg.apply(&Overrides {
        out: cli.out,
        seed: cli.seed,
        force: cli.force,
        allow_uneven: cli.allow_uneven,
    });
    match cli.command {
        Command::CheckPsi => harness::check_psi(&cfg),
        Command::Evolve => harness::evolve(&cfg),
        Command::EvolveRaw => harness::evolve_raw(&cfg),
        Command::Sweep => harness::sweep(&cfg),
        Command::ExportMesh { field } => harness::export_mesh(&cfg, field.as_deref()),
        Command::Verify { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.report);
            for a in &out.artifacts {
                println!("wrote {}", a.display());
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
