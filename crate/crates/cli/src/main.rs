use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nld_cli::{load_config, run, Command, RunConfig, Study, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "nld", version, about = "Nonlocal complement-value problems: kernel checks, solves and studies")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Path of the JSON report (default: <out>/report.json).
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the assembled matrices as row,col,value CSV into this directory.
    #[arg(long, global = true)]
    dump_matrices: Option<PathBuf>,
    /// Print the validated config with all defaults and exit.
    #[arg(long, global = true)]
    print_effective_config: bool,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the kernel conditions for the configured kernel.
    CheckKernel,
    /// Reproduce the condition table over the catalog.
    Table,
    /// Solve the elliptic problem.
    Solve,
    /// Solve the time-dependent problem by implicit Euler.
    SolveParabolic,
    /// Run a numerical study.
    Study {
        #[arg(value_enum)]
        name: StudyName,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyName {
    Garding,
    Poincare,
    Sector,
    Maxprin,
    BoundaryRegularity,
    Convergence,
    Lemmas,
    Truncation,
    Energy,
}

impl From<StudyName> for Study {
    fn from(s: StudyName) -> Study {
        match s {
            StudyName::Garding => Study::Garding,
            StudyName::Poincare => Study::Poincare,
            StudyName::Sector => Study::Sector,
            StudyName::Maxprin => Study::Maxprin,
            StudyName::BoundaryRegularity => Study::BoundaryRegularity,
            StudyName::Convergence => Study::Convergence,
            StudyName::Lemmas => Study::Lemmas,
            StudyName::Truncation => Study::Truncation,
            StudyName::Energy => Study::Energy,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match load_config(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("nld: {e}");
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.display().to_string();
    }
    if let Some(r) = &cli.report {
        cfg.output.report = Some(r.display().to_string());
    }
    if let Some(d) = &cli.dump_matrices {
        cfg.output.dump_matrices = Some(d.display().to_string());
    }
    if cli.print_effective_config {
        print!("{}", cfg.effective_toml());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("nld: no command given (see --help)");
        return ExitCode::from(EXIT_CONFIG as u8);
    };
    let cmd = match command {
        Cmd::CheckKernel => Command::CheckKernel,
        Cmd::Table => Command::Table,
        Cmd::Solve => Command::Solve,
        Cmd::SolveParabolic => Command::SolveParabolic,
        Cmd::Study { name } => Command::Study(name.into()),
    };
    match run(cmd, &cfg) {
        Ok(out) => {
            for n in &out.notes {
                eprintln!("nld: {n}");
            }
            for a in &out.artifacts {
                println!("{}", a.display());
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("nld: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
