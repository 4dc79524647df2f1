use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpp_lab::lab::{
    self, AbpKind, Command, CzKind, HolderKind, RunConfig, SimulateKind, SolveKind,
};

#[derive(Parser)]
#[command(
    name = "dpp-lab",
    version,
    about = "Solve, simulate and verify dynamic programming principles"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Built-in scenario name or path to a TOML file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    Solve {
        #[arg(value_enum)]
        kind: SolveKind,
        #[command(flatten)]
        common: Common,
    },
    Simulate {
        #[arg(value_enum)]
        kind: SimulateKind,
        #[command(flatten)]
        common: Common,
    },
    Abp {
        #[arg(value_enum)]
        kind: AbpKind,
        #[command(flatten)]
        common: Common,
    },
    Cz {
        #[arg(value_enum)]
        kind: CzKind,
        #[command(flatten)]
        common: Common,
    },
    Holder {
        #[arg(value_enum)]
        kind: HolderKind,
        #[command(flatten)]
        common: Common,
    },
    /// Solver against simulator at the probe points.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Desk-scale battery over the built-in scenarios.
    VerifyAll {
        #[command(flatten)]
        common: Common,
    },
    /// Lists the built-in scenarios.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var(lab::WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: {e}");
        }
    }
    let (cmd, common) = match cli.command {
        Cmd::Solve { kind, common } => (Command::Solve(kind), common),
        Cmd::Simulate { kind, common } => (Command::Simulate(kind), common),
        Cmd::Abp { kind, common } => (Command::Abp(kind), common),
        Cmd::Cz { kind, common } => (Command::Cz(kind), common),
        Cmd::Holder { kind, common } => (Command::Holder(kind), common),
        Cmd::Compare { common } => (Command::Compare, common),
        Cmd::VerifyAll { common } => (Command::VerifyAll, common),
        Cmd::List => {
            for s in dpp_lab::scenario::scenario_list() {
                println!("{:<16} {}", s.name, s.description);
            }
            return ExitCode::SUCCESS;
        }
    };
    let cfg = RunConfig {
        scenario: common.scenario,
        out: common.out,
        seed: common.seed,
        paths: common.paths,
        tol: common.tol,
    };
    let result = lab::run(cmd, &cfg);
    match &result {
        Ok(o) => {
            for w in &o.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} {}",
                if o.manifest.pass { "PASS" } else { "FAIL" },
                o.dir.display()
            );
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(lab::exit_code(&result) as u8)
}
