use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use smallbody_cli::commands::{default_out, execute, CommandKind, Invocation};
use smallbody_cli::config::load_config;

#[derive(Parser)]
#[command(name = "smallbody", version, about = "Small rigid body in a viscous fluid: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// `key = value` configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out/<command>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config key; repeatable, later wins.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Independent runs executed concurrently.
    #[arg(long, default_value_t = 1, global = true)]
    jobs: usize,
    /// Shorthand for `--set seed=<n>`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Coupled fluid and body run.
    Simulate,
    /// Body-free run with the same datum.
    Reference,
    /// Small-body limit sweep over the epsilon schedule.
    Sweep,
    /// Cut-off scaling exponents and test-function convergence.
    VerifyCutoff,
    /// Stream-function inversion and local bounds.
    VerifyStream,
    /// Weak-formulation residuals and the pairing diagnostic.
    AuditWeak,
}

impl From<Cmd> for CommandKind {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Self::Simulate,
            Cmd::Reference => Self::Reference,
            Cmd::Sweep => Self::Sweep,
            Cmd::VerifyCutoff => Self::VerifyCutoff,
            Cmd::VerifyStream => Self::VerifyStream,
            Cmd::AuditWeak => Self::AuditWeak,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = CommandKind::from(cli.command);
    let mut overrides = cli.set.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    let config = match load_config(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let inv = Invocation {
        kind,
        config,
        out: cli.out.unwrap_or_else(|| default_out(kind)),
        jobs: cli.jobs.max(1),
    };
    let start = Instant::now();
    let result = execute(&inv);
    let elapsed = start.elapsed().as_secs_f64();
    let log = inv.out.join("run.log");
    if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(&log) {
        let status = match &result {
            Ok(o) => format!("failures={}", o.failures.len()),
            Err(e) => format!("error=\"{e}\""),
        };
        let _ = writeln!(f, "command={} wall_clock_s={elapsed:.3e} {status}", kind.name());
    }
    match result {
        Ok(o) if o.failures.is_empty() => {
            println!("{}: all checks passed ({})", kind.name(), inv.out.display());
            ExitCode::SUCCESS
        }
        Ok(o) => {
            for f in &o.failures {
                println!("{}", f.line());
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
