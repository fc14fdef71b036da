//! `nestlab`: run the experiments and the verification suite from the command
//! line. Exit codes: 0 success, 1 configuration or runtime error, 2 failed
//! verification.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nestlab_core::experiments::{run_experiment, ExperimentConfig, ExperimentKind, Tamper};
use nestlab_core::LabError;

#[derive(Parser)]
#[command(name = "nestlab", version, about = "Distributed Nesterov gradient methods: experiments and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config file (`key = value` lines, `[method.X]` sections).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed; overrides the config's. Defaults to 1 without a config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory [default: out/<experiment>].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Full-size runs (e.g. 100 nodes for the logistic comparison).
    #[arg(long)]
    long: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a config file.
    Run(Common),
    /// Logistic loss: D-NG, D-NC and the subgradient baseline.
    #[command(name = "fig1-left")]
    Fig1Left(Common),
    /// Two-group Huber losses at three scales: D-NG against D-NC.
    #[command(name = "fig1-right")]
    Fig1Right(Common),
    /// Adversarial instances.
    Hard {
        which: HardWhich,
        /// Outer iteration of interest (unbounded instances).
        #[arg(long)]
        k: Option<usize>,
        /// Gap level to force (unbounded instances).
        #[arg(long)]
        m: Option<f64>,
        /// Largest horizon or iteration count.
        #[arg(long)]
        k_max: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Divergence demonstrations.
    Diverge {
        which: DivergeWhich,
        #[command(flatten)]
        common: Common,
    },
    /// Run the verification suite; exits with 2 if any check fails.
    Verify {
        /// Inject a defect to confirm the suite catches it.
        #[arg(long, value_name = "halve_c_cons|fixed_momentum[:b]")]
        tamper: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HardWhich {
    Nedic,
    UnboundedDnc,
    UnboundedDng,
}

#[derive(Clone, Copy, ValueEnum)]
enum DivergeWhich {
    #[value(name = "assumption-1b", alias = "assumption_1b")]
    Assumption1b,
    Cubic,
}

enum Failure {
    Config(String),
    Verification(usize),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(common: &Common, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            let cfg = ExperimentConfig::parse(&text)?;
            if let Some(k) = kind {
                if cfg.experiment != k {
                    return Err(Failure::Config(format!(
                        "config error in key `experiment`: config names `{}` but the command runs `{}`",
                        cfg.experiment.name(),
                        k.name()
                    )));
                }
            }
            cfg
        }
        None => match kind {
            Some(k) => ExperimentConfig::new(k, 1),
            None => return Err(Failure::Config("`run` needs --config PATH".into())),
        },
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.long |= common.long;
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let cfg = match cli.command {
        Command::Run(c) => load(&c, None)?,
        Command::Fig1Left(c) => load(&c, Some(ExperimentKind::Fig1Left))?,
        Command::Fig1Right(c) => load(&c, Some(ExperimentKind::Fig1Right))?,
        Command::Hard { which, k, m, k_max, common } => {
            let kind = match which {
                HardWhich::Nedic => ExperimentKind::HardNedic,
                HardWhich::UnboundedDnc => ExperimentKind::HardUnboundedDnc,
                HardWhich::UnboundedDng => ExperimentKind::HardUnboundedDng,
            };
            let mut cfg = load(&common, Some(kind))?;
            cfg.k = k.or(cfg.k);
            cfg.m = m.or(cfg.m);
            cfg.k_max = k_max.or(cfg.k_max);
            cfg
        }
        Command::Diverge { which, common } => load(
            &common,
            Some(match which {
                DivergeWhich::Assumption1b => ExperimentKind::Diverge1b,
                DivergeWhich::Cubic => ExperimentKind::DivergeCubic,
            }),
        )?,
        Command::Verify { tamper, common } => {
            let mut cfg = load(&common, Some(ExperimentKind::Verify))?;
            if let Some(t) = tamper {
                cfg.tamper = Some(
                    t.parse::<Tamper>()
                        .map_err(|m| Failure::Config(format!("config error in key `tamper`: {m}")))?,
                );
            }
            cfg
        }
    };
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()));
    let output = run_experiment(&cfg)?;
    let written = output.write_to(&out_dir)?;
    // A closed pipe (e.g. `| head`) is not an error.
    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", output.summary);
    let _ = writeln!(stdout, "wrote {} files to {}", written.len(), out_dir.display());
    let failed = output.failed();
    if output.gating && failed > 0 {
        return Err(Failure::Verification(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(n)) => {
            eprintln!("verification failed: {n} check(s)");
            ExitCode::from(2)
        }
    }
}
