use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use horolab_cli::{exit, exit_code_for, list_experiments, run, write_outputs, Experiment, Format, RunConfig, Which};

#[derive(Parser)]
#[command(name = "horolab", version, about = "Metric-functional experiments on L_p([0,1])")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence of the worked example sequences
    Examples {
        #[arg(long, value_enum, default_value_t = WhichArg::All)]
        which: WhichArg,
        #[command(flatten)]
        common: Common,
    },
    /// Partition nets for a constant atomic mixture
    Converse {
        /// Mixture as JSON `{"atoms":[...],"weights":[...]}`
        #[arg(long)]
        mixture: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Witness sequence for a linear functional on L_p
    LpWitness {
        /// Dual element as a step-function JSON; random when omitted
        #[arg(long)]
        zeta: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Escape rate and ergodic limit of F(f) = T f + g
    Ergodic {
        /// identity | scale:L | doubling | exchange:K:P0,P1,.. | condexp:K | mix:W*OP+W*OP..
        #[arg(long, default_value = "condexp:0")]
        operator: String,
        /// Shift g as a step-function JSON; 1_[0,1/2] when omitted
        #[arg(long)]
        g: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Alspach's isometry and the fixed-point certificate
    Alspach {
        /// Random K pairs for the isometry check (and sampled candidates above depth 4)
        #[arg(long, default_value_t = 200)]
        random_pairs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Print the experiment catalog
    List,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    p: Option<f64>,
    /// Largest n of the doubling schedule 2, 4, ..., n_max
    #[arg(long, default_value_t = 1024)]
    n_max: u64,
    #[arg(long)]
    depth: Option<u32>,
    /// Escape rates at or below this count as zero
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Output file; stdout when omitted. CSV runs also write `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichArg {
    Spike,
    BoundedSpike,
    Escape,
    Rademacher,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn parse_json<T: DeserializeOwned>(flag: &str, text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("--{flag}: {e}"))
}

fn build_config(command: Command) -> Result<Option<RunConfig>, String> {
    let (experiment, common) = match &command {
        Command::List => return Ok(None),
        Command::Examples { common, .. } => (Experiment::Examples, common),
        Command::Converse { common, .. } => (Experiment::Converse, common),
        Command::LpWitness { common, .. } => (Experiment::LpWitness, common),
        Command::Ergodic { common, .. } => (Experiment::Ergodic, common),
        Command::Alspach { common, .. } => (Experiment::Alspach, common),
    };
    let mut cfg = RunConfig::new(experiment);
    if let Some(p) = common.p {
        if matches!(experiment, Experiment::Examples | Experiment::Converse | Experiment::Alspach) && p != 1.0 {
            return Err(format!("{} runs on L_1; --p must be 1", experiment.id()));
        }
        cfg.p = p;
    }
    cfg.n_max = common.n_max;
    cfg.resolve_schedule();
    if let Some(d) = common.depth {
        cfg.depth = d;
    }
    cfg.tol = common.tol;
    cfg.seed = common.seed;
    cfg.format = match common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    cfg.out = common.out.clone();
    match command {
        Command::Examples { which, .. } => {
            cfg.which = match which {
                WhichArg::Spike => Which::Spike,
                WhichArg::BoundedSpike => Which::BoundedSpike,
                WhichArg::Escape => Which::Escape,
                WhichArg::Rademacher => Which::Rademacher,
                WhichArg::All => Which::All,
            }
        }
        Command::Converse { mixture, .. } => {
            cfg.mixture = mixture.map(|m| parse_json("mixture", &m)).transpose()?;
        }
        Command::LpWitness { zeta, .. } => {
            cfg.zeta = zeta.map(|z| parse_json("zeta", &z)).transpose()?;
        }
        Command::Ergodic { operator, g, .. } => {
            cfg.operator = Some(operator);
            cfg.g = g.map(|g| parse_json("g", &g)).transpose()?;
        }
        Command::Alspach { random_pairs, .. } => cfg.random_pairs = random_pairs,
        Command::List => unreachable!(),
    }
    Ok(Some(cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match build_config(cli.command) {
        Ok(Some(cfg)) => cfg,
        Ok(None) => {
            for e in list_experiments() {
                println!("{:<12} [{}] {}", e.id, e.tag, e.description);
            }
            return ExitCode::SUCCESS;
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(exit::USAGE as u8);
        }
    };
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e) as u8);
        }
    };
    if let Err(e) = write_outputs(&cfg, &outcome) {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(exit::IO as u8);
    }
    if outcome.passed() {
        ExitCode::from(exit::OK as u8)
    } else {
        eprintln!("{}", outcome.failures());
        ExitCode::from(exit::CHECKS_FAILED as u8)
    }
}
