use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uw_secrecy::config::{load_config, ConfigError, EvalMode, SystemConfig};
use uw_secrecy::experiment::{
    build_scheme, evaluate_schemes, load_policy_table, run_sweep, solve_and_export, write_csv, EvalOptions,
    ExperimentError, ResultRow, SweepSpec,
};
use uw_secrecy::mdp::RelayMdp;
use uw_secrecy::policies::SchemeKind;
use uw_secrecy::sim::Simulator;

#[derive(Parser)]
#[command(name = "uwsec", version, about = "Secure relay power allocation for underwater EH relay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Planning phase: solve the MDP and write the policy lookup table.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Transmission phase: Monte Carlo evaluation of one or all schemes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        eval: EvalFlags,
        /// Policy table from `solve`; solved in-process when absent.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Write per-slot traces of the first episodes as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        trace_episodes: u64,
    },
    /// Parameter sweep over a bundled or custom grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        eval: EvalFlags,
        /// Sweep specification file.
        #[arg(long, conflicts_with = "preset")]
        sweep: Option<PathBuf>,
        /// Bundled sweep: discount, harvest or capacity.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Load and validate a configuration.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML); the bundled reference setup when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long, value_enum, default_value_t = SchemeArg::All)]
    scheme: SchemeArg,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Use the end-to-end rate with sampled optical SNR.
    #[arg(long)]
    exact: bool,
    /// Worker threads for episode evaluation.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Opa,
    Ga,
    Na,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Discounted,
    Lifetime,
}

impl SchemeArg {
    fn kinds(self) -> Vec<SchemeKind> {
        match self {
            SchemeArg::Opa => vec![SchemeKind::Opa],
            SchemeArg::Ga => vec![SchemeKind::Ga],
            SchemeArg::Na => vec![SchemeKind::Na],
            SchemeArg::All => SchemeKind::ALL.to_vec(),
        }
    }
}

impl EvalFlags {
    fn options(&self, config: &SystemConfig) -> EvalOptions {
        let mut o = EvalOptions::from_config(config);
        if let Some(seed) = self.seed {
            o.seed = seed;
        }
        if let Some(episodes) = self.episodes {
            o.episodes = episodes;
        }
        if let Some(mode) = self.mode {
            o.mode = match mode {
                ModeArg::Discounted => EvalMode::Discounted,
                ModeArg::Lifetime => EvalMode::Lifetime,
            };
        }
        o.exact |= self.exact;
        o.threads = self.threads;
        o
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(common: &Common) -> Result<SystemConfig, ExperimentError> {
    Ok(match &common.config {
        Some(path) => load_config(path)?,
        None => SystemConfig::reference(),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, ExperimentError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| ExperimentError::Io { path: p.to_path_buf(), source })?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Validate { common } => {
            let config = load(&common)?;
            let scenario = config.scenario()?;
            let n_states = scenario.chain_rd.len() * scenario.chain_re.len() * scenario.battery.levels();
            println!("ok: {n_states} states, {} actions", scenario.power.len());
            Ok(())
        }
        Command::Solve { common } => {
            let config = load(&common)?;
            match &common.out {
                Some(path) => {
                    let report = solve_and_export(&config, path)?;
                    eprintln!(
                        "solved in {:.3} s: {} improvement passes, {} evaluation sweeps",
                        report.wall_time_seconds,
                        report.table.metadata.improvement_passes,
                        report.table.metadata.evaluation_sweeps
                    );
                }
                None => {
                    let scenario = config.scenario()?;
                    let (mdp, out) = uw_secrecy::experiment::solve(&scenario)?;
                    let table = uw_secrecy::mdp::PolicyTable::from_solution(
                        &mdp,
                        &out.policy,
                        &out.value,
                        scenario.epsilon,
                        &out.stats,
                    );
                    print!("{}", table.to_text());
                }
            }
            Ok(())
        }
        Command::Eval { common, eval, policy, trace, trace_episodes } => {
            let config = load(&common)?;
            let options = eval.options(&config);
            let table = policy.as_deref().map(load_policy_table).transpose()?;
            let kinds = eval.scheme.kinds();
            let results = evaluate_schemes(&config, &kinds, &options, table.as_ref())?;
            if let Some(trace_path) = trace {
                write_traces(&config, &kinds, &options, table.as_ref(), &trace_path, trace_episodes)?;
            }
            let rows: Vec<ResultRow> = results
                .into_iter()
                .map(|(scheme, result)| ResultRow { scheme, params: vec![], result, seed: options.seed })
                .collect();
            write_csv(output(common.out.as_deref())?, &[], &rows)?;
            Ok(())
        }
        Command::Sweep { common, eval, sweep, preset } => {
            let config = load(&common)?;
            let spec = match (sweep, preset) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                    SweepSpec::from_toml_str(&text)?
                }
                (None, Some(name)) => SweepSpec::preset(&name).ok_or_else(|| ConfigError::Invalid {
                    path: "--preset".into(),
                    message: format!("unknown preset `{name}`"),
                })?,
                (None, None) => {
                    return Err(ConfigError::Invalid {
                        path: "--sweep".into(),
                        message: "either --sweep or --preset is required".into(),
                    }
                    .into())
                }
            };
            let options = eval.options(&config);
            let outcome = run_sweep(&config, &spec, &eval.scheme.kinds(), &options);
            write_csv(output(common.out.as_deref())?, &outcome.columns, &outcome.rows)?;
            if outcome.failures.is_empty() {
                Ok(())
            } else {
                Err(ExperimentError::SweepFailures {
                    failed: outcome.failures.len(),
                    total: spec.points().len(),
                })
            }
        }
    }
}

fn write_traces(
    config: &SystemConfig,
    kinds: &[SchemeKind],
    options: &EvalOptions,
    table: Option<&uw_secrecy::mdp::PolicyTable>,
    path: &Path,
    episodes: u64,
) -> Result<(), ExperimentError> {
    let scenario = config.scenario()?;
    let mdp = RelayMdp::build(&scenario)?;
    let sim = Simulator::new(&mdp, &scenario, options.mode).exact(options.exact);
    let io_err = |source| ExperimentError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for &kind in kinds {
        let scheme = build_scheme(kind, &mdp, scenario.epsilon, table)?;
        for e in 0..episodes.min(options.episodes) {
            let trace = sim.trace_episode(&scheme, options.seed, e);
            let mut line = serde_json::json!({ "scheme": kind.as_str() });
            line.as_object_mut()
                .expect("object")
                .extend(serde_json::to_value(&trace).expect("trace serializes").as_object().expect("object").clone());
            writeln!(w, "{line}").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}
