use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use pfsa_swarm::par::Exec;
use pfsa_swarm::pfsa::io::read_pfsa_file;
use pfsa_swarm::scenario::compare::resolve_theta;
use pfsa_swarm::scenario::run::write_json;
use pfsa_swarm::scenario::{
    compare, library_scenario, load_scenario, oracle, render_compare, render_oracle, run_scenario,
    run_sweep, Mode, RunOptions, ScenarioConfig, SweepAxis, DEFAULT_REPS,
};
use pfsa_swarm::supervisor::UTOPIAN_THETA;
use pfsa_swarm::Error;

#[derive(Parser)]
#[command(
    name = "pfsa-swarm",
    version,
    about = "PFSA language-measure route planning for swarms"
)]
struct Cli {
    /// Run every computation on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize routes on the initial, frozen swarm.
    FrozenOpt(ScenarioArgs),
    /// Simulate the real process: a fixed number of update epochs per tick.
    MobileSim(ScenarioArgs),
    /// Simulate the ideal process: fully converged routes every tick.
    IdealSim(ScenarioArgs),
    /// Repeat a scenario across values of one parameter.
    Sweep(SweepArgs),
    /// Compare distributed, centralized, brute-force and policy-iteration solutions.
    Compare(PfsaArgs),
    /// Brute-force optimum of a serialized PFSA.
    Oracle(PfsaArgs),
}

#[derive(Args)]
struct Source {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario: baseline, void, two-targets, extended-targets, obstacle, sharers.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Use this theta instead of deriving it from epsilon.
    #[arg(long)]
    theta: Option<f64>,
}

impl Source {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), _) => load_scenario(path)?,
            (None, Some(name)) => library_scenario(name)?,
            (None, None) => {
                return Err(Error::Config {
                    key: "--config".into(),
                    msg: "either --config or --scenario is required".into(),
                })
            }
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if self.theta.is_some() {
            cfg.theta_override = self.theta;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the initial network as a PFSA file.
    #[arg(long)]
    pfsa_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    /// One of n_agents, epsilon, v_s, r_c.
    #[arg(long)]
    axis: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Override the mode of the base scenario: frozen, real or ideal.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct PfsaArgs {
    /// PFSA file.
    #[arg(long)]
    pfsa: PathBuf,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Directory for the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, Error> {
    match s {
        "frozen" => Ok(Mode::Frozen),
        "real" => Ok(Mode::Real),
        "ideal" => Ok(Mode::Ideal),
        _ => Err(Error::Config {
            key: "--mode".into(),
            msg: format!("`{s}` is not one of frozen, real, ideal"),
        }),
    }
}

fn simulate(args: &ScenarioArgs, mode: Mode, exec: Exec) -> Result<(), Error> {
    let mut cfg = args.source.load()?;
    cfg.mode = mode;
    let opts = RunOptions {
        exec,
        pfsa_out: args.pfsa_out.clone(),
    };
    let out = run_scenario(&cfg, &args.out, &opts)?;
    let s = &out.summary;
    match (&s.frozen, s.t_conv) {
        (Some(f), _) => println!(
            "epochs {} | policy size {} | rho mean {:.6} min {:.6} | theta {:e}",
            f.epochs, f.policy_size, f.rho_mean, f.rho_min, s.theta
        ),
        (None, Some(t)) => println!(
            "T_conv {t} s | final fraction {} | theta {:e}",
            s.final_fraction, s.theta
        ),
        (None, None) => println!(
            "not converged | final fraction {} | theta {:e}",
            s.final_fraction, s.theta
        ),
    }
    if s.invariant_violations > 0 {
        error!("{} invariant violations", s.invariant_violations);
    }
    info!("outputs in {}", args.out.display());
    Ok(())
}

fn sweep(args: &SweepArgs, exec: Exec) -> Result<(), Error> {
    let mut cfg = args.source.load()?;
    if let Some(m) = &args.mode {
        cfg.mode = parse_mode(m)?;
    }
    let axis: SweepAxis = args.axis.parse()?;
    let res = run_sweep(&cfg, axis, &args.values, args.reps, &args.out, exec)?;
    for a in &res.aggregates {
        let mean = |s: Option<pfsa_swarm::scenario::sweep::Stat>| {
            s.map(|s| s.mean.to_string()).unwrap_or("-".into())
        };
        println!(
            "{axis} = {}: epochs {} | T_conv {} | v_s*T_conv {} | r_c/T_conv {}",
            a.value,
            mean(a.epochs),
            mean(a.t_conv),
            mean(a.vs_tconv),
            mean(a.rc_tconv)
        );
    }
    Ok(())
}

fn write_report<T: serde::Serialize>(
    out: &Option<PathBuf>,
    name: &str,
    value: &T,
) -> Result<(), Error> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        write_json(&Path::new(dir).join(name), value)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match &cli.command {
        Command::FrozenOpt(a) => simulate(a, Mode::Frozen, exec),
        Command::MobileSim(a) => simulate(a, Mode::Real, exec),
        Command::IdealSim(a) => simulate(a, Mode::Ideal, exec),
        Command::Sweep(a) => sweep(a, exec),
        Command::Compare(a) => {
            let doc = read_pfsa_file(&a.pfsa)?;
            let theta = resolve_theta(&doc.pfsa, a.theta, a.epsilon)?;
            let report = compare(&doc, theta, a.epsilon, exec)?;
            print!("{}", render_compare(&report));
            write_report(&a.out, "compare.json", &report)
        }
        Command::Oracle(a) => {
            let doc = read_pfsa_file(&a.pfsa)?;
            let theta = match (a.theta, a.epsilon) {
                (None, None) => UTOPIAN_THETA,
                (t, e) => resolve_theta(&doc.pfsa, t, e)?,
            };
            let report = oracle(&doc.pfsa, theta, exec)?;
            print!("{}", render_oracle(&report));
            write_report(&a.out, "oracle.json", &report)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
