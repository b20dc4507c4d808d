//! `lwsim` command-line runner: single runs and parameter sweeps with
//! seeded replications, written to CSV.

use std::io::{IsTerminal as _, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};

use lwsim::metrics::{mean_std, write_results, PointResults};
use lwsim::scenario::KEYS;
use lwsim::sweep::run_sweep_with_progress;
use lwsim::{ConfigError, ScenarioConfig, SimError, SweepSpec};

#[derive(Parser, Debug)]
#[command(
    name = "lwsim",
    version,
    about = "LoRaWAN confirmed-traffic and duty-cycle simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run one scenario or a sweep and write results.csv.
    Run(RunArgs),
    /// List the keys accepted by --set, --sweep and scenario files.
    Keys,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Full-scale profile: 57 days, 15 replications.
    #[arg(long)]
    paper: bool,
    #[arg(long)]
    nodes: Option<String>,
    /// Simulated days.
    #[arg(long)]
    days: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    /// Fraction of fresh uplinks that request an ACK.
    #[arg(long)]
    confirmed: Option<String>,
    /// Downlink data volume as a fraction of fresh uplink volume.
    #[arg(long)]
    downlink: Option<String>,
    #[arg(long)]
    max_attempts: Option<String>,
    /// Lower the data rate every second retransmission.
    #[arg(long)]
    dr_decay: bool,
    /// Mean seconds between a device's fresh uplinks.
    #[arg(long)]
    mean_interval: Option<String>,
    /// Uplink payload in bytes.
    #[arg(long)]
    payload: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Any configuration key, e.g. `--set capture_threshold=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Sweep axis, e.g. `--sweep n_nodes=100,500,1000`. Repeatable; axes
    /// combine as a cartesian product.
    #[arg(long = "sweep", value_name = "KEY=V1,V2,...")]
    sweeps: Vec<String>,
    /// Output directory.
    #[arg(long, env = "LWSIM_OUT", default_value = "results")]
    out: PathBuf,
    /// Concurrent runs; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Also write the transmission log of each point's first replication.
    #[arg(long)]
    log: bool,
    /// No progress output (it is only shown on a terminal anyway).
    #[arg(long, short)]
    quiet: bool,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.into())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn split_pair<'a>(raw: &'a str, flag: &str) -> Result<(&'a str, &'a str), ConfigError> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| ConfigError::value(flag, raw, "expected KEY=VALUE"))
}

fn build_spec(args: &RunArgs) -> Result<SweepSpec, ConfigError> {
    let mut cfg = if args.paper {
        ScenarioConfig::default()
    } else {
        ScenarioConfig::desk()
    };
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    let flags = [
        ("n_nodes", &args.nodes),
        ("sim_days", &args.days),
        ("replications", &args.replications),
        ("confirmed_fraction", &args.confirmed),
        ("downlink_fraction", &args.downlink),
        ("max_attempts", &args.max_attempts),
        ("mean_send_interval", &args.mean_interval),
        ("payload_len", &args.payload),
        ("seed", &args.seed),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if args.dr_decay {
        cfg.set("dr_decay", "true")?;
    }
    for raw in &args.sets {
        let (k, v) = split_pair(raw, "--set")?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;

    let mut spec = SweepSpec::single(cfg);
    for raw in &args.sweeps {
        let (k, vs) = split_pair(raw, "--sweep")?;
        let values: Vec<&str> = vs
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(ConfigError::value(k, vs, "sweep axis has no values"));
        }
        spec = spec.axis(k, &values);
    }
    spec.points()?;
    Ok(spec)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

fn print_summary(points: &[PointResults]) {
    let label = |p: &PointResults| {
        if p.params.is_empty() {
            "base".to_string()
        } else {
            p.params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ")
        }
    };
    let width = points
        .iter()
        .map(|p| label(p).len())
        .max()
        .unwrap_or(4)
        .max(5);
    println!(
        "{:<width$}  {:>4}  {:>8}  {:>8}  {:>8}  {:>8}  {:>10}",
        "point", "reps", "goodput", "dl_ratio", "ack@1", "ack@max", "energy_mJ"
    );
    for p in points {
        let col = |f: &dyn Fn(&lwsim::metrics::MetricsLedger) -> Option<f64>| {
            mean_std(&p.runs.iter().map(|(_, _, l)| f(l)).collect::<Vec<_>>()).0
        };
        println!(
            "{:<width$}  {:>4}  {:>8}  {:>8}  {:>8}  {:>8}  {:>10}",
            label(p),
            p.runs.len(),
            fmt_opt(col(&|l| l.goodput().ok()), 4),
            fmt_opt(col(&|l| l.downlink_delivery_ratio().ok()), 4),
            fmt_opt(col(&|l| l.ack_cdf_by_attempt().ok().map(|c| c[0])), 4),
            fmt_opt(
                col(&|l| l.ack_cdf_by_attempt().ok().and_then(|c| c.last().copied())),
                4
            ),
            fmt_opt(col(&|l| Some(l.mean_energy_mj())), 1),
        );
    }
}

fn write_logs(spec: &SweepSpec, out: &Path) -> anyhow::Result<()> {
    for (i, (_, cfg)) in spec.points()?.into_iter().enumerate() {
        let run = lwsim::run(&cfg)?;
        let path = out.join(format!("log_point{i}.txt"));
        run.log
            .write_text(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn execute(args: RunArgs) -> Result<(), Failure> {
    let spec = build_spec(&args)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))
        .map_err(Failure::Runtime)?;

    let quiet = args.quiet || !std::io::stderr().is_terminal();
    let progress = move |done: usize, total: usize| {
        if !quiet {
            eprint!("\r{done}/{total} runs");
            if done == total {
                eprintln!();
            }
            let _ = std::io::stderr().flush();
        }
    };
    let points = run_sweep_with_progress(&spec, args.parallel, &progress)?;

    let csv = args.out.join("results.csv");
    write_results(&points, &csv)
        .with_context(|| format!("writing {}", csv.display()))
        .map_err(Failure::Runtime)?;
    if args.log {
        write_logs(&spec, &args.out).map_err(Failure::Runtime)?;
    }
    print_summary(&points);
    println!("results written to {}", csv.display());
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
    match cli.command {
        Command::Keys => {
            for key in KEYS {
                println!("{key}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match execute(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(Failure::Config(e)) => {
                eprintln!("configuration error: {e:#}");
                ExitCode::from(1)
            }
            Err(Failure::Runtime(e)) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
