//! tsrvlab: simulate contaminated high-frequency prices, compute the two
//! scales realized volatility, and run the bundled experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tsrvlab_cli::config::{parse_config, serialize_config, KeyValues};
use tsrvlab_cli::report::write_report;
use tsrvlab_cli::ticks::ingest_ticks;
use tsrvlab_cli::{CliError, CliResult};
use tsrvlab_core::contaminate::{contaminate_series, ContaminationKernel};
use tsrvlab_core::estimators::{select_k, tsrv};
use tsrvlab_core::experiments::{run_experiment, ExperimentKind};
use tsrvlab_core::simulate::{generate_master_path, ProcessModel, SamplingGrid};

#[derive(Parser)]
#[command(name = "tsrvlab", version, about = "TSRV simulation and estimation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Simulate a latent price path, optionally contaminate it, and write a
    /// timestamp,price CSV
    Simulate(SimulateArgs),
    /// Compute the two scales realized volatility of a tick CSV
    Tsrv(TsrvArgs),
    /// Validate a tick CSV and report its shape
    Ingest(IngestArgs),
    /// Run one of the bundled experiments and write its report
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Observation intervals
    #[arg(long, default_value_t = 23_400)]
    n: usize,
    /// Horizon in years
    #[arg(long, default_value_t = 1.0 / 252.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    /// Initial log price
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, default_value_t = tsrvlab_core::experiments::DEFAULT_SEED)]
    seed: u64,
    /// RNG stream index
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Master grid refinement
    #[arg(long, default_value_t = 1)]
    refine: usize,
    /// Contamination: none | additive | round | noise_round
    #[arg(long, default_value = "none")]
    kernel: String,
    #[arg(long, default_value_t = 0.0005)]
    gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
}

#[derive(Args)]
struct TsrvArgs {
    /// Input timestamp,price CSV
    #[arg(long)]
    input: PathBuf,
    /// Subgrid count K; defaults to round(c n^(2/3))
    #[arg(long)]
    k: Option<usize>,
    /// K-selection constant
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Also report the small-sample rescaled value
    #[arg(long)]
    adjust: bool,
    /// Horizon in years the series spans (echoed into the report)
    #[arg(long, default_value_t = 1.0 / 252.0)]
    horizon: f64,
    /// Instrument label; defaults to the file stem
    #[arg(long)]
    instrument: Option<String>,
    /// Write the JSON summary here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0 / 252.0)]
    horizon: f64,
    #[arg(long)]
    instrument: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// thm1 | thm2 | thm3 | fig2 | fig3 | eq29
    kind: String,
    /// Flat key-value config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit with code 4 when any pass criterion fails
    #[arg(long)]
    check: bool,
    /// Suppress the wall-clock timestamp in report metadata
    #[arg(long)]
    no_timestamps: bool,
    /// Print the fully resolved config and exit without running
    #[arg(long)]
    show_config: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    refine: Option<String>,
    /// Comma-separated gamma sweep
    #[arg(long)]
    gamma_sweep: Option<String>,
    /// Comma-separated nested n chain
    #[arg(long)]
    n_sweep: Option<String>,
    #[arg(long)]
    fig3_draws: Option<usize>,
    /// Report path prefix directory
    #[arg(long)]
    out: Option<String>,
}

#[derive(Serialize)]
struct TsrvDocument {
    schema: &'static str,
    instrument: String,
    n: usize,
    horizon: f64,
    k: usize,
    n_bar: f64,
    rv_all: f64,
    rv_avg: f64,
    tsrv: f64,
    adjusted: Option<f64>,
}

#[derive(Serialize)]
struct IngestDocument {
    schema: &'static str,
    instrument: String,
    rows: usize,
    n: usize,
    horizon: f64,
    first_price: f64,
    last_price: f64,
}

fn init_threads() {
    if let Ok(v) = std::env::var("TSRVLAB_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn emit_json<T: Serialize>(doc: &T, out: Option<&PathBuf>) -> CliResult<()> {
    let json = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Data(format!("serialization failed: {e}")))?;
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)
                        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
                }
            }
            std::fs::write(path, json.as_bytes())
                .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> CliResult<()> {
    let model = ProcessModel::constant(args.mu, args.sigma, args.x0)?;
    let grid = SamplingGrid::new(args.n, args.horizon)?;
    let path = generate_master_path(&model, grid, args.refine.max(1), args.seed, args.stream)?;
    let latent = path.observation_values();

    let observed: Vec<f64> = match args.kernel.as_str() {
        "none" => latent,
        name => {
            let kernel = match name {
                "additive" => ContaminationKernel::additive(args.gamma)?,
                "round" => ContaminationKernel::pure_rounding(args.alpha)?,
                "noise_round" => ContaminationKernel::noise_then_round(args.gamma, args.alpha)?,
                other => {
                    return Err(CliError::Config(format!(
                        "kernel: unknown value '{other}' (expected none|additive|round|noise_round)"
                    )))
                }
            };
            let series = contaminate_series(
                &kernel,
                &latent,
                args.seed,
                tsrvlab_core::experiments::NOISE_STREAM_OFFSET + args.stream,
            )?;
            series.y().to_vec()
        }
    };

    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    let mut text = String::with_capacity(observed.len() * 24);
    text.push_str("timestamp,price\n");
    for (i, y) in observed.iter().enumerate() {
        // shortest round-trip representation keeps tick multiples exact
        text.push_str(&format!("{i},{}\n", y.exp()));
    }
    std::fs::write(&args.out, text.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", args.out.display())))?;
    eprintln!("wrote {} rows to {}", observed.len(), args.out.display());
    Ok(())
}

fn run_tsrv(args: &TsrvArgs) -> CliResult<()> {
    let series = ingest_ticks(&args.input, args.instrument.as_deref())?;
    let logs = series.log_prices();
    let n = series.n();
    let k = match args.k {
        Some(k) => k,
        None => select_k(n, args.c)?,
    };
    let result = tsrv(&logs, k, args.adjust)?;
    let doc = TsrvDocument {
        schema: "tsrvlab.tsrv.v1",
        instrument: series.instrument.clone(),
        n,
        horizon: args.horizon,
        k: result.k,
        n_bar: result.n_bar,
        rv_all: result.rv_all,
        rv_avg: result.rv_avg,
        tsrv: result.tsrv,
        adjusted: result.adjusted,
    };
    emit_json(&doc, args.out.as_ref())
}

fn run_ingest(args: &IngestArgs) -> CliResult<()> {
    let series = ingest_ticks(&args.input, args.instrument.as_deref())?;
    let doc = IngestDocument {
        schema: "tsrvlab.ticks.v1",
        instrument: series.instrument.clone(),
        rows: series.prices.len(),
        n: series.n(),
        horizon: args.horizon,
        first_price: series.prices[0],
        last_price: *series.prices.last().unwrap(),
    };
    emit_json(&doc, args.out.as_ref())
}

fn flags_from(args: &ExperimentArgs) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.set("experiment", args.kind.clone());
    macro_rules! setopt {
        ($field:ident) => {
            if let Some(v) = &args.$field {
                kv.set(stringify!($field), v.to_string());
            }
        };
    }
    setopt!(seed);
    setopt!(n);
    setopt!(mu);
    setopt!(sigma);
    setopt!(x0);
    setopt!(horizon);
    setopt!(kernel);
    setopt!(gamma);
    setopt!(alpha);
    setopt!(c);
    setopt!(k);
    setopt!(replications);
    setopt!(refine);
    setopt!(gamma_sweep);
    setopt!(n_sweep);
    setopt!(fig3_draws);
    setopt!(out);
    if args.no_timestamps {
        kv.set("timestamps", "false");
    }
    kv
}

/// Ok(true) = all criteria passed, Ok(false) = some failed.
fn run_experiment_cmd(args: &ExperimentArgs) -> CliResult<bool> {
    ExperimentKind::parse(&args.kind)?;
    let file = match &args.config {
        Some(path) => Some(KeyValues::read_file(path)?),
        None => None,
    };
    let flags = flags_from(args);
    let cfg = parse_config(file.as_ref(), &flags)?;

    if args.show_config {
        print!("{}", serialize_config(&cfg));
        return Ok(true);
    }

    let report = run_experiment(&cfg)?;
    let timestamp = if cfg.timestamps {
        Some(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        )
    } else {
        None
    };
    let prefix = PathBuf::from(&cfg.out).join(cfg.experiment.name());
    let (csv_path, json_path) = write_report(&report, &prefix, timestamp)?;

    // the local-time sweeps also emit the profile their limits came from
    if matches!(cfg.experiment, ExperimentKind::Thm2 | ExperimentKind::Thm3) {
        let profile = tsrvlab_core::experiments::local_time_profile_for(&cfg)?;
        let profile_path = PathBuf::from(&cfg.out)
            .join(format!("{}_profile.csv", cfg.experiment.name()));
        std::fs::write(&profile_path, profile.csv())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", profile_path.display())))?;
    }

    for c in &report.summary.criteria {
        println!(
            "{}: {} (value {:.6e}, {})",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.value,
            c.threshold
        );
    }
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let outcome: CliResult<bool> = match &cli.command {
        Command::Simulate(args) => run_simulate(args).map(|()| true),
        Command::Tsrv(args) => run_tsrv(args).map(|()| true),
        Command::Ingest(args) => run_ingest(args).map(|()| true),
        Command::Experiment(args) => run_experiment_cmd(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            let check = matches!(&cli.command, Command::Experiment(a) if a.check);
            if check {
                eprintln!("acceptance criteria failed");
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Data(_) => ExitCode::from(3),
            }
        }
    }
}
