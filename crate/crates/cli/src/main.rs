use std::fs::{self, File};
use std::io::BufWriter;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use safe_evop::harness::{
    run_replicates_with_model, tabulate, write_csv, write_json, RunSpec, RunSummary, SummaryTable,
};
use safe_evop::problems::{grid_oracle, PlantCatalog, PlantModel, PolynomialPlant};

/// Safe evolutionary operation: simulate runs, certify optima, serve sessions.
#[derive(Debug, Parser)]
#[command(name = "safe-evop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the optimizer against a simulated plant and export trajectories.
    Run(RunArgs),
    /// Grid-search the noiseless plant for its constrained optimum.
    Oracle(OracleArgs),
    /// List the built-in plants.
    Plants,
    /// Serve the session API over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct PlantArgs {
    /// Built-in plant name.
    #[arg(
        long,
        conflicts_with = "plant_file",
        required_unless_present = "plant_file"
    )]
    plant: Option<String>,
    /// JSON file describing a polynomial plant.
    #[arg(long)]
    plant_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long, default_value_t = 0.05)]
    delta_e: f64,
    #[arg(long, default_value_t = 40)]
    cycles: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicates: u32,
    #[arg(long)]
    anneal: bool,
    /// Disable the Lipschitz back-offs (ablation).
    #[arg(long)]
    no_backoff: bool,
    #[arg(long)]
    auto_shrink: bool,
    /// Also run the opposite annealing setting and pair the replicates by seed.
    #[arg(long)]
    compare_anneal: bool,
    /// Output directory for trajectories and the summary table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long, default_value_t = 1e-3)]
    resolution: f64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "SAFE_EVOP_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "SAFE_EVOP_HOST", default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    host: IpAddr,
    #[arg(long, env = "SAFE_EVOP_STATE_DIR", default_value = "sessions")]
    state_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl From<safe_evop::Error> for CliError {
    fn from(e: safe_evop::Error) -> Self {
        use safe_evop::Error as E;
        match e {
            E::InvalidConfig(_)
            | E::InvalidSpace(_)
            | E::InvalidArgument(_)
            | E::UnknownPlant(_)
            | E::GridTooLarge(_)
            | E::Json(_) => Self::Config(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

fn load_model(args: &PlantArgs) -> Result<Arc<dyn PlantModel>, CliError> {
    match (&args.plant, &args.plant_file) {
        (_, Some(path)) => PolynomialPlant::load(path)
            .map(|p| Arc::new(p) as Arc<dyn PlantModel>)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        (Some(name), None) => Ok(PlantCatalog::builtin().model(name)?),
        (None, None) => Err(CliError::Config(
            "either --plant or --plant-file is required".into(),
        )),
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let model = load_model(&args.plant)?;
    let spec = RunSpec {
        plant: model.name().to_string(),
        delta_e: args.delta_e,
        anneal: args.anneal,
        backoff_enabled: !args.no_backoff,
        auto_shrink: args.auto_shrink,
        max_cycles: args.cycles,
        seed: args.seed,
        replicates: args.replicates,
        noise: None,
    };
    let mut specs = vec![spec.clone()];
    if args.compare_anneal {
        specs.push(RunSpec {
            anneal: !spec.anneal,
            ..spec
        });
    }

    fs::create_dir_all(&args.out)?;
    let mut results = Vec::new();
    for spec in &specs {
        let runs = run_replicates_with_model(model.clone(), spec)?;
        let tag = if spec.anneal { "-anneal" } else { "" };
        for (record, _) in &runs {
            let stem = args
                .out
                .join(format!("{}{tag}-seed{}", spec.plant, record.seed));
            write_csv(
                record,
                BufWriter::new(File::create(stem.with_extension("csv"))?),
            )?;
            write_json(
                record,
                BufWriter::new(File::create(stem.with_extension("json"))?),
            )?;
        }
        results.push(
            runs.into_iter()
                .map(|(_, s)| s)
                .collect::<Vec<RunSummary>>(),
        );
    }

    let table = tabulate(&specs, &results);
    write_summary(&args.out, &table, &results)?;
    for m in &table.medians {
        println!(
            "{}: {} replicates, {} violations in {} runs, median final gap {:.3e}",
            m.label, m.replicates, m.total_violations, m.runs_with_violation, m.median_final_gap
        );
    }
    for p in &table.pairs {
        println!(
            "annealed gap <= fixed gap in {:.0}% of {} pairs",
            100.0 * p.anneal_not_worse,
            p.rows.len()
        );
    }
    Ok(())
}

fn write_summary(
    out: &Path,
    table: &SummaryTable,
    results: &[Vec<RunSummary>],
) -> Result<(), CliError> {
    let runtime = |e: &dyn std::fmt::Display| CliError::Runtime(e.to_string());
    let mut writer = csv::Writer::from_path(out.join("summary.csv")).map_err(|e| runtime(&e))?;
    writer
        .write_record(["label", "seed", "experiments", "violations", "final_gap"])
        .map_err(|e| runtime(&e))?;
    for r in &table.rows {
        writer
            .write_record([
                r.label.clone(),
                r.seed.to_string(),
                r.experiments.to_string(),
                r.violations.to_string(),
                r.final_gap.to_string(),
            ])
            .map_err(|e| runtime(&e))?;
    }
    for m in &table.medians {
        writer
            .write_record([
                m.label.clone(),
                "median".into(),
                String::new(),
                m.median_violations.to_string(),
                m.median_final_gap.to_string(),
            ])
            .map_err(|e| runtime(&e))?;
    }
    writer.flush()?;
    let json = serde_json::json!({ "table": table, "runs": results });
    fs::write(
        out.join("summary.json"),
        serde_json::to_vec_pretty(&json).map_err(|e| runtime(&e))?,
    )?;
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), CliError> {
    let model = load_model(&args.plant)?;
    let result = grid_oracle(model.as_ref(), args.resolution)?;
    let text =
        serde_json::to_string_pretty(&result).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let runtime = tokio::runtime::Runtime::new()?;
    let addr = SocketAddr::new(args.host, args.port);
    runtime
        .block_on(safe_evop_service::serve(addr, args.state_dir))
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Oracle(args) => oracle(args),
        Command::Plants => {
            for name in PlantCatalog::builtin().names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
