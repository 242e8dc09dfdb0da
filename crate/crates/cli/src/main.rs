mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;
use synergy_decomp::data::{load_csv, write_csv};
use synergy_decomp::decomposition::estimate_initial_disparity;
use synergy_decomp::inference::{bootstrap, records_csv};
use synergy_decomp::pipeline::estimate;
use synergy_decomp::sim::{generate_dgp, run_simulation, true_value_oracle, SimulationConfig};
use synergy_decomp::Error;

use config::{AnalyzeConfig, GenerateConfig, OracleConfig};

#[derive(Parser)]
#[command(name = "synergy-decomp", version, about = "Disparity reduction under joint interventions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for replicates and bootstrap draws.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose disparities in a CSV data set.
    Analyze(Common),
    /// Run a simulation grid.
    Simulate(Common),
    /// Monte Carlo truth for the simulation population.
    Oracle(Common),
    /// Write a synthetic data set.
    Generate(Common),
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
    diagnostics: Option<serde_json::Value>,
}

impl Failure {
    fn schema(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
            diagnostics: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Schema(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
            e if e.is_data_error() => 3,
            _ => 4,
        };
        let diagnostics = (code == 4).then(|| json!({ "error": e.to_string() }));
        Self {
            code,
            message: e.to_string(),
            diagnostics,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::schema(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::schema(format!("config {}: {e}", path.display())))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)? + "\n";
    fs::write(path, text).map_err(|e| Failure::from(Error::from(e)))
}

fn make_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::schema(format!("cannot create output directory {}: {e}", dir.display())))
}

fn analyze(c: &Common) -> CmdResult {
    let cfg: AnalyzeConfig = read_config(&c.config)?;
    cfg.roles.validate_structure()?;
    let est_cfg = cfg.estimation();
    est_cfg.validate(&cfg.roles)?;
    if let Some(b) = &cfg.bootstrap {
        if b.clustered && cfg.roles.cluster.is_none() {
            return Err(Failure::schema("bootstrap.clustered is set but roles.cluster names no cluster column"));
        }
        if b.b < 2 {
            return Err(Failure::schema("bootstrap.b must be at least 2"));
        }
    }
    make_out(&c.out)?;
    let data_path = match c.config.parent() {
        Some(p) if cfg.data.is_relative() => p.join(&cfg.data),
        _ => cfg.data.clone(),
    };
    let (ds, load_report) = load_csv(&data_path, &cfg.roles, cfg.missing)?;
    cfg.roles.validate(&ds)?;
    let initial = estimate_initial_disparity(&ds, &cfg.roles, cfg.covariate_eval)?;
    let run = || match &cfg.bootstrap {
        Some(b) => bootstrap(&ds, &cfg.roles, &est_cfg, b, cfg.seed).map(|(e, r)| (e, Some(r))),
        None => estimate(&ds, &cfg.roles, &est_cfg, cfg.seed).map(|e| (e, None)),
    };
    let (point, inference) = match run() {
        Ok(v) => v,
        Err(e) => {
            let f = Failure::from(e);
            if f.code == 4 {
                write_json(
                    &c.out.join("diagnostics.json"),
                    &json!({ "error": f.message, "stage": "estimation", "load_report": load_report }),
                )?;
            }
            return Err(f);
        }
    };
    let report = json!({
        "load_report": load_report,
        "initial_disparity": initial,
        "estimates": point.records,
        "nuisance": point.summary,
        "inference": inference,
        "config": cfg,
    });
    write_json(&c.out.join("report.json"), &report)?;
    fs::write(c.out.join("report.csv"), records_csv(&point.records, inference.as_ref())?).map_err(Error::from)?;
    for r in &point.records {
        println!(
            "{} {:<16} tau={:.4} delta={:.4} zeta={:.4}",
            r.group,
            r.estimator.as_str(),
            r.tau,
            r.delta,
            r.zeta
        );
    }
    Ok(())
}

fn simulate(c: &Common) -> CmdResult {
    let cfg: SimulationConfig = read_config(&c.config)?;
    cfg.validate()?;
    make_out(&c.out)?;
    let out = run_simulation(&cfg)?;
    out.write(&c.out)?;
    print!("{}", out.metrics_csv());
    Ok(())
}

fn oracle(c: &Common) -> CmdResult {
    let cfg: OracleConfig = read_config(&c.config)?;
    if cfg.n == 0 {
        return Err(Failure::schema("n must be positive"));
    }
    make_out(&c.out)?;
    let res = true_value_oracle(cfg.n, cfg.seed, cfg.null_intervention);
    let chosen = match (cfg.convention, cfg.covariate_eval) {
        (None, None) => res.matched().clone(),
        (conv, eval) => {
            let m = res.matched();
            res.cell(conv.unwrap_or(m.convention), eval.unwrap_or(m.eval)).clone()
        }
    };
    write_json(&c.out.join("oracle.json"), &json!({ "selected": chosen, "result": res }))?;
    println!(
        "delta_true={:.6} (MC SE {:.6}) psi_true={:.6} tau_true={:.6} convention={} eval={}",
        chosen.delta_true,
        chosen.se_delta,
        chosen.psi_true,
        chosen.tau_true,
        serde_json::to_value(chosen.convention).map_err(Error::from)?,
        serde_json::to_value(chosen.eval).map_err(Error::from)?
    );
    Ok(())
}

fn generate(c: &Common) -> CmdResult {
    let cfg: GenerateConfig = read_config(&c.config)?;
    if cfg.n == 0 {
        return Err(Failure::schema("n must be positive"));
    }
    make_out(&c.out)?;
    let (ds, roles) = generate_dgp(cfg.n, cfg.seed, cfg.convention)?;
    let path = c.out.join(cfg.out.clone().unwrap_or_else(|| PathBuf::from("data.csv")));
    write_csv(&ds, &path)?;
    write_json(&c.out.join("roles.json"), &roles)?;
    println!("wrote {} rows to {}", ds.n_rows(), path.display());
    Ok(())
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Analyze(c) | Command::Simulate(c) | Command::Oracle(c) | Command::Generate(c) => c,
        }
    }
}

fn execute(command: &Command) -> CmdResult {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = command.common().jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| Failure {
        code: 4,
        message: format!("cannot start worker pool: {e}"),
        diagnostics: None,
    })?;
    pool.install(|| match command {
        Command::Analyze(c) => analyze(c),
        Command::Simulate(c) => simulate(c),
        Command::Oracle(c) => oracle(c),
        Command::Generate(c) => generate(c),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            if let Some(d) = f.diagnostics {
                let out = &cli.command.common().out;
                let path = out.join("diagnostics.json");
                if !path.exists() {
                    let _ = fs::create_dir_all(out);
                    let _ = fs::write(&path, serde_json::to_string_pretty(&d).unwrap_or_default() + "\n");
                }
            }
            ExitCode::from(f.code)
        }
    }
}
