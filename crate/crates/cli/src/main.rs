//! `subnet-outlier`: detect, explain, evaluate, and generate.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map};

use subnet_outlier::eval::{evaluate_report, write_metrics, write_roc_csv, DEFAULT_TOP_K, METRICS_FILE, ROC_FILE};
use subnet_outlier::report::{explanation_json, explanation_text, report_json, to_stable_string, ReportView};
use subnet_outlier::synth::TRUTH_FILE;
use subnet_outlier::{
    detect_all, detect_sample, generate_synthetic, load_database, write_synthetic, Error, Grid, GroundTruth,
    NetworkDatabase, SolverOptions, SynthConfig, Topology, DEFAULT_LAMBDA2,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser)]
#[command(name = "subnet-outlier", version, about = "Outlier detection with explanatory subnetworks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every sample and write the report JSON.
    Detect {
        #[command(flatten)]
        run: RunArgs,
        /// Report path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print one sample's explanation.
    Explain {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        sample: String,
        /// Also write the JSON form to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a report with ground truth; writes roc.csv and metrics.json.
    Eval {
        /// Report JSON written by `detect`.
        #[arg(long)]
        report: PathBuf,
        /// Truth JSON; defaults to truth.json inside --db.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Database directory holding truth.json.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
    },
    /// Write a synthetic database with planted subnetworks.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Database directory.
    #[arg(long)]
    db: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,15,20,25,30")]
    k_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,2.5,5,10")]
    lambda1_list: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA2)]
    lambda2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the per-sample evaluation.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Include per-configuration solver traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct GenArgs {
    /// Output database directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long, default_value_t = 120)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    outliers: usize,
    #[arg(long, default_value_t = 3.0)]
    signal: f64,
    #[arg(long, default_value_t = 10)]
    planted_size: usize,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long)]
    two_sided: bool,
    /// Ring-lattice neighbors per side.
    #[arg(long, default_value_t = 2)]
    ring_neighbors: usize,
    #[arg(long, default_value_t = 0.1)]
    rewire: f64,
    /// Use a ROWSxCOLS grid instead of the ring lattice.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Numerical { .. } | Error::Internal(_) => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn open_db(path: &Path) -> Result<NetworkDatabase, Failure> {
    if !path.is_dir() {
        return Err(Failure::Core(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("database directory {} not found", path.display()),
        ))));
    }
    Ok(load_database(path)?.impute_missing())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Core(Error::Internal(e.to_string())))
}

impl RunArgs {
    fn grid(&self) -> Grid {
        Grid {
            k_list: self.k_list.clone(),
            lambda1_list: self.lambda1_list.clone(),
        }
    }
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn detect(run: &RunArgs, out: &Path) -> Result<(), Failure> {
    let db = open_db(&run.db)?;
    let opts = SolverOptions::default();
    let report = pool(run.jobs)?.install(|| detect_all(&db, &run.grid(), run.lambda2, run.seed, &opts))?;
    let mut provenance = Map::new();
    provenance.insert("db".into(), json!(run.db.display().to_string()));
    provenance.insert("trace".into(), json!(run.trace));
    let doc = report_json(&report, provenance, run.trace);
    write_output(out, &to_stable_string(&doc))?;

    let failures = report.failure_count();
    if failures > 0 {
        eprintln!(
            "{failures} (sample, configuration) runs hit a numerical failure and were scored with the full-space fallback"
        );
        return Err(Failure::Core(Error::Numerical {
            message: format!("{failures} solver failures recorded in the report"),
            trace: Vec::new(),
        }));
    }
    Ok(())
}

fn explain(run: &RunArgs, sample: &str, out: Option<&Path>) -> Result<(), Failure> {
    let db = open_db(&run.db)?;
    let opts = SolverOptions::default();
    let record = pool(run.jobs)?.install(|| detect_sample(&db, sample, &run.grid(), run.lambda2, run.seed, &opts))?;
    let doc = explanation_json(&record, db.node_ids(), run.trace);
    print!("{}", explanation_text(&record, db.node_ids()));
    println!();
    print!("{}", to_stable_string(&doc));
    if let Some(path) = out {
        write_output(path, &to_stable_string(&doc))?;
    }
    Ok(())
}

fn eval(report: &Path, truth: Option<&Path>, db: Option<&Path>, out: &Path, top_k: usize) -> Result<(), Failure> {
    let truth_path = match (truth, db) {
        (Some(t), _) => t.to_path_buf(),
        (None, Some(d)) => d.join(TRUTH_FILE),
        (None, None) => return Err(Failure::Usage("eval needs --truth or --db".into())),
    };
    let view = ReportView::read(report)?;
    let truth = GroundTruth::read(&truth_path)?;
    let (roc, metrics) = evaluate_report(&view, &truth, top_k)?;
    fs::create_dir_all(out)?;
    write_roc_csv(&roc, out.join(ROC_FILE))?;
    write_metrics(&metrics, out.join(METRICS_FILE))?;
    println!(
        "AUC {:.4}; top-{top_k} recovery F1: subnetwork {:.4}, all selected {:.4}",
        metrics.auc, metrics.top_k_subnetwork_f1, metrics.top_k_selected_f1
    );
    Ok(())
}

fn parse_grid(spec: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("--grid expects ROWSxCOLS, got '{spec}'"));
    let (r, c) = spec.split_once('x').ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

fn gen(args: &GenArgs) -> Result<(), Failure> {
    let topology = match &args.grid {
        Some(spec) => {
            let (rows, cols) = parse_grid(spec)?;
            Topology::Grid { rows, cols }
        }
        None => Topology::RingLattice {
            neighbors: args.ring_neighbors,
            rewire: args.rewire,
        },
    };
    let cfg = SynthConfig {
        n_nodes: args.nodes,
        n_samples: args.samples,
        n_outliers: args.outliers,
        topology,
        signal_strength: args.signal,
        planted_size: args.planted_size,
        heterogeneity: args.clusters,
        two_sided: args.two_sided,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let (db, truth) = generate_synthetic(&cfg)?;
    write_synthetic(&db, &truth, &args.out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Detect { run, out } => detect(run, out),
        Command::Explain { run, sample, out } => explain(run, sample, out.as_deref()),
        Command::Eval {
            report,
            truth,
            db,
            out,
            top_k,
        } => eval(report, truth.as_deref(), db.as_deref(), out, *top_k),
        Command::Gen(args) => gen(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
