//! `bsmn`: command-line front end for BS(m,n) computations — normal forms,
//! graph validation, phenotype arithmetic, and the seeded random-walk
//! experiments. Reports are deterministic for a fixed seed: CSV series plus
//! a JSON summary embedding the resolved configuration.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_bigint::BigUint;

use bs_core::dynamics::{
    escape_experiment, mixing_witness_experiment, nonmixing_experiment, paste,
    check_merge_hypotheses, DynamicsError, ExperimentConfig, MergeInput,
};
use bs_core::graphs::{self, Label, MnGraph};
use bs_core::preactions::Preaction;
use bs_core::walks::{sample_walk, valuation_trace, StepMeasure, WalkError};
use bs_core::words::{height, reduce, Params, Word};

use config::ConfigOverlay;

#[derive(Parser)]
#[command(name = "bsmn", version, about = "Baumslag-Solitar group machinery and subgroup-space random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    #[arg(long)]
    m: Option<i64>,
    #[arg(long)]
    n: Option<i64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 1000)]
    horizon: u64,
    /// Rayon worker threads (default: one per CPU).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for the CSV/JSON report files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key-value config file; its entries override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Step measure file (`atom <word> <prob>` lines).
    #[arg(long)]
    measure: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a word to its Britton normal form.
    Reduce {
        #[arg(long)]
        m: i64,
        #[arg(long)]
        n: i64,
        #[arg(long)]
        word: String,
    },
    /// Evaluate the phenotype of a label.
    Phenotype {
        #[arg(long)]
        m: i64,
        #[arg(long)]
        n: i64,
        #[arg(long = "N")]
        label: String,
    },
    /// Validate an (m,n)-graph file and print its diagnostics.
    ValidateGraph {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Sample a seeded walk and dump its trace as CSV.
    Walk {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        k: usize,
        /// Track the q-adic valuation for this prime.
        #[arg(long = "p")]
        prime: Option<u64>,
        #[arg(long)]
        start_label: Option<BigUint>,
    },
    /// Core-escape experiment on a perfect-kernel core.
    Escape {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: PathBuf,
    },
    /// Non-mixing desk check: valuation walk, never-return estimate, and
    /// per-trial disjointness certificates.
    Nonmixing {
        #[command(flatten)]
        common: Common,
        #[arg(long = "p")]
        prime: Option<u64>,
        #[arg(long)]
        start_label: Option<BigUint>,
        #[arg(long)]
        disjoint_label: Option<BigUint>,
    },
    /// Mixing-witness trend: pasting success frequency across walk lengths.
    MixingWitness {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        core1: PathBuf,
        #[arg(long)]
        core2: PathBuf,
        #[arg(long, default_value_t = 1)]
        radius: u32,
        /// Comma-separated walk lengths, e.g. `50,200,800`.
        #[arg(long)]
        k_list: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        calibration_trials: Option<u64>,
    },
    /// Paste two preactions along walk words s1, s2, s3.
    Paste {
        #[arg(long)]
        m: i64,
        #[arg(long)]
        n: i64,
        #[arg(long)]
        pre1: PathBuf,
        #[arg(long)]
        pre2: PathBuf,
        #[arg(long)]
        s1: String,
        #[arg(long)]
        s2: String,
        #[arg(long)]
        s3: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Parse(String),
    BadParams(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(msg) => write!(f, "ParseError: {msg}"),
            CliError::BadParams(msg) => write!(f, "BadParams: {msg}"),
            CliError::Io(msg) => write!(f, "IoError: {msg}"),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::BadParams(msg) => CliError::BadParams(msg),
            DynamicsError::HypothesesNotMet(msg) => {
                CliError::BadParams(format!("hypotheses not met: {msg}"))
            }
            DynamicsError::InvalidGraph(msg) => CliError::BadParams(msg),
        }
    }
}

impl From<WalkError> for CliError {
    fn from(e: WalkError) -> Self {
        match e {
            WalkError::Parse(msg) => CliError::Parse(msg),
            WalkError::BadParams(msg) => CliError::BadParams(msg),
            other => CliError::BadParams(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Reduce { m, n, word } => {
            let p = params(m, n)?;
            let w: Word = word
                .parse()
                .map_err(|e| CliError::Parse(format!("{e}")))?;
            println!("{}", reduce(&p, &w).display_string());
            Ok(())
        }
        Command::Phenotype { m, n, label } => {
            let p = params(m, n)?;
            let label: Label = label
                .parse()
                .map_err(|e| CliError::Parse(format!("{e}")))?;
            println!("{}", graphs::phenotype(&p, &label));
            Ok(())
        }
        Command::ValidateGraph { graph } => {
            let (p, g) = load_graph(&graph)?;
            let report = graphs::validate(&p, &g);
            println!("graph: {} vertices, {} edges", g.vertex_count(), g.edge_count());
            for v in &report.degree_violations {
                println!("degree violation: {v:?}");
            }
            for v in &report.transfer_violations {
                println!("transfer violation: {v:?}");
            }
            println!("valid: {}", report.is_valid());
            println!("saturated: {}", report.saturated);
            println!("connected: {}", report.connected);
            Ok(())
        }
        Command::Walk {
            common,
            k,
            prime,
            start_label,
        } => {
            let (cfg, overlay) = experiment_config(&common)?;
            let prime = overlay.prime.or(prime);
            let start_label = overlay.start_label.clone().or(start_label);
            let trace = sample_walk(&cfg.measure, k, cfg.seed);
            let products = trace.products(&cfg.params);
            let valuations: Option<Vec<Option<u64>>> = match (prime, &start_label) {
                (Some(q), Some(n0)) => {
                    let values = match valuation_trace(&cfg.params, q, n0, &trace) {
                        Ok(vt) => vt.values.into_iter().map(Some).collect(),
                        Err(WalkError::HypothesisViolated { trace: vt, .. }) => {
                            let mut padded: Vec<Option<u64>> =
                                vt.values.into_iter().map(Some).collect();
                            padded.resize(k + 1, None);
                            padded
                        }
                        Err(e) => return Err(e.into()),
                    };
                    Some(values)
                }
                _ => None,
            };
            let mut csv = String::new();
            writeln!(csv, "# config {}", serde_json::to_string(&cfg.echo()).unwrap()).unwrap();
            let header = if valuations.is_some() {
                "step,increment,height,valuation"
            } else {
                "step,increment,height"
            };
            writeln!(csv, "{header}").unwrap();
            for i in 0..=k {
                let increment = if i == 0 {
                    String::new()
                } else {
                    trace.increments()[i - 1].to_string()
                };
                let h = height(&products[i]);
                match &valuations {
                    Some(vals) => {
                        let v = vals[i].map(|v| v.to_string()).unwrap_or_default();
                        writeln!(csv, "{i},{increment},{h},{v}").unwrap();
                    }
                    None => writeln!(csv, "{i},{increment},{h}").unwrap(),
                }
            }
            emit(&common.out, "walk", Some(csv), None)
        }
        Command::Escape { common, graph } => {
            let (cfg, _) = experiment_config(&common)?;
            let (file_params, core) = load_graph(&graph)?;
            ensure_params_match(&cfg.params, &file_params)?;
            let report = with_workers(common.workers, || escape_experiment(&cfg, &core))?;
            let mut csv = String::new();
            writeln!(csv, "# config {}", serde_json::to_string(&report.config).unwrap()).unwrap();
            writeln!(csv, "step,occupancy").unwrap();
            for (k, occ) in report.occupancy_by_step.iter().enumerate() {
                writeln!(csv, "{k},{occ}").unwrap();
            }
            let json = serde_json::to_string_pretty(&report).unwrap();
            emit(&common.out, "escape", Some(csv), Some(json))
        }
        Command::Nonmixing {
            common,
            prime,
            start_label,
            disjoint_label,
        } => {
            let (mut cfg, overlay) = experiment_config(&common)?;
            cfg.prime = overlay.prime.or(prime);
            cfg.start_label = overlay.start_label.clone().or(start_label);
            cfg.disjoint_label = overlay.disjoint_label.clone().or(disjoint_label);
            let report = with_workers(common.workers, || nonmixing_experiment(&cfg))?;
            let mut csv = String::new();
            writeln!(csv, "# config {}", serde_json::to_string(&report.config).unwrap()).unwrap();
            writeln!(csv, "statistic,value").unwrap();
            writeln!(csv, "never_return_hat,{}", report.never_return_hat).unwrap();
            writeln!(csv, "drift_hat,{}", report.drift_hat).unwrap();
            writeln!(csv, "bound,{}", report.bound).unwrap();
            writeln!(csv, "bound_check,{}", report.bound_check).unwrap();
            writeln!(csv, "certificates_eligible,{}", report.certificates.eligible).unwrap();
            writeln!(csv, "certificates_fired,{}", report.certificates.fired).unwrap();
            let json = serde_json::to_string_pretty(&report).unwrap();
            emit(&common.out, "nonmixing", Some(csv), Some(json))
        }
        Command::MixingWitness {
            common,
            core1,
            core2,
            radius,
            k_list,
            epsilon,
            calibration_trials,
        } => {
            let (mut cfg, overlay) = experiment_config(&common)?;
            cfg.radius = Some(overlay.radius.unwrap_or(radius));
            cfg.epsilon = overlay.epsilon.or(epsilon);
            cfg.calibration_trials = overlay.calibration_trials.or(calibration_trials);
            cfg.k_values = overlay.k_values.clone().or_else(|| {
                k_list.as_ref().map(|list| {
                    list.split(',')
                        .filter_map(|k| k.trim().parse().ok())
                        .collect()
                })
            });
            let (p1, g1) = load_graph(&core1)?;
            let (p2, g2) = load_graph(&core2)?;
            ensure_params_match(&cfg.params, &p1)?;
            ensure_params_match(&cfg.params, &p2)?;
            let radius = cfg.radius.unwrap();
            let report =
                with_workers(common.workers, || mixing_witness_experiment(&cfg, &g1, &g2, radius))?;
            let mut csv = String::new();
            writeln!(csv, "# config {}", serde_json::to_string(&report.config).unwrap()).unwrap();
            writeln!(csv, "k,trials,hypotheses_passed,successes,success_rate").unwrap();
            for r in &report.results {
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    r.k, r.trials, r.hypotheses_passed, r.successes, r.success_rate
                )
                .unwrap();
            }
            let json = serde_json::to_string_pretty(&report).unwrap();
            emit(&common.out, "mixing-witness", Some(csv), Some(json))
        }
        Command::Paste {
            m,
            n,
            pre1,
            pre2,
            s1,
            s2,
            s3,
            out,
        } => {
            let p = params(m, n)?;
            let (p1, pre1) = load_preaction(&pre1)?;
            let (p2, pre2) = load_preaction(&pre2)?;
            ensure_params_match(&p, &p1)?;
            ensure_params_match(&p, &p2)?;
            let parse_word = |s: &str| -> Result<Word, CliError> {
                s.parse().map_err(|e| CliError::Parse(format!("{e}")))
            };
            let input = MergeInput::new(
                &p,
                pre1,
                pre2,
                reduce(&p, &parse_word(&s1)?),
                reduce(&p, &parse_word(&s2)?),
                reduce(&p, &parse_word(&s3)?),
            )?;
            let check = check_merge_hypotheses(&p, &input);
            println!(
                "hypotheses: cond1={} cond2={} cond3={}",
                check.cond1, check.cond2, check.cond3
            );
            let result = paste(&p, &input)?;
            println!(
                "pasted: {} orbits, {} tau edges, phenotype {}",
                result.orbit_count(),
                result.edge_count(),
                input.phenotype()
            );
            match out {
                Some(path) => std::fs::write(&path, result.to_text(&p))?,
                None => print!("{}", result.to_text(&p)),
            }
            Ok(())
        }
    }
}

fn params(m: i64, n: i64) -> Result<Params, CliError> {
    Params::new(m, n).map_err(|e| CliError::BadParams(e.to_string()))
}

fn load_graph(path: &Path) -> Result<(Params, MnGraph), CliError> {
    let text = std::fs::read_to_string(path)?;
    MnGraph::from_text(&text).map_err(|e| CliError::Parse(e.to_string()))
}

fn load_preaction(path: &Path) -> Result<(Params, Preaction), CliError> {
    let text = std::fs::read_to_string(path)?;
    Preaction::from_text(&text).map_err(|e| CliError::Parse(e.to_string()))
}

fn ensure_params_match(expected: &Params, found: &Params) -> Result<(), CliError> {
    if expected != found {
        return Err(CliError::BadParams(format!(
            "file is for BS({},{}), flags say BS({},{})",
            found.m(),
            found.n(),
            expected.m(),
            expected.n()
        )));
    }
    Ok(())
}

/// Resolves flags and an optional config file (file wins) into an
/// [`ExperimentConfig`].
fn experiment_config(common: &Common) -> Result<(ExperimentConfig, ConfigOverlay), CliError> {
    let overlay = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ConfigOverlay::parse(&text).map_err(CliError::Parse)?
        }
        None => ConfigOverlay::default(),
    };
    let m = overlay
        .m
        .or(common.m)
        .ok_or_else(|| CliError::BadParams("missing --m".into()))?;
    let n = overlay
        .n
        .or(common.n)
        .ok_or_else(|| CliError::BadParams("missing --n".into()))?;
    let p = params(m, n)?;
    let measure = match (&overlay.measure, &common.measure) {
        (Some(mu), _) => mu.clone(),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            StepMeasure::parse(&text)?
        }
        (None, None) => return Err(CliError::BadParams("missing --measure".into())),
    };
    let mut cfg = ExperimentConfig::new(
        p,
        measure,
        overlay.trials.unwrap_or(common.trials),
        overlay.horizon.unwrap_or(common.horizon),
        overlay.seed.unwrap_or(common.seed),
    );
    cfg.prime = overlay.prime;
    cfg.start_label = overlay.start_label.clone();
    cfg.disjoint_label = overlay.disjoint_label.clone();
    cfg.radius = overlay.radius;
    cfg.epsilon = overlay.epsilon;
    cfg.k_values = overlay.k_values.clone();
    cfg.calibration_trials = overlay.calibration_trials;
    Ok((cfg, overlay))
}

fn with_workers<T>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, DynamicsError> + Send,
) -> Result<T, CliError>
where
    T: Send,
{
    match workers {
        Some(w) if w > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::BadParams(e.to_string()))?;
            pool.install(f).map_err(CliError::from)
        }
        _ => f().map_err(CliError::from),
    }
}

/// Writes `<scenario>.csv` / `<scenario>.json` into the output directory, or
/// prints to stdout when no directory was given.
fn emit(
    out: &Option<PathBuf>,
    scenario: &str,
    csv: Option<String>,
    json: Option<String>,
) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            if let Some(csv) = csv {
                let path = dir.join(format!("{scenario}.csv"));
                std::fs::write(&path, csv)?;
                println!("wrote {}", path.display());
            }
            if let Some(json) = json {
                let path = dir.join(format!("{scenario}.json"));
                std::fs::write(&path, format!("{json}\n"))?;
                println!("wrote {}", path.display());
            }
        }
        None => {
            if let Some(json) = json {
                println!("{json}");
            } else if let Some(csv) = csv {
                print!("{csv}");
            }
        }
    }
    Ok(())
}
