#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use unitalcap::capacity::{capacity_report, q_upper_2norm, CapacityOptions, LsdOptions};
use unitalcap::channel::is_unital;
use unitalcap::expander::{ensemble_survey, write_csv, SampleOptions};
use unitalcap::io::{read_channel, to_json_string_pretty};
use unitalcap::norms::{output_2norm, output_2norm_tensor, AscentOptions};
use unitalcap::spectral::{check_block_structure, second_singular_value, UNITAL_TOL};
use unitalcap::suites::{run_suite, Suite, SuiteConfig};
use unitalcap::{DimensionGuard, Error, KrausChannel};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "unitalcap",
    version,
    about = "Capacity bounds and expander experiments for unital quantum channels"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Master seed for every random stream
    #[arg(long, global = true, env = "UNITALCAP_SEED", default_value_t = 0)]
    seed: u64,
    /// Restarts of the 2-norm ascent
    #[arg(long, global = true, env = "UNITALCAP_RESTARTS", default_value_t = 64)]
    restarts: usize,
    /// Iteration cap per ascent restart
    #[arg(long, global = true, env = "UNITALCAP_MAX_ITER", default_value_t = 500)]
    max_iter: usize,
    /// Convergence tolerance of the ascent
    #[arg(long, global = true, env = "UNITALCAP_TOL", default_value_t = 1e-12)]
    tol: f64,
    /// Largest Hilbert-space dimension any operation may build
    #[arg(long, global = true, env = "UNITALCAP_GUARD", default_value_t = 4096)]
    guard: usize,
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true, env = "UNITALCAP_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral, norm and capacity report for a channel file
    Analyze {
        file: PathBuf,
        /// Also estimate the 2-norm of the n-fold tensor power
        #[arg(long, env = "UNITALCAP_N")]
        n: Option<usize>,
    },
    /// Sample random mixed-unitary expanders and write one CSV row per sample
    ExpanderSurvey {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, env = "UNITALCAP_TRIALS", default_value_t = 20)]
        trials: usize,
        #[arg(long, env = "UNITALCAP_EPS", default_value_t = 1.0)]
        eps: f64,
        /// CSV destination; standard output when absent
        #[arg(long, env = "UNITALCAP_OUT")]
        out: Option<PathBuf>,
        /// Copies for the multiplicativity exponent
        #[arg(long, env = "UNITALCAP_N")]
        n: Option<usize>,
    },
    /// Run a randomized property suite: bk, lemma5, lemma3, blocks or pure-dominance
    Verify {
        suite: String,
        #[arg(long, env = "UNITALCAP_TRIALS")]
        trials: Option<usize>,
    },
}

struct RunConfig {
    master_seed: u64,
    guard: DimensionGuard,
    ascent: AscentOptions,
}

impl RunConfig {
    fn from_args(g: &GlobalArgs) -> Result<Self, Error> {
        if g.guard < 4 {
            return Err(Error::Parameter(format!("--guard must be at least 4, got {}", g.guard)));
        }
        if !(g.tol > 0.0) {
            return Err(Error::Parameter(format!("--tol must be positive, got {}", g.tol)));
        }
        if g.restarts == 0 || g.max_iter == 0 {
            return Err(Error::Parameter("--restarts and --max-iter must be positive".into()));
        }
        let guard = DimensionGuard::with_max_dim(g.guard);
        Ok(Self {
            master_seed: g.seed,
            ascent: AscentOptions {
                restarts: g.restarts,
                max_iter: g.max_iter,
                tol: g.tol,
                seed: g.seed,
                guard,
            },
            guard,
        })
    }

    fn header(&self) -> Value {
        json!({ "tool": "unitalcap", "version": VERSION, "seed": self.master_seed })
    }
}

enum Failure {
    Violation(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn emit(value: &Value) -> Result<(), Failure> {
    let text = to_json_string_pretty(value)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}

fn analyze(cfg: &RunConfig, file: &Path, n: Option<usize>) -> Result<(), Failure> {
    let ch: KrausChannel = read_channel(file).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
    cfg.guard.check_dim("channel input", ch.d_in())?;
    cfg.guard.check_dim("channel output", ch.d_out())?;
    let unital = ch.is_square() && is_unital(&ch, UNITAL_TOL)?;
    let norm = output_2norm(&ch, &cfg.ascent)?;
    let mut report = cfg.header();
    report["channel"] = json!({ "d_in": ch.d_in(), "d_out": ch.d_out(), "num_kraus": ch.num_kraus() });
    report["unital"] = json!(unital);
    report["norm2"] = json!({
        "estimate": norm.value,
        "certified_upper": norm.certified_upper,
        "converged": norm.converged,
        "restarts": norm.restarts,
    });
    if ch.is_square() {
        report["block_residuals"] = serde_json::to_value(check_block_structure(&ch, 1e-9)?).expect("plain data");
    }
    if unital {
        let spectral = second_singular_value(&ch)?;
        report["lambda2"] = json!(spectral.lambda2);
        report["spectral_method"] = json!(spectral.method.as_str());
        let opts = CapacityOptions {
            lsd: LsdOptions {
                seed: cfg.master_seed,
                ..LsdOptions::default()
            },
            n,
        };
        report["capacity"] = serde_json::to_value(capacity_report(&ch, &opts)?).expect("plain data");
    } else {
        report["lambda2"] = Value::Null;
        report["capacity"] = Value::Null;
    }
    if let Some(n) = n {
        let tensor = output_2norm_tensor(&ch, n, &cfg.ascent)?;
        let mut t = json!({
            "n": n,
            "estimate": tensor.value,
            "certified_upper": tensor.certified_upper,
            "converged": tensor.converged,
        });
        if unital {
            t["q_upper_2norm"] = serde_json::to_value(q_upper_2norm(&ch, n, &cfg.ascent)?).expect("plain data");
        }
        report["tensor_norm2"] = t;
    }
    emit(&report)
}

fn expander_survey(
    cfg: &RunConfig,
    d: usize,
    k: usize,
    trials: usize,
    eps: f64,
    out: Option<&Path>,
    n: Option<usize>,
) -> Result<(), Failure> {
    cfg.guard.check_dim("expander dimension", d)?;
    let opts = SampleOptions {
        ascent: cfg.ascent.clone(),
        norm: true,
        n,
    };
    let report = ensemble_survey(d, k, trials, eps, cfg.master_seed, &opts)?;
    eprintln!(
        "unitalcap {VERSION} expander-survey seed={} d={d} k={k} trials={trials} eps={eps}",
        cfg.master_seed
    );
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_csv(&report.samples, &mut w)?;
            w.flush()?;
            let mut summary = cfg.header();
            summary["d"] = json!(d);
            summary["k"] = json!(k);
            summary["trials"] = json!(trials);
            summary["eps"] = json!(eps);
            summary["threshold"] = json!(report.threshold);
            summary["fraction_within"] = json!(report.fraction_within);
            summary["threshold_loose"] = json!(report.threshold_loose);
            summary["fraction_within_loose"] = json!(report.fraction_within_loose);
            summary["c_hat_quantiles"] = serde_json::to_value(&report.c_hat_quantiles).expect("plain data");
            summary["tail_probability_label"] = json!(report.tail_probability_label);
            summary["csv"] = json!(path.display().to_string());
            emit(&summary)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv(&report.samples, &mut lock)?;
            Ok(())
        }
    }
}

fn verify(cfg: &RunConfig, name: &str, trials: Option<usize>) -> Result<(), Failure> {
    let suite: Suite = name.parse()?;
    let mut sc = SuiteConfig::new(suite, cfg.master_seed);
    if let Some(t) = trials {
        sc.trials = t;
    }
    sc.ascent = AscentOptions {
        restarts: cfg.ascent.restarts.min(sc.ascent.restarts),
        ..cfg.ascent.clone()
    };
    let outcome = run_suite(suite, &sc)?;
    let mut report = cfg.header();
    report["suite"] = json!(suite.as_str());
    report["trials"] = json!(outcome.trials);
    report["violations"] = json!(outcome.violations.len());
    report["worst_margin"] = json!(outcome.worst_margin);
    report["pass"] = json!(outcome.passed());
    emit(&report)?;
    if outcome.passed() {
        Ok(())
    } else {
        let lines: Vec<String> = outcome
            .violations
            .iter()
            .map(|v| format!("trial {} seed {}: {}", v.trial, v.seed, v.detail))
            .collect();
        Err(Failure::Violation(lines.join("\n")))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = RunConfig::from_args(&cli.global)?;
    if let Some(threads) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Analyze { file, n } => analyze(&cfg, file, *n),
        Command::ExpanderSurvey {
            d,
            k,
            trials,
            eps,
            out,
            n,
        } => expander_survey(&cfg, *d, *k, *trials, *eps, out.as_deref(), *n),
        Command::Verify { suite, trials } => verify(&cfg, suite, *trials),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
