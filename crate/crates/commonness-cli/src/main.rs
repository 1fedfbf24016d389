use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use commonness::certify::{self, Certificate, CertifyError};
use commonness::classify::{self, ClassifyError};
use commonness::montecarlo;
use commonness::search;
use commonness::sysalg::{self, LinearSystem};
use commonness::templates::{self, FourierTemplate, TemplateDoc};
use serde::{de::DeserializeOwned, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "commonness", version, about = "Commonness analysis of integer linear systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// RNG seed for randomized steps
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of random trials
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Support radius for random templates
    #[arg(long = "M", global = true)]
    m: Option<u64>,
    /// Truncation depth for grid certificates
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Prime for F_p witnesses and sampling
    #[arg(long, global = true)]
    p: Option<u64>,
    /// Perturbation size for the two-coloring witness
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Tolerance for sampled gaps
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct System {
    /// Matrix text, rows separated by ';', e.g. "1 1 -1 -1 0; 1 -1 3 0 -3"
    matrix: Option<String>,
    /// Read the matrix text from a file
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    A1,
    A2,
    A3,
    D,
}

#[derive(Subcommand)]
enum Cmd {
    /// Common / uncommon / unknown verdict with certificate
    Classify(System),
    /// Uncommonness certificate plus an explicit F_p witness when feasible
    Certify {
        #[command(flatten)]
        system: System,
        /// Re-verify a saved certificate instead of building one
        #[arg(long)]
        verify: Option<PathBuf>,
    },
    /// σ of a template (JSON template or certificate file) on the system and its critical subsystems
    Sigma {
        #[command(flatten)]
        system: System,
        #[arg(long)]
        template: PathBuf,
    },
    /// Minimum support size of a nonzero vector in the row span
    Girth(System),
    /// Critical column sets and their reduced subsystems
    CriticalSets(System),
    /// Random-template search and σ statistics
    Mc(System),
    /// Exact relation searches
    Search {
        #[arg(long = "case", value_enum)]
        case: Case,
        /// Resume / persist progress (a2 only)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 65536)]
        chunk: usize,
        /// Include wall-clock runtime in the report
        #[arg(long)]
        timing: bool,
    },
    /// Sampled two-coloring gaps over F_p
    VerifyCommon(System),
    /// Dependency-graph counts and Stein bound per N (CSV in text format)
    Counts {
        #[command(flatten)]
        system: System,
        #[arg(long = "N", value_delimiter = ',', default_values_t = vec![10, 20, 40])]
        n: Vec<i64>,
    },
}

enum Outcome {
    Definitive(Value),
    Raw(String),
}

/// Errors in the user's input (exit 1) versus failures to reach a result (exit 2).
enum Failure {
    Input(anyhow::Error),
    Inconclusive(Value),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn load_system(s: &System) -> anyhow::Result<LinearSystem> {
    let text = match (&s.matrix, &s.file) {
        (Some(t), None) => t.clone(),
        (None, Some(f)) => std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?,
        (Some(_), Some(_)) => bail!("give the matrix inline or with --file, not both"),
        (None, None) => bail!("missing matrix"),
    };
    let rows = sysalg::parse_matrix(&text)?;
    Ok(sysalg::validate(rows)?)
}

fn read_json<T: DeserializeOwned>(path: &PathBuf) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable report")
}

fn inconclusive(reason: impl std::fmt::Display) -> Failure {
    Failure::Inconclusive(json!({ "status": "inconclusive", "reason": reason.to_string() }))
}

fn classify_failure(e: ClassifyError) -> Failure {
    match e {
        ClassifyError::System(e) => Failure::Input(e.into()),
        ClassifyError::OutOfScope(r) => Failure::Inconclusive(json!({ "status": "out_of_scope", "reason": r })),
        ClassifyError::Inconclusive(r) => inconclusive(r),
    }
}

fn run(cmd: &Cmd, o: &Opts) -> Result<Outcome, Failure> {
    match cmd {
        Cmd::Classify(s) => {
            let l = load_system(s)?;
            let v = classify::classify_system(&l).map_err(classify_failure)?;
            Ok(Outcome::Definitive(to_value(&v)))
        }
        Cmd::Certify { system, verify } => {
            let l = load_system(system)?;
            if let Some(path) = verify {
                let cert: Certificate = read_json(path)?;
                let ok = cert.reverify_at(&l, o.depth).map_err(|e| Failure::Input(e.into()))?;
                let report = json!({ "verified": ok, "sigma_total": cert.sigma_total() });
                return if ok { Ok(Outcome::Definitive(report)) } else { Err(Failure::Inconclusive(report)) };
            }
            let mut cert = match certify::certify_uncommon(&l) {
                Ok(c) => c,
                Err(CertifyError::NotUncommon(s)) => return Err(inconclusive(format!("not certified uncommon: {s}"))),
                Err(e) => return Err(inconclusive(e)),
            };
            if let (Some(p), Some(g)) = (o.p, cert.template()) {
                let reduced = sysalg::validate(classify::classify_system(&l).map_err(classify_failure)?.reduced)
                    .map_err(|e| Failure::Input(e.into()))?;
                cert.witness = Some(certify::witness_at(&reduced, &g, p, o.epsilon).map_err(inconclusive)?);
                cert.witness_skipped = None;
            }
            let mut v = to_value(&cert);
            v["verified"] = json!(cert.verified());
            Ok(Outcome::Definitive(v))
        }
        Cmd::Sigma { system, template } => {
            let l = load_system(system)?;
            let doc: TemplateDoc = match read_json::<TemplateDoc>(template) {
                Ok(d) => d,
                Err(_) => read_json::<Certificate>(template)?
                    .template
                    .ok_or_else(|| anyhow!("{} has no template", template.display()))?,
            };
            let g = FourierTemplate::from_doc(&doc).map_err(|e| Failure::Input(e.into()))?;
            let whole = templates::sigma_rows(l.rows(), &g).map_err(|e| Failure::Input(e.into()))?;
            let crit = templates::sigma_critical_sum(&l, &g).map_err(|e| Failure::Input(e.into()))?;
            Ok(Outcome::Definitive(json!({
                "sigma": { "re": whole.re, "im": whole.im, "exact": whole.exact.map(|z| format!("{} + {}i", templates::rational_to_string(&z.re), templates::rational_to_string(&z.im))) },
                "critical": crit,
                "certifies": crit.total <= certify::SIGMA_TOL,
            })))
        }
        Cmd::Girth(s) => {
            let l = load_system(s)?;
            let g = sysalg::girth(&l);
            Ok(Outcome::Definitive(json!({ "girth": g, "critical_size": sysalg::critical_size(g) })))
        }
        Cmd::CriticalSets(s) => {
            let l = load_system(s)?;
            Ok(Outcome::Definitive(json!({ "critical_sets": sysalg::critical_sets(&l) })))
        }
        Cmd::Mc(s) => {
            let l = load_system(s)?;
            let m = o.m.unwrap_or(5);
            let trials = o.trials.unwrap_or(2000);
            let neg = montecarlo::negative_fraction(&l, m, trials, o.seed);
            let mean = montecarlo::mean_check(&l, m, trials, o.seed).ok();
            let found = templates::monte_carlo_find(&l, m, trials, o.seed).ok();
            let report = json!({
                "M": m,
                "trials": trials,
                "seed": o.seed,
                "negative_fraction": neg,
                "mean_check": mean,
                "first_negative": found.as_ref().map(|f| json!({ "trial": f.trial, "total": f.total, "template": f.template.to_doc() })),
            });
            if found.is_some() {
                Ok(Outcome::Definitive(report))
            } else {
                Err(Failure::Inconclusive(report))
            }
        }
        Cmd::Search { case, checkpoint, chunk, timing } => {
            let start = std::time::Instant::now();
            let mut r = match (case, checkpoint) {
                (Case::A2, Some(path)) => {
                    search::search_case_a2_checkpointed(path, *chunk).map_err(|e| Failure::Input(e.into()))?
                }
                (_, Some(_)) => return Err(Failure::Input(anyhow!("--checkpoint applies to --case a2 only"))),
                (Case::A1, None) => search::search_case_a1(),
                (Case::A2, None) => search::search_case_a2(),
                (Case::A3, None) => search::search_case_a3().report(),
                (Case::D, None) => search::search_case_d().report(),
            };
            r.runtime_secs = timing.then(|| start.elapsed().as_secs_f64());
            Ok(Outcome::Definitive(to_value(&r)))
        }
        Cmd::VerifyCommon(s) => {
            let l = load_system(s)?;
            let p = o.p.unwrap_or(5);
            let trials = o.trials.unwrap_or(500);
            let r = certify::sample_commonness(l.rows(), p, trials, o.seed).map_err(|e| Failure::Input(e.into()))?;
            let passed = r.min_gap >= -o.tol;
            let mut v = to_value(&r);
            v["passed"] = json!(passed);
            Ok(Outcome::Definitive(v))
        }
        Cmd::Counts { system, n } => {
            let l = load_system(system)?;
            let mut reports = Vec::new();
            for &n in n {
                reports.push(montecarlo::claim44_stats(&l, n).map_err(|e| Failure::Input(e.into()))?);
            }
            if o.format == Format::Text {
                return Ok(Outcome::Raw(montecarlo::counts_csv(&reports)));
            }
            let rows: Vec<Value> = reports
                .iter()
                .map(|r| {
                    let mut v = to_value(r);
                    v["stein_bound"] = json!(montecarlo::stein_from_counts(r));
                    v
                })
                .collect();
            Ok(Outcome::Definitive(json!({ "counts": rows })))
        }
    }
}

fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(v).expect("json") + "\n",
        Format::Text => match v {
            Value::Object(map) => map
                .iter()
                .map(|(k, x)| match x {
                    Value::String(s) => format!("{k}: {s}\n"),
                    _ => format!("{k}: {x}\n"),
                })
                .collect(),
            _ => format!("{v}\n"),
        },
    }
}

fn emit(text: &str, o: &Opts) -> anyhow::Result<()> {
    match &o.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (text, code) = match run(&cli.cmd, &cli.opts) {
        Ok(Outcome::Definitive(v)) => (render(&v, cli.opts.format), 0),
        Ok(Outcome::Raw(s)) => (s, 0),
        Err(Failure::Inconclusive(v)) => (render(&v, cli.opts.format), 2),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = emit(&text, &cli.opts) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
