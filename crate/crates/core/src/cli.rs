//! The `stratmean` command line.
//!
//! Exit codes: 0 success, 2 usage, 3 input error, 4 numerical error,
//! 5 validation failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{parse_microdata, summarize, Microdata, PopulationSummary, SampleDesign, SummaryDocument};
use crate::efficiency::{dominance_report, pre_table, reproduce_kk2009};
use crate::error::{Error, ErrorKind, Result};
use crate::estimators::EstimatorId;
use crate::kk2009::embedded_kk2009;
use crate::moments::{design_factors, moment_set, MomentSet};
use crate::montecarlo::{generate_population, run_simulation, SimulationSettings, SyntheticPopulationConfig};
use crate::reconcile::{reconcile_covariances, CovariancePolicy, ReconciliationReport};
use crate::render::{self, Document, Format, Provenance, FORMULA_IMPLEMENTED};
use crate::theory::{diagnostics, min_mse_tp, mse_classic, mse_tp, optimal_m, MseBreakdown};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "stratmean",
    version,
    about = "Population-mean estimators for stratified sampling with two auxiliary variables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// How disagreeing covariance / correlation pairs are resolved.
    #[arg(long, global = true, value_enum, default_value_t = CovariancePolicy::PreferCorrelation)]
    pub policy: CovariancePolicy,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Relative moments V_rst and the regression coefficients B1, B2.
    Moments(InputArgs),
    /// First-order MSE of every estimator, the optimum and formula diagnostics.
    Mse {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        m: MArgs,
    },
    /// Percent relative efficiency table.
    Pre(InputArgs),
    /// Monte Carlo comparison of empirical and first-order MSEs.
    Simulate(SimulateArgs),
    /// The efficiency table of the embedded school dataset under both policies.
    #[command(name = "reproduce-kk2009")]
    ReproduceKk2009,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Summary JSON (`{"strata": [...], "n_h": [...]}`) or microdata CSV
    /// (`stratum,y,x,z`). Defaults to the embedded school dataset.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Per-stratum sample sizes, e.g. `20,30,50`. Overrides `n_h` in a summary.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct MArgs {
    /// Exponent on the x ratio; evaluates tp at a fixed (m1, m2)
    #[arg(long, allow_hyphen_values = true, requires = "m2")]
    pub m1: Option<f64>,
    /// Exponent on the z ratio
    #[arg(long, allow_hyphen_values = true, requires = "m1")]
    pub m2: Option<f64>,
}

impl MArgs {
    fn pair(&self) -> Option<(f64, f64)> {
        self.m1.zip(self.m2)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Synthetic population configuration (JSON). Defaults to the
    /// three-stratum reference population generated from `--seed`.
    #[arg(long, conflicts_with = "input")]
    pub config: Option<PathBuf>,

    /// Microdata CSV used as the finite population (requires `--n`).
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Per-stratum sample sizes, e.g. `20,30,50`
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,

    /// Seed for the population and the replication streams
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Number of replications.
    #[arg(long = "R", default_value_t = 1000)]
    pub replications: usize,

    /// Run replications on one thread (output is identical either way).
    #[arg(long)]
    pub serial: bool,

    #[command(flatten)]
    pub m: MArgs,
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Input => EXIT_INPUT,
        ErrorKind::Numerical => EXIT_NUMERICAL,
        ErrorKind::Validation => EXIT_VALIDATION,
    }
}

/// Parses `args` (including the program name), runs the command and writes
/// the report to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok((doc, verdict)) => {
            let text = doc.render(cli.format);
            if let Err(e) = out.write_all(text.as_bytes()) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INPUT;
            }
            match verdict {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    exit_code(&e)
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// A rendered report plus an optional validation verdict; the report is
/// printed even when the verdict fails.
type Outcome = (Document, std::result::Result<(), Error>);

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let policy = cli.policy;
    match &cli.command {
        Command::Moments(input) => {
            let loaded = load(input, policy)?;
            let m = moment_set(&loaded.summary, &loaded.design)?;
            let factors = design_factors(&loaded.summary, &loaded.design)?;
            let prov = provenance("moments", &loaded.source, Some(policy), None);
            Ok((render::moments_document(&m, &factors, &loaded.reconciliation, prov), Ok(())))
        }
        Command::Mse { input, m } => {
            let loaded = load(input, policy)?;
            let moments = moment_set(&loaded.summary, &loaded.design)?;
            let (rows, optimum) = mse_rows(&moments, m.pair())?;
            let at = m.pair().or(optimum).unwrap_or((0.0, 0.0));
            let diag = diagnostics(&moments, at.0, at.1);
            let prov = provenance("mse", &loaded.source, Some(policy), None);
            Ok((render::mse_document(&rows, optimum, &diag, &loaded.reconciliation, prov), Ok(())))
        }
        Command::Pre(input) => {
            let loaded = load(input, policy)?;
            let moments = moment_set(&loaded.summary, &loaded.design)?;
            let report = pre_table(&moments)?.with_policy(policy);
            let dominance = dominance_report(&moments)?;
            let prov = provenance("pre", &loaded.source, Some(policy), None);
            Ok((render::pre_document(&report, &dominance, &loaded.reconciliation, prov), Ok(())))
        }
        Command::Simulate(args) => simulate(args, policy),
        Command::ReproduceKk2009 => {
            let rep = reproduce_kk2009()?;
            let verdict = if rep.extremes_match(0) {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "under {} the computed ranking does not put tp first and t4 last",
                    rep.columns[0].policy
                )))
            };
            let policies = rep.columns.iter().map(|c| c.policy.to_string()).collect::<Vec<_>>().join(" + ");
            let prov = Provenance {
                command: "reproduce-kk2009".into(),
                input: "embedded school dataset (6 strata)".into(),
                policy: Some(policies),
                formula: format!("{FORMULA_IMPLEMENTED}; t7 in stratum-wise form"),
                seed: None,
            };
            Ok((render::reproduction_document(&rep, prov), verdict))
        }
    }
}

fn provenance(command: &str, source: &str, policy: Option<CovariancePolicy>, seed: Option<u64>) -> Provenance {
    Provenance {
        command: command.into(),
        input: source.into(),
        policy: policy.map(|p| p.to_string()),
        formula: FORMULA_IMPLEMENTED.into(),
        seed,
    }
}

/// Classic rows, `tp` at the optimum and, if requested, `tp` at `(m1, m2)`.
type MPair = (f64, f64);

fn mse_rows(m: &MomentSet, at: Option<MPair>) -> Result<(Vec<MseBreakdown>, Option<MPair>)> {
    let mut rows = Vec::with_capacity(10);
    for id in EstimatorId::CLASSIC {
        rows.push(MseBreakdown {
            estimator: id.kind(),
            mse: mse_classic(id, m)?,
            tp: None,
        });
    }
    let optimum = if m.is_census() { None } else { Some(optimal_m(m)?) };
    if optimum.is_some() {
        rows.push(min_mse_tp(m)?);
    }
    if let Some((m1, m2)) = at {
        EstimatorId::tp(m1, m2)?;
        rows.push(mse_tp(m, m1, m2));
    }
    if optimum.is_none() && at.is_none() {
        rows.push(mse_tp(m, 0.0, 0.0));
    }
    Ok((rows, optimum))
}

struct Loaded {
    summary: PopulationSummary,
    design: SampleDesign,
    reconciliation: ReconciliationReport,
    source: String,
}

enum Source {
    Summary(PopulationSummary, Option<SampleDesign>),
    Micro(Microdata),
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn parse_source(text: &str) -> Result<Source> {
    if text.trim_start().starts_with('{') {
        let (pop, design) = SummaryDocument::parse(text)?.into_parts();
        Ok(Source::Summary(pop, design))
    } else {
        Ok(Source::Micro(parse_microdata(text)?))
    }
}

fn load(args: &InputArgs, policy: CovariancePolicy) -> Result<Loaded> {
    let (summary, design, source) = match &args.input {
        None => {
            let (pop, design) = embedded_kk2009();
            (pop, Some(design), "embedded school dataset (6 strata)".to_string())
        }
        Some(path) => match parse_source(&read(path)?)? {
            Source::Summary(pop, design) => (pop, design, format!("summary {}", path.display())),
            Source::Micro(micro) => (summarize(&micro)?, None, format!("microdata {}", path.display())),
        },
    };
    let design = match (&args.n, design) {
        (Some(n), _) => SampleDesign::new(n.clone()),
        (None, Some(d)) => d,
        (None, None) => {
            return Err(Error::Design(
                "no sample sizes: pass --n or include n_h in the summary".into(),
            ))
        }
    };
    design.check_against(&summary)?;
    let (summary, reconciliation) = reconcile_covariances(&summary, policy)?;
    Ok(Loaded {
        summary,
        design,
        reconciliation,
        source,
    })
}

fn simulate(args: &SimulateArgs, policy: CovariancePolicy) -> Result<Outcome> {
    let (micro, summary, design, config, source) = match (&args.input, &args.config) {
        (Some(path), _) => {
            let micro = match parse_source(&read(path)?)? {
                Source::Micro(m) => m,
                Source::Summary(..) => {
                    return Err(Error::Config("simulate needs microdata, not a summary".into()))
                }
            };
            let n = args
                .n
                .clone()
                .ok_or_else(|| Error::Design("--n is required with microdata".into()))?;
            let summary = summarize(&micro)?;
            (micro, summary, SampleDesign::new(n), None, format!("microdata {}", path.display()))
        }
        (None, config) => {
            let cfg = match config {
                Some(path) => serde_json::from_str::<SyntheticPopulationConfig>(&read(path)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
                None => SyntheticPopulationConfig::reference(args.seed),
            };
            let design = match (&args.n, config) {
                (Some(n), _) => SampleDesign::new(n.clone()),
                (None, None) => SyntheticPopulationConfig::reference_design(),
                (None, Some(_)) => return Err(Error::Design("--n is required with --config".into())),
            };
            let (micro, summary) = generate_population(&cfg)?;
            let source = match config {
                Some(path) => format!("synthetic population {} (seed {})", path.display(), cfg.seed),
                None => format!("reference synthetic population (seed {})", cfg.seed),
            };
            (micro, summary, design, Some(cfg), source)
        }
    };
    // microdata summaries are internally consistent; reconciliation only aligns rounding
    let (summary, _) = reconcile_covariances(&summary, policy)?;
    let mut settings = SimulationSettings::new(args.replications, args.seed);
    settings.fixed_m = args.m.pair();
    settings.parallel = !args.serial;
    let mut report = run_simulation(&micro, &summary, &design, &settings)?;
    report.config = config;
    let prov = provenance("simulate", &source, Some(policy), Some(args.seed));
    Ok((render::simulation_document(&report, prov), Ok(())))
}
