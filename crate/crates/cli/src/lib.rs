//! Command-line front end for the `randlocal` library.
//!
//! Every run writes one record: a JSON object `{command, config, input,
//! result}` whose `config` holds every resolved parameter (defaults included)
//! and whose `input` holds the ensemble in file form, so the record alone
//! reproduces the run. Per-step and per-grid data can be written as CSV
//! instead with `--format csv`.
//!
//! Exit status: 0 on success, 2 for configuration errors (bad flags,
//! unreadable or malformed input, parameters out of range), 3 for numerical
//! failure reports (no Cauchy pair, no invariant form, no trapping radius, no
//! separating width). Failure reports are still written to the output.
//!
//! The rayon thread count is taken from `RANDLOCAL_THREADS` when set.

pub mod emit;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use randlocal::classify::{classify_ensemble, classify_germ_measure, ClassifyParams, DEFAULT_EPS_ABS};
use randlocal::cocycle::{
    find_invariant_form, lyapunov_exponent, lyapunov_spectrum, CocycleError, CocycleSpec, InvariantFormOutcome,
    MatrixEnsemble, DEFAULT_GAP_THRESHOLD, FORM_MAX_ITERS,
};
use randlocal::gallery::{brjuno_partial_sum, build_example, load_example_str, Example, ExampleId, GalleryError, GOLDEN_MEAN};
use randlocal::germ_dynamics::{
    fatou_membership, limit_map_estimate, rank_profile, simulate_orbit_thinned, stable_set, trapping_radius, GermEnsemble,
    GermError, LimitMapEstimate, LimitMapOptions, TrapOptions, DEFAULT_ESCAPE_RADIUS, DEFAULT_STEPS,
};
use randlocal::jets::{Jet, DEFAULT_DEGREE};
use randlocal::linalg::vector_norm;

use emit::{complex_cells, complex_columns, fmt_f64, json_f64, json_matrix, json_point, Table};

pub const THREADS_ENV: &str = "RANDLOCAL_THREADS";
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "randlocal", version, about = "Random products of matrices and germs: estimators and examples")]
pub struct Cli {
    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Output format; `csv` is available for per-step and per-grid data.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Top Lyapunov exponent `E log ||M^n|| / n`.
    Lyapunov(LyapunovArgs),
    /// Lyapunov indices with multiplicities.
    Spectrum(SpectrumArgs),
    /// Attracting / repelling / neutral / semi-neutral verdict.
    Classify(ClassifyArgs),
    /// Common invariant Hermitian form of the generators.
    InvariantForm(FormArgs),
    /// One random orbit.
    Orbit(OrbitArgs),
    /// Bounded fraction of random orbits from a small ball.
    Fatou(FatouArgs),
    /// Trapping radius of an attracting germ ensemble.
    Trap(TrapArgs),
    /// Limit map of a semi-neutral ensemble on a grid.
    LimitMap(LimitArgs),
    /// Level set of the limit map through a point.
    StableSet(StableArgs),
    /// Write a built-in example in file form.
    Example(ExampleArgs),
    /// Continued fraction and Brjuno partial sums of an angle.
    Brjuno(BrjunoArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Input {
    /// Built-in example name (full name or two-letter prefix such as L1).
    #[arg(long, conflicts_with = "ensemble")]
    pub example: Option<String>,
    /// Ensemble or generator file.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrialArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LyapunovArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    #[command(flatten)]
    #[serde(flatten)]
    pub trials: TrialArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    #[command(flatten)]
    #[serde(flatten)]
    pub trials: TrialArgs,
    /// Averaged exponents closer than this are one index.
    #[arg(long, default_value_t = DEFAULT_GAP_THRESHOLD)]
    pub gap: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    #[command(flatten)]
    #[serde(flatten)]
    pub trials: TrialArgs,
    #[arg(long, default_value_t = DEFAULT_EPS_ABS)]
    pub eps_abs: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FormArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    #[arg(long, default_value_t = FORM_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OrbitArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    /// Start point, comma separated complex numbers such as `0.1,0.05+0.02i`.
    #[arg(long)]
    pub z0: String,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep every `thin`-th point plus the last.
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FatouArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 16)]
    pub points: usize,
    #[arg(long = "N", visible_alias = "steps", default_value_t = DEFAULT_STEPS)]
    #[serde(rename = "N")]
    pub steps: usize,
    #[arg(long, default_value_t = 1_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrapArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    /// Slack added to every `||df(0)||`; found by bisection when omitted.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 4096)]
    pub shell_samples: usize,
    #[arg(long, default_value_t = 1000)]
    pub orbits: usize,
    #[arg(long, default_value_t = 100)]
    pub orbit_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LimitFlags {
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long, default_value_t = 33)]
    pub grid: usize,
    #[arg(long, default_value_t = 50)]
    pub stride: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub cauchy_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_n: usize,
    /// Central-difference step relative to `rho`.
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl LimitFlags {
    fn options(&self) -> LimitMapOptions {
        LimitMapOptions {
            rho: self.rho,
            grid_size: self.grid,
            stride: self.stride,
            cauchy_tol: self.cauchy_tol,
            max_n: self.max_n,
            fd_step: self.fd_step,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LimitArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    #[command(flatten)]
    #[serde(flatten)]
    pub limit: LimitFlags,
    #[arg(long, default_value_t = 1e-3)]
    pub rank_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StableArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: Input,
    #[command(flatten)]
    #[serde(flatten)]
    pub limit: LimitFlags,
    /// Base point of the level set.
    #[arg(long)]
    pub point: String,
    #[arg(long, default_value_t = 1e-4)]
    pub level_tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExampleArgs {
    /// Example name; `--list` prints all names.
    #[arg(required_unless_present = "list")]
    pub name: Option<String>,
    #[arg(long)]
    pub list: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BrjunoArgs {
    #[arg(long, default_value_t = GOLDEN_MEAN)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    /// The computation ran and reported failure; `report` is still emitted.
    Numerical { message: String, report: Option<Output> },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical { message, .. } => write!(f, "numerical failure: {message}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical { .. } => EXIT_NUMERICAL,
        }
    }
}

impl From<CocycleError> for CliError {
    fn from(e: CocycleError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GermError> for CliError {
    fn from(e: GermError) -> Self {
        match e {
            GermError::NotConverged(_) | GermError::NoTrappingRadius { .. } | GermError::NotAttracting { .. } | GermError::EmptyLevelSet => {
                CliError::Numerical { message: e.to_string(), report: None }
            }
            GermError::Cocycle(c) => c.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<GalleryError> for CliError {
    fn from(e: GalleryError) -> Self {
        match e {
            GalleryError::Separation { .. } => CliError::Numerical { message: e.to_string(), report: None },
            GalleryError::Germ(g) => g.into(),
            GalleryError::Cocycle(c) => c.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// What a command produces.
#[derive(Debug)]
pub enum Output {
    Record(Value),
    Csv(emit::Table),
}

impl Output {
    pub fn render(&self) -> String {
        match self {
            Output::Record(v) => {
                let mut s = serde_json::to_string(v).expect("records are serializable");
                s.push('\n');
                s
            }
            Output::Csv(t) => t.to_csv(),
        }
    }
}

/// Parse `a,b,...` where each entry is a real or complex literal (`0.1`,
/// `0.1+0.2i`, `-0.3i`).
pub fn parse_point(text: &str) -> Result<Vec<Complex64>, CliError> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<Complex64>().map_err(|_| CliError::Config(format!("invalid complex number `{s}`")))
        })
        .collect()
}

struct Loaded {
    example: Example,
    source: Value,
}

fn load(input: &Input) -> Result<Loaded, CliError> {
    match (&input.example, &input.ensemble) {
        (Some(name), None) => {
            let id = ExampleId::from_name(name)?;
            Ok(Loaded { example: build_example(&id)?, source: json!({ "example": id.name() }) })
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Ok(Loaded { example: load_example_str(&text)?, source: json!({ "ensemble": path.display().to_string() }) })
        }
        (None, None) => Err(CliError::Config("one of --example or --ensemble is required".into())),
        (Some(_), Some(_)) => Err(CliError::Config("--example and --ensemble are exclusive".into())),
    }
}

impl Loaded {
    fn input_record(&self) -> Value {
        let mut v = self.source.clone();
        v["spec"] = self.example.to_json();
        v
    }

    /// The cocycle; germ ensembles act through their linear parts.
    fn cocycle(&self) -> Result<CocycleSpec, CliError> {
        match &self.example {
            Example::Cocycle(s) => Ok(s.clone()),
            Example::Germ(g) => Ok(CocycleSpec::Iid(g.linear_parts()?)),
        }
    }

    /// The germ ensemble; matrix ensembles act as linear maps.
    fn germs(&self) -> Result<GermEnsemble, CliError> {
        match &self.example {
            Example::Germ(g) => Ok(g.clone()),
            Example::Cocycle(CocycleSpec::Iid(e)) => linear_germs(e),
            Example::Cocycle(CocycleSpec::Rotation(_)) => {
                Err(CliError::Config("rotation-driven cocycles have no germ ensemble".into()))
            }
        }
    }
}

fn linear_germs(e: &MatrixEnsemble) -> Result<GermEnsemble, CliError> {
    let atoms = e.atoms().map(|(m, p)| (Jet::linear(m, DEFAULT_DEGREE), p)).collect();
    Ok(GermEnsemble::new(atoms, DEFAULT_ESCAPE_RADIUS)?)
}

fn record(command: &str, config: &impl Serialize, format: Format, input: Option<&Loaded>, result: Value) -> Value {
    let mut config = serde_json::to_value(config).expect("configs are serializable");
    config["format"] = json!(format);
    let mut out = json!({ "command": command, "config": config, "result": result });
    if let Some(l) = input {
        out["input"] = l.input_record();
    }
    out
}

fn json_only(format: Format, command: &str) -> Result<(), CliError> {
    if format == Format::Csv {
        return Err(CliError::Config(format!("{command} has no CSV form")));
    }
    Ok(())
}

fn to_value(x: &impl Serialize) -> Value {
    serde_json::to_value(x).expect("results are serializable")
}

/// Run one parsed command.
pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    let requested = cli.format;
    match &cli.command {
        Command::Lyapunov(a) => {
            let format = requested.unwrap_or(Format::Json);
            json_only(format, "lyapunov")?;
            let l = load(&a.input)?;
            let est = lyapunov_exponent(&l.cocycle()?, a.trials.n, a.trials.trials, a.trials.seed)?;
            Ok(Output::Record(record("lyapunov", a, format, Some(&l), to_value(&est))))
        }
        Command::Spectrum(a) => {
            let format = requested.unwrap_or(Format::Json);
            json_only(format, "spectrum")?;
            let l = load(&a.input)?;
            let s = lyapunov_spectrum(&l.cocycle()?, a.trials.n, a.trials.trials, a.trials.seed, a.gap)?;
            let mut result = to_value(&s.to_record());
            result["exponents"] = Value::Array(s.exponents.iter().map(|&x| json_f64(x)).collect());
            Ok(Output::Record(record("spectrum", a, format, Some(&l), result)))
        }
        Command::Classify(a) => {
            let format = requested.unwrap_or(Format::Json);
            json_only(format, "classify")?;
            let l = load(&a.input)?;
            let params = ClassifyParams { n: a.trials.n, trials: a.trials.trials, seed: a.trials.seed, eps_abs: a.eps_abs };
            let c = match &l.example {
                Example::Germ(g) => classify_germ_measure(g, &params)?,
                Example::Cocycle(s) => classify_ensemble(s, &params)?,
            };
            Ok(Output::Record(record("classify", a, format, Some(&l), to_value(&c))))
        }
        Command::InvariantForm(a) => {
            let format = requested.unwrap_or(Format::Json);
            json_only(format, "invariant-form")?;
            let l = load(&a.input)?;
            let spec = l.cocycle()?;
            let ens = spec.ensemble().ok_or(CocycleError::NotIid)?;
            let generators: Vec<_> = ens.atoms().map(|(m, _)| m.clone()).collect();
            match find_invariant_form(&generators, a.max_iters, a.tol)? {
                InvariantFormOutcome::Found(f) => {
                    let result = json!({
                        "found": true,
                        "p": json_matrix(&f.p),
                        "conjugator": json_matrix(&f.conjugator),
                        "conjugated": f.conjugated.iter().map(json_matrix).collect::<Vec<_>>(),
                        "residual": json_f64(f.residual),
                        "unitarity_defect": json_f64(f.unitarity_defect),
                        "condition": json_f64(f.condition),
                        "iterations": f.iterations,
                    });
                    Ok(Output::Record(record("invariant-form", a, format, Some(&l), result)))
                }
                InvariantFormOutcome::Failure(fail) => {
                    let mut result = to_value(&fail);
                    result["found"] = json!(false);
                    let report = record("invariant-form", a, format, Some(&l), result);
                    Err(CliError::Numerical {
                        message: format!("no invariant form ({:?}, best residual {:e})", fail.reason, fail.best_residual),
                        report: Some(Output::Record(report)),
                    })
                }
            }
        }
        Command::Orbit(a) => {
            let format = requested.unwrap_or(Format::Csv);
            let l = load(&a.input)?;
            let germs = l.germs()?;
            let z0 = parse_point(&a.z0)?;
            let o = simulate_orbit_thinned(&germs, &z0, a.steps, a.seed, a.thin)?;
            match format {
                Format::Csv => {
                    let mut header = vec!["step".to_string()];
                    header.extend(complex_columns("", germs.dim()));
                    header.push("norm".into());
                    let mut t = Table::new(header);
                    for p in &o.points {
                        let mut row = vec![p.step.to_string()];
                        row.extend(complex_cells(&p.z));
                        row.push(fmt_f64(vector_norm(&p.z)));
                        t.push(row);
                    }
                    Ok(Output::Csv(t))
                }
                Format::Json => Ok(Output::Record(record("orbit", a, format, Some(&l), to_value(&o)))),
            }
        }
        Command::Fatou(a) => {
            let format = requested.unwrap_or(Format::Json);
            let l = load(&a.input)?;
            let germs = l.germs()?;
            let r = fatou_membership(&germs, a.delta, a.points, a.steps, a.trials, a.seed)?;
            match format {
                Format::Csv => {
                    let points = randlocal::germ_dynamics::fatou_test_points(germs.dim(), a.delta, a.points, a.seed);
                    let mut header = vec!["point".to_string()];
                    header.extend(complex_columns("", germs.dim()));
                    header.push("bounded_trials".into());
                    let mut t = Table::new(header);
                    for (k, (z, &b)) in points.iter().zip(&r.per_point).enumerate() {
                        let mut row = vec![k.to_string()];
                        row.extend(complex_cells(z));
                        row.push(b.to_string());
                        t.push(row);
                    }
                    Ok(Output::Csv(t))
                }
                Format::Json => Ok(Output::Record(record("fatou", a, format, Some(&l), to_value(&r)))),
            }
        }
        Command::Trap(a) => {
            let format = requested.unwrap_or(Format::Json);
            json_only(format, "trap")?;
            let l = load(&a.input)?;
            let opts = TrapOptions {
                shell_samples: a.shell_samples,
                contraction_orbits: a.orbits,
                contraction_steps: a.orbit_steps,
                seed: a.seed,
                ..TrapOptions::default()
            };
            let r = trapping_radius(&l.germs()?, a.eps, &opts)?;
            Ok(Output::Record(record("trap", a, format, Some(&l), to_value(&r))))
        }
        Command::LimitMap(a) => {
            let format = requested.unwrap_or(Format::Json);
            let l = load(&a.input)?;
            let est = limit(&l, &a.limit, "limit-map", a, format)?;
            let rp = rank_profile(&est, a.rank_tol);
            match format {
                Format::Csv => {
                    let dim = est.dim;
                    let mut header = vec!["index".to_string()];
                    header.extend(complex_columns("z", dim));
                    header.extend(complex_columns("g", dim));
                    header.extend((1..=dim).map(|k| format!("sigma_{k}")));
                    let mut t = Table::new(header);
                    for (i, ((z, g), s)) in est.grid.iter().zip(&est.values).zip(&rp.singular_values).enumerate() {
                        let mut row = vec![i.to_string()];
                        row.extend(complex_cells(z));
                        row.extend(complex_cells(g));
                        row.extend(s.iter().map(|&x| fmt_f64(x)));
                        t.push(row);
                    }
                    Ok(Output::Csv(t))
                }
                Format::Json => {
                    let result = json!({
                        "times": est.times,
                        "cauchy_defect": json_f64(est.cauchy_defect),
                        "defects": to_value(&est.defects),
                        "rank_profile": {
                            "sigma_origin": est_values(&rp.sigma_origin),
                            "max_sigma_min": json_f64(rp.max_sigma_min),
                            "degenerate": rp.degenerate,
                            "nonvanishing": rp.nonvanishing,
                            "tol": rp.tol,
                        },
                        "grid": est.grid.iter().map(|z| json_point(z)).collect::<Vec<_>>(),
                        "values": est.values.iter().map(|z| json_point(z)).collect::<Vec<_>>(),
                    });
                    Ok(Output::Record(record("limit-map", a, format, Some(&l), result)))
                }
            }
        }
        Command::StableSet(a) => {
            let format = requested.unwrap_or(Format::Json);
            let l = load(&a.input)?;
            let point = parse_point(&a.point)?;
            let est = limit(&l, &a.limit, "stable-set", a, format)?;
            let s = stable_set(&est, &point, a.level_tol)?;
            match format {
                Format::Csv => {
                    let mut t = Table::new(complex_columns("", est.dim));
                    for p in &s.points {
                        t.push(complex_cells(p));
                    }
                    Ok(Output::Csv(t))
                }
                Format::Json => {
                    let result = json!({
                        "times": est.times,
                        "cauchy_defect": json_f64(est.cauchy_defect),
                        "stable_set": to_value(&s),
                    });
                    Ok(Output::Record(record("stable-set", a, format, Some(&l), result)))
                }
            }
        }
        Command::Example(a) => {
            let format = requested.unwrap_or(Format::Json);
            json_only(format, "example")?;
            if a.list {
                return Ok(Output::Record(json!(ExampleId::NAMES)));
            }
            let name = a.name.as_deref().expect("clap requires a name without --list");
            let ex = build_example(&ExampleId::from_name(name)?)?;
            Ok(Output::Record(ex.to_json()))
        }
        Command::Brjuno(a) => {
            let format = requested.unwrap_or(Format::Json);
            let r = brjuno_partial_sum(a.alpha, a.depth)?;
            match format {
                Format::Csv => {
                    let mut t = Table::new(["n", "a_n", "q_n", "partial_sum"]);
                    for (k, (&an, &s)) in r.partial_quotients.iter().zip(&r.partial_sums).enumerate() {
                        t.push(vec![(k + 1).to_string(), an.to_string(), r.convergents[k + 1].to_string(), fmt_f64(s)]);
                    }
                    Ok(Output::Csv(t))
                }
                Format::Json => {
                    let result = json!({
                        "alpha": r.alpha,
                        "depth": r.depth,
                        "partial_quotients": r.partial_quotients.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
                        "convergents": r.convergents.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
                        "partial_sums": est_values(&r.partial_sums),
                        "converged": r.converged,
                        "terminated_at": r.terminated_at,
                    });
                    Ok(Output::Record(record("brjuno", a, format, None, result)))
                }
            }
        }
    }
}

fn est_values(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| json_f64(x)).collect())
}

/// Limit-map estimate; a missing Cauchy pair becomes a failure report that
/// carries the defect history.
fn limit(l: &Loaded, flags: &LimitFlags, command: &str, config: &impl Serialize, format: Format) -> Result<LimitMapEstimate, CliError> {
    match limit_map_estimate(&l.germs()?, flags.seed, &flags.options()) {
        Ok(est) => Ok(est),
        Err(GermError::NotConverged(nc)) => {
            let result = json!({
                "converged": false,
                "max_n": nc.max_n,
                "best_defect": json_f64(nc.best_defect),
                "defects": to_value(&nc.defects),
            });
            Err(CliError::Numerical {
                message: format!("no Cauchy pair by n = {} (best defect {:e})", nc.max_n, nc.best_defect),
                report: Some(Output::Record(record(command, config, format, Some(l), result))),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot configure {threads} threads: {e}")))
}

fn write_output(path: Option<&PathBuf>, out: &Output) -> Result<(), CliError> {
    let text = out.render();
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Config(format!("cannot write output: {e}")))
        }
    }
}

/// Parse arguments, run, write the result; returns the exit status.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = configure_threads().and_then(|_| execute(&cli));
    match outcome {
        Ok(out) => match write_output(cli.output.as_ref(), &out) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("{e}");
            if let CliError::Numerical { report: Some(out), .. } = &e {
                if let Err(w) = write_output(cli.output.as_ref(), out) {
                    eprintln!("{w}");
                }
            }
            e.exit_code()
        }
    }
}
