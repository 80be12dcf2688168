//! Command-line front end: `bench`, `energy`, `basis-check` and
//! `closed-forms`.
//!
//! Options come from flags and, optionally, a JSON file given with
//! `--config`; a flag always wins over the file. Exit codes are
//! [`EXIT_OK`], [`EXIT_TOLERANCE`], [`EXIT_USAGE`] and [`EXIT_IO`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbasis::{w_alpha, R3Point, Vec3, CLOSED_FORMS};
use crate::bench::{self, BenchError, BenchmarkCase, ConvergenceRow, ToleranceCheck};
use crate::quadrature::{
    read_cloud_csv, CloudError, ConstantField, Execution, MagnetizationField, ResolutionPolicy, SampleDomain, SampledField,
};
use crate::solver::{CoefficientTable, EnergyBreakdown, SolverError};
use crate::validation::{self, BasisCheckReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const DEFAULT_DEGREES: [u32; 6] = bench::REFERENCE_DEGREES;
pub const DEFAULT_ENERGY_NMAX: u32 = 10;
pub const DEFAULT_KMAX: u32 = 4;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "strayfield", version, about = "Stray-field energy by rational spectral expansion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Convergence study on one of the built-in examples.
    Bench,
    /// Energy of a user-specified body.
    Energy,
    /// Closed-form, orthogonality and eigen-relation checks of the basis.
    BasisCheck,
    /// Prints the explicit low-degree basis functions at given points.
    ClosedForms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionArg {
    Sequential,
    Parallel,
}

impl From<ExecutionArg> for Execution {
    fn from(e: ExecutionArg) -> Self {
        match e {
            ExecutionArg::Sequential => Execution::Sequential,
            ExecutionArg::Parallel => Execution::Parallel,
        }
    }
}

/// Options shared by all subcommands. Every field is optional so that flags
/// can be layered over a config file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Opts {
    /// JSON file with default values for any of these options.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Built-in example (1, 2 or 3).
    #[arg(long, global = true)]
    pub example: Option<u32>,
    /// Degrees to report, comma separated and increasing.
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<u32>>,
    /// Largest degree for `energy`.
    #[arg(long, global = true)]
    pub nmax: Option<u32>,
    #[arg(long, global = true)]
    pub quad_radial: Option<usize>,
    #[arg(long, global = true)]
    pub quad_theta: Option<usize>,
    #[arg(long, global = true)]
    pub quad_phi: Option<usize>,
    /// Gauss points per axis on boxes.
    #[arg(long, global = true)]
    pub quad_axis: Option<usize>,
    #[arg(long, global = true)]
    pub mu0: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Compare against the published tables and fail on any breach.
    #[arg(long, global = true)]
    pub check: bool,
    /// Largest degree of the orthogonality checks.
    #[arg(long, global = true)]
    pub kmax: Option<u32>,
    /// Seed of the random test points.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Node cloud CSV with header `x,y,z,weight,Mx,My,Mz`.
    #[arg(long, global = true)]
    pub cloud: Option<PathBuf>,
    /// Ball as `cx,cy,cz,radius`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub ball: Option<Vec<f64>>,
    /// Box as `x0,y0,z0,x1,y1,z1`.
    #[arg(long = "box", global = true, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(rename = "box")]
    pub cuboid: Option<Vec<f64>>,
    /// Constant magnetization `mx,my,mz`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub magnetization: Option<Vec<f64>>,
    /// Evaluation points `x,y,z[,x,y,z...]` for `closed-forms`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    #[arg(long, global = true, value_enum)]
    pub execution: Option<ExecutionArg>,
}

impl Opts {
    /// `self` with every unset option taken from `file`.
    pub fn over(self, file: Opts) -> Opts {
        Opts {
            config: self.config,
            example: self.example.or(file.example),
            n: self.n.or(file.n),
            nmax: self.nmax.or(file.nmax),
            quad_radial: self.quad_radial.or(file.quad_radial),
            quad_theta: self.quad_theta.or(file.quad_theta),
            quad_phi: self.quad_phi.or(file.quad_phi),
            quad_axis: self.quad_axis.or(file.quad_axis),
            mu0: self.mu0.or(file.mu0),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
            check: self.check || file.check,
            kmax: self.kmax.or(file.kmax),
            seed: self.seed.or(file.seed),
            cloud: self.cloud.or(file.cloud),
            ball: self.ball.or(file.ball),
            cuboid: self.cuboid.or(file.cuboid),
            magnetization: self.magnetization.or(file.magnetization),
            point: self.point.or(file.point),
            execution: self.execution.or(file.execution),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Io(_) => EXIT_IO,
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Solver(s) => s.into(),
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Io { .. } => Self::Io(e.to_string()),
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<CloudError> for CliError {
    fn from(e: CloudError) -> Self {
        match e {
            CloudError::Io { .. } => Self::Io(e.to_string()),
            other => Self::Usage(format!("cloud: {other}")),
        }
    }
}

/// Where the body comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    Ball { center: Vec3, radius: f64 },
    Box { lo: Vec3, hi: Vec3 },
    Cloud { path: String, nodes: usize },
    Example { id: u32 },
}

/// Where the magnetization comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldSpec {
    Constant { m: Vec3 },
    Example { id: u32 },
    Cloud { path: String },
}

/// Node counts actually used, after defaults and overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedQuadrature {
    pub radial: Option<usize>,
    pub theta: Option<usize>,
    pub phi: Option<usize>,
    pub axis: Option<usize>,
    pub nodes: usize,
}

/// The fully resolved run configuration written into every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n_max: u32,
    pub degrees: Vec<u32>,
    pub domain: Option<DomainSpec>,
    pub field: Option<FieldSpec>,
    pub quadrature: Option<ResolvedQuadrature>,
    pub mu0: f64,
    pub k_max: Option<u32>,
    pub seed: Option<u64>,
    pub check: bool,
    pub format: Format,
    pub execution: Execution,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Reports go to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let opts = match &cli.opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
            let file: Opts = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            cli.opts.over(file)
        }
        None => cli.opts,
    };
    match cli.command {
        Command::Bench => cmd_bench(&opts),
        Command::Energy => cmd_energy(&opts),
        Command::BasisCheck => cmd_basis_check(&opts),
        Command::ClosedForms => cmd_closed_forms(&opts),
    }
}

fn policy(opts: &Opts) -> ResolutionPolicy {
    ResolutionPolicy { radial: opts.quad_radial, theta: opts.quad_theta, phi: opts.quad_phi, axis: opts.quad_axis }
}

fn resolved_quadrature(domain: &SampleDomain, policy: &ResolutionPolicy, n: u32, nodes: usize) -> ResolvedQuadrature {
    let mut q = ResolvedQuadrature { radial: None, theta: None, phi: None, axis: None, nodes };
    match domain {
        SampleDomain::Ball { .. } => {
            let (r, t, p) = policy.ball_counts(n);
            (q.radial, q.theta, q.phi) = (Some(r), Some(t), Some(p));
        }
        SampleDomain::Box { .. } => q.axis = Some(policy.box_count(n)),
        SampleDomain::Cloud { .. } => {}
    }
    q
}

fn mu0(opts: &Opts) -> Result<f64, CliError> {
    let mu0 = opts.mu0.unwrap_or(1.0);
    if mu0 > 0.0 && mu0.is_finite() {
        Ok(mu0)
    } else {
        Err(CliError::Usage(format!("--mu0 must be positive and finite, got {mu0}")))
    }
}

fn vec3(values: &[f64], flag: &str) -> Result<Vec3, CliError> {
    match values {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(CliError::Usage(format!("--{flag} expects 3 comma-separated numbers, got {}", values.len()))),
    }
}

/// Numbers in CSV files: 17 significant digits.
fn csv_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn config_json(config: &RunConfig) -> String {
    serde_json::to_string(config).expect("config serializes")
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct Slopes {
    energy: f64,
    e0: f64,
}

#[derive(Debug, Serialize)]
struct BenchOutput<'a> {
    config: &'a RunConfig,
    example: u32,
    exact_energy: f64,
    rows: &'a [ConvergenceRow],
    slopes: Option<Slopes>,
    checks: &'a [ToleranceCheck],
}

/// Report printed on stdout by commands that judge pass or fail.
#[derive(Debug, Serialize)]
struct CheckReport<'a, T: Serialize> {
    status: &'static str,
    failures: Vec<&'a T>,
    checks: &'a [T],
}

fn cmd_bench(opts: &Opts) -> Result<i32, CliError> {
    let id = opts.example.ok_or_else(|| CliError::Usage("bench needs --example 1, 2 or 3".into()))?;
    let case = bench::case(id)?;
    if opts.cloud.is_some() || opts.ball.is_some() || opts.cuboid.is_some() || opts.magnetization.is_some() {
        return Err(CliError::Usage("bench runs a built-in example; domain and field flags are not accepted".into()));
    }
    let degrees = opts.n.clone().unwrap_or_else(|| DEFAULT_DEGREES.to_vec());
    let mu0 = mu0(opts)?;
    let policy = policy(opts);
    let exec = opts.execution.map(Execution::from).unwrap_or_default();
    let run = bench::run_convergence(&case, &degrees, &policy, mu0, exec)?;
    let n_max = run.table.n_max();
    let config = RunConfig {
        command: Command::Bench,
        n_max,
        degrees: degrees.clone(),
        domain: Some(DomainSpec::Example { id }),
        field: Some(FieldSpec::Example { id }),
        quadrature: Some(resolved_quadrature(&case.domain, &policy, n_max, run.rule_size)),
        mu0,
        k_max: None,
        seed: None,
        check: opts.check,
        format: opts.format.unwrap_or(Format::Csv),
        execution: exec,
    };
    let slopes = bench::convergence_slopes(&run.rows).ok().map(|(energy, e0)| Slopes { energy, e0 });
    let checks = if opts.check {
        if mu0 != 1.0 {
            return Err(CliError::Usage("--check compares with tables computed for mu0 = 1".into()));
        }
        bench::compare_with_reference(id, &run.rows)?
    } else {
        Vec::new()
    };

    if let Some(out) = &opts.out {
        let text = match config.format {
            Format::Csv => bench_csv(&config, &run.rows, slopes.as_ref()),
            Format::Json => {
                let output = BenchOutput {
                    config: &config,
                    example: id,
                    exact_energy: case.exact_energy * mu0,
                    rows: &run.rows,
                    slopes,
                    checks: &checks,
                };
                serde_json::to_string_pretty(&output).expect("output serializes") + "\n"
            }
        };
        write_file(out, &text)?;
    }

    let table = human_table(&case, &run.rows);
    if !opts.check {
        print!("{table}");
        return Ok(EXIT_OK);
    }
    eprint!("{table}");
    let failures: Vec<&ToleranceCheck> = checks.iter().filter(|c| !c.pass).collect();
    let status = if failures.is_empty() { "pass" } else { "fail" };
    let code = if failures.is_empty() { EXIT_OK } else { EXIT_TOLERANCE };
    let report = CheckReport { status, failures, checks: &checks };
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(code)
}

fn bench_csv(config: &RunConfig, rows: &[ConvergenceRow], slopes: Option<&Slopes>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config: {}", config_json(config));
    s.push_str("N,E_N,rel_energy_err,e0\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.n, csv_num(r.energy), csv_num(r.rel_energy_err), csv_num(r.e0));
    }
    if let Some(sl) = slopes {
        let _ = writeln!(s, "# energy_slope: {}", csv_num(sl.energy));
        let _ = writeln!(s, "# e0_slope: {}", csv_num(sl.e0));
    }
    s
}

fn human_table(case: &BenchmarkCase, rows: &[ConvergenceRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} (E = {:.8})", case.name, case.exact_energy);
    let _ = writeln!(s, "{:>4}  {:>12}  {:>12}  {:>12}", "N", "E_N", "rel_err", "e0");
    for r in rows {
        let _ = writeln!(s, "{:>4}  {:>12.8}  {:>12.8}  {:>12.8}", r.n, r.energy, r.rel_energy_err, r.e0);
    }
    if let Ok((a, b)) = bench::convergence_slopes(rows) {
        let _ = writeln!(s, "slopes: energy {a:.2}, e0 {b:.2}");
    }
    s
}

/// Body and magnetization of an `energy` run.
struct Problem {
    domain: SampleDomain,
    field: Box<dyn MagnetizationField>,
    domain_spec: DomainSpec,
    field_spec: FieldSpec,
}

fn problem(opts: &Opts) -> Result<Problem, CliError> {
    let sources = [opts.example.is_some(), opts.cloud.is_some(), opts.magnetization.is_some()];
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(CliError::Usage(
            "energy needs exactly one field source: --example, --cloud or --magnetization".into(),
        ));
    }
    let shapes = usize::from(opts.ball.is_some()) + usize::from(opts.cuboid.is_some());
    if let Some(id) = opts.example {
        if shapes > 0 {
            return Err(CliError::Usage("--example fixes the domain; drop --ball/--box".into()));
        }
        let case = bench::case(id)?;
        return Ok(Problem {
            domain: case.domain,
            field: case.field,
            domain_spec: DomainSpec::Example { id },
            field_spec: FieldSpec::Example { id },
        });
    }
    if let Some(path) = &opts.cloud {
        if shapes > 0 {
            return Err(CliError::Usage("--cloud fixes the domain; drop --ball/--box".into()));
        }
        let nodes = read_cloud_csv(path)?;
        let field = SampledField::new(nodes.iter().map(|n| (n.x, n.m)));
        let count = nodes.len();
        let domain = SampleDomain::cloud(nodes).map_err(|e| CliError::Usage(format!("cloud: {e}")))?;
        let path = path.display().to_string();
        return Ok(Problem {
            domain,
            field: Box::new(field),
            domain_spec: DomainSpec::Cloud { path: path.clone(), nodes: count },
            field_spec: FieldSpec::Cloud { path },
        });
    }
    let m = vec3(opts.magnetization.as_deref().unwrap_or_default(), "magnetization")?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("--magnetization must be finite".into()));
    }
    let (domain, domain_spec) = match (&opts.ball, &opts.cuboid) {
        (Some(b), None) => {
            let [cx, cy, cz, r] = b[..] else {
                return Err(CliError::Usage(format!("--ball expects cx,cy,cz,radius, got {} numbers", b.len())));
            };
            let center = [cx, cy, cz];
            let d = SampleDomain::ball(center, r).map_err(|e| CliError::Usage(e.to_string()))?;
            (d, DomainSpec::Ball { center, radius: r })
        }
        (None, Some(b)) => {
            let [x0, y0, z0, x1, y1, z1] = b[..] else {
                return Err(CliError::Usage(format!("--box expects x0,y0,z0,x1,y1,z1, got {} numbers", b.len())));
            };
            let (lo, hi) = ([x0, y0, z0], [x1, y1, z1]);
            let d = SampleDomain::cuboid(lo, hi).map_err(|e| CliError::Usage(e.to_string()))?;
            (d, DomainSpec::Box { lo, hi })
        }
        _ => return Err(CliError::Usage("--magnetization needs exactly one of --ball or --box".into())),
    };
    Ok(Problem { domain, field: Box::new(ConstantField(m)), domain_spec, field_spec: FieldSpec::Constant { m } })
}

#[derive(Debug, Serialize)]
struct EnergyOutput<'a> {
    config: &'a RunConfig,
    breakdown: &'a EnergyBreakdown,
    coefficients: serde_json::Value,
}

fn cmd_energy(opts: &Opts) -> Result<i32, CliError> {
    let n_max = opts.nmax.unwrap_or(DEFAULT_ENERGY_NMAX);
    let mu0 = mu0(opts)?;
    let problem = problem(opts)?;
    let policy = policy(opts);
    bench::check_resolution(&problem.domain, &policy, n_max)?;
    let rule = policy.rule_for(&problem.domain, n_max).map_err(|e| CliError::Usage(e.to_string()))?;
    let exec = opts.execution.map(Execution::from).unwrap_or_default();
    let table = CoefficientTable::from_field(n_max, mu0, problem.field.as_ref(), &rule, exec)?;
    let breakdown = EnergyBreakdown::new(&table);
    let config = RunConfig {
        command: Command::Energy,
        n_max,
        degrees: (0..=n_max).collect(),
        domain: Some(problem.domain_spec),
        field: Some(problem.field_spec),
        quadrature: Some(resolved_quadrature(&problem.domain, &policy, n_max, rule.len())),
        mu0,
        k_max: None,
        seed: None,
        check: false,
        format: opts.format.unwrap_or(Format::Json),
        execution: exec,
    };

    if let Some(out) = &opts.out {
        let coefficients: serde_json::Value = serde_json::from_str(&table.to_json()).expect("table JSON is valid");
        match config.format {
            Format::Json => {
                let output = EnergyOutput { config: &config, breakdown: &breakdown, coefficients };
                write_file(out, &(serde_json::to_string_pretty(&output).expect("output serializes") + "\n"))?;
            }
            Format::Csv => {
                let mut s = String::new();
                let _ = writeln!(s, "# config: {}", config_json(&config));
                s.push_str("N,E_N,degree_contribution\n");
                for (n, (e, d)) in breakdown.cumulative.iter().zip(&breakdown.per_degree).enumerate() {
                    let _ = writeln!(s, "{n},{},{}", csv_num(*e), csv_num(*d));
                }
                write_file(out, &s)?;
                let sibling = coefficients_path(out);
                let output = serde_json::json!({ "config": &config, "coefficients": coefficients });
                write_file(&sibling, &(serde_json::to_string_pretty(&output).expect("output serializes") + "\n"))?;
            }
        }
    }

    println!("{:>4}  {:>14}  {:>14}", "N", "E_N", "degree");
    for (n, (e, d)) in breakdown.cumulative.iter().zip(&breakdown.per_degree).enumerate() {
        println!("{n:>4}  {e:>14.8}  {d:>14.8}");
    }
    Ok(EXIT_OK)
}

/// `out.csv` → `out.coefficients.json`.
pub fn coefficients_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.coefficients.json"))
}

fn cmd_basis_check(opts: &Opts) -> Result<i32, CliError> {
    let k_max = opts.kmax.unwrap_or(DEFAULT_KMAX);
    if k_max > 12 {
        return Err(CliError::Usage(format!("--kmax {k_max} is above the supported maximum of 12")));
    }
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let report = validation::basis_check(&validation::reference_basis, k_max, seed);
    let config = RunConfig {
        command: Command::BasisCheck,
        n_max: k_max,
        degrees: Vec::new(),
        domain: None,
        field: None,
        quadrature: None,
        mu0: 1.0,
        k_max: Some(k_max),
        seed: Some(seed),
        check: true,
        format: Format::Json,
        execution: Execution::default(),
    };
    eprint!("{}", basis_summary(&report));
    let output = serde_json::json!({ "config": &config, "report": &report });
    if let Some(out) = &opts.out {
        write_file(out, &(serde_json::to_string_pretty(&output).expect("output serializes") + "\n"))?;
    }
    let status = if report.pass { "pass" } else { "fail" };
    let summary = serde_json::json!({ "status": status, "failing_labels": &report.failing_labels, "report": &report });
    println!("{summary}");
    Ok(if report.pass { EXIT_OK } else { EXIT_TOLERANCE })
}

fn basis_summary(r: &BasisCheckReport) -> String {
    let mark = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let mut s = String::new();
    for c in &r.closed_forms {
        let ok = c.max_deviation < validation::CLOSED_FORM_TOLERANCE;
        let _ = writeln!(s, "{} closed form {} max deviation {:.3e}", mark(ok), c.alpha, c.max_deviation);
    }
    let lines = [
        ("S3 orthonormality", r.s3_orthonormality, validation::S3_ORTHONORMALITY_TOLERANCE),
        ("weighted orthogonality", r.weighted_orthogonality, validation::WEIGHTED_ORTHOGONALITY_TOLERANCE),
        ("gradient orthogonality", r.gradient_orthogonality, validation::GRADIENT_ORTHOGONALITY_TOLERANCE),
        ("eigen-relation", r.eigen_relation, validation::EIGEN_TOLERANCE),
    ];
    for (name, value, tol) in lines {
        let _ = writeln!(s, "{} {name} (k <= {}) deviation {value:.3e} < {tol:e}", mark(value < tol), r.k_max);
    }
    s
}

fn cmd_closed_forms(opts: &Opts) -> Result<i32, CliError> {
    let flat = opts.point.clone().unwrap_or_else(|| vec![0.3, -0.2, 0.5]);
    if flat.is_empty() || !flat.len().is_multiple_of(3) {
        return Err(CliError::Usage(format!("--point expects triples, got {} numbers", flat.len())));
    }
    let mut s = String::new();
    for p in flat.chunks(3) {
        let x = [p[0], p[1], p[2]];
        let _ = writeln!(s, "x = ({}, {}, {})", x[0], x[1], x[2]);
        for cf in &CLOSED_FORMS {
            let exact = (cf.eval)(x);
            let series = w_alpha(cf.alpha, R3Point(x));
            let _ = writeln!(
                s,
                "  {:<10} {:>24.16e} {:>24.16e} {:>10.2e}  {}",
                cf.alpha.to_string(),
                exact,
                series,
                (exact - series).abs(),
                cf.formula
            );
        }
    }
    if let Some(out) = &opts.out {
        write_file(out, &s)?;
    }
    print!("{s}");
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let flags = Opts { nmax: Some(5), ..Opts::default() };
        let file: Opts = serde_json::from_str(r#"{"nmax": 3, "mu0": 2.0, "ball": [0, 0, 0, 1]}"#).unwrap();
        let merged = flags.over(file);
        assert_eq!(merged.nmax, Some(5));
        assert_eq!(merged.mu0, Some(2.0));
        assert_eq!(merged.ball, Some(vec![0.0, 0.0, 0.0, 1.0]));
        assert!(serde_json::from_str::<Opts>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn csv_numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 0.07845252598, 1e-300, -2.5e10] {
            assert_eq!(csv_num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn sibling_coefficient_path() {
        assert_eq!(coefficients_path(Path::new("/tmp/run.csv")), PathBuf::from("/tmp/run.coefficients.json"));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["strayfield", "bench", "--example", "9"]), EXIT_USAGE);
        assert_eq!(run(["strayfield", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["strayfield", "energy", "--magnetization", "0,0,1"]), EXIT_USAGE);
        assert_eq!(run(["strayfield", "bench", "--example", "1", "--n", "20,10"]), EXIT_USAGE);
    }

    #[test]
    fn negative_coordinates_parse() {
        let cli = Cli::try_parse_from(["strayfield", "energy", "--box", "-0.5,-0.5,-0.5,0.5,0.5,0.5"]).unwrap();
        assert_eq!(cli.opts.cuboid.unwrap()[0], -0.5);
    }
}
