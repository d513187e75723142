//! Command-line front end: argument parsing, the six subcommands and their
//! tabular output.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 malformed or unsupported input,
//! 3 a model that violates an assumption the command needs.

use crate::concentration::{
    bias_constant_m, conditional_t1_constant, empirical_tail, sweep_t1_constant, t1_mgf_check,
    ConcentrationBoundParams, StationaryLaw, TailPart,
};
use crate::config::{ExperimentConfig, Observable, Part, StartKind};
use crate::dobrushin::{
    coefficient_matrix, dobrushin_norms, q_closed_form, q_product, ricci_lower_bound, update_matrix,
    verify_lemma_bounds, CoefficientMatrix, CLOSED_FORM_MAX_SITES,
};
use crate::error::{Error, Result};
use crate::kernel_exact::{build_transition_matrix_capped, cesaro_mean, exact_w1_to_stationary, invariance_check, tabulate};
use crate::models::{ConditionalModel, Distribution1D};
use crate::rng::SweepRng;
use crate::sampler::{estimate_w1_decay, marginal_validity_check, run_chain_with, Start, REPLICA_CHUNK};
use crate::space::{Configuration, GroundMetric};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const PROGRAM: &str = "dobrushin-gibbs";
pub const THREADS_ENV: &str = "DOBRUSHIN_GIBBS_THREADS";

#[derive(Debug, Parser)]
#[command(name = PROGRAM, version, about = "Systematic-scan Gibbs sampling with Dobrushin-coefficient certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving `<command>.<format>`; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Coefficient matrix, update matrices, their product and the norm certificate.
    Coeffs,
    /// Exact W1 and total variation to the Gibbs measure (finite models).
    Exact,
    /// Monte Carlo decay of the coupled distance.
    Couple,
    /// Per-sweep observable and site means of independent chains.
    Simulate,
    /// Empirical tails of ergodic averages against the bounds.
    Concentrate,
    /// Key/value summary of the model's constants.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Exact => "exact",
            Command::Couple => "couple",
            Command::Simulate => "simulate",
            Command::Concentrate => "concentrate",
            Command::Report => "report",
        }
    }

    /// Output file stem.
    pub fn file_stem(&self) -> &'static str {
        match self {
            Command::Couple => "decay",
            other => other.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(_) | Cell::Empty => Value::Null,
            Cell::Text(s) => json!(s),
        }
    }
}

/// Output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self, meta: &Meta) -> String {
        let mut out = format!(
            "# {} {} config_hash={} seed={}\n",
            PROGRAM,
            env!("CARGO_PKG_VERSION"),
            meta.config_hash,
            meta.seed
        );
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self, meta: &Meta) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        let doc = json!({
            "program": PROGRAM,
            "version": env!("CARGO_PKG_VERSION"),
            "command": meta.command,
            "config_hash": meta.config_hash,
            "seed": meta.seed,
            "columns": self.columns,
            "rows": rows,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
        text.push('\n');
        text
    }
}

/// Provenance written alongside every table.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Assumption(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::LengthMismatch { .. } => "length_mismatch",
        Error::KindMismatch(_) => "kind_mismatch",
        Error::IndexOutOfRange { .. } => "index_out_of_range",
        Error::SymbolOutOfRange { .. } => "symbol_out_of_range",
        Error::CapExceeded { .. } => "cap_exceeded",
        Error::InvalidValue(_) => "invalid_value",
        Error::InvalidModel(_) => "invalid_model",
        Error::NonNormalizable { .. } => "non_normalizable",
        Error::Unsupported(_) => "unsupported",
        Error::Assumption(_) => "assumption",
        Error::Infeasible(_) => "infeasible",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    }
}

/// The JSON object printed on stderr for a failed run.
pub fn error_json(err: &Error) -> String {
    json!({
        "error": error_kind(err),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    })
    .to_string()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            exit_code(&err)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    let format = match (cli.format, cfg.format.as_deref()) {
        (Some(f), _) => f,
        (None, Some("json")) => Format::Json,
        _ => Format::Csv,
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    let table = match cli.threads {
        Some(0) => return Err(Error::Config("--threads must be >= 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?
            .install(|| execute(cli.command, &cfg, seed))?,
        None => execute(cli.command, &cfg, seed)?,
    };
    let meta = Meta {
        command: cli.command.name(),
        config_hash: cfg.hash(),
        seed,
    };
    let text = match format {
        Format::Csv => table.to_csv(&meta),
        Format::Json => table.to_json(&meta),
    };
    let out_dir = cli.out.clone().or_else(|| cfg.out_dir.clone());
    match out_dir {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => {
            write_output(&dir, cli.command, format, &text)?;
            Ok(())
        }
    }
}

/// Writes `<dir>/<stem>.<ext>`, creating `dir` if needed.
pub fn write_output(dir: &Path, command: Command, format: Format, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let target = dir.join(format!("{}.{}", command.file_stem(), format.extension()));
    std::fs::write(&target, text).map_err(|e| Error::Io(format!("{}: {e}", target.display())))?;
    Ok(target)
}

/// Runs one command on a parsed config.
pub fn execute(command: Command, cfg: &ExperimentConfig, seed: u64) -> Result<Table> {
    match command {
        Command::Coeffs => coeffs(cfg),
        Command::Exact => exact(cfg),
        Command::Couple => couple(cfg, seed),
        Command::Simulate => simulate(cfg, seed),
        Command::Concentrate => concentrate(cfg, seed),
        Command::Report => report(cfg, seed),
    }
}

fn require_contraction(c: &CoefficientMatrix, what: &str) -> Result<()> {
    if c.r < 1.0 {
        Ok(())
    } else {
        Err(Error::Assumption(format!("{what} needs r < 1, got r = {}", c.r)))
    }
}

fn coeffs(cfg: &ExperimentConfig) -> Result<Table> {
    let c = coefficient_matrix(&cfg.model, cfg.metric)?;
    let n = c.sites();
    let mut t = Table::new(["section", "name", "row", "col", "value"]);
    let matrix = |t: &mut Table, name: &str, m: &ndarray::Array2<f64>| {
        for ((i, j), v) in m.indexed_iter() {
            t.push(vec!["matrix".into(), name.into(), (i + 1).into(), (j + 1).into(), (*v).into()]);
        }
    };
    matrix(&mut t, "C", c.matrix());
    let product = q_product(&c);
    let closed = if n <= CLOSED_FORM_MAX_SITES {
        for i in 0..n {
            matrix(&mut t, &format!("B_{}", i + 1), &update_matrix(&c, i)?);
        }
        let closed = q_closed_form(&c)?;
        matrix(&mut t, "Q", &product.q);
        matrix(&mut t, "Q_closed_form", &closed);
        Some((&closed - &product.q).iter().fold(0.0f64, |m, v| m.max(v.abs())))
    } else {
        matrix(&mut t, "Q", &product.q);
        None
    };
    let norms = dobrushin_norms(&c);
    let cert = verify_lemma_bounds(&c);
    let kappa = ricci_lower_bound(c.r1).ok();
    let entries: Vec<(&str, Cell)> = vec![
        ("r", norms.r.into()),
        ("r1", norms.r1.into()),
        ("h1", norms.h1.into()),
        ("h2", norms.h2.into()),
        ("h2_half", norms.h2_half.into()),
        ("q_inf_norm", cert.inf_norm.into()),
        ("q_one_norm", cert.one_norm.into()),
        ("inf_margin", cert.inf_margin.into()),
        ("inf_holds", cert.inf_holds.into()),
        ("one_bound", cert.one_bound.into()),
        ("one_margin", cert.one_margin.into()),
        ("one_holds", cert.one_holds.into()),
        ("kappa_lower", kappa.into()),
        ("closed_form_max_diff", closed.into()),
    ];
    for (name, value) in entries {
        t.push(vec!["certificate".into(), name.into(), Cell::Empty, Cell::Empty, value]);
    }
    Ok(t)
}

fn exact(cfg: &ExperimentConfig) -> Result<Table> {
    if !cfg.model.is_finite() {
        return Err(Error::Unsupported("exact needs a finite model".into()));
    }
    let c = coefficient_matrix(&cfg.model, cfg.metric)?;
    require_contraction(&c, "exact")?;
    let p = build_transition_matrix_capped(&cfg.model, cfg.cap)?;
    let mu = cfg.model.exact_gibbs_measure(cfg.cap)?;
    let k_list: Vec<usize> = cfg.k_list.clone().unwrap_or_else(|| (0..=cfg.k_max).collect());
    let rows = exact_w1_to_stationary(&cfg.model, cfg.metric, &p, &mu, &cfg.x0, &k_list, c.r)?;
    let mut t = Table::new(["k", "w1_exact", "tv_half", "bound_nrk"]);
    for r in rows {
        t.push(vec![r.k.into(), r.w1_exact.into(), r.tv_half.into(), r.bound_nrk.into()]);
    }
    Ok(t)
}

fn couple(cfg: &ExperimentConfig, seed: u64) -> Result<Table> {
    let c = coefficient_matrix(&cfg.model, cfg.metric)?;
    require_contraction(&c, "couple")?;
    let start = match cfg.start {
        StartKind::Points => Start::Points {
            x: cfg.x0.clone(),
            y: cfg.y0.clone().expect("checked by the parser"),
        },
        StartKind::Stationary => Start::Stationary { x: cfg.x0.clone() },
    };
    let report = estimate_w1_decay(&cfg.model, cfg.metric, &start, cfg.k_max, cfg.replicas, seed)?;
    let n = cfg.model.sites();
    let mut columns = vec!["sweep".to_string()];
    columns.extend((1..=n).map(|i| format!("mean_site_{i}")));
    columns.extend(["mean_l1", "stderr_l1", "bound_theorem23", "bound_qk"].map(String::from));
    let mut t = Table::new(columns);
    for row in report.rows {
        let mut cells: Vec<Cell> = vec![row.sweep.into()];
        cells.extend(row.mean_site.iter().map(|&v| Cell::from(v)));
        cells.extend([row.mean_l1, row.stderr_l1, row.bound_theorem23, row.bound_qk].map(Cell::from));
        t.push(cells);
    }
    Ok(t)
}

/// Running sums per sweep: observable, its square, and each site value.
#[derive(Clone)]
struct SweepSums {
    f: Vec<f64>,
    f2: Vec<f64>,
    sites: Vec<Vec<f64>>,
}

impl SweepSums {
    fn new(k_max: usize, n: usize) -> Self {
        SweepSums {
            f: vec![0.0; k_max + 1],
            f2: vec![0.0; k_max + 1],
            sites: vec![vec![0.0; n]; k_max + 1],
        }
    }

    fn add(&mut self, other: &SweepSums) {
        for k in 0..self.f.len() {
            self.f[k] += other.f[k];
            self.f2[k] += other.f2[k];
            for (a, b) in self.sites[k].iter_mut().zip(&other.sites[k]) {
                *a += b;
            }
        }
    }
}

fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<Table> {
    let model = &cfg.model;
    let (n, k_max, replicas) = (model.sites(), cfg.k_max, cfg.replicas);
    let obs = cfg.observable;
    if let (Observable::Fraction(s), Some(a)) = (obs, model.alphabet()) {
        if s >= a {
            return Err(Error::Config(format!("observable symbol {s} outside alphabet {a}")));
        }
    }
    let chunks = replicas.div_ceil(REPLICA_CHUNK);
    let parts: Vec<Result<SweepSums>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut sums = SweepSums::new(k_max, n);
            let lo = chunk * REPLICA_CHUNK;
            for replica in lo..(lo + REPLICA_CHUNK).min(replicas) {
                let mut rng = SweepRng::new(seed, replica as u64);
                run_chain_with(model, &cfg.x0, k_max, &mut rng, |k, z| {
                    let v = obs.evaluate(model, z);
                    sums.f[k] += v;
                    sums.f2[k] += v * v;
                    for (acc, x) in sums.sites[k].iter_mut().zip(model.site_values(z)) {
                        *acc += x;
                    }
                })?;
            }
            Ok(sums)
        })
        .collect();
    let mut total = SweepSums::new(k_max, n);
    for p in parts {
        total.add(&p?);
    }
    let m = replicas as f64;
    let mut columns = vec!["sweep".to_string(), "observable_mean".into(), "observable_stderr".into()];
    columns.extend((1..=n).map(|i| format!("site_mean_{i}")));
    let mut t = Table::new(columns);
    for k in 0..=k_max {
        let mean = total.f[k] / m;
        let stderr = if replicas > 1 {
            ((total.f2[k] - m * mean * mean).max(0.0) / (m - 1.0) / m).sqrt()
        } else {
            0.0
        };
        let mut cells: Vec<Cell> = vec![k.into(), mean.into(), stderr.into()];
        cells.extend(total.sites[k].iter().map(|s| Cell::from(s / m)));
        t.push(cells);
    }
    Ok(t)
}

/// `μ(f)` for a free model, where every sweep after the first is an exact
/// draw from `μ`.
fn free_expectation(law: &Distribution1D, sites: usize, obs: Observable) -> f64 {
    match obs {
        Observable::MeanValue => law.mean(),
        Observable::SumValue => sites as f64 * law.mean(),
        Observable::Fraction(s) => law.probs().map_or(f64::NAN, |p| p[s]),
    }
}

/// Exact `(1/n) Σ_{k=1}^n E f(Z_k)` from `x0`.
fn cesaro_centering(cfg: &ExperimentConfig) -> Result<f64> {
    let (model, obs) = (&cfg.model, cfg.observable);
    match model {
        ConditionalModel::Free(m) => Ok(free_expectation(&m.law, m.sites, obs)),
        ConditionalModel::GaussianLinear(g) => {
            if !obs.is_linear() {
                return Err(Error::Unsupported("Gaussian models support linear observables only".into()));
            }
            let mut mean = cfg.x0.reals().expect("validated").to_vec();
            let mut total = 0.0;
            for _ in 0..cfg.n {
                mean = g.sweep_law(&mean).0;
                total += obs.evaluate(model, &Configuration::Reals(mean.clone()));
            }
            Ok(total / cfg.n as f64)
        }
        _ => {
            let p = build_transition_matrix_capped(model, cfg.cap)?;
            let g = tabulate(model, |z| obs.evaluate(model, z))?;
            cesaro_mean(&p, &cfg.x0, &g, cfg.n)
        }
    }
}

fn concentrate(cfg: &ExperimentConfig, seed: u64) -> Result<Table> {
    let (model, metric, obs) = (&cfg.model, cfg.metric, cfg.observable);
    let t_grid = cfg
        .t_grid
        .as_deref()
        .ok_or_else(|| Error::Config("key `t_grid`: missing".into()))?;
    let c = coefficient_matrix(model, metric)?;
    let profile = obs.profile(model, metric)?;
    let mut params = ConcentrationBoundParams {
        n: cfg.n,
        sites: model.sites(),
        r1: c.r1,
        c1: conditional_t1_constant(model, metric)?,
        alpha: profile.lip_norm,
        r: c.r,
        m: 0.0,
    };
    let part = match cfg.part {
        Part::A => TailPart::A {
            centering: cesaro_centering(cfg)?,
        },
        Part::B => {
            require_contraction(&c, "part b")?;
            match model {
                ConditionalModel::Free(m) => TailPart::B {
                    mu_f: free_expectation(&m.law, m.sites, obs),
                },
                m if m.is_finite() => {
                    let mu = m.exact_gibbs_measure(cfg.cap)?;
                    let g = tabulate(m, |z| obs.evaluate(m, z))?;
                    params.m = bias_constant_m(m, metric, &profile, c.r, &cfg.x0, StationaryLaw::Exact(&mu))?.m;
                    TailPart::B {
                        mu_f: g.iter().zip(&mu).map(|(a, b)| a * b).sum(),
                    }
                }
                _ => return Err(Error::Unsupported("part b needs a finite or free model".into())),
            }
        }
    };
    let f = |z: &Configuration| obs.evaluate(model, z);
    let rep = empirical_tail(model, &f, &cfg.x0, t_grid, cfg.replicas, seed, &params, part)?;
    let mut t = Table::new([
        "t", "tail_count", "replicas", "tail_hat", "ci_lo", "ci_hi", "bound_a", "bound_b", "M", "n", "N", "r1", "C1",
        "alpha", "seed",
    ]);
    let p = &rep.params;
    for row in rep.rows {
        t.push(vec![
            row.t.into(),
            row.tail_count.into(),
            row.replicas.into(),
            row.tail_hat.into(),
            row.ci_lo.into(),
            row.ci_hi.into(),
            row.bound_a.into(),
            row.bound_b.into(),
            p.m.into(),
            p.n.into(),
            p.sites.into(),
            p.r1.into(),
            p.c1.into(),
            p.alpha.into(),
            seed.into(),
        ]);
    }
    Ok(t)
}

fn report(cfg: &ExperimentConfig, seed: u64) -> Result<Table> {
    let model = &cfg.model;
    let c = coefficient_matrix(model, cfg.metric)?;
    let norms = dobrushin_norms(&c);
    let cert = verify_lemma_bounds(&c);
    let c1 = conditional_t1_constant(model, cfg.metric).ok();
    let kind = match model {
        ConditionalModel::IsingGraph(_) => "ising",
        ConditionalModel::GaussianLinear(_) => "gaussian",
        ConditionalModel::Free(_) => "free",
        ConditionalModel::FinitePotential(_) => "potential",
    };
    let metric = match cfg.metric {
        GroundMetric::Discrete => "discrete",
        GroundMetric::AbsoluteDifference => "absolute",
    };
    let invariance = if model.is_finite() {
        match (build_transition_matrix_capped(model, cfg.cap), model.exact_gibbs_measure(cfg.cap)) {
            (Ok(p), Ok(mu)) => Some(invariance_check(&p, &mu)?),
            _ => None,
        }
    } else {
        None
    };
    let sweep_c = c1.and_then(|c1| sweep_t1_constant(model.sites(), c1, norms.r1).ok());
    let mgf = match (sweep_c, cfg.observable.profile(model, cfg.metric)) {
        (Some(c), Ok(profile)) => {
            let f = |z: &Configuration| cfg.observable.evaluate(model, z);
            let rows = t1_mgf_check(model, &cfg.x0, &f, profile.lip_norm, &cfg.lambda_grid, c, cfg.draws, seed)?;
            let checked: Vec<_> = rows.iter().filter(|r| r.stable && r.lambda != 0.0).collect();
            let worst = checked.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
            Some((checked.len(), worst, checked.iter().all(|r| r.holds())))
        }
        _ => None,
    };
    let marginal = match &cfg.y0 {
        Some(y0) => Some(marginal_validity_check(model, cfg.metric, &cfg.x0, y0, cfg.site, cfg.draws, seed)?),
        None => None,
    };
    let entries: Vec<(&str, Cell)> = vec![
        ("kind", kind.into()),
        ("sites", model.sites().into()),
        ("metric", metric.into()),
        ("r", norms.r.into()),
        ("r1", norms.r1.into()),
        ("h1", norms.h1.into()),
        ("h2", norms.h2.into()),
        ("h2_half", norms.h2_half.into()),
        ("q_inf_norm", cert.inf_norm.into()),
        ("q_one_norm", cert.one_norm.into()),
        ("inf_margin", cert.inf_margin.into()),
        ("one_bound", cert.one_bound.into()),
        ("one_margin", cert.one_margin.into()),
        ("kappa_lower", ricci_lower_bound(norms.r1).ok().into()),
        ("c1", c1.into()),
        ("sweep_t1_constant", sweep_c.into()),
        ("invariance_residual", invariance.into()),
        ("mgf_lambdas", mgf.map(|m| m.0).into()),
        ("mgf_min_margin", mgf.map(|m| m.1).into()),
        ("mgf_holds", mgf.map(|m| m.2).into()),
        ("marginal_site", marginal.as_ref().map(|m| m.site + 1).into()),
        ("marginal_min_p", marginal.as_ref().map(|m| m.first.p_value.min(m.second.p_value)).into()),
        ("marginal_flagged", marginal.as_ref().map(|m| m.flagged).into()),
    ];
    let mut t = Table::new(["key", "value"]);
    for (k, v) in entries {
        t.push(vec![k.into(), v]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    const ISING: &str = "kind = ising\nn_sites = 3\nbeta = 0.2\nedges = 1 2 1; 2 3 1\nk_max = 4\nreplicas = 200\n";

    #[test]
    fn csv_and_json_share_rows() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![1usize.into(), f64::NAN.into()]);
        t.push(vec![Cell::Empty, 0.5.into()]);
        let meta = Meta {
            command: "report",
            config_hash: "ab".into(),
            seed: 7,
        };
        let csv = t.to_csv(&meta);
        assert!(csv.starts_with(&format!("# dobrushin-gibbs {} config_hash=ab seed=7\na,b\n", env!("CARGO_PKG_VERSION"))));
        assert!(csv.ends_with("1,NaN\n,5.0000000000000000e-1\n"));
        let v: Value = serde_json::from_str(&t.to_json(&meta)).unwrap();
        assert_eq!(v["rows"][0][1], Value::Null);
        assert_eq!(v["rows"][1][1], json!(0.5));
        assert_eq!(v["seed"], json!(7));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Assumption("x".into())), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::CapExceeded { size: 10, cap: 1 }), 2);
        assert_eq!(exit_code(&Error::Io("x".into())), 1);
        let v: Value = serde_json::from_str(&error_json(&Error::Config("bad".into()))).unwrap();
        assert_eq!(v["error"], json!("config"));
    }

    #[test]
    fn coeffs_table_contains_certificate() {
        let t = execute(Command::Coeffs, &cfg(ISING), 0).unwrap();
        let r = t
            .rows
            .iter()
            .find(|row| row[1] == Cell::Text("r".into()))
            .map(|row| row[4].clone())
            .unwrap();
        let Cell::Float(r) = r else { panic!("r is numeric") };
        assert!((r - 0.4f64.tanh()).abs() < 1e-15);
        assert!(t.rows.iter().any(|row| row[1] == Cell::Text("B_3".into())));
    }

    #[test]
    fn strong_coupling_is_an_assumption_error() {
        let strong = cfg("kind = ising\nn_sites = 4\nbeta = 1\nedges = 1 2 1; 1 3 1; 1 4 1\n");
        assert!(matches!(execute(Command::Exact, &strong, 0), Err(Error::Assumption(_))));
        assert!(matches!(execute(Command::Couple, &strong, 0), Err(Error::Assumption(_))));
        assert!(execute(Command::Report, &strong, 0).is_ok());
    }

    #[test]
    fn simulate_is_thread_independent() {
        let c = cfg(ISING);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| execute(Command::Simulate, &c, 5).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| execute(Command::Simulate, &c, 5).unwrap());
        assert_eq!(one, four);
        assert_eq!(one.rows.len(), 5);
        // sweep 0 is the all-plus start
        assert_eq!(one.rows[0][1], Cell::Float(1.0));
        assert_eq!(one.rows[0][2], Cell::Float(0.0));
    }

    #[test]
    fn gaussian_centering_matches_mean_iteration() {
        let c = cfg("kind = gaussian\nn_sites = 2\nA = 0 0.3 0.3 0\nsigma = 0.95\nx0 = 2 2\nn = 3\n");
        let g = c.model.gaussian().unwrap();
        let mut m = vec![2.0, 2.0];
        let mut total = 0.0;
        for _ in 0..3 {
            m = g.sweep_law(&m).0;
            total += (m[0] + m[1]) / 2.0;
        }
        assert!((cesaro_centering(&c).unwrap() - total / 3.0).abs() < 1e-15);
    }
}
