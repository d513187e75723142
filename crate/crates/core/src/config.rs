//! Strict `key = value` experiment files.
//!
//! One entry per line, `#` starts a comment, list values are separated by
//! whitespace and the `edges` list separates triples with `;`. Site numbers
//! in config files are 1-based. Unknown or repeated keys are rejected.
//!
//! The model keys may live in a separate file named by `model_file`
//! (relative to the experiment file); a key set in both places is an error.
//!
//! ```text
//! kind = ising
//! n_sites = 3
//! beta = 0.3
//! edges = 1 2 1.0; 2 3 1.0
//! seed = 42
//! ```

use crate::error::{Error, Result};
use crate::models::{ConditionalModel, Distribution1D, FinitePotential, FreeModel, GaussianLinear, IsingGraph};
use crate::space::{Configuration, GroundMetric, LipschitzProfile};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Every key the parser accepts.
pub const KNOWN_KEYS: &[&str] = &[
    // model
    "kind",
    "n_sites",
    "beta",
    "edges",
    "field",
    "A",
    "offsets",
    "sigma",
    "alphabet",
    "potential_table",
    "reference",
    "site_law",
    "support",
    "metric",
    "model_file",
    "enumeration_cap",
    // experiment
    "seed",
    "k_max",
    "k_list",
    "replicas",
    "n",
    "t_grid",
    "lambda_grid",
    "x0",
    "y0",
    "start",
    "draws",
    "observable",
    "part",
    "site",
    "format",
    "out_dir",
];

/// Parsed but uninterpreted entries, with their line numbers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (number, line) in text.lines().enumerate() {
            let line_no = number + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {line_no}: unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("line {line_no}: key `{key}` has no value")));
            }
            let normalized = value.split_whitespace().collect::<Vec<_>>().join(" ");
            if entries.insert(key.to_string(), (line_no, normalized)).is_some() {
                return Err(Error::Config(format!("line {line_no}: key `{key}` repeated")));
            }
        }
        Ok(RawConfig { entries })
    }

    /// Adds the entries of `other`; keys present in both are an error.
    pub fn merge(&mut self, other: RawConfig, origin: &str) -> Result<()> {
        for (key, entry) in other.entries {
            if key == "model_file" {
                return Err(Error::Config(format!("{origin}: `model_file` cannot be nested")));
            }
            if self.entries.contains_key(&key) {
                return Err(Error::Config(format!("{origin}: key `{key}` also set in the experiment file")));
            }
            self.entries.insert(key, entry);
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// SHA-256 of the normalized entries (sorted `key=value` lines), so
    /// comments, spacing and ordering do not change it.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, (_, v)) in &self.entries {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    fn fail(&self, key: &str, reason: impl std::fmt::Display) -> Error {
        match self.entries.get(key) {
            Some((line, _)) => Error::Config(format!("line {line}: key `{key}`: {reason}")),
            None => Error::Config(format!("key `{key}`: {reason}")),
        }
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| self.fail(key, "missing"))
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.fail(key, format!("cannot parse `{v}`"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split_whitespace()
                .map(|tok| tok.parse::<T>().map_err(|_| self.fail(key, format!("cannot parse `{tok}`"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

/// Observable evaluated along the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `(1/N) Σ_i value(x^i)`
    MeanValue,
    /// `Σ_i value(x^i)`
    SumValue,
    /// `(1/N) #{i : x^i = s}`
    Fraction(usize),
}

impl Observable {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        match tokens.as_slice() {
            ["mean_value"] => Ok(Observable::MeanValue),
            ["sum_value"] => Ok(Observable::SumValue),
            ["fraction", s] => s
                .parse()
                .map(Observable::Fraction)
                .map_err(|_| Error::Config(format!("bad symbol in `{text}`"))),
            _ => Err(Error::Config(format!("expected `mean_value`, `sum_value` or `fraction <symbol>`, got `{text}`"))),
        }
    }

    pub fn evaluate(&self, model: &ConditionalModel, x: &Configuration) -> f64 {
        let n = x.len() as f64;
        match (self, x) {
            (Observable::Fraction(s), Configuration::Symbols(v)) => {
                v.iter().filter(|&&a| a == *s).count() as f64 / n
            }
            (Observable::Fraction(_), Configuration::Reals(_)) => f64::NAN,
            (Observable::SumValue, _) => model.site_values(x).iter().sum(),
            (Observable::MeanValue, _) => model.site_values(x).iter().sum::<f64>() / n,
        }
    }

    /// Per-site Lipschitz coefficients under `metric`.
    pub fn profile(&self, model: &ConditionalModel, metric: GroundMetric) -> Result<LipschitzProfile> {
        let n = model.sites();
        let scale = match self {
            Observable::SumValue => 1.0,
            _ => 1.0 / n as f64,
        };
        let delta = match (self, model.alphabet(), metric) {
            (Observable::Fraction(s), Some(a), metric) => {
                if *s >= a {
                    return Err(Error::Config(format!("observable symbol {s} outside alphabet {a}")));
                }
                match metric {
                    GroundMetric::Discrete => scale,
                    GroundMetric::AbsoluteDifference => {
                        let gap = (0..a)
                            .filter(|b| b != s)
                            .map(|b| (model.symbol_value(b) - model.symbol_value(*s)).abs())
                            .fold(f64::INFINITY, f64::min);
                        scale / gap
                    }
                }
            }
            (Observable::Fraction(_), None, _) => {
                return Err(Error::Config("fraction observable needs a finite model".into()))
            }
            (_, Some(a), GroundMetric::Discrete) => {
                let values: Vec<f64> = (0..a).map(|s| model.symbol_value(s)).collect();
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                scale * (hi - lo)
            }
            (_, _, GroundMetric::AbsoluteDifference) => scale,
            (_, None, GroundMetric::Discrete) => {
                return Err(Error::Config("real-valued models use metric = absolute".into()))
            }
        };
        LipschitzProfile::declared(vec![delta; n])
    }

    /// Whether the observable is a linear function of the site values.
    pub fn is_linear(&self) -> bool {
        !matches!(self, Observable::Fraction(_))
    }
}

/// Which part of the concentration statement a run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    A,
    B,
}

/// Initial condition kind for `couple`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartKind {
    Points,
    Stationary,
}

/// A fully interpreted experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub model: ConditionalModel,
    pub metric: GroundMetric,
    pub seed: u64,
    pub k_max: usize,
    pub k_list: Option<Vec<usize>>,
    pub replicas: usize,
    pub n: usize,
    pub t_grid: Option<Vec<f64>>,
    pub lambda_grid: Vec<f64>,
    pub x0: Configuration,
    pub y0: Option<Configuration>,
    pub start: StartKind,
    pub draws: usize,
    pub observable: Observable,
    pub part: Part,
    /// 0-based.
    pub site: usize,
    /// Output format requested in the file, if any.
    pub format: Option<String>,
    /// Output directory requested in the file, relative to the file.
    pub out_dir: Option<PathBuf>,
    /// Largest state space enumerated by exact computations.
    pub cap: usize,
}

pub const DEFAULT_K_MAX: usize = 20;
pub const DEFAULT_REPLICAS: usize = 1000;
pub const DEFAULT_N: usize = 100;
pub const DEFAULT_DRAWS: usize = 100_000;
pub const DEFAULT_LAMBDA_GRID: [f64; 9] = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))
        };
        let mut raw = RawConfig::parse(&read(path)?)?;
        if let Some(name) = raw.get("model_file").map(str::to_string) {
            let model_path = path.parent().unwrap_or(Path::new(".")).join(&name);
            let model = RawConfig::parse(&read(&model_path)?)?;
            raw.merge(model, &name)?;
        }
        let mut cfg = Self::from_raw(raw)?;
        if let (Some(dir), Some(parent)) = (&cfg.out_dir, path.parent()) {
            cfg.out_dir = Some(parent.join(dir));
        }
        Ok(cfg)
    }

    /// Parses an experiment file with the model given inline.
    pub fn parse(text: &str) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        if raw.contains("model_file") {
            return Err(raw.fail("model_file", "only supported when loading from a path"));
        }
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let cap = raw.scalar::<usize>("enumeration_cap")?.unwrap_or(crate::space::DEFAULT_ENUMERATION_CAP);
        if cap == 0 {
            return Err(raw.fail("enumeration_cap", "must be >= 1"));
        }
        let model = build_model(&raw, cap)?;
        let metric = match raw.get("metric") {
            None => model.default_metric(),
            Some("discrete") => GroundMetric::Discrete,
            Some("absolute") => GroundMetric::AbsoluteDifference,
            Some(other) => return Err(raw.fail("metric", format!("expected discrete|absolute, got `{other}`"))),
        };
        let positive = |key: &str, default: usize| -> Result<usize> {
            let v = raw.scalar::<usize>(key)?.unwrap_or(default);
            if v == 0 {
                return Err(raw.fail(key, "must be >= 1"));
            }
            Ok(v)
        };
        let x0 = match raw.get("x0") {
            Some(v) => parse_configuration(&raw, "x0", v, &model)?,
            None => model.base_point(),
        };
        let y0 = raw
            .get("y0")
            .map(|v| parse_configuration(&raw, "y0", v, &model))
            .transpose()?;
        let start = match raw.get("start") {
            None if y0.is_some() => StartKind::Points,
            None => StartKind::Stationary,
            Some("points") => StartKind::Points,
            Some("stationary") => StartKind::Stationary,
            Some(other) => return Err(raw.fail("start", format!("expected points|stationary, got `{other}`"))),
        };
        if start == StartKind::Points && y0.is_none() {
            return Err(raw.fail("y0", "required when start = points"));
        }
        let observable = match raw.get("observable") {
            Some(v) => Observable::parse(v).map_err(|e| match e {
                Error::Config(m) => raw.fail("observable", m),
                e => e,
            })?,
            None => Observable::MeanValue,
        };
        let part = match raw.get("part") {
            None | Some("a") => Part::A,
            Some("b") => Part::B,
            Some(other) => return Err(raw.fail("part", format!("expected a|b, got `{other}`"))),
        };
        let site = match raw.scalar::<usize>("site")? {
            None => 0,
            Some(s) if s >= 1 && s <= model.sites() => s - 1,
            Some(s) => return Err(raw.fail("site", format!("{s} outside 1..={}", model.sites()))),
        };
        let format = raw.get("format").map(str::to_string);
        if let Some(f) = &format {
            if f != "csv" && f != "json" {
                return Err(raw.fail("format", "expected csv|json"));
            }
        }
        let t_grid: Option<Vec<f64>> = raw.list("t_grid")?;
        if let Some(ts) = &t_grid {
            if ts.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                return Err(raw.fail("t_grid", "values must be positive"));
            }
        }
        Ok(ExperimentConfig {
            seed: raw.scalar::<u64>("seed")?.unwrap_or(0),
            k_max: raw.scalar::<usize>("k_max")?.unwrap_or(DEFAULT_K_MAX),
            k_list: raw.list("k_list")?,
            replicas: positive("replicas", DEFAULT_REPLICAS)?,
            n: positive("n", DEFAULT_N)?,
            t_grid,
            lambda_grid: raw.list("lambda_grid")?.unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec()),
            draws: positive("draws", DEFAULT_DRAWS)?,
            x0,
            y0,
            start,
            observable,
            part,
            site,
            format,
            out_dir: raw.get("out_dir").map(PathBuf::from),
            cap,
            model,
            metric,
            raw,
        })
    }

    pub fn hash(&self) -> String {
        self.raw.hash()
    }
}

fn parse_configuration(raw: &RawConfig, key: &str, value: &str, model: &ConditionalModel) -> Result<Configuration> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    let x = match model {
        ConditionalModel::IsingGraph(_) => Configuration::Symbols(
            tokens
                .iter()
                .map(|t| match *t {
                    "+" | "+1" | "1" => Ok(1),
                    "-" | "-1" => Ok(0),
                    other => Err(raw.fail(key, format!("spin must be + or -, got `{other}`"))),
                })
                .collect::<Result<_>>()?,
        ),
        m if m.is_finite() => Configuration::Symbols(
            tokens
                .iter()
                .map(|t| t.parse().map_err(|_| raw.fail(key, format!("bad symbol `{t}`"))))
                .collect::<Result<_>>()?,
        ),
        _ => Configuration::Reals(
            tokens
                .iter()
                .map(|t| t.parse().map_err(|_| raw.fail(key, format!("bad real `{t}`"))))
                .collect::<Result<_>>()?,
        ),
    };
    model
        .validate_configuration(&x)
        .map_err(|e| raw.fail(key, e))?;
    Ok(x)
}

fn build_model(raw: &RawConfig, cap: usize) -> Result<ConditionalModel> {
    let kind = raw.required("kind")?;
    let n: usize = raw.scalar("n_sites")?.ok_or_else(|| raw.fail("n_sites", "missing"))?;
    if n == 0 {
        return Err(raw.fail("n_sites", "must be >= 1"));
    }
    let allowed: &[&str] = match kind {
        "ising" => &["beta", "edges", "field"],
        "gaussian" => &["A", "offsets", "sigma"],
        "free" => &["site_law", "support"],
        "potential" => &["alphabet", "potential_table", "reference"],
        other => return Err(raw.fail("kind", format!("expected ising|gaussian|free|potential, got `{other}`"))),
    };
    const MODEL_KEYS: &[&str] = &[
        "beta",
        "edges",
        "field",
        "A",
        "offsets",
        "sigma",
        "site_law",
        "support",
        "alphabet",
        "potential_table",
        "reference",
    ];
    for key in MODEL_KEYS {
        if raw.contains(key) && !allowed.contains(key) {
            return Err(raw.fail(key, format!("not valid for kind = {kind}")));
        }
    }
    let exact_len = |key: &str, v: Vec<f64>, len: usize| -> Result<Vec<f64>> {
        if v.len() != len {
            return Err(raw.fail(key, format!("expected {len} values, got {}", v.len())));
        }
        Ok(v)
    };
    let model = match kind {
        "ising" => {
            let beta: f64 = raw.scalar("beta")?.ok_or_else(|| raw.fail("beta", "missing"))?;
            let mut j = vec![0.0; n * n];
            if let Some(edges) = raw.get("edges") {
                for triple in edges.split(';').map(str::trim).filter(|t| !t.is_empty()) {
                    let parts: Vec<&str> = triple.split_whitespace().collect();
                    let [a, b, w] = parts.as_slice() else {
                        return Err(raw.fail("edges", format!("expected `i j J`, got `{triple}`")));
                    };
                    let parse_site = |s: &str| -> Result<usize> {
                        match s.parse::<usize>() {
                            Ok(v) if v >= 1 && v <= n => Ok(v - 1),
                            _ => Err(raw.fail("edges", format!("site `{s}` outside 1..={n}"))),
                        }
                    };
                    let (a, b) = (parse_site(a)?, parse_site(b)?);
                    let w: f64 = w.parse().map_err(|_| raw.fail("edges", format!("bad coupling `{w}`")))?;
                    if a == b {
                        return Err(raw.fail("edges", "self-loops are not allowed"));
                    }
                    j[a * n + b] = w;
                    j[b * n + a] = w;
                }
            }
            let field = match raw.list("field")? {
                Some(v) => exact_len("field", v, n)?,
                None => vec![0.0; n],
            };
            ConditionalModel::IsingGraph(IsingGraph::new(n, j, field, beta)?)
        }
        "gaussian" => {
            let a = exact_len("A", raw.list("A")?.ok_or_else(|| raw.fail("A", "missing"))?, n * n)?;
            let offsets = match raw.list("offsets")? {
                Some(v) => exact_len("offsets", v, n)?,
                None => vec![0.0; n],
            };
            let sigma: Vec<f64> = raw.list("sigma")?.ok_or_else(|| raw.fail("sigma", "missing"))?;
            let sigma = if sigma.len() == 1 { vec![sigma[0]; n] } else { exact_len("sigma", sigma, n)? };
            ConditionalModel::GaussianLinear(GaussianLinear::new(n, a, offsets, sigma)?)
        }
        "free" => {
            let law_text = raw.required("site_law")?;
            let tokens: Vec<&str> = law_text.split_whitespace().collect();
            let law = match tokens.split_first() {
                Some((&"pmf", rest)) => {
                    let probs = rest
                        .iter()
                        .map(|t| t.parse::<f64>().map_err(|_| raw.fail("site_law", format!("bad probability `{t}`"))))
                        .collect::<Result<Vec<_>>>()?;
                    match raw.list::<f64>("support")? {
                        Some(s) => Distribution1D::pmf_on(probs, s),
                        None => Distribution1D::pmf(probs),
                    }
                    .map_err(|e| raw.fail("site_law", e))?
                }
                Some((&"gaussian", [m, s])) => {
                    let m: f64 = m.parse().map_err(|_| raw.fail("site_law", "bad mean"))?;
                    let s: f64 = s.parse().map_err(|_| raw.fail("site_law", "bad sd"))?;
                    Distribution1D::gaussian(m, s).map_err(|e| raw.fail("site_law", e))?
                }
                _ => return Err(raw.fail("site_law", "expected `pmf p1 p2 ...` or `gaussian mean sd`")),
            };
            if raw.contains("support") && law.probs().is_none() {
                return Err(raw.fail("support", "only valid with a pmf site law"));
            }
            ConditionalModel::Free(FreeModel { sites: n, law })
        }
        "potential" => {
            let alphabet: usize = raw.scalar("alphabet")?.ok_or_else(|| raw.fail("alphabet", "missing"))?;
            let size = crate::space::enumeration_size(alphabet, n, cap)
                .map_err(|e| raw.fail("potential_table", e))?;
            let table = exact_len(
                "potential_table",
                raw.list("potential_table")?.ok_or_else(|| raw.fail("potential_table", "missing"))?,
                size,
            )?;
            let reference = match raw.list("reference")? {
                Some(v) => exact_len("reference", v, alphabet)?,
                None => vec![1.0 / alphabet as f64; alphabet],
            };
            ConditionalModel::FinitePotential(FinitePotential::new(n, alphabet, table, reference)?)
        }
        _ => unreachable!(),
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISING: &str = "# three spins\nkind = ising\nn_sites = 3\nbeta = 0.3\nedges = 1 2 1.0; 2 3 1.0\nseed = 42\n";

    #[test]
    fn parses_an_ising_file() {
        let c = ExperimentConfig::parse(ISING).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.model.sites(), 3);
        assert_eq!(c.metric, GroundMetric::Discrete);
        assert_eq!(c.x0, Configuration::Symbols(vec![1, 1, 1]));
        assert_eq!(c.start, StartKind::Stationary);
        match &c.model {
            ConditionalModel::IsingGraph(m) => {
                assert_eq!(m.couplings[1], 1.0);
                assert_eq!(m.couplings[2], 0.0);
                assert_eq!(m.couplings[5], 1.0);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("kind = ising\nn_sites = 2\nbetta = 0.3\n").unwrap_err();
        assert!(matches!(&err, Error::Config(msg) if msg.contains("betta") && msg.contains("line 3")), "{err}");
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "kind = ising\nn_sites = 2\nbeta = 0.3\nbeta = 0.4\n",
            "kind = ising\nn_sites = 2\nbeta\n",
            "kind = ising\nn_sites = 2\nbeta = \n",
            "kind = ising\nn_sites = 2\nbeta = x\n",
            "kind = ising\nn_sites = 2\nbeta = 0.3\nedges = 1 3 1.0\n",
            "kind = ising\nn_sites = 2\nbeta = 0.3\nsigma = 1\n",
            "kind = ising\nn_sites = 2\nbeta = 0.3\nreplicas = 0\n",
            "kind = ising\nn_sites = 2\nbeta = 0.3\nx0 = + 0\n",
            "kind = ising\nn_sites = 2\nbeta = 0.3\nstart = points\n",
            "kind = gaussian\nn_sites = 2\nA = 0 0.3 0.3\nsigma = 1\n",
            "kind = free\nn_sites = 2\nsite_law = pmf 0.5 0.6\n",
            "kind = potential\nn_sites = 2\nalphabet = 2\npotential_table = 0 0 0\n",
            "kind = magnet\nn_sites = 2\n",
            "n_sites = 2\n",
        ] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config(_)) | Err(Error::InvalidModel(_))), "{bad}");
        }
    }

    #[test]
    fn hash_ignores_layout() {
        let a = RawConfig::parse("kind = free\nn_sites = 2\n").unwrap();
        let b = RawConfig::parse("# c\n  n_sites=2   \nkind =   free # trailing\n").unwrap();
        let c = RawConfig::parse("kind = free\nn_sites = 3\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn other_model_kinds() {
        let g = ExperimentConfig::parse("kind = gaussian\nn_sites = 2\nA = 0 0.3 0.3 0\nsigma = 0.9\nx0 = 0 1\ny0 = 0 -1\n").unwrap();
        assert_eq!(g.metric, GroundMetric::AbsoluteDifference);
        assert_eq!(g.start, StartKind::Points);
        assert_eq!(g.y0, Some(Configuration::Reals(vec![0.0, -1.0])));
        let f = ExperimentConfig::parse("kind = free\nn_sites = 4\nsite_law = pmf 0.5 0.5\nsupport = -1 1\n").unwrap();
        assert_eq!(f.model.symbol_value(0), -1.0);
        let p = ExperimentConfig::parse(
            "kind = potential\nn_sites = 2\nalphabet = 2\npotential_table = 0 1 1 0\nreference = 0.5 0.5\nobservable = fraction 1\npart = b\nsite = 2\n",
        )
        .unwrap();
        assert_eq!(p.observable, Observable::Fraction(1));
        assert_eq!((p.part, p.site), (Part::B, 1));
    }

    #[test]
    fn model_file_is_merged() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("model.cfg"), "kind = free\nn_sites = 5\nsite_law = gaussian 0 2\n").unwrap();
        let exp = dir.path().join("exp.cfg");
        std::fs::write(&exp, "model_file = model.cfg\nseed = 3\nenumeration_cap = 64\n").unwrap();
        let c = ExperimentConfig::load(&exp).unwrap();
        assert_eq!((c.model.sites(), c.seed, c.cap), (5, 3, 64));
        std::fs::write(&exp, "model_file = model.cfg\nn_sites = 4\n").unwrap();
        assert!(matches!(ExperimentConfig::load(&exp), Err(Error::Config(m)) if m.contains("n_sites")));
        assert!(ExperimentConfig::parse("model_file = model.cfg\n").is_err());
        let capped = "kind = potential\nn_sites = 3\nalphabet = 2\npotential_table = 0 0 0 0 0 0 0 0\nenumeration_cap = 4\n";
        assert!(ExperimentConfig::parse(capped).is_err());
    }

    #[test]
    fn observable_profiles() {
        let c = ExperimentConfig::parse(ISING).unwrap();
        let up = Observable::Fraction(1).profile(&c.model, GroundMetric::Discrete).unwrap();
        assert!((up.lip_norm - 1.0 / 3.0).abs() < 1e-15);
        let mean = Observable::MeanValue.profile(&c.model, GroundMetric::Discrete).unwrap();
        assert!((mean.lip_norm - 2.0 / 3.0).abs() < 1e-15);
        let x = Configuration::Symbols(vec![1, 0, 1]);
        assert!((Observable::Fraction(1).evaluate(&c.model, &x) - 2.0 / 3.0).abs() < 1e-15);
        assert!((Observable::MeanValue.evaluate(&c.model, &x) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(Observable::SumValue.evaluate(&c.model, &x), 1.0);
        // brute force agrees with the declared profile
        let brute = LipschitzProfile::brute_force(|z: &Configuration| Observable::MeanValue.evaluate(&c.model, z), 2, 3, 64).unwrap();
        assert_eq!(brute.deltas.len(), 3);
        for (a, b) in brute.deltas.iter().zip(&mean.deltas) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
