//! Experiment configuration files.
//!
//! A config is a TOML document with a fixed set of sections. Sites are
//! numbered from 1 in configs and from 0 everywhere else. Unknown sections or
//! keys are errors, and validation reports every problem it finds rather
//! than stopping at the first one.
//!
//! ```toml
//! [system]
//! lattice = "chain"          # or "square"
//! extent = [8]               # sites per dimension
//! spin = 1                   # 1, 0.5, "1/2"; an array sweeps several values
//! exchange = 1.0             # J in meV, or [Jx, Jy, Jz]
//! anisotropy = 2.0           # K in meV (optional)
//! field = [0.0, 0.0, 0.0]    # B in tesla (optional)
//! g_factor = 2.0             # (optional)
//!
//! [tip]                      # optional
//! site = 1
//! direction = [0.0, 0.0, 1.0]
//! norm = [1.0, 2.0, 4.0]     # ‖P‖ in meV; or `prefactor = p`,
//!                            # or coupling/current/polarization/kappa/height
//!
//! [thermal]
//! temperature = 0.5          # K; or `beta` in 1/meV, may be "inf"
//!
//! [time]
//! start = 0.0
//! stop = 20.0
//! count = 2001
//!
//! [bounds]
//! kinds = ["new_B_1d", "tilde_B"]
//! from = 1
//! to = 8
//! threshold = 0.05
//! xi = "optimize"            # or a number
//! clamp = true
//!
//! [observe]
//! sites = [8]
//! epsilon = 0.01             # fraction of s
//! epsilons = [0.005, 0.01, 0.05]
//! method = "auto"            # "dense" | "krylov"
//!
//! [output]
//! dir = "out"
//! svg = false
//! ```

use std::fmt;
use std::path::PathBuf;

use lrlab_core::dynamics::KrylovOptions;
use lrlab_core::units::{beta_from_kelvin, DEFAULT_G_FACTOR};
use lrlab_core::{linspace, BoundKind, EvolutionMethod, Lattice, Spin, SpinSystem, TipParameters, Vec3};
use serde::Serialize;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, column: usize, message: String },
    Invalid(Vec<Problem>),
}

/// One semantic problem, tied to the dotted key that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, column, message } => {
                write!(f, "syntax error at line {line}, column {column}: {message}")
            }
            ConfigError::Invalid(problems) => {
                write!(f, "{} problem(s) in config", problems.len())?;
                for p in problems {
                    write!(f, "\n  {p}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Square,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSpec {
    pub lattice: LatticeKind,
    pub extent: Vec<usize>,
    /// One system is built per entry.
    #[serde(serialize_with = "ser_spins")]
    pub spins: Vec<Spin>,
    pub exchange: Vec3,
    pub anisotropy: f64,
    pub field: Vec3,
    pub g_factor: f64,
}

impl SystemSpec {
    pub fn lattice(&self) -> lrlab_core::Result<Lattice> {
        Lattice::new(self.extent.clone())
    }

    pub fn sites(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn build(&self, spin: Spin) -> lrlab_core::Result<SpinSystem> {
        let mut sys = SpinSystem::uniform(self.lattice()?, spin);
        sys.add_nearest_neighbor_exchange(self.exchange)?;
        if self.anisotropy != 0.0 {
            sys.add_uniform_anisotropy(self.anisotropy)?;
        }
        if self.field.iter().any(|&b| b != 0.0) {
            sys.add_uniform_zeeman(self.g_factor, self.field)?;
        }
        Ok(sys)
    }
}

fn ser_spins<S: serde::Serializer>(spins: &[Spin], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(spins.iter().map(|x| x.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TipStrength {
    /// ‖P‖ values in meV, one run each.
    Norms(Vec<f64>),
    Prefactor(f64),
    Raw {
        coupling: f64,
        current: f64,
        polarization: f64,
        kappa: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TipSpec {
    /// 0-based.
    pub site: usize,
    pub direction: Vec3,
    pub strength: TipStrength,
}

impl TipSpec {
    /// One parameter set per requested tip strength.
    pub fn parameters(&self, spin: Spin) -> Vec<TipParameters> {
        match &self.strength {
            TipStrength::Norms(norms) => norms
                .iter()
                .map(|&n| TipParameters::with_norm(self.site, self.direction, n, spin))
                .collect(),
            TipStrength::Prefactor(p) => vec![TipParameters::with_prefactor(self.site, self.direction, *p)],
            TipStrength::Raw { coupling, current, polarization, kappa, height } => vec![TipParameters {
                coupling: *coupling,
                current: *current,
                polarization: *polarization,
                kappa: *kappa,
                height: *height,
                site: self.site,
                direction: self.direction,
            }],
        }
    }

    /// ‖P‖ values in meV for a site of spin `spin`.
    pub fn norms(&self, spin: Spin) -> Vec<f64> {
        self.parameters(spin)
            .iter()
            .map(|p| p.prefactor() * spin.value())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalSpec {
    /// 1/meV; infinite means the ground state.
    #[serde(serialize_with = "ser_f64_inf")]
    pub beta: f64,
    pub temperature_k: Option<f64>,
}

fn ser_f64_inf<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XiChoice {
    Optimize,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsSpec {
    #[serde(serialize_with = "ser_kinds")]
    pub kinds: Vec<BoundKind>,
    /// 0-based.
    pub from: usize,
    /// 0-based.
    pub to: usize,
    pub threshold: f64,
    pub xi: XiChoice,
    pub clamp: bool,
}

fn ser_kinds<S: serde::Serializer>(kinds: &[BoundKind], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(kinds.iter().map(|k| k.tag()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObserveSpec {
    /// 0-based.
    pub sites: Vec<usize>,
    /// Fraction of s.
    pub epsilon: f64,
    pub epsilons: Vec<f64>,
    #[serde(serialize_with = "ser_method")]
    pub method: EvolutionMethod,
}

fn ser_method<S: serde::Serializer>(m: &EvolutionMethod, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match m {
        EvolutionMethod::Auto => "auto",
        EvolutionMethod::Dense => "dense",
        EvolutionMethod::Krylov(_) => "krylov",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub tip: Option<TipSpec>,
    pub thermal: ThermalSpec,
    pub time: TimeGrid,
    pub bounds: BoundsSpec,
    pub observe: ObserveSpec,
    pub output: OutputSpec,
    /// `key=value` for every default that was filled in.
    pub defaults_applied: Vec<String>,
}

pub const DEFAULT_TEMPERATURE_K: f64 = 0.5;
pub const DEFAULT_THRESHOLD: f64 = lrlab_core::bounds::DEFAULT_THRESHOLD;
pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_EPSILONS: [f64; 3] = [0.005, 0.01, 0.05];
pub const DEFAULT_DIRECTION: Vec3 = [0.0, 0.0, 1.0];

const SECTIONS: &[(&str, &[&str])] = &[
    ("system", &["lattice", "extent", "spin", "exchange", "anisotropy", "field", "g_factor"]),
    (
        "tip",
        &["site", "direction", "norm", "prefactor", "coupling", "current", "polarization", "kappa", "height"],
    ),
    ("thermal", &["temperature", "beta"]),
    ("time", &["start", "stop", "count"]),
    ("bounds", &["kinds", "from", "to", "threshold", "xi", "clamp"]),
    ("observe", &["sites", "epsilon", "epsilons", "method"]),
    ("output", &["dir", "svg"]),
];

const REQUIRED: &[&str] = &["system.extent", "system.spin", "system.exchange", "time.stop", "time.count"];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| {
        let offset = e.span().map(|s| s.start).unwrap_or(0).min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
        ConfigError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut r = Reader {
        doc: &doc,
        problems: Vec::new(),
        defaults: Vec::new(),
        sites: None,
    };
    let cfg = r.read();
    match cfg {
        Some(cfg) if r.problems.is_empty() => Ok(cfg),
        _ => Err(ConfigError::Invalid(r.problems)),
    }
}

struct Reader<'a> {
    doc: &'a Table,
    problems: Vec<Problem>,
    defaults: Vec<String>,
    /// Site count from `system.extent`, known even if other system keys fail.
    sites: Option<usize>,
}

impl<'a> Reader<'a> {
    fn problem(&mut self, key: &str, message: impl Into<String>) {
        self.problems.push(Problem {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        let (section, name) = key.split_once('.')?;
        self.doc.get(section)?.as_table()?.get(name)
    }

    fn has_section(&self, section: &str) -> bool {
        self.doc.get(section).is_some()
    }

    fn default<T: fmt::Display>(&mut self, key: &str, value: T) -> T {
        self.defaults.push(format!("{key}={value}"));
        value
    }

    fn check_keys(&mut self) {
        for (name, value) in self.doc {
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
                self.problem(name, "unknown section");
                continue;
            };
            let Some(table) = value.as_table() else {
                self.problem(name, "expected a [section]");
                continue;
            };
            for k in table.keys() {
                if !keys.contains(&k.as_str()) {
                    self.problem(&format!("{name}.{k}"), "unknown key");
                }
            }
        }
        for key in REQUIRED {
            if self.get(key).is_none() {
                self.problem(key, "required key missing");
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let v = self.get(key)?;
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.problem(key, format!("expected a number, got {}", v.type_str()));
                None
            }
        }
    }

    fn float_or(&mut self, key: &str, fallback: f64) -> f64 {
        match self.get(key) {
            Some(_) => self.float(key).unwrap_or(fallback),
            None => self.default(key, fallback),
        }
    }

    fn finite(&mut self, key: &str, v: f64) -> f64 {
        if !v.is_finite() {
            self.problem(key, "must be finite");
        }
        v
    }

    fn int(&mut self, key: &str) -> Option<i64> {
        let v = self.get(key)?;
        match v.as_integer() {
            Some(i) => Some(i),
            None => {
                self.problem(key, format!("expected an integer, got {}", v.type_str()));
                None
            }
        }
    }

    fn bool_or(&mut self, key: &str, fallback: bool) -> bool {
        match self.get(key) {
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                let t = v.type_str();
                self.problem(key, format!("expected true or false, got {t}"));
                fallback
            }
            None => self.default(key, fallback),
        }
    }

    fn string(&mut self, key: &str) -> Option<&'a str> {
        let v = self.get(key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.problem(key, format!("expected a string, got {}", v.type_str()));
                None
            }
        }
    }

    /// Scalar or array of numbers.
    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.get(key)?;
        let items: Vec<&Value> = match v {
            Value::Array(a) => a.iter().collect(),
            other => vec![other],
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(f) => out.push(*f),
                Value::Integer(i) => out.push(*i as f64),
                other => {
                    self.problem(key, format!("expected numbers, found {}", other.type_str()));
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.problem(key, "must not be empty");
            return None;
        }
        Some(out)
    }

    fn vec3(&mut self, key: &str) -> Option<Vec3> {
        let v = self.floats(key)?;
        match v[..] {
            [a, b, c] => Some([a, b, c]),
            _ => {
                self.problem(key, format!("expected 3 components, got {}", v.len()));
                None
            }
        }
    }

    /// 1-based site number in `1..=sites`, returned 0-based.
    fn site(&mut self, key: &str, raw: i64, sites: Option<usize>) -> Option<usize> {
        if raw < 1 {
            self.problem(key, format!("sites are numbered from 1, got {raw}"));
            return None;
        }
        let site = raw as usize - 1;
        if let Some(n) = sites {
            if site >= n {
                self.problem(key, format!("site {raw} outside a {n}-site lattice"));
                return None;
            }
        }
        Some(site)
    }

    fn read(&mut self) -> Option<ExperimentConfig> {
        self.check_keys();
        let system = self.system();
        let sites = self.sites;
        let tip = self.tip(sites);
        let thermal = self.thermal();
        let time = self.time();
        let bounds = self.bounds(sites);
        let observe = self.observe(sites);
        let output = self.output();
        Some(ExperimentConfig {
            system: system?,
            tip,
            thermal: thermal?,
            time: time?,
            bounds: bounds?,
            observe: observe?,
            output,
            defaults_applied: std::mem::take(&mut self.defaults),
        })
    }

    fn system(&mut self) -> Option<SystemSpec> {
        let lattice = match self.get("system.lattice") {
            None => self.default("system.lattice", "chain"),
            Some(_) => self.string("system.lattice").unwrap_or("chain"),
        };
        let lattice = match lattice {
            "chain" => Some(LatticeKind::Chain),
            "square" => Some(LatticeKind::Square),
            other => {
                self.problem("system.lattice", format!("expected \"chain\" or \"square\", got \"{other}\""));
                None
            }
        };

        let extent = self.floats("system.extent").and_then(|v| {
            let ok = v.iter().all(|&x| x >= 1.0 && x.fract() == 0.0);
            if !ok {
                self.problem("system.extent", "extents must be positive integers");
                return None;
            }
            Some(v.into_iter().map(|x| x as usize).collect::<Vec<_>>())
        });
        if let (Some(kind), Some(ext)) = (lattice, &extent) {
            let want = match kind {
                LatticeKind::Chain => 1,
                LatticeKind::Square => 2,
            };
            if ext.len() != want {
                self.problem("system.extent", format!("{kind:?} lattice needs {want} extent(s), got {}", ext.len()));
            }
        }

        self.sites = extent.as_ref().map(|e| e.iter().product());
        let spins = self.spins();
        let exchange = match self.get("system.exchange") {
            Some(Value::Array(_)) => self.vec3("system.exchange"),
            Some(_) => self.float("system.exchange").map(|j| [j; 3]),
            None => None,
        };
        if let Some(j) = exchange {
            if j.iter().any(|c| !c.is_finite()) {
                self.problem("system.exchange", "must be finite");
            }
        }
        let anisotropy = self.float_or("system.anisotropy", 0.0);
        let anisotropy = self.finite("system.anisotropy", anisotropy);
        let field = match self.get("system.field") {
            Some(_) => self.vec3("system.field").unwrap_or([0.0; 3]),
            None => self.default_vec("system.field", [0.0; 3]),
        };
        let g_factor = self.float_or("system.g_factor", DEFAULT_G_FACTOR);
        Some(SystemSpec {
            lattice: lattice?,
            extent: extent?,
            spins: spins?,
            exchange: exchange?,
            anisotropy,
            field,
            g_factor,
        })
    }

    fn default_vec(&mut self, key: &str, v: Vec3) -> Vec3 {
        self.defaults.push(format!("{key}={v:?}"));
        v
    }

    fn spins(&mut self) -> Option<Vec<Spin>> {
        let v = self.get("system.spin")?;
        let items: Vec<&Value> = match v {
            Value::Array(a) => a.iter().collect(),
            other => vec![other],
        };
        let mut out = Vec::new();
        for item in items {
            let parsed = match item {
                Value::Integer(i) => Spin::new(*i as f64),
                Value::Float(f) => Spin::new(*f),
                Value::String(s) => s.parse::<Spin>(),
                other => {
                    self.problem("system.spin", format!("expected a spin, got {}", other.type_str()));
                    return None;
                }
            };
            match parsed {
                Ok(s) => out.push(s),
                Err(e) => {
                    self.problem("system.spin", e.to_string());
                    return None;
                }
            }
        }
        if out.is_empty() {
            self.problem("system.spin", "must not be empty");
            return None;
        }
        Some(out)
    }

    fn tip(&mut self, sites: Option<usize>) -> Option<TipSpec> {
        if !self.has_section("tip") {
            return None;
        }
        let site = match self.int("tip.site") {
            Some(raw) => self.site("tip.site", raw, sites),
            None if self.get("tip.site").is_none() => Some(self.default("tip.site", 1) - 1),
            None => None,
        };
        let direction = match self.get("tip.direction") {
            Some(_) => self.vec3("tip.direction").and_then(|d| match lrlab_core::model::unit_vector(d) {
                Ok(u) => Some(u),
                Err(e) => {
                    self.problem("tip.direction", e.to_string());
                    None
                }
            }),
            None => Some(self.default_vec("tip.direction", DEFAULT_DIRECTION)),
        };

        let raw_keys = ["coupling", "current", "polarization", "kappa", "height"];
        let has_raw = raw_keys.iter().any(|k| self.get(&format!("tip.{k}")).is_some());
        let given = [self.get("tip.norm").is_some(), self.get("tip.prefactor").is_some(), has_raw];
        if given.iter().filter(|&&g| g).count() != 1 {
            self.problem("tip", "give exactly one of `norm`, `prefactor`, or the raw coupling/current/polarization/kappa/height");
            return None;
        }
        let strength = if given[0] {
            let norms = self.floats("tip.norm")?;
            if norms.iter().any(|&n| !(n >= 0.0) || !n.is_finite()) {
                self.problem("tip.norm", "‖P‖ must be finite and non-negative");
                return None;
            }
            TipStrength::Norms(norms)
        } else if given[1] {
            let p = self.float("tip.prefactor")?;
            TipStrength::Prefactor(p)
        } else {
            TipStrength::Raw {
                coupling: self.float_or("tip.coupling", 1.0),
                current: self.float_or("tip.current", 1.0),
                polarization: self.float_or("tip.polarization", 1.0),
                kappa: self.float_or("tip.kappa", 0.0),
                height: self.float_or("tip.height", 0.0),
            }
        };
        let spec = TipSpec {
            site: site?,
            direction: direction?,
            strength,
        };
        for p in spec.parameters(Spin::HALF) {
            if let Err(e) = p.validate() {
                self.problem("tip", e.to_string());
                return None;
            }
        }
        Some(spec)
    }

    fn thermal(&mut self) -> Option<ThermalSpec> {
        let t = self.get("thermal.temperature").is_some();
        let b = self.get("thermal.beta").is_some();
        match (t, b) {
            (true, true) => {
                self.problem("thermal", "give either `temperature` or `beta`, not both");
                None
            }
            (false, true) => {
                let beta = match self.get("thermal.beta") {
                    Some(Value::String(s)) if matches!(s.as_str(), "inf" | "infinity") => f64::INFINITY,
                    _ => self.float("thermal.beta")?,
                };
                if !(beta >= 0.0) {
                    self.problem("thermal.beta", "must be non-negative");
                    return None;
                }
                Some(ThermalSpec { beta, temperature_k: None })
            }
            (true, false) | (false, false) => {
                let k = self.float_or("thermal.temperature", DEFAULT_TEMPERATURE_K);
                if !(k >= 0.0) || !k.is_finite() {
                    self.problem("thermal.temperature", "must be finite and non-negative");
                    return None;
                }
                Some(ThermalSpec {
                    beta: beta_from_kelvin(k),
                    temperature_k: Some(k),
                })
            }
        }
    }

    fn time(&mut self) -> Option<TimeGrid> {
        let start = self.float_or("time.start", 0.0);
        let stop = self.float("time.stop");
        let count = self.int("time.count");
        let (stop, count) = (stop?, count?);
        if !(start >= 0.0) || !start.is_finite() {
            self.problem("time.start", "must be finite and non-negative");
            return None;
        }
        if !(stop > start) || !stop.is_finite() {
            self.problem("time.stop", format!("must be finite and greater than start ({start})"));
            return None;
        }
        if count < 2 {
            self.problem("time.count", "need at least 2 points");
            return None;
        }
        Some(TimeGrid {
            start,
            stop,
            count: count as usize,
        })
    }

    fn bounds(&mut self, sites: Option<usize>) -> Option<BoundsSpec> {
        let kinds = match self.get("bounds.kinds") {
            None => vec![self.default("bounds.kinds", BoundKind::NewB1d)],
            Some(Value::Array(a)) => {
                let mut out = Vec::new();
                for item in a {
                    match item.as_str().map(str::parse::<BoundKind>) {
                        Some(Ok(k)) => out.push(k),
                        Some(Err(e)) => self.problem("bounds.kinds", e.to_string()),
                        None => self.problem("bounds.kinds", "expected an array of strings"),
                    }
                }
                out
            }
            Some(_) => {
                self.problem("bounds.kinds", "expected an array of strings");
                Vec::new()
            }
        };
        let from = match self.int("bounds.from") {
            Some(raw) => self.site("bounds.from", raw, sites),
            None if self.get("bounds.from").is_none() => Some(self.default("bounds.from", 1) - 1),
            None => None,
        };
        let to = match self.int("bounds.to") {
            Some(raw) => self.site("bounds.to", raw, sites),
            None if self.get("bounds.to").is_none() => sites.map(|n| self.default("bounds.to", n) - 1),
            None => None,
        };
        let threshold = self.float_or("bounds.threshold", DEFAULT_THRESHOLD);
        if !(threshold > 0.0 && threshold < 1.0) {
            self.problem("bounds.threshold", "must lie in (0, 1)");
        }
        let xi = match self.get("bounds.xi") {
            None => {
                self.defaults.push("bounds.xi=optimize".into());
                XiChoice::Optimize
            }
            Some(Value::String(s)) if s == "optimize" => XiChoice::Optimize,
            Some(_) => match self.float("bounds.xi") {
                Some(x) if x > 0.0 && x.is_finite() => XiChoice::Fixed(x),
                Some(_) => {
                    self.problem("bounds.xi", "must be positive or \"optimize\"");
                    XiChoice::Optimize
                }
                None => XiChoice::Optimize,
            },
        };
        let clamp = self.bool_or("bounds.clamp", true);
        let (from, to) = (from?, to?);
        if from == to {
            self.problem("bounds.to", "must differ from bounds.from");
        }
        Some(BoundsSpec {
            kinds,
            from,
            to,
            threshold,
            xi,
            clamp,
        })
    }

    fn observe(&mut self, sites: Option<usize>) -> Option<ObserveSpec> {
        let observed = match self.get("observe.sites") {
            Some(_) => {
                let raw = self.floats("observe.sites")?;
                let mut out = Vec::new();
                for r in raw {
                    if r.fract() != 0.0 {
                        self.problem("observe.sites", "site numbers must be integers");
                        return None;
                    }
                    out.push(self.site("observe.sites", r as i64, sites)?);
                }
                out
            }
            None => {
                let n = sites?;
                self.default("observe.sites", n);
                vec![n - 1]
            }
        };
        let epsilon = self.float_or("observe.epsilon", DEFAULT_EPSILON);
        if !(epsilon > 0.0) {
            self.problem("observe.epsilon", "must be positive");
        }
        let epsilons = match self.get("observe.epsilons") {
            Some(_) => self.floats("observe.epsilons")?,
            None => {
                self.defaults.push(format!("observe.epsilons={DEFAULT_EPSILONS:?}"));
                DEFAULT_EPSILONS.to_vec()
            }
        };
        if epsilons.iter().any(|&e| !(e > 0.0)) {
            self.problem("observe.epsilons", "must be positive");
        }
        let method = match self.get("observe.method") {
            None => self.default("observe.method", "auto"),
            Some(_) => self.string("observe.method").unwrap_or("auto"),
        };
        let method = match method {
            "auto" => EvolutionMethod::Auto,
            "dense" => EvolutionMethod::Dense,
            "krylov" => EvolutionMethod::Krylov(KrylovOptions::default()),
            other => {
                self.problem("observe.method", format!("expected auto, dense or krylov, got \"{other}\""));
                EvolutionMethod::Auto
            }
        };
        Some(ObserveSpec {
            sites: observed,
            epsilon,
            epsilons,
            method,
        })
    }

    fn output(&mut self) -> OutputSpec {
        let dir = match self.get("output.dir") {
            Some(_) => self.string("output.dir").unwrap_or("out"),
            None => self.default("output.dir", "out"),
        };
        OutputSpec {
            dir: PathBuf::from(dir),
            svg: self.bool_or("output.svg", false),
        }
    }
}

/// Renders a config back to the documented format. Parsing the result gives
/// an equal config, apart from `defaults_applied`.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut doc = Table::new();
    let mut section = |name: &str, entries: Vec<(&str, Value)>| {
        let t: Table = entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        doc.insert(name.to_string(), Value::Table(t));
    };
    let f = Value::Float;
    let arr = |v: &[f64]| Value::Array(v.iter().map(|&x| Value::Float(x)).collect());
    let int = |v: usize| Value::Integer(v as i64);

    let s = &cfg.system;
    section(
        "system",
        vec![
            (
                "lattice",
                Value::String(
                    match s.lattice {
                        LatticeKind::Chain => "chain",
                        LatticeKind::Square => "square",
                    }
                    .into(),
                ),
            ),
            ("extent", Value::Array(s.extent.iter().map(|&e| int(e)).collect())),
            ("spin", Value::Array(s.spins.iter().map(|x| Value::String(x.to_string())).collect())),
            ("exchange", arr(&s.exchange)),
            ("anisotropy", f(s.anisotropy)),
            ("field", arr(&s.field)),
            ("g_factor", f(s.g_factor)),
        ],
    );
    if let Some(tip) = &cfg.tip {
        let mut e = vec![("site", int(tip.site + 1)), ("direction", arr(&tip.direction))];
        match &tip.strength {
            TipStrength::Norms(n) => e.push(("norm", arr(n))),
            TipStrength::Prefactor(p) => e.push(("prefactor", f(*p))),
            TipStrength::Raw { coupling, current, polarization, kappa, height } => {
                e.push(("coupling", f(*coupling)));
                e.push(("current", f(*current)));
                e.push(("polarization", f(*polarization)));
                e.push(("kappa", f(*kappa)));
                e.push(("height", f(*height)));
            }
        }
        section("tip", e);
    }
    let thermal = match cfg.thermal.temperature_k {
        Some(k) => ("temperature", f(k)),
        None if cfg.thermal.beta.is_infinite() => ("beta", Value::String("inf".into())),
        None => ("beta", f(cfg.thermal.beta)),
    };
    section("thermal", vec![thermal]);
    section(
        "time",
        vec![
            ("start", f(cfg.time.start)),
            ("stop", f(cfg.time.stop)),
            ("count", int(cfg.time.count)),
        ],
    );
    let b = &cfg.bounds;
    section(
        "bounds",
        vec![
            ("kinds", Value::Array(b.kinds.iter().map(|k| Value::String(k.tag().into())).collect())),
            ("from", int(b.from + 1)),
            ("to", int(b.to + 1)),
            ("threshold", f(b.threshold)),
            (
                "xi",
                match b.xi {
                    XiChoice::Optimize => Value::String("optimize".into()),
                    XiChoice::Fixed(x) => f(x),
                },
            ),
            ("clamp", Value::Boolean(b.clamp)),
        ],
    );
    let o = &cfg.observe;
    section(
        "observe",
        vec![
            ("sites", Value::Array(o.sites.iter().map(|&s| int(s + 1)).collect())),
            ("epsilon", f(o.epsilon)),
            ("epsilons", arr(&o.epsilons)),
            (
                "method",
                Value::String(
                    match o.method {
                        EvolutionMethod::Auto => "auto",
                        EvolutionMethod::Dense => "dense",
                        EvolutionMethod::Krylov(_) => "krylov",
                    }
                    .into(),
                ),
            ),
        ],
    );
    section(
        "output",
        vec![
            ("dir", Value::String(cfg.output.dir.to_string_lossy().into_owned())),
            ("svg", Value::Boolean(cfg.output.svg)),
        ],
    );
    toml::to_string(&doc).expect("config tables always serialize")
}
