//! `key=value` run configuration.
//!
//! Assignments are separated by whitespace or newlines; `#` starts a comment.
//! Recognised keys (defaults in brackets):
//!
//! | key            | meaning                                  | default |
//! |----------------|------------------------------------------|---------|
//! | `L`            | lattice positions                        | 2       |
//! | `d`            | channels per position                    | 1       |
//! | `t`            | shift                                    | 1       |
//! | `lambdas`      | comma-separated channel values in (0,1)  | 0.3     |
//! | `allow_half`   | permit λ = 1/2 (exploratory runs)        | false   |
//! | `N`            | boson cutoff (alias `boson_cutoff`)      | 12      |
//! | `tolerance`    | check tolerance                          | 1e-9    |
//! | `max_modes`    | cap on fermion modes `L·d`               | 5       |
//! | `seed`         | enables the seeded randomized checks     | none    |
//! | `output`       | JSON report path                         | none    |

use std::fmt;
use std::path::PathBuf;

use carflow::flow::ShiftModel;
use serde::Serialize;

/// Margin used for the admissible λ range `[ε, 1-ε]`.
pub const EPSILON: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
    pub t: usize,
    pub lambdas: Vec<f64>,
    pub allow_half: bool,
    #[serde(rename = "N")]
    pub boson_cutoff: usize,
    pub tolerance: f64,
    pub max_modes: usize,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            l: 2,
            d: 1,
            t: 1,
            lambdas: vec![0.3],
            allow_half: false,
            boson_cutoff: 12,
            tolerance: 1e-9,
            max_modes: 5,
            seed: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn n_modes(&self) -> usize {
        self.l * self.d
    }

    pub fn has_half(&self) -> bool {
        self.lambdas.iter().any(|&x| x == 0.5)
    }

    pub fn model(&self) -> carflow::Result<ShiftModel<f64>> {
        if self.allow_half {
            ShiftModel::allowing_half(self.l, self.d, self.t, self.lambdas.clone())
        } else {
            ShiftModel::new(self.l, self.d, self.t, self.lambdas.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// Where the offending text came from (file name, `args`, ...).
    pub origin: String,
    /// 1-based line, 0 when the error is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "{}:{}: {}", self.origin, self.line, self.message)
        } else {
            write!(f, "{}: {}", self.origin, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Accumulates assignments from several sources, later ones winning, and
/// validates once at the end.
#[derive(Debug, Default)]
pub struct ConfigBuilder {
    config: RunConfig,
    /// Source of the last assignment of each key, for validation messages.
    sources: Vec<(&'static str, String, usize)>,
}

const KEYS: [&str; 10] = ["L", "d", "t", "lambdas", "allow_half", "N", "tolerance", "max_modes", "seed", "output"];

fn canonical_key(key: &str) -> Option<&'static str> {
    match key {
        "boson_cutoff" => Some("N"),
        "l" => Some("L"),
        _ => KEYS.iter().copied().find(|k| *k == key),
    }
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(&mut self, origin: &str, text: &str) -> Result<&mut Self, ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                self.assign(origin, i + 1, token)?;
            }
        }
        Ok(self)
    }

    fn assign(&mut self, origin: &str, line: usize, token: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError { origin: origin.to_string(), line, message };
        let (key, value) = token.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{token}`")))?;
        let key = canonical_key(key.trim()).ok_or_else(|| err(format!("unknown key `{key}` (known: {})", KEYS.join(", "))))?;
        let value = value.trim();
        let bad = |what: &str| err(format!("{key}: cannot parse `{value}` as {what}"));
        let c = &mut self.config;
        match key {
            "L" => c.l = value.parse().map_err(|_| bad("a nonnegative integer"))?,
            "d" => c.d = value.parse().map_err(|_| bad("a nonnegative integer"))?,
            "t" => c.t = value.parse().map_err(|_| bad("a nonnegative integer"))?,
            "N" => c.boson_cutoff = value.parse().map_err(|_| bad("a nonnegative integer"))?,
            "max_modes" => c.max_modes = value.parse().map_err(|_| bad("a nonnegative integer"))?,
            "lambdas" => {
                c.lambdas = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("a comma-separated list of numbers"))?
            }
            "allow_half" => {
                c.allow_half = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad("a boolean")),
                }
            }
            "tolerance" => c.tolerance = value.parse().map_err(|_| bad("a number"))?,
            "seed" => c.seed = Some(value.parse().map_err(|_| bad("an unsigned integer"))?),
            "output" => {
                if value.is_empty() {
                    return Err(bad("a path"));
                }
                c.output = Some(PathBuf::from(value))
            }
            _ => unreachable!("canonical keys are exhaustive"),
        }
        self.sources.retain(|(k, _, _)| *k != key);
        self.sources.push((key, origin.to_string(), line));
        Ok(())
    }

    fn error_at(&self, key: &str, message: String) -> ConfigError {
        match self.sources.iter().find(|(k, _, _)| *k == key) {
            Some((_, origin, line)) => ConfigError { origin: origin.clone(), line: *line, message },
            None => ConfigError { origin: "defaults".into(), line: 0, message },
        }
    }

    pub fn build(&self) -> Result<RunConfig, ConfigError> {
        let mut c = self.config.clone();
        if c.l == 0 {
            return Err(self.error_at("L", "L must be at least 1".into()));
        }
        if c.d == 0 {
            return Err(self.error_at("d", "d must be at least 1".into()));
        }
        if c.t == 0 || c.t > c.l {
            return Err(self.error_at("t", format!("need 1 <= t <= L, got t = {} with L = {}", c.t, c.l)));
        }
        if c.n_modes() > c.max_modes {
            let key = if self.sources.iter().any(|(k, _, _)| *k == "L") { "L" } else { "d" };
            return Err(self.error_at(key, format!("L*d = {} fermion modes exceeds max_modes = {}", c.n_modes(), c.max_modes)));
        }
        if c.lambdas.len() == 1 && c.d > 1 {
            c.lambdas = vec![c.lambdas[0]; c.d];
        }
        if c.lambdas.len() != c.d {
            return Err(self.error_at("lambdas", format!("{} values given for d = {}", c.lambdas.len(), c.d)));
        }
        for (i, &x) in c.lambdas.iter().enumerate() {
            if !(x > 0.0 && x < 1.0) {
                return Err(self.error_at("lambdas", format!("λ_{i} = {x} must lie in (0, 1)")));
            }
            if !(EPSILON..=1.0 - EPSILON).contains(&x) {
                return Err(self.error_at("lambdas", format!("λ_{i} = {x} violates λ_i ∈ [ε, 1-ε] with ε = {EPSILON}")));
            }
            if x == 0.5 && !c.allow_half {
                return Err(self.error_at(
                    "lambdas",
                    format!("λ_{i} = 1/2 violates the standing assumption λ_i ∈ [ε, 1-ε] ∖ {{1/2}}; set allow_half=true for an exploratory run"),
                ));
            }
        }
        if c.boson_cutoff == 0 {
            return Err(self.error_at("N", "N must be at least 1".into()));
        }
        if !(c.tolerance.is_finite() && c.tolerance > 0.0) {
            return Err(self.error_at("tolerance", format!("tolerance must be positive, got {}", c.tolerance)));
        }
        c.model().map_err(|e| self.error_at("lambdas", e.to_string()))?;
        Ok(c)
    }
}

/// Parses a single `key=value` text on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    ConfigBuilder::new().parse("config", text)?.build()
}
