//! JSON run configurations.
//!
//! Complex entries are `[re, im]` pairs or plain reals, matrices are lists of
//! rows, and powers are linear numbers or strings with a `dB` suffix.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::experiments::{db_to_linear, FixedParams, SweepSpec, SweepVariable, DEFAULT_TRIALS};
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::threehop::ThreeHopNetwork;
use crate::twohop::{MultiSourceTwoHopNetwork, Scheme, SourceLink, TwoHopNetwork};

/// Anything wrong with the configuration file; maps to exit code 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<crate::Error> for ConfigError {
    fn from(e: crate::Error) -> Self {
        ConfigError(e.to_string())
    }
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PowerValue {
    Linear(f64),
    Text(String),
}

impl PowerValue {
    pub fn to_linear(&self) -> CResult<f64> {
        match self {
            PowerValue::Linear(v) => Ok(*v),
            PowerValue::Text(s) => parse_power(s),
        }
    }
}

/// `"20dB"`, `"-3 dB"` or a plain number.
pub fn parse_power(s: &str) -> CResult<f64> {
    let t = s.trim();
    let (num, db) = match t.strip_suffix("dB").or_else(|| t.strip_suffix("db")) {
        Some(rest) => (rest.trim(), true),
        None => (t, false),
    };
    let v: f64 = num
        .parse()
        .map_err(|_| ConfigError(format!("cannot parse power value '{s}'")))?;
    Ok(if db { db_to_linear(v) } else { v })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<&ComplexValue> for Complex64 {
    fn from(v: &ComplexValue) -> Self {
        match *v {
            ComplexValue::Real(re) => Complex64::new(re, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

fn vector(name: &str, v: &[ComplexValue]) -> CResult<ComplexVector> {
    if v.is_empty() {
        return Err(ConfigError(format!("'{name}' must not be empty")));
    }
    Ok(ComplexVector::new(v.iter().map(Complex64::from).collect()))
}

fn matrix(name: &str, rows: &[Vec<ComplexValue>]) -> CResult<ComplexMatrix> {
    let rows: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|r| r.iter().map(Complex64::from).collect())
        .collect();
    ComplexMatrix::from_rows(rows).map_err(|e| ConfigError(format!("'{name}': {e}")))
}

fn power(name: &str, p: &PowerValue) -> CResult<f64> {
    p.to_linear().map_err(|e| ConfigError(format!("'{name}': {e}")))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoHopConfig {
    #[serde(rename = "P")]
    pub p: PowerValue,
    pub f: Vec<ComplexValue>,
    #[serde(rename = "P_R")]
    pub p_r: PowerValue,
    pub g: Vec<ComplexValue>,
    /// Identity when absent.
    #[serde(rename = "K")]
    pub k: Option<Vec<Vec<ComplexValue>>>,
    pub schemes: Option<Vec<Scheme>>,
    /// Fixed gain for NO_CSI (all-ones when absent).
    pub no_csi_gain: Option<Vec<ComplexValue>>,
    pub seed: Option<u64>,
    pub precision: Option<usize>,
}

impl TwoHopConfig {
    pub fn network(&self) -> CResult<TwoHopNetwork> {
        let f = vector("f", &self.f)?;
        let k = match &self.k {
            Some(rows) => matrix("K", rows)?,
            None => ComplexMatrix::identity(f.dim()),
        };
        Ok(TwoHopNetwork::new(
            power("P", &self.p)?,
            f,
            power("P_R", &self.p_r)?,
            vector("g", &self.g)?,
            k,
        )?)
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        self.schemes.clone().unwrap_or_else(|| Scheme::ALL.to_vec())
    }

    pub fn no_csi_gain(&self) -> CResult<Option<ComplexVector>> {
        self.no_csi_gain.as_deref().map(|v| vector("no_csi_gain", v)).transpose()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub f: Vec<ComplexValue>,
    #[serde(rename = "P")]
    pub p: PowerValue,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiSourceConfig {
    pub sources: Vec<SourceConfig>,
    #[serde(rename = "P_R")]
    pub p_r: PowerValue,
    pub g: Vec<ComplexValue>,
    #[serde(rename = "K")]
    pub k: Option<Vec<Vec<ComplexValue>>>,
    pub seed: Option<u64>,
    pub precision: Option<usize>,
}

impl MultiSourceConfig {
    pub fn network(&self) -> CResult<MultiSourceTwoHopNetwork> {
        let g = vector("g", &self.g)?;
        let sources = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(SourceLink {
                    channel: vector(&format!("sources[{i}].f"), &s.f)?,
                    power: power(&format!("sources[{i}].P"), &s.p)?,
                })
            })
            .collect::<CResult<Vec<_>>>()?;
        let k = match &self.k {
            Some(rows) => matrix("K", rows)?,
            None => ComplexMatrix::identity(g.dim()),
        };
        Ok(MultiSourceTwoHopNetwork::new(sources, power("P_R", &self.p_r)?, g, k)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeHopConfig {
    #[serde(rename = "P0")]
    pub p0: PowerValue,
    pub f: Vec<ComplexValue>,
    #[serde(rename = "P1")]
    pub p1: PowerValue,
    #[serde(rename = "H")]
    pub h: Vec<Vec<ComplexValue>>,
    #[serde(rename = "P2")]
    pub p2: PowerValue,
    pub g: Vec<ComplexValue>,
    /// Explicit first-stage starting gains; replaces the default starts.
    pub initializations: Option<Vec<Vec<ComplexValue>>>,
    pub starts: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub precision: Option<usize>,
}

impl ThreeHopConfig {
    pub fn network(&self) -> CResult<ThreeHopNetwork> {
        Ok(ThreeHopNetwork::new(
            power("P0", &self.p0)?,
            vector("f", &self.f)?,
            power("P1", &self.p1)?,
            matrix("H", &self.h)?,
            power("P2", &self.p2)?,
            vector("g", &self.g)?,
        )?)
    }

    pub fn initializations(&self) -> CResult<Option<Vec<ComplexVector>>> {
        self.initializations
            .as_ref()
            .map(|list| {
                list.iter()
                    .enumerate()
                    .map(|(i, v)| vector(&format!("initializations[{i}]"), v))
                    .collect()
            })
            .transpose()
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    #[serde(rename = "P")]
    pub p: Option<PowerValue>,
    #[serde(rename = "P_R")]
    pub p_r: Option<PowerValue>,
    #[serde(rename = "P_I")]
    pub p_i: Option<PowerValue>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "Q")]
    pub q: Option<usize>,
}

impl FixedConfig {
    /// Missing entries default to `P = P_I = 10`, `P_R = 100`, `N = 2`, `Q = 1`.
    pub fn params(&self) -> CResult<FixedParams> {
        let get = |name: &str, v: &Option<PowerValue>, default: f64| match v {
            Some(v) => power(name, v),
            None => Ok(default),
        };
        Ok(FixedParams {
            source_power: get("P", &self.p, 10.0)?,
            relay_power: get("P_R", &self.p_r, 100.0)?,
            interference_power: get("P_I", &self.p_i, 10.0)?,
            num_relays: self.n.unwrap_or(2),
            num_interferers: self.q.unwrap_or(1),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sweep_variable: SweepVariable,
    pub grid: Vec<PowerValue>,
    #[serde(default)]
    pub fixed: FixedConfig,
    pub trials: Option<usize>,
    pub schemes: Option<Vec<Scheme>>,
    pub seed: Option<u64>,
    pub precision: Option<usize>,
}

impl SweepConfig {
    pub fn spec(&self, seed: u64, trials: Option<usize>) -> CResult<SweepSpec> {
        let grid = self
            .grid
            .iter()
            .enumerate()
            .map(|(i, v)| power(&format!("grid[{i}]"), v))
            .collect::<CResult<Vec<_>>>()?;
        let spec = SweepSpec {
            sweep_variable: self.sweep_variable,
            grid,
            fixed: self.fixed.params()?,
            trials: trials.or(self.trials).unwrap_or(DEFAULT_TRIALS),
            seed,
            schemes: self
                .schemes
                .clone()
                .unwrap_or_else(|| Scheme::BENCHMARKS.to_vec()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub precision: Option<usize>,
}

pub fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> CResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config '{}': {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid config '{}': {e}", path.display())))
}
