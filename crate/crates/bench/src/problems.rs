//! Problem selection: the two market examples, synthetic instances, and
//! user markets loaded from JSON.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sqvi::blood::{example1_market, example2_market, BloodMarket};
use sqvi::estimate::estimate_constants;
use sqvi::{Constants, Market, Problem, StochasticOracle};

use crate::error::{BenchError, Result};
use crate::report::PublishedTargets;
use crate::synthetic::{make_synthetic, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSpec {
    Example1,
    Example2,
    Synthetic,
    File(PathBuf),
}

impl FromStr for ProblemSpec {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(ProblemSpec::Example1),
            "example2" => Ok(ProblemSpec::Example2),
            "synthetic" => Ok(ProblemSpec::Synthetic),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(ProblemSpec::File(PathBuf::from(path))),
                _ => Err(BenchError::Config(format!(
                    "unknown problem `{other}` (expected example1, example2, synthetic or file:<path>)"
                ))),
            },
        }
    }
}

impl std::fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProblemSpec::Example1 => f.write_str("example1"),
            ProblemSpec::Example2 => f.write_str("example2"),
            ProblemSpec::Synthetic => f.write_str("synthetic"),
            ProblemSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// A ready-to-solve instance with the constants used for parameter choice.
pub struct Built {
    pub problem: Problem,
    pub market: Option<Arc<Market>>,
    pub constants: Constants,
    pub published: Option<PublishedTargets>,
}

/// Reads a market description; parse errors carry line and column.
pub fn load_market(path: &Path) -> Result<Market> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let market: BloodMarket<f64> = serde_json::from_str(&text).map_err(|e| BenchError::ProblemFile {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    market.validate().map_err(|e| BenchError::ProblemFile {
        path: path.display().to_string(),
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    Ok(market)
}

fn market_for(spec: &ProblemSpec) -> Result<Option<Market>> {
    Ok(match spec {
        ProblemSpec::Example1 => Some(example1_market()?),
        ProblemSpec::Example2 => Some(example2_market()?),
        ProblemSpec::File(p) => Some(load_market(p)?),
        ProblemSpec::Synthetic => None,
    })
}

/// Builds the instance. `noise_scale` overrides the market's cost-noise scale
/// or the synthetic `ν`.
pub fn build(spec: &ProblemSpec, synthetic: &SyntheticSpec, noise_scale: Option<f64>) -> Result<Built> {
    if let Some(s) = noise_scale {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(BenchError::Config(format!("noise scale must be finite and >= 0, got {s}")));
        }
    }
    let Some(mut market) = market_for(spec)? else {
        let spec = SyntheticSpec {
            nu: noise_scale.unwrap_or(synthetic.nu),
            ..*synthetic
        };
        let s = make_synthetic(&spec)?;
        return Ok(Built {
            problem: s.problem,
            market: None,
            constants: s.constants,
            published: None,
        });
    };
    if let Some(s) = noise_scale {
        market.noise.scale = s;
    }
    let (problem, market) = market.into_problem()?;
    let nu = market.noise_scale_hint().unwrap_or(0.0);
    let constants = estimate_constants(&problem, &[], nu, 1.0)?;
    let published = match spec {
        ProblemSpec::Example1 => Some(PublishedTargets::example1()),
        ProblemSpec::Example2 => Some(PublishedTargets::example2()),
        _ => None,
    };
    Ok(Built {
        problem,
        market: Some(market),
        constants,
        published,
    })
}

/// Same instance with the noise switched off, for reference solves.
pub fn noise_free(spec: &ProblemSpec, synthetic: &SyntheticSpec) -> Result<Built> {
    build(spec, synthetic, Some(0.0))
}
