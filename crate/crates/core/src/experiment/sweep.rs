use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{generate, Algorithm, GenerateSpec, ResultRow, RunOptions, RunStatus};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    QosRate,
    InterferenceThresholdDbm,
    /// Positions are redrawn for every value from the same seed and region.
    DeviceCount,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::QosRate => "qos_rate",
            SweepParam::InterferenceThresholdDbm => "interference_threshold_dbm",
            SweepParam::DeviceCount => "device_count",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [SweepParam::QosRate, SweepParam::InterferenceThresholdDbm, SweepParam::DeviceCount]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::InvalidScenario(format!(
                    "unknown sweep parameter {s:?} (expected qos_rate, interference_threshold_dbm or device_count)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Device count when it is not the swept parameter.
    pub k: usize,
    pub region_m: f64,
    pub altitude_m: f64,
    pub run: RunOptions,
    pub timing: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_string()));
        if self.values.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return bad("sweep needs at least one value, algorithm and seed");
        }
        if self.param == SweepParam::DeviceCount {
            if self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
                return bad("device counts must be positive integers");
            }
        } else if self.k == 0 {
            return bad("K must be at least 1");
        }
        Ok(())
    }

    fn scenario(&self, seed: u64, value: f64) -> Result<Scenario> {
        let mut g = GenerateSpec { region_m: self.region_m, altitude_m: self.altitude_m, ..GenerateSpec::new(seed, self.k) };
        match self.param {
            SweepParam::QosRate => g.qos_rate = Some(value),
            SweepParam::InterferenceThresholdDbm => g.interference_threshold_dbm = Some(value),
            SweepParam::DeviceCount => g.k = value as usize,
        }
        generate(&g)
    }
}

/// Runs every (value, seed, algorithm) cell. Cells may run concurrently;
/// rows come back ordered by value, then seed, then algorithm as listed.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &value in &spec.values {
        for &seed in &spec.seeds {
            for &alg in &spec.algorithms {
                cells.push((value, seed, alg));
            }
        }
    }
    let rows = par::map(spec.run.execution, &cells, |&(value, seed, alg)| {
        let mut row = match spec.scenario(seed, value) {
            Ok(s) => ResultRow::solve(alg, &s, &spec.run, spec.timing).0,
            Err(_) => ResultRow {
                seed: Some(seed),
                algorithm: alg,
                param: String::new(),
                value: None,
                status: RunStatus::Failed,
                lifetime_s: 0.0,
                zeta: None,
                q: None,
                solve_ms: None,
            },
        };
        row.param = spec.param.name().to_string();
        row.value = Some(value);
        row
    });
    Ok(rows)
}
