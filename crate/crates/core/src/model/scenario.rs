use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizontal coordinate in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn dist2(self, other: Point) -> f64 {
        (self - other).norm2()
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// On-disk scenario, units spelled out in the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format: u32,
    pub device_positions_m: Vec<[f64; 2]>,
    pub battery_energies_j: Vec<f64>,
    pub uav_altitude_m: f64,
    pub ref_snr_db: f64,
    pub noise_power_w: f64,
    pub max_power_w: f64,
    pub circuit_power_w: f64,
    pub qos_rate_bps_hz: f64,
    pub interference_threshold_dbm: f64,
    pub csi_error_var: f64,
    pub violation_prob: f64,
    pub primary_gain_estimates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_m: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioFile {
    pub const FORMAT: u32 = 1;

    pub const DEFAULT_ALTITUDE_M: f64 = 100.0;
    pub const DEFAULT_REF_SNR_DB: f64 = 60.0;
    pub const DEFAULT_NOISE_POWER_W: f64 = 1e-3;
    pub const DEFAULT_MAX_POWER_W: f64 = 1.0;
    pub const DEFAULT_CIRCUIT_POWER_W: f64 = 0.9;
    pub const DEFAULT_ENERGY_J: f64 = 4e3;
    pub const DEFAULT_QOS_RATE: f64 = 0.4;
    pub const DEFAULT_INTERFERENCE_DBM: f64 = 28.0;
    pub const DEFAULT_CSI_ERROR_VAR: f64 = 1e-2;
    pub const DEFAULT_VIOLATION_PROB: f64 = 1e-3;

    /// A scenario with the default radio parameters and the given devices.
    pub fn with_defaults(positions: &[Point], primary_gains: &[f64]) -> Self {
        ScenarioFile {
            format: Self::FORMAT,
            device_positions_m: positions.iter().copied().map(Into::into).collect(),
            battery_energies_j: vec![Self::DEFAULT_ENERGY_J; positions.len()],
            uav_altitude_m: Self::DEFAULT_ALTITUDE_M,
            ref_snr_db: Self::DEFAULT_REF_SNR_DB,
            noise_power_w: Self::DEFAULT_NOISE_POWER_W,
            max_power_w: Self::DEFAULT_MAX_POWER_W,
            circuit_power_w: Self::DEFAULT_CIRCUIT_POWER_W,
            qos_rate_bps_hz: Self::DEFAULT_QOS_RATE,
            interference_threshold_dbm: Self::DEFAULT_INTERFERENCE_DBM,
            csi_error_var: Self::DEFAULT_CSI_ERROR_VAR,
            violation_prob: Self::DEFAULT_VIOLATION_PROB,
            primary_gain_estimates: primary_gains.to_vec(),
            region_m: None,
            seed: None,
        }
    }
}

/// A validated, immutable problem instance. All quantities are linear SI.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    positions: Vec<Point>,
    energies: Vec<f64>,
    altitude: f64,
    ref_snr_db: f64,
    ref_snr: f64,
    noise_power: f64,
    max_power: f64,
    circuit_power: f64,
    qos_rate: f64,
    interference_threshold_dbm: f64,
    interference_threshold: f64,
    csi_error_var: f64,
    violation_prob: f64,
    primary_gains: Vec<f64>,
    region: Option<[f64; 2]>,
    seed: Option<u64>,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.format != ScenarioFile::FORMAT {
            return Err(Error::InvalidScenario(format!(
                "unsupported format {} (expected {})",
                file.format,
                ScenarioFile::FORMAT
            )));
        }
        let s = Scenario {
            positions: file.device_positions_m.iter().copied().map(Point::from).collect(),
            energies: file.battery_energies_j,
            altitude: file.uav_altitude_m,
            ref_snr_db: file.ref_snr_db,
            ref_snr: db_to_linear(file.ref_snr_db),
            noise_power: file.noise_power_w,
            max_power: file.max_power_w,
            circuit_power: file.circuit_power_w,
            qos_rate: file.qos_rate_bps_hz,
            interference_threshold_dbm: file.interference_threshold_dbm,
            interference_threshold: dbm_to_watts(file.interference_threshold_dbm),
            csi_error_var: file.csi_error_var,
            violation_prob: file.violation_prob,
            primary_gains: file.primary_gain_estimates,
            region: file.region_m,
            seed: file.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            format: ScenarioFile::FORMAT,
            device_positions_m: self.positions.iter().copied().map(Into::into).collect(),
            battery_energies_j: self.energies.clone(),
            uav_altitude_m: self.altitude,
            ref_snr_db: self.ref_snr_db,
            noise_power_w: self.noise_power,
            max_power_w: self.max_power,
            circuit_power_w: self.circuit_power,
            qos_rate_bps_hz: self.qos_rate,
            interference_threshold_dbm: self.interference_threshold_dbm,
            csi_error_var: self.csi_error_var,
            violation_prob: self.violation_prob,
            primary_gain_estimates: self.primary_gains.clone(),
            region_m: self.region,
            seed: self.seed,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes");
        s.push('\n');
        s
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        let k = self.positions.len();
        if k == 0 {
            return bad("at least one device is required".into());
        }
        if self.energies.len() != k || self.primary_gains.len() != k {
            return bad(format!(
                "length mismatch: {} positions, {} energies, {} primary gains",
                k,
                self.energies.len(),
                self.primary_gains.len()
            ));
        }
        let finite = self.positions.iter().all(|p| p.x.is_finite() && p.y.is_finite())
            && [
                self.altitude,
                self.ref_snr,
                self.noise_power,
                self.max_power,
                self.circuit_power,
                self.qos_rate,
                self.interference_threshold,
                self.csi_error_var,
                self.violation_prob,
            ]
            .iter()
            .chain(&self.energies)
            .chain(&self.primary_gains)
            .all(|v| v.is_finite());
        if !finite {
            return bad("all values must be finite".into());
        }
        if self.energies.iter().any(|&e| e <= 0.0) {
            return bad("battery energies must be positive".into());
        }
        for (name, v) in [
            ("uav altitude", self.altitude),
            ("reference SNR", self.ref_snr),
            ("noise power", self.noise_power),
            ("max power", self.max_power),
            ("interference threshold", self.interference_threshold),
            ("QoS rate", self.qos_rate),
        ] {
            if v <= 0.0 {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.circuit_power < 0.0 {
            return bad("circuit power must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.csi_error_var) {
            return bad(format!("CSI error variance must be in [0, 1), got {}", self.csi_error_var));
        }
        if !(self.violation_prob > 0.0 && self.violation_prob < 1.0) {
            return bad(format!("violation probability must be in (0, 1), got {}", self.violation_prob));
        }
        if self.primary_gains.iter().any(|&z| z < 0.0) {
            return bad("primary gain estimates must be non-negative".into());
        }
        for i in 0..k {
            for j in i + 1..k {
                if self.positions[i] == self.positions[j] {
                    return bad(format!("devices {i} and {j} share the position {:?}", self.positions[i]));
                }
            }
        }
        Ok(())
    }

    pub fn num_devices(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, k: usize) -> Point {
        self.positions[k]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    /// Reference SNR `γ0` as a linear ratio.
    pub fn ref_snr(&self) -> f64 {
        self.ref_snr
    }

    pub fn ref_snr_db(&self) -> f64 {
        self.ref_snr_db
    }

    /// Channel power gain at 1 m, `ρ0 = γ0 σ²`.
    pub fn ref_gain(&self) -> f64 {
        self.ref_snr * self.noise_power
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn max_power(&self) -> f64 {
        self.max_power
    }

    pub fn circuit_power(&self) -> f64 {
        self.circuit_power
    }

    pub fn qos_rate(&self) -> f64 {
        self.qos_rate
    }

    /// Interference threshold in watts.
    pub fn interference_threshold(&self) -> f64 {
        self.interference_threshold
    }

    pub fn interference_threshold_dbm(&self) -> f64 {
        self.interference_threshold_dbm
    }

    pub fn csi_error_var(&self) -> f64 {
        self.csi_error_var
    }

    pub fn violation_prob(&self) -> f64 {
        self.violation_prob
    }

    pub fn primary_gains(&self) -> &[f64] {
        &self.primary_gains
    }

    pub fn region(&self) -> Option<[f64; 2]> {
        self.region
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_qos_rate(&self, rate: f64) -> Result<Self> {
        let mut s = self.clone();
        s.qos_rate = rate;
        s.validate()?;
        Ok(s)
    }

    pub fn with_interference_threshold_dbm(&self, dbm: f64) -> Result<Self> {
        let mut s = self.clone();
        s.interference_threshold_dbm = dbm;
        s.interference_threshold = dbm_to_watts(dbm);
        s.validate()?;
        Ok(s)
    }

    pub fn with_altitude(&self, altitude: f64) -> Result<Self> {
        let mut s = self.clone();
        s.altitude = altitude;
        s.validate()?;
        Ok(s)
    }

    pub fn with_max_power(&self, max_power: f64) -> Result<Self> {
        let mut s = self.clone();
        s.max_power = max_power;
        s.validate()?;
        Ok(s)
    }
}
