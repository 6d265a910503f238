//! Scenario generation, solver dispatch and CSV export shared by the CLI.

mod sweep;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{solve_fdma, solve_noma_fixed};
use crate::error::{Error, Result};
use crate::exact::{solve_optimal, ExactOptions};
use crate::model::{sample_primary_gains_with, PlacementSolution, Point, Scenario, ScenarioFile};
use crate::par::Execution;
use crate::sca::{default_init, sca_solve_traced, ScaOptions, ScaRun, TraceRow};

pub use sweep::{run_sweep, SweepParam, SweepSpec};

pub const DEFAULT_REGION_M: f64 = 500.0;

/// Parameters of a randomly drawn scenario. Fields left `None` keep the
/// defaults of [`ScenarioFile::with_defaults`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub seed: u64,
    pub k: usize,
    /// Side of the square deployment region `[0, L]²` (m).
    pub region_m: f64,
    pub altitude_m: f64,
    pub qos_rate: Option<f64>,
    pub interference_threshold_dbm: Option<f64>,
}

impl GenerateSpec {
    pub fn new(seed: u64, k: usize) -> Self {
        GenerateSpec {
            seed,
            k,
            region_m: DEFAULT_REGION_M,
            altitude_m: ScenarioFile::DEFAULT_ALTITUDE_M,
            qos_rate: None,
            interference_threshold_dbm: None,
        }
    }
}

/// Draws device positions uniformly in the region, then the primary-link
/// gain estimates, from one ChaCha8 stream seeded with `seed`.
pub fn generate(spec: &GenerateSpec) -> Result<Scenario> {
    if spec.k == 0 {
        return Err(Error::InvalidScenario("at least one device is required".into()));
    }
    if !(spec.region_m > 0.0 && spec.region_m.is_finite()) {
        return Err(Error::InvalidScenario(format!("region side must be positive, got {}", spec.region_m)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let positions: Vec<Point> = (0..spec.k)
        .map(|_| Point::new(rng.random_range(0.0..spec.region_m), rng.random_range(0.0..spec.region_m)))
        .collect();
    let gains = sample_primary_gains_with(&mut rng, spec.k, ScenarioFile::DEFAULT_CSI_ERROR_VAR);
    let mut file = ScenarioFile::with_defaults(&positions, &gains);
    file.uav_altitude_m = spec.altitude_m;
    file.region_m = Some([spec.region_m, spec.region_m]);
    file.seed = Some(spec.seed);
    if let Some(r) = spec.qos_rate {
        file.qos_rate_bps_hz = r;
    }
    if let Some(i) = spec.interference_threshold_dbm {
        file.interference_threshold_dbm = i;
    }
    Scenario::from_file(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Exhaustive decoding-order search with the dual ellipsoid solver.
    #[serde(rename = "op-noma-j")]
    OpNomaJ,
    /// Penalty SCA over the decode-before matrix.
    #[serde(rename = "sub-noma-j")]
    SubNomaJ,
    /// NOMA with the UAV at the device centroid.
    #[serde(rename = "noma-p")]
    NomaP,
    /// Equal-share FDMA with optimized placement.
    #[serde(rename = "fdma")]
    Fdma,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::OpNomaJ, Algorithm::SubNomaJ, Algorithm::NomaP, Algorithm::Fdma];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::OpNomaJ => "op-noma-j",
            Algorithm::SubNomaJ => "sub-noma-j",
            Algorithm::NomaP => "noma-p",
            Algorithm::Fdma => "fdma",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown algorithm {0:?} (expected one of op-noma-j, sub-noma-j, noma-p, fdma)")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| UnknownAlgorithm(s.to_string()))
    }
}

/// Knobs shared by every dispatch through [`run_algorithm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Relative dual gap for `op-noma-j`, kernel tolerance for `fdma`.
    pub tol: f64,
    pub sca: ScaOptions,
    pub execution: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tol: ExactOptions::default().tol, sca: ScaOptions::default(), execution: Execution::default() }
    }
}

pub fn run_algorithm(alg: Algorithm, s: &Scenario, opts: &RunOptions) -> Result<PlacementSolution> {
    match alg {
        Algorithm::OpNomaJ => {
            let exact = ExactOptions { tol: opts.tol, execution: opts.execution, ..ExactOptions::default() };
            solve_optimal(s, &exact)
        }
        Algorithm::SubNomaJ => sca_solve_traced(s, &default_init(s), &opts.sca).map(|r| r.solution),
        Algorithm::NomaP => solve_noma_fixed(s),
        Algorithm::Fdma => solve_fdma(s, opts.tol),
    }
}

/// SCA run from the default start, keeping the trace.
pub fn run_trace(s: &Scenario, opts: &ScaOptions) -> Result<ScaRun> {
    sca_solve_traced(s, &default_init(s), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Solved and the allocation passed verification.
    Optimal,
    Infeasible,
    /// The solver returned an allocation that failed verification.
    Unverified,
    TooManyDevices,
    NonConvergence,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Optimal => "optimal",
            RunStatus::Infeasible => "infeasible",
            RunStatus::Unverified => "unverified",
            RunStatus::TooManyDevices => "too_many_devices",
            RunStatus::NonConvergence => "nonconvergence",
            RunStatus::Failed => "failed",
        }
    }
}

/// One solver invocation. Lifetime is positive exactly when the status is
/// [`RunStatus::Optimal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: Option<u64>,
    pub algorithm: Algorithm,
    /// Swept parameter name, empty outside sweeps.
    pub param: String,
    pub value: Option<f64>,
    pub status: RunStatus,
    pub lifetime_s: f64,
    pub zeta: Option<f64>,
    pub q: Option<Point>,
    /// Wall-clock solve time, only recorded on request since it breaks
    /// byte-for-byte reproducibility.
    pub solve_ms: Option<f64>,
}

impl ResultRow {
    pub const HEADER: [&'static str; 10] =
        ["seed", "algorithm", "param", "value", "status", "lifetime_s", "zeta", "q_x", "q_y", "solve_ms"];

    /// Runs `alg` and turns the outcome into a row.
    pub fn solve(alg: Algorithm, s: &Scenario, opts: &RunOptions, timing: bool) -> (Self, Option<PlacementSolution>) {
        let start = Instant::now();
        let result = run_algorithm(alg, s, opts);
        let ms = timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        let mut row = ResultRow {
            seed: s.seed(),
            algorithm: alg,
            param: String::new(),
            value: None,
            status: RunStatus::Failed,
            lifetime_s: 0.0,
            zeta: None,
            q: None,
            solve_ms: ms,
        };
        match result {
            Ok(sol) => {
                row.zeta = Some(sol.zeta);
                row.q = Some(sol.q);
                if sol.report.feasible {
                    row.status = RunStatus::Optimal;
                    row.lifetime_s = sol.lifetime;
                } else {
                    row.status = RunStatus::Unverified;
                }
                (row, Some(sol))
            }
            Err(e) => {
                row.status = match e {
                    Error::Infeasible(_) => RunStatus::Infeasible,
                    Error::TooManyDevices { .. } => RunStatus::TooManyDevices,
                    Error::NonConvergence { .. } => RunStatus::NonConvergence,
                    _ => RunStatus::Failed,
                };
                (row, None)
            }
        }
    }

    pub fn record(&self) -> Vec<String> {
        vec![
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.algorithm.to_string(),
            self.param.clone(),
            opt(self.value),
            self.status.as_str().to_string(),
            num(self.lifetime_s),
            opt(self.zeta),
            opt(self.q.map(|q| q.x)),
            opt(self.q.map(|q| q.y)),
            opt(self.solve_ms),
        ]
    }
}

/// Nine significant digits, so reruns diff cleanly.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_csv<W: std::io::Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_results<W: std::io::Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    write_csv(out, &ResultRow::HEADER, rows.iter().map(ResultRow::record))
}

pub const TRACE_HEADER: [&str; 14] = [
    "iter",
    "stage",
    "outer",
    "inner",
    "zeta",
    "objective",
    "phi",
    "phi_g",
    "rho1",
    "rho2",
    "q_x",
    "q_y",
    "lifetime_s",
    "best_lifetime_s",
];

pub fn write_trace<W: std::io::Write>(out: W, trace: &[TraceRow]) -> Result<()> {
    let rows = trace.iter().enumerate().map(|(i, r)| {
        vec![
            i.to_string(),
            r.stage.as_str().to_string(),
            r.outer.to_string(),
            r.inner.to_string(),
            num(r.zeta),
            num(r.objective),
            num(r.phi),
            num(r.phi_g),
            num(r.rho1),
            num(r.rho2),
            num(r.q.x),
            num(r.q.y),
            opt(r.lifetime_s),
            num(r.best_lifetime_s),
        ]
    });
    write_csv(out, &TRACE_HEADER, rows)
}

/// Every algorithm on one scenario, with the lifetime relative to
/// `op-noma-j` when that one succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ResultRow>,
    pub ratios: Vec<Option<f64>>,
}

pub const COMPARE_HEADER: [&str; 8] = ["algorithm", "status", "lifetime_s", "zeta", "q_x", "q_y", "ratio_to_optimal", "solve_ms"];

pub fn compare(s: &Scenario, algorithms: &[Algorithm], opts: &RunOptions, timing: bool) -> Comparison {
    let rows: Vec<ResultRow> = algorithms.iter().map(|&a| ResultRow::solve(a, s, opts, timing).0).collect();
    let reference = rows
        .iter()
        .find(|r| r.algorithm == Algorithm::OpNomaJ && r.status == RunStatus::Optimal)
        .map(|r| r.lifetime_s);
    let ratios = rows.iter().map(|r| reference.map(|l| r.lifetime_s / l)).collect();
    Comparison { rows, ratios }
}

impl Comparison {
    pub fn write<W: std::io::Write>(&self, out: W) -> Result<()> {
        let recs = self.rows.iter().zip(&self.ratios).map(|(r, ratio)| {
            vec![
                r.algorithm.to_string(),
                r.status.as_str().to_string(),
                num(r.lifetime_s),
                opt(r.zeta),
                opt(r.q.map(|q| q.x)),
                opt(r.q.map(|q| q.y)),
                opt(*ratio),
                opt(r.solve_ms),
            ]
        });
        write_csv(out, &COMPARE_HEADER, recs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_is_deterministic_and_in_region() {
        let spec = GenerateSpec::new(7, 6);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.positions().iter().all(|p| (0.0..500.0).contains(&p.x) && (0.0..500.0).contains(&p.y)));
        assert_eq!(a.seed(), Some(7));
        assert_eq!(a.region(), Some([500.0, 500.0]));
        let c = generate(&GenerateSpec::new(8, 6)).unwrap();
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn generate_applies_defaults_and_overrides() {
        let s = generate(&GenerateSpec::new(1, 3)).unwrap();
        assert_eq!(s.max_power(), 1.0);
        assert_eq!(s.circuit_power(), 0.9);
        assert_eq!(s.energies(), &[4e3; 3]);
        assert_eq!(s.ref_snr_db(), 60.0);
        assert_eq!(s.interference_threshold_dbm(), 28.0);
        assert_eq!(s.csi_error_var(), 1e-2);
        assert_eq!(s.violation_prob(), 1e-3);
        assert_eq!(s.altitude(), 100.0);
        let spec = GenerateSpec { qos_rate: Some(0.8), interference_threshold_dbm: Some(10.0), altitude_m: 80.0, ..GenerateSpec::new(1, 3) };
        let o = generate(&spec).unwrap();
        assert_eq!(o.qos_rate(), 0.8);
        assert_eq!(o.interference_threshold_dbm(), 10.0);
        assert_eq!(o.altitude(), 80.0);
        assert_eq!(o.positions(), s.positions());
    }

    #[test]
    fn zero_devices_rejected() {
        assert!(matches!(generate(&GenerateSpec::new(1, 0)), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.name()));
        }
        assert!("op-noma".parse::<Algorithm>().is_err());
    }

    #[test]
    fn rows_obey_status_invariant() {
        let s = generate(&GenerateSpec::new(3, 3)).unwrap();
        for a in Algorithm::ALL {
            let (row, sol) = ResultRow::solve(a, &s, &RunOptions::default(), false);
            assert_eq!(row.status, RunStatus::Optimal, "{a}");
            assert!(row.lifetime_s > 0.0);
            assert!(sol.unwrap().report.feasible);
            assert!(row.solve_ms.is_none());
        }
        let tight = generate(&GenerateSpec { interference_threshold_dbm: Some(-40.0), ..GenerateSpec::new(3, 3) }).unwrap();
        for a in Algorithm::ALL {
            let (row, _) = ResultRow::solve(a, &tight, &RunOptions::default(), false);
            assert_eq!(row.status, RunStatus::Infeasible, "{a}");
            assert_eq!(row.lifetime_s, 0.0);
        }
    }

    #[test]
    fn compare_reports_ratios() {
        let s = generate(&GenerateSpec::new(5, 4)).unwrap();
        let c = compare(&s, &Algorithm::ALL, &RunOptions::default(), false);
        assert_eq!(c.ratios[0], Some(1.0));
        for r in &c.ratios[1..3] {
            assert!(r.unwrap() <= 1.0 + 1e-8);
        }
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("algorithm,status,lifetime_s"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn trace_csv_has_one_line_per_row() {
        let s = generate(&GenerateSpec::new(2, 3)).unwrap();
        let run = run_trace(&s, &ScaOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &run.trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), run.trace.len() + 1);
        assert!(text.lines().last().unwrap().split(',').nth(1) == Some("final"));
    }
}
