//! Comparison schemes: NOMA with the UAV pinned at the device centroid, and
//! FDMA with an equal bandwidth split and a jointly optimized position.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::closed_form_power;
use crate::kernel::{self, Affine, ConvexProgram, Quadratic, SolveOptions, Status};
use crate::model::{
    allowable_power, channel_gain, distance_order, geometric_centroid, FeasibilityReport, PlacementSolution,
    Point, Scenario,
};

/// NOMA with `q` fixed at the centroid. At a fixed location only the
/// distance-sorted order satisfies the SIC rule, so no search is needed.
pub fn solve_noma_fixed(s: &Scenario) -> Result<PlacementSolution> {
    let q = geometric_centroid(s);
    let order = distance_order(q, s);
    let mut sol = PlacementSolution::noma(q, closed_form_power(q, &order, s), order.clone(), s);
    if !sol.report.power_ok {
        return Err(Error::Infeasible(format!(
            "at the centroid the required powers exceed the caps (slack {:?})",
            sol.report.power_slack
        )));
    }
    let d2: Vec<f64> = order.as_slice().iter().map(|&k| q.dist2(s.position(k))).collect();
    for (m, pair) in d2.windows(2).enumerate() {
        if pair[0] == pair[1] {
            let (a, b) = (order.device(m), order.device(m + 1));
            sol.flags.push(format!("devices {a} and {b} are equidistant; decoded {a} first by index"));
        }
    }
    Ok(sol)
}

/// Equal-share FDMA: each device owns `1/K` of the band and sees `σ²/K`
/// noise, so its rate is `(1/K) log2(1 + K p h / σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdmaModel {
    pub num_devices: usize,
}

impl FdmaModel {
    pub fn new(num_devices: usize) -> Self {
        FdmaModel { num_devices }
    }

    pub fn share(&self) -> f64 {
        1.0 / self.num_devices as f64
    }

    pub fn subband_noise(&self, noise_power: f64) -> f64 {
        noise_power * self.share()
    }

    /// Received power a device needs to reach `rate`.
    pub fn required_rx_power(&self, rate: f64, noise_power: f64) -> f64 {
        self.subband_noise(noise_power) * ((self.num_devices as f64 * rate).exp2() - 1.0)
    }

    /// Minimum transmit power of device `k` with the UAV at `q`.
    pub fn power(&self, q: Point, s: &Scenario, k: usize) -> f64 {
        self.required_rx_power(s.qos_rate(), s.noise_power()) / channel_gain(q, s, k)
    }

    pub fn powers(&self, q: Point, s: &Scenario) -> Vec<f64> {
        (0..s.num_devices()).map(|k| self.power(q, s, k)).collect()
    }

    /// Rate of every device at the given powers.
    pub fn rates(&self, q: Point, powers: &[f64], s: &Scenario) -> Vec<f64> {
        let noise = self.subband_noise(s.noise_power());
        (0..s.num_devices())
            .map(|k| self.share() * (powers[k] * channel_gain(q, s, k) / noise).ln_1p() / std::f64::consts::LN_2)
            .collect()
    }

    /// Same checks as [`crate::model::evaluate`] minus the decoding order.
    pub fn evaluate(&self, q: Point, powers: &[f64], s: &Scenario) -> FeasibilityReport {
        FeasibilityReport::assemble(s, powers, self.rates(q, powers, s), Vec::new(), 1.0)
    }
}

/// Per-device received power NOMA needs at decode position `m` (zero
/// based), `(2^r - 1) σ² 2^{(K-1-m) r}`.
pub fn noma_required_rx_power(k: usize, m: usize, rate: f64, noise_power: f64) -> f64 {
    (rate.exp2() - 1.0) * noise_power * (((k - 1 - m) as f64) * rate).exp2()
}

const LENGTH_UNIT: f64 = 100.0;

/// FDMA with the UAV position optimized. Powers follow in closed form from
/// the position, which leaves a convex min-max location problem over
/// `(ζ̂, q / 100 m)`.
pub fn solve_fdma(s: &Scenario, tol: f64) -> Result<PlacementSolution> {
    let k = s.num_devices();
    let model = FdmaModel::new(k);
    let h2 = s.altitude() * s.altitude();
    let l2 = LENGTH_UNIT * LENGTH_UNIT;
    // p_k = a (H² + d_k²), the same `a` for every device.
    let a = model.required_rx_power(s.qos_rate(), s.noise_power()) / s.ref_gain();
    let e_min = s.energies().iter().copied().fold(f64::INFINITY, f64::min);
    let scale = e_min / (a * h2);

    let mut prog = ConvexProgram::new(3);
    prog.objective.linear = Affine::var(0);
    for i in 0..k {
        let w = s.position(i) * (1.0 / LENGTH_UNIT);
        let dist = Quadratic::squared_distance(&[1, 2], &[w.x, w.y], a * l2);
        let ratio = s.energies()[i] / scale;
        prog.quadratic_ineq
            .push(dist.clone().plus_affine(&Affine::constant(a * h2 + s.circuit_power()).term(0, -ratio)));
        prog.quadratic_ineq.push(dist.plus_affine(&Affine::constant(a * h2 - allowable_power(s, i))));
    }

    let c = geometric_centroid(s);
    let zeta0 = model.powers(c, s).iter().zip(s.energies()).map(|(p, e)| (p + s.circuit_power()) / e).fold(0.0, f64::max);
    let start = vec![zeta0 * scale * 1.01, c.x / LENGTH_UNIT, c.y / LENGTH_UNIT];
    let opts = SolveOptions { initial_point: Some(start), ..SolveOptions::with_tol(tol) };
    let sol = kernel::solve(&prog, &opts)?;
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => {
            return Err(Error::Infeasible("FDMA powers exceed the caps at every location".into()));
        }
        other => return Err(Error::Kernel(format!("FDMA location problem ended with status {other:?}"))),
    }
    let q = Point::new(sol.x[1], sol.x[2]) * LENGTH_UNIT;
    let powers = model.powers(q, s);
    let report = model.evaluate(q, &powers, s);
    Ok(PlacementSolution {
        q,
        zeta: report.zeta,
        lifetime: report.lifetime_s,
        powers,
        order: None,
        report,
        certificate: None,
        flags: Vec::new(),
    })
}
