use serde::{Deserialize, Serialize};

use super::physics::{allowable_power, lifetime_of, rates, zeta_of};
use super::{Point, Scenario};
use crate::error::{Error, Result};
use crate::exact::DualCertificate;

/// Relative tolerance used by [`evaluate`] for every constraint.
pub const EVAL_TOL: f64 = 1e-8;

/// SIC decoding order: `as_slice()[m]` is the (zero-based) device decoded
/// `m`-th.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DecodingOrder(Vec<usize>);

impl DecodingOrder {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let k = perm.len();
        let mut seen = vec![false; k];
        for &d in &perm {
            if d >= k || std::mem::replace(&mut seen[d], true) {
                return Err(Error::InvalidOrder(format!("{perm:?} is not a permutation of 0..{k}")));
            }
        }
        Ok(DecodingOrder(perm))
    }

    pub fn identity(k: usize) -> Self {
        DecodingOrder((0..k).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Device decoded at position `m`.
    pub fn device(&self, m: usize) -> usize {
        self.0[m]
    }

    /// Decode position of each device (the inverse permutation).
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (m, &d) in self.0.iter().enumerate() {
            pos[d] = m;
        }
        pos
    }
}

impl TryFrom<Vec<usize>> for DecodingOrder {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        DecodingOrder::new(v)
    }
}

impl From<DecodingOrder> for Vec<usize> {
    fn from(o: DecodingOrder) -> Self {
        o.0
    }
}

/// Per-constraint slacks of a candidate allocation. Positive slack means the
/// constraint holds strictly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Achieved rate of each device (bits/s/Hz).
    pub rates: Vec<f64>,
    /// `rate - r*` per device.
    pub rate_slack: Vec<f64>,
    /// `P̃_k - p_k` per device (W).
    pub power_slack: Vec<f64>,
    /// `d²(next) - d²(current)` for each consecutive decode pair (m²). Empty
    /// when the access scheme has no decoding order.
    pub ordering_slack: Vec<f64>,
    pub lifetime_s: f64,
    pub zeta: f64,
    pub qos_ok: bool,
    pub power_ok: bool,
    pub ordering_ok: bool,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub(crate) fn assemble(
        s: &Scenario,
        powers: &[f64],
        rates: Vec<f64>,
        ordering_slack: Vec<f64>,
        distance_scale: f64,
    ) -> Self {
        let r = s.qos_rate();
        let rate_slack: Vec<f64> = rates.iter().map(|x| x - r).collect();
        let caps: Vec<f64> = (0..s.num_devices()).map(|k| allowable_power(s, k)).collect();
        let power_slack: Vec<f64> = caps.iter().zip(powers).map(|(c, p)| c - p).collect();
        let qos_ok = rate_slack.iter().all(|&x| x >= -EVAL_TOL * r.max(1.0));
        let power_ok = power_slack.iter().zip(&caps).all(|(&sl, &c)| sl >= -EVAL_TOL * c)
            && powers.iter().all(|&p| p >= 0.0);
        let ordering_ok = ordering_slack.iter().all(|&x| x >= -EVAL_TOL * distance_scale);
        FeasibilityReport {
            rates,
            rate_slack,
            power_slack,
            ordering_slack,
            lifetime_s: lifetime_of(powers, s),
            zeta: zeta_of(powers, s),
            qos_ok,
            power_ok,
            ordering_ok,
            feasible: qos_ok && power_ok && ordering_ok,
        }
    }
}

/// Checks a NOMA allocation against every constraint of the reduced
/// lifetime problem: per-device QoS, allowable power and the SIC ordering
/// rule (nearer devices are decoded first).
pub fn evaluate(q: Point, powers: &[f64], order: &DecodingOrder, s: &Scenario) -> FeasibilityReport {
    assert_eq!(powers.len(), s.num_devices(), "one power per device");
    assert_eq!(order.len(), s.num_devices(), "order covers every device");
    let d2: Vec<f64> = s.positions().iter().map(|w| q.dist2(*w)).collect();
    let ordering_slack = order
        .as_slice()
        .windows(2)
        .map(|w| d2[w[1]] - d2[w[0]])
        .collect();
    let h2 = s.altitude() * s.altitude();
    let scale = h2 + d2.iter().cloned().fold(0.0, f64::max);
    FeasibilityReport::assemble(s, powers, rates(q, powers, order, s), ordering_slack, scale)
}

/// A complete allocation plus its verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSolution {
    /// UAV horizontal position (m).
    pub q: Point,
    /// Transmit power per device (W).
    pub powers: Vec<f64>,
    /// SIC order; `None` for orthogonal access.
    pub order: Option<DecodingOrder>,
    /// Reciprocal lifetime (1/s).
    pub zeta: f64,
    /// Network lifetime (s).
    pub lifetime: f64,
    pub report: FeasibilityReport,
    /// Final dual point of the ellipsoid solve, when one produced this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<DualCertificate>,
    /// Notes about fallbacks taken while producing the solution.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl PlacementSolution {
    /// Builds a NOMA solution, verifying it with [`evaluate`].
    pub fn noma(q: Point, powers: Vec<f64>, order: DecodingOrder, s: &Scenario) -> Self {
        let report = evaluate(q, &powers, &order, s);
        PlacementSolution {
            q,
            zeta: report.zeta,
            lifetime: report.lifetime_s,
            powers,
            order: Some(order),
            report,
            certificate: None,
            flags: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution serializes");
        s.push('\n');
        s
    }
}
