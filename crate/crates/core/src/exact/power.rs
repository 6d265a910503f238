use serde::{Deserialize, Serialize};

use crate::model::{channel_gain, DecodingOrder, Point, Scenario};

/// Power coefficient of decode position `m` (zero-based) among `k` devices:
/// `(2^r - 1) 2^((k-1-m) r) / γ0`, in W/m².
///
/// The device decoded at position `m` needs transmit power
/// `c_m (H² + d²)` to reach rate `r` against everything decoded after it.
pub fn coeff_c(m: usize, k: usize, r: f64, gamma0: f64) -> f64 {
    assert!(m < k, "decode position {m} out of range for {k} devices");
    (r.exp2() - 1.0) * (((k - 1 - m) as f64) * r).exp2() / gamma0
}

/// `c_m` for every decode position of a scenario. Strictly decreasing with
/// ratio `2^r` between neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCoefficients {
    pub c: Vec<f64>,
}

impl PowerCoefficients {
    pub fn new(k: usize, r: f64, gamma0: f64) -> Self {
        PowerCoefficients { c: (0..k).map(|m| coeff_c(m, k, r, gamma0)).collect() }
    }

    pub fn for_scenario(s: &Scenario) -> Self {
        Self::new(s.num_devices(), s.qos_rate(), s.ref_snr())
    }

    pub fn get(&self, m: usize) -> f64 {
        self.c[m]
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }
}

/// Minimum transmit powers meeting every QoS rate with equality at `q` under
/// `order`, indexed by device.
pub fn closed_form_power(q: Point, order: &DecodingOrder, s: &Scenario) -> Vec<f64> {
    let c = PowerCoefficients::for_scenario(s);
    let h2 = s.altitude() * s.altitude();
    let mut p = vec![0.0; s.num_devices()];
    for (m, &dev) in order.as_slice().iter().enumerate() {
        p[dev] = c.get(m) * (h2 + q.dist2(s.position(dev)));
    }
    p
}

/// Received powers `p h` listed by decode position.
pub fn received_powers(q: Point, powers: &[f64], order: &DecodingOrder, s: &Scenario) -> Vec<f64> {
    order.as_slice().iter().map(|&dev| powers[dev] * channel_gain(q, s, dev)).collect()
}
