use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{DecodingOrder, Point, Scenario};

/// Line-of-sight channel power gain from device `k` to a UAV at `q`.
pub fn channel_gain(q: Point, s: &Scenario, k: usize) -> f64 {
    let h = s.altitude();
    s.ref_gain() / (q.dist2(s.position(k)) + h * h)
}

/// Post-SIC SINR of every device, indexed by device.
///
/// The device decoded at position `m` sees the signals decoded after it as
/// interference; the last one sees only noise.
pub fn sinr_vector(q: Point, powers: &[f64], order: &DecodingOrder, s: &Scenario) -> Vec<f64> {
    let k = s.num_devices();
    let mut sinr = vec![0.0; k];
    let mut interference = 0.0;
    for &dev in order.as_slice().iter().rev() {
        let rx = powers[dev] * channel_gain(q, s, dev);
        sinr[dev] = rx / (interference + s.noise_power());
        interference += rx;
    }
    sinr
}

/// Achievable rates `log2(1 + SINR)` in bits/s/Hz, indexed by device.
pub fn rates(q: Point, powers: &[f64], order: &DecodingOrder, s: &Scenario) -> Vec<f64> {
    sinr_vector(q, powers, order, s).into_iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).collect()
}

/// Network lifetime in seconds: time until the first battery drains.
pub fn lifetime_of(powers: &[f64], s: &Scenario) -> f64 {
    powers
        .iter()
        .zip(s.energies())
        .map(|(p, e)| e / (p + s.circuit_power()))
        .fold(f64::INFINITY, f64::min)
}

/// Reciprocal lifetime `max_k (p_k + P_c) / E_k`.
pub fn zeta_of(powers: &[f64], s: &Scenario) -> f64 {
    powers
        .iter()
        .zip(s.energies())
        .map(|(p, e)| (p + s.circuit_power()) / e)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest transmit power of device `k` that honors both the hardware cap
/// and the chance-constrained interference cap at the primary receiver.
pub fn allowable_power(s: &Scenario, k: usize) -> f64 {
    let denom = s.primary_gains()[k] - s.csi_error_var() * s.violation_prob().ln();
    s.max_power().min(s.interference_threshold() / denom)
}

/// Draws `k` estimated secondary-to-primary power gains. The MMSE estimate of
/// a unit-variance Rayleigh coefficient has power exponentially distributed
/// with mean `1 - csi_error_var`.
pub fn sample_primary_gains(seed: u64, k: usize, csi_error_var: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_primary_gains_with(&mut rng, k, csi_error_var)
}

pub fn sample_primary_gains_with<R: Rng + ?Sized>(rng: &mut R, k: usize, csi_error_var: f64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&csi_error_var), "CSI error variance must be in [0, 1)");
    let exp = Exp::new(1.0 / (1.0 - csi_error_var)).expect("positive rate");
    (0..k).map(|_| exp.sample(rng)).collect()
}

pub fn geometric_centroid(s: &Scenario) -> Point {
    let n = s.num_devices() as f64;
    let sum = s.positions().iter().fold(Point::default(), |acc, &p| acc + p);
    sum * (1.0 / n)
}

/// Decoding order forced by the SIC rule at `q`: nearest device first, ties
/// broken by device index.
pub fn distance_order(q: Point, s: &Scenario) -> DecodingOrder {
    let mut idx: Vec<usize> = (0..s.num_devices()).collect();
    let d: Vec<f64> = s.positions().iter().map(|w| q.dist2(*w)).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    DecodingOrder::new(idx).expect("sorted indices form a permutation")
}
