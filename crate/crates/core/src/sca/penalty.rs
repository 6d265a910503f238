use serde::{Deserialize, Serialize};

use super::SicMatrix;
use crate::model::{Point, Scenario};

/// `d_k² - d_j²` written as an affine function of `q` (m²).
pub fn theta(q: Point, k: usize, j: usize, s: &Scenario) -> f64 {
    theta_between(q, s.position(k), s.position(j))
}

pub(crate) fn theta_between(q: Point, wk: Point, wj: Point) -> f64 {
    (wj - wk).dot(q) * 2.0 + wk.norm2() - wj.norm2()
}

/// Binary-ness penalty `φ = Σ (α - α²)` and order-consistency penalty
/// `φ_g = Σ θ_kj (2 α_kj - 1) + |θ_kj|` (m²). Both vanish exactly when `α`
/// is binary and agrees with the distances at `q`.
pub fn smooth_penalties(q: Point, alpha: &SicMatrix, s: &Scenario) -> (f64, f64) {
    penalties_scaled(q, alpha, s, 1.0)
}

/// As [`smooth_penalties`] with `θ` divided by `unit²`.
pub(crate) fn penalties_scaled(q: Point, alpha: &SicMatrix, s: &Scenario, unit: f64) -> (f64, f64) {
    let k = s.num_devices();
    let mut phi = 0.0;
    let mut phi_g = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let a = alpha.get(i, j);
            phi += a - a * a;
            let t = theta(q, i, j, s) / (unit * unit);
            phi_g += t * (2.0 * a - 1.0) + t.abs();
        }
    }
    (phi, phi_g)
}

/// Upper bound used for `φ` in the convex subproblem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiMajorizer {
    /// Tangent plane of the concave `α - α²`: `α + ᾱ² - 2ᾱα`.
    #[default]
    Tangent,
    /// `(α - ᾱ)²`. Tight at `ᾱ` but not an upper bound; kept for comparison.
    Squared,
}

impl PhiMajorizer {
    pub fn term(self, a: f64, a_bar: f64) -> f64 {
        match self {
            PhiMajorizer::Tangent => a + a_bar * a_bar - 2.0 * a_bar * a,
            PhiMajorizer::Squared => a * a + a_bar * a_bar - 2.0 * a_bar * a,
        }
    }
}

/// Majorizer of `φ` at `alpha_bar`, evaluated at `alpha`.
pub fn majorize_phi(alpha: &SicMatrix, alpha_bar: &SicMatrix, form: PhiMajorizer) -> f64 {
    let k = alpha.size();
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                total += form.term(alpha.get(i, j), alpha_bar.get(i, j));
            }
        }
    }
    total
}

/// Convex upper bound `D` of `2αθ` around `(θ̄, ᾱ)`.
pub fn majorize_bilinear(theta: f64, alpha: f64, theta_bar: f64, alpha_bar: f64) -> f64 {
    let e = theta_bar - alpha_bar;
    0.5 * ((theta + alpha).powi(2) + e * e) - e * (theta - alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub rho1_init: f64,
    pub rho2_init: f64,
    pub b1: f64,
    pub b2: f64,
    pub rho1_max: f64,
    pub rho2_max: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        PenaltySchedule { rho1_init: 1e-2, rho2_init: 1e-2, b1: 5.0, b2: 5.0, rho1_max: 1e6, rho2_max: 1e6 }
    }
}

/// Current penalty weights and loop counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyState {
    pub rho1: f64,
    pub rho2: f64,
    pub schedule: PenaltySchedule,
    pub inner: usize,
    pub outer: usize,
}

impl PenaltyState {
    pub fn new(schedule: PenaltySchedule) -> Self {
        PenaltyState { rho1: schedule.rho1_init, rho2: schedule.rho2_init, schedule, inner: 0, outer: 0 }
    }

    /// Fixed weights that never grow.
    pub fn frozen(rho1: f64, rho2: f64) -> Self {
        let schedule = PenaltySchedule { rho1_init: rho1, rho2_init: rho2, b1: 1.0, b2: 1.0, rho1_max: rho1, rho2_max: rho2 };
        Self::new(schedule)
    }

    /// Starts a new outer iteration with the initial weights.
    pub fn reset(&mut self) {
        self.rho1 = self.schedule.rho1_init;
        self.rho2 = self.schedule.rho2_init;
        self.inner = 0;
        self.outer += 1;
    }

    pub fn grow(&mut self) {
        self.rho1 = (self.rho1 * self.schedule.b1).min(self.schedule.rho1_max);
        self.rho2 = (self.rho2 * self.schedule.b2).min(self.schedule.rho2_max);
        self.inner += 1;
    }

    pub fn at_max(&self) -> bool {
        self.rho1 >= self.schedule.rho1_max && self.rho2 >= self.schedule.rho2_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScenarioFile;
    use crate::sca::alpha_from_order;
    use crate::model::distance_order;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair() -> Scenario {
        Scenario::from_file(ScenarioFile::with_defaults(&[Point::new(0.0, 0.0), Point::new(10.0, 0.0)], &[1.0, 1.0]))
            .unwrap()
    }

    #[test]
    fn theta_examples() {
        let s = pair();
        assert_eq!(theta(Point::new(0.0, 0.0), 0, 1, &s), -100.0);
        assert_eq!(theta(Point::new(5.0, 7.0), 0, 1, &s), 0.0);
        let q = Point::new(3.3, -1.2);
        assert_eq!(theta(q, 0, 1, &s), -theta(q, 1, 0, &s));
        let d = q.dist2(s.position(0)) - q.dist2(s.position(1));
        assert!((theta(q, 0, 1, &s) - d).abs() < 1e-9);
    }

    #[test]
    fn penalty_examples() {
        let s = pair();
        let q = Point::new(1.0, 2.0);
        let a = alpha_from_order(&distance_order(q, &s));
        assert_eq!(smooth_penalties(q, &a, &s), (0.0, 0.0));
        let (phi, _) = smooth_penalties(q, &SicMatrix::uniform(2, 0.5), &s);
        assert!((phi - 0.5).abs() < 1e-15);
        // device 1 is farther but decoded first
        let wrong = alpha_from_order(&crate::model::DecodingOrder::new(vec![1, 0]).unwrap());
        let (_, phi_g) = smooth_penalties(q, &wrong, &s);
        assert!((phi_g - 2.0 * 2.0 * theta(q, 1, 0, &s)).abs() < 1e-9);
    }

    #[test]
    fn majorizer_examples() {
        let mut a = SicMatrix::zeros(2);
        a.set(0, 1, 0.5);
        let mut a_bar = a.clone();
        a_bar.set(0, 1, 0.0);
        let bound = majorize_phi(&a, &a_bar, PhiMajorizer::Tangent);
        assert!((bound - 0.5).abs() < 1e-15);
        assert_eq!(majorize_bilinear(1.0, 1.0, 0.0, 0.0), 2.0);
        assert!((majorize_bilinear(3.0, 0.4, 3.0, 0.4) - 2.4).abs() < 1e-12);
    }

    #[test]
    fn squared_form_is_not_an_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut below = 0;
        for _ in 0..1000 {
            let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            if PhiMajorizer::Squared.term(a, b) < a - a * a - 1e-12 {
                below += 1;
            }
            assert!(PhiMajorizer::Tangent.term(a, b) >= a - a * a - 1e-12);
        }
        assert!(below > 0);
    }

    #[test]
    fn schedule_caps() {
        let mut p = PenaltyState::new(PenaltySchedule::default());
        for _ in 0..20 {
            p.grow();
        }
        assert!(p.at_max());
        p.reset();
        assert_eq!(p.rho1, 1e-2);
        let mut f = PenaltyState::frozen(0.3, 0.7);
        f.grow();
        assert_eq!((f.rho1, f.rho2), (0.3, 0.7));
    }
}
