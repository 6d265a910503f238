use serde::{Deserialize, Serialize};

use super::power::PowerCoefficients;
use crate::error::{Error, Result};
use crate::kernel::{Affine, ConvexProgram, Quadratic};
use crate::model::{allowable_power, DecodingOrder, Point, Scenario, EVAL_TOL};

/// Length unit of the kernel programs built here (m).
pub(crate) const LENGTH_UNIT: f64 = 100.0;

/// Multipliers of the fixed-order location problem: `lambda` for the
/// lifetime rows, `mu` for the power caps and `v` for the `K - 1` ordering
/// rows, all listed by decode position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualIterate {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub v: Vec<f64>,
}

impl DualIterate {
    /// `λ_m = 1 / (K E_m)`, `μ = v = 0`.
    pub fn initial(p: &LocationProblem) -> Self {
        let k = p.num_devices();
        DualIterate {
            lambda: p.energy.iter().map(|e| 1.0 / (k as f64 * e)).collect(),
            mu: vec![0.0; k],
            v: vec![0.0; k.saturating_sub(1)],
        }
    }

    /// Flattened `(λ, μ, v)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.lambda.iter().chain(&self.mu).chain(&self.v).copied().collect()
    }

    pub fn from_slice(k: usize, x: &[f64]) -> Self {
        assert_eq!(x.len(), 3 * k - 1);
        DualIterate {
            lambda: x[..k].to_vec(),
            mu: x[k..2 * k].to_vec(),
            v: x[2 * k..].to_vec(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_vec().iter().all(|&x| x >= 0.0)
    }
}

/// Subgradients at a dual point. `eta0` belongs to the negated dual
/// function, `eta1` and `eta2` to the two halves `Σ λ_m E_m ≤ 1` and
/// `Σ λ_m E_m ≥ 1` of the normalization equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgradients {
    pub eta0: Vec<f64>,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
}

/// The location problem for one decoding order, with everything listed by
/// decode position:
///
/// minimize `ζ` over `(ζ, q)` subject to
/// `P_c + c_m (H² + |q - w_m|²) ≤ ζ E_m`,
/// `H² + |q - w_m|² ≤ P̄_m` and `|q - w_m|² ≤ |q - w_{m+1}|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationProblem {
    pub order: DecodingOrder,
    pub w: Vec<Point>,
    pub energy: Vec<f64>,
    pub c: Vec<f64>,
    /// Allowable power `P̃` per position (W).
    pub cap: Vec<f64>,
    /// `P̃_m / c_m` (m²).
    pub pbar: Vec<f64>,
    pub h2: f64,
    pub circuit: f64,
}

impl LocationProblem {
    pub fn new(order: &DecodingOrder, s: &Scenario) -> Self {
        assert_eq!(order.len(), s.num_devices(), "order covers every device");
        let coeffs = PowerCoefficients::for_scenario(s);
        let devs = order.as_slice();
        let cap: Vec<f64> = devs.iter().map(|&d| allowable_power(s, d)).collect();
        let pbar = cap.iter().zip(&coeffs.c).map(|(p, c)| p / c).collect();
        LocationProblem {
            order: order.clone(),
            w: devs.iter().map(|&d| s.position(d)).collect(),
            energy: devs.iter().map(|&d| s.energies()[d]).collect(),
            c: coeffs.c,
            cap,
            pbar,
            h2: s.altitude() * s.altitude(),
            circuit: s.circuit_power(),
        }
    }

    pub fn num_devices(&self) -> usize {
        self.w.len()
    }

    pub fn dual_dim(&self) -> usize {
        3 * self.num_devices() - 1
    }

    /// Reciprocal lifetime with closed-form powers at `q`.
    pub fn zeta_at(&self, q: Point) -> f64 {
        (0..self.num_devices())
            .map(|m| (self.c[m] * (self.h2 + q.dist2(self.w[m])) + self.circuit) / self.energy[m])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `|q - w_m|² - |q - w_{m+1}|²`, affine in `q`.
    pub fn ordering_value(&self, q: Point, m: usize) -> f64 {
        let (a, b) = (self.w[m], self.w[m + 1]);
        (b - a).dot(q) * 2.0 + a.norm2() - b.norm2()
    }

    /// Largest constraint violation at `q`, measured with the same relative
    /// scales the feasibility report uses.
    pub fn violation(&self, q: Point) -> f64 {
        let mut v: f64 = 0.0;
        let mut dmax: f64 = 0.0;
        for m in 0..self.num_devices() {
            let d2 = q.dist2(self.w[m]);
            dmax = dmax.max(d2);
            let p = self.c[m] * (self.h2 + d2);
            v = v.max((p - self.cap[m]) / self.cap[m]);
        }
        let scale = self.h2 + dmax;
        for m in 0..self.num_devices().saturating_sub(1) {
            v = v.max(self.ordering_value(q, m) / scale);
        }
        v
    }

    /// Whether `q` passes the feasibility report with margin to spare.
    pub fn accepts(&self, q: Point) -> bool {
        self.violation(q) <= 0.5 * EVAL_TOL
    }

    fn weights(&self, dual: &DualIterate) -> Vec<f64> {
        (0..self.num_devices()).map(|m| self.c[m] * dual.lambda[m] + dual.mu[m]).collect()
    }

    /// Minimizer of the Lagrangian over `q`.
    pub fn dual_location(&self, dual: &DualIterate) -> Result<Point> {
        let a = self.weights(dual);
        let total: f64 = a.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::DegenerateDual(total));
        }
        let mut num = Point::default();
        for (&wm, &am) in self.w.iter().zip(&a).take(self.num_devices()) {
            num = num + wm * am;
        }
        for (m, &vm) in dual.v.iter().enumerate() {
            num = num + (self.w[m] - self.w[m + 1]) * vm;
        }
        Ok(num * (1.0 / total))
    }

    /// Lagrangian with `ζ` eliminated by the normalization equality.
    pub fn lagrangian(&self, q: Point, dual: &DualIterate) -> f64 {
        let mut l = 0.0;
        for m in 0..self.num_devices() {
            let r2 = self.h2 + q.dist2(self.w[m]);
            l += dual.lambda[m] * (self.circuit + self.c[m] * r2);
            l += dual.mu[m] * (r2 - self.pbar[m]);
        }
        for (m, &vm) in dual.v.iter().enumerate() {
            l += vm * self.ordering_value(q, m);
        }
        l
    }

    /// Dual function value and the location attaining it.
    pub fn dual_value(&self, dual: &DualIterate) -> Result<(Point, f64)> {
        let q = self.dual_location(dual)?;
        Ok((q, self.lagrangian(q, dual)))
    }

    pub fn subgradients(&self, q: Point, dual: &DualIterate) -> Subgradients {
        let k = self.num_devices();
        let mut eta0 = Vec::with_capacity(3 * k - 1);
        for m in 0..k {
            let d2 = q.dist2(self.w[m]);
            eta0.push(-self.c[m] * d2 - (self.c[m] * self.h2 + self.circuit));
        }
        for m in 0..k {
            let d2 = q.dist2(self.w[m]);
            eta0.push(-d2 - (self.h2 - self.pbar[m]));
        }
        for m in 0..dual.v.len() {
            let (a, b) = (self.w[m], self.w[m + 1]);
            eta0.push(-(b - a).dot(q) * 2.0 + b.norm2() - a.norm2());
        }
        let mut eta1 = vec![0.0; 3 * k - 1];
        for (e, &en) in eta1.iter_mut().zip(&self.energy).take(k) {
            *e = -en;
        }
        let eta2 = eta1.iter().map(|x| -x).collect();
        Subgradients { eta0, eta1, eta2 }
    }

    fn base_program(&self) -> ConvexProgram {
        let l = LENGTH_UNIT;
        let mut prog = ConvexProgram::new(2);
        for m in 0..self.num_devices() {
            let w = self.w[m] * (1.0 / l);
            prog.quadratic_ineq.push(
                Quadratic::squared_distance(&[0, 1], &[w.x, w.y], self.c[m] * l * l)
                    .plus_affine(&Affine::constant(self.c[m] * self.h2 - self.cap[m])),
            );
        }
        for m in 0..self.num_devices().saturating_sub(1) {
            let (a, b) = (self.w[m] * (1.0 / l), self.w[m + 1] * (1.0 / l));
            prog.affine_ineq.push(
                Affine::new()
                    .term(0, 2.0 * (b.x - a.x))
                    .term(1, 2.0 * (b.y - a.y))
                    .plus(a.norm2() - b.norm2()),
            );
        }
        prog
    }

    /// Feasibility program over `q / 100 m`: power caps and ordering rows.
    pub fn feasibility_program(&self) -> ConvexProgram {
        self.base_program()
    }

    /// Euclidean projection of `target` onto the feasible set, over
    /// `q / 100 m`.
    pub fn projection_program(&self, target: Point) -> ConvexProgram {
        let mut prog = self.base_program();
        let t = target * (1.0 / LENGTH_UNIT);
        prog.objective.quadratics.push(Quadratic::squared_distance(&[0, 1], &[t.x, t.y], 1.0));
        prog
    }
}

pub fn dual_location(dual: &DualIterate, order: &DecodingOrder, s: &Scenario) -> Result<Point> {
    LocationProblem::new(order, s).dual_location(dual)
}

pub fn dual_value(dual: &DualIterate, order: &DecodingOrder, s: &Scenario) -> Result<f64> {
    LocationProblem::new(order, s).dual_value(dual).map(|(_, v)| v)
}

pub fn dual_subgradients(q: Point, dual: &DualIterate, order: &DecodingOrder, s: &Scenario) -> Subgradients {
    LocationProblem::new(order, s).subgradients(q, dual)
}
