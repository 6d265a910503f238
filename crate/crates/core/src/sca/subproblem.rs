use serde::{Deserialize, Serialize};

use super::penalty::{theta_between, PenaltyState, PhiMajorizer};
use super::sic::{alpha_from_order, decode_positions, DecodePositionMap, SicMatrix};
use crate::error::Result;
use crate::exact::coeff_c;
use crate::kernel::{AbsTerm, Affine, Bound, ConvexProgram, Quadratic};
use crate::model::{allowable_power, distance_order, geometric_centroid, Point, Scenario};

/// Length unit of the subproblem variables (m).
pub const LENGTH_UNIT: f64 = 100.0;

/// The subproblem minimizes `ζ̂ = ζ · E_min / P_ref`, where `P_ref = c_0 H²`
/// is the smallest power the first-decoded device can need. Circuit power
/// dominates `ζ`, so without the division its gradient in `q` is tiny next
/// to the curvature of the order-consistency bound and each step barely
/// moves.
pub fn zeta_scale(s: &Scenario) -> f64 {
    let e_min = s.energies().iter().copied().fold(f64::INFINITY, f64::min);
    let k = s.num_devices();
    let p_ref = coeff_c(0, k, s.qos_rate(), s.ref_snr()) * s.altitude() * s.altitude();
    e_min / p_ref
}

/// Variable indices of the subproblem: `ζ̂`, `q / 100 m` and the full
/// `K × K` matrix `α` in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub k: usize,
}

impl Layout {
    pub const ZETA: usize = 0;
    pub const QX: usize = 1;
    pub const QY: usize = 2;

    pub fn alpha(&self, i: usize, j: usize) -> usize {
        3 + i * self.k + j
    }

    pub fn num_vars(&self) -> usize {
        3 + self.k * self.k
    }

    pub fn point(&self, x: &[f64]) -> Point {
        Point::new(x[Self::QX], x[Self::QY]) * LENGTH_UNIT
    }

    pub fn sic(&self, x: &[f64]) -> SicMatrix {
        let mut a = SicMatrix::zeros(self.k);
        for i in 0..self.k {
            for j in 0..self.k {
                a.set(i, j, x[self.alpha(i, j)]);
            }
        }
        a
    }
}

fn theta_affine(s: &Scenario, i: usize, j: usize) -> Affine {
    let wi = s.position(i) * (1.0 / LENGTH_UNIT);
    let wj = s.position(j) * (1.0 / LENGTH_UNIT);
    Affine::new()
        .term(Layout::QX, 2.0 * (wj.x - wi.x))
        .term(Layout::QY, 2.0 * (wj.y - wi.y))
        .plus(wi.norm2() - wj.norm2())
}

/// Penalized convex subproblem around `(q̄, ᾱ)` for the decode positions `f`.
///
/// Objective `ζ̂ + ρ1 φ̄ + ρ2 φ̄_g`; rows: lifetime and allowable-power
/// constraints at the positions `f`, zero diagonal, pair sums, transitivity
/// over all ordered triples, and the `[0, 1]` box. `θ` is measured in
/// `(100 m)²`.
pub fn build_subproblem(
    q_bar: Point,
    alpha_bar: &SicMatrix,
    f: &DecodePositionMap,
    penalties: &PenaltyState,
    s: &Scenario,
    form: PhiMajorizer,
) -> ConvexProgram {
    let k = s.num_devices();
    let lay = Layout { k };
    let mut prog = ConvexProgram::new(lay.num_vars());
    let (rho1, rho2) = (penalties.rho1, penalties.rho2);
    let h2 = s.altitude() * s.altitude();
    let l2 = LENGTH_UNIT * LENGTH_UNIT;
    let scale = zeta_scale(s);

    let mut linear = Affine::var(Layout::ZETA);
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let a = lay.alpha(i, j);
            let ab = alpha_bar.get(i, j);
            match form {
                PhiMajorizer::Tangent => {
                    linear = linear.term(a, rho1 * (1.0 - 2.0 * ab)).plus(rho1 * ab * ab);
                }
                PhiMajorizer::Squared => {
                    prog.objective.quadratics.push(Quadratic::square_of(&Affine::var(a).plus(-ab), rho1));
                }
            }
            let th = theta_affine(s, i, j);
            let e = theta_between(q_bar, s.position(i), s.position(j)) / l2 - ab;
            let sum = th.clone().term(a, 1.0);
            prog.objective.quadratics.push(Quadratic::square_of(&sum, 0.5 * rho2));
            // -e (θ - α) + e²/2 - θ
            linear = linear.added(&th.clone().scaled(-rho2 * (e + 1.0))).term(a, rho2 * e).plus(0.5 * rho2 * e * e);
            if i < j {
                prog.objective.abs_terms.push(AbsTerm { arg: th, weight: 2.0 * rho2 });
            }
        }
    }
    prog.objective.linear = linear;

    for i in 0..k {
        let c = coeff_c(f.position(i), k, s.qos_rate(), s.ref_snr());
        let w = s.position(i) * (1.0 / LENGTH_UNIT);
        let dist = Quadratic::squared_distance(&[Layout::QX, Layout::QY], &[w.x, w.y], c * l2);
        let ratio = s.energies()[i] / scale;
        prog.quadratic_ineq.push(
            dist.clone()
                .plus_affine(&Affine::constant(c * h2 + s.circuit_power()).term(Layout::ZETA, -ratio)),
        );
        prog.quadratic_ineq.push(dist.plus_affine(&Affine::constant(c * h2 - allowable_power(s, i))));
    }
    for i in 0..k {
        prog.affine_eq.push(Affine::var(lay.alpha(i, i)));
    }
    for i in 0..k {
        for j in i + 1..k {
            prog.affine_eq.push(Affine::var(lay.alpha(i, j)).term(lay.alpha(j, i), 1.0).plus(-1.0));
        }
    }
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                if i != j && j != l && i != l {
                    prog.affine_ineq.push(
                        Affine::var(lay.alpha(i, j)).term(lay.alpha(j, l), 1.0).term(lay.alpha(i, l), -1.0).plus(-1.0),
                    );
                }
            }
        }
    }
    for i in 0..k {
        for j in 0..k {
            if i != j {
                prog.bounds[lay.alpha(i, j)] = Bound::interval(0.0, 1.0);
            }
        }
    }
    prog
}

/// Outcome of the initial-point check: closed-form powers at `q0` under the
/// positions encoded by `α0`, compared against the allowable powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCheck {
    pub feasible: bool,
    /// `P̃_k - p_k` per device (W).
    pub margins: Vec<f64>,
}

pub fn feasibility_check(q0: Point, alpha0: &SicMatrix, s: &Scenario) -> Result<FeasibilityCheck> {
    let f = decode_positions(alpha0)?;
    let k = s.num_devices();
    let h2 = s.altitude() * s.altitude();
    let margins: Vec<f64> = (0..k)
        .map(|i| {
            let p = coeff_c(f.position(i), k, s.qos_rate(), s.ref_snr()) * (h2 + q0.dist2(s.position(i)));
            allowable_power(s, i) - p
        })
        .collect();
    Ok(FeasibilityCheck { feasible: margins.iter().all(|&m| m >= 0.0), margins })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitPoint {
    pub q: Point,
    pub alpha: SicMatrix,
    pub check: FeasibilityCheck,
    /// Line-search steps taken away from the centroid.
    pub moves: usize,
}

/// Maximum line-search steps in [`default_init`].
pub const INIT_MOVES: usize = 20;

/// Centroid with the distance-sorted order; if that breaks an allowable
/// power, step a quarter of the way toward the device with the smallest
/// margin and retry.
pub fn default_init(s: &Scenario) -> InitPoint {
    let mut q = geometric_centroid(s);
    let mut moves = 0;
    loop {
        let alpha = alpha_from_order(&distance_order(q, s));
        let check = feasibility_check(q, &alpha, s).expect("distance order gives a binary matrix");
        if check.feasible || moves == INIT_MOVES {
            return InitPoint { q, alpha, check, moves };
        }
        let worst = (0..s.num_devices())
            .min_by(|&a, &b| check.margins[a].total_cmp(&check.margins[b]))
            .expect("at least one device");
        q = q + (s.position(worst) - q) * 0.25;
        moves += 1;
    }
}
