//! Low-complexity joint design through a binary decode-before matrix.
//!
//! The decoding order is encoded as a matrix `α` with `α_kj = 1` when device
//! `k` is decoded before `j`. Each device's decode position is then
//! `K - 1 - Σ_j α_kj`, so the closed-form powers depend on `α` only through
//! those positions. Binary-ness and agreement with the geometry become
//! penalties; their non-convex parts are replaced by convex upper bounds
//! around the current point and the resulting subproblems are solved with
//! the convex kernel, alternating with updates of the decode positions.

mod penalty;
mod sic;
mod subproblem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{closed_form_power, coeff_c};
use crate::kernel::{self, SolveOptions, Status};
use crate::model::{distance_order, DecodingOrder, PlacementSolution, Point, Scenario};

pub use penalty::{
    majorize_bilinear, majorize_phi, smooth_penalties, theta, PenaltySchedule, PenaltyState, PhiMajorizer,
};
pub use sic::{alpha_from_order, decode_positions, order_from_alpha, DecodePositionMap, SicMatrix, BINARY_TOL};
pub use subproblem::{
    build_subproblem, default_init, feasibility_check, zeta_scale, FeasibilityCheck, InitPoint, Layout, INIT_MOVES,
    LENGTH_UNIT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaOptions {
    pub schedule: PenaltySchedule,
    /// Keep `ρ1`, `ρ2` at their initial values.
    pub freeze_penalties: bool,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Outer loop stops once the fractional decrease of `ζ` drops below this.
    pub tol: f64,
    /// Inner loop stops once the relative change of `ζ` drops below this
    /// and both penalties are below `penalty_tol`.
    pub inner_tol: f64,
    pub penalty_tol: f64,
    pub phi_form: PhiMajorizer,
    pub kernel: SolveOptions,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            schedule: PenaltySchedule::default(),
            freeze_penalties: false,
            max_inner: 50,
            max_outer: 30,
            tol: 1e-4,
            inner_tol: 1e-7,
            penalty_tol: 1e-4,
            phi_form: PhiMajorizer::Tangent,
            kernel: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Inner,
    Outer,
    Final,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Inner => "inner",
            Stage::Outer => "outer",
            Stage::Final => "final",
        }
    }
}

/// One convergence record. `phi_g` uses `θ` in `(100 m)²`; `objective` is
/// the penalized objective `ζ̂ + ρ1 φ + ρ2 φ_g` at the current weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: Stage,
    pub outer: usize,
    pub inner: usize,
    /// `ζ` with powers at the current decode positions (1/s).
    pub zeta: f64,
    pub objective: f64,
    pub phi: f64,
    pub phi_g: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub q: Point,
    /// Lifetime of the verified allocation at `q` (distance-sorted order,
    /// closed-form powers), if feasible.
    pub lifetime_s: Option<f64>,
    /// Best verified lifetime so far.
    pub best_lifetime_s: f64,
}

#[derive(Debug, Clone)]
pub struct ScaRun {
    pub solution: PlacementSolution,
    pub trace: Vec<TraceRow>,
    pub outer_iterations: usize,
    pub converged: bool,
}

fn zeta_at_positions(q: Point, f: &DecodePositionMap, s: &Scenario) -> f64 {
    let k = s.num_devices();
    let h2 = s.altitude() * s.altitude();
    (0..k)
        .map(|i| {
            let p = coeff_c(f.position(i), k, s.qos_rate(), s.ref_snr()) * (h2 + q.dist2(s.position(i)));
            (p + s.circuit_power()) / s.energies()[i]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn positions_of(order: &DecodingOrder) -> DecodePositionMap {
    DecodePositionMap { f: order.positions() }
}

/// Allocation at `q` with the order the geometry forces there.
fn verified_at(q: Point, s: &Scenario) -> PlacementSolution {
    let order = distance_order(q, s);
    PlacementSolution::noma(q, closed_form_power(q, &order, s), order, s)
}

struct Best {
    sol: Option<PlacementSolution>,
}

impl Best {
    fn offer(&mut self, cand: PlacementSolution) -> Option<f64> {
        if !cand.report.feasible {
            return None;
        }
        let life = cand.lifetime;
        if self.sol.as_ref().is_none_or(|b| cand.zeta < b.zeta) {
            self.sol = Some(cand);
        }
        Some(life)
    }

    fn lifetime(&self) -> f64 {
        self.sol.as_ref().map_or(0.0, |b| b.lifetime)
    }
}

/// Positions from a relaxed `α`: rounded at one half, or the distance order
/// at `q` when the rounded matrix is not a valid order.
fn positions_from(alpha: &SicMatrix, q: Point, s: &Scenario) -> (DecodePositionMap, bool) {
    match decode_positions(&alpha.rounded()) {
        Ok(f) => (f, false),
        Err(_) => (positions_of(&distance_order(q, s)), true),
    }
}

pub fn sca_solve(s: &Scenario, init: &InitPoint, opts: &ScaOptions) -> Result<PlacementSolution> {
    sca_solve_traced(s, init, opts).map(|r| r.solution)
}

/// [`sca_solve`] from [`default_init`].
pub fn sca_solve_default(s: &Scenario, opts: &ScaOptions) -> Result<PlacementSolution> {
    sca_solve(s, &default_init(s), opts)
}

pub fn sca_solve_traced(s: &Scenario, init: &InitPoint, opts: &ScaOptions) -> Result<ScaRun> {
    let check = feasibility_check(init.q, &init.alpha, s)?;
    if !check.feasible {
        return Err(Error::Infeasible(format!(
            "initial point violates an allowable power (margins {:?})",
            check.margins
        )));
    }
    let k = s.num_devices();
    let lay = Layout { k };
    let scale = zeta_scale(s);
    let mut penalties = if opts.freeze_penalties {
        PenaltyState::frozen(opts.schedule.rho1_init, opts.schedule.rho2_init)
    } else {
        PenaltyState::new(opts.schedule.clone())
    };
    let mut flags = Vec::new();
    let mut trace = Vec::new();
    let mut best = Best { sol: None };
    best.offer(verified_at(init.q, s));

    let mut q_bar = init.q;
    let mut alpha_bar = init.alpha.clone();
    let mut f = decode_positions(&init.alpha)?;
    let mut prev_outer: Option<f64> = None;
    let mut converged = false;
    let mut outer_done = 0;
    let mut stalled = false;

    for outer in 1..=opts.max_outer {
        if outer > 1 {
            penalties.reset();
        }
        let mut prev_zeta: Option<f64> = None;
        let mut inner_done = 0;
        for inner in 1..=opts.max_inner {
            inner_done = inner;
            let prog = build_subproblem(q_bar, &alpha_bar, &f, &penalties, s, opts.phi_form);
            let mut start = vec![0.0; lay.num_vars()];
            start[Layout::ZETA] = zeta_at_positions(q_bar, &f, s) * scale * 1.01;
            start[Layout::QX] = q_bar.x / LENGTH_UNIT;
            start[Layout::QY] = q_bar.y / LENGTH_UNIT;
            for i in 0..k {
                for j in 0..k {
                    start[lay.alpha(i, j)] = if i == j { 0.0 } else { 0.05 + 0.9 * alpha_bar.get(i, j) };
                }
            }
            let kopts = SolveOptions { initial_point: Some(start), ..opts.kernel.clone() };
            let sol = kernel::solve(&prog, &kopts)?;
            if sol.status != Status::Optimal {
                if outer == 1 && inner == 1 {
                    return Err(Error::Infeasible(format!("first subproblem ended with status {:?}", sol.status)));
                }
                flags.push(format!("subproblem {:?} at outer {outer}, inner {inner}; kept best iterate", sol.status));
                stalled = true;
                break;
            }
            let q = lay.point(&sol.x);
            let alpha = lay.sic(&sol.x);
            let zeta = zeta_at_positions(q, &f, s);
            let (phi, phi_g) = penalty::penalties_scaled(q, &alpha, s, LENGTH_UNIT);
            let objective = zeta * scale + penalties.rho1 * phi + penalties.rho2 * phi_g;
            let life = best.offer(verified_at(q, s));
            trace.push(TraceRow {
                stage: Stage::Inner,
                outer,
                inner,
                zeta,
                objective,
                phi,
                phi_g,
                rho1: penalties.rho1,
                rho2: penalties.rho2,
                q,
                lifetime_s: life,
                best_lifetime_s: best.lifetime(),
            });
            q_bar = q;
            alpha_bar = alpha;
            let settled = prev_zeta.is_some_and(|p| (p - zeta).abs() <= opts.inner_tol * zeta);
            prev_zeta = Some(zeta);
            if settled && phi < opts.penalty_tol && phi_g < opts.penalty_tol {
                break;
            }
            penalties.grow();
        }
        outer_done = outer;
        let zeta = zeta_at_positions(q_bar, &f, s);
        let (phi, phi_g) = penalty::penalties_scaled(q_bar, &alpha_bar, s, LENGTH_UNIT);
        let life = best.offer(verified_at(q_bar, s));
        trace.push(TraceRow {
            stage: Stage::Outer,
            outer,
            inner: inner_done,
            zeta,
            objective: zeta * scale + penalties.rho1 * phi + penalties.rho2 * phi_g,
            phi,
            phi_g,
            rho1: penalties.rho1,
            rho2: penalties.rho2,
            q: q_bar,
            lifetime_s: life,
            best_lifetime_s: best.lifetime(),
        });
        if stalled {
            break;
        }
        let (next_f, fallback) = positions_from(&alpha_bar, q_bar, s);
        if fallback {
            flags.push(format!("outer {outer}: relaxed order was inconsistent; used distance order"));
        }
        let decrease = prev_outer.map(|p| (p - zeta) / p);
        prev_outer = Some(zeta);
        if next_f == f && decrease.is_some_and(|d| d < opts.tol) {
            converged = true;
            break;
        }
        f = next_f;
    }

    // Round the final matrix and re-derive the order; fall back to the
    // distance order at the final location if rounding is inconsistent.
    let rounded = alpha_bar.rounded();
    let final_sol = match order_from_alpha(&rounded) {
        Ok(order) => {
            let cand = PlacementSolution::noma(q_bar, closed_form_power(q_bar, &order, s), order, s);
            if cand.report.ordering_ok {
                cand
            } else {
                flags.push("rounded order inconsistent with distances; used distance order".into());
                verified_at(q_bar, s)
            }
        }
        Err(_) => {
            flags.push("rounded matrix is not an order; used distance order".into());
            verified_at(q_bar, s)
        }
    };
    let (phi, phi_g) = penalty::penalties_scaled(q_bar, &rounded, s, LENGTH_UNIT);
    let final_life = best.offer(final_sol.clone());
    let mut solution = match best.sol {
        Some(b) => b,
        None => {
            let mut sol = final_sol;
            sol.flags.push("no feasible iterate found".into());
            sol
        }
    };
    if solution.q != q_bar {
        flags.push("returned an earlier iterate with a longer verified lifetime".into());
    }
    trace.push(TraceRow {
        stage: Stage::Final,
        outer: outer_done,
        inner: 0,
        zeta: solution.zeta,
        objective: solution.zeta * scale,
        phi,
        phi_g,
        rho1: penalties.rho1,
        rho2: penalties.rho2,
        q: solution.q,
        lifetime_s: final_life,
        best_lifetime_s: solution.lifetime,
    });
    solution.flags.extend(flags);
    Ok(ScaRun { solution, trace, outer_iterations: outer_done, converged })
}
