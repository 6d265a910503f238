//! Globally optimal placement for a fixed decoding order, and exhaustive
//! search over orders.
//!
//! For a fixed order the minimum powers are closed-form in the UAV position,
//! which leaves a convex location problem. It is solved through its
//! Lagrange dual: the dual function has a closed-form inner minimizer, and
//! the multipliers are found with a constrained ellipsoid method. The
//! normalization `Σ λ_m E_m = 1` is kept exactly by running the ellipsoid
//! inside that hyperplane; sign constraints become feasibility cuts.

mod dual;
mod ellipsoid;
mod power;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, SolveOptions, Status};
use crate::model::{DecodingOrder, PlacementSolution, Point, Scenario};
use crate::par::{self, Execution};

pub use dual::{dual_location, dual_subgradients, dual_value, DualIterate, LocationProblem, Subgradients};
pub use ellipsoid::{Cut, Ellipsoid};
pub use power::{closed_form_power, coeff_c, received_powers, PowerCoefficients};

/// Relative difference in `ζ` below which two orders count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactOptions {
    /// Relative duality gap at which the ellipsoid method stops.
    pub tol: f64,
    /// Stop once every multiplier is pinned to this normalized half-width.
    pub radius_tol: f64,
    pub max_iter: usize,
    /// Initial ellipsoid radius in normalized multiplier units.
    pub initial_radius: f64,
    /// Largest `K` accepted by [`solve_optimal`].
    pub max_devices: usize,
    pub execution: Execution,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            tol: 1e-9,
            radius_tol: 1e-12,
            max_iter: 100_000,
            initial_radius: 1e3,
            max_devices: 8,
            execution: Execution::default(),
        }
    }
}

impl ExactOptions {
    pub fn with_tol(tol: f64) -> Self {
        ExactOptions { tol, ..Default::default() }
    }
}

/// Final multipliers and bounds of a dual solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub multipliers: DualIterate,
    /// Best dual value, a lower bound on the order's optimal `ζ`.
    pub dual_value: f64,
    /// `ζ` of the returned primal point.
    pub primal_zeta: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub iterations: usize,
}

/// State passed to the observer after every ellipsoid step.
#[derive(Debug)]
pub struct DualStep<'a> {
    pub iteration: usize,
    pub center: &'a DualIterate,
    pub ellipsoid: &'a Ellipsoid,
    /// Dual value at the center, if it was sign-feasible.
    pub dual_value: Option<f64>,
    pub best_dual: f64,
    pub best_primal: f64,
}

/// Affine map from ellipsoid coordinates `y` to multipliers
/// `x = D (u0 + B y)`. `D` rescales each multiplier to order one and the
/// columns of `B` span the normalization hyperplane.
struct DualFrame {
    scale: DVector<f64>,
    u0: DVector<f64>,
    basis: DMatrix<f64>,
}

impl DualFrame {
    fn new(p: &LocationProblem) -> Self {
        let k = p.num_devices();
        let n = p.dual_dim();
        let ratio: Vec<f64> = (0..k).map(|m| p.c[m] / p.energy[m]).collect();
        let mut scale = DVector::zeros(n);
        for m in 0..k {
            scale[m] = 1.0 / p.energy[m];
            scale[k + m] = ratio[m];
        }
        for m in 0..k - 1 {
            scale[2 * k + m] = 0.5 * (ratio[m] + ratio[m + 1]);
        }
        let mut u0 = DVector::zeros(n);
        for m in 0..k {
            u0[m] = 1.0 / k as f64;
        }
        // Helmert basis of {u : Σ u_λ = 0} on the λ block, identity elsewhere.
        let mut basis = DMatrix::zeros(n, n - 1);
        for j in 1..k {
            let norm = ((j * (j + 1)) as f64).sqrt();
            for i in 0..j {
                basis[(i, j - 1)] = 1.0 / norm;
            }
            basis[(j, j - 1)] = -(j as f64) / norm;
        }
        for i in k..n {
            basis[(i, i - 1)] = 1.0;
        }
        DualFrame { scale, u0, basis }
    }

    fn normalized(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.u0 + &self.basis * y
    }

    fn dual(&self, k: usize, u: &DVector<f64>) -> DualIterate {
        let x = u.component_mul(&self.scale);
        DualIterate::from_slice(k, x.as_slice())
    }

    fn pull_back(&self, g: &[f64]) -> DVector<f64> {
        let gx = DVector::from_column_slice(g).component_mul(&self.scale);
        self.basis.transpose() * gx
    }
}

fn precheck(p: &LocationProblem) -> Result<Point> {
    for m in 0..p.num_devices() {
        if p.c[m] * p.h2 > p.cap[m] {
            return Err(Error::Infeasible(format!(
                "order {:?}: device {} needs {:.6e} W directly below the UAV but may use {:.6e} W",
                p.order.as_slice(),
                p.order.device(m),
                p.c[m] * p.h2,
                p.cap[m]
            )));
        }
    }
    let sol = kernel::solve(&p.feasibility_program(), &SolveOptions::default())?;
    match sol.status {
        Status::Optimal => Ok(Point::new(sol.x[0], sol.x[1]) * dual::LENGTH_UNIT),
        Status::Infeasible => Err(Error::Infeasible(format!(
            "order {:?}: power caps and ordering rows have no common point",
            p.order.as_slice()
        ))),
        Status::MaxIter => Err(Error::Kernel(format!(
            "feasibility check for order {:?} did not converge",
            p.order.as_slice()
        ))),
    }
}

fn project(p: &LocationProblem, target: Point) -> Option<Point> {
    let sol = kernel::solve(&p.projection_program(target), &SolveOptions::default()).ok()?;
    (sol.status == Status::Optimal).then(|| Point::new(sol.x[0], sol.x[1]) * dual::LENGTH_UNIT)
}

/// Optimal placement and powers for a fixed decoding order.
pub fn solve_fixed_order(order: &DecodingOrder, s: &Scenario, opts: &ExactOptions) -> Result<PlacementSolution> {
    solve_fixed_order_observed(order, s, opts, |_| {})
}

/// [`solve_fixed_order`] with a callback after every ellipsoid step.
pub fn solve_fixed_order_observed<F>(
    order: &DecodingOrder,
    s: &Scenario,
    opts: &ExactOptions,
    mut observer: F,
) -> Result<PlacementSolution>
where
    F: FnMut(&DualStep),
{
    if order.len() != s.num_devices() {
        return Err(Error::InvalidOrder(format!(
            "order has {} entries for {} devices",
            order.len(),
            s.num_devices()
        )));
    }
    let p = LocationProblem::new(order, s);
    let k = p.num_devices();
    let start = precheck(&p)?;

    let frame = DualFrame::new(&p);
    let mut ell = Ellipsoid::ball(DVector::zeros(p.dual_dim() - 1), opts.initial_radius);
    let mut best_q = start;
    let mut best_primal = p.zeta_at(start);
    let mut best_dual = f64::NEG_INFINITY;
    let mut best_multipliers = DualIterate::initial(&p);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let u = frame.normalized(&ell.center);
        let center = frame.dual(k, &u);
        let (i_min, u_min) = u.argmin();
        let mut value = None;
        let outcome = if u_min < 0.0 {
            let mut e = vec![0.0; p.dual_dim()];
            e[i_min] = -1.0 / frame.scale[i_min];
            ell.cut(&frame.pull_back(&e), -u_min)
        } else {
            let (q, g) = p.dual_value(&center)?;
            value = Some(g);
            if g > best_dual {
                best_dual = g;
                best_multipliers = center.clone();
            }
            if p.accepts(q) {
                let z = p.zeta_at(q);
                if z < best_primal {
                    best_primal = z;
                    best_q = q;
                }
            }
            let eta = p.subgradients(q, &center).eta0;
            ell.cut(&frame.pull_back(&eta), best_dual - g)
        };
        observer(&DualStep {
            iteration: iterations,
            center: &center,
            ellipsoid: &ell,
            dual_value: value,
            best_dual,
            best_primal,
        });
        let rel_gap = (best_primal - best_dual) / best_primal.abs();
        if rel_gap <= opts.tol || outcome != Cut::Applied || ell.max_half_width() < opts.radius_tol {
            converged = true;
            break;
        }
    }

    // The dual location at the best multipliers sits on the optimum up to
    // the dual accuracy; a projection removes any residual infeasibility.
    if let Ok(q) = p.dual_location(&best_multipliers) {
        for cand in [Some(q), project(&p, q)].into_iter().flatten() {
            if p.accepts(cand) && p.zeta_at(cand) < best_primal {
                best_primal = p.zeta_at(cand);
                best_q = cand;
            }
        }
    }
    let gap = best_primal - best_dual;
    let relative_gap = gap / best_primal.abs();
    if !converged && relative_gap > opts.tol {
        return Err(Error::NonConvergence { iterations, gap: relative_gap, last: Box::new(best_multipliers) });
    }

    let powers = closed_form_power(best_q, order, s);
    let mut sol = PlacementSolution::noma(best_q, powers, order.clone(), s);
    if relative_gap > opts.tol {
        sol.flags.push(format!("dual gap {relative_gap:.3e} above tolerance"));
    }
    sol.certificate = Some(DualCertificate {
        multipliers: best_multipliers,
        dual_value: best_dual,
        primal_zeta: best_primal,
        gap,
        relative_gap,
        iterations,
    });
    Ok(sol)
}

/// Result of one order in the exhaustive search.
#[derive(Debug)]
pub struct OrderOutcome {
    pub order: DecodingOrder,
    pub result: Result<PlacementSolution>,
}

/// Solves every decoding order, in lexicographic order.
pub fn solve_all_orders(s: &Scenario, opts: &ExactOptions) -> Result<Vec<OrderOutcome>> {
    let k = s.num_devices();
    if k > opts.max_devices {
        return Err(Error::TooManyDevices { k, cap: opts.max_devices });
    }
    let orders: Vec<DecodingOrder> = (0..k)
        .permutations(k)
        .map(|p| DecodingOrder::new(p).expect("permutation"))
        .collect();
    let results = par::map(opts.execution, &orders, |o| solve_fixed_order(o, s, opts));
    Ok(orders.into_iter().zip(results).map(|(order, result)| OrderOutcome { order, result }).collect())
}

/// Globally optimal placement over all `K!` orders. Among orders within
/// [`TIE_TOL`] of the best `ζ`, the lexicographically smallest wins.
pub fn solve_optimal(s: &Scenario, opts: &ExactOptions) -> Result<PlacementSolution> {
    let outcomes = solve_all_orders(s, opts)?;
    let best = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok())
        .map(|sol| sol.zeta)
        .fold(f64::INFINITY, f64::min);
    if best.is_finite() {
        let limit = best + TIE_TOL * best.abs();
        let pick = outcomes
            .into_iter()
            .find_map(|o| o.result.ok().filter(|sol| sol.zeta <= limit))
            .expect("an order attains the minimum");
        return Ok(pick);
    }
    let mut infeasible = 0;
    let mut other = Vec::new();
    for o in &outcomes {
        match &o.result {
            Err(Error::Infeasible(_)) => infeasible += 1,
            Err(e) => other.push(format!("{:?}: {e}", o.order.as_slice())),
            Ok(_) => {}
        }
    }
    if let Some(first) = other.first() {
        return Err(Error::Infeasible(format!(
            "{infeasible} of {} orders infeasible, {} failed (first: {first})",
            outcomes.len(),
            other.len()
        )));
    }
    Err(Error::Infeasible(format!("all {} decoding orders are infeasible", outcomes.len())))
}
