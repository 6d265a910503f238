use serde::{Deserialize, Serialize};

use super::{row_scale, ConvexProgram, KernelSolution, Status};
use crate::error::{Error, Result};

/// Normalized first-order residuals at a returned point. All four use the
/// same row and objective scaling as the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub complementarity: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
    pub tol: f64,
    pub passed: bool,
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn objective_scale(prog: &ConvexProgram) -> f64 {
    let n = prog.num_vars;
    let obj = &prog.objective;
    let mut lin = obj.linear.dense(n);
    let mut pmax: f64 = 0.0;
    for q in &obj.quadratics {
        for (l, a) in lin.iter_mut().zip(q.affine.dense(n)) {
            *l += a;
        }
        let p = q.matrix(n);
        pmax = pmax.max(p.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let wmax = obj.abs_terms.iter().fold(0.0f64, |m, t| m.max(t.weight));
    1.0 / inf(&lin).max(pmax).max(wmax).max(1.0)
}

/// Checks a solution's multipliers against the program. Passes when every
/// residual is at most `10 · tol`.
pub fn verify_kkt(prog: &ConvexProgram, sol: &KernelSolution, tol: f64) -> Result<KktReport> {
    if sol.status != Status::Optimal {
        return Err(Error::Kernel(format!("no multipliers to check for status {:?}", sol.status)));
    }
    let n = prog.num_vars;
    let d = &sol.duals;
    if sol.x.len() != n
        || d.affine_ineq.len() != prog.affine_ineq.len()
        || d.quadratic_ineq.len() != prog.quadratic_ineq.len()
        || d.affine_eq.len() != prog.affine_eq.len()
        || d.abs_signs.len() != prog.objective.abs_terms.len()
    {
        return Err(Error::Kernel("solution does not match program shape".into()));
    }
    let x = &sol.x;
    let os = objective_scale(prog);

    let mut grad = prog.objective.smooth_gradient(x);
    let mut scale = inf(&grad);
    let add = |grad: &mut Vec<f64>, g: Vec<f64>, w: f64| {
        for (gi, v) in grad.iter_mut().zip(g) {
            *gi += w * v;
        }
    };
    for (t, &sgn) in prog.objective.abs_terms.iter().zip(&d.abs_signs) {
        scale = scale.max(t.weight);
        add(&mut grad, t.arg.dense(n), t.weight * sgn);
    }
    for (a, &z) in prog.affine_ineq.iter().zip(&d.affine_ineq) {
        add(&mut grad, a.dense(n), z);
    }
    for (q, &z) in prog.quadratic_ineq.iter().zip(&d.quadratic_ineq) {
        add(&mut grad, q.gradient(x), z);
    }
    for (a, &y) in prog.affine_eq.iter().zip(&d.affine_eq) {
        add(&mut grad, a.dense(n), y);
    }
    for (j, g) in grad.iter_mut().enumerate().take(n) {
        *g += d.upper.get(j).copied().unwrap_or(0.0) - d.lower.get(j).copied().unwrap_or(0.0);
    }
    let stationarity = os * inf(&grad) / (1.0 + os * scale);

    let mut comp: f64 = 0.0;
    let mut dual_neg: f64 = 0.0;
    for (a, &z) in prog.affine_ineq.iter().zip(&d.affine_ineq) {
        let g = a.eval(x);
        comp = comp.max((z * g).abs());
        dual_neg = dual_neg.max(-z * os / row_scale(inf(&a.dense(n))));
    }
    for (q, &z) in prog.quadratic_ineq.iter().zip(&d.quadratic_ineq) {
        comp = comp.max((z * q.eval(x)).abs());
        let p = q.matrix(n);
        let m = p.iter().fold(inf(&q.affine.dense(n)), |m, v| m.max(v.abs()));
        dual_neg = dual_neg.max(-z * os / row_scale(m));
    }
    for (j, b) in prog.bounds.iter().enumerate() {
        let zl = d.lower.get(j).copied().unwrap_or(0.0);
        let zu = d.upper.get(j).copied().unwrap_or(0.0);
        if let Some(l) = b.lower {
            comp = comp.max((zl * (l - x[j])).abs());
        }
        if let Some(u) = b.upper {
            comp = comp.max((zu * (x[j] - u)).abs());
        }
        dual_neg = dual_neg.max(-zl * os).max(-zu * os);
    }
    for (t, &sgn) in prog.objective.abs_terms.iter().zip(&d.abs_signs) {
        let v = t.arg.eval(x);
        comp = comp.max(t.weight * (sgn * v - v.abs()).abs());
        dual_neg = dual_neg.max(sgn.abs() - 1.0);
    }
    let complementarity = os * comp / (1.0 + os * prog.objective.eval(x).abs());
    let primal_feasibility = prog.max_violation(x);
    let dual_feasibility = dual_neg.max(0.0);
    let limit = 10.0 * tol;
    Ok(KktReport {
        stationarity,
        complementarity,
        primal_feasibility,
        dual_feasibility,
        tol,
        passed: stationarity <= limit
            && complementarity <= limit
            && primal_feasibility <= limit
            && dual_feasibility <= limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{solve, AbsTerm, Affine, Bound, Quadratic, SolveOptions};

    fn sample() -> ConvexProgram {
        let mut p = ConvexProgram::new(3);
        p.objective.linear = Affine::var(2).scaled(2.0);
        p.objective.quadratics.push(Quadratic::squared_distance(&[0, 1], &[4.0, -2.0], 0.5));
        p.objective.abs_terms.push(AbsTerm { arg: Affine::var(0).term(1, 1.0).plus(-1.0), weight: 0.7 });
        p.quadratic_ineq.push(Quadratic::squared_distance(&[0, 1], &[0.0, 0.0], 1.0).plus_affine(&Affine::constant(-4.0)));
        p.affine_ineq.push(Affine::var(0).term(2, -1.0));
        p.affine_eq.push(Affine::var(1).term(2, 1.0));
        p.bounds[2] = Bound::interval(-5.0, 5.0);
        p
    }

    #[test]
    fn optimal_solutions_pass() {
        let p = sample();
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let rep = verify_kkt(&p, &sol, 1e-8).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn perturbed_point_fails() {
        let p = sample();
        let mut sol = solve(&p, &SolveOptions::default()).unwrap();
        sol.x[0] += 1e-3;
        let rep = verify_kkt(&p, &sol, 1e-8).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn wrong_multiplier_sign_fails() {
        let p = sample();
        let mut sol = solve(&p, &SolveOptions::default()).unwrap();
        sol.duals.quadratic_ineq[0] = -1.0;
        assert!(!verify_kkt(&p, &sol, 1e-8).unwrap().passed);
    }

    #[test]
    fn refuses_non_optimal() {
        let p = sample();
        let mut sol = solve(&p, &SolveOptions::default()).unwrap();
        sol.status = Status::MaxIter;
        assert!(verify_kkt(&p, &sol, 1e-8).is_err());
    }
}
