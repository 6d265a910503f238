use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{row_scale, ConvexProgram, Duals, KernelSolution, Status};
use crate::error::Result;

/// Newton direction blocks: primal, equality duals, slacks, inequality duals.
type Step = (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Residual tolerance on normalized data.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point in the program's variables. Need not be feasible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_point: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: 200, initial_point: None }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    AffineIneq(usize),
    QuadIneq(usize),
    Lower(usize),
    Upper(usize),
    AbsPos(usize),
    AbsNeg(usize),
    Floor,
}

/// `xᵀPx + aᵀx + b ≤ 0`, already multiplied through by `scale`.
#[derive(Debug, Clone)]
struct Row {
    p: Option<DMatrix<f64>>,
    a: DVector<f64>,
    b: f64,
    scale: f64,
    kind: RowKind,
}

impl Row {
    fn eval(&self, x: &DVector<f64>) -> f64 {
        let quad = self.p.as_ref().map_or(0.0, |p| x.dot(&(p * x)));
        quad + self.a.dot(x) + self.b
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.p {
            Some(p) => p * x * 2.0 + &self.a,
            None => self.a.clone(),
        }
    }
}

/// The program with abs atoms lifted to epigraph variables, bounds turned
/// into rows and every row normalized.
#[derive(Debug, Clone)]
struct Lifted {
    n_orig: usize,
    n: usize,
    c: DVector<f64>,
    p0: DMatrix<f64>,
    c0: f64,
    obj_scale: f64,
    rows: Vec<Row>,
    eq_a: DMatrix<f64>,
    eq_b: DVector<f64>,
    eq_scale: Vec<f64>,
    abs_weights: Vec<f64>,
}

pub(super) fn objective_scale(c: &DVector<f64>, p0: &DMatrix<f64>) -> f64 {
    let m = c.iter().chain(p0.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
    1.0 / m
}

fn embed(v: &[f64], n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    out.rows_mut(0, v.len()).copy_from(&DVector::from_column_slice(v));
    out
}

fn embed_matrix(p: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (p.nrows(), p.ncols())).copy_from(p);
    out
}

fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0f64, |m, v| m.max(v.abs()))
}

impl Lifted {
    fn new(prog: &ConvexProgram) -> Self {
        let n_orig = prog.num_vars;
        let n_abs = prog.objective.abs_terms.len();
        let n = n_orig + n_abs;
        let obj = &prog.objective;

        let mut c = embed(&obj.linear.dense(n_orig), n);
        let mut c0 = obj.linear.constant;
        let mut p0 = DMatrix::zeros(n, n);
        for q in &obj.quadratics {
            p0 += embed_matrix(&q.matrix(n_orig), n);
            c += embed(&q.affine.dense(n_orig), n);
            c0 += q.affine.constant;
        }
        for (i, t) in obj.abs_terms.iter().enumerate() {
            c[n_orig + i] += t.weight;
        }
        let obj_scale = objective_scale(&c, &p0);

        let mut rows = Vec::new();
        for (i, a) in prog.affine_ineq.iter().enumerate() {
            let av = embed(&a.dense(n_orig), n);
            let s = row_scale(max_abs(av.iter()));
            rows.push(Row { p: None, a: av * s, b: a.constant * s, scale: s, kind: RowKind::AffineIneq(i) });
        }
        for (i, q) in prog.quadratic_ineq.iter().enumerate() {
            let p = embed_matrix(&q.matrix(n_orig), n);
            let av = embed(&q.affine.dense(n_orig), n);
            let s = row_scale(max_abs(p.iter()).max(max_abs(av.iter())));
            rows.push(Row { p: Some(p * s), a: av * s, b: q.affine.constant * s, scale: s, kind: RowKind::QuadIneq(i) });
        }
        for (j, bnd) in prog.bounds.iter().enumerate() {
            if let Some(l) = bnd.lower.filter(|v| v.is_finite()) {
                let mut a = DVector::zeros(n);
                a[j] = -1.0;
                rows.push(Row { p: None, a, b: l, scale: 1.0, kind: RowKind::Lower(j) });
            }
            if let Some(u) = bnd.upper.filter(|v| v.is_finite()) {
                let mut a = DVector::zeros(n);
                a[j] = 1.0;
                rows.push(Row { p: None, a, b: -u, scale: 1.0, kind: RowKind::Upper(j) });
            }
        }
        for (i, t) in obj.abs_terms.iter().enumerate() {
            let arg = embed(&t.arg.dense(n_orig), n);
            let s = row_scale(max_abs(arg.iter()).max(1.0));
            let mut pos = arg.clone();
            pos[n_orig + i] = -1.0;
            let mut neg = -arg;
            neg[n_orig + i] = -1.0;
            rows.push(Row { p: None, a: pos * s, b: t.arg.constant * s, scale: s, kind: RowKind::AbsPos(i) });
            rows.push(Row { p: None, a: neg * s, b: -t.arg.constant * s, scale: s, kind: RowKind::AbsNeg(i) });
        }

        let me = prog.affine_eq.len();
        let mut eq_a = DMatrix::zeros(me, n);
        let mut eq_b = DVector::zeros(me);
        let mut eq_scale = Vec::with_capacity(me);
        for (r, a) in prog.affine_eq.iter().enumerate() {
            let av = a.dense(n_orig);
            let s = row_scale(max_abs(av.iter()));
            for (j, v) in av.iter().enumerate() {
                eq_a[(r, j)] = v * s;
            }
            eq_b[r] = -a.constant * s;
            eq_scale.push(s);
        }

        Lifted {
            n_orig,
            n,
            c,
            p0,
            c0,
            obj_scale,
            rows,
            eq_a,
            eq_b,
            eq_scale,
            abs_weights: obj.abs_terms.iter().map(|t| t.weight).collect(),
        }
    }

    /// Minimizes the largest row value: always strictly feasible to start.
    fn phase_one(&self) -> Lifted {
        let n = self.n + 1;
        let tau = self.n;
        let mut rows: Vec<Row> = self
            .rows
            .iter()
            .map(|r| {
                let mut a = embed(r.a.as_slice(), n);
                a[tau] = -1.0;
                Row { p: r.p.as_ref().map(|p| embed_matrix(p, n)), a, b: r.b, scale: r.scale, kind: r.kind }
            })
            .collect();
        let mut floor = DVector::zeros(n);
        floor[tau] = -1.0;
        rows.push(Row { p: None, a: floor, b: -1.0, scale: 1.0, kind: RowKind::Floor });
        let mut eq_a = DMatrix::zeros(self.eq_a.nrows(), n);
        eq_a.view_mut((0, 0), (self.eq_a.nrows(), self.n)).copy_from(&self.eq_a);
        let mut c = DVector::zeros(n);
        c[tau] = 1.0;
        Lifted {
            n_orig: self.n_orig,
            n,
            c,
            p0: DMatrix::zeros(n, n),
            c0: 0.0,
            obj_scale: 1.0,
            rows,
            eq_a,
            eq_b: self.eq_b.clone(),
            eq_scale: self.eq_scale.clone(),
            abs_weights: Vec::new(),
        }
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.obj_scale * (self.c.dot(x) + x.dot(&(&self.p0 * x)) + self.c0)
    }

    fn objective_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.c + &self.p0 * x * 2.0) * self.obj_scale
    }
}

struct Iterate {
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
    iterations: usize,
    converged: bool,
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(vi, di)| -vi / di)
        .fold(1.0f64, f64::min)
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    max_abs(v.iter())
}

/// Mehrotra predictor-corrector on the slack form
/// `f_i(x) + s_i = 0, s ≥ 0, Ax = b`.
fn interior_point(prob: &Lifted, x0: DVector<f64>, tol: f64, max_iter: usize) -> Iterate {
    let n = prob.n;
    let m = prob.rows.len();
    let me = prob.eq_a.nrows();
    let mut x = x0;
    let mut s = DVector::from_iterator(m, prob.rows.iter().map(|r| (-r.eval(&x)).max(1.0)));
    let mut z = DVector::from_element(m, 1.0);
    let mut y = DVector::zeros(me);
    let at = prob.eq_a.transpose();

    for it in 0..max_iter {
        let f = DVector::from_iterator(m, prob.rows.iter().map(|r| r.eval(&x)));
        let mut jac = DMatrix::zeros(m, n);
        for (i, r) in prob.rows.iter().enumerate() {
            jac.set_row(i, &r.grad(&x).transpose());
        }
        let g0 = prob.objective_grad(&x);
        let r_d = &g0 + jac.transpose() * &z + &at * &y;
        let r_p = &f + &s;
        let r_e = &prob.eq_a * &x - &prob.eq_b;
        let mu = if m > 0 { s.dot(&z) / m as f64 } else { 0.0 };

        let res_d = inf_norm(&r_d) / (1.0 + inf_norm(&g0));
        let res_p = inf_norm(&r_p).max(inf_norm(&r_e));
        let gap = s.dot(&z) / (1.0 + prob.objective(&x).abs());
        if res_d <= tol && res_p <= tol && gap <= tol {
            return Iterate { x, z, y, iterations: it, converged: true };
        }
        let finite = x.iter().chain(z.iter()).chain(s.iter()).all(|v| v.is_finite());
        if !finite || inf_norm(&z) > 1e14 || inf_norm(&x) > 1e14 {
            break;
        }

        let mut hess = &prob.p0 * (2.0 * prob.obj_scale);
        for (i, r) in prob.rows.iter().enumerate() {
            if let Some(p) = &r.p {
                hess += p * (2.0 * z[i]);
            }
        }
        // Augmented system [H Aᵀ Jᵀ; A 0 0; J 0 -S/Z] in (Δx, Δy, Δz): the
        // small S/Z block keeps it well conditioned as complementarity
        // vanishes.
        let dim = n + me + m;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&hess);
        kkt.view_mut((0, n), (n, me)).copy_from(&at);
        kkt.view_mut((n, 0), (me, n)).copy_from(&prob.eq_a);
        kkt.view_mut((0, n + me), (n, m)).copy_from(&jac.transpose());
        kkt.view_mut((n + me, 0), (m, n)).copy_from(&jac);
        for i in 0..m {
            kkt[(n + me + i, n + me + i)] = -s[i] / z[i];
        }
        let exact = kkt.clone();
        let reg = 1e-13 * (1.0 + hess.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())));
        for i in 0..n {
            kkt[(i, i)] += reg;
        }
        for i in n..dim {
            kkt[(i, i)] -= 1e-14;
        }
        let lu = kkt.lu();

        let newton = |r_c: &DVector<f64>| -> Option<Step> {
            let mut rhs = DVector::zeros(dim);
            rhs.rows_mut(0, n).copy_from(&(-&r_d));
            rhs.rows_mut(n, me).copy_from(&(-&r_e));
            rhs.rows_mut(n + me, m).copy_from(&(r_c.component_div(&z) - &r_p));
            let mut sol = lu.solve(&rhs)?;
            let resid = &rhs - &exact * &sol;
            sol += lu.solve(&resid)?;
            if sol.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let dx = sol.rows(0, n).into_owned();
            let dy = sol.rows(n, me).into_owned();
            let dz = sol.rows(n + me, m).into_owned();
            let ds = -&r_p - &jac * &dx;
            Some((dx, dy, ds, dz))
        };

        let sz = s.component_mul(&z);
        let Some((dx_a, dy_a, ds_a, dz_a)) = newton(&sz) else { break };
        let (dx, dy, ds, dz) = if m > 0 {
            let a_aff = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
            let mu_aff = (&s + &ds_a * a_aff).dot(&(&z + &dz_a * a_aff)) / m as f64;
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
            let r_c = &sz + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
            match newton(&r_c) {
                Some(step) => step,
                None => break,
            }
        } else {
            (dx_a, dy_a, ds_a, dz_a)
        };
        let alpha = if m > 0 { (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0) } else { 1.0 };
        x += &dx * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
        y += &dy * alpha;
        // Keep the slacks strictly interior after round-off.
        for v in s.iter_mut().chain(z.iter_mut()) {
            *v = v.max(1e-300);
        }
    }
    Iterate { x, z, y, iterations: max_iter, converged: false }
}

fn default_start(prog: &ConvexProgram) -> Vec<f64> {
    prog.bounds
        .iter()
        .map(|b| match (b.lower.filter(|v| v.is_finite()), b.upper.filter(|v| v.is_finite())) {
            (Some(l), Some(u)) => 0.5 * (l + u),
            (Some(l), None) => l + 1.0,
            (None, Some(u)) => u - 1.0,
            (None, None) => 0.0,
        })
        .collect()
}

/// Solves `prog` to the residual tolerance in `opts`.
///
/// Returns `Err` only for malformed programs; infeasibility and iteration
/// limits are reported through [`KernelSolution::status`].
pub fn solve(prog: &ConvexProgram, opts: &SolveOptions) -> Result<KernelSolution> {
    prog.validate()?;
    let lifted = Lifted::new(prog);
    let start = match &opts.initial_point {
        Some(p) if p.len() == prog.num_vars => p.clone(),
        _ => default_start(prog),
    };
    let mut x0 = embed(&start, lifted.n);
    for (i, t) in prog.objective.abs_terms.iter().enumerate() {
        x0[lifted.n_orig + i] = t.arg.eval(&start).abs() + 1.0;
    }

    let it = interior_point(&lifted, x0.clone(), opts.tol, opts.max_iter);
    if it.converged {
        return Ok(finish(prog, &lifted, &it, Status::Optimal));
    }

    // Classify the failure: if even the largest row cannot be pushed below
    // zero, the program is infeasible.
    let p1 = lifted.phase_one();
    let mut x1 = embed(x0.as_slice(), p1.n);
    let worst = lifted.rows.iter().map(|r| r.eval(&x0)).fold(0.0f64, f64::max);
    x1[lifted.n] = worst + 1.0;
    let feas = interior_point(&p1, x1, opts.tol, opts.max_iter);
    let tau = feas.x[lifted.n];
    let status = if feas.converged && tau > (10.0 * opts.tol).max(1e-9) {
        Status::Infeasible
    } else {
        Status::MaxIter
    };
    let shown = if status == Status::Infeasible {
        Iterate { x: feas.x.rows(0, lifted.n).into_owned(), ..feas }
    } else {
        it
    };
    Ok(finish(prog, &lifted, &shown, status))
}

fn finish(prog: &ConvexProgram, lifted: &Lifted, it: &Iterate, status: Status) -> KernelSolution {
    let x: Vec<f64> = it.x.rows(0, lifted.n_orig).iter().copied().collect();
    let mut duals = Duals {
        affine_ineq: vec![0.0; prog.affine_ineq.len()],
        quadratic_ineq: vec![0.0; prog.quadratic_ineq.len()],
        affine_eq: Vec::new(),
        lower: vec![0.0; prog.num_vars],
        upper: vec![0.0; prog.num_vars],
        abs_signs: vec![0.0; prog.objective.abs_terms.len()],
    };
    if status == Status::Optimal {
        let os = lifted.obj_scale;
        let mut pos = vec![0.0; lifted.abs_weights.len()];
        let mut neg = vec![0.0; lifted.abs_weights.len()];
        for (r, &zi) in lifted.rows.iter().zip(it.z.iter()) {
            let z = zi * r.scale / os;
            match r.kind {
                RowKind::AffineIneq(i) => duals.affine_ineq[i] = z,
                RowKind::QuadIneq(i) => duals.quadratic_ineq[i] = z,
                RowKind::Lower(j) => duals.lower[j] = z,
                RowKind::Upper(j) => duals.upper[j] = z,
                RowKind::AbsPos(i) => pos[i] = z,
                RowKind::AbsNeg(i) => neg[i] = z,
                RowKind::Floor => {}
            }
        }
        for (i, &w) in lifted.abs_weights.iter().enumerate() {
            duals.abs_signs[i] = if w > 0.0 { (pos[i] - neg[i]) / w } else { 0.0 };
        }
        duals.affine_eq = it.y.iter().zip(&lifted.eq_scale).map(|(y, s)| y * s / os).collect();
    }
    KernelSolution {
        objective: prog.objective.eval(&x),
        max_violation: prog.max_violation(&x),
        x,
        status,
        iterations: it.iterations,
        duals,
    }
}
