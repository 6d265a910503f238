//! A small convex-program solver for the location subproblems.
//!
//! Programs are built from three kinds of atoms over `n` real variables:
//! affine expressions, convex quadratics `xᵀPx + aᵀx + c` with `P ⪰ 0`, and
//! weighted absolute values of affine expressions. Objectives may mix all
//! three; constraints are affine or convex-quadratic inequalities, affine
//! equalities and per-variable bounds.
//!
//! [`solve`] is a dense primal-dual interior-point method, sized for the few
//! dozen variables the lifetime problems need. [`verify_kkt`] re-checks a
//! returned point independently of the solver path, and [`grid_oracle`] is a
//! derivative-free 2-D search used as an independent cross-check.

mod grid;
mod ipm;
mod kkt;

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{grid_oracle, GridBounds, GridResult};
pub use ipm::{solve, SolveOptions};
pub use kkt::{verify_kkt, KktReport};

/// Eigenvalue tolerance for the PSD check, relative to the largest entry.
pub const PSD_TOL: f64 = 1e-10;

/// `Σ c_i x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Affine { terms: Vec::new(), constant: c }
    }

    pub fn var(i: usize) -> Self {
        Affine { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn term(mut self, i: usize, c: f64) -> Self {
        self.terms.push((i, c));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn added(mut self, other: &Affine) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    /// Dense coefficient vector of length `n`.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &(i, c) in &self.terms {
            v[i] += c;
        }
        v
    }

    fn max_coeff(&self, n: usize) -> f64 {
        self.dense(n).iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// `Σ c_ij x_i x_j + affine(x)`. Entries may repeat; the quadratic form uses
/// the symmetric part.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub quad: Vec<(usize, usize, f64)>,
    pub affine: Affine,
}

impl Quadratic {
    /// `scale · (a(x))²`.
    pub fn square_of(a: &Affine, scale: f64) -> Self {
        let mut quad = Vec::with_capacity(a.terms.len() * a.terms.len());
        for &(i, ci) in &a.terms {
            for &(j, cj) in &a.terms {
                quad.push((i, j, scale * ci * cj));
            }
        }
        let affine = Affine {
            terms: a.terms.iter().map(|&(i, c)| (i, 2.0 * scale * a.constant * c)).collect(),
            constant: scale * a.constant * a.constant,
        };
        Quadratic { quad, affine }
    }

    /// `scale · Σ_i (x_{idx_i} - center_i)² + affine`.
    pub fn squared_distance(idx: &[usize], center: &[f64], scale: f64) -> Self {
        let mut q = Quadratic::default();
        for (&i, &c) in idx.iter().zip(center) {
            q.quad.push((i, i, scale));
            q.affine.terms.push((i, -2.0 * scale * c));
            q.affine.constant += scale * c * c;
        }
        q
    }

    pub fn plus_affine(mut self, a: &Affine) -> Self {
        self.affine = self.affine.added(a);
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.quad.iter().map(|&(i, j, c)| c * x[i] * x[j]).sum::<f64>() + self.affine.eval(x)
    }

    /// Symmetric matrix `P` with `xᵀPx` equal to the quadratic part.
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(n, n);
        for &(i, j, c) in &self.quad {
            p[(i, j)] += 0.5 * c;
            p[(j, i)] += 0.5 * c;
        }
        p
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.affine.dense(x.len());
        for &(i, j, c) in &self.quad {
            g[i] += c * x[j];
            g[j] += c * x[i];
        }
        g
    }

    fn max_coeff(&self, n: usize) -> f64 {
        let pm = self.matrix(n).iter().fold(0.0f64, |m, c| m.max(c.abs()));
        pm.max(self.affine.max_coeff(n))
    }
}

/// `weight · |arg(x)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsTerm {
    pub arg: Affine,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub linear: Affine,
    pub quadratics: Vec<Quadratic>,
    pub abs_terms: Vec<AbsTerm>,
}

impl Objective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.linear.eval(x)
            + self.quadratics.iter().map(|q| q.eval(x)).sum::<f64>()
            + self.abs_terms.iter().map(|a| a.weight * a.arg.eval(x).abs()).sum::<f64>()
    }

    /// Gradient of the smooth (linear + quadratic) part.
    pub fn smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.linear.dense(x.len());
        for q in &self.quadratics {
            for (gi, qi) in g.iter_mut().zip(q.gradient(x)) {
                *gi += qi;
            }
        }
        g
    }
}

/// Per-variable bounds; `None` is unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bound {
    pub const FREE: Bound = Bound { lower: None, upper: None };

    pub fn interval(lower: f64, upper: f64) -> Self {
        Bound { lower: Some(lower), upper: Some(upper) }
    }
}

/// `minimize objective(x)` subject to `affine_ineq(x) ≤ 0`,
/// `quadratic_ineq(x) ≤ 0`, `affine_eq(x) = 0` and `bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexProgram {
    pub num_vars: usize,
    pub objective: Objective,
    pub affine_ineq: Vec<Affine>,
    pub quadratic_ineq: Vec<Quadratic>,
    pub affine_eq: Vec<Affine>,
    pub bounds: Vec<Bound>,
}

impl ConvexProgram {
    pub fn new(num_vars: usize) -> Self {
        ConvexProgram {
            num_vars,
            objective: Objective::default(),
            affine_ineq: Vec::new(),
            quadratic_ineq: Vec::new(),
            affine_eq: Vec::new(),
            bounds: vec![Bound::FREE; num_vars],
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.affine_ineq.len() + self.quadratic_ineq.len() + self.affine_eq.len()
    }

    /// Checks indices, finiteness, bound ordering, weight signs and that every
    /// quadratic matrix is PSD.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        let bad = |m: String| Err(Error::InvalidProgram(m));
        if self.bounds.len() != n {
            return bad(format!("{} bounds for {} variables", self.bounds.len(), n));
        }
        let affines = std::iter::once(&self.objective.linear)
            .chain(&self.affine_ineq)
            .chain(&self.affine_eq)
            .chain(self.objective.abs_terms.iter().map(|a| &a.arg))
            .chain(self.objective.quadratics.iter().map(|q| &q.affine))
            .chain(self.quadratic_ineq.iter().map(|q| &q.affine));
        for a in affines {
            if a.terms.iter().any(|&(i, c)| i >= n || !c.is_finite()) || !a.constant.is_finite() {
                return bad("affine term out of range or non-finite".into());
            }
        }
        for (which, q) in self
            .objective
            .quadratics
            .iter()
            .map(|q| ("objective", q))
            .chain(self.quadratic_ineq.iter().map(|q| ("constraint", q)))
        {
            if q.quad.iter().any(|&(i, j, c)| i >= n || j >= n || !c.is_finite()) {
                return bad(format!("{which} quadratic term out of range or non-finite"));
            }
            if !is_psd(&q.matrix(n)) {
                return bad(format!("{which} quadratic is not positive semidefinite"));
            }
        }
        if self.objective.abs_terms.iter().any(|a| !a.weight.is_finite() || a.weight < 0.0) {
            return bad("absolute-value weights must be finite and non-negative".into());
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if let (Some(l), Some(u)) = (b.lower, b.upper) {
                if l.is_nan() || u.is_nan() || l > u {
                    return bad(format!("variable {i} has lower bound {l} above upper bound {u}"));
                }
            }
            if b.lower.is_some_and(|v| v.is_nan()) || b.upper.is_some_and(|v| v.is_nan()) {
                return bad(format!("variable {i} has a NaN bound"));
            }
        }
        Ok(())
    }

    /// Largest constraint violation at `x`, each row scaled by its largest
    /// coefficient.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let n = self.num_vars;
        let mut v: f64 = 0.0;
        for a in &self.affine_ineq {
            v = v.max(a.eval(x) * row_scale(a.max_coeff(n)));
        }
        for q in &self.quadratic_ineq {
            v = v.max(q.eval(x) * row_scale(q.max_coeff(n)));
        }
        for a in &self.affine_eq {
            v = v.max(a.eval(x).abs() * row_scale(a.max_coeff(n)));
        }
        for (xi, b) in x.iter().zip(&self.bounds) {
            if let Some(l) = b.lower {
                v = v.max(l - xi);
            }
            if let Some(u) = b.upper {
                v = v.max(xi - u);
            }
        }
        v.max(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: ConvexProgram = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn is_psd(p: &DMatrix<f64>) -> bool {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return true;
    }
    let eig = SymmetricEigen::new(p.clone());
    eig.eigenvalues.iter().all(|&l| l >= -PSD_TOL * scale)
}

pub(crate) fn row_scale(max_coeff: f64) -> f64 {
    if max_coeff > 0.0 {
        1.0 / max_coeff
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Multipliers in the units of the original program.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub affine_ineq: Vec<f64>,
    pub quadratic_ineq: Vec<f64>,
    pub affine_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Subgradient of `|arg|` chosen at the solution, in `[-1, 1]`.
    pub abs_signs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub status: Status,
    pub iterations: usize,
    pub duals: Duals,
}
