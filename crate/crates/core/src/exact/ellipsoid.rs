use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `{x : (x - c)ᵀ P⁻¹ (x - c) ≤ 1}` with `P` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cut {
    /// The ellipsoid was replaced by the minimum-volume one containing the
    /// kept half.
    Applied,
    /// The cut direction has zero length in the ellipsoid metric.
    Degenerate,
    /// No point of the ellipsoid satisfies the cut.
    Empty,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>) -> Self {
        assert_eq!(shape.nrows(), center.len());
        assert_eq!(shape.ncols(), center.len());
        Ellipsoid { center, shape }
    }

    /// Ball of radius `r` around `center`.
    pub fn ball(center: DVector<f64>, r: f64) -> Self {
        let n = center.len();
        Ellipsoid { center, shape: DMatrix::identity(n, n) * (r * r) }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Keeps `{x : gᵀ(x - c) ≤ -depth}` with `depth ≥ 0`.
    pub fn cut(&mut self, g: &DVector<f64>, depth: f64) -> Cut {
        let n = self.dim() as f64;
        let pg = &self.shape * g;
        let gpg = g.dot(&pg);
        if !gpg.is_finite() || gpg <= 0.0 {
            return Cut::Degenerate;
        }
        let root = gpg.sqrt();
        let alpha = depth.max(0.0) / root;
        if alpha >= 1.0 {
            return Cut::Empty;
        }
        let b = pg / root;
        if self.dim() == 1 {
            self.center -= &b * ((1.0 + alpha) / 2.0);
            self.shape *= ((1.0 - alpha) / 2.0).powi(2);
            return Cut::Applied;
        }
        let tau = (1.0 + n * alpha) / (n + 1.0);
        let delta = n * n * (1.0 - alpha * alpha) / (n * n - 1.0);
        let sigma = 2.0 * (1.0 + n * alpha) / ((n + 1.0) * (1.0 + alpha));
        self.center -= &b * tau;
        let outer = &b * b.transpose();
        self.shape = (&self.shape - outer * sigma) * delta;
        self.shape = (&self.shape + self.shape.transpose()) * 0.5;
        Cut::Applied
    }

    /// `ln vol` up to the constant volume of the unit ball.
    pub fn log_volume(&self) -> f64 {
        match self.shape.clone().cholesky() {
            Some(ch) => ch.l().diagonal().iter().map(|d| d.ln()).sum(),
            None => f64::NEG_INFINITY,
        }
    }

    /// Largest semi-axis.
    pub fn radius(&self) -> f64 {
        let eig = SymmetricEigen::new(self.shape.clone());
        eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt()
    }

    /// Largest half-width along a coordinate axis.
    pub fn max_half_width(&self) -> f64 {
        self.shape.diagonal().iter().fold(0.0f64, |m, v| m.max(*v)).sqrt()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let d = x - &self.center;
        match self.shape.clone().cholesky() {
            Some(ch) => d.dot(&ch.solve(&d)) <= 1.0 + 1e-12,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn central_cut_volume_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            let mut e = Ellipsoid::ball(DVector::zeros(n), 2.0);
            for _ in 0..50 {
                let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let before = e.log_volume();
                assert_eq!(e.cut(&g, 0.0), Cut::Applied);
                let drop = before - e.log_volume();
                assert!(drop >= 1.0 / (2.0 * n as f64) - 1e-9, "n={n} drop={drop}");
            }
        }
    }

    #[test]
    fn kept_half_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4;
        let mut e = Ellipsoid::ball(DVector::zeros(n), 1.0);
        let g = DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.3 });
        let old = e.clone();
        e.cut(&g, 0.2);
        let mut kept = 0;
        for _ in 0..20000 {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            if old.contains(&x) && g.dot(&(&x - &old.center)) <= -0.2 * g.dot(&(&old.shape * &g)).sqrt() {
                kept += 1;
                assert!(e.contains(&x));
            }
        }
        assert!(kept > 100);
    }

    #[test]
    fn one_dimensional_interval() {
        let mut e = Ellipsoid::ball(DVector::from_element(1, 0.0), 1.0);
        e.cut(&DVector::from_element(1, 1.0), 0.0);
        assert!((e.center[0] + 0.5).abs() < 1e-15);
        assert!((e.radius() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn too_deep_is_empty() {
        let mut e = Ellipsoid::ball(DVector::zeros(2), 1.0);
        assert_eq!(e.cut(&DVector::from_vec(vec![1.0, 0.0]), 1.5), Cut::Empty);
    }
}
