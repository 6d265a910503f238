use serde::{Deserialize, Serialize};

use crate::model::Point;

/// Axis-aligned search rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub min: Point,
    pub max: Point,
}

impl GridBounds {
    pub fn new(min: Point, max: Point) -> Self {
        GridBounds { min, max }
    }

    /// Square centred at `c` with half-width `r`.
    pub fn around(c: Point, r: f64) -> Self {
        GridBounds { min: Point::new(c.x - r, c.y - r), max: Point::new(c.x + r, c.y + r) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: Point,
    pub value: f64,
    pub evaluations: usize,
}

/// Coarse-to-fine search for the minimum of `f` over `bounds`.
///
/// `f` returns `None` where the point is infeasible. Each level evaluates a
/// `resolution × resolution` lattice (rounded up to odd so the incumbent is
/// always a lattice node) and the next level zooms to two cells around the
/// best node. Returns `None` if no evaluated point was feasible.
pub fn grid_oracle<F>(f: F, bounds: GridBounds, resolution: usize, levels: usize) -> Option<GridResult>
where
    F: Fn(Point) -> Option<f64>,
{
    let res = (resolution.max(3)) | 1;
    let mut lo = bounds.min;
    let mut hi = bounds.max;
    let mut best: Option<(Point, f64)> = None;
    let mut evaluations = 0;
    for _ in 0..levels.max(1) {
        let step = Point::new((hi.x - lo.x) / (res - 1) as f64, (hi.y - lo.y) / (res - 1) as f64);
        for i in 0..res {
            for j in 0..res {
                let p = Point::new(lo.x + step.x * i as f64, lo.y + step.y * j as f64);
                evaluations += 1;
                if let Some(v) = f(p).filter(|v| v.is_finite()) {
                    if best.is_none_or(|(_, b)| v < b) {
                        best = Some((p, v));
                    }
                }
            }
        }
        let (c, _) = best?;
        let half = Point::new(2.0 * step.x, 2.0 * step.y);
        lo = Point::new((c.x - half.x).max(bounds.min.x), (c.y - half.y).max(bounds.min.y));
        hi = Point::new((c.x + half.x).min(bounds.max.x), (c.y + half.y).min(bounds.max.y));
    }
    best.map(|(point, value)| GridResult { point, value, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_smooth_minimum() {
        let f = |p: Point| Some((p.x - 1.234).powi(2) + 3.0 * (p.y + 0.5).powi(2));
        let r = grid_oracle(f, GridBounds::around(Point::new(0.0, 0.0), 5.0), 21, 8).unwrap();
        assert!((r.point.x - 1.234).abs() < 1e-4 && (r.point.y + 0.5).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn respects_infeasible_region() {
        // minimum of x subject to x^2 + y^2 <= 1
        let f = |p: Point| (p.norm2() <= 1.0).then_some(p.x);
        let r = grid_oracle(f, GridBounds::around(Point::new(0.0, 0.0), 2.0), 41, 10).unwrap();
        assert!((r.value + 1.0).abs() < 1e-4);
    }

    #[test]
    fn nothing_feasible() {
        assert!(grid_oracle(|_| None, GridBounds::around(Point::new(0.0, 0.0), 1.0), 5, 2).is_none());
    }

    #[test]
    fn more_levels_never_worse() {
        let f = |p: Point| Some((p.x - 0.3).abs() + (p.y - 0.77).abs());
        let b = GridBounds::around(Point::new(0.0, 0.0), 3.0);
        let mut prev = f64::INFINITY;
        for levels in 1..6 {
            let v = grid_oracle(f, b, 11, levels).unwrap().value;
            assert!(v <= prev);
            prev = v;
        }
    }
}
