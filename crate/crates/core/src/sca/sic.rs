use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DecodingOrder;

/// Tolerance for treating a relaxed entry as binary.
pub const BINARY_TOL: f64 = 1e-3;

/// `K × K` decode-before indicators: `alpha[k][j] = 1` means device `k` is
/// decoded before device `j`. Relaxed iterates take values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SicMatrix {
    k: usize,
    alpha: Vec<f64>,
}

impl SicMatrix {
    pub fn zeros(k: usize) -> Self {
        SicMatrix { k, alpha: vec![0.0; k * k] }
    }

    /// Every off-diagonal entry equal to `v`.
    pub fn uniform(k: usize, v: f64) -> Self {
        let mut m = Self::zeros(k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let k = rows.len();
        assert!(rows.iter().all(|r| r.len() == k), "SIC matrix must be square");
        SicMatrix { k, alpha: rows.concat() }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.alpha[k * self.k + j]
    }

    pub fn set(&mut self, k: usize, j: usize, v: f64) {
        self.alpha[k * self.k + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.alpha.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.k);
        for i in 0..self.k {
            for j in 0..self.k {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Entries rounded at 0.5.
    pub fn rounded(&self) -> Self {
        SicMatrix { k: self.k, alpha: self.alpha.iter().map(|&a| if a >= 0.5 { 1.0 } else { 0.0 }).collect() }
    }

    /// First entry farther than `tol` from both 0 and 1.
    pub fn check_binary(&self, tol: f64) -> Result<()> {
        for i in 0..self.k {
            for j in 0..self.k {
                let a = self.get(i, j);
                if a.abs() > tol && (1.0 - a).abs() > tol {
                    return Err(Error::NonBinary { row: i, col: j, value: a, tol });
                }
            }
        }
        Ok(())
    }

    /// Box, zero diagonal, pair sums and transitivity, each within `tol`.
    pub fn satisfies_constraints(&self, tol: f64) -> bool {
        let k = self.k;
        for i in 0..k {
            if self.get(i, i).abs() > tol {
                return false;
            }
            for j in 0..k {
                let a = self.get(i, j);
                if a < -tol || a > 1.0 + tol {
                    return false;
                }
                if i != j && (a + self.get(j, i) - 1.0).abs() > tol {
                    return false;
                }
                for l in 0..k {
                    if i != j && j != l && i != l && a + self.get(j, l) - 1.0 > self.get(i, l) + tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn is_binary_feasible(&self, tol: f64) -> bool {
        self.check_binary(tol).is_ok() && self.satisfies_constraints(tol)
    }
}

/// Zero-based decode position of every device: `f(k) = K - 1 - Σ_j α_kj`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodePositionMap {
    pub f: Vec<usize>,
}

impl DecodePositionMap {
    pub fn position(&self, k: usize) -> usize {
        self.f[k]
    }

    /// Inverse map, i.e. the decoding order.
    pub fn to_order(&self) -> DecodingOrder {
        let mut perm = vec![0; self.f.len()];
        for (k, &m) in self.f.iter().enumerate() {
            perm[m] = k;
        }
        DecodingOrder::new(perm).expect("bijective position map")
    }
}

pub fn decode_positions(alpha: &SicMatrix) -> Result<DecodePositionMap> {
    alpha.check_binary(BINARY_TOL)?;
    let k = alpha.size();
    let b = alpha.rounded();
    let mut seen = vec![false; k];
    let mut f = Vec::with_capacity(k);
    for i in 0..k {
        let before: usize = (0..k).filter(|&j| b.get(i, j) == 1.0).count();
        if before >= k {
            return Err(Error::NotBijective(format!("device {i} is decoded before {before} others")));
        }
        let pos = k - 1 - before;
        if seen[pos] {
            return Err(Error::NotBijective(format!("two devices share decode position {pos}")));
        }
        seen[pos] = true;
        f.push(pos);
    }
    Ok(DecodePositionMap { f })
}

pub fn order_from_alpha(alpha: &SicMatrix) -> Result<DecodingOrder> {
    Ok(decode_positions(alpha)?.to_order())
}

pub fn alpha_from_order(order: &DecodingOrder) -> SicMatrix {
    let k = order.len();
    let mut a = SicMatrix::zeros(k);
    let perm = order.as_slice();
    for m in 0..k {
        for n in m + 1..k {
            a.set(perm[m], perm[n], 1.0);
        }
    }
    a
}
