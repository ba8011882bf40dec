use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest `v` for which the `v² × v²` Hessian may be materialized.
pub const DENSE_LIMIT: usize = 40;

/// The quadratic tour-cost form over the flattened permutation bits.
///
/// With `x[pos * v + node] = X[pos, node]`, block `(p, p')` of the Hessian
/// is `(B[p,p'] C + B[p',p] Cᵀ) / 2` where `B = S + γI` and `S` is the cyclic
/// shift. That leaves `γ(C + Cᵀ)/2` on the diagonal blocks, `C/2` above and
/// `Cᵀ/2` below (with wraparound). `d` is an extra diagonal; the objective
/// is `xᵀ(Q + diag d)x − dᵀx − γ trace(C)`, which equals the tour cost at
/// every permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    c: DMatrix<f64>,
    gamma: f64,
    d: Vec<f64>,
}

pub fn build_q(c: &DMatrix<f64>, gamma: f64) -> Result<QuadraticCost> {
    if !c.is_square() || c.nrows() < 2 {
        return Err(Error::ShapeMismatch {
            expected: "square matrix of size at least 2".into(),
            actual: format!("{}x{}", c.nrows(), c.ncols()),
        });
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "gamma must be finite and nonnegative, got {gamma}"
        )));
    }
    let v = c.nrows();
    Ok(QuadraticCost {
        c: c.clone(),
        gamma,
        d: vec![0.0; v * v],
    })
}

impl QuadraticCost {
    pub fn v(&self) -> usize {
        self.c.nrows()
    }

    pub fn dim(&self) -> usize {
        self.v() * self.v()
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn cbar(&self) -> DMatrix<f64> {
        (&self.c + self.c.transpose()) * 0.5
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// `−γ trace(C)`.
    pub fn constant(&self) -> f64 {
        -self.gamma * self.c.trace()
    }

    pub fn with_shift(mut self, d: Vec<f64>) -> Result<Self> {
        if d.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim().to_string(),
                actual: d.len().to_string(),
            });
        }
        self.d = d;
        Ok(self)
    }

    /// Entry of `B = S + γI`.
    fn b(&self, p: usize, q: usize) -> f64 {
        let v = self.v();
        let mut x = 0.0;
        if (p + 1) % v == q {
            x += 1.0;
        }
        if p == q {
            x += self.gamma;
        }
        x
    }

    /// Block rows that can be nonzero in block row `p`.
    fn neighbours(&self, p: usize) -> Vec<usize> {
        let v = self.v();
        let mut out = vec![(p + v - 1) % v, p, (p + 1) % v];
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Block `(p, q)` of `Q`, without the diagonal shift.
    pub fn block(&self, p: usize, q: usize) -> DMatrix<f64> {
        let (f, g) = (self.b(p, q), self.b(q, p));
        (&self.c * f + self.c.transpose() * g) * 0.5
    }

    /// Entry `(i, j)` of `Q + diag d` in flattened indices.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let v = self.v();
        let (p, a, q, b) = (i / v, i % v, j / v, j % v);
        let mut e = 0.5 * (self.b(p, q) * self.c[(a, b)] + self.b(q, p) * self.c[(b, a)]);
        if i == j {
            e += self.d[i];
        }
        e
    }

    /// Coordinates `(p, q)` of the blocks that are not identically zero
    /// for a generic `C`.
    pub fn nonzero_blocks(&self) -> Vec<(usize, usize)> {
        let v = self.v();
        let mut out = Vec::new();
        for p in 0..v {
            for q in self.neighbours(p) {
                if self.b(p, q) != 0.0 || self.b(q, p) != 0.0 {
                    out.push((p, q));
                }
            }
        }
        out
    }

    /// `(Q + diag d) x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let v = self.v();
        assert_eq!(x.len(), v * v);
        let mut y = vec![0.0; v * v];
        for p in 0..v {
            let yp = &mut y[p * v..(p + 1) * v];
            for q in self.neighbours(p) {
                let (f, g) = (self.b(p, q) * 0.5, self.b(q, p) * 0.5);
                let xq = &x[q * v..(q + 1) * v];
                if xq.iter().all(|&t| t == 0.0) {
                    continue;
                }
                for a in 0..v {
                    let mut acc = 0.0;
                    for b in 0..v {
                        acc += f * self.c[(a, b)] * xq[b] + g * self.c[(b, a)] * xq[b];
                    }
                    yp[a] += acc;
                }
            }
        }
        for (yi, (di, xi)) in y.iter_mut().zip(self.d.iter().zip(x)) {
            *yi += di * xi;
        }
        y
    }

    /// `xᵀ (Q + diag d) x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `xᵀ (Q + diag d) x − dᵀx − γ trace(C)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let dx: f64 = self.d.iter().zip(x).map(|(a, b)| a * b).sum();
        self.quad_form(x) - dx + self.constant()
    }

    /// Dense `Q + diag d`; refused above [`DENSE_LIMIT`].
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let v = self.v();
        if v > DENSE_LIMIT {
            return Err(Error::TooLarge(format!(
                "dense Hessian requested for v = {v} > {DENSE_LIMIT}"
            )));
        }
        let mut m = DMatrix::zeros(v * v, v * v);
        for (p, q) in self.nonzero_blocks() {
            let blk = self.block(p, q);
            m.view_mut((p * v, q * v), (v, v)).copy_from(&blk);
        }
        for i in 0..v * v {
            m[(i, i)] += self.d[i];
        }
        Ok(m)
    }

    /// Smallest Gershgorin margin `m_ii − Σ_{j≠i} |m_ij|` over all rows of
    /// `Q + diag d`.
    pub fn gershgorin_margin(&self) -> f64 {
        let v = self.v();
        let mut worst = f64::INFINITY;
        for p in 0..v {
            for a in 0..v {
                let mut diag = self.d[p * v + a];
                let mut off = 0.0;
                for q in self.neighbours(p) {
                    let (f, g) = (self.b(p, q) * 0.5, self.b(q, p) * 0.5);
                    for b in 0..v {
                        let e = f * self.c[(a, b)] + g * self.c[(b, a)];
                        if p == q && a == b {
                            diag += e;
                        } else {
                            off += e.abs();
                        }
                    }
                }
                worst = worst.min(diag - off);
            }
        }
        worst
    }
}
