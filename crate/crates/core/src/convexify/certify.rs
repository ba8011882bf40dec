use nalgebra::DMatrix;
use serde::Serialize;

use super::hessian::{QuadraticCost, DENSE_LIMIT};
use crate::error::{Error, Result};

pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdMethod {
    Gershgorin,
    Factorization,
    Kronecker,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PsdCertificate {
    /// `min_pivot` is the smallest Gershgorin margin or elimination pivot.
    Pass { method: PsdMethod, min_pivot: f64 },
    /// `wᵀ M w = value < 0`.
    Counterexample { witness: Vec<f64>, value: f64 },
}

impl PsdCertificate {
    pub fn passed(&self) -> bool {
        matches!(self, PsdCertificate::Pass { .. })
    }
}

fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// PSD test for a dense symmetric matrix.
///
/// A Gershgorin pass is tried first. Otherwise symmetric elimination with
/// largest-diagonal pivoting runs until no pivot exceeds the threshold
/// `tol · max(1, ‖M‖∞)`; the leftover Schur complement either stays inside
/// the threshold (PASS) or yields a direction `u` with `uᵀSu < 0`, which is
/// lifted back to a witness for `M`.
pub fn certify_psd(m: &DMatrix<f64>, tol: f64) -> Result<PsdCertificate> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            actual: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let n = m.nrows();
    let thr = tol * norm_inf(m).max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > thr {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    if n == 0 {
        return Ok(PsdCertificate::Pass {
            method: PsdMethod::Gershgorin,
            min_pivot: 0.0,
        });
    }

    let margin = (0..n)
        .map(|i| {
            m[(i, i)]
                - (0..n)
                    .filter(|&j| j != i)
                    .map(|j| m[(i, j)].abs())
                    .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    if margin >= -thr {
        return Ok(PsdCertificate::Pass {
            method: PsdMethod::Gershgorin,
            min_pivot: margin,
        });
    }

    let mut s = m.clone();
    let mut rest: Vec<usize> = (0..n).collect();
    let mut done: Vec<usize> = Vec::new();
    let mut min_pivot = f64::INFINITY;
    while !rest.is_empty() {
        let (at, &r) = rest
            .iter()
            .enumerate()
            .max_by(|a, b| s[(*a.1, *a.1)].total_cmp(&s[(*b.1, *b.1)]))
            .unwrap();
        let piv = s[(r, r)];
        if piv <= thr {
            break;
        }
        min_pivot = min_pivot.min(piv);
        rest.swap_remove(at);
        for &i in &rest {
            let f = s[(i, r)] / piv;
            if f == 0.0 {
                continue;
            }
            for &j in &rest {
                s[(i, j)] -= f * s[(r, j)];
            }
        }
        done.push(r);
    }
    if rest.is_empty() {
        return Ok(PsdCertificate::Pass {
            method: PsdMethod::Factorization,
            min_pivot,
        });
    }

    // direction in the leftover block
    let mut u = vec![0.0; n];
    let worst = *rest
        .iter()
        .min_by(|a, b| s[(**a, **a)].total_cmp(&s[(**b, **b)]))
        .unwrap();
    if s[(worst, worst)] < -thr {
        u[worst] = 1.0;
    } else {
        let mut best = (0.0, 0, 0);
        for (x, &i) in rest.iter().enumerate() {
            for &j in &rest[x + 1..] {
                if s[(i, j)].abs() > best.0 {
                    best = (s[(i, j)].abs(), i, j);
                }
            }
        }
        let (size, i, j) = best;
        if size - 0.5 * (s[(i, i)] + s[(j, j)]) <= thr {
            let least = rest.iter().map(|&i| s[(i, i)]).fold(min_pivot, f64::min);
            return Ok(PsdCertificate::Pass {
                method: PsdMethod::Factorization,
                min_pivot: least,
            });
        }
        u[i] = 1.0;
        u[j] = -s[(i, j)].signum();
    }
    let witness = lift_witness(m, &done, &rest, u);
    let w = nalgebra::DVector::from_vec(witness.clone());
    let value = (w.transpose() * m * &w)[(0, 0)];
    if value < 0.0 {
        return Ok(PsdCertificate::Counterexample { witness, value });
    }
    // rounding spoiled the lifted direction; fall back to an eigenvector
    let eig = m.clone().symmetric_eigen();
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if lambda < -thr {
        let witness: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let w = nalgebra::DVector::from_vec(witness.clone());
        let value = (w.transpose() * m * &w)[(0, 0)];
        return Ok(PsdCertificate::Counterexample { witness, value });
    }
    Ok(PsdCertificate::Pass {
        method: PsdMethod::Factorization,
        min_pivot: lambda,
    })
}

/// `w = [−M_EE⁻¹ M_ER u; u]` on the eliminated set `E` and the rest `R`,
/// so that `wᵀ M w = uᵀ S u` for the Schur complement `S`.
fn lift_witness(m: &DMatrix<f64>, done: &[usize], rest: &[usize], mut u: Vec<f64>) -> Vec<f64> {
    if done.is_empty() {
        return u;
    }
    let e = done.len();
    let mee = DMatrix::from_fn(e, e, |a, b| m[(done[a], done[b])]);
    let rhs = nalgebra::DVector::from_fn(e, |a, _| {
        rest.iter().map(|&r| m[(done[a], r)] * u[r]).sum::<f64>()
    });
    if let Some(ch) = mee.cholesky() {
        let y = ch.solve(&rhs);
        for (a, &i) in done.iter().enumerate() {
            u[i] = -y[a];
        }
    }
    u
}

/// Certifies `Q + diag d` without materializing it when possible.
///
/// Order of attempts: blockwise Gershgorin; for symmetric `C` and zero
/// shift the Kronecker split `Q = M ⊗ C` with `M = γI + (S + Sᵀ)/2`; dense
/// elimination up to [`DENSE_LIMIT`].
pub fn certify_quadratic(q: &QuadraticCost, tol: f64) -> Result<PsdCertificate> {
    let v = q.v();
    let margin = q.gershgorin_margin();
    let thr = tol * (2.0 + q.gamma()) * norm_inf(q.c()).max(1.0);
    if margin >= -thr {
        return Ok(PsdCertificate::Pass {
            method: PsdMethod::Gershgorin,
            min_pivot: margin,
        });
    }
    let symmetric = q.c() == &q.c().transpose();
    if symmetric && q.d().iter().all(|&x| x == 0.0) {
        let scalar = scalar_factor(v, q.gamma());
        let m_cert = certify_psd(&scalar, tol)?;
        let c_cert = certify_psd(q.c(), tol)?;
        return Ok(match (m_cert, c_cert) {
            (
                PsdCertificate::Pass { min_pivot: a, .. },
                PsdCertificate::Pass { min_pivot: b, .. },
            ) => PsdCertificate::Pass {
                method: PsdMethod::Kronecker,
                min_pivot: a.min(b),
            },
            (PsdCertificate::Pass { .. }, PsdCertificate::Counterexample { witness, .. }) => {
                // block 0 carries weight M_00 = γ
                let mut w = vec![0.0; v * v];
                w[..v].copy_from_slice(&witness);
                kron_witness(q, w)
            }
            (PsdCertificate::Counterexample { witness, .. }, _) => {
                let a = (0..v)
                    .max_by(|&a, &b| q.c()[(a, a)].total_cmp(&q.c()[(b, b)]))
                    .unwrap();
                let mut w = vec![0.0; v * v];
                for p in 0..v {
                    w[p * v + a] = witness[p];
                }
                kron_witness(q, w)
            }
        });
    }
    if v <= DENSE_LIMIT {
        return certify_psd(&q.to_dense()?, tol);
    }
    Err(Error::Certification(format!(
        "v = {v} is above the dense limit and C is not symmetric with zero shift"
    )))
}

fn kron_witness(q: &QuadraticCost, w: Vec<f64>) -> PsdCertificate {
    let value = q.quad_form(&w);
    if value < 0.0 {
        PsdCertificate::Counterexample { witness: w, value }
    } else {
        PsdCertificate::Pass {
            method: PsdMethod::Kronecker,
            min_pivot: value,
        }
    }
}

/// `γI + (S + Sᵀ)/2` for the cyclic shift `S` of size `m`.
pub fn scalar_factor(m: usize, gamma: f64) -> DMatrix<f64> {
    let s = crate::graph_core::shift_matrix(m);
    DMatrix::identity(m, m) * gamma + (&s + s.transpose()) * 0.5
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurCertificate {
    pub passed: bool,
    /// Elimination pivots of the scalar factor; all but the last follow the
    /// recursion `β_{i+1} = γ − 1/(4β_i)`.
    pub pivots: Vec<f64>,
    /// The last pivot: the multiplier of `C` in the final Schur block.
    pub multiplier: f64,
    pub c_psd: bool,
}

/// Second certifier for `γ > 0` and symmetric `C`.
///
/// For symmetric `C` the Hessian is `M ⊗ C` with `M = γI + (S + Sᵀ)/2`, so
/// each block-Schur step `Γ_{i+1} = D_i − b_iᵀ A_i⁻¹ b_i` with `A_i = β_i C`
/// acts only on the scalar factor; eliminating `M` one row at a time gives
/// the `β` pivots and the final multiplier. No inverse of `C` is formed,
/// which also covers singular `C`. The certificate passes iff `C ⪰ 0`,
/// every pivot but the last is positive and the last is `≥ −tol`.
pub fn certify_schur_recursion(
    c: &DMatrix<f64>,
    gamma: f64,
    blocks: usize,
    tol: f64,
) -> Result<SchurCertificate> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if blocks < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 blocks, got {blocks}"
        )));
    }
    if c != &c.transpose() {
        return Err(Error::invalid("C must be symmetric"));
    }
    let c_psd = certify_psd(c, tol)?.passed();
    let m = blocks;
    let last = m - 1;
    let mut diag = vec![gamma; m];
    // a[i] = M[i][i+1] for i + 1 < last; l[i] = M[i][last]
    let a = vec![0.5; m];
    let mut l = vec![0.0; m];
    l[0] = 0.5;
    l[last - 1] = 0.5;
    let mut pivots = Vec::with_capacity(m);
    let mut ok = true;
    for i in 0..last {
        let p = diag[i];
        pivots.push(p);
        if !(p > 0.0) {
            ok = false;
            break;
        }
        if i + 1 < last {
            diag[i + 1] -= a[i] * a[i] / p;
            l[i + 1] -= a[i] * l[i] / p;
        }
        diag[last] -= l[i] * l[i] / p;
    }
    let multiplier = if ok { diag[last] } else { f64::NAN };
    if ok {
        pivots.push(multiplier);
    }
    let passed = ok && c_psd && multiplier >= -tol * (1.0 + gamma);
    Ok(SchurCertificate {
        passed,
        pivots,
        multiplier,
        c_psd,
    })
}
