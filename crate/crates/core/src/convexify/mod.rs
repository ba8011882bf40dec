//! Convex reformulation of the quadratic tour cost and its certificates.
//!
//! Two routes keep the objective value unchanged at every permutation while
//! making the Hessian positive semidefinite:
//!
//! * `γ = 0` with a diagonal shift `d`: `xᵀDx = dᵀx` on binaries, so adding
//!   `diag d` to the Hessian and `−dᵀx` to the linear term is free.
//! * `γ > 1` for symmetric PSD `C`: adding `γ xᵀ(I ⊗ C)x` costs exactly
//!   `γ trace(C)` at a permutation, which the constant removes.

mod beta;
mod certify;
mod hessian;

use nalgebra::DMatrix;
use serde::Serialize;

pub use beta::{beta_iterate, BetaSequence};
pub use certify::{
    certify_psd, certify_quadratic, certify_schur_recursion, scalar_factor, PsdCertificate,
    PsdMethod, SchurCertificate, PSD_TOL,
};
pub use hessian::{build_q, QuadraticCost, DENSE_LIMIT};

use crate::error::{Error, Result};

/// Default `γ` for the identity route.
pub const DEFAULT_GAMMA: f64 = 1.01;

/// How the shift entries are assigned to the first/last blocks and the
/// interior blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftVariant {
    /// `(Σ_j |c_aj| + Σ_j |c_ja|) / 2` everywhere; always diagonally
    /// dominant.
    #[default]
    Averaged,
    /// Min of row/column sums on interior blocks, average on the first and
    /// last block.
    InteriorMin,
    /// Min of row/column sums on the first and last block, average on the
    /// interior blocks.
    BoundaryMin,
}

/// Diagonal shift for the `γ = 0` route, laid out like the flattened
/// permutation bits (block = tour position, entry = node).
pub fn shift_for_gamma_zero(c: &DMatrix<f64>, variant: ShiftVariant) -> Vec<f64> {
    let v = c.nrows();
    let row = |a: usize, abs: bool| {
        (0..v)
            .map(|b| if abs { c[(a, b)].abs() } else { c[(a, b)] })
            .sum::<f64>()
    };
    let col = |a: usize, abs: bool| {
        (0..v)
            .map(|b| if abs { c[(b, a)].abs() } else { c[(b, a)] })
            .sum::<f64>()
    };
    let mut d = vec![0.0; v * v];
    for p in 0..v {
        let boundary = p == 0 || p + 1 == v;
        for a in 0..v {
            let avg_abs = 0.5 * (row(a, true) + col(a, true));
            let avg = 0.5 * (row(a, false) + col(a, false));
            let min = row(a, false).min(col(a, false));
            d[p * v + a] = match variant {
                ShiftVariant::Averaged => avg_abs,
                ShiftVariant::InteriorMin => {
                    if boundary {
                        avg
                    } else {
                        min
                    }
                }
                ShiftVariant::BoundaryMin => {
                    if boundary {
                        min
                    } else {
                        avg
                    }
                }
            };
        }
    }
    d
}

/// Smallest diagonal making a symmetric `C` diagonally dominant:
/// `c_ii ← max(c_ii, Σ_{j≠i} |c_ij|)`.
pub fn gershgorin_bump(c: &DMatrix<f64>) -> DMatrix<f64> {
    let v = c.nrows();
    let mut out = c.clone();
    for i in 0..v {
        let r: f64 = (0..v).filter(|&j| j != i).map(|j| c[(i, j)].abs()).sum();
        out[(i, i)] = c[(i, i)].max(r);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GammaPolicy {
    /// `γ = 1.01` on a diagonally bumped `C` when `C` is symmetric,
    /// otherwise the `γ = 0` shift.
    #[default]
    Auto,
    ForceShift(ShiftVariant),
    ForceGamma(f64),
}

impl std::str::FromStr for GammaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(GammaPolicy::Auto),
            "shift" | "0" => Ok(GammaPolicy::ForceShift(ShiftVariant::Averaged)),
            other => other
                .parse::<f64>()
                .map(GammaPolicy::ForceGamma)
                .map_err(|_| {
                    Error::invalid(format!(
                        "gamma must be 'auto', 'shift' or a number, got '{other}'"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Shift,
    Gamma,
}

#[derive(Debug, Clone)]
pub struct Convexified {
    pub cost: QuadraticCost,
    pub route: Route,
    pub certificate: PsdCertificate,
    /// Diagonal of `C` after any bump.
    pub diagonal: Vec<f64>,
}

/// Picks a route, builds `Q̃`, and certifies it. A failed certificate is an
/// error, never a silent non-convex model.
pub fn convexified_objective(c: &DMatrix<f64>, policy: GammaPolicy) -> Result<Convexified> {
    let symmetric = c == &c.transpose();
    let (cost, route) = match policy {
        GammaPolicy::Auto if symmetric => {
            (build_q(&gershgorin_bump(c), DEFAULT_GAMMA)?, Route::Gamma)
        }
        GammaPolicy::Auto => shift_route(c, ShiftVariant::Averaged)?,
        GammaPolicy::ForceShift(variant) => shift_route(c, variant)?,
        GammaPolicy::ForceGamma(g) if g == 0.0 => shift_route(c, ShiftVariant::Averaged)?,
        GammaPolicy::ForceGamma(g) => {
            let base = if symmetric {
                gershgorin_bump(c)
            } else {
                c.clone()
            };
            (build_q(&base, g)?, Route::Gamma)
        }
    };
    let certificate = certify_quadratic(&cost, PSD_TOL)?;
    if let PsdCertificate::Counterexample { value, .. } = &certificate {
        return Err(Error::Certification(format!(
            "{route:?} route with gamma = {} is not convex (witness value {value:e})",
            cost.gamma()
        )));
    }
    let diagonal = cost.c().diagonal().iter().copied().collect();
    Ok(Convexified {
        cost,
        route,
        certificate,
        diagonal,
    })
}

fn shift_route(c: &DMatrix<f64>, variant: ShiftVariant) -> Result<(QuadraticCost, Route)> {
    let d = shift_for_gamma_zero(c, variant);
    Ok((build_q(c, 0.0)?.with_shift(d)?, Route::Shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::{shift_matrix, tour_adjacency, tour_cost, Permutation};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_c(v: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(v, v, |_, _| rng.gen::<f64>())
    }

    fn random_perm(v: usize, rng: &mut ChaCha8Rng) -> Permutation {
        let mut o: Vec<usize> = (0..v).collect();
        o.shuffle(rng);
        Permutation::from_order(o).unwrap()
    }

    fn identity_holds(q: &QuadraticCost, p: &Permutation, c: &DMatrix<f64>) -> bool {
        let lhs = q.objective(&p.vectorize());
        let rhs = tour_cost(c, &tour_adjacency(p)).unwrap();
        (lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs())
    }

    #[test]
    fn gamma_zero_has_empty_diagonal_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = build_q(&random_c(5, &mut rng), 0.0).unwrap();
        let dense = q.to_dense().unwrap();
        for p in 0..5 {
            assert!(dense.view((p * 5, p * 5), (5, 5)).iter().all(|&x| x == 0.0));
        }
        assert_eq!(q.nonzero_blocks().len(), 10);
        let q1 = build_q(q.c(), 1.01).unwrap();
        assert_eq!(q1.nonzero_blocks().len(), 15);
        assert!(build_q(q.c(), -1.0).is_err());
    }

    #[test]
    fn block_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_c(4, &mut rng);
        let q = build_q(&c, 1.5).unwrap();
        assert!((q.block(0, 0) - q.cbar() * 1.5).amax() < 1e-15);
        assert_eq!(q.block(1, 2), &c * 0.5);
        assert_eq!(q.block(2, 1), c.transpose() * 0.5);
        assert_eq!(q.block(3, 0), &c * 0.5);
        assert_eq!(q.block(0, 3), c.transpose() * 0.5);
        assert_eq!(q.block(0, 2), DMatrix::zeros(4, 4));
        let dense = q.to_dense().unwrap();
        assert_eq!(dense, dense.transpose());
    }

    #[test]
    fn zero_cost_gives_zero_form() {
        let q = build_q(&DMatrix::zeros(3, 3), 0.0).unwrap();
        assert_eq!(q.to_dense().unwrap(), DMatrix::zeros(9, 9));
        assert!(
            shift_for_gamma_zero(&DMatrix::zeros(3, 3), ShiftVariant::Averaged)
                .iter()
                .all(|&x| x == 0.0)
        );
        let cv = convexified_objective(
            &DMatrix::zeros(3, 3),
            GammaPolicy::ForceShift(ShiftVariant::Averaged),
        )
        .unwrap();
        assert_eq!(cv.cost.constant(), 0.0);
    }

    #[test]
    fn quadratic_form_is_trace_with_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = rng.gen_range(3..8);
            let c = random_c(v, &mut rng);
            let gamma = rng.gen_range(0.0..3.0);
            let p = random_perm(v, &mut rng);
            let q = build_q(&c, gamma).unwrap();
            let x = p.matrix();
            let expect = (c.transpose()
                * x.transpose()
                * (shift_matrix(v) + DMatrix::identity(v, v) * gamma)
                * &x)
                .trace();
            let got = q.quad_form(&p.vectorize());
            assert!((got - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
            let dense = q.to_dense().unwrap();
            let xv = nalgebra::DVector::from_vec(p.vectorize());
            assert!(((xv.transpose() * &dense * &xv)[(0, 0)] - got).abs() < 1e-9);
        }
    }

    #[test]
    fn all_ones_shift() {
        let c = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        for variant in [
            ShiftVariant::Averaged,
            ShiftVariant::InteriorMin,
            ShiftVariant::BoundaryMin,
        ] {
            let d = shift_for_gamma_zero(&c, variant);
            assert!(d.iter().all(|&x| x == 2.0));
        }
        let q = build_q(&c, 0.0)
            .unwrap()
            .with_shift(shift_for_gamma_zero(&c, ShiftVariant::Averaged))
            .unwrap();
        assert!(certify_psd(&q.to_dense().unwrap(), PSD_TOL)
            .unwrap()
            .passed());
        let eig = q.to_dense().unwrap().symmetric_eigen().eigenvalues.min();
        assert!(eig >= -1e-12);
    }

    #[test]
    fn boundary_blocks_are_first_and_last() {
        // one row with a large sum pins which variant used min or average
        let c = DMatrix::from_row_slice(3, 3, &[0., 4., 0., 0., 0., 0., 0., 0., 0.]);
        let interior = shift_for_gamma_zero(&c, ShiftVariant::InteriorMin);
        // node 0: row sum 4, column sum 0 → avg 2, min 0
        assert_eq!(interior[0], 2.0);
        assert_eq!(interior[3], 0.0);
        assert_eq!(interior[6], 2.0);
        let boundary = shift_for_gamma_zero(&c, ShiftVariant::BoundaryMin);
        assert_eq!((boundary[0], boundary[3], boundary[6]), (0.0, 2.0, 0.0));
    }

    #[test]
    fn averaged_shift_certifies_random_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let v = rng.gen_range(2..=8);
            let c = random_c(v, &mut rng);
            let d = shift_for_gamma_zero(&c, ShiftVariant::Averaged);
            let q = build_q(&c, 0.0).unwrap().with_shift(d).unwrap();
            assert!(certify_psd(&q.to_dense().unwrap(), PSD_TOL)
                .unwrap()
                .passed());
            assert!(certify_quadratic(&q, PSD_TOL).unwrap().passed());
        }
    }

    #[test]
    fn min_variants_fail_on_some_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut failures = 0;
        for _ in 0..50 {
            let c = random_c(5, &mut rng);
            let d = shift_for_gamma_zero(&c, ShiftVariant::InteriorMin);
            let q = build_q(&c, 0.0).unwrap().with_shift(d).unwrap();
            if !certify_psd(&q.to_dense().unwrap(), PSD_TOL)
                .unwrap()
                .passed()
            {
                failures += 1;
            }
        }
        assert!(failures > 0);
    }

    #[test]
    fn certify_identity_and_indefinite() {
        assert!(certify_psd(&DMatrix::identity(4, 4), PSD_TOL)
            .unwrap()
            .passed());
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        match certify_psd(&m, PSD_TOL).unwrap() {
            PsdCertificate::Counterexample { witness, value } => {
                assert_eq!(witness, vec![0.0, 1.0]);
                assert_eq!(value, -1.0);
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
        let swap = DMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]);
        assert!(!certify_psd(&swap, PSD_TOL).unwrap().passed());
        let asym = DMatrix::from_row_slice(2, 2, &[1., 1., 0., 1.]);
        assert!(certify_psd(&asym, PSD_TOL).is_err());
    }

    #[test]
    fn witness_is_negative_after_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let a = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
            let m = &a * a.transpose() - DMatrix::identity(6, 6) * 0.3;
            let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
            match certify_psd(&m, PSD_TOL).unwrap() {
                PsdCertificate::Counterexample { witness, value } => {
                    assert!(min_eig < 0.0);
                    let w = nalgebra::DVector::from_vec(witness);
                    let check = (w.transpose() * &m * &w)[(0, 0)];
                    assert!(check < 0.0 && (check - value).abs() < 1e-9);
                }
                PsdCertificate::Pass { .. } => assert!(min_eig >= -1e-7),
            }
        }
    }

    #[test]
    fn positive_semidefinite_singular_passes() {
        let u = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, -1.0, 0.5]);
        let m = &u * u.transpose();
        assert!(certify_psd(&m, PSD_TOL).unwrap().passed());
    }

    #[test]
    fn auto_policy_routes() {
        let inst = crate::instance::random_instance(3, 2, 2, 9).unwrap();
        let c = inst.routing_costs();
        let cv = convexified_objective(&c, GammaPolicy::Auto).unwrap();
        assert_eq!(cv.route, Route::Gamma);
        assert_eq!(cv.cost.gamma(), DEFAULT_GAMMA);
        assert!(cv.certificate.passed());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let asym = random_c(6, &mut rng);
        let cv = convexified_objective(&asym, GammaPolicy::Auto).unwrap();
        assert_eq!(cv.route, Route::Shift);
        assert_eq!(cv.cost.gamma(), 0.0);
    }

    #[test]
    fn gamma_below_one_rejected_when_indefinite() {
        let inst = crate::instance::random_instance(2, 1, 2, 9).unwrap();
        let err =
            convexified_objective(&inst.routing_costs(), GammaPolicy::ForceGamma(0.5)).unwrap_err();
        assert!(matches!(err, Error::Certification(_)));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("auto".parse::<GammaPolicy>().unwrap(), GammaPolicy::Auto);
        assert_eq!(
            "1.5".parse::<GammaPolicy>().unwrap(),
            GammaPolicy::ForceGamma(1.5)
        );
        assert!(matches!(
            "shift".parse::<GammaPolicy>().unwrap(),
            GammaPolicy::ForceShift(_)
        ));
        assert!("x".parse::<GammaPolicy>().is_err());
    }

    #[test]
    fn large_v_uses_kronecker() {
        let inst = crate::instance::random_instance(18, 3, 2, 1).unwrap();
        let cv = convexified_objective(&inst.routing_costs(), GammaPolicy::Auto).unwrap();
        assert!(matches!(
            cv.certificate,
            PsdCertificate::Pass {
                method: PsdMethod::Kronecker,
                ..
            }
        ));
        assert!(cv.cost.to_dense().is_err());
    }

    #[test]
    fn schur_recursion_pivots_follow_beta() {
        let c = DMatrix::identity(3, 3);
        let cert = certify_schur_recursion(&c, 2.0, 10, PSD_TOL).unwrap();
        assert!(cert.passed);
        assert_eq!(cert.pivots[0], 2.0);
        assert_eq!(cert.pivots[1], 1.875);
        let seq = beta_iterate(2.0, 7).unwrap();
        for i in 0..8 {
            assert!((cert.pivots[i] - seq.values[i]).abs() < 1e-12);
        }
        assert!(cert.multiplier > 0.0);
    }

    #[test]
    fn schur_declines_small_gamma() {
        let c = DMatrix::identity(2, 2);
        assert!(
            !certify_schur_recursion(&c, 0.5, 10, PSD_TOL)
                .unwrap()
                .passed
        );
        assert!(
            certify_schur_recursion(&c, 1.01, 10, PSD_TOL)
                .unwrap()
                .passed
        );
        assert!(certify_schur_recursion(&c, 0.0, 10, PSD_TOL).is_err());
    }

    #[test]
    fn schur_agrees_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let v = rng.gen_range(3..=7);
            let a = DMatrix::from_fn(v, v, |_, _| rng.gen_range(-1.0..1.0));
            let c = &a * a.transpose();
            for gamma in [0.6, 1.01, 2.0] {
                let q = build_q(&c, gamma).unwrap();
                let dense = certify_psd(&q.to_dense().unwrap(), PSD_TOL)
                    .unwrap()
                    .passed();
                let schur = certify_schur_recursion(&c, gamma, v, PSD_TOL)
                    .unwrap()
                    .passed;
                assert_eq!(dense, schur, "v={v} gamma={gamma}");
            }
        }
    }

    #[test]
    fn beta_one_step() {
        let s = beta_iterate(2.0, 1).unwrap();
        assert_eq!(s.values, vec![2.0, 1.875]);
        assert!(s.bound_holds && s.margin_positive);
        assert!(matches!(
            beta_iterate(0.5, 3),
            Err(Error::Divergence { step: 1, .. })
        ));
        assert!(beta_iterate(0.0, 3).is_err());
    }

    #[test]
    fn beta_bound_holds_near_one() {
        let s = beta_iterate(1.01, 10_000).unwrap();
        assert!(s.bound_holds);
        assert!(s.values.iter().all(|&b| b >= s.lower_bound));
        assert!(s.margin_positive);
        let s = beta_iterate(1.0, 10_000).unwrap();
        assert!(s.margin_positive);
    }

    proptest! {
        #[test]
        fn objective_identity(v in 2usize..=10, gamma in 0.0f64..3.0, seed in any::<u64>(), shift in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_c(v, &mut rng);
            let p = random_perm(v, &mut rng);
            let mut q = build_q(&c, gamma).unwrap();
            if shift {
                q = q.with_shift(shift_for_gamma_zero(&c, ShiftVariant::Averaged)).unwrap();
            }
            prop_assert!(identity_holds(&q, &p, &c));
        }

        #[test]
        fn shift_always_certifies(v in 2usize..=8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = DMatrix::from_fn(v, v, |_, _| rng.gen_range(-2.0..2.0));
            let q = build_q(&c, 0.0).unwrap().with_shift(shift_for_gamma_zero(&c, ShiftVariant::Averaged)).unwrap();
            prop_assert!(certify_quadratic(&q, PSD_TOL).unwrap().passed());
        }
    }
}
