//! Shows both convexification routes on a small cost matrix: the diagonal
//! shift for an arbitrary matrix and the gamma route for a symmetric one,
//! each with its certificate, plus the block-Schur recursion.
//!
//! cargo run --release --example certify_convexity

use mvpdp::convexify::{
    build_q, certify_psd, certify_schur_recursion, convexified_objective, gershgorin_bump,
    shift_for_gamma_zero, GammaPolicy, PsdCertificate, ShiftVariant, PSD_TOL,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn summary(cert: &PsdCertificate) -> String {
    match cert {
        PsdCertificate::Pass { method, min_pivot } => {
            format!("pass via {method:?}, min pivot {min_pivot:.3e}")
        }
        PsdCertificate::Counterexample { value, .. } => format!("fail, witness value {value:.4}"),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let v = 6;
    let arbitrary = DMatrix::from_fn(v, v, |_, _| rng.gen_range(-2.0..2.0));

    let plain = build_q(&arbitrary, 0.0)?;
    println!(
        "arbitrary C, no shift: {}",
        summary(&certify_psd(&plain.to_dense()?, PSD_TOL)?)
    );
    let shifted = plain.with_shift(shift_for_gamma_zero(&arbitrary, ShiftVariant::Averaged))?;
    println!(
        "arbitrary C, diagonal shift: {}",
        summary(&certify_psd(&shifted.to_dense()?, PSD_TOL)?)
    );

    let symmetric = gershgorin_bump(&((&arbitrary + arbitrary.transpose()) * 0.5));
    for gamma in [0.5, 1.01] {
        let q = build_q(&symmetric, gamma)?;
        let dense = certify_psd(&q.to_dense()?, PSD_TOL)?;
        println!("symmetric C, gamma {gamma}: {}", summary(&dense));
    }
    let schur = certify_schur_recursion(&symmetric, 1.01, v, PSD_TOL)?;
    println!(
        "schur recursion at gamma 1.01: passed={} multiplier={:.4} first pivots {:?}",
        schur.passed,
        schur.multiplier,
        &schur.pivots[..3]
    );

    let auto = convexified_objective(&symmetric, GammaPolicy::Auto)?;
    println!(
        "auto policy picks {:?} with gamma {}",
        auto.route,
        auto.cost.gamma()
    );
    Ok(())
}
