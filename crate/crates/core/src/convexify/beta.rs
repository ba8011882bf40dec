use serde::Serialize;

use crate::error::{Error, Result};

/// Iterates of `β_{i+1} = β₀ − 1/(4β_i)` and the series
/// `S_l = Σ_{i=1}^{l} 1 / (4^{i+1} β_i Π_{j<i} β_j²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSequence {
    pub beta0: f64,
    /// `β_0 ..= β_steps`.
    #[serde(skip)]
    pub values: Vec<f64>,
    /// `S_1 ..= S_steps`.
    #[serde(skip)]
    pub partial_sums: Vec<f64>,
    /// `(β₀ + √(β₀² − 1)) / 2`, or NaN when `β₀ < 1`.
    pub lower_bound: f64,
    /// Every iterate lies strictly above `lower_bound`.
    pub bound_holds: bool,
    /// `β₀ − 1/(4β₀) − S_steps`.
    pub margin: f64,
    pub min_margin: f64,
    pub margin_positive: bool,
}

/// Runs the recursion for `steps` steps.
///
/// The lower bound is also the fixed point of the recursion, so the iterates
/// approach it until they round onto it. The strict comparison is therefore
/// made on `δ_i = β_i − bound`, tracked in log form through the exact
/// relation `δ_{i+1} = δ_i / (4 β_i · bound)`, which cannot round to zero.
pub fn beta_iterate(beta0: f64, steps: usize) -> Result<BetaSequence> {
    if !(beta0 > 0.0) || !beta0.is_finite() {
        return Err(Error::invalid(format!(
            "beta0 must be positive, got {beta0}"
        )));
    }
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    let has_bound = beta0 >= 1.0;
    let root = if has_bound {
        (beta0 * beta0 - 1.0).sqrt()
    } else {
        f64::NAN
    };
    let lower_bound = (beta0 + root) / 2.0;
    // δ_0 = (β₀ − √(β₀²−1))/2 = 1 / (2(β₀ + √(β₀²−1)))
    let mut log_delta = if has_bound {
        -(2.0 * (beta0 + root)).ln()
    } else {
        f64::NAN
    };
    let mut bound_holds = has_bound;

    let mut values = Vec::with_capacity(steps + 1);
    let mut partial_sums = Vec::with_capacity(steps);
    values.push(beta0);
    let head = beta0 - 1.0 / (4.0 * beta0);
    // r_i = 1 / (4^{i+1} Π_{j<i} β_j²)
    let mut r = 1.0 / (16.0 * beta0 * beta0);
    let mut sum = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut beta = beta0;
    for i in 1..=steps {
        let next = beta0 - 1.0 / (4.0 * beta);
        if !(next > 0.0) {
            return Err(Error::Divergence {
                step: i,
                value: next,
            });
        }
        if has_bound {
            log_delta -= (4.0 * beta * lower_bound).ln();
            if !log_delta.is_finite() || next < lower_bound {
                bound_holds = false;
            }
        }
        beta = next;
        values.push(beta);
        sum += r / beta;
        r /= 4.0 * beta * beta;
        partial_sums.push(sum);
        min_margin = min_margin.min(head - sum);
    }
    let margin = head - sum;
    Ok(BetaSequence {
        beta0,
        values,
        partial_sums,
        lower_bound,
        bound_holds,
        margin,
        min_margin,
        margin_positive: min_margin > 0.0,
    })
}
