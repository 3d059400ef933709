//! Single-subcarrier splicing baseline.
//!
//! The comparison method uses only the (spline-interpolated, exchanged)
//! zero-subcarrier product per band. Those `M` samples are frequency samples
//! of the CIR convolved with itself, whose first component sits at twice the
//! time of flight; a complex BPDN over a lag grid on `[0, 2 tau_max]` and a
//! fractional peak threshold read it off.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::signal::BandPlan;
use crate::solver::{solve_bpdn, BpdnProblem, SolverConfig};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Sparse estimate of the CIR self-convolution over `[0, 2 tau_max]`.
#[derive(Debug, Clone)]
pub struct SelfConvolutionEstimate {
    pub grid_s: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    /// Smallest grid lag whose coefficient passes the peak threshold.
    pub first_lag_s: f64,
    pub converged: bool,
}

/// Time-of-flight estimate from the reciprocal product vector: half the
/// first significant self-convolution component.
pub fn chronos_tof(
    y_prime: &[Complex64],
    plan: &BandPlan,
    lambda: f64,
    grid_points: usize,
    tau_max_s: f64,
    peak_fraction: f64,
    config: &SolverConfig,
) -> Result<(f64, SelfConvolutionEstimate)> {
    if y_prime.len() != plan.num_bands() {
        return Err(Error::DimensionMismatch(format!(
            "reciprocal vector length {} vs {} bands",
            y_prime.len(),
            plan.num_bands()
        )));
    }
    if grid_points == 0 || !(tau_max_s > 0.0) {
        return Err(Error::InvalidProblem(
            "baseline grid needs positive size and tau_max".into(),
        ));
    }

    // One measurement per band: the dictionary rows are the band carriers.
    let span = 2.0 * tau_max_s;
    let step = span / grid_points as f64;
    let grid_s: Vec<f64> = (1..=grid_points).map(|g| g as f64 * step).collect();
    let dict = Mat::from_fn(plan.num_bands(), grid_points, |m, g| {
        Complex64::from_polar(1.0, -TAU * plan.freq_hz(m, 0) * grid_s[g])
    });
    debug_assert_eq!(dict.rows(), plan.num_bands());

    let problem = BpdnProblem::new(&dict, y_prime, lambda)?;
    let solution = solve_bpdn(&problem, config);

    let max_mag = solution
        .coefficients
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    if max_mag <= 0.0 {
        return Err(Error::EmptySupport);
    }
    let threshold = peak_fraction * max_mag;
    let first = solution
        .coefficients
        .iter()
        .position(|c| c.norm() >= threshold)
        .ok_or(Error::EmptySupport)?;
    let first_lag_s = grid_s[first];
    Ok((
        first_lag_s / 2.0,
        SelfConvolutionEstimate {
            grid_s,
            coefficients: solution.coefficients,
            first_lag_s,
            converged: solution.converged,
        },
    ))
}
