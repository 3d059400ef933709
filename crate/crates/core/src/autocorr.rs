//! CIR autocorrelation recovery from squared CSI magnitudes.
//!
//! Squared CFR magnitudes are Fourier samples of the impulse-response
//! autocorrelation, a sparse conjugate-symmetric pulse train over the lag
//! axis. A real-valued dictionary of cosine/sine atoms on a dense lag grid
//! turns recovery into a real BPDN; thresholding plus exact 1-D k-means picks
//! the lag support, and a complex least-squares re-fit yields the lag
//! coefficients.

use crate::error::{Error, Result};
use crate::kmeans::weighted_kmeans_1d;
use crate::linalg::Mat;
use crate::solver::{solve_bpdn, solve_least_squares, BpdnProblem, SolverConfig, SparseSolution};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Elementwise squared modulus of the stacked (denoised) CSI vector.
pub fn squared_magnitudes(y: &[Complex64]) -> Vec<f64> {
    y.iter().map(|v| v.norm_sqr()).collect()
}

/// Complex lag atom `exp(-j 2 pi f_i xi)` over the stacked frequencies.
pub fn lag_atom(freqs_hz: &[f64], lag_s: f64) -> Vec<Complex64> {
    freqs_hz
        .iter()
        .map(|&f| Complex64::from_polar(1.0, -TAU * f * lag_s))
        .collect()
}

/// Real-valued lag dictionary `[1 | 2 Re{a} | -2 Im{a}]` over a uniform grid
/// of `G` positive lags ending at `tau_max`.
///
/// A coefficient vector splits as `[r0, re(r_1..r_G), im(r_1..r_G)]`; the
/// estimated autocorrelation value at grid lag `g` is `re[g] + j im[g]`.
#[derive(Debug, Clone)]
pub struct AutocorrDictionary {
    grid_s: Vec<f64>,
    matrix: Mat<f64>,
    freqs_hz: Vec<f64>,
    tau_max_s: f64,
}

impl AutocorrDictionary {
    pub fn build(freqs_hz: &[f64], grid_points: usize, tau_max_s: f64) -> Result<Self> {
        let samples = freqs_hz.len();
        if grid_points < samples {
            return Err(Error::InvalidProblem(format!(
                "lag grid size {grid_points} must be at least the sample count {samples}"
            )));
        }
        if !(tau_max_s > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "tau_max must be positive, got {tau_max_s}"
            )));
        }
        let step = tau_max_s / grid_points as f64;
        let grid_s: Vec<f64> = (1..=grid_points).map(|g| g as f64 * step).collect();

        let mut matrix = Mat::zeros(samples, 2 * grid_points + 1);
        for i in 0..samples {
            matrix.set(i, 0, 1.0);
        }
        for (g, &lag) in grid_s.iter().enumerate() {
            for (i, &f) in freqs_hz.iter().enumerate() {
                let (s, c) = (TAU * f * lag).sin_cos();
                // [1, 2 A1, -2 A2] with A1 = cos, A2 = -sin.
                matrix.set(i, 1 + g, 2.0 * c);
                matrix.set(i, 1 + grid_points + g, 2.0 * s);
            }
        }
        Ok(AutocorrDictionary {
            grid_s,
            matrix,
            freqs_hz: freqs_hz.to_vec(),
            tau_max_s,
        })
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn grid_s(&self) -> &[f64] {
        &self.grid_s
    }

    pub fn grid_points(&self) -> usize {
        self.grid_s.len()
    }

    pub fn grid_step_s(&self) -> f64 {
        self.tau_max_s / self.grid_points() as f64
    }

    pub fn tau_max_s(&self) -> f64 {
        self.tau_max_s
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    /// Complex autocorrelation value at grid index `g` implied by a raw
    /// coefficient vector.
    pub fn lag_value(&self, coefficients: &[f64], g: usize) -> Complex64 {
        let gp = self.grid_points();
        Complex64::new(coefficients[1 + g], coefficients[1 + gp + g])
    }
}

/// BPDN solve of the lag-domain problem on squared magnitudes.
pub fn recover_autocorr(
    u: &[f64],
    dict: &AutocorrDictionary,
    lambda: f64,
    config: &SolverConfig,
) -> Result<SparseSolution<f64>> {
    let problem = BpdnProblem::new(dict.matrix(), u, lambda)?;
    Ok(solve_bpdn(&problem, config))
}

/// Positive lag estimates with the summed coefficient weight of each cluster.
#[derive(Debug, Clone)]
pub struct RefinedSupport {
    pub lags_s: Vec<f64>,
    pub cluster_weights: Vec<f64>,
    pub candidate_count: usize,
}

/// Thresholds the raw BPDN coefficients at `epsilon` (absolute, on the
/// combined magnitude `|re + j im|`) and clusters the surviving grid lags
/// into `k_tilde` weighted centers.
pub fn refine_support(
    coefficients: &[f64],
    dict: &AutocorrDictionary,
    epsilon: f64,
    k_tilde: usize,
) -> Result<RefinedSupport> {
    let gp = dict.grid_points();
    assert_eq!(coefficients.len(), 2 * gp + 1);
    let mut candidates: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for g in 0..gp {
        let mag = dict.lag_value(coefficients, g).norm();
        if mag >= epsilon {
            candidates.push(dict.grid_s()[g]);
            weights.push(mag);
        }
    }
    if candidates.len() < k_tilde {
        return Err(Error::InsufficientSupport {
            found: candidates.len(),
            needed: k_tilde,
        });
    }
    if k_tilde == 0 {
        return Ok(RefinedSupport {
            lags_s: vec![],
            cluster_weights: vec![],
            candidate_count: candidates.len(),
        });
    }
    let centers = weighted_kmeans_1d(&candidates, &weights, k_tilde);

    // Sum each cluster's weight for downstream ordering heuristics: assign
    // every candidate to its nearest center.
    let mut cluster_weights = vec![0.0f64; k_tilde];
    for (&x, &w) in candidates.iter().zip(&weights) {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, &center) in centers.iter().enumerate() {
            let d = (x - center).abs();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        cluster_weights[best] += w;
    }
    Ok(RefinedSupport {
        lags_s: centers,
        cluster_weights,
        candidate_count: candidates.len(),
    })
}

/// Recovered autocorrelation: positive lag support, complex coefficients per
/// lag, and the real zero-lag coefficient.
#[derive(Debug, Clone)]
pub struct AutocorrEstimate {
    pub lags_s: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    pub zero_lag: f64,
}

impl AutocorrEstimate {
    /// Reconstructs the implied spectrum samples `sum_s r_s exp(-j2pi f xi_s)`
    /// over the full conjugate-symmetric support.
    pub fn reconstruct_spectrum(&self, freqs_hz: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(self.zero_lag, 0.0); freqs_hz.len()];
        for (lag, coeff) in self.lags_s.iter().zip(&self.coefficients) {
            for (o, &f) in out.iter_mut().zip(freqs_hz) {
                let atom = Complex64::from_polar(1.0, -TAU * f * lag);
                *o += coeff * atom + coeff.conj() * atom.conj();
            }
        }
        out
    }
}

/// Least-squares re-fit of the coefficients on the refined support
/// `{-xi_s} ∪ {0} ∪ {xi_s}`, followed by conjugate-symmetry averaging.
pub fn ls_coefficients(
    u: &[f64],
    lags_s: &[f64],
    dict: &AutocorrDictionary,
) -> Result<AutocorrEstimate> {
    let k_tilde = lags_s.len();
    let cols = 2 * k_tilde + 1;
    if cols > u.len() {
        return Err(Error::InvalidProblem(format!(
            "support size {cols} exceeds the measurement count {}",
            u.len()
        )));
    }
    for w in lags_s.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidProblem(
                "support lags must be strictly increasing".into(),
            ));
        }
    }
    let freqs = dict.freqs_hz();
    // Columns ordered a(-xi_K..), .., a(0), .., a(+xi_K..).
    let atoms = Mat::from_fn(freqs.len(), cols, |i, j| {
        let lag = if j < k_tilde {
            -lags_s[k_tilde - 1 - j]
        } else if j == k_tilde {
            0.0
        } else {
            lags_s[j - k_tilde - 1]
        };
        Complex64::from_polar(1.0, -TAU * freqs[i] * lag)
    });
    let rhs: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let raw = solve_least_squares(&atoms, &rhs)?;

    let zero_lag = raw[k_tilde].re;
    let mut coefficients = Vec::with_capacity(k_tilde);
    for s in 0..k_tilde {
        let plus = raw[k_tilde + 1 + s];
        let minus = raw[k_tilde - 1 - s];
        coefficients.push((plus + minus.conj()).scale(0.5));
    }
    Ok(AutocorrEstimate {
        lags_s: lags_s.to_vec(),
        coefficients,
        zero_lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{sample_cfr, BandPlan, MultipathChannel, PathComponent};

    fn plan_small() -> BandPlan {
        BandPlan::adjacent(2, 5, 312_500.0, 5.18e9).unwrap()
    }

    #[test]
    fn squared_magnitudes_examples() {
        let y = vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)];
        assert_eq!(squared_magnitudes(&y), vec![25.0, 0.0]);
    }

    #[test]
    fn zero_lag_atom_is_all_ones() {
        let plan = plan_small();
        let freqs = plan.stacked_freqs_hz();
        let atom = lag_atom(&freqs, 0.0);
        assert!(atom
            .iter()
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn dictionary_first_column_is_ones_and_blocks_match_atoms() {
        let plan = plan_small();
        let freqs = plan.stacked_freqs_hz();
        let dict = AutocorrDictionary::build(&freqs, 30, 8e-8).unwrap();
        for i in 0..freqs.len() {
            assert_eq!(dict.matrix().get(i, 0), 1.0);
        }
        // Column blocks implement 2*Re{a} and -2*Im{a}.
        for g in [0usize, 7, 29] {
            let atom = lag_atom(&freqs, dict.grid_s()[g]);
            for i in 0..freqs.len() {
                assert!((dict.matrix().get(i, 1 + g) - 2.0 * atom[i].re).abs() < 1e-12);
                assert!((dict.matrix().get(i, 1 + 30 + g) + 2.0 * atom[i].im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integer_cycle_lag_column_is_constant_across_subcarriers() {
        // Single band; pick the grid point where fs * xi = 1, so the cosine
        // column repeats with period one subcarrier step and every entry
        // equals cos(2 pi f_carrier xi).
        let plan = BandPlan::adjacent(1, 3, 312_500.0, 5.18e9).unwrap();
        let freqs = plan.stacked_freqs_hz();
        let fs = plan.subcarrier_spacing_hz();
        let g_count = 4usize;
        let tau_max = 4.0 / fs;
        let dict = AutocorrDictionary::build(&freqs, g_count, tau_max).unwrap();
        let g = 0; // grid lag = tau_max / 4 = 1 / fs
        assert!((dict.grid_s()[g] * fs - 1.0).abs() < 1e-12);
        let want = 2.0 * (TAU * plan.carrier_freqs_hz()[0] * dict.grid_s()[g]).cos();
        for i in 0..freqs.len() {
            assert!((dict.matrix().get(i, 1 + g) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn grid_smaller_than_sample_count_is_rejected() {
        let plan = plan_small();
        let freqs = plan.stacked_freqs_hz();
        assert!(AutocorrDictionary::build(&freqs, freqs.len() - 1, 1e-7).is_err());
    }

    #[test]
    fn single_path_recovers_pure_zero_lag() {
        let plan = BandPlan::adjacent(2, 9, 312_500.0, 5.18e9).unwrap();
        let freqs = plan.stacked_freqs_hz();
        let gain = Complex64::new(0.6, -0.8);
        let channel = MultipathChannel::new(
            vec![PathComponent {
                delay_s: 33e-9,
                gain,
            }],
            1e-7,
        )
        .unwrap();
        let u = squared_magnitudes(&sample_cfr(&channel, &plan));
        let dict = AutocorrDictionary::build(&freqs, 3 * freqs.len(), 1e-7).unwrap();
        let sol = recover_autocorr(&u, &dict, 1e-4, &SolverConfig::default()).unwrap();
        let x0 = sol.coefficients[0];
        assert!((x0 - gain.norm_sqr()).abs() < 1e-2);
        for g in 0..dict.grid_points() {
            assert!(dict.lag_value(&sol.coefficients, g).norm() < 1e-3 * x0);
        }
    }

    #[test]
    fn two_path_on_grid_recovers_the_lag_coefficient() {
        let plan = BandPlan::adjacent(2, 9, 312_500.0, 5.18e9).unwrap();
        let freqs = plan.stacked_freqs_hz();
        let tau_max = 1e-7;
        let g_count = 3 * freqs.len();
        let step = tau_max / g_count as f64;
        let c0 = Complex64::new(0.9, 0.2);
        let c1 = Complex64::new(-0.3, 0.5);
        let (g0, g1) = (10usize, 31usize);
        let channel = MultipathChannel::new(
            vec![
                PathComponent {
                    delay_s: g0 as f64 * step,
                    gain: c0,
                },
                PathComponent {
                    delay_s: g1 as f64 * step,
                    gain: c1,
                },
            ],
            tau_max,
        )
        .unwrap();
        let u = squared_magnitudes(&sample_cfr(&channel, &plan));
        let dict = AutocorrDictionary::build(&freqs, g_count, tau_max).unwrap();
        let sol = recover_autocorr(&u, &dict, 1e-5, &SolverConfig::default()).unwrap();

        // Dominant positive lag must sit at g1 - g0 with coefficient c1 c0*.
        let lag_index = g1 - g0 - 1; // grid starts at one step
        let got = dict.lag_value(&sol.coefficients, lag_index);
        let want = c1 * c0.conj();
        assert!(
            (got - want).norm() < 0.05 * want.norm(),
            "got {got}, want {want}"
        );
        let best = (0..dict.grid_points())
            .max_by(|&a, &b| {
                dict.lag_value(&sol.coefficients, a)
                    .norm()
                    .total_cmp(&dict.lag_value(&sol.coefficients, b).norm())
            })
            .unwrap();
        assert_eq!(best, lag_index);
    }

    #[test]
    fn zero_magnitudes_give_zero_solution() {
        let plan = plan_small();
        let freqs = plan.stacked_freqs_hz();
        let dict = AutocorrDictionary::build(&freqs, freqs.len(), 1e-7).unwrap();
        let u = vec![0.0; freqs.len()];
        let sol = recover_autocorr(&u, &dict, 1e-6, &SolverConfig::default()).unwrap();
        assert!(sol.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn refine_support_errors_when_too_few_candidates() {
        let plan = plan_small();
        let freqs = plan.stacked_freqs_hz();
        let dict = AutocorrDictionary::build(&freqs, freqs.len(), 1e-7).unwrap();
        let coeffs = vec![0.0; 2 * dict.grid_points() + 1];
        match refine_support(&coeffs, &dict, 0.1, 1) {
            Err(Error::InsufficientSupport { found: 0, needed: 1 }) => {}
            other => panic!("expected insufficient support, got {other:?}"),
        }
    }

    #[test]
    fn refine_support_passes_exact_candidates_through() {
        let plan = plan_small();
        let freqs = plan.stacked_freqs_hz();
        let dict = AutocorrDictionary::build(&freqs, freqs.len(), 1e-7).unwrap();
        let gp = dict.grid_points();
        let mut coeffs = vec![0.0; 2 * gp + 1];
        coeffs[1 + 2] = 0.5; // re at grid 2
        coeffs[1 + gp + 6] = -0.4; // im at grid 6
        let refined = refine_support(&coeffs, &dict, 0.1, 2).unwrap();
        assert_eq!(refined.candidate_count, 2);
        assert!((refined.lags_s[0] - dict.grid_s()[2]).abs() < 1e-18);
        assert!((refined.lags_s[1] - dict.grid_s()[6]).abs() < 1e-18);
        assert!((refined.cluster_weights[0] - 0.5).abs() < 1e-12);
        assert!((refined.cluster_weights[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ls_coefficients_on_single_path_returns_power() {
        let plan = plan_small();
        let freqs = plan.stacked_freqs_hz();
        let dict = AutocorrDictionary::build(&freqs, freqs.len(), 1e-7).unwrap();
        let gain = Complex64::new(1.2, -0.5);
        let channel = MultipathChannel::new(
            vec![PathComponent {
                delay_s: 21e-9,
                gain,
            }],
            1e-7,
        )
        .unwrap();
        let u = squared_magnitudes(&sample_cfr(&channel, &plan));
        let est = ls_coefficients(&u, &[], &dict).unwrap();
        assert!((est.zero_lag - gain.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn ls_coefficients_exact_on_true_two_path_support() {
        let plan = BandPlan::adjacent(2, 9, 312_500.0, 5.18e9).unwrap();
        let freqs = plan.stacked_freqs_hz();
        let dict = AutocorrDictionary::build(&freqs, freqs.len(), 1e-7).unwrap();
        let c0 = Complex64::new(0.8, 0.0);
        let c1 = Complex64::new(0.2, 0.6);
        let (t0, t1) = (13e-9, 57e-9);
        let channel = MultipathChannel::new(
            vec![
                PathComponent { delay_s: t0, gain: c0 },
                PathComponent { delay_s: t1, gain: c1 },
            ],
            1e-7,
        )
        .unwrap();
        let u = squared_magnitudes(&sample_cfr(&channel, &plan));
        let est = ls_coefficients(&u, &[t1 - t0], &dict).unwrap();
        let want = c1 * c0.conj();
        assert!((est.coefficients[0] - want).norm() < 1e-6);
        assert!((est.zero_lag - (c0.norm_sqr() + c1.norm_sqr())).abs() < 1e-6);
        // Zero-lag dominance and real reconstruction.
        assert!(est.zero_lag >= est.coefficients[0].norm() - 1e-9);
        let spec = est.reconstruct_spectrum(&freqs);
        assert!(spec.iter().all(|v| v.im.abs() < 1e-8));
    }
}
