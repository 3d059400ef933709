//! Frequency-domain channel model and measurement synthesis.
//!
//! A sparse multipath channel is sampled at the subcarrier frequencies of
//! `M` bands with `N` subcarriers each, then corrupted per band by a
//! time-offset phase ramp, a constant phase offset, and additive complex
//! Gaussian noise. Magnitudes are untouched by the phase distortions, which
//! is what the downstream retrieval pipeline relies on.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Frequency geometry: `M` bands of `N` subcarriers spaced `fs` apart.
///
/// Subcarrier indices run over `-(N-1)/2 ..= (N-1)/2`; the flat sample index
/// orders samples band-major with ascending subcarrier index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    num_bands: usize,
    subcarriers_per_band: usize,
    subcarrier_spacing_hz: f64,
    carrier_freqs_hz: Vec<f64>,
}

impl BandPlan {
    pub fn new(
        subcarriers_per_band: usize,
        subcarrier_spacing_hz: f64,
        carrier_freqs_hz: Vec<f64>,
    ) -> Result<Self> {
        if carrier_freqs_hz.is_empty() {
            return Err(Error::InvalidBandPlan("need at least one band".into()));
        }
        if subcarriers_per_band == 0 || subcarriers_per_band % 2 == 0 {
            return Err(Error::InvalidBandPlan(format!(
                "subcarrier count must be odd and positive, got {subcarriers_per_band}"
            )));
        }
        if !(subcarrier_spacing_hz > 0.0) {
            return Err(Error::InvalidBandPlan(format!(
                "subcarrier spacing must be positive, got {subcarrier_spacing_hz}"
            )));
        }
        if carrier_freqs_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidBandPlan(
                "carrier frequencies must be strictly increasing".into(),
            ));
        }
        Ok(BandPlan {
            num_bands: carrier_freqs_hz.len(),
            subcarriers_per_band,
            subcarrier_spacing_hz,
            carrier_freqs_hz,
        })
    }

    /// Seamlessly tiled bands: carrier `m` sits at `first + m * N * fs`.
    pub fn adjacent(
        num_bands: usize,
        subcarriers_per_band: usize,
        subcarrier_spacing_hz: f64,
        first_carrier_hz: f64,
    ) -> Result<Self> {
        let band_width = subcarriers_per_band as f64 * subcarrier_spacing_hz;
        let carriers = (0..num_bands)
            .map(|m| first_carrier_hz + m as f64 * band_width)
            .collect();
        BandPlan::new(subcarriers_per_band, subcarrier_spacing_hz, carriers)
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn subcarriers_per_band(&self) -> usize {
        self.subcarriers_per_band
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_hz
    }

    pub fn carrier_freqs_hz(&self) -> &[f64] {
        &self.carrier_freqs_hz
    }

    /// `(N - 1) / 2`, the largest subcarrier index magnitude.
    pub fn half_span(&self) -> i64 {
        (self.subcarriers_per_band as i64 - 1) / 2
    }

    pub fn total_samples(&self) -> usize {
        self.num_bands * self.subcarriers_per_band
    }

    /// Frequency of subcarrier `n` (signed index) in band `m`.
    pub fn freq_hz(&self, band: usize, n: i64) -> f64 {
        debug_assert!(n.abs() <= self.half_span());
        self.carrier_freqs_hz[band] + n as f64 * self.subcarrier_spacing_hz
    }

    /// Flat sample index of `(band, signed subcarrier index)`.
    pub fn flat_index(&self, band: usize, n: i64) -> usize {
        band * self.subcarriers_per_band + (n + self.half_span()) as usize
    }

    /// Inverse of [`BandPlan::flat_index`].
    pub fn band_and_subcarrier(&self, flat: usize) -> (usize, i64) {
        let band = flat / self.subcarriers_per_band;
        let local = (flat % self.subcarriers_per_band) as i64;
        (band, local - self.half_span())
    }

    /// All `M * N` sample frequencies in flat order.
    pub fn stacked_freqs_hz(&self) -> Vec<f64> {
        let mut freqs = Vec::with_capacity(self.total_samples());
        for m in 0..self.num_bands {
            for n in -self.half_span()..=self.half_span() {
                freqs.push(self.freq_hz(m, n));
            }
        }
        freqs
    }

    /// Local position of the zero subcarrier within a band vector.
    pub fn zero_subcarrier_local(&self) -> usize {
        self.half_span() as usize
    }
}

/// One propagation path: delay and complex gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub delay_s: f64,
    pub gain: Complex64,
}

/// Ground-truth sparse channel impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathChannel {
    pub paths: Vec<PathComponent>,
    pub tau_max_s: f64,
}

impl MultipathChannel {
    pub fn new(paths: Vec<PathComponent>, tau_max_s: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidChannel("need at least one path".into()));
        }
        if paths
            .iter()
            .any(|p| !(p.delay_s >= 0.0 && p.delay_s <= tau_max_s))
        {
            return Err(Error::InvalidChannel(format!(
                "delays must lie in [0, {tau_max_s:e}]"
            )));
        }
        if paths.windows(2).any(|w| !(w[1].delay_s > w[0].delay_s)) {
            return Err(Error::InvalidChannel(
                "delays must be strictly increasing".into(),
            ));
        }
        let channel = MultipathChannel { paths, tau_max_s };
        let diffs = channel.positive_differences();
        for i in 0..diffs.len() {
            for j in i + 1..diffs.len() {
                if diffs[i] == diffs[j] {
                    return Err(Error::InvalidChannel(format!(
                        "collision in the delay difference set at {:e} s",
                        diffs[i]
                    )));
                }
            }
        }
        Ok(channel)
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.delay_s).collect()
    }

    pub fn gains(&self) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.gain).collect()
    }

    /// Time of flight: the first-path delay.
    pub fn tof_s(&self) -> f64 {
        self.paths[0].delay_s
    }

    /// All positive pairwise delay differences `|tau_k - tau_l|`, unsorted.
    pub fn positive_differences(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.paths.len() {
            for j in i + 1..self.paths.len() {
                out.push((self.paths[j].delay_s - self.paths[i].delay_s).abs());
            }
        }
        out
    }
}

/// Per-band distortion state: time offsets (phase ramps), constant phase
/// offsets, a power gain (fixed to 1 in this model), and the noise variance
/// per complex sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionParams {
    pub time_offsets_s: Vec<f64>,
    pub phase_offsets_rad: Vec<f64>,
    pub power_gain: f64,
    pub noise_variance: f64,
}

impl DistortionParams {
    pub fn new(
        time_offsets_s: Vec<f64>,
        phase_offsets_rad: Vec<f64>,
        noise_variance: f64,
    ) -> Result<Self> {
        if time_offsets_s.len() != phase_offsets_rad.len() {
            return Err(Error::InvalidDistortions(
                "offset vectors must have one entry per band".into(),
            ));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidDistortions(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        Ok(DistortionParams {
            time_offsets_s,
            phase_offsets_rad,
            power_gain: 1.0,
            noise_variance,
        })
    }

    /// Checks the effective-CIR containment condition
    /// `tau_max + max(delta) < 1/fs` against a plan.
    pub fn validate_against(&self, plan: &BandPlan, tau_max_s: f64) -> Result<()> {
        if self.time_offsets_s.len() != plan.num_bands() {
            return Err(Error::InvalidDistortions(format!(
                "{} per-band offsets for a {}-band plan",
                self.time_offsets_s.len(),
                plan.num_bands()
            )));
        }
        let max_delta = self.time_offsets_s.iter().cloned().fold(0.0f64, f64::max);
        let symbol = 1.0 / plan.subcarrier_spacing_hz();
        if !(tau_max_s + max_delta < symbol) {
            return Err(Error::InvalidDistortions(format!(
                "effective delay span {:e} s exceeds the symbol period {:e} s",
                tau_max_s + max_delta,
                symbol
            )));
        }
        Ok(())
    }

    /// Parameters of the opposite link end: same phase-offset magnitudes with
    /// opposite signs, independently drawn time offsets.
    pub fn reciprocal(&self, time_offsets_s: Vec<f64>) -> Result<Self> {
        let mut params = DistortionParams::new(
            time_offsets_s,
            self.phase_offsets_rad.iter().map(|p| -p).collect(),
            self.noise_variance,
        )?;
        params.power_gain = self.power_gain;
        Ok(params)
    }
}

/// Per-band observation: `N` slots with the unobserved entries zeroed and the
/// observed index set listed explicitly (local indices, sorted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandObservation {
    pub values: Vec<Complex64>,
    pub observed: Vec<usize>,
}

impl BandObservation {
    pub fn observed_values(&self) -> Vec<Complex64> {
        self.observed.iter().map(|&j| self.values[j]).collect()
    }
}

/// One synthesized CSI snapshot across all bands, plus the reciprocal
/// zero-subcarrier product vector once the exchange has happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiSnapshot {
    pub bands: Vec<BandObservation>,
    /// Elementwise product of the two ends' zero-subcarrier estimates.
    pub reciprocal: Option<Vec<Complex64>>,
    pub snr_db: Option<f64>,
}

/// Channel frequency response samples at every `(m, n)` in flat order.
pub fn sample_cfr(channel: &MultipathChannel, plan: &BandPlan) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(plan.total_samples());
    for m in 0..plan.num_bands() {
        for n in -plan.half_span()..=plan.half_span() {
            let f = plan.freq_hz(m, n);
            let mut acc = Complex64::new(0.0, 0.0);
            for p in &channel.paths {
                acc += p.gain * Complex64::from_polar(1.0, -TAU * f * p.delay_s);
            }
            out.push(acc);
        }
    }
    out
}

/// Distorted CFR without noise, all `M * N` entries (zero subcarrier included).
pub fn distorted_clean(
    cfr: &[Complex64],
    params: &DistortionParams,
    plan: &BandPlan,
) -> Vec<Complex64> {
    assert_eq!(cfr.len(), plan.total_samples());
    let fs = plan.subcarrier_spacing_hz();
    let mut out = Vec::with_capacity(cfr.len());
    for m in 0..plan.num_bands() {
        let delta = params.time_offsets_s[m];
        let psi = params.phase_offsets_rad[m];
        for n in -plan.half_span()..=plan.half_span() {
            let phi = TAU * n as f64 * fs * delta + psi;
            let v = cfr[plan.flat_index(m, n)] * Complex64::from_polar(params.power_gain, -phi);
            out.push(v);
        }
    }
    out
}

fn complex_noise(rng: &mut impl Rng, variance: f64) -> Complex64 {
    if variance == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * sd, im * sd)
}

/// Applies the per-band phase distortions and additive noise to CFR samples.
///
/// The zero subcarrier of each band is flagged missing in the output; noise
/// is drawn only for observed entries, in band-major subcarrier-ascending
/// order, so equal seeds give bit-identical snapshots.
pub fn apply_distortions(
    cfr: &[Complex64],
    params: &DistortionParams,
    plan: &BandPlan,
    rng: &mut impl Rng,
) -> CsiSnapshot {
    let clean = distorted_clean(cfr, params, plan);
    let n_local = plan.subcarriers_per_band();
    let zero_local = plan.zero_subcarrier_local();
    let mut bands = Vec::with_capacity(plan.num_bands());
    for m in 0..plan.num_bands() {
        let mut values = vec![Complex64::new(0.0, 0.0); n_local];
        let mut observed = Vec::with_capacity(n_local - 1);
        for j in 0..n_local {
            if j == zero_local {
                continue;
            }
            values[j] = clean[m * n_local + j] + complex_noise(rng, params.noise_variance);
            observed.push(j);
        }
        bands.push(BandObservation { values, observed });
    }
    CsiSnapshot {
        bands,
        reciprocal: None,
        snr_db: None,
    }
}

/// Noisy zero-subcarrier CSI as seen by the two link ends.
///
/// Expects `params_tx` and `params_rx` to carry opposite-signed phase
/// offsets; the channel term is identical on both ends by reciprocity.
/// Returns `(tx, rx)` vectors of length `M`.
pub fn make_reciprocal_pair(
    channel: &MultipathChannel,
    plan: &BandPlan,
    params_tx: &DistortionParams,
    params_rx: &DistortionParams,
    rng: &mut impl Rng,
) -> (Vec<Complex64>, Vec<Complex64>) {
    debug_assert!(params_tx
        .phase_offsets_rad
        .iter()
        .zip(&params_rx.phase_offsets_rad)
        .all(|(a, b)| (a + b).abs() < 1e-12));
    let mut tx = Vec::with_capacity(plan.num_bands());
    let mut rx = Vec::with_capacity(plan.num_bands());
    for m in 0..plan.num_bands() {
        let f = plan.freq_hz(m, 0);
        let mut h0 = Complex64::new(0.0, 0.0);
        for p in &channel.paths {
            h0 += p.gain * Complex64::from_polar(1.0, -TAU * f * p.delay_s);
        }
        tx.push(
            h0 * Complex64::from_polar(1.0, -params_tx.phase_offsets_rad[m])
                + complex_noise(rng, params_tx.noise_variance),
        );
        rx.push(
            h0 * Complex64::from_polar(1.0, -params_rx.phase_offsets_rad[m])
                + complex_noise(rng, params_rx.noise_variance),
        );
    }
    (tx, rx)
}

/// Maximum attempts before channel generation reports failure.
const MAX_DRAW_ATTEMPTS: usize = 1000;

/// Draws a random channel: delays i.i.d. uniform on `(0, tau_max]`, resampled
/// until every pairwise delay difference is separated from zero and from the
/// other differences by at least `min_diff_gap_s`; gains complex Gaussian
/// with an exponential power-delay profile, normalized to unit total power.
pub fn draw_channel(
    rng: &mut impl Rng,
    num_paths: usize,
    tau_max_s: f64,
    decay_constant_s: f64,
    min_diff_gap_s: f64,
) -> Result<MultipathChannel> {
    if num_paths == 0 || !(tau_max_s > 0.0) {
        return Err(Error::InvalidChannel(format!(
            "need num_paths >= 1 and tau_max > 0, got {num_paths} and {tau_max_s}"
        )));
    }
    'attempt: for _ in 0..MAX_DRAW_ATTEMPTS {
        let mut delays: Vec<f64> = (0..num_paths)
            .map(|_| tau_max_s * (1.0 - rng.gen::<f64>()))
            .collect();
        delays.sort_by(f64::total_cmp);

        // Differences must be distinct and resolvable on the recovery grid.
        let mut diffs = Vec::with_capacity(num_paths * (num_paths - 1) / 2);
        for i in 0..num_paths {
            for j in i + 1..num_paths {
                diffs.push(delays[j] - delays[i]);
            }
        }
        diffs.sort_by(f64::total_cmp);
        if diffs.first().is_some_and(|&d| d <= min_diff_gap_s) {
            continue 'attempt;
        }
        if diffs.windows(2).any(|w| w[1] - w[0] <= min_diff_gap_s) {
            continue 'attempt;
        }

        let mut gains = Vec::with_capacity(num_paths);
        for &delay in &delays {
            let var = (-delay / decay_constant_s).exp();
            gains.push(complex_noise(rng, var));
        }
        let total: f64 = gains.iter().map(|g| g.norm_sqr()).sum();
        if !(total > 0.0) {
            continue 'attempt;
        }
        let scale = total.sqrt().recip();
        let paths = delays
            .into_iter()
            .zip(gains)
            .map(|(delay_s, gain)| PathComponent {
                delay_s,
                gain: gain * scale,
            })
            .collect();
        return MultipathChannel::new(paths, tau_max_s);
    }
    Err(Error::ChannelGeneration {
        attempts: MAX_DRAW_ATTEMPTS,
        min_gap_s: min_diff_gap_s,
        paths: num_paths,
        tau_max_s,
    })
}

/// Draws per-band distortions: time offsets uniform on `[0, delta_max]`,
/// phase offsets uniform on `[0, 2*pi)`, independent across bands.
pub fn draw_distortions(
    rng: &mut impl Rng,
    plan: &BandPlan,
    noise_variance: f64,
    delta_max_s: f64,
    tau_max_s: f64,
) -> Result<DistortionParams> {
    if !(delta_max_s >= 0.0) {
        return Err(Error::InvalidDistortions(format!(
            "delta_max must be non-negative, got {delta_max_s}"
        )));
    }
    if !(tau_max_s + delta_max_s < 1.0 / plan.subcarrier_spacing_hz()) {
        return Err(Error::InvalidDistortions(format!(
            "tau_max + delta_max = {:e} s does not fit inside the symbol period {:e} s",
            tau_max_s + delta_max_s,
            1.0 / plan.subcarrier_spacing_hz()
        )));
    }
    let time_offsets_s: Vec<f64> = (0..plan.num_bands())
        .map(|_| delta_max_s * rng.gen::<f64>())
        .collect();
    let phase_offsets_rad: Vec<f64> = (0..plan.num_bands())
        .map(|_| TAU * rng.gen::<f64>())
        .collect();
    DistortionParams::new(time_offsets_s, phase_offsets_rad, noise_variance)
}

/// Noise variance realizing a target mean per-sample SNR for the given CFR.
pub fn noise_variance_for_snr(cfr: &[Complex64], snr_db: f64) -> f64 {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return 0.0;
    }
    let mean_power: f64 = cfr.iter().map(|v| v.norm_sqr()).sum::<f64>() / cfr.len() as f64;
    mean_power / 10f64.powf(snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_plan() -> BandPlan {
        BandPlan::adjacent(2, 3, 312_500.0, 5.18e9).unwrap()
    }

    #[test]
    fn plan_rejects_even_subcarrier_count_and_bad_carriers() {
        assert!(BandPlan::adjacent(2, 4, 312_500.0, 5.18e9).is_err());
        assert!(BandPlan::new(3, 312_500.0, vec![5.18e9, 5.18e9]).is_err());
        assert!(BandPlan::new(3, 0.0, vec![5.18e9]).is_err());
    }

    #[test]
    fn flat_index_is_band_major_and_invertible() {
        let plan = small_plan();
        // M=2, N=3: flat 4 is band 1, local slot 1, i.e. subcarrier 0.
        assert_eq!(plan.band_and_subcarrier(4), (1, 0));
        for flat in 0..plan.total_samples() {
            let (m, n) = plan.band_and_subcarrier(flat);
            assert_eq!(plan.flat_index(m, n), flat);
        }
        assert_eq!(plan.stacked_freqs_hz().len(), plan.total_samples());
    }

    #[test]
    fn cfr_of_zero_delay_unit_gain_path_is_all_ones() {
        let plan = small_plan();
        let channel = MultipathChannel::new(
            vec![PathComponent {
                delay_s: 0.0,
                gain: Complex64::new(1.0, 0.0),
            }],
            1e-7,
        )
        .unwrap();
        for v in sample_cfr(&channel, &plan) {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn single_path_cfr_has_constant_magnitude() {
        let plan = small_plan();
        let gain = Complex64::new(0.3, -0.4);
        let channel = MultipathChannel::new(
            vec![PathComponent {
                delay_s: 37.5e-9,
                gain,
            }],
            1e-7,
        )
        .unwrap();
        for v in sample_cfr(&channel, &plan) {
            assert!((v.norm() - gain.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_path_cfr_matches_direct_term_sum() {
        // 1 band, 3 subcarriers; oracle evaluates the sum with independent
        // real/imaginary accumulation.
        let plan = BandPlan::adjacent(1, 3, 312_500.0, 5.18e9).unwrap();
        let paths = vec![
            PathComponent {
                delay_s: 20e-9,
                gain: Complex64::new(0.8, 0.1),
            },
            PathComponent {
                delay_s: 55e-9,
                gain: Complex64::new(-0.2, 0.5),
            },
        ];
        let channel = MultipathChannel::new(paths.clone(), 1e-7).unwrap();
        let got = sample_cfr(&channel, &plan);
        for n in -1i64..=1 {
            let f = 5.18e9 + n as f64 * 312_500.0;
            let mut re = 0.0;
            let mut im = 0.0;
            for p in &paths {
                let theta = -TAU * f * p.delay_s;
                re += p.gain.re * theta.cos() - p.gain.im * theta.sin();
                im += p.gain.re * theta.sin() + p.gain.im * theta.cos();
            }
            let v = got[plan.flat_index(0, n)];
            assert!((v.re - re).abs() < 1e-10 && (v.im - im).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_subcarrier_distortion_reduces_to_the_constant_offset() {
        let plan = small_plan();
        let channel = MultipathChannel::new(
            vec![PathComponent {
                delay_s: 42e-9,
                gain: Complex64::new(0.9, -0.3),
            }],
            1e-7,
        )
        .unwrap();
        let cfr = sample_cfr(&channel, &plan);
        let params =
            DistortionParams::new(vec![3e-7, 1e-7], vec![0.7, -1.2], 0.0).unwrap();
        let clean = distorted_clean(&cfr, &params, &plan);
        for m in 0..plan.num_bands() {
            let want = cfr[plan.flat_index(m, 0)]
                * Complex64::from_polar(1.0, -params.phase_offsets_rad[m]);
            assert!((clean[plan.flat_index(m, 0)] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn noiseless_distortions_preserve_magnitudes_and_identity_case() {
        let plan = small_plan();
        let channel = MultipathChannel::new(
            vec![
                PathComponent {
                    delay_s: 10e-9,
                    gain: Complex64::new(1.0, 0.2),
                },
                PathComponent {
                    delay_s: 63e-9,
                    gain: Complex64::new(0.1, -0.4),
                },
            ],
            1e-7,
        )
        .unwrap();
        let cfr = sample_cfr(&channel, &plan);
        let params =
            DistortionParams::new(vec![2.2e-7, 0.4e-7], vec![1.1, 5.9], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let snap = apply_distortions(&cfr, &params, &plan, &mut rng);
        for (m, band) in snap.bands.iter().enumerate() {
            for &j in &band.observed {
                let n = j as i64 - plan.half_span();
                let flat = plan.flat_index(m, n);
                assert!((band.values[j].norm() - cfr[flat].norm()).abs() < 1e-12);
            }
        }

        let identity = DistortionParams::new(vec![0.0, 0.0], vec![0.0, 0.0], 0.0).unwrap();
        let snap = apply_distortions(&cfr, &identity, &plan, &mut rng);
        for (m, band) in snap.bands.iter().enumerate() {
            for &j in &band.observed {
                let n = j as i64 - plan.half_span();
                assert_eq!(band.values[j], cfr[plan.flat_index(m, n)]);
            }
        }
    }

    #[test]
    fn reciprocal_pair_has_conjugate_phases_and_squared_product() {
        // Single zero-delay unit path makes the channel term exactly 1.
        let plan = small_plan();
        let channel = MultipathChannel::new(
            vec![PathComponent {
                delay_s: 0.0,
                gain: Complex64::new(1.0, 0.0),
            }],
            1e-7,
        )
        .unwrap();
        let psi = std::f64::consts::FRAC_PI_3;
        let params_rx = DistortionParams::new(vec![0.0, 0.0], vec![psi, psi], 0.0).unwrap();
        let params_tx = params_rx.reciprocal(vec![0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (tx, rx) = make_reciprocal_pair(&channel, &plan, &params_tx, &params_rx, &mut rng);
        for m in 0..plan.num_bands() {
            assert!((tx[m] - Complex64::from_polar(1.0, psi)).norm() < 1e-12);
            assert!((rx[m] - Complex64::from_polar(1.0, -psi)).norm() < 1e-12);
            assert!((tx[m].norm() - rx[m].norm()).abs() < 1e-12);
            assert!((tx[m] * rx[m] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn reciprocal_product_equals_squared_channel_term_for_multipath() {
        let plan = small_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let channel = draw_channel(&mut rng, 3, 8e-8, 4e-8, 1e-10).unwrap();
        let params_rx = draw_distortions(&mut rng, &plan, 0.0, 2e-7, 8e-8).unwrap();
        let params_tx = params_rx.reciprocal(vec![1e-7, 5e-8]).unwrap();
        let (tx, rx) = make_reciprocal_pair(&channel, &plan, &params_tx, &params_rx, &mut rng);
        for m in 0..plan.num_bands() {
            let f = plan.freq_hz(m, 0);
            let mut h0 = Complex64::new(0.0, 0.0);
            for p in &channel.paths {
                h0 += p.gain * Complex64::from_polar(1.0, -TAU * f * p.delay_s);
            }
            assert!((tx[m] * rx[m] - h0 * h0).norm() < 1e-12);
        }
    }

    #[test]
    fn drawn_channels_have_distinct_separated_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c1 = draw_channel(&mut rng, 1, 1e-7, 5e-8, 1e-10).unwrap();
        assert_eq!(c1.num_paths(), 1);
        assert!(c1.positive_differences().is_empty());

        let c3 = draw_channel(&mut rng, 3, 1e-7, 5e-8, 1e-10).unwrap();
        let diffs = c3.positive_differences();
        assert_eq!(diffs.len(), 3);
        for i in 0..diffs.len() {
            assert!(diffs[i] > 0.0);
            for j in i + 1..diffs.len() {
                assert!((diffs[i] - diffs[j]).abs() > 1e-10);
            }
        }
        let power: f64 = c3.paths.iter().map(|p| p.gain.norm_sqr()).sum();
        assert!((power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_decay_gives_equal_gain_power_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 4000;
        let k = 3;
        let mut power = vec![0.0f64; k];
        for _ in 0..trials {
            let c = draw_channel(&mut rng, k, 1e-7, f64::INFINITY, 0.0).unwrap();
            for (i, p) in c.paths.iter().enumerate() {
                power[i] += p.gain.norm_sqr();
            }
        }
        for p in &power {
            let mean = p / trials as f64;
            assert!(
                (mean - 1.0 / k as f64).abs() < 0.02,
                "mean normalized power {mean}"
            );
        }
    }

    #[test]
    fn impossible_separation_reports_generation_failure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Three paths with pairwise-difference gaps of 0.5*tau_max cannot fit.
        let err = draw_channel(&mut rng, 3, 1e-7, 5e-8, 5e-8).unwrap_err();
        assert!(matches!(err, Error::ChannelGeneration { .. }));
    }

    #[test]
    fn distortion_draw_edge_cases() {
        let plan = small_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zero_delta = draw_distortions(&mut rng, &plan, 0.1, 0.0, 1e-7).unwrap();
        assert!(zero_delta.time_offsets_s.iter().all(|&d| d == 0.0));

        let a = draw_distortions(&mut ChaCha8Rng::seed_from_u64(1), &plan, 0.0, 1e-7, 1e-7)
            .unwrap();
        let b = draw_distortions(&mut ChaCha8Rng::seed_from_u64(2), &plan, 0.0, 1e-7, 1e-7)
            .unwrap();
        assert_ne!(a.phase_offsets_rad, b.phase_offsets_rad);

        // delta_max breaking the containment invariant is rejected.
        let symbol = 1.0 / plan.subcarrier_spacing_hz();
        assert!(draw_distortions(&mut rng, &plan, 0.0, symbol, 1e-7).is_err());
    }

    #[test]
    fn empirical_snr_matches_configuration_within_half_db() {
        let plan = BandPlan::adjacent(16, 33, 312_500.0, 5.18e9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let channel = draw_channel(&mut rng, 3, 1e-7, 5e-8, 1e-11).unwrap();
        let cfr = sample_cfr(&channel, &plan);
        let snr_db = 15.0;
        let var = noise_variance_for_snr(&cfr, snr_db);
        let params = draw_distortions(&mut rng, &plan, var, 2e-7, 1e-7).unwrap();

        // >= 1e4 noisy samples: 16*33 minus zero subcarriers is 512 per
        // snapshot, so 30 snapshots give 15360.
        let clean = distorted_clean(&cfr, &params, &plan);
        let mut noise_power = 0.0;
        let mut signal_power = 0.0;
        let mut count = 0usize;
        for _ in 0..30 {
            let snap = apply_distortions(&cfr, &params, &plan, &mut rng);
            for (m, band) in snap.bands.iter().enumerate() {
                for &j in &band.observed {
                    let flat = m * plan.subcarriers_per_band() + j;
                    noise_power += (band.values[j] - clean[flat]).norm_sqr();
                    signal_power += cfr[flat].norm_sqr();
                    count += 1;
                }
            }
        }
        assert!(count >= 10_000);
        let snr_emp = 10.0 * (signal_power / noise_power).log10();
        assert!(
            (snr_emp - snr_db).abs() < 0.5,
            "empirical {snr_emp} dB vs configured {snr_db} dB"
        );
    }

    #[test]
    fn identical_seeds_give_bit_identical_snapshots() {
        let plan = small_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let channel = draw_channel(&mut rng, 2, 1e-7, 5e-8, 1e-10).unwrap();
        let cfr = sample_cfr(&channel, &plan);
        let params = DistortionParams::new(vec![1e-7, 2e-7], vec![0.3, 4.4], 0.05).unwrap();
        let snap1 = apply_distortions(&cfr, &params, &plan, &mut ChaCha8Rng::seed_from_u64(42));
        let snap2 = apply_distortions(&cfr, &params, &plan, &mut ChaCha8Rng::seed_from_u64(42));
        for (b1, b2) in snap1.bands.iter().zip(&snap2.bands) {
            for (v1, v2) in b1.values.iter().zip(&b2.values) {
                assert_eq!(v1.re.to_bits(), v2.re.to_bits());
                assert_eq!(v1.im.to_bits(), v2.im.to_bits());
            }
        }
    }
}
