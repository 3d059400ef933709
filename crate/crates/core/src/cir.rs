//! CIR reconstruction from the autocorrelation estimate.
//!
//! The positive lags are the pairwise differences of the delay set, so the
//! delay support is a turnpike-style placement problem: find delays whose
//! difference set reproduces the lags. Every delay (after shifting the first
//! to zero) is itself one of the lags, which keeps the search over lag
//! subsets; a depth-first search with backtracking replaces the fragile
//! greedy selection when lag estimates are noisy. Gain magnitudes follow from
//! the log-domain pair-product system, phases from dividing the first-column
//! pair coefficients by the leading magnitude.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which ambiguity branch a finalized estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Support is a pure shift of the truth.
    Shifted,
    /// Support is a conjugate-reflected shift of the truth.
    Reflected,
}

/// Recovered CIR. Before disambiguation the delays are anchored at zero and
/// the estimate is one representative of a shift/reflection equivalence
/// class; afterwards `tof_s` and `hypothesis` are set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CirEstimate {
    /// Ascending delays; `delays_s[0] == 0` until disambiguation.
    pub delays_s: Vec<f64>,
    /// Complex gains; `gains[0]` is real non-negative by convention.
    pub gains: Vec<Complex64>,
    pub tof_s: Option<f64>,
    pub hypothesis: Option<Hypothesis>,
}

impl CirEstimate {
    pub fn num_paths(&self) -> usize {
        self.delays_s.len()
    }

    /// The conjugate-reflected representative of the same autocorrelation:
    /// delays mirrored about the span, gains conjugated, order ascending.
    pub fn conjugate_reflected(&self) -> CirEstimate {
        let span = *self.delays_s.last().unwrap();
        let k = self.delays_s.len();
        let delays_s = (0..k).map(|i| span - self.delays_s[k - 1 - i]).collect();
        let gains = (0..k).map(|i| self.gains[k - 1 - i].conj()).collect();
        CirEstimate {
            delays_s,
            gains,
            tof_s: self.tof_s,
            hypothesis: self.hypothesis,
        }
    }

    /// Forward-computes the autocorrelation implied by this estimate:
    /// positive lags (sorted) with their coefficients, plus the zero-lag term.
    pub fn implied_autocorr(&self) -> (Vec<(f64, Complex64)>, f64) {
        let mut lags = Vec::new();
        let k = self.delays_s.len();
        for later in 0..k {
            for earlier in 0..later {
                lags.push((
                    self.delays_s[later] - self.delays_s[earlier],
                    self.gains[later] * self.gains[earlier].conj(),
                ));
            }
        }
        lags.sort_by(|a, b| a.0.total_cmp(&b.0));
        let zero_lag = self.gains.iter().map(|g| g.norm_sqr()).sum();
        (lags, zero_lag)
    }
}

/// Result of the delay-support search.
#[derive(Debug, Clone)]
pub struct SupportSearch {
    /// Ascending delays with minimum element zero.
    pub delays_s: Vec<f64>,
    /// Dead ends undone during the search; zero on clean data.
    pub backtracks: u64,
}

/// Finds `k` delays (anchored at zero) whose pairwise differences reproduce
/// the given positive lags within `eta` per element.
///
/// `weights` order the candidate lags largest-coefficient-first, which keeps
/// the clean-data behavior purely greedy; backtracking only engages when a
/// candidate fails the difference-subset test.
pub fn recover_support(
    lags_s: &[f64],
    weights: &[f64],
    k: usize,
    eta: f64,
) -> Result<SupportSearch> {
    let k_tilde = k * (k - 1) / 2;
    if lags_s.len() != k_tilde {
        return Err(Error::InvalidProblem(format!(
            "{} lags for {k} paths, expected {k_tilde}",
            lags_s.len()
        )));
    }
    if k == 1 {
        return Ok(SupportSearch {
            delays_s: vec![0.0],
            backtracks: 0,
        });
    }
    if k == 2 {
        return Ok(SupportSearch {
            delays_s: vec![0.0, lags_s[0]],
            backtracks: 0,
        });
    }
    assert_eq!(weights.len(), lags_s.len());

    // Candidate order: largest coefficient magnitude first, then by value for
    // determinism.
    let mut order: Vec<usize> = (0..lags_s.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .total_cmp(&weights[a])
            .then(lags_s[a].total_cmp(&lags_s[b]))
    });

    let mut used = vec![false; lags_s.len()];
    let mut placed: Vec<f64> = vec![0.0];
    let mut backtracks = 0u64;

    fn nearest_unused(lags: &[f64], used: &[bool], d: f64, eta: f64) -> Option<usize> {
        let mut best = None;
        let mut best_err = f64::INFINITY;
        for (i, &lag) in lags.iter().enumerate() {
            if used[i] {
                continue;
            }
            let err = (lag - d).abs();
            if err <= eta && err < best_err {
                best_err = err;
                best = Some(i);
            }
        }
        best
    }

    fn extend(
        lags: &[f64],
        order: &[usize],
        used: &mut [bool],
        placed: &mut Vec<f64>,
        k: usize,
        eta: f64,
        backtracks: &mut u64,
    ) -> bool {
        if placed.len() == k {
            return true;
        }
        for &ci in order {
            if used[ci] {
                continue;
            }
            let x = lags[ci];
            // The new point consumes its own lag (difference to zero) plus a
            // distinct unused lag for each previously placed nonzero point.
            used[ci] = true;
            let mut consumed = vec![ci];
            let mut ok = true;
            for &p in placed.iter().skip(1) {
                let d = (x - p).abs();
                match nearest_unused(lags, used, d, eta) {
                    Some(j) => {
                        used[j] = true;
                        consumed.push(j);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                placed.push(x);
                if extend(lags, order, used, placed, k, eta, backtracks) {
                    return true;
                }
                placed.pop();
            }
            *backtracks += 1;
            for j in consumed {
                used[j] = false;
            }
        }
        false
    }

    if !extend(lags_s, &order, &mut used, &mut placed, k, eta, &mut backtracks) {
        return Err(Error::NoConsistentPlacement);
    }
    placed.sort_by(f64::total_cmp);
    let min = placed[0];
    for d in &mut placed {
        *d -= min;
    }
    Ok(SupportSearch {
        delays_s: placed,
        backtracks,
    })
}

/// Map from delay-index pairs `(later, earlier)` to the lag coefficient of
/// their difference.
pub type PairMap = BTreeMap<(usize, usize), Complex64>;

/// Matches every delay pair to the unique lag within `eta`, bijectively.
pub fn match_lags_to_pairs(
    delays_s: &[f64],
    lags_s: &[f64],
    coefficients: &[Complex64],
    eta: f64,
) -> Result<PairMap> {
    assert_eq!(lags_s.len(), coefficients.len());
    let k = delays_s.len();
    let mut claimed = vec![false; lags_s.len()];
    let mut map = PairMap::new();
    for later in 0..k {
        for earlier in 0..later {
            let d = delays_s[later] - delays_s[earlier];
            let mut best = None;
            let mut best_err = f64::INFINITY;
            for (i, &lag) in lags_s.iter().enumerate() {
                let err = (lag - d).abs();
                if err <= eta && err < best_err {
                    best_err = err;
                    best = Some(i);
                }
            }
            let Some(i) = best else {
                return Err(Error::UnmatchedPair { later, earlier });
            };
            if claimed[i] {
                return Err(Error::LagCollision { lag_s: lags_s[i] });
            }
            claimed[i] = true;
            map.insert((later, earlier), coefficients[i]);
        }
    }
    Ok(map)
}

/// Relative floor below which a pair-product magnitude is considered
/// degenerate for the log-domain system.
const PAIR_MAGNITUDE_FLOOR: f64 = 1e-12;

/// Gain magnitudes from the pair products.
///
/// For `K > 2` the log-magnitude system over all pairs has the closed form
/// `log|c_k| = (row_k - beta / (2(K-1))) / (K-2)` with `row_k` the k-th row
/// sum of the log pair-product matrix and `beta` its total. `K = 2` uses the
/// zero-lag power jointly with the single pair product; `K = 1` is the square
/// root of the zero-lag power.
pub fn recover_magnitudes(pairs: &PairMap, zero_lag: f64, k: usize) -> Result<Vec<f64>> {
    if k == 1 {
        if zero_lag < -1e-9 {
            return Err(Error::NegativeZeroLag { value: zero_lag });
        }
        return Ok(vec![zero_lag.max(0.0).sqrt()]);
    }

    let scale = pairs.values().map(|c| c.norm()).fold(0.0f64, f64::max);
    let floor = PAIR_MAGNITUDE_FLOOR * scale.max(zero_lag.abs());
    for (&(later, earlier), coeff) in pairs {
        debug_assert!(later < k && earlier < later);
        if coeff.norm() <= floor {
            return Err(Error::DegeneratePairCoefficient {
                value: coeff.norm(),
            });
        }
    }

    if k == 2 {
        if zero_lag < -1e-9 {
            return Err(Error::NegativeZeroLag { value: zero_lag });
        }
        // |c0|^2 and |c1|^2 are the roots of t^2 - r0 t + |r1|^2; the larger
        // root is assigned to the leading gain. A wrong assignment equals the
        // conjugate-reflected solution, which the hypothesis test resolves.
        let r0 = zero_lag.max(0.0);
        let r1 = pairs[&(1, 0)].norm();
        let disc = (r0 * r0 - 4.0 * r1 * r1).max(0.0);
        let root = disc.sqrt();
        let big = 0.5 * (r0 + root);
        let small = 0.5 * (r0 - root);
        return Ok(vec![big.max(0.0).sqrt(), small.max(0.0).sqrt()]);
    }

    // K > 2: log-domain closed form.
    let mut row_sums = vec![0.0f64; k];
    let mut beta = 0.0f64;
    for (&(later, earlier), coeff) in pairs {
        let l = coeff.norm().ln();
        row_sums[later] += l;
        row_sums[earlier] += l;
        beta += 2.0 * l;
    }
    let correction = beta / (2.0 * (k as f64 - 1.0));
    Ok(row_sums
        .iter()
        .map(|row| ((row - correction) / (k as f64 - 2.0)).exp())
        .collect())
}

/// Assembles the pre-disambiguation estimate: leading gain real-positive,
/// remaining gains from the first-column pair products.
pub fn recover_phases(
    delays_s: &[f64],
    pairs: &PairMap,
    magnitudes: &[f64],
    k: usize,
) -> Result<CirEstimate> {
    assert_eq!(delays_s.len(), k);
    assert_eq!(magnitudes.len(), k);
    let lead = magnitudes[0];
    let scale = pairs.values().map(|c| c.norm()).fold(0.0f64, f64::max);
    if k > 1 && lead < 1e-12 * scale.max(1e-300) {
        return Err(Error::VanishingLeadGain { value: lead });
    }
    let mut gains = Vec::with_capacity(k);
    gains.push(Complex64::new(lead, 0.0));
    for later in 1..k {
        let coeff = pairs
            .get(&(later, 0))
            .ok_or(Error::UnmatchedPair { later, earlier: 0 })?;
        gains.push(coeff / lead);
    }
    Ok(CirEstimate {
        delays_s: delays_s.to_vec(),
        gains,
        tof_s: None,
        hypothesis: None,
    })
}
