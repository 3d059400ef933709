//! l1-regularized least squares (BPDN) and dense least squares.
//!
//! `solve_bpdn` minimizes `0.5 * ||A x - y||^2 + reg * ||x||_1` with an
//! iterative shrinkage scheme: Barzilai-Borwein step sizes safeguarded by
//! monotone backtracking, the SpaRSA recipe. The iterate update is applied
//! as a sparse column combination so the only dense work per iteration is
//! one adjoint product.
//!
//! `solve_least_squares` is a Householder QR solve used to re-fit
//! coefficients on a fixed support.

use crate::error::{Error, Result};
use crate::linalg::{dot_conj, norm_sq, Mat, Scalar};

/// One BPDN instance. Rows of `dictionary` are measurements, columns are atoms.
pub struct BpdnProblem<'a, T> {
    pub dictionary: &'a Mat<T>,
    pub observation: &'a [T],
    pub regularizer: f64,
}

impl<'a, T: Scalar> BpdnProblem<'a, T> {
    pub fn new(dictionary: &'a Mat<T>, observation: &'a [T], regularizer: f64) -> Result<Self> {
        if dictionary.cols() == 0 {
            return Err(Error::InvalidProblem("dictionary has no columns".into()));
        }
        if observation.len() != dictionary.rows() {
            return Err(Error::DimensionMismatch(format!(
                "observation length {} vs dictionary rows {}",
                observation.len(),
                dictionary.rows()
            )));
        }
        if !(regularizer > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "regularizer must be positive, got {regularizer}"
            )));
        }
        if observation.iter().any(|v| !v.modulus().is_finite()) {
            return Err(Error::InvalidProblem("observation contains non-finite entries".into()));
        }
        Ok(BpdnProblem {
            dictionary,
            observation,
            regularizer,
        })
    }
}

/// Iteration limits and step-size safeguards for the shrinkage solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative objective-change tolerance.
    pub rel_tolerance: f64,
    /// Multiplier applied to the curvature estimate on each rejected step.
    pub step_growth: f64,
    /// Sufficient-decrease constant in the acceptance test.
    pub sufficient_decrease: f64,
    /// Clamp range for the Barzilai-Borwein curvature estimate.
    pub curvature_floor: f64,
    pub curvature_ceil: f64,
    /// Consecutive small-change iterations tolerated before giving up on the
    /// optimality certificate and returning `converged = false`.
    pub stall_patience: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 2000,
            rel_tolerance: 1e-6,
            step_growth: 2.0,
            sufficient_decrease: 1e-4,
            curvature_floor: 1e-20,
            curvature_ceil: 1e20,
            stall_patience: 10,
        }
    }
}

/// Solver output. `converged` is set only when the subgradient optimality
/// certificate holds, so a flagged result is never silently wrong.
#[derive(Debug, Clone)]
pub struct SparseSolution<T> {
    pub coefficients: Vec<T>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Complex-aware soft threshold: `v * max(1 - t/|v|, 0)`.
pub fn soft_threshold<T: Scalar>(v: T, t: f64) -> T {
    debug_assert!(t >= 0.0);
    let a = v.modulus();
    if a <= t {
        T::zero()
    } else {
        v.scale(1.0 - t / a)
    }
}

/// `||Aᴴ y||_inf`, the regularizer level above which the BPDN solution is zero.
pub fn adjoint_linf<T: Scalar>(a: &Mat<T>, y: &[T]) -> f64 {
    a.adjoint_vec(y).iter().map(|v| v.modulus()).fold(0.0, f64::max)
}

/// Relative tolerance of the optimality certificate checked at convergence:
/// nonzero coordinates must satisfy `|g_i + reg * sign(x_i)| <= KKT_REL * reg`,
/// zero coordinates `|g_i| <= reg * (1 + KKT_REL)`, with `g = Aᴴ(Ax - y)`.
pub const KKT_REL: f64 = 1e-4;

fn kkt_violation<T: Scalar>(x: &[T], grad: &[T], reg: f64) -> f64 {
    let mut worst = 0.0f64;
    for (&xi, &gi) in x.iter().zip(grad) {
        let v = if xi == T::zero() {
            (gi.modulus() - reg).max(0.0)
        } else {
            let sign = xi.scale(1.0 / xi.modulus());
            (gi + sign.scale(reg)).modulus()
        };
        worst = worst.max(v);
    }
    worst
}

pub fn solve_bpdn<T: Scalar>(problem: &BpdnProblem<'_, T>, config: &SolverConfig) -> SparseSolution<T> {
    solve_bpdn_warm(problem, config, None)
}

/// BPDN solve with an optional warm start.
pub fn solve_bpdn_warm<T: Scalar>(
    problem: &BpdnProblem<'_, T>,
    config: &SolverConfig,
    warm: Option<&[T]>,
) -> SparseSolution<T> {
    let a = problem.dictionary;
    let y = problem.observation;
    let reg = problem.regularizer;
    let n = a.cols();

    let mut x = match warm {
        Some(w) => {
            assert_eq!(w.len(), n, "warm start length mismatch");
            w.to_vec()
        }
        None => vec![T::zero(); n],
    };

    // Residual r = A x - y and its l1 bookkeeping.
    let mut residual: Vec<T> = a.matvec(&x);
    for (ri, &yi) in residual.iter_mut().zip(y) {
        *ri = *ri - yi;
    }
    let mut l1: f64 = x.iter().map(|v| v.modulus()).sum();
    let mut objective = 0.5 * norm_sq(&residual) + reg * l1;

    let mut grad = a.adjoint_vec(&residual);
    let mut grad_next: Vec<T> = Vec::new();

    // Initial curvature: the largest column energy bounds the per-coordinate
    // Lipschitz constant from below, which is enough for backtracking.
    let mut curvature = a
        .col_norms_sq()
        .into_iter()
        .fold(0.0f64, f64::max)
        .max(config.curvature_floor);

    let mut deltas: Vec<(usize, T)> = Vec::new();
    let mut trial_residual: Vec<T> = Vec::with_capacity(residual.len());
    let mut small_change_run = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    'outer: for iter in 0..config.max_iterations {
        iterations = iter + 1;
        let mut alpha = curvature.clamp(config.curvature_floor, config.curvature_ceil);

        // Backtrack until the monotone sufficient-decrease test accepts.
        let (new_objective, new_l1, dx_norm_sq) = loop {
            deltas.clear();
            let mut new_l1 = l1;
            let shrink = reg / alpha;
            for (j, &xj) in x.iter().enumerate() {
                let step = xj - grad[j].scale(1.0 / alpha);
                let xj_new = soft_threshold(step, shrink);
                if xj_new != xj {
                    deltas.push((j, xj_new - xj));
                    new_l1 += xj_new.modulus() - xj.modulus();
                }
            }
            if deltas.is_empty() {
                // Exact fixed point of the proximal map: optimal to machine level.
                converged = true;
                break 'outer;
            }

            trial_residual.clear();
            trial_residual.extend_from_slice(&residual);
            for &(j, d) in &deltas {
                a.add_scaled_col(j, d, &mut trial_residual);
            }
            let new_objective = 0.5 * norm_sq(&trial_residual) + reg * new_l1;
            let dx_norm_sq: f64 = deltas.iter().map(|&(_, d)| d.modulus_sq()).sum();

            if new_objective <= objective - 0.5 * config.sufficient_decrease * alpha * dx_norm_sq {
                break (new_objective, new_l1, dx_norm_sq);
            }
            alpha *= config.step_growth;
            if alpha > config.curvature_ceil {
                // No acceptable step: treat as a stall.
                break 'outer;
            }
        };

        // Accepted iterates are non-increasing in objective.
        debug_assert!(
            new_objective <= objective + 1e-9 * objective.abs().max(1.0),
            "objective increased on an accepted step"
        );

        for &(j, d) in &deltas {
            x[j] = x[j] + d;
        }
        std::mem::swap(&mut residual, &mut trial_residual);

        a.adjoint_vec_into(&residual, &mut grad_next);

        // BB curvature <dg, dx> / <dx, dx> = ||A dx||^2 / ||dx||^2 >= 0.
        let mut num = 0.0f64;
        for &(j, d) in &deltas {
            num += (d.conj() * (grad_next[j] - grad[j])).re();
        }
        curvature = if num > 0.0 && dx_norm_sq > 0.0 {
            num / dx_norm_sq
        } else {
            alpha
        };

        std::mem::swap(&mut grad, &mut grad_next);

        let rel_change = (objective - new_objective).abs() / objective.abs().max(f64::MIN_POSITIVE);
        objective = new_objective;
        l1 = new_l1;

        if rel_change < config.rel_tolerance {
            if kkt_violation(&x, &grad, reg) <= 0.9 * KKT_REL * reg {
                converged = true;
                break;
            }
            small_change_run += 1;
            if small_change_run >= config.stall_patience {
                break;
            }
        } else {
            small_change_run = 0;
        }
    }

    // Recompute the objective from scratch so it matches the returned x
    // exactly, independent of incremental residual drift.
    let mut final_residual = a.matvec(&x);
    for (ri, &yi) in final_residual.iter_mut().zip(y) {
        *ri = *ri - yi;
    }
    let objective = 0.5 * norm_sq(&final_residual) + reg * x.iter().map(|v| v.modulus()).sum::<f64>();

    SparseSolution {
        coefficients: x,
        objective,
        iterations,
        converged,
    }
}

/// Least-squares solve `argmin ||A x - y||_2` via Householder QR.
///
/// Fails when the triangular factor suggests a condition number beyond
/// `COND_LIMIT`, reporting the estimate.
pub const COND_LIMIT: f64 = 1e12;

pub fn solve_least_squares<T: Scalar>(a: &Mat<T>, y: &[T]) -> Result<Vec<T>> {
    let m = a.rows();
    let n = a.cols();
    if y.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "rhs length {} vs matrix rows {m}",
            y.len()
        )));
    }
    if n == 0 || m < n {
        return Err(Error::InvalidProblem(format!(
            "least-squares system must be square or tall, got {m}x{n}"
        )));
    }

    // Work on copies; the factorization overwrites in place.
    let mut r = a.clone();
    let mut rhs = y.to_vec();

    for j in 0..n {
        // Householder reflector for column j below the diagonal.
        let col_tail_norm_sq: f64 = (j..m).map(|i| r.get(i, j).modulus_sq()).sum();
        let norm = col_tail_norm_sq.sqrt();
        if norm == 0.0 {
            continue; // exactly zero column tail; diagonal stays 0 and trips the condition check
        }
        let x0 = r.get(j, j);
        let phase = if x0.modulus() > 0.0 {
            x0.scale(1.0 / x0.modulus())
        } else {
            T::one()
        };
        let alpha = -phase.scale(norm);
        // v = x - alpha e1, stored in a scratch vector over rows j..m.
        let mut v: Vec<T> = (j..m).map(|i| r.get(i, j)).collect();
        v[0] = v[0] - alpha;
        let v_norm_sq = norm_sq(&v);
        if v_norm_sq > 0.0 {
            let scale = 2.0 / v_norm_sq;
            for k in j..n {
                let mut proj = T::zero();
                for (vi, i) in v.iter().zip(j..m) {
                    proj = proj + vi.conj() * r.get(i, k);
                }
                proj = proj.scale(scale);
                for (vi, i) in v.iter().zip(j..m) {
                    let cur = r.get(i, k);
                    r.set(i, k, cur - *vi * proj);
                }
            }
            let mut proj = T::zero();
            for (vi, i) in v.iter().zip(j..m) {
                proj = proj + vi.conj() * rhs[i];
            }
            proj = proj.scale(scale);
            for (vi, i) in v.iter().zip(j..m) {
                rhs[i] = rhs[i] - *vi * proj;
            }
        }
        r.set(j, j, alpha);
        for i in j + 1..m {
            r.set(i, j, T::zero());
        }
    }

    let diag_mags: Vec<f64> = (0..n).map(|j| r.get(j, j).modulus()).collect();
    let max_diag = diag_mags.iter().fold(0.0f64, |a, &b| a.max(b));
    let min_diag = diag_mags.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let cond = if min_diag > 0.0 {
        max_diag / min_diag
    } else {
        f64::INFINITY
    };
    if !(cond < COND_LIMIT) {
        return Err(Error::RankDeficient { cond });
    }

    // Back substitution on the triangular factor.
    let mut x = vec![T::zero(); n];
    for j in (0..n).rev() {
        let mut acc = rhs[j];
        for k in j + 1..n {
            acc = acc - r.get(j, k) * x[k];
        }
        x[j] = acc.div(r.get(j, j));
    }
    Ok(x)
}
