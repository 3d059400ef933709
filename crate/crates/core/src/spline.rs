//! Natural cubic spline interpolation on scalar samples.

use crate::error::{Error, Result};

/// Natural cubic spline (zero second derivative at both ends) through
/// strictly increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second_derivs: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} knots vs {} values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 4 {
            return Err(Error::TooFewSplinePoints { found: xs.len() });
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProblem(
                "spline knots must be strictly increasing".into(),
            ));
        }
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();

        // Tridiagonal system for interior second derivatives, natural ends.
        let dim = n - 2;
        let mut diag = vec![0.0; dim];
        let mut off_lower = vec![0.0; dim];
        let mut off_upper = vec![0.0; dim];
        let mut rhs = vec![0.0; dim];
        for i in 0..dim {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            off_lower[i] = h[i];
            off_upper[i] = h[i + 1];
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        // Thomas sweep.
        for i in 1..dim {
            let w = off_lower[i] / diag[i - 1];
            diag[i] -= w * off_upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m_inner = vec![0.0; dim];
        if dim > 0 {
            m_inner[dim - 1] = rhs[dim - 1] / diag[dim - 1];
            for i in (0..dim - 1).rev() {
                m_inner[i] = (rhs[i] - off_upper[i] * m_inner[i + 1]) / diag[i];
            }
        }
        let mut second_derivs = vec![0.0; n];
        second_derivs[1..n - 1].copy_from_slice(&m_inner);

        Ok(NaturalCubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second_derivs,
        })
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.xs.len();
        // Clamp to the end segments for out-of-range arguments.
        let seg = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.xs[seg + 1] - self.xs[seg];
        let a = (self.xs[seg + 1] - x) / h;
        let b = (x - self.xs[seg]) / h;
        a * self.ys[seg]
            + b * self.ys[seg + 1]
            + ((a * a * a - a) * self.second_derivs[seg]
                + (b * b * b - b) * self.second_derivs[seg + 1])
                * h
                * h
                / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_constants_and_linear_data_exactly() {
        let xs: Vec<f64> = (-4..=4).filter(|&n| n != 0).map(|n| n as f64).collect();
        let constant: Vec<f64> = xs.iter().map(|_| 2.5).collect();
        let s = NaturalCubicSpline::fit(&xs, &constant).unwrap();
        assert!((s.evaluate(0.0) - 2.5).abs() < 1e-12);

        let linear: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = NaturalCubicSpline::fit(&xs, &linear).unwrap();
        assert!((s.evaluate(0.0) + 1.0).abs() < 1e-12);
        assert!((s.evaluate(1.5) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn interpolates_knots_exactly() {
        let xs = [0.0, 1.0, 2.5, 3.0, 4.2];
        let ys = [1.0, -2.0, 0.5, 3.0, 2.0];
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.evaluate(*x) - y).abs() < 1e-10);
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        let err = NaturalCubicSpline::fit(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::TooFewSplinePoints { found: 3 }));
    }
}
