//! Ordinary least squares with a single regressor.

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 0 when the response is constant.
    pub r2: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return domain(format!("ols: {} regressor values vs {} responses", x.len(), y.len()));
    }
    let distinct = x.iter().any(|&v| v != x[0]);
    if x.len() < 2 || !distinct {
        return domain("ols: need at least two distinct regressor values");
    }
    let n = x.len() as f64;
    let mean_y = y.iter().sum::<f64>() / n;
    let constant_y = y.iter().all(|&v| v == y[0]);
    if constant_y {
        return Ok(LinearFit {
            slope: 0.0,
            intercept: y[0],
            r2: 0.0,
        });
    }
    let mean_x = x.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mean_x, yi - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - (intercept + slope * xi);
            r * r
        })
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        r2: 1.0 - ss_res / syy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let fit = ols(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, 3.0, max_relative = 1e-14);
        assert_relative_eq!(fit.intercept, -1.0, max_relative = 1e-14);
        assert_relative_eq!(fit.r2, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn hand_computed_noisy_fit() {
        // x = 0..4, y = (1, 3, 2, 5): Sxx = 5, Sxy = 5.5, slope 1.1,
        // intercept 2.75 - 1.65 = 1.1, SS_tot = 8.75, SS_res = 2.7.
        let fit = ols(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_relative_eq!(fit.slope, 1.1, max_relative = 1e-14);
        assert_relative_eq!(fit.intercept, 1.1, max_relative = 1e-14);
        assert_relative_eq!(fit.r2, 1.0 - 2.7 / 8.75, max_relative = 1e-13);
    }

    #[test]
    fn constant_response() {
        let fit = ols(&[1.0, 2.0, 3.0, 4.0], &[0.7; 4]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r2, 0.0);
    }

    #[test]
    fn degenerate_regressor() {
        assert!(ols(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(ols(&[1.0], &[1.0]).is_err());
        assert!(ols(&[1.0, 2.0], &[1.0]).is_err());
    }
}
