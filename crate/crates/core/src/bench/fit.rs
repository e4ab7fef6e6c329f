use serde::{Deserialize, Serialize};

use crate::error::{Result, VslqError};

/// Least-squares fit of `p(T) = a/T + b/T²` (T in µs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// `(T1P, p)` pairs.
    pub points: Vec<(f64, f64)>,
    pub a: f64,
    pub b: f64,
    pub residuals: Vec<f64>,
    pub residual_rms: f64,
}

impl SweepReport {
    pub fn predict(&self, t: f64) -> f64 {
        self.a / t + self.b / (t * t)
    }
}

/// Fits `p = a/T + b/T²` with `a, b ≥ 0` (nonnegative least squares on two
/// columns: the unconstrained solution, else the better single-term fit).
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<SweepReport> {
    if points.len() < 3 {
        return Err(VslqError::FitFailed(format!("need at least 3 grid points, got {}", points.len())));
    }
    if points.iter().any(|(t, p)| !(*t > 0.0) || !p.is_finite()) {
        return Err(VslqError::FitFailed("grid points must have T > 0 and finite p".into()));
    }
    let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, p) in points {
        let (u, v) = (1.0 / t, 1.0 / (t * t));
        s11 += u * u;
        s12 += u * v;
        s22 += v * v;
        y1 += u * p;
        y2 += v * p;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 1e-12 * s11 * s22) {
        return Err(VslqError::FitFailed("degenerate grid (need distinct T values)".into()));
    }
    let sse = |a: f64, b: f64| points.iter().map(|&(t, p)| (p - a / t - b / (t * t)).powi(2)).sum::<f64>();
    let (a, b) = {
        let a = (y1 * s22 - y2 * s12) / det;
        let b = (s11 * y2 - s12 * y1) / det;
        if a >= 0.0 && b >= 0.0 {
            (a, b)
        } else {
            let only_a = ((y1 / s11).max(0.0), 0.0);
            let only_b = (0.0, (y2 / s22).max(0.0));
            if sse(only_a.0, only_a.1) <= sse(only_b.0, only_b.1) {
                only_a
            } else {
                only_b
            }
        }
    };
    let residuals: Vec<f64> = points.iter().map(|&(t, p)| p - a / t - b / (t * t)).collect();
    let residual_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    Ok(SweepReport { points: points.to_vec(), a, b, residuals, residual_rms })
}

/// Ordinary least-squares line `y = slope·t + intercept`.
pub fn fit_line(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|x| (x - mt).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(x, v)| (x - mt) * (v - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mt)
}

/// `y ≈ A·exp(−t/τ)` by linear regression of `ln y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub amplitude: f64,
    /// Decay time, same unit as the input times.
    pub tau: f64,
    /// Coefficient of determination of the fit to `y` itself.
    pub r2: f64,
}

/// Fits a decaying exponential; rejects non-positive samples and `R² < 0.9`.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Result<ExpFit> {
    if t.len() != y.len() || t.len() < 3 {
        return Err(VslqError::FitFailed("need at least 3 samples".into()));
    }
    if let Some(v) = y.iter().find(|v| !(**v > 0.0)) {
        return Err(VslqError::FitFailed(format!("non-positive sample {v} in decay curve {y:?}")));
    }
    let n = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = fit_line(t, &ly);
    let amplitude = intercept.exp();
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = t.iter().zip(y).map(|(x, v)| (v - amplitude * (slope * x).exp()).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let tau = if slope < 0.0 { -1.0 / slope } else { f64::INFINITY };
    if r2 < 0.9 {
        return Err(VslqError::FitFailed(format!("exponential fit R² = {r2:.3} below 0.9; curve {y:?}")));
    }
    Ok(ExpFit { amplitude, tau, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recovers_reference_coefficients() {
        let pts: Vec<_> = [8.0, 16.0, 32.0, 64.0].iter().map(|&t| (t, 0.0057 / t + 0.253 / (t * t))).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.a - 0.0057).abs() < 1e-12 && (f.b - 0.253).abs() < 1e-12);
        assert!(f.residual_rms < 1e-15);
    }

    #[test]
    fn rejects_short_grid() {
        assert!(fit_power_law(&[(8.0, 1e-3), (16.0, 5e-4)]).is_err());
        assert!(fit_power_law(&[(8.0, 1e-3), (8.0, 1e-3), (8.0, 1e-3)]).is_err());
    }

    #[test]
    fn exponential_round_trip() {
        let t: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 0.9 * (-x / 7.0).exp()).collect();
        let f = fit_exponential(&t, &y).unwrap();
        assert!((f.tau - 7.0).abs() < 1e-10 && (f.amplitude - 0.9).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fit_keeps_b_nonnegative(ps in proptest::collection::vec(1e-6f64..1e-2, 4)) {
            let pts: Vec<_> = [8.0, 16.0, 32.0, 64.0].iter().zip(&ps).map(|(&t, &p)| (t, p)).collect();
            let f = fit_power_law(&pts).unwrap();
            prop_assert!(f.b >= 0.0 && f.a >= 0.0);
        }

        #[test]
        fn fit_exact_for_model_data(a in 0.0f64..0.1, b in 0.0f64..1.0) {
            let pts: Vec<_> = [8.0, 16.0, 32.0, 64.0].iter().map(|&t| (t, a / t + b / (t * t))).collect();
            let f = fit_power_law(&pts).unwrap();
            prop_assert!((f.a - a).abs() < 1e-9 && (f.b - b).abs() < 1e-8);
        }
    }
}
