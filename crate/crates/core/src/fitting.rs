//! Scaling-exponent regression: least-squares slope of `log|y|` vs `log N`.

use crate::{Error, Result};
use serde::Serialize;

/// A residual (or norm) measured across the `N` grid together with its
/// fitted scaling exponent.  The standard error is always reported; the
/// acceptance windows use `exponent +- max(window, 2 stderr)`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSeries {
    pub name: String,
    pub tag: String,
    pub n_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
}

impl ResidualSeries {
    /// Fit `log10 |value| = intercept + exponent * log10 N`.  Requires at
    /// least 4 grid points; zero values are rejected (nothing to fit).
    pub fn fit(name: &str, tag: &str, n_grid: &[f64], values: &[f64]) -> Result<ResidualSeries> {
        if n_grid.len() != values.len() || n_grid.len() < 4 {
            return Err(Error::Config(format!(
                "exponent fit for {name} needs >= 4 matched points, got {}",
                n_grid.len()
            )));
        }
        if values.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::Config(format!(
                "exponent fit for {name}: values must be finite and nonzero"
            )));
        }
        let xs: Vec<f64> = n_grid.iter().map(|n| n.log10()).collect();
        let ys: Vec<f64> = values.iter().map(|v| v.abs().log10()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y - (intercept + slope * x);
                e * e
            })
            .sum();
        let stderr = if xs.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
        Ok(ResidualSeries {
            name: name.into(),
            tag: tag.into(),
            n_grid: n_grid.to_vec(),
            values: values.to_vec(),
            exponent: slope,
            intercept,
            stderr,
        })
    }

    /// Acceptance half-width: `max(window, 2 stderr)`.
    pub fn tolerance(&self, window: f64) -> f64 {
        window.max(2.0 * self.stderr)
    }
}
