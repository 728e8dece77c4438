//! Ordinary least-squares lines.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

impl LineFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Least-squares line through `(xs, ys)`; the intercept is pinned to zero
/// when `through_origin` is set.
pub fn fit_line(xs: &[f64], ys: &[f64], through_origin: bool) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit(format!(
            "length mismatch: {} xs vs {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite input".into()));
    }
    let n = xs.len() as f64;

    let (slope, intercept) = if through_origin {
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        if sxx == 0.0 {
            return Err(Error::DegenerateFit("all xs are zero".into()));
        }
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        (sxy / sxx, 0.0)
    } else {
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
            return Err(Error::DegenerateFit("all xs are equal".into()));
        }
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    };

    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
    })
}
