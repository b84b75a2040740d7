//! Log–log least-squares rate estimation.

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Pairs dropped because the value was exactly zero.
    pub excluded: Vec<(f64, f64)>,
    pub used: usize,
}

/// OLS slope of `ln v` against `ln ε`. Zero values are excluded and reported;
/// negative or non-finite entries are rejected.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    let mut excluded = Vec::new();
    for &(e, v) in pairs {
        if !(e.is_finite() && e > 0.0) || !(v.is_finite() && v >= 0.0) {
            return Err(Error::Invalid(format!("fit_rate: bad pair ({e}, {v})")));
        }
        if v == 0.0 {
            excluded.push((e, v));
        } else {
            xs.push(e.ln());
            ys.push(v.ln());
        }
    }
    let n = xs.len();
    if n < MIN_POINTS {
        return Err(Error::InsufficientData { needed: MIN_POINTS, got: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("fit_rate: all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, stderr, intercept, excluded, used: n })
}
