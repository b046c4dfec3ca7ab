use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares fit of `log(error) = intercept + slope · log(τ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence band on the slope; needs at least four points.
    pub band: Option<(f64, f64)>,
    pub points_used: usize,
    /// Indices of levels dropped for a nonpositive or non-finite error.
    pub dropped: Vec<usize>,
}

/// Two-sided 97.5% Student-t quantiles for 1..=30 degrees of freedom.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

fn t_quantile(dof: usize) -> f64 {
    T_975.get(dof.wrapping_sub(1)).copied().unwrap_or(1.96)
}

pub fn fit_rate(errors: &[f64], taus: &[f64]) -> Result<RateFit> {
    if errors.len() != taus.len() {
        return Err(Error::DimensionMismatch {
            expected: taus.len(),
            found: errors.len(),
        });
    }
    let mut dropped = Vec::new();
    let mut pts = Vec::new();
    for (i, (&e, &t)) in errors.iter().zip(taus).enumerate() {
        if e > 0.0 && e.is_finite() && t > 0.0 && t.is_finite() {
            pts.push((t.ln(), e.ln()));
        } else {
            dropped.push(i);
        }
    }
    let n = pts.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 2 positive errors, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all stepsizes are equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let band = (n >= 4).then(|| {
        let rss: f64 = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let half = t_quantile(n - 2) * se;
        (slope - half, slope + half)
    });
    Ok(RateFit {
        slope,
        intercept,
        band,
        points_used: n,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_first_order() {
        let f = fit_rate(&[0.1, 0.05, 0.025], &[0.4, 0.2, 0.1]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(f.band.is_none());
    }

    #[test]
    fn constructed_half_order() {
        // The middle level sits at the mean of log τ, so its rounding
        // does not move the slope.
        let f = fit_rate(&[0.1, 0.0707, 0.05], &[0.4, 0.2, 0.1]).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-6, "{}", f.slope);
        let exact: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|t: &f64| 0.1 * (t / 0.4).sqrt()).collect();
        let f = fit_rate(&exact, &[0.4, 0.2, 0.1]).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-6);
    }

    #[test]
    fn single_point_rejected() {
        assert!(matches!(fit_rate(&[0.1], &[0.4]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn drops_nonpositive_levels() {
        let f = fit_rate(&[0.1, 0.0, 0.025, -1.0, 0.0125], &[0.4, 0.3, 0.1, 0.07, 0.05]).unwrap();
        assert_eq!(f.dropped, vec![1, 3]);
        assert_eq!(f.points_used, 3);
        assert!((f.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_brackets_slope() {
        let taus = [0.4, 0.2, 0.1, 0.05, 0.025];
        let errs = [0.11, 0.048, 0.026, 0.0122, 0.0063];
        let f = fit_rate(&errs, &taus).unwrap();
        let (lo, hi) = f.band.unwrap();
        assert!(lo < f.slope && f.slope < hi);
    }
}
