//! Sample statistics and Student-t confidence intervals over replication means.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Unbiased (n − 1) sample standard deviation.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Two-sided Student-t quantile t_{(1+level)/2, df}.
pub fn t_quantile(level: f64, df: usize) -> Result<f64> {
    if df == 0 || !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidInput(format!(
            "t quantile needs df ≥ 1 and level in [0, 1), got {df}, {level}"
        )));
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::InvalidInput(format!("student-t: {e}")))?;
    Ok(dist.inverse_cdf(0.5 + level / 2.0))
}

/// Half-width of the `level` confidence interval of the mean of `xs`.
pub fn ci_halfwidth(xs: &[f64], level: f64) -> Result<f64> {
    let s = sample_std(xs)
        .ok_or_else(|| Error::Empty("confidence interval needs at least two samples".into()))?;
    Ok(t_quantile(level, xs.len() - 1)? * s / (xs.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn t_quantiles_match_tables() {
        assert_relative_eq!(
            t_quantile(0.90, 19).unwrap(),
            1.729_132_811_521_367_8,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            t_quantile(0.90, 1).unwrap(),
            6.313_751_514_675_043,
            epsilon = 1e-8
        );
        assert_relative_eq!(
            t_quantile(0.95, 9).unwrap(),
            2.262_157_162_740_992,
            epsilon = 1e-9
        );
        assert!(t_quantile(0.9, 0).is_err());
    }

    #[test]
    fn hand_computed_interval() {
        // mean 5, deviations ±1,±2,0 → s² = 10/4 = 2.5
        let xs = [3.0, 4.0, 5.0, 6.0, 7.0];
        assert_relative_eq!(sample_std(&xs).unwrap(), 2.5f64.sqrt(), epsilon = 1e-15);
        let hw = ci_halfwidth(&xs, 0.90).unwrap();
        assert_relative_eq!(
            hw,
            2.131_846_786_326_649 * 2.5f64.sqrt() / 5f64.sqrt(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn identical_samples_have_zero_width() {
        assert_eq!(ci_halfwidth(&[4.25; 20], 0.9).unwrap(), 0.0);
        assert!(ci_halfwidth(&[1.0], 0.9).is_err());
        assert_eq!(mean(&[]), None);
    }
}
