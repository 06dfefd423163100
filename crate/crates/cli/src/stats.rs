//! Summary statistics for replicate MDI values.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean, sample standard deviation and standard error; NaN where undefined.
pub fn mean_sd_se(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    (mean, sd, sd / (n as f64).sqrt())
}

/// One-sided t-test of `mean(d) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSidedTest {
    pub mean: f64,
    pub se: f64,
    pub t: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn one_sided_t(d: &[f64]) -> OneSidedTest {
    let (mean, _, se) = mean_sd_se(d);
    let n = d.len();
    let t = mean / se;
    let p_value = if n < 2 || !t.is_finite() {
        if t == f64::INFINITY {
            0.0
        } else {
            f64::NAN
        }
    } else {
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(t)
    };
    OneSidedTest { mean, se, t, p_value, n }
}

/// `a_i - b_i` over the pairs where both are present.
pub fn paired_differences(a: &[Option<f64>], b: &[Option<f64>]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .filter_map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moments() {
        let (m, sd, se) = mean_sd_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_abs_diff_eq!(sd, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(se, sd / 2.0, epsilon = 1e-15);
        assert!(mean_sd_se(&[]).0.is_nan());
        assert!(mean_sd_se(&[1.0]).1.is_nan());
    }

    #[test]
    fn t_test_matches_table() {
        // mean 1, sd 2, n 16: t = 2 on 15 df, upper tail 0.03197
        let d: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 1.0 + 2.0 * (15.0f64 / 16.0).sqrt() } else { 1.0 - 2.0 * (15.0f64 / 16.0).sqrt() }).collect();
        let r = one_sided_t(&d);
        assert_abs_diff_eq!(r.t, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.031_972, epsilon = 1e-5);
        assert_eq!(one_sided_t(&[1.0, 1.0]).p_value, 0.0);
    }

    #[test]
    fn pairs_skip_missing() {
        let d = paired_differences(&[Some(1.0), None, Some(3.0)], &[Some(0.5), Some(1.0), None]);
        assert_eq!(d, vec![0.5]);
    }
}
