//! Hypothesis tests and effect sizes.

use serde::{Deserialize, Serialize};
use statrs::function::beta::checked_beta_reg;
use statrs::function::erf::erfc;

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p: f64,
}

/// Pooled two-proportion z-test with a two-sided normal p-value.
pub fn two_proportion_ztest(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<ZTest, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::Degenerate("group size is zero".into()));
    }
    if x1 > n1 || x2 > n2 {
        return Err(StatsError::Degenerate("successes exceed group size".into()));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Err(StatsError::Degenerate("pooled proportion is 0 or 1".into()));
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    let z = (x1 as f64 / n1f - x2 as f64 / n2f) / se;
    Ok(ZTest {
        z,
        p: normal_two_sided(z),
    })
}

pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Cohen's h for two proportions.
pub fn cohen_h(p1: f64, p2: f64) -> f64 {
    2.0 * p1.sqrt().asin() - 2.0 * p2.sqrt().asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TtestVariant {
    #[default]
    Pooled,
    Welch,
}

impl TtestVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            TtestVariant::Pooled => "pooled",
            TtestVariant::Welch => "welch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Always standardized by the pooled SD.
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    n: f64,
    mean: f64,
    var: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    Moments {
        n,
        mean,
        var: ss / (n - 1.0),
    }
}

pub fn two_sample_ttest(a: &[f64], b: &[f64], variant: TtestVariant) -> Result<TTest, StatsError> {
    for xs in [a, b] {
        if xs.len() < 2 {
            return Err(StatsError::TooFew { need: 2, got: xs.len() });
        }
    }
    let (ma, mb) = (moments(a), moments(b));
    let dfp = ma.n + mb.n - 2.0;
    let sp2 = ((ma.n - 1.0) * ma.var + (mb.n - 1.0) * mb.var) / dfp;
    if sp2 <= 0.0 {
        return Err(StatsError::Degenerate("pooled variance is zero".into()));
    }
    let diff = ma.mean - mb.mean;
    let sp = sp2.sqrt();
    let d = diff / sp;
    let (t, df) = match variant {
        TtestVariant::Pooled => (diff / (sp * (1.0 / ma.n + 1.0 / mb.n).sqrt()), dfp),
        TtestVariant::Welch => {
            let (va, vb) = (ma.var / ma.n, mb.var / mb.n);
            let se2 = va + vb;
            if se2 <= 0.0 {
                return Err(StatsError::Degenerate("standard error is zero".into()));
            }
            let df = se2 * se2 / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
            (diff / se2.sqrt(), df)
        }
    };
    Ok(TTest {
        t,
        df,
        p: student_two_sided(t, df)?,
        d,
    })
}

/// Two-sided Student-t p-value via the regularized incomplete beta function.
pub fn student_two_sided(t: f64, df: f64) -> Result<f64, StatsError> {
    if t == 0.0 {
        return Ok(1.0);
    }
    let x = df / (df + t * t);
    checked_beta_reg(df / 2.0, 0.5, x)
        .map(|p| p.clamp(0.0, 1.0))
        .map_err(|e| StatsError::Degenerate(format!("incomplete beta: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MeanCi {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self {
            mean: self.mean + by,
            ci_low: self.ci_low + by,
            ci_high: self.ci_high + by,
        }
    }
}

/// Normal-approximation 95% interval around the mean.
pub fn mean_ci95(xs: &[f64]) -> Result<MeanCi, StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::TooFew { need: 2, got: xs.len() });
    }
    let m = moments(xs);
    let half = 1.96 * m.var.sqrt() / m.n.sqrt();
    Ok(MeanCi {
        mean: m.mean,
        ci_low: m.mean - half,
        ci_high: m.mean + half,
    })
}

#[cfg(test)]
mod unit {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ztest_examples() {
        let r = two_proportion_ztest(1124, 7237, 629, 8346).unwrap();
        assert!(close(r.z, 15.75, 0.01), "{}", r.z);
        assert!(r.p < 1e-10);
        let eq = two_proportion_ztest(50, 100, 50, 100).unwrap();
        assert_eq!(eq.z, 0.0);
        assert_eq!(eq.p, 1.0);
        assert!(close(two_proportion_ztest(8, 20, 2, 20).unwrap().z, 2.191, 0.001));
    }

    #[test]
    fn ztest_degenerate() {
        assert!(matches!(two_proportion_ztest(0, 10, 0, 10), Err(StatsError::Degenerate(_))));
        assert!(matches!(two_proportion_ztest(10, 10, 5, 5), Err(StatsError::Degenerate(_))));
        assert!(two_proportion_ztest(1, 0, 1, 2).is_err());
    }

    #[test]
    fn h_examples() {
        assert!(close(cohen_h(1124.0 / 7237.0, 629.0 / 8346.0), 0.254, 0.005));
        assert_eq!(cohen_h(0.3, 0.3), 0.0);
        assert!(close(cohen_h(0.4, 0.1), 0.7259, 0.0001));
    }

    #[test]
    fn ttest_hand_example() {
        let r = two_sample_ttest(&[-1.0, -1.0, 0.0], &[0.0, 0.0, 1.0], TtestVariant::Pooled).unwrap();
        assert!(close(r.t, -2.1213, 1e-4));
        assert!(close(r.d, -1.7321, 1e-4));
        assert_eq!(r.df, 4.0);
    }

    #[test]
    fn ttest_identical_samples() {
        let x = [0.5, -1.0, 0.0, 1.0];
        for v in [TtestVariant::Pooled, TtestVariant::Welch] {
            let r = two_sample_ttest(&x, &x, v).unwrap();
            assert_eq!(r.t, 0.0);
            assert_eq!(r.d, 0.0);
            assert_eq!(r.p, 1.0);
        }
    }

    #[test]
    fn ttest_rejects_degenerate() {
        assert!(matches!(
            two_sample_ttest(&[1.0], &[0.0, 1.0], TtestVariant::Pooled),
            Err(StatsError::TooFew { .. })
        ));
        assert!(matches!(
            two_sample_ttest(&[1.0, 1.0], &[0.0, 0.0], TtestVariant::Pooled),
            Err(StatsError::Degenerate(_))
        ));
    }

    #[test]
    fn ci_examples() {
        assert_eq!(mean_ci95(&[0.0; 5]).unwrap(), MeanCi { mean: 0.0, ci_low: 0.0, ci_high: 0.0 });
        let r = mean_ci95(&[-1.0, 1.0]).unwrap();
        assert_eq!(r.mean, 0.0);
        assert!(close(r.half_width(), 1.96, 1e-12));
        assert!(mean_ci95(&[1.0]).is_err());
    }
}
