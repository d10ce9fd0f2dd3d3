//! Summary statistics and the two-sample comparison used for reporting.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// 97.5th percentile of the standard normal.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when `n == 1`.
    pub sd: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Stats {
    /// Two-pass mean and sample standard deviation.
    pub fn of(values: &[f64]) -> Result<Stats> {
        if values.is_empty() {
            return Err(Error::Input("statistics of an empty sample".into()));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Stats {
            mean,
            sd,
            stderr: sd / (n as f64).sqrt(),
            n,
        })
    }

    /// 95% normal-approximation interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - Z_975 * self.stderr, self.mean + Z_975 * self.stderr)
    }

    pub fn degenerate(&self) -> bool {
        self.n < 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Welch {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's unequal-variance t-test of `a.mean - b.mean`.
pub fn welch(a: &Stats, b: &Stats) -> Result<Welch> {
    if a.degenerate() || b.degenerate() {
        return Err(Error::Input(
            "Welch test needs at least two observations per group".into(),
        ));
    }
    let va = a.stderr.powi(2);
    let vb = b.stderr.powi(2);
    let se = (va + vb).sqrt();
    if se == 0.0 {
        let p = if a.mean == b.mean { 1.0 } else { 0.0 };
        return Ok(Welch {
            t: if a.mean == b.mean {
                0.0
            } else {
                (a.mean - b.mean).signum() * f64::INFINITY
            },
            df: (a.n + b.n - 2) as f64,
            p,
        });
    }
    let t = (a.mean - b.mean) / se;
    let df = (va + vb).powi(2) / (va.powi(2) / (a.n - 1) as f64 + vb.powi(2) / (b.n - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Input(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(Welch { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_values() {
        let s = Stats::of(&[-10.0, -20.0]).unwrap();
        assert_eq!(s.mean, -15.0);
        assert!((s.sd - 50f64.sqrt()).abs() < 1e-12);
        assert!((s.stderr - 5.0).abs() < 1e-12);
        assert_eq!(s.n, 2);
    }

    #[test]
    fn single_value_is_flagged() {
        let s = Stats::of(&[3.0]).unwrap();
        assert_eq!((s.mean, s.sd, s.stderr, s.n), (3.0, 0.0, 0.0, 1));
        assert!(s.degenerate());
        assert!(welch(&s, &s).is_err());
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(Stats::of(&[]), Err(Error::Input(_))));
    }

    #[test]
    fn welch_against_hand_computation() {
        // a: 1..=5 (mean 3, var 2.5), b: 2,4,6,8,10 (mean 6, var 10).
        let a = Stats::of(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let b = Stats::of(&[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
        let w = welch(&a, &b).unwrap();
        let se = (2.5f64 / 5.0 + 10.0 / 5.0).sqrt();
        assert!((w.t - (-3.0 / se)).abs() < 1e-12);
        let df = (0.5f64 + 2.0).powi(2) / (0.25 / 4.0 + 4.0 / 4.0);
        assert!((w.df - df).abs() < 1e-12);
        // t = -1.897, df = 5.88: two-sided p close to 0.107.
        assert!((w.p - 0.107).abs() < 0.005, "p {}", w.p);
    }
}
