//! Closed-form analytical bounds: binomial tail bounds, the discrete-time
//! Kingman bound, the expected-total-queue bound of the three-phase policy
//! and its `n^1.5 f_n ln f_n` growth envelope.

use std::ops::{Add, Sub};

use num_traits::Zero;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("unstable queue: arrival rate {lambda} >= service rate {mu}")]
    Unstable { lambda: f64, mu: f64 },
    #[error("inconsistent moments: {0}")]
    Moments(String),
}

fn positive<F: Real>(name: &'static str, v: F) -> Result<F, BoundsError> {
    if v > F::zero() {
        Ok(v)
    } else {
        Err(BoundsError::NonPositive {
            name,
            value: v.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// `P(X <= E[X] - x) <= exp(-x^2 / (2 E[X]))` for a binomial `X`.
pub fn chernoff_lower<F: Real>(mean: F, x: F) -> Result<F, BoundsError> {
    let mean = positive("mean", mean)?;
    let x = positive("deviation", x)?;
    Ok((-(x * x) / (F::lit(2.0) * mean)).exp())
}

/// `P(X >= E[X] + x) <= exp(-x^2 / (2 (E[X] + x/3)))` for a binomial `X`.
pub fn chernoff_upper<F: Real>(mean: F, x: F) -> Result<F, BoundsError> {
    let mean = positive("mean", mean)?;
    let x = positive("deviation", x)?;
    Ok((-(x * x) / (F::lit(2.0) * (mean + x / F::lit(3.0)))).exp())
}

/// First two moments of per-slot arrivals and service of a discrete-time
/// single-server queue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GG1Params<F> {
    pub lambda: F,
    pub m2x: F,
    pub mu: F,
    pub m2y: F,
}

impl<F: Real> GG1Params<F> {
    pub fn new(lambda: F, m2x: F, mu: F, m2y: F) -> Result<Self, BoundsError> {
        let p = Self {
            lambda,
            m2x,
            mu,
            m2y,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), BoundsError> {
        if self.lambda < F::zero() || self.mu <= F::zero() {
            return Err(BoundsError::Moments(
                "rates must be nonnegative, mu > 0".into(),
            ));
        }
        if self.m2x < self.lambda * self.lambda || self.m2y < self.mu * self.mu {
            return Err(BoundsError::Moments(
                "second moment below squared mean".into(),
            ));
        }
        if self.lambda >= self.mu {
            return Err(BoundsError::Unstable {
                lambda: self.lambda.to_f64().unwrap_or(f64::NAN),
                mu: self.mu.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }
}

/// `E[Z] <= (m2x + m2y - 2 lambda mu) / (2 (mu - lambda))`.
pub fn kingman_bound<F: Real>(p: &GG1Params<F>) -> Result<F, BoundsError> {
    p.validate()?;
    let two = F::lit(2.0);
    Ok((p.m2x + p.m2y - two * p.lambda * p.mu) / (two * (p.mu - p.lambda)))
}

/// One step of `Z' = max(0, Z + X - Y)`. Works for unsigned integers too.
pub fn lindley_step<T>(z: T, x: T, y: T) -> T
where
    T: Copy + PartialOrd + Zero + Add<Output = T> + Sub<Output = T>,
{
    let load = z + x;
    if y >= load {
        T::zero()
    } else {
        load - y
    }
}

/// Expected-total-queue bound `3 n d` of the three-phase policy.
pub fn total_queue_bound(n: u64, d: u64) -> u64 {
    3 * n * d
}

/// Value of `c n^1.5 f_n ln f_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope<F> {
    pub value: F,
    /// Set when `ln f_n = 0` (that is `f_n = 1`), where the envelope is 0.
    pub degenerate: bool,
}

pub fn growth_envelope<F: Real>(n: u64, f_n: u64, c: F) -> Envelope<F> {
    let ln_f = F::from_u64_lossy(f_n).ln();
    if f_n <= 1 {
        return Envelope {
            value: F::zero(),
            degenerate: true,
        };
    }
    let n = F::from_u64_lossy(n);
    Envelope {
        value: c * n.powf(F::lit(1.5)) * F::from_u64_lossy(f_n) * ln_f,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn chernoff_values() {
        let l = chernoff_lower(50.0, 10.0).unwrap();
        assert!((l - (-1.0f64).exp()).abs() < TOL);
        assert!((l - 0.367879).abs() < 1e-6);
        let u = chernoff_upper(50.0, 10.0).unwrap();
        assert!((u - (-0.9375f64).exp()).abs() < TOL);
        assert!(chernoff_lower(50.0, 1e-9).unwrap() > 1.0 - 1e-12);
        assert!(chernoff_upper(50.0f64, 1e-9).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn chernoff_upper_decreases() {
        let mut prev = 1.0;
        for k in 1..200 {
            let b = chernoff_upper(50.0, k as f64).unwrap();
            assert!(b <= prev + TOL);
            prev = b;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn chernoff_rejects_nonpositive() {
        assert!(chernoff_lower(0.0, 1.0).is_err());
        assert!(chernoff_lower(1.0, 0.0).is_err());
        assert!(chernoff_upper(-1.0, 1.0).is_err());
        assert!(chernoff_upper(1.0f32, -2.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let l: f32 = chernoff_lower(50.0f32, 10.0).unwrap();
        assert!((l - 0.367_879_4).abs() < 1e-6);
    }

    #[test]
    fn kingman_values() {
        let p = GG1Params::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!((kingman_bound(&p).unwrap() - 0.5f64).abs() < TOL);
        assert!(matches!(
            GG1Params::new(1.0, 1.0, 1.0, 1.0),
            Err(BoundsError::Unstable { .. })
        ));
        assert!(GG1Params::new(0.5, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn kingman_backlog_form_is_below_simplified_display() {
        for f in [3.0f64, 10.0, 25.0, 100.0] {
            let lambda = f.powi(-7);
            let p = GG1Params::new(lambda, 1.0 / f, 1.0, 1.0).unwrap();
            let exact = kingman_bound(&p).unwrap();
            let expected = (1.0 / f + 1.0 - 2.0 * lambda) / (2.0 * (1.0 - lambda));
            assert!((exact - expected).abs() < TOL);
            let dropped_cross_term = (1.0 / f + 1.0) / (2.0 * (1.0 - lambda));
            assert!(exact <= dropped_cross_term + TOL);
        }
    }

    #[test]
    fn lindley_examples() {
        assert_eq!(lindley_step(0u64, 0, 1), 0);
        assert_eq!(lindley_step(5u64, 2, 1), 6);
        assert_eq!(lindley_step(1u64, 0, 3), 0);
        assert_eq!(lindley_step(1.5f64, 0.25, 3.0), 0.0);
    }

    #[test]
    fn total_queue_bound_values() {
        assert_eq!(total_queue_bound(25, 56734), 4_255_050);
        assert_eq!(total_queue_bound(1, 1), 3);
        for n in 1..20 {
            for d in 1..20 {
                assert!(total_queue_bound(n + 1, d) >= total_queue_bound(n, d));
                assert!(total_queue_bound(n, d + 1) >= total_queue_bound(n, d));
            }
        }
    }

    #[test]
    fn envelope_values() {
        for n in [3u64, 10, 25, 49] {
            let e = growth_envelope(n, n, 2.0);
            let want = 2.0 * (n as f64).powf(2.5) * (n as f64).ln();
            assert!((e.value - want).abs() <= 1e-9 * want);
            assert!(!e.degenerate);

            let r = growth_envelope(2 * n, 2 * n, 1.0).value / growth_envelope(n, n, 1.0).value;
            let want = 2f64.powf(2.5) * (2.0 * n as f64).ln() / (n as f64).ln();
            assert!((r - want).abs() < 1e-9);
        }
        let e = growth_envelope::<f64>(1, 1, 1.0);
        assert_eq!(e.value, 0.0);
        assert!(e.degenerate);
    }
}
