//! Accuracy patterns: parametric curves that are bounded, concave and
//! strictly increasing in the training size.
//!
//! Accuracy is expressed on the 0-100 percent scale and training size in
//! words consumed from the corpus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A family of curves usable for learning-curve extrapolation.
///
/// Implementors must be strictly increasing, concave and upper bounded on
/// `(0, inf)`; the bound is what [`AccuracyPattern::asymptote`] reports.
pub trait AccuracyPattern {
    /// Number of free parameters.
    const ARITY: usize;

    fn eval(&self, x: f64) -> Result<f64>;

    /// Limit of the curve as the training size grows without bound.
    fn asymptote(&self) -> f64;

    /// Partial derivatives of [`AccuracyPattern::eval`] with respect to each
    /// parameter, in declaration order.
    fn jacobian_row(&self, x: f64) -> Result<[f64; 3]>;
}

/// Power-law pattern `-a * x^(-b) + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawParams {
    /// Amplitude.
    pub a: f64,
    /// Decay exponent.
    pub b: f64,
    /// Asymptote, in accuracy percent.
    pub c: f64,
}

impl PowerLawParams {
    /// Validating constructor: `a` and `b` must be strictly positive and `c`
    /// finite.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let p = PowerLawParams { a, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::domain(format!("amplitude a must be > 0, got {}", self.a)));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::domain(format!("exponent b must be > 0, got {}", self.b)));
        }
        if !self.c.is_finite() {
            return Err(Error::domain(format!("asymptote c must be finite, got {}", self.c)));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(p: [f64; 3]) -> Self {
        PowerLawParams {
            a: p[0],
            b: p[1],
            c: p[2],
        }
    }

    /// Evaluation without the domain check, for callers that already
    /// validated `x`.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        -self.a * x.powf(-self.b) + self.c
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("training size must be > 0, got {x}")))
    }
}

impl AccuracyPattern for PowerLawParams {
    const ARITY: usize = 3;

    fn eval(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn asymptote(&self) -> f64 {
        self.c
    }

    fn jacobian_row(&self, x: f64) -> Result<[f64; 3]> {
        check_x(x)?;
        let decay = x.powf(-self.b);
        Ok([-decay, self.a * decay * x.ln(), 1.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1() -> PowerLawParams {
        PowerLawParams::new(204.570017, 0.307277, 99.226727).unwrap()
    }

    #[test]
    fn eval_at_unit_size_is_c_minus_a() {
        let v = fig1().eval(1.0).unwrap();
        assert!((v - (-105.343290)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn eval_near_corpus_end() {
        let v = fig1().eval(700_000.0).unwrap();
        assert!((v - 95.96).abs() < 0.01, "{v}");
    }

    #[test]
    fn eval_exact_square_root() {
        let p = PowerLawParams::new(10.0, 0.5, 95.0).unwrap();
        assert_eq!(p.eval(100.0).unwrap(), 94.0);
    }

    #[test]
    fn eval_rejects_non_positive_sizes() {
        let p = fig1();
        assert!(matches!(p.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(p.eval(-3.0), Err(Error::Domain(_))));
        assert!(matches!(p.jacobian_row(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn asymptote_is_c() {
        assert_eq!(fig1().asymptote(), 99.226727);
        assert_eq!(PowerLawParams::new(10.0, 0.5, 95.0).unwrap().asymptote(), 95.0);
        assert_eq!(PowerLawParams::new(1.0, 1.0, 100.0).unwrap().asymptote(), 100.0);
    }

    #[test]
    fn constructor_rejects_non_positive_shape() {
        assert!(PowerLawParams::new(0.0, 0.5, 90.0).is_err());
        assert!(PowerLawParams::new(1.0, -0.5, 90.0).is_err());
        assert!(PowerLawParams::new(1.0, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn jacobian_closed_forms() {
        let p = PowerLawParams::new(10.0, 0.5, 95.0).unwrap();
        assert_eq!(p.jacobian_row(1.0).unwrap(), [-1.0, 0.0, 1.0]);

        let e2 = std::f64::consts::E.powi(2);
        let row = p.jacobian_row(e2).unwrap();
        let inv_e = (-1.0f64).exp();
        assert!((row[0] + inv_e).abs() < 1e-15);
        assert!((row[1] - 10.0 * inv_e * 2.0).abs() < 1e-13);
        assert_eq!(row[2], 1.0);
    }

    proptest! {
        #[test]
        fn increasing_and_bounded(
            a in 0.01f64..500.0,
            b in 0.01f64..2.0,
            c in 50.0f64..110.0,
            x1 in 1.0f64..1e6,
            dx in 1.0f64..1e6,
        ) {
            let p = PowerLawParams::new(a, b, c).unwrap();
            let x2 = x1 + dx;
            let (y1, y2) = (p.eval(x1).unwrap(), p.eval(x2).unwrap());
            prop_assert!(y1 < y2, "{y1} !< {y2}");
            prop_assert!(y2 < c);
        }

        #[test]
        fn concave(
            a in 0.01f64..500.0,
            b in 0.01f64..2.0,
            x1 in 1.0f64..1e5,
            dx in 1.0f64..1e5,
            t in 0.01f64..0.99,
        ) {
            let p = PowerLawParams::new(a, b, 90.0).unwrap();
            let x2 = x1 + dx;
            let mid = p.eval(t * x1 + (1.0 - t) * x2).unwrap();
            let chord = t * p.eval(x1).unwrap() + (1.0 - t) * p.eval(x2).unwrap();
            prop_assert!(mid >= chord - 1e-9 * chord.abs().max(1.0));
        }
    }
}
