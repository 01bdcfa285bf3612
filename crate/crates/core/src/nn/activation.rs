//! Hölder-smooth modification of ReLU.
//!
//! ```text
//! sigma(x) = 0            x <= 0
//!          = x^q          0 < x <= t
//!          = x - t + c    x > t
//! ```
//! with `t = (1/q)^(1/(q-1))` and `c = t^q`, so `sigma'` is continuous and
//! `(q-1)`-Hölder.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    q: f64,
    t: f64,
    c: f64,
}

impl Activation {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 1.0 && q <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "activation exponent q={q} outside (1,2]"
            )));
        }
        let t = (1.0 / q).powf(1.0 / (q - 1.0));
        let c = (1.0 / q).powf(q / (q - 1.0));
        Ok(Activation { q, t, c })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn threshold(&self) -> f64 {
        self.t
    }

    pub fn offset(&self) -> f64 {
        self.c
    }

    /// Hölder exponent of the derivative, `q - 1`.
    pub fn alpha_tilde(&self) -> f64 {
        self.q - 1.0
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x <= self.t {
            x.powf(self.q)
        } else {
            x - self.t + self.c
        }
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x <= self.t {
            self.q * x.powf(self.q - 1.0)
        } else {
            1.0
        }
    }

    /// Hölder constant of the elementwise derivative on `dim`-vectors:
    /// `q * dim^((2-q)/2)`.
    pub fn holder_constant(&self, dim: usize) -> f64 {
        self.q * (dim as f64).powf((2.0 - self.q) / 2.0)
    }

    /// `sup_x |sigma(x) - relu(x)| = t - t^q`, attained at `x = t`.
    pub fn relu_gap(&self) -> f64 {
        self.t - self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_case() {
        let a = Activation::new(2.0).unwrap();
        assert_eq!((a.threshold(), a.offset()), (0.5, 0.25));
        assert_eq!((a.eval(-1.0), a.deriv(-1.0)), (0.0, 0.0));
        assert!((a.eval(0.3) - 0.09).abs() < 1e-15);
        assert!((a.deriv(0.3) - 0.6).abs() < 1e-15);
        assert_eq!((a.eval(1.0), a.deriv(1.0)), (0.75, 1.0));
        assert_eq!(a.relu_gap(), 0.25);
        assert_eq!(a.holder_constant(17), 2.0);
    }

    #[test]
    fn continuity_at_threshold() {
        for &q in &[1.1, 1.5, 1.9, 2.0] {
            let a = Activation::new(q).unwrap();
            let t = a.threshold();
            assert!(t > 0.0 && t < 1.0);
            assert!((t.powf(q) - a.offset()).abs() < 1e-15);
            let below = a.deriv(t);
            assert!((below - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_exponent() {
        assert!(Activation::new(1.0).is_err());
        assert!(Activation::new(2.5).is_err());
        assert!(Activation::new(f64::NAN).is_err());
    }
}
