//! Orthonormal bases on `[0, 1]` and the affine response scaling that maps
//! responses onto that interval.
//!
//! Both families satisfy `∫₀¹ φ_i φ_j = δ_ij`, so the squared L² norm of a
//! truncated expansion is the sum of its squared coefficients.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default fractional padding applied on each side of the training range.
pub const DEFAULT_PAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// `φ₀ = 1`, `φ_i(z) = √2 cos(π i z)`.
    #[default]
    Cosine,
    /// `φ₀ = 1`, `φ_{2j-1} = √2 sin(2π j z)`, `φ_{2j} = √2 cos(2π j z)`.
    Fourier,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Cosine => "cosine",
            BasisKind::Fourier => "fourier",
        }
    }

    /// Evaluates `φ_i(z)`. Fails when `z` is outside `[0, 1]`.
    pub fn eval(self, i: usize, z: f64) -> Result<f64> {
        check_domain(z)?;
        Ok(self.eval_unchecked(i, z))
    }

    /// Writes `φ_0(z), …, φ_{out.len()-1}(z)` into `out`.
    pub fn eval_all(self, z: f64, out: &mut [f64]) -> Result<()> {
        check_domain(z)?;
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.eval_unchecked(i, z);
        }
        Ok(())
    }

    /// First `n_terms` basis functions at `z`.
    pub fn eval_vec(self, z: f64, n_terms: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n_terms];
        self.eval_all(z, &mut out)?;
        Ok(out)
    }

    pub(crate) fn eval_unchecked(self, i: usize, z: f64) -> f64 {
        if i == 0 {
            return 1.0;
        }
        match self {
            BasisKind::Cosine => SQRT_2 * (PI * i as f64 * z).cos(),
            BasisKind::Fourier => {
                let j = i.div_ceil(2) as f64;
                if i % 2 == 1 {
                    SQRT_2 * (2.0 * PI * j * z).sin()
                } else {
                    SQRT_2 * (2.0 * PI * j * z).cos()
                }
            }
        }
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(BasisKind::Cosine),
            "fourier" => Ok(BasisKind::Fourier),
            other => Err(Error::InvalidParameter(format!("unknown basis '{other}'"))),
        }
    }
}

pub fn cosine_eval(i: usize, z: f64) -> Result<f64> {
    BasisKind::Cosine.eval(i, z)
}

pub fn fourier_eval(i: usize, z: f64) -> Result<f64> {
    BasisKind::Fourier.eval(i, z)
}

fn check_domain(z: f64) -> Result<()> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(Error::Domain { value: z })
    }
}

/// Affine map of responses onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub lo: f64,
    pub hi: f64,
    pub pad: f64,
}

impl Scaler {
    /// Builds a scaler directly from its anchors.
    pub fn new(lo: f64, hi: f64, pad: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidParameter(format!("scaler needs finite lo < hi, got [{lo}, {hi}]")));
        }
        if !(pad >= 0.0 && pad.is_finite()) {
            return Err(Error::InvalidParameter(format!("pad must be >= 0, got {pad}")));
        }
        Ok(Self { lo, hi, pad })
    }

    /// `lo = min - pad·range`, `hi = max + pad·range`.
    pub fn fit(train_responses: &[f64], pad: f64) -> Result<Self> {
        if train_responses.len() < 2 {
            return Err(Error::InsufficientData("scaler needs at least two responses".into()));
        }
        if let Some(bad) = train_responses.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response {bad}")));
        }
        let (min, max) =
            train_responses.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let range = max - min;
        if range <= 0.0 {
            return Err(Error::DegenerateRange { value: min });
        }
        Scaler::new(min - pad * range, max + pad * range, pad)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn transform(&self, y: f64) -> f64 {
        (y - self.lo) / (self.hi - self.lo)
    }

    pub fn unscale(&self, z: f64) -> f64 {
        self.lo + z * (self.hi - self.lo)
    }

    /// Factor converting a density in `z` to a density in `y`.
    pub fn jacobian(&self) -> f64 {
        1.0 / (self.hi - self.lo)
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{linspace, trapezoid};
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_eval(0, 0.7313).unwrap(), 1.0);
        assert!((cosine_eval(1, 0.0).unwrap() - SQRT_2).abs() < 1e-15);
        assert!(cosine_eval(2, 0.25).unwrap().abs() < 1e-15);
    }

    #[test]
    fn fourier_examples() {
        assert_eq!(fourier_eval(0, 0.31).unwrap(), 1.0);
        assert!((fourier_eval(1, 0.25).unwrap() - SQRT_2).abs() < 1e-15);
        assert!((fourier_eval(2, 0.5).unwrap() + SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        assert_eq!(cosine_eval(3, 1.5), Err(Error::Domain { value: 1.5 }));
        assert!(fourier_eval(0, -0.01).is_err());
        assert!(cosine_eval(1, f64::NAN).is_err());
    }

    #[test]
    fn orthonormal_on_fine_grid() {
        let grid = linspace(0.0, 1.0, 4001);
        let dx = 1.0 / 4000.0;
        for kind in [BasisKind::Cosine, BasisKind::Fourier] {
            let table: Vec<Vec<f64>> = grid.iter().map(|&z| kind.eval_vec(z, 31).unwrap()).collect();
            for i in 0..=30 {
                for j in 0..=30 {
                    let prod: Vec<f64> = table.iter().map(|r| r[i] * r[j]).collect();
                    let ip = trapezoid(&prod, dx);
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - target).abs() < 1e-6, "{kind:?} <{i},{j}> = {ip}");
                }
            }
        }
    }

    #[test]
    fn scaler_examples() {
        let s = Scaler::fit(&[0.0, 2.0], 0.0).unwrap();
        assert_eq!((s.lo, s.hi), (0.0, 2.0));
        assert_eq!(s.transform(1.0), 0.5);

        let s = Scaler::fit(&[0.0, 2.0], 0.05).unwrap();
        assert!((s.lo + 0.1).abs() < 1e-15 && (s.hi - 2.1).abs() < 1e-15);

        assert_eq!(Scaler::fit(&[5.0, 5.0, 5.0], 0.05), Err(Error::DegenerateRange { value: 5.0 }));
    }

    #[test]
    fn padded_training_range_maps_inside_unit_interval() {
        let ys = [3.0, -1.0, 7.5, 2.0];
        let s = Scaler::fit(&ys, 0.05).unwrap();
        let edge = 0.05 / 1.1;
        for y in ys {
            let z = s.transform(y);
            assert!(z >= edge - 1e-12 && z <= 1.0 - edge + 1e-12);
        }
    }

    #[test]
    fn jacobian_preserves_mass() {
        let s = Scaler::new(-3.0, 5.0, 0.0).unwrap();
        // g(z) = 1 + √2 cos(π z)/2 integrates to 1 on [0,1].
        let ys = linspace(s.lo, s.hi, 2001);
        let vals: Vec<f64> = ys
            .iter()
            .map(|&y| (1.0 + 0.5 * cosine_eval(1, s.transform(y).clamp(0.0, 1.0)).unwrap()) * s.jacobian())
            .collect();
        let mass = trapezoid(&vals, s.width() / 2000.0);
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    }

    proptest! {
        #[test]
        fn scaling_round_trip(lo in -1e6f64..1e6, width in 1e-3f64..1e6, y in -1e7f64..1e7) {
            let s = Scaler::new(lo, lo + width, 0.0).unwrap();
            let back = s.unscale(s.transform(y));
            prop_assert!((back - y).abs() <= 1e-12 * y.abs().max(lo.abs()).max(width).max(1.0));
        }
    }
}
