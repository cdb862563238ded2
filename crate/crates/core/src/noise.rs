//! Multiplicative error densities described through their Mellin transforms.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mellin::{CutoffRect, DevelopmentPoint, FOUR_PI_SQ};
use crate::quadrature;
use crate::special::{log_gamma_complex, ComplexValue};

/// Product error law acting coordinatewise on the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// `χ²₁ = Γ(1/2, rate 1/2)` in each coordinate; the squared-increment model.
    ChiSquared1,
    /// `Γ(shape, rate)` in each coordinate.
    Gamma { shape: [f64; 2], rate: [f64; 2] },
    /// No noise: `M_c[g] ≡ 1`.
    Noiseless,
}

/// Error density `g` of the multiplicative noise.
///
/// Every supported kind has a nonvanishing Mellin transform with
/// `∫_[-k,k] |M_c[g]|^-2 < ∞` for any finite box, as long as the transform
/// exists at the development point (see [`NoiseModel::check_admissible`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::chi_squared_1()
    }
}

impl NoiseModel {
    pub fn chi_squared_1() -> Self {
        NoiseModel { kind: NoiseKind::ChiSquared1 }
    }

    pub fn noiseless() -> Self {
        NoiseModel { kind: NoiseKind::Noiseless }
    }

    pub fn gamma(shape: [f64; 2], rate: [f64; 2]) -> Result<Self> {
        if shape.iter().chain(rate.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation(format!("gamma noise needs positive parameters, got shape {shape:?} rate {rate:?}")));
        }
        Ok(NoiseModel { kind: NoiseKind::Gamma { shape, rate } })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self.kind, NoiseKind::Noiseless)
    }

    fn shape_rate(&self, axis: usize) -> Option<(f64, f64)> {
        match self.kind {
            NoiseKind::ChiSquared1 => Some((0.5, 0.5)),
            NoiseKind::Gamma { shape, rate } => Some((shape[axis], rate[axis])),
            NoiseKind::Noiseless => None,
        }
    }

    /// The transform exists at `c` iff `shape + c - 1 > 0` in each coordinate.
    pub fn check_admissible(&self, c: DevelopmentPoint) -> Result<()> {
        for axis in 0..2 {
            if let Some((p, _)) = self.shape_rate(axis) {
                if p + c.c[axis] - 1.0 <= 0.0 {
                    return Err(Error::Admissibility(format!(
                        "noise shape {p} with c = {} on axis {axis}: need shape + c - 1 > 0",
                        c.c[axis]
                    )));
                }
            }
        }
        Ok(())
    }

    /// One-dimensional factor `E(U_axis^(c-1+it))`.
    pub fn mellin_axis(&self, axis: usize, c: f64, t: f64) -> Result<ComplexValue> {
        let Some((p, q)) = self.shape_rate(axis) else {
            return Ok(ComplexValue::new(1.0, 0.0));
        };
        if p + c - 1.0 <= 0.0 {
            return Err(Error::Admissibility(format!("noise shape {p} with c = {c}: need shape + c - 1 > 0")));
        }
        let s = ComplexValue::new(c - 1.0, t);
        let log_m = log_gamma_complex(s + p)? - log_gamma_complex(ComplexValue::new(p, 0.0))? - s * q.ln();
        Ok(log_m.exp())
    }
}

/// `M_c[g](t)`, the product of the coordinate factors.
pub fn mellin_g(model: &NoiseModel, c: DevelopmentPoint, t: [f64; 2]) -> Result<ComplexValue> {
    Ok(model.mellin_axis(0, c.c[0], t[0])? * model.mellin_axis(1, c.c[1], t[1])?)
}

/// `|M_c[g](t)|^-2`; closed form `cosh(πt1) cosh(πt2)` for χ²₁ at `c = (1, 1)`.
pub fn mellin_g_abs2_inv(model: &NoiseModel, c: DevelopmentPoint, t: [f64; 2]) -> Result<f64> {
    match model.kind {
        NoiseKind::Noiseless => Ok(1.0),
        NoiseKind::ChiSquared1 if c.is_unit() => Ok((PI * t[0]).cosh() * (PI * t[1]).cosh()),
        _ => Ok(mellin_g(model, c, t)?.norm_sqr().recip()),
    }
}

/// Variance functional `Λ_g(k) = (4π²)^-1 ∫_[-k,k] |M_c[g](t)|^-2 dt`.
///
/// Closed forms for χ²₁ at `c = (1, 1)` (`sinh(πk1) sinh(πk2) / π⁴`) and for
/// the noiseless model (`k1 k2 / π²`); otherwise adaptive quadrature.
pub fn lambda_g(model: &NoiseModel, c: DevelopmentPoint, k: CutoffRect) -> Result<f64> {
    model.check_admissible(c)?;
    match model.kind {
        NoiseKind::Noiseless => Ok(k.k1() * k.k2() / (PI * PI)),
        NoiseKind::ChiSquared1 if c.is_unit() => Ok((PI * k.k1()).sinh() * (PI * k.k2()).sinh() / PI.powi(4)),
        _ => lambda_g_quadrature(model, c, k),
    }
}

/// `Λ_g(k)` by adaptive quadrature of `|M_c[g]|^-2` built from complex log-gamma,
/// regardless of whether a closed form exists.
pub fn lambda_g_quadrature(model: &NoiseModel, c: DevelopmentPoint, k: CutoffRect) -> Result<f64> {
    model.check_admissible(c)?;
    let mut product = 1.0;
    for (axis, &half_width) in k.as_array().iter().enumerate() {
        if half_width == 0.0 {
            return Ok(0.0);
        }
        let integrand = |t: f64| match model.mellin_axis(axis, c.c[axis], t) {
            Ok(m) => m.norm_sqr().recip(),
            Err(_) => f64::NAN,
        };
        // The integrand is even in t.
        product *= 2.0 * quadrature::integrate(integrand, 0.0, half_width, 0.0, 1e-13)?;
    }
    Ok(product / FOUR_PI_SQ)
}
