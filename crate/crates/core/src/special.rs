//! Complex log-gamma and the half-line modulus identity.

// Lanczos coefficients are kept at their published precision.
#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex numbers on the vertical Mellin line and elsewhere.
pub type ComplexValue = Complex64;

// Lanczos approximation with g = 607/128 and 15 terms (Godfrey's coefficients).
const LANCZOS_SHIFT: f64 = 5.242_187_5;
const LANCZOS_C0: f64 = 0.999_999_999_999_997_092;
const LANCZOS_COEF: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Principal log-gamma, `log Γ(z)`, for complex `z`.
///
/// Uses the Lanczos series on `Re(z) >= 0.5` and the reflection formula
/// `log Γ(z) = log π - log sin(πz) - log Γ(1-z)` below it. On the right
/// half-plane the imaginary part is the analytic continuation from the
/// positive real axis, so `log Γ(z+1) = log Γ(z) + log z` holds exactly.
pub fn log_gamma_complex(z: ComplexValue) -> Result<ComplexValue> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(Error::Pole(z.re));
    }
    if z.re < 0.5 {
        let sin_pz = (z * PI).sin();
        let reflected = lanczos(ComplexValue::new(1.0, 0.0) - z);
        return Ok(ComplexValue::new(PI.ln(), 0.0) - sin_pz.ln() - reflected);
    }
    Ok(lanczos(z))
}

fn lanczos(z: ComplexValue) -> ComplexValue {
    let mut series = ComplexValue::new(LANCZOS_C0, 0.0);
    for (j, c) in LANCZOS_COEF.iter().enumerate() {
        series += *c / (z + (j + 1) as f64);
    }
    let base = z + LANCZOS_SHIFT;
    (z + 0.5) * base.ln() - base + LN_SQRT_2PI + series.ln() - z.ln()
}

/// `|Γ(1/2 + it)|² = π / cosh(πt)`, evaluated in closed form.
pub fn gamma_half_line_abs2(t: f64) -> f64 {
    PI / (PI * t).cosh()
}
