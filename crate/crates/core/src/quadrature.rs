//! Adaptive Gauss-Kronrod (7, 15) quadrature on finite intervals.

// Node and weight tables are kept at their published precision.
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

const MAX_DEPTH: u32 = 60;

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` to within `max(abs_tol, rel_tol * |I|)`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (whole, _) = kronrod(&f, a, b);
    let value = refine(&f, a, b, abs_tol, rel_tol, whole.abs(), 0)?;
    if !value.is_finite() {
        return Err(Error::Divergent(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(value)
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    scale: f64,
    depth: u32,
) -> Result<f64> {
    let (value, err) = kronrod(f, a, b);
    if !value.is_finite() {
        return Err(Error::Divergent(format!("non-finite integrand on [{a}, {b}]")));
    }
    let tol = abs_tol.max(rel_tol * scale.max(value.abs()));
    if err <= tol {
        return Ok(value);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Divergent(format!(
            "no convergence on [{a}, {b}] (error estimate {err:e})"
        )));
    }
    let mid = 0.5 * (a + b);
    let left = refine(f, a, mid, 0.5 * abs_tol, rel_tol, scale, depth + 1)?;
    let right = refine(f, mid, b, 0.5 * abs_tol, rel_tol, scale, depth + 1)?;
    Ok(left + right)
}
