//! Closed-form stationary densities of the benchmark volatility processes,
//! their Mellin transforms at `c = (1, 1)`, and exact squared bias of the
//! cut-off approximation.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::mellin::{CutoffRect, DevelopmentPoint, FOUR_PI_SQ};
use crate::quadrature;
use crate::special::{log_gamma_complex, ComplexValue};

/// Analytic stationary law used as ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthSpec {
    /// `V = exp(Z)` with `Z ~ N(0, sigma)`.
    BivLognormal { sigma: [[f64; 2]; 2] },
    /// Independent `Γ(rho_l, 1)` coordinates.
    GammaProduct { rho: [f64; 2] },
    /// `V = exp(Z)` with independent `Z_l ~ Γ(rho_l, 1)`; supported on `(1, ∞)²`.
    LogGammaProduct { rho: [f64; 2] },
}

/// Truncation of frequency-domain tail integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConfig {
    /// Per-axis radius beyond which `|M_1[f]|²` is treated as zero (gamma truth only).
    pub radius: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig { radius: 60.0 }
    }
}

fn positive_pair(rho: [f64; 2], what: &str) -> Result<()> {
    if rho.iter().all(|r| r.is_finite() && *r > 0.0) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} parameters must be positive, got {rho:?}")))
    }
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

impl TruthSpec {
    /// Stationary law of the exponential OU benchmark, `Σ = (1/7)[[4, 1], [1, 2]]`.
    pub fn reference_lognormal() -> Self {
        TruthSpec::BivLognormal { sigma: [[4.0 / 7.0, 1.0 / 7.0], [1.0 / 7.0, 2.0 / 7.0]] }
    }

    pub fn biv_lognormal(sigma: [[f64; 2]; 2]) -> Result<Self> {
        let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
        if sigma[0][1] != sigma[1][0] || !(sigma[0][0] > 0.0 && det > 0.0) {
            return Err(Error::Validation(format!("covariance {sigma:?} is not symmetric positive definite")));
        }
        Ok(TruthSpec::BivLognormal { sigma })
    }

    pub fn gamma_product(rho: [f64; 2]) -> Result<Self> {
        positive_pair(rho, "gamma")?;
        Ok(TruthSpec::GammaProduct { rho })
    }

    pub fn loggamma_product(rho: [f64; 2]) -> Result<Self> {
        positive_pair(rho, "log-gamma")?;
        Ok(TruthSpec::LogGammaProduct { rho })
    }

    pub fn density_at(&self, x: [f64; 2]) -> Result<f64> {
        if !(x[0] > 0.0 && x[1] > 0.0 && x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::Domain(format!("density evaluated at nonpositive point ({}, {})", x[0], x[1])));
        }
        let v = match *self {
            TruthSpec::BivLognormal { sigma } => {
                let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[0][1];
                let (u1, u2) = (x[0].ln(), x[1].ln());
                // Quadratic form with Σ^-1 = [[s22, -s12], [-s12, s11]] / det.
                let q = (sigma[1][1] * u1 * u1 - 2.0 * sigma[0][1] * u1 * u2 + sigma[0][0] * u2 * u2) / det;
                (-0.5 * q).exp() / (2.0 * PI * det.sqrt() * x[0] * x[1])
            }
            TruthSpec::GammaProduct { rho } => (0..2)
                .map(|l| ((rho[l] - 1.0) * x[l].ln() - x[l] - ln_gamma(rho[l])).exp())
                .product(),
            TruthSpec::LogGammaProduct { rho } => {
                if x[0] <= 1.0 || x[1] <= 1.0 {
                    0.0
                } else {
                    (0..2)
                        .map(|l| ((rho[l] - 1.0) * x[l].ln().ln() - 2.0 * x[l].ln() - ln_gamma(rho[l])).exp())
                        .product()
                }
            }
        };
        Ok(v)
    }

    /// `M_1[f](t)`.
    pub fn mellin_at(&self, t: [f64; 2]) -> ComplexValue {
        match *self {
            TruthSpec::BivLognormal { sigma } => {
                let q = sigma[0][0] * t[0] * t[0] + 2.0 * sigma[0][1] * t[0] * t[1] + sigma[1][1] * t[1] * t[1];
                ComplexValue::new((-0.5 * q).exp(), 0.0)
            }
            TruthSpec::GammaProduct { rho } => {
                let mut log_m = ComplexValue::new(0.0, 0.0);
                for l in 0..2 {
                    // rho > 0 keeps the argument off the poles.
                    log_m += log_gamma_complex(ComplexValue::new(rho[l], t[l])).expect("positive real part")
                        - ln_gamma(rho[l]);
                }
                log_m.exp()
            }
            TruthSpec::LogGammaProduct { rho } => {
                let mut log_m = ComplexValue::new(0.0, 0.0);
                for l in 0..2 {
                    log_m -= ComplexValue::new(1.0, -t[l]).ln() * rho[l];
                }
                log_m.exp()
            }
        }
    }

    /// `‖f‖²_{x}` via Plancherel: the squared bias of the empty box.
    pub fn norm_sq(&self, tail: &TailConfig) -> Result<f64> {
        self.bias_norm_sq(DevelopmentPoint::default(), CutoffRect::new(0.0, 0.0)?, tail)
    }

    /// Squared bias `‖f - f_k‖²_{x} = (4π²)^-1 ∫_{outside [-k,k]} |M_1[f](t)|² dt`.
    pub fn bias_norm_sq(&self, c: DevelopmentPoint, k: CutoffRect, tail: &TailConfig) -> Result<f64> {
        if !c.is_unit() {
            return Err(Error::Validation("analytic truths are parameterized at c = (1, 1)".into()));
        }
        let complement = match *self {
            TruthSpec::BivLognormal { sigma } => lognormal_complement(sigma, k)?,
            TruthSpec::GammaProduct { rho } => {
                let radius = tail.radius;
                let m = |l: usize| {
                    move |t: f64| {
                        let lg = log_gamma_complex(ComplexValue::new(rho[l], t)).expect("positive real part");
                        (2.0 * (lg.re - ln_gamma(rho[l]))).exp()
                    }
                };
                let mut inside = [0.0; 2];
                let mut outside = [0.0; 2];
                for l in 0..2 {
                    let kl = k.as_array()[l].min(radius);
                    inside[l] = 2.0 * quadrature::integrate(m(l), 0.0, kl, 1e-17, 1e-13)?;
                    outside[l] = 2.0 * quadrature::integrate(m(l), kl, radius, 1e-17, 1e-13)?;
                }
                outside[0] * (inside[1] + outside[1]) + inside[0] * outside[1]
            }
            TruthSpec::LogGammaProduct { rho } => {
                if rho.iter().any(|&r| r <= 0.5) {
                    return Err(Error::Validation(format!("log-gamma truth with rho {rho:?} is not square integrable")));
                }
                // With t = tan(θ): ∫ (1 + t²)^-ρ dt = ∫ cos^(2ρ-2)(θ) dθ, finite range.
                let mut inside = [0.0; 2];
                let mut outside = [0.0; 2];
                for l in 0..2 {
                    let p = 2.0 * rho[l] - 2.0;
                    let m = move |theta: f64| theta.cos().max(0.0).powf(p);
                    let edge = k.as_array()[l].atan();
                    inside[l] = 2.0 * quadrature::integrate(m, 0.0, edge, 1e-17, 1e-13)?;
                    outside[l] = 2.0 * quadrature::integrate(m, edge, FRAC_PI_2, 1e-17, 1e-13)?;
                }
                outside[0] * (inside[1] + outside[1]) + inside[0] * outside[1]
            }
        };
        Ok(complement / FOUR_PI_SQ)
    }
}

// ∫ over the complement of [-k, k] of exp(-tᵀΣt), split as
// {|t1| > k1} (closed form) plus {|t1| <= k1, |t2| > k2} (erfc in t2, quadrature in t1).
fn lognormal_complement(sigma: [[f64; 2]; 2], k: CutoffRect) -> Result<f64> {
    let (a, b, d) = (sigma[0][0], sigma[0][1], sigma[1][1]);
    let det = a * d - b * b;
    let [k1, k2] = k.as_array();
    let outer = PI / det.sqrt() * libm::erfc(k1 * (det / d).sqrt());
    if k1 == 0.0 {
        return Ok(outer);
    }
    let sd = d.sqrt();
    let strip = |t1: f64| {
        let s = b * t1 / d;
        (-(det / d) * t1 * t1).exp() * 0.5 * (PI / d).sqrt() * (libm::erfc(sd * (k2 + s)) + libm::erfc(sd * (k2 - s)))
    };
    let inner = 2.0 * quadrature::integrate(strip, 0.0, k1, 1e-18, 1e-13)?;
    Ok(outer + inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rect(k1: f64, k2: f64) -> CutoffRect {
        CutoffRect::new(k1, k2).unwrap()
    }

    fn defaults() -> [TruthSpec; 3] {
        [
            TruthSpec::reference_lognormal(),
            TruthSpec::gamma_product([3.0, 3.0]).unwrap(),
            TruthSpec::loggamma_product([2.0, 2.0]).unwrap(),
        ]
    }

    // Trapezoid over u = log x on [lo, hi]² of g(u) * f(e^u) e^(u1+u2).
    fn log_space_integral<G: Fn([f64; 2]) -> ComplexValue>(spec: &TruthSpec, lo: f64, hi: f64, nodes: usize, g: G) -> ComplexValue {
        let h = (hi - lo) / (nodes - 1) as f64;
        let edge = |i: usize| if i == 0 || i + 1 == nodes { 0.5 } else { 1.0 };
        let mut acc = ComplexValue::new(0.0, 0.0);
        for i in 0..nodes {
            let u1 = lo + h * i as f64;
            for j in 0..nodes {
                let u2 = lo + h * j as f64;
                let f = spec.density_at([u1.exp(), u2.exp()]).unwrap() * (u1 + u2).exp();
                acc += g([u1, u2]) * (f * edge(i) * edge(j));
            }
        }
        acc * h * h
    }

    #[test]
    fn density_examples() {
        let ln = TruthSpec::reference_lognormal();
        assert!((ln.density_at([1.0, 1.0]).unwrap() - 7f64.sqrt() / (2.0 * PI)).abs() < 1e-15);
        // Matches the explicit form √7/(2π x1 x2) exp(-a² + ab - 2b²).
        let x: [f64; 2] = [0.54, 2.3];
        let (a, b) = (x[0].ln(), x[1].ln());
        let explicit = 7f64.sqrt() / (2.0 * PI * x[0] * x[1]) * (-a * a + a * b - 2.0 * b * b).exp();
        assert!((ln.density_at(x).unwrap() - explicit).abs() < 1e-15);
        let g = TruthSpec::gamma_product([3.0, 3.0]).unwrap();
        assert!((g.density_at([1.0, 1.0]).unwrap() - (-2f64).exp() / 4.0).abs() < 1e-15);
        let lg = TruthSpec::loggamma_product([2.5, 4.0]).unwrap();
        assert_eq!(lg.density_at([0.5, 2.0]).unwrap(), 0.0);
        assert!(ln.density_at([0.0, 1.0]).is_err());
    }

    #[test]
    fn mellin_examples() {
        for spec in defaults() {
            assert!((spec.mellin_at([0.0, 0.0]) - 1.0).norm() < 1e-15);
        }
        let v = TruthSpec::reference_lognormal().mellin_at([1.0, 0.0]);
        assert!((v.re - (-2.0f64 / 7.0).exp()).abs() < 1e-15 && v.im == 0.0);
        let v = TruthSpec::loggamma_product([2.0, 2.0]).unwrap().mellin_at([1.0, 0.0]);
        assert!((v - ComplexValue::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn mellin_is_hermitian() {
        for spec in defaults() {
            for t in [[0.4, -1.3], [2.5, 0.7]] {
                let a = spec.mellin_at([-t[0], -t[1]]);
                let b = spec.mellin_at(t).conj();
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        let mass = |spec: &TruthSpec, lo: f64, hi: f64, nodes: usize| log_space_integral(spec, lo, hi, nodes, |_| ComplexValue::new(1.0, 0.0)).re;
        let [ln, g, lg] = defaults();
        assert!((mass(&ln, -6.0, 6.0, 241) - 1.0).abs() < 1e-3);
        assert!((mass(&g, -12.0, 4.0, 801) - 1.0).abs() < 1e-3);
        assert!((mass(&lg, 0.0, 40.0, 2001) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mellin_matches_forward_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ts: Vec<[f64; 2]> = (0..5).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let [ln, g, lg] = defaults();
        for (spec, lo, hi, nodes) in [(ln, -6.0, 6.0, 241), (g, -12.0, 4.0, 801), (lg, 0.0, 40.0, 2001)] {
            for &t in &ts {
                let direct = log_space_integral(&spec, lo, hi, nodes, |u| {
                    let ph = t[0] * u[0] + t[1] * u[1];
                    ComplexValue::new(ph.cos(), ph.sin())
                });
                assert!((direct - spec.mellin_at(t)).norm() < 1e-4, "{spec:?} t = {t:?}");
            }
        }
    }

    #[test]
    fn gamma_transform_follows_stirling_envelope() {
        let rho = 3.0;
        let g = TruthSpec::gamma_product([rho, 1.0]).unwrap();
        let limit = 0.5 * (2.0 * PI).ln() - ln_gamma(rho);
        for i in 0..=70 {
            let t = 5.0 + 0.5 * i as f64;
            for s in [t, -t] {
                let v = g.mellin_at([s, 0.0]).norm().ln() + PI * t / 2.0 - (rho - 0.5) * t.ln();
                assert!((v - limit).abs() < 0.5, "t = {s}: {v}");
            }
        }
    }

    #[test]
    fn bias_examples() {
        let tail = TailConfig::default();
        let c = DevelopmentPoint::default();
        let ln = TruthSpec::reference_lognormal();
        // Oracle value from an independent 2-D adaptive quadrature of the complement.
        let far = ln.bias_norm_sq(c, rect(8.0, 8.0), &tail).unwrap();
        assert!((far - 3.245_983_652_835e-9).abs() < 1e-16, "{far:e}");
        let full = ln.bias_norm_sq(c, rect(0.0, 0.0), &tail).unwrap();
        assert!((full - 7f64.sqrt() / (4.0 * PI)).abs() < 1e-14);
        assert!((ln.norm_sq(&tail).unwrap() - full).abs() < 1e-15);
        assert!(ln.bias_norm_sq(DevelopmentPoint::new(0.9, 1.0).unwrap(), rect(1.0, 1.0), &tail).is_err());
    }

    #[test]
    fn bias_matches_complement_quadrature() {
        // Oracle: full Gaussian mass minus a brute-force trapezoid over the box.
        let ln = TruthSpec::reference_lognormal();
        let (k1, k2) = (1.0, 1.5);
        let nodes = 801;
        let (h1, h2) = (2.0 * k1 / (nodes - 1) as f64, 2.0 * k2 / (nodes - 1) as f64);
        let edge = |i: usize| if i == 0 || i + 1 == nodes { 0.5 } else { 1.0 };
        let mut inside = 0.0;
        for i in 0..nodes {
            for j in 0..nodes {
                let t = [-k1 + h1 * i as f64, -k2 + h2 * j as f64];
                inside += edge(i) * edge(j) * ln.mellin_at(t).norm_sqr();
            }
        }
        inside *= h1 * h2;
        let want = (PI * 7f64.sqrt() - inside) / FOUR_PI_SQ;
        let got = ln.bias_norm_sq(DevelopmentPoint::default(), rect(k1, k2), &TailConfig::default()).unwrap();
        assert!((got - want).abs() < 1e-7, "{got} vs {want}");
    }

    #[test]
    fn bias_is_monotone_in_each_coordinate() {
        let tail = TailConfig::default();
        let c = DevelopmentPoint::default();
        for spec in defaults() {
            let full = spec.norm_sq(&tail).unwrap();
            let mut prev = full;
            for i in 1..10 {
                let b = spec.bias_norm_sq(c, rect(0.5 * i as f64, 1.0), &tail).unwrap();
                assert!(b < prev && b >= 0.0, "{spec:?}");
                prev = b;
            }
            let mut prev = full;
            for i in 1..10 {
                let b = spec.bias_norm_sq(c, rect(1.0, 0.5 * i as f64), &tail).unwrap();
                assert!(b < prev, "{spec:?}");
                prev = b;
            }
        }
    }

    #[test]
    fn product_norms_have_closed_forms() {
        // Loggamma: ∫ (1+t²)^-2 dt = π/2 per axis.
        let lg = TruthSpec::loggamma_product([2.0, 2.0]).unwrap();
        let want = (PI / 2.0).powi(2) / FOUR_PI_SQ;
        assert!((lg.norm_sq(&TailConfig::default()).unwrap() - want).abs() < 1e-13);
        // Gamma(1): |Γ(1+it)|² = πt / sinh(πt) integrates to π/2, so ‖f‖² = (∫ x e^(-2x) dx)² = 1/16.
        let g = TruthSpec::gamma_product([1.0, 1.0]).unwrap();
        assert!((g.norm_sq(&TailConfig::default()).unwrap() - 1.0 / 16.0).abs() < 1e-12);
    }
}
