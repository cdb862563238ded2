//! Mellin transforms on the positive quadrant: empirical transform, truncated
//! inversion over a frequency box, and Plancherel norms.
//!
//! For a development point `c` the transform of `h` is
//! `M_c[h](t) = ∫ x^(c-1+it) h(x) dx`, and the cut-off inverse of `H` is
//! `(2π)^-2 ∫_[-k,k] x^(-c-it) H(t) dt`. All frequency integrals use the
//! composite trapezoid rule on a [`FrequencyGrid`].

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::ComplexValue;

/// Default frequency step of the trapezoid grid.
pub const DEFAULT_FREQ_STEP: f64 = 0.05;

/// Relative size of the imaginary residue tolerated after a Hermitian inversion.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

pub(crate) const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// The vertical line `Re = c` on which transforms are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DevelopmentPoint {
    pub c: [f64; 2],
}

impl Default for DevelopmentPoint {
    fn default() -> Self {
        DevelopmentPoint { c: [1.0, 1.0] }
    }
}

impl DevelopmentPoint {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !c1.is_finite() || !c2.is_finite() {
            return Err(Error::Validation(format!("development point ({c1}, {c2}) is not finite")));
        }
        Ok(DevelopmentPoint { c: [c1, c2] })
    }

    pub fn is_unit(&self) -> bool {
        self.c == [1.0, 1.0]
    }

    /// Risk bounds for the cut-off estimator require `c > (3/4, 3/4)`.
    pub fn supports_risk_bound(&self) -> bool {
        self.c.iter().all(|&c| c > 0.75)
    }

    /// Adaptive selection guarantees require `c > (7/8, 7/8)`.
    pub fn supports_adaptivity(&self) -> bool {
        self.c.iter().all(|&c| c > 0.875)
    }
}

/// Anisotropic spectral cutoff `k = (k1, k2)`; the frequency box is `[-k1, k1] x [-k2, k2]`.
///
/// Zero components are admitted as a degenerate (zero-measure) box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffRect {
    k: [f64; 2],
}

impl CutoffRect {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !(k1.is_finite() && k2.is_finite()) || k1 < 0.0 || k2 < 0.0 {
            return Err(Error::Validation(format!("cutoff ({k1}, {k2}) must be finite and nonnegative")));
        }
        Ok(CutoffRect { k: [k1, k2] })
    }

    pub fn k1(&self) -> f64 {
        self.k[0]
    }

    pub fn k2(&self) -> f64 {
        self.k[1]
    }

    pub fn as_array(&self) -> [f64; 2] {
        self.k
    }

    pub fn is_degenerate(&self) -> bool {
        self.k[0] == 0.0 || self.k[1] == 0.0
    }

    /// `true` if the box of `self` contains the box of `other`.
    pub fn contains(&self, other: &CutoffRect) -> bool {
        self.k[0] >= other.k[0] && self.k[1] >= other.k[1]
    }
}

/// Tensor-product trapezoid grid on a cutoff box.
///
/// Each axis `[-k, k]` is split into `2 * ceil(k / step)` equal cells, giving an
/// odd node count symmetric about zero. The realized step may be smaller than
/// the requested one so that the box edges are nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    cutoff: CutoffRect,
    half_counts: [usize; 2],
    steps: [f64; 2],
}

impl FrequencyGrid {
    pub fn new(cutoff: CutoffRect, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Validation(format!("frequency step {step} must be positive")));
        }
        let mut half_counts = [0usize; 2];
        let mut steps = [0.0; 2];
        for axis in 0..2 {
            let k = cutoff.k[axis];
            if k > 0.0 {
                let m = (k / step - 1e-9).ceil().max(1.0) as usize;
                half_counts[axis] = m;
                steps[axis] = k / m as f64;
            }
        }
        Ok(FrequencyGrid { cutoff, half_counts, steps })
    }

    /// Grid with an explicit half node count and step per axis; the cutoff is `m * step`.
    pub(crate) fn from_parts(half_counts: [usize; 2], steps: [f64; 2]) -> Self {
        let k1 = half_counts[0] as f64 * steps[0];
        let k2 = half_counts[1] as f64 * steps[1];
        FrequencyGrid { cutoff: CutoffRect { k: [k1, k2] }, half_counts, steps }
    }

    pub fn cutoff(&self) -> CutoffRect {
        self.cutoff
    }

    /// Realized step along `axis`.
    pub fn step(&self, axis: usize) -> f64 {
        self.steps[axis]
    }

    pub fn half_count(&self, axis: usize) -> usize {
        self.half_counts[axis]
    }

    /// Number of nodes along `axis` (always odd).
    pub fn len(&self, axis: usize) -> usize {
        2 * self.half_counts[axis] + 1
    }

    pub fn node_count(&self) -> usize {
        self.len(0) * self.len(1)
    }

    pub fn node(&self, axis: usize, index: usize) -> f64 {
        (index as f64 - self.half_counts[axis] as f64) * self.steps[axis]
    }

    pub fn nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.len(axis)).map(|i| self.node(axis, i)).collect()
    }

    /// Trapezoid weights along `axis`; a degenerate axis has a single zero weight.
    pub fn weights(&self, axis: usize) -> Vec<f64> {
        let len = self.len(axis);
        let h = self.steps[axis];
        (0..len)
            .map(|i| if len == 1 { 0.0 } else if i == 0 || i + 1 == len { 0.5 * h } else { h })
            .collect()
    }
}

/// Noisy bivariate sample `(Y_j)` with its sampling step and development point.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    rows: Vec<[f64; 2]>,
    delta: f64,
    c: DevelopmentPoint,
}

impl ObservationSet {
    pub fn new(rows: Vec<[f64; 2]>, delta: f64, c: DevelopmentPoint) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("observation set is empty".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Validation(format!("sampling step {delta} must lie in (0, 1)")));
        }
        if let Some((j, row)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| !(r[0] > 0.0 && r[1] > 0.0 && r[0].is_finite() && r[1].is_finite()))
        {
            return Err(Error::Domain(format!("observation {j} = ({}, {}) is not strictly positive", row[0], row[1])));
        }
        Ok(ObservationSet { rows, delta, c })
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn c(&self) -> DevelopmentPoint {
        self.c
    }

    /// Same rows on a different development point.
    pub fn with_development_point(mut self, c: DevelopmentPoint) -> Self {
        self.c = c;
        self
    }

    pub(crate) fn log_column(&self, axis: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[axis].ln()).collect()
    }
}

/// Empirical Mellin transform `n^-1 Σ_j Y_j^(c-1+it)` at the observation set's development point.
pub fn empirical_mellin(obs: &ObservationSet, t: [f64; 2]) -> ComplexValue {
    let [c1, c2] = obs.c.c;
    let mut acc = ComplexValue::new(0.0, 0.0);
    for row in &obs.rows {
        let (l1, l2) = (row[0].ln(), row[1].ln());
        let modulus = ((c1 - 1.0) * l1 + (c2 - 1.0) * l2).exp();
        let phase = t[0] * l1 + t[1] * l2;
        acc += ComplexValue::new(modulus * phase.cos(), modulus * phase.sin());
    }
    acc / obs.n() as f64
}

fn check_point(x: [f64; 2]) -> Result<()> {
    if x[0] > 0.0 && x[1] > 0.0 && x[0].is_finite() && x[1].is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("evaluation point ({}, {}) must be strictly positive", x[0], x[1])))
    }
}

/// Cut-off inverse Mellin transform of `h` at `x`, integrated over the grid's box.
///
/// Returns the real part. For Hermitian `h` the imaginary part cancels to
/// rounding; a residue above [`IMAG_RESIDUE_TOL`] times the absolute mass of
/// the quadrature terms is reported as a numerical diagnostic.
pub fn inverse_mellin_cutoff<H>(h: H, c: DevelopmentPoint, grid: &FrequencyGrid, x: [f64; 2]) -> Result<f64>
where
    H: Fn([f64; 2]) -> ComplexValue,
{
    check_point(x)?;
    let (u1, u2) = (x[0].ln(), x[1].ln());
    let (w1, w2) = (grid.weights(0), grid.weights(1));
    let (t1s, t2s) = (grid.nodes(0), grid.nodes(1));
    let mut sum = ComplexValue::new(0.0, 0.0);
    let mut mass = 0.0;
    for (i, &t1) in t1s.iter().enumerate() {
        for (j, &t2) in t2s.iter().enumerate() {
            let w = w1[i] * w2[j];
            if w == 0.0 {
                continue;
            }
            let phase = -(t1 * u1 + t2 * u2);
            let term = ComplexValue::new(phase.cos(), phase.sin()) * h([t1, t2]) * w;
            mass += term.norm();
            sum += term;
        }
    }
    let scale = (-c.c[0] * u1 - c.c[1] * u2).exp() / FOUR_PI_SQ;
    if sum.im.abs() > IMAG_RESIDUE_TOL * mass.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "imaginary residue {:e} against mass {:e} at ({}, {})",
            sum.im, mass, x[0], x[1]
        )));
    }
    Ok(sum.re * scale)
}

/// `(4π²)^-1 ∫_[-k,k] |H(t)|² dt` on the grid.
pub fn plancherel_norm_sq<H>(h: H, grid: &FrequencyGrid) -> f64
where
    H: Fn([f64; 2]) -> ComplexValue,
{
    let (w1, w2) = (grid.weights(0), grid.weights(1));
    let (t1s, t2s) = (grid.nodes(0), grid.nodes(1));
    let mut sum = 0.0;
    for (i, &t1) in t1s.iter().enumerate() {
        for (j, &t2) in t2s.iter().enumerate() {
            sum += w1[i] * w2[j] * h([t1, t2]).norm_sqr();
        }
    }
    sum / FOUR_PI_SQ
}

/// Rectangle `[lo1, hi1] x [lo2, hi2]` inside the positive quadrant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XDomain {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Default for XDomain {
    fn default() -> Self {
        XDomain { lo: [1e-4, 1e-4], hi: [60.0, 60.0] }
    }
}

/// Default nodes per axis of the log-uniform x-space grid.
pub const DEFAULT_X_NODES: usize = 400;

/// `∫ |f(x)|² x1^(2c1-1) x2^(2c2-1) dx` over `domain`, by trapezoid on a log-uniform grid.
///
/// Substituting `x = e^u` gives the integrand `|f(e^u)|² e^(2c·u)`.
pub fn weighted_l2_norm_sq_xspace<F>(f: F, c: DevelopmentPoint, domain: XDomain, nodes: usize) -> Result<f64>
where
    F: Fn([f64; 2]) -> f64,
{
    if nodes < 2 {
        return Err(Error::Validation("x-space quadrature needs at least 2 nodes per axis".into()));
    }
    for axis in 0..2 {
        if !(domain.lo[axis] > 0.0 && domain.hi[axis] > domain.lo[axis]) {
            return Err(Error::Validation(format!("invalid x-domain {domain:?}")));
        }
    }
    let axis_grid = |axis: usize| -> (Vec<f64>, f64) {
        let (a, b) = (domain.lo[axis].ln(), domain.hi[axis].ln());
        let h = (b - a) / (nodes - 1) as f64;
        ((0..nodes).map(|i| a + h * i as f64).collect(), h)
    };
    let (u1s, h1) = axis_grid(0);
    let (u2s, h2) = axis_grid(1);
    let edge = |i: usize| if i == 0 || i + 1 == nodes { 0.5 } else { 1.0 };
    let mut sum = 0.0;
    for (i, &u1) in u1s.iter().enumerate() {
        for (j, &u2) in u2s.iter().enumerate() {
            let v = f([u1.exp(), u2.exp()]);
            sum += edge(i) * edge(j) * v * v * (2.0 * c.c[0] * u1 + 2.0 * c.c[1] * u2).exp();
        }
    }
    Ok(sum * h1 * h2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    const SIGMA: [[f64; 2]; 2] = [[4.0 / 7.0, 1.0 / 7.0], [1.0 / 7.0, 2.0 / 7.0]];

    fn gauss_mellin(t: [f64; 2]) -> ComplexValue {
        let q = SIGMA[0][0] * t[0] * t[0] + 2.0 * SIGMA[0][1] * t[0] * t[1] + SIGMA[1][1] * t[1] * t[1];
        ComplexValue::new((-0.5 * q).exp(), 0.0)
    }

    fn lognormal_density(x: [f64; 2]) -> f64 {
        let (a, b) = (x[0].ln(), x[1].ln());
        7f64.sqrt() / (2.0 * PI * x[0] * x[1]) * (-a * a + a * b - 2.0 * b * b).exp()
    }

    fn unit_obs(rows: Vec<[f64; 2]>) -> ObservationSet {
        ObservationSet::new(rows, 0.01, DevelopmentPoint::default()).unwrap()
    }

    fn grid(k1: f64, k2: f64) -> FrequencyGrid {
        FrequencyGrid::new(CutoffRect::new(k1, k2).unwrap(), DEFAULT_FREQ_STEP).unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = grid(1.0, 0.52);
        assert_eq!(g.len(0), 41);
        assert_eq!(g.len(1), 2 * 11 + 1);
        assert!((g.node(1, g.len(1) - 1) - 0.52).abs() < 1e-15);
        assert_eq!(g.node(0, 20), 0.0);
        let w: f64 = g.weights(0).iter().sum();
        assert!((w - 2.0).abs() < 1e-13);
        let g0 = grid(0.0, 1.0);
        assert_eq!(g0.len(0), 1);
        assert_eq!(g0.weights(0), vec![0.0]);
    }

    #[test]
    fn empirical_mellin_examples() {
        let one = unit_obs(vec![[1.0, 1.0]]);
        assert_eq!(empirical_mellin(&one, [3.7, -1.2]), ComplexValue::new(1.0, 0.0));
        let two = unit_obs(vec![[E, 1.0], [1.0, 1.0]]);
        let v = empirical_mellin(&two, [1.0, 0.0]);
        assert!((v.re - (1.0 + 1f64.cos()) / 2.0).abs() < 1e-15);
        assert!((v.im - 1f64.sin() / 2.0).abs() < 1e-15);
        assert!((v.re - 0.770_151).abs() < 1e-6 && (v.im - 0.420_735).abs() < 1e-6);
        let any = unit_obs(vec![[0.3, 4.0], [7.0, 0.01]]);
        assert_eq!(empirical_mellin(&any, [0.0, 0.0]), ComplexValue::new(1.0, 0.0));
    }

    #[test]
    fn observation_validation() {
        assert!(matches!(
            ObservationSet::new(vec![[1.0, 0.0]], 0.01, DevelopmentPoint::default()),
            Err(Error::Domain(_))
        ));
        assert!(ObservationSet::new(vec![], 0.01, DevelopmentPoint::default()).is_err());
        assert!(ObservationSet::new(vec![[1.0, 1.0]], 1.0, DevelopmentPoint::default()).is_err());
    }

    #[test]
    fn inversion_of_constants() {
        let c = DevelopmentPoint::default();
        let v = inverse_mellin_cutoff(|_| ComplexValue::new(1.0, 0.0), c, &grid(1.0, 1.0), [1.0, 1.0]).unwrap();
        assert!((v - 1.0 / (PI * PI)).abs() < 1e-14);
        for x in [[0.2, 3.0], [1.0, 1.0], [9.0, 0.5]] {
            let z = inverse_mellin_cutoff(|_| ComplexValue::new(0.0, 0.0), c, &grid(1.0, 1.0), x).unwrap();
            assert_eq!(z, 0.0);
        }
        assert!(inverse_mellin_cutoff(|_| ComplexValue::new(1.0, 0.0), c, &grid(1.0, 1.0), [0.0, 1.0]).is_err());
    }

    #[test]
    fn inversion_of_gaussian_transform() {
        let v = inverse_mellin_cutoff(gauss_mellin, DevelopmentPoint::default(), &grid(20.0, 20.0), [1.0, 1.0]).unwrap();
        assert!((v - 7f64.sqrt() / (2.0 * PI)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn inversion_round_trip_on_probe_points() {
        let g = grid(6.0, 6.0);
        let pts: Vec<f64> = (0..5).map(|i| 0.3 * 10f64.powf(i as f64 / 4.0)).collect();
        for &a in &pts {
            for &b in &pts {
                let v = inverse_mellin_cutoff(gauss_mellin, DevelopmentPoint::default(), &g, [a, b]).unwrap();
                assert!((v - lognormal_density([a, b])).abs() < 5e-3, "({a}, {b})");
            }
        }
    }

    #[test]
    fn non_hermitian_integrand_is_flagged() {
        let r = inverse_mellin_cutoff(|_| ComplexValue::new(0.0, 1.0), DevelopmentPoint::default(), &grid(1.0, 1.0), [1.0, 1.0]);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn plancherel_examples() {
        let one = plancherel_norm_sq(|_| ComplexValue::new(1.0, 0.0), &grid(1.0, 1.0));
        assert!((one - 1.0 / (PI * PI)).abs() < 1e-14);
        assert_eq!(plancherel_norm_sq(|_| ComplexValue::new(0.0, 0.0), &grid(1.0, 1.0)), 0.0);
        let g = plancherel_norm_sq(gauss_mellin, &grid(12.0, 12.0));
        assert!((g - 7f64.sqrt() / (4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn xspace_norm_examples() {
        let c = DevelopmentPoint::default();
        let zero = weighted_l2_norm_sq_xspace(|_| 0.0, c, XDomain::default(), DEFAULT_X_NODES).unwrap();
        assert_eq!(zero, 0.0);
        let unit = XDomain { lo: [1.0, 1.0], hi: [2.0, 2.0] };
        let ind = weighted_l2_norm_sq_xspace(|_| 1.0, c, unit, DEFAULT_X_NODES).unwrap();
        assert!((ind - 2.25).abs() < 1e-5);
        let ln = weighted_l2_norm_sq_xspace(lognormal_density, c, XDomain::default(), DEFAULT_X_NODES).unwrap();
        let want = 7f64.sqrt() / (4.0 * PI);
        assert!((ln - want).abs() / want < 1e-3);
    }

    fn sample() -> impl Strategy<Value = Vec<[f64; 2]>> {
        prop::collection::vec((1e-3f64..50.0, 1e-3f64..50.0).prop_map(|(a, b)| [a, b]), 1..40)
    }

    proptest! {
        #[test]
        fn empirical_mellin_is_hermitian(rows in sample(), t1 in -8.0f64..8.0, t2 in -8.0f64..8.0, c1 in 0.5f64..1.5, c2 in 0.5f64..1.5) {
            let obs = ObservationSet::new(rows, 0.01, DevelopmentPoint::new(c1, c2).unwrap()).unwrap();
            prop_assert_eq!(empirical_mellin(&obs, [-t1, -t2]), empirical_mellin(&obs, [t1, t2]).conj());
        }

        #[test]
        fn empirical_mellin_is_bounded_by_origin(rows in sample(), t1 in -8.0f64..8.0, t2 in -8.0f64..8.0, c1 in 0.5f64..1.5) {
            let obs = ObservationSet::new(rows, 0.01, DevelopmentPoint::new(c1, 1.0).unwrap()).unwrap();
            let origin = empirical_mellin(&obs, [0.0, 0.0]);
            prop_assert!(origin.im.abs() < 1e-15 * origin.re);
            prop_assert!(empirical_mellin(&obs, [t1, t2]).norm() <= origin.re * (1.0 + 1e-12));
        }
    }
}
