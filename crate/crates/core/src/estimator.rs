//! Spectral cut-off deconvolution estimator and its data-driven cutoff selection.
//!
//! The estimator inverts the ratio `R(t) = M̂_c(t) / M_c[g](t)` of the
//! empirical Mellin transform of the noisy sample and the noise transform
//! over the box `[-k, k]`:
//!
//! `f̂_k(x) = (4π²)^-1 ∫_[-k,k] x^(-c-it) R(t) dt`.
//!
//! `R` is tabulated once on a [`FrequencyGrid`]; density values, norms and
//! the selection contrast are all quadratures of that table.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::mellin::{CutoffRect, DevelopmentPoint, FrequencyGrid, ObservationSet, FOUR_PI_SQ, IMAG_RESIDUE_TOL};
use crate::noise::{lambda_g, NoiseModel};
use crate::special::ComplexValue;
use crate::truth::TruthSpec;

const OBS_CHUNK: usize = 1024;
const ALIGN_TOL: f64 = 1e-9;

/// Values of a complex function on the nodes of a frequency grid, indexed `[i1, i2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    grid: FrequencyGrid,
    values: Array2<ComplexValue>,
}

impl RatioTable {
    /// Tabulates `M̂_c(t) / M_c[g](t)` for the sample on every grid node.
    ///
    /// The empirical transform factorizes across coordinates, so the table is
    /// the product `A1 · A2ᵀ` of per-axis phase matrices, accumulated over
    /// chunks of observations. Only the half-plane `t1 >= 0` is computed; the
    /// rest follows from Hermitian symmetry and is filled in exactly.
    pub fn from_observations(obs: &ObservationSet, noise: &NoiseModel, grid: FrequencyGrid) -> Result<Self> {
        let c = obs.c();
        noise.check_admissible(c)?;
        let (n1, n2) = (grid.len(0), grid.len(1));
        let m1 = grid.half_count(0);
        let t1: Vec<f64> = (m1..n1).map(|i| grid.node(0, i)).collect();
        let t2 = grid.nodes(1);
        let logs1 = obs.log_column(0);
        let logs2 = obs.log_column(1);

        let mut half = Array2::<ComplexValue>::zeros((t1.len(), n2));
        let one = ComplexValue::new(1.0, 0.0);
        let mut start = 0;
        while start < obs.n() {
            let end = (start + OBS_CHUNK).min(obs.n());
            let len = end - start;
            let mut a1 = Array2::<ComplexValue>::zeros((t1.len(), len));
            let mut a2 = Array2::<ComplexValue>::zeros((len, n2));
            for j in 0..len {
                let (l1, l2) = (logs1[start + j], logs2[start + j]);
                let modulus = ((c.c[0] - 1.0) * l1 + (c.c[1] - 1.0) * l2).exp();
                for (i, &t) in t1.iter().enumerate() {
                    let ph = t * l1;
                    a1[[i, j]] = ComplexValue::new(modulus * ph.cos(), modulus * ph.sin());
                }
                for (i, &t) in t2.iter().enumerate() {
                    let ph = t * l2;
                    a2[[j, i]] = ComplexValue::new(ph.cos(), ph.sin());
                }
            }
            general_mat_mul(one, &a1, &a2, one, &mut half);
            start = end;
        }

        let inv_n = 1.0 / obs.n() as f64;
        let g1 = t1
            .iter()
            .map(|&t| noise.mellin_axis(0, c.c[0], t))
            .collect::<Result<Vec<_>>>()?;
        let g2 = t2
            .iter()
            .map(|&t| noise.mellin_axis(1, c.c[1], t))
            .collect::<Result<Vec<_>>>()?;
        for ((i, j), v) in half.indexed_iter_mut() {
            *v = *v * inv_n / (g1[i] * g2[j]);
        }

        let mut values = Array2::<ComplexValue>::zeros((n1, n2));
        values.slice_mut(s![m1.., ..]).assign(&half);
        for i in 0..m1 {
            for j in 0..n2 {
                values[[i, j]] = values[[n1 - 1 - i, n2 - 1 - j]].conj();
            }
        }
        // Row t1 = 0 must be Hermitian on its own.
        let m2 = grid.half_count(1);
        for j in 0..=m2 {
            let mirror = n2 - 1 - j;
            let v = 0.5 * (values[[m1, j]] + values[[m1, mirror]].conj());
            values[[m1, j]] = v;
            values[[m1, mirror]] = v.conj();
        }
        Ok(RatioTable { grid, values })
    }

    /// Tabulates an arbitrary function; used for synthetic ratio tables.
    pub fn from_fn<F: Fn([f64; 2]) -> ComplexValue>(grid: FrequencyGrid, f: F) -> Self {
        let values = Array2::from_shape_fn((grid.len(0), grid.len(1)), |(i, j)| f([grid.node(0, i), grid.node(1, j)]));
        RatioTable { grid, values }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<ComplexValue> {
        &self.values
    }

    /// Restriction to a smaller box whose edges fall on existing nodes.
    pub fn sub_table(&self, k: CutoffRect) -> Result<Self> {
        let mut half = [0usize; 2];
        for (axis, slot) in half.iter_mut().enumerate() {
            let kk = k.as_array()[axis];
            let h = self.grid.step(axis);
            let m = if h > 0.0 { (kk / h).round() } else { 0.0 };
            if (m * h - kk).abs() > ALIGN_TOL || m as usize > self.grid.half_count(axis) {
                return Err(Error::Validation(format!(
                    "cutoff {kk} on axis {axis} is not a node of the cached grid (step {h}, half count {})",
                    self.grid.half_count(axis)
                )));
            }
            *slot = m as usize;
        }
        let (c1, c2) = (self.grid.half_count(0), self.grid.half_count(1));
        let values = self
            .values
            .slice(s![c1 - half[0]..=c1 + half[0], c2 - half[1]..=c2 + half[1]])
            .to_owned();
        let grid = FrequencyGrid::from_parts(half, [self.grid.step(0), self.grid.step(1)]);
        Ok(RatioTable { grid, values })
    }

    /// `(4π²)^-1 Σ w |R|²`.
    pub fn norm_sq(&self) -> f64 {
        self.weighted_sum(|v| v.norm_sqr())
    }

    /// Trapezoid sum of `f(R)` over the table, divided by `4π²`.
    pub(crate) fn weighted_sum<F: Fn(ComplexValue) -> f64>(&self, f: F) -> f64 {
        let (w1, w2) = (self.grid.weights(0), self.grid.weights(1));
        let mut sum = 0.0;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let mut acc = 0.0;
            for (j, v) in row.iter().enumerate() {
                acc += w2[j] * f(*v);
            }
            sum += w1[i] * acc;
        }
        sum / FOUR_PI_SQ
    }

    /// Inverse transform on the tensor grid `xs x ys`; entry `[p, q]` is the value at `(xs[p], ys[q])`.
    fn invert_on(&self, c: DevelopmentPoint, xs: &[f64], ys: &[f64]) -> Result<Array2<f64>> {
        for &x in xs.iter().chain(ys) {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Domain(format!("evaluation coordinate {x} must be strictly positive")));
            }
        }
        let phase_matrix = |axis: usize, points: &[f64]| {
            let nodes = self.grid.nodes(axis);
            let weights = self.grid.weights(axis);
            Array2::from_shape_fn((points.len(), nodes.len()), |(p, i)| {
                let ph = -nodes[i] * points[p].ln();
                ComplexValue::new(ph.cos(), ph.sin()) * weights[i]
            })
        };
        let e1 = phase_matrix(0, xs);
        let e2 = phase_matrix(1, ys);
        let full = e1.dot(&self.values).dot(&e2.t());
        let mass = self.weighted_sum(|v| v.norm()) * FOUR_PI_SQ;
        let mut out = Array2::<f64>::zeros((xs.len(), ys.len()));
        for ((p, q), v) in full.indexed_iter() {
            if v.im.abs() > IMAG_RESIDUE_TOL * mass.max(f64::MIN_POSITIVE) {
                return Err(Error::Numerical(format!(
                    "imaginary residue {:e} against mass {mass:e} at ({}, {})",
                    v.im, xs[p], ys[q]
                )));
            }
            let scale = (-c.c[0] * xs[p].ln() - c.c[1] * ys[q].ln()).exp() / FOUR_PI_SQ;
            out[[p, q]] = v.re * scale;
        }
        Ok(out)
    }
}

/// Cut-off estimate at a fixed `k`: the cached ratio table plus its context.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateHandle {
    noise: NoiseModel,
    c: DevelopmentPoint,
    sample_size: usize,
    table: RatioTable,
}

/// Builds `f̂_k` for the sample with a trapezoid grid of step `freq_step` on `[-k, k]`.
pub fn build_estimate(obs: &ObservationSet, noise: &NoiseModel, k: CutoffRect, freq_step: f64) -> Result<EstimateHandle> {
    let grid = FrequencyGrid::new(k, freq_step)?;
    check_moment(obs)?;
    let table = RatioTable::from_observations(obs, noise, grid)?;
    Ok(EstimateHandle { noise: *noise, c: obs.c(), sample_size: obs.n(), table })
}

// E(Y^(c-1)) is estimated by M̂_c(0); it must be finite for the estimator to exist.
fn check_moment(obs: &ObservationSet) -> Result<()> {
    if obs.c().is_unit() {
        return Ok(());
    }
    let m0 = crate::mellin::empirical_mellin(obs, [0.0, 0.0]);
    if m0.re.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain("empirical moment E(Y^(c-1)) is not finite".into()))
    }
}

impl EstimateHandle {
    /// Handle around a synthetic ratio function, e.g. the exact transform of a truth.
    pub fn from_ratio_fn<F>(noise: NoiseModel, c: DevelopmentPoint, grid: FrequencyGrid, f: F) -> Self
    where
        F: Fn([f64; 2]) -> ComplexValue,
    {
        EstimateHandle { noise, c, sample_size: 0, table: RatioTable::from_fn(grid, f) }
    }

    pub(crate) fn from_table(noise: NoiseModel, c: DevelopmentPoint, sample_size: usize, table: RatioTable) -> Self {
        EstimateHandle { noise, c, sample_size, table }
    }

    pub fn cutoff(&self) -> CutoffRect {
        self.table.grid.cutoff()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.table.grid
    }

    pub fn table(&self) -> &RatioTable {
        &self.table
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn development_point(&self) -> DevelopmentPoint {
        self.c
    }

    /// Number of observations behind the table (0 for synthetic handles).
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    /// `f̂_k(x)`; can be negative.
    pub fn evaluate_density(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.table.invert_on(self.c, &[x[0]], &[x[1]])?[[0, 0]])
    }

    /// `max(f̂_k(x), 0)`, for presentation only.
    pub fn evaluate_clipped(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.evaluate_density(x)?.max(0.0))
    }

    /// `f̂_k` on the tensor grid `xs x ys`, indexed `[p, q]`.
    pub fn evaluate_surface(&self, xs: &[f64], ys: &[f64]) -> Result<Array2<f64>> {
        self.table.invert_on(self.c, xs, ys)
    }

    /// `‖f̂_k‖²` in the weighted norm, via Plancherel.
    pub fn estimate_norm_sq(&self) -> f64 {
        self.table.norm_sq()
    }
}

/// `f_k(x)`: cut-off inversion of the exact transform of `truth`.
pub fn truth_approximation(truth: &TruthSpec, c: DevelopmentPoint, grid: &FrequencyGrid, x: [f64; 2]) -> Result<f64> {
    if !c.is_unit() {
        return Err(Error::Validation("analytic truths are parameterized at c = (1, 1)".into()));
    }
    crate::mellin::inverse_mellin_cutoff(|t| truth.mellin_at(t), c, grid, x)
}

/// Penalty family used in the selection contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyMode {
    /// `χ k1 k2 exp(π(k1 + k2)) / n`, candidates with `exp(π(k1 + k2)) <= n`.
    Volatility,
    /// `χ μ̂_Y k1 k2 Λ_g(k) / n`, candidates with `Λ_g(k) <= n`.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub chi: f64,
    /// Lattice spacing `δk` of candidate cutoffs.
    pub grid_step: f64,
    pub mode: PenaltyMode,
    /// Trapezoid step of the frequency grid.
    pub freq_step: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { chi: 1e-2, grid_step: 0.25, mode: PenaltyMode::Volatility, freq_step: crate::mellin::DEFAULT_FREQ_STEP }
    }
}

impl SelectionConfig {
    /// Defaults for the direct (noise-free) estimator: general penalty with `χ = 1`.
    pub fn noiseless_default() -> Self {
        SelectionConfig { chi: 1.0, mode: PenaltyMode::General, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("chi", self.chi), ("grid_step", self.grid_step), ("freq_step", self.freq_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Common table step: the largest step not above `freq_step` that divides `grid_step`.
    fn table_step(&self) -> f64 {
        self.grid_step / (self.grid_step / self.freq_step - ALIGN_TOL).ceil().max(1.0)
    }
}

/// Candidate cutoffs `{δk, 2δk, ..., ⌊log n⌋}²` filtered by the variance constraint,
/// in lexicographic order.
pub fn candidate_grid(n: usize, noise: &NoiseModel, c: DevelopmentPoint, config: &SelectionConfig) -> Result<Vec<CutoffRect>> {
    config.validate()?;
    if n < 2 {
        return Err(Error::Validation(format!("candidate grid needs n >= 2, got {n}")));
    }
    let top = (n as f64).ln().floor();
    let coords: Vec<f64> = (1..)
        .map(|j| j as f64 * config.grid_step)
        .take_while(|&k| k <= top + ALIGN_TOL)
        .collect();
    let mut out = Vec::new();
    for &k1 in &coords {
        for &k2 in &coords {
            let k = CutoffRect::new(k1, k2)?;
            let admissible = match config.mode {
                PenaltyMode::Volatility => (std::f64::consts::PI * (k1 + k2)).exp() <= n as f64,
                PenaltyMode::General => lambda_g(noise, c, k)? <= n as f64,
            };
            if admissible {
                out.push(k);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyGrid(format!(
            "no cutoff on the lattice with step {} satisfies the constraint for n = {n}",
            config.grid_step
        )));
    }
    Ok(out)
}

/// `μ̂_Y = n^-1 Σ Y_j^(2(c-1))`; exactly 1 at `c = (1, 1)`.
pub fn moment_estimate(obs: &ObservationSet) -> f64 {
    let c = obs.c();
    if c.is_unit() {
        return 1.0;
    }
    let sum: f64 = obs
        .rows()
        .iter()
        .map(|r| (2.0 * (c.c[0] - 1.0) * r[0].ln() + 2.0 * (c.c[1] - 1.0) * r[1].ln()).exp())
        .sum();
    sum / obs.n() as f64
}

pub fn penalty(k: CutoffRect, obs: &ObservationSet, noise: &NoiseModel, config: &SelectionConfig) -> Result<f64> {
    let n = obs.n() as f64;
    let area = k.k1() * k.k2();
    Ok(match config.mode {
        PenaltyMode::Volatility => config.chi * area * (std::f64::consts::PI * (k.k1() + k.k2())).exp() / n,
        PenaltyMode::General => config.chi * moment_estimate(obs) * area * lambda_g(noise, obs.c(), k)? / n,
    })
}

/// Contrast components of one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub k: CutoffRect,
    pub norm_sq: f64,
    pub penalty: f64,
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDiagnostics {
    pub candidates: Vec<CandidateScore>,
    pub chosen: usize,
}

impl SelectionDiagnostics {
    pub fn chosen_score(&self) -> &CandidateScore {
        &self.candidates[self.chosen]
    }
}

/// Outcome of the penalized contrast minimization, with the estimate at the selected cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub cutoff: CutoffRect,
    pub diagnostics: SelectionDiagnostics,
    pub estimate: EstimateHandle,
}

/// `k̂ = argmin_k -‖f̂_k‖² + pen(k)` over [`candidate_grid`]; ties go to the
/// lexicographically smallest candidate.
pub fn select_cutoff(obs: &ObservationSet, noise: &NoiseModel, config: &SelectionConfig) -> Result<Selection> {
    let candidates = candidate_grid(obs.n(), noise, obs.c(), config)?;
    check_moment(obs)?;
    let step = config.table_step();
    let k1max = candidates.iter().map(|k| k.k1()).fold(0.0, f64::max);
    let k2max = candidates.iter().map(|k| k.k2()).fold(0.0, f64::max);
    let half = [(k1max / step).round() as usize, (k2max / step).round() as usize];
    let table = RatioTable::from_observations(obs, noise, FrequencyGrid::from_parts(half, [step, step]))?;

    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (idx, &k) in candidates.iter().enumerate() {
        let norm_sq = table.sub_table(k)?.norm_sq();
        let pen = penalty(k, obs, noise, config)?;
        let contrast = -norm_sq + pen;
        if best.is_none_or(|(_, b)| contrast < b) {
            best = Some((idx, contrast));
        }
        scores.push(CandidateScore { k, norm_sq, penalty: pen, contrast });
    }
    let (chosen, _) = best.expect("candidate grid is never empty");
    let cutoff = candidates[chosen];
    let estimate = EstimateHandle::from_table(*noise, obs.c(), obs.n(), table.sub_table(cutoff)?);
    Ok(Selection { cutoff, diagnostics: SelectionDiagnostics { candidates: scores, chosen }, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mellin::{empirical_mellin, weighted_l2_norm_sq_xspace, XDomain, DEFAULT_FREQ_STEP};
    use crate::noise::mellin_g;
    use crate::truth::TailConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn rect(k1: f64, k2: f64) -> CutoffRect {
        CutoffRect::new(k1, k2).unwrap()
    }

    fn obs(rows: Vec<[f64; 2]>) -> ObservationSet {
        ObservationSet::new(rows, 0.01, DevelopmentPoint::default()).unwrap()
    }

    fn lognormal_rows(n: usize, seed: u64) -> Vec<[f64; 2]> {
        // Z = L ξ with L the Cholesky factor of (1/7)[[4, 1], [1, 2]].
        let l11 = (4.0f64 / 7.0).sqrt();
        let l21 = (1.0 / 7.0) / l11;
        let l22 = (2.0 / 7.0 - l21 * l21).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                [(l11 * a).exp(), (l21 * a + l22 * b).exp()]
            })
            .collect()
    }

    fn noisy_rows(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        lognormal_rows(n, seed)
            .into_iter()
            .map(|[a, b]| {
                let (u, v): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                [a * u * u, b * v * v]
            })
            .collect()
    }

    #[test]
    fn single_unit_observation_without_noise() {
        let h = build_estimate(&obs(vec![[1.0, 1.0]]), &NoiseModel::noiseless(), rect(1.0, 1.0), DEFAULT_FREQ_STEP).unwrap();
        assert!((h.evaluate_density([1.0, 1.0]).unwrap() - 1.0 / (PI * PI)).abs() < 1e-14);
        assert!((h.estimate_norm_sq() - 1.0 / (PI * PI)).abs() < 1e-14);
        assert_eq!(h.sample_size(), 1);
    }

    #[test]
    fn table_matches_pointwise_transforms() {
        let o = obs(noisy_rows(300, 5));
        let chi = NoiseModel::chi_squared_1();
        let h = build_estimate(&o, &chi, rect(1.5, 0.75), DEFAULT_FREQ_STEP).unwrap();
        let grid = h.grid().clone();
        for &(i, j) in &[(0, 0), (3, 20), (30, 15), (60, 0), (45, 30), (30, 7)] {
            let t = [grid.node(0, i), grid.node(1, j)];
            let want = empirical_mellin(&o, t) / mellin_g(&chi, o.c(), t).unwrap();
            let got = h.table().values()[[i, j]];
            assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0), "node {t:?}");
        }
    }

    #[test]
    fn table_is_exactly_hermitian() {
        let o = obs(noisy_rows(200, 9));
        let h = build_estimate(&o, &NoiseModel::chi_squared_1(), rect(1.0, 1.25), DEFAULT_FREQ_STEP).unwrap();
        let v = h.table().values();
        let (n1, n2) = v.dim();
        for i in 0..n1 {
            for j in 0..n2 {
                assert_eq!(v[[i, j]], v[[n1 - 1 - i, n2 - 1 - j]].conj());
            }
        }
        assert!(h.evaluate_density([0.7, 1.3]).is_ok());
    }

    #[test]
    fn zero_table_gives_zero() {
        let grid = FrequencyGrid::new(rect(2.0, 2.0), DEFAULT_FREQ_STEP).unwrap();
        let h = EstimateHandle::from_ratio_fn(NoiseModel::noiseless(), DevelopmentPoint::default(), grid, |_| ComplexValue::new(0.0, 0.0));
        for x in [[0.1, 0.1], [1.0, 3.0], [7.0, 0.4]] {
            assert_eq!(h.evaluate_density(x).unwrap(), 0.0);
        }
        assert_eq!(h.estimate_norm_sq(), 0.0);
        assert!(h.evaluate_density([-1.0, 1.0]).is_err());
    }

    #[test]
    fn norms_grow_with_nested_boxes() {
        let o = obs(noisy_rows(500, 1));
        let chi = NoiseModel::chi_squared_1();
        let mut prev = 0.0;
        for k in [0.25, 0.5, 1.0, 1.25] {
            let v = build_estimate(&o, &chi, rect(k, 1.0), DEFAULT_FREQ_STEP).unwrap().estimate_norm_sq();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn noiseless_estimate_is_consistent_at_the_mode() {
        let o = obs(lognormal_rows(10_000, 42));
        let h = build_estimate(&o, &NoiseModel::noiseless(), rect(3.0, 3.0), DEFAULT_FREQ_STEP).unwrap();
        let v = h.evaluate_density([1.0, 1.0]).unwrap();
        // f̂_k is unbiased for f_k, not f: f_(3,3)(1,1) = 0.354261 (independent 2-D quadrature).
        let grid = FrequencyGrid::new(rect(3.0, 3.0), DEFAULT_FREQ_STEP).unwrap();
        let target = truth_approximation(&TruthSpec::reference_lognormal(), DevelopmentPoint::default(), &grid, [1.0, 1.0]).unwrap();
        assert!((target - 0.354_260_843).abs() < 1e-4, "{target}");
        assert!((v - target).abs() < 0.05, "{v}");
    }

    #[test]
    fn scale_equivariance() {
        let rows = lognormal_rows(400, 8);
        let a = [2.0, 3.0];
        let scaled: Vec<[f64; 2]> = rows.iter().map(|r| [r[0] * a[0], r[1] * a[1]]).collect();
        let none = NoiseModel::noiseless();
        let h = build_estimate(&obs(rows), &none, rect(2.0, 2.0), DEFAULT_FREQ_STEP).unwrap();
        let hs = build_estimate(&obs(scaled), &none, rect(2.0, 2.0), DEFAULT_FREQ_STEP).unwrap();
        for x in [[1.0, 1.0], [0.5, 4.0], [3.0, 0.8]] {
            let want = h.evaluate_density([x[0] / a[0], x[1] / a[1]]).unwrap() / (a[0] * a[1]);
            assert!((hs.evaluate_density(x).unwrap() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn builds_are_deterministic() {
        let o = obs(noisy_rows(2500, 77));
        let chi = NoiseModel::chi_squared_1();
        let a = build_estimate(&o, &chi, rect(1.25, 1.5), DEFAULT_FREQ_STEP).unwrap();
        let b = build_estimate(&o, &chi, rect(1.25, 1.5), DEFAULT_FREQ_STEP).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.estimate_norm_sq().to_bits(), b.estimate_norm_sq().to_bits());
    }

    #[test]
    fn plancherel_norm_matches_xspace_quadrature() {
        let o = obs(lognormal_rows(2000, 13));
        let h = build_estimate(&o, &NoiseModel::noiseless(), rect(2.0, 2.0), DEFAULT_FREQ_STEP).unwrap();
        // The box-truncated estimate rings like a sinc in log x, so the domain must be wide.
        let n1 = 800;
        let domain = XDomain { lo: [(-15f64).exp(); 2], hi: [15f64.exp(); 2] };
        let us: Vec<f64> = (0..n1).map(|i| (domain.lo[0].ln() + (domain.hi[0] / domain.lo[0]).ln() * i as f64 / (n1 - 1) as f64).exp()).collect();
        let surface = h.evaluate_surface(&us, &us).unwrap();
        let nearest = |x: f64| {
            (0..n1).min_by(|&a, &b| (us[a] - x).abs().total_cmp(&(us[b] - x).abs())).unwrap()
        };
        let lookup = |x: [f64; 2]| surface[[nearest(x[0]), nearest(x[1])]];
        let xnorm = weighted_l2_norm_sq_xspace(lookup, DevelopmentPoint::default(), domain, n1).unwrap();
        let fnorm = h.estimate_norm_sq();
        assert!((xnorm - fnorm).abs() / fnorm < 2e-2, "{xnorm} vs {fnorm}");
    }

    #[test]
    fn truth_approximation_examples() {
        let truth = TruthSpec::reference_lognormal();
        let c = DevelopmentPoint::default();
        let g6 = FrequencyGrid::new(rect(6.0, 6.0), DEFAULT_FREQ_STEP).unwrap();
        let v = truth_approximation(&truth, c, &g6, [1.0, 1.0]).unwrap();
        // Oracle 0.41993885590 from independent 2-D adaptive quadrature; 1.15e-3 below f(1, 1).
        assert!((v - 0.419_938_855_898).abs() < 2e-6, "{v}");
        assert!((v - 7f64.sqrt() / (2.0 * PI)).abs() < 2e-3);
        let g0 = FrequencyGrid::new(rect(0.0, 0.0), DEFAULT_FREQ_STEP).unwrap();
        assert_eq!(truth_approximation(&truth, c, &g0, [1.0, 1.0]).unwrap(), 0.0);
        let tiny = FrequencyGrid::new(rect(1e-4, 1e-4), DEFAULT_FREQ_STEP).unwrap();
        assert!(truth_approximation(&truth, c, &tiny, [1.0, 1.0]).unwrap().abs() < 1e-8);
        // ‖f - f_k‖² = ‖f‖² - ‖f_k‖² since f_k is the orthogonal projection onto the box.
        let g1 = FrequencyGrid::new(rect(1.0, 1.0), 0.005).unwrap();
        let inside = crate::mellin::plancherel_norm_sq(|t| truth.mellin_at(t), &g1);
        let tail = TailConfig::default();
        let bias = truth.bias_norm_sq(c, rect(1.0, 1.0), &tail).unwrap();
        let gap = truth.norm_sq(&tail).unwrap() - inside - bias;
        assert!(gap.abs() < 1e-6, "{gap:e}");
    }

    #[test]
    fn candidate_grid_examples() {
        let chi = NoiseModel::chi_squared_1();
        let c = DevelopmentPoint::default();
        let integer = SelectionConfig { grid_step: 1.0, ..SelectionConfig::default() };
        assert_eq!(candidate_grid(5000, &chi, c, &integer).unwrap(), vec![rect(1.0, 1.0)]);
        let half = SelectionConfig { grid_step: 0.5, ..SelectionConfig::default() };
        let grid = candidate_grid(5000, &chi, c, &half).unwrap();
        for k in [rect(0.5, 0.5), rect(1.0, 1.0), rect(0.5, 2.0), rect(1.0, 1.5)] {
            assert!(grid.contains(&k), "{k:?}");
        }
        assert!(!grid.contains(&rect(1.5, 1.5)));
        assert!(grid.iter().all(|k| k.k1() + k.k2() <= (5000f64).ln() / PI));
        assert!(matches!(candidate_grid(2, &chi, c, &integer), Err(Error::EmptyGrid(_))));
        let general = SelectionConfig { mode: PenaltyMode::General, grid_step: 1.0, ..SelectionConfig::default() };
        let g = candidate_grid(5000, &NoiseModel::noiseless(), c, &general).unwrap();
        assert_eq!(g.len(), 64);
    }

    #[test]
    fn penalty_examples() {
        let o = obs(vec![[1.0, 1.0]; 5000]);
        let chi = NoiseModel::chi_squared_1();
        let config = SelectionConfig { chi: 1.0, ..SelectionConfig::default() };
        let p = penalty(rect(1.0, 1.0), &o, &chi, &config).unwrap();
        assert!((p - (2.0 * PI).exp() / 5000.0).abs() < 1e-15);
        assert!((p - 0.107_098_331).abs() < 1e-8);
        let rows = noisy_rows(50, 2);
        assert_eq!(moment_estimate(&obs(rows.clone())), 1.0);
        let general = SelectionConfig { mode: PenaltyMode::General, ..config };
        let o = obs(rows);
        let pg = penalty(rect(1.0, 1.0), &o, &chi, &general).unwrap();
        assert!((pg - lambda_g(&chi, o.c(), rect(1.0, 1.0)).unwrap() / 50.0).abs() < 1e-15);
    }

    #[test]
    fn huge_penalty_selects_the_first_candidate() {
        let o = obs(noisy_rows(3000, 4));
        let chi = NoiseModel::chi_squared_1();
        let config = SelectionConfig { chi: 1e12, ..SelectionConfig::default() };
        let sel = select_cutoff(&o, &chi, &config).unwrap();
        assert_eq!(sel.diagnostics.chosen, 0);
        assert_eq!(sel.cutoff, rect(0.25, 0.25));
    }

    #[test]
    fn single_candidate_is_selected() {
        let o = obs(noisy_rows(600, 4));
        let config = SelectionConfig { grid_step: 1.0, ..SelectionConfig::default() };
        let sel = select_cutoff(&o, &NoiseModel::chi_squared_1(), &config).unwrap();
        assert_eq!(sel.diagnostics.candidates.len(), 1);
        assert_eq!(sel.cutoff, rect(1.0, 1.0));
    }

    #[test]
    fn constant_norm_selection_matches_enumeration() {
        // Single unit observation without noise: ‖f̂_k‖² = k1 k2 / π² exactly.
        let o = obs(vec![[1.0, 1.0]; 3000]);
        let none = NoiseModel::noiseless();
        for chi in [1e-4, 1e-3, 1e-2, 0.1] {
            let config = SelectionConfig { chi, ..SelectionConfig::default() };
            let sel = select_cutoff(&o, &none, &config).unwrap();
            let n = 3000.0;
            let brute = candidate_grid(3000, &none, o.c(), &config)
                .unwrap()
                .into_iter()
                .map(|k| (k, k.k1() * k.k2() * (chi * (PI * (k.k1() + k.k2())).exp() / n - 1.0 / (PI * PI))))
                .fold(None::<(CutoffRect, f64)>, |best, (k, v)| match best {
                    Some((_, b)) if b <= v => best,
                    _ => Some((k, v)),
                })
                .unwrap();
            assert_eq!(sel.cutoff, brute.0, "chi = {chi}");
            for s in &sel.diagnostics.candidates {
                assert!((s.norm_sq - s.k.k1() * s.k.k2() / (PI * PI)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn selection_matches_independent_builds() {
        let o = obs(noisy_rows(2000, 21));
        let chi = NoiseModel::chi_squared_1();
        let config = SelectionConfig::default();
        let sel = select_cutoff(&o, &chi, &config).unwrap();
        let mut best: Option<(CutoffRect, f64)> = None;
        for s in &sel.diagnostics.candidates {
            let h = build_estimate(&o, &chi, s.k, config.freq_step).unwrap();
            let norm = h.estimate_norm_sq();
            assert!((norm - s.norm_sq).abs() <= 1e-10 * norm.max(1e-3));
            let contrast = -norm + penalty(s.k, &o, &chi, &config).unwrap();
            if best.is_none_or(|(_, b)| contrast < b) {
                best = Some((s.k, contrast));
            }
        }
        assert_eq!(sel.cutoff, best.unwrap().0);
        let direct = build_estimate(&o, &chi, sel.cutoff, config.freq_step).unwrap();
        let x = [0.8, 1.1];
        assert!((direct.evaluate_density(x).unwrap() - sel.estimate.evaluate_density(x).unwrap()).abs() < 1e-12);
    }
}
