//! Integrated squared error against analytic truths and the Monte-Carlo driver.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{select_cutoff, EstimateHandle, SelectionConfig, SelectionDiagnostics};
use crate::mellin::{CutoffRect, FOUR_PI_SQ};
use crate::noise::NoiseModel;
use crate::processes::{
    generate_observations, simulate_cir, simulate_exp_cir, simulate_exp_ou, stationary_cov_ou, CIRParams, OUParams,
    PathBundle, PathConfig,
};
use crate::truth::{TailConfig, TruthSpec};

/// `‖f̂ - f‖²` in the weighted norm, split into the in-box frequency error and the cut-off bias.
pub fn ise_against_truth(handle: &EstimateHandle, truth: &TruthSpec, tail: &TailConfig) -> Result<f64> {
    Ok(ise_parts(handle, truth, tail)?.iter().sum())
}

/// `[in_box, bias]` with `ise = in_box + bias`.
pub fn ise_parts(handle: &EstimateHandle, truth: &TruthSpec, tail: &TailConfig) -> Result<[f64; 2]> {
    let c = handle.development_point();
    let bias = truth.bias_norm_sq(c, handle.cutoff(), tail)?;
    let grid = handle.grid();
    let (w1, w2) = (grid.weights(0), grid.weights(1));
    let (t1, t2) = (grid.nodes(0), grid.nodes(1));
    let mut in_box = 0.0;
    for (i, row) in handle.table().values().rows().into_iter().enumerate() {
        let mut acc = 0.0;
        for (j, r) in row.iter().enumerate() {
            acc += w2[j] * (r - truth.mellin_at([t1[i], t2[j]])).norm_sqr();
        }
        in_box += w1[i] * acc;
    }
    Ok([in_box / FOUR_PI_SQ, bias])
}

/// Volatility model driving a Monte-Carlo study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessSpec {
    ExpOu(OUParams),
    Cir(CIRParams),
    ExpCir(CIRParams),
}

impl ProcessSpec {
    pub fn simulate(&self, cfg: &PathConfig) -> Result<PathBundle> {
        match self {
            ProcessSpec::ExpOu(p) => simulate_exp_ou(p, cfg),
            ProcessSpec::Cir(p) => simulate_cir(p, cfg),
            ProcessSpec::ExpCir(p) => simulate_exp_cir(p, cfg),
        }
    }

    /// Stationary density of `V`, used as the reference for the error.
    pub fn truth(&self) -> Result<TruthSpec> {
        match self {
            ProcessSpec::ExpOu(p) => TruthSpec::biv_lognormal(stationary_cov_ou(p)?),
            ProcessSpec::Cir(p) | ProcessSpec::ExpCir(p) => {
                p.validate()?;
                let mut shape = [0.0; 2];
                for (l, s) in shape.iter_mut().enumerate() {
                    let (a, rate) = p.stationary_shape_rate(l);
                    if (rate - 1.0).abs() > 1e-12 {
                        return Err(Error::Validation(format!(
                            "axis {l}: stationary rate {rate} has no analytic truth (need 2κ = σ²)"
                        )));
                    }
                    // σ = √2 leaves rounding noise in 2κθ/σ²; prefer the declared target.
                    let target = p.rho_target[l] as f64;
                    *s = if (a - target).abs() < 1e-9 * target { target } else { a };
                }
                match self {
                    ProcessSpec::Cir(_) => TruthSpec::gamma_product(shape),
                    _ => TruthSpec::loggamma_product(shape),
                }
            }
        }
    }
}

/// Tensor grid of evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl ProbeGrid {
    /// `count` log-uniform points per axis on `[lo, hi]`.
    pub fn log_uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 2 {
            return Err(Error::Validation(format!("probe grid [{lo}, {hi}] with {count} points")));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let axis: Vec<f64> = (0..count)
            .map(|i| match i {
                0 => lo,
                _ if i == count - 1 => hi,
                _ => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
            })
            .collect();
        Ok(ProbeGrid { xs: axis.clone(), ys: axis })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.xs.len(), self.ys.len())
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        if axis == 0 {
            &self.xs
        } else {
            &self.ys
        }
    }
}

impl Default for ProbeGrid {
    fn default() -> Self {
        ProbeGrid::log_uniform(0.1, 5.0, 60).expect("valid default grid")
    }
}

pub const DEFAULT_SECTION: f64 = 0.54;

#[derive(Debug, Clone, PartialEq)]
pub struct MCConfig {
    pub process: ProcessSpec,
    /// Template; the seed is replaced per replication.
    pub path: PathConfig,
    pub noise: NoiseModel,
    pub selection: SelectionConfig,
    /// Selection for the estimator on the direct observations `V̄`.
    pub oracle_selection: SelectionConfig,
    /// Also fit the estimator on the direct observations.
    pub run_oracle: bool,
    pub replications: usize,
    pub probe: ProbeGrid,
    pub section: f64,
    pub master_seed: u64,
    pub tail: TailConfig,
}

impl MCConfig {
    /// Exp-OU, `Δ = 0.01`, `n = 5000`, 50 replications, noisy and direct estimators.
    pub fn figure1() -> Self {
        MCConfig {
            process: ProcessSpec::ExpOu(OUParams::reference()),
            path: PathConfig { delta: 0.01, n: 5000, ..PathConfig::default() },
            noise: NoiseModel::chi_squared_1(),
            selection: SelectionConfig::default(),
            oracle_selection: SelectionConfig::noiseless_default(),
            run_oracle: true,
            replications: 50,
            probe: ProbeGrid::default(),
            section: DEFAULT_SECTION,
            master_seed: 0,
            tail: TailConfig::default(),
        }
    }

    /// As [`MCConfig::figure1`] at sample size `n` with `Δ = 1 / (√n log² n)`.
    pub fn theorem_rate(n: usize) -> Result<Self> {
        let mut cfg = MCConfig::figure1();
        cfg.path.n = n;
        cfg.path.delta = theorem_rate_delta(n)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Validation("at least one replication is required".into()));
        }
        self.path.validate()?;
        self.selection.validate()?;
        if self.run_oracle {
            self.oracle_selection.validate()?;
        }
        let (nx, ny) = self.probe.shape();
        if nx == 0 || ny == 0 || self.probe.xs.iter().chain(&self.probe.ys).any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Validation("probe grid needs positive finite coordinates".into()));
        }
        for axis in 0..2 {
            check_in_range(self.probe.axis(axis), self.section)?;
        }
        Ok(())
    }
}

/// `Δ_n = 1 / (√n log² n)`.
pub fn theorem_rate_delta(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Validation(format!("theorem-rate step needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    Ok(1.0 / (nf.sqrt() * nf.ln().powi(2)))
}

/// Seed of replication `index`: SplitMix64 finalizer applied to the master seed and index.
pub fn replication_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adaptive fit on one observation set.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub cutoff: CutoffRect,
    pub ise: f64,
    pub norm_sq: f64,
    pub diagnostics: SelectionDiagnostics,
    /// Estimate on the probe grid, `[p, q]` at `(xs[p], ys[q])`.
    pub surface: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    pub noisy: FitRecord,
    pub oracle: Option<FitRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionTrace {
    /// Axis held fixed.
    pub axis: usize,
    pub requested: f64,
    /// Probe node actually used.
    pub realized: f64,
    pub coordinates: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSummary {
    pub median: Array2<f64>,
    /// Sections with the first and with the second coordinate held fixed.
    pub sections: [SectionTrace; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCResult {
    pub records: Vec<ReplicationRecord>,
    pub ise_noisy: Quartiles,
    pub ise_oracle: Option<Quartiles>,
    pub noisy: SurfaceSummary,
    pub oracle: Option<SurfaceSummary>,
    pub truth_surface: Array2<f64>,
    pub truth_sections: [SectionTrace; 2],
}

fn fit(
    obs: &crate::mellin::ObservationSet,
    noise: &NoiseModel,
    selection: &SelectionConfig,
    truth: &TruthSpec,
    cfg: &MCConfig,
) -> Result<FitRecord> {
    let sel = select_cutoff(obs, noise, selection)?;
    let ise = ise_against_truth(&sel.estimate, truth, &cfg.tail)?;
    let surface = sel.estimate.evaluate_surface(&cfg.probe.xs, &cfg.probe.ys)?;
    Ok(FitRecord {
        cutoff: sel.cutoff,
        ise,
        norm_sq: sel.estimate.estimate_norm_sq(),
        diagnostics: sel.diagnostics,
        surface,
    })
}

/// Replication `index` of the study, reproducible on its own.
pub fn run_replication(cfg: &MCConfig, index: usize) -> Result<ReplicationRecord> {
    let truth = cfg.process.truth()?;
    run_replication_with(cfg, &truth, index)
}

fn run_replication_with(cfg: &MCConfig, truth: &TruthSpec, index: usize) -> Result<ReplicationRecord> {
    let seed = replication_seed(cfg.master_seed, index);
    let inner = || -> Result<ReplicationRecord> {
        let bundle = cfg.process.simulate(&PathConfig { seed, ..cfg.path })?;
        let obs = generate_observations(&bundle, seed)?;
        let noisy = fit(&obs, &cfg.noise, &cfg.selection, truth, cfg)?;
        let oracle = if cfg.run_oracle {
            let direct = bundle.direct_observations()?;
            Some(fit(&direct, &NoiseModel::noiseless(), &cfg.oracle_selection, truth, cfg)?)
        } else {
            None
        };
        Ok(ReplicationRecord { index, seed, noisy, oracle })
    };
    inner().map_err(|e| e.context(&format!("replication {index} (seed {seed})")))
}

/// Runs all replications (in parallel on the current rayon pool) and aggregates them.
pub fn run_monte_carlo(cfg: &MCConfig) -> Result<MCResult> {
    cfg.validate()?;
    let truth = cfg.process.truth()?;
    let records: Vec<ReplicationRecord> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication_with(cfg, &truth, r))
        .collect::<Result<_>>()?;
    aggregate(cfg, &truth, records)
}

/// Aggregates replication records; invariant under reordering of `records`.
pub fn aggregate(cfg: &MCConfig, truth: &TruthSpec, mut records: Vec<ReplicationRecord>) -> Result<MCResult> {
    if records.is_empty() {
        return Err(Error::Validation("no replications to aggregate".into()));
    }
    records.sort_by_key(|r| r.index);
    let ise_noisy = quartiles(&records.iter().map(|r| r.noisy.ise).collect::<Vec<_>>())?;
    let summarize = |surfaces: Vec<&Array2<f64>>| -> Result<SurfaceSummary> {
        let median = median_surface(&surfaces)?;
        let sections = [
            section_trace(&median, &cfg.probe, 0, cfg.section)?,
            section_trace(&median, &cfg.probe, 1, cfg.section)?,
        ];
        Ok(SurfaceSummary { median, sections })
    };
    let noisy = summarize(records.iter().map(|r| &r.noisy.surface).collect())?;
    let oracle_fits: Option<Vec<&FitRecord>> = records.iter().map(|r| r.oracle.as_ref()).collect();
    let (ise_oracle, oracle) = match oracle_fits {
        Some(fits) => (
            Some(quartiles(&fits.iter().map(|f| f.ise).collect::<Vec<_>>())?),
            Some(summarize(fits.iter().map(|f| &f.surface).collect())?),
        ),
        None => (None, None),
    };
    let truth_surface = truth_surface(truth, &cfg.probe)?;
    let truth_sections = [
        section_trace(&truth_surface, &cfg.probe, 0, cfg.section)?,
        section_trace(&truth_surface, &cfg.probe, 1, cfg.section)?,
    ];
    Ok(MCResult { records, ise_noisy, ise_oracle, noisy, oracle, truth_surface, truth_sections })
}

pub fn truth_surface(truth: &TruthSpec, probe: &ProbeGrid) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(probe.shape());
    for (p, &x) in probe.xs.iter().enumerate() {
        for (q, &y) in probe.ys.iter().enumerate() {
            out[[p, q]] = truth.density_at([x, y])?;
        }
    }
    Ok(out)
}

/// Sample median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    Ok(quartiles(values)?.median)
}

/// Quartiles by linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    if values.is_empty() {
        return Err(Error::Validation("quantiles of an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN in sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Ok(Quartiles { lower: q(0.25), median: q(0.5), upper: q(0.75) })
}

/// Pointwise median over surfaces of equal shape.
pub fn median_surface(surfaces: &[&Array2<f64>]) -> Result<Array2<f64>> {
    let first = surfaces.first().ok_or_else(|| Error::Validation("no surfaces".into()))?;
    let shape = first.dim();
    if let Some(s) = surfaces.iter().find(|s| s.dim() != shape) {
        return Err(Error::ShapeMismatch(format!("surface {:?} vs {shape:?}", s.dim())));
    }
    let mut buf = vec![0.0; surfaces.len()];
    let mut out = Array2::zeros(shape);
    for ((p, q), slot) in out.indexed_iter_mut() {
        for (b, s) in buf.iter_mut().zip(surfaces) {
            *b = s[[p, q]];
        }
        *slot = median(&buf)?;
    }
    Ok(out)
}

fn check_in_range(axis: &[f64], coordinate: f64) -> Result<()> {
    let lo = axis.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = axis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(coordinate >= lo && coordinate <= hi) {
        return Err(Error::OutOfRange(format!("section coordinate {coordinate} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Slice of `surface` with coordinate `axis` held at the probe node nearest to `coordinate`.
pub fn section_trace(surface: &Array2<f64>, probe: &ProbeGrid, axis: usize, coordinate: f64) -> Result<SectionTrace> {
    if axis > 1 {
        return Err(Error::Validation(format!("axis {axis} is not 0 or 1")));
    }
    if surface.dim() != probe.shape() {
        return Err(Error::ShapeMismatch(format!("surface {:?} vs probe grid {:?}", surface.dim(), probe.shape())));
    }
    let fixed = probe.axis(axis);
    check_in_range(fixed, coordinate)?;
    let (idx, realized) = fixed
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| (a.1 - coordinate).abs().total_cmp(&(b.1 - coordinate).abs()))
        .expect("nonempty axis");
    let values = if axis == 0 { surface.row(idx).to_vec() } else { surface.column(idx).to_vec() };
    Ok(SectionTrace { axis, requested: coordinate, realized, coordinates: probe.axis(1 - axis).to_vec(), values })
}
