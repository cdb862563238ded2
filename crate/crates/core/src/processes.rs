//! Volatility process simulation and the noisy squared-increment observations.
//!
//! Paths are advanced by Euler-Maruyama with `substeps` fine steps per
//! sampling interval `Δ`; each interval is reduced to its integrated
//! volatility `V̄_j = Δ^-1 ∫ V_s ds` by the composite trapezoid rule.
//! Observations are drawn from the exact conditional law `Y = V̄ · χ²₁`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::mellin::{DevelopmentPoint, ObservationSet};

pub type Matrix2 = [[f64; 2]; 2];

const PATH_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
/// Floor applied to recorded CIR values.
pub const CIR_FLOOR: f64 = 1e-12;

/// Linear SDE `dZ = B Z dt + A dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OUParams {
    drift: Matrix2,
    diffusion: Matrix2,
}

impl OUParams {
    pub fn new(drift: Matrix2, diffusion: Matrix2) -> Result<Self> {
        if drift.iter().chain(diffusion.iter()).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("OU matrices must be finite".into()));
        }
        // A real 2x2 matrix is Hurwitz iff trace < 0 and det > 0.
        let trace = drift[0][0] + drift[1][1];
        let det = drift[0][0] * drift[1][1] - drift[0][1] * drift[1][0];
        if !(trace < 0.0 && det > 0.0) {
            return Err(Error::Instability(format!(
                "drift {drift:?} has trace {trace} and determinant {det}"
            )));
        }
        Ok(OUParams { drift, diffusion })
    }

    /// `B = [[-9, 1], [0, -7]]`, `A = [[3, 1], [0, 2]]`.
    pub fn reference() -> Self {
        OUParams { drift: [[-9.0, 1.0], [0.0, -7.0]], diffusion: [[3.0, 1.0], [0.0, 2.0]] }
    }

    pub fn drift(&self) -> Matrix2 {
        self.drift
    }

    pub fn diffusion(&self) -> Matrix2 {
        self.diffusion
    }
}

fn mat_mul(a: Matrix2, b: Matrix2) -> Matrix2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn transpose(a: Matrix2) -> Matrix2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Stationary covariance `Σ` solving `BΣ + ΣBᵀ + AAᵀ = 0`.
pub fn stationary_cov_ou(params: &OUParams) -> Result<Matrix2> {
    let b = params.drift;
    let q = mat_mul(params.diffusion, transpose(params.diffusion));
    // Unknowns (s11, s12, s22); rows are the (1,1), (1,2), (2,2) entries.
    let m = [
        [2.0 * b[0][0], 2.0 * b[0][1], 0.0],
        [b[1][0], b[0][0] + b[1][1], b[0][1]],
        [0.0, 2.0 * b[1][0], 2.0 * b[1][1]],
    ];
    let rhs = [-q[0][0], -q[0][1], -q[1][1]];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    if d == 0.0 {
        return Err(Error::Instability("Lyapunov operator is singular".into()));
    }
    let mut sol = [0.0; 3];
    for (col, s) in sol.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        *s = det3(&mc) / d;
    }
    Ok([[sol[0], sol[1]], [sol[1], sol[2]]])
}

/// Frobenius norm of `BΣ + ΣBᵀ + AAᵀ`.
pub fn lyapunov_residual(params: &OUParams, sigma: &Matrix2) -> f64 {
    let b = params.drift;
    let bs = mat_mul(b, *sigma);
    let sb = mat_mul(*sigma, transpose(b));
    let q = mat_mul(params.diffusion, transpose(params.diffusion));
    let mut acc = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let r = bs[i][j] + sb[i][j] + q[i][j];
            acc += r * r;
        }
    }
    acc.sqrt()
}

/// Independent CIR coordinates `dV = κ(θ - V) dt + σ √V dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CIRParams {
    pub theta: [f64; 2],
    pub kappa: [f64; 2],
    pub sigma: [f64; 2],
    /// Intended stationary shape `ρ`; informational only.
    pub rho_target: [u32; 2],
}

impl CIRParams {
    /// `κ = 1`, `σ = √2`, `θ = ρ`: stationary law `Γ(ρ, 1)` in each coordinate.
    pub fn with_gamma_target(rho: [u32; 2]) -> Self {
        CIRParams {
            theta: [rho[0] as f64, rho[1] as f64],
            kappa: [1.0, 1.0],
            sigma: [2f64.sqrt(), 2f64.sqrt()],
            rho_target: rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.theta.iter().chain(&self.kappa) {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::Validation(format!("CIR theta and kappa must be positive: {self:?}")));
            }
        }
        if self.sigma.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation(format!("CIR sigma must be nonnegative: {self:?}")));
        }
        Ok(())
    }

    /// `2κθ >= σ²` in both coordinates.
    pub fn feller_holds(&self) -> bool {
        (0..2).all(|l| 2.0 * self.kappa[l] * self.theta[l] >= self.sigma[l] * self.sigma[l])
    }

    /// Shape and rate `(2κθ/σ², 2κ/σ²)` of the stationary Gamma law of coordinate `l`.
    pub fn stationary_shape_rate(&self, l: usize) -> (f64, f64) {
        let s2 = self.sigma[l] * self.sigma[l];
        (2.0 * self.kappa[l] * self.theta[l] / s2, 2.0 * self.kappa[l] / s2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    /// Sampling step `Δ`.
    pub delta: f64,
    pub n: usize,
    /// Euler steps per `Δ`.
    pub substeps: usize,
    pub seed: u64,
    /// Sampling intervals simulated and discarded before recording.
    pub burn_in: usize,
    /// Keep the fine path (`n * substeps + 1` nodes) in the bundle.
    pub keep_raw: bool,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { delta: 0.01, n: 5000, substeps: 10, seed: 0, burn_in: 0, keep_raw: false }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Validation(format!("delta {} must lie in (0, 1)", self.delta)));
        }
        if self.n == 0 {
            return Err(Error::Validation("n must be at least 1".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Validation("substeps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn fine_step(&self) -> f64 {
        self.delta / self.substeps as f64
    }

    pub fn total_fine_steps(&self) -> usize {
        (self.n + self.burn_in) * self.substeps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    ExpOu,
    Cir,
    ExpCir,
}

/// Simulated integrated volatilities with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub vbar: Vec<[f64; 2]>,
    pub raw_path: Option<Vec<[f64; 2]>>,
    pub config: PathConfig,
    pub process: ProcessKind,
}

impl PathBundle {
    /// CSV with header `j,vbar1,vbar2` (plus `y1,y2` when observations are given); `j` starts at 1.
    pub fn write_csv<W: Write>(&self, mut out: W, obs: Option<&ObservationSet>) -> std::io::Result<()> {
        match obs {
            Some(o) => {
                if o.n() != self.vbar.len() {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        "observation count differs from path length",
                    ));
                }
                writeln!(out, "j,vbar1,vbar2,y1,y2")?;
                for (j, (v, y)) in self.vbar.iter().zip(o.rows()).enumerate() {
                    writeln!(out, "{},{},{},{},{}", j + 1, v[0], v[1], y[0], y[1])?;
                }
            }
            None => {
                writeln!(out, "j,vbar1,vbar2")?;
                for (j, v) in self.vbar.iter().enumerate() {
                    writeln!(out, "{},{},{}", j + 1, v[0], v[1])?;
                }
            }
        }
        Ok(())
    }

    /// The integrated volatilities themselves as a noise-free observation set.
    pub fn direct_observations(&self) -> Result<ObservationSet> {
        ObservationSet::new(self.vbar.clone(), self.config.delta, DevelopmentPoint::default())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Streams fine-path values into block trapezoid sums. Sums are of deviations
// from the block's first node so that constant paths come out exactly.
struct BlockIntegrator {
    substeps: usize,
    skip: usize,
    step: usize,
    base: [f64; 2],
    acc: [f64; 2],
    vbar: Vec<[f64; 2]>,
    raw: Option<Vec<[f64; 2]>>,
}

impl BlockIntegrator {
    fn new(cfg: &PathConfig) -> Self {
        BlockIntegrator {
            substeps: cfg.substeps,
            skip: cfg.burn_in * cfg.substeps,
            step: 0,
            base: [0.0; 2],
            acc: [0.0; 2],
            vbar: Vec::with_capacity(cfg.n),
            raw: cfg.keep_raw.then(|| Vec::with_capacity(cfg.n * cfg.substeps + 1)),
        }
    }

    // `v` is the fine-path value at fine index `self.step`.
    fn push(&mut self, v: [f64; 2]) {
        if self.step >= self.skip {
            let local = self.step - self.skip;
            if let Some(raw) = self.raw.as_mut() {
                raw.push(v);
            }
            if local > 0 && local.is_multiple_of(self.substeps) {
                let m = self.substeps as f64;
                let mut out = [0.0; 2];
                for l in 0..2 {
                    out[l] = self.base[l] + (self.acc[l] + 0.5 * (v[l] - self.base[l])) / m;
                }
                self.vbar.push(out);
            }
            if local.is_multiple_of(self.substeps) {
                self.base = v;
                self.acc = [0.0; 2];
            } else {
                self.acc[0] += v[0] - self.base[0];
                self.acc[1] += v[1] - self.base[1];
            }
        }
        self.step += 1;
    }
}

/// Block averages `V̄_j` of a fine path with `n * substeps + 1` nodes, by the composite trapezoid rule.
pub fn integrated_volatility(fine: &[[f64; 2]], delta: f64, substeps: usize) -> Result<Vec<[f64; 2]>> {
    if substeps == 0 || fine.len() < substeps + 1 || !(fine.len() - 1).is_multiple_of(substeps) {
        return Err(Error::ShapeMismatch(format!(
            "fine path with {} nodes is not n * {substeps} + 1",
            fine.len()
        )));
    }
    let cfg = PathConfig { delta, n: (fine.len() - 1) / substeps, substeps, seed: 0, burn_in: 0, keep_raw: false };
    cfg.validate()?;
    let mut integ = BlockIntegrator::new(&cfg);
    for &v in fine {
        integ.push(v);
    }
    Ok(integ.vbar)
}

fn stationary_ou_draw(sigma: &Matrix2, rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
    let l11 = sigma[0][0].sqrt();
    let l21 = sigma[1][0] / l11;
    let l22 = (sigma[1][1] - l21 * l21).sqrt();
    if !(l11 > 0.0 && l22.is_finite()) {
        return Err(Error::Numerical(format!("stationary covariance {sigma:?} is not positive definite")));
    }
    let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
    Ok([l11 * a, l21 * a + l22 * b])
}

/// Exponential OU volatility `V = exp(Z)` started from the stationary law `N(0, Σ)`.
pub fn simulate_exp_ou(params: &OUParams, cfg: &PathConfig) -> Result<PathBundle> {
    cfg.validate()?;
    let sigma = stationary_cov_ou(params)?;
    let mut rng = stream_rng(cfg.seed, PATH_STREAM);
    let z0 = stationary_ou_draw(&sigma, &mut rng)?;
    Ok(run_exp_ou(params, cfg, z0, &mut rng))
}

/// As [`simulate_exp_ou`] from a fixed initial state `z0`.
pub fn simulate_exp_ou_from(params: &OUParams, cfg: &PathConfig, z0: [f64; 2]) -> Result<PathBundle> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, PATH_STREAM);
    Ok(run_exp_ou(params, cfg, z0, &mut rng))
}

fn run_exp_ou(params: &OUParams, cfg: &PathConfig, z0: [f64; 2], rng: &mut ChaCha8Rng) -> PathBundle {
    let h = cfg.fine_step();
    let sqrt_h = h.sqrt();
    let (b, a) = (params.drift, params.diffusion);
    let mut z = z0;
    let mut integ = BlockIntegrator::new(cfg);
    integ.push([z[0].exp(), z[1].exp()]);
    for _ in 0..cfg.total_fine_steps() {
        let (w1, w2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let drift = [b[0][0] * z[0] + b[0][1] * z[1], b[1][0] * z[0] + b[1][1] * z[1]];
        let shock = [a[0][0] * w1 + a[0][1] * w2, a[1][0] * w1 + a[1][1] * w2];
        z = [z[0] + h * drift[0] + sqrt_h * shock[0], z[1] + h * drift[1] + sqrt_h * shock[1]];
        integ.push([z[0].exp(), z[1].exp()]);
    }
    PathBundle { vbar: integ.vbar, raw_path: integ.raw, config: *cfg, process: ProcessKind::ExpOu }
}

fn stationary_cir_draw(params: &CIRParams, rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
    let mut v = [0.0; 2];
    for (l, slot) in v.iter_mut().enumerate() {
        let (shape, rate) = params.stationary_shape_rate(l);
        let gamma = Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::Validation(format!("stationary CIR law for axis {l}: {e}")))?;
        *slot = gamma.sample(rng);
    }
    Ok(v)
}

/// Bivariate CIR by full-truncation Euler, started from its stationary Gamma law.
pub fn simulate_cir(params: &CIRParams, cfg: &PathConfig) -> Result<PathBundle> {
    simulate_cir_family(params, cfg, None, ProcessKind::Cir)
}

/// As [`simulate_cir`] from a fixed initial state.
pub fn simulate_cir_from(params: &CIRParams, cfg: &PathConfig, v0: [f64; 2]) -> Result<PathBundle> {
    simulate_cir_family(params, cfg, Some(v0), ProcessKind::Cir)
}

/// `V = exp(Z)` with `Z` a bivariate CIR process.
pub fn simulate_exp_cir(params: &CIRParams, cfg: &PathConfig) -> Result<PathBundle> {
    simulate_cir_family(params, cfg, None, ProcessKind::ExpCir)
}

/// As [`simulate_exp_cir`] with the CIR factor started at `z0`.
pub fn simulate_exp_cir_from(params: &CIRParams, cfg: &PathConfig, z0: [f64; 2]) -> Result<PathBundle> {
    simulate_cir_family(params, cfg, Some(z0), ProcessKind::ExpCir)
}

fn simulate_cir_family(
    params: &CIRParams,
    cfg: &PathConfig,
    start: Option<[f64; 2]>,
    kind: ProcessKind,
) -> Result<PathBundle> {
    params.validate()?;
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, PATH_STREAM);
    let mut v = match start {
        Some(v0) => v0,
        None => stationary_cir_draw(params, &mut rng)?,
    };
    let h = cfg.fine_step();
    let sqrt_h = h.sqrt();
    let record = |v: [f64; 2]| {
        let r = [v[0].max(CIR_FLOOR), v[1].max(CIR_FLOOR)];
        match kind {
            ProcessKind::ExpCir => [r[0].exp(), r[1].exp()],
            _ => r,
        }
    };
    let mut integ = BlockIntegrator::new(cfg);
    integ.push(record(v));
    for _ in 0..cfg.total_fine_steps() {
        for (l, vl) in v.iter_mut().enumerate() {
            let w: f64 = rng.sample(StandardNormal);
            let pos = vl.max(0.0);
            *vl += params.kappa[l] * (params.theta[l] - pos) * h + params.sigma[l] * pos.sqrt() * sqrt_h * w;
        }
        integ.push(record(v));
    }
    Ok(PathBundle { vbar: integ.vbar, raw_path: integ.raw, config: *cfg, process: kind })
}

/// `Y_j = V̄_j · (ξ²_{j,1}, ξ²_{j,2})` with `ξ` i.i.d. standard normal from the noise stream of `seed`.
pub fn generate_observations(bundle: &PathBundle, seed: u64) -> Result<ObservationSet> {
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let mut draw = || loop {
        let xi: f64 = rng.sample(StandardNormal);
        let u = xi * xi;
        if u > 0.0 {
            return u;
        }
    };
    let multipliers: Vec<[f64; 2]> = (0..bundle.vbar.len()).map(|_| [draw(), draw()]).collect();
    observations_from_multipliers(bundle, &multipliers)
}

/// `Y_j = V̄_j · U_j` for given multipliers `U_j`.
pub fn observations_from_multipliers(bundle: &PathBundle, multipliers: &[[f64; 2]]) -> Result<ObservationSet> {
    if multipliers.len() != bundle.vbar.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} multipliers for {} intervals",
            multipliers.len(),
            bundle.vbar.len()
        )));
    }
    let rows = bundle.vbar.iter().zip(multipliers).map(|(v, u)| [v[0] * u[0], v[1] * u[1]]).collect();
    ObservationSet::new(rows, bundle.config.delta, DevelopmentPoint::default())
}
