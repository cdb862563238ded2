//! Flat run configuration: defaults, presets, a TOML file and flag overrides, in that order.

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use volmellin::{
    CIRParams, MCConfig, NoiseModel, OUParams, PathConfig, PenaltyMode, ProbeGrid, ProcessSpec, SelectionConfig,
    TailConfig,
};

use crate::failure::Failure;

pub const PRESETS: &[&str] = &["figure1", "figure2", "theorem-rate"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// `exp-ou`, `cir` or `exp-cir`.
    pub process: String,
    /// Stationary Gamma shape of the CIR coordinates.
    pub rho: [u32; 2],
    pub n: usize,
    /// Sample sizes of a Monte-Carlo run; empty means `[n]`.
    pub sizes: Vec<usize>,
    pub delta: f64,
    pub substeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// `chi2` or `none`.
    pub noise: String,
    pub chi: f64,
    /// `volatility` or `general`.
    pub mode: String,
    pub grid_step: f64,
    pub freq_step: f64,
    pub oracle: bool,
    pub oracle_chi: f64,
    pub oracle_mode: String,
    pub reps: usize,
    pub probe_lo: f64,
    pub probe_hi: f64,
    pub probe_count: usize,
    pub section: f64,
    pub tail_radius: f64,
    pub adaptive: bool,
    /// Fixed cut-off for `estimate` without `adaptive`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    /// Columns of the input CSV read as observations.
    pub input_columns: [String; 2],
}

impl Default for RunConfig {
    fn default() -> Self {
        let sel = SelectionConfig::default();
        let oracle = SelectionConfig::noiseless_default();
        let path = PathConfig::default();
        RunConfig {
            preset: None,
            process: "exp-ou".into(),
            rho: [2, 2],
            n: path.n,
            sizes: Vec::new(),
            delta: path.delta,
            substeps: path.substeps,
            burn_in: path.burn_in,
            seed: 0,
            noise: "chi2".into(),
            chi: sel.chi,
            mode: mode_name(sel.mode).into(),
            grid_step: sel.grid_step,
            freq_step: sel.freq_step,
            oracle: true,
            oracle_chi: oracle.chi,
            oracle_mode: mode_name(oracle.mode).into(),
            reps: 50,
            probe_lo: 0.1,
            probe_hi: 5.0,
            probe_count: 60,
            section: volmellin::DEFAULT_SECTION,
            tail_radius: TailConfig::default().radius,
            adaptive: false,
            k: None,
            input: None,
            input_columns: ["y1".into(), "y2".into()],
        }
    }
}

fn mode_name(mode: PenaltyMode) -> &'static str {
    match mode {
        PenaltyMode::Volatility => "volatility",
        PenaltyMode::General => "general",
    }
}

fn parse_mode(s: &str) -> Result<PenaltyMode, Failure> {
    match s {
        "volatility" => Ok(PenaltyMode::Volatility),
        "general" => Ok(PenaltyMode::General),
        other => Err(Failure::validation(format!("unknown penalty mode '{other}' (volatility, general)"))),
    }
}

fn preset_layer(name: &str) -> Result<Table, Failure> {
    let mut t = Table::new();
    t.insert("preset".into(), Value::from(name));
    match name {
        "figure1" => {
            t.insert("process".into(), Value::from("exp-ou"));
            t.insert("delta".into(), Value::from(0.01));
            t.insert("n".into(), Value::from(5000));
            t.insert("reps".into(), Value::from(50));
            t.insert("oracle".into(), Value::from(true));
        }
        "figure2" => {
            t.insert("process".into(), Value::from("exp-ou"));
            t.insert("delta".into(), Value::from(0.01));
            t.insert("n".into(), Value::from(20000));
            t.insert("sizes".into(), Value::Array(vec![Value::from(5000), Value::from(20000)]));
            t.insert("reps".into(), Value::from(50));
            t.insert("oracle".into(), Value::from(false));
        }
        // Without an explicit delta the step follows n after all layers are merged.
        "theorem-rate" => {
            t.insert("process".into(), Value::from("exp-ou"));
            t.insert("n".into(), Value::from(5000));
            t.insert("reps".into(), Value::from(50));
        }
        other => {
            return Err(Failure::validation(format!(
                "unknown preset '{other}'; available presets: {}",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(t)
}

/// Merges defaults, preset, file and flag layers; later layers win.
pub fn resolve(file: Option<Table>, flags: Table) -> Result<RunConfig, Failure> {
    let mut merged = Table::try_from(RunConfig::default()).map_err(|e| Failure::validation(e.to_string()))?;
    let file = file.unwrap_or_default();
    let preset = flags.get("preset").or_else(|| file.get("preset")).cloned();
    let delta_given = flags.contains_key("delta") || file.contains_key("delta");
    if let Some(p) = preset {
        let name = p.as_str().ok_or_else(|| Failure::validation("preset must be a string"))?;
        merged.extend(preset_layer(name)?);
    }
    merged.extend(file);
    merged.extend(flags);
    let mut cfg: RunConfig = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| Failure::validation(format!("configuration: {}", e.message())))?;
    if cfg.preset.as_deref() == Some("theorem-rate") && !delta_given {
        cfg.delta = volmellin::theorem_rate_delta(cfg.n).map_err(Failure::from)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_file(text: &str) -> Result<Table, Failure> {
    text.parse::<Table>().map_err(|e| Failure::validation(format!("config file: {}", e.message())))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.seed > i64::MAX as u64 {
            return Err(Failure::validation(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        self.process_spec()?;
        self.noise_model()?;
        self.path_config(self.n)?.validate()?;
        self.selection()?.validate()?;
        self.oracle_selection()?.validate()?;
        if self.sizes.contains(&0) {
            return Err(Failure::validation("sample sizes must be positive"));
        }
        if let Some(k) = self.k {
            volmellin::CutoffRect::new(k[0], k[1])?;
        }
        self.probe()?;
        Ok(())
    }

    pub fn process_spec(&self) -> Result<ProcessSpec, Failure> {
        let cir = || {
            if self.rho.contains(&0) {
                return Err(Failure::validation("rho must be positive"));
            }
            Ok(CIRParams::with_gamma_target(self.rho))
        };
        match self.process.as_str() {
            "exp-ou" => Ok(ProcessSpec::ExpOu(OUParams::reference())),
            "cir" => Ok(ProcessSpec::Cir(cir()?)),
            "exp-cir" => Ok(ProcessSpec::ExpCir(cir()?)),
            other => Err(Failure::validation(format!("unknown process '{other}' (exp-ou, cir, exp-cir)"))),
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel, Failure> {
        match self.noise.as_str() {
            "chi2" => Ok(NoiseModel::chi_squared_1()),
            "none" => Ok(NoiseModel::noiseless()),
            other => Err(Failure::validation(format!("unknown noise '{other}' (chi2, none)"))),
        }
    }

    pub fn path_config(&self, n: usize) -> Result<PathConfig, Failure> {
        let cfg = PathConfig {
            delta: self.delta,
            n,
            substeps: self.substeps,
            seed: self.seed,
            burn_in: self.burn_in,
            keep_raw: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn selection(&self) -> Result<SelectionConfig, Failure> {
        Ok(SelectionConfig {
            chi: self.chi,
            grid_step: self.grid_step,
            mode: parse_mode(&self.mode)?,
            freq_step: self.freq_step,
        })
    }

    pub fn oracle_selection(&self) -> Result<SelectionConfig, Failure> {
        Ok(SelectionConfig {
            chi: self.oracle_chi,
            grid_step: self.grid_step,
            mode: parse_mode(&self.oracle_mode)?,
            freq_step: self.freq_step,
        })
    }

    /// Selection for a fit under the configured noise model.
    pub fn selection_for_noise(&self) -> Result<SelectionConfig, Failure> {
        if self.noise_model()?.is_noiseless() {
            self.oracle_selection()
        } else {
            self.selection()
        }
    }

    pub fn probe(&self) -> Result<ProbeGrid, Failure> {
        Ok(ProbeGrid::log_uniform(self.probe_lo, self.probe_hi, self.probe_count)?)
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        if self.sizes.is_empty() {
            vec![self.n]
        } else {
            self.sizes.clone()
        }
    }

    pub fn mc_config(&self, n: usize) -> Result<MCConfig, Failure> {
        let cfg = MCConfig {
            process: self.process_spec()?,
            path: self.path_config(n)?,
            noise: self.noise_model()?,
            selection: self.selection()?,
            oracle_selection: self.oracle_selection()?,
            run_oracle: self.oracle,
            replications: self.reps,
            probe: self.probe()?,
            section: self.section,
            master_seed: self.seed,
            tail: TailConfig { radius: self.tail_radius },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, Failure> {
        toml::to_string(self).map_err(|e| Failure::validation(format!("manifest: {e}")))
    }
}
