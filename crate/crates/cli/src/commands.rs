use std::io::Write;
use std::path::{Path, PathBuf};

use volmellin::{
    build_estimate, generate_observations, lambda_g, lambda_g_quadrature, log_gamma_complex, lyapunov_residual,
    mellin_g, mellin_g_abs2_inv, run_monte_carlo, select_cutoff, stationary_cov_ou, ComplexValue, CutoffRect,
    DevelopmentPoint, EstimateHandle, NoiseModel, OUParams, ObservationSet,
};

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::io;

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))
}

/// Writes the resolved configuration, preceded by comments describing the output files.
fn write_manifest(out: &Path, cfg: &RunConfig, files: &[(String, &str)]) -> Result<(), Failure> {
    let path = out.join("manifest.toml");
    let mut w = io::create(&path)?;
    let mut text = String::new();
    for (name, columns) in files {
        text.push_str(&format!("# {name}: {columns}\n"));
    }
    text.push('\n');
    text.push_str(&cfg.to_toml()?);
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    ensure_dir(out)?;
    let bundle = cfg.process_spec()?.simulate(&cfg.path_config(cfg.n)?)?;
    let obs = generate_observations(&bundle, cfg.seed)?;
    let path = out.join("observations.csv");
    let mut w = io::create(&path)?;
    bundle
        .write_csv(&mut w, Some(&obs))
        .and_then(|_| w.flush())
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    write_manifest(out, cfg, &[("observations.csv".into(), "j,vbar1,vbar2,y1,y2")])
}

pub fn estimate(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let input = cfg.input.as_ref().ok_or_else(|| Failure::validation("estimate needs an input CSV (--input)"))?;
    let rows = io::read_observations(Path::new(input), &cfg.input_columns)?;
    let obs = ObservationSet::new(rows, cfg.delta, DevelopmentPoint::default())?;
    let noise = cfg.noise_model()?;
    ensure_dir(out)?;
    let mut files = vec![("surface.csv".to_string(), "x,y,estimate")];
    let handle: EstimateHandle = if cfg.adaptive {
        let sel = select_cutoff(&obs, &noise, &cfg.selection_for_noise()?)?;
        io::write_diagnostics(&out.join("diagnostics.csv"), &sel.diagnostics)?;
        files.push(("diagnostics.csv".into(), "k1,k2,norm_sq,pen,contrast,chosen"));
        sel.estimate
    } else {
        let k = cfg.k.ok_or_else(|| Failure::validation("estimate needs --k k1,k2 or --adaptive"))?;
        build_estimate(&obs, &noise, CutoffRect::new(k[0], k[1])?, cfg.freq_step)?
    };
    let probe = cfg.probe()?;
    let surface = handle.evaluate_surface(&probe.xs, &probe.ys)?;
    io::write_surface(&out.join("surface.csv"), &probe.xs, &probe.ys, &[("estimate", &surface)])?;
    write_manifest(out, cfg, &files)
}

pub fn mc(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    ensure_dir(out)?;
    let sizes = cfg.sample_sizes();
    let mut files = Vec::new();
    for &n in &sizes {
        let mc = cfg.mc_config(n)?;
        let res = run_monte_carlo(&mc)?;
        let (dir, prefix): (PathBuf, String) =
            if sizes.len() > 1 { (out.join(format!("n{n}")), format!("n{n}/")) } else { (out.to_path_buf(), String::new()) };
        ensure_dir(&dir)?;
        io::write_summary(&dir.join("summary.csv"), &res.records)?;
        files.push((format!("{prefix}summary.csv"), "replication,k1_hat,k2_hat,ise_noisy,ise_oracle"));
        let mut fits = vec![("", &res.noisy)];
        if let Some(o) = res.oracle.as_ref() {
            fits.push(("_oracle", o));
        }
        for (suffix, fit) in fits {
            let name = format!("surface{suffix}.csv");
            io::write_surface(
                &dir.join(&name),
                &mc.probe.xs,
                &mc.probe.ys,
                &[("median_estimate", &fit.median), ("truth", &res.truth_surface)],
            )?;
            files.push((format!("{prefix}{name}"), "x,y,median_estimate,truth"));
            for (axis, label) in [(0, "x"), (1, "y")] {
                let name = format!("section_{label}{suffix}.csv");
                io::write_section(&dir.join(&name), &fit.sections[axis], &res.truth_sections[axis])?;
                files.push((format!("{prefix}{name}"), "coordinate,estimate_median,truth"));
            }
        }
        println!(
            "n = {n}: median ISE noisy {}{}",
            io::fmt_f64(res.ise_noisy.median),
            res.ise_oracle.map(|q| format!(", direct {}", io::fmt_f64(q.median))).unwrap_or_default()
        );
    }
    write_manifest(out, cfg, &files)
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn gamma_cosh_identity() -> Result<Check, Failure> {
    let noise = NoiseModel::chi_squared_1();
    let c = DevelopmentPoint::default();
    let mut worst: f64 = 0.0;
    for i in -30..=30 {
        for j in -30..=30 {
            let t = [i as f64 * 0.1, j as f64 * 0.1];
            let closed = mellin_g_abs2_inv(&noise, c, t)?;
            let via_gamma = 1.0 / mellin_g(&noise, c, t)?.norm_sqr();
            worst = worst.max((closed - via_gamma).abs() / via_gamma);
        }
    }
    Ok(Check { name: "gamma/cosh identity", passed: worst < 1e-10, detail: format!("max rel diff {worst:e}") })
}

fn lambda_closed_form() -> Result<Check, Failure> {
    let noise = NoiseModel::chi_squared_1();
    let c = DevelopmentPoint::default();
    let mut worst: f64 = 0.0;
    for k in [[0.5, 0.5], [1.0, 1.0], [1.5, 2.0]] {
        let k = CutoffRect::new(k[0], k[1])?;
        let closed = lambda_g(&noise, c, k)?;
        let quad = lambda_g_quadrature(&noise, c, k)?;
        worst = worst.max((closed - quad).abs() / quad);
    }
    Ok(Check { name: "lambda closed form", passed: worst < 1e-8, detail: format!("max rel diff {worst:e}") })
}

fn lyapunov() -> Result<Check, Failure> {
    let p = OUParams::reference();
    let s = stationary_cov_ou(&p)?;
    let r = lyapunov_residual(&p, &s);
    let expected = [[4.0 / 7.0, 1.0 / 7.0], [1.0 / 7.0, 2.0 / 7.0]];
    let err = (0..4).map(|i| (s[i / 2][i % 2] - expected[i / 2][i % 2]).abs()).fold(0.0, f64::max);
    Ok(Check { name: "lyapunov", passed: r < 1e-12 && err < 1e-14, detail: format!("residual {r:e}") })
}

fn gamma_recurrence() -> Result<Check, Failure> {
    let mut worst: f64 = 0.0;
    for (re, im) in [(0.5, 1.0), (-2.3, 0.7), (3.0, -4.0), (0.1, 10.0), (-0.5, 0.0)] {
        let z = ComplexValue::new(re, im);
        let d = log_gamma_complex(z + 1.0)? - log_gamma_complex(z)? - z.ln();
        // Compare modulo 2πi.
        worst = worst.max((ComplexValue::new(0.0, d.im).exp() - 1.0).norm().max(d.re.abs()));
    }
    Ok(Check { name: "log-gamma recurrence", passed: worst < 1e-11, detail: format!("max deviation {worst:e}") })
}

fn unit_observation() -> Result<Check, Failure> {
    let obs = ObservationSet::new(vec![[1.0, 1.0]], 0.5, DevelopmentPoint::default())?;
    let h = build_estimate(&obs, &NoiseModel::noiseless(), CutoffRect::new(1.0, 1.0)?, 0.05)?;
    let v = h.evaluate_density([1.0, 1.0])?;
    let expected = 1.0 / std::f64::consts::PI.powi(2);
    Ok(Check {
        name: "unit observation inversion",
        passed: (v - expected).abs() < 1e-12,
        detail: format!("{v} vs 1/pi^2"),
    })
}

fn hermitian_transform() -> Result<Check, Failure> {
    let rows: Vec<[f64; 2]> = (1..=50).map(|j| [0.1 * j as f64, 2.0 / j as f64]).collect();
    let obs = ObservationSet::new(rows, 0.01, DevelopmentPoint::default())?;
    let mut worst: f64 = 0.0;
    for t in [[0.7, -1.3], [2.0, 0.5], [-3.0, 3.0]] {
        let a = volmellin::empirical_mellin(&obs, t);
        let b = volmellin::empirical_mellin(&obs, [-t[0], -t[1]]);
        worst = worst.max((a - b.conj()).norm());
    }
    Ok(Check { name: "hermitian transform", passed: worst < 1e-14, detail: format!("max deviation {worst:e}") })
}

/// Prints one line per analytic identity; fails with a numerical exit code if any does not hold.
pub fn selftest() -> Result<(), Failure> {
    let checks: [fn() -> Result<Check, Failure>; 6] =
        [gamma_cosh_identity, lambda_closed_form, lyapunov, gamma_recurrence, unit_observation, hermitian_transform];
    let mut failed = 0;
    for check in checks {
        let c = check()?;
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::numerical(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}
