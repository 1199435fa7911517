//! `analyze`: ergodic report, relative entropy, marginals, fluctuation fits,
//! spatial correlation and phase map of an `evolve` run directory.

use std::fs;
use std::path::{Path, PathBuf};

use chaoseq_core::equilibration::{
    ergodic_statistics, marginal, relative_entropy, DensityAccumulator, ErgodicReport, MarginalKind,
    MIN_AVERAGE_SNAPSHOTS,
};
use chaoseq_core::fields::RealField;
use chaoseq_core::fluctuations::{
    fit_exponential, fit_gaussian, fit_porter_thomas, phase_map, relative_fluctuations, spatial_correlation,
    CorrelationTable, FitReport,
};
use chaoseq_core::classical::MicrocanonicalSystem;
use chaoseq_core::models::{Potential, RippleBilliard};
use chaoseq_core::stats::{mean, Binning, Histogram};

use crate::classical_cmd::{billiard_f_y, henon_heiles_x_binning};
use crate::config::{Config, RunConfig, SystemConfig};
use crate::error::{CliError, CliResult};
use crate::io::{read_complex, read_csv, read_real, read_time, write_csv, write_field, write_key_values, FieldData};
use crate::manifest::RunDir;

/// Everything `analyze` computes, for programmatic callers.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub config: RunConfig,
    pub ergodic: Option<ErgodicReport>,
    /// `(t, S_r)` at every snapshot (and every sample for eigenbasis runs).
    pub entropy: Vec<(f64, f64)>,
    pub entropy_rise: f64,
    /// Windowed standard deviation of `S_r` after 10 characteristic times,
    /// relative to the rise.
    pub entropy_late_spread: f64,
    pub n_inf: RealField,
    pub marginal_x: Histogram,
    pub marginal_y: Histogram,
    /// Henon-Heiles: `P(x)` of the long-time density restricted to the
    /// classically allowed region at the packet's mean energy, on the bins
    /// of the classical `P(x)`.
    pub allowed_marginal_x: Option<Histogram>,
    /// Billiard: `f(y)` of the long-time density on the classical bins, and
    /// its L1 distance to the uniform-density closed form.
    pub quantum_f_y: Option<(Histogram, f64)>,
    pub quantum_exponential: Option<FitReport>,
    pub quantum_gaussian: Option<FitReport>,
    pub eigenstate_porter_thomas: Option<FitReport>,
    pub correlation: Option<CorrelationTable>,
    /// Statistics left out because their sample was too small, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Treats an undersized sample as a skipped statistic rather than a failed
/// analysis; every other error propagates.
fn optional<T>(r: chaoseq_core::Result<T>, what: &str, skipped: &mut Vec<(String, String)>) -> CliResult<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ chaoseq_core::Error::TooFewSamples { .. }) => {
            skipped.push((format!("skipped.{what}"), e.to_string()));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Snapshot files of a run, ordered by time.
pub fn list_snapshots(run_dir: &Path) -> CliResult<Vec<(PathBuf, f64)>> {
    let dir = run_dir.join("snapshots");
    let mut names: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| CliError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "eqlb"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|p| {
            let t = read_time(&p)?;
            Ok((p, t))
        })
        .collect()
}

pub fn load_run_config(run_dir: &Path) -> CliResult<RunConfig> {
    let path = run_dir.join("config.txt");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    RunConfig::from_config(&Config::parse(&text)?)
}

pub fn read_summary(run_dir: &Path) -> CliResult<Vec<(String, String)>> {
    let path = run_dir.join("summary.txt");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn summary_f64(summary: &[(String, String)], key: &str, path: &Path) -> CliResult<f64> {
    summary
        .iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| CliError::format(path, format!("summary lacks `{key}`")))
}

/// Observable series columns `(t, px, py, Sr)`.
fn read_series(run_dir: &Path) -> CliResult<Vec<[f64; 4]>> {
    let (header, rows) = read_csv(&run_dir.join("observables.csv"))?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::format(&run_dir.join("observables.csv"), format!("missing column {name}")))
    };
    let (ct, cx, cy, cs) = (col("t")?, col("px")?, col("py")?, col("Sr")?);
    Ok(rows.iter().map(|r| [r[ct], r[cx], r[cy], r[cs]]).collect())
}

/// Nodes with `y < b`. Runs with a `y -> 2b - y` symmetric state would
/// otherwise count every value twice.
fn lower_half(field: &RealField, rb: &RippleBilliard) -> RealField {
    let g = field.grid;
    let mut out = field.clone();
    for j in 0..g.ny {
        if g.y(j) >= rb.b - 0.5 * g.dy {
            out.values[j * g.nx..(j + 1) * g.nx].fill(0.0);
        }
    }
    out
}

/// Long-time average density from snapshots inside the window.
fn averaged_density(snapshots: &[(PathBuf, f64)], window: (f64, f64), t_char: f64) -> CliResult<RealField> {
    let (first, _) = read_complex(&snapshots[0].0)?;
    let mut acc = DensityAccumulator::new(first.grid, window, false);
    let tol = 1e-9 * t_char;
    for (path, t) in snapshots {
        if *t >= window.0 - tol && *t <= window.1 + tol {
            let (psi, t) = read_complex(path)?;
            acc.add(t, &psi)?;
        }
    }
    if acc.count() < MIN_AVERAGE_SNAPSHOTS {
        let step = (window.1 - window.0) / (MIN_AVERAGE_SNAPSHOTS - 1) as f64;
        return Err(CliError::Config(format!(
            "only {} snapshots fall in the averaging window [{:.6}, {:.6}]; need {} snapshots, e.g. at t = {:.6} + k * {:.6} for k = 0..{}",
            acc.count(),
            window.0,
            window.1,
            MIN_AVERAGE_SNAPSHOTS,
            window.0,
            step,
            MIN_AVERAGE_SNAPSHOTS - 1
        )));
    }
    Ok(acc.finish()?.position)
}

/// Unit-mean intensities of exported eigenstates, sampled on one quarter of
/// the billiard at least a wavelength away from walls and symmetry lines.
pub fn eigenstate_intensities(run_dir: &Path, rb: &RippleBilliard) -> CliResult<Vec<f64>> {
    let dir = run_dir.join("eigenstates");
    let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).collect(),
        Err(_) => return Ok(Vec::new()),
    };
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let (phi, energy) = read_real(&f)?;
        let lambda = 2.0 * std::f64::consts::PI / energy.sqrt();
        let g = phi.grid;
        let mut vals = Vec::new();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = (g.x(i), g.y(j));
                if x < lambda || y > rb.b - lambda || !clear_of_walls(rb, x, y, lambda) {
                    continue;
                }
                vals.push(phi.values[j * g.nx + i].powi(2));
            }
        }
        let m = mean(&vals);
        if m > 0.0 {
            out.extend(vals.iter().map(|v| v / m));
        }
    }
    Ok(out)
}

fn clear_of_walls(rb: &RippleBilliard, x: f64, y: f64, r: f64) -> bool {
    (0..16).all(|k| {
        let th = k as f64 * std::f64::consts::PI / 8.0;
        rb.contains(x + r * th.cos(), y + r * th.sin())
    })
}

/// Entropy rise above the initial value and the late-time spread relative
/// to that rise.
pub fn entropy_saturation(entropy: &[(f64, f64)], t_char: f64) -> (f64, f64) {
    let late: Vec<f64> = entropy
        .iter()
        .filter(|(t, s)| *t >= 10.0 * t_char && s.is_finite())
        .map(|p| p.1)
        .collect();
    let s0 = entropy.first().map_or(f64::NAN, |p| p.1);
    if late.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(&late);
    let sd = (late.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (late.len() - 1) as f64).sqrt();
    let rise = m - s0;
    (rise, sd / rise.abs())
}

pub fn analyze(run_dir: &Path, out: &Path) -> CliResult<AnalysisReport> {
    let cfg = load_run_config(run_dir)?;
    let summary = read_summary(run_dir)?;
    let summary_path = run_dir.join("summary.txt");
    let mut run = RunDir::create(out, "analyze", &cfg.text)?;
    let s = &cfg.schedule;
    let snapshots = list_snapshots(run_dir)?;
    if snapshots.is_empty() {
        return Err(CliError::Config(format!(
            "no snapshots in {}; rerun evolve with snapshot times covering the window",
            run_dir.display()
        )));
    }

    let n_inf = match cfg.system {
        SystemConfig::Ripple(_) => read_real(&run_dir.join("n_inf.eqlb"))?.0,
        SystemConfig::HenonHeiles(_) => averaged_density(&snapshots, s.window, s.t_char)?,
    };
    write_field(&run.artifact("n_inf.eqlb")?, &FieldData::Real(n_inf.clone()), f64::INFINITY)?;

    // relative entropy
    let series = read_series(run_dir)?;
    let delta = cfg.analysis.entropy_delta;
    let mut entropy: Vec<(f64, f64)> = Vec::new();
    if series.iter().all(|r| r[3].is_finite()) {
        entropy.extend(series.iter().map(|r| (r[0], r[3])));
    } else {
        for (path, _) in &snapshots {
            let (psi, t) = read_complex(path)?;
            entropy.push((t, relative_entropy(&psi.density(), &n_inf, delta)?));
        }
    }
    write_csv(
        &run.artifact("entropy.csv")?,
        "t,Sr",
        entropy.iter().map(|(t, v)| format!("{t:.12e},{v:.12e}")),
    )?;
    let (entropy_rise, entropy_late_spread) = entropy_saturation(&entropy, s.t_char);

    // ergodic inequality (needs the eigenbasis)
    let ergodic = match cfg.system {
        SystemConfig::Ripple(_) => {
            let d_eff = summary_f64(&summary, "d_eff", &summary_path)?;
            let e_cut = summary_f64(&summary, "energy_cutoff", &summary_path)?;
            let pairs: Vec<(f64, Vec<f64>)> = series.iter().map(|r| (r[0], vec![r[1], r[2]])).collect();
            // the diagonal ensemble has zero momentum
            let report = ergodic_statistics(cfg.analysis.observable, &pairs, &[0.0, 0.0], e_cut, 1.0 / d_eff, s.window)?;
            let mut kv: Vec<(String, String)> = report
                .to_key_values()
                .lines()
                .filter_map(|l| l.split_once(" = "))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect();
            kv.push(("d_eff".into(), format!("{d_eff:.9e}")));
            write_key_values(&run.artifact("ergodic.txt")?, &kv)?;
            Some(report)
        }
        SystemConfig::HenonHeiles(_) => None,
    };

    // marginals of the long-time density
    let g = n_inf.grid;
    let bx = Binning::new(g.x0, g.x_max(), (g.nx / 4).max(8))?;
    let by = Binning::new(g.y0, g.y_max(), (g.ny / 4).max(8))?;
    let marginal_x = marginal(&n_inf, MarginalKind::X, bx);
    let marginal_y = marginal(&n_inf, MarginalKind::Y, by);
    write_histogram(&mut run, "marginal_x.csv", &marginal_x)?;
    write_histogram(&mut run, "marginal_y.csv", &marginal_y)?;
    let allowed_marginal_x = match cfg.system {
        SystemConfig::HenonHeiles(hh) => {
            let energy = summary_f64(&summary, "mean_energy", &summary_path)?;
            let region = MicrocanonicalSystem::HenonHeiles(hh);
            let mut masked = n_inf.clone();
            for (k, v) in masked.values.iter_mut().enumerate() {
                let (x, y) = g.coords(k);
                if !(region.contains(x, y) && hh.value(x, y) <= energy) {
                    *v = 0.0;
                }
            }
            let h = marginal(&masked, MarginalKind::X, henon_heiles_x_binning(&hh, cfg.classical.bins)?);
            write_histogram(&mut run, "marginal_x_allowed.csv", &h)?;
            Some(h)
        }
        SystemConfig::Ripple(_) => None,
    };
    let quantum_f_y = match cfg.system {
        SystemConfig::Ripple(rb) => {
            let by = Binning::new(0.0, rb.height(), cfg.classical.bins)?;
            let f_y = marginal(&n_inf, MarginalKind::Y, by);
            let closed = billiard_f_y(&rb, by);
            let l1 = f_y.l1_distance(&closed)?;
            write_csv(
                &run.artifact("f_y.csv")?,
                "y,quantum,closed_form",
                (0..by.count).map(|i| format!("{:.9e},{:.9e},{:.9e}", by.center(i), f_y.values[i], closed.values[i])),
            )?;
            Some((f_y, l1))
        }
        SystemConfig::HenonHeiles(_) => None,
    };

    // fluctuations at the last snapshot inside the window
    let (snap_path, _) = snapshots
        .iter()
        .rev()
        .find(|(_, t)| *t <= s.window.1 + 1e-9 * s.t_char && *t >= s.window.0 - 1e-9 * s.t_char)
        .ok_or_else(|| CliError::Config("no snapshot inside the averaging window".into()))?;
    let (psi, _) = read_complex(snap_path)?;
    let n_t = psi.density();
    let (n_t_s, n_inf_s) = match cfg.system {
        SystemConfig::Ripple(rb) => (lower_half(&n_t, &rb), lower_half(&n_inf, &rb)),
        SystemConfig::HenonHeiles(_) => (n_t.clone(), n_inf.clone()),
    };
    let mut skipped = Vec::new();
    let u = optional(
        relative_fluctuations(&n_t_s, &n_inf_s, cfg.analysis.support_threshold),
        "quantum_u",
        &mut skipped,
    )?
    .unwrap_or_default();
    let quantum_exponential = optional(fit_exponential(&u), "quantum.exponential", &mut skipped)?;
    let quantum_gaussian = optional(fit_gaussian(&u), "quantum.gaussian", &mut skipped)?;
    if !u.is_empty() {
        write_u_histogram(&mut run, "u_quantum.csv", &u)?;
    }
    let eigenstate_porter_thomas = match cfg.system {
        SystemConfig::Ripple(rb) => {
            let v = eigenstate_intensities(run_dir, &rb)?;
            if !v.is_empty() {
                write_u_histogram(&mut run, "u_eigenstates.csv", &v)?;
            }
            optional(fit_porter_thomas(&v), "eigenstates.porter_thomas", &mut skipped)?
        }
        SystemConfig::HenonHeiles(_) => None,
    };
    let mut fits = Vec::new();
    for (prefix, f) in [
        ("quantum.exponential", quantum_exponential.as_ref()),
        ("quantum.gaussian", quantum_gaussian.as_ref()),
        ("eigenstates.porter_thomas", eigenstate_porter_thomas.as_ref()),
    ] {
        if let Some(f) = f {
            fits.extend(f.to_key_values().into_iter().map(|(k, v)| (format!("{prefix}.{k}"), v)));
        }
    }
    if let Some((_, l1)) = &quantum_f_y {
        fits.push(("f_y.l1_distance".into(), format!("{l1:.6e}")));
    }
    if !u.is_empty() {
        fits.push(("quantum.mean_u".into(), format!("{:.9e}", mean(&u))));
    }
    fits.extend(skipped.iter().cloned());
    write_key_values(&run.artifact("fits.txt")?, &fits)?;

    let cut = cfg.analysis.support_threshold * n_inf.max();
    let mask: Vec<bool> = n_inf.values.iter().map(|&v| v > cut).collect();
    let correlation = optional(spatial_correlation(&n_t, &mask), "correlation", &mut skipped)?;
    if let Some(c) = &correlation {
        write_csv(
            &run.artifact("correlation.csv")?,
            "r,C,pairs",
            c.r.iter()
                .zip(&c.c)
                .zip(&c.pairs)
                .map(|((r, c), p)| format!("{r:.9e},{c:.9e},{p:.1}")),
        )?;
    }
    write_field(&run.artifact("phase.eqlb")?, &FieldData::Real(phase_map(&psi)), 0.0)?;
    run.finish()?;

    Ok(AnalysisReport {
        config: cfg,
        ergodic,
        entropy,
        entropy_rise,
        entropy_late_spread,
        n_inf,
        marginal_x,
        marginal_y,
        allowed_marginal_x,
        quantum_f_y,
        quantum_exponential,
        quantum_gaussian,
        eigenstate_porter_thomas,
        correlation,
        skipped,
    })
}

pub fn write_histogram(run: &mut RunDir, name: &str, h: &Histogram) -> CliResult<()> {
    let rows = (0..h.binning.count).map(|i| format!("{:.9e},{:.9e}", h.binning.center(i), h.values[i]));
    write_csv(&run.artifact(name)?, "center,density", rows)
}

/// Histogram of `u` with a log-density column.
pub fn write_u_histogram(run: &mut RunDir, name: &str, u: &[f64]) -> CliResult<()> {
    let hi = u.iter().copied().fold(0.0, f64::max).max(1.0);
    let h = Histogram::from_samples(u, Binning::new(0.0, hi, 80)?);
    let rows = (0..h.binning.count).map(|i| {
        let v = h.values[i];
        format!("{:.9e},{:.9e},{:.9e}", h.binning.center(i), v, if v > 0.0 { v.ln() } else { f64::NAN })
    });
    write_csv(&run.artifact(name)?, "u,density,log_density", rows)
}
