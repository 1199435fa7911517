//! `evolve`: wave-packet dynamics with snapshots and observable series.
//!
//! Billiard runs use the eigenbasis (exact in time, with the diagonal
//! ensemble available); Henon-Heiles runs use the split-step propagator.

use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::time::Instant;

use chaoseq_core::billiard::{expand_state, BilliardSpectrum, SpectralDecomposition};
use chaoseq_core::equilibration::effective_dimension;
use chaoseq_core::fields::{ComplexField, RealField};
use chaoseq_core::models::Potential;
use chaoseq_core::propagation::{
    eigenbasis_series, ObservableSample, PropagationSchedule, RunOptions, SplitStep,
};

use crate::config::{RunConfig, SystemConfig};
use crate::error::{CliError, CliResult};
use crate::io::{snapshot_name, write_csv, write_field, write_key_values, FieldData};
use crate::manifest::RunDir;
use crate::spectrum::{levels_csv_rows, solve_configured, weyl_report, LEVELS_HEADER};

/// Eigenfunctions exported per sector, taken from the most occupied states.
pub const EXPORTED_EIGENSTATES: usize = 12;

#[derive(Debug, Clone)]
pub struct EvolveSummary {
    pub root: PathBuf,
    pub series: Vec<ObservableSample>,
    pub summary: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl EvolveSummary {
    pub fn value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).and_then(|(_, v)| v.parse().ok())
    }
}

/// Writes snapshots on a separate thread while the caller keeps computing.
fn with_snapshot_writer<R>(
    run: &mut RunDir,
    times: &[f64],
    body: impl FnOnce(&mut dyn FnMut(f64, &ComplexField) -> chaoseq_core::Result<()>) -> CliResult<R>,
) -> CliResult<R> {
    let mut paths = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        paths.push(run.artifact(&format!("snapshots/{}", snapshot_name(k)))?);
    }
    let (tx, rx) = sync_channel::<(PathBuf, ComplexField, f64)>(4);
    std::thread::scope(|scope| {
        let writer = scope.spawn(move || -> CliResult<()> {
            for (path, psi, t) in rx {
                write_field(&path, &FieldData::Complex(psi), t)?;
            }
            Ok(())
        });
        let mut next = 0;
        let tol = 1e-9 * times.last().copied().unwrap_or(1.0).max(1.0);
        let mut sink = |t: f64, psi: &ComplexField| -> chaoseq_core::Result<()> {
            if next < times.len() && (t - times[next]).abs() <= tol {
                // a closed channel means the writer failed; its error is
                // reported when the thread is joined
                let _ = tx.send((paths[next].clone(), psi.clone(), t));
                next += 1;
            }
            Ok(())
        };
        let result = body(&mut sink);
        drop(sink);
        drop(tx);
        let written = writer.join().expect("snapshot writer panicked");
        let out = result?;
        written?;
        if next != times.len() {
            return Err(CliError::Numerical(chaoseq_core::Error::Numerical(format!(
                "only {next} of {} snapshots were produced",
                times.len()
            ))));
        }
        Ok(out)
    })
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

pub fn evolve(cfg: &RunConfig, out: &Path) -> CliResult<EvolveSummary> {
    let mut run = RunDir::create(out, "evolve", &cfg.text)?;
    let cfg_path = run.artifact("config.txt")?;
    crate::io::write_atomic(&cfg_path, cfg.text.as_bytes())?;
    let result = match cfg.system {
        SystemConfig::Ripple(_) => evolve_billiard(cfg, &mut run)?,
        SystemConfig::HenonHeiles(_) => evolve_henon_heiles(cfg, &mut run)?,
    };
    run.finish()?;
    Ok(result)
}

/// Sample times that coincide with snapshot times, to machine precision.
fn snapshot_subset(cfg: &RunConfig, samples: &[f64]) -> CliResult<Vec<f64>> {
    let s = &cfg.schedule;
    let ratio = s.snapshot_interval / s.sample_interval;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(CliError::Config(
            "schedule.snapshot_interval must be a whole multiple of schedule.sample_interval".into(),
        ));
    }
    let every = ratio.round() as usize;
    Ok(samples.iter().copied().step_by(every).collect())
}

fn evolve_billiard(cfg: &RunConfig, run: &mut RunDir) -> CliResult<EvolveSummary> {
    let t0 = Instant::now();
    let spectrum = solve_configured(cfg)?;
    run.record_timing("eigensolve", t0.elapsed().as_secs_f64());
    write_csv(&run.artifact("levels.csv")?, LEVELS_HEADER, levels_csv_rows(&spectrum))?;

    let rb = cfg.billiard()?;
    let psi0 = cfg.packet.in_billiard(&rb, &spectrum.mesh.grid).map_err(CliError::config)?;
    let dec = expand_state(&psi0, &spectrum)?;
    let mut warnings: Vec<String> = dec.warning.iter().cloned().collect();

    let samples = cfg.schedule.sample_times();
    let snaps = snapshot_subset(cfg, &samples)?;
    let t1 = Instant::now();
    let series = with_snapshot_writer(run, &snaps, |sink| Ok(eigenbasis_series(&dec, &samples, sink)?))?;
    run.record_timing("evolution", t1.elapsed().as_secs_f64());

    write_csv(
        &run.artifact("observables.csv")?,
        ObservableSample::CSV_HEADER,
        series.iter().map(ObservableSample::csv_row),
    )?;
    write_coefficients(run, &dec)?;
    let n_inf = dec.diagonal_density();
    write_field(&run.artifact("n_inf.eqlb")?, &FieldData::Real(n_inf), f64::INFINITY)?;
    export_eigenstates(run, &spectrum, &dec)?;

    let weights = dec.weights();
    let d_eff = effective_dimension(&weights)?;
    let (peak_index, _) = weights
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (k, &w)| if w > acc.1 { (k, w) } else { acc });
    let mut summary = vec![
        kv("system", "ripple"),
        kv("t_char", format!("{:.12e}", cfg.schedule.t_char)),
        kv("captured_norm", format!("{:.12e}", dec.captured_norm)),
        kv("d_eff", format!("{d_eff:.9e}")),
        kv("mean_energy", format!("{:.9e}", dec.mean_energy())),
        kv("energy_spread", format!("{:.9e}", dec.energy_spread())),
        kv("energy_cutoff", format!("{:.9e}", dec.energy_cutoff(cfg.analysis.norm_fraction))),
        kv("peak_level", peak_index + 1),
        kv("levels_computed", weights.len()),
    ];
    for b in &spectrum.sectors {
        summary.push(kv(
            &format!("sector_weight.{}", b.sector().label()),
            format!("{:.9e}", dec.sector_weight(b.sector())),
        ));
    }
    for line in weyl_report(&spectrum).lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            summary.push(kv(k, v));
        }
    }
    for (k, w) in warnings.iter().enumerate() {
        summary.push(kv(&format!("warning.{k}"), w));
    }
    write_key_values(&run.artifact("summary.txt")?, &summary)?;
    warnings.shrink_to_fit();
    Ok(EvolveSummary {
        root: run.root().to_path_buf(),
        series,
        summary,
        warnings,
    })
}

pub const COEFFICIENTS_HEADER: &str = "sector,column,energy,re,im,weight";

fn write_coefficients(run: &mut RunDir, dec: &SpectralDecomposition<'_>) -> CliResult<()> {
    let rows = dec.components().into_iter().map(|c| {
        let b = &dec.spectrum.sectors[c.level.sector];
        format!(
            "{},{},{:.15e},{:.15e},{:.15e},{:.15e}",
            sector_code(b.sector()),
            c.level.column,
            c.level.energy,
            c.c.re,
            c.c.im,
            c.c.norm_sqr()
        )
    });
    write_csv(&run.artifact("coefficients.csv")?, COEFFICIENTS_HEADER, rows)
}

/// Numeric sector code for CSV files: `2 * odd_x + odd_y`.
pub fn sector_code(s: chaoseq_core::billiard::Sector) -> u8 {
    use chaoseq_core::billiard::Parity::Odd;
    2 * u8::from(s.x == Odd) + u8::from(s.y == Odd)
}

fn export_eigenstates(run: &mut RunDir, spectrum: &BilliardSpectrum, dec: &SpectralDecomposition<'_>) -> CliResult<()> {
    for (s, (b, coeffs)) in spectrum.sectors.iter().zip(&dec.coefficients).enumerate() {
        let mut order: Vec<usize> = (0..coeffs.len()).collect();
        order.sort_by(|&i, &j| coeffs[j].norm_sqr().total_cmp(&coeffs[i].norm_sqr()));
        for &col in order.iter().take(EXPORTED_EIGENSTATES) {
            let phi: RealField = spectrum.eigenfunction(s, col);
            let name = format!("eigenstates/phi_{}_{col:04}.eqlb", b.sector().label());
            write_field(&run.artifact(&name)?, &FieldData::Real(phi), b.energies[col])?;
        }
    }
    Ok(())
}

fn evolve_henon_heiles(cfg: &RunConfig, run: &mut RunDir) -> CliResult<EvolveSummary> {
    let hh = cfg.henon_heiles()?;
    let grid = cfg.grid.expect("validated Henon-Heiles config has a grid");
    let potential = RealField::from_fn(grid, |x, y| hh.value(x, y));
    let s = &cfg.schedule;
    let prop = SplitStep::new(&potential, s.dt)?;
    let snaps = cfg.schedule.snapshot_times();
    let schedule = PropagationSchedule::rounded(s.dt, s.t_end, &snaps, s.sample_interval)?;
    let psi0 = cfg.packet.on_grid(&grid).map_err(CliError::config)?;
    let spread = prop.energy_spread(&psi0)?;
    let (_, _, energy, _) = prop.observables(&psi0)?;

    let t1 = Instant::now();
    let output = with_snapshot_writer(run, &schedule.snapshot_times.clone(), |sink| {
        Ok(prop.run(psi0, &schedule, &RunOptions::default(), sink)?)
    })?;
    run.record_timing("evolution", t1.elapsed().as_secs_f64());
    write_csv(
        &run.artifact("observables.csv")?,
        ObservableSample::CSV_HEADER,
        output.series.iter().map(ObservableSample::csv_row),
    )?;
    let mut summary = vec![
        kv("system", "henon-heiles"),
        kv("t_char", format!("{:.12e}", s.t_char)),
        kv("mean_energy", format!("{energy:.9e}")),
        kv("energy_spread", format!("{spread:.9e}")),
        kv("escape_energy", format!("{:.9e}", hh.v_c())),
        kv("dt", format!("{:.12e}", s.dt)),
    ];
    for (k, w) in output.warnings.iter().enumerate() {
        summary.push(kv(&format!("warning.{k}"), w));
    }
    write_key_values(&run.artifact("summary.txt")?, &summary)?;
    Ok(EvolveSummary {
        root: run.root().to_path_buf(),
        series: output.series,
        summary,
        warnings: output.warnings,
    })
}
