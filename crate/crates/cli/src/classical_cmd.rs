//! `classical`: the classical mirror of a quantum run.
//!
//! Billiard: microcanonical marginals against the closed-form `f(y)`, and
//! relative fluctuations of a finite matched Gaussian ensemble. Henon-Heiles:
//! the Poincare section of the packet's classical orbit and the
//! microcanonical `P(x)` at the packet's mean energy.

use std::path::Path;
use std::time::Instant;

use chaoseq_core::classical::{
    integrate_henon_heiles, poincare_section, sample_gaussian_ensemble, sample_microcanonical, BilliardFlight,
    Ensemble, MicrocanonicalSystem, PhasePoint, TrajectoryStatus,
};
use chaoseq_core::fields::{Grid2D, RealField};
use chaoseq_core::fluctuations::{fit_exponential, fit_gaussian, relative_fluctuations, FitReport};
use chaoseq_core::models::{HenonHeiles, Potential, RippleBilliard};
use chaoseq_core::propagation::uniform_times;
use chaoseq_core::stats::{Binning, Histogram};

use crate::analyze::{write_histogram, write_u_histogram};
use crate::config::{RunConfig, SystemConfig};
use crate::error::{CliError, CliResult};
use crate::io::{write_csv, write_key_values};
use crate::manifest::RunDir;

#[derive(Debug, Clone)]
pub struct ClassicalReport {
    /// Billiard microcanonical `f(y)` and its L1 distance to the closed form.
    pub f_y: Option<(Histogram, f64)>,
    pub u_gaussian: Option<FitReport>,
    pub u_exponential: Option<FitReport>,
    pub section_points: usize,
    /// Henon-Heiles microcanonical `P(x)` at the packet energy.
    pub p_x: Option<Histogram>,
    pub energy: f64,
}

/// Snapshots pooled for the classical long-time density.
pub const POOLED_SNAPSHOTS: usize = 20;

/// Closed-form microcanonical `f(y) = (b - a cos(pi y / b)) / (2 b^2)`.
pub fn billiard_f_y(rb: &RippleBilliard, binning: Binning) -> Histogram {
    Histogram::from_density(binning, |y| rb.uniform_y_marginal(y))
}

/// Counts per cell of the box, with cells not fully inside the billiard
/// zeroed so every retained cell has the same expected occupancy.
fn cell_counts(points: &[PhasePoint], rb: &RippleBilliard, cells: usize) -> RealField {
    let w = rb.a + rb.b;
    let nx = 2 * cells;
    let h = 2.0 * w / nx as f64;
    let ny = (rb.height() / h).floor() as usize;
    let grid = Grid2D::new(nx, ny, -w + 0.5 * h, 0.5 * h, h, h).expect("positive cell size");
    let mut field = RealField::zeros(grid);
    for p in points {
        let i = ((p.x + w) / h).floor();
        let j = (p.y / h).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < nx && (j as usize) < ny {
            field.values[j as usize * nx + i as usize] += 1.0;
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let (x0, y0) = (-w + i as f64 * h, j as f64 * h);
            let inside = [(0.0, 0.0), (h, 0.0), (0.0, h), (h, h), (0.5 * h, 0.0), (0.5 * h, h)]
                .iter()
                .all(|(dx, dy)| rb.contains(x0 + dx, y0 + dy));
            if !inside {
                field.values[j * nx + i] = 0.0;
            }
        }
    }
    field
}

/// Relative fluctuations of a finite billiard ensemble: counts per cell at
/// each pooled time divided by the pooled mean.
pub fn billiard_classical_fluctuations(
    rb: &RippleBilliard,
    ensemble: &Ensemble,
    times: &[f64],
    cells: usize,
) -> CliResult<Vec<f64>> {
    let flight = BilliardFlight::new(*rb);
    let states = flight.evolve_ensemble(ensemble, times)?;
    let counts: Vec<RealField> = states.iter().map(|s| cell_counts(s, rb, cells)).collect();
    let mut mean = RealField::zeros(counts[0].grid);
    for c in &counts {
        for (m, v) in mean.values.iter_mut().zip(&c.values) {
            *m += v / counts.len() as f64;
        }
    }
    let mut u = Vec::new();
    for c in &counts {
        u.extend(relative_fluctuations(c, &mean, 1e-3)?);
    }
    Ok(u)
}

pub fn classical(cfg: &RunConfig, out: &Path) -> CliResult<ClassicalReport> {
    let mut run = RunDir::create(out, "classical", &cfg.text)?;
    crate::io::write_atomic(&run.artifact("config.txt")?, cfg.text.as_bytes())?;
    let t0 = Instant::now();
    let report = match cfg.system {
        SystemConfig::Ripple(rb) => classical_billiard(cfg, &rb, &mut run)?,
        SystemConfig::HenonHeiles(hh) => classical_henon_heiles(cfg, &hh, &mut run)?,
    };
    run.record_timing("classical", t0.elapsed().as_secs_f64());
    run.finish()?;
    Ok(report)
}

fn classical_billiard(cfg: &RunConfig, rb: &RippleBilliard, run: &mut RunDir) -> CliResult<ClassicalReport> {
    let c = &cfg.classical;
    let energy = cfg.packet.momentum.0.powi(2) + cfg.packet.momentum.1.powi(2);
    let micro = sample_microcanonical(&MicrocanonicalSystem::Billiard(*rb), energy, c.count, c.shell_eps, cfg.seed)?;
    let by = Binning::new(0.0, rb.height(), c.bins)?;
    let ys: Vec<f64> = micro.points.iter().map(|p| p.y).collect();
    let f_y = Histogram::from_samples(&ys, by);
    let closed = billiard_f_y(rb, by);
    let l1 = f_y.l1_distance(&closed)?;
    write_csv(
        &run.artifact("f_y.csv")?,
        "y,ensemble,closed_form",
        (0..by.count).map(|i| format!("{:.9e},{:.9e},{:.9e}", by.center(i), f_y.values[i], closed.values[i])),
    )?;
    let bx = Binning::new(-(rb.a + rb.b), rb.a + rb.b, c.bins)?;
    let xs: Vec<f64> = micro.points.iter().map(|p| p.x).collect();
    write_histogram(run, "f_x.csv", &Histogram::from_samples(&xs, bx))?;
    let p = energy.sqrt();
    let bp = Binning::new(0.0, 2.0 * p, c.bins)?;
    let ps: Vec<f64> = micro.points.iter().map(|q| q.speed_p()).collect();
    write_histogram(run, "f_p.csv", &Histogram::from_samples(&ps, bp))?;

    // finite matched ensemble, pooled over the averaging window
    let gauss = sample_gaussian_ensemble(&cfg.packet, c.count, cfg.seed.wrapping_add(1), Some(rb))?;
    let times = uniform_times(cfg.schedule.window.0, cfg.schedule.window.1, POOLED_SNAPSHOTS);
    let u = billiard_classical_fluctuations(rb, &gauss, &times, c.cells)?;
    let g = fit_gaussian(&u)?;
    let e = fit_exponential(&u)?;
    write_u_histogram(run, "u_classical.csv", &u)?;
    let mut kv = vec![
        ("energy".to_string(), format!("{energy:.9e}")),
        ("f_y.l1_distance".to_string(), format!("{l1:.6e}")),
        ("ensemble.count".to_string(), c.count.to_string()),
        ("ensemble.seed".to_string(), cfg.seed.to_string()),
    ];
    kv.extend(g.to_key_values().into_iter().map(|(k, v)| (format!("u.gaussian.{k}"), v)));
    kv.extend(e.to_key_values().into_iter().map(|(k, v)| (format!("u.exponential.{k}"), v)));
    write_key_values(&run.artifact("classical.txt")?, &kv)?;
    Ok(ClassicalReport {
        f_y: Some((f_y, l1)),
        u_gaussian: Some(g),
        u_exponential: Some(e),
        section_points: 0,
        p_x: None,
        energy,
    })
}

/// Bins of the classical `P(x)`: the Henon-Heiles bounded triangle spans
/// `|x| < sqrt(3) r_c / 2`.
pub fn henon_heiles_x_binning(hh: &HenonHeiles, bins: usize) -> CliResult<Binning> {
    let half = 0.5 * 3f64.sqrt() * hh.r_c();
    Ok(Binning::new(-half, half, bins)?)
}

fn classical_henon_heiles(cfg: &RunConfig, hh: &HenonHeiles, run: &mut RunDir) -> CliResult<ClassicalReport> {
    let c = &cfg.classical;
    let start = PhasePoint::new(cfg.packet.center.0, cfg.packet.center.1, cfg.packet.momentum.0, cfg.packet.momentum.1);
    let dt = 1e-3 * hh.t_char();
    let traj = integrate_henon_heiles(hh, start, dt, c.section_time, 1)?;
    if traj.status == TrajectoryStatus::Escaped {
        return Err(CliError::Numerical(chaoseq_core::Error::Numerical(
            "the packet's classical orbit escapes through a saddle".into(),
        )));
    }
    let e0 = start.energy(hh);
    let drift = traj
        .points
        .iter()
        .map(|p| ((p.energy(hh) - e0) / e0).abs())
        .fold(0.0, f64::max);
    let section = poincare_section(&traj)?;
    write_csv(
        &run.artifact("poincare.csv")?,
        "y,py",
        section.iter().map(|(y, py)| format!("{y:.12e},{py:.12e}")),
    )?;

    // microcanonical P(x) at the quantum packet energy
    let grid = cfg.grid.expect("validated Henon-Heiles config has a grid");
    let psi = cfg.packet.on_grid(&grid).map_err(CliError::config)?;
    let energy = quantum_energy(&psi, hh)?;
    let micro = sample_microcanonical(&MicrocanonicalSystem::HenonHeiles(*hh), energy, c.count, c.shell_eps, cfg.seed)?;
    let bx = henon_heiles_x_binning(hh, c.bins)?;
    let xs: Vec<f64> = micro.points.iter().map(|p| p.x).collect();
    let p_x = Histogram::from_samples(&xs, bx);
    write_histogram(run, "p_x.csv", &p_x)?;
    write_key_values(
        &run.artifact("classical.txt")?,
        &[
            ("orbit.energy".into(), format!("{e0:.9e}")),
            ("orbit.max_relative_energy_drift".into(), format!("{drift:.3e}")),
            ("section.crossings".into(), section.len().to_string()),
            ("microcanonical.energy".into(), format!("{energy:.9e}")),
            ("microcanonical.count".into(), c.count.to_string()),
        ],
    )?;
    Ok(ClassicalReport {
        f_y: None,
        u_gaussian: None,
        u_exponential: None,
        section_points: section.len(),
        p_x: Some(p_x),
        energy,
    })
}

/// `<H>` of a state on the Henon-Heiles grid.
pub fn quantum_energy(psi: &chaoseq_core::fields::ComplexField, hh: &HenonHeiles) -> CliResult<f64> {
    let v = RealField::from_fn(psi.grid, |x, y| hh.value(x, y));
    let prop = chaoseq_core::propagation::SplitStep::new(&v, 1e-3)?;
    Ok(prop.observables(psi)?.2)
}
