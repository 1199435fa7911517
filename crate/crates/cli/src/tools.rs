//! The smaller commands: `eigensolve`, `spacing-stats`, `husimi`, `oracle`.

use std::path::Path;
use std::time::Instant;

use chaoseq_core::billiard::BilliardSpectrum;
use chaoseq_core::fluctuations::{complex_component_density, hypersphere_oracle, FieldKind, OracleReport};
use chaoseq_core::husimi::{axis, classical_shell_section, husimi_section, HusimiSection};
use chaoseq_core::levels::{level_spacing_statistics, SpacingStatistics};
use chaoseq_core::stats::{Binning, Histogram};

use crate::analyze::{list_snapshots, load_run_config, read_summary};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{read_complex, write_csv, write_key_values};
use crate::manifest::RunDir;
use crate::spectrum::{levels_csv_rows, solve_configured, weyl_deviation, LEVELS_HEADER};

pub struct EigensolveReport {
    pub spectrum: BilliardSpectrum,
    pub weyl: Vec<(String, f64)>,
}

pub fn eigensolve(cfg: &RunConfig, out: &Path) -> CliResult<EigensolveReport> {
    let mut run = RunDir::create(out, "eigensolve", &cfg.text)?;
    let t0 = Instant::now();
    let spectrum = solve_configured(cfg)?;
    run.record_timing("eigensolve", t0.elapsed().as_secs_f64());
    write_csv(&run.artifact("levels.csv")?, LEVELS_HEADER, levels_csv_rows(&spectrum))?;
    let weyl = weyl_deviation(&spectrum);
    let mut kv: Vec<(String, String)> = weyl
        .iter()
        .map(|(s, d)| (format!("weyl.{s}.max_relative_deviation"), format!("{d:.6}")))
        .collect();
    let max_res = spectrum
        .sectors
        .iter()
        .flat_map(|b| b.residuals.iter().copied())
        .fold(0.0, f64::max);
    kv.push(("max_relative_residual".into(), format!("{max_res:.3e}")));
    write_key_values(&run.artifact("eigensolve.txt")?, &kv)?;
    run.finish()?;
    Ok(EigensolveReport { spectrum, weyl })
}

/// Spacing statistics of every solved sector, each sector on its own.
pub fn spacing_stats(cfg: &RunConfig, out: &Path) -> CliResult<Vec<SpacingStatistics>> {
    let mut run = RunDir::create(out, "spacing-stats", &cfg.text)?;
    let spectrum = solve_configured(cfg)?;
    let stats = spectrum_spacing_stats(&spectrum)?;
    let mut kv = Vec::new();
    for s in &stats {
        kv.push((format!("{}.ks_wigner", s.sector), format!("{:.6e}", s.ks_wigner)));
        kv.push((format!("{}.ks_poisson", s.sector), format!("{:.6e}", s.ks_poisson)));
        kv.push((format!("{}.spacings", s.sector), s.spacings.len().to_string()));
        let h = &s.histogram;
        write_csv(
            &run.artifact(&format!("spacings_{}.csv", s.sector))?,
            "s,density,wigner,poisson",
            (0..h.binning.count).map(|i| {
                let c = h.binning.center(i);
                format!(
                    "{c:.6e},{:.6e},{:.6e},{:.6e}",
                    h.values[i],
                    chaoseq_core::stats::wigner_pdf(c),
                    (-c).exp()
                )
            }),
        )?;
    }
    write_key_values(&run.artifact("spacing.txt")?, &kv)?;
    run.finish()?;
    Ok(stats)
}

pub fn spectrum_spacing_stats(spectrum: &BilliardSpectrum) -> CliResult<Vec<SpacingStatistics>> {
    spectrum
        .sectors
        .iter()
        .map(|b| Ok(level_spacing_statistics(&b.energies, &b.sector().label())?))
        .collect()
}

#[derive(Debug, Clone)]
pub struct HusimiReport {
    pub section: HusimiSection,
    pub band_fraction: f64,
    pub energy: f64,
    pub energy_spread: f64,
    pub t: f64,
}

/// Husimi section of the last snapshot of a Henon-Heiles run, with the mass
/// fraction inside `|H - E| < 3 sigma_E`.
pub fn husimi(run_dir: &Path, out: &Path) -> CliResult<HusimiReport> {
    let cfg = load_run_config(run_dir)?;
    let hh = cfg.henon_heiles()?;
    let summary = read_summary(run_dir)?;
    let get = |k: &str| -> CliResult<f64> {
        summary
            .iter()
            .find(|(key, _)| key == k)
            .and_then(|(_, v)| v.parse().ok())
            .ok_or_else(|| CliError::format(&run_dir.join("summary.txt"), format!("missing `{k}`")))
    };
    let (energy, spread) = (get("mean_energy")?, get("energy_spread")?);
    let snaps = list_snapshots(run_dir)?;
    let (path, _) = snaps
        .last()
        .ok_or_else(|| CliError::Config(format!("no snapshots in {}", run_dir.display())))?;
    let (psi, t) = read_complex(path)?;
    let mut run = RunDir::create(out, "husimi", &cfg.text)?;
    let sigma = if cfg.analysis.husimi_sigma > 0.0 {
        cfg.analysis.husimi_sigma
    } else {
        1.0 / cfg.packet.alpha
    };
    let (y0, py0) = cfg.analysis.husimi_section;
    let half = 0.5 * 3f64.sqrt() * hh.r_c();
    let p_max = (energy + 3.0 * spread).sqrt();
    let n = cfg.analysis.husimi_points;
    let xs = axis(-half, half, n);
    let pxs = axis(-p_max, p_max, n);
    let section = husimi_section(&psi, y0, py0, &xs, &pxs, sigma)?;
    let band_fraction = section.shell_band_fraction(&hh, energy, 3.0 * spread);
    let norm = section.normalized();
    write_csv(
        &run.artifact("husimi.csv")?,
        "x,px,value",
        pxs.iter().enumerate().flat_map(|(j, &p)| {
            let norm = &norm;
            xs.iter()
                .enumerate()
                .map(move |(i, &x)| format!("{x:.6e},{p:.6e},{:.6e}", norm.value(i, j)))
        }),
    )?;
    if let Ok(shell) = classical_shell_section(energy, y0, py0, &hh, &xs) {
        write_csv(
            &run.artifact("shell.csv")?,
            "x,px",
            shell.points().iter().map(|(x, p)| format!("{x:.6e},{p:.6e}")),
        )?;
    }
    write_key_values(
        &run.artifact("husimi.txt")?,
        &[
            ("t".into(), format!("{t:.9e}")),
            ("sigma".into(), format!("{sigma:.6e}")),
            ("energy".into(), format!("{energy:.9e}")),
            ("energy_spread".into(), format!("{spread:.9e}")),
            ("band_fraction".into(), format!("{band_fraction:.6}")),
        ],
    )?;
    run.finish()?;
    Ok(HusimiReport {
        section,
        band_fraction,
        energy,
        energy_spread: spread,
        t,
    })
}

/// Histogram of `gamma = |a_j|^2` over `[0, 1]`, for the small-N check.
pub fn gamma_histogram(report: &OracleReport, bins: usize) -> CliResult<Histogram> {
    Ok(Histogram::from_samples(&report.gammas, Binning::new(0.0, 1.0, bins)?))
}

pub fn oracle(kind: FieldKind, n: usize, draws: usize, seed: u64, out: &Path) -> CliResult<OracleReport> {
    let text = format!("oracle.kind = {}\noracle.n = {n}\noracle.draws = {draws}\nseed = {seed}\n", kind.label());
    let mut run = RunDir::create(out, "oracle", &text)?;
    let report = hypersphere_oracle(n, kind, draws, seed)?;
    let h = &report.histogram;
    write_csv(
        &run.artifact("oracle_histogram.csv")?,
        "n,density,exponential,porter_thomas",
        (0..h.binning.count).map(|i| {
            let c = h.binning.center(i);
            format!(
                "{c:.6e},{:.6e},{:.6e},{:.6e}",
                h.values[i],
                (-c).exp(),
                (1.0 / (2.0 * std::f64::consts::PI * c)).sqrt() * (-0.5 * c).exp()
            )
        }),
    )?;
    let mut kv = vec![
        ("kind".to_string(), kind.label().to_string()),
        ("n".to_string(), n.to_string()),
        ("draws".to_string(), draws.to_string()),
        ("ks_exponential".to_string(), format!("{:.6e}", report.ks_exponential)),
        ("ks_porter_thomas".to_string(), format!("{:.6e}", report.ks_porter_thomas)),
    ];
    if kind == FieldKind::Complex && n <= 16 {
        let g = gamma_histogram(&report, 20)?;
        write_csv(
            &run.artifact("gamma_histogram.csv")?,
            "gamma,density,exact",
            (0..20).map(|i| {
                let c = g.binning.center(i);
                format!("{c:.6e},{:.6e},{:.6e}", g.values[i], complex_component_density(c, n))
            }),
        )?;
        kv.push(("gamma_bins".into(), "20".into()));
    }
    write_key_values(&run.artifact("oracle.txt")?, &kv)?;
    run.finish()?;
    Ok(report)
}
