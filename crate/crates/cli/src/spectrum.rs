//! Billiard eigensolves driven by a run configuration, and the Weyl-law
//! report.

use std::fmt::Write as _;

use chaoseq_core::billiard::{sector_weyl_count, BilliardMesh, BilliardSpectrum, SolveOptions};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Solves every configured sector.
pub fn solve_configured(cfg: &RunConfig) -> CliResult<BilliardSpectrum> {
    let rb = cfg.billiard()?;
    let eigen = cfg
        .eigen
        .as_ref()
        .ok_or_else(|| CliError::Config("eigen settings are missing".into()))?;
    let mesh = BilliardMesh::new(rb, eigen.spacing).map_err(CliError::config)?;
    let opts = SolveOptions {
        stencil: eigen.stencil,
        tol: eigen.tol,
        ..SolveOptions::default()
    };
    let requests: Vec<_> = eigen.sectors.iter().map(|&s| (s, eigen.states_per_sector)).collect();
    Ok(BilliardSpectrum::solve(mesh, &requests, &opts)?)
}

/// One line per computed level: `sector,index,energy,residual,weyl_count`.
pub fn levels_csv_rows(spectrum: &BilliardSpectrum) -> Vec<String> {
    let rb = spectrum.mesh.billiard;
    let mut rows = Vec::new();
    for b in &spectrum.sectors {
        for (k, (&e, &r)) in b.energies.iter().zip(&b.residuals).enumerate() {
            rows.push(format!(
                "{},{},{:.12e},{:.3e},{:.6}",
                b.sector().label(),
                k + 1,
                e,
                r,
                sector_weyl_count(&rb, b.sector(), e)
            ));
        }
    }
    rows
}

pub const LEVELS_HEADER: &str = "sector,index,energy,residual,weyl_count";

/// Largest relative deviation from the sector Weyl count over the upper half
/// of each sector's levels.
pub fn weyl_deviation(spectrum: &BilliardSpectrum) -> Vec<(String, f64)> {
    let rb = spectrum.mesh.billiard;
    spectrum
        .sectors
        .iter()
        .map(|b| {
            let n = b.len();
            let worst = (n / 2..n)
                .map(|k| {
                    let w = sector_weyl_count(&rb, b.sector(), b.energies[k]);
                    ((k + 1) as f64 - w).abs() / w
                })
                .fold(0.0, f64::max);
            (b.sector().label(), worst)
        })
        .collect()
}

pub fn weyl_report(spectrum: &BilliardSpectrum) -> String {
    let mut s = String::new();
    for (label, dev) in weyl_deviation(spectrum) {
        let _ = writeln!(s, "weyl.{label}.max_relative_deviation = {dev:.6}");
    }
    s
}
