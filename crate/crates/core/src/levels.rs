//! Level-spacing statistics, the random-matrix oracle and the
//! degenerate-gap scan.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{ks_distance, polyfit, wigner_cdf, Binning, Histogram};

/// Minimum number of levels for spacing statistics.
pub const MIN_LEVELS: usize = 200;
/// Largest spectrum accepted by [`degenerate_gap_scan`].
pub const MAX_GAP_SCAN_LEVELS: usize = 2000;
/// Degree of the staircase fit used for unfolding.
pub const UNFOLDING_DEGREE: usize = 3;

/// Unfolded spacings `N(E_{i+1}) - N(E_i)` from a cubic fit of the
/// cumulative staircase. `energies` must be ascending.
pub fn unfold(energies: &[f64]) -> Result<Vec<f64>> {
    if energies.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("energies must be sorted ascending".into()));
    }
    // the staircase takes the mid-step value at each level
    let stair: Vec<f64> = (0..energies.len()).map(|i| i as f64 + 0.5).collect();
    let smooth = polyfit(energies, &stair, UNFOLDING_DEGREE)?;
    Ok(energies.windows(2).map(|w| smooth(w[1]) - smooth(w[0])).collect())
}

/// Spacing histogram and distances to the two reference laws.
#[derive(Debug, Clone)]
pub struct SpacingStatistics {
    pub sector: String,
    pub spacings: Vec<f64>,
    pub histogram: Histogram,
    pub ks_wigner: f64,
    pub ks_poisson: f64,
}

impl SpacingStatistics {
    pub fn closer_to_wigner(&self) -> bool {
        self.ks_wigner < self.ks_poisson
    }
}

/// Statistics of one symmetry sector (mixing sectors mimics Poisson, so the
/// caller is expected to pass a single sector).
pub fn level_spacing_statistics(energies: &[f64], sector: &str) -> Result<SpacingStatistics> {
    if energies.len() < MIN_LEVELS {
        return Err(Error::TooFewSamples {
            what: "levels for spacing statistics",
            got: energies.len(),
            need: MIN_LEVELS,
        });
    }
    let spacings = unfold(energies)?;
    Ok(spacing_statistics(spacings, sector))
}

/// Statistics of already unfolded spacings.
pub fn spacing_statistics(spacings: Vec<f64>, sector: &str) -> SpacingStatistics {
    let histogram = Histogram::from_samples(&spacings, Binning::new(0.0, 4.0, 40).expect("fixed binning"));
    let ks_wigner = ks_distance(&spacings, wigner_cdf);
    let ks_poisson = ks_distance(&spacings, |s| if s <= 0.0 { 0.0 } else { 1.0 - (-s).exp() });
    SpacingStatistics {
        sector: sector.to_string(),
        spacings,
        histogram,
        ks_wigner,
        ks_poisson,
    }
}

/// Eigenvalues of one GOE matrix of size `n` (off-diagonal variance 1/2,
/// diagonal variance 1).
pub fn goe_spectrum(n: usize, seed: u64, task: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, task);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = StandardNormal.sample(&mut r);
        for j in 0..i {
            let v: f64 = StandardNormal.sample(&mut r);
            m[(i, j)] = v * std::f64::consts::FRAC_1_SQRT_2;
            m[(j, i)] = m[(i, j)];
        }
    }
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Unfolded spacings pooled from `matrices` GOE samples, each contributing
/// the central half of its spectrum.
pub fn goe_spacings(n: usize, matrices: usize, seed: u64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for m in 0..matrices {
        let e = goe_spectrum(n, seed, m as u64);
        let central = &e[n / 4..3 * n / 4];
        out.extend(unfold(central)?);
    }
    Ok(out)
}

/// Number of index pairs `(k, l)`, `k > l`, whose gap `E_k - E_l` equals the
/// gap of some other index pair within `tol`. Equal gaps are grouped by
/// chaining sorted neighbours closer than `tol`.
pub fn degenerate_gap_scan(energies: &[f64], tol: f64) -> Result<usize> {
    let d = energies.len();
    if d > MAX_GAP_SCAN_LEVELS {
        return Err(Error::TooManyLevels {
            got: d,
            max: MAX_GAP_SCAN_LEVELS,
        });
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be non-negative, got {tol}")));
    }
    let mut gaps = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for k in 0..d {
        for l in 0..k {
            gaps.push((energies[k] - energies[l]).abs());
        }
    }
    gaps.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut run = 1;
    for w in gaps.windows(2) {
        if w[1] - w[0] <= tol {
            run += 1;
        } else {
            if run > 1 {
                count += run;
            }
            run = 1;
        }
    }
    if run > 1 {
        count += run;
    }
    Ok(count)
}

/// Default degeneracy tolerance `1e-9 * E_max`.
pub fn default_gap_tolerance(energies: &[f64]) -> f64 {
    1e-9 * energies.iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_gaps_are_maximally_degenerate() {
        for d in [10usize, 40, 100] {
            let e: Vec<f64> = (0..d).map(|k| k as f64).collect();
            let c = degenerate_gap_scan(&e, 0.0).unwrap();
            // every gap except the single largest one repeats
            assert_eq!(c, d * (d - 1) / 2 - 1);
        }
    }

    #[test]
    fn generic_spectrum_has_no_repeated_gaps() {
        let e = goe_spectrum(120, 3, 0);
        assert_eq!(degenerate_gap_scan(&e, 0.0).unwrap(), 0);
    }

    #[test]
    fn oversized_scan_is_rejected() {
        let e: Vec<f64> = (0..2001).map(|k| k as f64).collect();
        assert!(matches!(degenerate_gap_scan(&e, 0.0), Err(Error::TooManyLevels { .. })));
    }

    #[test]
    fn too_few_levels() {
        let e: Vec<f64> = (0..50).map(|k| k as f64).collect();
        assert!(level_spacing_statistics(&e, "ee").is_err());
    }

    #[test]
    fn unfolding_a_ladder_gives_unit_spacing() {
        let e: Vec<f64> = (0..300).map(|k| 2.0 * k as f64 + 1.0).collect();
        for s in unfold(&e).unwrap() {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
