//! Diagonal-ensemble quantities: effective dimension, the ergodic
//! inequality, the relative entropy of a density against its long-time
//! average, time-averaged densities and their one-dimensional marginals.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::billiard::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::fields::{ComplexField, Grid2D, MomentumTransform, RealField};
use crate::propagation::ObservableSample;
use crate::stats::{Binning, Histogram};

/// Default fraction of the captured weight below `E_cut`.
pub const NORM_FRACTION: f64 = 0.999;
/// Samples required in an averaging window.
pub const MIN_WINDOW_SAMPLES: usize = 400;
/// Snapshots required for a long-time average.
pub const MIN_AVERAGE_SNAPSHOTS: usize = 50;
/// Relative support threshold for the entropy integrand.
pub const ENTROPY_SUPPORT: f64 = 1e-6;

/// `1 / sum_k |c_k|^4` after renormalizing the weights to sum to one.
pub fn effective_dimension(weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || !(total > 0.0) {
        return Err(Error::Degenerate("no occupied states".into()));
    }
    let s: f64 = weights.iter().map(|w| (w / total).powi(2)).sum();
    Ok(1.0 / s)
}

/// Effective dimension from complex amplitudes.
pub fn effective_dimension_of(c: &[Complex64]) -> Result<f64> {
    effective_dimension(&c.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>())
}

/// Built-in observables with known diagonal matrix elements in a real
/// eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// The momentum vector `(p_x, p_y)`.
    Momentum,
    Px,
    Py,
    X,
    Y,
}

impl Observable {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p" | "momentum" => Ok(Self::Momentum),
            "px" | "p_x" => Ok(Self::Px),
            "py" | "p_y" => Ok(Self::Py),
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            other => Err(Error::UnsupportedObservable(other.to_string())),
        }
    }

    pub fn components(self) -> &'static [&'static str] {
        match self {
            Self::Momentum => &["px", "py"],
            Self::Px => &["px"],
            Self::Py => &["py"],
            Self::X => &["x"],
            Self::Y => &["y"],
        }
    }

    fn is_momentum(self) -> bool {
        matches!(self, Self::Momentum | Self::Px | Self::Py)
    }

    /// Component values from one time sample.
    fn sample_values(self, s: &ObservableSample) -> Result<Vec<f64>> {
        match self {
            Self::Momentum => Ok(vec![s.px, s.py]),
            Self::Px => Ok(vec![s.px]),
            Self::Py => Ok(vec![s.py]),
            _ => Err(Error::UnsupportedObservable(format!(
                "{self:?} is not recorded in the observable series"
            ))),
        }
    }
}

/// `tr(A rho_inf)` per component of `obs`.
///
/// Momentum components vanish identically: each eigenfunction is real, so
/// `<phi|p|phi> = -i/2 * integral of d(phi^2)` over the closed domain, which
/// is zero. Position moments are integrals against the diagonal density.
pub fn diagonal_expectation(obs: Observable, decomposition: &SpectralDecomposition<'_>) -> Result<Vec<f64>> {
    if obs.is_momentum() {
        return Ok(vec![0.0; obs.components().len()]);
    }
    let n = decomposition.diagonal_density();
    let g = n.grid;
    let da = g.cell_area();
    let total = n.integral();
    let mut m = 0.0;
    for (k, v) in n.values.iter().enumerate() {
        let (x, y) = g.coords(k);
        m += v * if obs == Observable::X { x } else { y };
    }
    Ok(vec![m * da / total])
}

/// Windowed comparison of a time series against its diagonal-ensemble value.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicReport {
    pub observable: Observable,
    /// `<|<A>(t) - tr(A rho_inf)|^2>_t / ||A||^2`.
    pub sigma_sq: f64,
    pub inv_deff: f64,
    pub time_mean: Vec<f64>,
    pub ensemble_mean: Vec<f64>,
    /// Naive standard error `std / sqrt(n)` of each time mean.
    pub standard_error: Vec<f64>,
    pub norm_a_sq: f64,
    /// `inv_deff / sigma_sq`; infinite when `sigma_sq` is zero.
    pub margin: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

impl ErgodicReport {
    pub fn satisfied(&self) -> bool {
        self.sigma_sq <= self.inv_deff
    }

    /// Every component's time mean lies within `k` standard errors of the
    /// ensemble mean.
    pub fn means_agree(&self, k: f64) -> bool {
        self.time_mean
            .iter()
            .zip(&self.ensemble_mean)
            .zip(&self.standard_error)
            .all(|((t, e), s)| (t - e).abs() <= k * s)
    }

    /// Flat `key = value` block.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let comps = self.observable.components();
        out.push_str(&format!("observable = {}\n", comps.join(",")));
        out.push_str(&format!("window_start = {}\nwindow_end = {}\n", self.window.0, self.window.1));
        out.push_str(&format!("samples = {}\n", self.samples));
        out.push_str(&format!("sigma_sq = {:.9e}\n", self.sigma_sq));
        out.push_str(&format!("inv_deff = {:.9e}\n", self.inv_deff));
        out.push_str(&format!("d_eff = {:.6}\n", 1.0 / self.inv_deff));
        out.push_str(&format!("norm_a_sq = {:.9e}\n", self.norm_a_sq));
        out.push_str(&format!("margin = {:.6}\n", self.margin));
        out.push_str(&format!("satisfied = {}\n", self.satisfied()));
        for (i, c) in comps.iter().enumerate() {
            out.push_str(&format!("time_mean.{c} = {:.9e}\n", self.time_mean[i]));
            out.push_str(&format!("ensemble_mean.{c} = {:.9e}\n", self.ensemble_mean[i]));
            out.push_str(&format!("standard_error.{c} = {:.9e}\n", self.standard_error[i]));
        }
        out
    }

    pub const CSV_HEADER: &'static str = "observable,window_start,window_end,samples,sigma_sq,inv_deff,norm_a_sq,margin,satisfied";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.9e},{:.9e},{:.9e},{:.6},{}",
            self.observable.components().join("+"),
            self.window.0,
            self.window.1,
            self.samples,
            self.sigma_sq,
            self.inv_deff,
            self.norm_a_sq,
            self.margin,
            self.satisfied()
        )
    }
}

/// Samples of `series` with `t` inside `window` (with a small tolerance for
/// rounding in the sample times).
fn windowed<T>(series: &[T], time: impl Fn(&T) -> f64, window: (f64, f64)) -> Result<Vec<&T>> {
    let (t0, t1) = window;
    let (first, last) = match (series.first(), series.last()) {
        (Some(a), Some(b)) => (time(a), time(b)),
        _ => {
            return Err(Error::WindowOutOfRange {
                start: t0,
                end: t1,
                available_start: f64::NAN,
                available_end: f64::NAN,
            })
        }
    };
    let eps = 1e-9 * t1.abs().max(1.0);
    if !(t1 > t0) || t0 < first - eps || t1 > last + eps {
        return Err(Error::WindowOutOfRange {
            start: t0,
            end: t1,
            available_start: first,
            available_end: last,
        });
    }
    Ok(series
        .iter()
        .filter(|s| {
            let t = time(s);
            t >= t0 - eps && t <= t1 + eps
        })
        .collect())
}

/// The statistical core of the ergodic check, usable with any series.
///
/// `series` holds `(t, components)`; `ensemble_mean` has one entry per
/// component.
pub fn ergodic_statistics(
    observable: Observable,
    series: &[(f64, Vec<f64>)],
    ensemble_mean: &[f64],
    norm_a_sq: f64,
    inv_deff: f64,
    window: (f64, f64),
) -> Result<ErgodicReport> {
    let picked = windowed(series, |s| s.0, window)?;
    if picked.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::TooFewSamples {
            what: "samples in the averaging window",
            got: picked.len(),
            need: MIN_WINDOW_SAMPLES,
        });
    }
    if !(norm_a_sq > 0.0) {
        return Err(Error::InvalidParameter(format!("operator bound must be positive, got {norm_a_sq}")));
    }
    let n = picked.len() as f64;
    let dims = ensemble_mean.len();
    let mut time_mean = vec![0.0; dims];
    let mut sq = 0.0;
    for s in &picked {
        if s.1.len() != dims {
            return Err(Error::InvalidParameter("component count mismatch in series".into()));
        }
        for c in 0..dims {
            time_mean[c] += s.1[c] / n;
            sq += (s.1[c] - ensemble_mean[c]).powi(2);
        }
    }
    let sigma_sq = sq / n / norm_a_sq;
    let standard_error = (0..dims)
        .map(|c| {
            let var = picked.iter().map(|s| (s.1[c] - time_mean[c]).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    let margin = if sigma_sq > 0.0 { inv_deff / sigma_sq } else { f64::INFINITY };
    Ok(ErgodicReport {
        observable,
        sigma_sq,
        inv_deff,
        time_mean,
        ensemble_mean: ensemble_mean.to_vec(),
        standard_error,
        norm_a_sq,
        margin,
        samples: picked.len(),
        window,
    })
}

/// Bound `||A||^2` restricted to the occupied subspace.
///
/// For momentum, `p^2 = H` inside the billiard (m = 1/2), so the bound is the
/// energy below which `fraction` of the weight lies. For positions it is the
/// largest squared coordinate in the domain.
pub fn occupied_norm_bound(obs: Observable, decomposition: &SpectralDecomposition<'_>, fraction: f64) -> f64 {
    let rb = decomposition.spectrum.mesh.billiard;
    match obs {
        Observable::Momentum | Observable::Px | Observable::Py => decomposition.energy_cutoff(fraction),
        Observable::X => (rb.a + rb.b).powi(2),
        Observable::Y => rb.height().powi(2),
    }
}

/// Ergodic-inequality check of a billiard run.
pub fn ergodic_inequality_check(
    obs: Observable,
    trajectory: &[ObservableSample],
    decomposition: &SpectralDecomposition<'_>,
    window: (f64, f64),
    fraction: f64,
) -> Result<ErgodicReport> {
    let series = trajectory
        .iter()
        .map(|s| Ok((s.t, obs.sample_values(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = diagonal_expectation(obs, decomposition)?;
    let inv_deff = 1.0 / effective_dimension(&decomposition.weights())?;
    let bound = occupied_norm_bound(obs, decomposition, fraction);
    ergodic_statistics(obs, &series, &ensemble, bound, inv_deff, window)
}

/// `S_r = -integral u ln u` with `u = n_t / n_inf`, restricted to nodes where
/// `n_inf >= delta * max(n_inf)`.
pub fn relative_entropy(n_t: &RealField, n_inf: &RealField, delta: f64) -> Result<f64> {
    n_t.grid.ensure_matches(&n_inf.grid)?;
    let floor = delta * n_inf.max();
    let mut s = 0.0;
    for (a, b) in n_t.values.iter().zip(&n_inf.values) {
        if *b < floor || *b <= 0.0 || *a <= 0.0 {
            continue;
        }
        let u = a / b;
        s -= u * u.ln();
    }
    // u is dimensionless, so the integral carries the area element
    Ok(s * n_t.grid.cell_area())
}

/// Time-averaged position (and optionally momentum) densities.
#[derive(Debug, Clone)]
pub struct AveragedDensities {
    pub position: RealField,
    pub momentum: Option<RealField>,
    pub snapshots: usize,
}

/// Streaming accumulator for long-time averages, so snapshots need not be
/// held in memory.
#[derive(Debug, Clone)]
pub struct DensityAccumulator {
    window: (f64, f64),
    position: RealField,
    momentum: Option<(MomentumTransform, RealField)>,
    count: usize,
}

impl DensityAccumulator {
    pub fn new(grid: Grid2D, window: (f64, f64), with_momentum: bool) -> Self {
        Self {
            window,
            position: RealField::zeros(grid),
            momentum: with_momentum.then(|| (MomentumTransform::new(grid), RealField::zeros(grid.momentum_grid()))),
            count: 0,
        }
    }

    /// Adds `psi` if `t` is inside the window; returns whether it was used.
    pub fn add(&mut self, t: f64, psi: &ComplexField) -> Result<bool> {
        let eps = 1e-9 * self.window.1.abs().max(1.0);
        if t < self.window.0 - eps || t > self.window.1 + eps {
            return Ok(false);
        }
        self.position.grid.ensure_matches(&psi.grid)?;
        for (acc, v) in self.position.values.iter_mut().zip(&psi.values) {
            *acc += v.norm_sqr();
        }
        if let Some((tr, acc)) = &mut self.momentum {
            let k = tr.forward(psi)?;
            for (a, v) in acc.values.iter_mut().zip(&k.values) {
                *a += v.norm_sqr();
            }
        }
        self.count += 1;
        Ok(true)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Result<AveragedDensities> {
        if self.count < MIN_AVERAGE_SNAPSHOTS {
            return Err(Error::TooFewSamples {
                what: "snapshots in the averaging window",
                got: self.count,
                need: MIN_AVERAGE_SNAPSHOTS,
            });
        }
        let inv = 1.0 / self.count as f64;
        let mut position = self.position;
        position.values.iter_mut().for_each(|v| *v *= inv);
        let momentum = self.momentum.map(|(_, mut m)| {
            m.values.iter_mut().for_each(|v| *v *= inv);
            m
        });
        Ok(AveragedDensities {
            position,
            momentum,
            snapshots: self.count,
        })
    }
}

/// Long-time average of a collection of timed snapshots.
pub fn long_time_average<'a>(
    snapshots: impl IntoIterator<Item = (f64, &'a ComplexField)>,
    window: (f64, f64),
    with_momentum: bool,
) -> Result<AveragedDensities> {
    let mut acc: Option<DensityAccumulator> = None;
    for (t, psi) in snapshots {
        let a = acc.get_or_insert_with(|| DensityAccumulator::new(psi.grid, window, with_momentum));
        a.add(t, psi)?;
    }
    match acc {
        Some(a) => a.finish(),
        None => Err(Error::TooFewSamples {
            what: "snapshots in the averaging window",
            got: 0,
            need: MIN_AVERAGE_SNAPSHOTS,
        }),
    }
}

/// Which one-dimensional marginal to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalKind {
    X,
    Y,
    /// `f(p)` of a momentum-space density, including the polar measure.
    RadialMomentum,
}

/// Bins node masses `n dA` by the chosen coordinate. For `X` and `Y` each
/// column (row) spreads its mass evenly over its cell, so bins need not be
/// a whole number of cells wide.
pub fn marginal(density: &RealField, kind: MarginalKind, binning: Binning) -> Histogram {
    let g = density.grid;
    match kind {
        MarginalKind::X => {
            let mut cols = vec![0.0; g.nx];
            for (k, &v) in density.values.iter().enumerate() {
                cols[k % g.nx] += v;
            }
            Histogram::from_intervals(
                cols.iter().enumerate().map(|(i, &m)| (g.x(i) - 0.5 * g.dx, g.x(i) + 0.5 * g.dx, m)),
                binning,
            )
        }
        MarginalKind::Y => {
            let rows: Vec<f64> = density.values.chunks(g.nx).map(|r| r.iter().sum()).collect();
            Histogram::from_intervals(
                rows.iter().enumerate().map(|(j, &m)| (g.y(j) - 0.5 * g.dy, g.y(j) + 0.5 * g.dy, m)),
                binning,
            )
        }
        MarginalKind::RadialMomentum => {
            // Cells are split into sub-points so thin rings do not see the
            // lattice.
            let offsets: Vec<f64> = (0..RADIAL_SUBSAMPLE)
                .map(|s| (s as f64 + 0.5) / RADIAL_SUBSAMPLE as f64 - 0.5)
                .collect();
            let share = 1.0 / (RADIAL_SUBSAMPLE * RADIAL_SUBSAMPLE) as f64;
            Histogram::from_weighted(
                density.values.iter().enumerate().flat_map(|(k, &v)| {
                    let (x, y) = g.coords(k);
                    let offsets = &offsets;
                    offsets.iter().flat_map(move |&oy| {
                        offsets
                            .iter()
                            .map(move |&ox| ((x + ox * g.dx).hypot(y + oy * g.dy), v * share))
                    })
                }),
                binning,
            )
        }
    }
}

const RADIAL_SUBSAMPLE: usize = 4;

/// Marginal with one bin per grid column (x) or row (y), or per momentum
/// spacing (radial).
pub fn marginal_on_grid(density: &RealField, kind: MarginalKind) -> Histogram {
    let g = density.grid;
    let binning = match kind {
        MarginalKind::X => Binning::new(g.x0 - 0.5 * g.dx, g.x_max() + 0.5 * g.dx, g.nx),
        MarginalKind::Y => Binning::new(g.y0 - 0.5 * g.dy, g.y_max() + 0.5 * g.dy, g.ny),
        MarginalKind::RadialMomentum => {
            let dp = g.dx.max(g.dy);
            let pmax = g.x0.abs().min(g.y0.abs());
            Binning::new(0.0, pmax, ((pmax / dp).floor() as usize).max(1))
        }
    }
    .expect("grid-derived binning is valid");
    marginal(density, kind, binning)
}

/// Rayleigh density of `|p|` for an isotropic Gaussian with per-axis
/// standard deviation `s`.
pub fn rayleigh_pdf(p: f64, s: f64) -> f64 {
    if p < 0.0 {
        0.0
    } else {
        p / (s * s) * (-p * p / (2.0 * s * s)).exp()
    }
}

/// Isotropic Gaussian momentum density with per-axis deviation `s`, for
/// tests and oracles.
pub fn gaussian_density(grid: Grid2D, s: f64) -> RealField {
    RealField::from_fn(grid, |x, y| (-(x * x + y * y) / (2.0 * s * s)).exp() / (2.0 * PI * s * s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effective_dimension_examples() {
        assert_eq!(effective_dimension(&[0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert!((effective_dimension(&[0.25; 4]).unwrap() - 4.0).abs() < 1e-12);
        assert!(effective_dimension(&[]).is_err());
        // renormalizes a partially captured state
        assert!((effective_dimension(&[0.2; 4]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn observable_parsing() {
        assert_eq!(Observable::parse("P").unwrap(), Observable::Momentum);
        assert!(matches!(Observable::parse("spin"), Err(Error::UnsupportedObservable(_))));
    }

    #[test]
    fn entropy_of_identical_densities_is_zero() {
        let g = Grid2D::new(16, 16, 0.0, 0.0, 0.5, 0.5).unwrap();
        let n = RealField::from_fn(g, |x, y| 1.0 + 0.1 * (x + y).sin());
        assert!(relative_entropy(&n, &n, ENTROPY_SUPPORT).unwrap().abs() < 1e-14);
    }

    #[test]
    fn entropy_of_half_support_at_double_density() {
        let g = Grid2D::new(16, 8, 0.0, 0.0, 0.25, 0.5).unwrap();
        let n_inf = RealField::from_fn(g, |_, _| 1.0 / 16.0);
        let n_t = RealField::from_fn(g, |x, _| if x < 2.0 { 2.0 / 16.0 } else { 0.0 });
        let area = g.nx as f64 * g.ny as f64 * g.cell_area();
        let s = relative_entropy(&n_t, &n_inf, ENTROPY_SUPPORT).unwrap();
        assert!((s + 2f64.ln() * area).abs() < 1e-12);
    }

    #[test]
    fn window_outside_series_is_rejected() {
        let series: Vec<(f64, Vec<f64>)> = (0..500).map(|i| (i as f64 * 0.01, vec![0.0])).collect();
        let r = ergodic_statistics(Observable::Px, &series, &[0.0], 1.0, 1.0, (1.0, 6.0));
        assert!(matches!(r, Err(Error::WindowOutOfRange { .. })));
    }

    #[test]
    fn symmetric_density_has_even_x_marginal() {
        let g = Grid2D::new(33, 17, -4.0, 0.0, 0.25, 0.25).unwrap();
        let n = RealField::from_fn(g, |x, y| (-(x * x) - (y - 2.0).powi(2)).exp() * (1.0 + x * x));
        let h = marginal_on_grid(&n, MarginalKind::X);
        let m = h.values.len();
        for i in 0..m {
            assert!((h.values[i] - h.values[m - 1 - i]).abs() < 1e-8);
        }
        assert!((h.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_has_flat_marginal_for_any_bin_width() {
        let g = Grid2D::new(40, 10, 0.05, 0.05, 0.1, 0.1).unwrap();
        let n = RealField::from_fn(g, |_, _| 1.0);
        // 1.7 cells per bin would alias with point masses
        let h = marginal(&n, MarginalKind::X, Binning::new(0.0, 3.4, 20).unwrap());
        for v in &h.values {
            assert!((v - 1.0 / 3.4).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn radial_marginal_of_isotropic_gaussian_is_rayleigh() {
        let s = 1.3;
        let g = Grid2D::spanning(256, 256, -10.0, 10.0, -10.0, 10.0).unwrap();
        let n = gaussian_density(g, s);
        let b = Binning::new(0.0, 8.0, 40).unwrap();
        let h = marginal(&n, MarginalKind::RadialMomentum, b);
        let exact = Histogram::from_density(b, |p| rayleigh_pdf(p, s));
        let d = h.l1_distance(&exact).unwrap();
        assert!(d < 0.02, "{d}");
    }
}
