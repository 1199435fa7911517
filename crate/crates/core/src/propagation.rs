//! Wave-packet construction and time evolution.
//!
//! Smooth potentials are propagated by second-order Strang splitting with
//! spectral kinetic steps. Billiard states are evolved exactly by eigenbasis
//! phases (see [`SpectralDecomposition::evolve_many`]); a masked split-step
//! run is available as an independent cross-check.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::billiard::SpectralDecomposition;
use crate::equilibration::{relative_entropy, ENTROPY_SUPPORT};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::fields::{ComplexField, Grid2D, MomentumTransform, RealField};
use crate::models::RippleBilliard;

/// The initial state `(alpha / sqrt(pi)) exp(-alpha^2 (r - r_i)^2 / 2 + i p_i . r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub alpha: f64,
    pub center: (f64, f64),
    pub momentum: (f64, f64),
}

impl GaussianPacket {
    pub fn new(alpha: f64, center: (f64, f64), momentum: (f64, f64)) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("packet alpha must be positive, got {alpha}")));
        }
        Ok(Self { alpha, center, momentum })
    }

    /// Radius beyond which the packet is treated as negligible.
    pub fn support_radius(&self) -> f64 {
        5.0 / self.alpha
    }

    pub fn amplitude(&self, x: f64, y: f64) -> Complex64 {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let envelope = self.alpha / PI.sqrt() * (-0.5 * self.alpha * self.alpha * (dx * dx + dy * dy)).exp();
        Complex64::from_polar(envelope, self.momentum.0 * x + self.momentum.1 * y)
    }

    /// `<p^2> = |p_i|^2 + alpha^2`.
    pub fn kinetic_energy(&self) -> f64 {
        self.momentum.0.powi(2) + self.momentum.1.powi(2) + self.alpha * self.alpha
    }

    /// Per-axis position and momentum standard deviations.
    pub fn widths(&self) -> (f64, f64) {
        (1.0 / (self.alpha * 2f64.sqrt()), self.alpha / 2f64.sqrt())
    }

    /// Samples the packet on `grid` after checking that its support, plus one
    /// grid cell, lies inside the grid. The result is normalized on the grid.
    pub fn on_grid(&self, grid: &Grid2D) -> Result<ComplexField> {
        let r = self.support_radius();
        let (cx, cy) = self.center;
        if cx - r < grid.x0 + grid.dx
            || cx + r > grid.x_max() - grid.dx
            || cy - r < grid.y0 + grid.dy
            || cy + r > grid.y_max() - grid.dy
        {
            return Err(Error::PacketDoesNotFit(format!(
                "support radius {r:.4} around ({cx}, {cy}) leaves the grid [{}, {}] x [{}, {}]",
                grid.x0,
                grid.x_max(),
                grid.y0,
                grid.y_max()
            )));
        }
        let f = ComplexField::from_fn(*grid, |x, y| self.amplitude(x, y));
        crate::fields::normalize(&f)
    }

    /// As [`on_grid`](Self::on_grid), and additionally requires the support
    /// disc to stay one grid cell away from the billiard walls.
    pub fn in_billiard(&self, billiard: &RippleBilliard, grid: &Grid2D) -> Result<ComplexField> {
        let r = self.support_radius() + grid.dx.max(grid.dy);
        let (cx, cy) = self.center;
        for k in 0..720 {
            let th = k as f64 * PI / 360.0;
            for frac in [0.25, 0.5, 0.75, 1.0] {
                let (x, y) = (cx + frac * r * th.cos(), cy + frac * r * th.sin());
                if !billiard.contains(x, y) {
                    return Err(Error::PacketDoesNotFit(format!(
                        "support radius {:.4} around ({cx}, {cy}) crosses the billiard wall near ({x:.3}, {y:.3})",
                        self.support_radius()
                    )));
                }
            }
        }
        self.on_grid(grid)
    }
}

/// Convenience wrapper matching the packet definition.
pub fn make_gaussian_packet(alpha: f64, r_i: (f64, f64), p_i: (f64, f64), grid: &Grid2D) -> Result<ComplexField> {
    GaussianPacket::new(alpha, r_i, p_i)?.on_grid(grid)
}

/// Time axis of a split-step run. Every time is a whole number of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationSchedule {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub sample_interval: f64,
}

impl PropagationSchedule {
    pub fn new(dt: f64, t_end: f64, snapshot_times: Vec<f64>, sample_interval: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let s = Self {
            dt,
            t_end,
            snapshot_times,
            sample_interval,
        };
        s.steps_for(t_end, "t_end")?;
        s.steps_for(sample_interval, "sample interval")?;
        if sample_interval <= 0.0 {
            return Err(Error::InvalidParameter("sample interval must be positive".into()));
        }
        let mut prev = -1.0;
        for &t in &s.snapshot_times {
            if !(0.0..=t_end).contains(&t) || t <= prev {
                return Err(Error::InvalidParameter(format!(
                    "snapshot times must be increasing inside [0, {t_end}], got {t}"
                )));
            }
            s.steps_for(t, "snapshot time")?;
            prev = t;
        }
        Ok(s)
    }

    /// Snaps every time to the nearest multiple of `dt` before validating.
    pub fn rounded(dt: f64, t_end: f64, snapshot_times: &[f64], sample_interval: f64) -> Result<Self> {
        let snap = |t: f64| (t / dt).round() * dt;
        let mut times: Vec<f64> = snapshot_times.iter().map(|&t| snap(t)).collect();
        times.dedup();
        Self::new(dt, snap(t_end), times, snap(sample_interval).max(dt))
    }

    fn steps_for(&self, t: f64, what: &str) -> Result<usize> {
        let k = (t / self.dt).round();
        if (t - k * self.dt).abs() > 1e-12 * t.abs().max(1.0) || k < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{what} {t} is not a whole number of steps of {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn total_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn sample_every(&self) -> usize {
        ((self.sample_interval / self.dt).round() as usize).max(1)
    }

    pub fn snapshot_steps(&self) -> Vec<usize> {
        self.snapshot_times.iter().map(|t| (t / self.dt).round() as usize).collect()
    }
}

/// One row of the observable series (`t,px,py,Sr,norm,energy`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableSample {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    /// Relative entropy; `NaN` when the reference density was unavailable.
    pub sr: f64,
    pub norm: f64,
    pub energy: f64,
}

impl ObservableSample {
    pub const CSV_HEADER: &'static str = "t,px,py,Sr,norm,energy";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.15e},{:.12e}",
            self.t, self.px, self.py, self.sr, self.norm, self.energy
        )
    }
}

/// Options for a split-step run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Abort when `|norm - 1|` exceeds this at any sample.
    pub norm_tolerance: f64,
    /// Warn when the density on the grid's outer ring exceeds this fraction
    /// of the peak.
    pub leakage_threshold: f64,
    /// Width in cells of the monitored outer ring.
    pub leakage_ring: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            norm_tolerance: 1e-10,
            leakage_threshold: 1e-6,
            leakage_ring: 2,
        }
    }
}

/// Result of a split-step run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: Vec<ObservableSample>,
    pub final_state: ComplexField,
    pub warnings: Vec<String>,
}

/// Strang-split propagator `e^{-iV dt/2} e^{-i p^2 dt} e^{-iV dt/2}` on a
/// periodic grid. A hard-wall mask, if present, zeroes the wavefunction
/// outside the allowed nodes after every step.
#[derive(Debug, Clone)]
pub struct SplitStep {
    grid: Grid2D,
    dt: f64,
    fft: Fft2,
    potential: Vec<f64>,
    half_potential: Vec<Complex64>,
    /// `exp(-i k^2 dt) / (nx ny)` in raw bin order.
    kinetic: Vec<Complex64>,
    k_sq: Vec<f64>,
    mask: Option<Vec<bool>>,
    transform: MomentumTransform,
}

impl SplitStep {
    /// `dt` may be negative for backward propagation.
    pub fn new(potential: &RealField, dt: f64) -> Result<Self> {
        if dt == 0.0 || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be nonzero, got {dt}")));
        }
        let grid = potential.grid;
        let (kx, ky) = grid.raw_wavenumbers();
        let scale = 1.0 / grid.len() as f64;
        let mut kinetic = Vec::with_capacity(grid.len());
        let mut k_sq = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k2 = kx[i] * kx[i] + ky[j] * ky[j];
                k_sq.push(k2);
                kinetic.push(Complex64::from_polar(scale, -k2 * dt));
            }
        }
        Ok(Self {
            grid,
            dt,
            fft: Fft2::new(grid.nx, grid.ny),
            half_potential: potential
                .values
                .iter()
                .map(|v| Complex64::from_polar(1.0, -0.5 * v * dt))
                .collect(),
            potential: potential.values.clone(),
            kinetic,
            k_sq,
            mask: None,
            transform: MomentumTransform::new(grid),
        })
    }

    /// Adds a hard-wall mask (`true` = allowed node). Makes the step
    /// non-unitary; relax [`RunOptions::norm_tolerance`] accordingly.
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        for (v, p) in psi.iter_mut().zip(&self.half_potential) {
            *v *= p;
        }
        self.fft.forward(psi, scratch);
        for (v, k) in psi.iter_mut().zip(&self.kinetic) {
            *v *= k;
        }
        self.fft.inverse(psi, scratch);
        for (v, p) in psi.iter_mut().zip(&self.half_potential) {
            *v *= p;
        }
        if let Some(mask) = &self.mask {
            for (v, &m) in psi.iter_mut().zip(mask) {
                if !m {
                    *v = Complex64::default();
                }
            }
        }
    }

    /// `(<p_x>, <p_y>, <H>, norm^2)` of a state.
    pub fn observables(&self, psi: &ComplexField) -> Result<(f64, f64, f64, f64)> {
        let raw = self.transform.forward_raw(psi)?;
        let (kx, ky) = self.grid.raw_wavenumbers();
        let nx = self.grid.nx;
        let (mut sx, mut sy, mut sk, mut s0) = (0.0, 0.0, 0.0, 0.0);
        for (k, v) in raw.iter().enumerate() {
            let w = v.norm_sqr();
            sx += kx[k % nx] * w;
            sy += ky[k / nx] * w;
            sk += self.k_sq[k] * w;
            s0 += w;
        }
        let norm = psi.norm_sqr();
        let pot: f64 = psi
            .values
            .iter()
            .zip(&self.potential)
            .map(|(v, p)| v.norm_sqr() * p)
            .sum::<f64>()
            * self.grid.cell_area();
        Ok((sx / s0, sy / s0, sk / s0 + pot / norm, norm))
    }

    /// Energy spread `sqrt(<H^2> - <H>^2)` of a state.
    pub fn energy_spread(&self, psi: &ComplexField) -> Result<f64> {
        self.grid.ensure_matches(&psi.grid)?;
        let mut t = psi.values.clone();
        let mut scratch = Vec::new();
        self.fft.forward(&mut t, &mut scratch);
        let scale = 1.0 / self.grid.len() as f64;
        for (v, k2) in t.iter_mut().zip(&self.k_sq) {
            *v *= k2 * scale;
        }
        self.fft.inverse(&mut t, &mut scratch);
        let da = self.grid.cell_area();
        let (mut h1, mut h2, mut n) = (0.0, 0.0, 0.0);
        for ((v, tv), p) in psi.values.iter().zip(&t).zip(&self.potential) {
            let hv = tv + v * p;
            h1 += (v.conj() * hv).re;
            h2 += hv.norm_sqr();
            n += v.norm_sqr();
        }
        let (h1, h2) = (h1 * da / (n * da), h2 * da / (n * da));
        Ok((h2 - h1 * h1).max(0.0).sqrt())
    }

    fn edge_fraction(&self, psi: &ComplexField, ring: usize) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut edge: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let d = psi.values[j * nx + i].norm_sqr();
                peak = peak.max(d);
                if i < ring || j < ring || i + ring >= nx || j + ring >= ny {
                    edge = edge.max(d);
                }
            }
        }
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }

    /// Advances `n` steps in place.
    pub fn advance(&self, psi: &mut ComplexField, n: usize) -> Result<()> {
        self.grid.ensure_matches(&psi.grid)?;
        let mut scratch = Vec::new();
        for _ in 0..n {
            self.step(&mut psi.values, &mut scratch);
        }
        Ok(())
    }

    /// Runs `schedule` from `psi`, sampling observables every
    /// `sample_interval` and handing each snapshot to `sink`.
    pub fn run(
        &self,
        psi: ComplexField,
        schedule: &PropagationSchedule,
        opts: &RunOptions,
        sink: &mut dyn FnMut(f64, &ComplexField) -> Result<()>,
    ) -> Result<RunOutput> {
        if (schedule.dt - self.dt).abs() > 1e-15 * self.dt.abs() {
            return Err(Error::InvalidParameter(format!(
                "schedule step {} differs from propagator step {}",
                schedule.dt, self.dt
            )));
        }
        self.grid.ensure_matches(&psi.grid)?;
        let mut psi = psi;
        let mut scratch = Vec::new();
        let total = schedule.total_steps();
        let every = schedule.sample_every();
        let snaps = schedule.snapshot_steps();
        let mut next_snap = 0;
        let mut series = Vec::with_capacity(total / every + 2);
        let mut warnings = Vec::new();
        let mut leaked = false;
        for n in 0..=total {
            let t = n as f64 * self.dt;
            if n % every == 0 || n == total {
                let (px, py, energy, norm) = self.observables(&psi)?;
                let drift = (norm - 1.0).abs();
                if drift > opts.norm_tolerance || !norm.is_finite() {
                    return Err(Error::NormDrift {
                        t,
                        drift,
                        tolerance: opts.norm_tolerance,
                    });
                }
                if !leaked {
                    let frac = self.edge_fraction(&psi, opts.leakage_ring);
                    if frac > opts.leakage_threshold {
                        leaked = true;
                        warnings.push(format!(
                            "leakage: density at the grid edge reached {frac:.2e} of the peak at t = {t:.6}"
                        ));
                    }
                }
                series.push(ObservableSample {
                    t,
                    px,
                    py,
                    sr: f64::NAN,
                    norm,
                    energy,
                });
            }
            while next_snap < snaps.len() && snaps[next_snap] == n {
                sink(t, &psi)?;
                next_snap += 1;
            }
            if n < total {
                self.step(&mut psi.values, &mut scratch);
            }
        }
        Ok(RunOutput {
            series,
            final_state: psi,
            warnings,
        })
    }
}

/// `psi(t) = sum_k c_k e^{-i E_k t} phi_k`.
pub fn eigenbasis_evolve(decomposition: &SpectralDecomposition<'_>, t: f64) -> Result<ComplexField> {
    decomposition.evolve(t)
}

/// Observable series of an eigenbasis evolution at arbitrary `times`.
///
/// The diagonal-ensemble density is exact here, so `Sr` is filled at every
/// sample. Each state is also handed to `sink`.
pub fn eigenbasis_series(
    decomposition: &SpectralDecomposition<'_>,
    times: &[f64],
    sink: &mut dyn FnMut(f64, &ComplexField) -> Result<()>,
) -> Result<Vec<ObservableSample>> {
    let grid = decomposition.spectrum.mesh.grid;
    let transform = MomentumTransform::new(grid);
    let n_inf = decomposition.diagonal_density();
    let energy = decomposition.mean_energy();
    let mut out = Vec::with_capacity(times.len());
    for chunk in times.chunks(32) {
        let states = decomposition.evolve_many(chunk)?;
        for (&t, psi) in chunk.iter().zip(&states) {
            let (px, py) = transform.expectation_momentum(psi)?;
            let sr = relative_entropy(&psi.density(), &n_inf, ENTROPY_SUPPORT)?;
            out.push(ObservableSample {
                t,
                px,
                py,
                sr,
                norm: psi.norm_sqr(),
                energy,
            });
            sink(t, psi)?;
        }
    }
    Ok(out)
}

/// `n` equally spaced times covering `[t0, t1]` inclusive.
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FreeSpace, Potential};

    #[test]
    fn packet_moments() {
        let g = Grid2D::spanning(128, 128, -8.0, 8.0, -8.0, 8.0).unwrap();
        let psi = make_gaussian_packet(1.0, (0.5, -0.3), (5.0, 0.0), &g).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let (px, py) = crate::fields::expectation_momentum(&psi).unwrap();
        assert!((px - 5.0).abs() < 1e-6 && py.abs() < 1e-6);
        let n = psi.density();
        let (mut mx, mut my) = (0.0, 0.0);
        for (k, v) in n.values.iter().enumerate() {
            let (x, y) = g.coords(k);
            mx += x * v * g.cell_area();
            my += y * v * g.cell_area();
        }
        assert!((mx - 0.5).abs() < 1e-6 && (my + 0.3).abs() < 1e-6);
    }

    #[test]
    fn clipped_packet_is_rejected() {
        let g = Grid2D::spanning(64, 64, -4.0, 4.0, -4.0, 4.0).unwrap();
        assert!(matches!(
            make_gaussian_packet(1.0, (2.0, 0.0), (0.0, 0.0), &g),
            Err(Error::PacketDoesNotFit(_))
        ));
        let rb = RippleBilliard::new(6.0, 15.0).unwrap();
        let g = Grid2D::spanning(200, 200, -21.0, 21.0, 0.0, 30.0).unwrap();
        let p = GaussianPacket::new(1.0, (0.0, 3.0), (0.0, 0.0)).unwrap();
        assert!(matches!(p.in_billiard(&rb, &g), Err(Error::PacketDoesNotFit(_))));
        let p = GaussianPacket::new(1.0, (0.0, 15.0), (5.0, 0.0)).unwrap();
        assert!(p.in_billiard(&rb, &g).is_ok());
    }

    #[test]
    fn schedule_validation() {
        assert!(PropagationSchedule::new(0.1, 1.0, vec![0.0, 0.5, 1.0], 0.2).is_ok());
        assert!(PropagationSchedule::new(0.1, 1.0, vec![0.55], 0.2).is_err());
        assert!(PropagationSchedule::new(0.1, 1.0, vec![0.5, 0.2], 0.2).is_err());
        assert!(PropagationSchedule::new(-0.1, 1.0, vec![], 0.2).is_err());
        let s = PropagationSchedule::rounded(0.1, 1.04, &[0.33], 0.21).unwrap();
        assert_eq!(s.total_steps(), 10);
        assert_eq!(s.snapshot_steps(), vec![3]);
    }

    #[test]
    fn free_step_is_unitary() {
        let g = Grid2D::spanning(64, 64, -10.0, 10.0, -10.0, 10.0).unwrap();
        let v = FreeSpace.sample(&g);
        let ss = SplitStep::new(&v, 0.01).unwrap();
        let mut psi = make_gaussian_packet(1.0, (0.0, 0.0), (1.0, 0.5), &g).unwrap();
        ss.advance(&mut psi, 50).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
