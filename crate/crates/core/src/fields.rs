//! Uniform rectangular grids and the scalar fields that live on them.
//!
//! Node `(i, j)` sits at `(x0 + i dx, y0 + j dy)` and is stored row-major at
//! `j * nx + i`. Complex fields carry wavefunctions normalized so that
//! `sum |psi|^2 dx dy = 1`; real fields carry densities, potentials, phases
//! and eigenfunctions.
//!
//! Momentum-space fields use the unitary, angular-frequency convention
//! (hbar = 1):
//!
//! ```text
//! psi~(k) = (dx dy / 2 pi) * sum_r psi(r) exp(-i k.r)
//! ```
//!
//! sampled on a centered momentum grid whose axes run monotonically from
//! `-floor(n/2) dk` upward, so `sum |psi~|^2 dkx dky = sum |psi|^2 dx dy`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{signed_index, Fft2};

/// Smallest admissible point count along either axis.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, dx: f64, dy: f64) -> Result<Self> {
        if nx < MIN_POINTS || ny < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per axis, got {nx} x {ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacings must be positive, got dx = {dx}, dy = {dy}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        Ok(Self {
            nx,
            ny,
            x0,
            y0,
            dx,
            dy,
        })
    }

    /// Grid with `nx x ny` nodes spanning `[xmin, xmax] x [ymin, ymax]`
    /// inclusive of both ends.
    pub fn spanning(nx: usize, ny: usize, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid("need at least two points per axis".into()));
        }
        Self::new(
            nx,
            ny,
            xmin,
            ymin,
            (xmax - xmin) / (nx - 1) as f64,
            (ymax - ymin) / (ny - 1) as f64,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        (self.x(k % self.nx), self.y(k / self.nx))
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn dkx(&self) -> f64 {
        2.0 * PI / (self.nx as f64 * self.dx)
    }

    pub fn dky(&self) -> f64 {
        2.0 * PI / (self.ny as f64 * self.dy)
    }

    /// The centered momentum grid conjugate to this grid.
    pub fn momentum_grid(&self) -> Self {
        let (dkx, dky) = (self.dkx(), self.dky());
        Self {
            nx: self.nx,
            ny: self.ny,
            x0: -((self.nx / 2) as f64) * dkx,
            y0: -((self.ny / 2) as f64) * dky,
            dx: dkx,
            dy: dky,
        }
    }

    /// Angular wavenumbers in raw (unshifted) DFT bin order.
    pub fn raw_wavenumbers(&self) -> (Vec<f64>, Vec<f64>) {
        let (dkx, dky) = (self.dkx(), self.dky());
        let kx = (0..self.nx)
            .map(|m| signed_index(m, self.nx) as f64 * dkx)
            .collect();
        let ky = (0..self.ny)
            .map(|m| signed_index(m, self.ny) as f64 * dky)
            .collect();
        (kx, ky)
    }

    /// Grids agree node for node (within rounding of the stored spacings).
    pub fn matches(&self, other: &Self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        self.nx == other.nx
            && self.ny == other.ny
            && close(self.x0, other.x0)
            && close(self.y0, other.y0)
            && close(self.dx, other.dx)
            && close(self.dy, other.dy)
    }

    pub fn ensure_matches(&self, other: &Self) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Nearest node index along x, if `x` lies within the grid.
    pub fn nearest_i(&self, x: f64) -> Option<usize> {
        let f = ((x - self.x0) / self.dx).round();
        (f >= 0.0 && f < self.nx as f64).then_some(f as usize)
    }

    pub fn nearest_j(&self, y: f64) -> Option<usize> {
        let f = ((y - self.y0) / self.dy).round();
        (f >= 0.0 && f < self.ny as f64).then_some(f as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.coords(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    /// `|psi|^2` as a density field.
    pub fn density(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl RealField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.coords(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    /// `sum f dx dy`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// L1 distance `sum |f - g| dx dy`.
    pub fn l1_distance(&self, other: &RealField) -> Result<f64> {
        self.grid.ensure_matches(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_area())
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Rescales `f` so that `sum |f|^2 dx dy = 1`.
pub fn normalize(f: &ComplexField) -> Result<ComplexField> {
    let n2 = f.norm_sqr();
    if !(n2 > 0.0) || !n2.is_finite() {
        return Err(Error::DegenerateField);
    }
    let s = 1.0 / n2.sqrt();
    Ok(ComplexField {
        grid: f.grid,
        values: f.values.iter().map(|v| v * s).collect(),
    })
}

/// `<f|g> = sum conj(f) g dx dy`.
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    f.grid.ensure_matches(&g.grid)?;
    let s: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(s * f.grid.cell_area())
}

/// `<phi|g>` for a real `phi`.
pub fn real_overlap(phi: &RealField, g: &ComplexField) -> Result<Complex64> {
    phi.grid.ensure_matches(&g.grid)?;
    let s: Complex64 = phi.values.iter().zip(&g.values).map(|(a, b)| b * *a).sum();
    Ok(s * phi.grid.cell_area())
}

/// Transforms between position and centered momentum representation for one
/// position grid. Holds FFT plans so repeated calls are cheap.
#[derive(Debug, Clone)]
pub struct MomentumTransform {
    grid: Grid2D,
    fft: Fft2,
    /// `exp(-i k x0)` in raw bin order, per axis.
    phase_x: Vec<Complex64>,
    phase_y: Vec<Complex64>,
}

impl MomentumTransform {
    pub fn new(grid: Grid2D) -> Self {
        let (kx, ky) = grid.raw_wavenumbers();
        Self {
            grid,
            fft: Fft2::new(grid.nx, grid.ny),
            phase_x: kx.iter().map(|k| Complex64::from_polar(1.0, -k * grid.x0)).collect(),
            phase_y: ky.iter().map(|k| Complex64::from_polar(1.0, -k * grid.y0)).collect(),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Momentum amplitudes in raw DFT bin order (no centering), scaled to the
    /// unitary convention. Useful when only moments are needed.
    pub fn forward_raw(&self, f: &ComplexField) -> Result<Vec<Complex64>> {
        self.grid.ensure_matches(&f.grid)?;
        let mut data = f.values.clone();
        self.fft.forward(&mut data, &mut Vec::new());
        let scale = self.grid.cell_area() / (2.0 * PI);
        let nx = self.grid.nx;
        for (k, v) in data.iter_mut().enumerate() {
            *v *= self.phase_x[k % nx] * self.phase_y[k / nx] * scale;
        }
        Ok(data)
    }

    pub fn forward(&self, f: &ComplexField) -> Result<ComplexField> {
        let raw = self.forward_raw(f)?;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut centered = vec![Complex64::default(); nx * ny];
        for (k, v) in raw.into_iter().enumerate() {
            let (mi, mj) = (k % nx, k / nx);
            let ci = (signed_index(mi, nx) + (nx / 2) as isize) as usize;
            let cj = (signed_index(mj, ny) + (ny / 2) as isize) as usize;
            centered[cj * nx + ci] = v;
        }
        Ok(ComplexField {
            grid: self.grid.momentum_grid(),
            values: centered,
        })
    }

    pub fn inverse(&self, fk: &ComplexField) -> Result<ComplexField> {
        self.grid.momentum_grid().ensure_matches(&fk.grid)?;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut data = vec![Complex64::default(); nx * ny];
        for mj in 0..ny {
            let cj = (signed_index(mj, ny) + (ny / 2) as isize) as usize;
            for mi in 0..nx {
                let ci = (signed_index(mi, nx) + (nx / 2) as isize) as usize;
                let k = mj * nx + mi;
                data[k] = fk.values[cj * nx + ci] * (self.phase_x[mi] * self.phase_y[mj]).conj();
            }
        }
        self.fft.inverse(&mut data, &mut Vec::new());
        // forward carries dx dy / 2pi; the unnormalized inverse needs
        // 2pi / (dx dy) / (nx ny) = dkx dky / 2pi
        let scale = self.grid.dkx() * self.grid.dky() / (2.0 * PI);
        for v in &mut data {
            *v *= scale;
        }
        Ok(ComplexField {
            grid: self.grid,
            values: data,
        })
    }

    /// `(<p_x>, <p_y>)` of a normalized field, evaluated in momentum space.
    pub fn expectation_momentum(&self, f: &ComplexField) -> Result<(f64, f64)> {
        let raw = self.forward_raw(f)?;
        let (kx, ky) = self.grid.raw_wavenumbers();
        let nx = self.grid.nx;
        let (mut sx, mut sy, mut s0) = (0.0, 0.0, 0.0);
        for (k, v) in raw.iter().enumerate() {
            let w = v.norm_sqr();
            sx += kx[k % nx] * w;
            sy += ky[k / nx] * w;
            s0 += w;
        }
        Ok((sx / s0, sy / s0))
    }

    /// Kinetic energy `<p^2>` (m = 1/2) of a field, evaluated spectrally.
    pub fn expectation_p_sq(&self, f: &ComplexField) -> Result<f64> {
        let raw = self.forward_raw(f)?;
        let (kx, ky) = self.grid.raw_wavenumbers();
        let nx = self.grid.nx;
        let (mut s, mut s0) = (0.0, 0.0);
        for (k, v) in raw.iter().enumerate() {
            let w = v.norm_sqr();
            s += (kx[k % nx].powi(2) + ky[k / nx].powi(2)) * w;
            s0 += w;
        }
        Ok(s / s0)
    }
}

/// Position to centered momentum representation.
pub fn to_momentum(f: &ComplexField) -> Result<ComplexField> {
    MomentumTransform::new(f.grid).forward(f)
}

/// Centered momentum representation back to `position_grid`.
pub fn from_momentum(fk: &ComplexField, position_grid: &Grid2D) -> Result<ComplexField> {
    MomentumTransform::new(*position_grid).inverse(fk)
}

pub fn expectation_momentum(f: &ComplexField) -> Result<(f64, f64)> {
    MomentumTransform::new(f.grid).expectation_momentum(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> Grid2D {
        Grid2D::new(16, 16, 0.0, 0.0, 1.0 / 16.0, 1.0 / 16.0).unwrap()
    }

    fn gaussian(grid: Grid2D, alpha: f64, r: (f64, f64), p: (f64, f64)) -> ComplexField {
        ComplexField::from_fn(grid, |x, y| {
            let d2 = (x - r.0).powi(2) + (y - r.1).powi(2);
            Complex64::from_polar(
                alpha / PI.sqrt() * (-0.5 * alpha * alpha * d2).exp(),
                p.0 * x + p.1 * y,
            )
        })
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid2D::new(7, 8, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn momentum_spacing() {
        let g = Grid2D::new(64, 32, -1.0, 2.0, 0.5, 0.25).unwrap();
        assert!((g.dkx() - 2.0 * PI / 32.0).abs() < 1e-15);
        assert!((g.dky() - 2.0 * PI / 8.0).abs() < 1e-15);
        let k = g.momentum_grid();
        assert!((k.x0 + 32.0 * g.dkx()).abs() < 1e-12);
    }

    #[test]
    fn normalize_constant_field() {
        // 2 C0 everywhere on a unit-area grid
        let g = unit_grid();
        let f = ComplexField {
            grid: g,
            values: vec![Complex64::new(2.0, 0.0); g.len()],
        };
        let n = normalize(&f).unwrap();
        assert!((n.norm_sqr() - 1.0).abs() < 1e-12);
        let area = g.len() as f64 * g.cell_area();
        for v in &n.values {
            assert!((v.re - 1.0 / area.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let g = Grid2D::spanning(128, 128, -10.0, 10.0, -10.0, 10.0).unwrap();
        let f = normalize(&gaussian(g, 1.0, (0.5, -0.3), (1.0, 2.0))).unwrap();
        let twice = normalize(&f).unwrap();
        for (a, b) in f.values.iter().zip(&twice.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_zero_field_fails() {
        let f = ComplexField::zeros(unit_grid());
        assert_eq!(normalize(&f), Err(Error::DegenerateField));
    }

    #[test]
    fn inner_product_grid_mismatch() {
        let f = ComplexField::zeros(unit_grid());
        let g = ComplexField::zeros(Grid2D::new(16, 16, 0.0, 0.0, 0.1, 0.1).unwrap());
        assert_eq!(inner_product(&f, &g), Err(Error::GridMismatch));
    }

    #[test]
    fn discrete_plane_waves_are_orthogonal() {
        let g = Grid2D::new(32, 32, 0.0, 0.0, 1.0 / 32.0, 1.0 / 32.0).unwrap();
        let wave = |m: f64, n: f64| {
            ComplexField::from_fn(g, |x, y| Complex64::from_polar(1.0, 2.0 * PI * (m * x + n * y)))
        };
        let f = wave(1.0, 2.0);
        let h = wave(3.0, -1.0);
        assert!(inner_product(&f, &h).unwrap().norm() < 1e-10);
        assert!((inner_product(&f, &f).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_is_single_momentum_peak() {
        let g = Grid2D::new(32, 32, -1.0, -1.0, 2.0 / 32.0, 2.0 / 32.0).unwrap();
        let (p, q) = (3.0 * g.dkx(), -2.0 * g.dky());
        let f = normalize(&ComplexField::from_fn(g, |x, y| {
            Complex64::from_polar(1.0, p * x + q * y)
        }))
        .unwrap();
        let fk = to_momentum(&f).unwrap();
        let k = fk.grid;
        let (imax, vmax) = fk
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        let (kx, ky) = k.coords(imax);
        assert!((kx - p).abs() < 1e-9 && (ky - q).abs() < 1e-9);
        let total: f64 = fk.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * k.cell_area();
        assert!((vmax.norm_sqr() * k.cell_area() - total).abs() < 1e-10);
    }

    #[test]
    fn gaussian_transforms_to_gaussian() {
        // |psi~(k)|^2 = exp(-(k - p)^2 / alpha^2) / (pi alpha^2)
        let alpha = 1.3;
        let g = Grid2D::spanning(128, 128, -12.0, 12.0, -12.0, 12.0).unwrap();
        let f = gaussian(g, alpha, (0.7, -0.4), (2.0, -1.0));
        let fk = to_momentum(&f).unwrap();
        let mut worst: f64 = 0.0;
        for (k, v) in fk.values.iter().enumerate() {
            let (kx, ky) = fk.grid.coords(k);
            let d2 = (kx - 2.0).powi(2) + (ky + 1.0).powi(2);
            let expected = (-d2 / (alpha * alpha)).exp() / (PI * alpha * alpha);
            worst = worst.max((v.norm_sqr() - expected).abs());
        }
        assert!(worst < 1e-10, "worst {worst}");
    }

    #[test]
    fn momentum_round_trip() {
        let g = Grid2D::spanning(48, 40, -6.0, 6.0, -5.0, 5.0).unwrap();
        let f = gaussian(g, 1.0, (0.3, 0.2), (1.5, 0.5));
        let back = from_momentum(&to_momentum(&f).unwrap(), &g).unwrap();
        for (a, b) in f.values.iter().zip(&back.values) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn gaussian_first_moment() {
        let g = Grid2D::spanning(128, 128, -10.0, 10.0, -10.0, 10.0).unwrap();
        let f = gaussian(g, 1.0, (0.0, 0.0), (5.0, 0.0));
        let (px, py) = expectation_momentum(&f).unwrap();
        assert!((px - 5.0).abs() < 1e-6 && py.abs() < 1e-6);
    }

    #[test]
    fn real_field_has_no_current() {
        let g = Grid2D::spanning(64, 64, -5.0, 5.0, -5.0, 5.0).unwrap();
        let f = normalize(&RealField::from_fn(g, |x, y| (-(x - 1.0).powi(2) - 0.3 * y * y).exp() * (1.0 + 0.2 * x)).to_complex()).unwrap();
        let (px, py) = expectation_momentum(&f).unwrap();
        assert!(px.abs() < 1e-10 && py.abs() < 1e-10);
    }
}
