//! Husimi (coherent-state) phase-space densities and their two-dimensional
//! sections, with the matching classical energy-shell curve.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::ComplexField;
use crate::models::Potential;

/// Coherent states are truncated beyond this many widths.
const WINDOW_SIGMAS: f64 = 8.0;

fn check_sigma(psi: &ComplexField, sigma: f64) -> Result<()> {
    let g = psi.grid;
    if !(sigma >= 2.0 * g.dx.max(g.dy)) {
        return Err(Error::InvalidParameter(format!(
            "coarse-graining length {sigma} is under-resolved by spacing {}; need at least twice the spacing",
            g.dx.max(g.dy)
        )));
    }
    Ok(())
}

/// Index range of grid nodes within `WINDOW_SIGMAS * sigma` of `c` along one
/// axis.
fn axis_window(c: f64, origin: f64, step: f64, n: usize, sigma: f64) -> std::ops::Range<usize> {
    let r = WINDOW_SIGMAS * sigma;
    let lo = ((c - r - origin) / step).floor().max(0.0) as usize;
    let hi = (((c + r - origin) / step).ceil() as isize + 1).clamp(0, n as isize) as usize;
    lo.min(n)..hi
}

/// `|<r, p|psi>|^2` with the unit-norm coherent state
/// `(1 / (sigma sqrt(pi))) exp(-(r' - r)^2 / (2 sigma^2) + i p . (r' - r))`.
pub fn husimi_value(psi: &ComplexField, r: (f64, f64), p: (f64, f64), sigma: f64) -> Result<f64> {
    check_sigma(psi, sigma)?;
    let g = psi.grid;
    let c = 1.0 / (sigma * PI.sqrt());
    let mut s = Complex64::default();
    for j in axis_window(r.1, g.y0, g.dy, g.ny, sigma) {
        let dy = g.y(j) - r.1;
        let wy = (-dy * dy / (2.0 * sigma * sigma)).exp();
        for i in axis_window(r.0, g.x0, g.dx, g.nx, sigma) {
            let dx = g.x(i) - r.0;
            let w = wy * (-dx * dx / (2.0 * sigma * sigma)).exp();
            s += psi.values[j * g.nx + i] * Complex64::from_polar(w, -(p.0 * dx + p.1 * dy));
        }
    }
    Ok((s * c * g.cell_area()).norm_sqr())
}

/// Husimi density on an `(x, p_x)` plane at fixed `(y0, py0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiSection {
    pub y0: f64,
    pub py0: f64,
    pub sigma: f64,
    pub xs: Vec<f64>,
    pub pxs: Vec<f64>,
    /// Row-major over `(px, x)`: `values[j * xs.len() + i]` at `(xs[i], pxs[j])`.
    pub values: Vec<f64>,
}

impl HusimiSection {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.xs.len() + i]
    }

    /// Copy scaled so the maximum is one.
    pub fn normalized(&self) -> Self {
        let m = self.values.iter().copied().fold(0.0, f64::max);
        let mut out = self.clone();
        if m > 0.0 {
            out.values.iter_mut().for_each(|v| *v /= m);
        }
        out
    }

    /// `sum H dx dp_x` over the section grid.
    pub fn integral(&self) -> f64 {
        let dx = spacing(&self.xs);
        let dp = spacing(&self.pxs);
        self.values.iter().sum::<f64>() * dx * dp
    }

    /// Fraction of the section mass with `|p_x^2 + py0^2 + V(x, y0) - E|`
    /// below `half_width`.
    pub fn shell_band_fraction(&self, potential: &dyn Potential, energy: f64, half_width: f64) -> f64 {
        let mut inside = 0.0;
        let mut total = 0.0;
        for (j, &px) in self.pxs.iter().enumerate() {
            for (i, &x) in self.xs.iter().enumerate() {
                let h = self.value(i, j);
                total += h;
                if (px * px + self.py0 * self.py0 + potential.value(x, self.y0) - energy).abs() < half_width {
                    inside += h;
                }
            }
        }
        if total > 0.0 {
            inside / total
        } else {
            0.0
        }
    }
}

fn spacing(v: &[f64]) -> f64 {
    if v.len() > 1 {
        (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
    } else {
        1.0
    }
}

/// Fills a section. The `y` sum does not depend on the `(x, p_x)` point, so
/// it is done once per grid column.
pub fn husimi_section(
    psi: &ComplexField,
    y0: f64,
    py0: f64,
    xs: &[f64],
    pxs: &[f64],
    sigma: f64,
) -> Result<HusimiSection> {
    check_sigma(psi, sigma)?;
    let g = psi.grid;
    let c = 1.0 / (sigma * PI.sqrt());
    let two_s2 = 2.0 * sigma * sigma;
    let mut column = vec![Complex64::default(); g.nx];
    for j in axis_window(y0, g.y0, g.dy, g.ny, sigma) {
        let dy = g.y(j) - y0;
        let w = Complex64::from_polar((-dy * dy / two_s2).exp(), -py0 * dy) * g.dy;
        for (i, col) in column.iter_mut().enumerate() {
            *col += psi.values[j * g.nx + i] * w;
        }
    }
    let nxs = xs.len();
    let mut values = vec![0.0; nxs * pxs.len()];
    values.par_chunks_mut(nxs).zip(pxs.par_iter()).for_each(|(row, &px)| {
        for (slot, &x) in row.iter_mut().zip(xs) {
            let mut s = Complex64::default();
            for i in axis_window(x, g.x0, g.dx, g.nx, sigma) {
                let dx = g.x(i) - x;
                s += column[i] * Complex64::from_polar((-dx * dx / two_s2).exp(), -px * dx);
            }
            *slot = (s * c * g.dx).norm_sqr();
        }
    });
    Ok(HusimiSection {
        y0,
        py0,
        sigma,
        xs: xs.to_vec(),
        pxs: pxs.to_vec(),
        values,
    })
}

/// Points `(x, +p_x)` of the classical shell `p_x^2 + py0^2 + V(x, y0) = E`;
/// the lower branch is the mirror image `-p_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellCurve {
    pub xs: Vec<f64>,
    pub px: Vec<f64>,
}

impl ShellCurve {
    /// Both branches as `(x, p_x)` pairs, upper branch first.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let upper = self.xs.iter().zip(&self.px).map(|(&x, &p)| (x, p));
        let lower = self.xs.iter().zip(&self.px).rev().map(|(&x, &p)| (x, -p));
        upper.chain(lower).collect()
    }
}

pub fn classical_shell_section(
    energy: f64,
    y0: f64,
    py0: f64,
    potential: &dyn Potential,
    xs: &[f64],
) -> Result<ShellCurve> {
    let mut out = ShellCurve {
        xs: Vec::new(),
        px: Vec::new(),
    };
    for &x in xs {
        let r = energy - py0 * py0 - potential.value(x, y0);
        if r >= 0.0 {
            out.xs.push(x);
            out.px.push(r.sqrt());
        }
    }
    if out.xs.is_empty() {
        return Err(Error::EmptySection(format!(
            "energy {energy} lies below the potential everywhere on the line y = {y0}"
        )));
    }
    Ok(out)
}

/// `n` equally spaced values covering `[lo, hi]`.
pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;
    use crate::models::{FreeSpace, HenonHeiles};
    use crate::propagation::make_gaussian_packet;

    fn coherent(sigma: f64, r: (f64, f64), p: (f64, f64)) -> ComplexField {
        let g = Grid2D::spanning(160, 160, -10.0, 10.0, -10.0, 10.0).unwrap();
        make_gaussian_packet(1.0 / sigma, r, p, &g).unwrap()
    }

    #[test]
    fn self_overlap_is_one() {
        let sigma = 1.2;
        let psi = coherent(sigma, (0.5, -1.0), (2.0, 1.0));
        // the packet's global phase e^{i p.r_i} cancels in the modulus
        let h = husimi_value(&psi, (0.5, -1.0), (2.0, 1.0), sigma).unwrap();
        assert!((h - 1.0).abs() < 1e-6, "{h}");
        let far = husimi_value(&psi, (7.0, 6.0), (2.0, 1.0), sigma).unwrap();
        assert!(far < 1e-8);
    }

    #[test]
    fn under_resolved_sigma_is_rejected() {
        let psi = coherent(1.0, (0.0, 0.0), (0.0, 0.0));
        assert!(husimi_value(&psi, (0.0, 0.0), (0.0, 0.0), 0.1).is_err());
    }

    #[test]
    fn section_matches_pointwise_values() {
        let sigma = 1.0;
        let psi = coherent(sigma, (1.0, 0.0), (1.5, 0.0));
        let xs = axis(-3.0, 3.0, 7);
        let ps = axis(-2.0, 3.0, 6);
        let s = husimi_section(&psi, 0.0, 0.0, &xs, &ps, sigma).unwrap();
        for (j, &p) in ps.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let v = husimi_value(&psi, (x, 0.0), (p, 0.0), sigma).unwrap();
                assert!((s.value(i, j) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shell_curves() {
        let c = classical_shell_section(4.0, 0.0, 0.0, &FreeSpace, &axis(-1.0, 1.0, 5)).unwrap();
        assert!(c.px.iter().all(|p| (p - 2.0).abs() < 1e-15));
        let hh = HenonHeiles::default();
        assert!(classical_shell_section(-1.0, 0.0, 0.0, &hh, &axis(-5.0, 5.0, 11)).is_err());
    }
}
