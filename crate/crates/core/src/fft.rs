//! Two-dimensional FFTs over row-major grid buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Cached forward/inverse plans for an `nx` by `ny` row-major buffer
/// (index `j * nx + i`). Transforms are unnormalized.
#[derive(Clone)]
pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish()
    }
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(data, scratch, &self.fwd_x, &self.fwd_y);
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(data, scratch, &self.inv_x, &self.inv_y);
    }

    fn run(
        &self,
        data: &mut [Complex64],
        scratch: &mut Vec<Complex64>,
        along_x: &Arc<dyn Fft<f64>>,
        along_y: &Arc<dyn Fft<f64>>,
    ) {
        let (nx, ny) = (self.nx, self.ny);
        assert_eq!(data.len(), nx * ny);
        // rows are contiguous: one batched call covers all of them
        along_x.process(data);

        scratch.resize(nx * ny, Complex64::default());
        transpose(data, scratch, nx, ny);
        along_y.process(scratch);
        transpose(scratch, data, ny, nx);
    }
}

/// `dst[i * rows + j] = src[j * cols + i]` for a `rows x cols` source.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    const TILE: usize = 32;
    for jb in (0..rows).step_by(TILE) {
        for ib in (0..cols).step_by(TILE) {
            for j in jb..(jb + TILE).min(rows) {
                for i in ib..(ib + TILE).min(cols) {
                    dst[i * rows + j] = src[j * cols + i];
                }
            }
        }
    }
}

/// Signed DFT frequency index for bin `m` of an `n`-point transform.
pub fn signed_index(m: usize, n: usize) -> isize {
    if m < n.div_ceil(2) {
        m as isize
    } else {
        m as isize - n as isize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_recovers_input() {
        let (nx, ny) = (12, 10);
        let fft = Fft2::new(nx, ny);
        let orig: Vec<Complex64> = (0..nx * ny)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        let mut scratch = Vec::new();
        fft.forward(&mut data, &mut scratch);
        fft.inverse(&mut data, &mut scratch);
        let scale = 1.0 / (nx * ny) as f64;
        for (a, b) in data.iter().zip(&orig) {
            assert!((a * scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_one_bin() {
        let (nx, ny) = (16, 8);
        let fft = Fft2::new(nx, ny);
        let (mx, my) = (3usize, 5usize);
        let mut data: Vec<Complex64> = (0..nx * ny)
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                let phase = 2.0 * std::f64::consts::PI
                    * (mx as f64 * i as f64 / nx as f64 + my as f64 * j as f64 / ny as f64);
                Complex64::from_polar(1.0, phase)
            })
            .collect();
        fft.forward(&mut data, &mut Vec::new());
        for (k, v) in data.iter().enumerate() {
            let expected = if k == my * nx + mx { (nx * ny) as f64 } else { 0.0 };
            assert!((v.norm() - expected).abs() < 1e-9, "bin {k}");
        }
    }

    #[test]
    fn signed_index_wraps() {
        assert_eq!(signed_index(0, 8), 0);
        assert_eq!(signed_index(3, 8), 3);
        assert_eq!(signed_index(4, 8), -4);
        assert_eq!(signed_index(7, 8), -1);
        assert_eq!(signed_index(4, 9), 4);
        assert_eq!(signed_index(5, 9), -4);
    }
}
