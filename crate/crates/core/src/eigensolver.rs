//! Lowest eigenpairs of large sparse symmetric operators by Chebyshev-filtered
//! subspace iteration.
//!
//! Each sweep applies a Chebyshev polynomial that damps the spectrum above the
//! current subspace's largest Ritz value, re-orthonormalizes (block classical
//! Gram-Schmidt, two passes), and performs a Rayleigh-Ritz projection. Only
//! operator applications and dense level-3 kernels are needed.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, gemm_nn, gemm_tn, norm};

/// A real symmetric operator acting on vectors of length `dim`.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// An upper bound on the spectrum (e.g. Gershgorin).
    fn upper_bound(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub wanted: usize,
    /// Extra subspace columns beyond `wanted`.
    pub guard: usize,
    pub degree: usize,
    /// Converged when `|A v - theta v| <= tol * upper_bound`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Estimate of the eigenvalue just above the subspace, used to place the
    /// first filter.
    pub cut_hint: Option<f64>,
}

impl SolverOptions {
    pub fn new(wanted: usize) -> Self {
        Self {
            wanted,
            guard: (wanted / 5).max(16),
            degree: 40,
            tol: 1e-10,
            max_sweeps: 60,
            seed: 0x5eed,
            cut_hint: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column-major `dim x values.len()`.
    pub vectors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sweeps: usize,
}

impl EigenResult {
    pub fn vector(&self, k: usize) -> &[f64] {
        let n = self.vectors.len() / self.values.len().max(1);
        &self.vectors[k * n..(k + 1) * n]
    }
}

pub fn lowest_eigenpairs(op: &dyn SymmetricOperator, opts: &SolverOptions) -> Result<EigenResult> {
    let n = op.dim();
    let wanted = opts.wanted;
    if wanted == 0 {
        return Err(Error::InvalidParameter("need at least one eigenpair".into()));
    }
    let k = (wanted + opts.guard).min(n);
    if wanted > n {
        return Err(Error::InvalidParameter(format!(
            "{wanted} eigenpairs requested from an operator of dimension {n}"
        )));
    }
    let upper = op.upper_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut v: Vec<f64> = (0..n * k).map(|_| StandardNormal.sample(&mut rng)).collect();
    orthonormalize(&mut v, n, k, &mut rng);
    let mut theta = rayleigh_ritz(op, &mut v, n, k)?;

    for sweep in 0..=opts.max_sweeps {
        let residuals = residual_norms(op, &v, &theta, n, wanted);
        if residuals.iter().all(|&r| r <= opts.tol * upper) {
            theta.truncate(wanted);
            v.truncate(n * wanted);
            return Ok(EigenResult {
                values: theta,
                vectors: v,
                residuals,
                sweeps: sweep,
            });
        }
        if sweep == opts.max_sweeps {
            break;
        }
        let mut cut = theta[k - 1];
        let degree = if sweep == 0 {
            if let Some(h) = opts.cut_hint {
                cut = cut.min(h);
            }
            opts.degree.min(12)
        } else {
            opts.degree
        };
        let low = theta[0].min(cut - 1e-3 * (upper - cut).abs());
        chebyshev_filter(op, &mut v, n, k, degree, cut, upper, low);
        orthonormalize(&mut v, n, k, &mut rng);
        theta = rayleigh_ritz(op, &mut v, n, k)?;
    }
    Err(Error::Numerical(format!(
        "eigensolver did not converge in {} sweeps",
        opts.max_sweeps
    )))
}

/// Applies the scaled Chebyshev filter damping `[cut, upper]`, with `low`
/// an estimate of the bottom of the spectrum used for scaling.
#[allow(clippy::too_many_arguments)]
fn chebyshev_filter(
    op: &dyn SymmetricOperator,
    v: &mut [f64],
    n: usize,
    _k: usize,
    degree: usize,
    cut: f64,
    upper: f64,
    low: f64,
) {
    let e = 0.5 * (upper - cut);
    let c = 0.5 * (upper + cut);
    v.par_chunks_mut(n).for_each(|x| {
        let mut y = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut sigma = e / (low - c);
        let tau = 2.0 / sigma;
        op.apply(x, &mut y);
        for (yi, xi) in y.iter_mut().zip(x.iter()) {
            *yi = (*yi - c * xi) * (sigma / e);
        }
        let prev: &mut [f64] = x;
        for _ in 1..degree {
            let sigma_new = 1.0 / (tau - sigma);
            op.apply(&y, &mut y_new);
            let f = 2.0 * sigma_new / e;
            let g = sigma * sigma_new;
            for ((yn, yi), pi) in y_new.iter_mut().zip(y.iter()).zip(prev.iter()) {
                *yn = (*yn - c * yi) * f - g * pi;
            }
            prev.copy_from_slice(&y);
            std::mem::swap(&mut y, &mut y_new);
            sigma = sigma_new;
        }
        // keep columns O(1) so the Gram-Schmidt thresholds stay meaningful
        let s = norm(&y);
        let s = if s > 0.0 { 1.0 / s } else { 1.0 };
        for (pi, yi) in prev.iter_mut().zip(&y) {
            *pi = yi * s;
        }
    });
}

/// Block classical Gram-Schmidt with reorthogonalization. Columns that
/// collapse numerically are replaced by fresh random directions.
fn orthonormalize(v: &mut [f64], n: usize, k: usize, rng: &mut ChaCha8Rng) {
    const BLOCK: usize = 32;
    let mut coeff = vec![0.0; k * BLOCK];
    for s in (0..k).step_by(BLOCK) {
        let w = (s + BLOCK).min(k) - s;
        let (done, rest) = v.split_at_mut(s * n);
        let block = &mut rest[..w * n];
        for _ in 0..2 {
            if s > 0 {
                gemm_tn(n, s, w, 1.0, done, block, 0.0, &mut coeff[..s * w]);
                gemm_nn(n, s, w, -1.0, done, &coeff[..s * w], 1.0, block);
            }
        }
        for c in 0..w {
            let mut attempts = 0;
            loop {
                let (prev_in_block, cur) = block.split_at_mut(c * n);
                let col = &mut cur[..n];
                let before = norm(col);
                for _ in 0..2 {
                    if s > 0 && attempts > 0 {
                        gemm_tn(n, s, 1, 1.0, done, col, 0.0, &mut coeff[..s]);
                        gemm_nn(n, s, 1, -1.0, done, &coeff[..s], 1.0, col);
                    }
                    for d in 0..c {
                        let q = &prev_in_block[d * n..(d + 1) * n];
                        let h = dot(q, col);
                        for (ci, qi) in col.iter_mut().zip(q) {
                            *ci -= h * qi;
                        }
                    }
                }
                let after = norm(col);
                if after > 1e-10 * before && after > 0.0 {
                    let inv = 1.0 / after;
                    col.iter_mut().for_each(|x| *x *= inv);
                    break;
                }
                attempts += 1;
                assert!(attempts < 8, "unable to extend orthonormal basis");
                for x in col.iter_mut() {
                    *x = StandardNormal.sample(rng);
                }
            }
        }
    }
}

/// Rotates `v` onto Ritz vectors; returns ascending Ritz values.
fn rayleigh_ritz(op: &dyn SymmetricOperator, v: &mut Vec<f64>, n: usize, k: usize) -> Result<Vec<f64>> {
    let mut av = vec![0.0; n * k];
    av.par_chunks_mut(n)
        .zip(v.par_chunks(n))
        .for_each(|(y, x)| op.apply(x, y));
    let mut h = vec![0.0; k * k];
    gemm_tn(n, k, k, 1.0, v, &av, 0.0, &mut h);
    drop(av);
    let mut hm = DMatrix::from_vec(k, k, h);
    let ht = hm.transpose();
    hm = (hm + ht) * 0.5;
    let eig = SymmetricEigen::try_new(hm, 1e-14, 0)
        .ok_or_else(|| Error::Numerical("projected eigenproblem failed".into()))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut q = vec![0.0; k * k];
    for (dst, &src) in order.iter().enumerate() {
        q[dst * k..(dst + 1) * k].copy_from_slice(eig.eigenvectors.column(src).as_slice());
    }
    let mut rotated = vec![0.0; n * k];
    gemm_nn(n, k, k, 1.0, v, &q, 0.0, &mut rotated);
    *v = rotated;
    Ok(theta)
}

fn residual_norms(op: &dyn SymmetricOperator, v: &[f64], theta: &[f64], n: usize, m: usize) -> Vec<f64> {
    v[..n * m]
        .par_chunks(n)
        .zip(theta[..m].par_iter())
        .map(|(x, &t)| {
            let mut y = vec![0.0; n];
            op.apply(x, &mut y);
            y.iter()
                .zip(x)
                .map(|(yi, xi)| (yi - t * xi).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Residual `|A v - theta v|` of a single pair.
pub fn residual(op: &dyn SymmetricOperator, v: &[f64], theta: f64) -> f64 {
    let mut y = vec![0.0; v.len()];
    op.apply(v, &mut y);
    y.iter()
        .zip(v)
        .map(|(yi, xi)| (yi - theta * xi).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Dirichlet Laplacian, eigenvalues `(2 - 2 cos(k pi / (n + 1)))`.
    struct Chain(usize);

    impl SymmetricOperator for Chain {
        fn dim(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let n = self.0;
            for i in 0..n {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - left - right;
            }
        }
        fn upper_bound(&self) -> f64 {
            4.0
        }
    }

    #[test]
    fn chain_spectrum() {
        let op = Chain(400);
        let mut opts = SolverOptions::new(30);
        opts.tol = 1e-12;
        let res = lowest_eigenpairs(&op, &opts).unwrap();
        for (k, &v) in res.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 401.0).cos();
            assert!((v - exact).abs() < 1e-10, "level {k}: {v} vs {exact}");
        }
        for a in 0..30 {
            for b in 0..30 {
                let d = dot(res.vector(a), res.vector(b));
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10);
            }
            assert!(residual(&op, res.vector(a), res.values[a]) < 1e-10);
        }
    }

    #[test]
    fn rejects_oversized_requests() {
        assert!(lowest_eigenpairs(&Chain(10), &SolverOptions::new(11)).is_err());
        assert!(lowest_eigenpairs(&Chain(10), &SolverOptions::new(0)).is_err());
    }
}
