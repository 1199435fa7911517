//! Dense kernels on column-major slices, backed by `matrixmultiply`.

/// `C = alpha * A^T B + beta * C` with `A: n x p`, `B: n x q`, `C: p x q`.
#[allow(clippy::too_many_arguments)]
pub fn gemm_tn(n: usize, p: usize, q: usize, alpha: f64, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    assert!(a.len() >= n * p && b.len() >= n * q && c.len() >= p * q);
    if p == 0 || q == 0 {
        return;
    }
    // A^T is p x n with row stride n, column stride 1
    unsafe {
        matrixmultiply::dgemm(
            p,
            n,
            q,
            alpha,
            a.as_ptr(),
            n as isize,
            1,
            b.as_ptr(),
            1,
            n as isize,
            beta,
            c.as_mut_ptr(),
            1,
            p as isize,
        );
    }
}

/// `C = alpha * A B + beta * C` with `A: n x p`, `B: p x q`, `C: n x q`.
#[allow(clippy::too_many_arguments)]
pub fn gemm_nn(n: usize, p: usize, q: usize, alpha: f64, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    assert!(a.len() >= n * p && b.len() >= p * q && c.len() >= n * q);
    if n == 0 || q == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            n,
            p,
            q,
            alpha,
            a.as_ptr(),
            1,
            n as isize,
            b.as_ptr(),
            1,
            p as isize,
            beta,
            c.as_mut_ptr(),
            1,
            n as isize,
        );
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_naive() {
        let (n, p, q) = (7, 3, 4);
        let a: Vec<f64> = (0..n * p).map(|k| (k as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..n * q).map(|k| (k as f64 * 0.3).cos()).collect();
        let mut c = vec![1.0; p * q];
        gemm_tn(n, p, q, 2.0, &a, &b, 0.5, &mut c);
        for i in 0..p {
            for j in 0..q {
                let s: f64 = (0..n).map(|r| a[i * n + r] * b[j * n + r]).sum();
                assert!((c[j * p + i] - (2.0 * s + 0.5)).abs() < 1e-12);
            }
        }

        let m: Vec<f64> = (0..p * q).map(|k| k as f64 - 3.0).collect();
        let mut d = vec![0.0; n * q];
        gemm_nn(n, p, q, 1.0, &a, &m, 0.0, &mut d);
        for r in 0..n {
            for j in 0..q {
                let s: f64 = (0..p).map(|i| a[i * n + r] * m[j * p + i]).sum();
                assert!((d[j * n + r] - s).abs() < 1e-12);
            }
        }
    }
}
