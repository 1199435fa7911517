//! Histograms with explicit bin edges, Kolmogorov-Smirnov distances and a
//! few distribution functions shared by the analysis modules.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Uniform bins over `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(hi > lo && count > 0 && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "binning needs lo < hi and at least one bin, got [{lo}, {hi}) with {count}"
            )));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.width()
    }

    pub fn index(&self, v: f64) -> Option<usize> {
        if !(v >= self.lo && v < self.hi) {
            return None;
        }
        Some((((v - self.lo) / self.width()) as usize).min(self.count - 1))
    }
}

/// A normalized histogram: `values[i]` is a probability density, so
/// `sum(values) * width` is one unless nothing fell inside the range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub binning: Binning,
    pub values: Vec<f64>,
}

impl Histogram {
    /// Density of the samples that land inside the binning.
    pub fn from_samples(samples: &[f64], binning: Binning) -> Self {
        Self::from_weighted(samples.iter().map(|&s| (s, 1.0)), binning)
    }

    pub fn from_weighted(samples: impl IntoIterator<Item = (f64, f64)>, binning: Binning) -> Self {
        let mut values = vec![0.0; binning.count];
        for (s, w) in samples {
            if let Some(i) = binning.index(s) {
                values[i] += w;
            }
        }
        let total: f64 = values.iter().sum();
        if total > 0.0 {
            let scale = 1.0 / (total * binning.width());
            values.iter_mut().for_each(|v| *v *= scale);
        }
        Self { binning, values }
    }

    /// Like [`from_weighted`](Self::from_weighted), with each weight spread
    /// uniformly over an interval `[lo, hi)` instead of sitting at a point.
    pub fn from_intervals(items: impl IntoIterator<Item = (f64, f64, f64)>, binning: Binning) -> Self {
        let mut values = vec![0.0; binning.count];
        let w = binning.width();
        for (lo, hi, weight) in items {
            if !(hi > lo) {
                continue;
            }
            let first = ((lo - binning.lo) / w).floor().max(0.0) as usize;
            let last = (((hi - binning.lo) / w).ceil().max(0.0) as usize).min(binning.count);
            for (i, v) in values.iter_mut().enumerate().take(last).skip(first) {
                let overlap = hi.min(binning.edge(i + 1)) - lo.max(binning.edge(i));
                if overlap > 0.0 {
                    *v += weight * overlap / (hi - lo);
                }
            }
        }
        let total: f64 = values.iter().sum();
        if total > 0.0 {
            let scale = 1.0 / (total * w);
            values.iter_mut().for_each(|v| *v *= scale);
        }
        Self { binning, values }
    }

    /// Samples a density function at the bin centers.
    pub fn from_density(binning: Binning, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..binning.count).map(|i| f(binning.center(i))).collect();
        Self { binning, values }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.binning.width()
    }

    /// `sum |f - g| * width`; both histograms must share their binning.
    pub fn l1_distance(&self, other: &Histogram) -> Result<f64> {
        if self.binning != other.binning {
            return Err(Error::InvalidParameter("histograms use different bins".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.binning.width())
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by `n`).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divides by `n - 1`).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_n - F|`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        // step over ties so the empirical CDF jumps once per distinct value
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let f = cdf(sorted[i]).clamp(0.0, 1.0);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn exponential_cdf(x: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-rate * x).exp()
    }
}

pub fn normal_cdf(x: f64, mean: f64, std: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (std * std::f64::consts::SQRT_2)))
}

/// CDF of the Porter-Thomas law `sqrt(A / 2 pi n) exp(-A n / 2)`.
pub fn porter_thomas_cdf(n: f64, a: f64) -> f64 {
    if n <= 0.0 {
        0.0
    } else {
        erf((0.5 * a * n).sqrt())
    }
}

/// Wigner surmise CDF `1 - exp(-pi s^2 / 4)`.
pub fn wigner_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        1.0 - (-PI * s * s / 4.0).exp()
    }
}

pub fn wigner_pdf(s: f64) -> f64 {
    if s < 0.0 {
        0.0
    } else {
        0.5 * PI * s * (-PI * s * s / 4.0).exp()
    }
}

/// Least-squares polynomial coefficients (lowest order first). The abscissa
/// is mapped to `[-1, 1]` internally; the returned closure evaluates the fit
/// at original coordinates.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<impl Fn(f64) -> f64> {
    if x.len() != y.len() || x.len() <= degree {
        return Err(Error::TooFewSamples {
            what: "points for the polynomial fit",
            got: x.len(),
            need: degree + 1,
        });
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate("fit abscissae are all equal".into()));
    }
    let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    let design = DMatrix::from_fn(x.len(), degree + 1, |r, c| ((x[r] - mid) / half).powi(c as i32));
    let rhs = DVector::from_column_slice(y);
    let coeffs = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Numerical(format!("polynomial fit failed: {e}")))?;
    let coeffs: Vec<f64> = coeffs.iter().copied().collect();
    Ok(move |v: f64| {
        let t = (v - mid) / half;
        coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_normalization() {
        let b = Binning::new(0.0, 1.0, 4).unwrap();
        let h = Histogram::from_samples(&[0.1, 0.2, 0.6, 0.9, 5.0], b);
        assert!((h.integral() - 1.0).abs() < 1e-12);
        assert_eq!(h.values, vec![2.0, 0.0, 1.0, 1.0]);
        assert_eq!(b.index(1.0), None);
        assert_eq!(b.index(0.999_999), Some(3));
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| -((1.0 - (i as f64 + 0.5) / n as f64).ln())).collect();
        assert!(ks_distance(&xs, |x| exponential_cdf(x, 1.0)) <= 0.5 / n as f64 + 1e-12);
        assert!(ks_two_sample(&xs, &xs) < 1e-12);
    }

    #[test]
    fn ks_handles_ties() {
        let xs = vec![1.0; 10];
        let d = ks_distance(&xs, |x| if x < 1.0 { 0.0 } else { 0.5 });
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn polyfit_recovers_cubic() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.37 + 3.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 0.5 * v * v - 0.01 * v * v * v).collect();
        let f = polyfit(&x, &y, 3).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((f(*xi) - yi).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_cdfs_are_consistent() {
        assert!((porter_thomas_cdf(1e9, 1.0) - 1.0).abs() < 1e-12);
        assert!((wigner_cdf(10.0) - 1.0).abs() < 1e-12);
        assert!((normal_cdf(0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
