//! Relative intensity fluctuations `u = n / n_inf`, their fitted laws, the
//! spatial correlation of the equilibrated density, phase maps and the
//! random-hypersphere oracle for the exponential and Porter-Thomas laws.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::fields::{ComplexField, RealField};
use crate::rng;
use crate::stats::{
    exponential_cdf, ks_distance, mean, normal_cdf, porter_thomas_cdf, sample_std, Binning, Histogram,
};

/// Minimum admissible nodes or samples for a fluctuation fit.
pub const MIN_FLUCTUATION_SAMPLES: usize = 1000;
/// Default support threshold relative to `max(n_inf)`.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-3;

/// `u_i = n_t / n_inf` on nodes where `n_inf > threshold * max(n_inf)`.
pub fn relative_fluctuations(n_t: &RealField, n_inf: &RealField, threshold: f64) -> Result<Vec<f64>> {
    n_t.grid.ensure_matches(&n_inf.grid)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("support threshold must lie in (0, 1), got {threshold}")));
    }
    let cut = threshold * n_inf.max();
    let u: Vec<f64> = n_t
        .values
        .iter()
        .zip(&n_inf.values)
        .filter(|(_, &m)| m > cut)
        .map(|(&n, &m)| n / m)
        .collect();
    if u.len() < MIN_FLUCTUATION_SAMPLES {
        return Err(Error::TooFewSamples {
            what: "nodes above the support threshold",
            got: u.len(),
            need: MIN_FLUCTUATION_SAMPLES,
        });
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Exponential,
    Gaussian,
    PorterThomas,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Self::Exponential => "exponential",
            Self::Gaussian => "gaussian",
            Self::PorterThomas => "porter-thomas",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitParameters {
    Rate(f64),
    MeanStd { mean: f64, std: f64 },
    /// Porter-Thomas `A`, the inverse mean.
    Scale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub family: Family,
    pub parameters: FitParameters,
    pub ks_distance: f64,
    pub sample_count: usize,
}

impl FitReport {
    /// CDF of the fitted law.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.parameters {
            FitParameters::Rate(r) => exponential_cdf(x, r),
            FitParameters::MeanStd { mean, std } => normal_cdf(x, mean, std),
            FitParameters::Scale(a) => porter_thomas_cdf(x, a),
        }
    }

    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![("family".to_string(), self.family.label().to_string())];
        match self.parameters {
            FitParameters::Rate(r) => kv.push(("rate".into(), format!("{r:.9e}"))),
            FitParameters::MeanStd { mean, std } => {
                kv.push(("mean".into(), format!("{mean:.9e}")));
                kv.push(("std".into(), format!("{std:.9e}")));
            }
            FitParameters::Scale(a) => kv.push(("scale".into(), format!("{a:.9e}"))),
        }
        kv.push(("ks_distance".into(), format!("{:.9e}", self.ks_distance)));
        kv.push(("sample_count".into(), self.sample_count.to_string()));
        kv
    }
}

fn check_count(samples: &[f64]) -> Result<()> {
    if samples.len() < MIN_FLUCTUATION_SAMPLES {
        return Err(Error::TooFewSamples {
            what: "samples for a distribution fit",
            got: samples.len(),
            need: MIN_FLUCTUATION_SAMPLES,
        });
    }
    Ok(())
}

fn positive_mean(samples: &[f64], family: &str) -> Result<f64> {
    check_count(samples)?;
    if samples.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter(format!("{family} fit needs strictly positive samples")));
    }
    Ok(mean(samples))
}

/// Maximum-likelihood exponential: `rate = 1 / mean`.
pub fn fit_exponential(samples: &[f64]) -> Result<FitReport> {
    let rate = 1.0 / positive_mean(samples, "exponential")?;
    Ok(FitReport {
        family: Family::Exponential,
        parameters: FitParameters::Rate(rate),
        ks_distance: ks_distance(samples, |x| exponential_cdf(x, rate)),
        sample_count: samples.len(),
    })
}

pub fn fit_gaussian(samples: &[f64]) -> Result<FitReport> {
    check_count(samples)?;
    let m = mean(samples);
    let s = sample_std(samples);
    if !(s > 0.0) {
        return Err(Error::Degenerate("samples have zero spread".into()));
    }
    Ok(FitReport {
        family: Family::Gaussian,
        parameters: FitParameters::MeanStd { mean: m, std: s },
        ks_distance: ks_distance(samples, |x| normal_cdf(x, m, s)),
        sample_count: samples.len(),
    })
}

/// Maximum-likelihood Porter-Thomas: `A = 1 / mean`.
pub fn fit_porter_thomas(samples: &[f64]) -> Result<FitReport> {
    let a = 1.0 / positive_mean(samples, "Porter-Thomas")?;
    Ok(FitReport {
        family: Family::PorterThomas,
        parameters: FitParameters::Scale(a),
        ks_distance: ks_distance(samples, |x| porter_thomas_cdf(x, a)),
        sample_count: samples.len(),
    })
}

/// Densities of the two intensity laws.
pub fn closed_form_pdf(family: Family, n: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
    }
    match family {
        // scale is the mean n0
        Family::Exponential if n >= 0.0 => Ok((-n / scale).exp() / scale),
        // scale is A
        Family::PorterThomas if n > 0.0 => Ok((scale / (2.0 * PI * n)).sqrt() * (-0.5 * scale * n).exp()),
        Family::Gaussian => Err(Error::InvalidParameter("no closed intensity law for the Gaussian family".into())),
        _ => Err(Error::InvalidParameter(format!("argument {n} is outside the support of {}", family.label()))),
    }
}

/// Exact density of one component weight `gamma = |a_j|^2` of a uniform
/// random unit vector in `C^N`: `(N - 1)(1 - gamma)^(N - 2)`.
pub fn complex_component_density(gamma: f64, n: usize) -> f64 {
    if !(0.0..=1.0).contains(&gamma) || n < 2 {
        return 0.0;
    }
    (n as f64 - 1.0) * (1.0 - gamma).powi(n as i32 - 2)
}

/// Radially averaged autocorrelation of `n - mean` over masked nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    /// Node pairs contributing to each radius bin.
    pub pairs: Vec<f64>,
}

/// Minimum number of masked nodes.
pub const MIN_CORRELATION_NODES: usize = 100;

/// `C(r) = <dn(0) dn(r)> / <dn^2>` with translational averaging over node
/// pairs inside `mask` and radial bins one grid spacing wide.
pub fn spatial_correlation(n: &RealField, mask: &[bool]) -> Result<CorrelationTable> {
    let g = n.grid;
    if mask.len() != g.len() {
        return Err(Error::InvalidParameter(format!("mask has {} entries for {} nodes", mask.len(), g.len())));
    }
    let inside: Vec<f64> = n.values.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    if inside.len() < MIN_CORRELATION_NODES {
        return Err(Error::TooFewSamples {
            what: "masked nodes for the correlation",
            got: inside.len(),
            need: MIN_CORRELATION_NODES,
        });
    }
    let nbar = mean(&inside);
    let var = inside.iter().map(|v| (v - nbar).powi(2)).sum::<f64>() / inside.len() as f64;
    if !(var > 1e-300) {
        return Err(Error::Degenerate("density is constant on the mask".into()));
    }
    // zero padding to twice the size removes periodic wrap-around
    let (px, py) = (2 * g.nx, 2 * g.ny);
    let fft = Fft2::new(px, py);
    let mut scratch = Vec::new();
    let mut f = vec![Complex64::default(); px * py];
    let mut m = vec![Complex64::default(); px * py];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = j * g.nx + i;
            if mask[k] {
                f[j * px + i] = Complex64::new(n.values[k] - nbar, 0.0);
                m[j * px + i] = Complex64::new(1.0, 0.0);
            }
        }
    }
    fft.forward(&mut f, &mut scratch);
    fft.forward(&mut m, &mut scratch);
    for v in f.iter_mut().chain(m.iter_mut()) {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    fft.inverse(&mut f, &mut scratch);
    fft.inverse(&mut m, &mut scratch);

    let step = g.dx.max(g.dy);
    let r_max = 0.5 * (g.nx as f64 * g.dx).min(g.ny as f64 * g.dy);
    let bins = (r_max / step).floor() as usize + 1;
    let mut num = vec![0.0; bins];
    let mut den = vec![0.0; bins];
    for b in 0..py {
        let sy = crate::fft::signed_index(b, py) as f64 * g.dy;
        for a in 0..px {
            let sx = crate::fft::signed_index(a, px) as f64 * g.dx;
            let bin = (sx.hypot(sy) / step).round() as usize;
            if bin >= bins {
                continue;
            }
            // inverse transforms are unnormalized
            let pairs = m[b * px + a].re / (px * py) as f64;
            if pairs > 0.5 {
                num[bin] += f[b * px + a].re / (px * py) as f64;
                den[bin] += pairs;
            }
        }
    }
    let mut out = CorrelationTable {
        r: Vec::new(),
        c: Vec::new(),
        pairs: Vec::new(),
    };
    for k in 0..bins {
        if den[k] > 0.0 {
            out.r.push(k as f64 * step);
            out.c.push(num[k] / den[k] / var);
            out.pairs.push(den[k]);
        }
    }
    out.c[0] = 1.0;
    Ok(out)
}

/// `arg psi` in `(-pi, pi]`, NaN where `|psi| <= 1e-12 max|psi|`.
pub fn phase_map(psi: &ComplexField) -> RealField {
    let cut = 1e-12 * psi.max_abs();
    let values = psi
        .values
        .iter()
        .map(|z| {
            if z.norm() <= cut {
                f64::NAN
            } else {
                let a = z.arg();
                // atan2 returns -pi on the negative real axis with negative zero
                if a <= -PI {
                    PI
                } else {
                    a
                }
            }
        })
        .collect();
    RealField {
        grid: psi.grid,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Complex,
    Real,
}

impl FieldKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(Self::Complex),
            "real" => Ok(Self::Real),
            _ => Err(Error::InvalidParameter(format!("field kind must be complex or real, got {s:?}"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Complex => "complex",
            Self::Real => "real",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub kind: FieldKind,
    pub dimension: usize,
    /// Raw component weights `|a_j|^2`, one per draw.
    pub gammas: Vec<f64>,
    /// `N |a_j|^2`, unit mean.
    pub scaled: Vec<f64>,
    pub histogram: Histogram,
    pub ks_exponential: f64,
    pub ks_porter_thomas: f64,
}

const ORACLE_CHUNK: usize = 1 << 14;

/// Component weights of uniform random unit vectors in `C^N` or `R^N`.
///
/// Each draw normalizes a Gaussian vector. Only the first component's weight
/// is kept, and the squared norm of the remaining `N - 1` components is drawn
/// directly from its exact law (a sum of squared normals is Gamma
/// distributed), so the cost per draw does not grow with `N`.
pub fn component_weights(n: usize, kind: FieldKind, draws: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 2 || draws == 0 {
        return Err(Error::InvalidParameter(format!("need N >= 2 and draws > 0, got {n}, {draws}")));
    }
    // Gamma(shape, scale) laws of |z_1|^2 and of the rest
    let (first, rest) = match kind {
        // |z|^2 with Re, Im ~ N(0, 1/2) is Exp(1)
        FieldKind::Complex => ((1.0, 1.0), (n as f64 - 1.0, 1.0)),
        FieldKind::Real => ((0.5, 2.0), (0.5 * (n as f64 - 1.0), 2.0)),
    };
    let g1 = Gamma::new(first.0, first.1).map_err(|e| Error::Numerical(e.to_string()))?;
    let gr = Gamma::new(rest.0, rest.1).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((0..draws.div_ceil(ORACLE_CHUNK))
        .into_par_iter()
        .flat_map_iter(|task| {
            let mut r = rng::stream(seed, task as u64);
            let len = ORACLE_CHUNK.min(draws - task * ORACLE_CHUNK);
            (0..len)
                .map(|_| {
                    let a: f64 = g1.sample(&mut r);
                    let b: f64 = gr.sample(&mut r);
                    a / (a + b)
                })
                .collect::<Vec<_>>()
        })
        .collect())
}

/// The same weights from fully materialized random vectors. Slower; used to
/// cross-check [`component_weights`].
pub fn component_weights_explicit(n: usize, kind: FieldKind, draws: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, u64::MAX);
    let per = match kind {
        FieldKind::Complex => 2,
        FieldKind::Real => 1,
    };
    (0..draws)
        .map(|_| {
            let v: Vec<f64> = (0..per * n).map(|_| StandardNormal.sample(&mut r)).collect();
            let total: f64 = v.iter().map(|x| x * x).sum();
            v[..per].iter().map(|x| x * x).sum::<f64>() / total
        })
        .collect()
}

/// Histogram of `N gamma` and distances to the unit-mean closed forms.
pub fn hypersphere_oracle(n: usize, kind: FieldKind, draws: usize, seed: u64) -> Result<OracleReport> {
    let gammas = component_weights(n, kind, draws, seed)?;
    let scaled: Vec<f64> = gammas.iter().map(|g| g * n as f64).collect();
    let histogram = Histogram::from_samples(&scaled, Binning::new(0.0, 10.0, 100)?);
    let ks_exponential = ks_distance(&scaled, |x| exponential_cdf(x, 1.0));
    let ks_porter_thomas = ks_distance(&scaled, |x| porter_thomas_cdf(x, 1.0));
    Ok(OracleReport {
        kind,
        dimension: n,
        gammas,
        scaled,
        histogram,
        ks_exponential,
        ks_porter_thomas,
    })
}

/// Discrete symmetry of a state, which splits the effective number of
/// independent cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryClass {
    /// One reflection.
    Packet,
    /// Two reflections.
    Billiard,
    /// Threefold rotations with reflections.
    HenonHeiles,
}

impl SymmetryClass {
    pub fn area_factor(self) -> f64 {
        match self {
            Self::Packet => 0.5,
            Self::Billiard => 0.25,
            Self::HenonHeiles => 1.0 / 6.0,
        }
    }

    /// Effective number of independent components for `nodes` grid cells.
    pub fn effective_count(self, nodes: usize) -> f64 {
        nodes as f64 * self.area_factor()
    }
}
