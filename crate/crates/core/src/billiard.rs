//! Dirichlet eigenstates of the ripple billiard.
//!
//! The billiard is discretized on a uniform square mesh whose nodes include
//! the symmetry lines `x = 0` and `y = b`. A node belongs to the interior when
//! it lies more than half a mesh spacing inside every wall, which places the
//! effective Dirichlet wall (the first excluded node) on the true wall on
//! average. Each of the four reflection-parity sectors is solved on the
//! quarter domain `x >= 0, y >= b`, with mirror (even) or antimirror (odd)
//! ghost values across the symmetry lines.
//!
//! The folded operator `A` is self-adjoint for the inner product weighted by
//! `w_q` (the fraction of the full domain a quarter node stands for: 1/4, 1/2
//! on a symmetry line, 1 at the center). The solver works with the symmetric
//! `B = W^{1/2} A W^{-1/2}`; for a unit eigenvector `u` of `B` the full-domain
//! eigenfunction on a quarter node is `u_q / (2 sqrt(w_q dA))`, normalized to
//! `sum phi^2 dA = 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigensolver::{self, SolverOptions, SymmetricOperator};
use crate::error::{Error, Result};
use crate::fields::{ComplexField, Grid2D, RealField};
use crate::linalg::{gemm_nn, gemm_tn};
use crate::models::RippleBilliard;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "even" => Some(Parity::Even),
            "odd" => Some(Parity::Odd),
            _ => None,
        }
    }
}

/// Reflection symmetry class: `x` is the parity under `x -> -x`, `y` under
/// `y -> 2b - y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sector {
    pub x: Parity,
    pub y: Parity,
}

impl Sector {
    pub const EVEN_EVEN: Sector = Sector { x: Parity::Even, y: Parity::Even };
    pub const ODD_EVEN: Sector = Sector { x: Parity::Odd, y: Parity::Even };
    pub const EVEN_ODD: Sector = Sector { x: Parity::Even, y: Parity::Odd };
    pub const ODD_ODD: Sector = Sector { x: Parity::Odd, y: Parity::Odd };
    pub const ALL: [Sector; 4] = [Self::EVEN_EVEN, Self::ODD_EVEN, Self::EVEN_ODD, Self::ODD_ODD];

    pub fn label(&self) -> String {
        format!("{}-{}", self.x.label(), self.y.label())
    }
}

/// Finite-difference approximation of `-laplacian`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    FivePoint,
    /// Fourth-order wide stencil `(-1, 16, -30, 16, -1) / 12` per axis.
    FourthOrder,
}

impl Stencil {
    /// `(diagonal, [(offset, coefficient)])` in units of `1/h^2`.
    fn coefficients(self) -> (f64, &'static [(i32, f64)]) {
        match self {
            Stencil::FivePoint => (4.0, &[(1, -1.0)]),
            Stencil::FourthOrder => (5.0, &[(1, -4.0 / 3.0), (2, 1.0 / 12.0)]),
        }
    }
}

/// Uniform mesh over the billiard, symmetric about `x = 0` and `y = b`.
#[derive(Debug, Clone)]
pub struct BilliardMesh {
    pub billiard: RippleBilliard,
    pub grid: Grid2D,
    pub spacing: f64,
    i0: usize,
    j0: usize,
    half_nx: usize,
    half_ny: usize,
    /// Interior flags on the quarter `(qi, qj)`, row-major with stride `half_nx + 1`.
    quarter_interior: Vec<bool>,
}

/// Smallest odd integer `>= n` with no prime factors beyond 7.
fn smooth_odd(n: usize) -> usize {
    let mut m = if n % 2 == 0 { n + 1 } else { n };
    loop {
        let mut r = m;
        for p in [3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 2;
    }
}

impl BilliardMesh {
    pub fn new(billiard: RippleBilliard, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing < billiard.b / 4.0) {
            return Err(Error::InvalidParameter(format!(
                "mesh spacing {spacing} out of range for b = {}",
                billiard.b
            )));
        }
        let pad = 3;
        let want_nx = 2 * ((billiard.a + billiard.b) / spacing).ceil() as usize + 2 * pad + 1;
        let want_ny = 2 * (billiard.b / spacing).ceil() as usize + 2 * pad + 1;
        let nx = smooth_odd(want_nx);
        let ny = smooth_odd(want_ny);
        let (half_nx, half_ny) = ((nx - 1) / 2, (ny - 1) / 2);
        let grid = Grid2D::new(
            nx,
            ny,
            -(half_nx as f64) * spacing,
            billiard.b - half_ny as f64 * spacing,
            spacing,
            spacing,
        )?;
        let margin = 0.5 * spacing;
        let mut quarter_interior = vec![false; (half_nx + 1) * (half_ny + 1)];
        for qj in 0..=half_ny {
            let y = billiard.b + qj as f64 * spacing;
            for qi in 0..=half_nx {
                let x = qi as f64 * spacing;
                quarter_interior[qj * (half_nx + 1) + qi] =
                    y < 2.0 * billiard.b - margin && x < billiard.half_width(y) - margin;
            }
        }
        Ok(Self {
            billiard,
            grid,
            spacing,
            i0: half_nx,
            j0: half_ny,
            half_nx,
            half_ny,
            quarter_interior,
        })
    }

    /// Mesh with roughly `nx` points across the full billiard width.
    pub fn with_points_across(billiard: RippleBilliard, nx: usize) -> Result<Self> {
        Self::new(billiard, 2.0 * (billiard.a + billiard.b) / (nx.max(9) - 1) as f64)
    }

    fn quarter_index(&self, qi: usize, qj: usize) -> usize {
        qj * (self.half_nx + 1) + qi
    }

    pub fn quarter_is_interior(&self, qi: usize, qj: usize) -> bool {
        qi <= self.half_nx && qj <= self.half_ny && self.quarter_interior[self.quarter_index(qi, qj)]
    }

    /// Interior test for a full-grid node.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let qi = i.abs_diff(self.i0);
        let qj = j.abs_diff(self.j0);
        self.quarter_is_interior(qi, qj)
    }

    pub fn interior_mask(&self) -> Vec<bool> {
        (0..self.grid.len())
            .map(|k| self.is_interior(k % self.grid.nx, k / self.grid.nx))
            .collect()
    }

    pub fn interior_count(&self) -> usize {
        self.interior_mask().iter().filter(|&&b| b).count()
    }

    /// Full-grid indices `(i, j)` of the up to four mirror images of a quarter node.
    fn images(&self, qi: usize, qj: usize) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        let xs: &[(isize, f64)] = if qi == 0 { &[(1, 1.0)] } else { &[(1, 1.0), (-1, -1.0)] };
        let ys: &[(isize, f64)] = if qj == 0 { &[(1, 1.0)] } else { &[(1, 1.0), (-1, -1.0)] };
        let (i0, j0) = (self.i0 as isize, self.j0 as isize);
        xs.iter().flat_map(move |&(sx, mx)| {
            ys.iter().map(move |&(sy, my)| {
                (
                    (i0 + sx * qi as isize) as usize,
                    (j0 + sy * qj as isize) as usize,
                    mx,
                    my,
                )
            })
        })
    }

    /// Largest per-sector state count satisfying ten mesh points per
    /// wavelength at the top level.
    pub fn max_reliable_count(&self, sector: Sector) -> usize {
        let e_max = (2.0 * PI / (10.0 * self.spacing)).powi(2);
        sector_weyl_count(&self.billiard, sector, e_max).floor().max(0.0) as usize
    }
}

/// Two-term Weyl count for one parity sector of the full billiard: a quarter
/// of the area, Dirichlet walls subtract and Neumann symmetry lines add.
pub fn sector_weyl_count(billiard: &RippleBilliard, sector: Sector, e: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    let wall = 0.5 * billiard.side_wall_length() + billiard.half_width(2.0 * billiard.b);
    let line_x = billiard.b;
    let line_y = billiard.half_width(billiard.b);
    let signed = |p: Parity, len: f64| match p {
        Parity::Even => len,
        Parity::Odd => -len,
    };
    let boundary = -wall + signed(sector.x, line_x) + signed(sector.y, line_y);
    (0.25 * billiard.area() * e + boundary * e.sqrt()) / (4.0 * PI)
}

/// The folded, symmetrized finite-difference Hamiltonian of one sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub sector: Sector,
    pub stencil: Stencil,
    /// Quarter coordinates of each unknown.
    nodes: Vec<(u32, u32)>,
    weights: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    upper: f64,
}

impl SectorOperator {
    pub fn new(mesh: &BilliardMesh, sector: Sector, stencil: Stencil) -> Self {
        let (hx, hy) = (mesh.half_nx, mesh.half_ny);
        let mut lookup = vec![u32::MAX; (hx + 1) * (hy + 1)];
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for qj in 0..=hy {
            for qi in 0..=hx {
                if !mesh.quarter_is_interior(qi, qj) {
                    continue;
                }
                if (sector.x == Parity::Odd && qi == 0) || (sector.y == Parity::Odd && qj == 0) {
                    continue;
                }
                lookup[mesh.quarter_index(qi, qj)] = nodes.len() as u32;
                nodes.push((qi as u32, qj as u32));
                let wx = if qi == 0 { 0.5 } else { 1.0 };
                let wy = if qj == 0 { 0.5 } else { 1.0 };
                weights.push(wx * wy);
            }
        }

        let h2 = mesh.spacing * mesh.spacing;
        let (diag, offsets) = stencil.coefficients();
        let fold = |q: isize, parity: Parity| -> (usize, f64) {
            if q < 0 {
                ((-q) as usize, parity.sign())
            } else {
                (q as usize, 1.0)
            }
        };

        let mut row_ptr = Vec::with_capacity(nodes.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut upper: f64 = 0.0;
        let mut row: Vec<(u32, f64)> = Vec::with_capacity(16);
        row_ptr.push(0);
        for (r, &(qi, qj)) in nodes.iter().enumerate() {
            row.clear();
            row.push((r as u32, diag / h2));
            for &(d, coef) in offsets {
                for (di, dj) in [(d, 0), (-d, 0), (0, d), (0, -d)] {
                    let (ni, si) = fold(qi as isize + di as isize, sector.x);
                    let (nj, sj) = fold(qj as isize + dj as isize, sector.y);
                    if ni > hx || nj > hy {
                        continue;
                    }
                    let c = lookup[mesh.quarter_index(ni, nj)];
                    if c == u32::MAX {
                        continue;
                    }
                    row.push((c, si * sj * coef / h2));
                }
            }
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for &(c, v) in row.iter() {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            let wr: f64 = weights[r];
            let mut gersh: f64 = 0.0;
            for (c, v) in cols[start..].iter().zip(vals[start..].iter_mut()) {
                *v *= (wr / weights[*c as usize]).sqrt();
                gersh += v.abs();
            }
            upper = upper.max(gersh);
            row_ptr.push(cols.len());
        }

        Self {
            sector,
            stencil,
            nodes,
            weights,
            row_ptr,
            cols,
            vals,
            upper,
        }
    }

    pub fn nodes(&self) -> &[(u32, u32)] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Folds a full-grid complex field into this sector's coordinates: the
    /// returned `g` satisfies `<phi_k|psi> = u_k . g` for every sector
    /// eigenvector `u_k`.
    pub fn project(&self, mesh: &BilliardMesh, psi: &ComplexField) -> Result<(Vec<f64>, Vec<f64>)> {
        mesh.grid.ensure_matches(&psi.grid)?;
        let da = mesh.grid.cell_area();
        let nx = mesh.grid.nx;
        let mut re = Vec::with_capacity(self.nodes.len());
        let mut im = Vec::with_capacity(self.nodes.len());
        for (&(qi, qj), &w) in self.nodes.iter().zip(&self.weights) {
            let mut s = Complex64::default();
            for (i, j, mx, my) in mesh.images(qi as usize, qj as usize) {
                let sign = image_sign(self.sector, mx, my);
                s += psi.values[j * nx + i] * sign;
            }
            let f = 0.5 * da.sqrt() / w.sqrt();
            re.push(s.re * f);
            im.push(s.im * f);
        }
        Ok((re, im))
    }

    /// Adds the full-grid field represented by sector coordinates `(re, im)`
    /// (i.e. `sum_k d_k u_k`) into `out`.
    pub fn scatter(&self, mesh: &BilliardMesh, re: &[f64], im: &[f64], out: &mut [Complex64]) {
        let da = mesh.grid.cell_area();
        let nx = mesh.grid.nx;
        for (q, (&(qi, qj), &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let v = Complex64::new(re[q], im[q]) / (2.0 * (w * da).sqrt());
            for (i, j, mx, my) in mesh.images(qi as usize, qj as usize) {
                out[j * nx + i] += v * image_sign(self.sector, mx, my);
            }
        }
    }

    /// Real counterpart of [`scatter`](Self::scatter).
    pub fn scatter_real(&self, mesh: &BilliardMesh, u: &[f64], out: &mut [f64]) {
        let da = mesh.grid.cell_area();
        let nx = mesh.grid.nx;
        for (q, (&(qi, qj), &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let v = u[q] / (2.0 * (w * da).sqrt());
            for (i, j, mx, my) in mesh.images(qi as usize, qj as usize) {
                out[j * nx + i] += v * image_sign(self.sector, mx, my);
            }
        }
    }
}

fn image_sign(sector: Sector, mx: f64, my: f64) -> f64 {
    let sx = if mx < 0.0 { sector.x.sign() } else { 1.0 };
    let sy = if my < 0.0 { sector.y.sign() } else { 1.0 };
    sx * sy
}

impl SymmetricOperator for SectorOperator {
    fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *out = acc;
        }
    }

    fn upper_bound(&self) -> f64 {
        self.upper
    }
}

/// Eigenpairs of one parity sector, ascending.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub op: SectorOperator,
    pub energies: Vec<f64>,
    /// Unit eigenvectors of the symmetrized operator, column-major.
    pub vectors: Vec<f64>,
    /// `|H phi - E phi| / E`.
    pub residuals: Vec<f64>,
}

impl SectorBasis {
    pub fn sector(&self) -> Sector {
        self.op.sector
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        let n = self.dim();
        &self.vectors[k * n..(k + 1) * n]
    }
}

/// Options for [`solve_sector`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub stencil: Stencil,
    pub tol: f64,
    pub degree: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            stencil: Stencil::FourthOrder,
            tol: 1e-10,
            degree: 40,
            seed: 7,
        }
    }
}

pub fn solve_sector(mesh: &BilliardMesh, sector: Sector, count: usize, opts: &SolveOptions) -> Result<SectorBasis> {
    if count == 0 {
        return Err(Error::InvalidParameter("need at least one state".into()));
    }
    let max_count = mesh.max_reliable_count(sector);
    if count > max_count {
        return Err(Error::InsufficientResolution {
            requested: count,
            max_count,
        });
    }
    let op = SectorOperator::new(mesh, sector, opts.stencil);
    let mut so = SolverOptions::new(count);
    so.tol = opts.tol;
    so.degree = opts.degree;
    so.seed = opts.seed;
    let total = count + so.guard;
    so.cut_hint = Some(1.05 * weyl_energy_for(&mesh.billiard, sector, total as f64));
    let res = eigensolver::lowest_eigenpairs(&op, &so)?;
    let residuals = res
        .values
        .iter()
        .zip(&res.residuals)
        .map(|(e, r)| r / e.abs().max(f64::MIN_POSITIVE))
        .collect();
    Ok(SectorBasis {
        op,
        energies: res.values,
        vectors: res.vectors,
        residuals,
    })
}

fn weyl_energy_for(billiard: &RippleBilliard, sector: Sector, count: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while sector_weyl_count(billiard, sector, hi) < count {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if sector_weyl_count(billiard, sector, mid) < count {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// A materialized eigenpair on the full grid.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub energy: f64,
    pub parity_x: Parity,
    pub parity_y: Parity,
    pub residual: f64,
    pub phi: RealField,
}

/// One level of a merged spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub energy: f64,
    pub sector: usize,
    pub column: usize,
}

/// Eigenpairs of several parity sectors over one mesh.
#[derive(Debug, Clone)]
pub struct BilliardSpectrum {
    pub mesh: BilliardMesh,
    pub sectors: Vec<SectorBasis>,
}

impl BilliardSpectrum {
    pub fn solve(mesh: BilliardMesh, requests: &[(Sector, usize)], opts: &SolveOptions) -> Result<Self> {
        let sectors = requests
            .iter()
            .map(|&(s, n)| solve_sector(&mesh, s, n, opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh, sectors })
    }

    /// All levels across sectors, ascending in energy.
    pub fn levels(&self) -> Vec<Level> {
        let mut out: Vec<Level> = self
            .sectors
            .iter()
            .enumerate()
            .flat_map(|(s, b)| {
                b.energies.iter().enumerate().map(move |(c, &e)| Level {
                    energy: e,
                    sector: s,
                    column: c,
                })
            })
            .collect();
        out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        out
    }

    pub fn sector_index(&self, sector: Sector) -> Option<usize> {
        self.sectors.iter().position(|b| b.sector() == sector)
    }

    pub fn eigenfunction(&self, sector: usize, column: usize) -> RealField {
        let b = &self.sectors[sector];
        let mut out = RealField::zeros(self.mesh.grid);
        b.op.scatter_real(&self.mesh, b.vector(column), &mut out.values);
        out
    }

    pub fn eigenpair(&self, level: Level) -> EigenPair {
        let b = &self.sectors[level.sector];
        EigenPair {
            energy: level.energy,
            parity_x: b.sector().x,
            parity_y: b.sector().y,
            residual: b.residuals[level.column],
            phi: self.eigenfunction(level.sector, level.column),
        }
    }
}

/// Lowest `count` levels of the full billiard, merged over all four parity
/// sectors.
pub fn solve_eigenstates(
    billiard: RippleBilliard,
    count: usize,
    spacing: f64,
    opts: &SolveOptions,
) -> Result<(BilliardSpectrum, Vec<Level>)> {
    let mesh = BilliardMesh::new(billiard, spacing)?;
    let target = billiard.weyl_energy(count as f64);
    let mut requests = Vec::new();
    for s in Sector::ALL {
        // sector share at the target energy, with headroom for the
        // uneven split near the top
        let share = sector_weyl_count(&billiard, s, target).max(1.0);
        let n = (share * 1.15 + 8.0).ceil() as usize;
        let max = mesh.max_reliable_count(s);
        if n > max {
            return Err(Error::InsufficientResolution {
                requested: count,
                max_count: Sector::ALL
                    .iter()
                    .map(|&t| mesh.max_reliable_count(t))
                    .sum::<usize>()
                    * 10
                    / 13,
            });
        }
        requests.push((s, n));
    }
    let spectrum = BilliardSpectrum::solve(mesh, &requests, opts)?;
    let levels = spectrum.levels();
    // every sector must extend past the merged cutoff
    let cutoff = levels
        .get(count - 1)
        .map(|l| l.energy)
        .ok_or_else(|| Error::Numerical("too few levels computed".into()))?;
    for b in &spectrum.sectors {
        if b.energies.last().copied().unwrap_or(0.0) < cutoff {
            return Err(Error::Numerical(format!(
                "sector {} stops below the merged cutoff {cutoff:.4}",
                b.sector().label()
            )));
        }
    }
    let levels = levels.into_iter().take(count).collect();
    Ok((spectrum, levels))
}

/// Coefficients of a state in a computed eigenbasis.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<'s> {
    pub spectrum: &'s BilliardSpectrum,
    /// Per sector, one coefficient per computed column.
    pub coefficients: Vec<Vec<Complex64>>,
    pub captured_norm: f64,
    pub warning: Option<String>,
}

/// One coefficient with its level.
#[derive(Debug, Clone, Copy)]
pub struct Component {
    pub level: Level,
    pub c: Complex64,
}

/// Minimum captured norm before the decomposition is flagged.
pub const COVERAGE_WARNING: f64 = 0.999;

/// `c_k = <phi_k|psi>` over every computed eigenpair.
pub fn expand_state<'s>(psi: &ComplexField, spectrum: &'s BilliardSpectrum) -> Result<SpectralDecomposition<'s>> {
    let mesh = &spectrum.mesh;
    let mut coefficients = Vec::with_capacity(spectrum.sectors.len());
    let mut captured = 0.0;
    for b in &spectrum.sectors {
        let (re, im) = b.op.project(mesh, psi)?;
        let (n, k) = (b.dim(), b.len());
        let mut cr = vec![0.0; k];
        let mut ci = vec![0.0; k];
        gemm_tn(n, k, 1, 1.0, &b.vectors, &re, 0.0, &mut cr);
        gemm_tn(n, k, 1, 1.0, &b.vectors, &im, 0.0, &mut ci);
        let c: Vec<Complex64> = cr.into_iter().zip(ci).map(|(r, i)| Complex64::new(r, i)).collect();
        captured += c.iter().map(|v| v.norm_sqr()).sum::<f64>();
        coefficients.push(c);
    }
    let warning = (captured < COVERAGE_WARNING)
        .then(|| format!("captured norm {captured:.6} below {COVERAGE_WARNING}"));
    Ok(SpectralDecomposition {
        spectrum,
        coefficients,
        captured_norm: captured,
        warning,
    })
}

impl<'s> SpectralDecomposition<'s> {
    /// All components, ascending in energy.
    pub fn components(&self) -> Vec<Component> {
        self.spectrum
            .levels()
            .into_iter()
            .map(|level| Component {
                level,
                c: self.coefficients[level.sector][level.column],
            })
            .collect()
    }

    /// Weights `|c_k|^2` in ascending energy order.
    pub fn weights(&self) -> Vec<f64> {
        self.components().iter().map(|c| c.c.norm_sqr()).collect()
    }

    pub fn sector_weight(&self, sector: Sector) -> f64 {
        self.spectrum
            .sector_index(sector)
            .map(|s| self.coefficients[s].iter().map(|c| c.norm_sqr()).sum())
            .unwrap_or(0.0)
    }

    /// Energy below which `fraction` of the captured weight lies.
    pub fn energy_cutoff(&self, fraction: f64) -> f64 {
        let comps = self.components();
        let target = fraction * self.captured_norm;
        let mut acc = 0.0;
        for c in &comps {
            acc += c.c.norm_sqr();
            if acc >= target {
                return c.level.energy;
            }
        }
        comps.last().map(|c| c.level.energy).unwrap_or(0.0)
    }

    /// Mean energy `sum |c_k|^2 E_k / captured`.
    pub fn mean_energy(&self) -> f64 {
        self.components()
            .iter()
            .map(|c| c.c.norm_sqr() * c.level.energy)
            .sum::<f64>()
            / self.captured_norm
    }

    pub fn energy_spread(&self) -> f64 {
        let m = self.mean_energy();
        (self
            .components()
            .iter()
            .map(|c| c.c.norm_sqr() * (c.level.energy - m).powi(2))
            .sum::<f64>()
            / self.captured_norm)
            .sqrt()
    }

    /// `psi(t) = sum_k c_k exp(-i E_k t) phi_k`.
    pub fn evolve(&self, t: f64) -> Result<ComplexField> {
        Ok(self.evolve_many(&[t])?.pop().unwrap())
    }

    /// Evolves to several times at once; errors if less than
    /// [`COVERAGE_WARNING`] of the norm is captured.
    pub fn evolve_many(&self, times: &[f64]) -> Result<Vec<ComplexField>> {
        if self.captured_norm < COVERAGE_WARNING {
            return Err(Error::InsufficientCoverage {
                captured: self.captured_norm,
            });
        }
        let mesh = &self.spectrum.mesh;
        let mut out: Vec<ComplexField> = times.iter().map(|_| ComplexField::zeros(mesh.grid)).collect();
        const BATCH: usize = 32;
        for (b, coeffs) in self.spectrum.sectors.iter().zip(&self.coefficients) {
            let (n, k) = (b.dim(), b.len());
            for (chunk_idx, chunk) in times.chunks(BATCH).enumerate() {
                let t_count = chunk.len();
                let mut dr = vec![0.0; k * t_count];
                let mut di = vec![0.0; k * t_count];
                for (ti, &t) in chunk.iter().enumerate() {
                    for (kk, (&e, c)) in b.energies.iter().zip(coeffs).enumerate() {
                        let d = c * Complex64::from_polar(1.0, -e * t);
                        dr[ti * k + kk] = d.re;
                        di[ti * k + kk] = d.im;
                    }
                }
                let mut rr = vec![0.0; n * t_count];
                let mut ri = vec![0.0; n * t_count];
                gemm_nn(n, k, t_count, 1.0, &b.vectors, &dr, 0.0, &mut rr);
                gemm_nn(n, k, t_count, 1.0, &b.vectors, &di, 0.0, &mut ri);
                out[chunk_idx * BATCH..chunk_idx * BATCH + t_count]
                    .par_iter_mut()
                    .enumerate()
                    .for_each(|(ti, field)| {
                        b.op.scatter(mesh, &rr[ti * n..(ti + 1) * n], &ri[ti * n..(ti + 1) * n], &mut field.values);
                    });
            }
        }
        Ok(out)
    }

    /// Exact diagonal-ensemble density `sum_k |c_k|^2 phi_k^2`.
    pub fn diagonal_density(&self) -> RealField {
        let mesh = &self.spectrum.mesh;
        let mut out = RealField::zeros(mesh.grid);
        let da = mesh.grid.cell_area();
        let nx = mesh.grid.nx;
        for (b, coeffs) in self.spectrum.sectors.iter().zip(&self.coefficients) {
            let n = b.dim();
            let mut quarter = vec![0.0; n];
            for (kk, c) in coeffs.iter().enumerate() {
                let w = c.norm_sqr();
                if w == 0.0 {
                    continue;
                }
                for (q, u) in b.vector(kk).iter().enumerate() {
                    quarter[q] += w * u * u;
                }
            }
            for (q, (&(qi, qj), &wq)) in b.op.nodes().iter().zip(b.op.weights()).enumerate() {
                let v = quarter[q] / (4.0 * wq * da);
                for (i, j, _, _) in mesh.images(qi as usize, qj as usize) {
                    out.values[j * nx + i] += v;
                }
            }
        }
        out
    }
}
