//! Classical counterparts: symplectic trajectories in smooth potentials,
//! specular billiard flight, Gaussian and microcanonical ensembles,
//! Poincare sections and marginal histograms.
//!
//! With m = 1/2 the equations of motion are `dr/dt = 2p`, `dp/dt = -grad V`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{HenonHeiles, Potential, RippleBilliard};
use crate::propagation::GaussianPacket;
use crate::rng;
use crate::stats::{Binning, Histogram};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl PhasePoint {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self { x, y, px, py }
    }

    pub fn speed_p(&self) -> f64 {
        self.px.hypot(self.py)
    }

    /// `p^2 + V(r)`.
    pub fn energy(&self, potential: &dyn Potential) -> f64 {
        self.px * self.px + self.py * self.py + potential.value(self.x, self.y)
    }
}

/// How an ensemble was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    GaussianMatched,
    Microcanonical,
    /// An ensemble advanced in time from another one.
    Evolved,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Self::GaussianMatched => "gaussian-matched",
            Self::Microcanonical => "microcanonical",
            Self::Evolved => "evolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub points: Vec<PhasePoint>,
    pub seed: u64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryStatus {
    Completed,
    /// Left the confinement box; the trajectory stops at the last step inside.
    Escaped,
}

/// Recorded states of a smooth-potential trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub status: TrajectoryStatus,
}

// Fourth-order composition coefficients (Yoshida).
const CBRT2: f64 = 1.259_921_049_894_873_2;
const W1: f64 = 1.0 / (2.0 - CBRT2);
const W0: f64 = -CBRT2 / (2.0 - CBRT2);
const DRIFT: [f64; 4] = [0.5 * W1, 0.5 * (W0 + W1), 0.5 * (W0 + W1), 0.5 * W1];
const KICK: [f64; 3] = [W1, W0, W1];

/// One fourth-order symplectic step.
pub fn symplectic_step(potential: &dyn Potential, s: &mut PhasePoint, dt: f64) {
    for k in 0..4 {
        s.x += 2.0 * s.px * DRIFT[k] * dt;
        s.y += 2.0 * s.py * DRIFT[k] * dt;
        if k < 3 {
            let (gx, gy) = potential.gradient(s.x, s.y);
            s.px -= gx * KICK[k] * dt;
            s.py -= gy * KICK[k] * dt;
        }
    }
}

/// Integrates from `start`, recording every `record_every` steps. Stops with
/// [`TrajectoryStatus::Escaped`] once `|x|` or `|y|` exceeds `box_half_width`.
pub fn integrate(
    potential: &dyn Potential,
    start: PhasePoint,
    dt: f64,
    t_end: f64,
    record_every: usize,
    box_half_width: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) || record_every == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0, t_end >= 0 and a positive record stride, got {dt}, {t_end}, {record_every}"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let mut s = start;
    let mut times = vec![0.0];
    let mut points = vec![s];
    for n in 1..=steps {
        symplectic_step(potential, &mut s, dt);
        if s.x.abs() > box_half_width || s.y.abs() > box_half_width || !s.x.is_finite() {
            return Ok(Trajectory {
                times,
                points,
                status: TrajectoryStatus::Escaped,
            });
        }
        if n % record_every == 0 || n == steps {
            times.push(n as f64 * dt);
            points.push(s);
        }
    }
    Ok(Trajectory {
        times,
        points,
        status: TrajectoryStatus::Completed,
    })
}

/// Henon-Heiles trajectory; `dt` must resolve the characteristic time.
pub fn integrate_henon_heiles(
    hh: &HenonHeiles,
    start: PhasePoint,
    dt: f64,
    t_end: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let limit = 1e-3 * hh.t_char();
    if dt > limit {
        return Err(Error::InvalidParameter(format!(
            "step {dt} exceeds 1e-3 of the characteristic time ({limit:.3e})"
        )));
    }
    integrate(hh, start, dt, t_end, record_every, hh.box_half_width())
}

/// A wall hit: position on the wall and the momentum after reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub t: f64,
    pub point: PhasePoint,
}

/// Specular flight inside a ripple billiard.
#[derive(Debug, Clone, Copy)]
pub struct BilliardFlight {
    pub billiard: RippleBilliard,
    /// Lipschitz constant of the boundary function along a ray.
    lipschitz: f64,
    min_step: f64,
}

/// Bisection stops once the bracket is narrower than this (in path length).
const BISECTION_TOL: f64 = 1e-12;

impl BilliardFlight {
    pub fn new(billiard: RippleBilliard) -> Self {
        let slope = billiard.a * std::f64::consts::PI / billiard.b;
        Self {
            billiard,
            lipschitz: (1.0 + slope * slope).sqrt(),
            min_step: 1e-4 * billiard.b,
        }
    }

    /// Path length to the first wall crossing along unit direction `d`.
    ///
    /// Ray marching with steps `-f / L` cannot step over a crossing because
    /// the boundary function `f` is `L`-Lipschitz; near the wall the step is
    /// floored at `min_step` and the crossing is refined by bisection.
    fn first_crossing(&self, x: f64, y: f64, d: (f64, f64), max_len: f64) -> Option<f64> {
        let f = |s: f64| self.billiard.boundary_function(x + s * d.0, y + s * d.1);
        // leave the wall first when starting on it
        let mut s = 0.0;
        let mut fs = f(s);
        let mut guard = 0;
        while fs >= 0.0 {
            s += self.min_step * 1e-3;
            fs = f(s);
            guard += 1;
            if guard > 2000 {
                return None;
            }
        }
        while s < max_len {
            let step = (-fs / self.lipschitz).max(self.min_step);
            let next = s + step;
            let fn_ = f(next);
            if fn_ >= 0.0 {
                let (mut lo, mut hi) = (s, next);
                while hi - lo > BISECTION_TOL {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            s = next;
            fs = fn_;
        }
        None
    }

    /// Longest possible chord, used to bound the march.
    fn max_chord(&self) -> f64 {
        let w = 2.0 * (self.billiard.a + self.billiard.b);
        2.0 * w.hypot(self.billiard.height())
    }

    /// Next collision from `s` (strictly inside or on the wall moving inward).
    pub fn next_collision(&self, s: PhasePoint) -> Result<(f64, PhasePoint)> {
        let speed = s.speed_p();
        if !(speed > 0.0) {
            return Err(Error::InvalidParameter("billiard flight needs nonzero momentum".into()));
        }
        let d = (s.px / speed, s.py / speed);
        let mut attempt = s;
        for retry in 0..2 {
            if let Some(len) = self.first_crossing(attempt.x, attempt.y, d, self.max_chord()) {
                let (x, y) = (attempt.x + len * d.0, attempt.y + len * d.1);
                let (nx, ny) = self.billiard.wall_normal(x, y)?;
                let dot = attempt.px * nx + attempt.py * ny;
                let mut out = PhasePoint::new(x, y, attempt.px - 2.0 * dot * nx, attempt.py - 2.0 * dot * ny);
                // restore |p| exactly after the floating-point reflection
                let scale = speed / out.speed_p();
                out.px *= scale;
                out.py *= scale;
                // velocity is 2p
                return Ok((len / (2.0 * speed), out));
            }
            if retry == 0 {
                attempt.x += 1e-12 * d.1;
                attempt.y -= 1e-12 * d.0;
            }
        }
        Err(Error::Numerical(format!(
            "no wall crossing found from ({}, {}) along ({}, {})",
            s.x, s.y, d.0, d.1
        )))
    }

    /// The first `n_bounces` collisions.
    pub fn flight(&self, start: PhasePoint, n_bounces: usize) -> Result<Vec<Collision>> {
        if !self.billiard.contains(start.x, start.y) {
            return Err(Error::InvalidParameter(format!(
                "start ({}, {}) is outside the billiard",
                start.x, start.y
            )));
        }
        let mut out = Vec::with_capacity(n_bounces);
        let mut s = start;
        let mut t = 0.0;
        for _ in 0..n_bounces {
            let (dt, hit) = self.next_collision(s)?;
            t += dt;
            out.push(Collision { t, point: hit });
            s = hit;
        }
        Ok(out)
    }

    /// States at the ascending `times`.
    pub fn states_at(&self, start: PhasePoint, times: &[f64]) -> Result<Vec<PhasePoint>> {
        let mut out = Vec::with_capacity(times.len());
        let mut s = start;
        let mut t = 0.0;
        let mut pending = self.next_collision(s)?;
        for &target in times {
            while t + pending.0 <= target {
                t += pending.0;
                s = pending.1;
                pending = self.next_collision(s)?;
            }
            let tau = target - t;
            out.push(PhasePoint::new(s.x + 2.0 * s.px * tau, s.y + 2.0 * s.py * tau, s.px, s.py));
        }
        Ok(out)
    }

    /// Advances every ensemble member to each of `times`; the result is
    /// indexed `[time][member]`.
    pub fn evolve_ensemble(&self, ensemble: &Ensemble, times: &[f64]) -> Result<Vec<Vec<PhasePoint>>> {
        let per_member = ensemble
            .points
            .par_iter()
            .map(|p| self.states_at(*p, times))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..times.len())
            .map(|k| per_member.iter().map(|m| m[k]).collect())
            .collect())
    }
}

/// Convenience wrapper around [`BilliardFlight::flight`].
pub fn billiard_flight(billiard: &RippleBilliard, start: PhasePoint, n_bounces: usize) -> Result<Vec<Collision>> {
    BilliardFlight::new(*billiard).flight(start, n_bounces)
}

/// Members drawn per parallel task.
const CHUNK: usize = 4096;

/// Positions and momenta drawn from the Wigner widths of `packet`; members
/// outside `domain` are redrawn.
pub fn sample_gaussian_ensemble(
    packet: &GaussianPacket,
    count: usize,
    seed: u64,
    domain: Option<&RippleBilliard>,
) -> Result<Ensemble> {
    if count < 1000 {
        return Err(Error::TooFewSamples {
            what: "ensemble members",
            got: count,
            need: 1000,
        });
    }
    let (sx, sp) = packet.widths();
    let chunks: Vec<(Vec<PhasePoint>, usize)> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|task| {
            let want = CHUNK.min(count - task * CHUNK);
            let mut r = rng::stream(seed, task as u64);
            let mut pts = Vec::with_capacity(want);
            let mut tries = 0;
            while pts.len() < want && tries < 4 * want {
                tries += 1;
                let p = PhasePoint::new(
                    packet.center.0 + sx * r.sample::<f64, _>(rand_distr::StandardNormal),
                    packet.center.1 + sx * r.sample::<f64, _>(rand_distr::StandardNormal),
                    packet.momentum.0 + sp * r.sample::<f64, _>(rand_distr::StandardNormal),
                    packet.momentum.1 + sp * r.sample::<f64, _>(rand_distr::StandardNormal),
                );
                if domain.map_or(true, |b| b.contains(p.x, p.y)) {
                    pts.push(p);
                }
            }
            (pts, tries)
        })
        .collect();
    let tries: usize = chunks.iter().map(|c| c.1).sum();
    let points: Vec<PhasePoint> = chunks.into_iter().flat_map(|c| c.0).collect();
    let rejected = 1.0 - points.len() as f64 / tries as f64;
    if points.len() < count || rejected > 0.5 {
        return Err(Error::PacketDoesNotFit(format!(
            "{:.1}% of Gaussian draws fell outside the domain",
            100.0 * rejected
        )));
    }
    Ok(Ensemble {
        points,
        seed,
        provenance: Provenance::GaussianMatched,
    })
}

/// Systems with a bounded microcanonical shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MicrocanonicalSystem {
    Billiard(RippleBilliard),
    /// Restricted to the bounded well: the triangle spanned by the saddles.
    HenonHeiles(HenonHeiles),
}

impl MicrocanonicalSystem {
    /// `(xmin, xmax, ymin, ymax)` of the sampling box.
    fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match self {
            Self::Billiard(b) => (-(b.a + b.b), b.a + b.b, 0.0, b.height()),
            Self::HenonHeiles(h) => {
                let rc = h.r_c();
                let half = 0.5 * 3f64.sqrt() * rc;
                (-half, half, -0.5 * rc, rc)
            }
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Self::Billiard(b) => b.contains(x, y),
            Self::HenonHeiles(h) => {
                let rc = h.r_c();
                let s3 = 3f64.sqrt();
                y > -0.5 * rc && y < s3 * x + rc && y < -s3 * x + rc
            }
        }
    }

    pub fn potential(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::Billiard(_) => 0.0,
            Self::HenonHeiles(h) => h.value(x, y),
        }
    }
}

/// Minimum acceptance before the shell is declared too thin.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Uniform samples of `{|H - E| < shell_eps * E}` by rejection from the
/// position box times the momentum disc `|p|^2 <= E (1 + shell_eps) - min V`.
pub fn sample_microcanonical(
    system: &MicrocanonicalSystem,
    energy: f64,
    count: usize,
    shell_eps: f64,
    seed: u64,
) -> Result<Ensemble> {
    if !(energy > 0.0 && shell_eps > 0.0 && shell_eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need E > 0 and 0 < shell_eps < 1, got {energy}, {shell_eps}"
        )));
    }
    if let MicrocanonicalSystem::HenonHeiles(h) = system {
        if energy >= h.v_c() {
            return Err(Error::InvalidParameter(format!(
                "energy {energy} is not below the escape energy {}",
                h.v_c()
            )));
        }
    }
    let (x0, x1, y0, y1) = system.bounding_box();
    let p_max = (energy * (1.0 + shell_eps)).sqrt();
    let band = shell_eps * energy;
    let max_tries_per_chunk = (CHUNK as f64 / MIN_ACCEPTANCE) as usize;
    let chunks = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|task| {
            let want = CHUNK.min(count - task * CHUNK);
            let mut r = rng::stream(seed, task as u64);
            let mut pts = Vec::with_capacity(want);
            let mut tries = 0usize;
            while pts.len() < want {
                if tries >= max_tries_per_chunk {
                    return Err(Error::LowAcceptance {
                        rate: pts.len() as f64 / tries as f64,
                        min: MIN_ACCEPTANCE,
                        hint: "widen the energy shell",
                    });
                }
                tries += 1;
                let x = r.gen_range(x0..x1);
                let y = r.gen_range(y0..y1);
                let (px, py) = loop {
                    let px = r.gen_range(-p_max..p_max);
                    let py = r.gen_range(-p_max..p_max);
                    if px * px + py * py <= p_max * p_max {
                        break (px, py);
                    }
                };
                if !system.contains(x, y) {
                    continue;
                }
                let h = px * px + py * py + system.potential(x, y);
                if (h - energy).abs() < band {
                    pts.push(PhasePoint::new(x, y, px, py));
                }
            }
            Ok((pts, tries))
        })
        .collect::<Result<Vec<_>>>()?;
    let tries: usize = chunks.iter().map(|c| c.1).sum();
    let points: Vec<PhasePoint> = chunks.into_iter().flat_map(|c| c.0).collect();
    let rate = points.len() as f64 / tries as f64;
    if rate < MIN_ACCEPTANCE {
        return Err(Error::LowAcceptance {
            rate,
            min: MIN_ACCEPTANCE,
            hint: "widen the energy shell",
        });
    }
    Ok(Ensemble {
        points,
        seed,
        provenance: Provenance::Microcanonical,
    })
}

/// Minimum number of crossings for a section.
pub const MIN_CROSSINGS: usize = 100;

/// Crossings of `x = 0` with `p_x > 0`, linearly interpolated between
/// recorded states, as `(y, p_y)` pairs.
pub fn poincare_section(trajectory: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for w in trajectory.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.x < 0.0 && b.x >= 0.0 {
            let f = -a.x / (b.x - a.x);
            let px = a.px + f * (b.px - a.px);
            if px > 0.0 {
                out.push((a.y + f * (b.y - a.y), a.py + f * (b.py - a.py)));
            }
        }
    }
    if out.len() < MIN_CROSSINGS {
        return Err(Error::TooFewSamples {
            what: "section crossings",
            got: out.len(),
            need: MIN_CROSSINGS,
        });
    }
    Ok(out)
}

/// Position and momentum-magnitude histograms of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMarginals {
    pub x: Histogram,
    pub y: Histogram,
    pub p: Histogram,
}

pub fn classical_marginals(points: &[PhasePoint], x_bins: Binning, y_bins: Binning, p_bins: Binning) -> ClassicalMarginals {
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let ps: Vec<f64> = points.iter().map(|p| p.speed_p()).collect();
    ClassicalMarginals {
        x: Histogram::from_samples(&xs, x_bins),
        y: Histogram::from_samples(&ys, y_bins),
        p: Histogram::from_samples(&ps, p_bins),
    }
}

/// Time-sampled positions of a single billiard trajectory, for ergodic
/// averages.
pub fn billiard_time_samples(
    billiard: &RippleBilliard,
    start: PhasePoint,
    dt: f64,
    count: usize,
) -> Result<Vec<PhasePoint>> {
    let times: Vec<f64> = (1..=count).map(|k| k as f64 * dt).collect();
    BilliardFlight::new(*billiard).states_at(start, &times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Harmonic;

    #[test]
    fn harmonic_small_step_matches_closed_form() {
        let h = Harmonic { stiffness: 1.0 };
        let start = PhasePoint::new(1.0, 0.0, 0.0, 0.5);
        let w = 2f64.sqrt();
        let traj = integrate(&h, start, 1e-3, 3.0, 1000, 100.0).unwrap();
        let t = *traj.times.last().unwrap();
        let s = traj.points.last().unwrap();
        assert!((s.x - (w * t).cos()).abs() < 1e-9);
        assert!((s.y - 2.0 * 0.5 / w * (w * t).sin()).abs() < 1e-9);
    }

    #[test]
    fn square_axis_bounce_is_period_two() {
        let rb = RippleBilliard::new(0.0, 2.0).unwrap();
        let hits = billiard_flight(&rb, PhasePoint::new(0.5, 1.0, 1.0, 0.0), 6).unwrap();
        for (k, h) in hits.iter().enumerate() {
            let expect_x = if k % 2 == 0 { 2.0 } else { -2.0 };
            assert!((h.point.x - expect_x).abs() < 1e-10);
            assert!((h.point.y - 1.0).abs() < 1e-15);
        }
        // |v| = 2: 1.5 to the right wall, then 4 per crossing
        assert!((hits[0].t - 0.75).abs() < 1e-10);
        assert!((hits[1].t - 2.75).abs() < 1e-10);
    }

    #[test]
    fn triangle_membership() {
        let s = MicrocanonicalSystem::HenonHeiles(HenonHeiles::default());
        assert!(s.contains(0.0, 0.0));
        assert!(s.contains(0.0, 19.9));
        assert!(!s.contains(0.0, 20.1));
        assert!(!s.contains(0.0, -10.1));
    }
}
