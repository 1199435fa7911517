//! Measurements behind the numerical hygiene suite. Each returns the
//! measured error so the test suite can assert on it and the acceptance
//! report can print it.

use chaoseq_core::billiard::{expand_state, BilliardMesh, BilliardSpectrum, Parity, Sector, SolveOptions};
use chaoseq_core::classical::{integrate_henon_heiles, PhasePoint, TrajectoryStatus};
use chaoseq_core::fields::{ComplexField, Grid2D, RealField};
use chaoseq_core::models::{Harmonic, HenonHeiles, Potential, RippleBilliard};
use chaoseq_core::propagation::{GaussianPacket, PropagationSchedule, RunOptions, SplitStep};

fn gaussian_density(grid: Grid2D, center: (f64, f64), var: f64) -> RealField {
    RealField::from_fn(grid, |x, y| {
        let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
        (-r2 / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var)
    })
}

/// L1 error of a free packet against the closed-form spreading Gaussian.
pub fn free_packet_error() -> f64 {
    let grid = Grid2D::spanning(256, 256, -20.0, 20.0, -20.0, 20.0).unwrap();
    let packet = GaussianPacket::new(1.0, (-5.0, -2.0), (1.5, 0.5)).unwrap();
    let dt = 1e-2;
    let prop = SplitStep::new(&RealField::zeros(grid), dt).unwrap();
    let mut psi = packet.on_grid(&grid).unwrap();
    let steps = 200;
    prop.advance(&mut psi, steps).unwrap();
    let t = steps as f64 * dt;
    // velocity 2p for m = 1/2; variance s0 + t^2 / s0 with s0 = 1 / (2 alpha^2)
    let s0 = 0.5;
    let exact = gaussian_density(grid, (-5.0 + 3.0 * t, -2.0 + 1.0 * t), s0 + t * t / s0);
    psi.density().l1_distance(&exact).unwrap()
}

/// L1 error of an oscillator coherent state against its rigidly moving
/// closed form after one period.
pub fn harmonic_error() -> f64 {
    // k = 2 gives omega = 2; alpha^2 = omega / 2 is the ground-state width
    let k = 2.0;
    let omega = (k / 0.5f64).sqrt();
    let grid = Grid2D::spanning(128, 128, -10.0, 10.0, -10.0, 10.0).unwrap();
    let v = Harmonic { stiffness: k }.sample(&grid);
    let (x0, p0) = (2.0, 1.0);
    let packet = GaussianPacket::new((omega / 2.0).sqrt(), (x0, 0.0), (0.0, p0)).unwrap();
    let dt = 2.5e-4;
    let prop = SplitStep::new(&v, dt).unwrap();
    let mut psi = packet.on_grid(&grid).unwrap();
    let steps = 4000;
    prop.advance(&mut psi, steps).unwrap();
    let t = steps as f64 * dt;
    let center = (x0 * (omega * t).cos(), 2.0 * p0 / omega * (omega * t).sin());
    let exact = gaussian_density(grid, center, 1.0 / omega);
    psi.density().l1_distance(&exact).unwrap()
}

fn henon_heiles_setup(n: usize) -> (SplitStep, ComplexField, HenonHeiles) {
    let hh = HenonHeiles::new(1.0, 0.05).unwrap();
    let half = 1.5 * hh.r_c();
    let grid = Grid2D::spanning(n, n, -half, half, -half, half).unwrap();
    let rc = hh.r_c();
    let p = 0.7f64.sqrt() * hh.p0();
    let th = 10f64.to_radians();
    let packet = GaussianPacket::new(40.0 / (3.0 * rc), (0.3 * rc, 0.0), (p * th.cos(), p * th.sin())).unwrap();
    let prop = SplitStep::new(&hh.sample(&grid), 2e-4 * hh.t_char()).unwrap();
    (prop, packet.on_grid(&grid).unwrap(), hh)
}

/// Largest pointwise deviation, relative to the peak amplitude, after
/// 2000 steps forward and 2000 back.
pub fn time_reversal_error() -> f64 {
    let (prop, psi0, hh) = henon_heiles_setup(128);
    let back = SplitStep::new(&hh.sample(prop.grid()), -prop.dt()).unwrap();
    let mut psi = psi0.clone();
    prop.advance(&mut psi, 2000).unwrap();
    back.advance(&mut psi, 2000).unwrap();
    psi.values
        .iter()
        .zip(&psi0.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / psi0.max_abs()
}

/// `(max |norm - 1|, max relative <H> drift)` over two characteristic
/// times of Henon-Heiles split-step propagation.
pub fn split_step_drifts() -> (f64, f64) {
    let (prop, psi0, hh) = henon_heiles_setup(128);
    let schedule = PropagationSchedule::rounded(prop.dt(), 2.0 * hh.t_char(), &[], 0.05 * hh.t_char()).unwrap();
    let out = prop
        .run(psi0, &schedule, &RunOptions::default(), &mut |_, _| Ok(()))
        .unwrap();
    let e0 = out.series[0].energy;
    out.series.iter().fold((0.0, 0.0), |(n, e), s| {
        (f64::max(n, (s.norm - 1.0).abs()), f64::max(e, ((s.energy - e0) / e0).abs()))
    })
}

/// Largest relative energy drift of the symplectic integrator over 100
/// characteristic times of the packet's classical orbit.
pub fn symplectic_drift() -> f64 {
    let hh = HenonHeiles::new(1.0, 0.05).unwrap();
    let rc = hh.r_c();
    let p = 0.7f64.sqrt() * hh.p0();
    let th = 10f64.to_radians();
    let start = PhasePoint::new(0.3 * rc, 0.0, p * th.cos(), p * th.sin());
    let traj = integrate_henon_heiles(&hh, start, 1e-3 * hh.t_char(), 100.0 * hh.t_char(), 10).unwrap();
    assert_eq!(traj.status, TrajectoryStatus::Completed);
    let e0 = start.energy(&hh);
    traj.points
        .iter()
        .map(|q| ((q.energy(&hh) - e0) / e0).abs())
        .fold(0.0, f64::max)
}

/// Split-step step for the billiard cross-check. The projection mask makes
/// the wall error first order in dt; at this step it sits about 0.008 above
/// the dt -> 0 limit, which is itself about 0.008.
pub const CROSS_CHECK_DT: f64 = 5e-5;

/// L1 distance between eigenbasis and masked split-step densities of a
/// low-energy billiard packet after one traversal time.
pub fn propagator_cross_check(dt: f64) -> f64 {
    let rb = RippleBilliard::new(1.0, 4.0).unwrap();
    let mesh = BilliardMesh::new(rb, 0.06).unwrap();
    let sectors = [
        (Sector { x: Parity::Even, y: Parity::Even }, 120),
        (Sector { x: Parity::Odd, y: Parity::Even }, 120),
    ];
    let spectrum = BilliardSpectrum::solve(mesh.clone(), &sectors, &SolveOptions::default()).unwrap();
    let speed = 1.5;
    let packet = GaussianPacket::new(1.4, rb.center(), (speed, 0.0)).unwrap();
    let psi0 = packet.in_billiard(&rb, &mesh.grid).unwrap();
    let dec = expand_state(&psi0, &spectrum).unwrap();
    assert!(dec.captured_norm > 0.9999, "captured {}", dec.captured_norm);

    let steps = (rb.traversal_period(speed) / dt).round() as usize;
    let prop = SplitStep::new(&RealField::zeros(mesh.grid), dt)
        .unwrap()
        .with_mask(mesh.interior_mask())
        .unwrap();
    let mut psi = psi0;
    prop.advance(&mut psi, steps).unwrap();
    let exact = dec.evolve(steps as f64 * dt).unwrap();
    psi.density().l1_distance(&exact.density()).unwrap()
}
