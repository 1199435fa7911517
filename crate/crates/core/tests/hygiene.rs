//! Numerical hygiene: closed-form propagation, reversibility, conservation
//! laws and agreement between the two quantum propagators.

#[path = "common/hygiene_checks.rs"]
mod hygiene_checks;

use hygiene_checks::*;

#[test]
fn free_packet_spreads_as_closed_form() {
    let e = free_packet_error();
    assert!(e < 1e-4, "free packet L1 error {e:e}");
}

#[test]
fn harmonic_coherent_state_follows_classical_orbit() {
    let e = harmonic_error();
    assert!(e < 1e-4, "harmonic coherent state L1 error {e:e}");
}

#[test]
fn split_step_is_time_reversible() {
    let e = time_reversal_error();
    assert!(e < 1e-8, "round-trip error {e:e}");
}

#[test]
fn split_step_conserves_norm_and_energy() {
    let (norm, energy) = split_step_drifts();
    assert!(norm < 1e-10, "norm drift {norm:e}");
    assert!(energy < 1e-6, "relative energy drift {energy:e}");
}

#[test]
fn symplectic_integrator_keeps_energy() {
    let d = symplectic_drift();
    assert!(d < 1e-6, "relative energy drift {d:e}");
}

#[test]
fn eigenbasis_matches_masked_split_step() {
    let l1 = propagator_cross_check(CROSS_CHECK_DT);
    assert!(l1 < 0.02, "eigenbasis vs split-step L1 {l1:.4}");
}
