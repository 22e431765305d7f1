//! Closed-form gradient against central finite differences of an
//! independent loop-level objective.

#[path = "support/naive.rs"]
mod naive;

use naive::{relative_error, to_vec, NaiveObjective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_occult::channel::{ChannelSet, PhaseVector, RicianParams};
use ris_occult::geometry::{RisGeometry, UeState};
use ris_occult::objective::{ObjectiveConfig, SecureIsacObjective};

fn dbm(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

fn instance(seed: u64, k: usize) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = RisGeometry::half_wavelength(5, 0.3).unwrap();
    let ues = (0..k)
        .map(|_| {
            UeState::new(
                rng.random_range(1.0..20.0),
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
                dbm(10.0),
            )
            .unwrap()
        })
        .collect();
    let params = RicianParams { bs_antennas: 16, ..Default::default() };
    ChannelSet::sample(&params, ues, geom, dbm(-104.0), &mut rng).unwrap()
}

fn check(seed: u64, k: usize, rho: f64, epsilon: f64, tol: f64) -> f64 {
    let set = instance(seed, k);
    let phase = PhaseVector::random(25, &mut ChaCha8Rng::seed_from_u64(seed + 1000));
    let cfg = ObjectiveConfig::with_identity_guess(rho, epsilon, 25).unwrap();
    let grad = SecureIsacObjective::new(&set, cfg).unwrap().gradient(&phase).unwrap();
    let naive = NaiveObjective { set: &set, rho, epsilon, wiretapper: vec![1.0.into(); 25] };
    let fd = naive.fd_gradient(&to_vec(&phase), 1e-6, true);
    let err = relative_error(&grad, &fd);
    assert!(err < tol, "seed {seed} rho {rho}: relative error {err:e}");
    err
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..20 {
        for rho in [0.0, 0.5, 1.0] {
            check(seed, 2, rho, 0.0, 1e-6);
        }
    }
}

#[test]
fn gradient_with_active_threshold_and_three_users() {
    for seed in 0..5 {
        check(100 + seed, 3, 0.5, 10.0, 1e-6);
    }
}

#[test]
fn single_user_gradient_matches_full_differentiation() {
    // With one user the combiner dependence drops out entirely.
    for seed in 0..5 {
        let set = instance(200 + seed, 1);
        let phase = PhaseVector::random(25, &mut ChaCha8Rng::seed_from_u64(seed));
        let cfg = ObjectiveConfig::with_identity_guess(1.0, 0.0, 25).unwrap();
        let grad = SecureIsacObjective::new(&set, cfg).unwrap().gradient(&phase).unwrap();
        let naive = NaiveObjective { set: &set, rho: 1.0, epsilon: 0.0, wiretapper: vec![1.0.into(); 25] };
        let fd = naive.fd_gradient(&to_vec(&phase), 1e-6, false);
        assert!(relative_error(&grad, &fd) < 1e-6);
    }
}

#[test]
fn library_value_matches_naive_value() {
    for seed in 0..5 {
        let set = instance(300 + seed, 2);
        let phase = PhaseVector::random(25, &mut ChaCha8Rng::seed_from_u64(seed));
        let cfg = ObjectiveConfig::with_identity_guess(0.5, 0.0, 25).unwrap();
        let lib = SecureIsacObjective::new(&set, cfg).unwrap().value(&phase).unwrap();
        let naive = NaiveObjective { set: &set, rho: 0.5, epsilon: 0.0, wiretapper: vec![1.0.into(); 25] };
        let reference = naive.value(&to_vec(&phase));
        assert!((lib - reference).abs() <= 1e-10 * reference.abs());
    }
}
