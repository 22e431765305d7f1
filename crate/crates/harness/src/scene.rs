//! Per-trial random streams and scene sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_occult::channel::{ChannelSet, RicianParams};
use ris_occult::geometry::{RisGeometry, UeState};

use crate::config::{dbm_to_watts, ScenarioConfig};
use crate::error::{HarnessError, Result};

/// Independent purposes drawn from one trial; each gets its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scene = 0,
    Signal = 1,
    Design = 2,
}

/// Counter-based split of the master seed: trial `t` is reproducible on its
/// own, regardless of which other trials ran.
pub fn trial_rng(seed: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(4).wrapping_add(stream as u64));
    rng
}

/// Seed for designers and optimizer initialization in trial `t`.
pub fn design_seed(seed: u64, trial: u64) -> u64 {
    trial_rng(seed, trial, Stream::Design).random()
}

pub fn geometry(cfg: &ScenarioConfig) -> Result<RisGeometry> {
    Ok(RisGeometry::new(cfg.ris_h, cfg.ris_v, cfg.d_h_m, cfg.d_v_m, cfg.lambda_m)?)
}

pub fn rician(cfg: &ScenarioConfig) -> Result<RicianParams> {
    Ok(RicianParams::new(
        cfg.kappa,
        cfg.los_azimuth_deg.to_radians(),
        cfg.los_elevation_deg.to_radians(),
        cfg.bs_antennas,
    )?)
}

const MAX_PLACEMENT_TRIES: usize = 10_000;

/// Great-circle angle between two look directions.
pub fn angular_separation(phi1: f64, theta1: f64, phi2: f64, theta2: f64) -> f64 {
    let dir = |phi: f64, theta: f64| [phi.cos() * theta.cos(), phi.sin() * theta.cos(), theta.sin()];
    let (a, b) = (dir(phi1, theta1), dir(phi2, theta2));
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// Users uniform over the configured box, rejecting placements closer than
/// the minimum angular separation.
pub fn sample_users<R: Rng + ?Sized>(cfg: &ScenarioConfig, power_w: f64, rng: &mut R) -> Result<Vec<UeState>> {
    let s = &cfg.sampling;
    let min_sep = s.min_separation_deg.to_radians();
    let mut ues: Vec<UeState> = Vec::with_capacity(cfg.users);
    for _ in 0..MAX_PLACEMENT_TRIES {
        if ues.len() == cfg.users {
            break;
        }
        let phi = rng.random_range(s.azimuth_deg[0]..s.azimuth_deg[1]).to_radians();
        let theta = rng.random_range(s.elevation_deg[0]..s.elevation_deg[1]).to_radians();
        let r = rng.random_range(s.distance_m[0]..s.distance_m[1]);
        if ues.iter().all(|u| angular_separation(u.phi, u.theta, phi, theta) >= min_sep) {
            ues.push(UeState::new(r, phi, theta, power_w)?);
        }
    }
    if ues.len() < cfg.users {
        return Err(HarnessError::Sampling(format!(
            "could not place {} users {}° apart in {MAX_PLACEMENT_TRIES} draws",
            cfg.users, s.min_separation_deg
        )));
    }
    Ok(ues)
}

/// Channels of trial `t` at the given power. The draws do not depend on the
/// power, so a power sweep sees the same geometry and fading at every point.
pub fn sample_scene(cfg: &ScenarioConfig, trial: u64, power_dbm: f64) -> Result<ChannelSet> {
    let mut rng = trial_rng(cfg.seed, trial, Stream::Scene);
    let ues = sample_users(cfg, dbm_to_watts(power_dbm), &mut rng)?;
    Ok(ChannelSet::sample(&rician(cfg)?, ues, geometry(cfg)?, cfg.noise_watts(), &mut rng)?)
}
