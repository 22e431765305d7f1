//! The joint secure-ISAC objective: MRC sum rate traded against the
//! occultation penalty, and its gradient in the RIS phase vector.
//!
//! With `v_k = H·diag(φ)·g_k` and MRC combiners `w_k = v_k/‖v_k‖`,
//!
//! ```text
//! SINR_k = ν_k / δ_k,  ν_k = p_k |w_kᴴ v_k|²,
//!                      δ_k = Σ_{j≠k} p_j |w_kᴴ v_j|² + σ² ‖w_k‖²
//! Γ      = max(‖G_Bᴴ G_W‖²_F − ε, 0),  G_B = H·diag(φ)·A,  G_W = H·diag(φ_W)·A
//! L(φ)   = ρ Σ_k log₂(1 + SINR_k) − (1 − ρ) Γ
//! ```
//!
//! Gradients are steepest-ascent directions for the real inner product
//! `Re(aᴴb)`, i.e. twice the derivative with respect to `conj(φ)`. The
//! combiners are held fixed at their current value while differentiating.

use std::f64::consts::LN_2;

use crate::channel::{apply_phase, ChannelSet, PhaseVector};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Noise variances below this are floored to keep `δ_k` away from zero.
pub const NOISE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    /// Weight of the sum rate; `1 - rho` weighs the occultation penalty.
    pub rho: f64,
    /// Occultation threshold ε.
    pub epsilon: f64,
    /// The wiretapper's guess of the configuration.
    pub wiretapper_phase: PhaseVector,
}

impl ObjectiveConfig {
    pub fn new(rho: f64, epsilon: f64, wiretapper_phase: PhaseVector) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter { name: "rho", reason: format!("must lie in [0, 1], got {rho}") });
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter { name: "epsilon", reason: format!("must be >= 0, got {epsilon}") });
        }
        Ok(Self { rho, epsilon, wiretapper_phase })
    }

    /// Wiretapper guesses the identity configuration.
    pub fn with_identity_guess(rho: f64, epsilon: f64, elements: usize) -> Result<Self> {
        Self::new(rho, epsilon, PhaseVector::identity(elements))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub sum_rate: f64,
    pub per_user_sinr: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    /// `‖G_Bᴴ G_W‖²_F` before thresholding.
    pub projection: f64,
    pub gamma: f64,
    pub joint_value: f64,
}

/// MRC combiner `v / ‖v‖`.
pub fn combiner(v: &CVector) -> Option<CVector> {
    let n = v.norm();
    (n > 0.0).then(|| v / Complex64::from(n))
}

/// Per-user SINR terms for combiners `w` applied to effective channels `v`.
fn sinr_terms(v: &CMatrix, w: &CMatrix, powers: &[f64], noise: f64) -> (Vec<f64>, Vec<f64>) {
    let k_users = v.ncols();
    let mut nu = Vec::with_capacity(k_users);
    let mut delta = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let wk = w.column(k);
        let mut interference = 0.0;
        for j in (0..k_users).filter(|&j| j != k) {
            interference += powers[j] * wk.dotc(&v.column(j)).norm_sqr();
        }
        nu.push(powers[k] * wk.dotc(&v.column(k)).norm_sqr());
        delta.push(interference + noise * wk.norm_squared());
    }
    (nu, delta)
}

/// Joint objective on a fixed scene, with the parts that do not depend on
/// the phase vector precomputed.
#[derive(Debug, Clone)]
pub struct SecureIsacObjective<'a> {
    channels: &'a ChannelSet,
    cfg: ObjectiveConfig,
    powers: Vec<f64>,
    noise: f64,
    g: CMatrix,
    g_conj: CMatrix,
    a_conj: CMatrix,
    g_w: CMatrix,
}

impl<'a> SecureIsacObjective<'a> {
    pub fn new(channels: &'a ChannelSet, cfg: ObjectiveConfig) -> Result<Self> {
        if cfg.wiretapper_phase.len() != channels.elements() {
            return Err(Error::DimensionMismatch(format!(
                "wiretapper phase has {} entries, surface has {}",
                cfg.wiretapper_phase.len(),
                channels.elements()
            )));
        }
        let g = channels.g_matrix();
        let g_w = apply_phase(&channels.h, &cfg.wiretapper_phase)? * &channels.a;
        Ok(Self {
            powers: channels.powers(),
            noise: channels.noise_power.max(NOISE_FLOOR),
            g_conj: g.conjugate(),
            g,
            a_conj: channels.a.conjugate(),
            g_w,
            channels,
            cfg,
        })
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.cfg
    }

    pub fn channels(&self) -> &ChannelSet {
        self.channels
    }

    fn check(&self, phase: &CVector) -> Result<()> {
        if phase.len() != self.channels.elements() {
            return Err(Error::DimensionMismatch(format!(
                "phase has {} entries, surface has {}",
                phase.len(),
                self.channels.elements()
            )));
        }
        Ok(())
    }

    /// Effective user channels `v_k` as columns.
    pub fn user_channels(&self, phase: &CVector) -> Result<CMatrix> {
        self.check(phase)?;
        Ok(apply_phase(&self.channels.h, phase)? * &self.g)
    }

    /// MRC combiners at `phase`, one column per user.
    pub fn combiners(&self, phase: &CVector) -> Result<CMatrix> {
        let v = self.user_channels(phase)?;
        let mut w = v.clone();
        for (k, mut col) in w.column_iter_mut().enumerate() {
            let n = col.norm();
            if n == 0.0 {
                return Err(Error::DegenerateChannel(k));
            }
            col /= Complex64::from(n);
        }
        Ok(w)
    }

    /// `G_B = H·diag(phase)·A`.
    pub fn legitimate_channel(&self, phase: &CVector) -> Result<CMatrix> {
        self.check(phase)?;
        Ok(apply_phase(&self.channels.h, phase)? * &self.channels.a)
    }

    pub fn wiretapper_channel(&self) -> &CMatrix {
        &self.g_w
    }

    /// `‖G_Bᴴ G_W‖²_F`.
    pub fn projection(&self, phase: &CVector) -> Result<f64> {
        Ok((self.legitimate_channel(phase)?.adjoint() * &self.g_w).norm_squared())
    }

    pub fn occultation_penalty(&self, phase: &CVector) -> Result<f64> {
        Ok((self.projection(phase)? - self.cfg.epsilon).max(0.0))
    }

    pub fn sinrs(&self, phase: &CVector) -> Result<Vec<f64>> {
        let w = self.combiners(phase)?;
        self.sinrs_with_combiners(phase, &w)
    }

    /// SINRs with the combiners held at `w` instead of the MRC solution at `phase`.
    pub fn sinrs_with_combiners(&self, phase: &CVector, w: &CMatrix) -> Result<Vec<f64>> {
        let v = self.user_channels(phase)?;
        let (nu, delta) = sinr_terms(&v, w, &self.powers, self.noise);
        Ok(nu.iter().zip(&delta).map(|(n, d)| n / d).collect())
    }

    pub fn evaluate(&self, phase: &CVector) -> Result<ObjectiveEval> {
        let w = self.combiners(phase)?;
        self.evaluate_with_combiners(phase, &w)
    }

    /// Full evaluation holding the combiners at `w`.
    pub fn evaluate_with_combiners(&self, phase: &CVector, w: &CMatrix) -> Result<ObjectiveEval> {
        let per_user_sinr = self.sinrs_with_combiners(phase, w)?;
        let per_user_rate: Vec<f64> = per_user_sinr.iter().map(|s| s.ln_1p() / LN_2).collect();
        let sum_rate = per_user_rate.iter().sum::<f64>();
        let projection = self.projection(phase)?;
        let gamma = (projection - self.cfg.epsilon).max(0.0);
        let joint_value = self.cfg.rho * sum_rate - (1.0 - self.cfg.rho) * gamma;
        Ok(ObjectiveEval { sum_rate, per_user_sinr, per_user_rate, projection, gamma, joint_value })
    }

    pub fn value(&self, phase: &CVector) -> Result<f64> {
        Ok(self.evaluate(phase)?.joint_value)
    }

    /// Euclidean gradient of the joint objective at `phase`, combiners fixed
    /// at their MRC value there.
    pub fn gradient(&self, phase: &CVector) -> Result<CVector> {
        let w = self.combiners(phase)?;
        self.gradient_with_combiners(phase, &w)
    }

    pub fn gradient_with_combiners(&self, phase: &CVector, w: &CMatrix) -> Result<CVector> {
        let mut grad = CVector::zeros(phase.len());
        if self.cfg.rho > 0.0 {
            grad += self.rate_gradient(phase, w)? * Complex64::from(self.cfg.rho);
        }
        if self.cfg.rho < 1.0 {
            grad -= self.penalty_gradient(phase)? * Complex64::from(1.0 - self.cfg.rho);
        }
        Ok(grad)
    }

    /// Gradient of `Σ_k log₂(1 + SINR_k)` with fixed combiners.
    ///
    /// `∇ν_k = 2 p_k diag(g_k*) Hᴴ w_k (w_kᴴ v_k)` and
    /// `∇δ_k = Σ_{j≠k} 2 p_j diag(g_j*) Hᴴ w_k (w_kᴴ v_j)`.
    pub fn rate_gradient(&self, phase: &CVector, w: &CMatrix) -> Result<CVector> {
        let v = self.user_channels(phase)?;
        let k_users = v.ncols();
        let (nu, delta) = sinr_terms(&v, w, &self.powers, self.noise);
        // Hᴴ w_k for every k at once.
        let hw = self.channels.h.adjoint() * w;
        let mut grad = CVector::zeros(phase.len());
        for k in 0..k_users {
            let (nu_k, delta_k) = (nu[k], delta[k]);
            let sinr = nu_k / delta_k;
            let scale = 1.0 / (LN_2 * (1.0 + sinr) * delta_k * delta_k);
            let wk = w.column(k);
            // Weight on conj(g_j) for the sum over j.
            let mut coeff = CVector::zeros(k_users);
            for j in 0..k_users {
                let proj = wk.dotc(&v.column(j));
                coeff[j] = if j == k {
                    proj * (2.0 * self.powers[k] * delta_k)
                } else {
                    proj * (-2.0 * self.powers[j] * nu_k)
                };
            }
            let mixed = &self.g_conj * coeff;
            grad += hw.column(k).component_mul(&mixed) * Complex64::from(scale);
        }
        Ok(grad)
    }

    /// Gradient of Γ: `2·diag(Hᴴ G_W G_Wᴴ G_B Aᴴ)` above the threshold, zero below.
    pub fn penalty_gradient(&self, phase: &CVector) -> Result<CVector> {
        let g_b = self.legitimate_channel(phase)?;
        let cross = g_b.adjoint() * &self.g_w;
        if cross.norm_squared() <= self.cfg.epsilon {
            return Ok(CVector::zeros(phase.len()));
        }
        let x = &self.g_w * cross.adjoint();
        let hx = self.channels.h.adjoint() * x;
        Ok(CVector::from_fn(phase.len(), |n, _| {
            hx.row(n).iter().zip(self.a_conj.row(n).iter()).map(|(a, b)| a * b).sum::<Complex64>() * 2.0
        }))
    }
}

/// SINR of user `k` at `phase`.
pub fn sinr(k: usize, channels: &ChannelSet, phase: &PhaseVector) -> Result<f64> {
    let obj = SecureIsacObjective::new(channels, ObjectiveConfig::with_identity_guess(1.0, 0.0, phase.len())?)?;
    obj.sinrs(phase)?.get(k).copied().ok_or_else(|| Error::DimensionMismatch(format!("no user {k}")))
}

/// `Σ_k log₂(1 + SINR_k)` at `phase`.
pub fn sum_rate(channels: &ChannelSet, phase: &PhaseVector) -> Result<f64> {
    let obj = SecureIsacObjective::new(channels, ObjectiveConfig::with_identity_guess(1.0, 0.0, phase.len())?)?;
    Ok(obj.evaluate(phase)?.sum_rate)
}

pub fn occultation_penalty(channels: &ChannelSet, phase: &PhaseVector, cfg: &ObjectiveConfig) -> Result<f64> {
    SecureIsacObjective::new(channels, cfg.clone())?.occultation_penalty(phase)
}

pub fn joint_objective(channels: &ChannelSet, phase: &PhaseVector, cfg: &ObjectiveConfig) -> Result<f64> {
    SecureIsacObjective::new(channels, cfg.clone())?.value(phase)
}

pub fn gradient(channels: &ChannelSet, phase: &PhaseVector, cfg: &ObjectiveConfig) -> Result<CVector> {
    SecureIsacObjective::new(channels, cfg.clone())?.gradient(phase)
}
