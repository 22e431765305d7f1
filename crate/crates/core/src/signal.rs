//! Transmit symbol blocks and the block received at the base station.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_phase, complex_gaussian, ChannelSet};
use crate::{CMatrix, CVector, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    /// Circularly-symmetric complex Gaussian symbols.
    #[default]
    Gaussian,
    /// Unit-modulus QPSK.
    Qpsk,
}

/// `K×T` block; row `k` carries `√p_k · s_k(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock(pub CMatrix);

impl SymbolBlock {
    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn len(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.ncols() == 0
    }

    /// Empirical mean power of each row.
    pub fn row_powers(&self) -> Vec<f64> {
        self.0.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.len() as f64).collect()
    }
}

pub fn generate_symbols<R: Rng + ?Sized>(
    powers: &[f64],
    t: usize,
    modulation: Modulation,
    rng: &mut R,
) -> Result<SymbolBlock> {
    if t == 0 {
        return Err(Error::InvalidParameter { name: "T", reason: "block length must be >= 1".into() });
    }
    if let Some(p) = powers.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidParameter { name: "power", reason: format!("must be >= 0, got {p}") });
    }
    let amps: Vec<f64> = powers.iter().map(|p| p.sqrt()).collect();
    // Row-major draw order: user k's stream is contiguous.
    let mut s = CMatrix::zeros(powers.len(), t);
    for (k, amp) in amps.iter().enumerate() {
        for col in 0..t {
            let sym = match modulation {
                Modulation::Gaussian => complex_gaussian(rng),
                Modulation::Qpsk => {
                    let bits: u8 = rng.random_range(0..4);
                    let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                    let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                    Complex64::new(re, im)
                }
            };
            s[(k, col)] = sym * *amp;
        }
    }
    Ok(SymbolBlock(s))
}

/// Which per-user vectors the RIS re-radiates into the BS.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiveModel {
    /// Amplitude-bearing near-field channels `g_k` (exact distances).
    #[default]
    NearField,
    /// Phase-only Fresnel responses, the columns of `A`.
    PhaseOnly,
}

/// `M×T` received block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub y: CMatrix,
    pub noise_power: f64,
}

impl ReceivedBlock {
    pub fn snapshots(&self) -> usize {
        self.y.ncols()
    }
}

/// Noiseless part `H·diag(phase)·G·S` of the received block.
pub fn noiseless_receive(
    channels: &ChannelSet,
    phase: &CVector,
    symbols: &SymbolBlock,
    model: ReceiveModel,
) -> Result<CMatrix> {
    if symbols.users() != channels.users() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbol rows for {} users",
            symbols.users(),
            channels.users()
        )));
    }
    let cols = match model {
        ReceiveModel::NearField => channels.g_matrix(),
        ReceiveModel::PhaseOnly => channels.a.clone(),
    };
    Ok(apply_phase(&channels.h, phase)? * cols * &symbols.0)
}

/// Received block with i.i.d. `CN(0, σ²)` noise added.
pub fn receive<R: Rng + ?Sized>(
    channels: &ChannelSet,
    phase: &CVector,
    symbols: &SymbolBlock,
    model: ReceiveModel,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    let mut y = noiseless_receive(channels, phase, symbols, model)?;
    let sigma = channels.noise_power.sqrt();
    if sigma > 0.0 {
        for z in y.iter_mut() {
            *z += complex_gaussian(rng) * sigma;
        }
    }
    Ok(ReceivedBlock { y, noise_power: channels.noise_power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{PhaseVector, RicianParams};
    use crate::geometry::{RisGeometry, UeState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene(powers: &[f64], noise: f64) -> ChannelSet {
        let g = RisGeometry::half_wavelength(5, 0.3).unwrap();
        let ues = powers
            .iter()
            .enumerate()
            .map(|(k, &p)| UeState::new(2.0 + 3.0 * k as f64, 0.3 - 0.4 * k as f64, 0.1, p).unwrap())
            .collect();
        let params = RicianParams { bs_antennas: 6, ..Default::default() };
        ChannelSet::sample(&params, ues, g, noise, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
    }

    #[test]
    fn qpsk_is_constant_modulus() {
        let s = generate_symbols(&[1.0, 1.0], 64, Modulation::Qpsk, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(s.0.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let s = generate_symbols(&[0.25], 8, Modulation::Qpsk, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((s.row_powers()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gaussian_row_power() {
        let s =
            generate_symbols(&[1.0, 0.01], 100_000, Modulation::Gaussian, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let p = s.row_powers();
        assert!((p[0] - 1.0).abs() < 0.02);
        assert!((p[1] / 0.01 - 1.0).abs() < 0.02);
    }

    #[test]
    fn symbols_are_deterministic() {
        let a = generate_symbols(&[1.0, 2.0], 10, Modulation::Gaussian, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_symbols(&[1.0, 2.0], 10, Modulation::Gaussian, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(generate_symbols(&[1.0], 0, Modulation::Gaussian, &mut ChaCha8Rng::seed_from_u64(9)).is_err());
    }

    #[test]
    fn noiseless_single_user_single_snapshot() {
        let set = scene(&[0.5], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phase = PhaseVector::random(25, &mut rng);
        let s = generate_symbols(&[0.5], 1, Modulation::Qpsk, &mut rng).unwrap();
        let y = receive(&set, &phase, &s, ReceiveModel::NearField, &mut rng).unwrap();
        let expected = apply_phase(&set.h, &phase).unwrap() * &set.g[0] * s.0[(0, 0)];
        assert!((y.y.column(0) - expected).norm() < 1e-15);
    }

    #[test]
    fn zero_power_gives_pure_noise() {
        let set = scene(&[1.0, 1.0], 1e-3).with_power(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = generate_symbols(&[0.0, 0.0], 20_000, Modulation::Gaussian, &mut rng).unwrap();
        let y = receive(&set, &PhaseVector::identity(25), &s, ReceiveModel::NearField, &mut rng).unwrap();
        let var = y.y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.y.len() as f64;
        assert!((var / 1e-3 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn superposition_of_users() {
        let set = scene(&[1.0, 2.0], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phase = PhaseVector::random(25, &mut rng);
        let s = generate_symbols(&[1.0, 2.0], 16, Modulation::Gaussian, &mut rng).unwrap();
        let both = noiseless_receive(&set, &phase, &s, ReceiveModel::NearField).unwrap();
        let mut sum = CMatrix::zeros(6, 16);
        for k in 0..2 {
            let mut only = s.clone();
            only.0.row_mut(1 - k).fill(Complex64::new(0.0, 0.0));
            sum += noiseless_receive(&set, &phase, &only, ReceiveModel::NearField).unwrap();
        }
        assert!((both - sum).norm() < 1e-12);

        // Scaling S scales the noiseless part.
        let scaled = SymbolBlock(&s.0 * Complex64::new(0.0, 3.0));
        let y2 = noiseless_receive(&set, &phase, &scaled, ReceiveModel::NearField).unwrap();
        let y1 = noiseless_receive(&set, &phase, &s, ReceiveModel::NearField).unwrap();
        assert!((y2 - y1 * Complex64::new(0.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn empirical_receive_power_matches_analytic() {
        let set = scene(&[0.01], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phase = PhaseVector::random(25, &mut rng);
        let s = generate_symbols(&[0.01], 50_000, Modulation::Gaussian, &mut rng).unwrap();
        let y = noiseless_receive(&set, &phase, &s, ReceiveModel::NearField).unwrap();
        let empirical = y.norm_squared() / 50_000.0;
        let analytic = (apply_phase(&set.h, &phase).unwrap() * &set.g[0]).norm_squared() * 0.01;
        assert!((empirical / analytic - 1.0).abs() < 0.05);
    }

    #[test]
    fn phase_only_model_uses_response_matrix() {
        let set = scene(&[1.0], 0.0);
        let phase = PhaseVector::identity(25);
        let s = SymbolBlock(CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)));
        let y = noiseless_receive(&set, &phase, &s, ReceiveModel::PhaseOnly).unwrap();
        assert!((y.column(0) - &set.h * set.a.column(0)).norm() < 1e-12);
    }
}
