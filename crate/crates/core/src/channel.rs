//! Channel synthesis: the far-field Rician RIS→BS matrix, the near-field
//! UE→RIS vectors and the effective channels seen through a RIS
//! configuration.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::Deref;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{array_response, fresnel_response_matrix, FresnelCoefficients, RisGeometry, UeState};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Unit-modulus RIS configuration; the diagonal of the phase-shift matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(CVector);

impl PhaseVector {
    /// Tolerance on `| |φ_n| - 1 |` accepted by [`PhaseVector::try_from_vector`].
    pub const MODULUS_TOL: f64 = 1e-9;

    /// All-ones configuration (identity phase-shift matrix).
    pub fn identity(n: usize) -> Self {
        Self(CVector::from_element(n, Complex64::new(1.0, 0.0)))
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        Self(CVector::from_iterator(angles.len(), angles.iter().map(|&a| Complex64::from_polar(1.0, a))))
    }

    /// I.i.d. phases uniform on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self(CVector::from_fn(n, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI)))
    }

    pub fn try_from_vector(v: CVector) -> Result<Self> {
        if let Some((n, z)) = v.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > Self::MODULUS_TOL) {
            return Err(Error::InvalidParameter {
                name: "phase",
                reason: format!("entry {n} has modulus {}", z.norm()),
            });
        }
        Ok(Self(v))
    }

    /// Project every entry radially onto the unit circle.
    pub fn normalized(v: &CVector) -> Result<Self> {
        let mut out = v.clone();
        for (n, z) in out.iter_mut().enumerate() {
            let m = z.norm();
            if m == 0.0 {
                return Err(Error::PathologicalStep(n));
            }
            *z /= m;
        }
        Ok(Self(out))
    }

    pub fn angles(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.arg()).collect()
    }

    pub fn into_inner(self) -> CVector {
        self.0
    }

    /// Largest deviation of an entry modulus from one.
    pub fn modulus_error(&self) -> f64 {
        self.0.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl Deref for PhaseVector {
    type Target = CVector;

    fn deref(&self) -> &CVector {
        &self.0
    }
}

/// Rician fading parameters of the RIS→BS link.
///
/// The line-of-sight part is the outer product of a half-wavelength ULA
/// response at the base station and the RIS far-field response toward the
/// base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianParams {
    pub kappa: f64,
    pub los_azimuth: f64,
    pub los_elevation: f64,
    pub bs_antennas: usize,
}

impl RicianParams {
    pub fn new(kappa: f64, los_azimuth: f64, los_elevation: f64, bs_antennas: usize) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidParameter { name: "kappa", reason: format!("must be >= 0, got {kappa}") });
        }
        if bs_antennas == 0 {
            return Err(Error::InvalidParameter { name: "bs_antennas", reason: "must be >= 1".into() });
        }
        Ok(Self { kappa, los_azimuth, los_elevation, bs_antennas })
    }
}

impl Default for RicianParams {
    fn default() -> Self {
        Self { kappa: 2.0, los_azimuth: PI / 6.0, los_elevation: 0.0, bs_antennas: 128 }
    }
}

/// One draw of `CN(0, 1)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// Draw the `M×N` RIS→BS channel. Deterministic for a given random source state.
pub fn sample_far_field_channel<R: Rng + ?Sized>(params: &RicianParams, geom: &RisGeometry, rng: &mut R) -> CMatrix {
    let m = params.bs_antennas;
    let n = geom.len();
    let los_w = (params.kappa / (1.0 + params.kappa)).sqrt();
    let nlos_w = (1.0 / (1.0 + params.kappa)).sqrt();

    let bs = CVector::from_fn(m, |i, _| Complex64::from_polar(1.0, PI * i as f64 * params.los_azimuth.sin()));
    let ris = FresnelCoefficients::far_field(geom, params.los_azimuth, params.los_elevation).response(geom);

    // Column-major draw order keeps the stream layout independent of `los_w`.
    let mut h = CMatrix::from_fn(m, n, |_, _| complex_gaussian(rng) * nlos_w);
    if los_w > 0.0 {
        h += (&bs * ris.adjoint()) * Complex64::from(los_w);
    }
    h
}

/// Near-field UE→RIS channel: free-space amplitude times the exact array response.
pub fn near_field_channel(ue: &UeState, geom: &RisGeometry) -> CVector {
    array_response(ue, geom) * Complex64::from(geom.lambda() / (4.0 * PI * ue.r))
}

/// `H·diag(phase)`.
pub fn apply_phase(h: &CMatrix, phase: &CVector) -> Result<CMatrix> {
    if h.ncols() != phase.len() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} columns, phase vector has {} entries",
            h.ncols(),
            phase.len()
        )));
    }
    let mut out = h.clone();
    for (mut col, p) in out.column_iter_mut().zip(phase.iter()) {
        col *= *p;
    }
    Ok(out)
}

/// Effective channel `H·diag(phase)·A`.
///
/// Accepts any complex vector so the map can be evaluated off the manifold.
pub fn effective_channel(h: &CMatrix, phase: &CVector, a: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != phase.len() {
        return Err(Error::DimensionMismatch(format!(
            "response matrix has {} rows, phase vector has {} entries",
            a.nrows(),
            phase.len()
        )));
    }
    Ok(apply_phase(h, phase)? * a)
}

/// Everything a BS (or wiretapper) knows about one scene.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// RIS→BS channel, `M×N`.
    pub h: CMatrix,
    /// Near-field UE→RIS channels, one length-`N` vector per user.
    pub g: Vec<CVector>,
    /// Phase-only Fresnel responses, `N×K`.
    pub a: CMatrix,
    /// Noise variance per antenna, watts.
    pub noise_power: f64,
    pub ues: Vec<UeState>,
    pub geometry: RisGeometry,
}

impl ChannelSet {
    pub fn new(h: CMatrix, ues: Vec<UeState>, geometry: RisGeometry, noise_power: f64) -> Result<Self> {
        if ues.is_empty() {
            return Err(Error::Empty("user list"));
        }
        if h.ncols() != geometry.len() {
            return Err(Error::DimensionMismatch(format!(
                "H has {} columns but the surface has {} elements",
                h.ncols(),
                geometry.len()
            )));
        }
        if !(noise_power >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise_power",
                reason: format!("must be >= 0, got {noise_power}"),
            });
        }
        let g = ues.iter().map(|ue| near_field_channel(ue, &geometry)).collect();
        let a = fresnel_response_matrix(&ues, &geometry);
        Ok(Self { h, g, a, noise_power, ues, geometry })
    }

    /// Draw `H` and build the set for the given users.
    pub fn sample<R: Rng + ?Sized>(
        params: &RicianParams,
        ues: Vec<UeState>,
        geometry: RisGeometry,
        noise_power: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let h = sample_far_field_channel(params, &geometry, rng);
        Self::new(h, ues, geometry, noise_power)
    }

    /// Replace the channel matrices with explicit ones, e.g. synthetic test
    /// channels whose element count no surface layout produces. The stored
    /// geometry and user positions are then nominal only.
    pub fn with_channels(mut self, h: CMatrix, g: Vec<CVector>, a: CMatrix) -> Result<Self> {
        let n = h.ncols();
        if g.len() != self.ues.len() || a.ncols() != self.ues.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} g-vectors and {} A-columns for {} users",
                g.len(),
                a.ncols(),
                self.ues.len()
            )));
        }
        if a.nrows() != n || g.iter().any(|gk| gk.len() != n) {
            return Err(Error::DimensionMismatch(format!("channel lengths disagree with {n} H columns")));
        }
        self.h = h;
        self.g = g;
        self.a = a;
        Ok(self)
    }

    pub fn antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn elements(&self) -> usize {
        self.h.ncols()
    }

    pub fn users(&self) -> usize {
        self.ues.len()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.power).collect()
    }

    /// Same scene with every user transmitting `power` watts.
    pub fn with_power(&self, power: f64) -> Self {
        let mut out = self.clone();
        for ue in &mut out.ues {
            ue.power = power;
        }
        out
    }

    /// Amplitude-bearing channels stacked as columns, `N×K`.
    pub fn g_matrix(&self) -> CMatrix {
        CMatrix::from_columns(&self.g)
    }

    /// Per-user effective channels `v_k = H·diag(phase)·g_k` as columns, `M×K`.
    pub fn user_channels(&self, phase: &CVector) -> Result<CMatrix> {
        Ok(apply_phase(&self.h, phase)? * self.g_matrix())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom(side: usize) -> RisGeometry {
        RisGeometry::half_wavelength(side, 0.3).unwrap()
    }

    #[test]
    fn phase_vector_constructors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PhaseVector::random(64, &mut rng);
        assert!(p.modulus_error() < 1e-12);
        assert!(PhaseVector::try_from_vector(CVector::from_element(3, Complex64::new(2.0, 0.0))).is_err());
        assert!(matches!(PhaseVector::normalized(&CVector::zeros(2)), Err(Error::PathologicalStep(0))));
    }

    #[test]
    fn pure_nlos_has_unit_variance() {
        let params = RicianParams::new(0.0, 0.3, 0.1, 100).unwrap();
        let g = RisGeometry::new(41, 25, 0.15, 0.15, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = sample_far_field_channel(&params, &g, &mut rng);
        assert_eq!(h.len(), 102_500);
        let var = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn strong_los_is_rank_one() {
        let params = RicianParams::new(1e6, 0.3, 0.1, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = sample_far_field_channel(&params, &geom(5), &mut rng);
        let sv = h.singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[1] < 1e-3 * s[0], "{:?}", &s[..2]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let params = RicianParams { bs_antennas: 8, ..Default::default() };
        let h1 = sample_far_field_channel(&params, &geom(3), &mut ChaCha8Rng::seed_from_u64(11));
        let h2 = sample_far_field_channel(&params, &geom(3), &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(h1, h2);
    }

    #[test]
    fn mean_frobenius_energy_is_mn() {
        let params = RicianParams { bs_antennas: 16, ..Default::default() };
        let g = geom(5);
        let trials = 400;
        let mut total = 0.0;
        for seed in 0..trials {
            total += sample_far_field_channel(&params, &g, &mut ChaCha8Rng::seed_from_u64(seed)).norm_squared();
        }
        let mean = total / trials as f64;
        assert!((mean / (16.0 * 25.0) - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn near_field_amplitude() {
        let g = geom(5);
        let ue = UeState::new(0.3 / (4.0 * PI), 0.2, 0.1, 1.0).unwrap();
        assert!(near_field_channel(&ue, &g).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));

        let ue = UeState::new(10.0, 0.2, 0.1, 1.0).unwrap();
        let v = near_field_channel(&ue, &g);
        // 0.3 / (40π)
        assert!(v.iter().all(|z| (z.norm() - 2.387_324_146_378_430_4e-3).abs() < 1e-15));
        let expected = 0.3 / (40.0 * PI) * 5.0;
        assert!((v.norm() - expected).abs() < 1e-15);
    }

    #[test]
    fn effective_channel_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = CMatrix::from_fn(4, 9, |_, _| complex_gaussian(&mut rng));
        let a = CMatrix::from_fn(9, 3, |_, _| complex_gaussian(&mut rng));
        let ones = PhaseVector::identity(9);
        let g = effective_channel(&h, &ones, &a).unwrap();
        assert!((g - &h * &a).norm() < 1e-12);

        let h1 = CMatrix::from_element(1, 1, Complex64::new(0.5, -2.0));
        let a1 = CMatrix::from_element(1, 1, Complex64::new(1.5, 0.25));
        let p1 = PhaseVector::from_angles(&[0.7]);
        let g1 = effective_channel(&h1, &p1, &a1).unwrap();
        assert!((g1[(0, 0)] - h1[(0, 0)] * p1[0] * a1[(0, 0)]).norm() < 1e-15);

        let p = PhaseVector::random(9, &mut rng);
        let g = effective_channel(&h, &p, &a).unwrap();
        for i in 0..4 {
            for k in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..9 {
                    acc += h[(i, n)] * p[n] * a[(n, k)];
                }
                assert!((g[(i, k)] - acc).norm() < 1e-12);
            }
        }
        assert!(effective_channel(&h, &PhaseVector::identity(8), &a).is_err());
    }

    #[test]
    fn effective_channel_is_linear_in_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = CMatrix::from_fn(5, 9, |_, _| complex_gaussian(&mut rng));
        let a = CMatrix::from_fn(9, 2, |_, _| complex_gaussian(&mut rng));
        let x = CVector::from_fn(9, |_, _| complex_gaussian(&mut rng));
        let y = CVector::from_fn(9, |_, _| complex_gaussian(&mut rng));
        let lhs = effective_channel(&h, &(&x + &y), &a).unwrap();
        let rhs = effective_channel(&h, &x, &a).unwrap() + effective_channel(&h, &y, &a).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn channel_set_invariants() {
        let g = geom(7);
        let ues = vec![UeState::new(3.0, 0.1, 0.2, 0.01).unwrap(), UeState::new(12.0, -0.5, 0.0, 0.01).unwrap()];
        let params = RicianParams { bs_antennas: 8, ..Default::default() };
        let set = ChannelSet::sample(&params, ues.clone(), g, 1e-12, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(set.a.shape(), (49, 2));
        for (gk, ue) in set.g.iter().zip(&ues) {
            let expected = 0.3 / (4.0 * PI * ue.r) * 7.0;
            assert!((gk.norm() - expected).abs() < 1e-14);
        }
        assert!(ChannelSet::new(CMatrix::zeros(8, 48), ues, g, 1.0).is_err());
    }

    #[test]
    fn explicit_channels_override_layout() {
        let ues = vec![UeState::new(3.0, 0.1, 0.2, 0.01).unwrap()];
        let set = ChannelSet::new(CMatrix::zeros(4, 9), ues, geom(3), 1e-9).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let h = CMatrix::from_element(4, 2, one);
        let custom =
            set.clone().with_channels(h.clone(), vec![CVector::from_element(2, one)], CMatrix::from_element(2, 1, one));
        let custom = custom.unwrap();
        assert_eq!((custom.antennas(), custom.elements(), custom.users()), (4, 2, 1));
        assert!(set
            .clone()
            .with_channels(h.clone(), vec![CVector::from_element(3, one)], CMatrix::zeros(2, 1))
            .is_err());
        assert!(set.with_channels(h, vec![], CMatrix::zeros(2, 1)).is_err());
    }
}
