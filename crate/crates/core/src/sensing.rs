//! MUSIC localization through the RIS, as run by the legitimate base
//! station (true configuration) or by a wiretapper (guessed configuration).
//!
//! Candidate steering vectors are `H·diag(φ_assumed)·a(r, φ, θ)` with `a` the
//! Fresnel response. Angles come from a 2-D far-field scan; each angle
//! estimate is then refined into a range by a 1-D near-field scan.

use std::f64::consts::PI;
use std::io::Write;

use itertools::Itertools;
use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::apply_phase;
use crate::geometry::{array_response, FresnelCoefficients, RisGeometry, UeState};
use crate::signal::ReceivedBlock;
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Uniform samples of `[start, end)` (or `[start, end]` when `inclusive`) spaced by `step`.
pub fn uniform_axis(start: f64, end: f64, step: f64, inclusive: bool) -> Vec<f64> {
    let span = (end - start) / step;
    let count = if inclusive { (span + 1e-9).floor() as usize + 1 } else { (span - 1e-9).ceil() as usize };
    (0..count).map(|i| start + i as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub azimuth: Vec<f64>,
    pub elevation: Vec<f64>,
    pub distance: Vec<f64>,
}

impl ScanGrid {
    pub fn new(azimuth: Vec<f64>, elevation: Vec<f64>, distance: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("azimuth", &azimuth), ("elevation", &elevation), ("distance", &distance)] {
            if axis.len() < 2 {
                return Err(Error::InvalidParameter {
                    name: "grid",
                    reason: format!("{name} axis needs >= 2 samples"),
                });
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParameter { name: "grid", reason: format!("{name} axis not increasing") });
            }
        }
        if distance[0] <= 0.0 {
            return Err(Error::InvalidParameter { name: "grid", reason: "distances must be positive".into() });
        }
        Ok(Self { azimuth, elevation, distance })
    }

    /// Angles over `[-half_width, half_width)` at `angle_step`, distances over
    /// `[d_min, d_max]` at `distance_step`.
    pub fn uniform(half_width: f64, angle_step: f64, d_min: f64, d_max: f64, distance_step: f64) -> Result<Self> {
        let angles = uniform_axis(-half_width, half_width, angle_step, false);
        Self::new(angles.clone(), angles, uniform_axis(d_min, d_max, distance_step, true))
    }

    pub fn azimuth_step(&self) -> f64 {
        self.azimuth[1] - self.azimuth[0]
    }

    pub fn elevation_step(&self) -> f64 {
        self.elevation[1] - self.elevation[0]
    }

    pub fn distance_step(&self) -> f64 {
        self.distance[1] - self.distance[0]
    }

    fn centre(&self) -> (f64, f64, f64) {
        let mid = |v: &[f64]| v[v.len() / 2];
        (mid(&self.azimuth), mid(&self.elevation), mid(&self.distance))
    }
}

impl Default for ScanGrid {
    /// 1° angular cells over the front half-space, 0.1 m over [0.5, 25] m.
    fn default() -> Self {
        Self::uniform(PI / 2.0, PI / 180.0, 0.5, 25.0, 0.1).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Grid index along each axis.
    pub index: Vec<usize>,
    /// Axis values at the peak.
    pub coords: Vec<f64>,
    pub value: f64,
}

/// Spectrum sampled on a 1-D or 2-D grid. Values are row-major with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicSpectrum {
    pub axis_names: Vec<String>,
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub peaks: Vec<Peak>,
}

impl MusicSpectrum {
    fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    fn unravel(&self, flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        let mut rem = flat;
        for d in (0..shape.len()).rev() {
            idx[d] = rem % shape[d];
            rem /= shape[d];
        }
        idx
    }

    fn ravel(&self, idx: &[usize]) -> usize {
        self.shape().iter().zip(idx).fold(0, |acc, (s, i)| acc * s + i)
    }

    pub fn value_at(&self, idx: &[usize]) -> f64 {
        self.values[self.ravel(idx)]
    }

    /// True if `idx` is at least as large as every in-grid neighbour
    /// (including diagonals).
    pub fn is_local_max(&self, idx: &[usize]) -> bool {
        let shape = self.shape();
        let centre = self.value_at(idx);
        let ranges = idx.iter().zip(&shape).map(|(&i, &s)| i.saturating_sub(1)..=(i + 1).min(s - 1));
        ranges.multi_cartesian_product().all(|nb| nb == idx || self.value_at(&nb) <= centre)
    }

    /// Up to `count` local maxima, strongest first, discarding any within
    /// `separation` cells (Chebyshev) of a stronger accepted peak.
    pub fn find_peaks(&self, count: usize, separation: usize) -> Vec<Peak> {
        let mut candidates: Vec<usize> =
            (0..self.values.len()).filter(|&f| self.is_local_max(&self.unravel(f))).collect();
        candidates.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        let mut out: Vec<Peak> = Vec::new();
        for flat in candidates {
            if out.len() == count {
                break;
            }
            let idx = self.unravel(flat);
            let clash = out
                .iter()
                .any(|p| p.index.iter().zip(&idx).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0) <= separation);
            if !clash {
                let coords = idx.iter().zip(&self.axes).map(|(&i, ax)| ax[i]).collect();
                out.push(Peak { index: idx, coords, value: self.values[flat] });
            }
        }
        out
    }

    /// Peak value over the median value, in dB.
    pub fn peak_to_median_db(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let median = if v.len() % 2 == 1 { v[v.len() / 2] } else { 0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2]) };
        10.0 * (v[v.len() - 1] / median).log10()
    }

    /// CSV rows `axis…,value` with a header of the axis names.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{},value", self.axis_names.join(","))?;
        for (flat, v) in self.values.iter().enumerate() {
            let idx = self.unravel(flat);
            let coords = idx.iter().zip(&self.axes).map(|(&i, ax)| format!("{:.6}", ax[i])).join(",");
            writeln!(out, "{coords},{v:.9e}")?;
        }
        Ok(())
    }
}

/// `(1/T)·Y·Yᴴ`.
pub fn sample_covariance(y: &ReceivedBlock) -> CMatrix {
    let t = y.snapshots().max(1) as f64;
    let mut r = &y.y * y.y.adjoint() / Complex64::from(t);
    // Symmetrize away rounding.
    let rh = r.adjoint();
    r = (r + rh) * Complex64::from(0.5);
    r
}

/// Eigen-split of a covariance matrix.
#[derive(Debug, Clone)]
pub struct Subspaces {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors of the `M − K` smallest eigenvalues, `M×(M−K)`.
    pub noise: CMatrix,
}

pub fn subspaces(r: &CMatrix, sources: usize) -> Result<Subspaces> {
    let m = r.nrows();
    if m <= sources {
        return Err(Error::TooManySources { antennas: m, sources });
    }
    let eig = SymmetricEigen::new(r.clone());
    let order: Vec<usize> = (0..m).sorted_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).collect();
    let cols: Vec<CVector> = order[..m - sources].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    Ok(Subspaces {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        noise: CMatrix::from_columns(&cols),
    })
}

/// Orthonormal basis of the noise subspace (the `M − K` weakest eigenvectors).
pub fn noise_subspace(r: &CMatrix, sources: usize) -> Result<CMatrix> {
    Ok(subspaces(r, sources)?.noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteeringMode {
    /// Fresnel (quadratic) phase profile.
    NearField,
    /// Linear phase profile; the `r → ∞` limit of `NearField`.
    FarField,
    /// Exact element distances, no expansion.
    Spherical,
}

/// Effective steering vectors through an assumed RIS configuration.
#[derive(Debug, Clone)]
pub struct SteeringModel {
    h_phi: CMatrix,
    geom: RisGeometry,
}

impl SteeringModel {
    pub fn new(h: &CMatrix, phase_assumed: &CVector, geom: RisGeometry) -> Result<Self> {
        if h.ncols() != geom.len() {
            return Err(Error::DimensionMismatch(format!("H has {} columns, surface {}", h.ncols(), geom.len())));
        }
        Ok(Self { h_phi: apply_phase(h, phase_assumed)?, geom })
    }

    pub fn antennas(&self) -> usize {
        self.h_phi.nrows()
    }

    /// RIS-side response `a` for a candidate position.
    fn response(&self, r: f64, phi: f64, theta: f64, mode: SteeringMode) -> CVector {
        match mode {
            SteeringMode::NearField => FresnelCoefficients::near_field(&self.geom, r, phi, theta).response(&self.geom),
            SteeringMode::FarField => FresnelCoefficients::far_field(&self.geom, phi, theta).response(&self.geom),
            SteeringMode::Spherical => array_response(&UeState { r, phi, theta, power: 1.0 }, &self.geom),
        }
    }

    /// Unit-norm steering vector.
    pub fn steer(&self, r: f64, phi: f64, theta: f64, mode: SteeringMode) -> CVector {
        let b = &self.h_phi * self.response(r, phi, theta, mode);
        let n = b.norm();
        if n > 0.0 {
            b / Complex64::from(n)
        } else {
            b
        }
    }
}

/// Unit-norm effective steering vector for a candidate position.
pub fn steering(
    r: f64,
    phi: f64,
    theta: f64,
    h: &CMatrix,
    phase_assumed: &CVector,
    geom: &RisGeometry,
    mode: SteeringMode,
) -> Result<CVector> {
    Ok(SteeringModel::new(h, phase_assumed, *geom)?.steer(r, phi, theta, mode))
}

/// MUSIC pseudo-spectrum evaluator for one covariance and steering model.
#[derive(Debug, Clone)]
pub struct MusicScanner {
    model: SteeringModel,
    /// `E_nᴴ·H·diag(φ)`, so that `E_nᴴ b = proj · a`.
    proj: CMatrix,
}

impl MusicScanner {
    pub fn new(model: SteeringModel, noise: &CMatrix) -> Self {
        let proj = noise.adjoint() * &model.h_phi;
        Self { model, proj }
    }

    pub fn from_block(y: &ReceivedBlock, sources: usize, model: SteeringModel) -> Result<Self> {
        let noise = noise_subspace(&sample_covariance(y), sources)?;
        Ok(Self::new(model, &noise))
    }

    /// `1 / ‖E_nᴴ b‖²` for the unit-norm steering vector `b`.
    pub fn pseudo_spectrum(&self, r: f64, phi: f64, theta: f64, mode: SteeringMode) -> f64 {
        let a = self.model.response(r, phi, theta, mode);
        let b_norm2 = (&self.model.h_phi * &a).norm_squared();
        let residual = (&self.proj * &a).norm_squared();
        if residual > 0.0 {
            b_norm2 / residual
        } else {
            f64::INFINITY
        }
    }

    pub fn aoa_spectrum(&self, grid: &ScanGrid, sources: usize, separation: usize) -> MusicSpectrum {
        let values: Vec<f64> = grid
            .azimuth
            .par_iter()
            .flat_map_iter(|&phi| {
                grid.elevation
                    .iter()
                    .map(move |&theta| self.pseudo_spectrum(f64::INFINITY, phi, theta, SteeringMode::FarField))
            })
            .collect();
        let mut spec = MusicSpectrum {
            axis_names: vec!["azimuth_rad".into(), "elevation_rad".into()],
            axes: vec![grid.azimuth.clone(), grid.elevation.clone()],
            values,
            peaks: Vec::new(),
        };
        spec.peaks = spec.find_peaks(sources, separation);
        spec
    }

    pub fn distance_spectrum(&self, distances: &[f64], phi: f64, theta: f64) -> MusicSpectrum {
        self.distance_spectrum_with(distances, phi, theta, SteeringMode::NearField)
    }

    pub fn distance_spectrum_with(&self, distances: &[f64], phi: f64, theta: f64, mode: SteeringMode) -> MusicSpectrum {
        let values: Vec<f64> = distances.par_iter().map(|&r| self.pseudo_spectrum(r, phi, theta, mode)).collect();
        let mut spec = MusicSpectrum {
            axis_names: vec!["distance_m".into()],
            axes: vec![distances.to_vec()],
            values,
            peaks: Vec::new(),
        };
        let best = spec
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, v)| Peak { index: vec![i], coords: vec![distances[i]], value: *v });
        spec.peaks = best.into_iter().collect();
        spec
    }
}

impl MusicScanner {
    /// Local near-field refinement of a coarse estimate. Alternates angle
    /// search at the current range with a full range rescan, then polishes
    /// all three coordinates jointly.
    pub fn refine(&self, start: PositionEstimate, grid: &ScanGrid, mode: SteeringMode) -> PositionEstimate {
        let lo = [grid.azimuth[0], grid.elevation[0], grid.distance[0]];
        let hi = [
            *grid.azimuth.last().unwrap_or(&lo[0]),
            *grid.elevation.last().unwrap_or(&lo[1]),
            *grid.distance.last().unwrap_or(&lo[2]),
        ];
        let steps = [grid.azimuth_step(), grid.elevation_step(), grid.distance_step()];
        let f = |x: &[f64; 3]| self.pseudo_spectrum(x[2], x[0], x[1], mode);
        let mut x = [start.phi, start.theta, start.r];
        for _ in 0..REFINE_ROUNDS {
            x = pattern_search(&f, x, steps, [true, true, false], lo, hi);
            let spec = self.distance_spectrum_with(&grid.distance, x[0], x[1], mode);
            if let Some(p) = spec.peaks.first() {
                if p.value > f(&x) {
                    x[2] = p.coords[0];
                }
            }
        }
        x = pattern_search(&f, x, steps, [true, true, true], lo, hi);
        PositionEstimate { phi: x[0], theta: x[1], r: x[2], padded: start.padded }
    }
}

const REFINE_ROUNDS: usize = 3;

/// Compass search maximizing `f` over the active coordinates, clamped to
/// `[lo, hi]`; steps halve on failure until 1e-6 of their initial size.
fn pattern_search<F: Fn(&[f64; 3]) -> f64>(
    f: &F,
    mut x: [f64; 3],
    mut step: [f64; 3],
    active: [bool; 3],
    lo: [f64; 3],
    hi: [f64; 3],
) -> [f64; 3] {
    let floor = step.map(|s| s * 1e-6);
    let mut best = f(&x);
    while (0..3).any(|i| active[i] && step[i] > floor[i]) {
        let mut improved = false;
        for i in (0..3).filter(|&i| active[i]) {
            for sign in [1.0, -1.0] {
                let mut cand = x;
                cand[i] = (x[i] + sign * step[i]).clamp(lo[i], hi[i]);
                let v = f(&cand);
                if v > best {
                    best = v;
                    x = cand;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in &mut step {
                *s *= 0.5;
            }
        }
    }
    x
}

/// Suppression radius, in grid cells, around accepted angle peaks.
pub const PEAK_SEPARATION: usize = 3;

/// 2-D azimuth × elevation MUSIC spectrum with far-field steering.
pub fn music_aoa_spectrum(
    y: &ReceivedBlock,
    sources: usize,
    h: &CMatrix,
    phase_assumed: &CVector,
    geom: &RisGeometry,
    grid: &ScanGrid,
) -> Result<MusicSpectrum> {
    let scanner = MusicScanner::from_block(y, sources, SteeringModel::new(h, phase_assumed, *geom)?)?;
    Ok(scanner.aoa_spectrum(grid, sources, PEAK_SEPARATION))
}

/// 1-D range MUSIC spectrum at a fixed angle estimate, near-field steering.
pub fn music_distance_spectrum(
    y: &ReceivedBlock,
    sources: usize,
    h: &CMatrix,
    phase_assumed: &CVector,
    geom: &RisGeometry,
    angles: (f64, f64),
    grid: &ScanGrid,
) -> Result<MusicSpectrum> {
    let scanner = MusicScanner::from_block(y, sources, SteeringModel::new(h, phase_assumed, *geom)?)?;
    Ok(scanner.distance_spectrum(&grid.distance, angles.0, angles.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub phi: f64,
    pub theta: f64,
    pub r: f64,
    /// Stand-in for a missing peak.
    pub padded: bool,
}

/// Everything one MUSIC pass produced.
#[derive(Debug, Clone)]
pub struct Localization {
    pub aoa: MusicSpectrum,
    /// One range spectrum per angle peak, in peak order.
    pub distance: Vec<MusicSpectrum>,
    pub estimates: Vec<PositionEstimate>,
}

/// Extra angle peaks examined per source in case some refine onto a source
/// that was already found (split main lobes at steep angles).
const CANDIDATES_PER_SOURCE: usize = 4;

/// Two-stage MUSIC: far-field angle scan, then a near-field range scan at
/// each angle peak, then a joint refinement. Peaks whose refinement lands on
/// an already-found source are skipped; missing sources are padded with the
/// grid centre.
pub fn localize(
    y: &ReceivedBlock,
    sources: usize,
    h: &CMatrix,
    phase_assumed: &CVector,
    geom: &RisGeometry,
    grid: &ScanGrid,
) -> Result<Localization> {
    let scanner = MusicScanner::from_block(y, sources, SteeringModel::new(h, phase_assumed, *geom)?)?;
    let mut aoa = scanner.aoa_spectrum(grid, sources, PEAK_SEPARATION);
    let candidates = aoa.find_peaks(sources * CANDIDATES_PER_SOURCE, PEAK_SEPARATION);
    let (az_step, el_step) = (grid.azimuth_step(), grid.elevation_step());
    let mut peaks = Vec::with_capacity(sources);
    let mut distance = Vec::with_capacity(sources);
    let mut estimates: Vec<PositionEstimate> = Vec::with_capacity(sources);
    for peak in candidates {
        if estimates.len() == sources {
            break;
        }
        let (phi, theta) = (peak.coords[0], peak.coords[1]);
        let spec = scanner.distance_spectrum(&grid.distance, phi, theta);
        let coarse = PositionEstimate { phi, theta, r: spec.peaks[0].coords[0], padded: false };
        let fine = scanner.refine(coarse, grid, SteeringMode::Spherical);
        let duplicate =
            estimates.iter().any(|e| (e.phi - fine.phi).abs() <= az_step && (e.theta - fine.theta).abs() <= el_step);
        if !duplicate {
            peaks.push(peak);
            distance.push(spec);
            estimates.push(fine);
        }
    }
    aoa.peaks = peaks;
    let (phi, theta, r) = grid.centre();
    estimates.resize(sources, PositionEstimate { phi, theta, r, padded: true });
    Ok(Localization { aoa, distance, estimates })
}

/// Squared errors of one matched estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedError {
    pub truth: usize,
    pub estimate: PositionEstimate,
    pub azimuth_sq: f64,
    pub elevation_sq: f64,
    pub distance_sq: f64,
    /// Squared true values, the NMSE normalizers.
    pub azimuth_ref_sq: f64,
    pub elevation_ref_sq: f64,
    pub distance_ref_sq: f64,
}

impl MatchedError {
    fn new(truth_idx: usize, truth: &UeState, estimate: PositionEstimate) -> Self {
        let d_phi = wrap_angle(estimate.phi - truth.phi);
        let d_theta = wrap_angle(estimate.theta - truth.theta);
        let d_r = estimate.r - truth.r;
        Self {
            truth: truth_idx,
            estimate,
            azimuth_sq: d_phi * d_phi,
            elevation_sq: d_theta * d_theta,
            distance_sq: d_r * d_r,
            azimuth_ref_sq: wrap_angle(truth.phi).powi(2),
            elevation_ref_sq: wrap_angle(truth.theta).powi(2),
            distance_ref_sq: truth.r * truth.r,
        }
    }

    fn cost(&self) -> f64 {
        self.azimuth_sq + self.elevation_sq + self.distance_sq / self.distance_ref_sq
    }
}

/// Estimates matched one-to-one with the true users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingReport {
    /// `matches[i]` pairs true user `matches[i].truth` with an estimate.
    pub matches: Vec<MatchedError>,
}

impl SensingReport {
    /// Matched error of true user `k`.
    pub fn for_user(&self, k: usize) -> Option<&MatchedError> {
        self.matches.iter().find(|m| m.truth == k)
    }
}

/// Pair estimates with true users by the permutation minimizing the total of
/// squared wrapped angle errors plus squared relative range errors.
pub fn associate_and_score(estimates: &[PositionEstimate], truth: &[UeState]) -> Result<SensingReport> {
    if truth.is_empty() {
        return Err(Error::Empty("true users"));
    }
    let mut est = estimates.to_vec();
    if est.len() < truth.len() {
        let pad = est.last().copied().unwrap_or(PositionEstimate { phi: 0.0, theta: 0.0, r: 1.0, padded: true });
        est.resize(truth.len(), PositionEstimate { padded: true, ..pad });
    }
    let k = truth.len();
    let best = (0..est.len())
        .permutations(k)
        .map(|perm| {
            let matches: Vec<MatchedError> =
                perm.iter().enumerate().map(|(t, &e)| MatchedError::new(t, &truth[t], est[e])).collect();
            let cost: f64 = matches.iter().map(MatchedError::cost).sum();
            (cost, matches)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one permutation");
    Ok(SensingReport { matches: best.1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nmse {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
}

/// `Σ (x̂ − x)² / Σ x²` per parameter over all trials and users.
pub fn nmse<'a, I>(reports: I) -> Result<Nmse>
where
    I: IntoIterator<Item = &'a SensingReport>,
{
    let mut sums = [0.0f64; 6];
    let mut any = false;
    for m in reports.into_iter().flat_map(|r| r.matches.iter()) {
        any = true;
        sums[0] += m.azimuth_sq;
        sums[1] += m.azimuth_ref_sq;
        sums[2] += m.elevation_sq;
        sums[3] += m.elevation_ref_sq;
        sums[4] += m.distance_sq;
        sums[5] += m.distance_ref_sq;
    }
    if !any {
        return Err(Error::Empty("sensing reports"));
    }
    Ok(Nmse { azimuth: sums[0] / sums[1], elevation: sums[2] / sums[3], distance: sums[4] / sums[5] })
}
