//! The experiment families: spectra, NMSE sweep, rate CDFs, plus the
//! single-scene optimizer dump and the gradient check.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use ris_occult::channel::{ChannelSet, PhaseVector};
use ris_occult::designer::{Design, DesignContext, DesignerRegistry};
use ris_occult::geometry::UeState;
use ris_occult::objective::{ObjectiveConfig, SecureIsacObjective};
use ris_occult::sensing::{associate_and_score, localize, nmse, Localization, Peak, PositionEstimate, SensingReport};
use ris_occult::signal::{generate_symbols, receive};
use ris_occult::{CMatrix, CVector, Complex64};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::output::{ExperimentResult, RunDir};
use crate::scene::{design_seed, sample_scene, trial_rng, Stream};

pub fn objective_config(cfg: &ScenarioConfig) -> Result<ObjectiveConfig> {
    Ok(ObjectiveConfig::with_identity_guess(cfg.rho, cfg.epsilon, cfg.elements())?)
}

/// Run the named designer on one trial's channels.
pub fn design(
    cfg: &ScenarioConfig,
    registry: &DesignerRegistry,
    name: &str,
    channels: &ChannelSet,
    objective: &ObjectiveConfig,
    trial: u64,
) -> Result<Design> {
    let seed = design_seed(cfg.seed, trial);
    let optimizer = cfg.optimizer_config(seed);
    let ctx = DesignContext { channels, objective, optimizer: &optimizer, seed };
    Ok(registry.get(name)?.design(&ctx)?)
}

/// One secure-sensing trial: optimize, transmit, sense as BS and wiretapper.
#[derive(Debug, Clone)]
pub struct SensingTrial {
    pub trial: u64,
    pub power_dbm: f64,
    pub channels: ChannelSet,
    pub design: Design,
    pub bs: Localization,
    pub wt: Localization,
    pub bs_report: SensingReport,
    pub wt_report: SensingReport,
}

impl SensingTrial {
    pub fn truth(&self) -> &[UeState] {
        &self.channels.ues
    }
}

pub fn sensing_trial(
    cfg: &ScenarioConfig,
    registry: &DesignerRegistry,
    trial: u64,
    power_dbm: f64,
) -> Result<SensingTrial> {
    let channels = sample_scene(cfg, trial, power_dbm)?;
    let objective = objective_config(cfg)?;
    let design = design(cfg, registry, &cfg.designer, &channels, &objective, trial)?;

    let mut rng = trial_rng(cfg.seed, trial, Stream::Signal);
    let symbols = generate_symbols(&channels.powers(), cfg.snapshots, cfg.modulation, &mut rng)?;
    let y = receive(&channels, &design.phase, &symbols, cfg.receive_model, &mut rng)?;

    let grid = cfg.scan_grid();
    let bs = localize(&y, cfg.users, &channels.h, &design.phase, &channels.geometry, &grid)?;
    let wt = localize(&y, cfg.users, &channels.h, &objective.wiretapper_phase, &channels.geometry, &grid)?;
    let bs_report = associate_and_score(&bs.estimates, &channels.ues)?;
    let wt_report = associate_and_score(&wt.estimates, &channels.ues)?;
    Ok(SensingTrial { trial, power_dbm, channels, design, bs, wt, bs_report, wt_report })
}

// ---------------------------------------------------------------- spectra

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartyPeaks {
    pub aoa_peaks: Vec<Peak>,
    pub distance_peaks: Vec<Peak>,
    pub estimates: Vec<PositionEstimate>,
    /// Peak-to-median ratio of each range spectrum, dB.
    pub distance_peak_to_median_db: Vec<f64>,
}

impl PartyPeaks {
    fn from(loc: &Localization) -> Self {
        Self {
            aoa_peaks: loc.aoa.peaks.clone(),
            distance_peaks: loc.distance.iter().flat_map(|d| d.peaks.first().cloned()).collect(),
            estimates: loc.estimates.clone(),
            distance_peak_to_median_db: loc.distance.iter().map(|d| d.peak_to_median_db()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectraSummary {
    pub truth: Vec<UeState>,
    pub bs: PartyPeaks,
    pub wt: PartyPeaks,
}

fn write_distance_spectra(dir: &RunDir, name: &str, loc: &Localization) -> Result<()> {
    let mut w = dir.writer(name)?;
    writeln!(w, "peak,distance_m,value")?;
    for (k, spec) in loc.distance.iter().enumerate() {
        for (r, v) in spec.axes[0].iter().zip(&spec.values) {
            writeln!(w, "{k},{r:.6},{v:.9e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One scene (trial 0): optimize, then export the four spectra.
pub fn run_spectra(cfg: &ScenarioConfig, out: &RunDir) -> Result<ExperimentResult<(), SpectraSummary>> {
    let start = Instant::now();
    let registry = DesignerRegistry::with_builtins();
    let t = sensing_trial(cfg, &registry, 0, cfg.power_dbm)?;

    for (name, spec) in [("bs_aoa.csv", &t.bs.aoa), ("wt_aoa.csv", &t.wt.aoa)] {
        let mut w = out.writer(name)?;
        spec.write_csv(&mut w)?;
        w.flush()?;
    }
    write_distance_spectra(out, "bs_distance.csv", &t.bs)?;
    write_distance_spectra(out, "wt_distance.csv", &t.wt)?;

    let summary =
        SpectraSummary { truth: t.channels.ues.clone(), bs: PartyPeaks::from(&t.bs), wt: PartyPeaks::from(&t.wt) };
    out.write_json("peaks.json", &summary)?;
    out.write_config(cfg)?;
    let result = ExperimentResult {
        experiment: "spectra",
        config: cfg.clone(),
        seed: cfg.seed,
        records: Vec::new(),
        summary,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    out.write_result(&result)?;
    Ok(result)
}

// ---------------------------------------------------------------- NMSE sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Bs,
    Wt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Azimuth,
    Elevation,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseRow {
    pub power_dbm: f64,
    pub party: Party,
    pub parameter: Parameter,
    pub nmse: f64,
}

/// Squared errors of one matched user; the raw material of the NMSE table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseTrialRow {
    pub power_dbm: f64,
    pub trial: u64,
    pub party: Party,
    pub user: usize,
    pub azimuth_sq_err: f64,
    pub elevation_sq_err: f64,
    pub distance_sq_err: f64,
}

fn trial_rows(t: &SensingTrial) -> Vec<NmseTrialRow> {
    [(Party::Bs, &t.bs_report), (Party::Wt, &t.wt_report)]
        .into_iter()
        .flat_map(|(party, report)| {
            report.matches.iter().map(move |m| NmseTrialRow {
                power_dbm: t.power_dbm,
                trial: t.trial,
                party,
                user: m.truth,
                azimuth_sq_err: m.azimuth_sq,
                elevation_sq_err: m.elevation_sq,
                distance_sq_err: m.distance_sq,
            })
        })
        .collect()
}

/// Sensing trials for every sweep power; trial `t` reuses the same scene at
/// every power.
pub fn sweep_trials(cfg: &ScenarioConfig, powers: &[f64]) -> Result<Vec<Vec<SensingTrial>>> {
    let registry = DesignerRegistry::with_builtins();
    powers
        .iter()
        .map(|&p| (0..cfg.trials as u64).into_par_iter().map(|t| sensing_trial(cfg, &registry, t, p)).collect())
        .collect()
}

pub fn nmse_table(powers: &[f64], trials: &[Vec<SensingTrial>]) -> Result<Vec<NmseRow>> {
    let mut rows = Vec::new();
    for (&power_dbm, ts) in powers.iter().zip(trials) {
        for party in [Party::Bs, Party::Wt] {
            let reports = ts.iter().map(|t| if party == Party::Bs { &t.bs_report } else { &t.wt_report });
            let n = nmse(reports)?;
            for (parameter, nmse) in [
                (Parameter::Azimuth, n.azimuth),
                (Parameter::Elevation, n.elevation),
                (Parameter::Distance, n.distance),
            ] {
                rows.push(NmseRow { power_dbm, party, parameter, nmse });
            }
        }
    }
    Ok(rows)
}

pub fn run_nmse_sweep(
    cfg: &ScenarioConfig,
    powers: &[f64],
    out: &RunDir,
) -> Result<ExperimentResult<NmseTrialRow, Vec<NmseRow>>> {
    let start = Instant::now();
    let trials = sweep_trials(cfg, powers)?;
    let table = nmse_table(powers, &trials)?;
    let records: Vec<NmseTrialRow> = trials.iter().flatten().flat_map(trial_rows).collect();
    out.write_csv("nmse.csv", &table)?;
    out.write_csv("nmse_trials.csv", &records)?;
    out.write_config(cfg)?;
    let result = ExperimentResult {
        experiment: "nmse",
        config: cfg.clone(),
        seed: cfg.seed,
        records,
        summary: table,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    out.write_result(&result)?;
    Ok(result)
}

// ---------------------------------------------------------------- rate CDFs

/// Baselines compared in the rate experiment; `Optimized` runs the
/// configured designer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Optimized,
    Random,
    Identity,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::Optimized, Baseline::Random, Baseline::Identity];

    pub fn label(self) -> &'static str {
        match self {
            Self::Optimized => "optimized",
            Self::Random => "random",
            Self::Identity => "identity",
        }
    }

    fn designer(self, cfg: &ScenarioConfig) -> &str {
        match self {
            Self::Optimized => &cfg.designer,
            Self::Random => "random",
            Self::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub trial: u64,
    pub baseline: Baseline,
    pub max_rate: f64,
    pub min_rate: f64,
    pub mean_rate: f64,
    pub sum_rate: f64,
    /// `‖G_Bᴴ G_W‖²_F` at the design.
    pub projection: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub probability: f64,
}

/// Sorted-sample empirical CDF: the `i`-th smallest value gets `(i+1)/n`.
pub fn empirical_cdf(samples: &[f64]) -> Vec<CdfPoint> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, value)| CdfPoint { value, probability: (i + 1) as f64 / n }).collect()
}

pub fn rate_trial(cfg: &ScenarioConfig, registry: &DesignerRegistry, trial: u64) -> Result<Vec<RateRecord>> {
    let channels = sample_scene(cfg, trial, cfg.power_dbm)?;
    let objective_cfg = objective_config(cfg)?;
    let objective = SecureIsacObjective::new(&channels, objective_cfg.clone())?;
    Baseline::ALL
        .iter()
        .map(|&b| {
            let d = design(cfg, registry, b.designer(cfg), &channels, &objective_cfg, trial)?;
            let eval = objective.evaluate(&d.phase)?;
            let rates = &eval.per_user_rate;
            Ok(RateRecord {
                trial,
                baseline: b,
                max_rate: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                min_rate: rates.iter().copied().fold(f64::INFINITY, f64::min),
                mean_rate: eval.sum_rate / rates.len() as f64,
                sum_rate: eval.sum_rate,
                projection: eval.projection,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub baseline: Baseline,
    pub mean_sum_rate: f64,
    pub mean_min_rate: f64,
    pub mean_max_rate: f64,
}

type RateStat = fn(&RateRecord) -> f64;

pub fn run_rate_cdf(cfg: &ScenarioConfig, out: &RunDir) -> Result<ExperimentResult<RateRecord, Vec<RateSummary>>> {
    let start = Instant::now();
    let registry = DesignerRegistry::with_builtins();
    let per_trial: Vec<Vec<RateRecord>> =
        (0..cfg.trials as u64).into_par_iter().map(|t| rate_trial(cfg, &registry, t)).collect::<Result<_>>()?;
    let records: Vec<RateRecord> = per_trial.into_iter().flatten().collect();

    let mut summary = Vec::new();
    for b in Baseline::ALL {
        let rows: Vec<&RateRecord> = records.iter().filter(|r| r.baseline == b).collect();
        let mean = |f: fn(&RateRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
        summary.push(RateSummary {
            baseline: b,
            mean_sum_rate: mean(|r| r.sum_rate),
            mean_min_rate: mean(|r| r.min_rate),
            mean_max_rate: mean(|r| r.max_rate),
        });
        let stats: [(&str, RateStat); 3] =
            [("max", |r| r.max_rate), ("min", |r| r.min_rate), ("mean", |r| r.mean_rate)];
        for (stat, f) in stats {
            let values: Vec<f64> = rows.iter().map(|r| f(r)).collect();
            out.write_csv(&format!("cdf_{}_{stat}.csv", b.label()), &empirical_cdf(&values))?;
        }
    }
    out.write_csv("rates.csv", &records)?;
    out.write_config(cfg)?;
    let result = ExperimentResult {
        experiment: "rate-cdf",
        config: cfg.clone(),
        seed: cfg.seed,
        records,
        summary,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    out.write_result(&result)?;
    Ok(result)
}

// ---------------------------------------------------------------- optimize

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub element: usize,
    pub h: i64,
    pub v: i64,
    pub angle_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub designer: String,
    pub sum_rate: f64,
    pub per_user_rate: Vec<f64>,
    pub projection: f64,
    pub gamma: f64,
    pub joint_value: f64,
    pub initial_value: Option<f64>,
    pub iterations: Option<usize>,
}

/// Design trial 0's configuration with the configured designer and dump it.
pub fn run_optimize(cfg: &ScenarioConfig, out: &RunDir) -> Result<ExperimentResult<PhaseRow, OptimizeSummary>> {
    let start = Instant::now();
    let registry = DesignerRegistry::with_builtins();
    let channels = sample_scene(cfg, 0, cfg.power_dbm)?;
    let objective_cfg = objective_config(cfg)?;
    let d = design(cfg, &registry, &cfg.designer, &channels, &objective_cfg, 0)?;
    let eval = SecureIsacObjective::new(&channels, objective_cfg)?.evaluate(&d.phase)?;

    let records: Vec<PhaseRow> = channels
        .geometry
        .indices()
        .zip(d.phase.angles())
        .enumerate()
        .map(|(element, ((h, v), angle_rad))| PhaseRow { element, h, v, angle_rad })
        .collect();
    out.write_csv("phase.csv", &records)?;
    if let Some(trace) = &d.trace {
        let mut w = out.writer("trace.csv")?;
        trace.write_csv(&mut w)?;
        w.flush()?;
    }
    let summary = OptimizeSummary {
        designer: cfg.designer.clone(),
        sum_rate: eval.sum_rate,
        per_user_rate: eval.per_user_rate,
        projection: eval.projection,
        gamma: eval.gamma,
        joint_value: eval.joint_value,
        initial_value: d.trace.as_ref().map(|t| t.initial_value),
        iterations: d.trace.as_ref().map(|t| t.records.len()),
    };
    out.write_config(cfg)?;
    let result = ExperimentResult {
        experiment: "optimize",
        config: cfg.clone(),
        seed: cfg.seed,
        records,
        summary,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    out.write_result(&result)?;
    Ok(result)
}

// ---------------------------------------------------------------- gradient check

/// Central finite-difference gradient `∂f/∂Re + j·∂f/∂Im` of a real function
/// of a complex vector.
pub fn finite_difference<F>(f: F, x: &CVector, step: f64) -> Result<CVector>
where
    F: Fn(&CVector) -> Result<f64>,
{
    let mut g = CVector::zeros(x.len());
    for n in 0..x.len() {
        let mut parts = [0.0; 2];
        for (slot, dir) in parts.iter_mut().zip([Complex64::new(step, 0.0), Complex64::new(0.0, step)]) {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[n] += dir;
            minus[n] -= dir;
            *slot = (f(&plus)? - f(&minus)?) / (2.0 * step);
        }
        g[n] = Complex64::new(parts[0], parts[1]);
    }
    Ok(g)
}

pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRecord {
    pub trial: u64,
    pub rho: f64,
    /// Against differences with the combiners frozen.
    pub rel_err_fixed_combiner: f64,
    /// Against differences that re-derive the combiners (diagnostic only).
    pub rel_err_full: f64,
}

fn relative_error(a: &CVector, b: &CVector) -> f64 {
    let scale = b.norm();
    if scale > 0.0 {
        (a - b).norm() / scale
    } else {
        a.norm()
    }
}

pub fn gradcheck_trial(cfg: &ScenarioConfig, trial: u64) -> Result<GradcheckRecord> {
    let channels = sample_scene(cfg, trial, cfg.power_dbm)?;
    let objective = SecureIsacObjective::new(&channels, objective_config(cfg)?)?;
    let phase = PhaseVector::random(channels.elements(), &mut trial_rng(cfg.seed, trial, Stream::Design));
    let w: CMatrix = objective.combiners(&phase)?;
    let analytic = objective.gradient_with_combiners(&phase, &w)?;
    let fixed = finite_difference(|x| Ok(objective.evaluate_with_combiners(x, &w)?.joint_value), &phase, FD_STEP)?;
    let full = finite_difference(|x| Ok(objective.value(x)?), &phase, FD_STEP)?;
    Ok(GradcheckRecord {
        trial,
        rho: cfg.rho,
        rel_err_fixed_combiner: relative_error(&analytic, &fixed),
        rel_err_full: relative_error(&analytic, &full),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSummary {
    pub max_rel_err_fixed_combiner: f64,
    pub max_rel_err_full: f64,
}

pub fn run_gradcheck(
    cfg: &ScenarioConfig,
    out: &RunDir,
) -> Result<ExperimentResult<GradcheckRecord, GradcheckSummary>> {
    let start = Instant::now();
    let records: Vec<GradcheckRecord> =
        (0..cfg.trials as u64).into_par_iter().map(|t| gradcheck_trial(cfg, t)).collect::<Result<_>>()?;
    let summary = GradcheckSummary {
        max_rel_err_fixed_combiner: records.iter().map(|r| r.rel_err_fixed_combiner).fold(0.0, f64::max),
        max_rel_err_full: records.iter().map(|r| r.rel_err_full).fold(0.0, f64::max),
    };
    out.write_csv("gradcheck.csv", &records)?;
    out.write_config(cfg)?;
    let result = ExperimentResult {
        experiment: "gradcheck",
        config: cfg.clone(),
        seed: cfg.seed,
        records,
        summary,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    out.write_result(&result)?;
    Ok(result)
}
