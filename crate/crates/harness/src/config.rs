//! Scenario configuration: presets, TOML overlay and validation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ris_occult::optimizer::{DirectionRule, OptimizerConfig};
use ris_occult::sensing::ScanGrid;
use ris_occult::signal::{Modulation, ReceiveModel};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::ConfigError;

/// `10^((dBm − 30)/10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Paper,
    Desk,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            other => Err(format!("unknown preset `{other}` (expected paper or desk)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Desk => "desk",
        })
    }
}

/// User placement distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub azimuth_deg: [f64; 2],
    pub elevation_deg: [f64; 2],
    pub distance_m: [f64; 2],
    /// Minimum great-circle separation between any two users.
    pub min_separation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub angle_step_deg: f64,
    pub angle_half_width_deg: f64,
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    pub distance_step_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub armijo_init_step: f64,
    pub armijo_max_backtracks: usize,
    pub rule: DirectionRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub power_start_dbm: f64,
    pub power_stop_dbm: f64,
    pub power_step_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bs_antennas: usize,
    pub ris_h: usize,
    pub ris_v: usize,
    pub users: usize,
    pub snapshots: usize,
    pub lambda_m: f64,
    pub d_h_m: f64,
    pub d_v_m: f64,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub kappa: f64,
    pub los_azimuth_deg: f64,
    pub los_elevation_deg: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub trials: usize,
    pub designer: String,
    pub modulation: Modulation,
    pub receive_model: ReceiveModel,
    pub sampling: SamplingConfig,
    pub grid: GridConfig,
    pub optimizer: OptimizerSettings,
    pub sweep: SweepConfig,
}

impl ScenarioConfig {
    pub fn paper() -> Self {
        let lambda = 0.3;
        Self {
            bs_antennas: 128,
            ris_h: 11,
            ris_v: 11,
            users: 3,
            snapshots: 500,
            lambda_m: lambda,
            d_h_m: lambda / 2.0,
            d_v_m: lambda / 2.0,
            power_dbm: 10.0,
            noise_dbm: -104.0,
            kappa: 2.0,
            los_azimuth_deg: 30.0,
            los_elevation_deg: 0.0,
            rho: 0.5,
            epsilon: 0.0,
            seed: 0,
            trials: 100,
            designer: "manifold-cg".into(),
            modulation: Modulation::Gaussian,
            receive_model: ReceiveModel::NearField,
            sampling: SamplingConfig {
                azimuth_deg: [-60.0, 60.0],
                elevation_deg: [-60.0, 60.0],
                distance_m: [1.0, 20.0],
                min_separation_deg: 20.0,
            },
            grid: GridConfig {
                angle_step_deg: 1.0,
                angle_half_width_deg: 90.0,
                distance_min_m: 0.5,
                distance_max_m: 25.0,
                distance_step_m: 0.1,
            },
            optimizer: OptimizerSettings {
                max_iters: 500,
                grad_tol: 1e-6,
                armijo_c: 1e-4,
                armijo_shrink: 0.5,
                armijo_init_step: 1.0,
                armijo_max_backtracks: 50,
                rule: DirectionRule::PolakRibiere,
            },
            sweep: SweepConfig { power_start_dbm: -10.0, power_stop_dbm: 30.0, power_step_dbm: 10.0 },
        }
    }

    pub fn desk() -> Self {
        Self { bs_antennas: 32, ris_h: 7, ris_v: 7, users: 2, snapshots: 500, trials: 50, ..Self::paper() }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    /// Overlay a TOML document on `self`. Every key must already exist.
    pub fn overlay_toml(&self, text: &str) -> Result<Self, ConfigError> {
        let overlay: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Malformed(e.to_string()))?;
        let mut base = Table::try_from(self).map_err(|e| ConfigError::Malformed(e.to_string()))?;
        merge(&mut base, overlay, "")?;
        let merged: Self = base.try_into().map_err(|e: toml::de::Error| ConfigError::Malformed(e.to_string()))?;
        Ok(merged)
    }

    pub fn elements(&self) -> usize {
        self.ris_h * self.ris_v
    }

    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn optimizer_config(&self, seed: u64) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            armijo_c: o.armijo_c,
            armijo_shrink: o.armijo_shrink,
            armijo_init_step: o.armijo_init_step,
            armijo_max_backtracks: o.armijo_max_backtracks,
            seed,
            rule: o.rule,
        }
    }

    pub fn scan_grid(&self) -> ScanGrid {
        let g = &self.grid;
        ScanGrid::uniform(
            g.angle_half_width_deg.to_radians(),
            g.angle_step_deg.to_radians(),
            g.distance_min_m,
            g.distance_max_m,
            g.distance_step_m,
        )
        .expect("grid settings are validated")
    }

    /// Powers of the NMSE sweep, inclusive of both ends.
    pub fn sweep_powers(&self) -> Vec<f64> {
        let s = &self.sweep;
        let count = ((s.power_stop_dbm - s.power_start_dbm) / s.power_step_dbm + 1e-9).floor() as usize + 1;
        (0..count).map(|i| s.power_start_dbm + i as f64 * s.power_step_dbm).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bad(key: &str, reason: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::OutOfRange { key: key.into(), reason: reason.into() })
        }
        let positive = [
            ("lambda_m", self.lambda_m),
            ("d_h_m", self.d_h_m),
            ("d_v_m", self.d_v_m),
            ("grid.angle_step_deg", self.grid.angle_step_deg),
            ("grid.angle_half_width_deg", self.grid.angle_half_width_deg),
            ("grid.distance_min_m", self.grid.distance_min_m),
            ("grid.distance_step_m", self.grid.distance_step_m),
            ("sweep.power_step_dbm", self.sweep.power_step_dbm),
            ("optimizer.armijo_init_step", self.optimizer.armijo_init_step),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        let finite = [
            ("power_dbm", self.power_dbm),
            ("noise_dbm", self.noise_dbm),
            ("los_azimuth_deg", self.los_azimuth_deg),
            ("los_elevation_deg", self.los_elevation_deg),
            ("sweep.power_start_dbm", self.sweep.power_start_dbm),
            ("sweep.power_stop_dbm", self.sweep.power_stop_dbm),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return bad(key, format!("must be finite, got {v}"));
            }
        }
        if self.bs_antennas == 0 {
            return bad("bs_antennas", "must be >= 1");
        }
        for (key, n) in [("ris_h", self.ris_h), ("ris_v", self.ris_v)] {
            if n % 2 == 0 {
                return bad(key, format!("element count must be odd, got {n}"));
            }
        }
        if self.users == 0 || self.users > 5 {
            return bad("users", format!("must lie in 1..=5, got {}", self.users));
        }
        if self.users >= self.bs_antennas {
            return bad("users", format!("must be below bs_antennas ({})", self.bs_antennas));
        }
        if self.snapshots == 0 {
            return bad("snapshots", "must be >= 1");
        }
        if self.trials == 0 {
            return bad("trials", "must be >= 1");
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad("kappa", format!("must be >= 0, got {}", self.kappa));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho", format!("must lie in [0, 1], got {}", self.rho));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", format!("must be >= 0, got {}", self.epsilon));
        }
        if self.sweep.power_stop_dbm < self.sweep.power_start_dbm {
            return bad("sweep.power_stop_dbm", "must not precede sweep.power_start_dbm");
        }
        let g = &self.grid;
        if g.angle_half_width_deg > 180.0 {
            return bad("grid.angle_half_width_deg", "must be <= 180");
        }
        if !(g.distance_max_m > g.distance_min_m) {
            return bad("grid.distance_max_m", "must exceed grid.distance_min_m");
        }
        let s = &self.sampling;
        let ranges = [
            ("sampling.azimuth_deg", s.azimuth_deg, -g.angle_half_width_deg, g.angle_half_width_deg),
            (
                "sampling.elevation_deg",
                s.elevation_deg,
                -g.angle_half_width_deg.min(90.0),
                g.angle_half_width_deg.min(90.0),
            ),
            ("sampling.distance_m", s.distance_m, g.distance_min_m, g.distance_max_m),
        ];
        for (key, [lo, hi], min, max) in ranges {
            if !(lo < hi && lo >= min && hi <= max) {
                return bad(key, format!("[{lo}, {hi}] must be increasing and inside the scan grid [{min}, {max}]"));
            }
        }
        if !(s.min_separation_deg >= 0.0 && s.min_separation_deg < 180.0) {
            return bad("sampling.min_separation_deg", "must lie in [0, 180)");
        }
        let o = &self.optimizer;
        if !(o.armijo_c > 0.0 && o.armijo_c < 1.0) {
            return bad("optimizer.armijo_c", "must lie in (0, 1)");
        }
        if !(o.armijo_shrink > 0.0 && o.armijo_shrink < 1.0) {
            return bad("optimizer.armijo_shrink", "must lie in (0, 1)");
        }
        if !(o.grad_tol >= 0.0) {
            return bad("optimizer.grad_tol", "must be >= 0");
        }
        if self.designer.is_empty() {
            return bad("designer", "must name a registered designer");
        }
        Ok(())
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::paper()
    }
}

fn merge(base: &mut Table, overlay: Table, prefix: &str) -> Result<(), ConfigError> {
    for (key, value) in overlay {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        let Some(slot) = base.get_mut(&key) else {
            return Err(ConfigError::UnknownKey(path));
        };
        match (slot, value) {
            (Value::Table(inner), Value::Table(sub)) => merge(inner, sub, &path)?,
            // Integers are accepted wherever a float is expected.
            (slot @ Value::Float(_), Value::Integer(i)) => *slot = Value::Float(i as f64),
            (slot @ Value::Array(_), Value::Array(items)) => {
                *slot = Value::Array(
                    items
                        .into_iter()
                        .map(|v| if let Value::Integer(i) = v { Value::Float(i as f64) } else { v })
                        .collect(),
                )
            }
            (slot, value) => *slot = value,
        }
    }
    Ok(())
}

/// Command-line overrides, applied after the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub designer: Option<String>,
}

/// Resolve the configuration: preset defaults, then the file, then flags.
pub fn parse_config(preset: Preset, path: Option<&Path>, overrides: &Overrides) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::preset(preset);
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        cfg = cfg.overlay_toml(&text)?;
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = overrides.trials {
        cfg.trials = trials;
    }
    if let Some(designer) = &overrides.designer {
        cfg.designer = designer.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_conversion_is_exact() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert_eq!(dbm_to_watts(10.0), 0.01);
        assert!((dbm_to_watts(-104.0) / 10f64.powf(-13.4) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(-7.3)) + 7.3).abs() < 1e-12);
    }

    #[test]
    fn empty_overlay_is_identity() {
        let cfg = ScenarioConfig::paper().overlay_toml("").unwrap();
        assert_eq!(cfg, ScenarioConfig::paper());
        assert_eq!((cfg.bs_antennas, cfg.elements(), cfg.users, cfg.lambda_m), (128, 121, 3, 0.3));
    }

    #[test]
    fn overlay_accepts_nested_and_integer_floats() {
        let cfg = ScenarioConfig::desk()
            .overlay_toml("power_dbm = 20\n[grid]\ndistance_step_m = 0.2\n[sampling]\ndistance_m = [2, 10]\n")
            .unwrap();
        assert_eq!(cfg.power_dbm, 20.0);
        assert_eq!(cfg.grid.distance_step_m, 0.2);
        assert_eq!(cfg.sampling.distance_m, [2.0, 10.0]);
        assert_eq!(cfg.bs_antennas, 32);
    }

    #[test]
    fn errors_are_distinct() {
        let base = ScenarioConfig::paper();
        assert!(matches!(base.overlay_toml("nope = 1"), Err(ConfigError::UnknownKey(k)) if k == "nope"));
        assert!(matches!(base.overlay_toml("[grid]\nfoo = 1"), Err(ConfigError::UnknownKey(k)) if k == "grid.foo"));
        assert!(matches!(base.overlay_toml("users = "), Err(ConfigError::Malformed(_))));
        assert!(matches!(base.overlay_toml("users = \"two\""), Err(ConfigError::Malformed(_))));
        let neg = base.overlay_toml("lambda_m = -0.3").unwrap();
        assert!(matches!(neg.validate(), Err(ConfigError::OutOfRange { key, .. }) if key == "lambda_m"));
        let zero = base.overlay_toml("users = 0").unwrap();
        assert!(matches!(zero.validate(), Err(ConfigError::OutOfRange { key, .. }) if key == "users"));
    }

    #[test]
    fn presets_validate() {
        ScenarioConfig::paper().validate().unwrap();
        ScenarioConfig::desk().validate().unwrap();
        assert_eq!(ScenarioConfig::paper().sweep_powers(), vec![-10.0, 0.0, 10.0, 20.0, 30.0]);
    }
}
