use std::fs;

use ris_occult::sensing::wrap_angle;
use ris_occult_harness::config::{dbm_to_watts, watts_to_dbm};
use ris_occult_harness::experiments::{
    empirical_cdf, nmse_table, run_optimize, run_rate_cdf, run_spectra, sweep_trials, Baseline, Parameter, Party,
};
use ris_occult_harness::{RunDir, ScenarioConfig};
use tempfile::TempDir;

fn desk(trials: usize) -> ScenarioConfig {
    ScenarioConfig { trials, ..ScenarioConfig::desk() }
}

fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect();
    (header, rows)
}

#[test]
fn dbm_conversion_is_exact() {
    assert_eq!(dbm_to_watts(30.0), 1.0);
    assert_eq!(dbm_to_watts(0.0), 1e-3);
    assert!((dbm_to_watts(-104.0) - 10f64.powf(-13.4)).abs() < 1e-28);
    for dbm in [-104.0, -10.0, 10.0, 27.5] {
        assert!((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs() < 1e-12);
    }
}

#[test]
fn desk_spectra_locate_the_users() {
    let tmp = TempDir::new().unwrap();
    let cfg = desk(1);
    let res = run_spectra(&cfg, &RunDir::create(tmp.path()).unwrap()).unwrap();
    let grid = cfg.scan_grid();
    let s = &res.summary;
    assert_eq!(s.bs.estimates.len(), s.truth.len());
    for ue in &s.truth {
        let hit = s.bs.aoa_peaks.iter().any(|p| {
            wrap_angle(p.coords[0] - ue.phi).abs() <= grid.azimuth_step() + 1e-9
                && wrap_angle(p.coords[1] - ue.theta).abs() <= grid.elevation_step() + 1e-9
        });
        assert!(hit, "no BS angle peak near {ue:?}: {:?}", s.bs.aoa_peaks);
    }
    for name in ["bs_aoa.csv", "wt_aoa.csv"] {
        let (header, rows) = read_csv(&tmp.path().join(name));
        assert_eq!(header, ["azimuth_rad", "elevation_rad", "value"]);
        assert_eq!(rows.len(), grid.azimuth.len() * grid.elevation.len());
    }
    for name in ["bs_distance.csv", "wt_distance.csv"] {
        let (header, rows) = read_csv(&tmp.path().join(name));
        assert_eq!(header, ["peak", "distance_m", "value"]);
        assert_eq!(rows.len(), cfg.users * grid.distance.len());
    }
    for name in ["peaks.json", "config.json", "result.json"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
}

#[test]
fn single_power_single_trial_table_shape() {
    let cfg = desk(1);
    let table = nmse_table(&[10.0], &sweep_trials(&cfg, &[10.0]).unwrap()).unwrap();
    assert_eq!(table.len(), 6);
    for party in [Party::Bs, Party::Wt] {
        for parameter in [Parameter::Azimuth, Parameter::Elevation, Parameter::Distance] {
            let n =
                table.iter().filter(|r| r.party == party && r.parameter == parameter && r.power_dbm == 10.0).count();
            assert_eq!(n, 1);
        }
    }
    assert!(table.iter().all(|r| r.nmse.is_finite() && r.nmse >= 0.0));
}

#[test]
fn single_trial_cdf_is_one_step() {
    let tmp = TempDir::new().unwrap();
    let res = run_rate_cdf(&desk(1), &RunDir::create(tmp.path()).unwrap()).unwrap();
    assert_eq!(res.records.len(), 3);
    for baseline in [Baseline::Optimized, Baseline::Random, Baseline::Identity] {
        for stat in ["max", "min", "mean"] {
            let (header, rows) = read_csv(&tmp.path().join(format!("cdf_{}_{stat}.csv", baseline.label())));
            assert_eq!(header, ["value", "probability"]);
            assert_eq!(rows.len(), 1);
            assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.0);
        }
    }
    let (header, _) = read_csv(&tmp.path().join("rates.csv"));
    assert_eq!(header, ["trial", "baseline", "max_rate", "min_rate", "mean_rate", "sum_rate", "projection"]);
}

#[test]
fn cdf_is_monotone_in_both_columns() {
    let cdf = empirical_cdf(&[3.0, -1.0, 2.5, 2.5, 0.0, 7.0]);
    assert_eq!(cdf.len(), 6);
    assert!(cdf.windows(2).all(|w| w[0].value <= w[1].value && w[0].probability < w[1].probability));
    assert_eq!(cdf.last().unwrap().probability, 1.0);
}

#[test]
fn optimize_reruns_are_byte_identical_and_snapshot_complete() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = ScenarioConfig { seed: 77, ..desk(1) };
    run_optimize(&cfg, &RunDir::create(a.path()).unwrap()).unwrap();
    run_optimize(&cfg, &RunDir::create(b.path()).unwrap()).unwrap();
    for name in ["phase.csv", "trace.csv", "config.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let snap: ScenarioConfig =
        serde_json::from_str(&fs::read_to_string(a.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(snap, cfg);
    let (header, rows) = read_csv(&a.path().join("phase.csv"));
    assert_eq!(header, ["element", "h", "v", "angle_rad"]);
    assert_eq!(rows.len(), cfg.elements());
    let (header, _) = read_csv(&a.path().join("trace.csv"));
    assert_eq!(header, ["iter", "objective", "grad_norm", "step", "beta", "restart"]);
}
