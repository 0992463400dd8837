use std::fs;

use microclimate::cost::{energy_objective, EnergyBreakdown};
use microclimate::dynamics::Trajectory;
use microclimate::error::Error;
use microclimate::harness::{rolling_run, ControllerKind, RunOptions, RunResult};
use microclimate::model::{ControlSchedule, DayType, ExogenousSeries};
use microclimate::scenario::{builtin_scenario, export_run, load_scenario, load_series, write_series, DirLock, Metrics};
use proptest::prelude::*;

fn read_metrics(path: &std::path::Path) -> Metrics {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exported_trajectory_resums_to_the_metrics() {
    let dir = tempfile::tempdir().unwrap();
    for (name, c) in [("tc1", ControllerKind::Mpc), ("tc2_svs", ControllerKind::OnOff)] {
        let sc = builtin_scenario(name, DayType::Cold).unwrap();
        let r = rolling_run(&sc, c, &RunOptions::default()).unwrap();
        let out = dir.path().join(name);
        let paths = export_run(&r, &out, &sc.comfort).unwrap();
        let metrics = read_metrics(&paths.metrics);

        let mut rdr = csv::Reader::from_path(&paths.trajectory).unwrap();
        let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(
            header,
            ["t_hours", "T_C", "T_star_C", "CO2_ppm", "W_W", "Q_kgps", "T_out_C", "N_oc", "T_lo_C", "T_hi_C"]
        );
        let (mut t, mut w, mut q, mut t_out, mut n_oc) = (vec![], vec![], vec![], vec![], vec![]);
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 1441);
        assert!(rows.last().unwrap()[4].is_empty() && rows.last().unwrap()[5].is_empty());
        for row in &rows {
            t.push(row[0].parse::<f64>().unwrap() * 3600.0);
            t_out.push(row[6].parse().unwrap());
            n_oc.push(row[7].parse().unwrap());
            if !row[4].is_empty() {
                w.push(row[4].parse().unwrap());
                q.push(row[5].parse().unwrap());
            }
        }
        let exo = ExogenousSeries::new(t.clone(), t_out, n_oc).unwrap();
        let sched = ControlSchedule::new(60.0, w, q).unwrap();
        let e = energy_objective(&sched, &exo, &sc.params).unwrap();
        let m = &metrics.energy_kwh;
        assert!((e.total / 1000.0 - m.total).abs() < 1e-6, "{name}");
        assert!((e.heat_cool / 1000.0 - m.heat_cool).abs() < 1e-6);
        assert!((e.ventilation() / 1000.0 - m.ventilation).abs() < 1e-6);
        assert!((m.heating + m.cooling - m.heat_cool).abs() < 1e-9);
        assert!((m.vent_thermal + m.vent_fan - m.ventilation).abs() < 1e-9);
        assert_eq!(m.total, r.energy.total / 1000.0);
        assert_eq!(metrics.penalty_kh, r.penalty);
        assert!(!paths.metrics.with_file_name(".microclimate.lock").exists());
    }
}

#[test]
fn empty_result_exports_header_only() {
    let sc = builtin_scenario("tc1", DayType::Mild).unwrap();
    let r = RunResult {
        scenario: sc.name.clone(),
        controller: ControllerKind::Mpc,
        trajectory: Trajectory::starting_at(0.0, sc.initial),
        exo: sc.exo.clone(),
        energy: EnergyBreakdown::default(),
        penalty: 0.0,
        max_co2_ppm: sc.initial.co2_ppm(),
        solve_times: vec![],
        solver_iterations: vec![],
        planned_objectives: vec![],
        replan_interval: 3600.0,
        seed: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let paths = export_run(&r, dir.path(), &sc.comfort).unwrap();
    let text = fs::read_to_string(&paths.trajectory).unwrap();
    assert_eq!(text.lines().count(), 1);
    let m = read_metrics(&paths.metrics);
    assert_eq!((m.energy_kwh.total, m.penalty_kh, m.max_co2_ppm, m.cycles), (0.0, 0.0, 0.0, 0));
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let lock = DirLock::acquire(dir.path()).unwrap();
    assert!(matches!(DirLock::acquire(dir.path()), Err(Error::Io { .. })));
    drop(lock);
    DirLock::acquire(dir.path()).unwrap();
}

#[test]
fn config_overrides_only_what_it_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("warm.json");
    fs::write(&cfg, r#"{"base": "tc1", "day": "hot", "comfort": {"t_comf": 23}}"#).unwrap();
    let sc = load_scenario(&cfg).unwrap();
    let base = builtin_scenario("tc1", DayType::Hot).unwrap();
    assert_eq!(sc.comfort.t_comf, 23.0);
    assert_eq!(sc.comfort.band, base.comfort.band);
    assert_eq!(sc.params, base.params);
    assert_eq!(sc.exo, base.exo);
    assert_eq!(sc.name, "warm");
}

#[test]
fn config_reads_series_relative_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("data")).unwrap();
    let mut rows = String::from("t_hours,T_out_C,N_oc\n");
    for h in 0..=24 {
        rows += &format!("{h},{},{}\n", -5.0 + 0.5 * h as f64, if (9..17).contains(&h) { 3 } else { 0 });
    }
    fs::write(dir.path().join("data/day.csv"), rows).unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"base": "tc2_svs", "series": "data/day.csv", "params": {"u": 20, "infiltration_per_hour": 0.5},
            "initial": {"T": 19, "co2_ppm": 500}}"#,
    )
    .unwrap();
    let sc = load_scenario(&cfg).unwrap();
    assert_eq!(sc.exo.len(), 25);
    assert_eq!(sc.exo.at(10.0 * 3600.0).unwrap(), (0.0, 3.0));
    assert_eq!(sc.params.u, 20.0);
    assert!((sc.params.infiltration_per_hour() - 0.5).abs() < 1e-12);
    assert_eq!(sc.initial.t, 19.0);
    assert!((sc.initial.co2_ppm() - 500.0).abs() < 1e-9);
    rolling_run(&sc, ControllerKind::Lmpc, &RunOptions::default()).unwrap();
}

#[test]
fn bad_configs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("typo.json", r#"{"comfort": {"t_comfort": 23}}"#),
        ("base.json", r#"{"base": "tc7"}"#),
        ("band.json", r#"{"comfort": {"band": -1}}"#),
        ("series.json", r#"{"series": "missing.csv"}"#),
        ("syntax.json", r#"{"base": "#),
    ];
    for (name, text) in cases {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        let e = load_scenario(&p).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{name}: {e}");
    }
}

#[test]
fn backwards_time_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    fs::write(&p, "t_hours,T_out_C,N_oc\n0,1,0\n1,1,0\n2,1,0\n1.5,1,0\n").unwrap();
    let e = load_series(&p).unwrap_err().to_string();
    assert!(e.contains("line 5") && e.contains("s.csv"), "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn series_round_trip_is_exact(
        steps in proptest::collection::vec((1e-3f64..5.0, -40.0f64..40.0, 0.0f64..60.0), 1..40),
        first in (-40.0f64..40.0, 0.0f64..60.0),
    ) {
        let (mut t, mut t_out, mut n) = (vec![0.0], vec![first.0], vec![first.1]);
        for (dt, a, b) in steps {
            // hours on a grid that survives the hours/seconds conversion exactly
            t.push(t.last().unwrap() + (dt * 3600.0).round().max(1.0));
            t_out.push(a);
            n.push(b);
        }
        let exo = ExogenousSeries::new(t, t_out, n).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_series(&p, &exo).unwrap();
        let back = load_series(&p).unwrap();
        prop_assert_eq!(back.outside_temperatures(), exo.outside_temperatures());
        prop_assert_eq!(back.occupancy(), exo.occupancy());
        for (a, b) in back.times().iter().zip(exo.times()) {
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }
}
