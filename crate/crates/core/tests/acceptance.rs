//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAILURES` are reported as FAIL but do not
//! fail the run unless `ACCEPTANCE_STRICT=1` is set; if one of them starts
//! passing the run fails so the list gets updated.

mod common;

use std::time::{Duration, Instant};

use microclimate::comfort::min_ventilation;
use microclimate::controllers::{MpcOptions, MpcProblem, PlanRequest, StepGrid};
use microclimate::dynamics::{simulate, steady_state};
use microclimate::harness::{horizon_study, rolling_run, uncertainty_study, ControllerKind, DisturbanceSpec, RunOptions};
use microclimate::lp::solve_lp;
use microclimate::model::{ComfortSpec, ControlSchedule, DayType, ExogenousSeries, MicroclimateState, RoomParams, PPM};
use microclimate::scenario::{builtin_scenario, export_run};
use microclimate::slp::finite_diff_check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPECTED_FAILURES: &[u32] = &[7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let comfort = ComfortSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_t, mut worst_co2) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let d = common::plant_draw(&mut rng);
        let steps = 240;
        let exo = ExogenousSeries::constant(0.0, steps as f64 * 3600.0, d.t_out, d.n_oc).unwrap();
        let sched = ControlSchedule::new(3600.0, vec![d.w; steps], vec![d.q; steps]).unwrap();
        let s0 = MicroclimateState::from_ppm(d.t0, d.t0 + 2.0, 900.0);
        let end = simulate(&s0, &sched, &exo, &d.params, &comfort, 60.0).unwrap().final_state();
        let ss = steady_state(d.w, d.q, d.t_out, d.n_oc, &d.params, &comfort).unwrap();
        worst_t = worst_t.max((end.t - ss.t).abs()).max((end.t_star - ss.t_star).abs());
        worst_co2 = worst_co2.max((end.co2_ppm() - ss.co2_ppm()).abs());
    }
    let params = RoomParams::default().with_infiltration_per_hour(0.0);
    let mut worst_limit = 0.0f64;
    for n in [1.0, 5.0, 25.0] {
        let ss = steady_state(0.0, min_ventilation(n, &comfort), 5.0, n, &params, &comfort).unwrap();
        worst_limit = worst_limit.max((ss.co2_ppm() - comfort.nu_max / PPM).abs());
    }
    let t = start.elapsed();
    outcome(
        worst_t < 1e-3 && worst_co2 < 1.0 && worst_limit < 1.0 && within(t, 10.0),
        format!(
            "max |T - T_ss| {worst_t:.2e} K, max |CO2 - CO2_ss| {worst_co2:.2e} ppm, CO2 at Q_min {worst_limit:.2e} ppm off the cap, {:.2} s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut status_mismatch, mut worst) = (0usize, 0.0f64);
    for _ in 0..1000 {
        let p = common::random_lp(&mut rng);
        let sol = solve_lp(&p).unwrap();
        let (status, value) = common::vertex_oracle(&p);
        if sol.status != status {
            status_mismatch += 1;
        } else if status == microclimate::lp::LpStatus::Optimal {
            worst = worst.max((sol.objective - value).abs() / value.abs().max(1.0));
        }
    }
    let t = start.elapsed();
    outcome(
        status_mismatch == 0 && worst <= 1e-8 && within(t, 30.0),
        format!(
            "1000 LPs: {status_mismatch} status mismatches, worst objective error {worst:.1e}, {:.2} s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let opts = MpcOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases = [("tc1", DayType::Cold), ("tc1", DayType::Hot), ("tc2_svs", DayType::Mild), ("tc1", DayType::Mild)];
    let mut worst = 0.0f64;
    let mut points = 0;
    for &(name, day) in cases.iter().cycle().take(20) {
        let sc = builtin_scenario(name, day).unwrap();
        let t0 = 3600.0 * rng.random_range(0..18) as f64;
        let req = PlanRequest {
            state: MicroclimateState::from_ppm(rng.random_range(17.0..25.0), rng.random_range(17.0..25.0), 600.0),
            grid: StepGrid::uniform(t0, 3600.0, 6).unwrap(),
            exo: &sc.exo,
            params: &sc.params,
            comfort: &sc.comfort,
        };
        let problem = MpcProblem::new(&req, &opts).unwrap();
        let scale = problem.scales(opts.slack_scale);
        let (lb, ub) = problem.bounds();
        let n = problem.steps();
        // keep |W| and Q at least two finite-difference steps from their kinks
        let w: Vec<f64> = (0..n)
            .map(|k| {
                let b = k * 5;
                let wmax = ub[b];
                let wmin = -ub[b + 1];
                loop {
                    let v = rng.random_range(wmin..wmax);
                    if v.abs() > 2e-4 * wmax.max(-wmin) {
                        break v;
                    }
                }
            })
            .collect();
        let q: Vec<f64> = (0..n)
            .map(|k| {
                let (lo, hi) = (lb[k * 5 + 2], ub[k * 5 + 2]);
                if hi > lo {
                    rng.random_range(lo.max(2e-4 * scale[k * 5 + 2])..=hi)
                } else {
                    lo
                }
            })
            .collect();
        let x = problem.complete(&w, &q);
        let h: Vec<f64> = scale.iter().map(|s| 1e-4 * s).collect();
        worst = worst.max(finite_diff_check(&problem, &x, &h).unwrap());
        points += 1;
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-4 && within(t, 10.0),
        format!("{points} feasible points, worst relative error {worst:.2e}, {:.2} s", t.as_secs_f64()),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let opts = RunOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for day in DayType::ALL {
        let sc = builtin_scenario("tc1", day).unwrap();
        let mpc = rolling_run(&sc, ControllerKind::Mpc, &opts).unwrap();
        let onoff = rolling_run(&sc, ControllerKind::OnOff, &opts).unwrap();
        let lmpc = rolling_run(&sc, ControllerKind::Lmpc, &opts).unwrap();
        let (e_mpc, e_onoff) = (mpc.energy.total / 1000.0, onoff.energy.total / 1000.0);
        pass &= e_mpc <= e_onoff * 1.01;
        pass &= mpc.penalty <= 0.1;
        if day == DayType::Cold {
            pass &= lmpc.penalty > mpc.penalty;
        }
        parts.push(format!(
            "{day}: E mpc {e_mpc:.2} / lmpc {:.2} / onoff {e_onoff:.2} kWh, pen {:.3} / {:.3} / {:.3} K·h",
            lmpc.energy.total / 1000.0,
            mpc.penalty,
            lmpc.penalty,
            onoff.penalty
        ));
    }
    let t = start.elapsed();
    pass &= within(t, 300.0);
    outcome(pass, format!("{}; {:.1} s", parts.join("; "), t.as_secs_f64()))
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for day in DayType::ALL {
        let sc = builtin_scenario("tc1", day).unwrap();
        let r = rolling_run(&sc, ControllerKind::Mpc, &RunOptions::default()).unwrap();
        for (i, &q) in r.trajectory.applied_q.iter().enumerate() {
            let n = sc.exo.at(r.trajectory.t[i]).unwrap().1;
            let q_min = min_ventilation(n, &sc.comfort).min(sc.params.q_max);
            worst = worst.max((q - q_min).abs());
        }
    }
    outcome(worst <= 1e-6, format!("max |Q - Q_min| over three days {worst:.2e} kg/s"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut sc = builtin_scenario("tc1", DayType::Cold).unwrap();
    sc.params.w_max = 3500.0;
    let horizons = [2, 3, 4, 6, 24];
    let rows = horizon_study(&sc, &horizons, &RunOptions::default()).unwrap();
    let f: Vec<f64> = rows.iter().map(|r| r.objective_kwh).collect();
    // non-increasing up to the optimizer's relative stationarity tolerance
    let monotone = f.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-6));
    let gap = (f[2] - f[4]).abs() / f[4];
    let t = start.elapsed();
    outcome(
        monotone && gap <= 0.02 && within(t, 180.0),
        format!(
            "J(h) for h = {horizons:?}: {}; |J(4) - J(24)| / J(24) = {gap:.2e}; {:.1} s",
            f.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", "),
            t.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let sc = builtin_scenario("tc1", DayType::Mild).unwrap();
    let opts = RunOptions {
        replan_interval: 360.0,
        ..RunOptions::default()
    };
    let (_, summary) = uncertainty_study(
        &sc,
        &[ControllerKind::Mpc, ControllerKind::Lmpc],
        20,
        &DisturbanceSpec::default(),
        &opts,
    )
    .unwrap();
    let (mpc, lmpc) = (summary[0].mean_penalty_kh, summary[1].mean_penalty_kh);
    let t = start.elapsed();
    outcome(
        mpc < lmpc && mpc <= 2.0 && lmpc <= 2.0 && within(t, 600.0),
        format!(
            "mean penalty MPC {mpc:.3} K·h, LMPC {lmpc:.3} K·h (ordering {}, cap 2 K·h: MPC {}, LMPC {}); {:.1} s",
            if mpc < lmpc { "holds" } else { "violated" },
            if mpc <= 2.0 { "met" } else { "exceeded" },
            if lmpc <= 2.0 { "met" } else { "exceeded" },
            t.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let opts = RunOptions::default();
    let mut pass = true;
    let mut min_overnight = f64::INFINITY;
    let mut max_svs = 0.0f64;
    for day in DayType::ALL {
        let sc = builtin_scenario("tc2", day).unwrap();
        for c in ControllerKind::ALL {
            let r = rolling_run(&sc, c, &opts).unwrap();
            let overnight = r
                .trajectory
                .t
                .iter()
                .zip(&r.trajectory.states)
                .filter(|(&t, _)| t <= 8.0 * 3600.0 || t >= 19.0 * 3600.0)
                .map(|(_, s)| s.co2_ppm())
                .fold(0.0, f64::max);
            min_overnight = min_overnight.min(overnight);
        }
        let svs = builtin_scenario("tc2_svs", day).unwrap();
        let r = rolling_run(&svs, ControllerKind::Mpc, &opts).unwrap();
        max_svs = max_svs.max(r.max_co2_ppm);
    }
    pass &= min_overnight > 1000.0 && max_svs <= 1010.0;
    let t = start.elapsed();
    pass &= within(t, 120.0);
    outcome(
        pass,
        format!(
            "without supply ventilation the lowest overnight peak is {min_overnight:.0} ppm; with it MPC peaks at {max_svs:.1} ppm; {:.1} s",
            t.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let sc = builtin_scenario("tc1", DayType::Cold).unwrap();
    let start = Instant::now();
    let r = rolling_run(&sc, ControllerKind::Mpc, &RunOptions::default()).unwrap();
    let t = start.elapsed();
    outcome(
        within(t, 60.0),
        format!(
            "24 h MPC run with {} hourly replans took {:.3} s",
            r.solver_iterations.len(),
            t.as_secs_f64()
        ),
    )
}

fn criterion_10() -> Outcome {
    let sc = builtin_scenario("tc1", DayType::Mild).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for c in ControllerKind::ALL {
        let opts = RunOptions {
            replan_interval: 1800.0,
            disturbance: Some(DisturbanceSpec::with_seed(42)),
            ..RunOptions::default()
        };
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{c}-{rep}"));
            let r = rolling_run(&sc, c, &opts).unwrap();
            let paths = export_run(&r, &out, &sc.comfort).unwrap();
            bytes.push((std::fs::read(&paths.metrics).unwrap(), std::fs::read(&paths.trajectory).unwrap()));
        }
        identical &= bytes[0] == bytes[1];
    }
    outcome(
        identical,
        "seed 42, two runs per controller: metrics.json and trajectory.csv byte-identical",
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut unexpected = Vec::new();
    for (id, check) in criteria {
        let o = check();
        let expected_fail = EXPECTED_FAILURES.contains(&id);
        let tag = match (o.pass, expected_fail) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as an expected failure)",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:2}: {tag}: {}", o.detail);
        if o.pass == expected_fail || (strict && !o.pass) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("acceptance: criteria {unexpected:?} did not match expectations");
        std::process::exit(1);
    }
}
