//! Rolling-horizon closed loop, forecast/measurement disturbances and the
//! comparison studies built on top of it.

use std::time::Instant;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::comfort::{max_co2_ppm, temperature_penalty};
use crate::controllers::{lmpc_plan, mpc_plan, onoff_decide, LmpcOptions, MpcOptions, OnOffMode, PlanRequest, StepGrid};
use crate::cost::{energy_objective, EnergyBreakdown};
use crate::dynamics::{simulate, step_state, Trajectory, DEFAULT_INTEGRATION_STEP};
use crate::error::{Error, Result};
use crate::model::{ControlSchedule, ExogenousSeries, MicroclimateState};
use crate::scenario::Scenario;

pub const DAY: f64 = 86_400.0;
pub const MIN_REPLAN: f64 = 300.0;
pub const MAX_REPLAN: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Mpc,
    Lmpc,
    #[serde(rename = "onoff")]
    OnOff,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Mpc, ControllerKind::Lmpc, ControllerKind::OnOff];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Mpc => "mpc",
            ControllerKind::Lmpc => "lmpc",
            ControllerKind::OnOff => "onoff",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mpc" => Ok(ControllerKind::Mpc),
            "lmpc" => Ok(ControllerKind::Lmpc),
            "onoff" | "on/off" | "on-off" => Ok(ControllerKind::OnOff),
            other => Err(Error::Usage(format!("unknown controller '{other}' (expected mpc, lmpc or onoff)"))),
        }
    }
}

/// Noise injected into what the planner sees at each replanning cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    /// Std of the measured room temperature error [K].
    pub sigma_t_room: f64,
    /// Std of the error on the first outside-temperature forecast value [K].
    pub sigma_t_out: f64,
    /// Uniform range of the factor applied to the first occupancy value.
    pub occupancy_factor: (f64, f64),
    pub seed: u64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            sigma_t_room: 1.0,
            sigma_t_out: 1.0,
            occupancy_factor: (0.0, 2.0),
            seed: 0,
        }
    }
}

impl DisturbanceSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.occupancy_factor;
        if !(self.sigma_t_room >= 0.0) || !(self.sigma_t_out >= 0.0) {
            return Err(Error::domain("disturbance standard deviations must be non-negative"));
        }
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::domain(format!("occupancy factor range [{lo}, {hi}] is invalid")));
        }
        Ok(())
    }
}

/// Applies measurement and forecast noise to a planning input.
///
/// Only the room temperature and the first forecast point are disturbed.
pub fn perturb_inputs<R: Rng + ?Sized>(
    state: &MicroclimateState,
    exo: &ExogenousSeries,
    spec: &DisturbanceSpec,
    rng: &mut R,
) -> Result<(MicroclimateState, ExogenousSeries)> {
    spec.validate()?;
    let room = Normal::new(0.0, spec.sigma_t_room).map_err(|e| Error::domain(e.to_string()))?;
    let outside = Normal::new(0.0, spec.sigma_t_out).map_err(|e| Error::domain(e.to_string()))?;
    let (lo, hi) = spec.occupancy_factor;
    let dt_room = room.sample(rng);
    let dt_out = outside.sample(rng);
    let factor = rng.random_range(lo..=hi);
    let mut s = *state;
    s.t += dt_room;
    let mut window = exo.clone();
    let t_out0 = window.outside_temperatures()[0] + dt_out;
    let n0 = window.occupancy()[0] * factor;
    window.set_first(t_out0, n0);
    Ok((s, window))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Time between replanning cycles [s].
    pub replan_interval: f64,
    /// Control step of the plans [s].
    pub control_step: f64,
    /// Plant integration step [s].
    pub dt_int: f64,
    /// Fixed planning window in control steps; `None` plans to the end of the day.
    pub horizon_steps: Option<usize>,
    pub mpc: MpcOptions,
    pub lmpc: LmpcOptions,
    pub disturbance: Option<DisturbanceSpec>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            replan_interval: 3600.0,
            control_step: 3600.0,
            dt_int: DEFAULT_INTEGRATION_STEP,
            horizon_steps: None,
            mpc: MpcOptions::default(),
            lmpc: LmpcOptions::default(),
            disturbance: None,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        let r = self.replan_interval;
        if !(MIN_REPLAN..=MAX_REPLAN).contains(&r) {
            return Err(Error::Usage(format!(
                "replan interval {r} s outside [{MIN_REPLAN}, {MAX_REPLAN}] s"
            )));
        }
        let divides = |a: f64, b: f64| {
            let k = (a / b).round();
            k >= 1.0 && (k * b - a).abs() <= 1e-9 * a
        };
        if !divides(self.control_step, r) {
            return Err(Error::Usage(format!(
                "replan interval {r} s must divide the control step {} s",
                self.control_step
            )));
        }
        if !(self.dt_int > 0.0) || !divides(r, self.dt_int) {
            return Err(Error::Usage(format!(
                "replan interval {r} s must be a multiple of the integration step {} s",
                self.dt_int
            )));
        }
        if !divides(DAY, self.control_step) {
            return Err(Error::Usage(format!("control step {} s must divide one day", self.control_step)));
        }
        if self.horizon_steps == Some(0) {
            return Err(Error::Usage("horizon must be at least one control step".into()));
        }
        if let Some(d) = &self.disturbance {
            d.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub controller: ControllerKind,
    pub trajectory: Trajectory,
    /// Forecast the plant ran against (ground truth).
    pub exo: ExogenousSeries,
    pub energy: EnergyBreakdown,
    /// [K·h]
    pub penalty: f64,
    pub max_co2_ppm: f64,
    /// Wall time of each planning call [s].
    pub solve_times: Vec<f64>,
    pub solver_iterations: Vec<usize>,
    /// Objective each plan predicted for itself [Wh].
    pub planned_objectives: Vec<f64>,
    pub replan_interval: f64,
    pub seed: Option<u64>,
}

impl RunResult {
    /// Energy plus comfort penalty at the optimizer's slack weight [Wh].
    pub fn weighted_cost(&self, slack_weight: f64) -> f64 {
        self.energy.total + slack_weight * self.penalty
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    scenario: &Scenario,
    controller: ControllerKind,
    traj: Trajectory,
    exo: &ExogenousSeries,
    opts: &RunOptions,
    solve_times: Vec<f64>,
    solver_iterations: Vec<usize>,
    planned_objectives: Vec<f64>,
) -> Result<RunResult> {
    let energy = if traj.steps() == 0 {
        EnergyBreakdown::default()
    } else {
        energy_objective(&traj.applied_schedule()?, exo, &scenario.params)?
    };
    let penalty = temperature_penalty(&traj, exo, &scenario.comfort)?;
    Ok(RunResult {
        scenario: scenario.name.clone(),
        controller,
        max_co2_ppm: max_co2_ppm(&traj),
        trajectory: traj,
        exo: exo.clone(),
        energy,
        penalty,
        solve_times,
        solver_iterations,
        planned_objectives,
        replan_interval: opts.replan_interval,
        seed: opts.disturbance.map(|d| d.seed),
    })
}

/// Runs one controller over the scenario's day against the nonlinear plant.
pub fn rolling_run(scenario: &Scenario, controller: ControllerKind, opts: &RunOptions) -> Result<RunResult> {
    opts.validate()?;
    scenario.validate()?;
    let exo = &scenario.exo;
    let start = exo.start();
    let end = start + DAY;
    let mut traj = Trajectory::starting_at(start, scenario.initial);
    if controller == ControllerKind::OnOff {
        return onoff_run(scenario, opts, traj);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.disturbance.map_or(0, |d| d.seed));
    let mut solve_times = Vec::new();
    let mut iterations = Vec::new();
    let mut objectives = Vec::new();
    let mut previous: Option<ControlSchedule> = None;
    let mut now = start;
    let mut cycle = 0usize;
    while now < end - 1e-6 {
        let apply_until = (now + opts.replan_interval).min(end);
        let state = traj.final_state();
        let tag = |e: Error| Error::Cycle {
            cycle,
            source: Box::new(e),
        };
        let grid = StepGrid::clock_aligned(now, start, opts.control_step, end, opts.horizon_steps).map_err(tag)?;
        let mut window = exo.window(now, grid.end()).map_err(tag)?;
        let (measured, forecast) = match &opts.disturbance {
            Some(spec) => {
                // the disturbed initial forecast value holds for one model step
                window.split_at(now + opts.dt_int);
                perturb_inputs(&state, &window, spec, &mut rng).map_err(tag)?
            }
            None => (state, window),
        };
        let req = PlanRequest {
            state: measured,
            grid,
            exo: &forecast,
            params: &scenario.params,
            comfort: &scenario.comfort,
        };
        let clock = Instant::now();
        let plan = match controller {
            ControllerKind::Mpc => mpc_plan(&req, &opts.mpc, previous.as_ref()),
            ControllerKind::Lmpc => lmpc_plan(&req, &opts.lmpc),
            ControllerKind::OnOff => unreachable!("handled above"),
        }
        .map_err(tag)?;
        solve_times.push(clock.elapsed().as_secs_f64());
        iterations.push(plan.iterations);
        objectives.push(plan.objective);
        plan.schedule.validate(&scenario.params).map_err(tag)?;

        let span = apply_until - now;
        let first = ControlSchedule::aligned(now, span, span, vec![plan.schedule.w[0]], vec![plan.schedule.q[0]])
            .map_err(tag)?;
        let segment = simulate(&state, &first, exo, &scenario.params, &scenario.comfort, opts.dt_int).map_err(tag)?;
        traj.extend(&segment).map_err(tag)?;
        previous = Some(plan.schedule);
        now = apply_until;
        cycle += 1;
    }
    info!("{} / {controller}: {cycle} planning cycles", scenario.name);
    finish(scenario, controller, traj, exo, opts, solve_times, iterations, objectives)
}

/// The thermostat decides at every integration step from the true state.
fn onoff_run(scenario: &Scenario, opts: &RunOptions, mut traj: Trajectory) -> Result<RunResult> {
    let exo = &scenario.exo;
    let start = exo.start();
    let steps = (DAY / opts.dt_int).round() as usize;
    let mut mode = OnOffMode::default();
    let mut s = scenario.initial;
    traj.t.reserve(steps);
    traj.states.reserve(steps);
    for i in 0..steps {
        let now = start + i as f64 * opts.dt_int;
        let (t_out, n_oc) = exo.at(now)?;
        let (w, q, next) = onoff_decide(&s, n_oc, &scenario.params, &scenario.comfort, scenario.day_type, mode);
        mode = next;
        s = step_state(&s, w, q, t_out, n_oc, &scenario.params, &scenario.comfort, opts.dt_int)
            .map_err(|e| Error::Cycle {
                cycle: i,
                source: Box::new(e),
            })?;
        traj.t.push(start + (i + 1) as f64 * opts.dt_int);
        traj.states.push(s);
        traj.applied_w.push(w);
        traj.applied_q.push(q);
    }
    finish(scenario, ControllerKind::OnOff, traj, exo, opts, Vec::new(), Vec::new(), Vec::new())
}

/// One line of a controller comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub controller: ControllerKind,
    pub heat_cool_kwh: f64,
    pub ventilation_kwh: f64,
    pub total_kwh: f64,
    pub penalty_kh: f64,
    pub max_co2_ppm: f64,
    /// Set when the run failed; the numbers are then NaN.
    pub error: Option<String>,
}

impl ComparisonRow {
    pub fn from_result(r: &RunResult) -> Self {
        Self {
            controller: r.controller,
            heat_cool_kwh: r.energy.heat_cool / 1000.0,
            ventilation_kwh: r.energy.ventilation() / 1000.0,
            total_kwh: r.energy.total / 1000.0,
            penalty_kh: r.penalty,
            max_co2_ppm: r.max_co2_ppm,
            error: None,
        }
    }

    fn failed(controller: ControllerKind, e: &Error) -> Self {
        Self {
            controller,
            heat_cool_kwh: f64::NAN,
            ventilation_kwh: f64::NAN,
            total_kwh: f64::NAN,
            penalty_kh: f64::NAN,
            max_co2_ppm: f64::NAN,
            error: Some(e.to_string()),
        }
    }
}

/// Runs every controller on the same scenario and options (same seed too).
pub fn compare_controllers(
    scenario: &Scenario,
    controllers: &[ControllerKind],
    opts: &RunOptions,
) -> Result<(Vec<ComparisonRow>, Vec<RunResult>)> {
    if controllers.is_empty() {
        return Err(Error::Usage("no controllers to compare".into()));
    }
    let mut rows = Vec::with_capacity(controllers.len());
    let mut results = Vec::with_capacity(controllers.len());
    for &c in controllers {
        match rolling_run(scenario, c, opts) {
            Ok(r) => {
                rows.push(ComparisonRow::from_result(&r));
                results.push(r);
            }
            Err(e) => {
                warn!("{c} failed on {}: {e}", scenario.name);
                rows.push(ComparisonRow::failed(c, &e));
            }
        }
    }
    Ok((rows, results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon_hours: usize,
    pub energy_kwh: f64,
    pub penalty_kh: f64,
    /// Realized energy plus slack-weighted penalty [kWh].
    pub objective_kwh: f64,
    /// Objective of the first plan of the day [kWh].
    pub first_plan_kwh: f64,
}

/// Closed-loop MPC runs with a fixed planning window of each given length.
pub fn horizon_study(scenario: &Scenario, horizons_hours: &[usize], opts: &RunOptions) -> Result<Vec<HorizonRow>> {
    if opts.control_step != 3600.0 {
        return Err(Error::Usage("horizon study uses hourly control steps".into()));
    }
    horizons_hours
        .iter()
        .map(|&h| {
            let run_opts = RunOptions {
                horizon_steps: Some(h),
                ..opts.clone()
            };
            let r = rolling_run(scenario, ControllerKind::Mpc, &run_opts)?;
            Ok(HorizonRow {
                horizon_hours: h,
                energy_kwh: r.energy.total / 1000.0,
                penalty_kh: r.penalty,
                objective_kwh: r.weighted_cost(opts.mpc.slack_weight) / 1000.0,
                first_plan_kwh: r.planned_objectives.first().copied().unwrap_or(0.0) / 1000.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRow {
    pub controller: ControllerKind,
    pub seed: u64,
    pub energy_kwh: f64,
    pub penalty_kh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySummary {
    pub controller: ControllerKind,
    pub runs: usize,
    pub mean_energy_kwh: f64,
    pub mean_penalty_kh: f64,
    pub max_penalty_kh: f64,
}

/// Disturbed runs of each controller over seeds `0..seeds`, using `base` for
/// everything but the seed.
pub fn uncertainty_study(
    scenario: &Scenario,
    controllers: &[ControllerKind],
    seeds: u64,
    base: &DisturbanceSpec,
    opts: &RunOptions,
) -> Result<(Vec<UncertaintyRow>, Vec<UncertaintySummary>)> {
    if seeds == 0 || controllers.is_empty() {
        return Err(Error::Usage("uncertainty study needs at least one seed and one controller".into()));
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &c in controllers {
        let mut penalties = Vec::with_capacity(seeds as usize);
        let mut energies = Vec::with_capacity(seeds as usize);
        for seed in 0..seeds {
            let run_opts = RunOptions {
                disturbance: Some(DisturbanceSpec { seed, ..*base }),
                ..opts.clone()
            };
            let r = rolling_run(scenario, c, &run_opts)?;
            rows.push(UncertaintyRow {
                controller: c,
                seed,
                energy_kwh: r.energy.total / 1000.0,
                penalty_kh: r.penalty,
            });
            penalties.push(r.penalty);
            energies.push(r.energy.total / 1000.0);
        }
        let n = seeds as f64;
        summary.push(UncertaintySummary {
            controller: c,
            runs: seeds as usize,
            mean_energy_kwh: energies.iter().sum::<f64>() / n,
            mean_penalty_kh: penalties.iter().sum::<f64>() / n,
            max_penalty_kh: penalties.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok((rows, summary))
}
