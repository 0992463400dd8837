//! Nonlinear MPC, linearized MPC and the on/off thermostat baseline.

mod grid;
mod lmpc;
mod mpc;
mod onoff;

pub use grid::StepGrid;
pub use lmpc::{lmpc_plan, LmpcOptions};
pub use mpc::{mpc_plan, MpcOptions, MpcProblem};
pub use onoff::{onoff_decide, OnOffMode};

use serde::{Deserialize, Serialize};

use crate::comfort::{comfort_bounds, min_ventilation, ComfortBounds};
use crate::dynamics::substeps;
use crate::error::{Error, Result};
use crate::model::{ComfortSpec, ControlSchedule, ExogenousSeries, MicroclimateState, RoomParams};

/// Everything a planner needs for one replanning cycle.
#[derive(Debug, Clone, Copy)]
pub struct PlanRequest<'a> {
    /// Measured state at `grid.t0`.
    pub state: MicroclimateState,
    pub grid: StepGrid,
    /// Forecast covering the grid.
    pub exo: &'a ExogenousSeries,
    pub params: &'a RoomParams,
    pub comfort: &'a ComfortSpec,
}

/// A planner's answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub schedule: ControlSchedule,
    /// Weighted energy plus slack penalty of the plan, as predicted [Wh].
    pub objective: f64,
    /// Planned comfort slack [K·h].
    pub slack: f64,
    /// SLP iterations of the winning start, or simplex pivots.
    pub iterations: usize,
}

/// Exogenous data and constraints resolved onto a step grid.
#[derive(Debug, Clone)]
pub(crate) struct HorizonData {
    pub grid: StepGrid,
    pub dt: f64,
    /// Integration substeps per control step (empty without an integration step).
    pub substeps: Vec<usize>,
    pub hours: Vec<f64>,
    /// Outside temperature and occupancy per integration substep.
    pub sub_t_out: Vec<f64>,
    pub sub_n: Vec<f64>,
    /// Values at each control step's start.
    pub t_out: Vec<f64>,
    pub n_oc: Vec<f64>,
    /// Temperature band enforced at the end of each control step.
    pub bounds: Vec<ComfortBounds>,
    /// Ventilation floor per step, capped at the equipment maximum.
    pub q_lo: Vec<f64>,
}

impl HorizonData {
    /// Resolves the forecast onto `req.grid`; with `dt` it is also resolved
    /// onto integration substeps.
    pub fn new(req: &PlanRequest, dt: Option<f64>) -> Result<Self> {
        req.state.validate()?;
        req.params.validate()?;
        req.comfort.validate()?;
        let grid = req.grid;
        if grid.steps == 0 {
            return Err(Error::domain("horizon must contain at least one control step"));
        }
        if !req.exo.covers(grid.t0, grid.end()) {
            return Err(Error::domain(format!(
                "forecast [{}, {}] s does not cover the horizon [{}, {}] s",
                req.exo.start(),
                req.exo.end(),
                grid.t0,
                grid.end()
            )));
        }
        let n = grid.steps;
        let mut hd = HorizonData {
            grid,
            dt: dt.unwrap_or(f64::NAN),
            substeps: Vec::with_capacity(n),
            hours: Vec::with_capacity(n),
            sub_t_out: Vec::new(),
            sub_n: Vec::new(),
            t_out: Vec::with_capacity(n),
            n_oc: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n),
            q_lo: Vec::with_capacity(n),
        };
        let mut i = 0usize;
        for k in 0..n {
            let dur = grid.duration_of(k);
            let start = grid.start_of(k);
            let end = grid.start_of(k + 1);
            let (t_out, n_oc) = req.exo.at(start)?;
            hd.t_out.push(t_out);
            hd.n_oc.push(n_oc);
            if let Some(dt) = dt {
                let count = substeps(dur, dt)?;
                for _ in 0..count {
                    let (a, b) = req.exo.at(grid.t0 + i as f64 * dt)?;
                    hd.sub_t_out.push(a);
                    hd.sub_n.push(b);
                    i += 1;
                }
                hd.substeps.push(count);
            }
            let before = comfort_bounds(occupancy_before(req.exo, end)?, req.comfort);
            let band = if end < req.exo.end() {
                before.intersect(&comfort_bounds(req.exo.at(end)?.1, req.comfort))
            } else {
                before
            };
            hd.bounds.push(band);
            let peak = req.exo.max_occupancy(start, end)?;
            hd.q_lo.push(min_ventilation(peak, req.comfort).min(req.params.q_max));
            hd.hours.push(dur / 3600.0);
        }
        Ok(hd)
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }
}

/// Occupancy holding just before `time`.
fn occupancy_before(exo: &ExogenousSeries, time: f64) -> Result<f64> {
    let i = exo.times().partition_point(|&x| x < time);
    Ok(exo.occupancy()[i.saturating_sub(1)])
}
