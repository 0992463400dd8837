//! Energy objective and its optimizer-facing form.
//!
//! Per control step the consumed power is
//! `|W| + C_p·Q·|T_in − T_out| + α·Q³` [W], with α = (2·S_p·ρ)⁻², and the
//! objective sums power × step length in hours, giving Wh.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlSchedule, ExogenousSeries, RoomParams};

/// Penalty charged per K·h of comfort slack [Wh/(K·h)].
pub const DEFAULT_SLACK_WEIGHT: f64 = 1e5;

/// Decision variables per control step: W⁺, W⁻, Q, lower slack, upper slack.
pub const VARS_PER_STEP: usize = 5;
pub const IDX_W_POS: usize = 0;
pub const IDX_W_NEG: usize = 1;
pub const IDX_Q: usize = 2;
pub const IDX_S_LO: usize = 3;
pub const IDX_S_HI: usize = 4;

/// Energy split by end use [Wh].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub heat_cool: f64,
    pub vent_thermal: f64,
    pub vent_fan: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_parts(heat_cool: f64, vent_thermal: f64, vent_fan: f64) -> Self {
        Self {
            heat_cool,
            vent_thermal,
            vent_fan,
            total: heat_cool + vent_thermal + vent_fan,
        }
    }

    pub fn ventilation(&self) -> f64 {
        self.vent_thermal + self.vent_fan
    }
}

/// Multipliers applied to the three energy terms (unit weights give plain Wh).
///
/// Tariffs or primary-energy factors plug in here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWeights {
    pub heat_cool: f64,
    pub vent_thermal: f64,
    pub vent_fan: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self {
            heat_cool: 1.0,
            vent_thermal: 1.0,
            vent_fan: 1.0,
        }
    }
}

fn fan_coefficient_for(params: &RoomParams, q: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(params.fan_coefficient().unwrap_or(0.0));
    }
    params
        .fan_coefficient()
        .ok_or_else(|| Error::domain(format!("ventilation flow {q} kg/s requested but no supply pipe section is defined")))
}

/// Energy consumed by a schedule, with outside temperature taken at each step start.
pub fn energy_objective(schedule: &ControlSchedule, exo: &ExogenousSeries, params: &RoomParams) -> Result<EnergyBreakdown> {
    if schedule.is_empty() {
        return Ok(EnergyBreakdown::default());
    }
    if !exo.covers(schedule.t0, schedule.end()) {
        return Err(Error::domain("forecast does not cover the schedule"));
    }
    let (mut heat_cool, mut vent_thermal, mut vent_fan) = (0.0, 0.0, 0.0);
    for k in 0..schedule.len() {
        let hours = schedule.duration_of(k) / 3600.0;
        let (t_out, _) = exo.at(schedule.start_of(k))?;
        let (w, q) = (schedule.w[k], schedule.q[k]);
        let alpha = fan_coefficient_for(params, q)?;
        heat_cool += w.abs() * hours;
        vent_thermal += params.c_p * q * (params.t_in - t_out).abs() * hours;
        vent_fan += alpha * q * q * q * hours;
    }
    Ok(EnergyBreakdown::from_parts(heat_cool, vent_thermal, vent_fan))
}

/// Partial derivatives of the total energy with respect to each step's W and Q.
///
/// At W = 0 the objective has a kink; zero is returned there, which lies in
/// the subdifferential `[-hours, hours]`.
pub fn energy_gradient(
    schedule: &ControlSchedule,
    exo: &ExogenousSeries,
    params: &RoomParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut dw = Vec::with_capacity(schedule.len());
    let mut dq = Vec::with_capacity(schedule.len());
    for k in 0..schedule.len() {
        let hours = schedule.duration_of(k) / 3600.0;
        let (t_out, _) = exo.at(schedule.start_of(k))?;
        let (w, q) = (schedule.w[k], schedule.q[k]);
        let alpha = fan_coefficient_for(params, q)?;
        dw.push(if w == 0.0 { 0.0 } else { w.signum() * hours });
        dq.push((params.c_p * (params.t_in - t_out).abs() + 3.0 * alpha * q * q) * hours);
    }
    Ok((dw, dq))
}

/// Everything the optimizer objective needs besides the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveContext {
    /// Length of each control step [h].
    pub hours: Vec<f64>,
    /// Outside temperature at each step start [°C].
    pub t_out: Vec<f64>,
    pub t_in: f64,
    pub c_p: f64,
    pub alpha: f64,
    pub weights: EnergyWeights,
    /// [Wh/(K·h)]
    pub slack_weight: f64,
}

impl ObjectiveContext {
    pub fn new(
        hours: Vec<f64>,
        t_out: Vec<f64>,
        params: &RoomParams,
        weights: EnergyWeights,
        slack_weight: f64,
    ) -> Result<Self> {
        if hours.len() != t_out.len() {
            return Err(Error::domain("step lengths and outside temperatures differ in length"));
        }
        Ok(Self {
            hours,
            t_out,
            t_in: params.t_in,
            c_p: params.c_p,
            alpha: params.fan_coefficient().unwrap_or(0.0),
            weights,
            slack_weight,
        })
    }

    /// Context matching a schedule's step grid.
    pub fn for_schedule(
        schedule: &ControlSchedule,
        exo: &ExogenousSeries,
        params: &RoomParams,
        weights: EnergyWeights,
        slack_weight: f64,
    ) -> Result<Self> {
        let hours = (0..schedule.len()).map(|k| schedule.duration_of(k) / 3600.0).collect();
        let t_out = (0..schedule.len())
            .map(|k| exo.at(schedule.start_of(k)).map(|(t, _)| t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(hours, t_out, params, weights, slack_weight)
    }

    pub fn steps(&self) -> usize {
        self.hours.len()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != VARS_PER_STEP * self.steps() {
            return Err(Error::domain(format!(
                "decision vector has {} entries, expected {} for {} steps",
                x.len(),
                VARS_PER_STEP * self.steps(),
                self.steps()
            )));
        }
        Ok(())
    }
}

/// Weighted energy plus slack penalty for a decision vector laid out
/// `[W⁺, W⁻, Q, s_lo, s_hi]` per step. Slacks are in K and are charged per hour.
pub fn objective_for_optimizer(x: &[f64], ctx: &ObjectiveContext) -> Result<f64> {
    ctx.check(x)?;
    let mut total = 0.0;
    for (k, v) in x.chunks_exact(VARS_PER_STEP).enumerate() {
        let h = ctx.hours[k];
        let q = v[IDX_Q];
        let power = ctx.weights.heat_cool * (v[IDX_W_POS] + v[IDX_W_NEG])
            + ctx.weights.vent_thermal * ctx.c_p * q * (ctx.t_in - ctx.t_out[k]).abs()
            + ctx.weights.vent_fan * ctx.alpha * q * q * q;
        total += power * h + ctx.slack_weight * (v[IDX_S_LO] + v[IDX_S_HI]) * h;
    }
    Ok(total)
}

pub fn objective_gradient(x: &[f64], ctx: &ObjectiveContext) -> Result<Vec<f64>> {
    ctx.check(x)?;
    let mut g = vec![0.0; x.len()];
    for (k, v) in x.chunks_exact(VARS_PER_STEP).enumerate() {
        let h = ctx.hours[k];
        let base = k * VARS_PER_STEP;
        let q = v[IDX_Q];
        g[base + IDX_W_POS] = ctx.weights.heat_cool * h;
        g[base + IDX_W_NEG] = ctx.weights.heat_cool * h;
        g[base + IDX_Q] = (ctx.weights.vent_thermal * ctx.c_p * (ctx.t_in - ctx.t_out[k]).abs()
            + 3.0 * ctx.weights.vent_fan * ctx.alpha * q * q)
            * h;
        g[base + IDX_S_LO] = ctx.slack_weight * h;
        g[base + IDX_S_HI] = ctx.slack_weight * h;
    }
    Ok(g)
}
