use log::debug;
use serde::{Deserialize, Serialize};

use super::{HorizonData, Plan, PlanRequest};
use crate::cost::{
    objective_for_optimizer, objective_gradient, EnergyWeights, ObjectiveContext, DEFAULT_SLACK_WEIGHT, IDX_Q, IDX_S_HI,
    IDX_S_LO, IDX_W_NEG, IDX_W_POS, VARS_PER_STEP,
};
use crate::dynamics::DEFAULT_INTEGRATION_STEP;
use crate::error::{Error, Result};
use crate::model::{ControlSchedule, MicroclimateState, RoomParams, KELVIN_OFFSET};
use crate::slp::{solve_multistart, NlpEval, NlpProblem, SlpOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcOptions {
    /// Integration step of the internal prediction model [s].
    pub dt_int: f64,
    pub slack_weight: f64,
    pub weights: EnergyWeights,
    /// How many of the three start points to use (zero controls, steady-state
    /// heating, previous plan).
    pub starts: usize,
    /// Trust-region scale of the comfort slacks [K].
    pub slack_scale: f64,
    pub slp: SlpOptions,
}

impl Default for MpcOptions {
    fn default() -> Self {
        Self {
            dt_int: DEFAULT_INTEGRATION_STEP,
            slack_weight: DEFAULT_SLACK_WEIGHT,
            weights: EnergyWeights::default(),
            starts: 3,
            slack_scale: 10.0,
            slp: SlpOptions::default(),
        }
    }
}

/// Single-shooting MPC problem over `[W⁺, W⁻, Q, s_lo, s_hi]` per step.
///
/// Constraints (two per step, `g <= 0`) bound the predicted air temperature at
/// the end of each control step; the prediction is the plant's own Euler
/// scheme with `m(T)` recomputed every substep.
pub struct MpcProblem<'a> {
    s0: MicroclimateState,
    hd: HorizonData,
    params: &'a RoomParams,
    ctx: ObjectiveContext,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl<'a> MpcProblem<'a> {
    pub fn new(req: &PlanRequest<'a>, opts: &MpcOptions) -> Result<Self> {
        let hd = HorizonData::new(req, Some(opts.dt_int))?;
        let p = req.params;
        let ctx = ObjectiveContext::new(hd.hours.clone(), hd.t_out.clone(), p, opts.weights, opts.slack_weight)?;
        let n = hd.steps();
        let mut lb = vec![0.0; VARS_PER_STEP * n];
        let mut ub = vec![f64::INFINITY; VARS_PER_STEP * n];
        for k in 0..n {
            let b = k * VARS_PER_STEP;
            lb[b + IDX_W_POS] = p.w_min.max(0.0);
            ub[b + IDX_W_POS] = p.w_max.max(0.0);
            lb[b + IDX_W_NEG] = (-p.w_max).max(0.0);
            ub[b + IDX_W_NEG] = (-p.w_min).max(0.0);
            lb[b + IDX_Q] = hd.q_lo[k];
            ub[b + IDX_Q] = p.q_max;
        }
        Ok(Self {
            s0: req.state,
            hd,
            params: p,
            ctx,
            lb,
            ub,
        })
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lb, &self.ub)
    }

    pub fn steps(&self) -> usize {
        self.hd.steps()
    }

    /// Temperature band enforced at the end of step `k`.
    pub fn band(&self, k: usize) -> (f64, f64) {
        (self.hd.bounds[k].t_lo, self.hd.bounds[k].t_hi)
    }

    pub fn ventilation_floor(&self, k: usize) -> f64 {
        self.hd.q_lo[k]
    }

    /// Step-wise trust-region scale of the decision variables.
    pub fn scales(&self, slack_scale: f64) -> Vec<f64> {
        let p = self.params;
        let span = |v: f64| if v > 0.0 { v } else { 1.0 };
        let mut s = Vec::with_capacity(self.lb.len());
        for _ in 0..self.steps() {
            s.extend([
                span(p.w_max.max(0.0)),
                span((-p.w_min).max(0.0)),
                span(p.q_max),
                slack_scale,
                slack_scale,
            ]);
        }
        s
    }

    /// Predicted air temperature at the end of each control step, and, when
    /// requested, its sensitivity to every step's W and Q (`2k` = W, `2k+1` = Q).
    fn predict(&self, w: &[f64], q: &[f64], sens: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
        let p = self.params;
        let n = self.steps();
        let dt = self.hd.dt;
        let c_p = p.c_p;
        let gas = p.p_atm * p.volume / p.r_gas;
        let k_star = dt * p.u_star / p.mc_star;
        let (mut t, mut ts) = (self.s0.t, self.s0.t_star);
        let mut d_t = vec![0.0; if sens { 2 * n } else { 0 }];
        let mut d_ts = d_t.clone();
        let mut ends = Vec::with_capacity(n);
        let mut jac = Vec::with_capacity(if sens { n } else { 0 });
        let mut i = 0usize;
        for k in 0..n {
            let (wk, qk) = (w[k], q[k]);
            let active = 2 * (k + 1);
            for _ in 0..self.hd.substeps[k] {
                let t_out = self.hd.sub_t_out[i];
                let n_oc = self.hd.sub_n[i];
                i += 1;
                let kelvin = t + KELVIN_OFFSET;
                let m = gas / kelvin;
                let flux = p.u * (t_out - t)
                    + p.u_star * (ts - t)
                    + p.w_oc * n_oc
                    + wk
                    + c_p * qk * (p.t_in - t)
                    + c_p * m * p.infiltration * (t_out - t);
                let rate = flux / (m * c_p);
                if sens {
                    let dm = -m / kelvin;
                    let dflux = -p.u - p.u_star - c_p * qk - c_p * m * p.infiltration
                        + c_p * dm * p.infiltration * (t_out - t);
                    let a_tt = 1.0 + dt * (dflux * m - flux * dm) / (m * m * c_p);
                    let a_ts = dt * p.u_star / (m * c_p);
                    for j in 0..active {
                        let (x, y) = (d_t[j], d_ts[j]);
                        d_t[j] = a_tt * x + a_ts * y;
                        d_ts[j] = k_star * x + (1.0 - k_star) * y;
                    }
                    d_t[2 * k] += dt / (m * c_p);
                    d_t[2 * k + 1] += dt * (p.t_in - t) / m;
                }
                let next_ts = ts - k_star * (ts - t);
                t += dt * rate;
                ts = next_ts;
            }
            ends.push(t);
            if sens {
                jac.push(d_t.clone());
            }
        }
        (ends, jac)
    }

    fn controls(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        x.chunks_exact(VARS_PER_STEP)
            .map(|v| (v[IDX_W_POS] - v[IDX_W_NEG], v[IDX_Q]))
            .unzip()
    }

    /// Decision vector for the given controls with slacks set to the
    /// predicted band violations (so every start point is feasible).
    pub fn complete(&self, w: &[f64], q: &[f64]) -> Vec<f64> {
        let n = self.steps();
        let (ends, _) = self.predict(w, q, false);
        let mut x = vec![0.0; VARS_PER_STEP * n];
        for k in 0..n {
            let b = k * VARS_PER_STEP;
            x[b + IDX_W_POS] = w[k].max(0.0).clamp(self.lb[b + IDX_W_POS], self.ub[b + IDX_W_POS]);
            x[b + IDX_W_NEG] = (-w[k]).max(0.0).clamp(self.lb[b + IDX_W_NEG], self.ub[b + IDX_W_NEG]);
            x[b + IDX_Q] = q[k].clamp(self.lb[b + IDX_Q], self.ub[b + IDX_Q]);
            let (lo, hi) = self.band(k);
            x[b + IDX_S_LO] = (lo - ends[k]).max(0.0);
            x[b + IDX_S_HI] = (ends[k] - hi).max(0.0);
        }
        // the clamp may have moved the controls; settle slacks on the final ones
        if x.chunks_exact(VARS_PER_STEP).zip(w.iter().zip(q)).any(|(v, (&wk, &qk))| {
            v[IDX_W_POS] - v[IDX_W_NEG] != wk || v[IDX_Q] != qk
        }) {
            let (w2, q2) = self.controls(&x);
            return self.complete(&w2, &q2);
        }
        x
    }

    pub fn schedule(&self, x: &[f64]) -> Result<ControlSchedule> {
        let (w, q) = self.controls(x);
        self.hd.grid.schedule(w, q)
    }

    /// Steady-state power holding each step's band-clamped outside temperature.
    fn steady_heating(&self) -> Vec<f64> {
        let p = self.params;
        (0..self.steps())
            .map(|k| {
                let (lo, hi) = self.band(k);
                let target = self.hd.t_out[k].clamp(lo, hi);
                let m = p.p_atm * p.volume / (p.r_gas * (target + KELVIN_OFFSET));
                let q = self.hd.q_lo[k];
                let w = p.u * (target - self.hd.t_out[k])
                    + p.c_p * q * (target - p.t_in)
                    + p.c_p * m * p.infiltration * (target - self.hd.t_out[k])
                    - p.w_oc * self.hd.n_oc[k];
                w.clamp(p.w_min, p.w_max)
            })
            .collect()
    }

    /// Previous plan's controls at the end time of each new step, repeating
    /// its last step beyond its end.
    fn shifted(&self, prev: &ControlSchedule) -> Option<(Vec<f64>, Vec<f64>)> {
        if prev.is_empty() {
            return None;
        }
        let g = &self.hd.grid;
        let (mut w, mut q) = (Vec::with_capacity(g.steps), Vec::with_capacity(g.steps));
        for k in 0..g.steps {
            let mid = 0.5 * (g.start_of(k) + g.start_of(k + 1));
            let j = (0..prev.len())
                .find(|&j| prev.start_of(j) <= mid && mid < prev.start_of(j + 1))
                .unwrap_or(prev.len() - 1);
            w.push(prev.w[j]);
            q.push(prev.q[j]);
        }
        Some((w, q))
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        objective_for_optimizer(x, &self.ctx)
    }
}

impl NlpProblem for MpcProblem<'_> {
    fn num_vars(&self) -> usize {
        self.lb.len()
    }

    fn evaluate(&self, x: &[f64], with_derivatives: bool) -> Result<NlpEval> {
        let n = self.steps();
        if x.len() != VARS_PER_STEP * n {
            return Err(Error::domain("decision vector does not match the horizon"));
        }
        let (w, q) = self.controls(x);
        let (ends, sens) = self.predict(&w, &q, with_derivatives);
        let mut ev = NlpEval {
            f: objective_for_optimizer(x, &self.ctx)?,
            g: Vec::with_capacity(2 * n),
            ..NlpEval::default()
        };
        for k in 0..n {
            let b = k * VARS_PER_STEP;
            let (lo, hi) = self.band(k);
            ev.g.push(lo - ends[k] - x[b + IDX_S_LO]);
            ev.g.push(ends[k] - hi - x[b + IDX_S_HI]);
        }
        if with_derivatives {
            ev.grad = objective_gradient(x, &self.ctx)?;
            ev.jac_g.reserve(2 * n);
            for k in 0..n {
                let mut lo_row = vec![0.0; VARS_PER_STEP * n];
                for j in 0..=k {
                    let b = j * VARS_PER_STEP;
                    let (dw, dq) = (sens[k][2 * j], sens[k][2 * j + 1]);
                    lo_row[b + IDX_W_POS] = -dw;
                    lo_row[b + IDX_W_NEG] = dw;
                    lo_row[b + IDX_Q] = -dq;
                }
                let mut hi_row: Vec<f64> = lo_row.iter().map(|v| -v).collect();
                lo_row[k * VARS_PER_STEP + IDX_S_LO] = -1.0;
                hi_row[k * VARS_PER_STEP + IDX_S_HI] = -1.0;
                ev.jac_g.push(lo_row);
                ev.jac_g.push(hi_row);
            }
        }
        Ok(ev)
    }
}

/// Plans with the full nonlinear model, solved by multi-start SLP.
///
/// `warm` is the previous cycle's plan, used as the third start point.
pub fn mpc_plan(req: &PlanRequest, opts: &MpcOptions, warm: Option<&ControlSchedule>) -> Result<Plan> {
    let problem = MpcProblem::new(req, opts)?;
    let n = problem.steps();
    let q_lo = problem.hd.q_lo.clone();
    let mut starts = Vec::with_capacity(3);
    starts.push(problem.complete(&vec![0.0; n], &q_lo));
    if opts.starts >= 2 {
        starts.push(problem.complete(&problem.steady_heating(), &q_lo));
    }
    if opts.starts >= 3 {
        if let Some((w, q)) = warm.and_then(|p| problem.shifted(p)) {
            starts.push(problem.complete(&w, &q));
        }
    }
    let mut slp = opts.slp.clone();
    slp.scale = Some(problem.scales(opts.slack_scale));
    let (lb, ub) = problem.bounds();
    let (sol, best) = solve_multistart(&problem, &starts, lb, ub, &slp)?;
    debug!(
        "mpc plan over {n} steps: start {best} won, f = {:.3} Wh, status {:?}",
        sol.objective, sol.status
    );
    let slack = sol
        .x
        .chunks_exact(VARS_PER_STEP)
        .zip(&problem.hd.hours)
        .map(|(v, h)| (v[IDX_S_LO] + v[IDX_S_HI]) * h)
        .sum();
    Ok(Plan {
        schedule: problem.schedule(&sol.x)?,
        objective: sol.objective,
        slack,
        iterations: sol.iterations,
    })
}
