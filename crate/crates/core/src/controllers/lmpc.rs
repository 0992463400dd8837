use serde::{Deserialize, Serialize};

use super::{HorizonData, Plan, PlanRequest};
use crate::cost::{objective_for_optimizer, EnergyWeights, ObjectiveContext, DEFAULT_SLACK_WEIGHT, VARS_PER_STEP};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::model::air_mass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmpcOptions {
    pub slack_weight: f64,
    pub weights: EnergyWeights,
}

impl Default for LmpcOptions {
    fn default() -> Self {
        Self {
            slack_weight: DEFAULT_SLACK_WEIGHT,
            weights: EnergyWeights::default(),
        }
    }
}

// LP columns per step: heating and cooling power in kW, end-of-step
// temperature, and the two comfort slacks.
const COLS: usize = 5;
const C_WP: usize = 0;
const C_WN: usize = 1;
const C_T: usize = 2;
const C_SLO: usize = 3;
const C_SHI: usize = 4;

/// Plans with the linearized model as one LP.
///
/// Ventilation is fixed at its floor, the air mass at `m(T(0))` and the
/// inertia temperature at `T⋆(0)`; each control step is one explicit Euler
/// step of its own length.
pub fn lmpc_plan(req: &PlanRequest, opts: &LmpcOptions) -> Result<Plan> {
    let hd = HorizonData::new(req, None)?;
    let p = req.params;
    let n = hd.steps();
    let m = air_mass(p, req.state.t)?;
    let mc = m * p.c_p;
    let ts0 = req.state.t_star;

    let mut c = vec![0.0; COLS * n];
    for k in 0..n {
        let h = hd.hours[k];
        c[k * COLS + C_WP] = 1000.0 * opts.weights.heat_cool * h;
        c[k * COLS + C_WN] = 1000.0 * opts.weights.heat_cool * h;
        c[k * COLS + C_SLO] = opts.slack_weight * h;
        c[k * COLS + C_SHI] = opts.slack_weight * h;
    }
    let mut lp = LinearProgram::new(c);
    for k in 0..n {
        let b = k * COLS;
        lp.ub[b + C_WP] = p.w_max.max(0.0) / 1000.0;
        lp.lb[b + C_WP] = p.w_min.max(0.0) / 1000.0;
        lp.ub[b + C_WN] = (-p.w_min).max(0.0) / 1000.0;
        lp.lb[b + C_WN] = (-p.w_max).max(0.0) / 1000.0;
        lp.lb[b + C_T] = f64::NEG_INFINITY;

        let dt = hd.grid.duration_of(k);
        let q = hd.q_lo[k];
        let (t_out, n_oc) = (hd.t_out[k], hd.n_oc[k]);
        let leak = p.c_p * m * p.infiltration;
        let g = p.u + p.u_star + p.c_p * q + leak;
        let a = 1.0 - dt * g / mc;
        let bw = 1000.0 * dt / mc;
        let free = dt / mc * (p.u * t_out + p.u_star * ts0 + p.w_oc * n_oc + p.c_p * q * p.t_in + leak * t_out);

        // T[k+1] − a·T[k] − bw·(W⁺ − W⁻) = free
        let mut row = vec![0.0; COLS * n];
        row[b + C_T] = 1.0;
        row[b + C_WP] = -bw;
        row[b + C_WN] = bw;
        let mut rhs = free;
        if k == 0 {
            rhs += a * req.state.t;
        } else {
            row[b - COLS + C_T] = -a;
        }
        lp.add_eq(row, rhs);

        let band = hd.bounds[k];
        let mut lo = vec![0.0; COLS * n];
        lo[b + C_T] = -1.0;
        lo[b + C_SLO] = -1.0;
        lp.add_ub(lo, -band.t_lo);
        let mut hi = vec![0.0; COLS * n];
        hi[b + C_T] = 1.0;
        hi[b + C_SHI] = -1.0;
        lp.add_ub(hi, band.t_hi);
    }

    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("linearized MPC problem is {:?}", sol.status)));
    }
    let mut x = vec![0.0; VARS_PER_STEP * n];
    let (mut w, mut q) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut slack = 0.0;
    for k in 0..n {
        let v = &sol.x[k * COLS..(k + 1) * COLS];
        let wk = (1000.0 * (v[C_WP] - v[C_WN])).clamp(p.w_min, p.w_max);
        w.push(wk);
        q.push(hd.q_lo[k]);
        let (s_lo, s_hi) = (v[C_SLO].max(0.0), v[C_SHI].max(0.0));
        slack += (s_lo + s_hi) * hd.hours[k];
        x[k * VARS_PER_STEP..(k + 1) * VARS_PER_STEP].copy_from_slice(&[wk.max(0.0), (-wk).max(0.0), hd.q_lo[k], s_lo, s_hi]);
    }
    let ctx = ObjectiveContext::new(hd.hours.clone(), hd.t_out.clone(), p, opts.weights, opts.slack_weight)?;
    Ok(Plan {
        schedule: hd.grid.schedule(w, q)?,
        objective: objective_for_optimizer(&x, &ctx)?,
        slack,
        iterations: sol.iterations,
    })
}
