//! Sequential linear programming with a box trust region and an elastic
//! (exact-penalty) merit function.
//!
//! Each iteration linearizes the objective and constraints at the current
//! point and solves
//!
//! ```text
//! minimize   ∇f·d + σ·Σe
//! subject to g + J_g d <= e,  -e_eq <= h + J_h d <= e_eq,  e >= 0,
//!            lb <= x + d <= ub,  |d_j| <= δ·scale_j
//! ```
//!
//! with [`solve_lp`]. The step is accepted when the merit `f + σ·viol`
//! decreases by at least a tenth of the decrease the linear model predicted.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};

/// Function values (and optionally first derivatives) at one point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NlpEval {
    pub f: f64,
    /// Inequality constraint values, feasible when `<= 0`.
    pub g: Vec<f64>,
    /// Equality constraint values, feasible when `== 0`.
    pub h: Vec<f64>,
    /// `∂f/∂x`; empty when derivatives were not requested.
    pub grad: Vec<f64>,
    /// Dense Jacobian rows of `g`.
    pub jac_g: Vec<Vec<f64>>,
    /// Dense Jacobian rows of `h`.
    pub jac_h: Vec<Vec<f64>>,
}

impl NlpEval {
    /// Sum of constraint violations.
    pub fn violation(&self) -> f64 {
        self.g.iter().map(|&g| g.max(0.0)).sum::<f64>() + self.h.iter().map(|h| h.abs()).sum::<f64>()
    }
}

/// A smooth nonlinear program over box-bounded variables.
pub trait NlpProblem {
    fn num_vars(&self) -> usize;

    fn evaluate(&self, x: &[f64], with_derivatives: bool) -> Result<NlpEval>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlpOptions {
    pub max_iterations: usize,
    /// Initial trust radius as a fraction of each variable's scale.
    pub initial_radius: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    pub shrink: f64,
    pub grow: f64,
    /// Steps with actual/predicted merit decrease below this are rejected.
    pub accept_ratio: f64,
    pub grow_ratio: f64,
    /// Stop once the predicted decrease is below `tol·(1 + |f|)`.
    pub stationarity_tol: f64,
    pub feasibility_tol: f64,
    pub initial_penalty: f64,
    /// Per-variable step scale. Defaults to the bound range, or
    /// `max(1, |x0_j|)` for variables with an infinite bound.
    pub scale: Option<Vec<f64>>,
}

impl Default for SlpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_radius: 0.1,
            min_radius: 1e-8,
            max_radius: 1.0,
            shrink: 0.5,
            grow: 1.5,
            accept_ratio: 0.1,
            grow_ratio: 0.75,
            stationarity_tol: 1e-6,
            feasibility_tol: 1e-6,
            initial_penalty: 1.0,
            scale: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlpStatus {
    /// Feasible and stationary for the linearized model.
    Converged,
    /// Stationary, but constraints remain violated.
    Infeasible,
    /// Iteration cap reached; the point is the last accepted iterate.
    IterationLimit,
    /// The trust region collapsed to its floor without an acceptable step.
    Stalled,
}

/// Merit value of one accepted iterate, tagged by penalty epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeritRecord {
    pub epoch: usize,
    pub penalty: f64,
    pub merit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub violation: f64,
    pub status: SlpStatus,
    pub iterations: usize,
    /// Predicted merit decrease of the last linearized step.
    pub predicted_decrease: f64,
    pub penalty: f64,
    pub radius: f64,
    pub merit_history: Vec<MeritRecord>,
}

impl SlpSolution {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.violation <= tol
    }
}

fn check_eval(ev: &NlpEval, n: usize, with_derivatives: bool) -> Result<()> {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !ev.f.is_finite() || !finite(&ev.g) || !finite(&ev.h) {
        return Err(Error::Numeric("evaluator returned a non-finite value".into()));
    }
    if with_derivatives {
        let rows_ok = |rows: &[Vec<f64>], m: usize| rows.len() == m && rows.iter().all(|r| r.len() == n && finite(r));
        if ev.grad.len() != n || !finite(&ev.grad) || !rows_ok(&ev.jac_g, ev.g.len()) || !rows_ok(&ev.jac_h, ev.h.len()) {
            return Err(Error::Numeric("evaluator derivatives have the wrong shape or are not finite".into()));
        }
    }
    Ok(())
}

struct StepResult {
    d: Vec<f64>,
    /// Linear model value `∇f·d + σ·Σe` (without the constant `f`).
    model: f64,
    /// Largest multiplier estimate of the linearized constraints.
    max_multiplier: f64,
    elastic: f64,
}

fn linearized_step(ev: &NlpEval, x: &[f64], lb: &[f64], ub: &[f64], scale: &[f64], radius: f64, sigma: f64) -> Result<StepResult> {
    let n = x.len();
    let mg = ev.g.len();
    let mh = ev.h.len();
    let nv = n + mg + 2 * mh;
    let mut c = Vec::with_capacity(nv);
    c.extend(ev.grad.iter().zip(scale).map(|(g, s)| g * s));
    c.extend(std::iter::repeat_n(sigma, mg + 2 * mh));
    let mut lp = LinearProgram::new(c);
    for j in 0..n {
        let lo = ((lb[j] - x[j]) / scale[j]).max(-radius);
        let hi = ((ub[j] - x[j]) / scale[j]).min(radius);
        lp.lb[j] = lo.min(0.0);
        lp.ub[j] = hi.max(0.0);
    }
    for i in 0..mg {
        let mut row = vec![0.0; nv];
        for j in 0..n {
            row[j] = ev.jac_g[i][j] * scale[j];
        }
        row[n + i] = -1.0;
        lp.add_ub(row, -ev.g[i]);
    }
    for i in 0..mh {
        let mut row = vec![0.0; nv];
        for j in 0..n {
            row[j] = ev.jac_h[i][j] * scale[j];
        }
        row[n + mg + 2 * i] = -1.0;
        row[n + mg + 2 * i + 1] = 1.0;
        lp.add_eq(row, -ev.h[i]);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!("trust-region subproblem is {:?}", sol.status)));
    }
    let max_multiplier = sol
        .duals_ub
        .iter()
        .map(|d| -d)
        .chain(sol.duals_eq.iter().map(|d| d.abs()))
        .fold(0.0f64, f64::max);
    Ok(StepResult {
        d: (0..n).map(|j| sol.x[j] * scale[j]).collect(),
        model: sol.objective,
        max_multiplier,
        elastic: sol.x[n..].iter().sum(),
    })
}

/// Minimizes `problem` from `x0` within `[lb, ub]`.
pub fn solve_slp(problem: &dyn NlpProblem, x0: &[f64], lb: &[f64], ub: &[f64], opts: &SlpOptions) -> Result<SlpSolution> {
    let n = problem.num_vars();
    if x0.len() != n || lb.len() != n || ub.len() != n {
        return Err(Error::domain(format!(
            "dimension mismatch: {n} variables, x0 {}, lb {}, ub {}",
            x0.len(),
            lb.len(),
            ub.len()
        )));
    }
    for j in 0..n {
        if !(lb[j] <= ub[j]) || !x0[j].is_finite() {
            return Err(Error::domain(format!("variable {j}: invalid bounds or start value")));
        }
        let tol = 1e-9 * (1.0 + x0[j].abs());
        if x0[j] < lb[j] - tol || x0[j] > ub[j] + tol {
            return Err(Error::domain(format!("x0[{j}] = {} outside [{}, {}]", x0[j], lb[j], ub[j])));
        }
    }
    let scale: Vec<f64> = match &opts.scale {
        Some(s) if s.len() == n && s.iter().all(|&v| v > 0.0 && v.is_finite()) => s.clone(),
        Some(_) => return Err(Error::domain("scale must hold one positive finite value per variable")),
        None => (0..n)
            .map(|j| {
                let r = ub[j] - lb[j];
                if r.is_finite() && r > 0.0 {
                    r
                } else {
                    x0[j].abs().max(1.0)
                }
            })
            .collect(),
    };

    let mut x: Vec<f64> = (0..n).map(|j| x0[j].clamp(lb[j], ub[j])).collect();
    let mut ev = problem.evaluate(&x, true)?;
    check_eval(&ev, n, true)?;
    let mut sigma = opts.initial_penalty.max(f64::MIN_POSITIVE);
    let mut radius = opts.initial_radius;
    let mut epoch = 0usize;
    let mut history = vec![MeritRecord {
        epoch,
        penalty: sigma,
        merit: ev.f + sigma * ev.violation(),
    }];
    let mut status = SlpStatus::IterationLimit;
    let mut pred = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut step = linearized_step(&ev, &x, lb, ub, &scale, radius, sigma)?;
        // raise the penalty until it dominates the multipliers and the
        // linearization is satisfied wherever the trust region allows it
        for _ in 0..12 {
            let new_sigma = if step.elastic > opts.feasibility_tol && step.max_multiplier >= sigma * (1.0 - 1e-9) {
                sigma * 10.0
            } else if 1.5 * step.max_multiplier > sigma * (1.0 + 1e-9) {
                1.5 * step.max_multiplier
            } else {
                break;
            };
            if new_sigma > 1e15 {
                break;
            }
            sigma = new_sigma;
            epoch += 1;
            history.push(MeritRecord {
                epoch,
                penalty: sigma,
                merit: ev.f + sigma * ev.violation(),
            });
            step = linearized_step(&ev, &x, lb, ub, &scale, radius, sigma)?;
        }

        let viol = ev.violation();
        let merit = ev.f + sigma * viol;
        pred = sigma * viol - step.model;
        // a tiny predicted decrease still leaves room for a step that
        // removes a residual violation the linearization can absorb
        let restorable = viol > opts.feasibility_tol && step.elastic <= opts.feasibility_tol;
        if pred <= opts.stationarity_tol * (1.0 + ev.f.abs()) && !(restorable && pred > 0.0) {
            status = if viol <= opts.feasibility_tol {
                SlpStatus::Converged
            } else {
                SlpStatus::Infeasible
            };
            break;
        }

        let trial: Vec<f64> = (0..n).map(|j| (x[j] + step.d[j]).clamp(lb[j], ub[j])).collect();
        let trial_ev = problem.evaluate(&trial, true)?;
        check_eval(&trial_ev, n, true)?;
        let trial_merit = trial_ev.f + sigma * trial_ev.violation();
        let ratio = (merit - trial_merit) / pred;
        if ratio < opts.accept_ratio {
            if radius <= opts.min_radius {
                status = SlpStatus::Stalled;
                break;
            }
            radius = (radius * opts.shrink).max(opts.min_radius);
            continue;
        }
        x = trial;
        ev = trial_ev;
        history.push(MeritRecord {
            epoch,
            penalty: sigma,
            merit: trial_merit,
        });
        if ratio > opts.grow_ratio {
            radius = (radius * opts.grow).min(opts.max_radius);
        }
    }

    let violation = ev.violation();
    match status {
        SlpStatus::Converged => debug!("slp converged after {iterations} iterations, f = {}", ev.f),
        other => warn!("slp stopped with {other:?} after {iterations} iterations (violation {violation:.3e})"),
    }
    if status == SlpStatus::Stalled && violation > opts.feasibility_tol {
        status = SlpStatus::Infeasible;
    }
    Ok(SlpSolution {
        x,
        objective: ev.f,
        violation,
        status,
        iterations,
        predicted_decrease: pred,
        penalty: sigma,
        radius,
        merit_history: history,
    })
}

/// Runs [`solve_slp`] from each start and keeps the best result.
///
/// Feasible results beat infeasible ones, then lower objective wins; exact
/// ties keep the earliest start. Returns the winning start's index.
pub fn solve_multistart(
    problem: &dyn NlpProblem,
    starts: &[Vec<f64>],
    lb: &[f64],
    ub: &[f64],
    opts: &SlpOptions,
) -> Result<(SlpSolution, usize)> {
    let mut best: Option<(SlpSolution, usize)> = None;
    for (k, x0) in starts.iter().enumerate() {
        let sol = solve_slp(problem, x0, lb, ub, opts)?;
        let better = match &best {
            None => true,
            Some((b, _)) => {
                let (fs, fb) = (sol.is_feasible(opts.feasibility_tol), b.is_feasible(opts.feasibility_tol));
                (fs && !fb) || (fs == fb && (sol.objective < b.objective || (!fs && sol.violation < b.violation)))
            }
        };
        if better {
            best = Some((sol, k));
        }
    }
    best.ok_or_else(|| Error::domain("no start points given"))
}

/// Worst relative discrepancy between analytic first derivatives and central
/// differences with per-variable steps `h`.
///
/// Each entry is compared relative to the largest analytic entry of its row
/// (objective gradient or one constraint's Jacobian row), floored at 1e-12.
pub fn finite_diff_check(problem: &dyn NlpProblem, x: &[f64], h: &[f64]) -> Result<f64> {
    let n = problem.num_vars();
    if x.len() != n || h.len() != n || h.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("finite_diff_check needs one positive step per variable"));
    }
    let base = problem.evaluate(x, true)?;
    check_eval(&base, n, true)?;
    let mut rows: Vec<&[f64]> = vec![&base.grad];
    rows.extend(base.jac_g.iter().map(|r| r.as_slice()));
    rows.extend(base.jac_h.iter().map(|r| r.as_slice()));
    let row_scale: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12))
        .collect();

    let values = |ev: &NlpEval| -> Vec<f64> {
        let mut v = vec![ev.f];
        v.extend(&ev.g);
        v.extend(&ev.h);
        v
    };
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h[j];
        let plus = values(&problem.evaluate(&xp, false)?);
        xp[j] = x[j] - h[j];
        let minus = values(&problem.evaluate(&xp, false)?);
        xp[j] = x[j];
        for (i, row) in rows.iter().enumerate() {
            let fd = (plus[i] - minus[i]) / (2.0 * h[j]);
            let err = (fd - row[j]).abs() / row_scale[i].max(fd.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
