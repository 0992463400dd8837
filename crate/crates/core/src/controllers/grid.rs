use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ControlSchedule;

/// Control-step layout of one plan: a possibly shorter first step that ends on
/// the clock grid, then uniform steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepGrid {
    pub t0: f64,
    pub first_step: f64,
    pub step: f64,
    pub steps: usize,
}

impl StepGrid {
    pub fn new(t0: f64, first_step: f64, step: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::domain("horizon must contain at least one control step"));
        }
        if !(step > 0.0) || !(first_step > 0.0 && first_step <= step) || !t0.is_finite() {
            return Err(Error::domain(format!(
                "invalid step grid: first step {first_step} s, step {step} s"
            )));
        }
        Ok(Self {
            t0,
            first_step,
            step,
            steps,
        })
    }

    /// Uniform grid starting at `t0`.
    pub fn uniform(t0: f64, step: f64, steps: usize) -> Result<Self> {
        Self::new(t0, step, step, steps)
    }

    /// Grid from `now` whose boundaries fall on `origin + j·step`, running to
    /// `end` (which must itself be on the grid) or for at most `max_steps` steps.
    pub fn clock_aligned(now: f64, origin: f64, step: f64, end: f64, max_steps: Option<usize>) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::domain("control step must be positive"));
        }
        if !(end > now) {
            return Err(Error::domain(format!("nothing left to plan: now {now} s, end {end} s")));
        }
        let end_rel = (end - origin) / step;
        if (end_rel - end_rel.round()).abs() > 1e-9 {
            return Err(Error::domain(format!("horizon end {end} s is not on the {step} s grid")));
        }
        let rel = (now - origin) / step;
        let next = origin + ((rel + 1e-9).floor() + 1.0) * step;
        let first = next.min(end) - now;
        let rest = ((end - now - first) / step).round().max(0.0) as usize;
        let mut steps = 1 + rest;
        if let Some(cap) = max_steps {
            steps = steps.min(cap);
        }
        Self::new(now, first, step, steps)
    }

    pub fn duration_of(&self, k: usize) -> f64 {
        if k == 0 {
            self.first_step
        } else {
            self.step
        }
    }

    pub fn start_of(&self, k: usize) -> f64 {
        if k == 0 {
            self.t0
        } else {
            self.t0 + self.first_step + (k - 1) as f64 * self.step
        }
    }

    pub fn end(&self) -> f64 {
        self.start_of(self.steps)
    }

    pub fn schedule(&self, w: Vec<f64>, q: Vec<f64>) -> Result<ControlSchedule> {
        if w.len() != self.steps {
            return Err(Error::domain("schedule length does not match the grid"));
        }
        ControlSchedule::aligned(self.t0, self.step, self.first_step, w, q)
    }
}
