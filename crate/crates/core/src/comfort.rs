//! Comfort bands, the minimum-ventilation law and the temperature penalty.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{ComfortSpec, ExogenousSeries};

/// Temperature band and ventilation floor that apply for a given occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortBounds {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Minimum ventilation flow [kg/s].
    pub q_lo: f64,
}

impl ComfortBounds {
    /// Intersection of two bands; the ventilation floor is the larger one.
    pub fn intersect(&self, other: &ComfortBounds) -> ComfortBounds {
        ComfortBounds {
            t_lo: self.t_lo.max(other.t_lo),
            t_hi: self.t_hi.min(other.t_hi),
            q_lo: self.q_lo.max(other.q_lo),
        }
    }

    /// Distance of `t` outside the band, zero inside.
    pub fn excursion(&self, t: f64) -> f64 {
        (self.t_lo - t).max(0.0) + (t - self.t_hi).max(0.0)
    }
}

/// Supply flow keeping steady-state CO₂ at `nu_max`, ignoring infiltration.
///
/// `N·Q̃ / (ν_max − ν_env)`: the positive form of the mass balance, so the
/// result is a lower bound on the flow actually needed once infiltration helps.
pub fn min_ventilation(n_oc: f64, comfort: &ComfortSpec) -> f64 {
    if n_oc <= 0.0 {
        return 0.0;
    }
    n_oc * comfort.q_co2 / (comfort.nu_max - comfort.nu_env)
}

pub fn comfort_bounds(n_oc: f64, comfort: &ComfortSpec) -> ComfortBounds {
    let (t_lo, t_hi) = if n_oc > 0.0 {
        (comfort.t_comf - comfort.band, comfort.t_comf + comfort.band)
    } else {
        (comfort.t_lo_vacant, comfort.t_hi_vacant)
    };
    ComfortBounds {
        t_lo,
        t_hi,
        q_lo: min_ventilation(n_oc, comfort),
    }
}

/// Time-integrated excursion outside the occupancy-dependent band [K·h].
///
/// Left-rectangle rule on the trajectory grid: the state at `t[i]` is charged
/// for `[t[i], t[i + 1])` against the band holding at `t[i]`.
pub fn temperature_penalty(traj: &Trajectory, exo: &ExogenousSeries, comfort: &ComfortSpec) -> Result<f64> {
    if traj.t.len() != traj.states.len() {
        return Err(Error::domain("trajectory time and state lengths differ"));
    }
    if traj.t.len() < 2 {
        return Ok(0.0);
    }
    if !exo.covers(traj.t[0], traj.final_time()) {
        return Err(Error::domain(format!(
            "forecast [{}, {}] s not aligned with trajectory [{}, {}] s",
            exo.start(),
            exo.end(),
            traj.t[0],
            traj.final_time()
        )));
    }
    let mut kelvin_seconds = 0.0;
    for i in 0..traj.t.len() - 1 {
        let (_, n_oc) = exo.at(traj.t[i])?;
        let bounds = comfort_bounds(n_oc, comfort);
        kelvin_seconds += bounds.excursion(traj.states[i].t) * (traj.t[i + 1] - traj.t[i]);
    }
    Ok(kelvin_seconds / 3600.0)
}

/// Highest CO₂ level reached along a trajectory [ppm].
pub fn max_co2_ppm(traj: &Trajectory) -> f64 {
    traj.states.iter().map(|s| s.co2_ppm()).fold(f64::NEG_INFINITY, f64::max)
}
