//! Plant model: air temperature, inertia mass and CO₂ integrated with explicit Euler.
//!
//! Air energy balance:
//!
//! ```text
//! m·C_p·dT/dt = U(T_out − T) + U⋆(T⋆ − T) + W_oc·N + W + C_p·Q·(T_in − T) + C_p·m·R_r·(T_out − T)
//! m⋆C⋆·dT⋆/dt = −U⋆(T⋆ − T)
//! m·dν/dt     = N·Q̃ + Q·(ν_env − ν) + m·R_r·(ν_env − ν)
//! ```
//!
//! with the air mass m re-evaluated from the current temperature every step.
//! Supply air enters at `T_in` and `ν_env`; exhaust leaves at room state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    air_mass, air_mass_unchecked, ComfortSpec, ControlSchedule, ExogenousSeries, MicroclimateState,
    RoomParams, KELVIN_OFFSET,
};

/// Default integration step [s].
pub const DEFAULT_INTEGRATION_STEP: f64 = 60.0;

/// Simulated trajectory on a uniform grid.
///
/// `states` has one more entry than `applied_w`/`applied_q`: entry `i` of the
/// controls acts over `[t[i], t[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<MicroclimateState>,
    pub applied_w: Vec<f64>,
    pub applied_q: Vec<f64>,
}

impl Trajectory {
    /// A trajectory holding only its initial point.
    pub fn starting_at(t0: f64, s0: MicroclimateState) -> Self {
        Self {
            t: vec![t0],
            states: vec![s0],
            applied_w: Vec::new(),
            applied_q: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.applied_w.len()
    }

    pub fn final_state(&self) -> MicroclimateState {
        *self.states.last().expect("trajectory has at least one state")
    }

    pub fn final_time(&self) -> f64 {
        *self.t.last().expect("trajectory has at least one time")
    }

    /// Appends a segment that starts where this one ends.
    pub fn extend(&mut self, next: &Trajectory) -> Result<()> {
        if next.t[0] != self.final_time() || next.states[0] != self.final_state() {
            return Err(Error::domain("trajectory segments are not contiguous"));
        }
        self.t.extend_from_slice(&next.t[1..]);
        self.states.extend_from_slice(&next.states[1..]);
        self.applied_w.extend_from_slice(&next.applied_w);
        self.applied_q.extend_from_slice(&next.applied_q);
        Ok(())
    }

    /// The realized controls as a schedule on the integration grid.
    pub fn applied_schedule(&self) -> Result<ControlSchedule> {
        if self.steps() == 0 {
            return ControlSchedule::new(1.0, Vec::new(), Vec::new()).map(|mut s| {
                s.t0 = self.t[0];
                s
            });
        }
        let dt = self.t[1] - self.t[0];
        ControlSchedule::aligned(self.t[0], dt, dt, self.applied_w.clone(), self.applied_q.clone())
    }
}

/// Time derivatives of (T, T⋆, ν) at a given state and input.
#[inline]
pub(crate) fn derivatives(
    s: &MicroclimateState,
    w: f64,
    q: f64,
    t_out: f64,
    n_oc: f64,
    p: &RoomParams,
    c: &ComfortSpec,
) -> (f64, f64, f64) {
    let m = air_mass_unchecked(p, s.t);
    let heat = p.u * (t_out - s.t)
        + p.u_star * (s.t_star - s.t)
        + p.w_oc * n_oc
        + w
        + p.c_p * q * (p.t_in - s.t)
        + p.c_p * m * p.infiltration * (t_out - s.t);
    let dt_air = heat / (m * p.c_p);
    let dt_star = -p.u_star * (s.t_star - s.t) / p.mc_star;
    let dnu = (n_oc * c.q_co2 + q * (c.nu_env - s.nu) + m * p.infiltration * (c.nu_env - s.nu)) / m;
    (dt_air, dt_star, dnu)
}

#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn advance(
    s: &MicroclimateState,
    w: f64,
    q: f64,
    t_out: f64,
    n_oc: f64,
    p: &RoomParams,
    c: &ComfortSpec,
    dt: f64,
) -> MicroclimateState {
    let (a, b, n) = derivatives(s, w, q, t_out, n_oc, p, c);
    MicroclimateState {
        t: s.t + dt * a,
        t_star: s.t_star + dt * b,
        nu: s.nu + dt * n,
    }
}

/// One explicit Euler step of the plant.
#[allow(clippy::too_many_arguments)]
pub fn step_state(
    s: &MicroclimateState,
    w: f64,
    q: f64,
    t_out: f64,
    n_oc: f64,
    params: &RoomParams,
    comfort: &ComfortSpec,
    dt: f64,
) -> Result<MicroclimateState> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("integration step must be positive, got {dt}")));
    }
    if !(q >= 0.0) {
        return Err(Error::domain(format!("ventilation flow must be non-negative, got {q}")));
    }
    if !(n_oc >= 0.0) {
        return Err(Error::domain(format!("occupancy must be non-negative, got {n_oc}")));
    }
    air_mass(params, s.t)?;
    let next = advance(s, w, q, t_out, n_oc, params, comfort, dt);
    next.validate()?;
    Ok(next)
}

/// Number of integration steps in `duration`, which must be a whole multiple of `dt`.
pub(crate) fn substeps(duration: f64, dt: f64) -> Result<usize> {
    let n = (duration / dt).round();
    if n < 1.0 || (n * dt - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(Error::domain(format!(
            "integration step {dt} s does not divide control step {duration} s"
        )));
    }
    Ok(n as usize)
}

/// Runs the plant through a schedule, holding each control over its step.
pub fn simulate(
    s0: &MicroclimateState,
    schedule: &ControlSchedule,
    exo: &ExogenousSeries,
    params: &RoomParams,
    comfort: &ComfortSpec,
    dt_int: f64,
) -> Result<Trajectory> {
    if !(dt_int > 0.0) {
        return Err(Error::domain(format!("integration step must be positive, got {dt_int}")));
    }
    s0.validate()?;
    if !exo.covers(schedule.t0, schedule.end()) {
        return Err(Error::domain(format!(
            "forecast [{}, {}] s does not cover schedule [{}, {}] s",
            exo.start(),
            exo.end(),
            schedule.t0,
            schedule.end()
        )));
    }
    let counts = (0..schedule.len())
        .map(|k| substeps(schedule.duration_of(k), dt_int))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = counts.iter().sum();

    let mut traj = Trajectory {
        t: Vec::with_capacity(total + 1),
        states: Vec::with_capacity(total + 1),
        applied_w: Vec::with_capacity(total),
        applied_q: Vec::with_capacity(total),
    };
    traj.t.push(schedule.t0);
    traj.states.push(*s0);

    let mut s = *s0;
    let mut i = 0usize;
    for (k, &count) in counts.iter().enumerate() {
        let (w, q) = (schedule.w[k], schedule.q[k]);
        if !(q >= 0.0) {
            return Err(Error::domain(format!("step {k}: negative ventilation flow {q}")));
        }
        for _ in 0..count {
            let now = schedule.t0 + i as f64 * dt_int;
            let (t_out, n_oc) = exo.at(now)?;
            s = advance(&s, w, q, t_out, n_oc, params, comfort, dt_int);
            if !(s.t + KELVIN_OFFSET > 0.0) || !s.t.is_finite() {
                return Err(Error::Numeric(format!(
                    "integration diverged at t = {} s (T = {})",
                    now + dt_int,
                    s.t
                )));
            }
            i += 1;
            traj.t.push(schedule.t0 + i as f64 * dt_int);
            traj.states.push(s);
            traj.applied_w.push(w);
            traj.applied_q.push(q);
        }
    }
    Ok(traj)
}

/// Fixed point of the plant under constant inputs (with T⋆ = T).
pub fn steady_state(
    w: f64,
    q: f64,
    t_out: f64,
    n_oc: f64,
    params: &RoomParams,
    comfort: &ComfortSpec,
) -> Result<MicroclimateState> {
    let p = params;
    let mut t = t_out;
    let mut converged = false;
    for _ in 0..100 {
        let m = air_mass(p, t)?;
        let conductance = p.u + p.c_p * m * p.infiltration + p.c_p * q;
        if !(conductance > 0.0) {
            return Err(Error::domain("steady state needs U + C_p·m·R_r + C_p·Q > 0"));
        }
        let next = (p.u * t_out
            + p.w_oc * n_oc
            + w
            + p.c_p * q * p.t_in
            + p.c_p * m * p.infiltration * t_out)
            / conductance;
        let delta = (next - t).abs();
        t = next;
        if delta <= 1e-9 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric("steady state iteration did not converge in 100 iterations".into()));
    }
    let m = air_mass(p, t)?;
    let dilution = q + m * p.infiltration;
    let source = n_oc * comfort.q_co2;
    let nu = if source == 0.0 {
        comfort.nu_env
    } else if dilution > 0.0 {
        comfort.nu_env + source / dilution
    } else {
        return Err(Error::domain("CO2 has no steady state without ventilation or infiltration"));
    };
    Ok(MicroclimateState::new(t, t, nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PPM;

    fn tc2() -> RoomParams {
        RoomParams {
            u: 15.0,
            u_star: 200.0,
            mc_star: 20e6,
            volume: 105.0,
            w_min: -2000.0,
            w_max: 950.0,
            q_max: 0.0,
            s_p: None,
            ..RoomParams::default()
        }
        .with_infiltration_per_hour(0.2)
    }

    #[test]
    fn neutral_inputs_leave_state_unchanged() {
        let s = MicroclimateState::from_ppm(21.0, 21.0, 400.0);
        let next = step_state(&s, 0.0, 0.0, 21.0, 0.0, &RoomParams::default(), &ComfortSpec::default(), 60.0).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn balanced_heating_holds_temperature() {
        let s = MicroclimateState::from_ppm(21.0, 21.0, 400.0);
        let (p, c) = (tc2(), ComfortSpec::default());
        for dt in [1.0, 60.0, 600.0] {
            let next = step_state(&s, 788.7, 0.0, -15.0, 0.0, &p, &c, dt).unwrap();
            assert!((next.t - 21.0).abs() <= 1e-3, "dt={dt}: T={}", next.t);
            assert!((next.t_star - 21.0).abs() <= 1e-3);
        }
    }

    #[test]
    fn co2_converges_to_source_over_flow() {
        let p = RoomParams {
            infiltration: 0.0,
            ..RoomParams::default()
        };
        let c = ComfortSpec::default();
        let mut s = MicroclimateState::from_ppm(21.0, 21.0, 400.0);
        for _ in 0..30_000 {
            s = step_state(&s, 0.0, 0.02, 21.0, 1.0, &p, &c, 60.0).unwrap();
        }
        assert!((s.co2_ppm() - 1000.0).abs() < 1e-3, "{}", s.co2_ppm());
    }

    #[test]
    fn step_state_rejects_bad_arguments() {
        let s = MicroclimateState::from_ppm(21.0, 21.0, 400.0);
        let (p, c) = (RoomParams::default(), ComfortSpec::default());
        assert!(step_state(&s, 0.0, 0.0, 0.0, 0.0, &p, &c, 0.0).is_err());
        assert!(step_state(&s, 0.0, -0.1, 0.0, 0.0, &p, &c, 60.0).is_err());
    }

    #[test]
    fn warm_inertia_heats_air() {
        let s = MicroclimateState::from_ppm(20.0, 25.0, 400.0);
        let p = RoomParams::default();
        let next = step_state(&s, 0.0, 0.0, 20.0, 0.0, &p, &ComfortSpec::default(), 60.0).unwrap();
        assert!(next.t > s.t);
        assert!(next.t_star < s.t_star);
    }

    #[test]
    fn flat_trajectory_under_neutral_schedule() {
        let (p, c) = (RoomParams::default(), ComfortSpec::default());
        let s0 = MicroclimateState::from_ppm(18.0, 18.0, 400.0);
        let exo = ExogenousSeries::constant(0.0, 86_400.0, 18.0, 0.0).unwrap();
        let sched = ControlSchedule::new(3600.0, vec![0.0; 24], vec![0.0; 24]).unwrap();
        let traj = simulate(&s0, &sched, &exo, &p, &c, 60.0).unwrap();
        assert_eq!(traj.states.len(), 24 * 60 + 1);
        assert_eq!(traj.steps(), 24 * 60);
        assert!(traj.states.iter().all(|s| *s == s0));
        assert_eq!(traj.final_time(), 86_400.0);
    }

    #[test]
    fn simulate_rejects_short_forecast() {
        let (p, c) = (RoomParams::default(), ComfortSpec::default());
        let s0 = MicroclimateState::from_ppm(21.0, 21.0, 400.0);
        let exo = ExogenousSeries::constant(0.0, 12.0 * 3600.0, 0.0, 0.0).unwrap();
        let sched = ControlSchedule::new(3600.0, vec![0.0; 24], vec![0.0; 24]).unwrap();
        assert!(matches!(simulate(&s0, &sched, &exo, &p, &c, 60.0), Err(Error::Domain(_))));
    }

    #[test]
    fn simulate_requires_dividing_step() {
        let (p, c) = (RoomParams::default(), ComfortSpec::default());
        let s0 = MicroclimateState::from_ppm(21.0, 21.0, 400.0);
        let exo = ExogenousSeries::constant(0.0, 7200.0, 0.0, 0.0).unwrap();
        let sched = ControlSchedule::new(3600.0, vec![0.0], vec![0.0]).unwrap();
        assert!(simulate(&s0, &sched, &exo, &p, &c, 70.0).is_err());
    }

    #[test]
    fn steady_state_examples() {
        let c = ComfortSpec::default();
        let p = RoomParams::default();
        let s = steady_state(0.0, 0.0, 7.5, 0.0, &p, &c).unwrap();
        assert!((s.t - 7.5).abs() < 1e-9 && s.t_star == s.t && s.nu == c.nu_env);

        let s = steady_state(788.7, 0.0, -15.0, 0.0, &tc2(), &c).unwrap();
        assert!((s.t - 21.0).abs() < 2e-3, "{}", s.t);

        let s = steady_state(0.0, 0.5, -15.0, 25.0, &RoomParams { infiltration: 0.0, ..p }, &c).unwrap();
        assert!((s.nu / PPM - 1000.0).abs() < 1e-9);
    }
}
