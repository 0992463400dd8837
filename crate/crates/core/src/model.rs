//! Domain types shared by the simulator, the controllers and the harness.
//!
//! Units: everything is SI (s, W, J, kg, mass fraction) except temperatures,
//! which stay in °C because the model only uses differences and the affine
//! conversion to kelvin inside [`air_mass`]. The infiltration rate is given
//! per hour in scenario files and converted to per-second exactly once, in
//! [`RoomParams::with_infiltration_per_hour`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset between °C and K.
pub const KELVIN_OFFSET: f64 = 273.15;
/// Mass fraction corresponding to one part per million.
pub const PPM: f64 = 1e-6;

/// Plant state: air temperature, inertia-mass temperature and CO₂ mass fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroclimateState {
    /// Indoor air temperature [°C].
    pub t: f64,
    /// Effective temperature of the inertia mass [°C].
    pub t_star: f64,
    /// CO₂ mass fraction [-].
    pub nu: f64,
}

impl MicroclimateState {
    pub fn new(t: f64, t_star: f64, nu: f64) -> Self {
        Self { t, t_star, nu }
    }

    /// Convenience constructor taking the CO₂ level in (mass) ppm.
    pub fn from_ppm(t: f64, t_star: f64, co2_ppm: f64) -> Self {
        Self::new(t, t_star, co2_ppm * PPM)
    }

    pub fn co2_ppm(&self) -> f64 {
        self.nu / PPM
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || !self.t_star.is_finite() || !self.nu.is_finite() {
            return Err(Error::domain(format!("non-finite state {self:?}")));
        }
        if self.nu < 0.0 {
            return Err(Error::domain(format!("negative CO2 fraction {}", self.nu)));
        }
        Ok(())
    }
}

/// Physical and equipment constants of one zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomParams {
    /// Envelope heat transfer coefficient [W/K].
    pub u: f64,
    /// Inertia-to-air heat transfer coefficient [W/K].
    pub u_star: f64,
    /// Heat capacity of the inertia mass, m⋆C⋆ [J/K].
    pub mc_star: f64,
    /// Room volume [m³].
    pub volume: f64,
    /// Infiltration air-change rate [1/s].
    pub infiltration: f64,
    /// Maximum cooling power, as a non-positive number [W].
    pub w_min: f64,
    /// Maximum heating power [W].
    pub w_max: f64,
    /// Sensible heat released per occupant [W].
    pub w_oc: f64,
    /// Maximum ventilation mass flow [kg/s]; zero without a ventilation system.
    pub q_max: f64,
    /// Temperature of the supplied ventilation air [°C].
    pub t_in: f64,
    /// Cross-section of the supply pipe [m²]; absent without a ventilation system.
    pub s_p: Option<f64>,
    /// Specific heat of air [J/(kg·K)].
    pub c_p: f64,
    /// Air density used by the fan-power term [kg/m³].
    pub rho: f64,
    /// Atmospheric pressure [Pa].
    pub p_atm: f64,
    /// Specific gas constant of air [J/(kg·K)].
    pub r_gas: f64,
}

impl Default for RoomParams {
    fn default() -> Self {
        Self {
            u: 55.0,
            u_star: 200.0,
            mc_star: 107e6,
            volume: 540.0,
            infiltration: 0.1 / 3600.0,
            w_min: -15_000.0,
            w_max: 5_000.0,
            w_oc: 120.0,
            q_max: 0.55,
            t_in: 21.0,
            s_p: Some(0.05),
            c_p: 1000.0,
            rho: 1.2,
            p_atm: 1e5,
            r_gas: 287.03,
        }
    }
}

impl RoomParams {
    /// Sets the infiltration rate from an air-change rate given per hour.
    pub fn with_infiltration_per_hour(mut self, per_hour: f64) -> Self {
        self.infiltration = per_hour / 3600.0;
        self
    }

    pub fn infiltration_per_hour(&self) -> f64 {
        self.infiltration * 3600.0
    }

    /// Fan-power coefficient α = (2·S_p·ρ)⁻², if a supply pipe exists.
    pub fn fan_coefficient(&self) -> Option<f64> {
        self.s_p.map(|s_p| (2.0 * s_p * self.rho).powi(-2))
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.u,
            self.u_star,
            self.mc_star,
            self.volume,
            self.infiltration,
            self.w_min,
            self.w_max,
            self.w_oc,
            self.q_max,
            self.t_in,
            self.c_p,
            self.rho,
            self.p_atm,
            self.r_gas,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("room parameters must be finite"));
        }
        if self.volume <= 0.0 {
            return Err(Error::domain(format!("volume must be positive, got {}", self.volume)));
        }
        if self.u <= 0.0 || self.u_star <= 0.0 || self.mc_star <= 0.0 {
            return Err(Error::domain("U, U* and m*C* must be positive"));
        }
        if self.infiltration < 0.0 {
            return Err(Error::domain("infiltration rate must be non-negative"));
        }
        if !(self.w_min <= 0.0 && 0.0 <= self.w_max) {
            return Err(Error::domain(format!(
                "power bounds must satisfy W_min <= 0 <= W_max, got [{}, {}]",
                self.w_min, self.w_max
            )));
        }
        if self.q_max < 0.0 {
            return Err(Error::domain("Q_max must be non-negative"));
        }
        if self.q_max > 0.0 && !matches!(self.s_p, Some(s) if s > 0.0 && s.is_finite()) {
            return Err(Error::domain("a ventilation system (Q_max > 0) needs a positive pipe section S_p"));
        }
        if self.c_p <= 0.0 || self.rho <= 0.0 || self.p_atm <= 0.0 || self.r_gas <= 0.0 {
            return Err(Error::domain("air constants must be positive"));
        }
        Ok(())
    }
}

/// Mass of the room air from the ideal gas law, m = P·V / (R·T).
pub fn air_mass(params: &RoomParams, t_celsius: f64) -> Result<f64> {
    let kelvin = t_celsius + KELVIN_OFFSET;
    if !(kelvin > 0.0) || !kelvin.is_finite() {
        return Err(Error::domain(format!("non-physical temperature {t_celsius} °C")));
    }
    Ok(air_mass_unchecked(params, t_celsius))
}

#[inline]
pub(crate) fn air_mass_unchecked(params: &RoomParams, t_celsius: f64) -> f64 {
    params.p_atm * params.volume / (params.r_gas * (t_celsius + KELVIN_OFFSET))
}

/// Comfort targets and CO₂ constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComfortSpec {
    /// Comfort setpoint [°C].
    pub t_comf: f64,
    /// Half-width of the occupied band [K].
    pub band: f64,
    pub t_lo_vacant: f64,
    pub t_hi_vacant: f64,
    /// CO₂ comfort cap [mass fraction].
    pub nu_max: f64,
    /// CO₂ level of outdoor and supply air [mass fraction].
    pub nu_env: f64,
    /// CO₂ exhaled per person [kg/s].
    pub q_co2: f64,
}

impl Default for ComfortSpec {
    fn default() -> Self {
        Self {
            t_comf: 22.0,
            band: 1.0,
            t_lo_vacant: 15.0,
            t_hi_vacant: 25.0,
            nu_max: 1000.0 * PPM,
            nu_env: 400.0 * PPM,
            q_co2: 1.2e-5,
        }
    }
}

impl ComfortSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.band > 0.0) {
            return Err(Error::domain("comfort band must be positive"));
        }
        if self.t_lo_vacant > self.t_comf - self.band || self.t_comf + self.band > self.t_hi_vacant {
            return Err(Error::domain("vacant bounds must contain the occupied comfort band"));
        }
        if !(self.nu_env >= 0.0 && self.nu_env < self.nu_max) {
            return Err(Error::domain("need 0 <= nu_env < nu_max"));
        }
        if !(self.q_co2 >= 0.0) {
            return Err(Error::domain("CO2 source rate must be non-negative"));
        }
        Ok(())
    }
}

/// Weather label of a scenario; only the on/off baseline reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Cold,
    Mild,
    Hot,
}

impl DayType {
    pub const ALL: [DayType; 3] = [DayType::Cold, DayType::Mild, DayType::Hot];

    pub fn as_str(&self) -> &'static str {
        match self {
            DayType::Cold => "cold",
            DayType::Mild => "mild",
            DayType::Hot => "hot",
        }
    }
}

impl std::str::FromStr for DayType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cold" => Ok(DayType::Cold),
            "mild" | "normal" => Ok(DayType::Mild),
            "hot" => Ok(DayType::Hot),
            other => Err(Error::Usage(format!("unknown day type '{other}' (cold|mild|hot)"))),
        }
    }
}

impl std::fmt::Display for DayType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Forecast of outside temperature and occupancy on a time grid.
///
/// Between grid points the value of the left point holds. Occupancy is a real
/// number because forecast perturbations scale it by a continuous factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSeries {
    t: Vec<f64>,
    t_out: Vec<f64>,
    n_oc: Vec<f64>,
}

impl ExogenousSeries {
    pub fn new(t: Vec<f64>, t_out: Vec<f64>, n_oc: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::data("exogenous series is empty"));
        }
        if t.len() != t_out.len() || t.len() != n_oc.len() {
            return Err(Error::data(format!(
                "series lengths differ: t={}, T_out={}, N_oc={}",
                t.len(),
                t_out.len(),
                n_oc.len()
            )));
        }
        for (i, w) in t.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::data(format!(
                    "time grid not strictly increasing at index {}: {} -> {}",
                    i + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        for (i, (&temp, &n)) in t_out.iter().zip(&n_oc).enumerate() {
            if !temp.is_finite() || !n.is_finite() || !t[i].is_finite() {
                return Err(Error::data(format!("non-finite value at index {i}")));
            }
            if n < 0.0 {
                return Err(Error::data(format!("negative occupancy {n} at index {i}")));
            }
        }
        Ok(Self { t, t_out, n_oc })
    }

    /// A series holding the same values over `[start, end]`.
    pub fn constant(start: f64, end: f64, t_out: f64, n_oc: f64) -> Result<Self> {
        Self::new(vec![start, end], vec![t_out; 2], vec![n_oc; 2])
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn outside_temperatures(&self) -> &[f64] {
        &self.t_out
    }

    pub fn occupancy(&self) -> &[f64] {
        &self.n_oc
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn covers(&self, from: f64, to: f64) -> bool {
        from >= self.start() && to <= self.end()
    }

    fn index_at(&self, time: f64) -> Result<usize> {
        if !(time >= self.start() && time <= self.end()) {
            return Err(Error::domain(format!(
                "time {time} s outside forecast span [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        Ok(self.t.partition_point(|&x| x <= time) - 1)
    }

    /// Outside temperature and occupancy holding at `time`.
    pub fn at(&self, time: f64) -> Result<(f64, f64)> {
        let i = self.index_at(time)?;
        Ok((self.t_out[i], self.n_oc[i]))
    }

    /// Largest occupancy over `[from, to)`, or at `from` for an empty interval.
    pub fn max_occupancy(&self, from: f64, to: f64) -> Result<f64> {
        let first = self.index_at(from)?;
        let mut n = self.n_oc[first];
        for i in first + 1..self.t.len() {
            if self.t[i] >= to {
                break;
            }
            n = n.max(self.n_oc[i]);
        }
        Ok(n)
    }

    /// Restriction to `[from, to]`, with a grid point inserted at `from`.
    pub fn window(&self, from: f64, to: f64) -> Result<Self> {
        if !(to >= from) || !self.covers(from, to) {
            return Err(Error::domain(format!(
                "window [{from}, {to}] not covered by forecast [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        let (t_out0, n0) = self.at(from)?;
        let mut t = vec![from];
        let mut t_out = vec![t_out0];
        let mut n_oc = vec![n0];
        for i in 0..self.t.len() {
            if self.t[i] > from && self.t[i] <= to {
                t.push(self.t[i]);
                t_out.push(self.t_out[i]);
                n_oc.push(self.n_oc[i]);
            }
        }
        if t.len() == 1 && to > from {
            t.push(to);
            t_out.push(t_out0);
            n_oc.push(n0);
        }
        Self::new(t, t_out, n_oc)
    }

    /// Inserts a grid point at `time` carrying the value already holding
    /// there; a no-op if `time` is on the grid or outside the span.
    pub fn split_at(&mut self, time: f64) {
        if !(time > self.start() && time < self.end()) {
            return;
        }
        let i = self.t.partition_point(|&x| x < time);
        if self.t[i] == time {
            return;
        }
        self.t.insert(i, time);
        self.t_out.insert(i, self.t_out[i - 1]);
        self.n_oc.insert(i, self.n_oc[i - 1]);
    }

    /// Overwrites the values at the first grid point.
    pub fn set_first(&mut self, t_out: f64, n_oc: f64) {
        self.t_out[0] = t_out;
        self.n_oc[0] = n_oc.max(0.0);
    }

    /// Rebuilds the series with values mapped by `f(t, T_out, N_oc)`.
    pub fn map_values(&self, mut f: impl FnMut(f64, f64, f64) -> (f64, f64)) -> Result<Self> {
        let mut t_out = Vec::with_capacity(self.len());
        let mut n_oc = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (a, b) = f(self.t[i], self.t_out[i], self.n_oc[i]);
            t_out.push(a);
            n_oc.push(b);
        }
        Self::new(self.t.clone(), t_out, n_oc)
    }
}

/// Heating/cooling power and ventilation flow, held constant per control step.
///
/// The first step may be shorter than the others so that later step
/// boundaries fall on a clock grid (whole hours by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    /// Absolute start time [s].
    pub t0: f64,
    /// Nominal control step [s].
    pub step_duration: f64,
    /// Duration of the first step [s], `0 < first_step <= step_duration`.
    pub first_step: f64,
    /// Heating (+) / cooling (−) power per step [W].
    pub w: Vec<f64>,
    /// Ventilation mass flow per step [kg/s].
    pub q: Vec<f64>,
}

impl ControlSchedule {
    /// Uniform schedule starting at `t = 0`.
    pub fn new(step_duration: f64, w: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        Self::aligned(0.0, step_duration, step_duration, w, q)
    }

    pub fn aligned(t0: f64, step_duration: f64, first_step: f64, w: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if !(step_duration > 0.0) || !step_duration.is_finite() {
            return Err(Error::domain("control step must be positive"));
        }
        if !(first_step > 0.0 && first_step <= step_duration * (1.0 + 1e-12)) {
            return Err(Error::domain(format!(
                "first step {first_step} s must lie in (0, {step_duration}]"
            )));
        }
        if w.len() != q.len() {
            return Err(Error::domain(format!(
                "schedule lengths differ: {} power values vs {} flow values",
                w.len(),
                q.len()
            )));
        }
        if !t0.is_finite() {
            return Err(Error::domain("schedule start must be finite"));
        }
        Ok(Self {
            t0,
            step_duration,
            first_step,
            w,
            q,
        })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn duration_of(&self, k: usize) -> f64 {
        if k == 0 {
            self.first_step
        } else {
            self.step_duration
        }
    }

    pub fn start_of(&self, k: usize) -> f64 {
        if k == 0 {
            self.t0
        } else {
            self.t0 + self.first_step + (k - 1) as f64 * self.step_duration
        }
    }

    pub fn end(&self) -> f64 {
        if self.is_empty() {
            self.t0
        } else {
            self.start_of(self.len())
        }
    }

    /// Rejects any step outside the equipment limits; nothing is clamped.
    pub fn validate(&self, params: &RoomParams) -> Result<()> {
        let tol_w = 1e-9 * (1.0 + params.w_max.abs().max(params.w_min.abs()));
        let tol_q = 1e-12 * (1.0 + params.q_max);
        for (k, (&w, &q)) in self.w.iter().zip(&self.q).enumerate() {
            if !w.is_finite() || w < params.w_min - tol_w || w > params.w_max + tol_w {
                return Err(Error::domain(format!(
                    "step {k}: power {w} W outside [{}, {}]",
                    params.w_min, params.w_max
                )));
            }
            if !q.is_finite() || q < -tol_q || q > params.q_max + tol_q {
                return Err(Error::domain(format!(
                    "step {k}: flow {q} kg/s outside [0, {}]",
                    params.q_max
                )));
            }
        }
        Ok(())
    }
}
