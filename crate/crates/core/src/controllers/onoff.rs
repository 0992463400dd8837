use serde::{Deserialize, Serialize};

use crate::comfort::comfort_bounds;
use crate::model::{ComfortSpec, DayType, MicroclimateState, RoomParams, PPM};

/// CO₂ level switching ventilation on [ppm].
pub const VENT_ON_PPM: f64 = 950.0;
/// CO₂ level switching ventilation off [ppm].
pub const VENT_OFF_PPM: f64 = 850.0;

/// Hysteresis state of the thermostat.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OnOffMode {
    pub heating: bool,
    pub cooling: bool,
    pub vent: bool,
}

/// Power regime 1..=10 for a positive error of `error` K over a band of `band` K.
fn regime(error: f64, band: f64) -> f64 {
    (10.0 * error / band).ceil().clamp(1.0, 10.0)
}

/// One decision of the on/off controller: `(W, Q, next mode)`.
///
/// Heating engages below the band and is released at the setpoint; cooling
/// mirrors it. While engaged, power is quantized to tenths of the equipment
/// limit in proportion to the distance past the band edge. Ventilation runs
/// at full flow between the CO₂ thresholds' hysteresis. On mild and hot days
/// heating and cooling stay off while the room is empty.
pub fn onoff_decide(
    s: &MicroclimateState,
    n_oc: f64,
    params: &RoomParams,
    comfort: &ComfortSpec,
    day: DayType,
    prev: OnOffMode,
) -> (f64, f64, OnOffMode) {
    let b = comfort_bounds(n_oc, comfort);
    let mut mode = prev;
    if mode.heating && s.t >= comfort.t_comf {
        mode.heating = false;
    } else if !mode.heating && s.t < b.t_lo {
        mode.heating = true;
        mode.cooling = false;
    }
    if mode.cooling && s.t <= comfort.t_comf {
        mode.cooling = false;
    } else if !mode.cooling && s.t > b.t_hi {
        mode.cooling = true;
        mode.heating = false;
    }
    let ppm = s.nu / PPM;
    if mode.vent && ppm <= VENT_OFF_PPM {
        mode.vent = false;
    } else if !mode.vent && ppm >= VENT_ON_PPM {
        mode.vent = true;
    }

    let vacant_off = n_oc <= 0.0 && matches!(day, DayType::Mild | DayType::Hot);
    let w = if vacant_off {
        0.0
    } else if mode.heating {
        regime(b.t_lo - s.t, comfort.band) * params.w_max.max(0.0) / 10.0
    } else if mode.cooling {
        -regime(s.t - b.t_hi, comfort.band) * (-params.w_min).max(0.0) / 10.0
    } else {
        0.0
    };
    let q = if mode.vent { params.q_max } else { 0.0 };
    (w, q, mode)
}
