//! Scenarios: built-in test cases, JSON configs, forecast CSVs and run export.

use std::f64::consts::PI;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::comfort::comfort_bounds;
use crate::error::{Error, Result};
use crate::harness::{RunResult, DAY};
use crate::model::{ComfortSpec, DayType, ExogenousSeries, MicroclimateState, RoomParams};

pub const BUILTIN_NAMES: [&str; 3] = ["tc1", "tc2", "tc2_svs"];
pub const SERIES_HEADER: [&str; 3] = ["t_hours", "T_out_C", "N_oc"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: RoomParams,
    pub comfort: ComfortSpec,
    pub exo: ExogenousSeries,
    pub day_type: DayType,
    pub initial: MicroclimateState,
    pub tags: Vec<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.comfort.validate()?;
        self.initial.validate()?;
        if self.exo.end() - self.exo.start() < DAY - 1e-6 {
            return Err(Error::data(format!(
                "scenario '{}' forecast spans {} h, at least 24 h are needed",
                self.name,
                (self.exo.end() - self.exo.start()) / 3600.0
            )));
        }
        Ok(())
    }
}

/// Mean, amplitude [K] of the synthetic outside temperature for a day type.
/// The daily maximum is at 15:00.
pub fn weather_profile(day: DayType) -> (f64, f64) {
    match day {
        DayType::Cold => (-18.0, 4.0),
        DayType::Mild => (12.0, 5.0),
        DayType::Hot => (27.0, 5.0),
    }
}

const PEAK_HOUR: f64 = 15.0;

fn hourly_temperature(day: DayType, hour: f64) -> f64 {
    let (mean, amp) = weather_profile(day);
    mean + amp * (2.0 * PI * (hour - PEAK_HOUR) / 24.0).cos()
}

/// Office use: lectures of 25 people 09–12 and 14–17, 5 people otherwise
/// between 08 and 19, empty overnight.
fn office_occupancy(hour: usize) -> f64 {
    match hour {
        9..=11 | 14..=16 => 25.0,
        8 | 12 | 13 | 17 | 18 => 5.0,
        _ => 0.0,
    }
}

/// Home use: two people 00–08 and 19–24.
fn home_occupancy(hour: usize) -> f64 {
    match hour {
        0..=7 | 19..=24 => 2.0,
        _ => 0.0,
    }
}

/// Hourly synthetic forecast over one day (25 points, 0..24 h).
pub fn default_series(day: DayType, occupancy: impl Fn(usize) -> f64) -> Result<ExogenousSeries> {
    let hours: Vec<usize> = (0..=24).collect();
    ExogenousSeries::new(
        hours.iter().map(|&h| h as f64 * 3600.0).collect(),
        hours.iter().map(|&h| hourly_temperature(day, h as f64)).collect(),
        hours.iter().map(|&h| occupancy(h)).collect(),
    )
}

fn tc2_params() -> RoomParams {
    RoomParams {
        u: 15.0,
        u_star: 200.0,
        mc_star: 20e6,
        volume: 105.0,
        w_min: -2000.0,
        w_max: 950.0,
        w_oc: 120.0,
        q_max: 0.0,
        t_in: 21.0,
        s_p: None,
        ..RoomParams::default()
    }
    .with_infiltration_per_hour(0.2)
}

/// One of the built-in test cases with the synthetic profiles for `day`.
pub fn builtin_scenario(name: &str, day: DayType) -> Result<Scenario> {
    let (params, exo) = match name {
        "tc1" => (RoomParams::default(), default_series(day, office_occupancy)?),
        "tc2" => (tc2_params(), default_series(day, home_occupancy)?),
        "tc2_svs" => (
            RoomParams {
                w_max: 1100.0,
                q_max: 0.05,
                s_p: Some(0.012),
                ..tc2_params()
            },
            default_series(day, home_occupancy)?,
        ),
        other => {
            return Err(Error::Usage(format!(
                "unknown scenario '{other}' (built-in: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(Scenario {
        name: format!("{name}-{day}"),
        params,
        comfort: ComfortSpec::default(),
        exo,
        day_type: day,
        initial: MicroclimateState::from_ppm(21.0, 21.0, 400.0),
        tags: vec![name.to_string(), day.to_string()],
    })
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    t_hours: f64,
    #[serde(rename = "T_out_C")]
    t_out_c: f64,
    #[serde(rename = "N_oc")]
    n_oc: f64,
}

/// Reads a forecast CSV with header `t_hours,T_out_C,N_oc`.
pub fn load_series(path: &Path) -> Result<ExogenousSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(file, &path.display().to_string())
}

fn read_series(reader: impl std::io::Read, origin: &str) -> Result<ExogenousSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::data(format!("{origin}: cannot read header: {e}")))?
        .clone();
    if header.iter().collect::<Vec<_>>() != SERIES_HEADER {
        return Err(Error::data(format!(
            "{origin}: header must be '{}', found '{}'",
            SERIES_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut t, mut t_out, mut n_oc) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.deserialize::<SeriesRow>() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::data(format!("{origin}: line {line}: {e}"))
        })?;
        let line = t.len() + 2;
        if !row.t_hours.is_finite() || !row.t_out_c.is_finite() || !row.n_oc.is_finite() {
            return Err(Error::data(format!("{origin}: line {line}: non-finite value")));
        }
        if t.is_empty() && row.t_hours != 0.0 {
            return Err(Error::data(format!(
                "{origin}: line {line}: t_hours must start at 0, found {}",
                row.t_hours
            )));
        }
        if let Some(&prev) = t.last() {
            if !(row.t_hours * 3600.0 > prev) {
                return Err(Error::data(format!(
                    "{origin}: line {line}: t_hours {} does not increase (previous {})",
                    row.t_hours,
                    prev / 3600.0
                )));
            }
        }
        if row.n_oc < 0.0 {
            return Err(Error::data(format!("{origin}: line {line}: negative occupancy {}", row.n_oc)));
        }
        t.push(row.t_hours * 3600.0);
        t_out.push(row.t_out_c);
        n_oc.push(row.n_oc);
    }
    if t.is_empty() {
        return Err(Error::data(format!("{origin}: no data rows")));
    }
    ExogenousSeries::new(t, t_out, n_oc)
}

/// Writes a forecast in the format [`load_series`] reads, with shortest
/// round-trip decimal formatting.
pub fn write_series(path: &Path, exo: &ExogenousSeries) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| Error::data(format!("{}: {e}", path.display()));
    w.write_record(SERIES_HEADER).map_err(io)?;
    for i in 0..exo.len() {
        w.write_record([
            (exo.times()[i] / 3600.0).to_string(),
            exo.outside_temperatures()[i].to_string(),
            exo.occupancy()[i].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsOverride {
    u: Option<f64>,
    u_star: Option<f64>,
    mc_star: Option<f64>,
    volume: Option<f64>,
    infiltration_per_hour: Option<f64>,
    w_min: Option<f64>,
    w_max: Option<f64>,
    w_oc: Option<f64>,
    q_max: Option<f64>,
    t_in: Option<f64>,
    s_p: Option<f64>,
    c_p: Option<f64>,
    rho: Option<f64>,
    p_atm: Option<f64>,
    r_gas: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComfortOverride {
    t_comf: Option<f64>,
    band: Option<f64>,
    t_lo_vacant: Option<f64>,
    t_hi_vacant: Option<f64>,
    co2_max_ppm: Option<f64>,
    co2_env_ppm: Option<f64>,
    q_co2: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialOverride {
    #[serde(rename = "T")]
    t: Option<f64>,
    #[serde(rename = "T_star")]
    t_star: Option<f64>,
    co2_ppm: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioConfig {
    name: Option<String>,
    /// Built-in case supplying every value not overridden.
    #[serde(default = "default_base")]
    base: String,
    #[serde(default)]
    day: Option<String>,
    #[serde(default)]
    params: ParamsOverride,
    #[serde(default)]
    comfort: ComfortOverride,
    #[serde(default)]
    initial: InitialOverride,
    /// Forecast CSV, relative to the config file.
    series: Option<PathBuf>,
    #[serde(default)]
    tags: Vec<String>,
}

fn default_base() -> String {
    "tc1".into()
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Loads a JSON scenario config; omitted fields come from the base test case.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let day = match &cfg.day {
        Some(d) => d.parse::<DayType>().map_err(|e| Error::data(format!("{}: {e}", path.display())))?,
        None => DayType::Cold,
    };
    let mut sc = builtin_scenario(&cfg.base, day).map_err(|e| match e {
        Error::Usage(m) => Error::data(format!("{}: {m}", path.display())),
        other => other,
    })?;

    let (p, o) = (&mut sc.params, &cfg.params);
    set(&mut p.u, o.u);
    set(&mut p.u_star, o.u_star);
    set(&mut p.mc_star, o.mc_star);
    set(&mut p.volume, o.volume);
    if let Some(r) = o.infiltration_per_hour {
        *p = p.clone().with_infiltration_per_hour(r);
    }
    set(&mut p.w_min, o.w_min);
    set(&mut p.w_max, o.w_max);
    set(&mut p.w_oc, o.w_oc);
    set(&mut p.q_max, o.q_max);
    set(&mut p.t_in, o.t_in);
    if o.s_p.is_some() {
        p.s_p = o.s_p;
    }
    set(&mut p.c_p, o.c_p);
    set(&mut p.rho, o.rho);
    set(&mut p.p_atm, o.p_atm);
    set(&mut p.r_gas, o.r_gas);

    let (c, o) = (&mut sc.comfort, &cfg.comfort);
    set(&mut c.t_comf, o.t_comf);
    set(&mut c.band, o.band);
    set(&mut c.t_lo_vacant, o.t_lo_vacant);
    set(&mut c.t_hi_vacant, o.t_hi_vacant);
    set(&mut c.nu_max, o.co2_max_ppm.map(|v| v * crate::model::PPM));
    set(&mut c.nu_env, o.co2_env_ppm.map(|v| v * crate::model::PPM));
    set(&mut c.q_co2, o.q_co2);

    let o = &cfg.initial;
    let co2 = o.co2_ppm.unwrap_or(sc.initial.co2_ppm());
    sc.initial = MicroclimateState::from_ppm(o.t.unwrap_or(sc.initial.t), o.t_star.unwrap_or(sc.initial.t_star), co2);

    if let Some(series) = &cfg.series {
        let full = path.parent().unwrap_or(Path::new(".")).join(series);
        sc.exo = load_series(&full)?;
    }
    sc.name = cfg.name.unwrap_or_else(|| {
        path.file_stem()
            .map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned())
    });
    sc.tags = cfg.tags;
    sc.validate().map_err(|e| match e {
        Error::Domain(m) => Error::data(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(sc)
}

/// Built-in name or path to a JSON config.
pub fn resolve_scenario(name_or_path: &str, day: DayType) -> Result<Scenario> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        builtin_scenario(name_or_path, day)
    } else {
        let path = Path::new(name_or_path);
        if path.exists() {
            load_scenario(path)
        } else {
            Err(Error::Usage(format!(
                "'{name_or_path}' is neither a built-in scenario ({}) nor an existing file",
                BUILTIN_NAMES.join(", ")
            )))
        }
    }
}

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

pub const LOCK_FILE: &str = ".microclimate.lock";

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        writeln!(f, "{}", std::process::id()).map_err(|e| Error::io(&path, e))?;
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyKwh {
    pub heat_cool: f64,
    pub heating: f64,
    pub cooling: f64,
    pub vent_thermal: f64,
    pub vent_fan: f64,
    pub ventilation: f64,
    pub total: f64,
}

/// Deterministic summary written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub controller: String,
    pub seed: Option<u64>,
    pub replan_interval_s: f64,
    pub energy_kwh: EnergyKwh,
    pub penalty_kh: f64,
    pub max_co2_ppm: f64,
    pub cycles: usize,
    pub solver_iterations: Vec<usize>,
    pub planned_objectives_wh: Vec<f64>,
}

impl Metrics {
    pub fn from_result(r: &RunResult) -> Self {
        let hours = |i: usize| (r.trajectory.t[i + 1] - r.trajectory.t[i]) / 3600.0;
        let (mut heating, mut cooling) = (0.0, 0.0);
        for (i, &w) in r.trajectory.applied_w.iter().enumerate() {
            if w > 0.0 {
                heating += w * hours(i);
            } else {
                cooling += -w * hours(i);
            }
        }
        let e = &r.energy;
        let (max_co2_ppm, cycles) = if r.trajectory.steps() == 0 {
            (0.0, 0)
        } else {
            (r.max_co2_ppm, r.solver_iterations.len())
        };
        Self {
            scenario: r.scenario.clone(),
            controller: r.controller.to_string(),
            seed: r.seed,
            replan_interval_s: r.replan_interval,
            energy_kwh: EnergyKwh {
                heat_cool: e.heat_cool / 1000.0,
                heating: heating / 1000.0,
                cooling: cooling / 1000.0,
                vent_thermal: e.vent_thermal / 1000.0,
                vent_fan: e.vent_fan / 1000.0,
                ventilation: e.ventilation() / 1000.0,
                total: e.total / 1000.0,
            },
            penalty_kh: r.penalty,
            max_co2_ppm,
            cycles,
            solver_iterations: r.solver_iterations.clone(),
            planned_objectives_wh: r.planned_objectives.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportPaths {
    pub trajectory: PathBuf,
    pub metrics: PathBuf,
    pub timings: PathBuf,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Writes `trajectory.csv`, `metrics.json` and `timings.json` into `dir`.
///
/// Wall-clock solve times go to `timings.json` only, so `metrics.json` is a
/// pure function of the run's inputs.
pub fn export_run(result: &RunResult, dir: &Path, comfort: &ComfortSpec) -> Result<ExportPaths> {
    let _lock = DirLock::acquire(dir)?;
    let paths = ExportPaths {
        trajectory: dir.join("trajectory.csv"),
        metrics: dir.join("metrics.json"),
        timings: dir.join("timings.json"),
    };
    let traj = &result.trajectory;
    let file = File::create(&paths.trajectory).map_err(|e| Error::io(&paths.trajectory, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::data(format!("{}: {e}", paths.trajectory.display()));
    w.write_record([
        "t_hours", "T_C", "T_star_C", "CO2_ppm", "W_W", "Q_kgps", "T_out_C", "N_oc", "T_lo_C", "T_hi_C",
    ])
    .map_err(csv_err)?;
    if traj.steps() > 0 {
        for (i, (&t, s)) in traj.t.iter().zip(&traj.states).enumerate() {
            let (t_out, n_oc) = result.exo.at(t)?;
            let band = comfort_bounds(n_oc, comfort);
            w.write_record([
                (t / 3600.0).to_string(),
                s.t.to_string(),
                s.t_star.to_string(),
                s.co2_ppm().to_string(),
                fmt_opt(traj.applied_w.get(i).copied()),
                fmt_opt(traj.applied_q.get(i).copied()),
                t_out.to_string(),
                n_oc.to_string(),
                band.t_lo.to_string(),
                band.t_hi.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&paths.trajectory, e))?;

    let metrics = Metrics::from_result(result);
    let json = serde_json::to_string_pretty(&metrics).map_err(|e| Error::data(e.to_string()))?;
    fs::write(&paths.metrics, json + "\n").map_err(|e| Error::io(&paths.metrics, e))?;

    let timings = serde_json::json!({
        "solve_times_s": result.solve_times,
        "total_solve_s": result.solve_times.iter().sum::<f64>(),
    });
    let json = serde_json::to_string_pretty(&timings).map_err(|e| Error::data(e.to_string()))?;
    fs::write(&paths.timings, json + "\n").map_err(|e| Error::io(&paths.timings, e))?;
    Ok(paths)
}

/// Writes any serializable value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::data(e.to_string()))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}
