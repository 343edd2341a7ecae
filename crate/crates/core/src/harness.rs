//! Closed-loop executive: plant, sensor noise, actuation delay, controller
//! and per-step logging, all driven by one seed.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::controller::{ControlCommand, ControlMode, ControllerConfig, MfcController};
use crate::error::{Error, Result};
use crate::scenario::{
    driver_profile, read_driver_records, reconstruct_path, sine_profile, step_profile, synthetic_drive,
    ReferenceProfile, SyntheticDriveConfig,
};
use crate::vehicle::{Plant, TireSpec, VehicleParams, VehicleState, DEFAULT_CORNERING_STIFFNESS, WHEELS};

/// Noise power of −6 dB re 1 (m/s)², as a standard deviation.
pub fn default_noise_std() -> f64 {
    10f64.powf(-6.0 / 20.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DriverSource {
    File(PathBuf),
    Synthetic(SyntheticDriveConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioConfig {
    Step { levels: Vec<(f64, f64)> },
    Sine { mean: f64, amplitude: f64, wavelength: f64 },
    Driver { source: DriverSource },
}

impl ScenarioConfig {
    pub fn default_step() -> Self {
        ScenarioConfig::Step {
            levels: vec![(0.0, 10.0), (50.0, 15.0), (400.0, 12.0)],
        }
    }

    pub fn default_sine() -> Self {
        ScenarioConfig::Sine {
            mean: 15.0,
            amplitude: 3.0,
            wavelength: 200.0,
        }
    }

    pub fn default_driver() -> Self {
        ScenarioConfig::Driver {
            source: DriverSource::Synthetic(SyntheticDriveConfig::default()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioConfig::Step { .. } => "step",
            ScenarioConfig::Sine { .. } => "sine",
            ScenarioConfig::Driver { .. } => "driver",
        }
    }

    pub fn build_profile(&self) -> Result<ReferenceProfile> {
        match self {
            ScenarioConfig::Step { levels } => step_profile(levels),
            ScenarioConfig::Sine {
                mean,
                amplitude,
                wavelength,
            } => sine_profile(*mean, *amplitude, *wavelength),
            ScenarioConfig::Driver { source } => {
                let records = match source {
                    DriverSource::File(path) => read_driver_records(path)?,
                    DriverSource::Synthetic(cfg) => synthetic_drive(cfg)?,
                };
                driver_profile(&reconstruct_path(&records)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// m/s
    pub std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            std: default_noise_std(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub controller: ControllerConfig,
    pub vehicle: VehicleParams,
    pub tire: TireSpec,
    /// per axle, N/rad
    pub cornering_stiffness: f64,
    pub noise: NoiseConfig,
    /// s
    pub actuation_delay: f64,
    /// s
    pub duration: f64,
    /// stop once the abscissa reaches this, m
    pub distance: Option<f64>,
    pub seed: u64,
    /// plant integration step h, s
    pub plant_dt: f64,
    /// starting speed; defaults to the reference at s = 0
    pub initial_speed: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default_step(),
            controller: ControllerConfig::default(),
            vehicle: VehicleParams::default(),
            tire: TireSpec::default(),
            cornering_stiffness: DEFAULT_CORNERING_STIFFNESS,
            noise: NoiseConfig::default(),
            actuation_delay: 0.0,
            duration: 120.0,
            distance: Some(800.0),
            seed: 42,
            plant_dt: 1e-3,
            initial_speed: None,
        }
    }
}

/// `a / b` as an integer if it is one to within rounding.
fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    ((r - n).abs() < 1e-6 && n >= 0.0).then_some(n as usize)
}

impl RunConfig {
    pub fn control_dt(&self) -> f64 {
        self.controller.control_dt
    }

    pub fn substeps(&self) -> usize {
        integer_ratio(self.control_dt(), self.plant_dt).unwrap_or(0)
    }

    pub fn delay_steps(&self) -> usize {
        integer_ratio(self.actuation_delay, self.control_dt()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.controller.validate().map_err(to_config)?;
        self.vehicle.validate().map_err(to_config)?;
        if !(self.plant_dt.is_finite() && self.plant_dt > 0.0) {
            return Err(Error::Config("run.plant_dt must be > 0".into()));
        }
        if self.plant_dt > self.control_dt() {
            return Err(Error::Config("run.plant_dt must not exceed controller.dt".into()));
        }
        match integer_ratio(self.control_dt(), self.plant_dt) {
            Some(n) if n >= 1 => {}
            _ => {
                return Err(Error::Config(format!(
                    "controller.dt = {} is not an integer multiple of run.plant_dt = {}",
                    self.control_dt(),
                    self.plant_dt
                )))
            }
        }
        if !(self.actuation_delay.is_finite() && self.actuation_delay >= 0.0) {
            return Err(Error::Config("delay.actuation must be >= 0".into()));
        }
        if integer_ratio(self.actuation_delay, self.control_dt()).is_none() {
            return Err(Error::Config(format!(
                "delay.actuation = {} is not a multiple of controller.dt",
                self.actuation_delay
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config("run.duration must be > 0".into()));
        }
        if let Some(d) = self.distance {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Config("run.distance must be > 0".into()));
            }
        }
        if self.noise.enabled && !(self.noise.std.is_finite() && self.noise.std >= 0.0) {
            return Err(Error::Config("noise.std must be >= 0".into()));
        }
        if let Some(v) = self.initial_speed {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config("run.initial_speed must be >= 0".into()));
            }
        }
        Ok(())
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    }
}

/// Additive Gaussian noise on the measured speed, from its own seeded stream.
#[derive(Debug, Clone)]
pub struct SensorNoise {
    dist: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl SensorNoise {
    pub fn new(cfg: &NoiseConfig, seed: u64) -> Result<Self> {
        let dist = if cfg.enabled {
            Some(Normal::new(0.0, cfg.std).map_err(|e| Error::invalid(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            dist,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn disabled() -> Self {
        Self {
            dist: None,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

pub fn add_noise(v: f64, noise: &mut SensorNoise) -> f64 {
    match &noise.dist {
        Some(d) => v + d.sample(&mut noise.rng),
        None => v,
    }
}

/// Fixed-depth FIFO; depth 0 passes values straight through.
#[derive(Debug, Clone)]
pub struct DelayLine<T> {
    queue: VecDeque<T>,
}

impl<T: Copy> DelayLine<T> {
    /// A line of `depth` slots pre-filled with `fill`.
    pub fn new(depth: usize, fill: T) -> Self {
        Self {
            queue: std::iter::repeat_n(fill, depth).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.queue.len()
    }

    /// Enqueues `input` and returns the value entered `depth` pushes ago.
    pub fn push(&mut self, input: T) -> T {
        if self.queue.is_empty() {
            return input;
        }
        self.queue.push_back(input);
        self.queue.pop_front().expect("non-empty")
    }
}

/// What the harness needs from a plant.
pub trait LongitudinalPlant {
    /// Ground-truth longitudinal speed, m/s
    fn speed(&self) -> f64;
    /// Curvilinear abscissa, m
    fn abscissa(&self) -> f64;
    /// Rate of the abscissa, m/s
    fn path_speed(&self) -> f64 {
        self.speed()
    }
    /// Holds `command` for `dt` seconds.
    fn advance(&mut self, command: &ControlCommand, dt: f64) -> Result<()>;
    /// Exact lumped dynamics `F`, for plants that know it.
    fn lumped_dynamics(&self) -> Option<f64> {
        None
    }
}

/// The 7-DoF vehicle integrated at a fine fixed step.
#[derive(Debug, Clone)]
pub struct VehiclePlant {
    pub plant: Plant,
    pub state: VehicleState,
    pub plant_dt: f64,
    pub steer: f64,
}

impl VehiclePlant {
    pub fn new(plant: Plant, initial_speed: f64, plant_dt: f64) -> Self {
        let state = VehicleState::rolling(initial_speed, &plant.vehicle);
        Self {
            plant,
            state,
            plant_dt,
            steer: 0.0,
        }
    }
}

impl LongitudinalPlant for VehiclePlant {
    fn speed(&self) -> f64 {
        self.state.speed_long
    }

    fn abscissa(&self) -> f64 {
        self.state.abscissa
    }

    fn path_speed(&self) -> f64 {
        self.state.speed_long.hypot(self.state.speed_lat)
    }

    fn advance(&mut self, command: &ControlCommand, dt: f64) -> Result<()> {
        let n = integer_ratio(dt, self.plant_dt)
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid("control period is not a multiple of the plant step"))?;
        for _ in 0..n {
            self.state = self
                .plant
                .integrate_step(&self.state, &command.per_wheel, self.steer, self.plant_dt)?;
        }
        Ok(())
    }
}

/// Exact first-order plant `ẏ = F + α·u`, with the abscissa integrated
/// alongside. Used to check the closed-loop error law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltraLocalPlant {
    pub lumped: f64,
    pub gain: f64,
    pub speed: f64,
    pub abscissa: f64,
}

impl LongitudinalPlant for UltraLocalPlant {
    fn speed(&self) -> f64 {
        self.speed
    }

    fn abscissa(&self) -> f64 {
        self.abscissa
    }

    fn advance(&mut self, command: &ControlCommand, dt: f64) -> Result<()> {
        let accel = self.lumped + self.gain * command.total_torque;
        self.abscissa += self.speed * dt + 0.5 * accel * dt * dt;
        self.speed += accel * dt;
        if !self.speed.is_finite() {
            return Err(Error::BlowUp { t: f64::NAN });
        }
        Ok(())
    }

    fn lumped_dynamics(&self) -> Option<f64> {
        Some(self.lumped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub s: f64,
    pub v_ref: f64,
    pub v_true: f64,
    pub v_meas: f64,
    /// v_meas − v_ref
    pub error: f64,
    pub f_hat: f64,
    pub alpha_hat: f64,
    pub u_total: f64,
    pub u_applied: f64,
    /// applied net torque per wheel, FL FR RL RR
    pub wheel_torque: [f64; WHEELS],
}

impl LogRecord {
    /// v_true − v_ref
    pub fn true_error(&self) -> f64 {
        self.v_true - self.v_ref
    }
}

pub const TRACE_HEADER: &str =
    "t,s,v_ref,v_true,v_meas,error,f_hat,alpha_hat,u_total,u_applied,tq_fl,tq_fr,tq_rl,tq_rr";

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub config: RunConfig,
    pub records: Vec<LogRecord>,
}

impl RunTrace {
    pub fn mode(&self) -> ControlMode {
        self.config.controller.mode
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(160 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.t, r.s, r.v_ref, r.v_true, r.v_meas, r.error, r.f_hat, r.alpha_hat, r.u_total, r.u_applied
            );
            for tq in r.wheel_torque {
                let _ = write!(out, ",{tq:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_csv_string().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HarnessOptions {
    /// Feed the controller the plant's exact `F` instead of the filter output.
    pub exact_estimate: bool,
}

/// Builds the vehicle and reference from `config` and runs the loop.
pub fn run(config: &RunConfig) -> Result<RunTrace> {
    config.validate()?;
    let profile = config.scenario.build_profile()?;
    let plant = Plant::new(config.vehicle, config.tire, config.cornering_stiffness).map_err(to_config)?;
    let v0 = config.initial_speed.unwrap_or_else(|| profile.speed_at(0.0));
    let mut vehicle = VehiclePlant::new(plant, v0, config.plant_dt);
    run_with_plant(config, &profile, &mut vehicle, HarnessOptions::default())
}

/// The control loop against an arbitrary plant.
pub fn run_with_plant<P: LongitudinalPlant>(
    config: &RunConfig,
    profile: &ReferenceProfile,
    plant: &mut P,
    options: HarnessOptions,
) -> Result<RunTrace> {
    config.validate()?;
    let dt = config.control_dt();
    let mut controller = MfcController::new(config.controller)?;
    let mut noise = SensorNoise::new(&config.noise, config.seed)?;
    let mut delay = DelayLine::new(config.delay_steps(), ControlCommand::zero());
    let stop_at = match (config.distance, profile.end_abscissa()) {
        (Some(d), Some(end)) => Some(d.min(end)),
        (d, end) => d.or(end),
    };

    let steps = (config.duration / dt).round() as usize;
    let mut records = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * dt;
        let s = plant.abscissa();
        if stop_at.is_some_and(|d| s >= d) {
            break;
        }
        let v_true = plant.speed();
        let v_meas = add_noise(v_true, &mut noise);
        let (v_ref, v_ref_dot) = profile.query(s, plant.path_speed());

        let out = match plant.lumped_dynamics().filter(|_| options.exact_estimate) {
            Some(f) => controller.step_with_estimate(f, v_meas, v_ref, v_ref_dot),
            None => controller.step(v_meas, v_ref, v_ref_dot),
        };
        let applied = delay.push(out.command);

        let mut wheel_torque = [0.0; WHEELS];
        for (i, w) in wheel_torque.iter_mut().enumerate() {
            *w = applied.per_wheel.net(i);
        }
        records.push(LogRecord {
            t,
            s,
            v_ref,
            v_true,
            v_meas,
            error: v_meas - v_ref,
            f_hat: out.f_hat,
            alpha_hat: out.alpha_hat,
            u_total: out.command.total_torque,
            u_applied: applied.total_torque,
            wheel_torque,
        });

        plant.advance(&applied, dt).map_err(|e| match e {
            Error::BlowUp { .. } => Error::BlowUp { t },
            other => other,
        })?;
    }
    Ok(RunTrace {
        config: config.clone(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControlMode;

    fn quiet(mut cfg: RunConfig) -> RunConfig {
        cfg.noise.enabled = false;
        cfg
    }

    #[test]
    fn delay_line_depth_zero_is_identity() {
        let mut d = DelayLine::new(0, 0.0);
        assert_eq!(d.push(3.0), 3.0);
        assert_eq!(d.push(4.0), 4.0);
    }

    #[test]
    fn delay_line_shifts_by_depth() {
        let mut d = DelayLine::new(25, 0.0);
        let out: Vec<f64> = (1..=60).map(|k| d.push(k as f64)).collect();
        assert!(out[..25].iter().all(|&v| v == 0.0));
        // input of step k (1-based) comes out at step k + 25, i.e. 250 ms later at 10 ms
        assert_eq!(out[25], 1.0);
        assert_eq!(out[59], 35.0);
    }

    #[test]
    fn delay_line_constant_stream() {
        let mut d = DelayLine::new(4, 0.0);
        let out: Vec<f64> = (0..10).map(|_| d.push(2.5)).collect();
        assert!(out[4..].iter().all(|&v| v == 2.5));
    }

    #[test]
    fn noise_off_is_identity() {
        let mut n = SensorNoise::new(&NoiseConfig { enabled: false, std: 1.0 }, 1).unwrap();
        assert_eq!(add_noise(12.5, &mut n), 12.5);
    }

    #[test]
    fn noise_moments() {
        let cfg = NoiseConfig::default();
        let sigma = cfg.std;
        assert!((sigma - 0.501187).abs() < 1e-6);
        let mut n = SensorNoise::new(&cfg, 1234).unwrap();
        let draws = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..draws {
            let g = add_noise(0.0, &mut n);
            sum += g;
            sq += g * g;
        }
        let mean = sum / draws as f64;
        let std = (sq / draws as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 4.0 * sigma / 1000.0, "mean {mean}");
        assert!((std - sigma).abs() < 0.01 * sigma, "std {std}");
    }

    #[test]
    fn equilibrium_run_has_zero_error() {
        let cfg = quiet(RunConfig {
            scenario: ScenarioConfig::Step { levels: vec![(0.0, 12.0)] },
            duration: 5.0,
            ..Default::default()
        });
        let trace = run(&cfg).unwrap();
        assert_eq!(trace.records.len(), 500);
        for r in &trace.records {
            assert_eq!(r.error, 0.0);
            assert_eq!(r.u_total, 0.0);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = RunConfig {
            duration: 10.0,
            ..Default::default()
        };
        assert_eq!(run(&cfg).unwrap().to_csv_string(), run(&cfg).unwrap().to_csv_string());
    }

    #[test]
    fn zero_delay_matches_undelayed_commands() {
        let cfg = RunConfig {
            duration: 8.0,
            ..Default::default()
        };
        let trace = run(&cfg).unwrap();
        assert!(trace.records.iter().all(|r| r.u_total == r.u_applied));
    }

    #[test]
    fn delayed_commands_are_shifted() {
        let cfg = RunConfig {
            duration: 8.0,
            actuation_delay: 0.25,
            ..Default::default()
        };
        let trace = run(&cfg).unwrap();
        let r = &trace.records;
        assert!(r[..25].iter().all(|x| x.u_applied == 0.0));
        for k in 25..r.len() {
            assert_eq!(r[k].u_applied, r[k - 25].u_total);
        }
    }

    #[test]
    fn log_is_self_consistent() {
        let trace = run(&RunConfig {
            duration: 10.0,
            ..Default::default()
        })
        .unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        for r in &trace.records {
            assert_eq!(r.error, r.v_meas - r.v_ref);
            assert!((r.wheel_torque.iter().sum::<f64>() - r.u_applied).abs() < 1e-9);
        }
    }

    #[test]
    fn validation_errors() {
        let mut cfg = RunConfig {
            plant_dt: 0.003,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.plant_dt = 0.02;
        assert!(cfg.validate().is_err());
        cfg.plant_dt = 1e-3;
        cfg.actuation_delay = 0.015;
        assert!(cfg.validate().is_err());
        cfg.actuation_delay = -0.01;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ultra_local_error_law() {
        let cfg = quiet(RunConfig {
            scenario: ScenarioConfig::Step { levels: vec![(0.0, 10.0)] },
            duration: 1.5,
            distance: None,
            ..Default::default()
        });
        let profile = cfg.scenario.build_profile().unwrap();
        let mut plant = UltraLocalPlant { lumped: -3.0, gain: 1.0, speed: 11.0, abscissa: 0.0 };
        let trace = run_with_plant(&cfg, &profile, &mut plant, HarnessOptions { exact_estimate: true }).unwrap();
        let kp = cfg.controller.gain_kp;
        for (k, r) in trace.records.iter().enumerate() {
            let discrete = (1.0 - kp * 0.01f64).powi(k as i32);
            assert!((r.error - discrete).abs() < 1e-9);
        }
        assert_eq!(trace.mode(), ControlMode::Classic);
    }
}
