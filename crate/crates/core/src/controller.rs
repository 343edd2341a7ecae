//! Intelligent-P control law with the optional adaptive gain update.
//!
//! The iP law cancels the estimated lumped dynamics and adds proportional
//! feedback on the speed error:
//!
//! ```text
//! u = −(F̂ − ẏ_r + K_P·e) / α̂
//! ```
//!
//! In adaptive mode, after each command the gain is re-solved so that the
//! error predicted by the ultra-local model vanishes, floored at the nominal
//! gain: `α̂ = max((ẏ_r − F̂) / (u + ε·sign(u)), α_nominal)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimator::{AlgebraicEstimator, EstimatorConfig};
use crate::vehicle::{WheelTorques, FRONT, WHEELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlMode {
    /// constant α
    Classic,
    /// α̂ re-solved every step
    Adaptive,
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlMode::Classic => f.write_str("classic"),
            ControlMode::Adaptive => f.write_str("adaptive"),
        }
    }
}

impl FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classic" => Ok(ControlMode::Classic),
            "adaptive" => Ok(ControlMode::Adaptive),
            other => Err(Error::Config(format!(
                "unknown controller mode `{other}` (expected classic or adaptive)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// K_P, 1/s
    pub gain_kp: f64,
    pub alpha_nominal: f64,
    pub epsilon: f64,
    pub mode: ControlMode,
    /// bound on |C_T|, N·m
    pub torque_limit: f64,
    /// s
    pub control_dt: f64,
    /// estimator window T, s
    pub window: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            gain_kp: 2.0,
            alpha_nominal: 1.0,
            epsilon: 0.01,
            mode: ControlMode::Classic,
            torque_limit: 2000.0,
            control_dt: 0.01,
            window: 0.2,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("controller.kp", self.gain_kp),
            ("controller.alpha_nominal", self.alpha_nominal),
            ("controller.epsilon", self.epsilon),
            ("controller.torque_limit", self.torque_limit),
            ("controller.dt", self.control_dt),
            ("estimator.window", self.window),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        self.estimator_config().validate()
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            window: self.window,
            sample_dt: self.control_dt,
        }
    }
}

/// `sign` with `sign(0) = +1`.
fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Intelligent-P command, saturated to the torque limit.
pub fn ip_control(f_hat: f64, ref_rate: f64, error: f64, alpha: f64, cfg: &ControllerConfig) -> f64 {
    debug_assert!(alpha > 0.0);
    let u = -(f_hat - ref_rate + cfg.gain_kp * error) / alpha;
    u.clamp(-cfg.torque_limit, cfg.torque_limit)
}

/// Adaptive gain for the command `u` just issued.
pub fn update_alpha(f_hat: f64, ref_rate: f64, u: f64, cfg: &ControllerConfig) -> f64 {
    let candidate = (ref_rate - f_hat) / (u + cfg.epsilon * sign(u));
    // NaN candidates fall back to the nominal gain
    if candidate > cfg.alpha_nominal {
        candidate
    } else {
        cfg.alpha_nominal
    }
}

/// Positive totals drive the two front wheels; negative totals brake all four.
pub fn split_torque(total: f64) -> WheelTorques {
    let mut t = WheelTorques::default();
    if total > 0.0 {
        for i in FRONT {
            t.motor[i] = total / 2.0;
        }
    } else if total < 0.0 {
        t.brake = [-total / WHEELS as f64; WHEELS];
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub alpha_hat: f64,
    pub last_u: f64,
    /// α̂·u of the previous step
    pub last_effective_input: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub total_torque: f64,
    pub per_wheel: WheelTorques,
}

impl ControlCommand {
    pub fn zero() -> Self {
        Self {
            total_torque: 0.0,
            per_wheel: WheelTorques::default(),
        }
    }

    pub fn from_total(total: f64) -> Self {
        Self {
            total_torque: total,
            per_wheel: split_torque(total),
        }
    }
}

/// What one control step produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub command: ControlCommand,
    pub f_hat: f64,
    /// α̂ after this step's update
    pub alpha_hat: f64,
    /// the estimator did not have enough samples and F̂ = 0 was used
    pub warm_up: bool,
}

/// A model-free speed controller owning its estimator window.
#[derive(Debug, Clone)]
pub struct MfcController {
    cfg: ControllerConfig,
    state: ControllerState,
    estimator: AlgebraicEstimator,
}

impl MfcController {
    pub fn new(cfg: ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            estimator: AlgebraicEstimator::new(cfg.estimator_config())?,
            state: ControllerState {
                alpha_hat: cfg.alpha_nominal,
                last_u: 0.0,
                last_effective_input: 0.0,
            },
            cfg,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn estimator(&self) -> &AlgebraicEstimator {
        &self.estimator
    }

    /// One control period: record the measurement alongside the previous
    /// effective input, estimate F̂, then apply the iP law and the gain
    /// update.
    pub fn step(&mut self, y_meas: f64, y_ref: f64, ref_rate: f64) -> StepOutput {
        self.estimator.push(y_meas, self.state.last_effective_input);
        let (f_hat, warm_up) = match self.estimator.estimate() {
            Ok(f) => (f, false),
            Err(_) => (0.0, true),
        };
        let mut out = self.step_with_estimate(f_hat, y_meas, y_ref, ref_rate);
        out.warm_up = warm_up;
        out
    }

    /// Control law and gain update with a caller-supplied F̂. The estimator
    /// window is left untouched.
    pub fn step_with_estimate(
        &mut self,
        f_hat: f64,
        y_meas: f64,
        y_ref: f64,
        ref_rate: f64,
    ) -> StepOutput {
        let error = y_meas - y_ref;
        let u = ip_control(f_hat, ref_rate, error, self.state.alpha_hat, &self.cfg);
        let alpha_hat = match self.cfg.mode {
            ControlMode::Classic => self.cfg.alpha_nominal,
            ControlMode::Adaptive => update_alpha(f_hat, ref_rate, u, &self.cfg),
        };
        self.state = ControllerState {
            alpha_hat,
            last_u: u,
            last_effective_input: alpha_hat * u,
        };
        StepOutput {
            command: ControlCommand::from_total(u),
            f_hat,
            alpha_hat,
            warm_up: false,
        }
    }
}
