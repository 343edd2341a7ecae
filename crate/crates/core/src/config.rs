//! Flat `section.key=value` configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Later assignments win, so `--set` overrides are applied by
//! appending them after the file contents.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::{DriverSource, RunConfig, ScenarioConfig};
use crate::scenario::SyntheticDriveConfig;
use crate::vehicle::{TireParams, TireShape, TireSpec};

/// Extra knobs for the classic-vs-adaptive comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareSettings {
    pub delay_sweep: bool,
    /// s
    pub sweep_delay: f64,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            delay_sweep: false,
            sweep_delay: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub run: RunConfig,
    pub compare: CompareSettings,
}

/// Ordered key/value assignments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            kv.set_pair(line)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(kv)
    }

    /// Applies one `key=value` assignment.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
        let key = k.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(Error::Config(format!("empty key in `{pair}`")));
        }
        self.entries.insert(key, v.trim().to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_ascii_lowercase(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got `{value}`"))),
    }
}

/// `"0:10, 50:15"` → `[(0, 10), (50, 15)]`
fn step_levels(key: &str, value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (s, v) = p
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: expected s:v pairs, got `{p}`")))?;
            Ok((num(key, s.trim())?, num(key, v.trim())?))
        })
        .collect()
}

/// Per-scenario defaults for run length.
fn run_defaults(kind: &str) -> Result<RunConfig> {
    let base = RunConfig::default();
    Ok(match kind {
        "step" => RunConfig {
            scenario: ScenarioConfig::default_step(),
            duration: 120.0,
            distance: Some(800.0),
            ..base
        },
        "sine" => RunConfig {
            scenario: ScenarioConfig::default_sine(),
            duration: 90.0,
            distance: Some(1000.0),
            ..base
        },
        "driver" => RunConfig {
            scenario: ScenarioConfig::default_driver(),
            duration: 400.0,
            distance: None,
            ..base
        },
        other => {
            return Err(Error::Config(format!(
                "scenario.kind: unknown scenario `{other}` (expected step, sine or driver)"
            )))
        }
    })
}

impl Settings {
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut kv = KeyValues::parse(&text)?;
        for o in overrides {
            kv.set_pair(o)?;
        }
        Self::from_key_values(&kv, path.parent())
    }

    /// Builds settings from assignments. Relative driver-file paths resolve
    /// against `base_dir`.
    pub fn from_key_values(kv: &KeyValues, base_dir: Option<&Path>) -> Result<Self> {
        let kind = kv.get("scenario.kind").unwrap_or("step").to_ascii_lowercase();
        let mut run = run_defaults(&kind)?;
        let mut compare = CompareSettings::default();
        let mut shape = TireShape::default();
        let mut explicit: [Option<f64>; 4] = [None; 4];
        let mut drive = SyntheticDriveConfig::default();
        let mut driver_file: Option<PathBuf> = None;

        for (key, value) in kv.iter() {
            match key {
                "scenario.kind" => {}
                "scenario.steps" => {
                    run.scenario = ScenarioConfig::Step {
                        levels: step_levels(key, value)?,
                    }
                }
                "scenario.sine.mean" | "scenario.sine.amplitude" | "scenario.sine.wavelength" => {
                    let x: f64 = num(key, value)?;
                    if let ScenarioConfig::Sine {
                        mean,
                        amplitude,
                        wavelength,
                    } = &mut run.scenario
                    {
                        match key {
                            "scenario.sine.mean" => *mean = x,
                            "scenario.sine.amplitude" => *amplitude = x,
                            _ => *wavelength = x,
                        }
                    }
                }
                "scenario.driver.file" => {
                    let p = PathBuf::from(value);
                    driver_file = Some(match base_dir {
                        Some(dir) if p.is_relative() => dir.join(p),
                        _ => p,
                    });
                }
                "scenario.driver.seed" => drive.seed = num(key, value)?,
                "scenario.driver.duration" => drive.duration = num(key, value)?,
                "run.duration" => run.duration = num(key, value)?,
                "run.distance" => {
                    run.distance = if value.eq_ignore_ascii_case("none") {
                        None
                    } else {
                        Some(num(key, value)?)
                    }
                }
                "run.seed" => run.seed = num(key, value)?,
                "run.plant_dt" => run.plant_dt = num(key, value)?,
                "run.initial_speed" => run.initial_speed = Some(num(key, value)?),
                "controller.mode" => run.controller.mode = value.parse()?,
                "controller.kp" => run.controller.gain_kp = num(key, value)?,
                "controller.alpha_nominal" => run.controller.alpha_nominal = num(key, value)?,
                "controller.epsilon" => run.controller.epsilon = num(key, value)?,
                "controller.torque_limit" => run.controller.torque_limit = num(key, value)?,
                "controller.dt" => run.controller.control_dt = num(key, value)?,
                "estimator.window" => run.controller.window = num(key, value)?,
                "noise.enabled" => run.noise.enabled = boolean(key, value)?,
                "noise.std" => run.noise.std = num(key, value)?,
                "delay.actuation" => run.actuation_delay = num(key, value)?,
                "vehicle.mass" => run.vehicle.mass_total = num(key, value)?,
                "vehicle.lf" => run.vehicle.dist_cg_front = num(key, value)?,
                "vehicle.lr" => run.vehicle.dist_cg_rear = num(key, value)?,
                "vehicle.iz" => run.vehicle.inertia_yaw = num(key, value)?,
                "vehicle.ir" => run.vehicle.inertia_wheel = num(key, value)?,
                "vehicle.r_eff" => run.vehicle.radius_effective = num(key, value)?,
                "vehicle.gravity" => run.vehicle.gravity = num(key, value)?,
                "vehicle.cornering_stiffness" => run.cornering_stiffness = num(key, value)?,
                "tire.peak_ratio" => shape.peak_ratio = num(key, value)?,
                "tire.asymptote_ratio" => shape.asymptote_ratio = num(key, value)?,
                "tire.slope_ratio" => shape.slope_ratio = num(key, value)?,
                "tire.peak_slip" => shape.peak_slip = num(key, value)?,
                "tire.slip_regularization" => shape.slip_regularization_speed = num(key, value)?,
                "tire.stiffness_factor" => explicit[0] = Some(num(key, value)?),
                "tire.shape_factor" => explicit[1] = Some(num(key, value)?),
                "tire.peak_value" => explicit[2] = Some(num(key, value)?),
                "tire.curvature_factor" => explicit[3] = Some(num(key, value)?),
                "compare.delay_sweep" => compare.delay_sweep = boolean(key, value)?,
                "compare.sweep_delay" => compare.sweep_delay = num(key, value)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }

        if kind != "sine" && kv.iter().any(|(k, _)| k.starts_with("scenario.sine.")) {
            return Err(Error::Config("scenario.sine.* keys need scenario.kind=sine".into()));
        }
        if kind != "step" && kv.get("scenario.steps").is_some() {
            return Err(Error::Config("scenario.steps needs scenario.kind=step".into()));
        }
        if kind == "driver" {
            run.scenario = ScenarioConfig::Driver {
                source: match driver_file {
                    Some(p) => DriverSource::File(p),
                    None => DriverSource::Synthetic(drive),
                },
            };
        }

        run.tire = match explicit {
            [Some(b), Some(c), Some(d), Some(e)] => TireSpec::Explicit(TireParams {
                stiffness_factor: b,
                shape_factor: c,
                peak_value: d,
                curvature_factor: e,
                slip_regularization_speed: shape.slip_regularization_speed,
            }),
            [None, None, None, None] => TireSpec::FromLoad(shape),
            _ => {
                return Err(Error::Config(
                    "explicit tire coefficients need all of stiffness_factor, shape_factor, peak_value, curvature_factor"
                        .into(),
                ))
            }
        };
        if !(compare.sweep_delay.is_finite() && compare.sweep_delay >= 0.0) {
            return Err(Error::Config("compare.sweep_delay must be >= 0".into()));
        }

        run.validate()?;
        Ok(Settings { run, compare })
    }
}
