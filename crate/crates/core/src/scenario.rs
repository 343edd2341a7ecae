//! Reference speed profiles indexed by curvilinear abscissa, plus driver
//! record ingestion and waypoint reconstruction.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points in the driver-speed moving average.
pub const DRIVER_FILTER_POINTS: usize = 100;

/// Half-width of the abscissa difference used for the driver profile slope, m.
pub const DRIVER_SLOPE_SPAN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Step,
    Sine,
    Driver,
}

/// Speed reference as a function of the distance travelled.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceProfile {
    /// Piecewise-constant speed; each level holds from its breakpoint
    /// (inclusive) up to the next one.
    Step { levels: Vec<(f64, f64)> },
    Sine {
        mean: f64,
        amplitude: f64,
        wavelength: f64,
    },
    /// Linear interpolation over reconstructed `(s, v)` knots.
    Driver { abscissa: Vec<f64>, speed: Vec<f64> },
}

pub fn step_profile(levels: &[(f64, f64)]) -> Result<ReferenceProfile> {
    if levels.is_empty() {
        return Err(Error::invalid("step profile needs at least one level"));
    }
    for w in levels.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::invalid("step breakpoints must be strictly increasing"));
        }
    }
    if levels.iter().any(|&(s, v)| !(s.is_finite() && v.is_finite() && v >= 0.0)) {
        return Err(Error::invalid("step levels must be finite with speed >= 0"));
    }
    Ok(ReferenceProfile::Step {
        levels: levels.to_vec(),
    })
}

pub fn sine_profile(mean: f64, amplitude: f64, wavelength: f64) -> Result<ReferenceProfile> {
    if !(mean.is_finite() && amplitude.is_finite() && wavelength.is_finite()) {
        return Err(Error::invalid("sine parameters must be finite"));
    }
    if amplitude < 0.0 || amplitude >= mean {
        return Err(Error::invalid(format!(
            "sine amplitude must lie in [0, mean), got {amplitude} with mean {mean}"
        )));
    }
    if wavelength <= 0.0 {
        return Err(Error::invalid("sine wavelength must be > 0"));
    }
    Ok(ReferenceProfile::Sine {
        mean,
        amplitude,
        wavelength,
    })
}

pub fn driver_profile(path: &ReconstructedPath) -> Result<ReferenceProfile> {
    if path.is_empty() {
        return Err(Error::DriverRecord("reconstructed path is empty".into()));
    }
    // collapse repeated abscissae (standstill) onto the latest speed
    let mut abscissa: Vec<f64> = Vec::with_capacity(path.len());
    let mut speed: Vec<f64> = Vec::with_capacity(path.len());
    for (&s, &v) in path.s_ref.iter().zip(&path.v_ref) {
        match abscissa.last() {
            Some(&last) if s <= last => *speed.last_mut().unwrap() = v.max(0.0),
            _ => {
                abscissa.push(s);
                speed.push(v.max(0.0));
            }
        }
    }
    Ok(ReferenceProfile::Driver { abscissa, speed })
}

impl ReferenceProfile {
    pub fn kind(&self) -> ProfileKind {
        match self {
            ReferenceProfile::Step { .. } => ProfileKind::Step,
            ReferenceProfile::Sine { .. } => ProfileKind::Sine,
            ReferenceProfile::Driver { .. } => ProfileKind::Driver,
        }
    }

    /// Reference speed at abscissa `s`.
    pub fn speed_at(&self, s: f64) -> f64 {
        match self {
            ReferenceProfile::Step { levels } => {
                let idx = levels.partition_point(|&(b, _)| b <= s);
                levels[idx.saturating_sub(1)].1
            }
            ReferenceProfile::Sine {
                mean,
                amplitude,
                wavelength,
            } => mean + amplitude * (TAU * s / wavelength).sin(),
            ReferenceProfile::Driver { abscissa, speed } => interpolate(abscissa, speed, s),
        }
    }

    /// `(v_ref, dv_ref/dt)` at abscissa `s` while travelling at `ds_dt`.
    pub fn query(&self, s: f64, ds_dt: f64) -> (f64, f64) {
        let v = self.speed_at(s);
        let slope = match self {
            ReferenceProfile::Step { .. } => 0.0,
            ReferenceProfile::Sine {
                amplitude,
                wavelength,
                ..
            } => TAU * amplitude / wavelength * (TAU * s / wavelength).cos(),
            ReferenceProfile::Driver { .. } => {
                (self.speed_at(s + DRIVER_SLOPE_SPAN) - self.speed_at(s - DRIVER_SLOPE_SPAN))
                    / (2.0 * DRIVER_SLOPE_SPAN)
            }
        };
        (v, slope * ds_dt)
    }

    /// Largest abscissa with defined data, if bounded.
    pub fn end_abscissa(&self) -> Option<f64> {
        match self {
            ReferenceProfile::Driver { abscissa, .. } => abscissa.last().copied(),
            _ => None,
        }
    }
}

/// Linear interpolation, clamped to the end knots.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&k| k <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (y0, y1) = (ys[i - 1], ys[i]);
    if x == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// One row of a recorded drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverRecord {
    pub t: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconstructedPath {
    pub x_ref: Vec<f64>,
    pub y_ref: Vec<f64>,
    pub psi_ref: Vec<f64>,
    pub s_ref: Vec<f64>,
    pub v_ref: Vec<f64>,
}

impl ReconstructedPath {
    pub fn len(&self) -> usize {
        self.s_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_ref.is_empty()
    }
}

/// Centered moving average over `points` samples, truncated at the edges.
pub fn moving_average(xs: &[f64], points: usize) -> Vec<f64> {
    let points = points.max(1);
    let before = points / 2;
    let after = points - before - 1;
    let n = xs.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for x in xs {
        prefix.push(prefix.last().unwrap() + x);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            let mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
            // keep constant inputs exact despite prefix-sum rounding
            if xs[lo..hi].iter().all(|&x| x == xs[i]) {
                xs[i]
            } else {
                mean
            }
        })
        .collect()
}

/// Dead-reckons waypoints and abscissa from recorded body velocities.
pub fn reconstruct_path(records: &[DriverRecord]) -> Result<ReconstructedPath> {
    if records.len() < 2 {
        return Err(Error::DriverRecord("need at least 2 records".into()));
    }
    for (i, w) in records.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(Error::DriverRecord(format!(
                "timestamps not strictly increasing at row {}",
                i + 1
            )));
        }
    }
    if records
        .iter()
        .any(|r| !(r.t.is_finite() && r.vx.is_finite() && r.vy.is_finite() && r.yaw_rate.is_finite()))
    {
        return Err(Error::DriverRecord("non-finite value in records".into()));
    }

    let vx: Vec<f64> = records.iter().map(|r| r.vx).collect();
    let vy: Vec<f64> = records.iter().map(|r| r.vy).collect();
    let vx = moving_average(&vx, DRIVER_FILTER_POINTS);
    let vy = moving_average(&vy, DRIVER_FILTER_POINTS);

    let n = records.len();
    let mut path = ReconstructedPath {
        x_ref: Vec::with_capacity(n),
        y_ref: Vec::with_capacity(n),
        psi_ref: Vec::with_capacity(n),
        s_ref: Vec::with_capacity(n),
        v_ref: vx.clone(),
    };
    let (mut x, mut y, mut psi, mut s) = (0.0, 0.0, 0.0, 0.0);
    path.x_ref.push(x);
    path.y_ref.push(y);
    path.psi_ref.push(psi);
    path.s_ref.push(s);
    for i in 0..n - 1 {
        let dt = records[i + 1].t - records[i].t;
        let (sp, cp) = f64::sin_cos(psi);
        let dx = vx[i] * dt * cp - vy[i] * dt * sp;
        let dy = vx[i] * dt * sp + vy[i] * dt * cp;
        x += dx;
        y += dy;
        psi += dt * records[i].yaw_rate;
        s += dx.hypot(dy);
        path.x_ref.push(x);
        path.y_ref.push(y);
        path.psi_ref.push(psi);
        path.s_ref.push(s);
    }
    Ok(path)
}

pub fn read_driver_records(path: &Path) -> Result<Vec<DriverRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "vx", "vy", "yaw_rate"] {
        return Err(Error::DriverRecord(format!(
            "{}: expected header `t,vx,vy,yaw_rate`",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_driver_records<W: std::io::Write>(w: W, records: &[DriverRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "vx", "vy", "yaw_rate"])?;
    for r in records {
        wtr.write_record([
            format!("{:.3}", r.t),
            format!("{:.6}", r.vx),
            format!("{:.6}", r.vy),
            format!("{:.6}", r.yaw_rate),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<driver records>", e))?;
    Ok(())
}

/// Settings for the synthetic drive used in place of a real recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticDriveConfig {
    pub seed: u64,
    /// s
    pub duration: f64,
    /// s
    pub sample_dt: f64,
    pub initial_speed: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    /// m/s²
    pub max_accel: f64,
    /// m/s², positive
    pub max_decel: f64,
    /// raw sensor noise on the recorded speeds, m/s
    pub noise_std: f64,
}

impl Default for SyntheticDriveConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            duration: 120.0,
            sample_dt: 0.01,
            initial_speed: 10.0,
            min_speed: 6.0,
            max_speed: 24.0,
            max_accel: 2.5,
            max_decel: 4.0,
            noise_std: 0.1,
        }
    }
}

/// Generates a plausible track drive: legs of acceleration, cruising and
/// braking, some of them through constant-radius corners.
pub fn synthetic_drive(cfg: &SyntheticDriveConfig) -> Result<Vec<DriverRecord>> {
    if !(cfg.sample_dt > 0.0 && cfg.duration > cfg.sample_dt) {
        return Err(Error::invalid("synthetic drive needs duration > sample_dt > 0"));
    }
    if !(cfg.min_speed > 0.0 && cfg.max_speed > cfg.min_speed) {
        return Err(Error::invalid("synthetic drive needs 0 < min_speed < max_speed"));
    }
    if !(cfg.max_accel > 0.0 && cfg.max_decel > 0.0 && cfg.noise_std >= 0.0) {
        return Err(Error::invalid("synthetic drive limits must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    let n = (cfg.duration / cfg.sample_dt).round() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut v = cfg.initial_speed.clamp(cfg.min_speed, cfg.max_speed);
    let mut target = v;
    let mut rate = 0.0;
    let mut hold = 0.0;
    let mut curvature: f64 = 0.0;
    let mut curvature_target: f64 = 0.0;

    for k in 0..n {
        let t = k as f64 * cfg.sample_dt;
        if (v - target).abs() < 1e-9 {
            hold -= cfg.sample_dt;
            if hold <= 0.0 {
                target = rng.random_range(cfg.min_speed..cfg.max_speed);
                rate = if target > v {
                    rng.random_range(0.4..1.0) * cfg.max_accel
                } else {
                    rng.random_range(0.4..1.0) * cfg.max_decel
                };
                hold = rng.random_range(2.0..6.0);
                curvature_target = if rng.random_bool(0.4) {
                    let radius = rng.random_range(60.0..250.0);
                    if rng.random_bool(0.5) { 1.0 / radius } else { -1.0 / radius }
                } else {
                    0.0
                };
            }
        }
        let dv = (target - v).clamp(-rate * cfg.sample_dt, rate * cfg.sample_dt);
        v += dv;
        curvature += (curvature_target - curvature).clamp(-2e-4, 2e-4);
        let yaw_rate = v * curvature;
        // small sideslip proportional to lateral acceleration
        let vy = -0.002 * v * yaw_rate;
        out.push(DriverRecord {
            t,
            vx: v + noise.sample(&mut rng),
            vy: vy + 0.1 * noise.sample(&mut rng),
            yaw_rate,
        });
    }
    Ok(out)
}
