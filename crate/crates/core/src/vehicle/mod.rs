//! Planar 7-DoF vehicle plant: body longitudinal, lateral and yaw motion plus
//! the spin of each wheel, with Pacejka longitudinal tire forces.

mod tire;

pub use tire::{fit_pacejka, pacejka_force, slip_ratio, TireParams, DEFAULT_SLIP_REGULARIZATION};

use crate::error::{Error, Result};
use crate::ode::rk4_step;

/// Wheel order used by every per-wheel array: front-left, front-right,
/// rear-left, rear-right.
pub const WHEELS: usize = 4;
pub const FRONT: [usize; 2] = [0, 1];
pub const REAR: [usize; 2] = [2, 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass_total: f64,
    /// CG to front axle, m
    pub dist_cg_front: f64,
    /// CG to rear axle, m
    pub dist_cg_rear: f64,
    /// kg·m²
    pub inertia_yaw: f64,
    /// per wheel, kg·m²
    pub inertia_wheel: f64,
    /// m
    pub radius_effective: f64,
    /// m/s²
    pub gravity: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass_total: 1500.0,
            dist_cg_front: 1.2,
            dist_cg_rear: 1.4,
            inertia_yaw: 2500.0,
            inertia_wheel: 1.2,
            radius_effective: 0.3,
            gravity: 9.81,
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.dist_cg_front + self.dist_cg_rear
    }

    /// Static normal load on one wheel, N. No load transfer.
    pub fn static_wheel_load(&self, wheel: usize) -> f64 {
        let opposite = if FRONT.contains(&wheel) {
            self.dist_cg_rear
        } else {
            self.dist_cg_front
        };
        self.mass_total * self.gravity * opposite / (2.0 * self.wheelbase())
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass_total", self.mass_total),
            ("dist_cg_front", self.dist_cg_front),
            ("dist_cg_rear", self.dist_cg_rear),
            ("inertia_yaw", self.inertia_yaw),
            ("inertia_wheel", self.inertia_wheel),
            ("radius_effective", self.radius_effective),
            ("gravity", self.gravity),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("vehicle.{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Shape of the tire curve relative to the static wheel load. Each wheel gets
/// its own Magic Formula fit scaled by its load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireShape {
    pub peak_ratio: f64,
    pub asymptote_ratio: f64,
    /// initial slope per unit slip, as a multiple of the load
    pub slope_ratio: f64,
    pub peak_slip: f64,
    pub slip_regularization_speed: f64,
}

impl Default for TireShape {
    fn default() -> Self {
        Self {
            peak_ratio: 0.9,
            asymptote_ratio: 0.75,
            slope_ratio: 15.0,
            peak_slip: 0.15,
            slip_regularization_speed: DEFAULT_SLIP_REGULARIZATION,
        }
    }
}

impl TireShape {
    pub fn fit_for_load(&self, load: f64) -> Result<TireParams> {
        let mut t = fit_pacejka(
            self.peak_ratio * load,
            self.asymptote_ratio * load,
            self.slope_ratio * load,
            self.peak_slip,
        )?;
        t.slip_regularization_speed = self.slip_regularization_speed;
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TireSpec {
    /// Fit per wheel from the static load.
    FromLoad(TireShape),
    /// Same coefficients on every wheel.
    Explicit(TireParams),
}

impl Default for TireSpec {
    fn default() -> Self {
        TireSpec::FromLoad(TireShape::default())
    }
}

/// Default lateral stiffness per axle, N/rad.
pub const DEFAULT_CORNERING_STIFFNESS: f64 = 80_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    /// V_x, m/s
    pub speed_long: f64,
    /// V_y, m/s
    pub speed_lat: f64,
    /// rad/s
    pub yaw_rate: f64,
    /// rad
    pub yaw: f64,
    /// rad/s
    pub wheel_speed: [f64; WHEELS],
    pub pos_x: f64,
    pub pos_y: f64,
    /// curvilinear abscissa, m
    pub abscissa: f64,
}

const STATE_DIM: usize = 11;

impl VehicleState {
    /// Straight-line free rolling at `speed` with no wheel slip.
    pub fn rolling(speed: f64, veh: &VehicleParams) -> Self {
        Self {
            speed_long: speed,
            wheel_speed: [speed / veh.radius_effective; WHEELS],
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    fn to_array(&self) -> [f64; STATE_DIM] {
        let w = self.wheel_speed;
        [
            self.speed_long,
            self.speed_lat,
            self.yaw_rate,
            self.yaw,
            w[0],
            w[1],
            w[2],
            w[3],
            self.pos_x,
            self.pos_y,
            self.abscissa,
        ]
    }

    fn from_array(a: &[f64; STATE_DIM]) -> Self {
        Self {
            speed_long: a[0],
            speed_lat: a[1],
            yaw_rate: a[2],
            yaw: a[3],
            wheel_speed: [a[4], a[5], a[6], a[7]],
            pos_x: a[8],
            pos_y: a[9],
            abscissa: a[10],
        }
    }
}

/// Time derivative of a [`VehicleState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateRate {
    pub accel_long: f64,
    pub accel_lat: f64,
    pub yaw_accel: f64,
    pub yaw_rate: f64,
    pub wheel_accel: [f64; WHEELS],
    pub vel_x: f64,
    pub vel_y: f64,
    pub abscissa_rate: f64,
}

impl StateRate {
    fn to_array(self) -> [f64; STATE_DIM] {
        let w = self.wheel_accel;
        [
            self.accel_long,
            self.accel_lat,
            self.yaw_accel,
            self.yaw_rate,
            w[0],
            w[1],
            w[2],
            w[3],
            self.vel_x,
            self.vel_y,
            self.abscissa_rate,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelTorques {
    /// N·m
    pub motor: [f64; WHEELS],
    /// N·m, never negative
    pub brake: [f64; WHEELS],
}

impl WheelTorques {
    pub fn net(&self, wheel: usize) -> f64 {
        self.motor[wheel] - self.brake[wheel]
    }

    pub fn total(&self) -> f64 {
        (0..WHEELS).map(|i| self.net(i)).sum()
    }
}

/// The simulated vehicle: body and wheel parameters plus one tire per wheel.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub vehicle: VehicleParams,
    pub tires: [TireParams; WHEELS],
    /// per axle, N/rad
    pub cornering_stiffness: f64,
}

impl Plant {
    pub fn new(vehicle: VehicleParams, tire: TireSpec, cornering_stiffness: f64) -> Result<Self> {
        vehicle.validate()?;
        if !(cornering_stiffness.is_finite() && cornering_stiffness >= 0.0) {
            return Err(Error::invalid("cornering stiffness must be finite and >= 0"));
        }
        let mut tires = [TireParams {
            stiffness_factor: 1.0,
            shape_factor: 1.0,
            peak_value: 1.0,
            curvature_factor: 0.0,
            slip_regularization_speed: DEFAULT_SLIP_REGULARIZATION,
        }; WHEELS];
        for (i, t) in tires.iter_mut().enumerate() {
            *t = match tire {
                TireSpec::FromLoad(shape) => shape.fit_for_load(vehicle.static_wheel_load(i))?,
                TireSpec::Explicit(p) => {
                    p.validate()?;
                    p
                }
            };
        }
        Ok(Self {
            vehicle,
            tires,
            cornering_stiffness,
        })
    }

    /// Longitudinal tire-frame force on each wheel.
    pub fn tire_forces(&self, state: &VehicleState, steer: f64) -> [f64; WHEELS] {
        let veh = &self.vehicle;
        let front_speed = state.speed_long * steer.cos()
            + (state.speed_lat + veh.dist_cg_front * state.yaw_rate) * steer.sin();
        let mut out = [0.0; WHEELS];
        for (i, f) in out.iter_mut().enumerate() {
            let v_wheel = if FRONT.contains(&i) { front_speed } else { state.speed_long };
            let tire = &self.tires[i];
            let slip = slip_ratio(
                state.wheel_speed[i],
                v_wheel,
                veh.radius_effective,
                tire.slip_regularization_speed,
            );
            *f = pacejka_force(slip, tire);
        }
        out
    }

    pub fn dynamics(&self, state: &VehicleState, torques: &WheelTorques, steer: f64) -> StateRate {
        let veh = &self.vehicle;
        let m = veh.mass_total;
        let vx = state.speed_long;
        let vy = state.speed_lat;
        let r = state.yaw_rate;

        let fxp = self.tire_forces(state, steer);
        let fxp_front = fxp[0] + fxp[1];
        let fxp_rear = fxp[2] + fxp[3];

        // linear lateral tires, only there to keep the body equations closed
        let reg = self.tires[0].slip_regularization_speed;
        let vx_den = vx.abs().max(reg);
        let slip_front = steer - (vy + veh.dist_cg_front * r).atan2(vx_den);
        let slip_rear = -(vy - veh.dist_cg_rear * r).atan2(vx_den);
        let fyp_front = self.cornering_stiffness * slip_front;
        let fyp_rear = self.cornering_stiffness * slip_rear;

        let (sd, cd) = steer.sin_cos();
        let fx_front = fxp_front * cd - fyp_front * sd;
        let fy_front = fxp_front * sd + fyp_front * cd;
        let fx_rear = fxp_rear;
        let fy_rear = fyp_rear;

        let mut wheel_accel = [0.0; WHEELS];
        for (i, a) in wheel_accel.iter_mut().enumerate() {
            *a = (torques.motor[i] - torques.brake[i] - fxp[i] * veh.radius_effective)
                / veh.inertia_wheel;
        }

        let (sp, cp) = state.yaw.sin_cos();
        StateRate {
            accel_long: (fx_front + fx_rear) / m + r * vy,
            accel_lat: (fy_front + fy_rear) / m - r * vx,
            yaw_accel: (veh.dist_cg_front * fy_front - veh.dist_cg_rear * fy_rear) / veh.inertia_yaw,
            yaw_rate: r,
            wheel_accel,
            vel_x: vx * cp - vy * sp,
            vel_y: vx * sp + vy * cp,
            abscissa_rate: vx.hypot(vy),
        }
    }

    /// One RK4 step of length `dt` with torques and steer held constant.
    pub fn integrate_step(
        &self,
        state: &VehicleState,
        torques: &WheelTorques,
        steer: f64,
        dt: f64,
    ) -> Result<VehicleState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("integration step must be > 0, got {dt}")));
        }
        let mut blew_up = false;
        let next = rk4_step(&state.to_array(), dt, |y| {
            let s = VehicleState::from_array(y);
            if !s.is_finite() {
                blew_up = true;
            }
            self.dynamics(&s, torques, steer).to_array()
        });
        let next = VehicleState::from_array(&next);
        if blew_up || !next.is_finite() {
            return Err(Error::BlowUp { t: f64::NAN });
        }
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant() -> Plant {
        Plant::new(VehicleParams::default(), TireSpec::default(), DEFAULT_CORNERING_STIFFNESS).unwrap()
    }

    #[test]
    fn static_loads_sum_to_weight() {
        let v = VehicleParams::default();
        let total: f64 = (0..WHEELS).map(|i| v.static_wheel_load(i)).sum();
        assert!((total - v.mass_total * v.gravity).abs() < 1e-9);
        assert!(v.static_wheel_load(0) > v.static_wheel_load(2));
    }

    #[test]
    fn steady_rolling_has_no_forces() {
        let p = plant();
        let s = VehicleState::rolling(10.0, &p.vehicle);
        let d = p.dynamics(&s, &WheelTorques::default(), 0.0);
        assert_eq!(d.accel_long, 0.0);
        assert_eq!(d.accel_lat, 0.0);
        assert_eq!(d.yaw_accel, 0.0);
        assert_eq!(d.wheel_accel, [0.0; WHEELS]);
        assert_eq!(d.vel_x, 10.0);
        assert_eq!(d.abscissa_rate, 10.0);
    }

    #[test]
    fn straight_line_acceleration_is_force_over_mass() {
        let p = plant();
        let mut s = VehicleState::rolling(10.0, &p.vehicle);
        s.wheel_speed = [35.0, 34.5, 33.7, 33.0];
        let d = p.dynamics(&s, &WheelTorques::default(), 0.0);
        let f: f64 = p.tire_forces(&s, 0.0).iter().sum();
        assert!((d.accel_long - f / p.vehicle.mass_total).abs() < 1e-12);
        assert_eq!(d.accel_lat, 0.0);
    }

    #[test]
    fn wheel_responds_to_motor_torque() {
        let p = plant();
        let s = VehicleState::rolling(10.0, &p.vehicle);
        let mut tq = WheelTorques::default();
        tq.motor[0] = 100.0;
        let d = p.dynamics(&s, &tq, 0.0);
        assert!((d.wheel_accel[0] - 100.0 / p.vehicle.inertia_wheel).abs() < 1e-12);
    }

    #[test]
    fn free_rolling_keeps_speed() {
        let p = plant();
        let mut s = VehicleState::rolling(12.0, &p.vehicle);
        for _ in 0..1000 {
            s = p.integrate_step(&s, &WheelTorques::default(), 0.0, 1e-3).unwrap();
        }
        assert!((s.speed_long - 12.0).abs() < 1e-12);
        assert!((s.abscissa - 12.0).abs() < 1e-9);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        // heavier wheels keep the slip mode well resolved so truncation error
        // dominates round-off at these steps
        let vehicle = VehicleParams {
            inertia_wheel: 40.0,
            ..Default::default()
        };
        let p = Plant::new(vehicle, TireSpec::default(), DEFAULT_CORNERING_STIFFNESS).unwrap();
        let mut tq = WheelTorques::default();
        tq.motor[0] = 600.0;
        tq.motor[1] = 600.0;
        let run = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut s = VehicleState::rolling(10.0, &p.vehicle);
            for _ in 0..n {
                s = p.integrate_step(&s, &tq, 0.0, dt).unwrap();
            }
            s.wheel_speed[0]
        };
        let (a, b, c) = (run(0.02), run(0.01), run(0.005));
        let ratio = (a - b).abs() / (b - c).abs();
        // 2^4 for a fourth-order method
        assert!(ratio > 12.0 && ratio < 20.0, "Richardson ratio {ratio}");
    }

    #[test]
    fn integrate_is_bit_deterministic() {
        let p = plant();
        let mut tq = WheelTorques::default();
        tq.brake = [40.0; WHEELS];
        let s0 = VehicleState::rolling(15.0, &p.vehicle);
        let a = p.integrate_step(&s0, &tq, 0.02, 1e-3).unwrap();
        let b = p.integrate_step(&s0, &tq, 0.02, 1e-3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let p = plant();
        let mut s = VehicleState::rolling(10.0, &p.vehicle);
        s.speed_lat = f64::NAN;
        assert!(matches!(
            p.integrate_step(&s, &WheelTorques::default(), 0.0, 1e-3),
            Err(Error::BlowUp { .. })
        ));
        assert!(p.integrate_step(&s, &WheelTorques::default(), 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_bad_vehicle() {
        let v = VehicleParams {
            mass_total: -1.0,
            ..Default::default()
        };
        assert!(Plant::new(v, TireSpec::default(), 1.0).is_err());
    }
}
