//! Longitudinal tire force from the Pacejka "Magic Formula".

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Default low-speed floor on slip-ratio denominators, in m/s.
pub const DEFAULT_SLIP_REGULARIZATION: f64 = 0.5;

/// Magic Formula coefficients for one tire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireParams {
    /// B
    pub stiffness_factor: f64,
    /// C, in (0, 2]
    pub shape_factor: f64,
    /// D, the force peak in N
    pub peak_value: f64,
    /// E
    pub curvature_factor: f64,
    /// Floor on the slip-ratio denominator (m/s), avoids the standstill singularity.
    pub slip_regularization_speed: f64,
}

impl TireParams {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.stiffness_factor,
            self.shape_factor,
            self.peak_value,
            self.curvature_factor,
            self.slip_regularization_speed,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("tire parameters must be finite"));
        }
        if self.stiffness_factor <= 0.0 {
            return Err(Error::invalid("tire stiffness factor B must be > 0"));
        }
        if !(self.shape_factor > 0.0 && self.shape_factor <= 2.0) {
            return Err(Error::invalid("tire shape factor C must lie in (0, 2]"));
        }
        if self.peak_value <= 0.0 {
            return Err(Error::invalid("tire peak value D must be > 0"));
        }
        if self.slip_regularization_speed <= 0.0 {
            return Err(Error::invalid("slip regularization speed must be > 0"));
        }
        Ok(())
    }

    /// Asymptotic force `D·sin(C·π/2)` reached as slip grows without bound.
    pub fn asymptote(&self) -> f64 {
        self.peak_value * (self.shape_factor * FRAC_PI_2).sin()
    }

    /// Magic Formula evaluated without restricting the slip domain.
    pub fn magic_formula(&self, slip: f64) -> f64 {
        let b = self.stiffness_factor;
        let bx = b * slip;
        let arg = bx - self.curvature_factor * (bx - bx.atan());
        self.peak_value * (self.shape_factor * arg.atan()).sin()
    }

    /// Returns a copy with the peak rescaled, keeping the curve shape.
    pub fn with_peak(mut self, peak_value: f64) -> Self {
        self.peak_value = peak_value;
        self
    }
}

/// Longitudinal tire force for a slip ratio in `[-1, 1]`. Inputs outside the
/// domain are saturated first.
pub fn pacejka_force(slip_ratio: f64, tire: &TireParams) -> f64 {
    tire.magic_formula(slip_ratio.clamp(-1.0, 1.0))
}

/// Builds Magic Formula coefficients from four features of a measured curve:
/// peak force, asymptotic force, slope at zero slip, and the slip where the
/// peak occurs.
pub fn fit_pacejka(
    peak: f64,
    asymptote: f64,
    initial_slope: f64,
    peak_slip: f64,
) -> Result<TireParams> {
    if !(peak.is_finite() && asymptote.is_finite() && initial_slope.is_finite() && peak_slip.is_finite()) {
        return Err(Error::invalid("tire curve features must be finite"));
    }
    if peak <= 0.0 {
        return Err(Error::invalid("peak force must be > 0"));
    }
    if asymptote > peak {
        return Err(Error::invalid(format!(
            "asymptote {asymptote} exceeds peak {peak}"
        )));
    }
    if asymptote <= 0.0 {
        return Err(Error::invalid("asymptote must be > 0"));
    }
    if initial_slope <= 0.0 {
        return Err(Error::invalid("initial slope must be > 0"));
    }
    if peak_slip <= 0.0 {
        return Err(Error::invalid("peak slip must be > 0"));
    }

    let d = peak;
    let c = 2.0 - 2.0 / PI * (asymptote / d).asin();
    let b = initial_slope / (c * d);
    let b_peak = b * peak_slip;
    let e = (b_peak - (PI / (2.0 * c)).tan()) / (b_peak - b_peak.atan());

    let tire = TireParams {
        stiffness_factor: b,
        shape_factor: c,
        peak_value: d,
        curvature_factor: e,
        slip_regularization_speed: DEFAULT_SLIP_REGULARIZATION,
    };
    tire.validate()?;
    Ok(tire)
}

/// Longitudinal slip ratio of a wheel, saturated to `[-1, 1]`.
///
/// Propulsion (`r·ω ≥ V_x`) normalizes by the wheel's circumferential speed,
/// braking by the vehicle speed. Both denominators are floored at
/// `regularization`.
pub fn slip_ratio(wheel_speed: f64, v_long: f64, r_eff: f64, regularization: f64) -> f64 {
    let rim = r_eff * wheel_speed;
    let diff = rim - v_long;
    let denom = if rim >= v_long {
        rim.abs().max(regularization)
    } else {
        v_long.abs().max(regularization)
    };
    (diff / denom).clamp(-1.0, 1.0)
}
