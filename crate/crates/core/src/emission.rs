//! Field-emission current density and Nottingham heat flux.
//!
//! Murphy-Good form of the Fowler-Nordheim equation with Forbes'
//! approximations for the image-rounded barrier functions
//!
//! ```text
//! f    = c^2 F / phi^2
//! v(f) = 1 - f + (f/6) ln f
//! t(f) = 1 + f/9 - (f/18) ln f
//! J0   = a F^2 / (phi t^2) exp(-v b phi^(3/2) / F)
//! ```
//!
//! and the low-temperature thermal factor `x / sin x` with
//! `x = pi k T / d_F`. The Nottingham energy per electron is
//! `pi k T cot(pi k T / d_F)`, which tends to `d_F` at zero temperature.
//!
//! Above `f = 1` the barrier top drops below the Fermi level and the
//! tunnelling formula no longer applies; [`OverBarrier`] selects how `J`
//! is continued there.

use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN_EV, ELECTRON_MASS, ELEMENTARY_CHARGE, FN_A, FN_B, HBAR, SCHOTTKY_SQ};
use crate::{Error, Result};

/// Continuation of the emission law past barrier collapse (`f > 1`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverBarrier {
    /// Hold `J` at its value at barrier collapse.
    Clamp,
    /// Continue `ln J` linearly in `F` with the slope it has at collapse,
    /// so `J` stays smooth and keeps growing.
    #[default]
    LogLinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterMaterial {
    /// Work function (eV).
    pub work_function: f64,
    pub over_barrier: OverBarrier,
    /// Optional ceiling on `J` (A/m^2).
    pub max_current_density: Option<f64>,
}

impl Default for EmitterMaterial {
    fn default() -> Self {
        Self { work_function: 4.5, over_barrier: OverBarrier::LogLinear, max_current_density: None }
    }
}

impl EmitterMaterial {
    pub fn new(work_function: f64) -> Result<Self> {
        let m = Self { work_function, ..Self::default() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.work_function > 0.0) || !self.work_function.is_finite() {
            return Err(Error::config(format!("work function must be positive, got {}", self.work_function)));
        }
        if let Some(j) = self.max_current_density {
            if !(j > 0.0) {
                return Err(Error::config(format!("current density ceiling must be positive, got {j}")));
            }
        }
        Ok(())
    }

    /// Field at which the barrier top reaches the Fermi level (V/m).
    pub fn collapse_field(&self) -> f64 {
        self.work_function * self.work_function / SCHOTTKY_SQ
    }
}

/// Emission state at one surface point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EmissionPoint {
    /// Current density (A/m^2).
    pub current_density: f64,
    /// Nottingham heat flux into the surface (W/m^2); negative is cooling.
    pub nottingham: f64,
    /// The field was past barrier collapse and the over-barrier policy applied.
    pub over_barrier: bool,
    /// The configured ceiling limited `J`.
    pub capped: bool,
}

/// Per-face emission result.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FaceEmission {
    pub face: usize,
    pub current_density: f64,
    pub nottingham: f64,
}

/// Barrier function `v(f)`.
pub fn barrier_v(f: f64) -> f64 {
    if f == 0.0 {
        return 1.0;
    }
    1.0 - f + f / 6.0 * f.ln()
}

/// Barrier function `t(f)`.
pub fn barrier_t(f: f64) -> f64 {
    if f == 0.0 {
        return 1.0;
    }
    1.0 + f / 9.0 - f / 18.0 * f.ln()
}

/// Scaled barrier field `f`.
pub fn scaled_field(field: f64, work_function: f64) -> f64 {
    SCHOTTKY_SQ * field / (work_function * work_function)
}

/// Decay width `d_F` (eV) of the transmission below the Fermi level.
pub fn decay_width(field: f64, work_function: f64) -> f64 {
    let f = scaled_field(field, work_function).min(1.0);
    let p = (2.0 * ELECTRON_MASS * work_function * ELEMENTARY_CHARGE).sqrt();
    HBAR * field / (2.0 * p * barrier_t(f))
}

/// Largest `pi k T / d_F` used by the thermal factor. The factor diverges
/// at `pi`, where the low-temperature expansion has long lost validity.
pub const MAX_THERMAL_ARGUMENT: f64 = 0.75 * std::f64::consts::PI;

fn thermal_argument(field: f64, temperature: f64, work_function: f64) -> f64 {
    (std::f64::consts::PI * BOLTZMANN_EV * temperature / decay_width(field, work_function)).min(MAX_THERMAL_ARGUMENT)
}

fn cold_current(field: f64, phi: f64) -> f64 {
    let f = scaled_field(field, phi);
    let t = barrier_t(f);
    FN_A * field * field / (phi * t * t) * (-barrier_v(f) * FN_B * phi.powf(1.5) / field).exp()
}

/// `d ln J0 / d ln F` at barrier collapse.
fn collapse_slope(phi: f64, collapse_field: f64) -> f64 {
    // v(1) = 0, v'(1) = -5/6, t(1) = 10/9, t'(1) = 1/18
    2.0 - 2.0 * (1.0 / 18.0) / (10.0 / 9.0) + 5.0 / 6.0 * FN_B * phi.powf(1.5) / collapse_field
}

fn check_inputs(field: f64, temperature: f64) -> Result<()> {
    if !(field >= 0.0) || !field.is_finite() {
        return Err(Error::InvalidEmission(format!("surface field must be finite and >= 0, got {field}")));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidEmission(format!("temperature must be positive, got {temperature}")));
    }
    Ok(())
}

/// Current density and Nottingham flux for surface field `field` (V/m,
/// pulling electrons out) at temperature `temperature` (K).
pub fn evaluate(field: f64, temperature: f64, mat: &EmitterMaterial) -> Result<EmissionPoint> {
    check_inputs(field, temperature)?;
    if field == 0.0 {
        return Ok(EmissionPoint::default());
    }
    let phi = mat.work_function;
    let fc = mat.collapse_field();
    let over_barrier = field > fc;
    let cold = if !over_barrier {
        cold_current(field, phi)
    } else {
        let j_c = cold_current(fc, phi);
        match mat.over_barrier {
            OverBarrier::Clamp => j_c,
            OverBarrier::LogLinear => j_c * (collapse_slope(phi, fc) * (field / fc - 1.0)).exp(),
        }
    };
    let x = thermal_argument(field, temperature, phi);
    let mut j = cold * x / x.sin();
    let mut capped = false;
    if let Some(max) = mat.max_current_density {
        if j > max {
            j = max;
            capped = true;
        }
    }
    let energy = std::f64::consts::PI * BOLTZMANN_EV * temperature / x.tan();
    Ok(EmissionPoint { current_density: j, nottingham: j * energy, over_barrier, capped })
}

/// Emitted current density (A/m^2).
pub fn current_density(field: f64, temperature: f64, mat: &EmitterMaterial) -> Result<f64> {
    Ok(evaluate(field, temperature, mat)?.current_density)
}

/// Nottingham heat flux (W/m^2), positive when it heats the surface.
pub fn nottingham_flux(field: f64, temperature: f64, mat: &EmitterMaterial) -> Result<f64> {
    Ok(evaluate(field, temperature, mat)?.nottingham)
}

/// Mean energy (eV) of emitted electrons below the Fermi level, i.e. the
/// heat left behind per emitted electron.
pub fn nottingham_energy(field: f64, temperature: f64, mat: &EmitterMaterial) -> Result<f64> {
    check_inputs(field, temperature)?;
    if field == 0.0 {
        return Ok(0.0);
    }
    let x = thermal_argument(field, temperature, mat.work_function);
    Ok(std::f64::consts::PI * BOLTZMANN_EV * temperature / x.tan())
}
