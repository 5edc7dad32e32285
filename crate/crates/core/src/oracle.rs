//! One-dimensional reference solutions for a planar field-emission diode.
//!
//! With electrons leaving the cathode at rest, current density `J` and
//! potential `Phi(x)` measured from the cathode, the gap satisfies
//! `E dE/dPhi = (J/eps0) sqrt(m / (2 e Phi))`, so
//! `E^2 = E_c^2 + k sqrt(Phi)` with `k = (4J/eps0) sqrt(m/(2e))`.
//! The gap width belonging to a cathode field `E_c` is
//! `d = integral_0^V dPhi / E`, evaluated numerically and inverted for
//! `E_c`. The self-consistent `J` then solves `J = J_FN(E_c(J))`.

use rayon::prelude::*;

use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY};
use crate::emission::{current_density, EmitterMaterial};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiodeSpec {
    /// Electrode gap (m).
    pub gap: f64,
    /// Anode voltage (V).
    pub voltage: f64,
    /// Electrode area (m^2); only used to convert to current.
    pub area: f64,
}

impl DiodeSpec {
    fn validate(&self) -> Result<()> {
        if !(self.gap > 0.0) || !(self.voltage >= 0.0) || !(self.area >= 0.0) {
            return Err(Error::config(format!(
                "diode needs gap > 0, voltage >= 0, area >= 0 (got {:?})",
                self
            )));
        }
        Ok(())
    }
}

/// Child-Langmuir current density (A/m^2).
pub fn child_langmuir(voltage: f64, gap: f64) -> f64 {
    let v = voltage.max(0.0);
    4.0 * VACUUM_PERMITTIVITY / 9.0 * (2.0 * ELEMENTARY_CHARGE / ELECTRON_MASS).sqrt() * v.powf(1.5) / (gap * gap)
}

fn space_charge_k(j: f64) -> f64 {
    4.0 * j / VACUUM_PERMITTIVITY * (ELECTRON_MASS / (2.0 * ELEMENTARY_CHARGE)).sqrt()
}

// 8-point Gauss-Legendre nodes and weights on [-1, 1]
const GL_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

fn gauss_panels(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL_X.iter().zip(GL_W) {
            sum += w * (f(mid - 0.5 * h * x) + f(mid + 0.5 * h * x));
        }
    }
    0.5 * h * sum
}

/// Numerical integration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub initial_panels: usize,
    pub max_panels: usize,
    /// Panels are doubled until successive results agree to this.
    pub rel_tol: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { initial_panels: 4, max_panels: 1 << 16, rel_tol: 1e-13 }
    }
}

/// Gap width over which the potential rises from 0 to `voltage` for
/// cathode field `e_c` and current density `j`.
pub fn gap_for_field(e_c: f64, j: f64, voltage: f64, quad: &Quadrature) -> f64 {
    let k = space_charge_k(j);
    // Phi = u^4 makes the integrand smooth at the cathode
    let f = |u: f64| 4.0 * u * u * u / (e_c * e_c + k * u * u).sqrt();
    let top = voltage.powf(0.25);
    let mut panels = quad.initial_panels.max(1);
    let mut last = gauss_panels(&f, 0.0, top, panels);
    while panels < quad.max_panels {
        panels *= 2;
        let next = gauss_panels(&f, 0.0, top, panels);
        if (next - last).abs() <= quad.rel_tol * next.abs() {
            return next;
        }
        last = next;
    }
    last
}

/// Cathode field for current density `j`, or `None` if `j` exceeds what the
/// gap can carry.
pub fn cathode_field(j: f64, spec: &DiodeSpec, quad: &Quadrature) -> Option<f64> {
    let vacuum = spec.voltage / spec.gap;
    if j <= 0.0 || spec.voltage == 0.0 {
        return Some(vacuum);
    }
    if gap_for_field(0.0, j, spec.voltage, quad) < spec.gap {
        return None;
    }
    let (mut lo, mut hi) = (0.0, vacuum);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap_for_field(mid, j, spec.voltage, quad) > spec.gap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * vacuum {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Largest current density the gap carries (cathode field zero), found
/// from the numerical gap integral.
pub fn space_charge_limit(voltage: f64, gap: f64, quad: &Quadrature) -> f64 {
    let mut hi = 2.0 * child_langmuir(voltage, gap);
    let mut lo = 0.0;
    while gap_for_field(0.0, hi, voltage, quad) > gap {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap_for_field(0.0, mid, voltage, quad) > gap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    /// Weight of the new emission value in the `J` update.
    pub damping: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Cathode temperature for the emission law (K).
    pub temperature: f64,
    pub quadrature: Quadrature,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { damping: 0.5, rel_tol: 1e-8, max_iter: 500, temperature: 300.0, quadrature: Quadrature::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiodePoint {
    pub voltage: f64,
    /// Self-consistent current density (A/m^2).
    pub current_density: f64,
    /// Cathode field (V/m).
    pub cathode_field: f64,
    pub child_langmuir: f64,
    pub iterations: usize,
}

/// Self-consistent space-charge-limited emission current of a planar diode.
///
/// Damped fixed-point iteration `J <- J + a (J_FN(E_c(J)) - J)`. The
/// residual decreases monotonically in `J`, so every iterate tightens a
/// bracket around the root; an update that leaves the bracket is replaced
/// by bisection.
pub fn semianalytic_iv(spec: &DiodeSpec, mat: &EmitterMaterial, opts: &OracleOptions) -> Result<DiodePoint> {
    spec.validate()?;
    mat.validate()?;
    let jcl = child_langmuir(spec.voltage, spec.gap);
    let emitted = |e: f64| current_density(e, opts.temperature, mat);
    let vacuum = spec.voltage / spec.gap;
    let j_vac = emitted(vacuum)?;
    let done = |j: f64, e: f64, it: usize| DiodePoint {
        voltage: spec.voltage,
        current_density: j,
        cathode_field: e,
        child_langmuir: jcl,
        iterations: it,
    };
    if j_vac == 0.0 {
        return Ok(done(0.0, vacuum, 0));
    }
    let residual = |j: f64| -> Result<(f64, f64)> {
        match cathode_field(j, spec, &opts.quadrature) {
            Some(e) => Ok((emitted(e)? - j, e)),
            None => Ok((-j, 0.0)),
        }
    };
    let (mut lo, mut hi) = (0.0, j_vac.min(jcl));
    let (g_hi, e_hi) = residual(hi)?;
    if g_hi >= 0.0 {
        return Ok(done(hi, e_hi, 0));
    }
    let mut j = hi;
    let mut g = g_hi;
    for it in 1..=opts.max_iter {
        if g > 0.0 {
            lo = j;
        } else {
            hi = j;
        }
        let mut next = j + opts.damping * g;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let (g_next, e_next) = residual(next)?;
        let step = (next - j).abs();
        j = next;
        g = g_next;
        if step <= opts.rel_tol * j || (hi - lo) <= opts.rel_tol * j {
            return Ok(done(j, e_next, it));
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: g.abs() / j })
}

/// [`semianalytic_iv`] over several voltages, evaluated in parallel.
pub fn iv_sweep(
    gap: f64,
    area: f64,
    voltages: &[f64],
    mat: &EmitterMaterial,
    opts: &OracleOptions,
) -> Result<Vec<DiodePoint>> {
    voltages
        .par_iter()
        .map(|&voltage| semianalytic_iv(&DiodeSpec { gap, voltage, area }, mat, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_langmuir_basics() {
        assert_eq!(child_langmuir(0.0, 1e-3), 0.0);
        let r = child_langmuir(400.0, 1e-3) / child_langmuir(100.0, 1e-3);
        assert!((r - 8.0).abs() < 1e-12);
    }

    #[test]
    fn gap_integral_matches_closed_form() {
        // integral of 2s / sqrt(A + k s) from 0 to sqrt(V)
        let (e_c, j, v): (f64, f64, f64) = (3e9, 1e13, 200.0);
        let k = space_charge_k(j);
        let a = e_c * e_c;
        let u = |s: f64| a + k * s;
        let prim = |s: f64| 2.0 / (k * k) * (2.0 / 3.0 * u(s).powf(1.5) - 2.0 * a * u(s).sqrt());
        let exact = prim(v.sqrt()) - prim(0.0);
        let num = gap_for_field(e_c, j, v, &Quadrature::default());
        assert!((num / exact - 1.0).abs() < 1e-9, "{num} vs {exact}");
    }

    #[test]
    fn zero_current_gives_vacuum_field() {
        let spec = DiodeSpec { gap: 18.2e-9, voltage: 100.0, area: 0.0 };
        let e = cathode_field(1e-6, &spec, &Quadrature::default()).unwrap();
        assert!((e / (100.0 / 18.2e-9) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_much_current_has_no_field() {
        let spec = DiodeSpec { gap: 1e-6, voltage: 100.0, area: 0.0 };
        let jcl = child_langmuir(100.0, 1e-6);
        assert!(cathode_field(1.01 * jcl, &spec, &Quadrature::default()).is_none());
        assert!(cathode_field(0.99 * jcl, &spec, &Quadrature::default()).is_some());
    }
}
