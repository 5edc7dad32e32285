//! Physical constants (CODATA 2018, SI).

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Electron rest mass (kg).
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Boltzmann constant (eV/K).
pub const BOLTZMANN_EV: f64 = BOLTZMANN / ELEMENTARY_CHARGE;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Coulomb constant 1/(4 pi eps0) (N m^2 / C^2).
pub const COULOMB: f64 = 1.0 / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);

/// First Fowler-Nordheim constant (A eV V^-2).
pub const FN_A: f64 = 1.541_434e-6;
/// Second Fowler-Nordheim constant (eV^-3/2 V m^-1).
pub const FN_B: f64 = 6.830_890e9;
/// Schottky constant squared, e^3/(4 pi eps0) (eV^2 m / V).
pub const SCHOTTKY_SQ: f64 = 1.439_964_5e-9;
