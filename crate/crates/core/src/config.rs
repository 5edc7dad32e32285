//! Run configuration.
//!
//! Configurations are TOML. Dimensional values are written as a number and
//! a unit separated by a space (`"0.6 GV/m"`, `"18.2 nm"`, `"0.5 fs"`) or
//! as a bare number in the default unit of their kind: nm, fs, GV/m, eV, V,
//! K and A/m^2. Values are stored in SI and dumped in SI, so
//! `load(dump(cfg)) == cfg` exactly.

use std::fmt;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::emission::{EmitterMaterial, OverBarrier};
use crate::mesh::{build_layered_box, build_post_mesh, read_mesh, BoxMeshSpec, Mesh, PostSpec};
use crate::pic::LateralPolicy;
use crate::thermal::{FiniteSize, MassMatrix, MaterialModel, Table};
use crate::{Error, Result};

/// A kind of physical quantity: its units and their SI factors.
pub trait Dimension {
    /// Unit assumed for bare numbers.
    const DEFAULT: &'static str;
    /// Unit used when dumping (factor 1).
    const SI: &'static str;
    const UNITS: &'static [(&'static str, f64)];
}

macro_rules! dimension {
    ($name:ident, $default:literal, $si:literal, [$(($u:literal, $f:expr)),* $(,)?]) => {
        #[derive(Clone, Copy, Debug, PartialEq)]
        pub struct $name;
        impl Dimension for $name {
            const DEFAULT: &'static str = $default;
            const SI: &'static str = $si;
            const UNITS: &'static [(&'static str, f64)] = &[$(($u, $f)),*];
        }
    };
}

dimension!(LengthDim, "nm", "m", [
    ("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9), ("A", 1e-10), ("angstrom", 1e-10),
]);
dimension!(TimeDim, "fs", "s", [("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9), ("ps", 1e-12), ("fs", 1e-15)]);
dimension!(FieldDim, "GV/m", "V/m", [
    ("V/m", 1.0), ("V/um", 1e6), ("MV/m", 1e6), ("V/nm", 1e9), ("GV/m", 1e9),
]);
dimension!(EnergyDim, "eV", "eV", [("eV", 1.0), ("meV", 1e-3)]);
dimension!(VoltageDim, "V", "V", [("V", 1.0), ("mV", 1e-3), ("kV", 1e3)]);
dimension!(TemperatureDim, "K", "K", [("K", 1.0)]);
dimension!(CurrentDensityDim, "A/m^2", "A/m^2", [("A/m^2", 1.0), ("A/cm^2", 1e4), ("A/nm^2", 1e18)]);

/// A value of dimension `D`, held in SI.
pub struct Quantity<D> {
    pub si: f64,
    dim: PhantomData<D>,
}

impl<D> Quantity<D> {
    pub const fn si(si: f64) -> Self {
        Self { si, dim: PhantomData }
    }
}

impl<D> Clone for Quantity<D> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<D> Copy for Quantity<D> {}

impl<D> PartialEq for Quantity<D> {
    fn eq(&self, other: &Self) -> bool {
        self.si == other.si
    }
}

impl<D: Dimension> fmt::Debug for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} {}", self.si, D::SI)
    }
}

impl<D: Dimension> Quantity<D> {
    /// Parses `"<number> <unit>"` or a bare number in the default unit.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (num, unit) = match s.split_once(char::is_whitespace) {
            Some((n, u)) => (n, u.trim()),
            None => (s, D::DEFAULT),
        };
        let value: f64 = num.parse().map_err(|_| format!("cannot read a number from `{s}`"))?;
        let factor = D::UNITS.iter().find(|(u, _)| *u == unit).map(|&(_, f)| f).ok_or_else(|| {
            let known: Vec<&str> = D::UNITS.iter().map(|(u, _)| *u).collect();
            format!("unknown unit `{unit}` (expected one of {})", known.join(", "))
        })?;
        if !value.is_finite() {
            return Err(format!("`{s}` is not finite"));
        }
        Ok(Self::si(value * factor))
    }

    fn from_default_unit(v: f64) -> Self {
        let factor = D::UNITS.iter().find(|(u, _)| *u == D::DEFAULT).map(|&(_, f)| f).unwrap_or(1.0);
        Self::si(v * factor)
    }
}

impl<D: Dimension> Serialize for Quantity<D> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:e} {}", self.si, D::SI))
    }
}

impl<'de, D: Dimension> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(d: De) -> std::result::Result<Self, De::Error> {
        struct V<D>(PhantomData<D>);
        impl<D: Dimension> Visitor<'_> for V<D> {
            type Value = Quantity<D>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number in {} or a string such as \"1.5 {}\"", D::DEFAULT, D::DEFAULT)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                Quantity::parse(v).map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(Quantity::from_default_unit(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(Quantity::from_default_unit(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(Quantity::from_default_unit(v as f64))
            }
        }
        d.deserialize_any(V(PhantomData))
    }
}

pub type Length = Quantity<LengthDim>;
pub type Time = Quantity<TimeDim>;
pub type FieldStrength = Quantity<FieldDim>;
pub type Energy = Quantity<EnergyDim>;
pub type Voltage = Quantity<VoltageDim>;
pub type Temperature = Quantity<TemperatureDim>;
pub type CurrentDensity = Quantity<CurrentDensityDim>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshConfig {
    /// Vacuum box over the emitting plane z = 0, optionally on a metal slab.
    Box {
        width: Length,
        depth: Length,
        gap: Length,
        nx: usize,
        ny: usize,
        nz: usize,
        #[serde(default = "zero_length")]
        metal_height: Length,
        #[serde(default)]
        nz_metal: usize,
        #[serde(default = "one")]
        grading: f64,
    },
    /// Square metal post on a slab.
    Post {
        width: Length,
        height: Length,
        slab: Length,
        post_width: Length,
        post_height: Length,
        spacing: Length,
    },
    /// Mesh in the text format of [`crate::mesh::read_mesh`], lengths in
    /// metres. Relative paths are resolved against the config file.
    File { path: PathBuf },
}

fn zero_length() -> Length {
    Length::si(0.0)
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl MeshConfig {
    pub fn build(&self, base_dir: &Path) -> Result<Mesh> {
        match self {
            MeshConfig::Box { width, depth, gap, nx, ny, nz, metal_height, nz_metal, grading } => {
                build_layered_box(&BoxMeshSpec {
                    width: width.si,
                    depth: depth.si,
                    gap: gap.si,
                    metal_height: metal_height.si,
                    nx: *nx,
                    ny: *ny,
                    nz_vacuum: *nz,
                    nz_metal: *nz_metal,
                    grading: *grading,
                })
            }
            MeshConfig::Post { width, height, slab, post_width, post_height, spacing } => {
                build_post_mesh(&PostSpec {
                    width: width.si,
                    height: height.si,
                    slab: slab.si,
                    post_width: post_width.si,
                    post_height: post_height.si,
                    spacing: spacing.si,
                })
            }
            MeshConfig::File { path } => {
                let path = base_dir.join(path);
                let file = std::fs::File::open(&path)
                    .map_err(|e| Error::config(format!("mesh.path `{}`: {e}", path.display())))?;
                read_mesh(std::io::BufReader::new(file))
            }
        }
    }
}

/// Boundary condition on the anode boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AnodeConfig {
    /// Uniform applied field far from the emitter, pulling electrons out.
    Field { field: FieldStrength },
    /// Anode held at a fixed potential above the grounded emitter.
    Voltage { voltage: Voltage },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt_pic: Time,
    /// Heat step; rounded to a whole number of particle steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_heat: Option<Time>,
    pub duration: Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    /// Electrons per superparticle.
    pub weight: f64,
    #[serde(default)]
    pub lateral: LateralPolicy,
    #[serde(default = "yes")]
    pub collisions: bool,
    #[serde(default = "default_coulomb_log")]
    pub coulomb_log: f64,
}

fn default_coulomb_log() -> f64 {
    13.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionConfig {
    #[serde(default = "default_work_function")]
    pub work_function: Energy,
    #[serde(default)]
    pub over_barrier: OverBarrier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_current_density: Option<CurrentDensity>,
    /// Emitter temperature when heat conduction is off.
    #[serde(default = "default_ambient")]
    pub temperature: Temperature,
}

fn default_work_function() -> Energy {
    Energy::si(4.5)
}

fn default_ambient() -> Temperature {
    Temperature::si(300.0)
}

impl Default for EmissionConfig {
    fn default() -> Self {
        Self {
            work_function: default_work_function(),
            over_barrier: OverBarrier::default(),
            max_current_density: None,
            temperature: default_ambient(),
        }
    }
}

impl EmissionConfig {
    pub fn material(&self) -> Result<EmitterMaterial> {
        let m = EmitterMaterial {
            work_function: self.work_function.si,
            over_barrier: self.over_barrier,
            max_current_density: self.max_current_density.map(|j| j.si),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    #[serde(default = "default_ambient")]
    pub ambient: Temperature,
    /// Bulk resistivity against temperature, `[[K, Ohm m], ...]`; copper
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resistivity: Option<Vec<(f64, f64)>>,
    /// Factor on the bulk conductivity for the finite size of the emitter,
    /// constant or `[[K, factor], ...]`.
    #[serde(default = "default_finite_size")]
    pub finite_size: FiniteSize,
    #[serde(default = "zero_length")]
    pub feature_size: Length,
    /// Lorentz number (W Ohm / K^2).
    #[serde(default = "default_lorenz")]
    pub lorenz: f64,
    /// Volumetric heat capacity (J / (K m^3)).
    #[serde(default = "default_heat_capacity")]
    pub heat_capacity: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default)]
    pub mass: MassMatrix,
}

fn default_finite_size() -> FiniteSize {
    FiniteSize::Constant(1.0)
}

fn default_lorenz() -> f64 {
    MaterialModel::default().lorenz
}

fn default_heat_capacity() -> f64 {
    MaterialModel::default().heat_capacity
}

impl ThermalConfig {
    pub fn material(&self) -> Result<MaterialModel> {
        let base = MaterialModel::default();
        let sigma_bulk = match &self.resistivity {
            None => base.sigma_bulk,
            Some(rho) => {
                if rho.iter().any(|&(_, r)| !(r > 0.0)) {
                    return Err(Error::config("thermal.resistivity values must be positive"));
                }
                Table::new(rho.iter().map(|&(t, r)| (t, 1.0 / r)).collect())
                    .map_err(|e| Error::config(format!("thermal.resistivity: {e}")))?
            }
        };
        let m = MaterialModel {
            sigma_bulk,
            finite_size: self.finite_size.clone(),
            feature_size: self.feature_size.si,
            lorenz: self.lorenz,
            heat_capacity: self.heat_capacity,
            ambient: self.ambient.si,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for diagnostics and snapshots; nothing is written when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Particle snapshot every this many steps (0 = never).
    #[serde(default)]
    pub snapshot_every: u64,
}

/// Steady-state test on the emitted current: the moving average over
/// `window` must stay within `tolerance` (relative) for `hold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    #[serde(default = "default_window")]
    pub window: Time,
    #[serde(default = "default_hold")]
    pub hold: Time,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// End the run once steady.
    #[serde(default)]
    pub stop: bool,
}

fn default_window() -> Time {
    Time::si(5e-15)
}

fn default_hold() -> Time {
    Time::si(10e-15)
}

fn default_tolerance() -> f64 {
    0.01
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self { window: default_window(), hold: default_hold(), tolerance: default_tolerance(), stop: false }
    }
}

/// Current-voltage sweep of a planar diode. When the scaling fields are
/// set they override the time step, duration and weight per voltage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub voltages: Vec<Voltage>,
    /// Time step as a fraction of `d / v_max`, with `v_max` the speed an
    /// electron gains across the full voltage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_fraction: Option<f64>,
    /// Run length in units of `d / v_max`, at least `time.duration`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_crossings: Option<f64>,
    /// Superparticles emitted per femtosecond at the lower of the
    /// vacuum-field emission and Child-Langmuir currents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sp_per_fs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mesh: MeshConfig,
    pub anode: AnodeConfig,
    pub time: TimeConfig,
    pub particles: ParticleConfig,
    #[serde(default)]
    pub emission: EmissionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Leave out wall-clock timings so that every output file is a pure
    /// function of the configuration.
    #[serde(default)]
    pub deterministic: bool,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1));
            let msg = e.message().trim_end().to_string();
            match line {
                Some(line) => Error::Parse { line, message: msg },
                None => Error::config(msg),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical form: every quantity in SI.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{key} must be positive, got {v}")))
            }
        };
        positive(self.time.dt_pic.si, "time.dt_pic")?;
        if !(self.time.duration.si >= 0.0) {
            return Err(Error::config("time.duration must not be negative"));
        }
        if let Some(h) = self.time.dt_heat {
            if !(h.si >= self.time.dt_pic.si) {
                return Err(Error::config("time.dt_heat must be at least time.dt_pic"));
            }
        }
        if self.thermal.is_some() && self.time.dt_heat.is_none() {
            return Err(Error::config("time.dt_heat is required when [thermal] is present"));
        }
        positive(self.particles.weight, "particles.weight")?;
        if self.particles.collisions {
            positive(self.particles.coulomb_log, "particles.coulomb_log")?;
        }
        positive(self.emission.temperature.si, "emission.temperature")?;
        self.emission.material()?;
        if let AnodeConfig::Field { field } = self.anode {
            if !(field.si >= 0.0) {
                return Err(Error::config("anode.field must not be negative"));
            }
        }
        if let Some(t) = &self.thermal {
            t.material()?;
            if !(0.0..=1.0).contains(&t.theta) {
                return Err(Error::config("thermal.theta must lie in [0, 1]"));
            }
        }
        positive(self.steady.window.si, "steady.window")?;
        positive(self.steady.hold.si, "steady.hold")?;
        positive(self.steady.tolerance, "steady.tolerance")?;
        if let Some(s) = &self.sweep {
            if s.voltages.is_empty() {
                return Err(Error::config("sweep.voltages is empty"));
            }
            for v in &s.voltages {
                positive(v.si, "sweep.voltages")?;
            }
            for (v, key) in [
                (s.dt_fraction, "sweep.dt_fraction"),
                (s.duration_crossings, "sweep.duration_crossings"),
                (s.sp_per_fs, "sweep.sp_per_fs"),
            ] {
                if let Some(v) = v {
                    positive(v, key)?;
                }
            }
        }
        Ok(())
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read `{}`: {e}", path.display())))?;
    SimConfig::from_toml(&text)
}
