use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::{Anode, RunParams, Simulation};
use crate::config::{MeshConfig, SimConfig};
use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE};
use crate::emission;
use crate::mesh::BoundaryTag;
use crate::oracle::{child_langmuir, semianalytic_iv, DiodePoint, DiodeSpec, OracleOptions};
use crate::pic::Species;
use crate::{Error, Result};

/// One voltage of a diode sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub voltage: f64,
    pub dt: f64,
    pub weight: f64,
    pub steps: u64,
    /// Emitted current density averaged over the final window (A/m^2).
    pub current_density: f64,
    /// Current density collected at the anode over the final window.
    pub anode_current_density: f64,
    pub oracle: DiodePoint,
    pub steady_at: Option<f64>,
}

impl SweepPoint {
    pub fn relative_error(&self) -> f64 {
        self.current_density / self.oracle.current_density - 1.0
    }

    pub fn child_langmuir(&self) -> f64 {
        self.oracle.child_langmuir
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub gap: f64,
    pub area: f64,
    pub points: Vec<SweepPoint>,
}

pub const SWEEP_HEADER: &str = "voltage_V,pic_J_A_per_m2,anode_J_A_per_m2,oracle_J_A_per_m2,child_langmuir_J_A_per_m2,\
relative_error,oracle_cathode_field_V_per_m,dt_s,weight,steps,steady_at_s";

impl SweepReport {
    /// Root-mean-square relative error of the particle currents against the
    /// semianalytic ones.
    pub fn rms_error(&self) -> f64 {
        let n = self.points.len() as f64;
        (self.points.iter().map(|p| p.relative_error().powi(2)).sum::<f64>() / n).sqrt()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SWEEP_HEADER}")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
                p.voltage,
                p.current_density,
                p.anode_current_density,
                p.oracle.current_density,
                p.child_langmuir(),
                p.relative_error(),
                p.oracle.cathode_field,
                p.dt,
                p.weight,
                p.steps,
                p.steady_at.map_or(String::from("nan"), |t| format!("{t:e}"))
            )?;
        }
        writeln!(w, "# rms_relative_error,{:e}", self.rms_error())?;
        Ok(())
    }
}

/// Gap of a planar diode configuration (a vacuum-only box).
pub fn diode_gap(cfg: &SimConfig) -> Result<f64> {
    match &cfg.mesh {
        MeshConfig::Box { gap, metal_height, .. } if metal_height.si == 0.0 => Ok(gap.si),
        _ => Err(Error::config("diode sweep needs a vacuum box mesh (mesh.kind = \"box\" without metal)")),
    }
}

/// Runs the particle model at every voltage of `cfg.sweep` with the anode
/// held at that voltage and compares with the semianalytic solution.
pub fn diode_sweep(cfg: &SimConfig, base_dir: &Path) -> Result<SweepReport> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::config("missing [sweep] section"))?;
    let gap = diode_gap(cfg)?;
    let mesh = Arc::new(cfg.mesh.build(base_dir)?);
    let area = mesh.tag_area(BoundaryTag::Surface);
    let base = RunParams::from_config(cfg)?;
    let opts = OracleOptions { temperature: base.surface_temperature, ..OracleOptions::default() };
    let points = sweep
        .voltages
        .par_iter()
        .map(|v| {
            let voltage = v.si;
            let crossing = gap / (2.0 * ELEMENTARY_CHARGE * voltage / ELECTRON_MASS).sqrt();
            let dt = sweep.dt_fraction.map_or(base.dt, |f| f * crossing);
            let duration = sweep.duration_crossings.map_or(cfg.time.duration.si, |n| (n * crossing).max(cfg.time.duration.si));
            let weight = match sweep.sp_per_fs {
                None => base.species.weight,
                Some(rate) => {
                    let vacuum = emission::current_density(voltage / gap, base.surface_temperature, &base.emitter)?;
                    let j = vacuum.min(child_langmuir(voltage, gap));
                    (j * area * 1e-15 / (ELEMENTARY_CHARGE * rate)).max(f64::MIN_POSITIVE)
                }
            };
            let params = RunParams {
                anode: Anode::Voltage(voltage),
                dt,
                species: Species::electron(weight),
                heat: None,
                ..base.clone()
            };
            let mut sim = Simulation::new(mesh.clone(), params)?;
            let steps = (duration / dt).round() as u64;
            let summary = sim.advance(steps, &cfg.steady, |_, _| Ok(()))?;
            let window = ((cfg.steady.window.si / dt).round() as usize).clamp(1, summary.history.len() - 1);
            let tail = &summary.history[summary.history.len() - window..];
            let mean_current = tail.iter().map(|d| d.emitted_current).sum::<f64>() / window as f64;
            let collected: u64 = tail.iter().map(|d| d.absorbed[0]).sum();
            let anode = collected as f64 * weight * ELEMENTARY_CHARGE / (window as f64 * dt);
            let oracle = semianalytic_iv(&DiodeSpec { gap, voltage, area }, &base.emitter, &opts)?;
            Ok(SweepPoint {
                voltage,
                dt,
                weight,
                steps: summary.history.len() as u64 - 1,
                current_density: mean_current / area,
                anode_current_density: anode / area,
                oracle,
                steady_at: summary.steady_at,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { gap, area, points })
}
