use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Simulation, StepDiagnostics, SteadyDetector, DIAGNOSTICS_HEADER, TIMINGS_HEADER};
use crate::config::{SimConfig, SteadyConfig};
use crate::pic::write_snapshot;
use crate::{Error, Result};

/// Outcome of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    /// Diagnostics of the initial state followed by one entry per step.
    pub history: Vec<StepDiagnostics>,
    /// Time at which the current was first found steady (s).
    pub steady_at: Option<f64>,
    /// Moving average of the emitted current at the end (A).
    pub final_current: Option<f64>,
}

impl Simulation {
    /// Runs `steps` steps, calling `observe` after each, or fewer when
    /// `steady.stop` is set and the current settles.
    pub fn advance<F>(&mut self, steps: u64, steady: &SteadyConfig, mut observe: F) -> Result<RunSummary>
    where
        F: FnMut(&Simulation, &StepDiagnostics) -> Result<()>,
    {
        let dt = self.params.dt;
        let mut detector = SteadyDetector::for_times(steady.window.si, steady.hold.si, steady.tolerance, dt);
        let initial = self.snapshot_diagnostics()?;
        observe(self, &initial)?;
        let mut history = vec![initial];
        let mut steady_at = None;
        for _ in 0..steps {
            let d = self.step()?;
            detector.push(d.emitted_current);
            observe(self, &d)?;
            history.push(d);
            if steady_at.is_none() && detector.is_steady() {
                steady_at = Some(self.time());
                if steady.stop {
                    break;
                }
            }
        }
        Ok(RunSummary { history, steady_at, final_current: detector.average() })
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::config(format!("cannot create `{}`: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

/// Runs the configured simulation. With `output.dir` set, writes
/// `config.toml` (canonical form), `diagnostics.csv`, `timings.csv` (not in
/// deterministic mode), particle snapshots and the final potential and
/// temperature. Relative paths are resolved against `base_dir`.
pub fn run_simulation(cfg: &SimConfig, base_dir: &Path) -> Result<RunSummary> {
    let mut sim = Simulation::from_config(cfg, base_dir)?;
    let steps = (cfg.time.duration.si / cfg.time.dt_pic.si).round() as u64;
    let Some(dir) = cfg.output.dir.as_ref().map(|d| base_dir.join(d)) else {
        return sim.advance(steps, &cfg.steady, |_, _| Ok(()));
    };
    std::fs::create_dir_all(&dir)?;
    create(&dir, "config.toml")?.write_all(cfg.dump().as_bytes())?;
    let mut diag = create(&dir, "diagnostics.csv")?;
    writeln!(diag, "{DIAGNOSTICS_HEADER}")?;
    let mut timings = if cfg.deterministic {
        None
    } else {
        let mut t = create(&dir, "timings.csv")?;
        writeln!(t, "{TIMINGS_HEADER}")?;
        Some(t)
    };
    let every = cfg.output.snapshot_every;
    let summary = sim.advance(steps, &cfg.steady, |s, d| {
        d.write_row(&mut diag)?;
        if let Some(t) = timings.as_mut() {
            d.write_timings(t)?;
        }
        if every > 0 && d.step > 0 && d.step % every == 0 {
            write_snapshot(s.particles(), create(&dir, &format!("particles_{:08}.txt", d.step))?)?;
        }
        Ok(())
    })?;
    diag.flush()?;
    if let Some(t) = timings.as_mut() {
        t.flush()?;
    }
    write_nodal(&sim, &dir)?;
    Ok(summary)
}

fn write_nodal(sim: &Simulation, dir: &Path) -> Result<()> {
    let mesh = sim.mesh();
    let mut fields = vec![("potential.txt", "phi_V", sim.potential())];
    if let Some(t) = sim.temperature() {
        fields.push(("temperature.txt", "T_K", t));
    }
    for (name, column, field) in fields {
        let mut w = create(dir, name)?;
        writeln!(w, "# node x y z {column}")?;
        for (dof, value) in field.values.iter().enumerate() {
            let n = field.dofs.node(dof);
            let p = mesh.node(n);
            writeln!(w, "{n} {:.17e} {:.17e} {:.17e} {:.17e}", p.x, p.y, p.z, value)?;
        }
        w.flush()?;
    }
    Ok(())
}
