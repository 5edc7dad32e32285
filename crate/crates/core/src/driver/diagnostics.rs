use std::collections::VecDeque;
use std::io::Write;
use std::time::Duration;

use crate::Result;

/// Wall-clock time spent per phase of a step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    /// Kick, drift and boundary handling.
    pub push: Duration,
    pub emission: Duration,
    pub inject: Duration,
    pub collide: Duration,
    /// Deposition, Poisson solve and field evaluation.
    pub solve: Duration,
    pub heat: Duration,
}

/// State after one step. Everything except `timings` is a deterministic
/// function of the configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: u64,
    /// Time at the end of the step (s).
    pub time: f64,
    /// Emitted current `sum J A` from the field at the start of the step (A).
    pub emitted_current: f64,
    /// Superparticles injected during the step.
    pub injected: u64,
    /// Superparticles removed during the step, per boundary tag 1..=5.
    pub absorbed: [u64; 5],
    pub wrapped: u64,
    pub live: usize,
    /// Injected minus absorbed minus live since the start; always 0.
    pub ledger_residual: i64,
    /// Largest field pulling electrons out of the surface (V/m).
    pub max_surface_field: f64,
    pub max_temperature: f64,
    pub poisson_iterations: usize,
    pub collision_pairs: usize,
    pub timings: PhaseTimings,
}

pub const DIAGNOSTICS_HEADER: &str = "step,time_s,emitted_current_A,injected,absorbed_anode,absorbed_lateral,\
absorbed_surface,absorbed_metal_side,absorbed_metal_base,wrapped,live,ledger_residual,max_surface_field_V_per_m,\
max_temperature_K,poisson_iterations,collision_pairs";

pub const TIMINGS_HEADER: &str = "step,push_s,emission_s,inject_s,collide_s,solve_s,heat_s";

impl StepDiagnostics {
    pub fn write_row<W: Write>(&self, mut w: W) -> Result<()> {
        let a = self.absorbed;
        writeln!(
            w,
            "{},{:e},{:e},{},{},{},{},{},{},{},{},{},{:e},{:e},{},{}",
            self.step,
            self.time,
            self.emitted_current,
            self.injected,
            a[0],
            a[1],
            a[2],
            a[3],
            a[4],
            self.wrapped,
            self.live,
            self.ledger_residual,
            self.max_surface_field,
            self.max_temperature,
            self.poisson_iterations,
            self.collision_pairs
        )?;
        Ok(())
    }

    pub fn write_timings<W: Write>(&self, mut w: W) -> Result<()> {
        let t = &self.timings;
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.step,
            t.push.as_secs_f64(),
            t.emission.as_secs_f64(),
            t.inject.as_secs_f64(),
            t.collide.as_secs_f64(),
            t.solve.as_secs_f64(),
            t.heat.as_secs_f64()
        )?;
        Ok(())
    }
}

/// Detects a steady current: the moving average over `window` samples must
/// stay within `tolerance` of its latest value for `hold` samples.
#[derive(Clone, Debug)]
pub struct SteadyDetector {
    window: usize,
    hold: usize,
    tolerance: f64,
    recent: VecDeque<f64>,
    sum: f64,
    averages: VecDeque<f64>,
}

impl SteadyDetector {
    pub fn new(window: usize, hold: usize, tolerance: f64) -> Self {
        Self {
            window: window.max(1),
            hold: hold.max(1),
            tolerance,
            recent: VecDeque::new(),
            sum: 0.0,
            averages: VecDeque::new(),
        }
    }

    /// Detector for time spans given in seconds at sampling interval `dt`.
    pub fn for_times(window: f64, hold: f64, tolerance: f64, dt: f64) -> Self {
        Self::new((window / dt).round() as usize, (hold / dt).round() as usize, tolerance)
    }

    pub fn push(&mut self, value: f64) {
        self.recent.push_back(value);
        self.sum += value;
        if self.recent.len() > self.window {
            self.sum -= self.recent.pop_front().unwrap_or(0.0);
        }
        if self.recent.len() == self.window {
            // re-summing bounds the drift of the running sum
            self.sum = self.recent.iter().sum();
            self.averages.push_back(self.sum / self.window as f64);
            if self.averages.len() > self.hold {
                self.averages.pop_front();
            }
        }
    }

    /// Latest moving average, once `window` samples are in.
    pub fn average(&self) -> Option<f64> {
        self.averages.back().copied()
    }

    pub fn is_steady(&self) -> bool {
        let Some(last) = self.average() else { return false };
        self.averages.len() == self.hold
            && last != 0.0
            && self.averages.iter().all(|a| ((a - last) / last).abs() < self.tolerance)
    }
}
