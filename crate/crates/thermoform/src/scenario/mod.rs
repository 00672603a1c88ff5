//! Synthetic forming scenarios: blank meshes, the process time grid and
//! forming kinematics.
//!
//! A scenario plays one blank through four process phases — transfer from
//! the furnace, forming, holding in the closed tool, and demoulding. The
//! thermal solver and the estimator both operate on the same non-uniform
//! time grid, whose step count and phase split are fixed; process inputs
//! rescale the step sizes of the forming phase (via punch speed) and the
//! holding phase (via holding duration) so that one offline-built reduced
//! schedule stays step-aligned across process variants.

pub mod config;
pub mod mesh;
pub mod trajectory;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Process phase of a time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Transfer,
    Forming,
    Holding,
    Demoulding,
}

pub const PHASES: [Phase; 4] = [
    Phase::Transfer,
    Phase::Forming,
    Phase::Holding,
    Phase::Demoulding,
];

/// Scalar process inputs that distinguish one forming run from another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessInputs {
    /// Average austenitization temperature of the blank at transfer start [K].
    pub t_aust_avg: f64,
    /// Punch speed during forming [mm/s].
    pub v_punch: f64,
    /// Holding duration in the closed tool [s].
    pub t_hold: f64,
}

impl ProcessInputs {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_aust_avg.is_finite()
            && self.t_aust_avg > 0.0
            && self.v_punch.is_finite()
            && self.v_punch > 0.0
            && self.t_hold.is_finite()
            && self.t_hold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::BadConfig(format!(
                "process inputs must be positive and finite: {self:?}"
            )))
        }
    }
}

/// Fixed per-phase step counts and nominal durations.
///
/// The defaults put the phase boundaries at 5.2 s (end of transfer), 7.0 s
/// (end of forming at the reference punch speed) and 11.1 s (end of holding
/// at the reference duration), for a 12.1 s reference cycle in 510 steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseTemplate {
    /// Steps per phase, in `PHASES` order.
    pub steps: [usize; 4],
    /// Nominal phase durations [s] at the reference inputs.
    pub durations: [f64; 4],
    /// Punch speed the forming duration refers to [mm/s].
    pub v_punch_ref: f64,
}

impl Default for PhaseTemplate {
    fn default() -> Self {
        PhaseTemplate {
            steps: [150, 130, 130, 100],
            durations: [5.2, 1.8, 4.1, 1.0],
            v_punch_ref: 80.0,
        }
    }
}

impl PhaseTemplate {
    /// Holding duration the template refers to [s].
    pub fn t_hold_ref(&self) -> f64 {
        self.durations[2]
    }

    pub fn total_steps(&self) -> usize {
        self.steps.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.iter().any(|&s| s == 0) {
            return Err(Error::BadTimeGrid("each phase needs at least one step".into()));
        }
        if self
            .durations
            .iter()
            .chain(std::iter::once(&self.v_punch_ref))
            .any(|&d| !(d > 0.0) || !d.is_finite())
        {
            return Err(Error::BadTimeGrid(
                "phase durations and reference speed must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Non-uniform process time grid with per-step phase labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    phases: Vec<Phase>,
}

impl TimeGrid {
    /// Uniform grid of `n_steps` steps of size `dt`, all labelled
    /// `Transfer`. Handy for free-cooling studies and convergence checks
    /// outside the four-phase process.
    pub fn uniform(n_steps: usize, dt: f64) -> TimeGrid {
        assert!(n_steps > 0 && dt > 0.0, "need positive step count and size");
        TimeGrid {
            times: (0..=n_steps).map(|k| k as f64 * dt).collect(),
            phases: vec![Phase::Transfer; n_steps],
        }
    }

    /// Number of steps `n_t` (one less than the number of grid points).
    pub fn n_steps(&self) -> usize {
        self.phases.len()
    }

    /// Grid point `t_k`, `k = 0..=n_steps`.
    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Step size `h_k = t_{k+1} - t_k`.
    pub fn h(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Phase of step `k` (the interval `[t_k, t_{k+1})`).
    pub fn phase(&self, k: usize) -> Phase {
        self.phases[k]
    }

    pub fn total_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Step-index range occupied by a phase.
    pub fn phase_steps(&self, phase: Phase) -> std::ops::Range<usize> {
        let start = self.phases.iter().position(|&p| p == phase).unwrap_or(0);
        let len = self.phases.iter().filter(|&&p| p == phase).count();
        start..start + len
    }

    /// Fraction of a phase completed at grid point `k`, clamped to [0, 1].
    ///
    /// Defined on step indices, so two runs differing only in speed see
    /// identical per-step fractions.
    pub fn phase_fraction(&self, phase: Phase, k: usize) -> f64 {
        let range = self.phase_steps(phase);
        if range.is_empty() {
            return 0.0;
        }
        ((k as f64 - range.start as f64) / range.len() as f64).clamp(0.0, 1.0)
    }

    /// First step index at or after time `t` (saturating).
    pub fn step_at_time(&self, t: f64) -> usize {
        match self
            .times
            .iter()
            .position(|&tk| tk >= t - 1e-12)
        {
            Some(k) => k.min(self.n_steps()),
            None => self.n_steps(),
        }
    }
}

/// Builds the process time grid for the given inputs.
///
/// The step count and phase split come from the template; forming steps are
/// scaled by `v_punch_ref / v_punch` and holding steps by
/// `t_hold / t_hold_ref`, so per-step tool configurations remain aligned
/// across process variants while physical durations move.
pub fn build_time_grid(inputs: &ProcessInputs, template: &PhaseTemplate) -> Result<TimeGrid> {
    inputs.validate()?;
    template.validate()?;

    let scale = [
        1.0,
        template.v_punch_ref / inputs.v_punch,
        inputs.t_hold / template.t_hold_ref(),
        1.0,
    ];

    let mut times = Vec::with_capacity(template.total_steps() + 1);
    let mut phases = Vec::with_capacity(template.total_steps());
    times.push(0.0);
    let mut t = 0.0;
    for (p, &phase) in PHASES.iter().enumerate() {
        let h = template.durations[p] * scale[p] / template.steps[p] as f64;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::BadTimeGrid(format!(
                "non-positive step size in phase {phase:?}"
            )));
        }
        for _ in 0..template.steps[p] {
            t += h;
            times.push(t);
            phases.push(phase);
        }
    }
    Ok(TimeGrid { times, phases })
}

/// Sensor layout: fixed world-frame measurement positions.
///
/// Readings are taken at the mesh node nearest to each position in the
/// *deformed* configuration, so the observed material point can change as
/// the blank moves through the tool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorConfig {
    /// World-frame sensor positions [m].
    pub positions: Vec<[f64; 3]>,
    /// Measurement noise standard deviation [K].
    pub sigma_v: f64,
    /// Maximum sensor-to-node snap distance before the sensor counts as
    /// off-part [m].
    pub snap_radius: f64,
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::BadConfig("at least one sensor required".into()));
        }
        if !(self.sigma_v >= 0.0) || !(self.snap_radius > 0.0) {
            return Err(Error::BadConfig(
                "sensor noise must be >= 0 and snap radius > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn n_sensors(&self) -> usize {
        self.positions.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_inputs() -> ProcessInputs {
        ProcessInputs {
            t_aust_avg: 1273.0,
            v_punch: 80.0,
            t_hold: 4.1,
        }
    }

    #[test]
    fn reference_grid_matches_template() {
        let tpl = PhaseTemplate::default();
        let grid = build_time_grid(&reference_inputs(), &tpl).unwrap();
        assert_eq!(grid.n_steps(), 510);
        assert_relative_eq!(grid.total_time(), 12.1, max_relative = 1e-12);
        // Phase boundaries at the nominal timestamps.
        assert_relative_eq!(grid.time(150), 5.2, max_relative = 1e-12);
        assert_relative_eq!(grid.time(280), 7.0, max_relative = 1e-12);
        assert_relative_eq!(grid.time(410), 11.1, max_relative = 1e-12);
        // Uniform step size inside each phase.
        for k in 0..150 {
            assert_relative_eq!(grid.h(k), 5.2 / 150.0, max_relative = 1e-12);
        }
        assert_eq!(grid.phase(0), Phase::Transfer);
        assert_eq!(grid.phase(150), Phase::Forming);
        assert_eq!(grid.phase(280), Phase::Holding);
        assert_eq!(grid.phase(409), Phase::Holding);
        assert_eq!(grid.phase(509), Phase::Demoulding);
    }

    #[test]
    fn doubling_punch_speed_halves_forming_duration() {
        let tpl = PhaseTemplate::default();
        let mut inputs = reference_inputs();
        inputs.v_punch = 160.0;
        let grid = build_time_grid(&inputs, &tpl).unwrap();
        assert_eq!(grid.n_steps(), 510);
        let forming: f64 = grid.phase_steps(Phase::Forming).map(|k| grid.h(k)).sum();
        assert_relative_eq!(forming, 0.9, max_relative = 1e-12);
        // Other phases untouched.
        let transfer: f64 = grid.phase_steps(Phase::Transfer).map(|k| grid.h(k)).sum();
        assert_relative_eq!(transfer, 5.2, max_relative = 1e-12);
    }

    #[test]
    fn holding_duration_scales_holding_phase_only() {
        let tpl = PhaseTemplate::default();
        let mut inputs = reference_inputs();
        inputs.t_hold = 8.2;
        let grid = build_time_grid(&inputs, &tpl).unwrap();
        let holding: f64 = grid.phase_steps(Phase::Holding).map(|k| grid.h(k)).sum();
        assert_relative_eq!(holding, 8.2, max_relative = 1e-12);
        assert_relative_eq!(grid.total_time(), 12.1 + 4.1, max_relative = 1e-12);
    }

    #[test]
    fn phase_fraction_is_step_aligned_across_speeds() {
        let tpl = PhaseTemplate::default();
        let slow = build_time_grid(&reference_inputs(), &tpl).unwrap();
        let mut fast_inputs = reference_inputs();
        fast_inputs.v_punch = 100.0;
        let fast = build_time_grid(&fast_inputs, &tpl).unwrap();
        for k in 0..=510 {
            assert_eq!(
                slow.phase_fraction(Phase::Forming, k),
                fast.phase_fraction(Phase::Forming, k)
            );
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let tpl = PhaseTemplate::default();
        let mut inputs = reference_inputs();
        inputs.v_punch = 0.0;
        assert!(build_time_grid(&inputs, &tpl).is_err());
        let mut bad_tpl = PhaseTemplate::default();
        bad_tpl.steps[1] = 0;
        assert!(build_time_grid(&reference_inputs(), &bad_tpl).is_err());
    }

    proptest! {
        #[test]
        fn grid_is_strictly_increasing_for_valid_inputs(
            t_aust in 900.0f64..1500.0,
            v in 20.0f64..400.0,
            t_hold in 0.5f64..20.0,
        ) {
            let grid = build_time_grid(
                &ProcessInputs { t_aust_avg: t_aust, v_punch: v, t_hold },
                &PhaseTemplate::default(),
            ).unwrap();
            prop_assert_eq!(grid.n_steps(), 510);
            for k in 0..grid.n_steps() {
                prop_assert!(grid.h(k) > 0.0);
            }
        }
    }
}
