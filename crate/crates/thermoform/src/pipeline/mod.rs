//! End-to-end experiment orchestration.
//!
//! Bundles the full workflow behind four commands that communicate through
//! files in an output directory:
//!
//! 1. [`cmd_simulate`] — run the full-order plant with the configured
//!    disturbance, record the state history and (noisy) sensor readings.
//! 2. [`cmd_reduce`] — sweep the process corners, extract a reduced basis
//!    from the snapshots, freeze the time-varying reduced schedule along the
//!    supporting run, and document reconstruction quality per rank.
//! 3. [`cmd_estimate`] — replay recorded measurements through the augmented
//!    filter and reconstruct the full temperature field and the disturbance.
//! 4. [`cmd_evaluate`] — re-run the built-in verification checks and map
//!    end-of-cycle material properties from recorded histories.
//!
//! Every command accepts the same [`ExperimentConfig`] (TOML on disk) and is
//! deterministic for a fixed configuration and seed.

use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks;
use crate::container::Container;
use crate::error::{Error, Result};
use crate::estimator::{run_estimator, NoiseConfig};
use crate::fom::{
    error_series, output_nodes_per_slice, read_sensors, DisturbanceChannel, DisturbanceSignal,
    FullOrderSystem, Pulse, RegionSpec, StateTrajectory,
};
use crate::property::{estimate_properties, PropertyFlag, PropertyRule};
use crate::rom::pod::{pod_basis, PodBasis, RankRule};
use crate::rom::{build_schedule, collect_snapshots, simulate_frozen, LtvSchedule};
use crate::scenario::config::ScenarioConfig;
use crate::scenario::ProcessInputs;

/// File names of the binary artifacts inside the output directory.
pub const PLANT_RUN_FILE: &str = "plant_run.bin";
pub const BASIS_FILE: &str = "basis.bin";
pub const SCHEDULE_FILE: &str = "schedule.bin";
pub const ESTIMATE_RUN_FILE: &str = "estimate_run.bin";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Process corners whose runs feed the snapshot matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Austenitization temperatures to sample [K].
    pub t_aust: Vec<f64>,
    /// Punch velocities to sample [mm/s].
    pub v_punch: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            t_aust: vec![1073.0, 1173.0, 1273.0, 1373.0],
            v_punch: vec![80.0, 90.0, 100.0],
        }
    }
}

impl SweepConfig {
    /// Cartesian product of the sweep axes, temperature-major order.
    pub fn runs(&self, t_hold: f64) -> Vec<ProcessInputs> {
        let mut out = Vec::with_capacity(self.t_aust.len() * self.v_punch.len());
        for &t in &self.t_aust {
            for &v in &self.v_punch {
                out.push(ProcessInputs {
                    t_aust_avg: t,
                    v_punch: v,
                    t_hold,
                });
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.t_aust.is_empty() || self.v_punch.is_empty() {
            return Err(Error::BadConfig("sweep axes must not be empty".into()));
        }
        if self
            .t_aust
            .iter()
            .chain(&self.v_punch)
            .any(|v| !v.is_finite() || *v <= 0.0)
        {
            return Err(Error::BadConfig(
                "sweep values must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Reduction settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RomConfig {
    /// Reduced dimension when no energy threshold is given.
    pub rank: usize,
    /// Optional relative energy target in `(0, 1]`; overrides `rank`.
    pub energy_threshold: Option<f64>,
    /// Measure energy on squared singular values instead of first powers.
    pub energy_on_squares: bool,
    /// Keep every `snapshot_stride`-th time slice of each sweep run.
    pub snapshot_stride: usize,
    /// Process point whose run the schedule is frozen along.
    pub supporting: ProcessInputs,
}

impl Default for RomConfig {
    fn default() -> Self {
        RomConfig {
            rank: 30,
            energy_threshold: None,
            energy_on_squares: false,
            snapshot_stride: 5,
            supporting: ProcessInputs {
                t_aust_avg: 1273.0,
                v_punch: 80.0,
                t_hold: 4.1,
            },
        }
    }
}

impl RomConfig {
    pub fn rank_rule(&self) -> RankRule {
        match self.energy_threshold {
            Some(e) => RankRule::EnergyThreshold(e),
            None => RankRule::Fixed(self.rank),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::BadConfig("reduced rank must be at least 1".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::BadConfig("snapshot stride must be at least 1".into()));
        }
        self.supporting.validate()
    }
}

/// Unmodeled heat inputs acting on the plant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceConfig {
    pub channels: Vec<DisturbanceChannel>,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        DisturbanceConfig {
            channels: vec![DisturbanceChannel {
                region: RegionSpec::Contact,
                pulses: vec![Pulse {
                    t_start: 9.0,
                    t_end: 11.0,
                    power_density: 1000.0,
                }],
            }],
        }
    }
}

impl DisturbanceConfig {
    pub fn signal(&self, contact_threshold: f64) -> DisturbanceSignal {
        DisturbanceSignal {
            channels: self.channels.clone(),
            contact_threshold,
        }
    }

    pub fn regions(&self) -> Vec<RegionSpec> {
        self.channels.iter().map(|c| c.region.clone()).collect()
    }

    fn validate(&self) -> Result<()> {
        for ch in &self.channels {
            for p in &ch.pulses {
                if !(p.t_start < p.t_end) || !p.power_density.is_finite() {
                    return Err(Error::BadConfig(format!(
                        "bad pulse: [{}, {}) at {} W/m^3",
                        p.t_start, p.t_end, p.power_density
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Settings of the evaluation stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    /// Ranks documented in the reconstruction-versus-rank table.
    pub ranks: Vec<usize>,
    /// Classification rule for end-of-cycle material properties.
    pub property: PropertyRule,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            ranks: vec![10, 30, 50],
            property: PropertyRule::default(),
        }
    }
}

/// Complete description of one experiment.
///
/// The scenario fields (geometry, tool, process, material, film, sensors)
/// live at the top level of the TOML file; the pipeline stages add their own
/// sections.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub sweep: SweepConfig,
    pub rom: RomConfig,
    pub noise: NoiseConfig,
    pub disturbance: DisturbanceConfig,
    pub evaluate: EvaluateConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("experiment config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.sweep.validate()?;
        self.rom.validate()?;
        self.noise.validate()?;
        self.disturbance.validate()?;
        self.evaluate.property.validate()?;
        if self.evaluate.ranks.is_empty() || self.evaluate.ranks.contains(&0) {
            return Err(Error::BadConfig(
                "evaluation ranks must be non-empty and positive".into(),
            ));
        }
        if let Some(e) = self.rom.energy_threshold {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::BadConfig(format!(
                    "energy threshold {e} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Where estimation takes its measurements from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlantSource {
    /// The plant run recorded by `simulate` in the output directory.
    Fom,
    /// A plant-run container recorded elsewhere (e.g. by another simulator).
    External(PathBuf),
}

impl PlantSource {
    /// Parses `fom` or `external:PATH`.
    pub fn parse(text: &str) -> Result<Self> {
        if text == "fom" {
            Ok(PlantSource::Fom)
        } else if let Some(path) = text.strip_prefix("external:") {
            if path.is_empty() {
                return Err(Error::BadConfig("external plant needs a path".into()));
            }
            Ok(PlantSource::External(PathBuf::from(path)))
        } else {
            Err(Error::BadConfig(format!(
                "unknown plant '{text}' (expected 'fom' or 'external:PATH')"
            )))
        }
    }
}

/// Options of the estimation command.
#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub plant: PlantSource,
    /// Estimate the disturbance jointly with the state (on by default);
    /// when off the filter tracks temperatures only.
    pub estimate_disturbance: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            plant: PlantSource::Fom,
            estimate_disturbance: true,
        }
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// What `simulate` did, also written to `simulate_report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub n_nodes: usize,
    pub n_steps: usize,
    pub total_time_s: f64,
    pub seed: u64,
    pub n_disturbance_channels: usize,
    pub final_min_kelvin: f64,
    pub final_max_kelvin: f64,
    pub runtime_s: f64,
}

/// Runs the full-order plant under the configured disturbance and records
/// the state history plus clean and noisy sensor readings.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<SimulateSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let started = Instant::now();

    let mesh = cfg.scenario.build_mesh()?;
    let grid = cfg.scenario.build_grid()?;
    let traj = cfg.scenario.build_trajectory(&mesh, &grid)?;
    let q0 = cfg
        .scenario
        .initial_state(&mesh, cfg.scenario.process.t_aust_avg);
    let sys = FullOrderSystem::new(mesh, cfg.scenario.material.clone(), cfg.scenario.film.clone())?;
    log::info!(
        "simulating plant: {} nodes, {} steps, {:.2} s of process time",
        sys.n_nodes(),
        grid.n_steps(),
        grid.total_time()
    );

    let signal = cfg.disturbance.signal(cfg.scenario.film.contact_threshold);
    let run = sys.simulate(&grid, &traj, &q0, Some(&signal))?;

    let nodes = output_nodes_per_slice(sys.mesh(), &traj, &cfg.scenario.sensors)?;
    let clean = read_sensors(&run.states, &nodes);
    let mut noisy = clean.clone();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, cfg.scenario.sensors.sigma_v)
        .map_err(|e| Error::BadConfig(format!("sensor noise: {e}")))?;
    for k in 0..noisy.ncols() {
        for s in 0..noisy.nrows() {
            noisy[(s, k)] += normal.sample(&mut rng);
        }
    }

    let n_d = signal.n_channels();
    let mut truth = DMatrix::zeros(n_d, grid.n_steps() + 1);
    for k in 0..=grid.n_steps() {
        truth.set_column(k, &signal.value_at(grid.time(k)));
    }

    let final_col = run.states.column(grid.n_steps());
    let summary = SimulateSummary {
        n_nodes: sys.n_nodes(),
        n_steps: grid.n_steps(),
        total_time_s: grid.total_time(),
        seed,
        n_disturbance_channels: n_d,
        final_min_kelvin: final_col.min(),
        final_max_kelvin: final_col.max(),
        runtime_s: started.elapsed().as_secs_f64(),
    };

    let mut c = Container::new("plant-run");
    c.push_vec("times", run.times.as_slice());
    c.push_vec("volumes", &sys.mesh().lumped_volumes());
    c.push("states", run.states.clone());
    c.push("sensors_clean", clean.clone());
    c.push("sensors_noisy", noisy.clone());
    c.push("disturbance", truth);
    c.save(&out.join(PLANT_RUN_FILE))?;

    let mut csv = table(out, "sensors.csv")?;
    writeln!(csv, "# units: t [s]; clean_*, noisy_* [K]")?;
    write!(csv, "t")?;
    for s in 0..clean.nrows() {
        write!(csv, ",clean_{0},noisy_{0}", s + 1)?;
    }
    writeln!(csv)?;
    for k in 0..clean.ncols() {
        write!(csv, "{}", run.times[k])?;
        for s in 0..clean.nrows() {
            write!(csv, ",{},{}", clean[(s, k)], noisy[(s, k)])?;
        }
        writeln!(csv)?;
    }
    csv.flush()?;

    write_json(out, "simulate_report.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// reduce
// ---------------------------------------------------------------------------

/// One row of the reconstruction-versus-rank study.
#[derive(Debug, Clone, Serialize)]
pub struct RankRow {
    pub rank: usize,
    pub energy: f64,
    /// Time-mean volume-weighted reconstruction error of the supporting run [K].
    pub mean_error_kelvin: f64,
    pub max_error_kelvin: f64,
}

/// What `reduce` did, also written to `reduce_report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ReduceSummary {
    pub n_runs: usize,
    pub n_snapshots: usize,
    pub rank: usize,
    pub energy_first_powers: f64,
    pub energy_squares: f64,
    pub rank_study: Vec<RankRow>,
    pub sweep_runtime_s: f64,
    pub runtime_s: f64,
}

/// Sweeps the process corners, builds the reduced basis and the frozen
/// schedule, and documents reconstruction quality per rank.
pub fn cmd_reduce(cfg: &ExperimentConfig, out: &Path) -> Result<ReduceSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let started = Instant::now();

    let mesh = cfg.scenario.build_mesh()?;
    let sys = FullOrderSystem::new(mesh, cfg.scenario.material.clone(), cfg.scenario.film.clone())?;

    let inputs = cfg.sweep.runs(cfg.scenario.process.t_hold);
    log::info!(
        "sweeping {} process corners on {} nodes",
        inputs.len(),
        sys.n_nodes()
    );
    let sweep_started = Instant::now();
    let runs: Vec<StateTrajectory> = inputs
        .par_iter()
        .map(|p| {
            let grid = cfg.scenario.build_grid_for(p)?;
            let traj = cfg.scenario.build_trajectory(sys.mesh(), &grid)?;
            let q0 = cfg.scenario.initial_state(sys.mesh(), p.t_aust_avg);
            sys.simulate(&grid, &traj, &q0, None)
        })
        .collect::<Result<_>>()?;
    let sweep_runtime_s = sweep_started.elapsed().as_secs_f64();

    let refs: Vec<&StateTrajectory> = runs.iter().collect();
    let snapshots = collect_snapshots(&refs, cfg.rom.snapshot_stride)?;
    let n_snapshots = snapshots.ncols();
    log::info!("extracting basis from {n_snapshots} snapshots");
    let basis = pod_basis(&snapshots, cfg.rom.rank_rule(), cfg.rom.energy_on_squares)?;
    drop(snapshots);
    drop(runs);
    basis.save(&out.join(BASIS_FILE))?;

    let mut csv = table(out, "energy.csv")?;
    writeln!(
        csv,
        "# units: sigma [K] (singular value of the snapshot matrix); energy ratios dimensionless"
    )?;
    writeln!(csv, "mode,sigma,energy_first_powers,energy_squares")?;
    for i in 1..=basis.sigma.len() {
        writeln!(
            csv,
            "{},{},{},{}",
            i,
            basis.sigma[i - 1],
            basis.energy_ratio(i, false),
            basis.energy_ratio(i, true)
        )?;
    }
    csv.flush()?;

    // Freeze the schedule along the supporting run.
    let grid = cfg.scenario.build_grid_for(&cfg.rom.supporting)?;
    let traj = cfg.scenario.build_trajectory(sys.mesh(), &grid)?;
    let q0 = cfg
        .scenario
        .initial_state(sys.mesh(), cfg.rom.supporting.t_aust_avg);
    let supporting = sys.simulate(&grid, &traj, &q0, None)?;
    log::info!("freezing schedule at rank {}", basis.rank());
    let schedule = build_schedule(
        &sys,
        &basis,
        &supporting,
        &traj,
        &grid,
        &cfg.disturbance.regions(),
        cfg.scenario.film.contact_threshold,
        &cfg.scenario.sensors,
    )?;
    schedule.save(&out.join(SCHEDULE_FILE))?;

    // Reconstruction error of the supporting run per rank.
    let volumes = DVector::from_vec(sys.mesh().lumped_volumes());
    let mut ranks: Vec<usize> = cfg
        .evaluate
        .ranks
        .iter()
        .copied()
        .chain(std::iter::once(basis.rank()))
        .filter(|&r| r <= basis.rank())
        .collect();
    ranks.sort_unstable();
    ranks.dedup();
    let mut rank_study = Vec::with_capacity(ranks.len());
    for &r in &ranks {
        let tb = basis.truncated(r);
        let x0 = tb.reduce(&q0);
        let xs = simulate_frozen(&sys, &tb, &supporting, &traj, &grid, &x0)?;
        let lifted = &tb.phi * &xs;
        let errs = error_series(&lifted, &supporting.states, &volumes);
        rank_study.push(RankRow {
            rank: r,
            energy: basis.energy_ratio(r, cfg.rom.energy_on_squares),
            mean_error_kelvin: errs.iter().sum::<f64>() / errs.len() as f64,
            max_error_kelvin: errs.iter().cloned().fold(0.0, f64::max),
        });
    }

    let mut csv = table(out, "rmse_rank.csv")?;
    writeln!(
        csv,
        "# units: energy dimensionless; mean_error_kelvin, max_error_kelvin [K]"
    )?;
    writeln!(csv, "rank,energy,mean_error_kelvin,max_error_kelvin")?;
    for row in &rank_study {
        writeln!(
            csv,
            "{},{},{},{}",
            row.rank, row.energy, row.mean_error_kelvin, row.max_error_kelvin
        )?;
    }
    csv.flush()?;

    let summary = ReduceSummary {
        n_runs: inputs.len(),
        n_snapshots,
        rank: basis.rank(),
        energy_first_powers: basis.energy_ratio(basis.rank(), false),
        energy_squares: basis.energy_ratio(basis.rank(), true),
        rank_study,
        sweep_runtime_s,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    write_json(out, "reduce_report.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

/// What `estimate` did, also written to `estimate_report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub rank: usize,
    pub n_outputs: usize,
    pub n_disturbances: usize,
    pub estimate_disturbance: bool,
    /// Volume-weighted field error statistics [K]; absent when the plant
    /// container carries no state history to compare against.
    pub rmse_mean: Option<f64>,
    pub rmse_max: Option<f64>,
    pub rmse_final: Option<f64>,
    /// Mean disturbance estimate over the slices where the recorded truth is
    /// active (over all slices when no truth is available).
    pub d_hat_active_mean: Vec<f64>,
    /// Mean recorded disturbance over its own active slices.
    pub d_truth_active_mean: Vec<f64>,
    pub innovation_rms: f64,
    pub runtime_s: f64,
}

/// Replays recorded measurements through the augmented filter.
pub fn cmd_estimate(
    cfg: &ExperimentConfig,
    out: &Path,
    opts: &EstimateOptions,
) -> Result<EstimateSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let started = Instant::now();

    let basis = PodBasis::load(&out.join(BASIS_FILE))?;
    let schedule = LtvSchedule::load(&out.join(SCHEDULE_FILE))?;
    if schedule.rank() != basis.rank() {
        return Err(Error::ShapeMismatch {
            context: "schedule vs basis".into(),
            expected: format!("rank {}", basis.rank()),
            found: format!("rank {}", schedule.rank()),
        });
    }

    let plant_path = match &opts.plant {
        PlantSource::Fom => out.join(PLANT_RUN_FILE),
        PlantSource::External(p) => p.clone(),
    };
    let display = plant_path.display().to_string();
    let mut c = Container::load(&plant_path)?;
    c.expect_kind("plant-run", &display)?;
    let times = c.take_column("times", &display)?;
    let measurements = if c.names().contains(&"sensors_noisy") {
        c.take("sensors_noisy", &display)?
    } else {
        c.take("sensors_clean", &display)?
    };
    let truth_states = if c.names().contains(&"states") {
        Some(c.take("states", &display)?)
    } else {
        None
    };
    let truth_volumes = if c.names().contains(&"volumes") {
        Some(DVector::from_vec(c.take_column("volumes", &display)?))
    } else {
        None
    };
    let truth_d = if c.names().contains(&"disturbance") {
        Some(c.take("disturbance", &display)?)
    } else {
        None
    };

    // The frozen schedule is only valid on its own time grid.
    let n_slices = schedule.n_steps() + 1;
    if times.len() != n_slices
        || times
            .iter()
            .zip(schedule.times.iter())
            .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()))
    {
        return Err(Error::BadTimeGrid(format!(
            "plant run in {display} does not share the schedule's time grid"
        )));
    }

    log::info!(
        "filtering {} steps at rank {} ({} sensors, {} disturbance channels)",
        schedule.n_steps(),
        schedule.rank(),
        schedule.n_outputs(),
        schedule.n_disturbances()
    );
    let q0_guess = DVector::from_element(basis.n_nodes(), cfg.scenario.process.t_aust_avg);
    let x0 = basis.reduce(&q0_guess);
    let result = run_estimator(&schedule, &measurements, &x0, &cfg.noise, opts.estimate_disturbance)?;
    let q_hat = &basis.phi * &result.x_hat;

    let errs = match (&truth_states, &truth_volumes) {
        (Some(states), Some(volumes)) => {
            if states.nrows() != q_hat.nrows() {
                return Err(Error::ShapeMismatch {
                    context: "plant states vs basis".into(),
                    expected: format!("{} nodes", q_hat.nrows()),
                    found: format!("{} nodes", states.nrows()),
                });
            }
            Some(error_series(&q_hat, states, volumes))
        }
        _ => None,
    };

    let n_d = schedule.n_disturbances();
    let mut d_hat_active_mean = vec![0.0; n_d];
    let mut d_truth_active_mean = vec![0.0; n_d];
    for j in 0..n_d {
        let active: Vec<usize> = match &truth_d {
            Some(d) if d.nrows() == n_d => {
                (0..n_slices).filter(|&k| d[(j, k)] != 0.0).collect()
            }
            _ => (0..n_slices).collect(),
        };
        if active.is_empty() {
            continue;
        }
        let inv = 1.0 / active.len() as f64;
        d_hat_active_mean[j] = active.iter().map(|&k| result.d_hat[(j, k)]).sum::<f64>() * inv;
        if let Some(d) = &truth_d {
            if d.nrows() == n_d {
                d_truth_active_mean[j] = active.iter().map(|&k| d[(j, k)]).sum::<f64>() * inv;
            }
        }
    }

    let innovation_rms = if result.innovations.is_empty() {
        0.0
    } else {
        (result.innovations.iter().map(|v| v * v).sum::<f64>()
            / result.innovations.len() as f64)
            .sqrt()
    };

    let mut csv = table(out, "estimate.csv")?;
    writeln!(
        csv,
        "# units: t [s]; error_kelvin, innovation_* [K]; d_hat_* [W/m^3]; \
         p_trace mixes reduced-state and disturbance variances"
    )?;
    write!(csv, "t,error_kelvin,p_trace")?;
    for j in 0..n_d {
        write!(csv, ",d_hat_{}", j + 1)?;
    }
    for s in 0..schedule.n_outputs() {
        write!(csv, ",innovation_{}", s + 1)?;
    }
    writeln!(csv)?;
    for k in 0..n_slices {
        let err = errs.as_ref().map_or(f64::NAN, |e| e[k]);
        write!(csv, "{},{},{}", times[k], err, result.p_trace[k])?;
        for j in 0..n_d {
            write!(csv, ",{}", result.d_hat[(j, k)])?;
        }
        for s in 0..schedule.n_outputs() {
            let v = if k == 0 { 0.0 } else { result.innovations[(s, k - 1)] };
            write!(csv, ",{v}")?;
        }
        writeln!(csv)?;
    }
    csv.flush()?;

    let mut out_c = Container::new("estimate-run");
    out_c.push_vec("times", &times);
    out_c.push("x_hat", result.x_hat.clone());
    out_c.push("d_hat", result.d_hat.clone());
    out_c.push("q_hat", q_hat);
    out_c.push("innovations", result.innovations.clone());
    out_c.push_vec("p_trace", &result.p_trace);
    out_c.save(&out.join(ESTIMATE_RUN_FILE))?;

    let summary = EstimateSummary {
        rank: schedule.rank(),
        n_outputs: schedule.n_outputs(),
        n_disturbances: n_d,
        estimate_disturbance: opts.estimate_disturbance,
        rmse_mean: errs
            .as_ref()
            .map(|e| e.iter().sum::<f64>() / e.len() as f64),
        rmse_max: errs
            .as_ref()
            .map(|e| e.iter().cloned().fold(0.0, f64::max)),
        rmse_final: errs.as_ref().map(|e| *e.last().unwrap()),
        d_hat_active_mean,
        d_truth_active_mean,
        innovation_rms,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    write_json(out, "estimate_report.json", &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Verification check plus its verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Property counts of one classified field.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyCounts {
    pub hard: usize,
    pub soft: usize,
    pub undetermined: usize,
}

/// Wall-time comparison of the full-order model against the reduced
/// schedule on the supporting-run grid; each side is the median of three
/// runs.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedupReport {
    pub n_nodes: usize,
    pub rank: usize,
    pub n_steps: usize,
    pub fom_median_s: f64,
    pub rom_median_s: f64,
    /// `fom_median_s / rom_median_s`.
    pub factor: f64,
}

/// What `evaluate` did, also written to `evaluation_report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluateSummary {
    pub checks: Vec<CheckOutcome>,
    pub checks_passed: usize,
    pub all_checks_passed: bool,
    /// Property classification of the recorded plant run, when present.
    pub plant_properties: Option<PropertyCounts>,
    /// Property classification of the estimated field, when present.
    pub estimated_properties: Option<PropertyCounts>,
    /// Fraction of nodes whose flag agrees between plant and estimate.
    pub flag_agreement: Option<f64>,
    /// Timing comparison, when a basis and schedule are present.
    pub speedup: Option<SpeedupReport>,
    pub runtime_s: f64,
}

fn counts(map: &crate::property::PropertyMap) -> PropertyCounts {
    PropertyCounts {
        hard: map.count(PropertyFlag::Hard),
        soft: map.count(PropertyFlag::Soft),
        undetermined: map.count(PropertyFlag::Undetermined),
    }
}

fn write_property_csv(
    out: &Path,
    name: &str,
    mesh_coords: &[[f64; 3]],
    map: &crate::property::PropertyMap,
) -> Result<()> {
    let mut csv = table(out, name)?;
    writeln!(
        csv,
        "# units: x, y [m]; value [K]; crossing_time [s]; rate [K/s]; \
         undetermined nodes carry NaN"
    )?;
    writeln!(csv, "node,x,y,flag,value,crossing_time,rate")?;
    for (i, flag) in map.flag.iter().enumerate() {
        let tag = match flag {
            PropertyFlag::Hard => "hard",
            PropertyFlag::Soft => "soft",
            PropertyFlag::Undetermined => "undetermined",
        };
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            i,
            mesh_coords[i][0],
            mesh_coords[i][1],
            tag,
            map.value[i],
            map.crossing_time[i],
            map.rate[i]
        )?;
    }
    csv.flush()?;
    Ok(())
}

/// Re-runs the built-in verification checks and classifies end-of-cycle
/// properties from the recorded histories.
pub fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<EvaluateSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let started = Instant::now();

    log::info!("running verification checks");
    let mut checks_list = Vec::new();
    for suite in [
        checks::thermal_suite()?,
        checks::reduction_suite()?,
        checks::estimation_suite()?,
    ] {
        for report in suite {
            checks_list.push(CheckOutcome {
                passed: report.passed(),
                name: report.name,
                measured: report.measured,
                tolerance: report.tolerance,
            });
        }
    }
    let checks_passed = checks_list.iter().filter(|c| c.passed).count();
    let all_checks_passed = checks_passed == checks_list.len();

    let mesh = cfg.scenario.build_mesh()?;
    let rule = &cfg.evaluate.property;

    let plant_path = out.join(PLANT_RUN_FILE);
    let mut plant_map = None;
    if plant_path.exists() {
        let display = plant_path.display().to_string();
        let mut c = Container::load(&plant_path)?;
        c.expect_kind("plant-run", &display)?;
        let times = c.take_column("times", &display)?;
        let states = c.take("states", &display)?;
        let map = estimate_properties(&states, &times, rule)?;
        write_property_csv(out, "properties.csv", mesh.coords(), &map)?;
        plant_map = Some(map);
    }

    let estimate_path = out.join(ESTIMATE_RUN_FILE);
    let mut estimated_map = None;
    if estimate_path.exists() {
        let display = estimate_path.display().to_string();
        let mut c = Container::load(&estimate_path)?;
        c.expect_kind("estimate-run", &display)?;
        let times = c.take_column("times", &display)?;
        let q_hat = c.take("q_hat", &display)?;
        let map = estimate_properties(&q_hat, &times, rule)?;
        write_property_csv(out, "properties_estimated.csv", mesh.coords(), &map)?;
        estimated_map = Some(map);
    }

    let flag_agreement = match (&plant_map, &estimated_map) {
        (Some(a), Some(b)) if a.flag.len() == b.flag.len() => {
            let same = a
                .flag
                .iter()
                .zip(&b.flag)
                .filter(|(x, y)| x == y)
                .count();
            Some(same as f64 / a.flag.len() as f64)
        }
        _ => None,
    };

    let basis_path = out.join(BASIS_FILE);
    let schedule_path = out.join(SCHEDULE_FILE);
    let speedup = if basis_path.exists() && schedule_path.exists() {
        Some(measure_speedup(cfg, &basis_path, &schedule_path)?)
    } else {
        None
    };

    let summary = EvaluateSummary {
        checks_passed,
        all_checks_passed,
        checks: checks_list,
        plant_properties: plant_map.as_ref().map(counts),
        estimated_properties: estimated_map.as_ref().map(counts),
        flag_agreement,
        speedup,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    write_json(out, "evaluation_report.json", &summary)?;
    Ok(summary)
}

/// Times the full-order model against the reduced schedule on the
/// supporting-run grid, three runs each, and reports the medians.
fn measure_speedup(
    cfg: &ExperimentConfig,
    basis_path: &Path,
    schedule_path: &Path,
) -> Result<SpeedupReport> {
    let basis = PodBasis::load(basis_path)?;
    let schedule = LtvSchedule::load(schedule_path)?;
    if schedule.rank() != basis.rank() {
        return Err(Error::ShapeMismatch {
            context: "schedule vs basis".into(),
            expected: format!("rank {}", basis.rank()),
            found: format!("rank {}", schedule.rank()),
        });
    }

    let mesh = cfg.scenario.build_mesh()?;
    let sys = FullOrderSystem::new(mesh, cfg.scenario.material.clone(), cfg.scenario.film.clone())?;
    let grid = cfg.scenario.build_grid_for(&cfg.rom.supporting)?;
    let traj = cfg.scenario.build_trajectory(sys.mesh(), &grid)?;
    let q0 = cfg
        .scenario
        .initial_state(sys.mesh(), cfg.rom.supporting.t_aust_avg);
    let x0 = basis.reduce(&q0);
    log::info!(
        "timing {} nodes against rank {} over {} steps (3 runs each)",
        sys.n_nodes(),
        basis.rank(),
        grid.n_steps()
    );

    let median3 = |mut v: [f64; 3]| {
        v.sort_by(f64::total_cmp);
        v[1]
    };
    let mut fom_times = [0.0f64; 3];
    for slot in fom_times.iter_mut() {
        let tick = Instant::now();
        let run = sys.simulate(&grid, &traj, &q0, None)?;
        *slot = tick.elapsed().as_secs_f64();
        std::hint::black_box(run);
    }
    let mut rom_times = [0.0f64; 3];
    for slot in rom_times.iter_mut() {
        let tick = Instant::now();
        let run = schedule.simulate(&x0, None);
        *slot = tick.elapsed().as_secs_f64();
        std::hint::black_box(run);
    }

    let fom_median_s = median3(fom_times);
    let rom_median_s = median3(rom_times);
    Ok(SpeedupReport {
        n_nodes: sys.n_nodes(),
        rank: basis.rank(),
        n_steps: grid.n_steps(),
        fom_median_s,
        rom_median_s,
        factor: fom_median_s / rom_median_s.max(f64::MIN_POSITIVE),
    })
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

fn table(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    let file = BufWriter::new(File::create(out.join(name))?);
    serde_json::to_writer_pretty(file, value)
        .map_err(|e| Error::BadConfig(format!("report serialization: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.scenario.geometry.edge_length = 0.05;
        cfg.scenario.template.steps = [20, 16, 16, 12];
        // The coarse test mesh leaves larger gaps around the sensor spots.
        cfg.scenario.sensors.snap_radius = 0.05;
        cfg.sweep.t_aust = vec![1173.0, 1273.0];
        cfg.sweep.v_punch = vec![80.0];
        cfg.rom.rank = 12;
        cfg.rom.snapshot_stride = 2;
        cfg.evaluate.ranks = vec![4, 12];
        cfg
    }

    #[test]
    fn config_defaults_survive_a_toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.rom.rank, cfg.rom.rank);
        assert_eq!(back.sweep.t_aust, cfg.sweep.t_aust);
        assert_eq!(back.noise.q_d, cfg.noise.q_d);
        assert_eq!(
            back.scenario.geometry.outer_radius,
            cfg.scenario.geometry.outer_radius
        );
        assert_eq!(back.disturbance.channels.len(), 1);
    }

    #[test]
    fn scenario_tables_live_at_the_top_level_of_the_config() {
        let cfg = ExperimentConfig::from_toml_str(
            "[geometry]\nedge_length = 0.03\n\n[rom]\nrank = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.geometry.edge_length, 0.03);
        assert_eq!(cfg.rom.rank, 7);
    }

    #[test]
    fn bad_sweep_and_bad_pulse_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.t_aust.clear();
        assert!(matches!(cfg.validate(), Err(Error::BadConfig(_))));

        let mut cfg = ExperimentConfig::default();
        cfg.disturbance.channels[0].pulses[0].t_end = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::BadConfig(_))));
    }

    #[test]
    fn plant_source_parsing_accepts_fom_and_external_paths() {
        assert_eq!(PlantSource::parse("fom").unwrap(), PlantSource::Fom);
        assert_eq!(
            PlantSource::parse("external:/tmp/run.bin").unwrap(),
            PlantSource::External(PathBuf::from("/tmp/run.bin"))
        );
        assert!(PlantSource::parse("hil").is_err());
        assert!(PlantSource::parse("external:").is_err());
    }

    #[test]
    fn pipeline_commands_chain_through_an_output_directory() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let cfg = tiny_config();

        let sim = cmd_simulate(&cfg, out, 7).unwrap();
        assert!(sim.n_nodes > 50);
        assert!(out.join(PLANT_RUN_FILE).exists());
        assert!(out.join("sensors.csv").exists());

        let red = cmd_reduce(&cfg, out).unwrap();
        assert_eq!(red.rank, 12);
        assert!(red.n_snapshots >= 2 * (64 / 2 + 1));
        assert!(out.join(BASIS_FILE).exists());
        assert!(out.join(SCHEDULE_FILE).exists());
        assert!(out.join("energy.csv").exists());

        let est = cmd_estimate(&cfg, out, &EstimateOptions::default()).unwrap();
        assert_eq!(est.rank, 12);
        assert!(est.rmse_mean.is_some());
        assert!(est.rmse_mean.unwrap().is_finite());
        assert!(out.join(ESTIMATE_RUN_FILE).exists());
        assert!(out.join("estimate.csv").exists());
    }

    #[test]
    fn estimation_without_a_prior_reduction_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config();
        let err = cmd_estimate(&cfg, dir.path(), &EstimateOptions::default());
        assert!(err.is_err());
    }

    #[test]
    fn same_seed_reproduces_identical_sensor_files() {
        let cfg = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir_a.path(), 11).unwrap();
        cmd_simulate(&cfg, dir_b.path(), 11).unwrap();
        let a = fs::read(dir_a.path().join("sensors.csv")).unwrap();
        let b = fs::read(dir_b.path().join("sensors.csv")).unwrap();
        assert_eq!(a, b);

        let dir_c = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir_c.path(), 12).unwrap();
        let c = fs::read(dir_c.path().join("sensors.csv")).unwrap();
        assert_ne!(a, c);
    }
}
