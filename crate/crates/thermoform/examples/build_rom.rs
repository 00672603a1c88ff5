//! Reduced-order model construction from a process-corner sweep.
//!
//! Simulates the full-order plant at a handful of austenitization
//! temperatures and punch speeds, stacks the snapshots, extracts a
//! proper-orthogonal basis, and freezes a linear time-varying schedule along
//! the nominal run. Finishes by replaying the reduced model against the
//! full-order reference, on the supporting corner and off it.
//!
//!     cargo run -p thermoform --example build_rom

use nalgebra::DVector;
use thermoform::fom::{error_series, FullOrderSystem, StateTrajectory};
use thermoform::rom::pod::{pod_basis, RankRule};
use thermoform::rom::{build_schedule, collect_snapshots};
use thermoform::scenario::config::ScenarioConfig;
use thermoform::scenario::ProcessInputs;

fn main() -> thermoform::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.geometry.edge_length = 0.03;
    cfg.sensors.snap_radius = 0.05;

    let mesh = cfg.build_mesh()?;
    let sys = FullOrderSystem::new(mesh, cfg.material.clone(), cfg.film.clone())?;
    println!("sweeping process corners on {} nodes:", sys.n_nodes());

    let mut runs: Vec<StateTrajectory> = Vec::new();
    for &t_aust in &[1173.0, 1273.0] {
        for &v_punch in &[80.0, 100.0] {
            let inputs = ProcessInputs {
                t_aust_avg: t_aust,
                v_punch,
                ..cfg.process
            };
            let grid = cfg.build_grid_for(&inputs)?;
            let traj = cfg.build_trajectory(sys.mesh(), &grid)?;
            let q0 = cfg.initial_state(sys.mesh(), t_aust);
            runs.push(sys.simulate(&grid, &traj, &q0, None)?);
            println!("  {t_aust:.0} K at {v_punch:.0} mm/s: {} slices", runs.last().unwrap().n_slices());
        }
    }

    let refs: Vec<&StateTrajectory> = runs.iter().collect();
    let snapshots = collect_snapshots(&refs, 5)?;
    let basis = pod_basis(&snapshots, RankRule::FullRank, false)?;
    println!(
        "\n{} snapshots -> numerical rank {}",
        snapshots.ncols(),
        basis.rank()
    );

    println!("\nmode   singular value   cumulative energy");
    for r in 1..=12.min(basis.rank()) {
        println!(
            "{:>4}   {:>14.4e}   {:.9}",
            r,
            basis.sigma[r - 1],
            basis.energy_ratio(r, false)
        );
    }

    // Keep just enough modes for 99.99 % of the snapshot energy.
    let reduced = pod_basis(&snapshots, RankRule::EnergyThreshold(0.9999), false)?;
    println!(
        "\nenergy threshold 0.9999 keeps {} of {} modes",
        reduced.rank(),
        basis.rank()
    );

    // Freeze the schedule along the nominal corner and replay it.
    let grid = cfg.build_grid()?;
    let traj = cfg.build_trajectory(sys.mesh(), &grid)?;
    let q0 = cfg.initial_state(sys.mesh(), cfg.process.t_aust_avg);
    let supporting = sys.simulate(&grid, &traj, &q0, None)?;
    let schedule = build_schedule(
        &sys,
        &reduced,
        &supporting,
        &traj,
        &grid,
        &[],
        cfg.film.contact_threshold,
        &cfg.sensors,
    )?;

    let volumes = DVector::from_vec(sys.mesh().lumped_volumes());
    let replay = |truth: &StateTrajectory, x0: &DVector<f64>| {
        let xs = schedule.simulate(x0, None);
        let lifted = &reduced.phi * &xs;
        let errs = error_series(&lifted, &truth.states, &volumes);
        errs.iter().cloned().fold(0.0, f64::max)
    };

    let on_nominal = replay(&supporting, &reduced.reduce(&q0));
    println!(
        "\nreduced replay, nominal corner ({:.0} K): max field error {on_nominal:.3} K",
        cfg.process.t_aust_avg
    );

    // The frozen coefficients still track a corner they were not built on,
    // just less tightly.
    let off_inputs = ProcessInputs {
        t_aust_avg: 1373.0,
        ..cfg.process
    };
    let q0_off = cfg.initial_state(sys.mesh(), off_inputs.t_aust_avg);
    let truth_off = sys.simulate(&grid, &cfg.build_trajectory(sys.mesh(), &grid)?, &q0_off, None)?;
    let off_nominal = replay(&truth_off, &reduced.reduce(&q0_off));
    println!("reduced replay, off-nominal corner (1373 K): max field error {off_nominal:.3} K");

    Ok(())
}
