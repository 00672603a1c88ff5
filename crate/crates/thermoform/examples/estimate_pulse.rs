//! State and disturbance estimation from three noisy thermocouples.
//!
//! The plant is hit by an unmodelled 1000 W/m^3 heat pulse over the contact
//! zone between 9 s and 11 s. The augmented Kalman filter tracks the reduced
//! temperature field and reconstructs the pulse from the sensor innovations
//! alone — the filter model contains no pulse.
//!
//!     cargo run -p thermoform --example estimate_pulse

use nalgebra::DVector;
use rand::SeedableRng;
use rand_distr::Distribution;
use thermoform::estimator::{run_estimator, NoiseConfig};
use thermoform::fom::{
    error_series, output_nodes_per_slice, read_sensors, DisturbanceChannel, DisturbanceSignal,
    FullOrderSystem, Pulse, RegionSpec,
};
use thermoform::rom::pod::{pod_basis, RankRule};
use thermoform::rom::{build_schedule, collect_snapshots};
use thermoform::scenario::config::ScenarioConfig;

fn main() -> thermoform::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.geometry.edge_length = 0.025;
    cfg.sensors.snap_radius = 0.05;

    let mesh = cfg.build_mesh()?;
    let grid = cfg.build_grid()?;
    let traj = cfg.build_trajectory(&mesh, &grid)?;
    let q0 = cfg.initial_state(&mesh, cfg.process.t_aust_avg);
    let sys = FullOrderSystem::new(mesh, cfg.material.clone(), cfg.film.clone())?;

    // Plant run with the unmodelled pulse.
    let pulse = DisturbanceSignal {
        channels: vec![DisturbanceChannel {
            region: RegionSpec::Contact,
            pulses: vec![Pulse {
                t_start: 9.0,
                t_end: 11.0,
                power_density: 1000.0,
            }],
        }],
        contact_threshold: cfg.film.contact_threshold,
    };
    let plant = sys.simulate(&grid, &traj, &q0, Some(&pulse))?;

    // Reduced model from a pulse-free supporting run.
    let supporting = sys.simulate(&grid, &traj, &q0, None)?;
    let snapshots = collect_snapshots(&[&supporting], 4)?;
    let basis = pod_basis(&snapshots, RankRule::Fixed(20), false)?;
    let schedule = build_schedule(
        &sys,
        &basis,
        &supporting,
        &traj,
        &grid,
        &[RegionSpec::Contact],
        cfg.film.contact_threshold,
        &cfg.sensors,
    )?;
    println!(
        "filter model: rank {} of {} nodes, {} sensors, 1 disturbance channel",
        basis.rank(),
        sys.n_nodes(),
        schedule.n_outputs()
    );

    // Noisy measurements (sigma_v = 10 K).
    let nodes = output_nodes_per_slice(sys.mesh(), &traj, &cfg.sensors)?;
    let mut y = read_sensors(&plant.states, &nodes);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let noise = rand_distr::Normal::new(0.0, cfg.sensors.sigma_v).unwrap();
    y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));

    let x0 = basis.reduce(&q0);
    let run = run_estimator(&schedule, &y, &x0, &NoiseConfig::default(), true)?;

    // Field error of the lifted estimate against the true plant state.
    let q_hat = &basis.phi * &run.x_hat;
    let volumes = DVector::from_vec(sys.mesh().lumped_volumes());
    let errs = error_series(&q_hat, &plant.states, &volumes);
    let err_max = errs.iter().cloned().fold(0.0, f64::max);
    println!("\nfield error vs plant: max {:.2} K over the cycle", err_max);

    println!("\nreconstructed pulse (true: 1000 W/m^3 on [9 s, 11 s)):");
    println!("t [s]    d_hat [W/m^3]");
    let mut next = 8.0;
    let mut plateau = Vec::new();
    for k in 0..=schedule.n_steps() {
        let t = schedule.times[k];
        if t + 1e-9 >= next && t <= 12.0 {
            println!("{:>5.2}    {:>10.1}", t, run.d_hat[(0, k)]);
            next += 0.5;
        }
        if (10.0..11.0).contains(&t) {
            plateau.push(run.d_hat[(0, k)]);
        }
    }
    let plateau_mean = plateau.iter().sum::<f64>() / plateau.len() as f64;
    println!(
        "\nplateau mean over [10 s, 11 s): {:.0} W/m^3 ({:+.1} % of truth)",
        plateau_mean,
        100.0 * (plateau_mean - 1000.0) / 1000.0
    );

    Ok(())
}
