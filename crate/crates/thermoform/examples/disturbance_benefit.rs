//! What the disturbance states buy when the model is wrong.
//!
//! The plant releases latent heat while cooling through the martensite band
//! — a temperature-dependent source the reduced model knows nothing about.
//! The same filter runs twice on identical measurements, once with the
//! augmented disturbance states and once without, and the field errors are
//! compared over the window in which the source is active.
//!
//!     cargo run -p thermoform --example disturbance_benefit

use nalgebra::DVector;
use rand::SeedableRng;
use rand_distr::Distribution;
use thermoform::estimator::{run_estimator, NoiseConfig};
use thermoform::fom::material::Table1d;
use thermoform::fom::{
    error_series, output_nodes_per_slice, read_sensors, FullOrderSystem, RegionSpec,
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

    // The plant carries an exothermic source active between 380 K and 480 K;
    // the filter model is built from the plain material.
    let mut hot_material = cfg.material.clone();
    hot_material.g = Some(Table1d::new(vec![
        (380.0, 0.0),
        (400.0, 700.0),
        (430.0, 1400.0),
        (460.0, 700.0),
        (480.0, 0.0),
    ]));
    let plant_sys = FullOrderSystem::new(mesh.clone(), hot_material, cfg.film.clone())?;
    let model_sys = FullOrderSystem::new(mesh, cfg.material.clone(), cfg.film.clone())?;

    let plant = plant_sys.simulate(&grid, &traj, &q0, None)?;
    let supporting = model_sys.simulate(&grid, &traj, &q0, None)?;

    let snapshots = collect_snapshots(&[&supporting], 4)?;
    let basis = pod_basis(&snapshots, RankRule::Fixed(20), false)?;
    let schedule = build_schedule(
        &model_sys,
        &basis,
        &supporting,
        &traj,
        &grid,
        &[RegionSpec::Contact],
        cfg.film.contact_threshold,
        &cfg.sensors,
    )?;

    let nodes = output_nodes_per_slice(model_sys.mesh(), &traj, &cfg.sensors)?;
    let mut y = read_sensors(&plant.states, &nodes);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let noise = rand_distr::Normal::new(0.0, cfg.sensors.sigma_v).unwrap();
    y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));

    // Slices where the latent source actually releases power.
    let g = plant_sys.material().g.as_ref().unwrap();
    let volumes = DVector::from_vec(plant_sys.mesh().lumped_volumes());
    let power: Vec<f64> = (0..plant.n_slices())
        .map(|k| {
            (0..plant.n_nodes())
                .map(|i| g.eval(plant.states[(i, k)]) * volumes[i])
                .sum()
        })
        .collect();
    let threshold = 0.05 * power.iter().cloned().fold(0.0, f64::max);
    let active: Vec<usize> = (0..power.len()).filter(|&k| power[k] > threshold).collect();
    println!(
        "latent source active on {} of {} slices ({:.1} s .. {:.1} s)",
        active.len(),
        plant.n_slices(),
        plant.times[*active.first().unwrap()],
        plant.times[*active.last().unwrap()],
    );

    let x0 = basis.reduce(&q0);
    let window_error = |estimate_disturbance: bool| -> thermoform::Result<f64> {
        let run = run_estimator(&schedule, &y, &x0, &NoiseConfig::default(), estimate_disturbance)?;
        let q_hat = &basis.phi * &run.x_hat;
        let errs = error_series(&q_hat, &plant.states, &volumes);
        Ok(active.iter().map(|&k| errs[k]).fold(0.0, f64::max))
    };

    let with = window_error(true)?;
    let without = window_error(false)?;
    println!("\nmax field error while the source is active:");
    println!("  without disturbance states: {without:.2} K");
    println!("  with disturbance states:    {with:.2} K");
    println!(
        "  reduction:                  {:.0} %",
        100.0 * (1.0 - with / without)
    );

    Ok(())
}
