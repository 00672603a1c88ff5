//! Wall-time comparison: full-order model vs. frozen reduced schedule.
//!
//! The payoff of the offline reduction work is an online model cheap enough
//! for filtering at cycle time. This example builds both models on the
//! default mesh and times one forming cycle each, medians of three runs.
//!
//!     cargo run --release -p thermoform --example speedup

use std::time::Instant;

use thermoform::fom::FullOrderSystem;
use thermoform::rom::pod::{pod_basis, RankRule};
use thermoform::rom::{build_schedule, collect_snapshots};
use thermoform::scenario::config::ScenarioConfig;

fn median3(mut v: [f64; 3]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[1]
}

fn main() -> thermoform::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.sensors.snap_radius = 0.05;

    let mesh = cfg.build_mesh()?;
    let grid = cfg.build_grid()?;
    let traj = cfg.build_trajectory(&mesh, &grid)?;
    let q0 = cfg.initial_state(&mesh, cfg.process.t_aust_avg);
    let sys = FullOrderSystem::new(mesh, cfg.material.clone(), cfg.film.clone())?;
    println!(
        "building both models: {} nodes, {} steps",
        sys.n_nodes(),
        grid.n_steps()
    );

    let supporting = sys.simulate(&grid, &traj, &q0, None)?;
    let snapshots = collect_snapshots(&[&supporting], 4)?;
    let basis = pod_basis(&snapshots, RankRule::Fixed(30), false)?;
    let schedule = build_schedule(
        &sys,
        &basis,
        &supporting,
        &traj,
        &grid,
        &[],
        cfg.film.contact_threshold,
        &cfg.sensors,
    )?;
    let x0 = basis.reduce(&q0);

    let mut fom_s = [0.0; 3];
    for t in &mut fom_s {
        let started = Instant::now();
        let run = sys.simulate(&grid, &traj, &q0, None)?;
        std::hint::black_box(run);
        *t = started.elapsed().as_secs_f64();
    }

    let mut rom_s = [0.0; 3];
    for t in &mut rom_s {
        let started = Instant::now();
        let run = schedule.simulate(&x0, None);
        std::hint::black_box(run);
        *t = started.elapsed().as_secs_f64();
    }

    let (fom, rom) = (median3(fom_s), median3(rom_s));
    println!("\nfull order ({} nodes): {:>9.4} s per cycle", sys.n_nodes(), fom);
    println!("reduced    (rank {}):  {:>9.6} s per cycle", basis.rank(), rom);
    println!("speedup: {:.0}x", fom / rom);
    println!(
        "\n(cycle covers {:.2} s of process time -> the reduced model runs {:.0}x \
         faster than the process itself)",
        grid.total_time(),
        grid.total_time() / rom
    );

    Ok(())
}
