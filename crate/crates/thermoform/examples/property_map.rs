//! End-of-cycle mechanical property map from temperature histories.
//!
//! Press hardening trades on the cooling rate: sheet zones quenched through
//! the martensite start temperature faster than the critical rate come out
//! hard, slower zones stay soft. This example classifies every node of a
//! simulated cycle and prints the map as radial bands plus a coarse picture
//! of the sheet.
//!
//!     cargo run -p thermoform --example property_map

use thermoform::fom::FullOrderSystem;
use thermoform::property::{estimate_properties, PropertyFlag, PropertyRule};
use thermoform::scenario::config::ScenarioConfig;

fn main() -> thermoform::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.geometry.edge_length = 0.02;

    let mesh = cfg.build_mesh()?;
    let grid = cfg.build_grid()?;
    let traj = cfg.build_trajectory(&mesh, &grid)?;
    let q0 = cfg.initial_state(&mesh, cfg.process.t_aust_avg);
    let sys = FullOrderSystem::new(mesh, cfg.material.clone(), cfg.film.clone())?;
    let run = sys.simulate(&grid, &traj, &q0, None)?;

    let rule = PropertyRule::default();
    println!(
        "rule: rate through {:.0} K over a {:.1} s lookback; critical {:.0} K/s",
        rule.m_s, rule.window, rule.critical_rate
    );

    let map = estimate_properties(&run.states, &run.times, &rule)?;
    println!(
        "\n{} nodes: {} hard, {} soft, {} undetermined (never cooled through {:.0} K)",
        sys.n_nodes(),
        map.count(PropertyFlag::Hard),
        map.count(PropertyFlag::Soft),
        map.count(PropertyFlag::Undetermined),
        rule.m_s
    );

    // Radial view: contact with the cold tool quenches the inner zones.
    println!("\nradius band [m]   hard  soft  undet.   mean quench rate [K/s]");
    let coords = sys.mesh().coords();
    let r_max = cfg.geometry.outer_radius;
    let bands = 6;
    for b in 0..bands {
        let lo = r_max * b as f64 / bands as f64;
        let hi = r_max * (b + 1) as f64 / bands as f64;
        let in_band: Vec<usize> = (0..sys.n_nodes())
            .filter(|&i| {
                let r = (coords[i][0].powi(2) + coords[i][1].powi(2)).sqrt();
                lo <= r && r < hi
            })
            .collect();
        if in_band.is_empty() {
            continue;
        }
        let count = |flag| {
            in_band
                .iter()
                .filter(|&&i| map.flag[i] == flag)
                .count()
        };
        let rates: Vec<f64> = in_band
            .iter()
            .map(|&i| map.rate[i])
            .filter(|r| r.is_finite())
            .collect();
        let mean_rate = if rates.is_empty() {
            f64::NAN
        } else {
            rates.iter().sum::<f64>() / rates.len() as f64
        };
        println!(
            "{lo:>5.2} .. {hi:<5.2}   {:>4}  {:>4}  {:>6}   {:>10.1}",
            count(PropertyFlag::Hard),
            count(PropertyFlag::Soft),
            count(PropertyFlag::Undetermined),
            mean_rate
        );
    }

    // Coarse picture of the blank (top view, one character per cell).
    println!("\n  H hard, s soft, . undetermined, blank: outside the sheet");
    let cells = 33;
    for row in 0..cells / 2 + 1 {
        let y = r_max - 2.0 * r_max * (2 * row) as f64 / (cells - 1) as f64;
        let mut line = String::new();
        for col in 0..cells {
            let x = -r_max + 2.0 * r_max * col as f64 / (cells - 1) as f64;
            let nearest = (0..sys.n_nodes()).min_by(|&a, &b| {
                let da = (coords[a][0] - x).powi(2) + (coords[a][1] - y).powi(2);
                let db = (coords[b][0] - x).powi(2) + (coords[b][1] - y).powi(2);
                da.total_cmp(&db)
            });
            let ch = match nearest {
                Some(i)
                    if (coords[i][0] - x).powi(2) + (coords[i][1] - y).powi(2)
                        < (2.0 * cfg.geometry.edge_length).powi(2) =>
                {
                    match map.flag[i] {
                        PropertyFlag::Hard => 'H',
                        PropertyFlag::Soft => 's',
                        PropertyFlag::Undetermined => '.',
                    }
                }
                _ => ' ',
            };
            line.push(ch);
            line.push(' ');
        }
        println!("  {line}");
    }
    println!("  (every other row sampled so the disc stays round in terminal cells)");

    Ok(())
}
