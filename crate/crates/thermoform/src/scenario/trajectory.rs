//! Per-node forming kinematics over the process time grid.
//!
//! The mechanical side of the process enters the thermal model one-way, as a
//! prescribed parameter trajectory: nodal displacement, distance to the
//! nearest tool surface, contact pressure and the temperature of whatever
//! each node exchanges heat with (tool on contact, air otherwise). The
//! synthesizer below generates a smooth hole-flanging motion: a collar rises
//! around the hole during forming while the tool closes radially outward,
//! holds closed, and releases during demoulding. All rules are functions of
//! the *step index* within a phase, so runs that differ only in punch speed
//! share identical per-step configurations and differ only in step size.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::mesh::Mesh;
use crate::scenario::{Phase, TimeGrid};

/// Tool and motion parameters of the synthetic hole-flanging scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolSpec {
    /// Radius out to which the blank is lifted into a collar [m].
    pub flange_radius: f64,
    /// Radius out to which the closed tool touches the blank [m].
    pub contact_radius: f64,
    /// Radial width of the displacement blend band [m].
    pub band_width: f64,
    /// Vertical collar lift at full forming stroke [m].
    pub collar_height: f64,
    /// Initial blank-to-tool clearance [m].
    pub gap0: f64,
    /// Contact pressure in the fully closed tool [Pa].
    pub pressure_max: f64,
    /// Tool surface temperature seen by contacting nodes [K].
    pub tool_temperature: f64,
    /// Air temperature seen by free surfaces [K].
    pub ambient_temperature: f64,
    /// Tool distance below which a node counts as contacting [m].
    pub contact_threshold: f64,
}

impl Default for ToolSpec {
    fn default() -> Self {
        ToolSpec {
            flange_radius: 0.13,
            contact_radius: 0.20,
            band_width: 0.05,
            collar_height: 0.05,
            gap0: 0.05,
            pressure_max: 2.0e7,
            tool_temperature: 373.0,
            ambient_temperature: 293.0,
            contact_threshold: 1e-6,
        }
    }
}

impl ToolSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.flange_radius,
            self.contact_radius,
            self.band_width,
            self.collar_height,
            self.gap0,
            self.pressure_max,
            self.tool_temperature,
            self.ambient_temperature,
            self.contact_threshold,
        ];
        if positive.iter().any(|v| !(v > &0.0) || !v.is_finite()) {
            return Err(Error::BadConfig(
                "tool spec entries must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Cubic smoothstep on [0, 1] with clamping outside.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Prescribed mechanical state of every node at every grid point.
///
/// Each field is an `n_nodes x (n_steps + 1)` matrix; column `k` belongs to
/// grid point `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTrajectory {
    /// Nodal displacement components [m].
    pub disp_x: DMatrix<f64>,
    pub disp_y: DMatrix<f64>,
    pub disp_z: DMatrix<f64>,
    /// Distance to the nearest tool surface [m]; exactly zero on contact.
    pub tool_dist: DMatrix<f64>,
    /// Contact normal pressure [Pa]; positive only where `tool_dist` is zero.
    pub pressure: DMatrix<f64>,
    /// Temperature of the exchange partner (tool or air) [K].
    pub exchange_temp: DMatrix<f64>,
}

impl ParameterTrajectory {
    pub fn n_nodes(&self) -> usize {
        self.tool_dist.nrows()
    }

    /// Number of stored grid points (`n_steps + 1`).
    pub fn n_slices(&self) -> usize {
        self.tool_dist.ncols()
    }

    pub fn fields(&self) -> [(&'static str, &DMatrix<f64>); 6] {
        [
            ("disp_x", &self.disp_x),
            ("disp_y", &self.disp_y),
            ("disp_z", &self.disp_z),
            ("tool_dist", &self.tool_dist),
            ("pressure", &self.pressure),
            ("exchange_temp", &self.exchange_temp),
        ]
    }

    /// Checks physical consistency: finite values, non-negative distances
    /// and pressures, positive exchange temperatures, and pressure only
    /// under closed contact.
    pub fn validate(&self) -> Result<()> {
        for (name, m) in self.fields() {
            for k in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if !m[(i, k)].is_finite() {
                        return Err(Error::NonFinite {
                            field: name.into(),
                            step: k,
                            node: i,
                        });
                    }
                }
            }
        }
        for k in 0..self.n_slices() {
            for i in 0..self.n_nodes() {
                let delta = self.tool_dist[(i, k)];
                let p = self.pressure[(i, k)];
                if delta < 0.0 || p < 0.0 || self.exchange_temp[(i, k)] <= 0.0 {
                    return Err(Error::ContactInconsistency {
                        step: k,
                        node: i,
                        pressure: p,
                        distance: delta,
                    });
                }
                if p > 0.0 && delta != 0.0 {
                    return Err(Error::ContactInconsistency {
                        step: k,
                        node: i,
                        pressure: p,
                        distance: delta,
                    });
                }
            }
        }
        Ok(())
    }

    /// Deformed nodal coordinates at grid point `k`.
    pub fn deformed_coords(&self, mesh: &Mesh, k: usize) -> Vec<[f64; 3]> {
        let x0 = mesh.coords();
        (0..self.n_nodes())
            .map(|i| {
                [
                    x0[i][0] + self.disp_x[(i, k)],
                    x0[i][1] + self.disp_y[(i, k)],
                    x0[i][2] + self.disp_z[(i, k)],
                ]
            })
            .collect()
    }

    /// Nodes whose tool distance is at or below `threshold` at grid point `k`.
    pub fn contact_nodes(&self, k: usize, threshold: f64) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| self.tool_dist[(i, k)] <= threshold)
            .collect()
    }

    /// Writes a plain CSV dump for inspection, sub-sampled by the given node
    /// and step strides (both at least 1).
    pub fn export_csv<W: std::io::Write>(
        &self,
        mut w: W,
        times: &[f64],
        node_stride: usize,
        step_stride: usize,
    ) -> Result<()> {
        let node_stride = node_stride.max(1);
        let step_stride = step_stride.max(1);
        writeln!(
            w,
            "step,t_s,node,disp_x_m,disp_y_m,disp_z_m,tool_dist_m,pressure_pa,exchange_temp_k"
        )?;
        for k in (0..self.n_slices()).step_by(step_stride) {
            for i in (0..self.n_nodes()).step_by(node_stride) {
                writeln!(
                    w,
                    "{},{:.9e},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                    k,
                    times[k],
                    i,
                    self.disp_x[(i, k)],
                    self.disp_y[(i, k)],
                    self.disp_z[(i, k)],
                    self.tool_dist[(i, k)],
                    self.pressure[(i, k)],
                    self.exchange_temp[(i, k)],
                )?;
            }
        }
        Ok(())
    }
}

/// Synthesizes the hole-flanging parameter trajectory on the given mesh and
/// grid.
///
/// Phase semantics: during transfer every node sits at the initial clearance
/// in air; during forming the collar region (inside `flange_radius`, blended
/// over `band_width`) rises with the stroke while contact closes radially
/// from the hole outward (nodes inside `contact_radius` meet the tool at a
/// radius-staggered stroke fraction, after which pressure ramps up); during
/// holding the tool stays closed at full pressure; during demoulding
/// pressure drops and the gap reopens while the formed shape persists.
pub fn synth_forming_trajectory(
    mesh: &Mesh,
    grid: &TimeGrid,
    tool: &ToolSpec,
) -> Result<ParameterTrajectory> {
    tool.validate()?;
    if tool.contact_radius <= tool.flange_radius - tool.band_width {
        return Err(Error::BadConfig(
            "contact radius must cover the displaced collar region".into(),
        ));
    }

    let n = mesh.n_nodes();
    let slices = grid.n_steps() + 1;
    let mut out = ParameterTrajectory {
        disp_x: DMatrix::zeros(n, slices),
        disp_y: DMatrix::zeros(n, slices),
        disp_z: DMatrix::zeros(n, slices),
        tool_dist: DMatrix::zeros(n, slices),
        pressure: DMatrix::zeros(n, slices),
        exchange_temp: DMatrix::zeros(n, slices),
    };

    // Per-node radius, displacement weight and contact-onset stroke fraction.
    let hole = mesh
        .coords()
        .iter()
        .map(|c| c[0].hypot(c[1]))
        .fold(f64::INFINITY, f64::min);
    let radii: Vec<f64> = (0..n).map(|i| mesh.radius(i)).collect();
    let lift_weight: Vec<f64> = radii
        .iter()
        .map(|&r| smoothstep((tool.flange_radius - r) / tool.band_width))
        .collect();
    let onset: Vec<Option<f64>> = radii
        .iter()
        .map(|&r| {
            if r <= tool.contact_radius {
                let rel = ((r - hole) / (tool.contact_radius - hole)).clamp(0.0, 1.0);
                Some(0.25 + 0.60 * rel)
            } else {
                None
            }
        })
        .collect();

    for k in 0..slices {
        let stroke = grid.phase_fraction(Phase::Forming, k);
        let release = grid.phase_fraction(Phase::Demoulding, k);
        for i in 0..n {
            out.disp_z[(i, k)] = tool.collar_height * stroke * lift_weight[i];

            let (delta, p) = match onset[i] {
                Some(_) if release > 0.0 => (tool.gap0 * release, 0.0),
                Some(tau_c) if stroke >= tau_c => {
                    let ramp = ((stroke - tau_c) / (1.0 - tau_c).max(1e-12)).min(1.0);
                    (0.0, tool.pressure_max * ramp)
                }
                Some(tau_c) => (tool.gap0 * (1.0 - stroke / tau_c), 0.0),
                None => (tool.gap0, 0.0),
            };
            out.tool_dist[(i, k)] = delta;
            out.pressure[(i, k)] = p;
            out.exchange_temp[(i, k)] = if delta <= tool.contact_threshold {
                tool.tool_temperature
            } else {
                tool.ambient_temperature
            };
        }
    }

    out.validate()?;
    Ok(out)
}
