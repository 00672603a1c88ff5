//! Full-order thermal model of the sheet during forming.
//!
//! The sheet is treated as a 2.5D mid-surface continuum: triangles carry the
//! in-plane conduction of a sheet of fixed thickness, heat capacity is
//! lumped into nodal volumes, and boundary exchange acts on both faces plus
//! the free rim. Assembly is repeated every step on the *deformed* geometry
//! with coefficients frozen at the current state, giving the semi-implicit
//! update
//!
//! ```text
//! (M(q_k, p_k) - h_k K(q_k, p_k)) q_{k+1} = M q_k + h_k (b(q_k, p_k) + E d_k)
//! ```
//!
//! where `E d` injects disturbance power densities over node regions. The
//! step matrix is symmetric positive definite and solved by conjugate
//! gradients to a 1e-12 relative residual.

pub mod material;
pub mod sparse;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scenario::mesh::Mesh;
use crate::scenario::trajectory::ParameterTrajectory;
use crate::scenario::{SensorConfig, TimeGrid};
use material::{FilmModel, MaterialModel};
use sparse::{cg_solve, Csr};

/// Relative residual target for the per-step linear solve.
const SOLVE_RTOL: f64 = 1e-12;

/// Full-order system: mesh, material and film data plus the precomputed
/// sparsity pattern used by every per-step assembly.
#[derive(Debug, Clone)]
pub struct FullOrderSystem {
    mesh: Mesh,
    material: MaterialModel,
    film: FilmModel,
    csr_template: Csr,
    element_slots: Vec<[usize; 9]>,
    diag_slots: Vec<usize>,
}

/// One step's assembled operators (lumped mass, stiffness with boundary
/// exchange, load vector and deformed lumped volumes).
#[derive(Debug, Clone)]
pub struct Assembled {
    pub mass: DVector<f64>,
    pub stiffness: Csr,
    pub load: DVector<f64>,
    pub volumes: DVector<f64>,
}

impl FullOrderSystem {
    pub fn new(mesh: Mesh, material: MaterialModel, film: FilmModel) -> Result<Self> {
        material.validate()?;
        film.validate()?;

        let n = mesh.n_nodes();
        let mut neighbors: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for el in mesh.elements() {
            for &i in el {
                for &j in el {
                    if i != j {
                        neighbors[i].push(j);
                    }
                }
            }
        }
        let csr_template = Csr::from_adjacency(neighbors);

        let element_slots = mesh
            .elements()
            .iter()
            .map(|el| {
                let mut slots = [0usize; 9];
                for (a, &i) in el.iter().enumerate() {
                    for (b, &j) in el.iter().enumerate() {
                        slots[3 * a + b] = csr_template.slot(i, j);
                    }
                }
                slots
            })
            .collect();
        let diag_slots = (0..n).map(|i| csr_template.slot(i, i)).collect();

        Ok(FullOrderSystem {
            mesh,
            material,
            film,
            csr_template,
            element_slots,
            diag_slots,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn material(&self) -> &MaterialModel {
        &self.material
    }

    pub fn film(&self) -> &FilmModel {
        &self.film
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    fn check_compatible(&self, q: &DVector<f64>, traj: &ParameterTrajectory, k: usize) -> Result<()> {
        let n = self.n_nodes();
        if q.len() != n || traj.n_nodes() != n {
            return Err(Error::ShapeMismatch {
                context: "state/parameter trajectory vs mesh".into(),
                expected: format!("{n} nodes"),
                found: format!("state {}, trajectory {}", q.len(), traj.n_nodes()),
            });
        }
        if k >= traj.n_slices() {
            return Err(Error::ShapeMismatch {
                context: "parameter slice index".into(),
                expected: format!("< {}", traj.n_slices()),
                found: format!("{k}"),
            });
        }
        Ok(())
    }

    /// Assembles mass, stiffness and load at state `q` and parameter slice
    /// `k`, on the deformed geometry.
    pub fn assemble(
        &self,
        q: &DVector<f64>,
        traj: &ParameterTrajectory,
        k: usize,
    ) -> Result<Assembled> {
        self.check_compatible(q, traj, k)?;
        let n = self.n_nodes();
        let s = self.mesh.thickness();
        let coords = traj.deformed_coords(&self.mesh, k);

        let mut stiffness = self.csr_template.clone();
        let mut area = vec![0.0f64; n];

        for (e, el) in self.mesh.elements().iter().enumerate() {
            let (a_e, grads) =
                triangle_gradients(&coords[el[0]], &coords[el[1]], &coords[el[2]])
                    .ok_or(Error::DegenerateElement { element: e, area: 0.0 })?;
            let share = a_e / 3.0;
            for &i in el {
                area[i] += share;
            }
            let t_mean = (q[el[0]] + q[el[1]] + q[el[2]]) / 3.0;
            let coef = self.material.conductivity(t_mean) * s * a_e;
            let slots = &self.element_slots[e];
            for a in 0..3 {
                for b in 0..3 {
                    let dot = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                    // Conduction enters K negatively: M q' = K q + b.
                    stiffness.values[slots[3 * a + b]] -= coef * dot;
                }
            }
        }

        // Rim exchange length per node on the deformed rim.
        let mut rim_share = vec![0.0f64; n];
        if self.film.rim_exposed {
            for edge in self.mesh.rim_edges() {
                let a = &coords[edge[0]];
                let b = &coords[edge[1]];
                let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
                    + (a[2] - b[2]).powi(2))
                .sqrt();
                rim_share[edge[0]] += 0.5 * len;
                rim_share[edge[1]] += 0.5 * len;
            }
        }

        let mut mass = DVector::zeros(n);
        let mut load = DVector::zeros(n);
        let mut volumes = DVector::zeros(n);
        for i in 0..n {
            let v_i = area[i] * s;
            volumes[i] = v_i;
            mass[i] = self.material.vol_heat_capacity(q[i]) * v_i;

            let mut a_exch = 0.0;
            if self.film.faces_exposed {
                a_exch += 2.0 * area[i];
            }
            a_exch += rim_share[i] * s;

            if a_exch > 0.0 {
                let t_inf = traj.exchange_temp[(i, k)];
                let h = self.film.coefficient(
                    q[i],
                    t_inf,
                    traj.tool_dist[(i, k)],
                    traj.pressure[(i, k)],
                );
                stiffness.values[self.diag_slots[i]] -= h * a_exch;
                load[i] += h * a_exch * t_inf;
            }
            load[i] += self.material.induced_heat(q[i]) * v_i;
        }

        Ok(Assembled {
            mass,
            stiffness,
            load,
            volumes,
        })
    }

    /// Advances one semi-implicit Euler step of size `h`, consuming the
    /// assembled operators. `injected` is an optional per-node disturbance
    /// power vector `E d` [W].
    pub fn step(
        &self,
        asm: Assembled,
        q: &DVector<f64>,
        h: f64,
        injected: Option<&DVector<f64>>,
        step_idx: usize,
    ) -> Result<DVector<f64>> {
        let n = self.n_nodes();
        let Assembled {
            mass,
            mut stiffness,
            load,
            ..
        } = asm;

        // A = M - h K.
        for v in stiffness.values.iter_mut() {
            *v *= -h;
        }
        for i in 0..n {
            stiffness.values[self.diag_slots[i]] += mass[i];
        }

        let mut rhs = load;
        if let Some(extra) = injected {
            rhs += extra;
        }
        rhs *= h;
        for i in 0..n {
            rhs[i] += mass[i] * q[i];
        }

        cg_solve(&stiffness, &rhs, q, SOLVE_RTOL, step_idx)
    }

    /// Runs the full-order model over the grid from initial state `q0`,
    /// optionally injecting a disturbance signal. Deterministic and
    /// noise-free; measurement sampling is a separate concern.
    pub fn simulate(
        &self,
        grid: &TimeGrid,
        traj: &ParameterTrajectory,
        q0: &DVector<f64>,
        disturbance: Option<&DisturbanceSignal>,
    ) -> Result<StateTrajectory> {
        let n_t = grid.n_steps();
        if traj.n_slices() != n_t + 1 {
            return Err(Error::ShapeMismatch {
                context: "parameter trajectory vs time grid".into(),
                expected: format!("{} slices", n_t + 1),
                found: format!("{}", traj.n_slices()),
            });
        }
        let n = self.n_nodes();
        let mut states = DMatrix::zeros(n, n_t + 1);
        states.set_column(0, q0);

        let mut warned_empty = false;
        let mut q = q0.clone();
        for k in 0..n_t {
            let asm = self.assemble(&q, traj, k)?;
            let injected = match disturbance {
                Some(signal) => {
                    signal.injected_power(traj, k, grid.time(k), &asm.volumes, &mut warned_empty)
                }
                None => None,
            };
            q = self.step(asm, &q, grid.h(k), injected.as_ref(), k)?;
            states.set_column(k + 1, &q);
        }

        Ok(StateTrajectory {
            states,
            times: grid.times().to_vec(),
        })
    }
}

/// Area and P1 shape-function gradients of a triangle embedded in 3D,
/// expressed in an orthonormal frame of its plane. Returns `None` for
/// degenerate triangles.
fn triangle_gradients(
    p1: &[f64; 3],
    p2: &[f64; 3],
    p3: &[f64; 3],
) -> Option<(f64, [[f64; 2]; 3])> {
    let e1 = [p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]];
    let e2 = [p3[0] - p1[0], p3[1] - p1[1], p3[2] - p1[2]];
    let l1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    if !(l1 > 0.0) {
        return None;
    }
    let u = [e1[0] / l1, e1[1] / l1, e1[2] / l1];
    // Local coordinates: p1 = (0,0), p2 = (l1, 0), p3 = (x3, y3).
    let x3 = e2[0] * u[0] + e2[1] * u[1] + e2[2] * u[2];
    let w = [e2[0] - x3 * u[0], e2[1] - x3 * u[1], e2[2] - x3 * u[2]];
    let y3 = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let two_a = l1 * y3;
    if !(two_a > 0.0) || !two_a.is_finite() {
        return None;
    }
    let grads = [
        [-y3 / two_a, (x3 - l1) / two_a],
        [y3 / two_a, -x3 / two_a],
        [0.0, l1 / two_a],
    ];
    Some((0.5 * two_a, grads))
}

/// Computed temperature history over a run (`n_nodes x (n_steps + 1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub states: DMatrix<f64>,
    pub times: Vec<f64>,
}

impl StateTrajectory {
    pub fn n_nodes(&self) -> usize {
        self.states.nrows()
    }

    pub fn n_slices(&self) -> usize {
        self.states.ncols()
    }
}

/// Node region a disturbance channel acts on.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum RegionSpec {
    /// All nodes currently in tool contact (time-varying).
    Contact,
    /// Every node of the mesh.
    AllNodes,
    /// An explicit node set.
    Nodes(Vec<usize>),
}

impl RegionSpec {
    /// Resolves the region to a node list at parameter slice `k`.
    pub fn resolve(
        &self,
        traj: &ParameterTrajectory,
        k: usize,
        contact_threshold: f64,
    ) -> Vec<usize> {
        match self {
            RegionSpec::Contact => traj.contact_nodes(k, contact_threshold),
            RegionSpec::AllNodes => (0..traj.n_nodes()).collect(),
            RegionSpec::Nodes(list) => list.clone(),
        }
    }
}

/// Piecewise-constant pulse of a disturbance channel.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Pulse {
    pub t_start: f64,
    pub t_end: f64,
    /// Injected power density [W/m^3].
    pub power_density: f64,
}

/// One disturbance channel: a region and its power-density signal.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DisturbanceChannel {
    pub region: RegionSpec,
    pub pulses: Vec<Pulse>,
}

impl DisturbanceChannel {
    pub fn value_at(&self, t: f64) -> f64 {
        self.pulses
            .iter()
            .filter(|p| p.t_start <= t && t < p.t_end)
            .map(|p| p.power_density)
            .sum()
    }
}

/// Disturbance input: one power-density signal per region (channel).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DisturbanceSignal {
    pub channels: Vec<DisturbanceChannel>,
    /// Tool distance below which a node belongs to a `Contact` region [m].
    pub contact_threshold: f64,
}

impl DisturbanceSignal {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Channel values at time `t`.
    pub fn value_at(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.channels.len(),
            self.channels.iter().map(|c| c.value_at(t)),
        )
    }

    /// Per-node injected power `E d` at slice `k` / time `t`, or `None` when
    /// all channels are quiet.
    fn injected_power(
        &self,
        traj: &ParameterTrajectory,
        k: usize,
        t: f64,
        volumes: &DVector<f64>,
        warned_empty: &mut bool,
    ) -> Option<DVector<f64>> {
        let d = self.value_at(t);
        if d.iter().all(|&v| v == 0.0) {
            return None;
        }
        let mut power = DVector::zeros(traj.n_nodes());
        for (channel, &dj) in self.channels.iter().zip(d.iter()) {
            if dj == 0.0 {
                continue;
            }
            let region = channel.region.resolve(traj, k, self.contact_threshold);
            if region.is_empty() && !*warned_empty {
                log::warn!("disturbance region empty at step {k}; injecting nothing");
                *warned_empty = true;
            }
            for i in region {
                power[i] += volumes[i] * dj;
            }
        }
        Some(power)
    }
}

/// Disturbance input matrix `E`: column `j` carries the lumped nodal volume
/// over region `j`, so `E d` is a nodal power vector for power densities `d`.
pub fn build_disturbance_matrix(
    n_nodes: usize,
    volumes: &DVector<f64>,
    regions: &[Vec<usize>],
) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n_nodes, regions.len());
    for (j, region) in regions.iter().enumerate() {
        if region.is_empty() {
            // Routine for contact regions outside the contact phases.
            log::debug!("disturbance region {j} is empty; its column stays zero");
        }
        for &i in region {
            e[(i, j)] = volumes[i];
        }
    }
    e
}

/// Nearest-node sensor assignment in the deformed configuration at slice `k`.
///
/// Fails if a sensor sits farther than the configured snap radius from every
/// node (sensor off-part).
pub fn output_nodes(
    mesh: &Mesh,
    traj: &ParameterTrajectory,
    k: usize,
    sensors: &SensorConfig,
) -> Result<Vec<usize>> {
    sensors.validate()?;
    let coords = traj.deformed_coords(mesh, k);
    sensors
        .positions
        .iter()
        .enumerate()
        .map(|(s, pos)| {
            let (best, d2) = coords
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let d2 = (c[0] - pos[0]).powi(2)
                        + (c[1] - pos[1]).powi(2)
                        + (c[2] - pos[2]).powi(2);
                    (i, d2)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("mesh has nodes");
            if d2.sqrt() > sensors.snap_radius {
                Err(Error::SensorOffPart {
                    sensor: s,
                    distance: d2.sqrt(),
                    radius: sensors.snap_radius,
                })
            } else {
                Ok(best)
            }
        })
        .collect()
}

/// Sensor assignments for every grid point of a run.
pub fn output_nodes_per_slice(
    mesh: &Mesh,
    traj: &ParameterTrajectory,
    sensors: &SensorConfig,
) -> Result<Vec<Vec<usize>>> {
    (0..traj.n_slices())
        .map(|k| output_nodes(mesh, traj, k, sensors))
        .collect()
}

/// Noise-free sensor readings of a state trajectory (`m x n_slices`).
pub fn read_sensors(states: &DMatrix<f64>, nodes_per_slice: &[Vec<usize>]) -> DMatrix<f64> {
    let m = nodes_per_slice.first().map_or(0, |v| v.len());
    DMatrix::from_fn(m, states.ncols(), |s, k| states[(nodes_per_slice[k][s], k)])
}

/// Volume-weighted mean absolute error between two nodal fields.
///
/// A spatially uniform error of `c` kelvin evaluates to exactly `c`
/// regardless of the mesh.
pub fn volume_weighted_error(
    a: &DVector<f64>,
    b: &DVector<f64>,
    volumes: &DVector<f64>,
) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(a.len(), volumes.len());
    let total: f64 = volumes.sum();
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += volumes[i] * (a[i] - b[i]).abs();
    }
    acc / total
}

/// Per-step volume-weighted error between two state histories.
pub fn error_series(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    volumes: &DVector<f64>,
) -> Vec<f64> {
    assert_eq!(a.ncols(), b.ncols(), "histories must share the grid");
    (0..a.ncols())
        .map(|k| {
            let ca = a.column(k).clone_owned();
            let cb = b.column(k).clone_owned();
            volume_weighted_error(&ca, &cb, volumes)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::material::Table1d;
    use super::*;
    use crate::scenario::mesh::build_sheet_mesh;
    use approx::assert_relative_eq;

    fn constant_material(rho_cp: f64, lambda: f64) -> MaterialModel {
        MaterialModel {
            rho: 1.0,
            c_p: Table1d::constant(rho_cp),
            lambda: Table1d::constant(lambda),
            g: None,
        }
    }

    fn no_film() -> FilmModel {
        FilmModel {
            h_contact0: 0.0,
            h_pressure_slope: 0.0,
            h_conv: 0.0,
            emissivity: 0.0,
            ..FilmModel::default()
        }
    }

    fn unit_area_triangle() -> Mesh {
        Mesh::from_parts(
            vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
            1.0,
            vec![],
        )
        .unwrap()
    }

    fn still_trajectory(n: usize, slices: usize, t_inf: f64) -> ParameterTrajectory {
        ParameterTrajectory {
            disp_x: DMatrix::zeros(n, slices),
            disp_y: DMatrix::zeros(n, slices),
            disp_z: DMatrix::zeros(n, slices),
            tool_dist: DMatrix::from_element(n, slices, 1.0),
            pressure: DMatrix::zeros(n, slices),
            exchange_temp: DMatrix::from_element(n, slices, t_inf),
        }
    }

    #[test]
    fn lumped_mass_of_unit_triangle_is_one_third() {
        let sys =
            FullOrderSystem::new(unit_area_triangle(), constant_material(1.0, 1.0), no_film())
                .unwrap();
        let q = DVector::from_element(3, 500.0);
        let traj = still_trajectory(3, 1, 300.0);
        let asm = sys.assemble(&q, &traj, 0).unwrap();
        for i in 0..3 {
            assert_relative_eq!(asm.mass[i], 1.0 / 3.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn conduction_stiffness_annihilates_constant_fields() {
        let mesh = build_sheet_mesh(0.30, 0.05, 0.05, 0.002).unwrap();
        let n = mesh.n_nodes();
        let sys = FullOrderSystem::new(mesh, constant_material(2.0, 3.0), no_film()).unwrap();
        let traj = still_trajectory(n, 1, 300.0);
        let q = DVector::from_element(n, 800.0);
        let asm = sys.assemble(&q, &traj, 0).unwrap();
        let mut kq = DVector::zeros(n);
        asm.stiffness.matvec(q.as_slice(), kq.as_mut_slice());
        assert!(kq.amax() < 1e-9, "K * const should vanish, got {}", kq.amax());
        assert!(asm.stiffness.asymmetry() < 1e-13);
        assert!(asm.load.amax() == 0.0);
    }

    #[test]
    fn stationary_when_isolated_and_uniform() {
        let mesh = build_sheet_mesh(0.30, 0.05, 0.06, 0.002).unwrap();
        let n = mesh.n_nodes();
        let sys = FullOrderSystem::new(mesh, constant_material(2.0, 3.0), no_film()).unwrap();
        let traj = still_trajectory(n, 2, 300.0);
        let q = DVector::from_element(n, 777.0);
        let asm = sys.assemble(&q, &traj, 0).unwrap();
        let q1 = sys.step(asm, &q, 0.05, None, 0).unwrap();
        for i in 0..n {
            assert_relative_eq!(q1[i], 777.0, max_relative = 1e-11);
        }
    }

    #[test]
    fn insulated_region_heats_at_power_density_over_heat_capacity() {
        let mesh = build_sheet_mesh(0.30, 0.05, 0.06, 0.002).unwrap();
        let n = mesh.n_nodes();
        let rho_cp = 40.0;
        let sys = FullOrderSystem::new(mesh, constant_material(rho_cp, 3.0), no_film()).unwrap();
        let traj = still_trajectory(n, 2, 300.0);
        let q0 = DVector::from_element(n, 700.0);

        let d = 1000.0;
        let asm = sys.assemble(&q0, &traj, 0).unwrap();
        let injected = &asm.volumes * d;
        let h = 0.01;
        let q1 = sys.step(asm, &q0, h, Some(&injected), 0).unwrap();
        let expected_rate = d / rho_cp;
        for i in 0..n {
            let rate = (q1[i] - q0[i]) / h;
            assert_relative_eq!(rate, expected_rate, max_relative = 1e-8);
        }
    }

    #[test]
    fn induced_heat_table_equals_injected_uniform_disturbance() {
        let mesh = build_sheet_mesh(0.30, 0.05, 0.06, 0.002).unwrap();
        let n = mesh.n_nodes();
        let g0 = 850.0;
        let mut with_g = constant_material(40.0, 3.0);
        with_g.g = Some(Table1d::constant(g0));

        let grid = TimeGrid::uniform(20, 0.01);
        let traj = still_trajectory(n, 21, 300.0);
        let q0 = DVector::from_element(n, 700.0);

        let sys_g = FullOrderSystem::new(mesh.clone(), with_g, no_film()).unwrap();
        let run_g = sys_g.simulate(&grid, &traj, &q0, None).unwrap();

        let sys_d = FullOrderSystem::new(mesh, constant_material(40.0, 3.0), no_film()).unwrap();
        let signal = DisturbanceSignal {
            channels: vec![DisturbanceChannel {
                region: RegionSpec::AllNodes,
                pulses: vec![Pulse {
                    t_start: 0.0,
                    t_end: 1.0,
                    power_density: g0,
                }],
            }],
            contact_threshold: 1e-6,
        };
        let run_d = sys_d.simulate(&grid, &traj, &q0, Some(&signal)).unwrap();

        let diff = (&run_g.states - &run_d.states).amax();
        assert!(diff < 1e-9, "g-table and E d paths differ by {diff}");
    }

    #[test]
    fn deformation_enlarges_lumped_mass() {
        let mesh = build_sheet_mesh(0.30, 0.05, 0.04, 0.002).unwrap();
        let n = mesh.n_nodes();
        let sys = FullOrderSystem::new(mesh, constant_material(1.0, 1.0), no_film()).unwrap();
        let mut traj = still_trajectory(n, 2, 300.0);
        // Lift the inner rim in slice 1: stretches adjacent elements.
        for i in 0..n {
            if sys.mesh().radius(i) < 0.1 {
                traj.disp_z[(i, 1)] = 0.05;
            }
        }
        let q = DVector::from_element(n, 500.0);
        let flat = sys.assemble(&q, &traj, 0).unwrap();
        let lifted = sys.assemble(&q, &traj, 1).unwrap();
        assert!(lifted.mass.sum() > flat.mass.sum());
    }

    #[test]
    fn disturbance_matrix_carries_volumes_on_regions() {
        let volumes = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let e = build_disturbance_matrix(4, &volumes, &[vec![1, 3], vec![]]);
        assert_eq!(e.ncols(), 2);
        assert_eq!(e[(0, 0)], 0.0);
        assert_eq!(e[(1, 0)], 2.0);
        assert_eq!(e[(3, 0)], 4.0);
        assert_eq!(e.column(1).amax(), 0.0);
    }

    #[test]
    fn sensors_snap_to_nearest_deformed_node() {
        let coords = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ];
        let mesh = Mesh::from_parts(
            coords,
            vec![[0, 1, 2], [1, 3, 2]],
            1.0,
            vec![],
        )
        .unwrap();
        let mut traj = still_trajectory(4, 2, 300.0);
        // In slice 1, node 1 moves far away so node 3 becomes nearest.
        traj.disp_z[(1, 1)] = 5.0;

        let sensors = SensorConfig {
            positions: vec![[1.0, 0.4, 0.0]],
            sigma_v: 0.0,
            snap_radius: 2.0,
        };
        assert_eq!(output_nodes(&mesh, &traj, 0, &sensors).unwrap(), vec![1]);
        assert_eq!(output_nodes(&mesh, &traj, 1, &sensors).unwrap(), vec![3]);

        let off_part = SensorConfig {
            positions: vec![[50.0, 0.0, 0.0]],
            sigma_v: 0.0,
            snap_radius: 2.0,
        };
        assert!(matches!(
            output_nodes(&mesh, &traj, 0, &off_part),
            Err(Error::SensorOffPart { sensor: 0, .. })
        ));
    }

    #[test]
    fn uniform_error_is_mesh_independent() {
        let mesh = build_sheet_mesh(0.30, 0.05, 0.05, 0.002).unwrap();
        let n = mesh.n_nodes();
        let volumes = DVector::from_vec(mesh.lumped_volumes());
        let a = DVector::from_element(n, 100.0);
        let b = DVector::from_element(n, 95.0);
        assert_relative_eq!(
            volume_weighted_error(&a, &b, &volumes),
            5.0,
            max_relative = 1e-13
        );
    }
}
