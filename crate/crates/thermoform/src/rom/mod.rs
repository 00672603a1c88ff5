//! Reduced-order modelling: snapshot collection, Galerkin projection and
//! precomputed linear time-varying schedules.
//!
//! The reduced model freezes the (mildly) state-dependent operators along a
//! *supporting trajectory* — a representative full-order run at nominal
//! process inputs. Projecting the semi-implicit step at every grid point
//! yields, per step `k`,
//!
//! ```text
//! x_{k+1} = A_k x_k + B_k d_k + c_k,        y_k = C_k x_k
//! A_k = S_k^{-1} Mr_k     B_k = S_k^{-1} h_k Er_k     c_k = S_k^{-1} h_k br_k
//! S_k = Mr_k - h_k Kr_k   G_k = S_k^{-1} h_k
//! ```
//!
//! with all matrices of reduced size. `G_k` maps power-like process noise
//! into the state and feeds the estimator's covariance propagation. The
//! schedule is built offline once and evaluated online in `O(r^2)` per step,
//! which is where the reduced model's speedup comes from.

pub mod pod;

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::fom::{build_disturbance_matrix, FullOrderSystem, RegionSpec, StateTrajectory};
use crate::scenario::trajectory::ParameterTrajectory;
use crate::scenario::{SensorConfig, TimeGrid};
use pod::PodBasis;

/// Stacks state snapshots from one or more runs, keeping every `stride`-th
/// grid point of each run (always including the initial state).
pub fn collect_snapshots(runs: &[&StateTrajectory], stride: usize) -> Result<DMatrix<f64>> {
    if runs.is_empty() {
        return Err(Error::EmptySnapshots("no runs supplied".into()));
    }
    let stride = stride.max(1);
    let n = runs[0].n_nodes();
    let mut columns = Vec::new();
    for run in runs {
        if run.n_nodes() != n {
            return Err(Error::ShapeMismatch {
                context: "snapshot collection".into(),
                expected: format!("{n} nodes"),
                found: format!("{}", run.n_nodes()),
            });
        }
        for k in (0..run.n_slices()).step_by(stride) {
            columns.push(run.states.column(k).clone_owned());
        }
    }
    Ok(DMatrix::from_columns(&columns))
}

/// Galerkin projection of the full-order operators at a linearization state.
#[derive(Debug, Clone)]
pub struct ReducedOperators {
    /// `phi^T M phi`, symmetric positive definite.
    pub mass: DMatrix<f64>,
    /// `phi^T K phi`, negative semidefinite.
    pub stiffness: DMatrix<f64>,
    /// `phi^T b`.
    pub load: DVector<f64>,
    /// `phi^T E` for the disturbance regions resolved at this slice.
    pub disturbance: DMatrix<f64>,
    /// `phi^T diag(V) phi`: maps a nodal power-density field expressed in
    /// the basis to reduced loads, so process noise can be stated in the
    /// same units as the disturbance channels (W/m^3).
    pub volume_weight: DMatrix<f64>,
    /// Deformed lumped nodal volumes at this slice (full order, for error
    /// norms and disturbance scaling).
    pub volumes: DVector<f64>,
}

/// Assembles the full-order operators at (`q`, slice `k`) and projects them
/// onto the basis.
pub fn project_at(
    sys: &FullOrderSystem,
    basis: &PodBasis,
    q: &DVector<f64>,
    traj: &ParameterTrajectory,
    k: usize,
    regions: &[RegionSpec],
    contact_threshold: f64,
) -> Result<ReducedOperators> {
    if basis.n_nodes() != sys.n_nodes() {
        return Err(Error::ShapeMismatch {
            context: "basis vs mesh".into(),
            expected: format!("{} nodes", sys.n_nodes()),
            found: format!("{}", basis.n_nodes()),
        });
    }
    let asm = sys.assemble(q, traj, k)?;
    let phi = &basis.phi;
    let (n, r) = phi.shape();

    // phi^T M phi with diagonal M: scale phi rows by M, then multiply.
    let mut m_phi = phi.clone();
    for i in 0..n {
        let mi = asm.mass[i];
        m_phi.row_mut(i).scale_mut(mi);
    }
    let mass = phi.tr_mul(&m_phi);

    // phi^T K phi via sparse matvec per column.
    let mut k_phi = DMatrix::zeros(n, r);
    for j in 0..r {
        let col = phi.column(j).clone_owned();
        let mut out = DVector::zeros(n);
        asm.stiffness.matvec(col.as_slice(), out.as_mut_slice());
        k_phi.set_column(j, &out);
    }
    let stiffness = phi.tr_mul(&k_phi);

    let load = phi.tr_mul(&asm.load);

    let resolved: Vec<Vec<usize>> = regions
        .iter()
        .map(|spec| spec.resolve(traj, k, contact_threshold))
        .collect();
    let e_full = build_disturbance_matrix(n, &asm.volumes, &resolved);
    let disturbance = phi.tr_mul(&e_full);

    let mut v_phi = phi.clone();
    for i in 0..n {
        let vi = asm.volumes[i];
        v_phi.row_mut(i).scale_mut(vi);
    }
    let volume_weight = phi.tr_mul(&v_phi);

    Ok(ReducedOperators {
        mass,
        stiffness,
        load,
        disturbance,
        volume_weight,
        volumes: asm.volumes,
    })
}

/// One step of the precomputed reduced schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvStep {
    /// State transition `A_k` (`r x r`).
    pub a: DMatrix<f64>,
    /// Disturbance input `B_k` (`r x n_d`).
    pub b_d: DMatrix<f64>,
    /// Affine drift `c_k` (`r`).
    pub c: DVector<f64>,
    /// Process-noise injection `G_k = S_k^{-1} h_k (phi^T diag(V) phi)`
    /// (`r x r`): white nodal power-density noise (W/m^3) expressed in the
    /// basis, discretized like the disturbance input.
    pub g: DMatrix<f64>,
}

/// Precomputed reduced schedule along a supporting trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvSchedule {
    pub steps: Vec<LtvStep>,
    /// Output matrices `C_k` (`m x r`), one per grid point.
    pub c_out: Vec<DMatrix<f64>>,
    /// Grid points `t_0 ..= t_{n_t}`.
    pub times: Vec<f64>,
}

impl LtvSchedule {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn rank(&self) -> usize {
        self.c_out[0].ncols()
    }

    pub fn n_disturbances(&self) -> usize {
        self.steps[0].b_d.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c_out[0].nrows()
    }

    /// Step size `h_k`.
    pub fn h(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Evaluates the schedule from `x0`, with optional per-step disturbance
    /// values (`n_d x n_steps`, column `k` applied during step `k`). Returns
    /// the reduced history (`r x (n_steps + 1)`).
    pub fn simulate(&self, x0: &DVector<f64>, d: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let r = x0.len();
        let mut out = DMatrix::zeros(r, self.n_steps() + 1);
        out.set_column(0, x0);
        let mut x = x0.clone();
        for (k, step) in self.steps.iter().enumerate() {
            x = &step.a * &x + &step.c;
            if let Some(d) = d {
                x += &step.b_d * d.column(k);
            }
            out.set_column(k + 1, &x);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let r = self.rank();
        let n_t = self.n_steps();
        let n_d = self.n_disturbances();
        let m = self.n_outputs();

        let mut a_all = DMatrix::zeros(r, r * n_t);
        let mut b_all = DMatrix::zeros(r, n_d * n_t);
        let mut c_all = DMatrix::zeros(r, n_t);
        let mut g_all = DMatrix::zeros(r, r * n_t);
        for (k, step) in self.steps.iter().enumerate() {
            a_all.columns_mut(k * r, r).copy_from(&step.a);
            if n_d > 0 {
                b_all.columns_mut(k * n_d, n_d).copy_from(&step.b_d);
            }
            c_all.set_column(k, &step.c);
            g_all.columns_mut(k * r, r).copy_from(&step.g);
        }
        let mut c_out_all = DMatrix::zeros(m, r * (n_t + 1));
        for (k, c) in self.c_out.iter().enumerate() {
            c_out_all.columns_mut(k * r, r).copy_from(c);
        }

        let mut container = Container::new("ltv-schedule");
        container.push_vec("times", &self.times);
        container.push("a", a_all);
        container.push("b_d", b_all);
        container.push("c", c_all);
        container.push("g", g_all);
        container.push("c_out", c_out_all);
        container.push_vec(
            "dims",
            &[r as f64, n_d as f64, m as f64, n_t as f64],
        );
        container.save(path)
    }

    pub fn load(path: &Path) -> Result<LtvSchedule> {
        let display = path.display().to_string();
        let mut c = Container::load(path)?;
        c.expect_kind("ltv-schedule", &display)?;
        let dims = c.take_column("dims", &display)?;
        if dims.len() != 4 {
            return Err(Error::MalformedHeader {
                path: display,
                reason: "dims array must have 4 entries".into(),
            });
        }
        let (r, n_d, m, n_t) = (
            dims[0] as usize,
            dims[1] as usize,
            dims[2] as usize,
            dims[3] as usize,
        );
        let times = c.take_column("times", &display)?;
        let a_all = c.take_sized("a", r, r * n_t, &display)?;
        let b_all = c.take_sized("b_d", r, n_d * n_t, &display)?;
        let c_all = c.take_sized("c", r, n_t, &display)?;
        let g_all = c.take_sized("g", r, r * n_t, &display)?;
        let c_out_all = c.take_sized("c_out", m, r * (n_t + 1), &display)?;
        if times.len() != n_t + 1 {
            return Err(Error::ShapeMismatch {
                context: format!("times in {display}"),
                expected: format!("{}", n_t + 1),
                found: format!("{}", times.len()),
            });
        }

        let steps = (0..n_t)
            .map(|k| LtvStep {
                a: a_all.columns(k * r, r).clone_owned(),
                b_d: b_all.columns(k * n_d, n_d).clone_owned(),
                c: c_all.column(k).clone_owned(),
                g: g_all.columns(k * r, r).clone_owned(),
            })
            .collect();
        let c_out = (0..=n_t)
            .map(|k| c_out_all.columns(k * r, r).clone_owned())
            .collect();
        Ok(LtvSchedule {
            steps,
            c_out,
            times,
        })
    }
}

/// Discretizes one projected step: factorizes `S = Mr - h Kr` and forms the
/// schedule entries.
fn discretize_step(ops: &ReducedOperators, h: f64, k: usize) -> Result<LtvStep> {
    let s = &ops.mass - &ops.stiffness * h;
    let chol = Cholesky::new(s).ok_or(Error::IllConditioned { step: k })?;
    let a = chol.solve(&ops.mass);
    let b_d = chol.solve(&(&ops.disturbance * h));
    let c = chol.solve(&(&ops.load * h));
    let g = chol.solve(&(&ops.volume_weight * h));
    Ok(LtvStep { a, b_d, c, g })
}

/// Builds the reduced schedule along a supporting full-order run.
///
/// `regions` fixes the disturbance channels the estimator will see;
/// `sensors` fixes the (possibly time-varying) output node assignment.
pub fn build_schedule(
    sys: &FullOrderSystem,
    basis: &PodBasis,
    supporting: &StateTrajectory,
    traj: &ParameterTrajectory,
    grid: &TimeGrid,
    regions: &[RegionSpec],
    contact_threshold: f64,
    sensors: &SensorConfig,
) -> Result<LtvSchedule> {
    check_supporting(sys, supporting, grid)?;

    let nodes_per_slice = crate::fom::output_nodes_per_slice(sys.mesh(), traj, sensors)?;
    let c_out = nodes_per_slice
        .iter()
        .map(|nodes| {
            DMatrix::from_fn(nodes.len(), basis.rank(), |s, j| basis.phi[(nodes[s], j)])
        })
        .collect();

    let mut steps = Vec::with_capacity(grid.n_steps());
    for k in 0..grid.n_steps() {
        let q_k = supporting.states.column(k).clone_owned();
        let ops = project_at(sys, basis, &q_k, traj, k, regions, contact_threshold)?;
        steps.push(discretize_step(&ops, grid.h(k), k)?);
    }

    Ok(LtvSchedule {
        steps,
        c_out,
        times: grid.times().to_vec(),
    })
}

/// Streaming frozen-coefficient reduced run: identical arithmetic to
/// building a schedule and simulating it, but without storing the per-step
/// matrices — used for rank studies at large reduced dimensions.
pub fn simulate_frozen(
    sys: &FullOrderSystem,
    basis: &PodBasis,
    supporting: &StateTrajectory,
    traj: &ParameterTrajectory,
    grid: &TimeGrid,
    x0: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_supporting(sys, supporting, grid)?;
    let r = basis.rank();
    let mut out = DMatrix::zeros(r, grid.n_steps() + 1);
    out.set_column(0, x0);
    let mut x = x0.clone();
    for k in 0..grid.n_steps() {
        let q_k = supporting.states.column(k).clone_owned();
        let ops = project_at(sys, basis, &q_k, traj, k, &[], 0.0)?;
        let step = discretize_step(&ops, grid.h(k), k)?;
        x = &step.a * &x + &step.c;
        out.set_column(k + 1, &x);
    }
    Ok(out)
}

fn check_supporting(
    sys: &FullOrderSystem,
    supporting: &StateTrajectory,
    grid: &TimeGrid,
) -> Result<()> {
    if supporting.n_nodes() != sys.n_nodes() || supporting.n_slices() != grid.n_steps() + 1 {
        return Err(Error::ShapeMismatch {
            context: "supporting run".into(),
            expected: format!("{} nodes x {} slices", sys.n_nodes(), grid.n_steps() + 1),
            found: format!(
                "{} nodes x {} slices",
                supporting.n_nodes(),
                supporting.n_slices()
            ),
        });
    }
    Ok(())
}
