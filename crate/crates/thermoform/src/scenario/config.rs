//! Declarative scenario configuration (TOML).
//!
//! A [`ScenarioConfig`] fixes everything needed to reproduce a forming run:
//! blank geometry, tool kinematics, process inputs, the phase template,
//! material and film data, and the sensor layout. Every field has a default,
//! so a TOML file only needs the entries it wants to override.
//!
//! The default data set is a bench-scale surrogate: geometry and process
//! timing match an industrial hole-flanging cycle, while heat capacity and
//! exchange coefficients are scaled so that contact quenching crosses the
//! martensite-relevant band within the holding phase and unit-scale
//! disturbance power densities (order `1e3 W/m^3`) leave temperature
//! signatures of a few tens of kelvin — comfortably above sensor noise yet
//! far from saturating the dynamics.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::material::{FilmModel, MaterialModel, Table1d};
use crate::scenario::mesh::{build_sheet_mesh, Mesh};
use crate::scenario::trajectory::{synth_forming_trajectory, ParameterTrajectory, ToolSpec};
use crate::scenario::{
    build_time_grid, PhaseTemplate, ProcessInputs, SensorConfig, TimeGrid,
};

/// Annular blank geometry and mesh resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// Outer blank radius [m].
    pub outer_radius: f64,
    /// Hole radius [m].
    pub hole_radius: f64,
    /// Target mesh edge length [m].
    pub edge_length: f64,
    /// Sheet thickness [m].
    pub thickness: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            outer_radius: 0.30,
            hole_radius: 0.05,
            edge_length: 0.01,
            thickness: 0.0015,
        }
    }
}

/// Complete description of one forming scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub tool: ToolSpec,
    pub process: ProcessInputs,
    pub template: PhaseTemplate,
    pub material: MaterialModel,
    pub film: FilmModel,
    pub sensors: SensorConfig,
    /// Radial spread of the true initial temperature around the nominal
    /// average [K]: the blank enters hotter near the rim by `+spread` and
    /// cooler near the hole by `-spread`. Zero means uniform.
    pub initial_spread: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            geometry: GeometryConfig::default(),
            tool: ToolSpec::default(),
            process: ProcessInputs {
                t_aust_avg: 1273.0,
                v_punch: 80.0,
                t_hold: 4.1,
            },
            template: PhaseTemplate::default(),
            material: MaterialModel {
                rho: 1.0,
                c_p: Table1d::new(vec![
                    (200.0, 32.0),
                    (500.0, 38.0),
                    (800.0, 43.0),
                    (1100.0, 47.0),
                    (1500.0, 50.0),
                ]),
                lambda: Table1d::new(vec![
                    (200.0, 0.0030),
                    (800.0, 0.0042),
                    (1500.0, 0.0050),
                ]),
                g: None,
            },
            film: FilmModel::default(),
            sensors: SensorConfig {
                positions: vec![
                    [0.17, 0.0, 0.0],
                    [0.0, 0.19, 0.0],
                    [-0.26, 0.0, 0.0],
                ],
                sigma_v: 10.0,
                snap_radius: 0.02,
            },
            initial_spread: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::TomlParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.tool.validate()?;
        self.process.validate()?;
        self.template.validate()?;
        self.material.validate()?;
        self.film.validate()?;
        self.sensors.validate()?;
        if !self.initial_spread.is_finite() {
            return Err(Error::BadConfig("initial spread must be finite".into()));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        build_sheet_mesh(
            self.geometry.outer_radius,
            self.geometry.hole_radius,
            self.geometry.edge_length,
            self.geometry.thickness,
        )
    }

    /// Grid for the configured process inputs.
    pub fn build_grid(&self) -> Result<TimeGrid> {
        build_time_grid(&self.process, &self.template)
    }

    /// Grid for alternative inputs on the same template (sweep runs).
    pub fn build_grid_for(&self, inputs: &ProcessInputs) -> Result<TimeGrid> {
        build_time_grid(inputs, &self.template)
    }

    pub fn build_trajectory(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<ParameterTrajectory> {
        synth_forming_trajectory(mesh, grid, &self.tool)
    }

    /// True initial temperature field for the given nominal average: uniform
    /// plus the configured radial spread (linear in radius, zero-mean at the
    /// band midpoint).
    pub fn initial_state(&self, mesh: &Mesh, t_aust_avg: f64) -> DVector<f64> {
        let r0 = self.geometry.hole_radius;
        let r1 = self.geometry.outer_radius;
        DVector::from_iterator(
            mesh.n_nodes(),
            (0..mesh.n_nodes()).map(|i| {
                let x = (mesh.radius(i) - r0) / (r1 - r0);
                t_aust_avg + self.initial_spread * (2.0 * x - 1.0)
            }),
        )
    }
}
