//! Temperature-dependent material data and boundary film coefficients.
//!
//! Material curves are tabulated and evaluated with linear interpolation;
//! outside the tabulated range the end values are held (no extrapolation).
//! The film model switches between two regimes by tool distance: pressure-
//! dependent contact conductance in the closed tool, and convection plus
//! linearized radiation across an open gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stefan-Boltzmann constant [W m^-2 K^-4].
pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

/// Piecewise-linear curve over temperature with clamped ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1d {
    /// `(T [K], value)` knots, strictly increasing in `T`.
    pub knots: Vec<(f64, f64)>,
}

impl Table1d {
    pub fn new(knots: Vec<(f64, f64)>) -> Self {
        Table1d { knots }
    }

    pub fn constant(value: f64) -> Self {
        Table1d {
            knots: vec![(0.0, value)],
        }
    }

    pub fn validate(&self, name: &str, require_positive: bool) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::BadMaterialTable {
                name: name.into(),
                reason: "needs at least one knot".into(),
            });
        }
        for pair in self.knots.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::BadMaterialTable {
                    name: name.into(),
                    reason: format!(
                        "knots must be strictly increasing in T ({} then {})",
                        pair[0].0, pair[1].0
                    ),
                });
            }
        }
        for &(t, v) in &self.knots {
            if !t.is_finite() || !v.is_finite() || (require_positive && !(v > 0.0)) {
                return Err(Error::BadMaterialTable {
                    name: name.into(),
                    reason: format!("invalid knot ({t}, {v})"),
                });
            }
        }
        Ok(())
    }

    /// Clamped linear interpolation.
    pub fn eval(&self, t: f64) -> f64 {
        let knots = &self.knots;
        if t <= knots[0].0 {
            return knots[0].1;
        }
        if t >= knots[knots.len() - 1].0 {
            return knots[knots.len() - 1].1;
        }
        // partition_point: first knot with T > t, so the segment is [idx-1, idx].
        let idx = knots.partition_point(|&(tk, _)| tk <= t);
        let (t0, v0) = knots[idx - 1];
        let (t1, v1) = knots[idx];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Temperature-dependent sheet material.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialModel {
    /// Density [kg/m^3] (constant; temperature dependence sits in `c_p`).
    pub rho: f64,
    /// Specific heat capacity c_p(T) [J/(kg K)].
    pub c_p: Table1d,
    /// Thermal conductivity lambda(T) [W/(m K)].
    pub lambda: Table1d,
    /// Induced volumetric heat g(T) [W/m^3], e.g. latent heat of a phase
    /// transformation. `None` means no induced heat.
    pub g: Option<Table1d>,
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::BadMaterialTable {
                name: "rho".into(),
                reason: format!("density must be positive, got {}", self.rho),
            });
        }
        self.c_p.validate("c_p", true)?;
        self.lambda.validate("lambda", true)?;
        if let Some(g) = &self.g {
            g.validate("g", false)?;
        }
        Ok(())
    }

    /// Volumetric heat capacity rho * c_p(T) [J/(m^3 K)].
    pub fn vol_heat_capacity(&self, t: f64) -> f64 {
        self.rho * self.c_p.eval(t)
    }

    pub fn conductivity(&self, t: f64) -> f64 {
        self.lambda.eval(t)
    }

    pub fn induced_heat(&self, t: f64) -> f64 {
        self.g.as_ref().map_or(0.0, |g| g.eval(t))
    }
}

/// Boundary film (heat transfer coefficient) model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilmModel {
    /// Contact conductance at zero pressure [W/(m^2 K)].
    pub h_contact0: f64,
    /// Pressure sensitivity of the contact conductance [W/(m^2 K Pa)].
    pub h_pressure_slope: f64,
    /// Gap convective coefficient [W/(m^2 K)].
    pub h_conv: f64,
    /// Emissivity for the linearized radiation term in the gap regime.
    pub emissivity: f64,
    /// Tool distance separating contact from gap regime [m].
    pub contact_threshold: f64,
    /// Whether both sheet faces exchange heat (the usual 2.5D case). Tests
    /// with explicit rim-only boundaries switch this off.
    pub faces_exposed: bool,
    /// Whether the free rim (hole and outer edge) exchanges heat.
    pub rim_exposed: bool,
}

impl Default for FilmModel {
    fn default() -> Self {
        FilmModel {
            h_contact0: 0.02,
            h_pressure_slope: 6.0e-10,
            h_conv: 1.5e-4,
            emissivity: 5.0e-7,
            contact_threshold: 1e-6,
            faces_exposed: true,
            rim_exposed: true,
        }
    }
}

impl FilmModel {
    pub fn validate(&self) -> Result<()> {
        let coeffs = [
            self.h_contact0,
            self.h_pressure_slope,
            self.h_conv,
            self.emissivity,
        ];
        if coeffs.iter().any(|c| *c < 0.0 || !c.is_finite()) {
            return Err(Error::BadConfig(
                "film coefficients must be non-negative and finite".into(),
            ));
        }
        if !(self.contact_threshold > 0.0) || !self.contact_threshold.is_finite() {
            return Err(Error::BadConfig(
                "contact threshold must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Film coefficient h(T, p) [W/(m^2 K)] for a node at temperature `t`
    /// exchanging with a partner at `t_inf`, at tool distance `delta` and
    /// contact pressure `pressure`.
    pub fn coefficient(&self, t: f64, t_inf: f64, delta: f64, pressure: f64) -> f64 {
        if delta <= self.contact_threshold {
            self.h_contact0 + self.h_pressure_slope * pressure
        } else {
            self.h_conv
                + self.emissivity * STEFAN_BOLTZMANN * (t * t + t_inf * t_inf) * (t + t_inf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interpolation_hits_midpoint_between_knots() {
        let table = Table1d::new(vec![(300.0, 10.0), (500.0, 30.0)]);
        assert_relative_eq!(table.eval(400.0), 20.0, max_relative = 1e-14);
    }

    #[test]
    fn evaluation_is_clamped_outside_the_table() {
        let table = Table1d::new(vec![(300.0, 10.0), (500.0, 30.0)]);
        assert_eq!(table.eval(100.0), 10.0);
        assert_eq!(table.eval(900.0), 30.0);
    }

    #[test]
    fn unsorted_or_empty_tables_are_rejected() {
        let table = Table1d::new(vec![(500.0, 30.0), (300.0, 10.0)]);
        assert!(table.validate("c_p", true).is_err());
        assert!(Table1d::new(vec![]).validate("c_p", true).is_err());
        let nonpositive = Table1d::new(vec![(300.0, 0.0)]);
        assert!(nonpositive.validate("c_p", true).is_err());
        // Sign freedom is allowed where positivity is not required.
        assert!(nonpositive.validate("g", false).is_ok());
    }

    #[test]
    fn gap_film_reproduces_linearized_radiation() {
        let film = FilmModel {
            h_conv: 0.0,
            emissivity: 0.7,
            ..FilmModel::default()
        };
        // T = T_inf = 1000 K: h = eps * sigma * (T^2 + T^2)(T + T) = eps * sigma * 4e9.
        let h = film.coefficient(1000.0, 1000.0, 1.0, 0.0);
        assert_relative_eq!(h, 0.7 * STEFAN_BOLTZMANN * 4.0e9, max_relative = 1e-12);
    }

    #[test]
    fn contact_film_is_affine_in_pressure() {
        let film = FilmModel {
            h_contact0: 0.02,
            h_pressure_slope: 6.0e-10,
            ..FilmModel::default()
        };
        let h = film.coefficient(800.0, 373.0, 0.0, 2.0e7);
        assert_relative_eq!(h, 0.02 + 6.0e-10 * 2.0e7, max_relative = 1e-14);
        // Gap and contact regimes separate exactly at the threshold.
        let at_threshold = film.coefficient(800.0, 373.0, film.contact_threshold, 1.0e7);
        assert_relative_eq!(at_threshold, 0.02 + 6.0e-10 * 1.0e7, max_relative = 1e-14);
    }

    #[test]
    fn negative_coefficients_are_rejected() {
        let film = FilmModel {
            h_conv: -1.0,
            ..FilmModel::default()
        };
        assert!(film.validate().is_err());
    }

    #[test]
    fn material_validation_covers_all_tables() {
        let mut mat = MaterialModel {
            rho: 1.0,
            c_p: Table1d::new(vec![(300.0, 35.0), (1500.0, 50.0)]),
            lambda: Table1d::new(vec![(300.0, 0.004), (1500.0, 0.005)]),
            g: None,
        };
        assert!(mat.validate().is_ok());
        mat.rho = -1.0;
        assert!(mat.validate().is_err());
    }
}
