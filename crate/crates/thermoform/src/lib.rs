//! Spatial-temporal temperature and disturbance estimation for multi-stage
//! hot sheet metal forming.
//!
//! The crate covers the full chain from a synthetic forming scenario to an
//! online state estimate:
//!
//! 1. [`scenario`] — annular sheet meshes, the four-phase process time grid
//!    (transfer, forming, holding, demoulding) and per-node forming
//!    kinematics (displacement, tool distance, contact pressure, ambient
//!    temperature).
//! 2. [`fom`] — a full-order finite-element heat model on the deformed sheet
//!    with temperature-dependent material data, mixed boundary exchange
//!    against tools and air, and a semi-implicit Euler integrator.
//! 3. [`rom`] — proper-orthogonal-decomposition bases from snapshot sweeps,
//!    Galerkin-projected reduced systems, and a precomputed linear
//!    time-varying schedule frozen along a supporting trajectory.
//! 4. [`estimator`] — an extended Kalman filter on the reduced model,
//!    optionally augmented with quasi-static disturbance states that absorb
//!    unmodelled heat sources such as latent heat of phase transformations.
//! 5. [`property`] — temperature-history based mechanical property
//!    classification (hard/soft from quench-rate rules).
//! 6. [`pipeline`] — experiment orchestration behind the `thermoform`
//!    binary: `simulate`, `reduce`, `estimate` and `evaluate`.
//!
//! # Runnable examples
//!
//! Each major capability has a self-contained example:
//!
//! ```text
//! cargo run --release -p thermoform --example simulate_fom        # full-order run + sensor CSV
//! cargo run --release -p thermoform --example build_rom           # snapshots, basis, energy curve
//! cargo run --release -p thermoform --example estimate_pulse      # EKF with a disturbance pulse
//! cargo run --release -p thermoform --example disturbance_benefit # estimation with vs. without d-states
//! cargo run --release -p thermoform --example property_map        # hard/soft classification map
//! cargo run --release -p thermoform --example speedup             # full-order vs. reduced wall time
//! ```
//!
//! The same flows are reachable through the thin binary:
//!
//! ```text
//! thermoform simulate --config experiment.toml --out out/ --seed 7
//! thermoform reduce   --config experiment.toml --out out/
//! thermoform estimate --config experiment.toml --out out/ --plant fom
//! thermoform evaluate --config experiment.toml --out out/
//! ```

pub mod checks;
pub mod container;
pub mod error;
pub mod estimator;
pub mod fom;
pub mod pipeline;
pub mod property;
pub mod rom;
pub mod scenario;

pub use error::{Error, Result};
