//! State and disturbance estimation on the reduced schedule.
//!
//! A Kalman filter runs over the precomputed time-varying reduced model.
//! When disturbance estimation is enabled the state is augmented with one
//! quasi-static power density per disturbance region, modelled as a random
//! walk:
//!
//! ```text
//! [x]     [A_k  B_k] [x]     [c_k]        [G_k  0] [w]
//! [d]   = [0    I  ] [d]  +  [0  ]   +    [0    I] [w_d]
//!  k+1                k
//! y_k = [C_k  0] [x; d] + v
//! ```
//!
//! Process noise `w` enters through the power-to-state map `G_k`, so its
//! variance is specified in the same units as nodal heat power. The
//! disturbance walk variance `q_d` controls how fast the filter re-explains
//! model-plant mismatch as injected power; keep it small relative to the
//! expected disturbance magnitude, or the walk chases measurement noise
//! whenever the contact geometry makes the channel weakly observable.
//! Covariances are re-symmetrized every step and floored at zero if
//! round-off produces slightly negative eigenvalues; a genuinely indefinite
//! covariance aborts the run.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rom::LtvSchedule;

/// Filter noise and initialization parameters.
///
/// Process noise and the disturbance walk are both stated as nodal power
/// densities (W/m^3), entering the reduced dynamics through the same
/// discretized injection maps as the disturbance channels, so their
/// magnitudes are directly comparable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Process noise variance [(W/m^3)^2], injected through `G_k`.
    pub q_w: f64,
    /// Measurement noise variance [K^2] assumed by the filter.
    pub r_v: f64,
    /// Random-walk variance of each disturbance state per step [(W/m^3)^2].
    pub q_d: f64,
    /// Initial reduced-state covariance.
    pub p0: f64,
    /// Initial disturbance covariance [(W/m^3)^2].
    pub p_d0: f64,
    /// Use the Joseph-form covariance update (slower, more robust).
    pub joseph: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            q_w: 10.0,
            r_v: 0.1,
            q_d: 10.0,
            p0: 10.0,
            p_d0: 100.0,
            joseph: false,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.q_w, self.r_v, self.q_d, self.p0, self.p_d0];
        if nonneg.iter().any(|v| !(v >= &0.0) || !v.is_finite()) {
            return Err(Error::BadConfig(
                "noise variances must be non-negative and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Filter output over a run.
#[derive(Debug, Clone)]
pub struct EstimatorResult {
    /// Reduced state estimates, `r x (n_t + 1)`.
    pub x_hat: DMatrix<f64>,
    /// Disturbance estimates, `n_d x (n_t + 1)` (all zero when disturbance
    /// estimation is disabled).
    pub d_hat: DMatrix<f64>,
    /// Innovations of the updates at `t_1 ..= t_{n_t}`, `m x n_t`.
    pub innovations: DMatrix<f64>,
    /// Trace of the augmented covariance at every grid point.
    pub p_trace: Vec<f64>,
    /// Largest `|P - P^T|` entry seen before re-symmetrization, relative to
    /// the dominant eigenvalue (max over all steps).
    pub max_asymmetry: f64,
    /// Most negative covariance eigenvalue seen, relative to the dominant
    /// eigenvalue (min over all steps; non-negative when `P` stayed PSD).
    pub min_eigenvalue: f64,
}

/// Runs the (augmented) Kalman filter over a schedule.
///
/// `measurements` holds one column per grid point (`m x (n_t + 1)`); column
/// 0 is unused since the filter is initialized at `t_0`. `x0` is the initial
/// reduced state, typically the projection of the nominal initial field.
pub fn run_estimator(
    schedule: &LtvSchedule,
    measurements: &DMatrix<f64>,
    x0: &DVector<f64>,
    noise: &NoiseConfig,
    estimate_disturbance: bool,
) -> Result<EstimatorResult> {
    noise.validate()?;
    let r = schedule.rank();
    let n_t = schedule.n_steps();
    let m = schedule.n_outputs();
    let n_d = schedule.n_disturbances();
    let nd = if estimate_disturbance { n_d } else { 0 };
    let na = r + nd;

    if x0.len() != r {
        return Err(Error::ShapeMismatch {
            context: "initial reduced state".into(),
            expected: format!("{r}"),
            found: format!("{}", x0.len()),
        });
    }
    if measurements.nrows() != m {
        return Err(Error::ShapeMismatch {
            context: "measurement rows".into(),
            expected: format!("{m}"),
            found: format!("{}", measurements.nrows()),
        });
    }
    if measurements.ncols() < n_t + 1 {
        return Err(Error::MeasurementStreamEnded {
            expected: n_t + 1,
            got: measurements.ncols(),
        });
    }

    // Augmented initial state and covariance.
    let mut x = DVector::zeros(na);
    x.rows_mut(0, r).copy_from(x0);
    let mut p = DMatrix::zeros(na, na);
    for i in 0..r {
        p[(i, i)] = noise.p0;
    }
    for i in r..na {
        p[(i, i)] = noise.p_d0;
    }

    let mut x_hat = DMatrix::zeros(r, n_t + 1);
    let mut d_hat = DMatrix::zeros(n_d, n_t + 1);
    let mut innovations = DMatrix::zeros(m, n_t);
    let mut p_trace = Vec::with_capacity(n_t + 1);
    x_hat.set_column(0, x0);
    p_trace.push(p.trace());

    let mut jitter_used = false;
    let mut max_asymmetry = 0.0_f64;
    let mut min_eigenvalue = f64::INFINITY;

    for k in 0..n_t {
        let step = &schedule.steps[k];

        // ---- predict --------------------------------------------------
        let mut f = DMatrix::identity(na, na);
        f.view_mut((0, 0), (r, r)).copy_from(&step.a);
        if nd > 0 {
            f.view_mut((0, r), (r, nd)).copy_from(&step.b_d);
        }
        let mut x_pred = &f * &x;
        for i in 0..r {
            x_pred[i] += step.c[i];
        }
        x = x_pred;

        let mut p_pred = &f * &p * f.transpose();
        // G Q G^T: power noise through G_k, plus the disturbance walk.
        if noise.q_w > 0.0 {
            let ggt = &step.g * step.g.transpose();
            p_pred
                .view_mut((0, 0), (r, r))
                .zip_apply(&ggt, |pv, gv| *pv += noise.q_w * gv);
        }
        for i in r..na {
            p_pred[(i, i)] += noise.q_d;
        }
        p = p_pred;

        // ---- update with y_{k+1} --------------------------------------
        let c_out = &schedule.c_out[k + 1];
        let y = measurements.column(k + 1);
        let mut c_aug = DMatrix::zeros(m, na);
        c_aug.view_mut((0, 0), (m, r)).copy_from(c_out);

        let pct = &p * c_aug.transpose();
        let mut s = &c_aug * &pct;
        for i in 0..m {
            s[(i, i)] += noise.r_v;
        }
        let chol = match Cholesky::new(s.clone()) {
            Some(c) => c,
            None => {
                // Regularize a (numerically) singular innovation covariance,
                // e.g. from redundant sensors with tiny measurement noise.
                let eps = 1e-10 * s.trace();
                if !jitter_used {
                    jitter_used = true;
                    log::warn!(
                        "innovation covariance singular at step {}; adding jitter {eps:.3e}",
                        k + 1
                    );
                }
                for i in 0..m {
                    s[(i, i)] += eps;
                }
                Cholesky::new(s).ok_or(Error::InnovationSingular { step: k + 1 })?
            }
        };

        let nu = DVector::from_fn(m, |i, _| y[i] - c_aug.row(i).transpose().dot(&x));
        let gain = chol.solve(&pct.transpose()).transpose(); // K = P C^T S^{-1}
        x += &gain * &nu;

        if noise.joseph {
            let ikc = DMatrix::identity(na, na) - &gain * &c_aug;
            p = &ikc * &p * ikc.transpose() + &gain * gain.transpose() * noise.r_v;
        } else {
            p -= &gain * &c_aug * &p;
        }

        // Re-symmetrize and floor tiny negative eigenvalues.
        let asymmetry = (&p - p.transpose()).amax();
        p = (&p + p.transpose()) * 0.5;
        let eig = SymmetricEigen::new(p.clone());
        let norm = eig.eigenvalues.amax();
        let min_eig = eig.eigenvalues.min();
        let scale = norm.max(f64::MIN_POSITIVE);
        max_asymmetry = max_asymmetry.max(asymmetry / scale);
        min_eigenvalue = min_eigenvalue.min(min_eig / scale);
        if min_eig < -1e-8 * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::CovarianceNotPsd {
                step: k + 1,
                min_eig,
                norm,
            });
        }
        if min_eig < 0.0 {
            let mut lam = eig.eigenvalues.clone();
            for v in lam.iter_mut() {
                *v = v.max(0.0);
            }
            p = &eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose();
            p = (&p + p.transpose()) * 0.5;
        }

        innovations.set_column(k, &nu);
        x_hat.set_column(k + 1, &x.rows(0, r));
        if nd > 0 {
            d_hat.set_column(k + 1, &x.rows(r, nd));
        }
        p_trace.push(p.trace());
    }

    if !min_eigenvalue.is_finite() {
        min_eigenvalue = 0.0;
    }
    Ok(EstimatorResult {
        x_hat,
        d_hat,
        innovations,
        p_trace,
        max_asymmetry,
        min_eigenvalue,
    })
}

/// Dense Jacobian of `f` at `x0` by central differences with a relative
/// step. Used to validate linearizations against the nonlinear maps they
/// approximate.
pub fn fd_jacobian<F>(f: F, x0: &DVector<f64>, rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x0.len();
    let f0 = f(x0);
    let m = f0.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let h = rel_step * x0[j].abs().max(1.0);
        let mut plus = x0.clone();
        plus[j] += h;
        let mut minus = x0.clone();
        minus[j] -= h;
        let df = (f(&plus) - f(&minus)) / (2.0 * h);
        jac.set_column(j, &df);
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom::LtvStep;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Scalar schedule x+ = a x + b d + c with unit output.
    fn scalar_schedule(a: f64, b: f64, c: f64, n_t: usize, n_d: usize) -> LtvSchedule {
        let step = LtvStep {
            a: DMatrix::from_element(1, 1, a),
            b_d: DMatrix::from_element(1, n_d, b),
            c: DVector::from_element(1, c),
            g: DMatrix::from_element(1, 1, 1.0),
        };
        LtvSchedule {
            steps: vec![step; n_t],
            c_out: vec![DMatrix::from_element(1, 1, 1.0); n_t + 1],
            times: (0..=n_t).map(|k| k as f64 * 0.1).collect(),
        }
    }

    #[test]
    fn scalar_filter_matches_hand_recursion() {
        let (a, c) = (0.9, 0.15);
        let n_t = 25;
        let schedule = scalar_schedule(a, 0.0, c, n_t, 0);
        let noise = NoiseConfig {
            q_w: 0.4,
            r_v: 2.0,
            q_d: 0.0,
            p0: 3.0,
            p_d0: 0.0,
            joseph: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y = DMatrix::from_fn(1, n_t + 1, |_, _| 5.0 + rng.gen_range(-1.0..1.0));

        let got = run_estimator(
            &schedule,
            &y,
            &DVector::from_element(1, 2.0),
            &noise,
            false,
        )
        .unwrap();

        // Hand-rolled scalar Kalman recursion.
        let (mut x, mut p) = (2.0, 3.0);
        for k in 0..n_t {
            x = a * x + c;
            p = a * p * a + noise.q_w; // g = 1
            let s = p + noise.r_v;
            let gain = p / s;
            let nu = y[(0, k + 1)] - x;
            x += gain * nu;
            p -= gain * p;
            assert_relative_eq!(got.x_hat[(0, k + 1)], x, max_relative = 1e-12);
            assert_relative_eq!(got.innovations[(0, k)], nu, max_relative = 1e-12);
        }
    }

    #[test]
    fn gain_limits_pin_to_measurement_or_prediction() {
        let schedule = scalar_schedule(1.0, 0.0, 0.0, 10, 0);
        let y = DMatrix::from_element(1, 11, 100.0);
        let x0 = DVector::from_element(1, 0.0);

        let trusting = NoiseConfig {
            r_v: 1e-12,
            ..NoiseConfig::default()
        };
        let got = run_estimator(&schedule, &y, &x0, &trusting, false).unwrap();
        assert_relative_eq!(got.x_hat[(0, 1)], 100.0, max_relative = 1e-9);

        let distrusting = NoiseConfig {
            r_v: 1e12,
            q_w: 0.0,
            p0: 1e-6,
            ..NoiseConfig::default()
        };
        let got = run_estimator(&schedule, &y, &x0, &distrusting, false).unwrap();
        assert!(got.x_hat[(0, 10)].abs() < 1e-3, "prediction should dominate");
    }

    #[test]
    fn zero_walk_variance_freezes_the_disturbance_estimate() {
        let schedule = scalar_schedule(0.95, 0.5, 0.0, 20, 1);
        let y = DMatrix::from_element(1, 21, 50.0);
        let x0 = DVector::from_element(1, 0.0);

        let frozen = NoiseConfig {
            q_d: 0.0,
            p_d0: 0.0,
            ..NoiseConfig::default()
        };
        let got = run_estimator(&schedule, &y, &x0, &frozen, true).unwrap();
        assert_eq!(got.d_hat.amax(), 0.0);

        let adaptive = NoiseConfig {
            q_d: 10.0,
            p_d0: 100.0,
            ..NoiseConfig::default()
        };
        let got = run_estimator(&schedule, &y, &x0, &adaptive, true).unwrap();
        assert!(
            got.d_hat[(0, 20)] > 1.0,
            "persistent innovation should load the disturbance state"
        );
    }

    #[test]
    fn disabling_disturbance_estimation_ignores_the_input_channel() {
        let with_b = scalar_schedule(0.9, 0.7, 0.05, 15, 1);
        let without_b = scalar_schedule(0.9, 0.0, 0.05, 15, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = DMatrix::from_fn(1, 16, |_, _| rng.gen_range(0.0..10.0));
        let x0 = DVector::from_element(1, 1.0);
        let noise = NoiseConfig::default();

        let a = run_estimator(&with_b, &y, &x0, &noise, false).unwrap();
        let b = run_estimator(&without_b, &y, &x0, &noise, false).unwrap();
        assert_eq!(a.x_hat, b.x_hat);
    }

    #[test]
    fn noise_free_self_consistent_data_yields_zero_innovations() {
        let schedule = scalar_schedule(0.92, 0.0, 0.3, 30, 0);
        let x0 = DVector::from_element(1, 4.0);
        let truth = schedule.simulate(&x0, None);
        let y = truth.clone(); // C = 1

        let got = run_estimator(&schedule, &y, &x0, &NoiseConfig::default(), false).unwrap();
        assert!(got.innovations.amax() < 1e-9);
        assert!((got.x_hat - truth).amax() < 1e-9);
    }

    #[test]
    fn joseph_and_standard_updates_agree_when_well_conditioned() {
        let schedule = scalar_schedule(0.9, 0.0, 0.1, 20, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = DMatrix::from_fn(1, 21, |_, _| rng.gen_range(-1.0..1.0));
        let x0 = DVector::from_element(1, 0.0);

        let plain = run_estimator(&schedule, &y, &x0, &NoiseConfig::default(), false).unwrap();
        let joseph_cfg = NoiseConfig {
            joseph: true,
            ..NoiseConfig::default()
        };
        let joseph = run_estimator(&schedule, &y, &x0, &joseph_cfg, false).unwrap();
        assert!((plain.x_hat - joseph.x_hat).amax() < 1e-8);
    }

    #[test]
    fn dead_output_with_zero_noise_is_singular() {
        let mut schedule = scalar_schedule(0.9, 0.0, 0.0, 5, 0);
        for c in schedule.c_out.iter_mut() {
            *c = DMatrix::zeros(1, 1);
        }
        let y = DMatrix::zeros(1, 6);
        let noise = NoiseConfig {
            r_v: 0.0,
            ..NoiseConfig::default()
        };
        let err = run_estimator(&schedule, &y, &DVector::zeros(1), &noise, false);
        assert!(matches!(err, Err(Error::InnovationSingular { .. })));
    }

    #[test]
    fn redundant_sensors_with_zero_noise_survive_via_jitter() {
        // Two identical sensors make S rank-one when r_v = 0; the one-time
        // jitter regularizes it.
        let step = LtvStep {
            a: DMatrix::from_element(1, 1, 0.9),
            b_d: DMatrix::zeros(1, 0),
            c: DVector::zeros(1),
            g: DMatrix::from_element(1, 1, 1.0),
        };
        let schedule = LtvSchedule {
            steps: vec![step; 5],
            c_out: vec![DMatrix::from_element(2, 1, 1.0); 6],
            times: (0..=5).map(|k| k as f64).collect(),
        };
        let y = DMatrix::from_element(2, 6, 1.0);
        let noise = NoiseConfig {
            r_v: 0.0,
            ..NoiseConfig::default()
        };
        let got = run_estimator(&schedule, &y, &DVector::zeros(1), &noise, false).unwrap();
        assert!(got.x_hat[(0, 5)].is_finite());
    }

    #[test]
    fn short_measurement_stream_is_rejected() {
        let schedule = scalar_schedule(0.9, 0.0, 0.0, 10, 0);
        let y = DMatrix::zeros(1, 5);
        let err = run_estimator(
            &schedule,
            &y,
            &DVector::zeros(1),
            &NoiseConfig::default(),
            false,
        );
        assert!(matches!(err, Err(Error::MeasurementStreamEnded { .. })));
    }

    #[test]
    fn covariance_stays_symmetric_under_random_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let r = 4;
            let step = LtvStep {
                a: DMatrix::from_fn(r, r, |_, _| rng.gen_range(-0.4..0.4)),
                b_d: DMatrix::from_fn(r, 1, |_, _| rng.gen_range(-0.5..0.5)),
                c: DVector::from_fn(r, |_, _| rng.gen_range(-0.1..0.1)),
                g: DMatrix::from_fn(r, r, |_, _| rng.gen_range(-0.2..0.2)),
            };
            let n_t = 40;
            let schedule = LtvSchedule {
                steps: vec![step; n_t],
                c_out: vec![DMatrix::from_fn(2, r, |_, _| rng.gen_range(-1.0..1.0)); n_t + 1],
                times: (0..=n_t).map(|k| k as f64 * 0.05).collect(),
            };
            let y = DMatrix::from_fn(2, n_t + 1, |_, _| rng.gen_range(-2.0..2.0));
            let got = run_estimator(
                &schedule,
                &y,
                &DVector::zeros(r),
                &NoiseConfig::default(),
                true,
            )
            .unwrap();
            assert!(got.p_trace.iter().all(|&t| t.is_finite() && t >= 0.0));
            assert!(got.x_hat.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn finite_difference_jacobian_matches_analytic_quadratic() {
        let f = |x: &DVector<f64>| {
            DVector::from_vec(vec![3.0 * x[0] * x[0], x[0] * x[1]])
        };
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let jac = fd_jacobian(f, &x0, 1e-6);
        assert_relative_eq!(jac[(0, 0)], 6.0, max_relative = 1e-5);
        assert_relative_eq!(jac[(0, 1)], 0.0, epsilon = 1e-5);
        assert_relative_eq!(jac[(1, 0)], 2.0, max_relative = 1e-5);
        assert_relative_eq!(jac[(1, 1)], 1.0, max_relative = 1e-5);
    }
}
