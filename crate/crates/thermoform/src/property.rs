//! Mechanical property classification from temperature histories.
//!
//! Press-hardened microstructure depends on how fast material crosses the
//! martensite start temperature: quenching faster than a critical rate
//! produces the hard phase, slower cooling the soft one. The classifier
//! inspects each node's temperature history, finds the first downward
//! crossing of the threshold, and averages the cooling rate over a trailing
//! window ending at the crossing. Nodes that never cross within the history
//! stay undetermined rather than being guessed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quench-rate classification rule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PropertyRule {
    /// Martensite start temperature [K].
    pub m_s: f64,
    /// Critical average cooling rate [K/s]; at or above it the node
    /// classifies as hard.
    pub critical_rate: f64,
    /// Trailing window over which the rate is averaged [s].
    pub window: f64,
    /// Property value assigned to hard material (e.g. hardness).
    pub hard_value: f64,
    /// Property value assigned to soft material.
    pub soft_value: f64,
}

impl Default for PropertyRule {
    fn default() -> Self {
        PropertyRule {
            m_s: 443.0,
            critical_rate: 27.0,
            window: 0.5,
            hard_value: 470.0,
            soft_value: 180.0,
        }
    }
}

impl PropertyRule {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.m_s, self.critical_rate, self.window];
        if positive.iter().any(|v| !(v > &0.0) || !v.is_finite()) {
            return Err(Error::BadConfig(
                "property rule thresholds must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Classification outcome of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropertyFlag {
    Hard,
    Soft,
    /// The node never cooled through the threshold within the history.
    Undetermined,
}

/// Per-node property classification.
#[derive(Debug, Clone)]
pub struct PropertyMap {
    pub flag: Vec<PropertyFlag>,
    /// Assigned property value; NaN for undetermined nodes.
    pub value: Vec<f64>,
    /// Time of the threshold crossing [s]; NaN if it never happens.
    pub crossing_time: Vec<f64>,
    /// Average cooling rate over the trailing window [K/s]; NaN if
    /// undetermined.
    pub rate: Vec<f64>,
}

impl PropertyMap {
    pub fn count(&self, flag: PropertyFlag) -> usize {
        self.flag.iter().filter(|&&f| f == flag).count()
    }
}

/// Classifies every node of a temperature history (`n x (n_steps + 1)`,
/// grid points in `times`).
pub fn estimate_properties(
    history: &DMatrix<f64>,
    times: &[f64],
    rule: &PropertyRule,
) -> Result<PropertyMap> {
    rule.validate()?;
    if history.ncols() != times.len() {
        return Err(Error::ShapeMismatch {
            context: "temperature history vs time grid".into(),
            expected: format!("{} columns", times.len()),
            found: format!("{}", history.ncols()),
        });
    }
    if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadTimeGrid(
            "property estimation needs a strictly increasing grid".into(),
        ));
    }
    let total = times[times.len() - 1] - times[0];
    if total < rule.window {
        return Err(Error::HistoryTooShort {
            needed: rule.window,
            got: total,
        });
    }

    let n = history.nrows();
    let mut map = PropertyMap {
        flag: vec![PropertyFlag::Undetermined; n],
        value: vec![f64::NAN; n],
        crossing_time: vec![f64::NAN; n],
        rate: vec![f64::NAN; n],
    };

    for i in 0..n {
        let Some(t_cross) = first_downward_crossing(history, times, i, rule.m_s) else {
            continue;
        };
        let t_back = t_cross - rule.window;
        if t_back < times[0] {
            return Err(Error::HistoryTooShort {
                needed: rule.window,
                got: t_cross - times[0],
            });
        }
        let t_before = sample_history(history, times, i, t_back);
        let rate = (t_before - rule.m_s) / rule.window;
        let hard = rate >= rule.critical_rate;
        map.flag[i] = if hard {
            PropertyFlag::Hard
        } else {
            PropertyFlag::Soft
        };
        map.value[i] = if hard { rule.hard_value } else { rule.soft_value };
        map.crossing_time[i] = t_cross;
        map.rate[i] = rate;
    }

    Ok(map)
}

/// First time node `i` cools through `threshold`, by linear interpolation
/// between grid points; `None` if it never does (or starts below it).
fn first_downward_crossing(
    history: &DMatrix<f64>,
    times: &[f64],
    i: usize,
    threshold: f64,
) -> Option<f64> {
    if history[(i, 0)] <= threshold {
        return None;
    }
    for k in 1..times.len() {
        let (t0, t1) = (history[(i, k - 1)], history[(i, k)]);
        if t0 > threshold && t1 <= threshold {
            let frac = (t0 - threshold) / (t0 - t1);
            return Some(times[k - 1] + frac * (times[k] - times[k - 1]));
        }
    }
    None
}

/// Temperature of node `i` at an arbitrary time, linearly interpolated.
fn sample_history(history: &DMatrix<f64>, times: &[f64], i: usize, t: f64) -> f64 {
    let k = times.partition_point(|&tk| tk <= t);
    if k == 0 {
        return history[(i, 0)];
    }
    if k >= times.len() {
        return history[(i, times.len() - 1)];
    }
    let (ta, tb) = (times[k - 1], times[k]);
    let frac = (t - ta) / (tb - ta);
    history[(i, k - 1)] * (1.0 - frac) + history[(i, k)] * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Exponential cooling history T(t) = t_end + (t0 - t_end) exp(-t/tau).
    fn exp_history(t0: f64, t_end: f64, tau: f64, dt: f64, n_steps: usize) -> (DMatrix<f64>, Vec<f64>) {
        let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
        let h = DMatrix::from_fn(1, n_steps + 1, |_, k| {
            t_end + (t0 - t_end) * (-times[k] / tau).exp()
        });
        (h, times)
    }

    #[test]
    fn fast_quench_classifies_hard_slow_cooling_soft() {
        let rule = PropertyRule::default();
        // tau = 1 s from 1273 to 373: rate at the crossing is far above 27 K/s.
        let (fast, times) = exp_history(1273.0, 373.0, 1.0, 0.01, 1200);
        let map = estimate_properties(&fast, &times, &rule).unwrap();
        assert_eq!(map.flag[0], PropertyFlag::Hard);
        assert_eq!(map.value[0], rule.hard_value);
        assert!(map.rate[0] > rule.critical_rate);

        // tau = 40 s: crosses eventually, but far slower than critical.
        let (slow, times) = exp_history(1273.0, 373.0, 40.0, 0.1, 2000);
        let map = estimate_properties(&slow, &times, &rule).unwrap();
        assert_eq!(map.flag[0], PropertyFlag::Soft);
        assert_eq!(map.value[0], rule.soft_value);
    }

    #[test]
    fn never_crossing_stays_undetermined() {
        let rule = PropertyRule::default();
        let (h, times) = exp_history(1273.0, 800.0, 5.0, 0.1, 100);
        let map = estimate_properties(&h, &times, &rule).unwrap();
        assert_eq!(map.flag[0], PropertyFlag::Undetermined);
        assert!(map.value[0].is_nan());
        assert!(map.crossing_time[0].is_nan());
        assert_eq!(map.count(PropertyFlag::Undetermined), 1);
    }

    #[test]
    fn crossing_time_is_interpolated_between_grid_points() {
        let rule = PropertyRule::default();
        // Linear ramp from 543 down at 100 K/s: crosses 443 at exactly 1 s.
        let times: Vec<f64> = (0..=30).map(|k| k as f64 * 0.07).collect();
        let h = DMatrix::from_fn(1, 31, |_, k| 543.0 - 100.0 * times[k]);
        let map = estimate_properties(&h, &times, &rule).unwrap();
        assert_relative_eq!(map.crossing_time[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(map.rate[0], 100.0, max_relative = 1e-9);
        assert_eq!(map.flag[0], PropertyFlag::Hard);
    }

    #[test]
    fn history_shorter_than_window_is_rejected() {
        let rule = PropertyRule::default();
        let (h, times) = exp_history(1273.0, 373.0, 1.0, 0.01, 20); // 0.2 s total
        assert!(matches!(
            estimate_properties(&h, &times, &rule),
            Err(Error::HistoryTooShort { .. })
        ));
    }

    #[test]
    fn crossing_inside_the_first_window_is_rejected() {
        let rule = PropertyRule::default();
        // Crashes through the threshold at ~0.1 s < 0.5 s window.
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
        let h = DMatrix::from_fn(1, 101, |_, k| 500.0 - 600.0 * times[k]);
        assert!(matches!(
            estimate_properties(&h, &times, &rule),
            Err(Error::HistoryTooShort { .. })
        ));
    }

    #[test]
    fn non_monotone_grid_is_rejected() {
        let rule = PropertyRule::default();
        let h = DMatrix::from_element(1, 3, 500.0);
        assert!(matches!(
            estimate_properties(&h, &[0.0, 1.0, 0.5], &rule),
            Err(Error::BadTimeGrid(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        // Classification is monotone in quench speed: if a slower history is
        // hard, every faster one is hard too.
        #[test]
        fn faster_quench_never_flips_hard_to_soft(
            tau_fast in 0.8f64..5.0,
            ratio in 1.05f64..10.0,
        ) {
            let tau_slow = tau_fast * ratio;
            let rule = PropertyRule::default();
            let (fast, times) = exp_history(1273.0, 373.0, tau_fast, 0.02, 4000);
            let (slow, _) = exp_history(1273.0, 373.0, tau_slow, 0.02, 4000);
            let f = estimate_properties(&fast, &times, &rule).unwrap();
            let s = estimate_properties(&slow, &times, &rule).unwrap();
            if s.flag[0] == PropertyFlag::Hard {
                prop_assert_eq!(f.flag[0], PropertyFlag::Hard);
            }
            // Rates themselves are ordered.
            if let (PropertyFlag::Undetermined, _) = (f.flag[0], s.flag[0]) {
            } else if f.flag[0] != PropertyFlag::Undetermined && s.flag[0] != PropertyFlag::Undetermined {
                prop_assert!(f.rate[0] >= s.rate[0]);
            }
        }
    }
}
