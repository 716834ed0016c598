use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Right-continuous step function defined by sorted `(time, value)` jump
/// points. Before the first point it takes `initial`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub initial: f64,
    pub points: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn new(initial: f64, points: Vec<(f64, f64)>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0].0 < w[1].0));
        Self { initial, points }
    }

    /// Value at `t` (includes a jump located exactly at `t`).
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|&(s, _)| s <= t);
        if idx == 0 {
            self.initial
        } else {
            self.points[idx - 1].1
        }
    }

    /// Left limit at `t` (excludes a jump located exactly at `t`).
    pub fn eval_left(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|&(s, _)| s < t);
        if idx == 0 {
            self.initial
        } else {
            self.points[idx - 1].1
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
