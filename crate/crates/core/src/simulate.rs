//! Synthetic invocation traces with Zipf-skewed entry-point popularity and
//! injected workload shifts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{Window, DEFAULT_WINDOW_MS};
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub app_id: String,
    pub entry_points: usize,
    pub windows: usize,
    pub window_ms: i64,
    pub start_ms: i64,
    /// Invocations per window.
    pub per_window: u64,
    /// Zipf exponent: the entry point of rank r gets weight `r^-skew`.
    pub skew: f64,
    /// Relative per-window noise on each weight.
    pub jitter: f64,
    /// Windows at which the top-k popularity ranks rotate by one.
    pub shifts: Vec<usize>,
    pub shift_top_k: usize,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            app_id: "sim-app".into(),
            entry_points: 20,
            windows: 30,
            window_ms: DEFAULT_WINDOW_MS,
            start_ms: 0,
            per_window: 1_000_000,
            skew: 2.0,
            jitter: 1e-4,
            shifts: Vec::new(),
            shift_top_k: 2,
            seed: 7,
        }
    }
}

impl SimSpec {
    pub fn entry_name(i: usize) -> String {
        format!("ep{i:03}")
    }

    /// Entry point holding each popularity rank in window `w`.
    fn assignment(&self, w: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.entry_points).collect();
        let k = self.shift_top_k.clamp(1, self.entry_points.max(1));
        let rotations = self.shifts.iter().filter(|&&s| s <= w).count();
        if k > 1 {
            order[..k].rotate_left(rotations % k);
        }
        order
    }

    fn window(&self, w: usize) -> Window {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (w as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let weights: Vec<f64> = (0..self.entry_points)
            .map(|rank| {
                let base = ((rank + 1) as f64).powf(-self.skew);
                let noise = if self.jitter > 0.0 {
                    rng.gen_range(-self.jitter..=self.jitter)
                } else {
                    0.0
                };
                base * (1.0 + noise)
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        let order = self.assignment(w);
        let mut win = Window::new(self.start_ms + w as i64 * self.window_ms, self.window_ms);
        for (rank, &ep) in order.iter().enumerate() {
            let n = (self.per_window as f64 * weights[rank] / sum).round() as u64;
            win.counts.insert(Self::entry_name(ep), n);
        }
        win
    }
}

/// Generates the windows of a spec. Deterministic for a given seed.
pub fn simulate(spec: &SimSpec, exec: Execution) -> Vec<Window> {
    exec.map_range(spec.windows, |w| spec.window(w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_persists_after_a_shift() {
        let spec = SimSpec {
            shifts: vec![3],
            entry_points: 4,
            ..Default::default()
        };
        assert_eq!(spec.assignment(2), vec![0, 1, 2, 3]);
        assert_eq!(spec.assignment(3), vec![1, 0, 2, 3]);
        assert_eq!(spec.assignment(9), vec![1, 0, 2, 3]);
    }

    #[test]
    fn top_fifth_holds_most_mass() {
        let w = &simulate(&SimSpec::default(), Execution::Sequential)[0];
        let mut counts: Vec<u64> = w.counts.values().copied().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let top: u64 = counts[..4].iter().sum();
        assert!(top as f64 / w.total() as f64 > 0.8);
    }
}
