//! Isolated single-agent UCB1, the non-cooperative reference policy.

use crate::private::argmax_lowest;

#[derive(Debug, Clone)]
pub struct Ucb1Agent {
    counts: Vec<u64>,
    sums: Vec<f64>,
    /// Multiplier on the `sqrt(2 ln n / n_k)` bonus; 1 is the classic policy.
    exploration: f64,
}

impl Ucb1Agent {
    pub fn new(arms: usize, exploration: f64) -> Self {
        Ucb1Agent {
            counts: vec![0; arms],
            sums: vec![0.0; arms],
            exploration,
        }
    }

    pub fn select(&self) -> usize {
        if let Some(k) = self.counts.iter().position(|&n| n == 0) {
            return k;
        }
        let plays: u64 = self.counts.iter().sum();
        let ln_n = (plays as f64).ln();
        argmax_lowest(
            self.counts
                .iter()
                .zip(&self.sums)
                .map(|(&n, &s)| s / n as f64 + self.exploration * (2.0 * ln_n / n as f64).sqrt()),
        )
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}
