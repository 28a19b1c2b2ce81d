//! The shared stochastic K-armed bandit and the source-corruption model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default sub-Gaussian proxy for rewards supported on [0, 1].
pub const DEFAULT_SIGMA: f64 = 0.5;

/// Minimum pairwise distance between drawn arm means.
pub const DEFAULT_SEPARATION: f64 = 1e-3;

const INSTANCE_RETRY_CAP: usize = 10_000;

/// Reward distribution family shared by all arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardKind {
    #[default]
    Bernoulli,
    /// Every pull returns the arm mean exactly.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    means: Vec<f64>,
    kind: RewardKind,
    sigma: f64,
    best: usize,
}

impl BanditInstance {
    pub fn new(means: Vec<f64>, kind: RewardKind, sigma: f64) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::param("arm_means", "need at least 2 arms"));
        }
        if let Some(bad) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::param("arm_means", format!("mean {bad} outside [0, 1]")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", "must be positive and finite"));
        }
        let best = argmax(&means);
        Ok(BanditInstance {
            means,
            kind,
            sigma,
            best,
        })
    }

    pub fn bernoulli(means: Vec<f64>) -> Result<Self> {
        Self::new(means, RewardKind::Bernoulli, DEFAULT_SIGMA)
    }

    /// K Bernoulli means uniform on `[lo, hi]`, redrawn until every pair is at
    /// least `separation` apart.
    pub fn random(arms: usize, lo: f64, hi: f64, separation: f64, seed: u64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::param(
                "mean_range",
                format!("need 0 <= lo < hi <= 1, got [{lo}, {hi}]"),
            ));
        }
        if arms < 2 {
            return Err(Error::param("arms", "need at least 2 arms"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..INSTANCE_RETRY_CAP {
            let means: Vec<f64> = (0..arms).map(|_| rng.random_range(lo..=hi)).collect();
            let mut sorted = means.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).all(|w| w[1] - w[0] >= separation) {
                return Self::bernoulli(means);
            }
        }
        Err(Error::InstanceExhausted {
            attempts: INSTANCE_RETRY_CAP,
        })
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.means[arm]
    }

    pub fn kind(&self) -> RewardKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", "must be positive and finite"));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Index of the (lowest-indexed) best arm.
    pub fn best_arm(&self) -> usize {
        self.best
    }

    pub fn best_mean(&self) -> f64 {
        self.means[self.best]
    }

    pub fn gaps(&self) -> GapProfile {
        GapProfile::from_means(&self.means)
    }

    pub fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        let mu = self.means[arm];
        match self.kind {
            RewardKind::Bernoulli => {
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
            RewardKind::Deterministic => mu,
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-arm gaps to the best mean.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    pub deltas: Vec<f64>,
    /// Smallest nonzero gap; `None` when all arms are optimal.
    pub delta_min: Option<f64>,
}

impl GapProfile {
    pub fn from_means(means: &[f64]) -> Self {
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let deltas: Vec<f64> = means.iter().map(|m| best - m).collect();
        let delta_min = deltas.iter().copied().filter(|&d| d > 0.0).min_by(f64::total_cmp);
        GapProfile { deltas, delta_min }
    }

    pub fn delta_max(&self) -> f64 {
        self.deltas.iter().copied().fold(0.0, f64::max)
    }

    /// Sum of the positive gaps.
    pub fn total(&self) -> f64 {
        self.deltas.iter().filter(|&&d| d > 0.0).sum()
    }
}

/// Fixed distribution Q that corrupted emissions are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionDist {
    Uniform { lo: f64, hi: f64 },
    PointMass(f64),
}

impl Default for CorruptionDist {
    fn default() -> Self {
        CorruptionDist::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl CorruptionDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CorruptionDist::Uniform { lo, hi } => rng.random_range(lo..=hi),
            CorruptionDist::PointMass(v) => v,
        }
    }
}

/// Huber contamination applied at the message source.
///
/// A byzantine agent emits its true reward with probability `1 - epsilon`
/// and a draw from `q` otherwise. Relayed messages are never corrupted; the
/// intermediary variant is equivalent to source corruption at rate at most
/// `gamma * epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationModel {
    epsilon: f64,
    q: CorruptionDist,
    byzantine: Vec<bool>,
}

impl ContaminationModel {
    /// Every agent byzantine.
    pub fn all_byzantine(agents: usize, epsilon: f64, q: CorruptionDist) -> Result<Self> {
        Self::new(vec![true; agents], epsilon, q)
    }

    pub fn new(byzantine: Vec<bool>, epsilon: f64, q: CorruptionDist) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::param("epsilon_c", format!("{epsilon} outside [0, 1/2)")));
        }
        if let CorruptionDist::Uniform { lo, hi } = q {
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::param("q_dist", "uniform corruption needs finite lo <= hi"));
            }
        }
        Ok(ContaminationModel { epsilon, q, byzantine })
    }

    /// Degenerate model that corrupts every emission; for tests of the
    /// corruption path only.
    pub fn always_corrupt(agents: usize, q: CorruptionDist) -> Self {
        ContaminationModel {
            epsilon: 1.0,
            q,
            byzantine: vec![true; agents],
        }
    }

    pub fn none(agents: usize) -> Self {
        ContaminationModel {
            epsilon: 0.0,
            q: CorruptionDist::default(),
            byzantine: vec![false; agents],
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn q(&self) -> CorruptionDist {
        self.q
    }

    pub fn agents(&self) -> usize {
        self.byzantine.len()
    }

    pub fn is_byzantine(&self, agent: usize) -> bool {
        self.byzantine.get(agent).copied().unwrap_or(false)
    }

    /// The value agent `agent` broadcasts for a pull that returned `true_reward`.
    ///
    /// Honest agents and `epsilon == 0` never touch `rng`, so the stream is
    /// left exactly as without a contamination model.
    pub fn corrupt_emission<R: Rng + ?Sized>(&self, agent: usize, true_reward: f64, rng: &mut R) -> f64 {
        if self.epsilon == 0.0 || !self.is_byzantine(agent) {
            return true_reward;
        }
        if rng.random::<f64>() < self.epsilon {
            self.q.sample(rng)
        } else {
            true_reward
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    #[test]
    fn degenerate_arms() {
        let b = BanditInstance::bernoulli(vec![1.0, 0.0]).unwrap();
        let mut r = rng(1);
        for _ in 0..1000 {
            assert_eq!(b.sample(0, &mut r), 1.0);
            assert_eq!(b.sample(1, &mut r), 0.0);
        }
    }

    #[test]
    fn half_arm_empirical_mean() {
        // sd of the mean over 1e5 draws is 0.0016; 0.005 is ~3 sd.
        let b = BanditInstance::bernoulli(vec![0.5, 0.2]).unwrap();
        let mut r = rng(2);
        let n = 100_000;
        let mean = (0..n).map(|_| b.sample(0, &mut r)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn instance_validation() {
        assert!(BanditInstance::bernoulli(vec![0.5]).is_err());
        assert!(BanditInstance::bernoulli(vec![0.5, 1.2]).is_err());
        assert!(BanditInstance::new(vec![0.5, 0.2], RewardKind::Bernoulli, 0.0).is_err());
        assert!(BanditInstance::random(5, 0.5, 0.5, 1e-3, 0).is_err());
        assert!(BanditInstance::random(5, 0.7, 0.3, 1e-3, 0).is_err());
    }

    #[test]
    fn random_instance_respects_range_and_separation() {
        for seed in 0..50 {
            let b = BanditInstance::random(5, 0.3, 0.7, DEFAULT_SEPARATION, seed).unwrap();
            assert_eq!(b.arms(), 5);
            assert!(b.means().iter().all(|m| (0.3..=0.7).contains(m)));
            let gaps = b.gaps();
            assert!(gaps.delta_min.unwrap() >= DEFAULT_SEPARATION);
            assert_eq!(gaps.deltas[b.best_arm()], 0.0);
        }
        let a = BanditInstance::random(5, 0.0, 1.0, DEFAULT_SEPARATION, 3).unwrap();
        let b = BanditInstance::random(5, 0.0, 1.0, DEFAULT_SEPARATION, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_separation_exhausts() {
        let err = BanditInstance::random(5, 0.0, 0.001, 0.01, 0).unwrap_err();
        assert!(matches!(err, Error::InstanceExhausted { .. }));
    }

    #[test]
    fn gap_profile_with_ties() {
        let g = GapProfile::from_means(&[0.5, 0.7, 0.7, 0.2]);
        assert_eq!(g.deltas.iter().filter(|&&d| d == 0.0).count(), 2);
        assert!((g.delta_min.unwrap() - 0.2).abs() < 1e-12);
        assert!((g.total() - 0.7).abs() < 1e-12);
        assert_eq!(GapProfile::from_means(&[0.4, 0.4]).delta_min, None);
    }

    #[test]
    fn honest_and_zero_rate_emissions_are_identity() {
        let c = ContaminationModel::all_byzantine(3, 0.0, CorruptionDist::default()).unwrap();
        let mut r = rng(3);
        assert_eq!(c.corrupt_emission(0, 0.25, &mut r), 0.25);
        let c = ContaminationModel::new(vec![false, true], 0.3, CorruptionDist::PointMass(0.0)).unwrap();
        for _ in 0..100 {
            assert_eq!(c.corrupt_emission(0, 1.0, &mut r), 1.0);
        }
        assert!(ContaminationModel::all_byzantine(3, 0.5, CorruptionDist::default()).is_err());
    }

    #[test]
    fn corruption_rate_matches_epsilon() {
        // Binomial(1e6, 1e-3): sd ~ 3.2e-5 in the fraction.
        let c = ContaminationModel::all_byzantine(1, 1e-3, CorruptionDist::PointMass(-1.0)).unwrap();
        let mut r = rng(4);
        let n = 1_000_000;
        let corrupted = (0..n).filter(|_| c.corrupt_emission(0, 0.5, &mut r) == -1.0).count();
        let frac = corrupted as f64 / n as f64;
        assert!((frac - 1e-3).abs() < 3e-4, "{frac}");
    }
}
