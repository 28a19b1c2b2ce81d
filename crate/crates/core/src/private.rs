//! Private message passing with interval releases, and the private
//! multi-agent UCB policy built on it.
//!
//! Each agent keeps exact per-arm reward sums. The broadcast mean of an arm is
//! refreshed only when the agent's own pull count of that arm reaches a point
//! of an [`IntervalSchedule`]; a refresh publishes the empirical mean plus
//! Laplace noise of scale `n^(v/2 - 1)`. Group estimates pool the agent's own
//! raw sums with the count-weighted noisy means of the newest message from
//! every origin it has heard from.

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{Mailbox, PrivatePayload};

/// Number of explicit terms in [`zeta`].
const ZETA_TERMS: u64 = 1_000_000;

/// Zero-mean Laplace draw with density `exp(-|x| / scale) / (2 scale)`.
///
/// A scale of exactly zero is the degenerate limit and returns `0.0`.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    assert!(
        scale >= 0.0 && scale.is_finite(),
        "Laplace scale must be non-negative, got {scale}"
    );
    if scale == 0.0 {
        return 0.0;
    }
    // 1 - u lies in (0, 1], so the exponential magnitude is finite.
    let u: f64 = rng.random();
    let magnitude = -(1.0 - u).ln() * scale;
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

/// Riemann zeta for `v > 1`: 10^6 explicit terms plus an Euler-Maclaurin tail.
pub fn zeta(v: f64) -> f64 {
    assert!(v > 1.0, "zeta diverges for v <= 1");
    let n = ZETA_TERMS as f64;
    let head: f64 = (1..=ZETA_TERMS).rev().map(|i| (i as f64).powf(-v)).sum();
    let tail = n.powf(1.0 - v) / (v - 1.0) - 0.5 * n.powf(-v) + v * n.powf(-v - 1.0) / 12.0;
    head + tail
}

fn check_epsilon_v(epsilon: f64, v: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param("epsilon", format!("{epsilon} outside (0, 1]")));
    }
    if !(v > 1.0 && v < 1.5) {
        return Err(Error::param("v", format!("{v} outside (1, 1.5)")));
    }
    Ok(())
}

/// Pull counts at which an arm's broadcast mean is refreshed.
///
/// `W_0 = 0` and `W_{n+1}` is the least `x >= W_n + 1` with
/// `sum_{i = W_n + 1}^{x} i^(-v/2) >= 1 / (epsilon * x^v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSchedule {
    epsilon: f64,
    v: f64,
    horizon: u64,
    /// `W_1, W_2, ...` up to the horizon.
    points: Vec<u64>,
}

impl IntervalSchedule {
    pub fn build(epsilon: f64, v: f64, horizon: u64) -> Result<Self> {
        check_epsilon_v(epsilon, v)?;
        let mut points = Vec::new();
        let mut acc = 0.0;
        for x in 1..=horizon {
            let xf = x as f64;
            acc += xf.powf(-v / 2.0);
            if acc >= 1.0 / (epsilon * xf.powf(v)) {
                points.push(x);
                acc = 0.0;
            }
        }
        Ok(IntervalSchedule {
            epsilon,
            v,
            horizon,
            points,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Release points `W_1, W_2, ...` (the implicit `W_0 = 0` is omitted).
    pub fn points(&self) -> &[u64] {
        &self.points
    }

    /// Number of releases after `n` own pulls: `|{i >= 1 : W_i <= n}|`.
    pub fn releases_up_to(&self, n: u64) -> usize {
        self.points.partition_point(|&w| w <= n)
    }

    /// Interval lengths `w_n = W_{n+1} - W_n`, starting from `W_0 = 0`.
    pub fn intervals(&self) -> impl Iterator<Item = u64> + '_ {
        std::iter::once(0)
            .chain(self.points.iter().copied())
            .zip(self.points.iter().copied())
            .map(|(a, b)| b - a)
    }
}

/// Whether releases actually add noise. `Disabled` exists for comparisons
/// against non-private reference policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Laplace,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivateParams {
    pub epsilon: f64,
    pub v: f64,
    pub sigma: f64,
    pub noise: NoiseMode,
}

impl PrivateParams {
    pub fn new(epsilon: f64, v: f64, sigma: f64) -> Result<Self> {
        check_epsilon_v(epsilon, v)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", "must be positive and finite"));
        }
        Ok(PrivateParams {
            epsilon,
            v,
            sigma,
            noise: NoiseMode::Laplace,
        })
    }

    /// Length of the round-robin warm-up, `K * ceil(1 / epsilon)`.
    pub fn warmup(&self, arms: usize) -> u64 {
        arms as u64 * (1.0 / self.epsilon).ceil() as u64
    }
}

/// Bookkeeping for one noisy release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseEvent {
    pub arm: usize,
    pub count: u64,
    pub noise_scale: f64,
    /// Sensitivity of the empirical mean over `count` rewards in [0, 1].
    pub sensitivity: f64,
}

impl ReleaseEvent {
    /// Laplace-mechanism privacy level of this release, sensitivity / scale.
    pub fn privacy_level(&self) -> f64 {
        self.sensitivity / self.noise_scale
    }
}

#[derive(Debug, Clone)]
pub struct PrivateAgent {
    sums: Vec<f64>,
    counts: Vec<u64>,
    next_release: Vec<usize>,
    released: Vec<f64>,
    group_mean: Vec<Option<f64>>,
    group_count: Vec<u64>,
    last_release: Option<ReleaseEvent>,
}

impl PrivateAgent {
    pub fn new(arms: usize) -> Self {
        PrivateAgent {
            sums: vec![0.0; arms],
            counts: vec![0; arms],
            next_release: vec![0; arms],
            released: vec![0.0; arms],
            group_mean: vec![None; arms],
            group_count: vec![0; arms],
            last_release: None,
        }
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }

    pub fn own_counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn own_sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn released_means(&self) -> &[f64] {
        &self.released
    }

    pub fn group_means(&self) -> &[Option<f64>] {
        &self.group_mean
    }

    pub fn group_counts(&self) -> &[u64] {
        &self.group_count
    }

    /// Release made during the most recent [`PrivateAgent::private_round`], if any.
    pub fn last_release(&self) -> Option<ReleaseEvent> {
        self.last_release
    }

    /// Records a pull and returns the payload to broadcast this trial.
    pub fn private_round<R: Rng + ?Sized>(
        &mut self,
        arm: usize,
        reward: f64,
        schedule: &IntervalSchedule,
        noise: NoiseMode,
        rng: &mut R,
    ) -> PrivatePayload {
        self.sums[arm] += reward;
        self.counts[arm] += 1;
        self.last_release = None;
        let n = self.counts[arm];
        if schedule.points.get(self.next_release[arm]) == Some(&n) {
            let nf = n as f64;
            let scale = nf.powf(schedule.v / 2.0 - 1.0);
            let noise = match noise {
                NoiseMode::Laplace => laplace_sample(scale, rng),
                NoiseMode::Disabled => 0.0,
            };
            self.released[arm] = self.sums[arm] / nf + noise;
            self.next_release[arm] += 1;
            self.last_release = Some(ReleaseEvent {
                arm,
                count: n,
                noise_scale: scale,
                sensitivity: 1.0 / nf,
            });
        }
        PrivatePayload {
            noisy_means: self.released.clone(),
            counts: self.counts.clone(),
        }
    }

    /// Recomputes group estimates from own raw sums and the newest snapshot
    /// of every origin in `mailbox`.
    pub fn aggregate(&mut self, mailbox: &Mailbox) {
        let mut totals: Vec<f64> = self.sums.clone();
        self.group_count.copy_from_slice(&self.counts);
        for (_, snapshot) in mailbox.latest_snapshots() {
            for (k, (&n, &mean)) in snapshot.counts.iter().zip(&snapshot.noisy_means).enumerate() {
                if n > 0 {
                    self.group_count[k] += n;
                    totals[k] += n as f64 * mean;
                }
            }
        }
        for (k, total) in totals.into_iter().enumerate() {
            let n = self.group_count[k];
            self.group_mean[k] = (n > 0).then(|| total / n as f64);
        }
    }

    /// Arm to pull at trial `t` (1-based).
    pub fn select(&self, t: u64, params: &PrivateParams) -> usize {
        let arms = self.arms();
        if t <= params.warmup(arms) {
            return (t % arms as u64) as usize;
        }
        let ln_t = (t as f64).ln();
        let scores = self
            .group_mean
            .iter()
            .zip(&self.group_count)
            .map(|(mean, &n)| match mean {
                Some(mu) if n > 0 => mu + params.sigma * (2.0 * ln_t / n as f64).sqrt(),
                _ => f64::INFINITY,
            });
        argmax_lowest(scores)
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Upper bound on the privacy loss towards an origin `distance` hops away
/// after `t` trials.
pub fn privacy_loss(epsilon: f64, v: f64, t: u64, distance: u64, delta_prime: f64) -> Result<f64> {
    check_epsilon_v(epsilon, v)?;
    if t <= distance {
        return Err(Error::param("t", format!("need t > d, got t={t}, d={distance}")));
    }
    if !(delta_prime > 0.0 && delta_prime <= 1.0) {
        return Err(Error::param("delta_prime", format!("{delta_prime} outside (0, 1]")));
    }
    let elapsed = (t - distance) as f64;
    let exponent = 1.0 - v / 2.0;
    let composed = epsilon * elapsed.powf(exponent) / exponent;
    let z = zeta(v);
    let advanced = 2.0 * epsilon * z + (2.0 * epsilon * z * (1.0 / delta_prime).ln()).sqrt();
    Ok(composed.min(advanced))
}
