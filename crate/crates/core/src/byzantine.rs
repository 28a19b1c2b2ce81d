//! Trimmed-mean estimation under Huber contamination and the byzantine-proof
//! multi-agent UCB policy.
//!
//! Samples are split by arrival order: the 1st, 3rd, 5th, ... sample goes to
//! the X half and the 2nd, 4th, ... to the Y half. The shortest interval that
//! holds the target number of consecutive sorted Y points selects which X
//! points are averaged.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use rand::Rng;

use crate::bandit::ContaminationModel;
use crate::error::{Error, Result};
use crate::network::{ByzantinePayload, Mailbox, Payload};
use crate::private::argmax_lowest;

/// Below this many samples an arm is scored by its plain empirical mean.
pub const SMALL_SAMPLE_FLOOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimmedMean {
    pub mean: f64,
    /// X points inside the trimming interval (0 when the median fallback fired).
    pub n_used: usize,
    pub interval: (f64, f64),
    pub n_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustEstimate {
    pub mean: f64,
    pub radius: f64,
    pub n_used: usize,
    pub interval: (f64, f64),
}

fn check_params(eps_c: f64, delta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eps_c) {
        return Err(Error::param("eps_c", format!("{eps_c} outside [0, 1/2)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("{delta} outside (0, 1)")));
    }
    Ok(())
}

/// Number of consecutive Y points the trimming interval must hold, for a
/// half-sample of size `n`. Clamped into `[1, n]`.
pub fn trim_target(n: usize, eps_c: f64, delta: f64) -> usize {
    let nf = n as f64;
    let alpha = eps_c.max((1.0 / delta).ln() / nf);
    let log_term = (4.0 / delta).ln();
    let raw = nf * (1.0 - 2.0 * alpha - (2.0 * alpha * log_term / nf).sqrt() - log_term / nf);
    if raw.is_nan() || raw <= 1.0 {
        1
    } else {
        (raw.ceil() as usize).min(n)
    }
}

/// Trimmed mean of samples given in arrival order.
pub fn trimmed_mean(samples: &[f64], eps_c: f64, delta: f64) -> Result<TrimmedMean> {
    check_params(eps_c, delta)?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if samples.len() == 1 {
        let x = samples[0];
        return Ok(TrimmedMean {
            mean: x,
            n_used: 1,
            interval: (x, x),
            n_total: 1,
        });
    }
    let mut xs: Vec<f64> = samples.iter().copied().step_by(2).collect();
    let mut ys: Vec<f64> = samples.iter().copied().skip(1).step_by(2).collect();
    ys.sort_by(f64::total_cmp);
    let n = ys.len();
    let c = trim_target(n, eps_c, delta);
    let mut best = 0;
    for start in 1..=n - c {
        if ys[start + c - 1] - ys[start] < ys[best + c - 1] - ys[best] {
            best = start;
        }
    }
    let (lo, hi) = (ys[best], ys[best + c - 1]);
    let (sum, used) = xs
        .iter()
        .filter(|&&x| lo <= x && x <= hi)
        .fold((0.0, 0usize), |(s, k), &x| (s + x, k + 1));
    let mean = if used > 0 {
        sum / used as f64
    } else {
        xs.sort_by(f64::total_cmp);
        median_sorted(&xs)
    };
    Ok(TrimmedMean {
        mean,
        n_used: used,
        interval: (lo, hi),
        n_total: samples.len(),
    })
}

fn median_sorted(xs: &[f64]) -> f64 {
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Confidence half-width `sigma * sqrt(eps_c) + sqrt(sigma * ln(1/delta) / n)`.
pub fn robust_radius(sigma: f64, eps_c: f64, delta: f64, n: usize) -> f64 {
    assert!(n >= 1, "radius needs at least one sample");
    sigma * eps_c.sqrt() + (sigma * (1.0 / delta).ln() / n as f64).sqrt()
}

pub fn robust_estimate(samples: &[f64], eps_c: f64, delta: f64, sigma: f64) -> Result<RobustEstimate> {
    let t = trimmed_mean(samples, eps_c, delta)?;
    Ok(RobustEstimate {
        mean: t.mean,
        radius: robust_radius(sigma, eps_c, delta, samples.len()),
        n_used: t.n_used,
        interval: t.interval,
    })
}

type Multiset = BTreeMap<OrderedFloat<f64>, u32>;

/// Streaming sample set of one arm.
///
/// Keeps the X and Y halves as sorted multisets so that the trimmed mean of
/// everything inserted so far costs time proportional to the number of
/// distinct values rather than the number of samples. Provenance dedup is
/// the mailbox's job: the network never offers the same message key twice.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    x_half: Multiset,
    y_half: Multiset,
    len: usize,
    y_len: usize,
    sum: f64,
}

impl SampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, value: f64) {
        let half = if self.len.is_multiple_of(2) {
            &mut self.x_half
        } else {
            self.y_len += 1;
            &mut self.y_half
        };
        *half.entry(OrderedFloat(value)).or_insert(0) += 1;
        self.len += 1;
        self.sum += value;
    }

    pub fn empirical_mean(&self) -> Option<f64> {
        (self.len > 0).then(|| self.sum / self.len as f64)
    }

    /// Same result as [`trimmed_mean`] over the inserted samples in order.
    pub fn trimmed_mean(&self, eps_c: f64, delta: f64) -> Result<TrimmedMean> {
        check_params(eps_c, delta)?;
        match self.len {
            0 => return Err(Error::EmptySamples),
            1 => {
                let x = self.x_half.keys().next().expect("one sample").0;
                return Ok(TrimmedMean {
                    mean: x,
                    n_used: 1,
                    interval: (x, x),
                    n_total: 1,
                });
            }
            _ => {}
        }
        let n = self.y_len;
        let c = trim_target(n, eps_c, delta);
        let (lo, hi) = self.shortest_window(c);
        let (sum, used) = self
            .x_half
            .range(OrderedFloat(lo)..=OrderedFloat(hi))
            .fold((0.0, 0usize), |(s, k), (v, &cnt)| {
                (s + v.0 * cnt as f64, k + cnt as usize)
            });
        let mean = if used > 0 { sum / used as f64 } else { self.x_median() };
        Ok(TrimmedMean {
            mean,
            n_used: used,
            interval: (lo, hi),
            n_total: self.len,
        })
    }

    /// Leftmost shortest interval covering `c` consecutive sorted Y points.
    ///
    /// Only windows starting at the first copy of a distinct value need to be
    /// scanned: a later start with the same low end cannot be narrower.
    fn shortest_window(&self, c: usize) -> (f64, f64) {
        let runs: Vec<(f64, usize)> = self.y_half.iter().map(|(v, &k)| (v.0, k as usize)).collect();
        let mut best: Option<(f64, f64)> = None;
        let mut start = 0usize;
        let mut j = 0usize;
        let mut end_j = runs[0].1;
        for &(lo, count) in &runs {
            if start + c > self.y_len {
                break;
            }
            let last = start + c - 1;
            while end_j <= last {
                j += 1;
                end_j += runs[j].1;
            }
            let hi = runs[j].0;
            if best.is_none_or(|(blo, bhi)| hi - lo < bhi - blo) {
                best = Some((lo, hi));
            }
            start += count;
        }
        best.expect("c <= number of Y points")
    }

    fn x_median(&self) -> f64 {
        let n = self.len - self.y_len;
        let nth = |rank: usize| {
            let mut seen = 0usize;
            for (v, &k) in &self.x_half {
                seen += k as usize;
                if seen > rank {
                    return v.0;
                }
            }
            unreachable!("rank below X size")
        };
        if n % 2 == 1 {
            nth(n / 2)
        } else {
            0.5 * (nth(n / 2 - 1) + nth(n / 2))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ByzantineParams {
    /// Contamination level assumed by the estimator.
    pub eps_c: f64,
    pub sigma: f64,
    /// Also store the corrupted copy in the agent's own sample set.
    pub self_corrupt: bool,
}

impl ByzantineParams {
    pub fn new(eps_c: f64, sigma: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&eps_c) {
            return Err(Error::param("eps_c", format!("{eps_c} outside [0, 1/2)")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", "must be positive and finite"));
        }
        Ok(ByzantineParams {
            eps_c,
            sigma,
            self_corrupt: false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ByzantineAgent {
    id: usize,
    samples: Vec<SampleSet>,
}

impl ByzantineAgent {
    pub fn new(id: usize, arms: usize) -> Self {
        ByzantineAgent {
            id,
            samples: vec![SampleSet::new(); arms],
        }
    }

    pub fn samples(&self, arm: usize) -> &SampleSet {
        &self.samples[arm]
    }

    /// Estimate and confidence score of one arm at trial `t`.
    pub fn score(&self, arm: usize, t: u64, params: &ByzantineParams) -> f64 {
        let set = &self.samples[arm];
        if set.is_empty() {
            return f64::INFINITY;
        }
        let delta = 1.0 / (t as f64 * t as f64);
        let empirical = || set.empirical_mean().expect("non-empty");
        let mean = if set.len() < SMALL_SAMPLE_FLOOR {
            empirical()
        } else {
            // A zero-width interval means the Y half has an atom holding the
            // whole target count; on discrete rewards the trimmed mean then
            // snaps to that atom, so score the arm like a small sample.
            let tm = set.trimmed_mean(params.eps_c, delta).expect("valid parameters");
            if tm.interval.0 == tm.interval.1 {
                empirical()
            } else {
                tm.mean
            }
        };
        mean + robust_radius(params.sigma, params.eps_c, delta, set.len())
    }

    /// Arm to pull at trial `t` (1-based): one forced pull per arm, then the
    /// largest robust upper confidence bound.
    pub fn select(&self, t: u64, params: &ByzantineParams) -> usize {
        let arms = self.samples.len();
        if t <= arms as u64 {
            return (t - 1) as usize;
        }
        argmax_lowest((0..arms).map(|k| self.score(k, t, params)))
    }

    /// Stores the pulled reward and returns the payload to broadcast, which
    /// carries the emission after source corruption.
    pub fn byzantine_round<R: Rng + ?Sized>(
        &mut self,
        arm: usize,
        reward: f64,
        params: &ByzantineParams,
        contamination: &ContaminationModel,
        rng: &mut R,
    ) -> ByzantinePayload {
        let emitted = contamination.corrupt_emission(self.id, reward, rng);
        self.samples[arm].insert(if params.self_corrupt { emitted } else { reward });
        ByzantinePayload { arm, reward: emitted }
    }

    /// Adds every sample accepted by `mailbox` during the last exchange.
    pub fn absorb(&mut self, mailbox: &Mailbox) {
        for msg in mailbox.held() {
            if let Payload::Byzantine(p) = &msg.payload {
                self.samples[p.arm].insert(p.reward);
            }
        }
    }
}
