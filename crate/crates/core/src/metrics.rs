//! Group regret of recorded runs and the closed-form regret bounds.

use crate::bandit::BanditInstance;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::private::zeta;

/// Actions of every agent over a run, trial-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub agents: usize,
    pub horizon: u64,
    pub gamma: u32,
    pub instance: BanditInstance,
    pub graph_seed: u64,
    /// Free-form parameter set, e.g. `epsilon=0.5 v=1.1`.
    pub parameters: String,
    actions: Vec<u32>,
}

impl RunRecord {
    pub fn new(algorithm: impl Into<String>, agents: usize, gamma: u32, instance: BanditInstance) -> Self {
        RunRecord {
            algorithm: algorithm.into(),
            agents,
            horizon: 0,
            gamma,
            instance,
            graph_seed: 0,
            parameters: String::new(),
            actions: Vec::new(),
        }
    }

    /// Appends the actions of trial `horizon + 1`, one per agent.
    pub fn push_trial(&mut self, actions: &[usize]) {
        assert_eq!(actions.len(), self.agents, "one action per agent");
        let arms = self.instance.arms();
        self.actions.extend(actions.iter().map(|&a| {
            assert!(a < arms, "arm {a} out of range");
            a as u32
        }));
        self.horizon += 1;
    }

    /// Arm pulled by `agent` at trial `t` (1-based).
    pub fn action(&self, agent: usize, t: u64) -> usize {
        self.actions[(t as usize - 1) * self.agents + agent] as usize
    }

    pub fn trial(&self, t: u64) -> &[u32] {
        let start = (t as usize - 1) * self.agents;
        &self.actions[start..start + self.agents]
    }

    /// Pull counts per arm over the whole run, all agents pooled.
    pub fn pull_counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.instance.arms()];
        for &a in &self.actions {
            counts[a as usize] += 1;
        }
        counts
    }
}

/// Cumulative pseudo-regret `t * M * mu_star - sum of mu over pulled arms`,
/// entry `t - 1` covering trials `1..=t`.
pub fn group_regret(record: &RunRecord) -> Vec<f64> {
    let gaps = record.instance.gaps().deltas;
    let mut total = 0.0;
    (1..=record.horizon)
        .map(|t| {
            total += record.trial(t).iter().map(|&a| gaps[a as usize]).sum::<f64>();
            total
        })
        .collect()
}

const KL_CLAMP: f64 = 1e-9;

/// KL divergence between Bernoulli(p) and Bernoulli(q), with both clamped
/// into `[1e-9, 1 - 1e-9]`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let p = p.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    let q = q.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

/// Asymptotic lower bound `(sum_k gap_k / KL(mu_star, mu_k)) ln T` for
/// Bernoulli arms.
pub fn lower_bound(instance: &BanditInstance, horizon: u64) -> f64 {
    let best = instance.best_mean();
    let gaps = instance.gaps();
    let constant: f64 = gaps
        .deltas
        .iter()
        .zip(instance.means())
        .filter(|(&d, _)| d > 0.0)
        .map(|(&d, &mu)| d / bernoulli_kl(best, mu))
        .sum();
    constant * (horizon as f64).ln()
}

/// Which leading constant the private bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrivateBoundForm {
    /// `8 ln T / gap`.
    Unit,
    /// `8 sigma^2 ln T / gap`.
    #[default]
    SigmaSquared,
}

/// Graph-dependent ingredients of both upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphTerms {
    pub agents: usize,
    pub gamma: u32,
    /// Size of a clique cover of the power graph of order `gamma`.
    pub cover_size: usize,
}

impl GraphTerms {
    /// Uses the greedy cover of the power graph; `gamma = 0` means no
    /// communication and every agent is its own block.
    pub fn compute(graph: &Graph, gamma: u32, seed: u64) -> Self {
        let cover_size = if gamma == 0 {
            graph.node_count()
        } else {
            let power = graph.distances().power_graph(gamma);
            power.greedy_clique_cover(seed).len()
        };
        GraphTerms {
            agents: graph.node_count(),
            gamma,
            cover_size,
        }
    }
}

fn check_horizon(horizon: u64) -> Result<f64> {
    if horizon < 1 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    Ok(horizon as f64)
}

/// Group-regret upper bound of private multi-agent UCB.
pub fn private_upper_bound(
    instance: &BanditInstance,
    terms: &GraphTerms,
    epsilon: f64,
    horizon: u64,
    form: PrivateBoundForm,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param("epsilon", format!("{epsilon} outside (0, 1]")));
    }
    let ln_t = check_horizon(horizon)?.ln();
    let lead = match form {
        PrivateBoundForm::Unit => 8.0,
        PrivateBoundForm::SigmaSquared => 8.0 * instance.sigma().powi(2),
    };
    let gaps = instance.gaps();
    let chi = terms.cover_size as f64;
    let m = terms.agents as f64;
    let log_part: f64 = gaps
        .deltas
        .iter()
        .filter(|&&d| d > 0.0)
        .map(|d| chi * lead * ln_t / d)
        .sum();
    let constant = gaps.total() * (chi * (m * f64::from(terms.gamma) + 2.0) + m * (1.0 / epsilon + zeta(1.5)));
    Ok(log_part + constant)
}

/// `Delta_min / (2 sigma)`, the contamination level the byzantine bound
/// tolerates. `None` when every arm is optimal.
pub fn contamination_ceiling(instance: &BanditInstance, sigma: f64) -> Option<f64> {
    instance.gaps().delta_min.map(|d| d / (2.0 * sigma))
}

/// Group-regret upper bound of byzantine-proof multi-agent UCB.
///
/// Refuses instances with `eps_c >= Delta_min / (2 sigma)`.
pub fn byzantine_upper_bound(
    instance: &BanditInstance,
    terms: &GraphTerms,
    eps_c: f64,
    sigma: f64,
    horizon: u64,
) -> Result<f64> {
    let ln_t = check_horizon(horizon)?.ln();
    if let Some(ceiling) = contamination_ceiling(instance, sigma) {
        if eps_c >= ceiling {
            return Err(Error::Precondition(format!(
                "eps_c = {eps_c} must be below Delta_min / (2 sigma) = {ceiling} (margin {})",
                ceiling - eps_c
            )));
        }
    }
    let gaps = instance.gaps();
    let bias = 2.0 * sigma * eps_c.sqrt();
    let chi = terms.cover_size as f64;
    let m = terms.agents as f64;
    let sum: f64 = gaps
        .deltas
        .iter()
        .filter(|&&d| d > 0.0)
        .map(|&d| 4.0 * sigma * sigma / (d - bias).powi(2))
        .sum();
    let value = chi * sum * ln_t + (3.0 * m + f64::from(terms.gamma) * chi * (m - 1.0)) * gaps.total();
    if !value.is_finite() {
        return Err(Error::Precondition(format!(
            "a gap equals the estimator bias 2 sigma sqrt(eps_c) = {bias}"
        )));
    }
    Ok(value)
}

/// Lower and upper bounds side by side for one instance and graph.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lower: f64,
    pub upper_private: Option<f64>,
    /// `None` when the contamination precondition fails.
    pub upper_byzantine: Option<f64>,
    pub byzantine_precondition: std::result::Result<(), String>,
    pub terms: GraphTerms,
    pub gaps: Vec<f64>,
    pub epsilon: Option<f64>,
    pub eps_c: Option<f64>,
    pub zeta_1_5: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn bound_report(
    instance: &BanditInstance,
    terms: GraphTerms,
    epsilon: Option<f64>,
    eps_c: Option<f64>,
    sigma: f64,
    horizon: u64,
    form: PrivateBoundForm,
) -> Result<BoundReport> {
    let upper_private = epsilon
        .map(|e| private_upper_bound(instance, &terms, e, horizon, form))
        .transpose()?;
    let (upper_byzantine, byzantine_precondition) = match eps_c {
        Some(e) => match byzantine_upper_bound(instance, &terms, e, sigma, horizon) {
            Ok(v) => (Some(v), Ok(())),
            Err(Error::Precondition(msg)) => (None, Err(msg)),
            Err(other) => return Err(other),
        },
        None => (None, Ok(())),
    };
    Ok(BoundReport {
        lower: lower_bound(instance, horizon),
        upper_private,
        upper_byzantine,
        byzantine_precondition,
        terms,
        gaps: instance.gaps().deltas,
        epsilon,
        eps_c,
        zeta_1_5: zeta(1.5),
    })
}
