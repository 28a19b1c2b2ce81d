//! Round-based simulation of one replicate of one algorithm.
//!
//! Every trial runs pull, broadcast, one network exchange, then the update
//! from freshly accepted messages. Rewards come from one stream per
//! (agent, arm) pair, so two algorithms that pull the same arm the same number
//! of times see the same rewards.

use std::sync::Arc;

use crate::bandit::{BanditInstance, ContaminationModel};
use crate::baseline::Ucb1Agent;
use crate::byzantine::{ByzantineAgent, ByzantineParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::RunRecord;
use crate::network::{DeliveryReport, Network, Payload, TraceRecord};
use crate::private::{IntervalSchedule, PrivateAgent, PrivateParams};
use crate::rng::{stream, Domain, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Isolated UCB1 agents; no messages.
    Ucb1 {
        exploration: f64,
    },
    PrivateMulti {
        params: PrivateParams,
        gamma: u32,
    },
    ByzantineMulti {
        params: ByzantineParams,
        gamma: u32,
        contamination: ContaminationModel,
    },
}

impl Policy {
    pub fn gamma(&self) -> u32 {
        match self {
            Policy::Ucb1 { .. } => 0,
            Policy::PrivateMulti { gamma, .. } | Policy::ByzantineMulti { gamma, .. } => *gamma,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Policy::Ucb1 { exploration } => format!("ucb1 exploration={exploration}"),
            Policy::PrivateMulti { params, gamma } => format!(
                "private-multi epsilon={} v={} sigma={} gamma={gamma} noise={:?}",
                params.epsilon, params.v, params.sigma, params.noise
            ),
            Policy::ByzantineMulti {
                params,
                gamma,
                contamination,
            } => format!(
                "byz-multi eps_c={} sigma={} gamma={gamma} corrupt={}",
                params.eps_c,
                params.sigma,
                contamination.epsilon()
            ),
        }
    }
}

/// Shared inputs of one replicate.
#[derive(Debug, Clone, Copy)]
pub struct Scenario<'a> {
    pub graph: &'a Graph,
    pub graph_seed: u64,
    pub instance: &'a BanditInstance,
    pub horizon: u64,
    pub master_seed: u64,
    pub replicate: u32,
    /// Record message deliveries during trials `1..=trace_trials`.
    pub trace_trials: u64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: RunRecord,
    pub trace: Vec<TraceRecord>,
    pub deliveries: DeliveryReport,
    /// Noisy releases made by all agents (private policy only).
    pub releases: u64,
}

struct RewardStreams {
    arms: usize,
    streams: Vec<SimRng>,
}

impl RewardStreams {
    fn new(s: &Scenario) -> Self {
        let arms = s.instance.arms();
        let streams = (0..s.graph.node_count() * arms)
            .map(|i| stream(s.master_seed, s.replicate, Domain::Reward, i as u32))
            .collect();
        RewardStreams { arms, streams }
    }

    fn draw(&mut self, instance: &BanditInstance, agent: usize, arm: usize) -> f64 {
        instance.sample(arm, &mut self.streams[agent * self.arms + arm])
    }
}

fn per_agent(s: &Scenario, domain: Domain) -> Vec<SimRng> {
    (0..s.graph.node_count())
        .map(|m| stream(s.master_seed, s.replicate, domain, m as u32))
        .collect()
}

fn add(total: &mut DeliveryReport, r: DeliveryReport) {
    total.delivered += r.delivered;
    total.duplicates += r.duplicates;
    total.stale += r.stale;
    total.expired += r.expired;
}

pub fn simulate(scenario: &Scenario, label: &str, policy: &Policy) -> Result<Outcome> {
    let agents = scenario.graph.node_count();
    let arms = scenario.instance.arms();
    if scenario.horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    if let Policy::ByzantineMulti { contamination, .. } = policy {
        if contamination.agents() != agents {
            return Err(Error::param("contamination", "agent count differs from the graph"));
        }
    }
    let mut record = RunRecord::new(label, agents, policy.gamma(), scenario.instance.clone());
    record.graph_seed = scenario.graph_seed;
    record.parameters = policy.describe();
    let mut rewards = RewardStreams::new(scenario);
    let mut actions = vec![0usize; agents];
    let mut deliveries = DeliveryReport::default();
    let mut releases = 0u64;
    let mut network = Network::new(scenario.graph, policy.gamma());
    if scenario.trace_trials > 0 {
        network.enable_trace(scenario.trace_trials);
    }

    match policy {
        Policy::Ucb1 { exploration } => {
            let mut players: Vec<Ucb1Agent> = (0..agents).map(|_| Ucb1Agent::new(arms, *exploration)).collect();
            for _ in 1..=scenario.horizon {
                for (m, player) in players.iter_mut().enumerate() {
                    let arm = player.select();
                    player.update(arm, rewards.draw(scenario.instance, m, arm));
                    actions[m] = arm;
                }
                record.push_trial(&actions);
            }
        }
        Policy::PrivateMulti { params, .. } => {
            let schedule = IntervalSchedule::build(params.epsilon, params.v, scenario.horizon)?;
            let mut noise = per_agent(scenario, Domain::PrivacyNoise);
            let mut players: Vec<PrivateAgent> = (0..agents).map(|_| PrivateAgent::new(arms)).collect();
            for t in 1..=scenario.horizon {
                for (m, player) in players.iter_mut().enumerate() {
                    let arm = player.select(t, params);
                    let reward = rewards.draw(scenario.instance, m, arm);
                    let payload = player.private_round(arm, reward, &schedule, params.noise, &mut noise[m]);
                    releases += u64::from(player.last_release().is_some());
                    network.publish(m, t, Payload::Private(Arc::new(payload)));
                    actions[m] = arm;
                }
                record.push_trial(&actions);
                add(&mut deliveries, network.step(t));
                for (m, player) in players.iter_mut().enumerate() {
                    player.aggregate(network.mailbox(m));
                }
            }
        }
        Policy::ByzantineMulti {
            params, contamination, ..
        } => {
            let mut corruption = per_agent(scenario, Domain::Corruption);
            let mut players: Vec<ByzantineAgent> = (0..agents).map(|m| ByzantineAgent::new(m, arms)).collect();
            for t in 1..=scenario.horizon {
                for (m, player) in players.iter_mut().enumerate() {
                    let arm = player.select(t, params);
                    let reward = rewards.draw(scenario.instance, m, arm);
                    let payload = player.byzantine_round(arm, reward, params, contamination, &mut corruption[m]);
                    network.publish(m, t, Payload::Byzantine(payload));
                    actions[m] = arm;
                }
                record.push_trial(&actions);
                add(&mut deliveries, network.step(t));
                for (m, player) in players.iter_mut().enumerate() {
                    player.absorb(network.mailbox(m));
                }
            }
        }
    }

    Ok(Outcome {
        record,
        trace: network.trace().to_vec(),
        deliveries,
        releases,
    })
}
