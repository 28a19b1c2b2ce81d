//! Cooperative multi-agent stochastic bandits over a communication graph,
//! with differentially private message passing and a contamination-robust
//! estimator for byzantine agents.

pub mod bandit;
pub mod baseline;
pub mod byzantine;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod network;
pub mod private;
pub mod rng;
pub mod sim;

pub use bandit::{BanditInstance, ContaminationModel, CorruptionDist, GapProfile, RewardKind};
pub use byzantine::{robust_estimate, robust_radius, trimmed_mean, ByzantineAgent, ByzantineParams, SampleSet};
pub use error::{Error, Result};
pub use graph::{CliqueCover, DistanceMatrix, Graph};
pub use metrics::{bound_report, group_regret, lower_bound, BoundReport, GraphTerms, PrivateBoundForm, RunRecord};
pub use network::{Mailbox, Message, Network, Payload};
pub use private::{laplace_sample, privacy_loss, zeta, IntervalSchedule, PrivateAgent, PrivateParams};
pub use sim::{simulate, Outcome, Policy, Scenario};
