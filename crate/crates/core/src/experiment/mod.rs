//! Configuration-driven experiment runner: seeds replicates, runs the
//! algorithm roster, aggregates regret and checks the bounds.

pub mod config;
pub mod output;

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bandit::{BanditInstance, ContaminationModel};
use crate::byzantine::ByzantineParams;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{
    bound_report, byzantine_upper_bound, group_regret, lower_bound, private_upper_bound, BoundReport, GraphTerms,
};
use crate::network::{write_trace, TraceRecord};
use crate::private::PrivateParams;
use crate::rng::{derive_seed, stream, Domain};
use crate::sim::{simulate, Policy, Scenario};

pub use config::{AlgorithmConfig, AlgorithmKind, ExperimentConfig, GammaSpec, GraphSpec, Mode, SweepSpec};
pub use output::{write_bounds, Axis, BoundRow, ResultRow, ResultTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Graph, instance and byzantine roster of one replicate.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub index: u32,
    pub graph: Graph,
    pub graph_seed: u64,
    pub diameter: u32,
    pub instance: BanditInstance,
    pub byzantine: Vec<bool>,
}

pub fn build_replicate(cfg: &ExperimentConfig, index: u32) -> Result<Replicate> {
    let graph_seed = derive_seed(cfg.seed, index, Domain::Graph);
    let graph = match cfg.graph {
        GraphSpec::ErdosRenyi { p } => Graph::erdos_renyi(cfg.agents, p, graph_seed)?,
        GraphSpec::Complete => Graph::complete(cfg.agents),
        GraphSpec::Path => Graph::path(cfg.agents),
        GraphSpec::Cycle => Graph::cycle(cfg.agents)?,
    };
    let instance = BanditInstance::random(
        cfg.arms,
        cfg.mean_lo,
        cfg.mean_hi,
        cfg.separation,
        derive_seed(cfg.seed, index, Domain::Instance),
    )?
    .with_sigma(cfg.sigma)?;
    let count = (cfg.byzantine_fraction * cfg.agents as f64).round() as usize;
    let mut order: Vec<usize> = (0..cfg.agents).collect();
    order.shuffle(&mut stream(cfg.seed, index, Domain::Misc, 0));
    let mut byzantine = vec![false; cfg.agents];
    for &m in &order[..count] {
        byzantine[m] = true;
    }
    Ok(Replicate {
        index,
        diameter: graph.diameter(),
        graph,
        graph_seed,
        instance,
        byzantine,
    })
}

fn cover_seed(cfg: &ExperimentConfig, replicate: u32) -> u64 {
    derive_seed(cfg.seed, replicate, Domain::CliqueCover)
}

/// Gamma an algorithm uses on a graph of the given diameter, outside sweeps.
pub fn resolve_gamma(cfg: &ExperimentConfig, alg: &AlgorithmConfig, diameter: u32) -> u32 {
    match alg.kind {
        AlgorithmKind::Ucb1 { .. } => 0,
        _ => alg.gamma.unwrap_or(cfg.gamma).resolve(diameter),
    }
}

fn sigma_of(cfg: &ExperimentConfig, alg: &AlgorithmConfig) -> f64 {
    alg.sigma.unwrap_or(cfg.sigma)
}

pub fn policy_for(cfg: &ExperimentConfig, alg: &AlgorithmConfig, rep: &Replicate, gamma: u32) -> Result<Policy> {
    let sigma = sigma_of(cfg, alg);
    Ok(match alg.kind {
        AlgorithmKind::Ucb1 { exploration } => Policy::Ucb1 { exploration },
        AlgorithmKind::PrivateMulti { epsilon, v, noise } => {
            let mut params = PrivateParams::new(epsilon, v, sigma)?;
            params.noise = noise;
            Policy::PrivateMulti { params, gamma }
        }
        AlgorithmKind::ByzantineMulti {
            eps_c,
            corrupt,
            self_corrupt,
        } => {
            let mut params = ByzantineParams::new(eps_c, sigma)?;
            params.self_corrupt = self_corrupt;
            Policy::ByzantineMulti {
                params,
                gamma,
                contamination: ContaminationModel::new(rep.byzantine.clone(), corrupt, cfg.q)?,
            }
        }
    })
}

/// Upper bound of `alg` on `rep`, or the reason it does not apply.
fn upper_bound(
    cfg: &ExperimentConfig,
    alg: &AlgorithmConfig,
    rep: &Replicate,
    terms: &GraphTerms,
) -> Result<(Option<f64>, String)> {
    let instance = rep.instance.clone().with_sigma(sigma_of(cfg, alg))?;
    match alg.kind {
        AlgorithmKind::Ucb1 { .. } => Ok((None, "n/a".into())),
        AlgorithmKind::PrivateMulti { epsilon, .. } => Ok((
            Some(private_upper_bound(
                &instance,
                terms,
                epsilon,
                cfg.horizon,
                cfg.bound_form,
            )?),
            "ok".into(),
        )),
        AlgorithmKind::ByzantineMulti { eps_c, corrupt, .. } => {
            if corrupt > eps_c {
                return Ok((None, format!("corruption rate {corrupt} exceeds eps_c {eps_c}")));
            }
            match byzantine_upper_bound(&instance, terms, eps_c, instance.sigma(), cfg.horizon) {
                Ok(v) => Ok((Some(v), "ok".into())),
                Err(Error::Precondition(msg)) => Ok((None, msg)),
                Err(e) => Err(e),
            }
        }
    }
}

/// Clique-cover terms per gamma, computed once per replicate.
struct TermsCache<'a> {
    cfg: &'a ExperimentConfig,
    rep: &'a Replicate,
    cache: BTreeMap<u32, GraphTerms>,
}

impl<'a> TermsCache<'a> {
    fn new(cfg: &'a ExperimentConfig, rep: &'a Replicate) -> Self {
        TermsCache {
            cfg,
            rep,
            cache: BTreeMap::new(),
        }
    }

    fn get(&mut self, gamma: u32) -> GraphTerms {
        let (cfg, rep) = (self.cfg, self.rep);
        *self
            .cache
            .entry(gamma)
            .or_insert_with(|| GraphTerms::compute(&rep.graph, gamma, cover_seed(cfg, rep.index)))
    }
}

fn scenario<'a>(cfg: &ExperimentConfig, rep: &'a Replicate, trace_trials: u64) -> Scenario<'a> {
    Scenario {
        graph: &rep.graph,
        graph_seed: rep.graph_seed,
        instance: &rep.instance,
        horizon: cfg.horizon,
        master_seed: cfg.seed,
        replicate: rep.index,
        trace_trials,
    }
}

fn bound_row(
    cfg: &ExperimentConfig,
    alg: &AlgorithmConfig,
    rep: &Replicate,
    terms: &GraphTerms,
    regret: f64,
) -> Result<BoundRow> {
    let (upper, precondition) = upper_bound(cfg, alg, rep, terms)?;
    Ok(BoundRow {
        replicate: rep.index,
        algorithm: alg.label.clone(),
        gamma: terms.gamma,
        diameter: rep.diameter,
        cover_size: terms.cover_size,
        horizon: cfg.horizon,
        regret,
        lower: lower_bound(&rep.instance, cfg.horizon),
        upper,
        precondition,
    })
}

/// Trials kept in the regret curve: every `stride`-th plus the horizon.
pub fn sample_points(horizon: u64, stride: u64) -> Vec<u64> {
    let mut points: Vec<u64> = (stride..=horizon).step_by(stride as usize).collect();
    if points.last() != Some(&horizon) {
        points.push(horizon);
    }
    points
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub table: ResultTable,
    pub bounds: Vec<BoundRow>,
    /// Message traces of replicate 0, per algorithm label.
    pub traces: Vec<(String, Vec<TraceRecord>)>,
    /// Largest diameter over the replicates.
    pub max_diameter: u32,
}

struct CurveResult {
    curves: Vec<Vec<f64>>,
    bounds: Vec<BoundRow>,
    traces: Vec<(String, Vec<TraceRecord>)>,
}

fn run_curve_replicate(cfg: &ExperimentConfig, rep: &Replicate, points: &[u64]) -> Result<CurveResult> {
    let trace_trials = if rep.index == 0 { cfg.trace_trials } else { 0 };
    let mut terms = TermsCache::new(cfg, rep);
    let mut out = CurveResult {
        curves: Vec::new(),
        bounds: Vec::new(),
        traces: Vec::new(),
    };
    for alg in &cfg.algorithms {
        let gamma = resolve_gamma(cfg, alg, rep.diameter);
        let policy = policy_for(cfg, alg, rep, gamma)?;
        let outcome = simulate(&scenario(cfg, rep, trace_trials), &alg.label, &policy)?;
        let curve = group_regret(&outcome.record);
        let regret = *curve.last().expect("horizon >= 1");
        out.curves.push(points.iter().map(|&t| curve[t as usize - 1]).collect());
        out.bounds.push(bound_row(cfg, alg, rep, &terms.get(gamma), regret)?);
        if trace_trials > 0 && !matches!(policy, Policy::Ucb1 { .. }) {
            out.traces.push((alg.label.clone(), outcome.trace));
        }
    }
    Ok(out)
}

/// Gammas swept for a roster whose largest replicate diameter is `max_diameter`.
pub fn sweep_gammas(spec: &SweepSpec, max_diameter: u32) -> Vec<u32> {
    match spec {
        SweepSpec::UpToDiameter { start } => (*start..=max_diameter.max(*start)).collect(),
        SweepSpec::List(v) => v.clone(),
    }
}

struct SweepResult {
    /// `[algorithm][gamma index]` regret at the horizon.
    finals: Vec<Vec<f64>>,
    bounds: Vec<BoundRow>,
}

fn run_sweep_replicate(cfg: &ExperimentConfig, rep: &Replicate, gammas: &[u32]) -> Result<SweepResult> {
    let mut terms = TermsCache::new(cfg, rep);
    let mut out = SweepResult {
        finals: Vec::new(),
        bounds: Vec::new(),
    };
    for alg in &cfg.algorithms {
        // Beyond the diameter every message already reaches everyone, so
        // larger gammas reuse the run at the diameter.
        let mut by_gamma: BTreeMap<u32, f64> = BTreeMap::new();
        let mut finals = Vec::with_capacity(gammas.len());
        for &requested in gammas {
            let gamma = match alg.kind {
                AlgorithmKind::Ucb1 { .. } => 0,
                _ => requested.min(rep.diameter),
            };
            let regret = match by_gamma.entry(gamma) {
                Entry::Occupied(e) => *e.get(),
                Entry::Vacant(e) => {
                    let policy = policy_for(cfg, alg, rep, gamma)?;
                    let outcome = simulate(&scenario(cfg, rep, 0), &alg.label, &policy)?;
                    let regret = *group_regret(&outcome.record).last().expect("horizon >= 1");
                    out.bounds.push(bound_row(cfg, alg, rep, &terms.get(gamma), regret)?);
                    *e.insert(regret)
                }
            };
            finals.push(regret);
        }
        out.finals.push(finals);
    }
    Ok(out)
}

pub fn build_replicates(cfg: &ExperimentConfig) -> Result<Vec<Replicate>> {
    (0..cfg.replicates)
        .into_par_iter()
        .map(|r| build_replicate(cfg, r))
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let replicates = build_replicates(cfg)?;
    let max_diameter = replicates.iter().map(|r| r.diameter).max().unwrap_or(0);
    match cfg.mode {
        Mode::Private | Mode::Byzantine => {
            let points = sample_points(cfg.horizon, cfg.stride);
            let results: Vec<CurveResult> = replicates
                .par_iter()
                .map(|rep| run_curve_replicate(cfg, rep, &points))
                .collect::<Result<_>>()?;
            let mut table = ResultTable::new(Axis::Trial);
            let mut values = vec![0.0; results.len()];
            for (a, alg) in cfg.algorithms.iter().enumerate() {
                for (i, &t) in points.iter().enumerate() {
                    for (slot, res) in values.iter_mut().zip(&results) {
                        *slot = res.curves[a][i];
                    }
                    table.rows.push(ResultRow::summarize(&alg.label, t, &values));
                }
            }
            let mut bounds = Vec::new();
            let mut traces = Vec::new();
            for res in results {
                bounds.extend(res.bounds);
                traces.extend(res.traces);
            }
            Ok(ExperimentOutput {
                config: cfg.clone(),
                table,
                bounds,
                traces,
                max_diameter,
            })
        }
        Mode::GammaSweep => {
            let gammas = sweep_gammas(&cfg.sweep, max_diameter);
            let results: Vec<SweepResult> = replicates
                .par_iter()
                .map(|rep| run_sweep_replicate(cfg, rep, &gammas))
                .collect::<Result<_>>()?;
            let mut table = ResultTable::new(Axis::Gamma);
            let mut values = vec![0.0; results.len()];
            for (a, alg) in cfg.algorithms.iter().enumerate() {
                for (i, &gamma) in gammas.iter().enumerate() {
                    for (slot, res) in values.iter_mut().zip(&results) {
                        *slot = res.finals[a][i];
                    }
                    table
                        .rows
                        .push(ResultRow::summarize(&alg.label, u64::from(gamma), &values));
                }
            }
            Ok(ExperimentOutput {
                config: cfg.clone(),
                table,
                bounds: results.into_iter().flat_map(|r| r.bounds).collect(),
                traces: Vec::new(),
                max_diameter,
            })
        }
    }
}

/// Output file of the regret table for a mode.
pub fn panel_file(mode: Mode) -> &'static str {
    match mode {
        Mode::Private => "regret_private.csv",
        Mode::Byzantine => "regret_byzantine.csv",
        Mode::GammaSweep => "regret_vs_gamma.csv",
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical().as_bytes()))
}

pub fn manifest(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config_sha256 = {}", config_hash(cfg));
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "mode = {}", cfg.mode.as_str());
    let _ = writeln!(s, "replicates = {}", cfg.replicates);
    let _ = writeln!(s, "coop_bandit_version = {VERSION}");
    let _ = writeln!(s, "rng = ChaCha8 (rand_chacha 0.9)");
    s
}

/// Writes the panel CSV, `bounds.csv`, `manifest`, the resolved config and
/// any traces into `dir`. Returns the paths written.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut create = |name: String| -> Result<BufWriter<fs::File>> {
        let path = dir.join(name);
        let file = fs::File::create(&path)?;
        written.push(path);
        Ok(BufWriter::new(file))
    };
    out.table.write_csv(create(panel_file(out.config.mode).into())?)?;
    write_bounds(&out.bounds, create("bounds.csv".into())?)?;
    for (label, rows) in &out.traces {
        write_trace(rows, create(format!("trace_{label}.csv"))?)?;
    }
    use std::io::Write;
    create("manifest".into())?.write_all(manifest(&out.config).as_bytes())?;
    create("config.resolved".into())?.write_all(out.config.canonical().as_bytes())?;
    Ok(written)
}

/// Per-algorithm bound report on replicate 0.
#[derive(Debug, Clone)]
pub struct Description {
    pub replicate: Replicate,
    pub gammas: Vec<(String, u32)>,
    pub reports: Vec<(String, BoundReport)>,
    pub text: String,
}

pub fn describe(cfg: &ExperimentConfig) -> Result<Description> {
    cfg.validate()?;
    let rep = build_replicate(cfg, 0)?;
    let mut terms = TermsCache::new(cfg, &rep);
    let mut text = String::new();
    let g = &rep.graph;
    let max_degree = (0..g.node_count()).map(|i| g.degree(i)).max().unwrap_or(0);
    let _ = writeln!(
        text,
        "mode {}: M={} K={} T={} replicates={} seed={}",
        cfg.mode.as_str(),
        cfg.agents,
        cfg.arms,
        cfg.horizon,
        cfg.replicates,
        cfg.seed
    );
    let _ = writeln!(
        text,
        "replicate 0 graph: edges={} diameter={} max_degree={}",
        g.edge_count(),
        rep.diameter,
        max_degree
    );
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    let gaps = rep.instance.gaps();
    let _ = writeln!(text, "means: {}", fmt(rep.instance.means()));
    let _ = writeln!(text, "gaps:  {}", fmt(&gaps.deltas));
    match gaps.delta_min {
        Some(d) => {
            let _ = writeln!(text, "delta_min = {d:.6}");
        }
        None => {
            let _ = writeln!(text, "delta_min = none (all arms optimal)");
        }
    }
    let _ = writeln!(text, "lower bound at T: {:.3}", lower_bound(&rep.instance, cfg.horizon));

    let mut gammas = Vec::new();
    let mut reports = Vec::new();
    for alg in &cfg.algorithms {
        let alg_gammas: Vec<u32> = if cfg.mode == Mode::GammaSweep && !matches!(alg.kind, AlgorithmKind::Ucb1 { .. }) {
            let mut v: Vec<u32> = sweep_gammas(&cfg.sweep, rep.diameter)
                .into_iter()
                .map(|x| x.min(rep.diameter))
                .collect();
            v.dedup();
            v
        } else {
            vec![resolve_gamma(cfg, alg, rep.diameter)]
        };
        for gamma in alg_gammas {
            let t = terms.get(gamma);
            let sigma = sigma_of(cfg, alg);
            let instance = rep.instance.clone().with_sigma(sigma)?;
            let (epsilon, eps_c) = match alg.kind {
                AlgorithmKind::Ucb1 { .. } => (None, None),
                AlgorithmKind::PrivateMulti { epsilon, .. } => (Some(epsilon), None),
                AlgorithmKind::ByzantineMulti { eps_c, .. } => (None, Some(eps_c)),
            };
            let report = bound_report(&instance, t, epsilon, eps_c, sigma, cfg.horizon, cfg.bound_form)?;
            let _ = write!(
                text,
                "algorithm {} gamma={} cover_size={}",
                alg.label, gamma, t.cover_size
            );
            if let Some(u) = report.upper_private {
                let _ = write!(text, " upper_private={u:.3}");
            }
            if eps_c.is_some() {
                match (&report.byzantine_precondition, report.upper_byzantine) {
                    (Ok(()), Some(u)) => {
                        let _ = write!(text, " precondition=ok upper_byzantine={u:.3}");
                    }
                    (Err(msg), _) => {
                        let _ = write!(text, " precondition=FAILED ({msg})");
                    }
                    _ => {}
                }
            }
            text.push('\n');
            gammas.push((alg.label.clone(), gamma));
            reports.push((alg.label.clone(), report));
        }
    }
    Ok(Description {
        replicate: rep,
        gammas,
        reports,
        text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: &str, roster: &str) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            "mode = {mode}\nseed = 3\nagents = 8\narms = 3\nhorizon = 60\nreplicates = 3\ngraph.p = 0.4\n{roster}"
        ))
        .unwrap()
    }

    #[test]
    fn sample_points_include_horizon() {
        assert_eq!(sample_points(10, 4), vec![4, 8, 10]);
        assert_eq!(sample_points(8, 4), vec![4, 8]);
        assert_eq!(sample_points(3, 1), vec![1, 2, 3]);
    }

    #[test]
    fn curve_table_shape() {
        let cfg = small(
            "private",
            "algorithm.u = ucb1\nalgorithm.p = private-multi epsilon=0.5 v=1.1",
        );
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.table.rows.len(), 2 * 60);
        assert_eq!(out.bounds.len(), 2 * 3);
        assert!(out.table.rows.iter().all(|r| r.mean_regret.is_finite()));
        assert!(out
            .bounds
            .iter()
            .filter(|b| b.algorithm == "p")
            .all(|b| b.upper.is_some()));
    }

    #[test]
    fn sweep_table_shape() {
        let cfg = small("gamma-sweep", "algorithm.b = byz-multi eps_c=0");
        let out = run_experiment(&cfg).unwrap();
        let gammas: Vec<u64> = out.table.series("b").map(|r| r.x).collect();
        assert_eq!(gammas, (1..=u64::from(out.max_diameter)).collect::<Vec<_>>());
    }

    #[test]
    fn replicate_zero_is_shared_between_modes() {
        let a = build_replicate(&small("private", "algorithm.u = ucb1"), 0).unwrap();
        let b = build_replicate(&small("byzantine", "algorithm.u = ucb1"), 0).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.instance, b.instance);
    }

    #[test]
    fn byzantine_fraction_counts() {
        let mut cfg = small("byzantine", "algorithm.b = byz-multi eps_c=0.01");
        cfg.byzantine_fraction = 0.5;
        let rep = build_replicate(&cfg, 1).unwrap();
        assert_eq!(rep.byzantine.iter().filter(|&&b| b).count(), 4);
    }

    #[test]
    fn describe_reports_cover_and_precondition() {
        let mut cfg = small("byzantine", "algorithm.b = byz-multi eps_c=0.45");
        cfg.graph = GraphSpec::Complete;
        let d = describe(&cfg).unwrap();
        assert_eq!(d.reports[0].1.terms.cover_size, 1);
        assert!(d.text.contains("precondition=FAILED"));
        assert!(d.text.contains("cover_size=1"));
    }

    #[test]
    fn manifest_hash_tracks_config() {
        let a = small("private", "algorithm.u = ucb1");
        let mut b = a.clone();
        b.seed = 4;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert!(manifest(&a).contains(&format!("config_sha256 = {}", config_hash(&a))));
    }
}
