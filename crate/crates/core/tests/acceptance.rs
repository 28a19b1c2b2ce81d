//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.
//!
//! Criteria 1-4 and 9 run the shipped configs under `configs/`; the rest are
//! self-contained property checks against brute-force oracles.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coop_bandit::experiment::{run_experiment, write_outputs, ExperimentConfig, ExperimentOutput, ResultRow};
use coop_bandit::network::ByzantinePayload;
use coop_bandit::private::NoiseMode;
use coop_bandit::{robust_radius, trimmed_mean, Graph, IntervalSchedule, Network, Payload, PrivateAgent};

const CURVE_BUDGET: Duration = Duration::from_secs(120);
const TRIM_BUDGET: Duration = Duration::from_secs(10);

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> ExperimentConfig {
    let text = fs::read_to_string(config_path(name)).expect("shipped config is readable");
    let cfg = ExperimentConfig::parse(&text).expect("shipped config parses");
    cfg.validate().expect("shipped config is valid");
    cfg
}

struct Run {
    name: &'static str,
    cfg: ExperimentConfig,
    out: ExperimentOutput,
    elapsed: Duration,
}

fn run(name: &'static str) -> Run {
    let cfg = load(name);
    let start = Instant::now();
    let out = run_experiment(&cfg).expect("experiment runs");
    Run {
        name,
        cfg,
        out,
        elapsed: start.elapsed(),
    }
}

fn fmt_row(r: &ResultRow) -> String {
    format!("{:.1} [{:.1}, {:.1}]", r.mean_regret, r.ci_lo, r.ci_hi)
}

fn c1_private_ordering(run: &Run) -> Verdict {
    let t = &run.out.table;
    let (Some(multi), Some(individual), Some(ucb1)) = (
        t.last("private-multi-ucb"),
        t.last("dp-ucb-int-individual"),
        t.last("ucb1-individual"),
    ) else {
        return Verdict::new(false, "roster is missing an algorithm");
    };
    let beats = |other: &ResultRow| multi.mean_regret < other.mean_regret && multi.separated_from(other);
    let pass = beats(individual) && beats(ucb1) && run.elapsed < CURVE_BUDGET;
    Verdict::new(
        pass,
        format!(
            "private-multi {} vs dp-individual {} vs ucb1 {} ({:.1}s)",
            fmt_row(multi),
            fmt_row(individual),
            fmt_row(ucb1),
            run.elapsed.as_secs_f64()
        ),
    )
}

fn c2_byzantine_ordering(run: &Run) -> Verdict {
    let t = &run.out.table;
    let (Some(clean), Some(eps), Some(ucb1)) = (
        t.last("byz-multi-ucb-0"),
        t.last("byz-multi-ucb-0.001"),
        t.last("ucb1-individual"),
    ) else {
        return Verdict::new(false, "roster is missing an algorithm");
    };
    let first = clean.mean_regret <= eps.mean_regret;
    let second = eps.mean_regret < ucb1.mean_regret && eps.separated_from(ucb1);
    Verdict::new(
        first && second && run.elapsed < CURVE_BUDGET,
        format!(
            "eps_c=0 {} <= eps_c=1e-3 {}: {first}; < ucb1 {} with disjoint CIs: {second} ({:.1}s)",
            fmt_row(clean),
            fmt_row(eps),
            fmt_row(ucb1),
            run.elapsed.as_secs_f64()
        ),
    )
}

fn c3_sweep_shape(run: &Run) -> Verdict {
    let t = &run.out.table;
    let mut pass = true;
    let mut notes = Vec::new();
    for alg in t.algorithms() {
        let series: Vec<&ResultRow> = t.series(alg).collect();
        // an increase only counts when the intervals are disjoint
        let rises = series
            .windows(2)
            .filter(|w| w[1].ci_lo > w[0].ci_hi)
            .map(|w| w[1].x)
            .collect::<Vec<_>>();
        let (first, last) = (series[0], series[series.len() - 1]);
        let ratio = last.mean_regret / first.mean_regret;
        let ok = rises.is_empty() && first.x == 1 && ratio < 0.5;
        pass &= ok;
        notes.push(format!(
            "{alg}: gamma 1 -> {} regret {:.1} -> {:.1} (ratio {ratio:.3}), significant rises at {rises:?}",
            last.x, first.mean_regret, last.mean_regret
        ));
    }
    Verdict::new(pass, notes.join("; "))
}

fn c4_bound_containment(runs: &[&Run]) -> Verdict {
    let mut checked = 0;
    let mut violations = Vec::new();
    for run in runs {
        for b in &run.out.bounds {
            match b.contained() {
                Some(true) => checked += 1,
                Some(false) => {
                    checked += 1;
                    violations.push(format!(
                        "{}/{} replicate {} gamma {}: {:.1} > {:.1}",
                        run.name,
                        b.algorithm,
                        b.replicate,
                        b.gamma,
                        b.regret,
                        b.upper.unwrap_or(f64::NAN)
                    ));
                }
                None => {}
            }
        }
    }
    let detail = if violations.is_empty() {
        format!("{checked} bounded runs, no violations")
    } else {
        format!(
            "{} of {checked} bounded runs violate: {}",
            violations.len(),
            violations.join("; ")
        )
    };
    Verdict::new(violations.is_empty() && checked > 0, detail)
}

fn c5_trimmed_mean_coverage() -> Verdict {
    const REPLICATES: usize = 1000;
    const N: usize = 200;
    let (eps_c, delta, sigma, mu) = (0.1, 0.05, 0.5, 0.5);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let radius = robust_radius(sigma, eps_c, delta, N);
    let corrupted = (eps_c * N as f64).round() as usize;
    let mut covered = 0;
    let mut positions: Vec<usize> = (0..N).collect();
    for _ in 0..REPLICATES {
        let mut samples: Vec<f64> = (0..N).map(|_| f64::from(u8::from(rng.random_bool(mu)))).collect();
        positions.shuffle(&mut rng);
        for &i in &positions[..corrupted] {
            samples[i] = 10.0;
        }
        let est = trimmed_mean(&samples, eps_c, delta).expect("valid parameters");
        if (est.mean - mu).abs() <= radius {
            covered += 1;
        }
    }
    let elapsed = start.elapsed();
    let coverage = covered as f64 / REPLICATES as f64;
    Verdict::new(
        coverage >= 0.95 - 0.02 && elapsed < TRIM_BUDGET,
        format!(
            "coverage {coverage:.3} at radius {radius:.4} ({:.2}s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// Release points straight from the defining series: each `W_{n+1}` is found
/// by summing afresh from `W_n + 1`.
fn brute_force_points(epsilon: f64, v: f64, limit: u64) -> Vec<u64> {
    let mut points = Vec::new();
    let mut prev = 0u64;
    'outer: loop {
        let mut x = prev + 1;
        loop {
            if x > limit {
                break 'outer;
            }
            let sum: f64 = (prev + 1..=x).map(|i| 1.0 / (i as f64).powf(v).sqrt()).sum();
            if sum >= 1.0 / (epsilon * (x as f64).powf(v)) {
                points.push(x);
                prev = x;
                continue 'outer;
            }
            x += 1;
        }
    }
    points
}

fn c6_dp_statistics() -> Verdict {
    const REPEATS: usize = 10_000;
    let (epsilon, v) = (1.0, 1.4);
    let schedule = IntervalSchedule::build(epsilon, v, 64).expect("valid schedule");
    if !schedule.points().contains(&16) {
        return Verdict::new(false, "16 is not a release point of the schedule");
    }
    // fixed history of 15 pulls; the 16th pull triggers the release
    let rewards: Vec<f64> = (0..16).map(|i| if i % 3 == 0 { 0.0 } else { 1.0 }).collect();
    let mut base = PrivateAgent::new(1);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for &r in &rewards[..15] {
        base.private_round(0, r, &schedule, NoiseMode::Laplace, &mut rng);
    }
    let empirical = rewards.iter().sum::<f64>() / 16.0;
    let mut released = Vec::with_capacity(REPEATS);
    for _ in 0..REPEATS {
        let mut agent = base.clone();
        agent.private_round(0, rewards[15], &schedule, NoiseMode::Laplace, &mut rng);
        released.push(agent.released_means()[0]);
    }
    let avg = released.iter().sum::<f64>() / REPEATS as f64;
    let mad = released.iter().map(|x| (x - empirical).abs()).sum::<f64>() / REPEATS as f64;
    let scale = 16f64.powf(-0.3);
    let mean_ok = (avg - empirical).abs() <= 0.05 * empirical;
    let mad_ok = (mad - scale).abs() <= 0.05 * scale;

    let mut mismatches = Vec::new();
    for (epsilon, v) in [(0.5, 1.1), (1.0, 1.4), (0.1, 1.25), (0.05, 1.49)] {
        let limit = 10_000;
        let schedule = IntervalSchedule::build(epsilon, v, limit).expect("valid schedule");
        let oracle = brute_force_points(epsilon, v, limit);
        let bad = (1..=limit).find(|&n| schedule.releases_up_to(n) != oracle.partition_point(|&w| w <= n));
        if let Some(n) = bad {
            mismatches.push(format!("eps={epsilon} v={v} first differs at n={n}"));
        }
    }
    Verdict::new(
        mean_ok && mad_ok && mismatches.is_empty(),
        format!(
            "released mean {avg:.4} vs empirical {empirical:.4}; MAD {mad:.4} vs {scale:.4}; release counts {}",
            if mismatches.is_empty() {
                "match".to_string()
            } else {
                mismatches.join(", ")
            }
        ),
    )
}

fn bfs_oracle(n: usize, edges: &[(usize, usize)], src: usize) -> Vec<Option<u32>> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut dist = vec![None; n];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if dist[w].is_none() {
                dist[w] = Some(dist[u].unwrap() + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Random connected graph on `n` nodes with a random edge density.
fn random_connected(n: usize, rng: &mut ChaCha8Rng) -> (Graph, Vec<(usize, usize)>) {
    loop {
        let p = rng.random_range(0.15..0.9);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| rng.random_bool(p))
            .collect();
        if let Ok(g) = Graph::from_edges(n, &edges) {
            return (g, edges);
        }
    }
}

fn c7_protocol_exactness() -> Verdict {
    const PER_SIZE: usize = 200;
    const PUBLISH_TRIALS: u64 = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checks = 0usize;
    let mut failures = Vec::new();
    for n in 2..=8 {
        for _ in 0..PER_SIZE {
            let (g, edges) = random_connected(n, &mut rng);
            let dist: Vec<Vec<Option<u32>>> = (0..n).map(|s| bfs_oracle(n, &edges, s)).collect();
            let diameter = dist.iter().flatten().map(|d| d.unwrap()).max().unwrap();
            for gamma in 0..=diameter + 1 {
                let mut net = Network::new(&g, gamma);
                let horizon = PUBLISH_TRIALS + u64::from(diameter) + 2;
                net.enable_trace(horizon);
                for t in 1..=horizon {
                    if t <= PUBLISH_TRIALS {
                        for a in 0..n {
                            net.publish(
                                a,
                                t,
                                Payload::Byzantine(ByzantinePayload {
                                    arm: a,
                                    reward: t as f64,
                                }),
                            );
                        }
                    }
                    net.step(t);
                }
                let mut first: HashMap<(usize, u64, usize), u64> = HashMap::new();
                for r in net.trace() {
                    let delay = r.trial - r.created_at + 1;
                    first
                        .entry((r.origin, r.created_at, r.receiver))
                        .and_modify(|d| *d = (*d).min(delay))
                        .or_insert(delay);
                }
                for (origin, row) in dist.iter().enumerate() {
                    for receiver in (0..n).filter(|&r| r != origin) {
                        let d = row[receiver].unwrap();
                        for created in 1..=PUBLISH_TRIALS {
                            checks += 1;
                            let got = first.get(&(origin, created, receiver)).copied();
                            let want = (gamma >= d).then_some(u64::from(d));
                            if got != want && failures.len() < 5 {
                                failures.push(format!(
                                    "n={n} gamma={gamma} {origin}->{receiver}: got {got:?}, want {want:?}"
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{checks} (message, receiver) pairs match the BFS oracle")
        } else {
            failures.join("; ")
        },
    )
}

/// Minimum clique cover by dynamic programming over node subsets.
fn min_clique_cover(n: usize, adj: &[u32]) -> usize {
    let full = (1u32 << n) - 1;
    let is_clique: Vec<bool> = (0..=full)
        .map(|s| {
            (0..n)
                .filter(|&i| s >> i & 1 == 1)
                .all(|i| s & !(1 << i) & !adj[i] == 0)
        })
        .collect();
    let mut best = vec![usize::MAX; full as usize + 1];
    best[0] = 0;
    for s in 1..=full {
        // the block holding the lowest remaining node
        let low = s & s.wrapping_neg();
        let rest = s & !low;
        let mut sub = rest;
        loop {
            let block = sub | low;
            if is_clique[block as usize] {
                let prev = best[(s & !block) as usize];
                best[s as usize] = best[s as usize].min(prev + 1);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    best[full as usize]
}

fn adjacency_masks(g: &Graph) -> Vec<u32> {
    (0..g.node_count())
        .map(|i| g.neighbors(i).iter().fold(0u32, |m, &j| m | 1 << j))
        .collect()
}

fn c8_clique_cover() -> Verdict {
    const SAMPLED: usize = 1000;
    let mut graphs = 0usize;
    let mut strict = 0usize;
    let mut failures = Vec::new();
    let mut check = |g: &Graph, failures: &mut Vec<String>| {
        let exact = min_clique_cover(g.node_count(), &adjacency_masks(g));
        for seed in [0, 1] {
            let cover = g.greedy_clique_cover(seed);
            if !cover.is_valid_for(g) || cover.len() < exact {
                failures.push(format!("{:?}: greedy {} exact {exact}", g.to_edge_list(), cover.len()));
            }
            if seed == 0 && cover.len() > exact {
                strict += 1;
            }
        }
        graphs += 1;
    };
    // every labelled connected graph up to 6 nodes
    for n in 1..=6usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for mask in 0u32..1 << pairs.len() {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            if let Ok(g) = Graph::from_edges(n, &edges) {
                check(&g, &mut failures);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 7..=8 {
        for _ in 0..SAMPLED {
            let (g, _) = random_connected(n, &mut rng);
            check(&g, &mut failures);
        }
    }
    for n in 1..=8 {
        let complete = Graph::complete(n).greedy_clique_cover(0).len();
        let path = Graph::path(n).greedy_clique_cover(0).len();
        if complete != 1 {
            failures.push(format!("complete K{n}: greedy {complete}"));
        }
        if path != n.div_ceil(2) {
            failures.push(format!("path P{n}: greedy {path}"));
        }
    }
    Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{graphs} graphs valid and never below the exact minimum; greedy above it on {strict}")
        } else {
            failures.into_iter().take(5).collect::<Vec<_>>().join("; ")
        },
    )
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("output dir exists")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c9_determinism(runs: &[&Run]) -> Verdict {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut notes = Vec::new();
    let mut pass = true;
    for (i, r) in runs.iter().enumerate() {
        let first = tmp.path().join(format!("{i}a"));
        let second = tmp.path().join(format!("{i}b"));
        write_outputs(&r.out, &first).expect("outputs written");
        let again = run_experiment(&r.cfg).expect("experiment runs");
        write_outputs(&again, &second).expect("outputs written");
        let (a, b) = (csv_bytes(&first), csv_bytes(&second));
        let same = !a.is_empty() && a == b;
        pass &= same;
        notes.push(format!(
            "{}: {} CSV files {}",
            r.name,
            a.len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    Verdict::new(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let mut verdicts: Vec<(u8, &str, Verdict)> = Vec::new();
    let private = run("private.cfg");
    let byzantine = run("byzantine.cfg");
    let sweep = run("gamma_sweep.cfg");
    let all = [&private, &byzantine, &sweep];
    verdicts.push((1, "private-setting ordering", c1_private_ordering(&private)));
    verdicts.push((2, "byzantine-setting ordering", c2_byzantine_ordering(&byzantine)));
    verdicts.push((3, "gamma-sweep shape", c3_sweep_shape(&sweep)));
    verdicts.push((4, "bound containment", c4_bound_containment(&all)));
    verdicts.push((5, "trimmed-mean concentration", c5_trimmed_mean_coverage()));
    verdicts.push((6, "DP mechanism statistics", c6_dp_statistics()));
    verdicts.push((7, "protocol exactness", c7_protocol_exactness()));
    verdicts.push((8, "clique-cover oracle", c8_clique_cover()));
    verdicts.push((9, "determinism", c9_determinism(&all)));

    let mut failed = 0;
    for (id, name, v) in &verdicts {
        println!(
            "criterion {id} {}: {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
