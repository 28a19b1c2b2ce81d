//! Plain-text experiment configuration: `key = value` lines, `#` comments,
//! dotted section prefixes. See `docs/config.md` for the grammar.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::bandit::{CorruptionDist, DEFAULT_SEPARATION, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::metrics::PrivateBoundForm;
use crate::private::NoiseMode;

pub const LARGE_SCALE_AGENTS: usize = 200;
pub const LARGE_SCALE_REPLICATES: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Private,
    Byzantine,
    GammaSweep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Private => "private",
            Mode::Byzantine => "byzantine",
            Mode::GammaSweep => "gamma-sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphSpec {
    ErdosRenyi { p: f64 },
    Complete,
    Path,
    Cycle,
}

/// Message lifetime, possibly relative to the drawn graph's diameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSpec {
    Fixed(u32),
    /// `ceil(diameter / 2)`.
    HalfDiameter,
    Diameter,
}

impl GammaSpec {
    pub fn resolve(self, diameter: u32) -> u32 {
        match self {
            GammaSpec::Fixed(g) => g,
            GammaSpec::HalfDiameter => diameter.div_ceil(2),
            GammaSpec::Diameter => diameter,
        }
    }
}

impl std::fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaSpec::Fixed(g) => write!(f, "{g}"),
            GammaSpec::HalfDiameter => f.write_str("diameter/2"),
            GammaSpec::Diameter => f.write_str("diameter"),
        }
    }
}

/// Sweep points: `1..diameter` or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepSpec {
    UpToDiameter { start: u32 },
    List(Vec<u32>),
}

impl std::fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepSpec::UpToDiameter { start } => write!(f, "{start}..diameter"),
            SweepSpec::List(v) => {
                let parts: Vec<String> = v.iter().map(u32::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmKind {
    Ucb1 {
        exploration: f64,
    },
    PrivateMulti {
        epsilon: f64,
        v: f64,
        noise: NoiseMode,
    },
    ByzantineMulti {
        eps_c: f64,
        /// Corruption rate of the environment; defaults to `eps_c`.
        corrupt: f64,
        self_corrupt: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub label: String,
    pub kind: AlgorithmKind,
    /// Overrides the experiment-wide `gamma`.
    pub gamma: Option<GammaSpec>,
    /// Overrides `instance.sigma` in the confidence bonus.
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub agents: usize,
    pub arms: usize,
    pub horizon: u64,
    pub replicates: u32,
    pub graph: GraphSpec,
    pub gamma: GammaSpec,
    pub sweep: SweepSpec,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub separation: f64,
    pub sigma: f64,
    pub q: CorruptionDist,
    pub byzantine_fraction: f64,
    pub bound_form: PrivateBoundForm,
    pub output_dir: Option<PathBuf>,
    pub trace_trials: u64,
    /// Keep every `stride`-th trial of the regret curve (plus the last).
    pub stride: u64,
    pub algorithms: Vec<AlgorithmConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Private,
            seed: 0,
            agents: 50,
            arms: 5,
            horizon: 5000,
            replicates: 20,
            graph: GraphSpec::ErdosRenyi { p: 0.1 },
            gamma: GammaSpec::HalfDiameter,
            sweep: SweepSpec::UpToDiameter { start: 1 },
            mean_lo: 0.0,
            mean_hi: 1.0,
            separation: DEFAULT_SEPARATION,
            sigma: DEFAULT_SIGMA,
            q: CorruptionDist::default(),
            byzantine_fraction: 1.0,
            bound_form: PrivateBoundForm::SigmaSquared,
            output_dir: None,
            trace_trials: 0,
            stride: 1,
            algorithms: Vec::new(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_gamma(key: &str, value: &str) -> Result<GammaSpec> {
    match value {
        "diameter/2" => Ok(GammaSpec::HalfDiameter),
        "diameter" => Ok(GammaSpec::Diameter),
        v => parse_num(key, v).map(GammaSpec::Fixed),
    }
}

fn parse_sweep(key: &str, value: &str) -> Result<SweepSpec> {
    if let Some(start) = value.strip_suffix("..diameter") {
        let start: u32 = parse_num(key, start.trim())?;
        if start == 0 {
            return Err(Error::config(key, "sweep must start at gamma >= 1"));
        }
        return Ok(SweepSpec::UpToDiameter { start });
    }
    let list = value
        .split(',')
        .map(|s| parse_num::<u32>(key, s.trim()))
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() || list.contains(&0) {
        return Err(Error::config(key, "sweep values must be positive"));
    }
    Ok(SweepSpec::List(list))
}

fn parse_q(key: &str, value: &str) -> Result<CorruptionDist> {
    let inner = |prefix: &str| value.strip_prefix(prefix).and_then(|v| v.strip_suffix(')'));
    if let Some(args) = inner("uniform(") {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Error::config(key, "uniform takes two bounds"));
        }
        let (lo, hi): (f64, f64) = (parse_num(key, parts[0])?, parse_num(key, parts[1])?);
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::config(key, "uniform needs lo <= hi"));
        }
        return Ok(CorruptionDist::Uniform { lo, hi });
    }
    if let Some(arg) = inner("point(") {
        return Ok(CorruptionDist::PointMass(parse_num(key, arg.trim())?));
    }
    Err(Error::config(
        key,
        format!("expected uniform(lo,hi) or point(x), got `{value}`"),
    ))
}

fn format_q(q: CorruptionDist) -> String {
    match q {
        CorruptionDist::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
        CorruptionDist::PointMass(x) => format!("point({x})"),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{value}`"))),
    }
}

fn parse_algorithm(key: &str, label: &str, value: &str) -> Result<AlgorithmConfig> {
    let mut words = value.split_whitespace();
    let kind_name = words
        .next()
        .ok_or_else(|| Error::config(key, "missing algorithm kind"))?;
    let mut options: Vec<(String, &str)> = Vec::new();
    for word in words {
        let (k, v) = word
            .split_once('=')
            .ok_or_else(|| Error::config(key, format!("expected name=value, got `{word}`")))?;
        if options.iter().any(|(seen, _)| seen == k) {
            return Err(Error::config(format!("{key}.{k}"), "given twice"));
        }
        options.push((k.to_string(), v));
    }
    let take = |name: &str| options.iter().find(|(k, _)| k == name).map(|(_, v)| *v);
    let sub = |name: &str| format!("{key}.{name}");
    let allowed: &[&str] = match kind_name {
        "ucb1" => &["exploration"],
        "private-multi" => &["epsilon", "v", "gamma", "sigma", "noise"],
        "byz-multi" => &["eps_c", "corrupt", "self_corrupt", "gamma", "sigma"],
        other => {
            return Err(Error::config(
                key,
                format!("unknown algorithm `{other}` (expected ucb1, private-multi or byz-multi)"),
            ))
        }
    };
    if let Some((k, _)) = options.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::config(sub(k), format!("not an option of {kind_name}")));
    }
    let kind = match kind_name {
        "ucb1" => AlgorithmKind::Ucb1 {
            exploration: take("exploration").map_or(Ok(1.0), |v| parse_num(&sub("exploration"), v))?,
        },
        "private-multi" => {
            let epsilon: f64 = take("epsilon").map_or(Ok(0.5), |v| parse_num(&sub("epsilon"), v))?;
            if !(epsilon > 0.0 && epsilon <= 1.0) {
                return Err(Error::config(sub("epsilon"), "must lie in (0, 1]"));
            }
            let v: f64 = take("v").map_or(Ok(1.1), |x| parse_num(&sub("v"), x))?;
            if !(v > 1.0 && v < 1.5) {
                return Err(Error::config(sub("v"), "must lie in (1, 1.5)"));
            }
            let noise = match take("noise") {
                None | Some("laplace") => NoiseMode::Laplace,
                Some("off") => NoiseMode::Disabled,
                Some(other) => {
                    return Err(Error::config(
                        sub("noise"),
                        format!("expected laplace or off, got `{other}`"),
                    ))
                }
            };
            AlgorithmKind::PrivateMulti { epsilon, v, noise }
        }
        _ => {
            let eps_c: f64 = take("eps_c").map_or(Ok(0.0), |v| parse_num(&sub("eps_c"), v))?;
            if !(0.0..0.5).contains(&eps_c) {
                return Err(Error::config(sub("eps_c"), "must lie in [0, 0.5)"));
            }
            let corrupt: f64 = take("corrupt").map_or(Ok(eps_c), |v| parse_num(&sub("corrupt"), v))?;
            if !(0.0..0.5).contains(&corrupt) {
                return Err(Error::config(sub("corrupt"), "must lie in [0, 0.5)"));
            }
            let self_corrupt = take("self_corrupt").map_or(Ok(false), |v| parse_bool(&sub("self_corrupt"), v))?;
            AlgorithmKind::ByzantineMulti {
                eps_c,
                corrupt,
                self_corrupt,
            }
        }
    };
    let gamma = take("gamma").map(|v| parse_gamma(&sub("gamma"), v)).transpose()?;
    let sigma = take("sigma").map(|v| parse_num::<f64>(&sub("sigma"), v)).transpose()?;
    if sigma.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::config(sub("sigma"), "must be positive"));
    }
    Ok(AlgorithmConfig {
        label: label.to_string(),
        kind,
        gamma,
        sigma,
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: index + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(Error::Parse {
                    line: index + 1,
                    reason: "empty key".into(),
                });
            }
            if seen.iter().any(|k| k == key) {
                return Err(Error::config(key, "given twice"));
            }
            seen.push(key.to_string());
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => {
                self.mode = match value {
                    "private" => Mode::Private,
                    "byzantine" => Mode::Byzantine,
                    "gamma-sweep" => Mode::GammaSweep,
                    _ => return Err(Error::config(key, "expected private, byzantine or gamma-sweep")),
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "agents" => self.agents = parse_num(key, value)?,
            "arms" => self.arms = parse_num(key, value)?,
            "horizon" => self.horizon = parse_num(key, value)?,
            "replicates" => self.replicates = parse_num(key, value)?,
            "graph.kind" => {
                self.graph = match value {
                    "erdos-renyi" => match self.graph {
                        g @ GraphSpec::ErdosRenyi { .. } => g,
                        _ => GraphSpec::ErdosRenyi { p: 0.1 },
                    },
                    "complete" => GraphSpec::Complete,
                    "path" => GraphSpec::Path,
                    "cycle" => GraphSpec::Cycle,
                    _ => return Err(Error::config(key, "expected erdos-renyi, complete, path or cycle")),
                }
            }
            "graph.p" => {
                let p: f64 = parse_num(key, value)?;
                match &mut self.graph {
                    GraphSpec::ErdosRenyi { p: slot } => *slot = p,
                    _ => return Err(Error::config(key, "only valid for graph.kind = erdos-renyi")),
                }
            }
            "gamma" => self.gamma = parse_gamma(key, value)?,
            "sweep.gammas" => self.sweep = parse_sweep(key, value)?,
            "instance.mean_lo" => self.mean_lo = parse_num(key, value)?,
            "instance.mean_hi" => self.mean_hi = parse_num(key, value)?,
            "instance.separation" => self.separation = parse_num(key, value)?,
            "instance.sigma" => self.sigma = parse_num(key, value)?,
            "contamination.q" => self.q = parse_q(key, value)?,
            "contamination.byzantine_fraction" => self.byzantine_fraction = parse_num(key, value)?,
            "bounds.form" => {
                self.bound_form = match value {
                    "sigma2" => PrivateBoundForm::SigmaSquared,
                    "unit" => PrivateBoundForm::Unit,
                    _ => return Err(Error::config(key, "expected sigma2 or unit")),
                }
            }
            "output.dir" => self.output_dir = Some(PathBuf::from(value)),
            "output.trace_trials" => self.trace_trials = parse_num(key, value)?,
            "output.stride" => self.stride = parse_num(key, value)?,
            _ => {
                if let Some(label) = key.strip_prefix("algorithm.") {
                    if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.()".contains(c)) {
                        return Err(Error::config(key, "labels use letters, digits, - _ . ( )"));
                    }
                    self.algorithms.push(parse_algorithm(key, label, value)?);
                } else {
                    return Err(Error::config(key, "unknown key"));
                }
            }
        }
        Ok(())
    }

    /// Checks cross-field invariants. Called by [`ExperimentConfig::parse`];
    /// call again after changing fields programmatically.
    pub fn validate(&self) -> Result<()> {
        if self.agents < 2 {
            return Err(Error::config("agents", "need at least 2 agents"));
        }
        if self.arms < 2 {
            return Err(Error::config("arms", "need at least 2 arms"));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.replicates < 1 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.stride < 1 {
            return Err(Error::config("output.stride", "must be at least 1"));
        }
        if let GraphSpec::ErdosRenyi { p } = self.graph {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::config("graph.p", "must lie in (0, 1]"));
            }
        }
        if matches!(self.graph, GraphSpec::Cycle) && self.agents < 3 {
            return Err(Error::config("graph.kind", "a cycle needs at least 3 agents"));
        }
        if !(0.0 <= self.mean_lo && self.mean_lo < self.mean_hi && self.mean_hi <= 1.0) {
            return Err(Error::config("instance.mean_lo", "need 0 <= mean_lo < mean_hi <= 1"));
        }
        if self.separation.is_nan() || self.separation < 0.0 {
            return Err(Error::config("instance.separation", "must be non-negative"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("instance.sigma", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.byzantine_fraction) {
            return Err(Error::config("contamination.byzantine_fraction", "must lie in [0, 1]"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithm", "roster is empty"));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            let key = format!("algorithm.{}", a.label);
            if self.algorithms[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::config(key, "label used twice"));
            }
            if let AlgorithmKind::PrivateMulti { epsilon, .. } = a.kind {
                let warmup = self.arms as u64 * (1.0 / epsilon).ceil() as u64;
                if self.horizon < warmup {
                    return Err(Error::config(
                        "horizon",
                        format!("must be at least K * ceil(1/epsilon) = {warmup} for {}", a.label),
                    ));
                }
            }
            if self.mode == Mode::GammaSweep && a.gamma.is_some() {
                return Err(Error::config(
                    format!("{key}.gamma"),
                    "gamma is swept in gamma-sweep mode",
                ));
            }
        }
        Ok(())
    }

    /// Applies the large-scale preset: 200 agents, 100 replicates.
    pub fn apply_large_scale(&mut self) {
        self.agents = LARGE_SCALE_AGENTS;
        self.replicates = LARGE_SCALE_REPLICATES;
    }

    /// Every setting with defaults filled in, one `key = value` per line in a
    /// fixed order. Parsing the result gives back an equal config.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("mode", self.mode.as_str().into());
        line("seed", self.seed.to_string());
        line("agents", self.agents.to_string());
        line("arms", self.arms.to_string());
        line("horizon", self.horizon.to_string());
        line("replicates", self.replicates.to_string());
        match self.graph {
            GraphSpec::ErdosRenyi { p } => {
                line("graph.kind", "erdos-renyi".into());
                line("graph.p", p.to_string());
            }
            GraphSpec::Complete => line("graph.kind", "complete".into()),
            GraphSpec::Path => line("graph.kind", "path".into()),
            GraphSpec::Cycle => line("graph.kind", "cycle".into()),
        }
        line("gamma", self.gamma.to_string());
        line("sweep.gammas", self.sweep.to_string());
        line("instance.mean_lo", self.mean_lo.to_string());
        line("instance.mean_hi", self.mean_hi.to_string());
        line("instance.separation", self.separation.to_string());
        line("instance.sigma", self.sigma.to_string());
        line("contamination.q", format_q(self.q));
        line("contamination.byzantine_fraction", self.byzantine_fraction.to_string());
        line(
            "bounds.form",
            match self.bound_form {
                PrivateBoundForm::SigmaSquared => "sigma2",
                PrivateBoundForm::Unit => "unit",
            }
            .into(),
        );
        if let Some(dir) = &self.output_dir {
            line("output.dir", dir.display().to_string());
        }
        line("output.trace_trials", self.trace_trials.to_string());
        line("output.stride", self.stride.to_string());
        for a in &self.algorithms {
            let mut v = match &a.kind {
                AlgorithmKind::Ucb1 { exploration } => format!("ucb1 exploration={exploration}"),
                AlgorithmKind::PrivateMulti { epsilon, v, noise } => {
                    let noise = if *noise == NoiseMode::Disabled {
                        "off"
                    } else {
                        "laplace"
                    };
                    format!("private-multi epsilon={epsilon} v={v} noise={noise}")
                }
                AlgorithmKind::ByzantineMulti {
                    eps_c,
                    corrupt,
                    self_corrupt,
                } => format!("byz-multi eps_c={eps_c} corrupt={corrupt} self_corrupt={self_corrupt}"),
            };
            if let Some(g) = a.gamma {
                let _ = write!(v, " gamma={g}");
            }
            if let Some(sigma) = a.sigma {
                let _ = write!(v, " sigma={sigma}");
            }
            line(&format!("algorithm.{}", a.label), v);
        }
        s
    }
}
