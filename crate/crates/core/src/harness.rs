//! Adversaries, regret accounting and multi-seed experiments.

use std::io::{BufRead, Write};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{
    bandit_round, configure_bandit, general_schedule, BanditConfig, BanditSetup, RoundOptions, ScheduleKind,
};
use crate::design::DEFAULT_DESIGN_TOL;
use crate::error::{Error, Result};
use crate::fullinfo::{cg_round, full_info_bound, full_info_eta, full_info_round, ActionSet, CgConfig, CgState};
use crate::kernel::{feature_map, kernel_eval, loss_eval, AdversaryAction, KernelKind, KernelSpec, Point};
use crate::proxy::{build_proxy, fit_profile, DecayFamily, DiscreteMeasure};
use crate::rng::{fnv1a64_extend, fnv1a64, StreamRng};
use crate::weights::WeightState;

pub const TRACE_HEADER: &str = "round,action_index,loss,cum_loss,cum_regret";
const DEFAULT_SEED_COUNT: usize = 20;
const DEFAULT_PROXY_SAMPLES: usize = 200;

/// How an i.i.d. adversary draws each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryDistribution {
    /// Uniform direction in the explicit feature space, norm `G`.
    UnitFeature,
    /// `Phi(y)` with `y` uniform over `points`.
    RankOne { points: Vec<Point> },
    /// Uniform choice from a fixed list.
    Choice { actions: Vec<AdversaryAction> },
}

/// An oblivious adversary. [`Adversary::materialize`] fixes the whole
/// schedule before play starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    Fixed { w: AdversaryAction },
    IidRandom { distribution: AdversaryDistribution, seed: u64 },
    Periodic { actions: Vec<AdversaryAction> },
    Schedule { actions: Vec<AdversaryAction> },
}

impl Adversary {
    /// `w_1, ..., w_n`, each validated against `kernel`.
    pub fn materialize(&self, kernel: &KernelSpec, input_dim: usize, n: usize) -> Result<Vec<AdversaryAction>> {
        let schedule = match self {
            Adversary::Fixed { w } => vec![w.clone(); n],
            Adversary::Periodic { actions } => {
                if actions.is_empty() {
                    return Err(Error::Input("periodic adversary needs at least one action".into()));
                }
                (0..n).map(|t| actions[t % actions.len()].clone()).collect()
            }
            Adversary::Schedule { actions } => {
                if actions.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: actions.len() });
                }
                actions.clone()
            }
            Adversary::IidRandom { distribution, seed } => {
                let mut rng = StreamRng::new(*seed, "adversary");
                match distribution {
                    AdversaryDistribution::UnitFeature => {
                        let dim = kernel.feature_dim(input_dim)?;
                        (0..n)
                            .map(|_| {
                                let w = rng.unit_vector(dim).into_iter().map(|x| x * kernel.norm_bound).collect();
                                AdversaryAction::ExplicitVector { w }
                            })
                            .collect()
                    }
                    AdversaryDistribution::RankOne { points } => {
                        if points.is_empty() {
                            return Err(Error::Input("rank-one adversary needs points".into()));
                        }
                        let uniform = vec![1.0; points.len()];
                        (0..n).map(|_| AdversaryAction::RankOne { y: points[rng.sample_index(&uniform)].clone() }).collect()
                    }
                    AdversaryDistribution::Choice { actions } => {
                        if actions.is_empty() {
                            return Err(Error::Input("choice adversary needs actions".into()));
                        }
                        let uniform = vec![1.0; actions.len()];
                        (0..n).map(|_| actions[rng.sample_index(&uniform)].clone()).collect()
                    }
                }
            }
        };
        for w in &schedule {
            validate_adversary(kernel, input_dim, w)?;
        }
        Ok(schedule)
    }
}

fn validate_adversary(kernel: &KernelSpec, input_dim: usize, w: &AdversaryAction) -> Result<()> {
    match w {
        AdversaryAction::ExplicitVector { w } => AdversaryAction::explicit(kernel, input_dim, w.clone()).map(|_| ()),
        AdversaryAction::RankOne { y } => {
            if y.dim() != input_dim {
                return Err(Error::DimensionMismatch { expected: input_dim, got: y.dim() });
            }
            AdversaryAction::rank_one(kernel, y.clone()).map(|_| ())
        }
    }
}

/// FNV-1a over the bit patterns of a schedule.
pub fn schedule_hash(schedule: &[AdversaryAction]) -> u64 {
    let mut h = fnv1a64(b"schedule");
    for w in schedule {
        let (tag, coords) = match w {
            AdversaryAction::ExplicitVector { w } => (0u8, w.as_slice()),
            AdversaryAction::RankOne { y } => (1u8, y.coords()),
        };
        h = fnv1a64_extend(h, &[tag]);
        h = fnv1a64_extend(h, &(coords.len() as u64).to_le_bytes());
        for c in coords {
            h = fnv1a64_extend(h, &c.to_bits().to_le_bytes());
        }
    }
    h
}

/// `losses[t][a]` for every round and action.
pub fn loss_table(kernel: &KernelSpec, actions: &[Point], schedule: &[AdversaryAction]) -> Result<Vec<Vec<f64>>> {
    schedule.iter().map(|w| actions.iter().map(|a| loss_eval(kernel, a, w)).collect()).collect()
}

/// Best fixed action over the whole schedule; lowest index wins ties.
pub fn best_in_hindsight(kernel: &KernelSpec, actions: &[Point], schedule: &[AdversaryAction]) -> Result<(usize, f64)> {
    if actions.is_empty() {
        return Err(Error::Input("empty action set".into()));
    }
    Ok(best_from_table(&loss_table(kernel, actions, schedule)?, actions.len()))
}

fn best_from_table(table: &[Vec<f64>], num_actions: usize) -> (usize, f64) {
    let mut totals = vec![0.0; num_actions];
    for row in table {
        for (t, l) in totals.iter_mut().zip(row) {
            *t += l;
        }
    }
    let mut best = (0, totals[0]);
    for (i, &v) in totals.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// 1-based.
    pub round: usize,
    pub action_index: usize,
    pub loss: f64,
    pub cum_loss: f64,
    /// Cumulative loss minus the best action's partial sum, where the best
    /// action is chosen at the horizon.
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub rows: Vec<TraceRow>,
    pub best_action: usize,
    pub best_fixed_cum_loss: f64,
}

impl RegretTrace {
    /// Assemble a trace from the player's choices and the loss table.
    pub fn from_play(played: &[usize], table: &[Vec<f64>]) -> Result<Self> {
        if played.len() != table.len() || table.is_empty() {
            return Err(Error::DimensionMismatch { expected: table.len(), got: played.len() });
        }
        let (best_action, best_fixed_cum_loss) = best_from_table(table, table[0].len());
        let mut rows = Vec::with_capacity(played.len());
        let (mut cum, mut best_partial) = (0.0, 0.0);
        for (t, (&a, row)) in played.iter().zip(table).enumerate() {
            cum += row[a];
            best_partial += row[best_action];
            rows.push(TraceRow { round: t + 1, action_index: a, loss: row[a], cum_loss: cum, cum_regret: cum - best_partial });
        }
        Ok(Self { rows, best_action, best_fixed_cum_loss })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn cum_loss(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_loss)
    }

    pub fn final_regret(&self) -> f64 {
        self.cum_loss() - self.best_fixed_cum_loss
    }
}

/// Write a trace as CSV. The best action follows the rows as a `#` line.
pub fn emit_trace<W: Write>(trace: &RegretTrace, mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in &trace.rows {
        writeln!(out, "{},{},{:.16e},{:.16e},{:.16e}", r.round, r.action_index, r.loss, r.cum_loss, r.cum_regret)?;
    }
    writeln!(out, "# best_action={},best_fixed_cum_loss={:.16e}", trace.best_action, trace.best_fixed_cum_loss)?;
    Ok(())
}

pub fn parse_trace<R: BufRead>(input: R) -> Result<RegretTrace> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim_end) != Some(TRACE_HEADER) {
        return Err(Error::Parse("missing trace header".into()));
    }
    let mut rows = Vec::new();
    let mut best = None;
    for line in lines {
        let line = line?;
        if let Some(rest) = line.strip_prefix("# ") {
            let mut action = None;
            let mut loss = None;
            for kv in rest.split(',') {
                match kv.split_once('=') {
                    Some(("best_action", v)) => action = Some(parse_num::<usize>(v)?),
                    Some(("best_fixed_cum_loss", v)) => loss = Some(parse_num::<f64>(v)?),
                    _ => return Err(Error::Parse(format!("unknown trace footer field {kv:?}"))),
                }
            }
            match (action, loss) {
                (Some(a), Some(l)) => best = Some((a, l)),
                _ => return Err(Error::Parse("incomplete trace footer".into())),
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::Parse(format!("expected 5 fields, got {}", f.len())));
        }
        rows.push(TraceRow {
            round: parse_num(f[0])?,
            action_index: parse_num(f[1])?,
            loss: parse_num(f[2])?,
            cum_loss: parse_num(f[3])?,
            cum_regret: parse_num(f[4])?,
        });
    }
    let (best_action, best_fixed_cum_loss) = best.ok_or_else(|| Error::Parse("missing trace footer".into()))?;
    Ok(RegretTrace { rows, best_action, best_fixed_cum_loss })
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

/// Per-round algorithm diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

/// Diagnostics CSV with each `header_lines` entry echoed as a `#` line.
pub fn write_diagnostics<W: Write>(diag: &Diagnostics, header_lines: &[String], mut out: W) -> Result<()> {
    for h in header_lines {
        writeln!(out, "# {h}")?;
    }
    writeln!(out, "round,{}", diag.columns.join(","))?;
    for (t, row) in diag.rows.iter().enumerate() {
        write!(out, "{}", t + 1)?;
        for v in row {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BanditEw,
    FullinfoEw,
    Cg,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandit_ew" => Ok(Algorithm::BanditEw),
            "fullinfo_ew" => Ok(Algorithm::FullinfoEw),
            "cg" => Ok(Algorithm::Cg),
            _ => Err(Error::Input(format!("unknown algorithm {s:?}; expected bandit_ew, fullinfo_ew or cg"))),
        }
    }
}

/// `linear`, `quadratic`, `gaussian:SIGMA` or `poly:DEGREE:OFFSET`.
pub fn parse_kernel_kind(s: &str) -> Result<KernelKind> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Input(format!("bad kernel parameter {v:?}")));
    match parts.as_slice() {
        ["linear"] => Ok(KernelKind::Linear),
        ["quadratic"] => Ok(KernelKind::Quadratic),
        ["gaussian", sigma] => Ok(KernelKind::Gaussian { sigma: num(sigma)? }),
        ["poly", degree, offset] => Ok(KernelKind::Polynomial {
            degree: degree.parse().map_err(|_| Error::Input(format!("bad degree {degree:?}")))?,
            offset: num(offset)?,
        }),
        _ => Err(Error::Input(format!("unknown kernel {s:?}"))),
    }
}

/// Action set description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionsSpec {
    /// `ball:K` (sphere discretization), `random:K` (random unit vectors)
    /// or a CSV path, optionally prefixed `file:`.
    Named(String),
    Inline(Vec<Vec<f64>>),
}

/// A finite action set with its covering radius over the unit sphere,
/// when it came from a discretization.
#[derive(Debug, Clone)]
pub struct ResolvedActions {
    pub points: Vec<Point>,
    pub covering_radius: Option<f64>,
}

/// Resolve an [`ActionsSpec`]. `seed` drives the random constructions.
pub fn resolve_actions(spec: &ActionsSpec, dim: usize, seed: u64) -> Result<ResolvedActions> {
    let points = match spec {
        ActionsSpec::Inline(rows) => rows.iter().map(|r| Point::new(r.clone())).collect::<Result<Vec<_>>>()?,
        ActionsSpec::Named(s) => {
            if let Some(k) = s.strip_prefix("ball:") {
                let k: usize = parse_count(k)?;
                let points = sphere_discretization(dim, k, seed)?;
                let radius = covering_radius(&points, dim, seed);
                return Ok(ResolvedActions { points, covering_radius: Some(radius) });
            } else if let Some(k) = s.strip_prefix("random:") {
                let k: usize = parse_count(k)?;
                if dim == 0 {
                    return Err(Error::Input("dimension must be positive".into()));
                }
                let mut rng = StreamRng::new(seed, "actions");
                (0..k).map(|_| Point::from(DVector::from_vec(rng.unit_vector(dim)))).collect()
            } else {
                let path = s.strip_prefix("file:").unwrap_or(s);
                let file = std::fs::File::open(path)?;
                read_points_csv(std::io::BufReader::new(file))?
            }
        }
    };
    if points.is_empty() {
        return Err(Error::Input("empty action set".into()));
    }
    Ok(ResolvedActions { points, covering_radius: None })
}

fn parse_count(s: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(k) if k > 0 => Ok(k),
        _ => Err(Error::Input(format!("expected a positive count, got {s:?}"))),
    }
}

/// `k` directions on the unit sphere: equally spaced angles for `d = 2`,
/// random unit vectors otherwise.
pub fn sphere_discretization(dim: usize, k: usize, seed: u64) -> Result<Vec<Point>> {
    match dim {
        0 => Err(Error::Input("dimension must be positive".into())),
        1 => Ok(vec![Point::from(DVector::from_vec(vec![-1.0])), Point::from(DVector::from_vec(vec![1.0]))]),
        2 => Ok((0..k)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                Point::from(DVector::from_vec(vec![th.cos(), th.sin()]))
            })
            .collect()),
        _ => {
            let mut rng = StreamRng::new(seed, "ball");
            Ok((0..k).map(|_| Point::from(DVector::from_vec(rng.unit_vector(dim)))).collect())
        }
    }
}

/// Largest distance from a sphere point to the nearest action. Exact for
/// `d <= 2`; for larger `d`, the maximum over 10^4 random probes.
pub fn covering_radius(points: &[Point], dim: usize, seed: u64) -> f64 {
    let nearest = |x: &[f64]| {
        points
            .iter()
            .map(|p| p.coords().iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    match dim {
        1 => nearest(&[1.0]).max(nearest(&[-1.0])),
        2 => {
            let mut angles: Vec<f64> = points.iter().map(|p| p.coords()[1].atan2(p.coords()[0])).collect();
            angles.sort_by(f64::total_cmp);
            let mut gap = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
            for w in angles.windows(2) {
                gap = gap.max(w[1] - w[0]);
            }
            2.0 * (gap / 4.0).sin()
        }
        _ => {
            let mut rng = StreamRng::new(seed, "covering");
            (0..10_000).map(|_| nearest(&rng.unit_vector(dim))).fold(0.0, f64::max)
        }
    }
}

/// One point per line, comma separated. A non-numeric first line is taken
/// as a header; blank lines and `#` lines are skipped.
pub fn read_points_csv<R: BufRead>(input: R) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match parsed {
            Ok(coords) => points.push(Point::new(coords)?),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::Parse(format!("line {}: not a list of numbers", i + 1))),
        }
    }
    if let Some(first) = points.first() {
        if let Some(bad) = points.iter().find(|p| p.dim() != first.dim()) {
            return Err(Error::DimensionMismatch { expected: first.dim(), got: bad.dim() });
        }
    }
    Ok(points)
}

/// Adversary description in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversarySpec {
    /// `w_t = 0`.
    Zero,
    /// Uniform unit direction in feature space, scaled by `G`, each round.
    IidUnit,
    /// `Phi(a)` for an action drawn uniformly each round.
    IidActions,
    Fixed { w: AdversaryAction },
    Periodic { actions: Vec<AdversaryAction> },
    Schedule { actions: Vec<AdversaryAction> },
}

impl std::str::FromStr for AdversarySpec {
    type Err = Error;

    /// `zero`, `iid_unit`, `iid_actions`, `fixed:w1,w2,...` or a JSON object.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(AdversarySpec::Zero),
            "iid_unit" => Ok(AdversarySpec::IidUnit),
            "iid_actions" => Ok(AdversarySpec::IidActions),
            _ => {
                if let Some(w) = s.strip_prefix("fixed:") {
                    let w = w.split(',').map(parse_num::<f64>).collect::<Result<Vec<_>>>()?;
                    Ok(AdversarySpec::Fixed { w: AdversaryAction::ExplicitVector { w } })
                } else {
                    serde_json::from_str(s).map_err(|e| Error::Input(format!("bad adversary {s:?}: {e}")))
                }
            }
        }
    }
}

/// Count of seeds `0..k` or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(usize),
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Count(DEFAULT_SEED_COUNT)
    }
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(k) => (0..*k as u64).collect(),
            Seeds::List(l) => l.clone(),
        }
    }
}

/// Explicit parameters; any field left out takes its default schedule value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualParams {
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    /// Proxy dimension.
    pub m: Option<usize>,
    pub eps: Option<f64>,
    /// Proxy sample size.
    pub p: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    /// Must be `"paper"`, the default schedules.
    Named(String),
    Manual(ManualParams),
}

impl Default for Params {
    fn default() -> Self {
        Params::Named("paper".into())
    }
}

impl Params {
    fn manual(&self) -> Result<ManualParams> {
        match self {
            Params::Named(s) if s == "paper" => Ok(ManualParams::default()),
            Params::Named(s) => Err(Error::Input(format!("unknown parameter schedule {s:?}"))),
            Params::Manual(m) => Ok(m.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algo: Algorithm,
    /// See [`parse_kernel_kind`].
    pub kernel: String,
    /// `G`; defaults to the largest action feature norm.
    #[serde(default)]
    pub norm_bound: Option<f64>,
    pub actions: ActionsSpec,
    /// Input dimension for generated action sets.
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub adversary: AdversarySpec,
    pub n: usize,
    #[serde(default)]
    pub seeds: Seeds,
    /// Seeds the adversary and any generated actions or proxy sample.
    #[serde(default)]
    pub adversary_seed: u64,
    #[serde(default)]
    pub params: Params,
}

fn default_dim() -> usize {
    2
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Input("horizon n must be positive".into()));
        }
        if self.seeds.to_vec().is_empty() {
            return Err(Error::Input("need at least one seed".into()));
        }
        parse_kernel_kind(&self.kernel)?;
        self.params.manual()?;
        Ok(())
    }
}

/// Parameters actually used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub eta: f64,
    pub gamma: Option<f64>,
    pub m: Option<usize>,
    pub eps: Option<f64>,
    pub schedule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub algo: Algorithm,
    pub kernel: KernelSpec,
    pub n: usize,
    pub num_actions: usize,
    pub seeds: Vec<u64>,
    pub final_regrets: Vec<f64>,
    pub mean_regret: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `G^2` times the covering radius, for discretized unit balls.
    pub discretization_error: Option<f64>,
    pub schedule_hash: String,
    pub params: ResolvedParams,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub traces: Vec<RegretTrace>,
    pub diagnostics: Vec<Diagnostics>,
    pub report: ExperimentReport,
}

enum Prepared {
    Bandit { config: BanditConfig, setup: Box<BanditSetup> },
    FullInfo { eta: f64 },
    Cg { config: CgConfig },
}

/// Run every seed of an experiment. The adversary schedule is materialized
/// once, before any player randomness is drawn, and shared by all seeds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let kind = parse_kernel_kind(&config.kernel)?;
    let resolved = resolve_actions(&config.actions, config.dim, config.adversary_seed)?;
    let actions = resolved.points;
    let dim = actions[0].dim();
    let probe = KernelSpec::new(kind, 1.0)?;
    let action_norm = actions
        .iter()
        .map(|a| kernel_eval(&probe, a, a).map(|v| v.max(0.0).sqrt()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let g = match config.norm_bound {
        Some(g) => g,
        None => action_norm.max(adversary_norm(&probe, &config.adversary)?).max(f64::MIN_POSITIVE),
    };
    let kernel = KernelSpec::new(kind, g)?;
    kernel.validate_actions(&actions)?;

    let adversary = build_adversary(&config.adversary, &kernel, dim, &actions, config.adversary_seed)?;
    let schedule = adversary.materialize(&kernel, dim, config.n)?;
    let table = loss_table(&kernel, &actions, &schedule)?;
    let hash = schedule_hash(&schedule);

    let manual = config.params.manual()?;
    let mut notes = Vec::new();
    let (prepared, params, bound) = prepare(config, &manual, &kernel, &actions, &mut notes)?;

    let seeds = config.seeds.to_vec();
    let runs: Vec<(RegretTrace, Diagnostics)> = seeds
        .par_iter()
        .map(|&seed| run_seed(seed, &prepared, &kernel, &actions, &schedule, &table))
        .collect::<Result<_>>()?;
    let (traces, diagnostics): (Vec<_>, Vec<_>) = runs.into_iter().unzip();

    let final_regrets: Vec<f64> = traces.iter().map(RegretTrace::final_regret).collect();
    let k = final_regrets.len() as f64;
    let mean_regret = final_regrets.iter().sum::<f64>() / k;
    let std_error = if final_regrets.len() > 1 {
        (final_regrets.iter().map(|r| (r - mean_regret).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    let report = ExperimentReport {
        algo: config.algo,
        kernel,
        n: config.n,
        num_actions: actions.len(),
        seeds,
        final_regrets,
        mean_regret,
        std_error,
        bound,
        discretization_error: resolved.covering_radius.map(|r| g * g * r),
        schedule_hash: format!("{hash:016x}"),
        params,
        notes,
    };
    Ok(ExperimentOutput { traces, diagnostics, report })
}

fn adversary_norm(probe: &KernelSpec, spec: &AdversarySpec) -> Result<f64> {
    let norm = |list: &[AdversaryAction]| -> Result<f64> {
        list.iter().map(|w| w.hilbert_norm(probe)).try_fold(0.0f64, |acc, n| Ok(acc.max(n?)))
    };
    match spec {
        AdversarySpec::Fixed { w } => norm(std::slice::from_ref(w)),
        AdversarySpec::Periodic { actions } | AdversarySpec::Schedule { actions } => norm(actions),
        _ => Ok(0.0),
    }
}

fn build_adversary(
    spec: &AdversarySpec,
    kernel: &KernelSpec,
    dim: usize,
    actions: &[Point],
    seed: u64,
) -> Result<Adversary> {
    Ok(match spec {
        AdversarySpec::Zero => {
            let w = if kernel.has_explicit_features() {
                AdversaryAction::ExplicitVector { w: vec![0.0; kernel.feature_dim(dim)?] }
            } else {
                return Err(Error::InvalidCombination(format!(
                    "the zero adversary needs explicit features; {} has none",
                    kernel.kind.name()
                )));
            };
            Adversary::Fixed { w }
        }
        AdversarySpec::IidUnit => Adversary::IidRandom { distribution: AdversaryDistribution::UnitFeature, seed },
        AdversarySpec::IidActions => Adversary::IidRandom {
            distribution: AdversaryDistribution::RankOne { points: actions.to_vec() },
            seed,
        },
        AdversarySpec::Fixed { w } => Adversary::Fixed { w: w.clone() },
        AdversarySpec::Periodic { actions } => Adversary::Periodic { actions: actions.clone() },
        AdversarySpec::Schedule { actions } => Adversary::Schedule { actions: actions.clone() },
    })
}

fn prepare(
    config: &ExperimentConfig,
    manual: &ManualParams,
    kernel: &KernelSpec,
    actions: &[Point],
    notes: &mut Vec<String>,
) -> Result<(Prepared, ResolvedParams, f64)> {
    let n = config.n;
    let k = actions.len();
    let g = kernel.norm_bound;
    match config.algo {
        Algorithm::FullinfoEw => {
            let eta = manual.eta.unwrap_or_else(|| full_info_eta(k, g, n));
            let schedule = if manual.eta.is_some() { "manual" } else { "theorem" };
            let params = ResolvedParams { eta, schedule: schedule.into(), ..Default::default() };
            Ok((Prepared::FullInfo { eta }, params, full_info_bound(k, g, n)))
        }
        Algorithm::Cg => {
            let mut cfg = CgConfig::from_theorem(n)?;
            if let Some(eta) = manual.eta {
                cfg.eta = eta;
            }
            let schedule = if manual.eta.is_some() { "manual" } else { "theorem" };
            let params = ResolvedParams { eta: cfg.eta, schedule: schedule.into(), ..Default::default() };
            Ok((Prepared::Cg { config: cfg }, params, CgConfig::regret_bound(g, n)))
        }
        Algorithm::BanditEw => {
            let (setup, mut cfg) = if kernel.has_explicit_features() {
                let setup = BanditSetup::explicit(kernel, actions, DEFAULT_DESIGN_TOL)?;
                let eps = manual.eps.unwrap_or(0.0);
                let cfg = match (manual.eta, manual.gamma) {
                    (Some(eta), Some(gamma)) => BanditConfig::new(eta, gamma, setup.m(), eps, n)?,
                    _ => general_schedule(eps, setup.m(), n, k, g)?,
                };
                (setup, cfg)
            } else {
                proxy_bandit_setup(config, manual, kernel, actions, notes)?
            };
            if cfg.schedule != ScheduleKind::Manual && (manual.eta.is_some() || manual.gamma.is_some()) {
                let eta = manual.eta.unwrap_or(cfg.eta);
                let gamma = manual.gamma.unwrap_or(cfg.gamma);
                cfg = BanditConfig::new(eta, gamma, setup.m(), cfg.eps, n)?;
            }
            if setup.centering_offset() > 1e-8 {
                notes.push(format!("exploration design is not centered: offset {:.3e}", setup.centering_offset()));
            }
            let params = ResolvedParams {
                eta: cfg.eta,
                gamma: Some(cfg.gamma),
                m: Some(cfg.m),
                eps: Some(cfg.eps),
                schedule: format!("{:?}", cfg.schedule).to_lowercase(),
            };
            let bound = cfg.regret_bound(g, k);
            Ok((Prepared::Bandit { config: cfg, setup: Box::new(setup) }, params, bound))
        }
    }
}

/// Proxy features for kernels without a finite feature map. The proxy
/// sample is drawn uniformly from the action set.
fn proxy_bandit_setup(
    config: &ExperimentConfig,
    manual: &ManualParams,
    kernel: &KernelSpec,
    actions: &[Point],
    notes: &mut Vec<String>,
) -> Result<(BanditSetup, BanditConfig)> {
    let n = config.n;
    let k = actions.len();
    let g = kernel.norm_bound;
    let p = manual.p.unwrap_or(DEFAULT_PROXY_SAMPLES);
    let measure = DiscreteMeasure::uniform(actions.to_vec())?;
    let mut rng = StreamRng::new(config.adversary_seed, "proxy");
    let fit_m = manual.m.unwrap_or(p.min(64)).min(p);
    let build = build_proxy(kernel, &measure, fit_m, p, None, &mut rng)?;
    let (m, eps) = match manual.m {
        Some(m) => (m, manual.eps.unwrap_or((k as f64).ln() / (2.0 * n as f64))),
        None => {
            let profile = fit_profile(&build, DecayFamily::Exponential, actions)?;
            let cfg = configure_bandit(&profile, n, k, g)?;
            (cfg.m, cfg.eps)
        }
    };
    let basis = build.basis.truncate(m.min(build.basis.m()));
    let setup = BanditSetup::proxy(basis, actions, DEFAULT_DESIGN_TOL)?;
    if setup.m() < m {
        notes.push(format!("proxy dimension reduced from {m} to {} by rank", setup.m()));
    }
    let cfg = if (g - 1.0).abs() <= 1e-12 && manual.m.is_none() && setup.m() == m {
        let eta = (eps / (10.0 * m as f64)).sqrt();
        let gamma = 4.0 * eta * m as f64;
        if gamma > 1.0 {
            return Err(Error::HorizonTooShort { gamma });
        }
        BanditConfig { eta, gamma, m, eps, n, schedule: ScheduleKind::Corollary }
    } else {
        general_schedule(eps, setup.m(), n, k, g)?
    };
    Ok((setup, cfg))
}

fn run_seed(
    seed: u64,
    prepared: &Prepared,
    kernel: &KernelSpec,
    actions: &[Point],
    schedule: &[AdversaryAction],
    table: &[Vec<f64>],
) -> Result<(RegretTrace, Diagnostics)> {
    let mut rng = StreamRng::derive(seed, "player", 0);
    let n = schedule.len();
    let mut played = Vec::with_capacity(n);
    let diagnostics = match prepared {
        Prepared::FullInfo { eta } => {
            let mut state = WeightState::uniform(actions.len())?;
            let mut rows = Vec::with_capacity(n);
            for w in schedule {
                let p_max = state.probabilities().into_iter().fold(0.0, f64::max);
                let r = full_info_round(&mut state, *eta, kernel, actions, w, &mut rng)?;
                played.push(r.action_index);
                rows.push(vec![p_max]);
            }
            Diagnostics { columns: vec!["max_prob"], rows }
        }
        Prepared::Cg { config } => {
            let set = ActionSet::Finite(actions.to_vec());
            let mut state = CgState::new(kernel, &set)?;
            let mut rows = Vec::with_capacity(n);
            for w in schedule {
                let r = cg_round(&mut state, config, kernel, &set, w, &mut rng)?;
                played.push(r.action_index.expect("finite action sets index every atom"));
                rows.push(vec![r.num_atoms as f64, r.mean_error]);
            }
            Diagnostics { columns: vec!["num_atoms", "mean_error"], rows }
        }
        Prepared::Bandit { config, setup } => {
            let mut state = WeightState::uniform(actions.len())?;
            let mut rows = Vec::with_capacity(n);
            let options = RoundOptions::default();
            for w in schedule {
                let r = bandit_round(&mut state, config, setup, kernel, actions, w, &mut rng, options)?;
                played.push(r.action_index);
                rows.push(vec![r.loss, r.min_eig, r.est_norm]);
            }
            let mut cum = 0.0;
            for row in &mut rows {
                cum += row[0];
                row.insert(1, cum);
                row.remove(0);
            }
            Diagnostics { columns: vec!["cum_loss", "min_eig_sigma", "est_norm"], rows }
        }
    };
    Ok((RegretTrace::from_play(&played, table)?, diagnostics))
}

/// Write traces, diagnostics and `report.json` into `dir`.
pub fn write_outputs(dir: &std::path::Path, config: &ExperimentConfig, output: &ExperimentOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let echo: Vec<String> = serde_json::to_string_pretty(config)?.lines().map(str::to_owned).collect();
    for ((seed, trace), diag) in output.report.seeds.iter().zip(&output.traces).zip(&output.diagnostics) {
        let f = std::fs::File::create(dir.join(format!("trace_seed{seed}.csv")))?;
        emit_trace(trace, std::io::BufWriter::new(f))?;
        let f = std::fs::File::create(dir.join(format!("diagnostics_seed{seed}.csv")))?;
        write_diagnostics(diag, &echo, std::io::BufWriter::new(f))?;
    }
    let f = std::fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &output.report)?;
    Ok(())
}

/// Feature-space norm of every action, for reporting.
pub fn action_feature_norms(kernel: &KernelSpec, actions: &[Point]) -> Result<Vec<f64>> {
    if kernel.has_explicit_features() {
        actions.iter().map(|a| feature_map(kernel, a).map(|f| f.norm())).collect()
    } else {
        actions.iter().map(|a| kernel_eval(kernel, a, a).map(|v| v.max(0.0).sqrt())).collect()
    }
}
