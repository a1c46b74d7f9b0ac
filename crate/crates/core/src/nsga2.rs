//! NSGA-II with constraint-domination, bounded SBX and polynomial mutation.
//!
//! The generational loop is shared with the varying-goals variant: a run
//! cycles through a list of goals, switching every `epoch` generations, and a
//! plain run is the single-goal case.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{AlgorithmTag, ArchiveEntry, GenotypeKind, ParetoArchive, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::metrics::hypervolume_unit;
use crate::oxley::{Bound, ProcessParams, N_PROCESS};
use crate::task::{normalize, EvalResult, TaskSpec};

/// Random stream of one run.
pub type Rng = ChaCha8Rng;

/// Stream for run `index` of a campaign with base seed `base`.
pub fn run_rng(base: u64, index: u64) -> Rng {
    Rng::seed_from_u64(base ^ index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgoConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub tournament_size: usize,
    pub eta_cross: f64,
    pub eta_mut: f64,
    pub mutation_prob: f64,
    pub crossover_prob: f64,
    pub seed: u64,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            population_size: 100,
            max_generations: 50,
            tournament_size: 2,
            eta_cross: 30.0,
            eta_mut: 20.0,
            mutation_prob: 1.0 / N_PROCESS as f64,
            crossover_prob: 1.0,
            seed: 0,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return bad(format!("population_size {} must be even and >= 4", self.population_size));
        }
        if self.tournament_size != 2 {
            return bad(format!("tournament_size {} unsupported (binary only)", self.tournament_size));
        }
        if !(self.eta_cross > 0.0 && self.eta_mut > 0.0) {
            return bad("distribution indices must be positive".into());
        }
        for (name, p) in [("mutation_prob", self.mutation_prob), ("crossover_prob", self.crossover_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Something the loop can optimize: a named objective function over
/// phenotypes in a box.
pub trait Problem: Sync {
    fn name(&self) -> &str;
    fn bounds(&self) -> &[Bound];
    fn evaluate(&self, phenotype: &[f64]) -> EvalResult;
}

impl Problem for TaskSpec {
    fn name(&self) -> &str {
        &self.material.name
    }

    fn bounds(&self) -> &[Bound] {
        TaskSpec::bounds(self)
    }

    fn evaluate(&self, phenotype: &[f64]) -> EvalResult {
        match ProcessParams::from_phenotype(phenotype) {
            Ok(p) if p.validate().is_ok() => crate::task::evaluate(self, &p),
            _ => EvalResult::failed(),
        }
    }
}

/// Genotype encoding together with its variation operators.
pub trait Representation: Sync {
    fn kind(&self) -> GenotypeKind;
    /// Slots per gene; 1 for the plain genotype.
    fn gene_length(&self) -> usize;
    fn random(&self, bounds: &[Bound], rng: &mut Rng) -> Vec<f64>;
    fn decode(&self, genotype: &[f64]) -> Result<Vec<f64>>;
    /// Genotype seeding a run from a stored individual.
    fn seed(&self, entry: &ArchiveEntry, from: GenotypeKind, gene_length: usize, bounds: &[Bound], rng: &mut Rng) -> Result<Vec<f64>>;
    fn crossover(&self, a: &[f64], b: &[f64], cfg: &AlgoConfig, bounds: &[Bound], rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)>;
    fn mutate(&self, g: &[f64], cfg: &AlgoConfig, bounds: &[Bound], rng: &mut Rng) -> Result<Vec<f64>>;
}

/// One real value per process parameter.
#[derive(Debug, Clone, Copy, Default)]
pub struct Plain;

impl Representation for Plain {
    fn kind(&self) -> GenotypeKind {
        GenotypeKind::Plain
    }

    fn gene_length(&self) -> usize {
        1
    }

    fn random(&self, bounds: &[Bound], rng: &mut Rng) -> Vec<f64> {
        bounds.iter().map(|b| uniform_in(b, rng)).collect()
    }

    fn decode(&self, genotype: &[f64]) -> Result<Vec<f64>> {
        Ok(genotype.to_vec())
    }

    fn seed(&self, entry: &ArchiveEntry, _: GenotypeKind, _: usize, _: &[Bound], _: &mut Rng) -> Result<Vec<f64>> {
        Ok(entry.phenotype.clone())
    }

    fn crossover(&self, a: &[f64], b: &[f64], cfg: &AlgoConfig, bounds: &[Bound], rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(sbx_crossover(a, b, cfg.eta_cross, bounds, rng))
    }

    fn mutate(&self, g: &[f64], cfg: &AlgoConfig, bounds: &[Bound], rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(polynomial_mutation(g, cfg.eta_mut, cfg.mutation_prob, bounds, rng))
    }
}

pub(crate) fn uniform_in(b: &Bound, rng: &mut Rng) -> f64 {
    b.lower + rng.random::<f64>() * b.width()
}

/// Strict Pareto domination for minimization.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fronts of successive non-dominated layers, as indices into `points`.
/// Indices within a front are ascending.
pub fn non_dominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&points[i], &points[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of every member of one front.
pub fn crowding_distance(front: &[&[f64]]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| front[a][k].total_cmp(&front[b][k]));
        let lo = front[order[0]][k];
        let hi = front[order[n - 1]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]][k] - front[order[w - 1]][k];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Rank and crowding of one member after a sort pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standing {
    pub rank: usize,
    pub crowding: f64,
}

/// `Less` when `a` is preferred: lower rank, then larger crowding. Equal
/// standings compare `Equal`, so stable sorts keep the original order.
pub fn crowded_compare(a: &Standing, b: &Standing) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
}

/// Spread factor of bounded SBX for one child side; `u` is the uniform draw.
fn sbx_beta_q(beta: f64, eta: f64, u: f64) -> f64 {
    let alpha = 2.0 - beta.powf(-(eta + 1.0));
    if u <= 1.0 / alpha {
        (u * alpha).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
    }
}

/// Bounded SBX on one gene pair for uniform draw `u`; returns the lower and
/// upper child. Parents closer than 1e-14 are returned unchanged.
pub fn sbx_gene(x1: f64, x2: f64, bound: &Bound, eta: f64, u: f64) -> (f64, f64) {
    let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
    let span = hi - lo;
    if span <= 1.0e-14 {
        return (lo, hi);
    }
    let beta_lo = 1.0 + 2.0 * (lo - bound.lower) / span;
    let beta_hi = 1.0 + 2.0 * (bound.upper - hi) / span;
    let c1 = 0.5 * (lo + hi - sbx_beta_q(beta_lo, eta, u) * span);
    let c2 = 0.5 * (lo + hi + sbx_beta_q(beta_hi, eta, u) * span);
    (
        c1.clamp(bound.lower, bound.upper),
        c2.clamp(bound.lower, bound.upper),
    )
}

/// Bounded simulated binary crossover: each gene pair is recombined with
/// probability 1/2 and the children are swapped with probability 1/2.
pub fn sbx_crossover(p1: &[f64], p2: &[f64], eta: f64, bounds: &[Bound], rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for (i, b) in bounds.iter().enumerate() {
        if rng.random::<f64>() > 0.5 {
            continue;
        }
        if (p1[i] - p2[i]).abs() <= 1.0e-14 {
            continue;
        }
        let (lo, hi) = sbx_gene(p1[i], p2[i], b, eta, rng.random::<f64>());
        if rng.random::<f64>() <= 0.5 {
            c1[i] = hi;
            c2[i] = lo;
        } else {
            c1[i] = lo;
            c2[i] = hi;
        }
    }
    (c1, c2)
}

/// Bounded polynomial perturbation of one gene for uniform draw `u`.
pub fn polynomial_gene(x: f64, bound: &Bound, eta: f64, u: f64) -> f64 {
    let width = bound.width();
    if width <= 0.0 {
        return x;
    }
    let d1 = (x - bound.lower) / width;
    let d2 = (bound.upper - x) / width;
    let power = 1.0 / (eta + 1.0);
    let dq = if u < 0.5 {
        let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        v.powf(power) - 1.0
    } else {
        let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - v.powf(power)
    };
    (x + dq * width).clamp(bound.lower, bound.upper)
}

/// Bounded polynomial mutation, each gene with probability `prob`.
pub fn polynomial_mutation(x: &[f64], eta: f64, prob: f64, bounds: &[Bound], rng: &mut Rng) -> Vec<f64> {
    let mut y = x.to_vec();
    for (i, b) in bounds.iter().enumerate() {
        if rng.random::<f64>() < prob {
            y[i] = polynomial_gene(x[i], b, eta, rng.random::<f64>());
        }
    }
    y
}

/// Point of the per-generation trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub generation: u64,
    /// Index of the goal evaluated in this generation.
    pub goal: usize,
    pub evaluations: u64,
    /// Hypervolume of the current feasible first front.
    pub hypervolume: f64,
    /// Best hypervolume seen so far for this goal.
    pub best_hypervolume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Stored front: the best-hypervolume front, or for varying goals the
    /// front of the last improvement on any goal.
    pub best_front: ParetoArchive,
    pub best_hypervolume: f64,
    /// Best hypervolume per goal.
    pub goal_best: Vec<f64>,
    pub evaluations_used: u64,
    pub generations_run: u64,
    /// Evaluations at the first checkpoint meeting the stop threshold.
    pub success_checkpoint: Option<u64>,
    pub trace: Vec<TracePoint>,
}

/// Everything that determines one run besides the problems.
pub struct RunSpec<'a> {
    pub config: &'a AlgoConfig,
    pub representation: &'a dyn Representation,
    pub algorithm: AlgorithmTag,
    /// Generations per goal.
    pub epoch: usize,
    pub initial: Option<&'a ParetoArchive>,
    pub stop_threshold: Option<f64>,
}

/// Baseline NSGA-II on one problem.
pub fn run(
    problem: &dyn Problem,
    config: &AlgoConfig,
    initial: Option<&ParetoArchive>,
    stop_threshold: Option<f64>,
) -> Result<RunResult> {
    let spec = RunSpec {
        config,
        representation: &Plain,
        algorithm: AlgorithmTag::Baseline,
        epoch: config.max_generations.max(1),
        initial,
        stop_threshold,
    };
    evolve(&[problem], &spec)
}

struct Member {
    genotype: Vec<f64>,
    phenotype: Vec<f64>,
    result: EvalResult,
    point: Option<Vec<f64>>,
    standing: Standing,
}

/// `floor((i - 1) / epoch) mod n` for generation `i >= 1`.
pub fn goal_index(generation: usize, epoch: usize, n_goals: usize) -> usize {
    (generation.saturating_sub(1) / epoch.max(1)) % n_goals.max(1)
}

/// The generational loop shared by every algorithm variant.
pub fn evolve(goals: &[&dyn Problem], spec: &RunSpec<'_>) -> Result<RunResult> {
    let cfg = spec.config;
    cfg.validate()?;
    if goals.is_empty() {
        return Err(Error::Config("at least one goal is required".into()));
    }
    if spec.epoch == 0 {
        return Err(Error::Config("epoch length must be at least 1".into()));
    }
    if let Some(t) = spec.stop_threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Config(format!("stop threshold {t} outside [0, 1]")));
        }
    }
    let repr = spec.representation;
    let bounds = goals[0].bounds();
    let n = cfg.population_size;
    let mut rng = Rng::seed_from_u64(cfg.seed);

    let mut genotypes = Vec::with_capacity(n);
    if let Some(archive) = spec.initial {
        for entry in archive.individuals.iter().take(n) {
            genotypes.push(repr.seed(entry, archive.genotype_kind, archive.gene_length, bounds, &mut rng)?);
        }
    }
    while genotypes.len() < n {
        genotypes.push(repr.random(bounds, &mut rng));
    }

    let mut goal = goal_index(1, spec.epoch, goals.len());
    let mut evaluations = 0u64;
    let mut pop = Vec::with_capacity(n);
    for g in genotypes {
        pop.push(make_member(g, repr, goals[goal])?);
    }
    evaluations += n as u64;
    assign_standing(&mut pop);

    let mut state = Tracker::new(goals.len());
    let mut success = None;
    state.observe(&pop, goal, 0, evaluations);
    if meets(spec.stop_threshold, state.goal_best[goal]) {
        success = Some(evaluations);
    }

    let mut generations_run = 0u64;
    if success.is_none() {
        for generation in 1..=cfg.max_generations {
            let next_goal = goal_index(generation, spec.epoch, goals.len());
            if next_goal != goal {
                goal = next_goal;
                for m in pop.iter_mut() {
                    m.result = goals[goal].evaluate(&m.phenotype);
                    m.point = m.result.objectives.as_ref().map(|o| normalize(o).to_vec());
                }
                evaluations += n as u64;
                assign_standing(&mut pop);
            }
            let offspring = make_offspring(&pop, repr, cfg, bounds, &mut rng)?;
            let mut merged = pop;
            for g in offspring {
                merged.push(make_member(g, repr, goals[goal])?);
            }
            evaluations += n as u64;
            pop = select(merged, n);
            generations_run = generation as u64;
            state.observe(&pop, goal, generations_run, evaluations);
            if meets(spec.stop_threshold, state.goal_best[goal]) {
                success = Some(evaluations);
                break;
            }
        }
    }

    let stored = state.stored.unwrap_or_default();
    let best_front = ParetoArchive {
        format_version: FORMAT_VERSION,
        tasks: goals.iter().map(|g| g.name().to_string()).collect(),
        algorithm: spec.algorithm,
        genotype_kind: repr.kind(),
        gene_length: repr.gene_length(),
        config: cfg.clone(),
        seed: cfg.seed,
        individuals: stored.individuals,
        best_hypervolume: stored.hypervolume,
        generation: stored.generation,
        evaluations: stored.evaluations,
    };
    Ok(RunResult {
        best_hypervolume: best_front.best_hypervolume,
        best_front,
        goal_best: state.goal_best,
        evaluations_used: evaluations,
        generations_run,
        success_checkpoint: success,
        trace: state.trace,
    })
}

fn meets(threshold: Option<f64>, best: f64) -> bool {
    threshold.is_some_and(|t| best >= t)
}

fn make_member(genotype: Vec<f64>, repr: &dyn Representation, problem: &dyn Problem) -> Result<Member> {
    let phenotype = repr.decode(&genotype)?;
    let result = problem.evaluate(&phenotype);
    let point = result.objectives.as_ref().map(|o| normalize(o).to_vec());
    Ok(Member {
        genotype,
        phenotype,
        result,
        point,
        standing: Standing { rank: usize::MAX, crowding: 0.0 },
    })
}

/// Constraint-dominated fronts: feasible members by Pareto rank, then
/// infeasible members in groups of equal violation, least violation first.
fn constrained_fronts(pop: &[Member]) -> Vec<Vec<usize>> {
    let feasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].point.is_some()).collect();
    let points: Vec<Vec<f64>> = feasible.iter().map(|&i| pop[i].point.clone().unwrap()).collect();
    let mut fronts: Vec<Vec<usize>> = non_dominated_sort(&points)
        .into_iter()
        .map(|f| f.into_iter().map(|k| feasible[k]).collect())
        .collect();
    let mut infeasible: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].point.is_none()).collect();
    infeasible.sort_by(|&a, &b| pop[a].result.violation.total_cmp(&pop[b].result.violation));
    for i in infeasible {
        match fronts.last_mut() {
            Some(f) if pop[f[0]].point.is_none() && pop[f[0]].result.violation == pop[i].result.violation => f.push(i),
            _ => fronts.push(vec![i]),
        }
    }
    fronts
}

fn assign_front(pop: &mut [Member], front: &[usize], rank: usize) {
    let crowding = if pop[front[0]].point.is_some() {
        let pts: Vec<&[f64]> = front.iter().map(|&i| pop[i].point.as_deref().unwrap()).collect();
        crowding_distance(&pts)
    } else {
        vec![0.0; front.len()]
    };
    for (&i, c) in front.iter().zip(crowding) {
        pop[i].standing = Standing { rank, crowding: c };
    }
}

fn assign_standing(pop: &mut [Member]) {
    for (rank, front) in constrained_fronts(pop).iter().enumerate() {
        assign_front(pop, front, rank);
    }
}

/// Front-wise fill; the last admitted front is truncated by crowding.
fn select(mut merged: Vec<Member>, n: usize) -> Vec<Member> {
    let fronts = constrained_fronts(&merged);
    let mut chosen = Vec::with_capacity(n);
    for (rank, front) in fronts.iter().enumerate() {
        if chosen.len() >= n {
            break;
        }
        assign_front(&mut merged, front, rank);
        if chosen.len() + front.len() <= n {
            chosen.extend_from_slice(front);
        } else {
            let mut order = front.clone();
            order.sort_by(|&a, &b| crowded_compare(&merged[a].standing, &merged[b].standing));
            chosen.extend_from_slice(&order[..n - chosen.len()]);
        }
    }
    let mut slots: Vec<Option<Member>> = merged.into_iter().map(Some).collect();
    chosen.into_iter().map(|i| slots[i].take().unwrap()).collect()
}

/// Binary tournaments over two shuffled pairings, then variation of
/// consecutive winners.
fn make_offspring(
    pop: &[Member],
    repr: &dyn Representation,
    cfg: &AlgoConfig,
    bounds: &[Bound],
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    let n = pop.len();
    let mut winners = Vec::with_capacity(n);
    for _ in 0..2 {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for pair in perm.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            let w = match crowded_compare(&pop[a].standing, &pop[b].standing) {
                Ordering::Greater => b,
                _ => a,
            };
            winners.push(w);
        }
    }
    let mut children = Vec::with_capacity(n);
    for pair in winners.chunks_exact(2) {
        let (g1, g2) = (&pop[pair[0]].genotype, &pop[pair[1]].genotype);
        let (c1, c2) = if cfg.crossover_prob >= 1.0 || rng.random::<f64>() < cfg.crossover_prob {
            repr.crossover(g1, g2, cfg, bounds, rng)?
        } else {
            (g1.clone(), g2.clone())
        };
        children.push(repr.mutate(&c1, cfg, bounds, rng)?);
        children.push(repr.mutate(&c2, cfg, bounds, rng)?);
    }
    Ok(children)
}

#[derive(Default)]
struct Stored {
    individuals: Vec<ArchiveEntry>,
    hypervolume: f64,
    generation: u64,
    evaluations: u64,
}

struct Tracker {
    goal_best: Vec<f64>,
    stored: Option<Stored>,
    trace: Vec<TracePoint>,
}

impl Tracker {
    fn new(n_goals: usize) -> Self {
        Tracker {
            goal_best: vec![0.0; n_goals],
            stored: None,
            trace: Vec::new(),
        }
    }

    /// Records the feasible first front; replaces the stored front on strict
    /// improvement of the current goal's best.
    fn observe(&mut self, pop: &[Member], goal: usize, generation: u64, evaluations: u64) {
        let first: Vec<&Member> = pop
            .iter()
            .filter(|m| m.point.is_some() && m.standing.rank == 0)
            .collect();
        let points: Vec<Vec<f64>> = first.iter().map(|m| m.point.clone().unwrap()).collect();
        let hv = hypervolume_unit(&points);
        if hv > self.goal_best[goal] || (self.stored.is_none() && !first.is_empty()) {
            self.goal_best[goal] = self.goal_best[goal].max(hv);
            self.stored = Some(Stored {
                individuals: first
                    .iter()
                    .map(|m| ArchiveEntry {
                        genotype: m.genotype.clone(),
                        phenotype: m.phenotype.clone(),
                        objectives: m.result.objectives.unwrap(),
                    })
                    .collect(),
                hypervolume: hv,
                generation,
                evaluations,
            });
        }
        self.trace.push(TracePoint {
            generation,
            goal,
            evaluations,
            hypervolume: hv,
            best_hypervolume: self.goal_best[goal],
        });
    }
}
