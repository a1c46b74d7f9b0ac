//! Experiment orchestration: from-scratch campaigns, adaption campaigns,
//! varying-goals training, parameter sweeps and report tables.
//!
//! Every run is an independent job whose seed is derived from the campaign
//! base seed, its cell index and its run index, so results do not depend on
//! scheduling order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{varying_goals_run, ActiveInactive, GoalSchedule, DEFAULT_EPOCH, DEFAULT_GENE_LENGTH};
use crate::archive::{AlgorithmTag, GenotypeKind, ParetoArchive};
use crate::error::{Error, Result};
use crate::material::{builtin_materials, find_material, load_catalog, MaterialParams};
use crate::metrics::{computational_effort, cost_aggregates, hypervolume_unit, success_threshold, CostAggregate};
use crate::nsga2::{evolve, run_rng, AlgoConfig, Plain, Problem, Representation, RunResult, RunSpec};
use crate::task::{normalize, ObjectiveVector, TaskSpec};

/// Target probability of the computational effort statistic.
pub const CE_PROBABILITY: f64 = 0.99;

/// Seed of run `run` in cell `cell`: `base ^ (cell * 2^32 + run)`.
pub fn run_seed(base: u64, cell: u64, run: u64) -> u64 {
    base ^ (cell.wrapping_shl(32).wrapping_add(run))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Population sizes, paired element-wise with `generations`.
    pub populations: Vec<usize>,
    pub generations: Vec<usize>,
    pub epochs: Vec<usize>,
    pub gene_lengths: Vec<usize>,
    /// Training pair of the epoch / gene-length sweep.
    pub pair: Vec<String>,
    /// Adaption target of the epoch / gene-length sweep.
    pub target: String,
    /// Runs per sweep cell; defaults to the experiment's run count.
    pub runs: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            populations: Vec::new(),
            generations: Vec::new(),
            epochs: Vec::new(),
            gene_lengths: Vec::new(),
            pair: vec!["steel".into(), "tungsten-alloy".into()],
            target: "inconel-718".into(),
            runs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Materials of the task context, in report order.
    pub materials: Vec<String>,
    /// Extra material catalog merged over the built-in materials.
    pub catalog: Option<PathBuf>,
    pub total_length: f64,
    pub total_depth: f64,
    pub runs: usize,
    /// Fraction of the reference hypervolume counted as success.
    pub threshold: f64,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub epoch: usize,
    pub gene_length: usize,
    pub algorithm: AlgoConfig,
    /// Reference hypervolumes replacing the campaign means.
    pub reference_hv: BTreeMap<String, f64>,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            materials: builtin_materials().into_iter().map(|m| m.name).collect(),
            catalog: None,
            total_length: 1.0,
            total_depth: 1.0,
            runs: 100,
            threshold: 0.99,
            base_seed: 0,
            output_dir: PathBuf::from("experiment-out"),
            epoch: DEFAULT_EPOCH,
            gene_length: DEFAULT_GENE_LENGTH,
            algorithm: AlgoConfig::default(),
            reference_hv: BTreeMap::new(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::schema(origin, e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.algorithm.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.materials.is_empty() {
            return bad("no materials configured".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("threshold {} outside (0, 1]", self.threshold));
        }
        if self.epoch == 0 || self.gene_length == 0 {
            return bad("epoch and gene_length must be positive".into());
        }
        let s = &self.sweep;
        if s.populations.len() != s.generations.len() {
            return bad("sweep.populations and sweep.generations must pair up element-wise".into());
        }
        if s.populations.iter().chain(&s.generations).chain(&s.epochs).chain(&s.gene_lengths).any(|&v| v == 0) {
            return bad("sweep values must be positive".into());
        }
        if s.runs == Some(0) {
            return bad("sweep.runs must be at least 1".into());
        }
        if !s.epochs.is_empty() || !s.gene_lengths.is_empty() {
            if s.pair.len() != 2 {
                return bad("sweep.pair must name two materials".into());
            }
            if s.pair.contains(&s.target) {
                return bad("sweep.target must differ from the training pair".into());
            }
        }
        for (m, &h) in &self.reference_hv {
            success_threshold(h, self.threshold).map_err(|_| Error::Config(format!("reference_hv for '{m}' = {h} outside (0, 1]")))?;
        }
        Ok(())
    }

    /// Material catalog: built-ins merged with the optional catalog file.
    pub fn catalog(&self) -> Result<Vec<MaterialParams>> {
        match &self.catalog {
            Some(p) => load_catalog(p),
            None => Ok(builtin_materials()),
        }
    }

    pub fn task(&self, catalog: &[MaterialParams], name: &str) -> Result<TaskSpec> {
        let mut t = TaskSpec::new(find_material(catalog, name)?.clone());
        t.total_length = self.total_length;
        t.total_depth = self.total_depth;
        t.validate()?;
        Ok(t)
    }

    pub fn tasks(&self) -> Result<Vec<TaskSpec>> {
        let catalog = self.catalog()?;
        let tasks = self
            .materials
            .iter()
            .map(|m| self.task(&catalog, m))
            .collect::<Result<Vec<_>>>()?;
        for (i, t) in tasks.iter().enumerate() {
            if tasks[..i].iter().any(|u| u.name() == t.name()) {
                return Err(Error::Config(format!("material '{}' listed twice", t.name())));
            }
        }
        Ok(tasks)
    }
}

/// Random-sampling approximation of a task's front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub material: String,
    pub samples: usize,
    pub feasible: usize,
    /// Non-dominated feasible samples: phenotype and raw objectives.
    pub front: Vec<(Vec<f64>, ObjectiveVector)>,
    pub hypervolume: f64,
}

/// Evaluates `n` uniform samples of the parameter box and keeps the
/// feasible non-dominated subset.
pub fn sample(task: &TaskSpec, n: usize, seed: u64) -> SampleResult {
    let mut rng = run_rng(seed, 0);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| task.bounds().iter().map(|b| b.lower + rng.random::<f64>() * b.width()).collect())
        .collect();
    let results: Vec<_> = points.par_iter().map(|p| Problem::evaluate(task, p)).collect();
    let feasible: Vec<(Vec<f64>, ObjectiveVector)> = points
        .into_iter()
        .zip(results)
        .filter_map(|(p, r)| r.objectives.map(|o| (p, o)))
        .collect();
    let normalized: Vec<Vec<f64>> = feasible.iter().map(|(_, o)| normalize(o).to_vec()).collect();
    let first = crate::nsga2::non_dominated_sort(&normalized).into_iter().next().unwrap_or_default();
    let front_points: Vec<Vec<f64>> = first.iter().map(|&i| normalized[i].clone()).collect();
    SampleResult {
        material: task.name().to_string(),
        samples: n,
        feasible: feasible.len(),
        front: first.iter().map(|&i| feasible[i].clone()).collect(),
        hypervolume: hypervolume_unit(&front_points),
    }
}

/// Hypervolume of an archive's stored objectives.
pub fn archive_hypervolume(archive: &ParetoArchive) -> f64 {
    let pts: Vec<Vec<f64>> = archive.individuals.iter().map(|e| normalize(&e.objectives).to_vec()).collect();
    hypervolume_unit(&pts)
}

/// Algorithm selector of the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Baseline,
    VaryingGoals,
    VaryingGoalsAi,
}

impl Algo {
    pub fn tag(self) -> AlgorithmTag {
        match self {
            Algo::Baseline => AlgorithmTag::Baseline,
            Algo::VaryingGoals => AlgorithmTag::VaryingGoals,
            Algo::VaryingGoalsAi => AlgorithmTag::VaryingGoalsActiveInactive,
        }
    }
}

/// From-scratch optimization with any of the three algorithms.
pub fn optimize(tasks: &[TaskSpec], algo: Algo, config: &AlgoConfig, epoch: usize, gene_length: usize) -> Result<RunResult> {
    match algo {
        Algo::Baseline => {
            let [task] = tasks else {
                return Err(Error::Config(format!("baseline optimizes one material, got {}", tasks.len())));
            };
            crate::nsga2::run(task, config, None, None)
        }
        Algo::VaryingGoals | Algo::VaryingGoalsAi => {
            if tasks.len() < 2 {
                return Err(Error::Config("varying goals needs at least two materials".into()));
            }
            let schedule = GoalSchedule::new(tasks.to_vec(), epoch)?;
            if algo == Algo::VaryingGoals {
                varying_goals_run(&schedule, config, &Plain, None)
            } else {
                varying_goals_run(&schedule, config, &ActiveInactive::new(gene_length)?, None)
            }
        }
    }
}

/// Adaption run: seeds from `archive` and stops at `threshold`. Archives
/// with the active-inactive genotype are adapted in that representation.
pub fn adapt(archive: &ParetoArchive, target: &TaskSpec, config: &AlgoConfig, threshold: f64) -> Result<RunResult> {
    let ai;
    let (repr, algorithm): (&dyn Representation, AlgorithmTag) = match archive.genotype_kind {
        GenotypeKind::Plain => (&Plain, archive.algorithm),
        GenotypeKind::ActiveInactive => {
            ai = ActiveInactive::new(archive.gene_length)?;
            (&ai, archive.algorithm)
        }
    };
    let initial = (!archive.individuals.is_empty()).then_some(archive);
    let spec = RunSpec {
        config,
        representation: repr,
        algorithm,
        epoch: config.max_generations.max(1),
        initial,
        stop_threshold: Some(threshold),
    };
    evolve(&[target as &dyn Problem], &spec)
}

/// First evaluation count at which the best-so-far hypervolume reached
/// `threshold`.
pub fn checkpoint_reaching(result: &RunResult, threshold: f64) -> Option<u64> {
    result
        .trace
        .iter()
        .find(|t| t.best_hypervolume >= threshold)
        .map(|t| t.evaluations)
}

pub const TRACE_COLUMNS: [&str; 5] = ["generation", "goal", "evaluations", "hypervolume", "best_hypervolume"];

/// Per-generation trace as CSV with [`TRACE_COLUMNS`].
pub fn trace_csv(trace: &[crate::nsga2::TracePoint]) -> String {
    let mut s = TRACE_COLUMNS.join(",");
    s.push('\n');
    for t in trace {
        let _ = writeln!(s, "{},{},{},{},{}", t.generation, t.goal, t.evaluations, t.hypervolume, t.best_hypervolume);
    }
    s
}

/// One row of the raw per-run table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    /// `scratch`, `train`, `adapt`, `sweep-train` or `sweep-adapt`.
    pub phase: String,
    pub algorithm: String,
    pub population: usize,
    pub generations: usize,
    pub epoch: usize,
    pub gene_length: usize,
    /// Source material or `a+b` training pair; empty from scratch.
    pub source: String,
    /// Target material; empty for training rows.
    pub target: String,
    pub run: u64,
    pub seed: u64,
    pub best_hypervolume: f64,
    /// Hypervolume counted as success for this run.
    pub threshold: f64,
    pub success_checkpoint: Option<u64>,
    pub evaluations_used: u64,
    pub generations_run: u64,
    /// `ok` or the error that ended the run.
    pub status: String,
}

pub const RUN_COLUMNS: [&str; 16] = [
    "phase", "algorithm", "population", "generations", "epoch", "gene_length", "source", "target", "run", "seed",
    "best_hypervolume", "threshold", "success_checkpoint", "evaluations_used", "generations_run", "status",
];

pub fn write_runs_csv(rows: &[RunRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().ne(RUN_COLUMNS.iter().copied()) {
        return Err(Error::schema(path, format!("expected columns {}", RUN_COLUMNS.join(","))));
    }
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::schema(path, format!("{other:?}")),
    }
}

fn pair_name(a: &str, b: &str) -> String {
    format!("{a}+{b}")
}

/// Hands out cell indices in a fixed enumeration order.
struct Cells(u64);

impl Cells {
    fn next(&mut self) -> u64 {
        self.0 += 1;
        self.0 - 1
    }
}

struct Job<'a> {
    phase: &'static str,
    algo: AlgorithmTag,
    source: String,
    target: Option<&'a TaskSpec>,
    goals: Vec<&'a TaskSpec>,
    initial: Option<&'a ParetoArchive>,
    stop: Option<f64>,
    epoch: usize,
    gene_length: usize,
    run: u64,
    seed: u64,
}

impl Job<'_> {
    fn execute(&self, base: &AlgoConfig) -> (RunRow, Option<RunResult>) {
        let config = AlgoConfig { seed: self.seed, ..base.clone() };
        let outcome = (|| -> Result<RunResult> {
            match (self.phase, self.target) {
                (_, Some(target)) if self.initial.is_some() || self.stop.is_some() => {
                    let threshold = self.stop.unwrap_or(1.0);
                    match self.initial {
                        Some(a) => adapt(a, target, &config, threshold),
                        None => crate::nsga2::run(target, &config, None, Some(threshold)),
                    }
                }
                (_, Some(target)) => crate::nsga2::run(target, &config, None, None),
                _ => {
                    let goals: Vec<TaskSpec> = self.goals.iter().map(|g| (*g).clone()).collect();
                    let schedule = GoalSchedule::new(goals, self.epoch)?;
                    match self.algo {
                        AlgorithmTag::VaryingGoalsActiveInactive => {
                            varying_goals_run(&schedule, &config, &ActiveInactive::new(self.gene_length)?, None)
                        }
                        _ => varying_goals_run(&schedule, &config, &Plain, None),
                    }
                }
            }
        })();
        let mut row = RunRow {
            phase: self.phase.to_string(),
            algorithm: self.algo.as_str().to_string(),
            population: base.population_size,
            generations: base.max_generations,
            epoch: self.epoch,
            gene_length: self.gene_length,
            source: self.source.clone(),
            target: self.target.map(|t| t.name().to_string()).unwrap_or_default(),
            run: self.run,
            seed: self.seed,
            best_hypervolume: 0.0,
            threshold: self.stop.unwrap_or(0.0),
            success_checkpoint: None,
            evaluations_used: 0,
            generations_run: 0,
            status: "ok".into(),
        };
        match outcome {
            Ok(r) => {
                row.best_hypervolume = r.best_hypervolume;
                row.success_checkpoint = r.success_checkpoint;
                row.evaluations_used = r.evaluations_used;
                row.generations_run = r.generations_run;
                (row, Some(r))
            }
            Err(e) => {
                row.status = e.to_string();
                (row, None)
            }
        }
    }
}

fn execute_all(jobs: &[Job<'_>], base: &AlgoConfig) -> Vec<(RunRow, Option<RunResult>)> {
    jobs.par_iter().map(|j| j.execute(base)).collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Rows of one flexibility experiment at a fixed population size and
/// generation budget.
pub fn flexibility_rows(cfg: &ExperimentConfig, tasks: &[TaskSpec], algo: &AlgoConfig, cells: &mut u64) -> Result<Vec<RunRow>> {
    let mut ids = Cells(*cells);
    let runs = cfg.runs as u64;
    let base = cfg.base_seed;
    let (e, l) = (cfg.epoch, cfg.gene_length);

    // from scratch: each run's own best defines its success threshold
    let mut jobs = Vec::new();
    for t in tasks {
        let cell = ids.next();
        for r in 0..runs {
            jobs.push(Job {
                phase: "scratch",
                algo: AlgorithmTag::Baseline,
                source: String::new(),
                target: Some(t),
                goals: vec![],
                initial: None,
                stop: None,
                epoch: 0,
                gene_length: 1,
                run: r,
                seed: run_seed(base, cell, r),
            });
        }
    }
    let scratch = execute_all(&jobs, algo);
    let mut rows = Vec::new();
    let mut archives: BTreeMap<(String, u64), ParetoArchive> = BTreeMap::new();
    let mut reference = BTreeMap::new();
    for t in tasks {
        let bests: Vec<f64> = scratch
            .iter()
            .filter(|(row, res)| row.target == t.name() && res.is_some())
            .map(|(row, _)| row.best_hypervolume)
            .collect();
        let (mean, _) = mean_std(&bests);
        let r = cfg.reference_hv.get(t.name()).copied().unwrap_or(mean);
        reference.insert(t.name().to_string(), r);
    }
    for (mut row, res) in scratch {
        if let Some(res) = res {
            let own = cfg.threshold * res.best_hypervolume;
            row.threshold = own;
            row.success_checkpoint = checkpoint_reaching(&res, own);
            archives.insert((row.target.clone(), row.run), res.best_front);
        }
        rows.push(row);
    }
    let threshold_for = |t: &TaskSpec| -> Option<f64> {
        let r = reference[t.name()];
        (r > 0.0 && r.is_finite()).then_some(cfg.threshold * r)
    };

    // baseline adaption over ordered pairs
    let mut jobs = Vec::new();
    for t in tasks {
        for s in tasks.iter().filter(|s| s.name() != t.name()) {
            let cell = ids.next();
            for r in 0..runs {
                jobs.push(Job {
                    phase: "adapt",
                    algo: AlgorithmTag::Baseline,
                    source: s.name().to_string(),
                    target: Some(t),
                    goals: vec![],
                    initial: archives.get(&(s.name().to_string(), r)),
                    stop: Some(threshold_for(t).unwrap_or(1.0)),
                    epoch: 0,
                    gene_length: 1,
                    run: r,
                    seed: run_seed(base, cell, r),
                });
            }
        }
    }
    rows.extend(execute_all(&jobs, algo).into_iter().map(|(row, _)| row));

    // varying-goals training over unordered pairs, then adaption to the rest
    for (tag, gene_length) in [
        (AlgorithmTag::VaryingGoals, 1),
        (AlgorithmTag::VaryingGoalsActiveInactive, l),
    ] {
        let mut train = Vec::new();
        for (i, a) in tasks.iter().enumerate() {
            for b in &tasks[i + 1..] {
                let cell = ids.next();
                for r in 0..runs {
                    train.push(Job {
                        phase: "train",
                        algo: tag,
                        source: pair_name(a.name(), b.name()),
                        target: None,
                        goals: vec![a, b],
                        initial: None,
                        stop: None,
                        epoch: e,
                        gene_length,
                        run: r,
                        seed: run_seed(base, cell, r),
                    });
                }
            }
        }
        let trained = execute_all(&train, algo);
        let mut stored: BTreeMap<(String, u64), ParetoArchive> = BTreeMap::new();
        for (row, res) in trained {
            if let Some(res) = res {
                stored.insert((row.source.clone(), row.run), res.best_front);
            }
            rows.push(row);
        }
        let mut jobs = Vec::new();
        for t in tasks {
            for (i, a) in tasks.iter().enumerate() {
                for b in &tasks[i + 1..] {
                    if a.name() == t.name() || b.name() == t.name() {
                        continue;
                    }
                    let pair = pair_name(a.name(), b.name());
                    let cell = ids.next();
                    for r in 0..runs {
                        jobs.push(Job {
                            phase: "adapt",
                            algo: tag,
                            source: pair.clone(),
                            target: Some(t),
                            goals: vec![],
                            initial: stored.get(&(pair.clone(), r)),
                            stop: Some(threshold_for(t).unwrap_or(1.0)),
                            epoch: e,
                            gene_length,
                            run: r,
                            seed: run_seed(base, cell, r),
                        });
                    }
                }
            }
        }
        rows.extend(execute_all(&jobs, algo).into_iter().map(|(row, _)| row));
    }
    *cells = ids.0;
    Ok(rows)
}

/// Rows of the epoch / gene-length sweep: active-inactive varying-goals
/// training on the sweep pair and adaption to the sweep target.
pub fn epoch_gene_rows(cfg: &ExperimentConfig, catalog: &[MaterialParams], reference: Option<f64>, cells: &mut u64) -> Result<Vec<RunRow>> {
    let s = &cfg.sweep;
    if s.epochs.is_empty() && s.gene_lengths.is_empty() {
        return Ok(Vec::new());
    }
    let epochs = if s.epochs.is_empty() { vec![cfg.epoch] } else { s.epochs.clone() };
    let lengths = if s.gene_lengths.is_empty() { vec![cfg.gene_length] } else { s.gene_lengths.clone() };
    let a = cfg.task(catalog, &s.pair[0])?;
    let b = cfg.task(catalog, &s.pair[1])?;
    let target = cfg.task(catalog, &s.target)?;
    let runs = s.runs.unwrap_or(cfg.runs) as u64;
    let mut ids = Cells(*cells);
    let pair = pair_name(a.name(), b.name());
    let mut rows = Vec::new();
    let threshold = match reference {
        Some(r) if r > 0.0 => cfg.threshold * r,
        _ => return Err(Error::Config(format!("no reference hypervolume for sweep target '{}'", target.name()))),
    };
    for &e in &epochs {
        for &l in &lengths {
            let cell = ids.next();
            let train: Vec<Job> = (0..runs)
                .map(|r| Job {
                    phase: "sweep-train",
                    algo: AlgorithmTag::VaryingGoalsActiveInactive,
                    source: pair.clone(),
                    target: None,
                    goals: vec![&a, &b],
                    initial: None,
                    stop: None,
                    epoch: e,
                    gene_length: l,
                    run: r,
                    seed: run_seed(cfg.base_seed, cell, r),
                })
                .collect();
            let trained = execute_all(&train, &cfg.algorithm);
            let mut stored = BTreeMap::new();
            for (row, res) in trained {
                if let Some(res) = res {
                    stored.insert(row.run, res.best_front);
                }
                rows.push(row);
            }
            let cell = ids.next();
            let adapt_jobs: Vec<Job> = (0..runs)
                .map(|r| Job {
                    phase: "sweep-adapt",
                    algo: AlgorithmTag::VaryingGoalsActiveInactive,
                    source: pair.clone(),
                    target: Some(&target),
                    goals: vec![],
                    initial: stored.get(&r),
                    stop: Some(threshold),
                    epoch: e,
                    gene_length: l,
                    run: r,
                    seed: run_seed(cfg.base_seed, cell, r),
                })
                .collect();
            rows.extend(execute_all(&adapt_jobs, &cfg.algorithm).into_iter().map(|(row, _)| row));
        }
    }
    *cells = ids.0;
    Ok(rows)
}

/// All rows of a configured experiment: the base flexibility experiment,
/// one repetition per population sweep point, and the epoch / gene-length
/// sweep.
pub fn experiment_rows(cfg: &ExperimentConfig) -> Result<Vec<RunRow>> {
    cfg.validate()?;
    let tasks = cfg.tasks()?;
    let mut cells = 0u64;
    let mut rows = flexibility_rows(cfg, &tasks, &cfg.algorithm, &mut cells)?;
    for (&p, &g) in cfg.sweep.populations.iter().zip(&cfg.sweep.generations) {
        if p == cfg.algorithm.population_size && g == cfg.algorithm.max_generations {
            continue;
        }
        let algo = AlgoConfig { population_size: p, max_generations: g, ..cfg.algorithm.clone() };
        algo.validate()?;
        rows.extend(flexibility_rows(cfg, &tasks, &algo, &mut cells)?);
    }
    if !cfg.sweep.epochs.is_empty() || !cfg.sweep.gene_lengths.is_empty() {
        let catalog = cfg.catalog()?;
        let target = cfg.task(&catalog, &cfg.sweep.target)?;
        let base = render_tables(&rows)?;
        let reference = cfg
            .reference_hv
            .get(target.name())
            .copied()
            .or_else(|| base.first().and_then(|t| t.reference.iter().find(|r| r.material == target.name()).map(|r| r.mean)));
        rows.extend(epoch_gene_rows(cfg, &catalog, reference, &mut cells)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub material: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    /// Threshold applied to adaption runs targeting this material.
    pub adaption_threshold: f64,
}

/// One CE matrix: rows are targets, columns the from-scratch cost followed
/// by the sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeTable {
    pub algorithm: String,
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub scratch: Vec<Option<u64>>,
    /// `None` where undefined (source contains target) or no run succeeded.
    pub cells: Vec<Vec<Option<u64>>>,
    /// Whether each cell is defined at all.
    pub defined: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub label: String,
    pub worst: f64,
    pub average: f64,
    pub best: f64,
    /// Defined cells without any successful run, left out of the aggregate.
    pub failed_cells: usize,
}

/// Report tables of one (population, generations) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub population: usize,
    pub generations: usize,
    pub reference: Vec<ReferenceRow>,
    pub ce: Vec<CeTable>,
    pub aggregates: Vec<AggregateRow>,
}

/// Recomputes every report table from raw rows, one entry per
/// (population, generations) group in order of first appearance.
pub fn render_tables(rows: &[RunRow]) -> Result<Vec<Tables>> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for r in rows.iter().filter(|r| r.phase == "scratch") {
        if !groups.contains(&(r.population, r.generations)) {
            groups.push((r.population, r.generations));
        }
    }
    groups.into_iter().map(|(p, g)| render_group(rows, p, g)).collect()
}

fn effort(rows: &[&RunRow], granularity: u64) -> Result<Option<u64>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let checkpoints: Vec<Option<u64>> = rows.iter().map(|r| r.success_checkpoint).collect();
    computational_effort(&checkpoints, granularity, CE_PROBABILITY)
}

fn render_group(rows: &[RunRow], population: usize, generations: usize) -> Result<Tables> {
    let group: Vec<&RunRow> = rows
        .iter()
        .filter(|r| r.population == population && r.generations == generations)
        .collect();
    let mut materials: Vec<String> = Vec::new();
    for r in group.iter().filter(|r| r.phase == "scratch") {
        if !materials.contains(&r.target) {
            materials.push(r.target.clone());
        }
    }
    let granularity = population as u64;
    let mut reference = Vec::new();
    let mut scratch_ce = Vec::new();
    for m in &materials {
        let runs: Vec<&RunRow> = group
            .iter()
            .copied()
            .filter(|r| r.phase == "scratch" && &r.target == m && r.status == "ok")
            .collect();
        let bests: Vec<f64> = runs.iter().map(|r| r.best_hypervolume).collect();
        let (mean, std) = mean_std(&bests);
        let adaption_threshold = group
            .iter()
            .find(|r| r.phase == "adapt" && &r.target == m)
            .map_or(f64::NAN, |r| r.threshold);
        reference.push(ReferenceRow { material: m.clone(), mean, std, runs: runs.len(), adaption_threshold });
        scratch_ce.push(effort(&runs, granularity)?);
    }

    let mut ce = Vec::new();
    let mut aggregates = Vec::new();
    let scratch_costs: Vec<f64> = scratch_ce.iter().flatten().map(|&c| c as f64).collect();
    if let Ok(a) = cost_aggregates(&scratch_costs) {
        aggregates.push(aggregate_row("scratch:baseline", a, scratch_ce.iter().filter(|c| c.is_none()).count()));
    }
    for tag in [AlgorithmTag::Baseline, AlgorithmTag::VaryingGoals, AlgorithmTag::VaryingGoalsActiveInactive] {
        let adapt_rows: Vec<&RunRow> = group
            .iter()
            .copied()
            .filter(|r| r.phase == "adapt" && r.algorithm == tag.as_str())
            .collect();
        if adapt_rows.is_empty() {
            continue;
        }
        let sources: Vec<String> = match tag {
            AlgorithmTag::Baseline => materials.clone(),
            _ => {
                let mut v = Vec::new();
                for (i, a) in materials.iter().enumerate() {
                    for b in &materials[i + 1..] {
                        v.push(pair_name(a, b));
                    }
                }
                v
            }
        };
        let mut cells = Vec::new();
        let mut defined = Vec::new();
        for t in &materials {
            let mut row = Vec::new();
            let mut def = Vec::new();
            for s in &sources {
                let runs: Vec<&RunRow> = adapt_rows
                    .iter()
                    .copied()
                    .filter(|r| &r.source == s && &r.target == t)
                    .collect();
                def.push(!runs.is_empty());
                row.push(effort(&runs, granularity)?);
            }
            cells.push(row);
            defined.push(def);
        }
        let costs: Vec<f64> = cells.iter().flatten().flatten().map(|&c| c as f64).collect();
        let failed = cells
            .iter()
            .flatten()
            .zip(defined.iter().flatten())
            .filter(|(c, d)| **d && c.is_none())
            .count();
        if let Ok(a) = cost_aggregates(&costs) {
            aggregates.push(aggregate_row(&format!("adaption:{}", tag.as_str()), a, failed));
        }
        ce.push(CeTable {
            algorithm: tag.as_str().to_string(),
            sources,
            targets: materials.clone(),
            scratch: scratch_ce.clone(),
            cells,
            defined,
        });
    }
    Ok(Tables { population, generations, reference, ce, aggregates })
}

fn aggregate_row(label: &str, a: CostAggregate, failed_cells: usize) -> AggregateRow {
    AggregateRow { label: label.to_string(), worst: a.worst, average: a.average, best: a.best, failed_cells }
}

fn cell_text(c: Option<u64>, defined: bool) -> String {
    match (defined, c) {
        (false, _) => "-".into(),
        (true, Some(v)) => v.to_string(),
        (true, None) => "NA".into(),
    }
}

/// `material,mean,std,runs,adaption_threshold`.
pub fn reference_csv(t: &Tables) -> String {
    let mut s = String::from("material,mean,std,runs,adaption_threshold\n");
    for r in &t.reference {
        let _ = writeln!(s, "{},{},{},{},{}", r.material, r.mean, r.std, r.runs, r.adaption_threshold);
    }
    s
}

/// `target,scratch,<sources...>`; `-` marks undefined cells, `NA` cells
/// where no run succeeded.
pub fn ce_csv(t: &CeTable) -> String {
    let mut s = String::from("target,scratch");
    for src in &t.sources {
        let _ = write!(s, ",{src}");
    }
    s.push('\n');
    for (i, target) in t.targets.iter().enumerate() {
        let _ = write!(s, "{target},{}", cell_text(t.scratch[i], true));
        for (c, d) in t.cells[i].iter().zip(&t.defined[i]) {
            let _ = write!(s, ",{}", cell_text(*c, *d));
        }
        s.push('\n');
    }
    s
}

/// `algorithm,worst,average,best,failed_cells`.
pub fn aggregates_csv(t: &Tables) -> String {
    let mut s = String::from("algorithm,worst,average,best,failed_cells\n");
    for a in &t.aggregates {
        let _ = writeln!(s, "{},{},{:.1},{},{}", a.label, a.worst, a.average, a.best, a.failed_cells);
    }
    s
}

/// `epoch,gene_length,train_mean_best_hv,adapt_mean_best_hv,adapt_ce`.
pub fn epoch_gene_csv(rows: &[RunRow]) -> Result<Option<String>> {
    let sweep: Vec<&RunRow> = rows.iter().filter(|r| r.phase.starts_with("sweep-")).collect();
    if sweep.is_empty() {
        return Ok(None);
    }
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for r in &sweep {
        if !keys.contains(&(r.epoch, r.gene_length)) {
            keys.push((r.epoch, r.gene_length));
        }
    }
    let mut s = String::from("epoch,gene_length,train_mean_best_hv,adapt_mean_best_hv,adapt_ce\n");
    for (e, l) in keys {
        let pick = |phase: &str| -> Vec<&RunRow> {
            sweep.iter().copied().filter(|r| r.phase == phase && r.epoch == e && r.gene_length == l && r.status == "ok").collect()
        };
        let train = pick("sweep-train");
        let adapt = pick("sweep-adapt");
        let (tm, _) = mean_std(&train.iter().map(|r| r.best_hypervolume).collect::<Vec<_>>());
        let (am, _) = mean_std(&adapt.iter().map(|r| r.best_hypervolume).collect::<Vec<_>>());
        let granularity = adapt.first().map_or(1, |r| r.population as u64);
        let ce = effort(&adapt, granularity)?;
        let _ = writeln!(s, "{e},{l},{tm},{am},{}", cell_text(ce, true));
    }
    Ok(Some(s))
}

fn ce_file_name(algorithm: &str) -> String {
    match algorithm {
        "baseline" => "ce_baseline.csv".into(),
        "varying-goals" => "ce_varying_goals.csv".into(),
        _ => "ce_varying_goals_ai.csv".into(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the report bundle for `rows` into `dir`: tables of the first
/// group at the top level, later groups under `pop<P>-gen<G>/`.
pub fn write_report(rows: &[RunRow], dir: &Path) -> Result<Vec<Tables>> {
    let tables = render_tables(rows)?;
    for (i, t) in tables.iter().enumerate() {
        let sub = if i == 0 { dir.to_path_buf() } else { dir.join(format!("pop{}-gen{}", t.population, t.generations)) };
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        write_text(&sub.join("reference_hv.csv"), &reference_csv(t))?;
        for c in &t.ce {
            write_text(&sub.join(ce_file_name(&c.algorithm)), &ce_csv(c))?;
        }
        write_text(&sub.join("aggregates.csv"), &aggregates_csv(t))?;
        let json = serde_json::to_string_pretty(t).map_err(|e| Error::Config(e.to_string()))?;
        write_text(&sub.join("tables.json"), &(json + "\n"))?;
    }
    if let Some(s) = epoch_gene_csv(rows)? {
        write_text(&dir.join("sweep_epoch_gene.csv"), &s)?;
    }
    Ok(tables)
}

/// Runs the configured experiment and writes `runs.csv` plus the report
/// bundle into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Tables>> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = experiment_rows(cfg)?;
    write_runs_csv(&rows, &dir.join("runs.csv"))?;
    let config_text = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&dir.join("config.toml"), &config_text)?;
    write_report(&rows, dir)
}

/// Mean reference hypervolumes from a `reference_hv.csv`.
pub fn read_reference_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    #[derive(Deserialize)]
    struct Row {
        material: String,
        mean: f64,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = BTreeMap::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        out.insert(row.material, row.mean);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_separate_cells() {
        assert_eq!(run_seed(0, 0, 5), 5);
        assert_eq!(run_seed(0, 1, 0), 1 << 32);
        assert_eq!(run_seed(7, 1, 3), 7 ^ ((1 << 32) + 3));
    }

    #[test]
    fn config_defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::parse(&text, Path::new("inline")).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_rejects_unknown_and_bad_values() {
        assert!(ExperimentConfig::parse("bogus = 1", Path::new("x")).is_err());
        let cfg = ExperimentConfig::parse("runs = 0", Path::new("x")).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("[sweep]\npopulations = [50]", Path::new("x")).unwrap();
        assert!(cfg.validate().is_err());
    }
}
