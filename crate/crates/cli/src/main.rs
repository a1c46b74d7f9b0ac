//! `cutflex`: command-line front end of the cutting flexibility benchmark.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cutflex_core::harness::{self, Algo, ExperimentConfig};
use cutflex_core::{solve_cut, AlgoConfig, Error, ParetoArchive, ProcessParams, TaskSpec};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cutflex", version, about = "Orthogonal-cutting optimization and adaption benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one cut and print forces, chip geometry and objectives.
    Simulate(SimulateArgs),
    /// Random-sample a task and print its approximate front.
    Sample(SampleArgs),
    /// Optimize from scratch and store the best front.
    Optimize(OptimizeArgs),
    /// Adapt a stored front to a target material.
    Adapt(AdaptArgs),
    /// Run the configured flexibility experiment and write the report bundle.
    Experiment(ExperimentArgs),
    /// Hypervolume of a stored front.
    Hv(HvArgs),
    /// Re-render report tables from a raw runs.csv.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Baseline,
    Vg,
    VgAi,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Algo {
        match a {
            AlgoArg::Baseline => Algo::Baseline,
            AlgoArg::Vg => Algo::VaryingGoals,
            AlgoArg::VgAi => Algo::VaryingGoalsAi,
        }
    }
}

/// Material selection shared by the task-level commands.
#[derive(Args)]
struct TaskArgs {
    #[arg(long, default_value = "steel")]
    material: String,
    /// Extra material catalog (TOML, `[[material]]` tables).
    #[arg(long)]
    config: Option<PathBuf>,
}

/// NSGA-II parameters; unset values keep the defaults.
#[derive(Args)]
struct AlgoArgs {
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl AlgoArgs {
    fn config(&self) -> AlgoConfig {
        let d = AlgoConfig::default();
        AlgoConfig {
            population_size: self.pop.unwrap_or(d.population_size),
            max_generations: self.gens.unwrap_or(d.max_generations),
            seed: self.seed,
            ..d
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Cutting speed in m/s.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    speed: f64,
    /// Rake angle in radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    angle: f64,
    /// Uncut chip thickness per layer.
    #[arg(long, default_value_t = 1.0e-4, allow_negative_numbers = true)]
    depth: f64,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Number of uniform samples.
    #[arg(short = 'n', long = "samples", default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the front as CSV here instead of listing it on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long, default_value = "steel")]
    material: String,
    /// Goal materials of a varying-goals run, comma separated.
    #[arg(long, value_delimiter = ',')]
    materials: Vec<String>,
    #[arg(long, value_enum, default_value = "baseline")]
    algo: AlgoArg,
    #[command(flatten)]
    algo_args: AlgoArgs,
    #[arg(long, default_value_t = cutflex_core::adapt::DEFAULT_EPOCH)]
    epoch: usize,
    #[arg(long, default_value_t = cutflex_core::adapt::DEFAULT_GENE_LENGTH)]
    gene_length: usize,
    /// Archive path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AdaptArgs {
    /// Stored front to seed from.
    archive: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    algo_args: AlgoArgs,
    /// Fraction of the reference hypervolume counted as success.
    #[arg(long, default_value_t = 0.99)]
    threshold: f64,
    /// Reference hypervolume of the target.
    #[arg(long)]
    reference_hv: Option<f64>,
    /// `reference_hv.csv` of a from-scratch campaign.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Write the adapted front here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long)]
    epoch: Option<usize>,
    #[arg(long)]
    gene_length: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    materials: Vec<String>,
}

#[derive(Args)]
struct HvArgs {
    archive: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Raw per-run table written by `experiment`.
    runs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Sample(a) => sample(a),
        Command::Optimize(a) => optimize(a),
        Command::Adapt(a) => adapt(a),
        Command::Experiment(a) => experiment(a),
        Command::Hv(a) => hv(a),
        Command::Report(a) => report(a),
    }
}

fn task_for(material: &str, catalog: Option<&Path>) -> Result<TaskSpec, Error> {
    let cfg = ExperimentConfig { catalog: catalog.map(Path::to_path_buf), ..ExperimentConfig::default() };
    cfg.task(&cfg.catalog()?, material)
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    let task = task_for(&a.task.material, a.task.config.as_deref())?;
    let proc = ProcessParams::new(a.speed, a.angle, a.depth);
    proc.validate()?;
    let outputs = solve_cut(&task.material, &proc, task.total_depth)?;
    let eval = cutflex_core::evaluate(&task, &proc);
    print_json(&json!({
        "material": task.name(),
        "process": to_json(&proc),
        "outputs": to_json(&outputs),
        "feasible": eval.feasible,
        "violation": eval.violation,
        "objectives": to_json(&eval.objectives),
    }));
    Ok(())
}

fn sample(a: SampleArgs) -> Result<(), Error> {
    if a.samples == 0 {
        return Err(Error::Config("--samples must be at least 1".into()));
    }
    let task = task_for(&a.task.material, a.task.config.as_deref())?;
    let s = harness::sample(&task, a.samples, a.seed);
    let rows: Vec<_> = s
        .front
        .iter()
        .map(|(p, o)| json!({"phenotype": p, "objectives": to_json(o)}))
        .collect();
    if let Some(out) = &a.out {
        let mut text = String::from("cutting_speed,cutting_angle,cutting_depth,production_time,tool_wear,abs_fc,abs_ft\n");
        for (p, o) in &s.front {
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p[0], p[1], p[2], o.production_time, o.tool_wear, o.abs_fc, o.abs_ft
            ));
        }
        std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
    }
    let mut report = json!({
        "material": s.material,
        "samples": s.samples,
        "feasible": s.feasible,
        "front_size": s.front.len(),
        "hypervolume": s.hypervolume,
    });
    if a.out.is_none() {
        report["front"] = serde_json::Value::Array(rows);
    }
    print_json(&report);
    Ok(())
}

/// Opens `path` for writing so an unusable destination fails before any
/// computation.
fn claim(path: &Path) -> Result<File, Error> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn optimize(a: OptimizeArgs) -> Result<(), Error> {
    let algo: Algo = a.algo.into();
    let names = if a.materials.is_empty() { vec![a.material.clone()] } else { a.materials.clone() };
    let tasks = names
        .iter()
        .map(|m| task_for(m, a.config.as_deref()))
        .collect::<Result<Vec<_>, _>>()?;
    let config = a.algo_args.config();
    config.validate()?;
    let mut file = claim(&a.out)?;
    let result = harness::optimize(&tasks, algo, &config, a.epoch, a.gene_length)?;
    if result.best_front.individuals.is_empty() {
        drop(file);
        let _ = std::fs::remove_file(&a.out);
        return Err(Error::ModelDomain("no feasible solution found; nothing to store".into()));
    }
    file.write_all(result.best_front.to_json()?.as_bytes()).map_err(|e| Error::io(&a.out, e))?;
    print!("{}", harness::trace_csv(&result.trace));
    eprintln!(
        "{}: best hypervolume {} after {} generations, {} evaluations; front of {} stored in {}",
        algo.tag().as_str(),
        result.best_hypervolume,
        result.generations_run,
        result.evaluations_used,
        result.best_front.individuals.len(),
        a.out.display()
    );
    Ok(())
}

fn adapt(a: AdaptArgs) -> Result<(), Error> {
    let archive = ParetoArchive::load(&a.archive)?;
    let task = task_for(&a.task.material, a.task.config.as_deref())?;
    let reference = match (a.reference_hv, &a.reference) {
        (Some(h), _) => h,
        (None, Some(path)) => harness::read_reference_csv(path)?
            .get(task.name())
            .copied()
            .ok_or_else(|| Error::Config(format!("{} has no reference hypervolume for '{}'", path.display(), task.name())))?,
        (None, None) => {
            return Err(Error::Config(format!(
                "no reference hypervolume for '{}': run the from-scratch campaign first (`cutflex experiment`) and pass --reference <reference_hv.csv>, or give --reference-hv",
                task.name()
            )))
        }
    };
    let threshold = cutflex_core::success_threshold(reference, a.threshold)?;
    let config = a.algo_args.config();
    let out = a.out.as_deref().map(claim).transpose()?;
    let result = harness::adapt(&archive, &task, &config, threshold)?;
    if let (Some(mut f), Some(path)) = (out, &a.out) {
        f.write_all(result.best_front.to_json()?.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    print!("{}", harness::trace_csv(&result.trace));
    print_json(&json!({
        "target": task.name(),
        "reference_hypervolume": reference,
        "threshold": threshold,
        "best_hypervolume": result.best_hypervolume,
        "success_checkpoint": result.success_checkpoint,
        "evaluations_used": result.evaluations_used,
        "generations_run": result.generations_run,
    }));
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), Error> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.out {
        cfg.output_dir = v;
    }
    if let Some(v) = a.runs {
        cfg.runs = v;
    }
    if let Some(v) = a.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = a.pop {
        cfg.algorithm.population_size = v;
    }
    if let Some(v) = a.gens {
        cfg.algorithm.max_generations = v;
    }
    if let Some(v) = a.epoch {
        cfg.epoch = v;
    }
    if let Some(v) = a.gene_length {
        cfg.gene_length = v;
    }
    if let Some(v) = a.threshold {
        cfg.threshold = v;
    }
    if !a.materials.is_empty() {
        cfg.materials = a.materials;
    }
    let tables = harness::run_experiment(&cfg)?;
    for t in &tables {
        println!("population {} / generations {}", t.population, t.generations);
        print!("{}", harness::reference_csv(t));
        print!("{}", harness::aggregates_csv(t));
    }
    eprintln!("report bundle written to {}", cfg.output_dir.display());
    Ok(())
}

fn hv(a: HvArgs) -> Result<(), Error> {
    let archive = ParetoArchive::load(&a.archive)?;
    print_json(&json!({
        "tasks": archive.tasks,
        "individuals": archive.individuals.len(),
        "hypervolume": harness::archive_hypervolume(&archive),
        "stored_best_hypervolume": archive.best_hypervolume,
    }));
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), Error> {
    let rows = harness::read_runs_csv(&a.runs)?;
    let tables = harness::write_report(&rows, &a.out)?;
    for t in &tables {
        print!("{}", harness::aggregates_csv(t));
    }
    Ok(())
}
