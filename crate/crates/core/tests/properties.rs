//! Invariants checked over generated inputs.

use std::sync::atomic::{AtomicU64, Ordering};

use proptest::prelude::*;

use cutflex_core::adapt::{decode, encode, varying_goals_run, GoalSchedule};
use cutflex_core::metrics::hypervolume_unit;
use cutflex_core::nsga2::{self, polynomial_mutation, run_rng, sbx_crossover};
use cutflex_core::oxley::{Bound, PROCESS_BOUNDS};
use cutflex_core::{
    builtin_materials, computational_effort, flow_stress, layer_count, normalize, solve_cut, AlgoConfig, EvalResult,
    ObjectiveVector, ParetoArchive, Problem, ProcessParams, TaskSpec,
};

fn in_box() -> impl Strategy<Value = Vec<f64>> {
    PROCESS_BOUNDS
        .iter()
        .map(|b| b.lower..=b.upper)
        .collect::<Vec<_>>()
}

fn unit_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, d)
}

proptest! {
    #[test]
    fn flow_stress_monotone(m in 0usize..4, e in 0.0..2.0f64, de in 0.0..1.0f64, lr in 0.0..6.0f64, dlr in 0.0..3.0f64, u in 0.0..1.0f64, du in 0.0..1.0f64) {
        let mat = &builtin_materials()[m];
        let rate = mat.jc_eps0 * 10f64.powf(lr);
        let t = mat.tw + u * (mat.tm - mat.tw);
        let t2 = (t + du * (mat.tm - t)).min(mat.tm);
        let s = flow_stress(mat, e, rate, t).unwrap();
        prop_assert!(flow_stress(mat, e + de, rate, t).unwrap() >= s);
        prop_assert!(flow_stress(mat, e, rate * 10f64.powf(dlr), t).unwrap() >= s);
        prop_assert!(flow_stress(mat, e, rate, t2).unwrap() <= s);
        prop_assert!(s >= 0.0);
    }

    #[test]
    fn layer_count_covers_depth(d in 1e-4..10.0f64, c in 1e-5..1e-2f64) {
        let n = layer_count(d, c).unwrap();
        prop_assert!(n >= 1);
        prop_assert!(n as f64 * c >= d);
        prop_assert!(n == 1 || ((n - 1) as f64) * c < d);
    }

    #[test]
    fn normalize_is_monotone_and_bounded(a in prop::array::uniform4(1.0..1e9f64), f in 1.0..100.0f64, k in 0usize..4) {
        let base = ObjectiveVector::from_array(a);
        let mut bigger = a;
        bigger[k] *= f;
        let (x, y) = (normalize(&base), normalize(&ObjectiveVector::from_array(bigger)));
        prop_assert!(x.iter().chain(&y).all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(y[k] >= x[k]);
        for j in (0..4).filter(|&j| j != k) {
            prop_assert_eq!(x[j], y[j]);
        }
    }

    #[test]
    fn hypervolume_monotone_under_insertion(front in prop::collection::vec(unit_point(4), 0..12), extra in unit_point(4)) {
        let h = hypervolume_unit(&front);
        let mut more = front.clone();
        more.push(extra);
        prop_assert!(hypervolume_unit(&more) >= h - 1e-12);
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn hypervolume_ignores_order(mut front in prop::collection::vec(unit_point(3), 1..10)) {
        let h = hypervolume_unit(&front);
        front.reverse();
        prop_assert!((hypervolume_unit(&front) - h).abs() < 1e-12);
    }

    #[test]
    fn effort_ignores_run_order(mut runs in prop::collection::vec(prop::option::of(1u64..=20), 1..40)) {
        let runs_scaled: Vec<Option<u64>> = runs.iter().map(|r| r.map(|k| k * 50)).collect();
        let e = computational_effort(&runs_scaled, 50, 0.99).unwrap();
        runs.reverse();
        let reversed: Vec<Option<u64>> = runs.iter().map(|r| r.map(|k| k * 50)).collect();
        prop_assert_eq!(computational_effort(&reversed, 50, 0.99).unwrap(), e);
        if let Some(c) = e {
            prop_assert!(c > 0 && c % 50 == 0);
        }
    }

    #[test]
    fn encode_decode_round_trip(l in 1usize..6, sel in prop::array::uniform3(0usize..6), slots in prop::collection::vec(0.0..1.0f64, 18), p in in_box()) {
        let mut g = Vec::new();
        for (i, b) in PROCESS_BOUNDS.iter().enumerate() {
            g.push((sel[i] % l + 1) as f64);
            for s in 0..l {
                g.push(b.lower + slots[i * 6 + s] * b.width());
            }
        }
        let e = encode(&g, &p, l).unwrap();
        prop_assert_eq!(decode(&e, l).unwrap(), p);
        prop_assert_eq!(encode(&g, &decode(&g, l).unwrap(), l).unwrap(), g);
    }

    #[test]
    fn variation_respects_bounds(a in in_box(), b in in_box(), seed in any::<u64>(), eta in 1.0..50.0f64) {
        let mut rng = run_rng(seed, 0);
        let (c1, c2) = sbx_crossover(&a, &b, eta, &PROCESS_BOUNDS, &mut rng);
        let m = polynomial_mutation(&c1, eta, 1.0, &PROCESS_BOUNDS, &mut rng);
        for x in [&c1, &c2, &m] {
            prop_assert!(x.iter().zip(&PROCESS_BOUNDS).all(|(v, b): (&f64, &Bound)| b.contains(*v)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forces_stay_in_envelope(m in 0usize..4, p in in_box()) {
        let mat = &builtin_materials()[m];
        if let Ok(out) = solve_cut(mat, &ProcessParams::from_phenotype(&p).unwrap(), 1.0) {
            prop_assert!(out.fc.abs() < 1e6 && out.ft.abs() < 1e6);
            prop_assert!(out.fc.is_finite() && out.ft.is_finite() && out.chip_thickness > 0.0);
        }
    }
}

/// Wraps a task and counts calls into the evaluator.
struct Counted<'a> {
    task: &'a TaskSpec,
    calls: AtomicU64,
}

impl Problem for Counted<'_> {
    fn name(&self) -> &str {
        Problem::name(self.task)
    }
    fn bounds(&self) -> &[Bound] {
        Problem::bounds(self.task)
    }
    fn evaluate(&self, phenotype: &[f64]) -> EvalResult {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Problem::evaluate(self.task, phenotype)
    }
}

#[test]
fn evaluation_accounting_matches_evaluator_counter() {
    let task = TaskSpec::new(builtin_materials().remove(0));
    for (pop, gens) in [(4, 0), (8, 3), (10, 5)] {
        let counted = Counted { task: &task, calls: AtomicU64::new(0) };
        let cfg = AlgoConfig { population_size: pop, max_generations: gens, seed: 1, ..AlgoConfig::default() };
        let r = nsga2::run(&counted, &cfg, None, None).unwrap();
        assert_eq!(r.evaluations_used, counted.calls.load(Ordering::Relaxed));
        assert_eq!(r.evaluations_used, (pop * (gens + 1)) as u64);
        assert_eq!(r.generations_run, gens as u64);
    }
}

#[test]
fn goal_switches_are_counted() {
    let mats = builtin_materials();
    let a = TaskSpec::new(mats[0].clone());
    let b = TaskSpec::new(mats[1].clone());
    let counters = [Counted { task: &a, calls: AtomicU64::new(0) }, Counted { task: &b, calls: AtomicU64::new(0) }];
    let goals: Vec<&dyn Problem> = counters.iter().map(|c| c as &dyn Problem).collect();
    let cfg = AlgoConfig { population_size: 6, max_generations: 7, seed: 2, ..AlgoConfig::default() };
    let spec = nsga2::RunSpec {
        config: &cfg,
        representation: &nsga2::Plain,
        algorithm: cutflex_core::AlgorithmTag::VaryingGoals,
        epoch: 2,
        initial: None,
        stop_threshold: None,
    };
    let r = nsga2::evolve(&goals, &spec).unwrap();
    let calls: u64 = counters.iter().map(|c| c.calls.load(Ordering::Relaxed)).sum();
    // generations 1..=7 with epoch 2 switch goals at 3, 5 and 7
    assert_eq!(r.evaluations_used, calls);
    assert_eq!(calls, 6 * (7 + 1) + 6 * 3);
}

#[test]
fn zero_generations_stores_initial_front() {
    let task = TaskSpec::new(builtin_materials().remove(0));
    let cfg = AlgoConfig { population_size: 20, max_generations: 0, seed: 9, ..AlgoConfig::default() };
    let r = nsga2::run(&task, &cfg, None, None).unwrap();
    assert_eq!(r.generations_run, 0);
    assert_eq!(r.best_front.generation, 0);
    assert_eq!(r.trace.len(), 1);
    assert!(!r.best_front.individuals.is_empty());
}

#[test]
fn archive_round_trip_is_byte_identical() {
    let task = TaskSpec::new(builtin_materials().remove(3));
    let cfg = AlgoConfig { population_size: 12, max_generations: 2, seed: 4, ..AlgoConfig::default() };
    let r = nsga2::run(&task, &cfg, None, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("front.json");
    r.best_front.save(&path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let back = ParetoArchive::load(&path).unwrap();
    assert_eq!(back, r.best_front);
    back.save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn archive_version_and_schema_are_checked() {
    let task = TaskSpec::new(builtin_materials().remove(0));
    let cfg = AlgoConfig { population_size: 8, max_generations: 1, seed: 4, ..AlgoConfig::default() };
    let text = nsga2::run(&task, &cfg, None, None).unwrap().best_front.to_json().unwrap();
    let origin = std::path::Path::new("mem");
    let future = text.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
    assert!(matches!(ParetoArchive::from_json(&future, origin), Err(cutflex_core::Error::Schema { .. })));
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["individuals"][0]["phenotype"][0] = serde_json::json!(99.0);
    assert!(ParetoArchive::from_json(&v.to_string(), origin).is_err());
    v["individuals"] = serde_json::json!([]);
    assert!(ParetoArchive::from_json(&v.to_string(), origin).is_err());
}

#[test]
fn seeded_runs_are_reproducible() {
    let mats = builtin_materials();
    let schedule = GoalSchedule::new(vec![TaskSpec::new(mats[0].clone()), TaskSpec::new(mats[2].clone())], 2).unwrap();
    let cfg = AlgoConfig { population_size: 8, max_generations: 5, seed: 17, ..AlgoConfig::default() };
    let ai = cutflex_core::ActiveInactive::new(3).unwrap();
    let a = varying_goals_run(&schedule, &cfg, &ai, None).unwrap();
    let b = varying_goals_run(&schedule, &cfg, &ai, None).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.best_front.to_json().unwrap(), b.best_front.to_json().unwrap());
}

#[test]
fn adaption_meeting_threshold_at_start_costs_one_population() {
    let mats = builtin_materials();
    let source = TaskSpec::new(mats[0].clone());
    let target = TaskSpec::new(mats[1].clone());
    let cfg = AlgoConfig { population_size: 10, max_generations: 4, seed: 3, ..AlgoConfig::default() };
    let trained = nsga2::run(&source, &cfg, None, None).unwrap();
    let r = cutflex_core::harness::adapt(&trained.best_front, &target, &cfg, 1e-9).unwrap();
    assert_eq!(r.success_checkpoint, Some(10));
    assert_eq!(r.evaluations_used, 10);
}
