use std::path::Path;
use std::process::{Command, Output};

fn cutflex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutflex")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    let text = stdout(o);
    let start = text.find('{').expect("json object on stdout");
    serde_json::from_str(&text[start..]).expect("valid json")
}

#[test]
fn simulate_echoes_golden_record() {
    let o = cutflex(&["simulate", "--material", "steel", "--speed", "2", "--angle", "0", "--depth", "1e-4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    let close = |a: f64, b: f64| ((a - b) / b).abs() < 1e-9;
    assert!(close(v["outputs"]["fc"].as_f64().unwrap(), 40.32193905075255));
    assert!(close(v["outputs"]["ft"].as_f64().unwrap(), 22.081273507496558));
    assert_eq!(v["outputs"]["n_layers"], 10000);
    assert_eq!(v["feasible"], true);
}

#[test]
fn simulate_rejects_bad_input() {
    let o = cutflex(&["simulate", "--material", "unobtainium"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unobtainium"));
    let o = cutflex(&["simulate", "--speed", "9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cutting_speed"));
    let o = cutflex(&["simulate", "--angle", "-2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cutting_angle"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cutflex(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cutflex(&["optimize", "--algo", "nope", "--out", "x"]).status.code(), Some(1));
    assert_eq!(cutflex(&["--help"]).status.code(), Some(0));
}

#[test]
fn sample_is_deterministic() {
    let a = cutflex(&["sample", "--material", "tungsten-alloy", "-n", "200", "--seed", "5"]);
    let b = cutflex(&["sample", "--material", "tungsten-alloy", "-n", "200", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let one = json(&cutflex(&["sample", "-n", "1"]));
    assert!(one["front_size"].as_u64().unwrap() <= 1);
}

#[test]
fn optimize_adapt_hv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("steel.json");
    let archive = archive.to_str().unwrap();
    let o = cutflex(&["optimize", "--material", "steel", "--pop", "12", "--gens", "3", "--seed", "1", "--out", archive]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = stdout(&o);
    assert!(trace.starts_with("generation,goal,evaluations,hypervolume,best_hypervolume\n"));
    assert_eq!(trace.lines().count(), 1 + 4);

    let hv = json(&cutflex(&["hv", archive]));
    assert_eq!(hv["hypervolume"], hv["stored_best_hypervolume"]);

    let missing = cutflex(&["adapt", archive, "--material", "tungsten-alloy"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("from-scratch campaign"));

    let refs = dir.path().join("reference_hv.csv");
    std::fs::write(&refs, "material,mean,std,runs,adaption_threshold\ntungsten-alloy,0.0001,0,1,0\n").unwrap();
    let o = cutflex(&["adapt", archive, "--material", "tungsten-alloy", "--pop", "12", "--gens", "3", "--reference", refs.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["success_checkpoint"], 12);
}

#[test]
fn varying_goals_archive_keeps_genotype() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pair.json");
    let o = cutflex(&[
        "optimize", "--algo", "vg-ai", "--materials", "steel,tungsten-alloy", "--pop", "8", "--gens", "4", "--epoch", "2",
        "--gene-length", "3", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["algorithm"], "varying-goals+active-inactive");
    assert_eq!(v["gene_length"], 3);
    assert_eq!(v["individuals"][0]["genotype"].as_array().unwrap().len(), 12);
    let o = cutflex(&["optimize", "--algo", "vg", "--materials", "steel", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn io_and_schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format_version\": 7}").unwrap();
    let o = cutflex(&["hv", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("format_version"));
    assert_eq!(cutflex(&["hv", "/nonexistent/front.json"]).status.code(), Some(2));
    let o = cutflex(&["optimize", "--pop", "4", "--gens", "1", "--out", "/nonexistent/dir/front.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty(), "no compute before the output path is claimed");
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn tiny_experiment_emits_complete_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bundle");
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        format!(
            "runs = 1\nbase_seed = 2\noutput_dir = {:?}\n[algorithm]\npopulation_size = 4\nmax_generations = 1\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = cutflex(&["experiment", "--config", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["runs.csv", "reference_hv.csv", "ce_baseline.csv", "ce_varying_goals.csv", "ce_varying_goals_ai.csv", "aggregates.csv", "tables.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    // 4 scratch + 12 ordered pairs + 2 x (6 training + 12 adaption)
    assert_eq!(read(&out, "runs.csv").lines().count(), 1 + 4 + 12 + 2 * (6 + 12));
    let ce = read(&out, "ce_baseline.csv");
    assert_eq!(ce.lines().count(), 5);
    assert_eq!(ce.lines().nth(1).unwrap().split(',').nth(2), Some("-"));
    for line in ce.lines().skip(1) {
        for cell in line.split(',').skip(1) {
            assert!(cell == "-" || cell == "NA" || cell.parse::<u64>().unwrap() % 4 == 0, "{cell}");
        }
    }

    let again = dir.path().join("again");
    let o = cutflex(&["experiment", "--config", config.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["runs.csv", "ce_baseline.csv", "aggregates.csv", "tables.json"] {
        assert_eq!(read(&out, f), read(&again, f), "{f} differs between identical runs");
    }

    let rendered = dir.path().join("rendered");
    let o = cutflex(&["report", out.join("runs.csv").to_str().unwrap(), "--out", rendered.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&out, "ce_varying_goals_ai.csv"), read(&rendered, "ce_varying_goals_ai.csv"));
}

#[test]
fn experiment_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, "runs = 1\nunknown_key = 3\n").unwrap();
    assert_eq!(cutflex(&["experiment", "--config", config.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&config, "runs = 0\n").unwrap();
    assert_eq!(cutflex(&["experiment", "--config", config.to_str().unwrap()]).status.code(), Some(1));
}
