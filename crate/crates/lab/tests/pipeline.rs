use std::fs;
use std::path::Path;

use boundary_lab::config::RunConfig;
use boundary_lab::pipeline::{run_pipeline, Stage};
use boundary_lab::tables::TABLE_NAMES;
use boundary_lab::LabError;

fn small(out: &Path, stages: Vec<Stage>) -> RunConfig {
    let mut c = RunConfig { out: out.to_path_buf(), stages, seed: 11, ..RunConfig::default() };
    c.simulation.n = 2_000;
    c.spectest.resamples = 100;
    c
}

fn schema(name: &str) -> serde_json::Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn check(name: &str, doc: &serde_json::Value) {
    let validator = jsonschema::validator_for(&schema(name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

#[test]
fn empty_stage_list_writes_only_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&small(dir.path(), Vec::new()), "run").unwrap();
    assert!(m.outputs.is_empty());
    let files: Vec<_> = fs::read_dir(&m.run_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files, ["manifest.json"]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let stages = vec![Stage::Simulate, Stage::Fit, Stage::Report];
    let a = run_pipeline(&small(&dir.path().join("a"), stages.clone()), "run").unwrap();
    let b = run_pipeline(&small(&dir.path().join("b"), stages), "run").unwrap();
    assert_eq!(a.config_hash, b.config_hash);
    assert_eq!(a.outputs, b.outputs);
    for f in &a.outputs {
        assert_eq!(fs::read(a.run_dir.join(f)).unwrap(), fs::read(b.run_dir.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_changes_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path(), Vec::new());
    let a = run_pipeline(&c, "run").unwrap();
    c.seed += 1;
    let b = run_pipeline(&c, "run").unwrap();
    assert_ne!(a.run_dir, b.run_dir);
}

#[test]
fn every_table_matches_its_schema() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&small(dir.path(), Stage::ALL.to_vec()), "run").unwrap();
    for name in TABLE_NAMES {
        let file = format!("{name}.json");
        assert!(m.outputs.contains(&file), "{file} missing from {:?}", m.outputs);
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(m.run_dir.join(&file)).unwrap()).unwrap();
        check(name, &doc);
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(m.run_dir.join("manifest.json")).unwrap()).unwrap();
    check("manifest", &manifest);
    for csv in ["incidents.csv", "nonparametric_curves.csv", "network_coverage.csv"] {
        assert!(m.run_dir.join(csv).is_file(), "{csv}");
    }
}

#[test]
fn closure_snapshots_decay() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path(), vec![Stage::Network]);
    c.network.line_nodes = 40;
    let m = run_pipeline(&c, "network closure").unwrap();
    let text = fs::read_to_string(m.run_dir.join("network_coverage.csv")).unwrap();
    let mut totals: Vec<(String, f64)> = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let v: f64 = f[2].parse().unwrap();
        match totals.last_mut() {
            Some((t, s)) if t == f[0] => *s += v,
            _ => totals.push((f[0].to_string(), v)),
        }
    }
    assert_eq!(totals[0].0, "steady");
    let transient: Vec<f64> = totals[1..].iter().map(|(_, s)| *s).collect();
    assert!(transient.len() > 2);
    assert!(transient.windows(2).all(|w| w[1] < w[0]), "{transient:?}");
}

#[test]
fn unknown_stage_is_a_usage_error() {
    let err = Stage::parse_list("fit,bogus").unwrap_err();
    assert!(matches!(err, LabError::Usage(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn failing_stage_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path(), vec![Stage::Fit]);
    c.input = Some(dir.path().join("absent.csv"));
    match run_pipeline(&c, "fit") {
        Err(LabError::Stage { stage, .. }) => assert_eq!(stage, "fit"),
        other => panic!("expected a stage error, got {other:?}"),
    }
}

#[test]
fn loaded_input_feeds_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run_pipeline(&small(&dir.path().join("sim"), vec![Stage::Simulate, Stage::Fit]), "run").unwrap();
    let mut c = small(&dir.path().join("load"), vec![Stage::Fit]);
    c.input = Some(sim.run_dir.join("incidents.csv"));
    let loaded = run_pipeline(&c, "run").unwrap();
    let read = |d: &Path| -> serde_json::Value { serde_json::from_str(&fs::read_to_string(d.join("decay_params.json")).unwrap()).unwrap() };
    let (a, b) = (read(&sim.run_dir), read(&loaded.run_dir));
    assert_eq!(a["rows"], b["rows"]);
    assert_eq!(b["dataset"]["provenance"], "loaded");
}
