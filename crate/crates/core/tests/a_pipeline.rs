use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use scorelab::binning::BinningMap;
use scorelab::error::Error;
use scorelab::experiment::*;

fn desk(seed: u64, techniques: Option<&[&str]>) -> Settings {
    let mut cfg = ExperimentConfig::desk();
    cfg.data.seed = seed;
    if let Some(t) = techniques {
        cfg.techniques = t.iter().map(|s| s.to_string()).collect();
    }
    cfg.settings().unwrap()
}

fn bundle(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn prerequisite(e: &Error) -> Option<&'static str> {
    match e {
        Error::Stage { source, .. } => match source.as_ref() {
            Error::MissingArtifact { stage, .. } => Some(stage),
            _ => None,
        },
        _ => None,
    }
}

#[test]
fn bin_consumes_generated_csv() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::new(desk(3, None), dir.path());
    let err = exp.run_stage(Stage::Bin).unwrap_err();
    assert_eq!(prerequisite(&err), Some("generate"));
    exp.run_stage(Stage::Generate).unwrap();
    assert!(dir.path().join(DATASET).exists());
    exp.run_stage(Stage::Bin).unwrap();
    let map = BinningMap::from_text(&fs::read_to_string(dir.path().join(BINNING)).unwrap()).unwrap();
    assert!(!map.variables.is_empty());
    let err = exp.run_stage(Stage::Fit).unwrap_err();
    assert_eq!(prerequisite(&err), Some("select"));
    let err = exp.run_stage(Stage::Assess).unwrap_err();
    assert_eq!(prerequisite(&err), Some("fit"));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    Experiment::new(desk(2, None), a.path()).run().unwrap();
    let first = Experiment::new(desk(2, None), b.path());
    for s in [Stage::Generate, Stage::Bin, Stage::Select] {
        first.run_stage(s).unwrap();
    }
    drop(first);
    Experiment::new(desk(2, None), b.path()).run_from(Stage::Fit).unwrap();
    let (ba, bb) = (bundle(a.path()), bundle(b.path()));
    assert_eq!(ba.keys().collect::<Vec<_>>(), bb.keys().collect::<Vec<_>>());
    for (k, v) in &ba {
        assert!(v == &bb[k], "{k} differs");
    }
}

#[test]
fn report_regenerates_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let exp = Experiment::new(desk(4, None), dir.path());
    exp.run().unwrap();
    let before = bundle(dir.path());
    exp.run_stage(Stage::Report).unwrap();
    assert_eq!(before, bundle(dir.path()));
    for f in ["ranking_equal.csv", "ranking_stab.csv", "ranking_pred.csv", SCATTER_CSV, SCATTER_SVG, LEDGER] {
        assert!(before.contains_key(f), "{f} missing");
    }
}

#[test]
fn log_only_run_has_one_ledger_row() {
    let dir = tempfile::tempdir().unwrap();
    Experiment::new(desk(1, Some(&["LOG"])), dir.path()).run().unwrap();
    let ledger = fs::read_to_string(dir.path().join(LEDGER)).unwrap();
    assert_eq!(Ledger::rows(&ledger), vec![("LOG".to_string(), 30)]);
    let reg = fs::read_to_string(dir.path().join(SUBSETS_REG)).unwrap();
    assert_eq!(reg.lines().count(), 1);
    assert!(!dir.path().join(SCATTER_CSV).exists());
    let fitted = parse_criteria_csv(&fs::read_to_string(dir.path().join(CRITERIA)).unwrap()).unwrap();
    assert_eq!(fitted.len(), 30);
    assert!(fitted.iter().all(|f| f.record.technique.label() == "LOG"));
}

#[test]
fn criteria_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    Experiment::new(desk(5, Some(&["LOG", "GRP", "NBM"])), dir.path()).run().unwrap();
    let text = fs::read_to_string(dir.path().join(CRITERIA)).unwrap();
    let fitted = parse_criteria_csv(&text).unwrap();
    assert_eq!(criteria_csv(&fitted), text);
    let ids: Vec<usize> = fitted.iter().map(|f| f.record.model_id).collect();
    assert_eq!(ids, (1..=fitted.len()).collect::<Vec<_>>());
    assert_eq!(fitted.len(), 30 + 60 + 60);
}

#[test]
fn external_csv_source() {
    let gen = tempfile::tempdir().unwrap();
    Experiment::new(desk(6, None), gen.path()).run_stage(Stage::Generate).unwrap();
    let cfg_dir = tempfile::tempdir().unwrap();
    fs::copy(gen.path().join(DATASET), cfg_dir.path().join("book.csv")).unwrap();
    fs::copy(gen.path().join("dataset.csv.schema"), cfg_dir.path().join("book.csv.schema")).unwrap();
    let cfg_path = cfg_dir.path().join("run.toml");
    fs::write(
        &cfg_path,
        "techniques = [\"LOG\"]\n[data]\nsource = \"csv\"\ncsv_path = \"book.csv\"\n[selection]\nsizes = [3]\ntop_k = 5\n",
    )
    .unwrap();
    let out = tempfile::tempdir().unwrap();
    let settings = ExperimentConfig::load(&cfg_path).unwrap().settings().unwrap();
    Experiment::new(settings, out.path()).run().unwrap();
    assert_eq!(
        fs::read(out.path().join(PARTITION)).unwrap(),
        fs::read(gen.path().join(PARTITION)).unwrap()
    );
    let ledger = fs::read_to_string(out.path().join(LEDGER)).unwrap();
    assert_eq!(Ledger::rows(&ledger), vec![("LOG".to_string(), 5)]);
}

#[test]
fn unknown_config_keys_are_rejected() {
    assert!(ExperimentConfig::from_toml_str("[selection]\ntopk = 5\n").is_err());
    assert!(ExperimentConfig::from_toml_str("colour = 1\n").is_err());
}

#[test]
fn cli_stages_and_failures() {
    let exe = env!("CARGO_BIN_EXE_scorelab");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let fail = Command::new(exe).args(["fit", "--desk-scale", "--out", out]).output().unwrap();
    assert!(!fail.status.success());
    let msg = String::from_utf8_lossy(&fail.stderr);
    assert!(msg.contains("stage fit failed") && msg.contains("`generate`"), "{msg}");
    for stage in ["generate", "bin"] {
        let ok = Command::new(exe)
            .args([stage, "--desk-scale", "--seed", "7", "--out", out, "--techniques", "LOG"])
            .output()
            .unwrap();
        assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    }
    assert!(dir.path().join(BINNING).exists());
    let bad = Command::new(exe)
        .args(["run", "--desk-scale", "--out", out, "--techniques", "XYZ"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
