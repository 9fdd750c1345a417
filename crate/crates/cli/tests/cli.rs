use std::path::{Path, PathBuf};
use std::process::Command;

use scacsp_cli::commands::{self, BenchArgs, EvalArgs, GridArgs, PipelineFlags, SynthArgs, SynthFile, TrainArgs};
use scacsp_cli::io::{self, Session};
use scacsp_core::synth::{self, SynthSpec};
use scacsp_core::{Mat, Method, Vector};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scacsp"))
}

fn diag(v: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_vec(v.to_vec()))
}

fn write_spec(dir: &Path, covs: Vec<Mat>, train: usize, test: usize, samples: usize, seed: u64) -> PathBuf {
    let file = SynthFile {
        spec: SynthSpec::new(covs, train, samples, seed),
        test_trials_per_class: test,
        name: None,
    };
    let path = dir.join("spec.json");
    io::write_json(&path, &file).unwrap();
    path
}

fn synth_dataset(dir: &Path, covs: Vec<Mat>, train: usize, test: usize, seed: u64) -> PathBuf {
    let spec = write_spec(dir, covs, train, test, 250, seed);
    let out = dir.join("data").join("ds.json");
    commands::cmd_synth(&SynthArgs {
        spec,
        out: out.clone(),
        test_per_class: None,
    })
    .unwrap();
    out
}

fn binary_covs() -> Vec<Mat> {
    vec![diag(&[4.0, 1.0, 1.0, 1.0, 1.0, 1.0]), diag(&[1.0, 4.0, 1.0, 1.0, 1.0, 1.0])]
}

fn flags(method: Method) -> PipelineFlags {
    PipelineFlags {
        method: Some(method),
        band: Some("none".into()),
        ..Default::default()
    }
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::ReaderBuilder::new().flexible(false).from_path(path).unwrap();
    r.records().collect::<Result<Vec<_>, _>>().unwrap()
}

fn train_and_eval(dir: &Path, data: &Path, method: Method, name: &str) -> (f64, Vec<String>) {
    let model = dir.join(format!("{name}.json"));
    commands::cmd_train(&TrainArgs {
        data: data.to_path_buf(),
        out: model.clone(),
        pipeline: flags(method),
    })
    .unwrap();
    let out = dir.join(format!("{name}_pred.csv"));
    let acc = commands::cmd_eval(&EvalArgs {
        model,
        data: data.to_path_buf(),
        out: out.clone(),
        session: Session::Test,
    })
    .unwrap();
    let preds = read_csv(&out).iter().map(|r| r[3].to_string()).collect();
    (acc, preds)
}

#[test]
fn minimal_manifest_ingests() {
    let dir = tempfile::tempdir().unwrap();
    let x = Mat::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 0.0, 1.0, 0.0, 1.0]);
    std::fs::write(dir.path().join("a.sca"), io::encode_trial(&x)).unwrap();
    std::fs::write(dir.path().join("b.sca"), io::encode_trial(&(x.clone() * 2.0))).unwrap();
    let manifest = r#"{
        "name": "tiny", "fs_hz": 100.0, "channel_names": ["c1", "c2"],
        "trials": [
            {"file": "a.sca", "label": "left", "session": "train"},
            {"file": "b.sca", "label": "right", "session": "train"}
        ],
        "label_map": {"left": 1, "right": 2}
    }"#;
    let path = dir.path().join("m.json");
    std::fs::write(&path, manifest).unwrap();
    let loaded = io::ingest(&path, &[]).unwrap();
    assert_eq!(loaded.trials.len(), 2);
    assert_eq!(loaded.trials.labels, vec![1, 2]);
    // rows are centered on load
    assert!(loaded.trials.trials[0].row(0).sum().abs() < 1e-12);
}

#[test]
fn schema_and_channel_errors_name_their_source() {
    let dir = tempfile::tempdir().unwrap();
    let x = Mat::zeros(2, 8);
    let y = Mat::zeros(3, 8);
    std::fs::write(dir.path().join("a.sca"), io::encode_trial(&x)).unwrap();
    std::fs::write(dir.path().join("odd.sca"), io::encode_trial(&y)).unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(
        &path,
        r#"{"name": "x", "fs_hz": 100.0, "channel_names": ["c1", "c2"],
            "trials": [{"file": "a.sca", "label": "l", "session": "train"},
                       {"file": "odd.sca", "label": "l", "session": "train"}],
            "label_map": {"l": 1}}"#,
    )
    .unwrap();
    let err = io::ingest(&path, &[]).unwrap_err().to_string();
    assert!(err.contains("odd.sca"), "{err}");

    std::fs::write(
        &path,
        r#"{"name": "x", "fs_hz": 100.0, "channel_names": ["c1"],
            "trials": [{"file": "a.sca", "label": "l", "sesion": "train"}],
            "label_map": {"l": 1}}"#,
    )
    .unwrap();
    let err = io::ingest(&path, &[]).unwrap_err().to_string();
    assert!(err.contains("trials[0]"), "{err}");
}

#[test]
fn ds2_shaped_dataset_stats() {
    let dir = tempfile::tempdir().unwrap();
    let covs = synth::well_separated_covariances(32, 4, 2.0, 3);
    let mut file = SynthFile {
        spec: SynthSpec::new(covs, 40, 64, 1),
        test_trials_per_class: 20,
        name: Some("ds2-like".into()),
    };
    file.spec.fs = 256.0;
    let spec = dir.path().join("spec.json");
    io::write_json(&spec, &file).unwrap();
    let out = dir.path().join("ds2.json");
    let manifest = commands::cmd_synth(&SynthArgs {
        spec,
        out: out.clone(),
        test_per_class: None,
    })
    .unwrap();
    assert_eq!(manifest.label_map.len(), 4);
    let train = io::ingest(&out, &[Session::Train]).unwrap();
    let test = io::ingest(&out, &[Session::Test]).unwrap();
    assert_eq!(train.trials.len(), 160);
    assert_eq!(test.trials.len(), 80);
    assert_eq!(train.trials.n_channels(), 32);
    assert_eq!(train.trials.class_count, 4);
    assert_eq!(train.trials.fs, 256.0);
}

#[test]
fn synth_is_byte_identical_and_round_trips() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = synth_dataset(a.path(), binary_covs(), 5, 0, 9);
    let pb = synth_dataset(b.path(), binary_covs(), 5, 0, 9);
    let files = |p: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v
    };
    let (fa, fb) = (files(&pa), files(&pb));
    assert_eq!(fa.len(), 11);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    let loaded = io::ingest(&pa, &[]).unwrap();
    let generated = synth::generate(&SynthSpec::new(binary_covs(), 5, 250, 9)).unwrap();
    // ingest recenters rows, which only perturbs the last bits
    let recentered = scacsp_core::TrialSet::new(generated.trials.clone(), generated.labels.clone(), 250.0, 2, vec![]).unwrap();
    assert_eq!(loaded.trials.trials, recentered.trials);
    assert_eq!(loaded.trials.labels, generated.labels);
    for (a, b) in loaded.trials.trials.iter().zip(&generated.trials) {
        assert!((a - b).amax() < 1e-14);
    }
}

#[test]
fn csp_separable_and_scacsp_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), binary_covs(), 40, 40, 21);
    let (acc_csp, pred_csp) = train_and_eval(dir.path(), &data, Method::Csp, "csp");
    let (acc_sca, pred_sca) = train_and_eval(dir.path(), &data, Method::Scacsp, "sca");
    assert!(acc_csp >= 0.95, "{acc_csp}");
    assert_eq!(pred_csp, pred_sca);
    assert_eq!(acc_csp, acc_sca);
}

#[test]
fn strcsp_full_grid_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), binary_covs(), 20, 5, 22);
    let model = dir.path().join("strcsp.json");
    let mut f = flags(Method::Strcsp);
    f.m = Some(1);
    commands::cmd_train(&TrainArgs {
        data,
        out: model.clone(),
        pipeline: f,
    })
    .unwrap();
    let rows = read_csv(&dir.path().join("strcsp.cv.csv"));
    assert_eq!(rows.len(), 640);
    let summary = read_csv(&dir.path().join("strcsp.cv_summary.csv"));
    assert_eq!(summary.len(), 64);
    assert_eq!(summary.iter().filter(|r| &r[3] == "true").count(), 1);
}

#[test]
fn eval_on_training_split_matches_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), binary_covs(), 15, 5, 23);
    let model_path = dir.path().join("m.json");
    commands::cmd_train(&TrainArgs {
        data: data.clone(),
        out: model_path.clone(),
        pipeline: flags(Method::ScacspNsr),
    })
    .unwrap();
    let out = dir.path().join("p.csv");
    commands::cmd_eval(&EvalArgs {
        model: model_path.clone(),
        data: data.clone(),
        out: out.clone(),
        session: Session::Train,
    })
    .unwrap();
    let file = commands::load_model(&model_path).unwrap();
    let loaded = io::ingest(&data, &[Session::Train]).unwrap();
    let (_, cov) = commands::prepare(&file.model.config, &loaded.trials).unwrap();
    let direct = file.model.predict_all(&cov.per_trial).unwrap();
    let from_csv: Vec<usize> = read_csv(&out).iter().map(|r| file.label_map[&r[3]]).collect();
    assert_eq!(direct, from_csv);
}

#[test]
fn chance_level_on_label_free_data() {
    let dir = tempfile::tempdir().unwrap();
    let same = diag(&[2.0, 1.0, 1.5, 1.0]);
    let data = synth_dataset(dir.path(), vec![same.clone(), same.clone(), same.clone(), same], 30, 50, 24);
    let mut f = flags(Method::Scacsp);
    f.m = Some(1);
    let model = dir.path().join("m.json");
    commands::cmd_train(&TrainArgs {
        data: data.clone(),
        out: model.clone(),
        pipeline: f,
    })
    .unwrap();
    let acc = commands::cmd_eval(&EvalArgs {
        model,
        data,
        out: dir.path().join("p.csv"),
        session: Session::Test,
    })
    .unwrap();
    // 200 test trials, p = 0.25: three binomial standard deviations
    let sd = (0.25f64 * 0.75 / 200.0).sqrt();
    assert!((acc - 0.25).abs() <= 3.0 * sd, "{acc}");
    assert_eq!(read_csv(&dir.path().join("p.confusion.csv")).len(), 4);
}

#[test]
fn bench_single_method_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), binary_covs(), 10, 10, 25);
    let out = dir.path().join("bench.csv");
    let rows = commands::cmd_bench(&BenchArgs {
        data,
        methods: "csp".into(),
        bench_configs: vec![],
        reps: 5,
        out: out.clone(),
        pipeline: PipelineFlags {
            band: Some("none".into()),
            m: Some(2),
            ..Default::default()
        },
    })
    .unwrap();
    assert_eq!(rows.len(), 1);
    let csv = read_csv(&out);
    assert_eq!(csv.len(), 1);
    assert_eq!(&csv[0][0], "csp");
    assert_eq!(&csv[0][6], "5");
}

#[test]
fn grid_command_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), binary_covs(), 12, 8, 26);
    let out = dir.path().join("grid.csv");
    commands::cmd_grid(&GridArgs {
        data,
        out: out.clone(),
        m: 1,
        band: Some("none".into()),
        window: None,
        rank_tol: None,
    })
    .unwrap();
    let test = read_csv(&out);
    assert_eq!(test.len(), 6);
    assert_eq!(test[0].len(), 8);
    assert_eq!(read_csv(&dir.path().join("grid.train.csv")).len(), 6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_dataset(dir.path(), binary_covs(), 10, 5, 27);
    let run = |args: &[&str]| bin().args(args).current_dir(dir.path()).output().unwrap();
    let model = dir.path().join("m.json");
    let ok = run(&["train", "--data", data.to_str().unwrap(), "--out", model.to_str().unwrap(), "--method", "csp", "--band", "none", "--m", "1"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(run(&["train", "--data", data.to_str().unwrap(), "--out", "x.json"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(
        run(&["train", "--data", "missing.json", "--out", "x.json", "--method", "csp"]).status.code(),
        Some(3)
    );

    // a duplicated channel makes the composite covariance singular
    let x = Mat::from_fn(2, 50, |_, j| (j as f64 * 0.37).sin());
    for i in 0..4 {
        std::fs::write(dir.path().join(format!("s{i}.sca")), io::encode_trial(&(&x * (1.0 + i as f64)))).unwrap();
    }
    let manifest = r#"{"name": "singular", "fs_hz": 100.0, "channel_names": ["a", "b"],
        "trials": [{"file": "s0.sca", "label": "l", "session": "train"},
                   {"file": "s1.sca", "label": "r", "session": "train"},
                   {"file": "s2.sca", "label": "l", "session": "train"},
                   {"file": "s3.sca", "label": "r", "session": "train"}],
        "label_map": {"l": 1, "r": 2}}"#;
    std::fs::write(dir.path().join("singular.json"), manifest).unwrap();
    let out = run(&["train", "--data", "singular.json", "--out", "x.json", "--method", "csp", "--band", "none", "--m", "1", "--cv-folds", "2"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn saved_model_round_trip_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let covs = synth::well_separated_covariances(5, 3, 3.0, 8);
    let data = synth_dataset(dir.path(), covs, 12, 6, 28);
    let model = dir.path().join("m.json");
    let mut f = flags(Method::ScacspNsrExtrasub);
    f.m = Some(2);
    commands::cmd_train(&TrainArgs {
        data: data.clone(),
        out: model.clone(),
        pipeline: f,
    })
    .unwrap();
    let file = commands::load_model(&model).unwrap();
    let resaved = dir.path().join("again.json");
    io::write_json(&resaved, &file).unwrap();
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&resaved).unwrap());
    let back = commands::load_model(&resaved).unwrap();
    let probe = io::ingest(&data, &[]).unwrap();
    let (_, cov) = commands::prepare(&file.model.config, &probe.trials).unwrap();
    assert_eq!(file.model.predict_all(&cov.per_trial).unwrap(), back.model.predict_all(&cov.per_trial).unwrap());
}
