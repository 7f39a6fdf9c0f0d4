//! End-to-end runs of the `sigtest` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sigtest::multiple_testing::Correction;
use sigtest::pipeline::{Detector, PValueMethod, StatisticKind};
use sigtest::signature::{signature, time_augment, Transform};
use sigtest::statistics::ScoreModel;
use sigtest::PathStream;

fn sigtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigtest"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = sigtest(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str]) -> i32 {
    sigtest(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv_paths(file: &Path) -> Vec<PathStream> {
    let mut rdr = csv::Reader::from_path(file).unwrap();
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, (Vec<f64>, Vec<Vec<f64>>)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let id = rec[0].to_owned();
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            (Vec::new(), Vec::new())
        });
        entry.0.push(rec[1].parse().unwrap());
        entry
            .1
            .push(rec.iter().skip(2).map(|v| v.parse().unwrap()).collect());
    }
    order
        .into_iter()
        .map(|id| {
            let (t, x) = rows.remove(&id).unwrap();
            PathStream::new(t, x).unwrap().with_id(id)
        })
        .collect()
}

fn read_labels(file: &Path) -> Vec<bool> {
    let mut rdr = csv::Reader::from_path(file).unwrap();
    rdr.records().map(|r| &r.unwrap()[1] == "1").collect()
}

fn read_json(file: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap()
}

fn score_column(file: &Path) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(file).unwrap();
    rdr.records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect()
}

#[test]
fn simulate_replays_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    for out in [&a, &b] {
        ok(&[
            "simulate",
            "--generator",
            "bm",
            "--n-paths",
            "5",
            "--steps",
            "20",
            "--seed",
            "7",
            "--output",
            s(out),
        ]);
    }
    ok(&[
        "simulate",
        "--config",
        s(&a.join("manifest.json")),
        "--output",
        s(&c),
    ]);
    for f in ["paths.csv", "dataset.json", "manifest.json"] {
        let first = fs::read(a.join(f)).unwrap();
        assert_eq!(first, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(first, fs::read(c.join(f)).unwrap(), "{f}");
    }
    let m = read_json(&a.join("manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["n_paths"], 5);
}

#[test]
fn spike_at_zero_intensity_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spike");
    ok(&[
        "simulate",
        "--generator",
        "spike",
        "--epsilon",
        "0",
        "--n-paths",
        "3",
        "--output",
        s(&out),
    ]);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["generator"], "spike");
    assert_eq!(m["epsilon"], 0.0);
    let d = read_json(&out.join("dataset.json"));
    assert_eq!(d["generator"], "spike");
    assert_eq!(d["params"]["epsilon"], 0.0);
    assert_eq!(read_csv_paths(&out.join("paths.csv")).len(), 3);
    assert!(out.join("spike_times.csv").exists());
}

#[test]
fn researcher_preset_writes_one_reference_and_l_test_files_per_researcher() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    ok(&[
        "simulate",
        "--generator",
        "researchers",
        "--researchers",
        "3",
        "--ref-size",
        "10",
        "--test-sets",
        "4",
        "--test-size",
        "10",
        "--steps",
        "20",
        "--output",
        s(&out),
    ]);
    let mut path_files = 0;
    let mut label_files = 0;
    for r in fs::read_dir(&out).unwrap() {
        let r = r.unwrap();
        if !r.file_type().unwrap().is_dir() {
            continue;
        }
        for f in fs::read_dir(r.path()).unwrap() {
            let name = f.unwrap().file_name().into_string().unwrap();
            if name.ends_with(".labels.csv") {
                label_files += 1;
            } else if name.ends_with(".csv") {
                path_files += 1;
            }
        }
    }
    assert_eq!(path_files, 3 * (1 + 4));
    assert_eq!(label_files, 3 * 4);
    let labels = read_labels(&out.join("researcher_000/test_000.labels.csv"));
    assert_eq!(labels.iter().filter(|&&l| l).count(), 1);
}

#[test]
fn exit_codes_separate_config_data_and_numerical_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&[
            "fit",
            "--input",
            s(&d.join("missing.csv")),
            "--output",
            s(&d.join("m.json"))
        ]),
        2
    );
    assert_eq!(code(&["fit", "--no-such-flag"]), 2);
    assert_eq!(
        code(&[
            "simulate",
            "--generator",
            "bm",
            "--alpha",
            "1.5",
            "--output",
            s(&d.join("x"))
        ]),
        2
    );
    let bad = d.join("bad.csv");
    fs::write(&bad, "path_id,t,x1\na,0,zero\n").unwrap();
    assert_eq!(
        code(&["fit", "--input", s(&bad), "--output", s(&d.join("m.json"))]),
        3
    );
    let out = sigtest(&[
        "simulate",
        "--dim",
        "2",
        "--sigma",
        "1,2,2,1",
        "--output",
        s(&d.join("psd")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn distance_model_on_one_path_is_its_signature() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "simulate",
        "--n-paths",
        "1",
        "--steps",
        "15",
        "--seed",
        "3",
        "--output",
        s(&d.join("one")),
    ]);
    let model = d.join("model.json");
    ok(&[
        "fit",
        "--input",
        s(&d.join("one/paths.csv")),
        "--stat",
        "dist",
        "--level",
        "3",
        "--output",
        s(&model),
    ]);
    let det: Detector = serde_json::from_value(read_json(&model)["detector"].clone()).unwrap();
    let path = &read_csv_paths(&d.join("one/paths.csv"))[0];
    let sig = signature(&time_augment(path), 3).unwrap();
    match det.model {
        ScoreModel::Distance(m) => {
            for (a, b) in m.mean.coeffs().iter().zip(sig.tensor().coeffs()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
        other => panic!("unexpected model {other:?}"),
    }
    let again = d.join("again.json");
    ok(&[
        "fit",
        "--config",
        s(&d.join("model.json.manifest.json")),
        "--output",
        s(&again),
    ]);
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn infeasible_ocsvm_and_missing_tail_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "simulate",
        "--n-paths",
        "5",
        "--steps",
        "10",
        "--output",
        s(&d.join("p")),
    ]);
    let input = d.join("p/paths.csv");
    let out = sigtest(&[
        "fit",
        "--input",
        s(&input),
        "--stat",
        "ocsvm",
        "--nu",
        "0.1",
        "--output",
        s(&d.join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot sum to one"));

    let model = d.join("m.json");
    ok(&[
        "fit",
        "--input",
        s(&input),
        "--fit-size",
        "3",
        "--output",
        s(&model),
    ]);
    let weibull = [
        "test",
        "--model",
        s(&model),
        "--input",
        s(&input),
        "--pvalue-method",
        "weibull",
        "--output",
    ];
    let out = sigtest(&[&weibull[..], &[s(&d.join("t"))]].concat());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail"));
    let out = sigtest(&[
        "fit",
        "--input",
        s(&input),
        "--tail",
        "weibull",
        "--output",
        s(&d.join("w.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn labeled_test_run_matches_library_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("r");
    ok(&[
        "simulate",
        "--generator",
        "researchers",
        "--researchers",
        "1",
        "--ref-size",
        "60",
        "--test-sets",
        "1",
        "--test-size",
        "40",
        "--epsilon",
        "4",
        "--seed",
        "11",
        "--output",
        s(&data),
    ]);
    let reference = data.join("researcher_000/reference.csv");
    let test_file = data.join("researcher_000/test_000.csv");
    let label_file = data.join("researcher_000/test_000.labels.csv");
    let model = d.join("m.json");
    ok(&[
        "fit",
        "--input",
        s(&reference),
        "--fit-size",
        "30",
        "--level",
        "3",
        "--output",
        s(&model),
    ]);
    let out = d.join("test");
    ok(&[
        "test",
        "--model",
        s(&model),
        "--input",
        s(&test_file),
        "--labels",
        s(&label_file),
        "--alpha",
        "0.2",
        "--output",
        s(&out),
    ]);

    let refs = read_csv_paths(&reference);
    let mut det =
        Detector::fit(&StatisticKind::Distance, &refs[..30], 3, &[Transform::Time]).unwrap();
    det.calibrate(&refs[30..]).unwrap();
    let paths = read_csv_paths(&test_file);
    let labels = read_labels(&label_file);
    let report = det
        .test(
            &paths,
            Some(&labels),
            0.2,
            PValueMethod::Empirical,
            Correction::Bh,
        )
        .unwrap();
    assert_eq!(
        read_json(&out.join("report.json")),
        serde_json::to_value(&report).unwrap()
    );
    assert_eq!(report.summary.positives, Some(4));

    let replay = d.join("replay");
    ok(&[
        "test",
        "--config",
        s(&out.join("manifest.json")),
        "--output",
        s(&replay),
    ]);
    for f in ["items.csv", "summary.csv", "report.json", "manifest.json"] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(replay.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn self_calibrated_pvalues_stay_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "simulate",
        "--n-paths",
        "30",
        "--steps",
        "20",
        "--output",
        s(&d.join("p")),
    ]);
    let input = d.join("p/paths.csv");
    let model = d.join("m.json");
    ok(&["fit", "--input", s(&input), "--output", s(&model)]);
    let out = d.join("t");
    ok(&[
        "test",
        "--model",
        s(&model),
        "--input",
        s(&input),
        "--calibration",
        s(&input),
        "--correction",
        "none",
        "--output",
        s(&out),
    ]);
    let mut rdr = csv::Reader::from_path(out.join("items.csv")).unwrap();
    for r in rdr.records() {
        let p: f64 = r.unwrap()[2].parse().unwrap();
        assert!((1.0 / 31.0..=1.0).contains(&p));
    }
}

#[test]
fn batch_scores_equal_one_path_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&[
        "simulate",
        "--n-paths",
        "12",
        "--steps",
        "20",
        "--seed",
        "4",
        "--output",
        s(&d.join("p")),
    ]);
    let input = d.join("p/paths.csv");
    for stat in ["dist", "conf"] {
        let model = d.join(format!("{stat}.json"));
        ok(&[
            "fit",
            "--input",
            s(&input),
            "--stat",
            stat,
            "--level",
            "2",
            "--output",
            s(&model),
        ]);
        let batch = d.join(format!("{stat}-scores.csv"));
        ok(&[
            "score",
            "--model",
            s(&model),
            "--input",
            s(&input),
            "--output",
            s(&batch),
        ]);
        let batch = score_column(&batch);
        let text = fs::read_to_string(&input).unwrap();
        let header = text.lines().next().unwrap();
        for (i, expect) in batch.iter().enumerate().take(4) {
            let id = format!("bm-{i},");
            let one: Vec<&str> = std::iter::once(header)
                .chain(text.lines().filter(|l| l.starts_with(&id)))
                .collect();
            let single = d.join(format!("{stat}-{i}.csv"));
            fs::write(&single, one.join("\n") + "\n").unwrap();
            let scored = d.join(format!("{stat}-{i}-score.csv"));
            ok(&[
                "score",
                "--model",
                s(&model),
                "--input",
                s(&single),
                "--output",
                s(&scored),
            ]);
            assert_eq!(score_column(&scored), vec![*expect]);
        }
        if stat == "conf" {
            assert!(batch.iter().all(|&v| v.abs() <= 1e-8), "{batch:?}");
        }
    }
}
