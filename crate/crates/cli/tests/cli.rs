use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qc2qp::model::Qc2qpInstance;
use qc2qp::recovery::{brute_force_oracle, lagrangian_box, run_gap_test, VerdictKind};
use qc2qp::sdp::SolverConfig;
use qc2qp::symmat::SymMatrix;
use qc2qp_cli::contour::{is_feasible, write_contour, ContourBox, ContourError};
use qc2qp_cli::instance::{emit, parse_instance, parse_str};
use qc2qp_cli::trials::{instance_seeds, run_trials, sample_instance, TrialConfig};
use proptest::prelude::*;
use serde_json::Value;

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn qc2qp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qc2qp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn is_num(v: &Value) -> bool {
    v.as_f64().is_some_and(f64::is_finite)
}

fn is_matrix(v: &Value, n: usize) -> bool {
    v.as_array().is_some_and(|rows| {
        rows.len() == n
            && rows
                .iter()
                .all(|r| r.as_array().is_some_and(|r| r.len() == n && r.iter().all(is_num)))
    })
}

/// Structural check of the `--json` verdict document.
fn check_verdict_schema(v: &Value, n: usize) {
    let kind = &v["kind"];
    let verdict = kind["verdict"].as_str().expect("verdict tag");
    assert!(is_num(&v["relaxation_value"]));
    for report in [&v["property_i_plus"], &v["property_i"]] {
        for key in ["cond_i1", "cond_i2", "cond_i3", "holds"] {
            assert!(report[key].is_boolean(), "{key}");
        }
        for key in ["cond_4_equalities", "cond_4_product", "cond_4_cross"] {
            assert!(report[key].is_boolean() || report[key].is_null(), "{key}");
        }
        assert!(report["measured"]["rank_x"].is_u64());
        assert!(report["measured"]["rank_z"].is_u64());
    }
    let sol = &v["solution"];
    assert!(is_matrix(&sol["x"], n + 1) && is_matrix(&sol["z"], n + 1));
    for key in ["y0", "y1", "y2", "primal_objective", "dual_objective", "eps1"] {
        assert!(is_num(&sol[key]), "{key}");
    }
    for key in ["primal_infeas", "dual_infeas", "relative_gap"] {
        assert!(is_num(&sol["residuals"][key]), "{key}");
    }
    assert!(v["primal_slater"]["holds"].as_bool().unwrap());
    assert!(v["dual_slater"]["holds"].as_bool().unwrap());
    match verdict {
        "NoGap" => {
            let d = &kind["detail"];
            assert_eq!(d["z"].as_array().unwrap().len(), n);
            for key in ["objective", "q1_value", "q2_value"] {
                assert!(is_num(&d[key]), "{key}");
            }
            assert!(d["case_label"].is_string());
            assert!(v["certificate"].is_null());
        }
        "Gap" => {
            assert!(kind["detail"]["holds"].as_bool().unwrap());
            let c = &v["certificate"];
            assert!(is_num(&c["determinant"]) && is_num(&c["closed_form_determinant"]));
            assert_eq!(c["gamma"].as_array().unwrap().len(), 3);
        }
        other => panic!("unexpected verdict {other}"),
    }
}

#[test]
fn gap_test_no_gap_example() {
    let o = qc2qp(&["gap-test", example("ex51.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("verdict: no gap"), "{text}");
    assert!(text.contains("z: [-0.7547192, -3.9916123]"), "{text}");
}

#[test]
fn gap_test_gap_example_prints_measured_quantities() {
    let o = qc2qp(&["gap-test", example("ex52.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    for needle in ["verdict: gap", "|M1 . x1x1'|", "M2 . x1x1' = 15.14", "M2 . x2x2' = -15.14", "|M1 . x1x2'| = 11.82"] {
        assert!(text.contains(needle), "missing {needle:?} in\n{text}");
    }
}

#[test]
fn json_output_matches_schema() {
    for (name, code) in [("ex51.json", 0), ("ex52.json", 2)] {
        let o = qc2qp(&["gap-test", example(name).to_str().unwrap(), "--json"]);
        assert_eq!(o.status.code(), Some(code));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        check_verdict_schema(&v, 2);
    }
}

#[test]
fn quiet_prints_nothing() {
    let o = qc2qp(&["gap-test", example("ex52.json").to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
}

#[test]
fn missing_and_malformed_files_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qc2qp(&["gap-test", "missing.json"]).status.code(), Some(1));
    let bad = write_file(dir.path(), "bad.json", "{\"n\": 2,");
    assert_eq!(qc2qp(&["gap-test", bad.to_str().unwrap()]).status.code(), Some(1));
    let text = std::fs::read_to_string(example("ex51.json"))
        .unwrap()
        .replace("[-5.0, 2.0]", "[-5.0, 2.0, 1.0]");
    let ragged = write_file(dir.path(), "ragged.json", &text);
    let o = qc2qp(&["gap-test", ragged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Q1[1]"), "{}", stderr(&o));
}

#[test]
fn empty_feasible_set_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"n": 2, "Q0": [[1, 0], [0, -1]], "b0": [0, 0],
        "Q1": [[1, 0], [0, 1]], "b1": [0, 0], "c1": 1,
        "Q2": [[0, 0], [0, 0]], "b2": [0, 0], "c2": -1}"#;
    let p = write_file(dir.path(), "empty.json", text);
    let o = qc2qp(&["gap-test", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = qc2qp(&["gap-test", p.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(3));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "AssumptionViolated");
    assert_eq!(v["assumption"], "PrimalSlater");
}

#[test]
fn argument_errors_exit_one_and_help_exits_zero() {
    assert_eq!(qc2qp(&["gap-test"]).status.code(), Some(1));
    assert_eq!(qc2qp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qc2qp(&["--help"]).status.code(), Some(0));
    let o = qc2qp(&["trials", "--count", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("count"));
}

#[test]
fn trials_are_deterministic() {
    let args = ["trials", "--count", "12", "--dim", "2", "--seed", "7"];
    let a = qc2qp(&args);
    let b = qc2qp(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r1 = run_trials(&TrialConfig::new(12, 2, 7)).unwrap();
    let r2 = run_trials(&TrialConfig::new(12, 2, 7)).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(stdout(&a), r1.render());
    assert_eq!(
        r1.no_gap_count + r1.gap_count + r1.assumption_violations + r1.error_count,
        r1.total
    );
}

#[test]
fn trials_json_report() {
    let o = qc2qp(&["trials", "--count", "3", "--seed", "11", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["total"], 3);
    assert_eq!(v["seed"], 11);
    let lines = v["lines"].as_array().unwrap();
    assert_eq!(lines.len(), 3);
    for (k, l) in lines.iter().enumerate() {
        assert_eq!(l["index"], k);
    }
}

#[test]
fn seed_zero_gives_a_no_gap_instance_confirmed_by_the_oracle() {
    let report = run_trials(&TrialConfig::new(1, 2, 0)).unwrap();
    assert_eq!(report.no_gap_count, 1);

    let cfg = SolverConfig::default();
    let (inst, _) = sample_instance(instance_seeds(0, 1)[0], 2, 5.0, &cfg, 100)
        .unwrap()
        .unwrap();
    let v = run_gap_test(&inst, &cfg, 1e-5).unwrap();
    assert!((v.relaxation_value - -20.0208646).abs() < 1e-6);
    let VerdictKind::NoGap(rec) = &v.kind else {
        panic!("expected no gap")
    };
    assert!((rec.z[0] - -0.1314970).abs() < 1e-6 && (rec.z[1] - 1.9255278).abs() < 1e-6);
    let w = v.dual_slater.witness.unwrap();
    let bx = lagrangian_box(&inst, w.y1, w.y2, rec.objective).unwrap();
    let o = brute_force_oracle(&inst, &bx, 1001, 60).unwrap();
    assert!((o.value - rec.objective).abs() < 1e-6, "{o:?}");
}

#[test]
fn shipped_examples_parse_to_paper_data() {
    let ex51 = parse_instance(&example("ex51.json")).unwrap();
    assert_eq!(ex51.objective.q.to_rows(), vec![vec![2.0, -4.0], vec![-4.0, -2.0]]);
    assert_eq!(ex51.constraints[0].c, -1.0);
    assert_eq!(ex51.constraints[1].b, vec![0.0, 5.0]);
    let ex52 = parse_instance(&example("ex52.json")).unwrap();
    assert_eq!(ex52.objective.b, vec![-2.0, 0.0]);
    assert_eq!(ex52.constraints[0].q.to_rows(), vec![vec![3.0, 1.0], vec![1.0, -2.0]]);
    assert_eq!(ex52.constraints[1].c, 4.0);
    for inst in [ex51, ex52] {
        assert_eq!(parse_str(&emit(&inst)).unwrap(), inst);
    }
}

#[test]
fn contour_no_gap_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex51");
    let o = qc2qp(&[
        "contour",
        example("ex51.json").to_str().unwrap(),
        "--xlim", "-6", "2",
        "--ylim", "-8", "2",
        "--grid", "41",
        "--oracle-grid", "401",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, obj) = read_csv(&out.join("objective.csv"));
    assert_eq!(h, "x,y,value");
    assert_eq!(obj.len(), 41 * 41);
    let (h, mask) = read_csv(&out.join("feasible.csv"));
    assert_eq!(h, "x,y,feasible");
    assert!(mask.iter().all(|r| r[2] == "0" || r[2] == "1"));
    assert!(mask.iter().any(|r| r[2] == "1") && mask.iter().any(|r| r[2] == "0"));
    let (h, pts) = read_csv(&out.join("points.csv"));
    assert_eq!(h, "label,x,y");
    let rec = pts.iter().find(|r| r[0] == "recovered").expect("recovered point");
    let z: Vec<f64> = rec[1..].iter().map(|v| v.parse().unwrap()).collect();
    assert!((z[0] - -0.7547192).abs() < 1e-6 && (z[1] - -3.9916123).abs() < 1e-6);

    let inst = parse_instance(&example("ex51.json")).unwrap();
    assert!(is_feasible(&inst, &[-0.7547192, -3.9916123]));
    assert!(is_feasible(&inst, &z));
}

#[test]
fn contour_gap_example_marks_normalized_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex52");
    let o = qc2qp(&[
        "contour",
        example("ex52.json").to_str().unwrap(),
        "--grid", "21",
        "--oracle-grid", "801",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, pts) = read_csv(&out.join("points.csv"));
    let point = |label: &str| -> Vec<f64> {
        let row = pts.iter().find(|r| r[0] == label).unwrap_or_else(|| panic!("{label}"));
        row[1..].iter().map(|v| v.parse().unwrap()).collect()
    };
    let mut hats = [point("z_hat_1"), point("z_hat_2")];
    hats.sort_by(|a, b| a[0].total_cmp(&b[0]));
    // The printed relaxation solution carries about 1e-5 error per entry, amplified by the
    // division by t ≈ 0.17; even a fully converged solve lands about 1.4e-4 from the printed z_hat_1.
    assert!((hats[0][0] - -5.4921056).abs() < 1e-3 && (hats[0][1] - -7.2973787).abs() < 1e-3, "{hats:?}");
    assert!((hats[1][0] - 1.1942982).abs() < 1e-3 && (hats[1][1] - -1.0997569).abs() < 1e-3, "{hats:?}");
    let oracle = point("oracle");
    assert!((oracle[0] - 0.5251114).abs() < 1e-2 && (oracle[1] - -0.3446140).abs() < 1e-2);

    let inst = parse_instance(&example("ex52.json")).unwrap();
    assert!(is_feasible(&inst, &[0.5251114, -0.3446140]));
}

#[test]
fn contour_rejects_degenerate_box_and_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = qc2qp(&[
        "contour",
        example("ex51.json").to_str().unwrap(),
        "--xlim", "1", "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));

    let id = SymMatrix::identity(3);
    let inst = Qc2qpInstance::new(
        id.clone(),
        vec![0.0; 3],
        id.clone(),
        vec![0.0; 3],
        -1.0,
        id,
        vec![0.0; 3],
        -1.0,
    )
    .unwrap();
    let bx = ContourBox {
        x: (-1.0, 1.0),
        y: (-1.0, 1.0),
    };
    assert!(matches!(
        write_contour(&inst, &bx, 5, dir.path(), &[]),
        Err(ContourError::Dimension(3))
    ));
}

#[test]
fn oracle_command_reports_gap_example_optimum() {
    let o = qc2qp(&["oracle", example("ex52.json").to_str().unwrap(), "--grid", "801", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - -1.5335857).abs() < 1e-3);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1.0..1.0f64, Just(0.0), Just(-0.1), Just(1e-300)]
}

proptest! {
    #[test]
    fn emit_then_parse_is_exact(
        (n, vals) in (1usize..5).prop_flat_map(|n| (Just(n), proptest::collection::vec(finite(), 3 * n * n + 3 * n + 2)))
    ) {
        let mut it = vals.into_iter();
        let mut sym = || SymMatrix::from_upper_fn(n, |_, _| it.next().unwrap());
        let (q0, q1, q2) = (sym(), sym(), sym());
        let rest: Vec<f64> = it.collect();
        let inst = Qc2qpInstance::new(
            q0, rest[0..n].to_vec(),
            q1, rest[n..2 * n].to_vec(), rest[3 * n],
            q2, rest[2 * n..3 * n].to_vec(), rest[3 * n + 1],
        ).unwrap();
        prop_assert_eq!(parse_str(&emit(&inst)).unwrap(), inst);
    }
}
