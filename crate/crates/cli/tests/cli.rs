use std::process::Command;

use kronprobe::harness::read_csv;
use kronprobe::Distribution;
use kronprobe_cli::run;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("kronprobe").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn field<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).filter(|rest| rest.starts_with(' ')))
        .unwrap_or_else(|| panic!("no `{key}` line in:\n{stdout}"))
        .trim()
}

#[test]
fn bounds_table() {
    let (code, out, _) = invoke(&["bounds", "--theta", "5,10,20,30,50"]);
    assert_eq!(code, 0);
    let expected = [
        "     theta    gaussian  rank1-gaussian",
        "         5    0.159577        0.559957",
        "        10    0.079788        0.321144",
        "        20    0.039894        0.181869",
        "        30    0.026596        0.129677",
        "        50    0.015958        0.084226",
    ];
    assert_eq!(out.lines().collect::<Vec<_>>(), expected);
}

#[test]
fn sign_probes_on_ones_give_integers() {
    for seed in ["0", "1", "2", "3"] {
        let args = [
            "estimate-trace", "--matrix", "ones", "--n", "2500", "--nhat", "50",
            "--dist", "rank1-rademacher", "--k", "1", "--seed", seed,
        ];
        let (code, out, err) = invoke(&args);
        assert_eq!(code, 0, "{err}");
        assert_eq!(field(&out, "exact"), "2500");
        let est: f64 = field(&out, "estimate").parse().unwrap();
        assert_eq!(est.fract(), 0.0);
        assert!(!field(&out, "estimate").contains('.'));
        assert_eq!(invoke(&args).1, out);
    }
}

#[test]
fn confidence_mode_prints_factors() {
    let (code, out, err) = invoke(&[
        "estimate-norm", "--matrix", "a7", "--k", "5", "--confidence", "0.99",
    ]);
    assert_eq!(code, 0, "{err}");
    let est: f64 = field(&out, "estimate").parse().unwrap();
    let upper = field(&out, "upper_factor");
    let factor: f64 = upper.split_whitespace().next().unwrap().parse().unwrap();
    assert!(est > 0.0 && factor > 1.0);
    assert!(upper.contains("max-estimator-upper"));

    let (code, out, err) = invoke(&[
        "estimate-trace", "--matrix", "ones", "--dist", "rank1-rademacher", "--k", "1000",
        "--confidence", "0.9", "--rho", "1",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("trace-upper"));
}

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let cases: &[(&[&str], &str)] = &[
        (&["estimate-trace", "--matrix", "ones", "--dist", "cauchy"], "--dist"),
        (&["estimate-trace", "--matrix", "nope"], "--matrix"),
        (&["estimate-norm", "--matrix", "a1", "--n", "10"], "--n"),
        (&["estimate-norm", "--matrix", "a1", "--n", "12", "--nhat", "5"], "--nhat"),
        (&["estimate-norm", "--matrix", "a1", "--k", "0"], "--k"),
        (&["estimate-trace", "--matrix", "ones", "--confidence", "1.5"], "--confidence"),
        (&["estimate-trace", "--matrix", "ones", "--target", "norm2"], "--target"),
        (&["bounds", "--theta", "0.5"], "--theta"),
        (&["bounds", "--theta", "abc"], "--theta"),
        (&["estimate-trace"], "--matrix"),
        (&["experiment", "tables", "--out", "x.csv"], "--matrix"),
    ];
    for (args, flag) in cases {
        let (code, out, err) = invoke(args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert!(out.is_empty());
        assert!(err.contains(flag), "{args:?}: {err}");
    }
    assert_eq!(invoke(&["frobnicate"]).0, 2);
    assert_eq!(invoke(&[]).0, 2);
    assert_eq!(invoke(&["--help"]).0, 0);
}

#[test]
fn runtime_errors_exit_1_without_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let missing = dir.path().join("missing.mtx");
    let (code, _, err) = invoke(&[
        "experiment", "tables", "--matrix", &format!("mm:{}", missing.display()),
        "--n", "4", "--trials", "10", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "{err}");
    assert!(!csv.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    // a trace target that needs PSD structure the matrix lacks
    let (code, _, err) = invoke(&["estimate-trace", "--matrix", "a7", "--target", "trace"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn tables_cell_matches_reference_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let args = |out: &str| {
        vec![
            "experiment".to_string(), "tables".into(), "--matrix".into(), "ones".into(),
            "--trials".into(), "10000".into(), "--seed".into(), "7".into(),
            "--dist".into(), "rank1-gaussian".into(), "--k".into(), "5".into(),
            "--theta".into(), "8".into(), "--out".into(), out.into(),
        ]
    };
    let a = path("a.csv");
    let b = path("b.csv");
    let run_args = |out: &std::path::Path| {
        let v = args(out.to_str().unwrap());
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        invoke(&refs)
    };
    let (code, out_a, err) = run_args(&a);
    assert_eq!(code, 0, "{err}");
    assert_eq!(run_args(&b).0, 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(out_a.starts_with("wrote 1 rows"));

    let table = read_csv(&a).unwrap();
    let row = table.get("ones", Distribution::RankOneGaussian, 5, 8.0).unwrap();
    // reference pair: 0.0033 of trials undershoot by more than 8x, 0.1201 overshoot
    assert!((row.lower_fail - 0.0033).abs() <= 0.02, "{row:?}");
    assert!((row.upper_fail - 0.1201).abs() <= 0.02, "{row:?}");
}

#[test]
fn figure1_rows_are_labelled_per_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let (code, _, err) = invoke(&[
        "experiment", "figure1", "--matrix", "a1,a6", "--trials", "200", "--points", "3",
        "--dist", "rank1-gaussian", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let table = read_csv(&out).unwrap();
    assert_eq!(table.len(), 2 * 2 * 3);
    for label in ["A1/norm2", "A1/normF", "A6/norm2", "A6/normF"] {
        assert!(table.get(label, Distribution::RankOneGaussian, 1, 100.0).is_some(), "{label}");
    }
}

#[test]
fn frechet_power_method_on_grid() {
    let (code, out, err) = invoke(&["frechet-norm", "--method", "power"]);
    assert_eq!(code, 0, "{err}");
    let v: f64 = field(&out, "power").split_whitespace().next().unwrap().parse().unwrap();
    assert!((0.81..=0.91).contains(&v), "{v}");
    assert!(!out.contains("upper"));
}

#[test]
fn binary_honours_thread_variable() {
    let bin = env!("CARGO_BIN_EXE_kronprobe");
    let args = ["estimate-norm", "--matrix", "a4", "--k", "9", "--seed", "5"];
    let outputs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|t| {
            let o = Command::new(bin).args(args).env("KRONPROBE_THREADS", t).output().unwrap();
            assert!(o.status.success());
            o.stdout
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);

    let bad = Command::new(bin).args(args).env("KRONPROBE_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("KRONPROBE_THREADS"));
}
