use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spin-snr-synth")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

/// Rows of a schema-tagged CSV file, with the comment line checked and
/// stripped.
fn csv_rows(text: &str) -> (Vec<String>, Vec<csv::StringRecord>) {
    let (first, body) = text.split_once('\n').unwrap();
    assert!(first.starts_with("# spin-snr-synth v1"), "{first}");
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    (header, r.records().map(Result::unwrap).collect())
}

#[test]
fn ernst_normalized_values() {
    let v = json(&run(&["ernst", "--Gamma", "1.8", "--gamma", "1", "--format", "json"]));
    assert!((v["m"]["y"].as_f64().unwrap() - 0.689_273_980_424_658_9).abs() < 1e-15);
    assert!((v["m"]["z"].as_f64().unwrap() - 0.268_941_421_369_995_1).abs() < 1e-15);
    assert!((v["flip_rad"].as_f64().unwrap() - 1.044_176_153_403_274).abs() < 1e-15);
    assert_eq!(v["regime"], "B");
}

#[test]
fn physical_parameters_match_normalized() {
    // Td = 1, T1 = 2π, T2 = 2π/1.8.
    let a = run(&["ernst", "--T1", "2π", "--T2", "2π/1.8", "--Td", "1", "--format", "json"]);
    let b = run(&["ernst", "--Gamma", "1.8", "--gamma", "1", "--format", "json"]);
    let (a, b) = (json(&a), json(&b));
    for key in ["y", "z"] {
        let d = a["m"][key].as_f64().unwrap() - b["m"][key].as_f64().unwrap();
        assert!(d.abs() < 1e-14, "{key}: {d}");
    }
}

#[test]
fn invalid_input_exits_2() {
    for args in [
        vec!["ernst", "--Gamma", "0.4", "--gamma", "1"],
        vec!["ernst", "--Gamma", "1.8"],
        vec!["ernst", "--Gamma", "1.8", "--gamma", "1", "--T1", "3"],
        vec!["classify", "--point", "0.9", "0.9"],
        vec!["classify", "--point", "-0.1", "0.0"],
        vec!["qsurface", "--grid-ny", "1"],
        vec!["verify", "--format", "csv"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_spin-snr-synth"))
        .args(["ernst"])
        .env("SPIN_SNR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn allow_unphysical_override() {
    let o = run(&["ernst", "--Gamma", "0.4", "--gamma", "1", "--allow-unphysical", "--format", "json"]);
    assert_eq!(json(&o)["regime"], "C");
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("out.csv");
    let o = run(&["ernst", "--format", "csv", "--out", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn classify_worked_points() {
    for (y, z, label) in [("0.95", "0", "BSvPosB"), ("0.6", "0.3", "BShB"), ("0.3", "0.1", "BShSvNegB")] {
        let v = json(&run(&["classify", "--point", y, z, "--format", "json"]));
        assert_eq!(v["structure"], label);
    }
    let v = json(&run(&["classify", "--point", "0.6", "0.3", "--format", "json"]));
    assert!((v["t_control"].as_f64().unwrap() - 0.045_549_198_112_469_71).abs() < 1e-12);
}

#[test]
fn qsurface_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str| {
        let path = dir.path().join(name);
        let o = run(&["qsurface", "--grid-ny", "64", "--grid-nz", "64", "--out", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        path
    };
    let (a, b) = (write("a.csv"), write("b.csv"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(a.with_extension("json")).unwrap(), fs::read(b.with_extension("json")).unwrap());

    let (header, rows) = csv_rows(&fs::read_to_string(&a).unwrap());
    assert_eq!(header, ["y", "z", "structure", "t_control", "q"]);
    assert!(rows.len() > 64 * 64 / 2 && rows.len() <= 64 * 64, "{}", rows.len());
    assert!(rows.iter().all(|r| {
        let (y, z): (f64, f64) = (r.get(0).unwrap().parse().unwrap(), r.get(1).unwrap().parse().unwrap());
        y > 0.0 && y * y + z * z < 1.0
    }));
    let labels: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.get(2).unwrap()).collect();
    assert_eq!(labels.into_iter().collect::<Vec<_>>(), ["BShB", "BShSvNegB", "BSvNegB", "BSvPosB"]);

    let meta: serde_json::Value = serde_json::from_slice(&fs::read(a.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta["grid_ny"], 64);
    assert_eq!(meta["regime"], "B");
}

#[test]
fn csv_numbers_round_trip() {
    let o = run(&["ernst", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&o));
    let col = header.iter().position(|h| h == "y_m").unwrap();
    let y: f64 = rows[0].get(col).unwrap().parse().unwrap();
    let v = json(&run(&["ernst", "--format", "json"]));
    assert_eq!(y, v["m"]["y"].as_f64().unwrap());
}

#[test]
fn trajectory_polyline() {
    let o = run(&["trajectory", "--point", "0.3", "0.1", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("BShSvNegB"));
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["segment", "kind", "y", "z"]);
    let kinds: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.get(1).unwrap()).collect();
    assert!(kinds.len() >= 3, "{kinds:?}");
}

#[test]
fn phase_diagram_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pd.csv");
    let o = run(&[
        "phase-diagram",
        "--range-gamma",
        "0.5",
        "1.5",
        "--range-Gamma",
        "1.69",
        "1.9",
        "--n-gamma",
        "3",
        "--n-Gamma",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&fs::read_to_string(&path).unwrap());
    assert_eq!(header, ["gamma", "Gamma", "q_ernst", "regime", "physical"]);
    assert_eq!(rows.len(), 9);
    let regime_at = |g1: f64, g2: f64| {
        rows.iter()
            .find(|r| {
                (r.get(0).unwrap().parse::<f64>().unwrap() - g1).abs() < 1e-12
                    && (r.get(1).unwrap().parse::<f64>().unwrap() - g2).abs() < 1e-12
            })
            .map(|r| r.get(3).unwrap().to_string())
            .unwrap()
    };
    assert_eq!(regime_at(0.5, 1.9), "A");
    assert_eq!(regime_at(1.5, 1.69), "C");
    assert!(Path::new(&path.with_extension("json")).exists());
}

#[test]
fn verify_passes_and_is_seeded() {
    let a = run(&["verify", "--seed", "7"]);
    let b = run(&["verify", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert!(String::from_utf8_lossy(&a.stderr).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn verify_catches_a_perturbed_surface() {
    let o = run(&["verify", "--q-perturb", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAIL q_surface_deviation"), "{err}");
    assert!(err.contains("verification failed: q_surface_deviation"), "{err}");
}
