use std::path::Path;
use std::process::{Command, Output};

fn tnoisemod(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tnoisemod"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(csv.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect()
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = tnoisemod(&["selftest"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("PASS  Q(0) = 1/2"));
    assert!(text.ends_with("0 failed\n"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn analyze_single_delta_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = tnoisemod(&["analyze", "--delta-db", "10"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("scheme,N,mu,alpha,delta_db,analytic_bep\n"));
    let rows = rows(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "ternary");
    assert_eq!(&rows[0][4], "1.00000000000e1");
}

#[test]
fn analyze_fig2_mu_one_column_falls_with_snr() {
    let dir = tempfile::tempdir().unwrap();
    let out = tnoisemod(
        &["analyze", "--preset", "fig2", "--mu-list", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let values: Vec<f64> = rows(&stdout(&out))
        .iter()
        .map(|r| r[5].parse().unwrap())
        .collect();
    assert_eq!(values.len(), 16);
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
}

#[test]
fn analyze_writes_a_manifest_next_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = tnoisemod(
        &["analyze", "--preset", "fig3", "-o", "fig3.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        rows(&std::fs::read_to_string(dir.path().join("fig3.csv")).unwrap()).len(),
        48
    );
    let manifest = std::fs::read_to_string(dir.path().join("fig3.manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"analyze\""));
    assert!(manifest.contains("N = [100, 200, 400]"));
}

#[test]
fn bad_alpha_is_rejected_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "# comment\n[link]\nalpha = 1.0\n",
    )
    .unwrap();
    let out = tnoisemod(&["analyze", "-c", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.toml:3:9"), "{err}");
    assert!(err.contains("alpha"), "{err}");
    assert!(stdout(&out).is_empty());

    let out = tnoisemod(&["analyze", "--alpha", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--alpha"));
}

#[test]
fn usage_errors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = tnoisemod(&["simulate", "--trials", "many"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = tnoisemod(&["simulate", "--trials", "100"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--trials: trials must be at least 10000"));
    let out = tnoisemod(&["analyze", "-c", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = tnoisemod(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = tnoisemod(
        &[
            "simulate",
            "-q",
            "--delta-db",
            "10",
            "--trials",
            "1e4",
            "--n",
            "20",
            "-o",
            "no/such/dir/x.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn simulate_is_byte_identical_under_a_seed_and_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &'static str| {
        vec![
            "simulate",
            "--preset",
            "fig3",
            "--delta-db",
            "0,8",
            "--trials",
            "1e4",
            "--seed",
            "42",
            "-o",
            name,
        ]
    };
    let first = tnoisemod(&args("a.csv"), dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let second = tnoisemod(&args("b.csv"), dir.path());
    assert_eq!(second.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(!a.contains(&b'\r'));

    // Progress goes to stderr only.
    assert!(stdout(&first).is_empty());
    assert!(stderr(&first).contains("[ 12/12]"));

    let rerun = tnoisemod(
        &["simulate", "-q", "-c", "a.manifest.toml", "-o", "c.csv"],
        dir.path(),
    );
    assert_eq!(rerun.status.code(), Some(0), "{}", stderr(&rerun));
    assert_eq!(std::fs::read(dir.path().join("c.csv")).unwrap(), a);

    let text = String::from_utf8(a).unwrap();
    let rows = rows(&text);
    let count = |scheme: &str, n: &str| {
        rows.iter()
            .filter(|r| &r[0] == scheme && &r[1] == n)
            .count()
    };
    for n in ["100", "200", "400"] {
        assert_eq!(count("ternary", n), 2);
        assert_eq!(count("binary", n), 2);
    }
    assert!(rows.iter().all(|r| &r[10] == "42" && &r[11] == "ok"));
}

#[test]
fn fig2_preset_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = tnoisemod(
        &[
            "simulate",
            "-q",
            "--preset",
            "fig2",
            "--delta-db",
            "10",
            "--trials",
            "1e4",
            "-o",
            "f.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = rows(&std::fs::read_to_string(dir.path().join("f.csv")).unwrap());
    let ternary: Vec<(&str, &str)> = rows
        .iter()
        .filter(|r| &r[0] == "ternary")
        .map(|r| (&r[1], &r[2]))
        .collect();
    assert_eq!(
        ternary,
        [
            ("200", "5.70000000000e-1"),
            ("200", "7.70000000000e-1"),
            ("200", "1.00000000000e0")
        ]
    );
    let binary: Vec<&str> = rows
        .iter()
        .filter(|r| &r[0] == "binary")
        .map(|r| &r[1])
        .collect();
    assert_eq!(binary, ["400"]);
    // Ternary rows carry the analytic value and 3 bits per frame, binary rows 2.
    for r in &rows {
        let bits: u64 = r[8].parse().unwrap();
        match &r[0] {
            "ternary" => {
                assert!(!r[5].is_empty());
                assert_eq!(bits, 30_000);
            }
            _ => {
                assert!(r[5].is_empty());
                assert_eq!(bits, 20_000);
            }
        }
    }
}
