use std::path::Path;
use std::process::{Command, Output};

fn polcrypt(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_polcrypt"));
    cmd.args(args).env_remove("POLCRYPT_WORKERS");
    if let Some(w) = workers {
        cmd.env("POLCRYPT_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_passes_and_prints_csv() {
    let out = polcrypt(&["validate", "--trials", "50"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("experiment,scheme,m,snr_db,parameter,role,errors,bits,ber,aux1_name,aux1"));
    assert!(csv.lines().skip(1).all(|l| l.starts_with("validate,none,8,,")));
}

#[test]
fn output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for w in ["1", "3"] {
        let path = dir.path().join(format!("w{w}.csv"));
        let out = polcrypt(
            &[
                "ber-sweep",
                "--trials",
                "100",
                "--snr-start",
                "0",
                "--snr-stop",
                "10",
                "--snr-step",
                "5",
                "--seed",
                "9",
                "--out",
                path_str(&path),
            ],
            Some(w),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(String::from_utf8_lossy(&files[0]).lines().count(), 1 + 3 * 4);
}

#[test]
fn flags_win_over_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# rotation run\nm = 16\ntheta = pi\ntrials = 20\nsnr = 10\n").unwrap();
    let out = polcrypt(&["rotation-sweep", "--config", path_str(&cfg), "--m", "4"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("rotation_sweep,rotation,4,1.0000000000000000e1,3.1415926535897931e0,legit,"), "{row}");
}

#[test]
fn invalid_combinations_fail_with_message() {
    let out = polcrypt(&["ber-sweep", "--theta", "1.0"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));

    let out = polcrypt(&["stokes-stats", "--xi-re", "0.5"], None);
    assert!(!out.status.success());

    let out = polcrypt(&["validate"], Some("zero"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("POLCRYPT_WORKERS"));

    let out = polcrypt(&["ber-sweep", "--trials", "1", "--out", "/nonexistent-dir/x.csv"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/x.csv"));
}

#[test]
fn writes_plots() {
    let dir = tempfile::tempdir().unwrap();
    for (args, name) in [
        (vec!["imperfection-sweep", "--impairment", "unbalanced", "--xi-steps", "4", "--trials", "20"], "imp.svg"),
        (vec!["q-metrics", "--scheme", "none", "--trials", "100"], "q.svg"),
        (
            vec!["snr-transform", "--trials", "5000", "--snr-start", "-5", "--snr-stop", "5", "--snr-step", "5"],
            "snr.svg",
        ),
    ] {
        let svg = dir.path().join(name);
        let csv = dir.path().join(format!("{name}.csv"));
        let mut full = args.clone();
        full.extend(["--plot", path_str(&svg), "--out", path_str(&csv)]);
        let out = polcrypt(&full, Some("2"));
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
        assert!(out.stdout.is_empty());
    }
}
