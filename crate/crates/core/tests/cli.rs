use std::path::Path;
use std::process::{Command, Output};

use spinorbit::Model;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinorbit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

// Everything except the timestamp line.
fn without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# timestamp:"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn hansen_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["hansen", "--out", "h.csv"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(text.starts_with("# program: spinorbit"));
    assert!(text.contains("# subcommand: hansen") && text.contains("# config: e=2.056e-1"));
    assert!(text.lines().any(|l| l == "q,G20q,log10_abs_G20q"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 25);
    let minus_two = rows.iter().find(|r| r[0] == "-2").unwrap();
    assert_eq!(minus_two[1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(minus_two[2], "");
    // Full round-trip precision.
    let zero = rows.iter().find(|r| r[0] == "0").unwrap();
    assert_eq!(zero[1].split('e').next().unwrap().len(), 18);

    let out = run(dir.path(), &["hansen", "--e", "0", "--out", "h0.csv"]);
    assert!(out.status.success());
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("h0.csv")).unwrap());
    let nonzero: Vec<_> = rows
        .iter()
        .filter(|r| r[1].parse::<f64>().unwrap() != 0.0)
        .collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(
        (
            nonzero[0][0].as_str(),
            nonzero[0][1].parse::<f64>().unwrap()
        ),
        ("0", 1.0)
    );
}

#[test]
fn bad_inputs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["hansen", "--e", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eccentricity"));
    let out = run(dir.path(), &["--set", "nonsense=3", "hansen"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["--params", "missing.txt", "hansen"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parameter_file_and_flags_resolve_in_order() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), "# trial\ne = 0.3\nL = 500\n").unwrap();
    let out = run(
        dir.path(),
        &[
            "--params",
            "p.txt",
            "--capture-L",
            "700",
            "hansen",
            "--out",
            "h.csv",
        ],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(text.contains("# config: e=3e-1"));
    assert!(text.contains("# config: L=700"));
}

#[test]
fn tide_dump_zero_with_tides_off_and_derivative_matches_differences() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "--set",
            "mu=0",
            "tide-dump",
            "--samples",
            "61",
            "--out",
            "z.csv",
        ],
    );
    assert!(out.status.success());
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("z.csv")).unwrap());
    assert_eq!(rows.len(), 61);
    for r in &rows {
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
    }

    let out = run(
        dir.path(),
        &["tide-dump", "--samples", "601", "--out", "t.csv"],
    );
    assert!(out.status.success());
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("t.csv")).unwrap());
    let model = Model::mercury().unwrap();
    let mut checked = 0;
    for r in &rows {
        let ratio: f64 = r[0].parse().unwrap();
        let x: f64 = r[1].parse().unwrap();
        let kink_gap = ((2.0 * ratio).round() - 2.0 * ratio).abs() / 2.0;
        if r[3].is_empty() {
            assert!(kink_gap < 1e-9 && ratio > 0.25, "{ratio}");
            continue;
        }
        if kink_gap < 1e-3 {
            continue;
        }
        let d: f64 = r[3].parse().unwrap();
        let h = 1e-6;
        let fd = (model.accel_tide_exact(x + h) - model.accel_tide_exact(x - h)) / (2.0 * h);
        assert!(
            (d - fd).abs() <= 1e-6 * d.abs().max(1e-9),
            "{ratio}: {d} {fd}"
        );
        checked += 1;
    }
    assert!(checked > 500);
}

#[test]
fn tri_dump_and_layout_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["tri-dump", "--samples", "8", "--out", "tri.csv"],
    );
    assert!(out.status.success());
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("tri.csv")).unwrap());
    assert_eq!(rows.len(), 8);
    let out = run(dir.path(), &["layout", "--out", "layout.json"]);
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("layout.json")).unwrap())
            .unwrap();
    assert_eq!(json["manifest"]["subcommand"], "layout");
}

#[test]
fn truncated_series_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "validate",
        "--points",
        "2",
        "--tide-samples",
        "200",
        "--out",
        "v.json",
    ];
    let out = run(dir.path(), &[&args[..], &["--corrupt-ds", "4"]].concat());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAIL taylor map"), "{stderr}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], false);
    assert_eq!(json["hansen"]["pass"], true);

    let out = run(
        dir.path(),
        &[
            "--set",
            "mu=0",
            "--set",
            "triax=0",
            "validate",
            "--points",
            "2",
            "--tide-samples",
            "200",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn traj_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "traj",
        "--theta-dot0",
        "49",
        "--iters",
        "50",
        "--stride",
        "10",
        "--out",
        "t.csv",
    ];
    assert!(run(dir.path(), &args).status.success());
    let first = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(run(dir.path(), &args).status.success());
    let second = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(without_timestamp(&first), without_timestamp(&second));
    let rows = data_rows(&first);
    let ks: Vec<&str> = rows
        .iter()
        .filter(|r| !r[0].is_empty())
        .map(|r| r[0].as_str())
        .collect();
    assert_eq!(ks, ["0", "10", "20", "30", "40", "50"]);
    assert!(first.contains("# capture: {"));
}

#[test]
fn small_campaign_resumes_to_the_same_table() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--capture-L",
        "40",
        "--capture-K",
        "2",
        "--capture-eps-i",
        "0.05",
        "--capture-eps-m",
        "2e-3",
        "--max-iters",
        "300",
        "--seed",
        "4",
        "campaign",
        "--trajectories",
        "6",
        "--calibration-terms",
        "10000",
        "--out",
        "c",
    ];
    let out = run(dir.path(), &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let strip_cpu = |text: &str| -> Vec<String> {
        data_rows(text)
            .into_iter()
            .map(|mut r| {
                r[5].clear();
                r.join(",")
            })
            .collect()
    };
    let full = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(data_rows(&full).len(), 6);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["trajectories"], 6);
    assert_eq!(json["campaign"]["seed"], 4);

    // Drop half the checkpoint and resume.
    let cp = dir.path().join("c.checkpoint.jsonl");
    let text = std::fs::read_to_string(&cp).unwrap();
    let kept: Vec<&str> = text.lines().take(3).collect();
    std::fs::write(&cp, kept.join("\n") + "\n").unwrap();
    let out = run(dir.path(), &[&args[..], &["--resume"]].concat());
    assert!(out.status.success());
    let resumed = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(strip_cpu(&full), strip_cpu(&resumed));
}
