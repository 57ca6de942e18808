use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasefilter"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(config: &Path, out: &Path, seed: Option<u64>) -> Output {
    let mut cmd = bin();
    cmd.arg("run").arg(config).arg("--out").arg(out);
    if let Some(s) = seed {
        cmd.arg("--seed").arg(s.to_string());
    }
    cmd.output().expect("spawn")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    let text = std::fs::read_to_string(scenario("bump_compare.toml"))
        .unwrap()
        .replace("t_final = 1.0", "t_final = 0.2");
    let cfg = tmp.path().join("short.toml");
    std::fs::write(&cfg, text).unwrap();
    assert!(run(&cfg, &a, None).status.success());
    assert!(run(&cfg, &b, None).status.success());
    let fa = files(&a);
    assert!(fa.iter().any(|(n, _)| n == "trajectory_modified.csv"));
    assert!(fa.iter().any(|(n, _)| n == "moments_grid.csv"));
    assert_eq!(fa, files(&b));
    assert!(run(&cfg, &c, Some(99)).status.success());
    let inn = |d: &Path| std::fs::read(d.join("innovations.csv")).unwrap();
    assert_ne!(inn(&a), inn(&c));
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&scenario("oscillator_kalman.toml"), &a, None)
        .status
        .success());
    let manifest = a.join("manifest.toml");
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("[derived]"));
    let copy = tmp.path().join("again.toml");
    std::fs::write(&copy, &text).unwrap();
    let out = run(&copy, &b, None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "innovations.csv",
        "trajectory_kalman.csv",
        "summary.json",
        "manifest.toml",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn non_isotropic_channel_is_rejected_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(
        &cfg,
        r#"[model]
n = 2
m = 4
theta = "position-momentum"
r = [[1.0, 0.0], [0.0, 1.0]]
coupling = [[0.5, 0.0], [0.0, 0.5], [0.0, 0.0], [0.0, 0.0]]
selector = [0]

[channel]
g_re = [[1.0, 0.0], [0.0, 0.0]]
g_im = [[0.0, 0.0], [1.0, 0.0]]

[init]
mean = [0.0, 0.0]
cov = [[1.0, 0.0], [0.0, 1.0]]

[run]
engine = "kalman"
t_final = 0.1
dt = 1e-3
"#,
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["exit_code"], 2);
    assert!(err["line"].as_u64().is_some(), "{err}");
    assert!(
        err["message"].as_str().unwrap().contains("isotropy"),
        "{err}"
    );
}

#[test]
fn malformed_config_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("oscillator_kalman.toml"))
        .unwrap()
        .replace("dt = 1e-3", "dt = -1e-3");
    std::fs::write(&cfg, text).unwrap();
    let out = bin().arg("inspect").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["line"].as_u64().is_some(), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let out = bin()
        .arg("inspect")
        .arg("/nonexistent/scenario.toml")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inspect_prints_derived_matrices() {
    let out = bin()
        .arg("inspect")
        .arg(scenario("bump_compare.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: toml::Table = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    let d = v["derived"].as_table().unwrap();
    for k in ["A", "B", "K", "P", "Q", "FFT"] {
        assert!(d.contains_key(k), "{k}");
    }
}

#[test]
fn verify_core_emits_json_lines() {
    let out = bin().args(["verify", "core"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(lines.len() >= 5);
    assert!(lines
        .iter()
        .all(|l| l["pass"] == true && l["suite"] == "core"));
}

#[test]
fn guide_scenario_is_valid() {
    let guide = include_str!("../../../book/src/cli.md");
    let start = guide.find("```toml\n").unwrap() + "```toml\n".len();
    let text = &guide[start..start + guide[start..].find("```").unwrap()];
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("guide.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = bin().arg("inspect").arg(&cfg).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
