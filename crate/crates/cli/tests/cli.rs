use std::path::Path;
use std::process::{Command, Output};

fn lab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adsgd-lab"))
        .args(args)
        .env("ADSGD_LAB_OUT", out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL: &str = r#"
name = "cli-small"
n_agents = 4
topology = "ring"
algorithm = "adsgd"
alpha = 0.05
seeds = [0]
target_loss = 50.0

[termination]
max_sim_time = 20.0

[problem]
kind = "quadratic"
dim = 3
"#;

fn run_dir(out: &Path) -> std::path::PathBuf {
    std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir() && p.file_name().unwrap().to_string_lossy().starts_with("cli-small"))
        .unwrap()
}

#[test]
fn run_then_report_and_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let o = lab(tmp.path(), &["run", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path());
    for f in ["config.toml", "metrics.csv", "summary.json", "base/seed-0/trace.csv", "base/seed-0/audit.json"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }

    let o = lab(tmp.path(), &["report", &dir.display().to_string()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("cli-small"));

    let report = tmp.path().join("audit.json");
    let trace = dir.join("base/seed-0/trace.csv").display().to_string();
    let o = lab(tmp.path(), &["audit", &trace, "--out", &report.display().to_string()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert!(v.to_string().contains("D_adsgd"));
}

#[test]
fn suite_covers_cases_and_agent_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let o = lab(tmp.path(), &["suite", &cfg, "--cases", "base,slow_comm"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path());
    assert!(dir.join("base").is_dir() && dir.join("slow_comm").is_dir());

    let o = lab(tmp.path(), &["suite", &cfg, "--cases", "base", "--agents", "4,9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("cli-small-scaling.json")).unwrap()).unwrap();
    assert!(table["speedup"].get("9").is_some());
}

#[test]
fn bounds_prints_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "b.toml",
        "B = 1\nD = 0\nl_f = 1.0\nn = 1\nk = 100\nsigma2 = 1.0\nf_gap = 1.0\nalpha = 0.5\n",
    );
    let o = lab(tmp.path(), &["bounds", &p]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["block_admissible"], true);
    assert_eq!(v["c0"], 0.0);
}

#[test]
fn bad_inputs_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write(tmp.path(), "bad.toml", &SMALL.replace("alpha = 0.05", "alpha = 0.05\nwobble = 3"));
    assert_eq!(code(&lab(tmp.path(), &["run", &unknown])), 1);
    let beta = write(tmp.path(), "beta.toml", &SMALL.replace("alpha = 0.05", "alpha = 0.05\nbeta = 0.01"));
    assert_eq!(code(&lab(tmp.path(), &["run", &beta])), 1);
    let cfg = write(tmp.path(), "small.toml", SMALL);
    assert_eq!(code(&lab(tmp.path(), &["run", &cfg, "--case", "sideways"])), 1);
    assert_eq!(code(&lab(tmp.path(), &["audit", "/nonexistent/trace.csv"])), 1);
    let bounds = write(tmp.path(), "b.toml", "B = 0\nD = 0\nl_f = 1.0\nn = 1\nk = 1\nsigma2 = 0.0\nf_gap = 0.0\n");
    assert_eq!(code(&lab(tmp.path(), &["bounds", &bounds])), 1);
}

#[test]
fn divergence_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "hot.toml", &SMALL.replace("alpha = 0.05", "alpha = 5.0"));
    let o = lab(tmp.path(), &["run", &cfg]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("DIVERGED"));
}
