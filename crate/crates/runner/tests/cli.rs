use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"
name = "small"
seed = 5

[coefficient]
kind = "box"
amplitude = 0.2
start = 0.5
end = 1.5

[grid]
r_step = 0.02
r_extent = 4.0
k_half_width = 10.0
k_step = 0.1

[identities]
step = 0.005
extent = 4.0
halving_steps = [0.02, 0.01, 0.005]

[normalization]

[mr_check]
samples = 5
depth = 2
rho = [0.0, 1.0, 2.0]
"#;

fn krein(args: &[&str], cache: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_krein"))
        .args(args)
        .env("KREIN_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn report(out: &std::process::Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json report on stdout")
}

#[test]
fn run_writes_complete_report_and_reuses_cache() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("small.scn");
    std::fs::write(&scn, SMALL).unwrap();
    let cache = dir.path().join("cache");
    let out_dir = dir.path().join("out");
    let scn = scn.to_str().unwrap();

    let first = krein(&["run", scn, "--json", "--out", out_dir.to_str().unwrap()], &cache);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stdout));
    let first = report(&first);
    let names: Vec<&str> = first["experiments"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["identities", "solve", "normalization", "mr_check"]);
    assert_eq!(first["experiments"][1]["cache"], "stored");
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("sigma.csv").exists());

    let second = report(&krein(&["run", scn, "--json"], &cache));
    assert_eq!(second["experiments"][1]["cache"], "hit");
    for (a, b) in first["experiments"].as_array().unwrap().iter().zip(second["experiments"].as_array().unwrap()) {
        assert_eq!(a["observed"], b["observed"], "{}", a["name"]);
        assert_eq!(a["inputs_hash"], b["inputs_hash"]);
    }
}

#[test]
fn failing_ceiling_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("tight.scn");
    std::fs::write(&scn, SMALL.replace("[normalization]", "[normalization]\nceiling = 1e-6")).unwrap();
    let out = krein(&["transform", scn.to_str().unwrap()], &dir.path().join("cache"));
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL normalization"), "{text}");
}

#[test]
fn invalid_scenario_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("bad.scn");
    let text = SMALL.replace("seed = 5", "seed = 5\ncolour = 1").replace("[normalization]", "[normalization]\nceiling = -1.0");
    std::fs::write(&scn, text).unwrap();
    let out = krein(&["run", scn.to_str().unwrap()], &dir.path().join("cache"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("normalization.ceiling"), "{err}");
}

#[test]
fn asympt_runs_without_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = krein(&["asympt", "--check", "fresnel", "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let observed = &r["experiments"][0]["observed"];
    assert_eq!(observed["fresnel"]["c0_exact"], true);
    assert!(observed.get("phase").is_none());
}

#[test]
fn sizing_rule_applies_to_time_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = krein(&["scatter", "gauss03", "--times", "5,10,1000"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sizing rule"));
}

#[test]
fn list_names_bundled_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = krein(&["list"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["free", "gauss03", "box03", "const1"] {
        assert!(text.lines().any(|l| l == name));
    }
}
