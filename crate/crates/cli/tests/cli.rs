use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[task]
task = "be-parabolic"
grid = { a = 0.0, b = 1.0, d = 8 }
scheme = { dt = 0.01 }
sampler = { modes = 4, amplitude = 1.0, decay = 2.0 }
forcing = { sampler = { modes = 3, amplitude = 1.0, decay = 2.0 }, seed = 1 }

[experiment]
seeds = [0, 1]
n_grid = [16, 32]
n_test = 32

[train]
epochs = 3

[lipschitz]
n_pairs = 200

[rollout]
steps = 3
n_mc = 8
n_train = 16
n_test = 16
fd_samples = 2
"#;

fn opstep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opstep")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_exits_with_usage() {
    let out = opstep(&["lipschitz", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
    assert_eq!(opstep(&["train"]).status.code(), Some(2));
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = opstep(&["gen-data", "--config", &cfg, "--n", "20", "--seed", "3", "--out", s(&a)]);
    let ob = opstep(&["gen-data", "--config", &cfg, "--n", "20", "--seed", "3", "--out", s(&b)]);
    assert!(oa.status.success() && ob.status.success());
    assert_eq!(oa.stdout.split(|c| *c == b'\n').skip(1).collect::<Vec<_>>(), ob.stdout.split(|c| *c == b'\n').skip(1).collect::<Vec<_>>());
    for f in ["x.f64", "y.f64", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let data = dir.path().join("data");
    let model = dir.path().join("model.bin");
    assert!(opstep(&["gen-data", "--config", &cfg, "--n", "32", "--out", s(&data)]).status.success());
    let out = opstep(&["train", "--config", &cfg, "--data", s(&data), "--out", s(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = dir.path().join("eval.json");
    let out = opstep(&["eval", "--config", &cfg, "--model", s(&model), "--n-test", "16", "--out", s(&json)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v["error"].as_f64().unwrap() > 0.0);

    let out = opstep(&["eval", "--config", &cfg, "--circuit", "--n-test", "16", "--out", s(&json)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v["error"].as_f64().unwrap() < 1e-26);
}

#[test]
fn circuit_verify_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.toml", "dims = [4]\nms = [1, 2]\nn_inputs = 5\n");
    let out = opstep(&["circuit-verify", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().next().unwrap().contains("deviation"));
    assert_eq!(text.lines().filter(|l| l.ends_with("pass")).count(), 3 * 2 + 2);
}

#[test]
fn rate_study_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let res = dir.path().join("res");
    assert!(opstep(&["rate-study", "--config", &cfg, "--out", s(&res)]).status.success());
    assert!(res.join("results.csv").exists());
    let out = opstep(&["report", "--config", &cfg, "--dir", s(&res)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 result rows"));
}

#[test]
fn lipschitz_and_rollout_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let out = opstep(&["lipschitz", "--config", &cfg, "--seed", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).ends_with("pass\n"));
    let json = dir.path().join("roll.json");
    let out = opstep(&["rollout", "--config", &cfg, "--surrogate", "circuit", "--out", s(&json)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json.exists());
}

#[test]
fn hypothesis_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[task]
task = "claw-picard"
grid = { a = 0.0, b = 1.0, d = 8 }
scheme = { dt = 0.01, m = 2, kappa = 0.5 }
sampler = { modes = 4, amplitude = 1.0, decay = 2.0 }
flux = { kind = "burgers", range = 2.0 }
"#;
    let cfg = write_config(dir.path(), "c.toml", text);
    let out = opstep(&["lipschitz", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
