use std::path::Path;
use std::process::Command;

fn msgp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_msgp")).args(args).output().expect("spawn msgp")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
experiment = "logdet_benchmark"
m = [32, 64]

[logdet]
families = ["se"]
lengthscales = [0.5]
noise_variances = [0.1]
"#;

#[test]
fn runs_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("out.csv");
    let o = msgp(&["run", "--config", &cfg, "--m", "32,48", "--circulant", "tchan", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config: "));
    assert!(lines[0].contains("\"m\":[32,48]"));
    assert_eq!(lines.len(), 4);
    assert!(lines[2].contains("tchan"));
}

#[test]
fn json_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let o = msgp(&["run", "--config", &cfg, "--format", "json", "--seed", "9", "--whittle-window", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["rows"][0]["params"]["method"], "whittle:2");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(msgp(&["run", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
    let unknown = write(dir.path(), "u.toml", "experiment = \"stress1d\"\nbogus = 1\n");
    assert_eq!(msgp(&["run", "--config", &unknown]).status.code(), Some(2));
    let invalid = write(dir.path(), "i.toml", "experiment = \"stress1d\"\nm = 2\n");
    assert_eq!(msgp(&["run", "--config", &invalid]).status.code(), Some(2));
    let ok = write(dir.path(), "c.toml", SMALL);
    assert_eq!(msgp(&["run", "--config", &ok, "--circulant", "fourier"]).status.code(), Some(2));
    assert_eq!(msgp(&["run", "--config", &ok, "--ns", "0"]).status.code(), Some(2));
    let big = write(dir.path(), "a.toml", "experiment = \"accuracy\"\nn = 6000\n");
    assert_eq!(msgp(&["run", "--config", &big]).status.code(), Some(2));
}

#[test]
fn experiment_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("missing").join("out.csv");
    let o = msgp(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
