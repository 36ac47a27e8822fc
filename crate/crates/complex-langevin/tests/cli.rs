use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_complex-langevin"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("COMPLEX_LANGEVIN_OUT")
        .output()
        .unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn series_writes_known_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["series", "--p", "4", "--nterms", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&dir.path().join("series_p4.csv"));
    let got: Vec<(&str, &str)> = r.iter().map(|v| (v[1].as_str(), v[2].as_str())).collect();
    assert_eq!(got, vec![("2", "6"), ("4", "216"), ("6", "22896")]);
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_complex-langevin")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(bin(dir.path(), &["series", "--p", "3"]).status.code(), Some(1));
    assert_eq!(bin(dir.path(), &["borel", "--lambda", "-1"]).status.code(), Some(1));
    assert_eq!(bin(dir.path(), &["series", "--bogus"]).status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "# defaults\n[breakdown-fit]\npoints = \"1:0.16,0.5:0.22,0.2:0.41\"\n").unwrap();
    let c = cfg.to_str().unwrap();

    let o = bin(dir.path(), &["--config", c, "breakdown-fit"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&dir.path().join("breakdown_fit.csv")).len(), 3);

    let o = bin(dir.path(), &["--config", c, "breakdown-fit", "--points", "1:0.16,0.5:0.22,0.2:0.41,0.1:0.67"]);
    assert!(o.status.success());
    assert_eq!(rows(&dir.path().join("breakdown_fit.csv")).len(), 4);

    fs::write(&cfg, "[breakdown-fit]\nnonsense = 1\n").unwrap();
    assert_eq!(bin(dir.path(), &["--config", c, "breakdown-fit"]).status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--theta-frac", "0.5", "--ai", "1", "--ntraj", "300", "--delta", "1e-3", "--tfinal", "0.1", "--checkpoints", "4", "--seed", "9", "--no-reference"];
    assert!(bin(a.path(), &args).status.success());
    let mut threaded = vec!["--threads", "2"];
    threaded.extend_from_slice(&args);
    assert!(bin(b.path(), &threaded).status.success());
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin(dir.path(), &["breakdown-fit"]).status.success());
    assert!(bin(dir.path(), &["--format", "json", "breakdown-fit"]).status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("breakdown_fit.json")).unwrap()).unwrap();
    assert_eq!(v["meta"]["kind"], "breakdown_fit");
    let csv = rows(&dir.path().join("breakdown_fit.csv"));
    let json = v["rows"].as_array().unwrap();
    assert_eq!(csv.len(), json.len());
    for (c, j) in csv.iter().zip(json) {
        for (a, b) in c.iter().zip(j.as_array().unwrap()) {
            assert_eq!(a.parse::<f64>().unwrap(), b.as_f64().unwrap());
        }
    }
    let gamma = v["meta"]["params"]["gamma"].as_f64().unwrap();
    assert!((gamma - 0.561).abs() < 2e-3);
}

#[test]
fn harmonic_writes_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["harmonic", "--theta-frac", "0.5", "--nmax", "8", "--ntraj", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["harmonic_flow.csv", "harmonic_norms.csv", "harmonic_ground_state.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
