use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn halfline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfline")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == ext)).collect();
    v.sort();
    v
}

/// Parses `decay.csv` into `(p, projected, t, norm)` rows.
fn decay_rows(dir: &Path) -> Vec<(f64, bool, f64, f64)> {
    let mut r = csv::Reader::from_path(dir.join("decay.csv")).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[1].parse().unwrap(), rec[2].parse().unwrap(), rec[3].parse().unwrap(), rec[4].parse().unwrap())
        })
        .collect()
}

/// Least-squares slope of `-log norm` against `log t`.
fn slope(rows: &[(f64, f64)]) -> f64 {
    let n = rows.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().map(|(t, v)| (t.ln(), -v.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn free_decay_exponent_at_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("free");
    let o = halfline(&["decay", "--preset", "free", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let rows: Vec<(f64, f64)> =
        decay_rows(&out).into_iter().filter(|r| r.0 == 1.0 && r.1 && (1.0..=64.0).contains(&r.2)).map(|r| (r.2, r.3)).collect();
    assert!(rows.len() >= 5);
    let alpha = slope(&rows);
    assert!((0.45..=0.55).contains(&alpha), "alpha = {alpha}");
}

#[test]
fn deep_well_kernel_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deep");
    let o = halfline(&["decay", "--preset", "deep-well", "--mode", "both", "--out", out.to_str().unwrap()]);
    // exit 1 is allowed: the summary carries every fit, including ones that miss
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.contains("max kernel-vs-oracle relative L2 error")).expect("cross-check line");
    let value: f64 = line.split('=').nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(value < 1e-2, "{line}");
    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("decay.json")).unwrap()).unwrap();
    let results = sidecar["cross_check"]["results"].as_array().unwrap();
    assert_eq!(results.len(), 4);
    assert!(results.iter().all(|r| r["relative_l2"].as_f64().unwrap() < 1e-2));
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"potential": "bound-well", "p_list": [1.0, 5.0]}"#).unwrap();
    let out = dir.path().join("out");
    let o = halfline(&["decay", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    fs::write(&cfg, r#"{"potential": "bound-well", "unknown_key": 1}"#).unwrap();
    let o = halfline(&["scatter", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn missing_potential_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = halfline(&["scatter", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn foreign_directory_is_not_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("keep");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("notes.txt"), "mine").unwrap();
    let o = halfline(&["scatter", "--preset", "free", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "mine");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}"))).collect();
    for r in &runs {
        for cmd in ["scatter", "decay"] {
            let target = r.join(cmd);
            let o = halfline(&[cmd, "--preset", "bound-well", "--out", target.to_str().unwrap()]);
            assert!(o.status.success(), "{}", stdout(&o));
        }
    }
    for cmd in ["scatter", "decay"] {
        let a = files_with_ext(&runs[0].join(cmd), "csv");
        assert!(!a.is_empty());
        for f in a {
            let g = runs[1].join(cmd).join(f.file_name().unwrap());
            assert_eq!(fs::read(&f).unwrap(), fs::read(&g).unwrap(), "{}", f.display());
        }
    }
}

#[test]
fn every_sidecar_has_a_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"potential": "shallow-well", "mode": "both", "times": [1.0, 2.0]}"#).unwrap();
    for cmd in ["scatter", "evolve"] {
        let out = dir.path().join(cmd);
        let o = halfline(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stdout(&o));
        let sidecars = files_with_ext(&out, "json");
        assert!(sidecars.len() >= 2);
        for s in sidecars {
            let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&s).unwrap()).unwrap();
            assert_eq!(v["schema_version"], 1, "{}", s.display());
            assert!(v["kind"].is_string());
        }
        assert!(out.join("summary.txt").is_file());
    }
    let evolve = dir.path().join("evolve");
    assert_eq!(files_with_ext(&evolve, "csv").len(), 4);
    let mut r = csv::Reader::from_path(evolve.join("field_kernel_00.csv")).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["x", "re", "im"]);
}

#[test]
fn scatter_reports_the_bound_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = halfline(&["scatter", "--preset", "bound-well", "--mode", "both", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let mut r = csv::Reader::from_path(out.join("bound_states.csv")).unwrap();
    assert_eq!(r.records().count(), 1);
    let mut r = csv::Reader::from_path(out.join("scattering.csv")).unwrap();
    for rec in r.records() {
        let abs: f64 = rec.unwrap()[3].parse().unwrap();
        assert!((abs - 1.0).abs() < 1e-8);
    }
}
