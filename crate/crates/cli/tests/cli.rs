use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dqma(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqma"))
        .args(args)
        .current_dir(dir)
        .env("DQMA_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(dir: &Path, cfg: &str, extra: &[&str]) -> (Output, String) {
    let out = dir.join("out");
    let out_s = out.to_string_lossy().into_owned();
    let mut args = vec!["run", "--config", cfg, "--out-dir", &out_s];
    args.extend_from_slice(extra);
    let o = dqma(&args, dir);
    (o, out_s)
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sgdiv_honest_accepts() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "c.json", r#"{"protocol":"sgdiv","seed":5,"params":{"r":3,"n":2}}"#);
    let (o, out) = run(d.path(), &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(Path::new(&out).join("result.json"));
    assert!((v["accept_probability"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["output_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(v["transcript_sample"].is_object());
    let csv = fs::read_to_string(Path::new(&out).join("result.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn zh_all_zeros_exact() {
    let d = TempDir::new().unwrap();
    let cfg = config(
        d.path(),
        "c.json",
        r#"{"protocol":"zh-locc","seed":1,"strategy":{"kind":"all_zeros"},"params":{"n":4}}"#,
    );
    let (o, out) = run(d.path(), &cfg, &[]);
    assert!(o.status.success());
    let v = read_json(Path::new(&out).join("result.json"));
    let p = v["accept_probability"].as_f64().unwrap();
    assert!((p - (2.0f64 / 3.0).powi(4)).abs() < 1e-12);
    assert_eq!(v["details"]["classical_bits"], 3 + 7 + 4);
}

#[test]
fn sampled_mode_reports_interval() {
    let d = TempDir::new().unwrap();
    let cfg = config(
        d.path(),
        "c.json",
        r#"{"protocol":"zh-locc","seed":1,"strategy":{"kind":"all_zeros"},"params":{"n":2}}"#,
    );
    let (o, out) = run(d.path(), &cfg, &["--mode", "sample", "--trials", "4000"]);
    assert!(o.status.success());
    let v = read_json(Path::new(&out).join("result.json"));
    let acc = &v["acceptance"];
    assert_eq!(acc["kind"], "estimate");
    let (lo, hi) = (acc["ci_low"].as_f64().unwrap(), acc["ci_high"].as_f64().unwrap());
    assert!(lo <= 4.0 / 9.0 && 4.0 / 9.0 <= hi, "[{lo}, {hi}]");
}

fn strip_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("generated_unix");
    v
}

#[test]
fn same_seed_same_result() {
    let d = TempDir::new().unwrap();
    let cfg = config(
        d.path(),
        "c.json",
        r#"{"protocol":"sgdi","seed":9,"mode":"sample","trials":300,"params":{"r":2,"n":1,"k":2,"m":1},
            "strategy":{"kind":"orthogonal_at","node":2,"column":2}}"#,
    );
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let mut texts = Vec::new();
    for out in [a.path(), b.path()] {
        let o = dqma(&["run", "--config", &cfg, "--out-dir", &out.to_string_lossy()], d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(fs::read_to_string(out.join("result.json")).unwrap());
    }
    let drop_time = |s: &str| s.lines().filter(|l| !l.contains("generated_unix")).collect::<Vec<_>>().join("\n");
    assert_eq!(drop_time(&texts[0]), drop_time(&texts[1]));
    assert_eq!(
        strip_time(serde_json::from_str(&texts[0]).unwrap()),
        strip_time(serde_json::from_str(&texts[1]).unwrap())
    );
}

#[test]
fn malformed_configs_exit_2() {
    let d = TempDir::new().unwrap();
    let cases = [
        (r#"{"protocol":"zh-locc","params":{"n":2}}"#, "seed"),
        (r#"{"protocol":"nope","seed":1}"#, "nope"),
        (r#"{"protocol":"zh-locc","seed":1,"params":{"n":2,"q":1}}"#, "`q`"),
        (r#"{"protocol":"zh-locc","seed":1,"params":{"n":"two"}}"#, "params"),
        (r#"{"protocol":"zh-locc","seed":1,"params":{"n":2}"#, "EOF"),
    ];
    for (i, (body, needle)) in cases.iter().enumerate() {
        let cfg = config(d.path(), &format!("bad{i}.json"), body);
        let (o, _) = run(d.path(), &cfg, &[]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{body}: {err}");
    }
    let (o, _) = run(d.path(), "missing.json", &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn capacity_exit_3() {
    let d = TempDir::new().unwrap();
    let cfg = config(
        d.path(),
        "c.json",
        r#"{"protocol":"seteq","seed":1,"strategy":{"kind":"all_zeros"},"params":{"p":101,"c_tilde":1}}"#,
    );
    let (o, _) = run(d.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = config(d.path(), "d.json", r#"{"protocol":"sgdiv","seed":1,"params":{"r":3,"n":8}}"#);
    let (o, _) = run(d.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
}

fn sweep(dir: &Path, body: &str) -> (Output, Vec<csv::StringRecord>) {
    let cfg = config(dir, "s.json", body);
    let out = dir.join("out");
    let o = dqma(&["sweep", "--config", &cfg, "--out-dir", &out.to_string_lossy()], dir);
    let rows = if o.status.success() {
        let mut r = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
        r.records().map(|x| x.unwrap()).collect()
    } else {
        Vec::new()
    };
    (o, rows)
}

fn column(rows: &[csv::StringRecord], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn sweep_interpolation() {
    let d = TempDir::new().unwrap();
    let (o, rows) = sweep(
        d.path(),
        r#"{"protocol":"sgdiv","seed":2,"params":{"r":2,"n":1},
            "strategy":{"kind":"interpolate","t":0,"target":{"kind":"orthogonal_at","node":2}},
            "sweep":{"t":[0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1]}}"#,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows.len(), 11);
    let acc = column(&rows, 6);
    assert!((acc[0] - 1.0).abs() < 1e-12);
    assert!(acc.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn sweep_zh_copies() {
    let d = TempDir::new().unwrap();
    let (o, rows) = sweep(
        d.path(),
        r#"{"protocol":"zh-locc","seed":2,"strategy":{"kind":"all_zeros"},"params":{"n":1},
            "sweep":{"n":[1,2,3,4,5,6]}}"#,
    );
    assert!(o.status.success());
    for (n, p) in column(&rows, 0).into_iter().zip(column(&rows, 6)) {
        assert!((p - (2.0f64 / 3.0).powi(n as i32)).abs() < 1e-12);
    }
}

#[test]
fn sweep_primes_respect_soundness() {
    let d = TempDir::new().unwrap();
    let (o, rows) = sweep(
        d.path(),
        r#"{"protocol":"seteq","seed":4,"params":{"p":5,"c_tilde":1,"equal":false},
            "sweep":{"p":[5,7,11,13]}}"#,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (p, acc) in column(&rows, 0).into_iter().zip(column(&rows, 6)) {
        assert!(acc <= 0.5 + 2.0 * (2.0 / p).powi(2) + 1e-12, "p = {p}: {acc}");
    }
}

#[test]
fn two_axes_rejected() {
    let d = TempDir::new().unwrap();
    let (o, _) = sweep(
        d.path(),
        r#"{"protocol":"zh-locc","seed":2,"params":{"n":1},"sweep":{"n":[1,2],"seed":[1,2]}}"#,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plan_table_and_json() {
    let d = TempDir::new().unwrap();
    let o = dqma(&["plan", "--r", "1", "--n", "1"], d.path());
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.lines().any(|l| l.starts_with("k ") && l.ends_with("144")));
    assert!(table.lines().any(|l| l.starts_with("m ") && l.ends_with("82944")));
    let o = dqma(&["plan", "--r", "1", "--n", "1", "--format", "json"], d.path());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["k"], 144);
    let o = dqma(&["plan", "--r", "1", "--n", "1", "--big-k", "5", "--big-n", "5"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn locc_and_classical_runs() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "l.json", r#"{"protocol":"locc-convert","seed":1,"params":{"n":1}}"#);
    let (o, out) = run(d.path(), &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(Path::new(&out).join("result.json"));
    let base = v["details"]["base_accept_probability"].as_f64().unwrap();
    assert!((v["accept_probability"].as_f64().unwrap() - base).abs() < 1e-9);
    assert_eq!(v["accounting"]["quantum_messages"], 0);

    let cfg = config(
        d.path(),
        "k.json",
        r#"{"protocol":"seteq-classical","seed":3,"params":{"r":2,"ell":3,"universe":5,"c_tilde":1,"fuzz":500}}"#,
    );
    let (o, out) = run(d.path(), &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(Path::new(&out).join("result.json"));
    assert_eq!(v["accept_probability"], 1.0);
    assert_eq!(v["details"]["fuzzed_wrong_verdicts"], 0);
}
