use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn greenmono(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_greenmono"));
    cmd.args(args).env_remove("GREENMONO_OUT");
    if let Some(dir) = env_out {
        cmd.env("GREENMONO_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    greenmono(&all, None)
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn euclidean_identities_pass() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["run", "--manifold", "euclidean:3", "--suite", "identities"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("identities.csv")).unwrap();
    let head: Vec<&str> = csv.lines().take(6).collect();
    assert_eq!(head[0], format!("# greenmono {}", env!("CARGO_PKG_VERSION")));
    assert!(head[1].starts_with("# config_sha256 ") && head[1].len() == "# config_sha256 ".len() + 64);
    assert_eq!(head[2], "# seed 20240917");
    assert_eq!(head[4], "# manifold euclidean:3");
    let summary = json(dir.path().join("summary.json"));
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["suites"][0]["status"], "pass");
    let sum_csv = fs::read_to_string(dir.path().join("identities_summary.csv")).unwrap();
    // one header row and one row per identity
    assert_eq!(sum_csv.lines().filter(|l| !l.starts_with('#')).count(), 16);
}

#[test]
fn cone_monotone_reports_constant_a() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["run", "--manifold", "cone:3:0.9", "--suite", "monotone", "--betas", "1,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = json(dir.path().join("monotone.json"));
    let spreads = rep["a_spread"].as_array().unwrap();
    assert_eq!(spreads.len(), 2);
    for s in spreads {
        assert!(s["relative_spread"].as_f64().unwrap() < 1e-12);
    }
    // A_β = ω c^{2β}·... is the same number at every level: check the CSV directly
    let csv = fs::read_to_string(dir.path().join("av_profiles.csv")).unwrap();
    let a: Vec<f64> = csv
        .lines()
        .filter(|l| l.starts_with("1e0,"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(a.len() > 100);
    assert!(a.iter().all(|v| (v - a[0]).abs() < 1e-12 * a[0]));
    for q in ["A", "A_minus_2n2V", "g_combination", "r2n_A_minus_omega", "r3n_Aprime"] {
        assert!(dir.path().join(format!("monotone_{q}.csv")).exists(), "{q}");
    }
}

#[test]
fn product_u1_umbilic_records_the_plateau() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["run", "--manifold", "product_r3_s1:6.2832", "--suite", "umbilic", "--u", "example:u1"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = json(dir.path().join("umbilic.json"));
    let plateau = rep["report"]["plateau"].as_f64().unwrap();
    assert!((plateau - 2.0 / 3.0).abs() < 1e-3, "plateau {plateau}");
    assert_eq!(rep["report"]["parameter"], "u_squared");
    assert!(rep["volume_growth_tail"].as_f64().unwrap() < 1e-2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("plateau 0.66666"));
}

#[test]
fn greens_profile_columns_and_checks() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["greens-profile", "--manifold", "euclidean:4", "--grid", "0.1:100:2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("greens_profile.csv")).unwrap();
    let mut rows = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next(), Some("r,A,G,u,du"));
    for row in rows {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        // u = ρ on Euclidean space
        assert!((v[3] - v[0]).abs() < 1e-10 * v[0] && (v[4] - 1.0).abs() < 1e-10, "{row}");
    }
}

#[test]
fn identical_config_gives_identical_bytes() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["all", "--manifold", "rotsym:3:0.8:1", "--betas", "1,2", "--grid", "0.1:10:1.5", "--seed", "11"];
    for d in [&a, &b] {
        assert_eq!(run_in(d.path(), &args).status.code(), Some(0));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 10);
    for name in names {
        let (x, y) = (fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn seed_and_config_change_the_hash() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    run_in(a.path(), &["umbilic", "--manifold", "euclidean:3", "--grid", "1:10:3.2", "--seed", "1"]);
    run_in(b.path(), &["umbilic", "--manifold", "euclidean:3", "--grid", "1:10:3.2", "--seed", "2"]);
    let ha = json(a.path().join("summary.json"))["header"]["config_sha256"].clone();
    let hb = json(b.path().join("summary.json"))["header"]["config_sha256"].clone();
    assert_ne!(ha, hb);
}

#[test]
fn suite_error_exits_one_and_is_embedded() {
    // V_β on u₁ diverges at the pole for β ≥ 2
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["monotone", "--manifold", "product_r3_s1:6.2832", "--u", "example:u1", "--betas", "2"],
    );
    assert_eq!(o.status.code(), Some(1));
    let summary = json(dir.path().join("summary.json"));
    assert_eq!(summary["pass"], false);
    assert_eq!(summary["suites"][0]["status"], "error");
    let rep = json(dir.path().join("monotone.json"));
    assert!(rep["error"].as_str().unwrap().contains("not integrable"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        ("seed = 3\nsuite = \"monotone\"\nbogus = 1\n", "run.toml:3:1"),
        ("manifold = \"cone:3:0.9\"\n\nbetas = [1.0, 0.25]\n", "run.toml:3:1"),
        ("manifold = \"cone:3:zero\"\n", "run.toml:1:12"),
        ("radius_grid = \"1:0.5:2\"\n", "run.toml:1:15"),
        ("suite = \"monotone\"\nmanifold = \"warped:3:0.7:1:0\"\n", "run.toml:2:1"),
        ("seed = \"x\"\n", "run.toml:1:8"),
        ("format = \"xml\"\n", "run.toml:1:10"),
    ];
    for (text, at) in cases {
        fs::write(&cfg, text).unwrap();
        let o = greenmono(&["run", "--config", cfg.to_str().unwrap(), "--out", out], None);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = stderr(&o);
        assert!(err.contains(at), "{text}: expected {at} in {err}");
    }
}

#[test]
fn flag_errors_name_the_flag() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["monotone", "--manifold", "euclidean:4", "--betas", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--betas"), "{}", stderr(&o));
    let o = run_in(dir.path(), &["monotone", "--seed", "18446744073709551615"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
    let o = run_in(dir.path(), &["monotone", "--manifold", "sphere:3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = greenmono(&["monotone", "--config", "/nonexistent/run.toml"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_exit_two() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = greenmono(&["greens-profile", "--out", blocker.join("sub").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_file_and_file_overrides_env() {
    let dir = TempDir::new().unwrap();
    let env_dir = dir.path().join("env");
    let file_dir = dir.path().join("file");
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "manifold = \"euclidean:3\"\nradius_grid = \"1:10:3.2\"\nseed = 4\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = greenmono(&["umbilic", "--config", cfg, "--seed", "5"], Some(&env_dir));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = json(env_dir.join("summary.json"));
    assert_eq!(summary["header"]["seed"], 5);
    assert!(fs::read_to_string(env_dir.join("umbilic.csv")).unwrap().contains("# seed 5\n"));

    fs::write(dir.path().join("run2.toml"), format!("output = {:?}\n", file_dir.to_str().unwrap())).unwrap();
    let o = greenmono(
        &["greens-profile", "--config", dir.path().join("run2.toml").to_str().unwrap()],
        Some(&env_dir),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(file_dir.join("greens_profile.csv").exists());
}

#[test]
fn format_selects_outputs() {
    let (c, j) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    run_in(c.path(), &["greens-profile", "--format", "csv"]);
    run_in(j.path(), &["greens-profile", "--format", "json"]);
    assert!(c.path().join("greens_profile.csv").exists() && !c.path().join("greens_profile.json").exists());
    assert!(j.path().join("greens_profile.json").exists() && !j.path().join("greens_profile.csv").exists());
    for d in [&c, &j] {
        assert!(d.path().join("summary.json").exists());
    }
}

#[test]
fn all_on_the_product_skips_the_radial_suites() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["all", "--manifold", "product_r3_s1:6.2832", "--grid", "1:10:2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = json(dir.path().join("summary.json"));
    let status: Vec<&str> = summary["suites"].as_array().unwrap().iter().map(|s| s["status"].as_str().unwrap()).collect();
    assert_eq!(status, ["skipped", "pass", "pass", "skipped"]);
}

#[test]
fn written_config_reproduces_the_run() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    run_in(a.path(), &["monotone", "--manifold", "cone:3:0.9", "--betas", "1", "--grid", "0.1:10:1.5"]);
    let cfg = a.path().join("config.toml");
    let o = run_in(b.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        fs::read(a.path().join("monotone_A.csv")).unwrap(),
        fs::read(b.path().join("monotone_A.csv")).unwrap()
    );
}
