use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = "\
[domain]
n = 2
resolution = 17

[operators]
F.name = laplacian
K.name = obs_identity

[measurement]
kind = line
spec = 0.125 0.5; 0.875 0.5

[regularisation]
alpha = 1e-2
beta = 1e-6
gamma = 1e-2
p_ladder = 4 8 16

[optimizer]
tol_schedule = 1e-4 1e-6

[data]
u0.name = gaussian_bump
seed = 3
";

fn linfid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linfid"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_prints_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL);
    let out = linfid(&["validate", s(&cfg)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("max_iter = 2000"), "{text}");
    assert!(text.contains("kappa = 1"), "{text}");
    assert!(text.contains("small"), "{text}");
}

#[test]
fn missing_beta_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", &SMALL.replace("beta = 1e-6\n", ""));
    for cmd in ["validate", "run"] {
        let out = linfid(&[cmd, s(&cfg)]);
        assert!(!out.status.success());
        assert!(stderr(&out).contains("beta"), "{}", stderr(&out));
    }
}

#[test]
fn nonpositive_alpha_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.cfg",
        &SMALL.replace("alpha = 1e-2", "alpha = 0"),
    );
    let out = linfid(&["validate", s(&cfg)]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.cfg",
        &SMALL.replace("seed = 3", "seed = 3\ncolour = red"),
    );
    let out = linfid(&["validate", s(&cfg)]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));
}

#[test]
fn run_writes_one_row_per_rung() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL);
    let out_dir = dir.path().join("out");
    let out = linfid(&["run", s(&cfg), "--output-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("p,iterations,energy_p,"));
    assert!(
        lines[1].starts_with("4,") && lines[3].starts_with("16,"),
        "{csv}"
    );
    for f in [
        "effective.cfg",
        "report.json",
        "fields/u_p16.csv",
        "fields/nu_p16.csv",
        "fields/mu_p16.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn seed_override_changes_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL);
    let run = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        let out = linfid(&["run", s(&cfg), "--output-dir", s(&d), "--seed", seed]);
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::read_to_string(d.join("fields/observations.csv")).unwrap()
    };
    let a = run("3", "a");
    let b = run("4", "b");
    let c = run("3", "c");
    assert_ne!(a, b);
    assert_eq!(a, c);
    let effective = std::fs::read_to_string(dir.path().join("b/effective.cfg")).unwrap();
    assert!(effective.contains("seed = 4"), "{effective}");
}

#[test]
fn several_configs_get_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "first.cfg", SMALL);
    let b = write(
        dir.path(),
        "second.cfg",
        &SMALL.replace("p_ladder = 4 8 16", "p_ladder = 4 8"),
    );
    let out_dir = dir.path().join("out");
    let out = linfid(&[
        "run",
        s(&a),
        s(&b),
        "--output-dir",
        s(&out_dir),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = |name: &str| {
        std::fs::read_to_string(out_dir.join(name).join("results.csv"))
            .unwrap()
            .lines()
            .count()
    };
    assert_eq!(rows("first"), 4);
    assert_eq!(rows("second"), 3);
}

#[test]
fn external_observations_are_snapped() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "obs.csv",
        "x,y,value\n0.26,0.5,0.1\n0.5,0.49,0.2\n0.74,0.52,0.15\n",
    );
    let text = SMALL
        .replace("kind = line\nspec = 0.125 0.5; 0.875 0.5", "kind = points")
        .replace(
            "u0.name = gaussian_bump\nseed = 3",
            "mode = external\npath = obs.csv\nboundary = zero",
        );
    let cfg = write(dir.path(), "ext.cfg", &text);
    let out_dir = dir.path().join("out");
    let out = linfid(&["run", s(&cfg), "--output-dir", s(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["measurement_nodes"], 3);
    let snap = report["external_snap"]["max_distance"].as_f64().unwrap();
    assert!(snap > 0.0 && snap <= 0.5 * (2.0f64).sqrt() / 16.0, "{snap}");
    assert_eq!(
        std::fs::read_to_string(out_dir.join("results.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn external_point_outside_domain_fails() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "obs.csv", "x,y,value\n1.5,0.5,0.1\n");
    let text = SMALL
        .replace("kind = line\nspec = 0.125 0.5; 0.875 0.5", "kind = points")
        .replace(
            "u0.name = gaussian_bump\nseed = 3",
            "mode = external\npath = obs.csv",
        );
    let cfg = write(dir.path(), "ext.cfg", &text);
    let out = linfid(&["run", s(&cfg), "--output-dir", s(&dir.path().join("out"))]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("outside the domain"),
        "{}",
        stderr(&out)
    );
}
