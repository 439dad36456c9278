use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iodsub"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("iodsub-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn solve(name: &str, out: &Path, extra: &[&str]) -> Output {
    let f = fixtures();
    bin()
        .arg("solve")
        .arg("--scenario")
        .arg(f.join(format!("{name}.json")))
        .arg("--config")
        .arg(f.join(format!("{name}.config.json")))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn solve_writes_all_outputs() {
    let out = scratch("solve");
    let o = solve("single_observer", &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["solutions.json", "stats.json", "triangulation.json", "triangulation.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let stats = json(&out.join("stats.json"));
    let total = stats["area_accepted"].as_f64().unwrap()
        + stats["area_passed"].as_f64().unwrap()
        + stats["area_rejected"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum::<f64>();
    assert!((total - 2.0 * 3f64.sqrt()).abs() <= 1e-9);
    assert!(stats["bottleneck_calls"].as_u64().unwrap() > 0);

    let sols = json(&out.join("solutions.json"));
    let s = &sols["solutions"][0];
    assert!(s["w"].as_array().unwrap().len() == 3);
    assert!(s["theta"].as_array().unwrap().len() == 5);
    assert!(s["certified"].is_boolean());

    let svg = std::fs::read_to_string(out.join("triangulation.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let leaves = json(&out.join("triangulation.json"))["leaves"].as_array().unwrap().len();
    assert_eq!(svg.matches("<polygon").count(), leaves);
}

#[test]
fn no_svg_flag_skips_the_picture() {
    let out = scratch("nosvg");
    let o = solve("single_observer", &out, &["--no-svg"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out.join("triangulation.svg").exists());
}

#[test]
fn render_reproduces_the_saved_picture() {
    let out = scratch("render");
    assert_eq!(solve("near_circular", &out, &[]).status.code(), Some(0));
    let svg = out.join("again.svg");
    let o = bin()
        .arg("render")
        .arg("--triangulation")
        .arg(out.join("triangulation.json"))
        .arg("--out")
        .arg(&svg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&svg).unwrap(), std::fs::read(out.join("triangulation.svg")).unwrap());
}

#[test]
fn thread_count_does_not_change_outputs() {
    let a = scratch("t1");
    let b = scratch("t4");
    let f = fixtures();
    for (dir, n) in [(&a, "1"), (&b, "4")] {
        let o = bin()
            .env("IODSUB_THREADS", n)
            .arg("solve")
            .arg("--scenario")
            .arg(f.join("two_solutions.json"))
            .arg("--config")
            .arg(f.join("two_solutions.config.json"))
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["solutions.json", "stats.json", "triangulation.json", "triangulation.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn malformed_inputs_exit_one() {
    let d = scratch("bad");
    let empty = d.join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let o = bin().arg("solve").arg("--scenario").arg(&empty).arg("--out").arg(d.join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("empty.json") && err.contains("line 1"), "{err}");

    let four = d.join("four.json");
    std::fs::write(&four, r#"{"p": [[0,0,1],[0,0,1],[0,0,1],[0,0,1]], "u": [[1,0,0],[1,0,0],[1,0,0],[1,0,0],[1,0,0]]}"#)
        .unwrap();
    let o = bin().arg("solve").arg("--scenario").arg(&four).arg("--out").arg(d.join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`p`") && err.contains("5 columns"), "{err}");

    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"oracles": ["intersection", "tea_leaves"]}"#).unwrap();
    let o = bin()
        .arg("solve")
        .arg("--scenario")
        .arg(fixtures().join("single_observer.json"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(d.join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tea_leaves"));
}

#[test]
fn nothing_found_exits_two() {
    let d = scratch("none");
    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"oracles": ["intersection"], "min_area_to_stop": 0.01}"#).unwrap();
    let o = bin()
        .arg("solve")
        .arg("--scenario")
        .arg(fixtures().join("single_observer.json"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(d.join("o"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_is_deterministic_and_solvable() {
    let d = scratch("gen");
    let run = |kind: &str, seed: &str, name: &str| {
        let p = d.join(name);
        let o = bin().args(["generate", kind, "--seed", seed, "--out"]).arg(&p).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        p
    };
    let a = run("single", "42", "a.json");
    let b = run("single", "42", "b.json");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = run("single", "43", "c.json");
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let two = run("two", "42", "two.json");
    assert_eq!(json(&two)["known_solutions"].as_array().unwrap().len(), 2);

    let out = d.join("solved");
    let o = bin().arg("solve").arg("--scenario").arg(&a).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let sols = json(&out.join("solutions.json"));
    for s in sols["solutions"].as_array().unwrap() {
        if s["polished"].as_bool().unwrap() {
            assert!(s["residual"].as_f64().unwrap() <= 1e-10, "{s}");
        }
    }
}

#[test]
fn single_observer_solution_is_polished() {
    let out = scratch("known");
    assert_eq!(solve("single_observer", &out, &[]).status.code(), Some(0));
    let known = &json(&fixtures().join("single_observer.json"))["known_solutions"][0];
    let known: Vec<f64> = known.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let sols = json(&out.join("solutions.json"));
    let hit = sols["solutions"].as_array().unwrap().iter().any(|s| {
        let w: Vec<f64> = s["w"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let d: f64 = w.iter().zip(&known).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        s["polished"].as_bool().unwrap() && d < 1e-5
    });
    assert!(hit, "{sols}");
}

#[test]
fn help_documents_the_interface() {
    let o = bin().args(["solve", "--help"]).output().unwrap();
    let h = String::from_utf8_lossy(&o.stdout);
    for flag in ["--scenario", "--config", "--out", "--certify", "--no-svg", "IODSUB_THREADS"] {
        assert!(h.contains(flag), "{flag}");
    }
}
