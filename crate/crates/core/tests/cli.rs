use std::path::Path;

use halbach_bayes::cli::{run, EXIT_CONFIG, EXIT_DOMAIN, EXIT_OK};
use halbach_bayes::io::{load_chain, load_density, load_observation, Manifest, MANIFEST_FILE};

fn halbach(args: &[&str]) -> i32 {
    run(std::iter::once("halbach").chain(args.iter().copied()))
}

fn s(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn p(dir: &Path, rel: &str) -> String {
    dir.join(rel).to_string_lossy().into_owned()
}

#[test]
fn missing_config_exits_2_without_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("run");
    assert_eq!(halbach(&["geometry", "--config", &p(d.path(), "absent.toml"), "--out", &s(&out)]), EXIT_CONFIG);
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "[geometry]\nbore_radius = 0.1\n").unwrap();
    assert_eq!(halbach(&["geometry", "--config", &s(&cfg), "--out", &p(d.path(), "o")]), EXIT_CONFIG);
    assert!(!d.path().join("o").exists());
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(halbach(&["geometry", "--out", &p(d.path(), "o"), "--bogus"]), EXIT_CONFIG);
    assert_eq!(halbach(&["infer", "--observation", &p(d.path(), "none.csv"), "--out", &p(d.path(), "o")]), EXIT_CONFIG);
    assert_eq!(halbach(&["validate", "--mode", "linear", "--seed", "1", "--seeds", "0", "--out", &p(d.path(), "o")]), EXIT_CONFIG);
    assert!(!d.path().join("o").exists());
}

#[test]
fn domain_error_exits_1_and_cleans_up() {
    let d = tempfile::tempdir().unwrap();
    let obs = d.path().join("obs.csv");
    std::fs::write(&obs, "not,an,observation\n").unwrap();
    std::fs::write(d.path().join("obs.spec.json"), "{}").unwrap();
    let out = d.path().join("o");
    assert_eq!(halbach(&["infer", "--observation", &s(&obs), "--out", &s(&out)]), EXIT_DOMAIN);
    assert!(!out.exists());
}

#[test]
fn pipeline_outputs_are_listed_and_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(halbach(&["synth-helmholtz", "--seed", "2", "--out", &p(dir, "h")]), EXIT_OK);
    assert_eq!(halbach(&["fit-prior", "--helmholtz", &p(dir, "h/helmholtz.csv"), "--out", &p(dir, "prior")]), EXIT_OK);
    assert_eq!(halbach(&["observe", "--seed", "5", "--prior", &p(dir, "prior/prior.json"), "--out", &p(dir, "obs")]), EXIT_OK);
    assert_eq!(
        halbach(&[
            "infer", "--observation", &p(dir, "obs/observation.csv"), "--prior", &p(dir, "prior/prior.json"), "--mode", "pcn", "--steps",
            "1500", "--seed", "1", "--out", &p(dir, "post"),
        ]),
        EXIT_OK
    );
    for run_dir in ["h", "prior", "obs", "post"] {
        let root = dir.join(run_dir);
        let m = Manifest::load(&root.join(MANIFEST_FILE)).unwrap();
        m.verify(&root).unwrap();
        let listed: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert!(listed.contains(&"config.resolved.toml"), "{run_dir}: {listed:?}");
        for e in std::fs::read_dir(&root).unwrap() {
            let name = e.unwrap().file_name().to_string_lossy().into_owned();
            assert!(name == MANIFEST_FILE || listed.contains(&name.as_str()), "{run_dir}: {name} missing from manifest");
        }
    }
    let prior = load_density(&dir.join("prior/prior.json")).unwrap().density;
    assert_eq!(prior.dim(), 32);
    let obs = load_observation(&dir.join("obs/observation.csv")).unwrap();
    assert_eq!(obs.values.len(), 64);
    let (chain, labels) = load_chain(&dir.join("post/chain_0.csv")).unwrap();
    assert_eq!(chain.len(), 1500);
    assert_eq!(labels.len(), 32);
}

#[test]
fn config_snapshot_reproduces_the_run() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "[observables]\nkind = \"fourier\"\nharmonics = 6\n\n[noise]\nsigma_T = 2e-6\n").unwrap();
    assert_eq!(halbach(&["observe", "--config", &s(&cfg), "--seed", "8", "--out", &p(dir, "a")]), EXIT_OK);
    let snapshot = p(dir, "a/config.resolved.toml");
    assert_eq!(halbach(&["observe", "--config", &snapshot, "--seed", "8", "--out", &p(dir, "b")]), EXIT_OK);
    for f in ["observation.csv", "observation.spec.json", "truth.json", "config.resolved.toml", MANIFEST_FILE] {
        assert_eq!(std::fs::read(dir.join("a").join(f)).unwrap(), std::fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
    let obs = load_observation(&dir.join("a/observation.csv")).unwrap();
    assert_eq!(obs.values.len(), 12);
    assert!(obs.sigma.iter().all(|s| *s == 2e-6));
}

#[test]
fn report_rerenders_validation_output() {
    let d = tempfile::tempdir().unwrap();
    let dir = d.path();
    assert_eq!(halbach(&["validate", "--mode", "pcn", "--seed", "1", "--seeds", "2", "--steps", "1000", "--out", &p(dir, "v")]), EXIT_OK);
    assert_eq!(halbach(&["evaluate", "--seed", "1", "--out", &p(dir, "v/app")]), EXIT_OK);
    assert_eq!(halbach(&["report", "--input", &p(dir, "v"), "--out", &p(dir, "r")]), EXIT_OK);
    let m = Manifest::load(&dir.join("r").join(MANIFEST_FILE)).unwrap();
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert!(names.contains(&"summary.csv"));
    assert!(names.contains(&"app/application.svg"), "{names:?}");
    assert!(names.iter().filter(|n| n.starts_with("seed_") && n.ends_with(".svg")).count() == 2, "{names:?}");
    assert_eq!(halbach(&["report", "--input", &p(dir, "nothing"), "--out", &p(dir, "r2")]), EXIT_CONFIG);
}
