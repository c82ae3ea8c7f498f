use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3
n_agents = 60
duration = 20.0
epsilon = 0.01
trace_stride = 5

[arena]
width = 8.0
height = 8.0

[[targets]]
point = [7.0, 4.0]
"#;

const CHAIN: &str = "\
pfsa 4 2
chi 3 1
t 0 0 1 0.6 c
t 0 1 0 0.4 u
t 1 0 2 0.5 c
t 1 1 0 0.5 c
t 2 0 3 0.7 c
t 2 1 1 0.3 c
t 3 0 3 1.0 u
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pfsa-swarm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn pfsa-swarm")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn mobile_sim_writes_outputs_with_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = dir.path().join("out");
    let o = run(&[
        "mobile-sim",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "t,agent_id,x,y,measure,best_neighbor_id,reached_flag"
    );
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(
        metrics.lines().next().unwrap(),
        "t,fraction_reached,diameter,max_path_length,decision_corrections"
    );
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    for key in [
        "\"T_conv\"",
        "\"final_fraction\"",
        "\"seed\": 3",
        "\"config\"",
    ] {
        assert!(summary.contains(key), "summary lacks {key}");
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        code(&run(&[
            "ideal-sim",
            "--config",
            &cfg,
            "--out",
            a.to_str().unwrap()
        ])),
        0
    );
    assert_eq!(
        code(&run(&[
            "--sequential",
            "ideal-sim",
            "--config",
            &cfg,
            "--out",
            b.to_str().unwrap()
        ])),
        0
    );
    for f in ["trace.csv", "metrics.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = dir.path().join("o");
    let o = run(&[
        "frozen-opt",
        "--config",
        &cfg,
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 11"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "n_agent = 10\n");
    assert_eq!(code(&run(&["mobile-sim", "--config", &bad])), 2);
    let missing = dir.path().join("nope.toml");
    assert_eq!(
        code(&run(&["mobile-sim", "--config", missing.to_str().unwrap()])),
        2
    );
    assert_eq!(
        code(&run(&["mobile-sim", "--scenario", "no-such-scenario"])),
        2
    );
    let cfg = write(dir.path(), "s.toml", SMALL);
    assert_eq!(
        code(&run(&[
            "sweep", "--config", &cfg, "--axis", "mass", "--values", "1,2"
        ])),
        2
    );
}

#[test]
fn numeric_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let broken = CHAIN.replace("t 0 1 0 0.4 u", "t 0 1 0 0.1 u");
    let p = write(dir.path(), "broken.pfsa", &broken);
    let o = run(&["compare", "--pfsa", &p]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn epoch_cap_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("max_epochs = 2\n{SMALL}"));
    let o = run(&[
        "frozen-opt",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn compare_and_oracle_on_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "chain.pfsa", CHAIN);
    let out = dir.path().join("r");
    let o = run(&[
        "compare",
        "--pfsa",
        &p,
        "--theta",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains("centralized")
            && text.contains("brute-force")
            && text.contains("policy-iteration")
    );
    assert!(out.join("compare.json").exists());

    let o = run(&["oracle", "--pfsa", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("oracle.json").exists());
}

#[test]
fn frozen_pfsa_round_trips_through_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &SMALL.replace("n_agents = 60", "n_agents = 8"),
    );
    let pfsa = dir.path().join("net.pfsa");
    let o = run(&[
        "frozen-opt",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--pfsa-out",
        pfsa.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&[
        "compare",
        "--pfsa",
        pfsa.to_str().unwrap(),
        "--epsilon",
        "0.05",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("distributed"));
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let out = dir.path().join("sw");
    let o = run(&[
        "sweep",
        "--config",
        &cfg,
        "--mode",
        "frozen",
        "--axis",
        "epsilon",
        "--values",
        "0.02,0.01",
        "--reps",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let agg = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
    let raw = fs::read_to_string(out.join("sweep_raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 5);
}
