use std::path::PathBuf;
use std::process::Command;

use trafficflow_cli::{
    execute, header, parse_raw, parse_scenario, prepare, scenario_from_header, Overrides, ScenarioError,
};

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn bundled() -> Vec<(String, String)> {
    let mut out: Vec<_> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            (
                p.file_stem().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn command_of(text: &str) -> String {
    parse_raw(text).unwrap().command.unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trafficflow"))
}

const MINIMAL_JUMP: &str = r#"
command = "simulate"
[model]
kind = "lwr"
[diagram]
family = "newell-normalized"
[grid]
x_max = 1.0
[initial]
kind = "jump"
left = { rho = 0.2 }
right = { rho = 0.7 }
[run]
t_end = 0.1
"#;

#[test]
fn minimal_jump_gets_defaults() {
    let s = parse_scenario(MINIMAL_JUMP).unwrap();
    let grid = s.grid.as_ref().unwrap();
    let run = s.run.as_ref().unwrap();
    assert_eq!(grid.bc.as_deref(), Some("neumann"));
    assert_eq!(grid.x_min, Some(0.0));
    assert_eq!(run.cfl, Some(0.9));
    assert_eq!(run.dt_policy.as_deref(), Some("cfl"));
    assert_eq!(run.scheme.as_deref(), Some("first-order"));
    assert_eq!(s.initial.as_ref().unwrap().x0, Some(0.5));
    assert_eq!(s.units.as_deref(), Some("normalized"));
}

#[test]
fn global_perturbation_is_a_builtin_kind() {
    let text = r#"
command = "simulate"
[model]
kind = "pw"
c0 = 2.48445
[diagram]
family = "kerner"
[grid]
x_max = 800.0
cells = 64
[initial]
kind = "global-perturbation"
rho_h = 0.16
[run]
t_end = 1.0
"#;
    let s = parse_scenario(text).unwrap();
    let init = s.initial.as_ref().unwrap();
    assert_eq!(init.amplitude, Some(0.02));
    assert_eq!(init.period, Some(800.0));
    let grid = trafficflow_cli::build::grid(&s, 64);
    let state = trafficflow_cli::build::initial_state(&s, &grid);
    for i in 0..64 {
        let x = grid.center(i);
        let expect = 0.16 + 0.02 * (2.0 * std::f64::consts::PI * x / 800.0).sin();
        assert!((state.rho[i] - expect).abs() < 1e-15);
    }
}

#[test]
fn unknown_family_names_the_field() {
    let text = MINIMAL_JUMP.replace("newell-normalized", "parabolic");
    match parse_scenario(&text) {
        Err(ScenarioError::Validation { field, .. }) => assert_eq!(field, "diagram.family"),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn parse_errors_carry_the_line() {
    let text = "command = \"simulate\"\n[model]\nkind = lwr\n";
    match parse_scenario(text) {
        Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    let text = "command = \"simulate\"\n[model]\nkind = \"lwr\"\nspeed = 3\n";
    assert!(matches!(parse_scenario(text), Err(ScenarioError::Parse { line: 4, .. })));
}

#[test]
fn misplaced_parameters_are_rejected() {
    let cases = [
        (MINIMAL_JUMP.replace("family = \"newell-normalized\"", "family = \"greenshields\"\nv_f = 1.0\nrho_j = 1.0\nn = 2.0"), "diagram.n"),
        (MINIMAL_JUMP.replace("t_end = 0.1", "t_end = 0.1\nscheme = \"leveque\""), "run.scheme"),
        (MINIMAL_JUMP.replace("t_end = 0.1", "t_end = 0.1\ncfl = 1.5"), "run.cfl"),
        (MINIMAL_JUMP.replace("rho = 0.7", "rho = 1.5"), "initial.right.rho"),
        (MINIMAL_JUMP.replace("kind = \"lwr\"", "kind = \"lwr\"\ntau = 2.0"), "model.tau"),
        (MINIMAL_JUMP.replace("t_end = 0.1", "t_end = -1.0"), "run.t_end"),
    ];
    for (text, expected) in cases {
        match parse_scenario(&text) {
            Err(ScenarioError::Validation { field, .. }) => assert_eq!(field, expected),
            other => panic!("expected validation error on {expected}, got {other:?}"),
        }
    }
}

#[test]
fn every_bundled_scenario_resolves_and_round_trips() {
    let all = bundled();
    assert!(all.len() >= 10);
    for (name, text) in all {
        let cmd = command_of(&text);
        let s = prepare(&text, &cmd, &Overrides::default())
            .unwrap_or_else(|e| panic!("{name}: {}", e.line()));
        let h = header(&s, &[]);
        assert!(h.lines().all(|l| l.starts_with('#')), "{name}");
        let echoed = scenario_from_header(&h).unwrap();
        assert_eq!(echoed, s, "{name}: header echo differs");
        assert_eq!(echoed.clone().resolve().unwrap(), s, "{name}: resolution not idempotent");
    }
}

#[test]
fn header_of_real_output_round_trips() {
    let text = std::fs::read_to_string(scenarios_dir().join("lwr_shock.toml")).unwrap();
    let s = prepare(&text, "simulate", &Overrides::default()).unwrap();
    let csv = execute(&s).unwrap().render();
    assert_eq!(parse_scenario(&scenario_from_header(&csv).unwrap().to_toml()).unwrap(), s);
}

#[test]
fn network_output_is_deterministic() {
    let text = std::fs::read_to_string(scenarios_dir().join("merge_diverge.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("net.toml");
    std::fs::write(&scenario, &text).unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}.csv"));
        let status = bin()
            .args(["network", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .args(["--seed", "11"])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let body = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(body.contains("# seed: 11"));
    assert!(body.contains("# rng: ChaCha8"));
}

#[test]
fn zero_step_run_is_header_only() {
    let text = std::fs::read_to_string(scenarios_dir().join("merge_diverge.toml"))
        .unwrap()
        .replace("steps = 200", "steps = 0");
    let s = prepare(&text, "network", &Overrides::default()).unwrap();
    let csv = execute(&s).unwrap().render();
    let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data, vec!["table,step,t,id,vehicles,dest_0,dest_1"]);
}

#[test]
fn converge_rates_match_their_errors() {
    let text = std::fs::read_to_string(scenarios_dir().join("zhang_convergence_first.toml")).unwrap();
    let o = Overrides {
        grid: Some(vec![32, 64, 128, 256]),
        ..Default::default()
    };
    let s = prepare(&text, "converge", &o).unwrap();
    let csv = execute(&s).unwrap().render();
    let rows: Vec<Vec<String>> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 2 * 3 * 3);
    let mut checked = 0;
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a[2] != b[2] || a[3] != b[3] {
            assert!(b[5].is_empty(), "first rate of a series must be blank");
            continue;
        }
        let (ea, eb): (f64, f64) = (a[4].parse().unwrap(), b[4].parse().unwrap());
        let rate: f64 = b[5].parse().unwrap();
        assert!(((ea / eb).log2() - rate).abs() < 1e-12);
        checked += 1;
    }
    assert_eq!(checked, 2 * 3 * 2);
    assert!(rows[0][5].is_empty());
    assert!(rows.iter().all(|r| r[4].contains('e') && r[4].split('e').next().unwrap().len() == 18));
}

#[test]
fn unknown_family_exits_with_validation_class() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.toml");
    std::fs::write(&scenario, MINIMAL_JUMP.replace("newell-normalized", "parabolic")).unwrap();
    let out = bin().args(["simulate", "--scenario"]).arg(&scenario).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().next().unwrap();
    assert!(line.starts_with("error: class=validation message=diagram.family:"), "{line}");
}

#[test]
fn missing_file_exits_with_io_class() {
    let out = bin()
        .args(["riemann", "--scenario", "/nonexistent/scenario.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: class=io "));
}

#[test]
fn misused_flags_are_usage_errors() {
    let text = std::fs::read_to_string(scenarios_dir().join("lwr_riemann.toml")).unwrap();
    let o = Overrides {
        grid: Some(vec![10]),
        ..Default::default()
    };
    assert_eq!(prepare(&text, "riemann", &o).unwrap_err().class, "usage");
    let out = bin().args(["simulate", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: class=usage "));
}

#[test]
fn flags_override_the_scenario() {
    let text = std::fs::read_to_string(scenarios_dir().join("lwr_shock.toml")).unwrap();
    let o = Overrides {
        seed: Some(5),
        grid: Some(vec![50]),
        scheme: Some("first-order".into()),
    };
    let s = prepare(&text, "simulate", &o).unwrap();
    assert_eq!(s.seed, Some(5));
    assert_eq!(s.grid.as_ref().unwrap().cells, Some(50));
    let csv = execute(&s).unwrap().render();
    // Three snapshots of 50 cells.
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 50);
}

#[test]
fn riemann_reports_pattern_and_boundary() {
    let text = std::fs::read_to_string(scenarios_dir().join("resonant_riemann.toml")).unwrap();
    let s = prepare(&text, "riemann", &Overrides::default()).unwrap();
    let csv = execute(&s).unwrap().render();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert!(rows.iter().all(|r| r.starts_with("type-")));
    assert!(rows.last().unwrap().contains(",boundary,"));
}
