use ringfiber::cli::exit_code;
use ringfiber::config::{degenerate_groups, ScenarioConfig, PRESETS};
use ringfiber::Error;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringfiber"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .env_remove("RINGFIBER_CONFIG")
        .env_remove("RINGFIBER_PRESET")
        .output()
        .expect("binary runs")
}

#[test]
fn presets_round_trip_through_toml() {
    for name in PRESETS {
        let cfg = ScenarioConfig::preset(name).unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg, "{name}");
    }
    assert!(matches!(ScenarioConfig::preset("nope"), Err(Error::Config(_))));
}

#[test]
fn config_validation() {
    let base = ScenarioConfig::preset("narrowband").unwrap();
    let mut both = base.clone();
    both.grating.period_um = Some(42.9);
    assert!(matches!(both.validate(), Err(Error::Config(_))));
    let mut neither = base.clone();
    neither.grating.recalibrate = None;
    assert!(matches!(neither.validate(), Err(Error::Config(_))));
    let mut label = base.clone();
    label.process.triples[0][1] = "HQ11R".into();
    match label.validate() {
        Err(Error::Config(msg)) => assert!(msg.contains("HQ11R"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let mut energy = base.clone();
    energy.grating.recalibrate.as_mut().unwrap().lambda_i_um = Some(1.7);
    assert!(matches!(energy.validate(), Err(Error::Config(_))));
    let mut pulsed = base;
    pulsed.pump.kind = ringfiber::config::PumpKindConfig::Gaussian;
    assert!(matches!(pulsed.validate(), Err(Error::Config(_))));
    assert!(ScenarioConfig::from_toml_str("name = \"x\"\n[grating]\nlength_cm = 1.0\nbogus_key = 2\n").is_err());
}

#[test]
fn exit_codes_by_error_kind() {
    assert_eq!(exit_code(&Error::Config("x".into())), 2);
    assert_eq!(exit_code(&Error::Io("x".into())), 2);
    assert_eq!(exit_code(&Error::NoMode("x".into())), 3);
    assert_eq!(exit_code(&Error::Degenerate("x".into())), 3);
    assert_eq!(exit_code(&Error::Range("x".into())), 3);
}

#[test]
fn modes_command_lists_fourteen_modes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--preset", "narrowband", "modes"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 14);
    assert!(rows[0].starts_with("HE11"));
    // 17 significant digits
    let n_eff = rows[0].split(',').nth(4).unwrap();
    assert_eq!(n_eff.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn unknown_label_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::preset("broadband").unwrap().to_toml().unwrap();
    cfg = cfg.replace("\"TE01\"", "\"XY01\"");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, cfg).unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "modes"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("XY01"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn missing_scenario_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["modes"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["--preset", "nope", "modes"], dir.path()).status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    assert_eq!(run(&["--config", missing.to_str().unwrap(), "modes"], dir.path()).status.code(), Some(2));
}

#[test]
fn unguided_mode_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::preset("broadband").unwrap().to_toml().unwrap().replace("\"TE01\"", "\"HE51R\"");
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, cfg).unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "mismatch"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("HE51R"));
}

#[test]
fn spectrum_is_deterministic_and_resolves_six_peaks() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(&["--preset", "narrowband", "spdc-spectrum"], a.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = run(&["--preset", "narrowband", "--threads", "1", "spdc-spectrum"], b.path());
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
    for f in ["spectrum.csv", "spectrum_total.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let summary = String::from_utf8_lossy(&first.stdout);
    assert!(summary.contains("6 resolvable peaks"), "{summary}");
    assert!(summary.contains("HE21R/HE21R/HE11{R,L} (superposition)"), "{summary}");
    let csv = std::fs::read_to_string(a.path().join("spectrum.csv")).unwrap();
    assert!(csv.lines().skip(1).any(|l| l.contains(",true,")));
}

#[test]
fn degenerate_grouping_leaves_entangled_pair_apart() {
    let cfg = ScenarioConfig::preset("oam-entangled").unwrap();
    let sc = ringfiber::config::Scenario::build(&cfg).unwrap();
    let groups = degenerate_groups(&sc.triples);
    assert_eq!(groups.len(), 2);
    assert!(groups.iter().all(|(_, sup, idx)| !sup && idx.len() == 1));
}
