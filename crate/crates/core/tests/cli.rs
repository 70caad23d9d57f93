use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use histcon::cli::Scenario;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_histcon"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn write_scenario(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn rows(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn report_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map(|it| it.map(|e| e.unwrap().path()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn inline_scenario_round_trips() {
    let text = fs::read_to_string(bundled("inline_interference.scn")).unwrap();
    let first = Scenario::parse(&text).unwrap();
    let again = Scenario::parse(&first.to_toml().unwrap()).unwrap();
    assert_eq!(first, again);
}

#[test]
fn bundled_scenarios_round_trip_and_run() {
    for entry in fs::read_dir(bundled("")).unwrap() {
        let path = entry.unwrap().path();
        let s = Scenario::read(&path).unwrap();
        assert_eq!(Scenario::parse(&s.to_toml().unwrap()).unwrap(), s);
        let out = TempDir::new().unwrap();
        let o = run(&path, out.path(), &[]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        assert_eq!(report_files(out.path()).len(), s.analyses.len());
    }
}

#[test]
fn output_is_deterministic() {
    for format in ["json-lines", "csv"] {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        let path = bundled("cnot_m3.scn");
        assert_eq!(run(&path, a.path(), &["--format", format]).status.code(), Some(0));
        assert_eq!(run(&path, b.path(), &["--format", format]).status.code(), Some(0));
        let fa = report_files(a.path());
        let fb = report_files(b.path());
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
    }
}

#[test]
fn cnot_reports_carry_expected_values() {
    let out = TempDir::new().unwrap();
    assert_eq!(run(&bundled("cnot_m3.scn"), out.path(), &[]).status.code(), Some(0));
    let files = report_files(out.path());
    let header: Value = serde_json::from_str(fs::read_to_string(&files[0]).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["schema"], "histcon-report/1");
    let probs = rows(&files[0]);
    assert_eq!(probs.len(), 8);
    for r in &probs {
        assert!((r["probability"].as_f64().unwrap() - 0.125).abs() < 1e-12);
    }
    let red = files.iter().find(|f| f.to_string_lossy().contains("redundancy_count")).unwrap();
    assert_eq!(rows(red)[0]["count"], 3);
}

#[test]
fn appendix_reports_carry_expected_values() {
    let out = TempDir::new().unwrap();
    assert_eq!(run(&bundled("appendix_theta.scn"), out.path(), &[]).status.code(), Some(0));
    let files = report_files(out.path());
    let find = |op: &str| files.iter().find(|f| f.to_string_lossy().contains(op)).unwrap().clone();
    assert_eq!(rows(&find("check_consistency"))[0]["consistent"], true);
    let red = rows(&find("redundancy_count"));
    assert_eq!(red[0]["count"], 1);
    assert_eq!(red[0]["redundant"], false);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");

    let bad = write_scenario(&dir, "bad.scn", "[model\nbuilder = ");
    assert_eq!(run(&bad, &out, &[]).status.code(), Some(2));

    let unknown_format = bundled("cnot_m3.scn");
    assert_eq!(run(&unknown_format, &out, &["--format", "xml"]).status.code(), Some(2));

    let inline = fs::read_to_string(bundled("inline_interference.scn")).unwrap();
    let non_unitary = inline.replacen("[\"0\", \"0\", \"1\", \"0\"]", "[\"0\", \"0\", \"2\", \"0\"]", 1);
    assert_ne!(non_unitary, inline);
    let p = write_scenario(&dir, "nonunitary.scn", &non_unitary);
    assert_eq!(run(&p, &out, &[]).status.code(), Some(3));

    let mixed = write_scenario(
        &dir,
        "mixed.scn",
        "[model]\nbuilder = \"mixed_record\"\nvariant = \"mixed\"\n\n[[analysis]]\nop = \"fidelity_identity\"\ncut = [\"E\"]\n",
    );
    assert_eq!(run(&mixed, &out, &[]).status.code(), Some(4));

    let breach = write_scenario(
        &dir,
        "breach.scn",
        "[model]\nbuilder = \"interference\"\n\n[[analysis]]\nop = \"check_consistency\"\nepsilon = 1e-9\nrequire = true\n",
    );
    let o = run(&breach, &dir.path().join("breach"), &[]);
    assert_eq!(o.status.code(), Some(5));
    assert_eq!(report_files(&dir.path().join("breach")).len(), 1);
}

#[test]
fn empty_analysis_list_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let p = write_scenario(&dir, "empty.scn", "[model]\nbuilder = \"interference\"\n");
    let out = dir.path().join("out");
    assert_eq!(run(&p, &out, &[]).status.code(), Some(0));
    assert!(report_files(&out).is_empty());
}

#[test]
fn tolerance_override_is_recorded() {
    let dir = TempDir::new().unwrap();
    let p = write_scenario(
        &dir,
        "tol.scn",
        "[model]\nbuilder = \"interference\"\n\n[[analysis]]\nop = \"probabilities\"\n",
    );
    let out = dir.path().join("out");
    assert_eq!(run(&p, &out, &["--tol-override", "ortho=1e-7", "--format", "csv"]).status.code(), Some(0));
    let text = fs::read_to_string(&report_files(&out)[0]).unwrap();
    assert!(text.lines().any(|l| l.starts_with('#') && l.contains("ortho") && l.contains("1e-7")), "{text}");
    assert_eq!(run(&p, &out, &["--tol-override", "bogus=1"]).status.code(), Some(2));
}

#[test]
fn list_models_and_selftest() {
    let o = bin().arg("list-models").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["cnot", "appendix", "mixed_record", "pure_decoherence", "interference"] {
        assert!(text.contains(name));
    }
    let o = bin().arg("selftest").output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}
