use std::path::{Path, PathBuf};

use clap::Parser;
use rally_coach::cli::{run, Cli};

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../core/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn rallycoach(args: &[&str]) -> Result<String, String> {
    let cli =
        Cli::try_parse_from(std::iter::once("rallycoach").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let (mut out, mut err) = (Vec::new(), Vec::new());
    run(cli, &mut out, &mut err).map_err(|e| format!("{e:#}"))?;
    Ok(String::from_utf8(out).unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn models(dir: &Path) -> (PathBuf, PathBuf) {
    let data = p(dir, "fixture.rally");
    rallycoach(&["fixture", "--out", &data]).unwrap();
    for (r, s, out) in [("xp", "xo", "p.json"), ("xo", "xp", "o.json")] {
        rallycoach(&["model", "build", "--dataset", &data, "--responder", r, "--stimulator", s, "--out", &p(dir, out)])
            .unwrap();
    }
    (dir.join("p.json"), dir.join("o.json"))
}

#[test]
fn pipeline_reproduces_golden_tables_and_rollout() {
    let dir = tempfile::tempdir().unwrap();
    let (mp, mo) = models(dir.path());
    let (mp, mo) = (mp.display().to_string(), mo.display().to_string());
    assert_eq!(
        rallycoach(&["recommend", "--model", &mp, "--table", "--format", "csv"]).unwrap(),
        golden("table1_xp_vs_xo.csv")
    );
    assert_eq!(
        rallycoach(&["recommend", "--model", &mo, "--table", "--format", "csv"]).unwrap(),
        golden("table2_xo_vs_xp.csv")
    );
    let table = rallycoach(&[
        "simulate",
        "--model-p",
        &mp,
        "--model-o",
        &mo,
        "--seed",
        "p:backhand_short_serve",
        "--steps",
        "10",
        "--depth",
        "3",
        "--live-update",
        "off",
    ])
    .unwrap();
    assert_eq!(table, golden("rollout_backhand_short_serve_10.txt"));
}

#[test]
fn ingest_writes_canonical_log() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "fixture.rally");
    rallycoach(&["fixture", "--out", &data]).unwrap();
    assert_eq!(std::fs::read_to_string(&data).unwrap(), rally_core::fixture::BUNDLED_FIXTURE);
    let summary = rallycoach(&["ingest", &data, "--validate-only"]).unwrap();
    assert!(summary.starts_with("2 players, 3 matches, 330 rallies"), "{summary}");
    let out = p(dir.path(), "canon.rally");
    rallycoach(&["ingest", &data, "--out", &out]).unwrap();
    assert_eq!(std::fs::read_to_string(out).unwrap(), rally_core::fixture::BUNDLED_FIXTURE);
}

#[test]
fn recommend_formats() {
    let dir = tempfile::tempdir().unwrap();
    let (mp, _) = models(dir.path());
    let mp = mp.display().to_string();
    let json: serde_json::Value = serde_json::from_str(
        &rallycoach(&["recommend", "--model", &mp, "--stimulus", "normal_smash", "--format", "json"]).unwrap(),
    )
    .unwrap();
    assert_eq!(json["stimulus"], "normal_smash");
    assert_eq!(json["ranked"].as_array().unwrap().len(), 2);
    let csv = rallycoach(&["recommend", "--model", &mp, "--opening", "--k", "3", "--format", "csv"]).unwrap();
    assert!(csv.starts_with("rank,shot,p,p_success,utility,support\n1,"));
    assert!(rallycoach(&["recommend", "--model", &mp]).is_err());
    assert!(rallycoach(&["recommend", "--model", &mp, "--stimulus", "wobble"]).unwrap_err().contains("unknown shot"));
}

#[test]
fn frequencies_sum_to_shots_played() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "f.rally");
    rallycoach(&["fixture", "--out", &data]).unwrap();
    let csv = rallycoach(&["frequencies", "--dataset", &data, "--player", "xp", "--format", "csv"]).unwrap();
    let total: u64 = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    let d = rally_core::fixture::bundled();
    let expected =
        d.matches().iter().flat_map(|m| &m.rallies).flat_map(|r| &r.shots).filter(|e| e.actor.as_str() == "xp").count();
    assert_eq!(total, expected as u64);
}

#[test]
fn config_file_changes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (mp, _) = models(dir.path());
    let cfg = p(dir.path(), "coach.toml");
    std::fs::write(&cfg, "[recommend]\nk = 3\n").unwrap();
    let csv = rallycoach(&[
        "--config",
        &cfg,
        "recommend",
        "--model",
        &mp.display().to_string(),
        "--table",
        "--format",
        "csv",
    ])
    .unwrap();
    assert!(csv.starts_with("stimulus,suggestion_1,suggestion_2,suggestion_3\n"), "{csv}");
    std::fs::write(&cfg, "[recommend]\nkk = 3\n").unwrap();
    assert!(rallycoach(&["--config", &cfg, "recommend", "--model", &mp.display().to_string(), "--table"]).is_err());
}
