use std::path::Path;
use std::process::{Command, Output};

const GOLDEN: &str = "tests/golden/may2025_seed42.txt";

fn agriflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agriflow"))
        .arg("--data-dir")
        .arg(dir)
        .args(args)
        .env_remove("AGRIFLOW_DATA")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn simulate_matches_the_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = agriflow(dir.path(), &["simulate", "--days", "31", "--seed", "42"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(golden).unwrap());
    assert!(stderr(&out).contains("replay identical"));

    let check = agriflow(dir.path(), &["replay-check"]);
    assert!(check.status.success(), "{}", stderr(&check));
    assert!(stdout(&check).starts_with("replay ok"));

    // A second run into the same directory is refused without --reset.
    let again = agriflow(dir.path(), &["simulate", "--days", "2"]);
    assert!(!again.status.success());
    let reset = agriflow(dir.path(), &["simulate", "--days", "2", "--reset"]);
    assert!(reset.status.success(), "{}", stderr(&reset));
}

#[test]
fn json_and_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/may2025.toml");
    let out = agriflow(
        dir.path(),
        &["simulate", "--scenario", scenario.to_str().unwrap(), "--days", "12", "--json"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["days"].as_array().unwrap().len(), 12);
    assert_eq!(v["days"][6]["branches"][0], "heat");
    assert_eq!(v["days"][8]["drone_report_visible"], true);
}

#[test]
fn operator_commands_enforce_roles() {
    let dir = tempfile::tempdir().unwrap();
    let xml = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/vineyard_daily.bpmn");
    let deployed = agriflow(dir.path(), &["deploy", xml.to_str().unwrap(), "--as", "maria"]);
    assert!(deployed.status.success(), "{}", stderr(&deployed));
    let refused = agriflow(dir.path(), &["deploy", xml.to_str().unwrap(), "--as", "giorgos"]);
    assert!(!refused.status.success());
    assert!(stderr(&refused).contains("403"));

    let started = agriflow(dir.path(), &["start", "vineyard_daily", "--as", "maria"]);
    assert!(started.status.success(), "{}", stderr(&started));

    let tasks = agriflow(dir.path(), &["tasks", "--as", "nikos"]);
    let listing = stdout(&tasks);
    let qc_line = listing.lines().find(|l| l.contains("Define the need")).unwrap();
    let id = qc_line.split_whitespace().next().unwrap().to_string();

    let foreign = agriflow(dir.path(), &["complete", &id, "--as", "giorgos", "--field", "qc_needed=false"]);
    assert!(!foreign.status.success());
    assert!(stderr(&foreign).contains("403 forbidden"), "{}", stderr(&foreign));

    let own = agriflow(dir.path(), &["complete", &id, "--as", "nikos", "--field", "qc_needed=false"]);
    assert!(own.status.success(), "{}", stderr(&own));
    let after = stdout(&agriflow(dir.path(), &["tasks", "--as", "nikos"]));
    assert!(!after.contains("Define the need"));
    assert!(after.contains("On-site assessment"));

    let check = agriflow(dir.path(), &["replay-check"]);
    assert!(check.status.success(), "{}", stderr(&check));
}

#[test]
fn overrides_beyond_the_run_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = agriflow(dir.path(), &["simulate", "--days", "5", "--override", "9:t_max=40"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("outside 1..=5"), "{}", stderr(&out));
}
