use std::net::TcpListener;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn fx(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

fn biaslens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biaslens"))
        .args(args)
        .env_remove("BIASLENS_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn session(prefix: &str) -> Vec<String> {
    vec![
        "--predictions".into(),
        fx(&format!("{prefix}_predictions.csv")),
        "--attributes".into(),
        fx(&format!("{prefix}_attributes.csv")),
    ]
}

fn with(base: Vec<String>, extra: &[&str]) -> Vec<String> {
    let mut v = base;
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    biaslens(&refs)
}

#[test]
fn missing_input_names_the_path() {
    let o = biaslens(&[
        "audit",
        "--predictions",
        "/no/such/preds.csv",
        "--attributes",
        "/no/such/attrs.csv",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error:input:"), "{err}");
    assert!(err.contains("/no/such/preds.csv"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(biaslens(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(biaslens(&["audit", "--theta", "x"]).status.code(), Some(2));
    let mut args = vec!["audit".to_string()];
    args.extend(with(session("table2"), &["--theta", "1.5"]));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(biaslens(&["--help"]).status.code(), Some(0));
}

#[test]
fn risk_table_and_json_agree() {
    let mut args = vec!["risk".to_string()];
    args.extend(with(
        session("checkpoint"),
        &["--policy", "score_threshold", "--theta", "0.25"],
    ));
    let table = run(&args);
    assert_eq!(table.status.code(), Some(0), "{}", stderr(&table));
    let text = stdout(&table);
    let line = text.lines().find(|l| l.starts_with("baseline")).unwrap();
    assert!(line.split_whitespace().any(|c| c == "0.0942"), "{line}");

    args.extend(["--format".to_string(), "json".to_string()]);
    let json = run(&args);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["baseline"]["risk"]["display"], "0.0942");
    for e in v["entries"].as_array().unwrap() {
        let row = format!(
            "{}  {}",
            e["attribute"].as_str().unwrap(),
            e["value"].as_str().unwrap()
        );
        let shown = text
            .lines()
            .find(|l| {
                let cells: Vec<&str> = l.split_whitespace().collect();
                cells.len() >= 2 && format!("{}  {}", cells[0], cells[1]) == row
            })
            .unwrap_or_else(|| panic!("{row} missing"));
        assert!(
            shown.ends_with(e["risk"]["display"].as_str().unwrap()),
            "{shown}"
        );
    }
}

#[test]
fn risk_from_metrics_csv() {
    let o = biaslens(&[
        "risk",
        "--metrics",
        &fx("table1_rates.csv"),
        "--attributes",
        &fx("table2_attributes.csv"),
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stdout(&o).lines().any(|l| l == "15,0.5393"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn inference_priors_and_rates() {
    let mut args = vec!["infer".to_string()];
    args.extend(with(
        session("priors"),
        &[
            "--query",
            "gender",
            "--alpha",
            "0",
            "--min-support",
            "0",
            "--format",
            "json",
        ],
    ));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["distribution"][0]["probability"]["display"], "0.6383");

    let mut args = vec!["infer".to_string()];
    args.extend(with(
        session("priors"),
        &[
            "--query",
            "Outcome",
            "--evidence",
            "gender=Female",
            "--alpha",
            "0",
            "--min-support",
            "0",
            "--policy",
            "score_threshold",
            "--theta",
            "0.25",
            "--format",
            "json",
        ],
    ));
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&args))).unwrap();
    assert_eq!(v["conditional_rates"]["fnmr"]["display"], "0.1233");
    assert_eq!(v["conditional_rates"]["fmr"]["display"], "0.0003");
}

#[test]
fn evidence_errors() {
    let base = |ev: &str| {
        let mut args = vec!["infer".to_string()];
        args.extend(with(
            session("priors"),
            &[
                "--query",
                "gender",
                "--evidence",
                ev,
                "--alpha",
                "0",
                "--min-support",
                "0",
            ],
        ));
        run(&args)
    };
    let unknown = base("gender=Unknown");
    assert_eq!(unknown.status.code(), Some(2), "{}", stderr(&unknown));
    assert_eq!(base("gender").status.code(), Some(2));
    let conflict = base("yob_decade=1920s");
    assert_eq!(conflict.status.code(), Some(3), "{}", stderr(&conflict));
    assert!(stderr(&conflict).starts_with("error:evidence:"));
}

#[test]
fn sweep_grid() {
    let mut args = vec!["sweep".to_string()];
    args.extend(with(
        session("table2"),
        &[
            "--policy",
            "score_threshold",
            "--theta",
            "0,0.5,0.9",
            "--format",
            "json",
        ],
    ));
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 3);

    let mut args = vec!["sweep".to_string()];
    args.extend(with(
        session("table2"),
        &[
            "--theta",
            "0.5",
            "--impact-fmr",
            "1,10",
            "--impact-fnmr",
            "1,2",
        ],
    ));
    assert_eq!(run(&args).status.code(), Some(0));

    let mut args = vec!["sweep".to_string()];
    args.extend(with(session("table2"), &["--theta", ","]));
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn occupied_port_exits_four() {
    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = held.local_addr().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let o = biaslens(&[
        "serve",
        "--bind",
        &addr,
        "--data-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error:bind:"));
}

#[test]
fn unwritable_output_exits_four() {
    let mut args = vec!["audit".to_string()];
    args.extend(with(session("table2"), &["--out", "/no/such/dir/out.txt"]));
    assert_eq!(run(&args).status.code(), Some(4));
}

#[test]
fn config_file_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["checkpoint_predictions.csv", "checkpoint_attributes.csv"] {
        std::fs::copy(fixtures().join(name), dir.path().join(name)).unwrap();
    }
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"predictions":"checkpoint_predictions.csv","attributes":"checkpoint_attributes.csv",
            "policy":"score_threshold","theta":0.25,"impact_fmr":10,"format":"json"}"#,
    )
    .unwrap();
    let call = |extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_biaslens"));
        c.arg("risk").args(extra).env("BIASLENS_CONFIG", &config);
        c.output().unwrap()
    };
    let o = call(&[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["params"]["impact_fmr"]["display"], "10.0000");
    assert_eq!(v["params"]["theta"]["display"], "0.2500");

    let o = call(&["--impact-fmr", "1", "--format", "table"]);
    let text = stdout(&o);
    assert!(
        text.lines()
            .any(|l| l.starts_with("baseline") && l.ends_with("0.0942")),
        "{text}"
    );

    std::fs::write(&config, r#"{"colour":"blue"}"#).unwrap();
    assert_eq!(call(&[]).status.code(), Some(2));
}
