use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::Duration;
use tungstenite::Message;

fn admc() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_admc"));
    c.env_remove("ADMC_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    admc().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_every_session_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["simulate", "--method", "all", "--subjects", "12", "--seed", "7", "--out", path_str(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let mut rdr = csv::Reader::from_reader(&bytes[..]);
    assert_eq!(rdr.headers().unwrap(), vec!["subject", "method", "trial", "time_s", "switches", "spawn"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 12 * 3 * 24);
    let sessions: BTreeSet<(String, String)> = rows.iter().map(|r| (r[0].to_string(), r[1].to_string())).collect();
    assert_eq!(sessions.len(), 36);

    let report = run(&["analyze", "--in", path_str(&a), "--metric", "switches", "--format", "kv"]);
    assert_eq!(code(&report), 0);
    let kv = String::from_utf8(report.stdout).unwrap();
    assert!(kv.starts_with("metric=switches\n"));
    assert!(kv.contains("friedman.p="));
}

#[test]
fn frame_logs_replay_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    let csv = dir.path().join("out.csv");
    let o = run(&[
        "simulate", "--method", "threshold", "--subjects", "1", "--training", "0", "--measured", "1",
        "--frames", path_str(&frames), "--out", path_str(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let log = frames.join("s01_threshold.jsonl");
    let copy = dir.path().join("copy.jsonl");
    let o = run(&["replay", "--log", path_str(&log), "--out", path_str(&copy)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("replay matches: "));
    assert_eq!(std::fs::read(&log).unwrap(), std::fs::read(&copy).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&["simulate", "--method", "classic", "--agent", "admc-oracle", "--out", path_str(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cannot drive"));
    assert!(!out.exists());

    assert_eq!(code(&run(&["serve", "--method", "bogus"])), 2);
    assert_eq!(code(&run(&["serve"])), 2, "method is required");
    assert_eq!(code(&run(&["simulate", "--out", "x.csv", "--frobnicate"])), 2);
    assert_eq!(code(&run(&["analyze", "--in", path_str(&dir.path().join("missing.csv"))])), 2);
    assert_eq!(code(&run(&["simulate", "--jitter", "1.5", "--out", path_str(&out)])), 2);
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 3] = [
        (
            "simulate",
            &["--method", "--agent", "--seed", "--subjects", "--jitter", "--reaction-ticks", "--training", "--measured", "--out", "--frames", "--config"],
        ),
        ("analyze", &["--in", "--metric", "--format"]),
        ("serve", &["--port", "--host", "--method", "--seed", "--subject", "--log", "--out", "--config"]),
    ];
    for (cmd, flags) in cases {
        let o = run(&[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        let help = String::from_utf8(o.stdout).unwrap();
        for flag in flags {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}

#[test]
fn analyze_reports_bad_rows_and_degenerate_data() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "subject,method,trial,time_s,switches,spawn\ns01,classic,8,1.5,3,0\ns01,sideways,9,1.5,3,0\n").unwrap();
    let o = run(&["analyze", "--in", path_str(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let mut one = String::from("subject,method,trial,time_s,switches,spawn\n");
    let mut flat = one.clone();
    for s in 1..=6 {
        one.push_str(&format!("s{s:02},classic,8,{}.0,3,0\n", 10 + s));
        for m in ["classic", "continuous", "threshold"] {
            flat.push_str(&format!("s{s:02},{m},8,{}.0,3,0\n", 10 + s));
        }
    }
    let one_path = dir.path().join("one.csv");
    std::fs::write(&one_path, one).unwrap();
    let o = run(&["analyze", "--in", path_str(&one_path)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("method"), "{}", stderr(&o));

    let flat_path = dir.path().join("flat.csv");
    std::fs::write(&flat_path, flat).unwrap();
    let o = run(&["analyze", "--in", path_str(&flat_path), "--format", "kv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let kv = String::from_utf8(o.stdout).unwrap();
    assert!(kv.contains("friedman.chi2=0\n"), "{kv}");
}

#[test]
fn config_file_from_environment_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    std::fs::write(&cfg, "trial_time_cap_s = 1.0\n").unwrap();
    let out = dir.path().join("x.csv");
    let args = ["simulate", "--method", "classic", "--subjects", "1", "--training", "0", "--measured", "1", "--out", path_str(&out)];

    let o = admc().args(args).env("ADMC_CONFIG", &cfg).output().unwrap();
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("time cap"), "{}", stderr(&o));
    assert_eq!(code(&run(&args)), 0);

    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = admc().args(args).env("ADMC_CONFIG", &cfg).output().unwrap();
    assert_eq!(code(&o), 2);

    let o = run(&["config"]);
    let text = String::from_utf8(o.stdout).unwrap();
    std::fs::write(&cfg, &text).unwrap();
    let mut with_flag = args.to_vec();
    with_flag.extend(["--config", path_str(&cfg)]);
    assert_eq!(code(&run(&with_flag)), 0, "printed defaults load back");
}

#[test]
fn serve_fails_on_a_taken_port() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = run(&["serve", "--method", "classic", "--port", &port]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cannot bind"), "{}", stderr(&o));
}

#[test]
fn serve_is_reachable() {
    let mut child = admc()
        .args(["serve", "--method", "continuous", "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect("banner").to_string();

    let (mut ws, _) = tungstenite::connect(&url).unwrap();
    if let tungstenite::stream::MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    }
    let text = loop {
        if let Message::Text(t) = ws.read().unwrap() {
            break t;
        }
    };
    child.kill().unwrap();
    child.wait().unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!((v["type"].as_str(), v["tick"].as_u64(), v["method"].as_str()), (Some("frame"), Some(0), Some("continuous")));
}
