use std::path::Path;
use std::process::Command as Proc;
use std::time::Duration;

use clap::Parser;
use scq_cli::commands::{parse_pair, run, CliError};
use scq_cli::Cli;
use scq_core::circuit::build_ghz;
use scq_core::qasm;
use scq_core::DeviceSpec;
use scq_service::agent::{run_loop, AgentClient};
use scq_service::ServiceConfig;

const TOKEN: &str = "t0k";

/// A service on an ephemeral port, optionally with an agent attached.
struct Stack {
    base: String,
    _rt: tokio::runtime::Runtime,
    _dir: tempfile::TempDir,
}

fn stack(with_agent: bool) -> Stack {
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        agent_token: Some(TOKEN.into()),
        data_dir: dir.path().to_path_buf(),
        ..ServiceConfig::default()
    };
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    rt.spawn(async move {
        scq_service::serve(listener, &config, std::future::pending()).await.unwrap();
    });
    if with_agent {
        let client = AgentClient::new(&base, TOKEN);
        rt.spawn(run_loop(client, DeviceSpec::scq10(), Duration::from_secs(1), std::future::pending()));
    }
    Stack { base, _rt: rt, _dir: dir }
}

struct Output {
    result: Result<(), CliError>,
    out: String,
    err: String,
}

fn scq(args: &[&str]) -> Output {
    let cli = Cli::try_parse_from(std::iter::once("scq").chain(args.iter().copied())).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let result = run(cli, &mut out, &mut err);
    Output {
        result,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn code(o: &Output) -> i32 {
    o.result.as_ref().err().map(CliError::exit_code).unwrap_or(0)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn submit_and_fetch_results() {
    let s = stack(true);
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "ghz.qasm", &qasm::serialize(&build_ghz(3, 0, 10).unwrap()));
    let o = scq(&["--server", &s.base, "submit", &good, "--shots", "500", "--correct", "--seed", "3", "--wait"]);
    assert_eq!(code(&o), 0, "{:?}", o.result);
    let id = o.out.trim().to_string();
    assert_eq!(id.len(), 36);

    let csv = tmp.path().join("r.csv");
    let o = scq(&["--server", &s.base, "result", &id, "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(scq_core::task::CSV_HEADER));
    let o = scq(&["--server", &s.base, "result", &id]);
    assert!(o.out.contains("\"probs_corrected\""));

    let o = scq(&["--server", &s.base, "status", &id]);
    assert!(o.out.contains("\"status\": \"done\""), "{}", o.out);
}

#[test]
fn exit_codes() {
    let s = stack(false);
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.qasm", "qubits 10\nh 0\ncz 0 2\nmeasure 0 2\n");
    let o = scq(&["--server", &s.base, "submit", &bad]);
    assert_eq!(code(&o), 2);
    assert!(o.err.contains("bad.qasm:3:"), "{}", o.err);

    // No agent: the task stays queued.
    let good = write(tmp.path(), "ok.qasm", &qasm::serialize(&build_ghz(2, 0, 10).unwrap()));
    let id = scq(&["--server", &s.base, "submit", &good]).out.trim().to_string();
    assert_eq!(code(&scq(&["--server", &s.base, "result", &id])), 4);
    assert_eq!(code(&scq(&["--server", &s.base, "result", "no-such-task"])), 5);
    assert_eq!(code(&scq(&["--server", "http://127.0.0.1:1", "submit", &good])), 3);
    assert_eq!(code(&scq(&["qpt", "--local", "--pair", "Q1Q3"])), 2);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "ok.qasm", "qubits 2\nh 0\nmeasure 0\n");
    let status = Proc::new(env!("CARGO_BIN_EXE_scq"))
        .args(["--server", "http://127.0.0.1:1", "submit", &good])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    let status = Proc::new(env!("CARGO_BIN_EXE_scq")).args(["qpt", "--local", "--pair", "nonsense"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn local_and_remote_bench_agree() {
    let s = stack(true);
    let local_dir = tempfile::tempdir().unwrap();
    let remote_dir = tempfile::tempdir().unwrap();
    let common = ["ghz-bench", "--n-min", "3", "--n-max", "4", "--shots", "800", "--points", "9", "--resamples", "10", "--seed", "4"];
    let mut local_args = common.to_vec();
    local_args.extend(["--local", "--out-dir", local_dir.path().to_str().unwrap()]);
    let mut remote_args = vec!["--server", s.base.as_str()];
    remote_args.extend(common);
    remote_args.extend(["--out-dir", remote_dir.path().to_str().unwrap()]);
    let a = scq(&local_args);
    let b = scq(&remote_args);
    assert_eq!(code(&a), 0, "{:?}", a.result);
    assert_eq!(code(&b), 0, "{:?}", b.result);
    assert_eq!(a.out, b.out);
    for f in ["ghz_report.csv", "ghz_parity.csv"] {
        let x = std::fs::read_to_string(local_dir.path().join(f)).unwrap();
        let y = std::fs::read_to_string(remote_dir.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    // 8 + 7 blocks.
    let report = std::fs::read_to_string(local_dir.path().join("ghz_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 15);
}

#[test]
fn bench_block_count_and_ideal_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = scq(&[
        "ghz-bench", "--local", "--n-min", "6", "--n-max", "6", "--shots", "20000", "--backend", "ideal", "--resamples", "0",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{:?}", o.result);
    let report = std::fs::read_to_string(dir.path().join("ghz_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 5);
    assert!(o.out.contains("Q1-Q6") && o.out.contains("Q5-Q10"));
}

#[test]
fn qpt_local_exact_and_remote_transparency() {
    let o = scq(&["qpt", "--local", "--pair", "5,6", "--shots", "0", "--backend", "ideal"]);
    assert_eq!(code(&o), 0);
    let f: f64 = o.out.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(f >= 1.0 - 1e-6, "{}", o.out);

    let tmp = tempfile::tempdir().unwrap();
    let chi = tmp.path().join("chi.json");
    let o = scq(&["qpt", "--local", "--pair", "Q6Q7", "--shots", "0", "--out", chi.to_str().unwrap()]);
    let f: f64 = o.out.trim().rsplit(' ').next().unwrap().parse().unwrap();
    // Lab value for this pair is 0.9276.
    assert!((f - 0.9276).abs() <= 0.04, "{}", o.out);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&chi).unwrap()).unwrap();
    assert_eq!(doc["chi"].as_array().unwrap().len(), 256);

    let s = stack(true);
    let local = scq(&["qpt", "--local", "--pair", "Q2Q3", "--shots", "300", "--seed", "9"]);
    let remote = scq(&["--server", &s.base, "qpt", "--pair", "Q2Q3", "--shots", "300", "--seed", "9"]);
    assert_eq!(code(&remote), 0, "{:?}", remote.result);
    assert_eq!(local.out, remote.out);
}

#[test]
fn pair_notation() {
    assert_eq!(parse_pair("Q6Q7").unwrap(), (5, 6));
    assert_eq!(parse_pair("q6-q7").unwrap(), (5, 6));
    assert_eq!(parse_pair(" 5, 6").unwrap(), (5, 6));
    assert!(parse_pair("Q0Q1").is_err());
    assert!(parse_pair("6").is_err());
}

/// Set `SCQ_UPDATE_GOLDEN=1` to regenerate after an intended change.
#[test]
fn bench_csv_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let o = scq(&[
        "ghz-bench", "--local", "--n-min", "4", "--n-max", "5", "--shots", "1000", "--points", "11", "--resamples", "20",
        "--seed", "7", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{:?}", o.result);
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for f in ["ghz_report.csv", "ghz_parity.csv"] {
        let got = std::fs::read_to_string(dir.path().join(f)).unwrap();
        let path = golden_dir.join(format!("bench_seed7_{f}"));
        if std::env::var_os("SCQ_UPDATE_GOLDEN").is_some() {
            std::fs::create_dir_all(&golden_dir).unwrap();
            std::fs::write(&path, &got).unwrap();
        }
        let want = std::fs::read_to_string(&path).expect("golden file missing; run with SCQ_UPDATE_GOLDEN=1");
        assert_eq!(got, want, "{f}");
    }
}
