use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str, body: &str) -> String {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn css(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_css"))
        .args(args)
        .output()
        .unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const FIXTURE: &str = "1 2 3\n1 2 4\n1 2 5\n";

fn sample_sets(out: &Output) -> Vec<BTreeSet<Vec<u64>>> {
    json_lines(out)[1..]
        .iter()
        .map(|l| {
            serde_json::from_value::<Vec<Vec<u64>>>(l["samples"].clone())
                .unwrap()
                .into_iter()
                .collect()
        })
        .collect()
}

#[test]
fn sample_with_q_one_lists_everything() {
    let f = fixture("q1.txt", "4 3 2 1\n7 8\n");
    let out = css(&[
        "sample", "--input", &f, "--k", "2", "--q", "1", "--seed", "0",
    ]);
    assert!(out.status.success());
    let lines = json_lines(&out);
    assert_eq!(lines[0]["manifest"]["subcommand"], "sample");
    let sets = sample_sets(&out);
    assert_eq!(sets[0].len(), 6);
    assert_eq!(sets[1], BTreeSet::from([vec![7, 8]]));
}

#[test]
fn tradeoff_output_matches_plain_sampling() {
    let f = fixture(
        "tradeoff.txt",
        "1 2 3 4 5 6 7 8 9\n2 4 6 8 10 12\n3 5 7 11 13 17 19 23\n",
    );
    let base = css(&[
        "sample", "--input", &f, "--k", "4", "--q", "3", "--seed", "11",
    ]);
    for l in ["0", "1", "2"] {
        let out = css(&[
            "sample",
            "--input",
            &f,
            "--k",
            "4",
            "--q",
            "3",
            "--seed",
            "11",
            "--tradeoff",
            l,
        ]);
        assert!(out.status.success());
        assert_eq!(sample_sets(&out), sample_sets(&base), "l = {l}");
    }
}

#[test]
fn estimate_and_oracle_agree_when_q_is_forced() {
    let f = fixture("fx.txt", FIXTURE);
    let est = css(&[
        "estimate",
        "--input",
        &f,
        "--k",
        "2",
        "--alpha",
        "0.1",
        "--epsilon",
        "0.5",
        "--delta",
        "0.2",
        "--min-support",
        "2",
        "--m",
        "3",
        "--b-max",
        "3",
        "--seed",
        "5",
        "--force-q",
        "1",
    ]);
    assert!(est.status.success());
    let report = &json_lines(&est)[0]["report"];
    let orc = css(&["oracle", "--input", &f, "--k", "2", "--min-support", "2"]);
    let o = &json_lines(&orc)[0];
    assert_eq!((o["f"].as_u64(), o["z"].as_u64()), (Some(1), Some(7)));
    assert_eq!(report["f_hat"].as_f64(), Some(1.0));
    assert_eq!(report["z_hat"].as_f64(), Some(7.0));
}

#[test]
fn graph_reports_carry_oracle_counts() {
    let f = fixture("k4.txt", "1: 2 3 4\n2: 1 3 4\n3: 1 2 4\n4: 1 2 3\n");
    let common = [
        "--gamma",
        "0.2",
        "--epsilon",
        "0.5",
        "--delta",
        "0.2",
        "--max-degree",
        "3",
        "--seed",
        "1",
    ];
    let mut args = vec![
        "graph",
        "cliques",
        "--input",
        &f,
        "--k",
        "3",
        "--oracle",
        "--force-q",
        "1",
    ];
    args.extend(common);
    let out = css(&args);
    assert!(out.status.success());
    let v = &json_lines(&out)[0];
    assert_eq!(v["report"]["k_cliques_hat"].as_f64(), Some(4.0));
    assert_eq!(v["oracle"]["k_cliques"].as_u64(), Some(4));

    let mut args = vec![
        "graph",
        "bicliques",
        "--input",
        &f,
        "--j",
        "2",
        "--min-left",
        "2",
        "--oracle",
    ];
    args.extend(common);
    let out = css(&args);
    let v = &json_lines(&out)[0];
    assert_eq!(v["oracle"]["bicliques"].as_u64(), Some(6));
    assert!(v["report"].get("bicliques_hat").is_some());
}

#[test]
fn sketch_query_is_one_sided() {
    let f = fixture("five.txt", &"1 2 3\n".repeat(5));
    let out = css(&[
        "sketch",
        "--input",
        &f,
        "--k",
        "2",
        "--width",
        "16",
        "--depth",
        "3",
        "--workers",
        "4",
        "--kind",
        "countmin",
        "--seed",
        "2",
        "--query",
        "1,2",
    ]);
    assert!(out.status.success());
    let v = &json_lines(&out)[0];
    assert!(v["query"]["estimate"].as_i64().unwrap() >= 5);
    assert_eq!(v["sketch"]["counters"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes() {
    let f = fixture("codes.txt", FIXTURE);
    let unknown = css(&[
        "sample", "--input", &f, "--k", "2", "--q", "1", "--seed", "0", "--bogus",
    ]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));

    let bad_q = css(&[
        "sample", "--input", &f, "--k", "2", "--q", "0", "--seed", "0",
    ]);
    assert_eq!(bad_q.status.code(), Some(2));
    assert!(bad_q.stdout.is_empty());

    let bad_workers = css(&[
        "sketch",
        "--input",
        &f,
        "--k",
        "2",
        "--width",
        "10",
        "--depth",
        "2",
        "--workers",
        "3",
        "--kind",
        "countmin",
        "--seed",
        "0",
    ]);
    assert_eq!(bad_workers.status.code(), Some(2));

    let bad = fixture("bad.txt", "1 x 2\n");
    let parse = css(&["oracle", "--input", &bad, "--k", "2", "--min-support", "1"]);
    assert_eq!(parse.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("line 1"));

    let missing = css(&[
        "oracle",
        "--input",
        "/nonexistent/file",
        "--k",
        "2",
        "--min-support",
        "1",
    ]);
    assert_eq!(missing.status.code(), Some(1));

    let oversize = css(&[
        "estimate",
        "--input",
        &f,
        "--k",
        "2",
        "--alpha",
        "0.1",
        "--epsilon",
        "0.5",
        "--delta",
        "0.2",
        "--min-support",
        "2",
        "--m",
        "3",
        "--b-max",
        "2",
        "--seed",
        "5",
    ]);
    assert_eq!(oversize.status.code(), Some(1));

    let selfloop = fixture("loop.txt", "1: 1\n");
    let out = css(&[
        "graph",
        "cliques",
        "--input",
        &selfloop,
        "--k",
        "3",
        "--gamma",
        "0.2",
        "--epsilon",
        "0.5",
        "--delta",
        "0.2",
        "--max-degree",
        "3",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn estimation_failure_exits_one_with_report() {
    let f = fixture("tiny.txt", "1\n");
    let out = css(&[
        "estimate",
        "--input",
        &f,
        "--k",
        "2",
        "--alpha",
        "0.1",
        "--epsilon",
        "0.5",
        "--delta",
        "0.2",
        "--min-support",
        "1",
        "--m",
        "64",
        "--b-max",
        "40",
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = &json_lines(&out)[0];
    assert!(v["report"]["f_hat"].is_null());
    assert!(!v["report"]["copies"].as_array().unwrap().is_empty());
}
