//! End-to-end checks of the binary: the synth → ingest → run → plotdata
//! workflow and the exit-code contract (0 ok, 1 bad config, 2 bad input,
//! 3 completed with failed cells).

use std::path::Path;
use std::process::{Command, Output};

fn linkgauge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linkgauge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn path_str(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().expect("UTF-8 path").to_string()
}

#[test]
fn synth_ingest_run_plotdata_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let synth_cfg = dir.path().join("synth.json");
    std::fs::write(
        &synth_cfg,
        r#"{"n_users": 24, "n_communities": 3, "p_in": 0.5, "p_out": 0.05, "vocab_size": 150}"#,
    )
    .unwrap();

    let out = linkgauge(&[
        "synth",
        "--config",
        synth_cfg.to_str().unwrap(),
        "--out",
        corpus.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert!(out.status.success(), "synth failed: {}", stderr_of(&out));
    for name in ["tweets.tsv", "social.tsv", "planted.tsv"] {
        assert!(corpus.join(name).exists(), "missing {name}");
    }

    let out = linkgauge(&[
        "ingest",
        &path_str(&corpus, "tweets.tsv"),
        "--social",
        &path_str(&corpus, "social.tsv"),
    ]);
    assert!(out.status.success(), "ingest failed: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(report["parsed_records"].as_u64().unwrap() > 0);
    assert_eq!(report["malformed_lines"].as_u64(), Some(0));
    assert!(report["social"]["edges"].as_u64().unwrap() > 0);

    let results = dir.path().join("results");
    let out = linkgauge(&[
        "run",
        "--tweets",
        &path_str(&corpus, "tweets.tsv"),
        "--social",
        &path_str(&corpus, "social.tsv"),
        "--models",
        "unigram,bigram",
        "--thresholds",
        "20,50",
        "--no-topic-scopes",
        "--seed",
        "3",
        "--out",
        results.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "run failed: {}", stderr_of(&out));
    let csv = stdout_of(&out);
    assert!(
        csv.starts_with(
            "event,scope,model,threshold_pct,nmi_xy,nmi_yx,nmi_sym,nodes,content_comms,social_comms"
        ),
        "unexpected csv header: {}",
        csv.lines().next().unwrap_or("")
    );
    // 1 event x 1 scope x 2 models x 2 thresholds.
    assert_eq!(csv.lines().count(), 1 + 4);
    assert_eq!(std::fs::read_to_string(results.join("scores.csv")).unwrap(), csv);
    assert!(results.join("scores.json").exists());
    assert!(results.join("manifest.json").exists());

    let plots = dir.path().join("plots");
    let out = linkgauge(&[
        "plotdata",
        &path_str(&results, "scores.json"),
        "--out",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "plotdata failed: {}", stderr_of(&out));
    let series = std::fs::read_to_string(plots.join("event00.event.unigram.tsv")).unwrap();
    assert!(series.starts_with("threshold_pct\tnmi_sym"));
    assert_eq!(series.lines().count(), 1 + 2, "one row per threshold");
}

#[test]
fn unparseable_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    let out = linkgauge(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
}

#[test]
fn out_of_range_threshold_exits_one() {
    let out = linkgauge(&[
        "run",
        "--tweets",
        "whatever.tsv",
        "--social",
        "whatever.tsv",
        "--thresholds",
        "150",
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("150"));
}

#[test]
fn missing_input_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = linkgauge(&[
        "run",
        "--tweets",
        &path_str(dir.path(), "no-such-tweets.tsv"),
        "--social",
        &path_str(dir.path(), "no-such-social.tsv"),
        "--models",
        "unigram",
        "--no-topic-scopes",
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
}

#[test]
fn corpus_with_no_usable_records_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let tweets = dir.path().join("garbage.tsv");
    std::fs::write(&tweets, "one-field-only\nanother bad line\n").unwrap();
    let out = linkgauge(&["ingest", tweets.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
}

#[test]
fn unscorable_cells_exit_three() {
    // No follower edges at all: every cell's social partition is
    // undefined, so each cell fails but the run itself completes.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{
            "synth": {"n_users": 6, "n_communities": 2, "p_in": 0.0, "p_out": 0.0,
                      "vocab_size": 60, "seed": 1},
            "models": ["unigram"],
            "thresholds": [50.0],
            "topic_scopes": false,
            "seed": 1
        }"#,
    )
    .unwrap();
    let out = linkgauge(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("cell failed"));
}
