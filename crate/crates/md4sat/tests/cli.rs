//! End-to-end checks of the command-line interface.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use md4sat_core::{md4_k, Digest, MessageBlock};

fn md4sat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_md4sat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn only_subdir(dir: &Path) -> std::path::PathBuf {
    let entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 1, "{entries:?}");
    entries.into_iter().next().unwrap()
}

#[test]
fn encode_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.cnf");
    let b = dir.path().join("b.cnf");
    for p in [&a, &b] {
        stdout(&md4sat(&["encode", "--steps", "39", "--out", p.to_str().unwrap()]));
    }
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let header = String::from_utf8_lossy(&ta[..40]).lines().next().unwrap().to_string();
    assert!(header.starts_with("p cnf "), "{header}");
    let map: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.map.json")).unwrap()).unwrap();
    assert_eq!(map["input_vars"].as_array().unwrap().len(), 512);
    assert_eq!(map["output_vars"].as_array().unwrap().len(), 128);
    assert_eq!(map["switch_vars"].as_array().unwrap().len(), 31);
    assert_eq!(map["steps"], 39);
}

#[test]
fn encode_with_hash_and_lambda_appends_units() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain.cnf");
    let pinned = dir.path().join("pinned.cnf");
    stdout(&md4sat(&["encode", "--out", plain.to_str().unwrap()]));
    stdout(&md4sat(&[
        "encode", "--out", pinned.to_str().unwrap(), "--hash", "ones", "--lambda", "rho1",
    ]));
    let count = |p: &Path| -> usize {
        let text = fs::read_to_string(p).unwrap();
        text.lines().next().unwrap().split_whitespace().nth(3).unwrap().parse().unwrap()
    };
    assert_eq!(count(&pinned), count(&plain) + 128 + 31);
}

#[test]
fn mu_prints_the_named_vector_scores() {
    for (lambda, want) in [("dobbertin", "288"), ("de", "256"), ("rho1", "288"), ("rho2", "288"), ("zero", "0")] {
        let out = stdout(&md4sat(&["mu", "--hash", "zeros", "--lambda", lambda]));
        assert_eq!(out.trim(), want, "{lambda}");
    }
    let out = stdout(&md4sat(&["mu", "--hash", "ones", "--lambda", "1111111111111111111111111111111"]));
    assert_eq!(out.trim(), "conflict");
}

#[test]
fn verify_reports_match_and_mismatch() {
    let block = MessageBlock([0xdead_beef; 16]);
    let h = md4_k(&block, 39).unwrap();
    let out = stdout(&md4sat(&["verify", "--hash", &h.to_hex(), "--preimage", &block.to_hex()]));
    assert_eq!(out.trim(), "match");
    let o = md4sat(&["verify", "--hash", "zeros", "--preimage", &block.to_hex()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("mismatch"));
    // the block does not meet the constraints even though the hash matches
    let o = md4sat(&["verify", "--hash", &h.to_hex(), "--preimage", &block.to_hex(), "--lambda", "rho1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn attack_output_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let block = MessageBlock([0x0bad_cafe; 16]);
    let h = md4_k(&block, 16).unwrap();
    let out = stdout(&md4sat(&[
        "attack", "--steps", "16", "--hash", &h.to_hex(), "--lambda", "00000000", "--limit", "120",
        "--out-dir", dir.path().to_str().unwrap(), "--save-cnf",
    ]));
    assert!(out.contains("SAT: preimage found and verified"), "{out}");
    let run = only_subdir(dir.path());
    assert!(run.file_name().unwrap().to_str().unwrap().contains("-attack-"));
    assert!(run.join("config.json").exists());
    assert!(run.join("instance.cnf").exists());
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["status"], "SAT");
    assert_eq!(result["verified"], true);
    let preimage = result["preimage"].as_str().unwrap();
    let out = stdout(&md4sat(&["verify", "--steps", "16", "--hash", &h.to_hex(), "--preimage", preimage]));
    assert_eq!(out.trim(), "match");
}

#[test]
fn empty_campaign_writes_zero_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&md4sat(&[
        "campaign", "-n", "0", "--lambda", "rho1", "--out-dir", dir.path().to_str().unwrap(),
    ]));
    assert!(out.contains("0 (0%)"), "{out}");
    let run = only_subdir(dir.path());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["sample_size"], 0);
    assert_eq!(report["results"].as_array().unwrap().len(), 0);
    assert!(run.join("report.txt").exists());
}

#[test]
fn small_campaign_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    let out_dir = dir.path().join("runs");
    fs::write(
        &config,
        serde_json::json!({"steps": 14, "seed": 3, "campaign_limit_secs": 120, "out_dir": out_dir}).to_string(),
    )
    .unwrap();
    let out = stdout(&md4sat(&["--config", config.to_str().unwrap(), "campaign", "-n", "3", "--lambda", "000000"]));
    assert!(out.contains("3 (100%)"), "{out}");
    let run = only_subdir(&out_dir);
    let report = md4sat::campaign::CampaignReport::from_json(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.seed, 3);
    assert_eq!(report.steps, 14);
    for r in &report.results {
        r.reverify().unwrap();
    }
    let sampled: Vec<String> = md4sat::campaign::sample_hashes(3, 3).iter().map(Digest::to_hex).collect();
    let got: Vec<String> = report.results.iter().map(|r| r.hash.clone()).collect();
    assert_eq!(got, sampled);
}

#[test]
fn short_search_writes_log_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&md4sat(&[
        "search", "--hash", "zeros", "--start", "dobbertin", "--limit", "1", "--screen-limit", "0",
        "--out-dir", dir.path().to_str().unwrap(),
    ]));
    assert!(out.contains("mu histogram"), "{out}");
    let run = only_subdir(dir.path());
    let log = md4sat::search::read_log(&run.join("search.jsonl")).unwrap();
    assert!(!log.is_empty());
    assert_eq!(log[0].mu, Some(288));
    let report: md4sat::search::SearchReport =
        serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.evaluations as usize, log.len());
    assert!(report.mu_best.unwrap() >= 288);
    assert!(report.shortlist.iter().all(|p| log.iter().any(|e| e.lambda == *p)));
}

#[test]
fn bad_input_fails_with_nonzero_exit() {
    for args in [
        &["mu", "--hash", "123", "--lambda", "rho1"][..],
        &["mu", "--lambda", "0101"],
        &["verify", "--hash", "zeros", "--preimage", "00"],
        &["encode", "--steps", "49", "--out", "/nonexistent/x.cnf"],
        &["--config", "/nonexistent/config.json", "mu", "--lambda", "rho1"],
    ] {
        let o = md4sat(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{args:?}");
    }
}
