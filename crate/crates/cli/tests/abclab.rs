//! End-to-end runs of the `abclab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_bigint::BigUint;

fn abclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abclab")).args(args).env("ABCLAB_THREADS", "2").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn hash_of(text: &str) -> Option<String> {
    text.lines().find_map(|l| l.strip_prefix("# config_sha256=").map(str::to_string))
}

#[test]
fn run_is_byte_identical_across_repeats() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(code(&abclab(&["run", "-o", s(&a)])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_abclab"))
        .args(["run", "-o", s(&b)])
        .env("ABCLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fa = files(&a);
    assert!(fa.len() >= 4);
    for f in fa {
        let g = b.join(f.file_name().unwrap());
        assert_eq!(read(&f), read(&g), "{}", f.display());
    }
}

#[test]
fn every_run_file_carries_the_same_hash() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    assert_eq!(code(&abclab(&["run", "--stages", "2..3", "--horizons", "1,64,q_n", "-o", s(&out)])), 0);
    let hashes: Vec<Option<String>> = files(&out).iter().map(|f| hash_of(&read(f))).collect();
    assert!(hashes.iter().all(|h| h.is_some() && h == &hashes[0]), "{hashes:?}");
}

#[test]
fn untwisted_witness_matches_exact_cardinality() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let o = abclab(&["run", "--stages", "2..3", "--horizons", "64", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let w = read(&out.join("witness.csv"));
    let row = w.lines().find(|l| l.starts_with("2,")).expect("stage 2 witness row");
    assert_eq!(row, "2,0.125,12,12,66,66,0.125,true");
    let summary = read(&out.join("summary.txt"));
    assert!(summary.contains("witness_separation: pass"), "{summary}");
    assert!(summary.contains("sandwich: pass"), "{summary}");
}

#[test]
fn weak_mixing_run_writes_words_and_hamming_table() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let cfg = configs().join("wm_desk.json");
    let o = abclab(&["run", "-c", s(&cfg), "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for n in [2, 3] {
        let p = out.join(format!("words_stage{n}.txt"));
        assert_eq!(code(&abclab(&["words", "--verify", s(&p)])), 0);
    }
    let h = read(&out.join("hamming.csv"));
    let rows: Vec<&str> = h.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "stage,horizon,eps,count,covered_fraction,samples,growth");
    assert_eq!(rows.len(), 3);
    assert!(read(&out.join("summary.txt")).contains("word_selection: pass"));
}

#[test]
fn intermediate_chain_passes_and_reports_q4() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "c.json",
        r#"{"profile": {"regime": {"kind": "intermediate", "r": 4}, "q1": 2, "relax_eps": true},
            "stages": {"from": 2, "to": 4}}"#,
    );
    let out = d.path().join("o");
    let o = abclab(&["params", "-c", s(&cfg), "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&read(&out.join("chain.json"))).unwrap();
    let chain = v["chain"].as_array().unwrap();
    assert_eq!(chain.len(), 4);
    let q = |i: usize| chain[i]["q"].as_str().unwrap().parse::<BigUint>().unwrap();
    assert_eq!(q(3), q(2).pow(81u32));
    assert_eq!(q(2), q(1).pow(16u32));
    assert!(read(&out.join("validation.txt")).contains("status=ok"));
}

#[test]
fn eps_violation_exits_with_validation_code() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "c.json",
        r#"{"profile": {"regime": {"kind": "intermediate", "r": 4}, "q1": 2,
                        "eps_rule": {"kind": "fixed", "value": "1/2"}},
            "stages": {"from": 2, "to": 3}}"#,
    );
    let out = d.path().join("o");
    let o = abclab(&["params", "-c", s(&cfg), "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    let report = read(&out.join("validation.txt"));
    assert!(report.lines().any(|l| l.starts_with("FAIL") && l.contains("eps_le_inv_n4")), "{report}");
}

#[test]
fn chain_file_revalidates_identically() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(code(&abclab(&["params", "--stages", "2..3", "-o", s(&a)])), 0);
    let chain = a.join("chain.json");
    let o = abclab(&["params", "--stages", "2..3", "--chain", s(&chain), "-o", s(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(&a.join("validation.txt")), read(&b.join("validation.txt")));
    assert_eq!(read(&a.join("chain.json")), read(&b.join("chain.json")));
}

#[test]
fn budget_guard_blocks_large_runs() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let o = abclab(&["run", "--budget", "1000", "-o", s(&out)]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("budget"));
    assert!(!out.exists());
    let o = abclab(&["run", "--budget", "1000", "--allow-over-budget", "--horizons", "1", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn construction_errors_have_their_own_code() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        "c.json",
        r#"{"construction": {"kind": "weak_mixing", "spec": {"max_tiles": 64},
            "words": {"alphabet": 4, "word_len": 7, "eps": 0.125, "seed": 1, "retry_budget": 5}}}"#,
    );
    let o = abclab(&["run", "-c", s(&cfg), "-o", s(&d.path().join("o"))]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn bad_configs_are_rejected_before_computing() {
    let d = tempfile::tempdir().unwrap();
    for (i, body) in [r#"{"schema_version": "2.0"}"#, r#"{"gird": 32}"#, r#"{"eps": ["1/0"]}"#, "not json"]
        .iter()
        .enumerate()
    {
        let cfg = write_config(d.path(), &format!("c{i}.json"), body);
        let out = d.path().join(format!("o{i}"));
        let o = abclab(&["run", "-c", s(&cfg), "-o", s(&out)]);
        assert_eq!(code(&o), 5, "{body}: {}", stderr(&o));
        assert!(!out.exists());
    }
    assert_eq!(code(&abclab(&["run", "--grid", "8", "-o", s(&d.path().join("g"))])), 5);
}

#[test]
fn flags_override_the_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", r#"{"grid": 24, "seed": 9, "horizons": ["1"]}"#);
    let out = d.path().join("o");
    assert_eq!(code(&abclab(&["run", "-c", s(&cfg), "--grid", "40", "-o", s(&out)])), 0);
    let counts = read(&out.join("counts.csv"));
    let echo = counts.lines().find_map(|l| l.strip_prefix("# config=")).unwrap();
    let v: serde_json::Value = serde_json::from_str(echo).unwrap();
    assert_eq!(v["grid"], 40);
    assert_eq!(v["seed"], 9);
    assert_eq!(v["eps"][0], "1/8");
}

#[test]
fn plotdata_handles_empty_and_filtered_reports() {
    let d = tempfile::tempdir().unwrap();
    let empty = write_config(d.path(), "empty.csv", "# config_sha256=x\nstage,horizon,eps,count_kind,count,family,t,log_ratio\n");
    let out = d.path().join("p0");
    assert_eq!(code(&abclab(&["plotdata", s(&empty), "-o", s(&out)])), 0);
    assert_eq!(files(&out), vec![out.join("manifest.csv")]);
    let rows = read(&out.join("manifest.csv")).lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1);

    let run = d.path().join("run");
    assert_eq!(code(&abclab(&["run", "-o", s(&run)])), 0);
    let out = d.path().join("p1");
    let o = abclab(&["plotdata", s(&run.join("counts.csv")), "-o", s(&out), "--family", "pol,ln", "--t", "1", "--kind", "cover"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let names: Vec<String> = files(&out).iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["ln_t1_cover_eps0.125.csv", "manifest.csv", "pol_t1_cover_eps0.125.csv"]);
    let curve = read(&out.join("pol_t1_cover_eps0.125.csv"));
    assert_eq!(hash_of(&curve), hash_of(&read(&run.join("counts.csv"))));
}

#[test]
fn plotdata_names_missing_columns() {
    let d = tempfile::tempdir().unwrap();
    let bad = write_config(d.path(), "bad.csv", "stage,horizon,eps,count_kind,count,family,log_ratio\n");
    let o = abclab(&["plotdata", s(&bad), "-o", s(&d.path().join("p"))]);
    assert_eq!(code(&o), 5);
    let e = stderr(&o);
    assert!(e.contains("bad.csv") && e.contains("\"t\""), "{e}");
}

#[test]
fn tampered_selection_fails_verification() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("w.txt");
    let o = abclab(&["words", "--length", "64", "--count", "4", "--eps", "1/8", "-o", s(&p)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&abclab(&["words", "--verify", s(&p)])), 0);
    let text = read(&p);
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let first_word = lines.iter().position(|l| !l.starts_with('#')).unwrap() + 1;
    lines[first_word + 1] = lines[first_word].clone();
    std::fs::write(&p, lines.join("\n") + "\n").unwrap();
    assert_eq!(code(&abclab(&["words", "--verify", s(&p)])), 6);
}

#[test]
fn norms_and_describe_print_stage_data() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let o = abclab(&["norms", "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(&out.join("norms.csv"));
    assert!(csv.lines().any(|l| l.starts_with("h_2,1,")), "{csv}");
    let o = abclab(&["describe"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("stage 2: q = 8"), "{text}");
}
