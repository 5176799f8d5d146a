use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use nlu_core::mr_tree::parse_tree;
use nlu_core::resources;

fn nlu() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nlu"));
    c.env_remove("NLU_RESOURCES");
    c
}

fn run(args: &[&str]) -> Output {
    nlu().args(args).output().expect("spawn nlu")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "nlu {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small corpus and a tiny model, built once for the whole test binary.
fn fixture() -> &'static (PathBuf, PathBuf) {
    static F: OnceLock<(PathBuf, PathBuf)> = OnceLock::new();
    F.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("nlu-cli-fixture");
        std::fs::create_dir_all(&dir).unwrap();
        let corpus = dir.join("corpus.jsonl");
        let model = dir.join("model.ckpt");
        ok(&["gen-corpus", "--turns", "60", "-o", p(&corpus)]);
        ok(&[
            "train", "--corpus", p(&corpus), "-o", p(&model), "--epochs", "2", "--hidden-dim", "8", "--embed-dim", "8",
            "--layers", "1",
        ]);
        (corpus, model)
    })
}

#[test]
fn lint_bundled_ontology_is_clean() {
    let out = ok(&["lint-ontology"]);
    assert!(out.trim_end().ends_with("0 violations"), "{out}");
}

#[test]
fn lint_reports_violations_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ont");
    std::fs::write(&bad, format!("{}\ntype Orphan\n  name: string\n", resources::TOY_ONTOLOGY)).unwrap();
    let o = run(&["lint-ontology", p(&bad)]);
    assert!(!o.status.success());
    let out = stdout(&o);
    assert!(out.contains("`Orphan` is not reachable") && out.contains("1 violations"), "{out}");
}

#[test]
fn gen_corpus_writes_requested_turns_and_flat_frames() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.jsonl");
    let flat = dir.path().join("f.jsonl");
    ok(&["gen-corpus", "--turns", "50", "-o", p(&out), "--flat", p(&flat)]);
    let records = nlu_core::corpus::read_jsonl(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    assert_eq!(records.iter().map(|r| r.turns.len()).sum::<usize>(), 50);
    assert_eq!(std::fs::read_to_string(&flat).unwrap().lines().count(), records.len());
}

#[test]
fn seed_makes_generation_deterministic() {
    let a = ok(&["--seed", "5", "gen-corpus", "--turns", "30"]);
    let b = ok(&["--seed", "5", "gen-corpus", "--turns", "30"]);
    let c = ok(&["--seed", "6", "gen-corpus", "--turns", "30"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn parse_prints_a_tree_that_parses_back() {
    let (_, model) = fixture();
    let out = ok(&["parse", "--model", p(model), "set an alarm for 7 am"]);
    assert!(out.contains("route general"), "{out}");
    let tree_line = out.lines().last().unwrap();
    parse_tree(&resources::toy_ontology(), tree_line).expect("printed tree parses");
}

#[test]
fn parse_routes_overrides_and_knowledge() {
    let (_, model) = fixture();
    let out = ok(&["parse", "--model", p(model), "good night"]);
    assert!(out.contains("route overrides"), "{out}");
    let out = ok(&["parse", "--model", p(model), "--history", "How old is Barack Obama?", "What about his wife?"]);
    assert!(out.contains("How old is Barack Obama's wife"), "{out}");
    assert!(out.contains("route knowledge"), "{out}");
}

#[test]
fn repl_reads_piped_input_and_saves_transcript() {
    let (_, model) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("t.jsonl");
    let mut child = nlu()
        .args(["repl", "--model", p(model)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let script = format!(":help\ngood night\n:save {}\n:quit\n", p(&saved));
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains(":fixture"), "{out}");
    assert!(out.contains("route    overrides"), "{out}");
    let records = nlu_core::corpus::read_jsonl(std::io::BufReader::new(std::fs::File::open(&saved).unwrap())).unwrap();
    assert_eq!(records[0].turns.len(), 1);
}

#[test]
fn eval_gold_baseline_has_no_errors_and_injection_is_reported() {
    let (corpus, _) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    ok(&["eval", "--corpus", p(corpus), "--report", p(&report)]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["turns"], 60);
    assert_eq!(v["component_errors"], 0);
    assert_eq!(v["user_facing_errors"], 0);
    ok(&["eval", "--corpus", p(corpus), "--inject", "1.0", "--report", p(&report)]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["component_errors"].as_u64().unwrap() > 0);
}

#[test]
fn eval_runs_the_pipeline_variant() {
    let (corpus, model) = fixture();
    let out = ok(&["eval", "--corpus", p(corpus), "--model", p(model)]);
    assert!(!out.is_empty());
}

#[test]
fn quantize_halves_the_checkpoint() {
    let (_, model) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.ckpt");
    ok(&["quantize", "--model", p(model), "-o", p(&q)]);
    let ratio = std::fs::metadata(&q).unwrap().len() as f64 / std::fs::metadata(model).unwrap().len() as f64;
    assert!(ratio <= 0.55, "{ratio}");
    ok(&["parse", "--model", p(&q), "good night"]);
}

#[test]
fn resource_directory_from_environment_overrides_bundled_files() {
    let (_, model) = fixture();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("overrides.txt"),
        "lights out\tVoiceCommand.run(command=CommandRef(id=\"cmd-bedtime\", name=\"bedtime mode\"))\n",
    )
    .unwrap();
    let o = nlu()
        .env("NLU_RESOURCES", dir.path())
        .args(["parse", "--model", p(model), "lights out"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("route overrides (override:"), "{}", stdout(&o));
    let without = ok(&["parse", "--model", p(model), "lights out"]);
    assert!(!without.contains("route overrides"));
}

#[test]
fn unknown_subcommand_fails() {
    assert!(!run(&["frobnicate"]).status.success());
}
