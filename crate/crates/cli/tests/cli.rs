use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;
use std::time::Duration;

const WORLD: &str = "seed = 5\ndays = 4\nusers = 300\n";

fn agt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agt")).args(args).output().expect("run agt")
}

fn ok(args: &[&str]) -> String {
    let out = agt(args);
    assert!(out.status.success(), "agt {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generated corpus and a model trained on it, shared by the tests.
struct Trained {
    _dir: tempfile::TempDir,
    world: PathBuf,
    corpus: PathBuf,
    models: PathBuf,
}

fn trained() -> &'static Trained {
    static T: OnceLock<Trained> = OnceLock::new();
    T.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let world = dir.path().join("world.toml");
        std::fs::write(&world, WORLD).unwrap();
        let corpus = dir.path().join("corpus.jsonl");
        ok(&["generate", "--world", s(&world), "-o", s(&corpus)]);
        let models = dir.path().join("models");
        std::fs::create_dir(&models).unwrap();
        ok(&["train", "-i", s(&corpus), "-m", s(&models), "--world", s(&world)]);
        Trained { _dir: dir, world, corpus, models }
    })
}

fn labels(corpus: &Path) -> Vec<(u64, String)> {
    std::fs::read_to_string(corpus)
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (v["id"].as_u64().unwrap(), v["label"].as_str().unwrap().to_string())
        })
        .collect()
}

#[test]
fn train_writes_the_four_model_files() {
    let t = trained();
    let mut names: Vec<String> =
        std::fs::read_dir(&t.models).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["no_profile_model.json", "profile_model.json", "text_model.json", "vocabulary.txt"]);
}

#[test]
fn classify_preserves_order_and_tracks_the_true_agt_share() {
    let t = trained();
    let out = ok(&["classify", "-m", s(&t.models), "-i", s(&t.corpus), "--world", s(&t.world)]);
    let truth = labels(&t.corpus);
    let verdicts: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(verdicts.len(), truth.len());
    for (v, (id, _)) in verdicts.iter().zip(&truth) {
        assert_eq!(v["id"].as_u64().unwrap(), *id);
    }
    let share = |it: &mut dyn Iterator<Item = &str>| {
        let all: Vec<&str> = it.collect();
        100.0 * all.iter().filter(|l| **l == "AGT").count() as f64 / all.len() as f64
    };
    let predicted = share(&mut verdicts.iter().map(|v| v["label"].as_str().unwrap()));
    let actual = share(&mut truth.iter().map(|(_, l)| l.as_str()));
    assert!((predicted - actual).abs() <= 3.0, "predicted {predicted:.2}% vs actual {actual:.2}%");
}

#[test]
fn prefetched_classification_uses_the_profile_path() {
    let t = trained();
    let out = agt(&[
        "classify", "-m", s(&t.models), "-i", s(&t.corpus), "--world", s(&t.world), "--prefetch", "--format", "csv",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("id,label,probability,path,text_probability"));
    assert!(lines.all(|l| l.split(',').nth(3) == Some("profile")));
}

#[test]
fn simulate_reports_both_thresholds() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("days.csv");
    ok(&["simulate", "-i", s(&t.corpus), "-n", "1", "-n", "3", "-o", s(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut rows = text.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "threshold").unwrap();
    let thresholds: std::collections::BTreeSet<&str> = rows.map(|r| r.split(',').nth(col).unwrap()).collect();
    assert_eq!(thresholds.into_iter().collect::<Vec<_>>(), ["1", "3"]);
}

#[test]
fn throughput_reports_the_daily_profile_count() {
    let out = ok(&["throughput", "--mode", "recent", "--hours", "24"]);
    assert!(out.contains("68035"), "{out}");
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let missing = agt(&["classify", "-m", s(&t.models), "-i", "/nonexistent/tweets.jsonl"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("agt: "));

    let bad = dir.path().join("bad.jsonl");
    let mut body = std::fs::read_to_string(&t.corpus).unwrap().lines().take(3).collect::<Vec<_>>().join("\n");
    body.push_str("\n{\"id\": \"not a number\"}\n");
    std::fs::write(&bad, &body).unwrap();
    assert!(!agt(&["classify", "-m", s(&t.models), "-i", s(&bad)]).status.success());
    let lenient = ok(&["classify", "-m", s(&t.models), "-i", s(&bad), "--lenient"]);
    assert_eq!(lenient.lines().count(), 3);

    let empty_models = dir.path().join("empty");
    std::fs::create_dir(&empty_models).unwrap();
    assert!(!agt(&["classify", "-m", s(&empty_models), "-i", s(&t.corpus)]).status.success());

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert!(!agt(&["--config", s(&cfg), "throughput"]).status.success());
}

#[test]
fn follow_mode_picks_up_appended_tweets() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let live = dir.path().join("live.jsonl");
    let lines: Vec<String> = std::fs::read_to_string(&t.corpus).unwrap().lines().take(20).map(String::from).collect();
    std::fs::write(&live, format!("{}\n", lines[..10].join("\n"))).unwrap();
    let child = Command::new(env!("CARGO_BIN_EXE_agt"))
        .args(["classify", "-m", s(&t.models), "-i", s(&live), "--follow", "--idle-exit", "1.5"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    std::thread::sleep(Duration::from_millis(400));
    let mut f = std::fs::OpenOptions::new().append(true).open(&live).unwrap();
    for l in &lines[10..] {
        writeln!(f, "{l}").unwrap();
    }
    drop(f);
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 20);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[fetch]\nburst_size = 100\n").unwrap();
    let from_cfg = ok(&["--config", s(&cfg), "throughput", "--mode", "policy", "--hours", "1"]);
    let builtin = ok(&["--config", s(&cfg), "throughput", "--mode", "recent", "--hours", "1"]);
    assert_ne!(from_cfg, builtin);
}
