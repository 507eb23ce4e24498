use std::path::Path;
use std::process::Command;

fn affectloop(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_affectloop")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const TINY: &str = r#"
total_dialogues = 64
eval_interval = 32
eval_dialogues = 16
final_eval_dialogues = 40

[pretrain]
dialogues = 10
"#;

fn train_into(dir: &Path, ablation: &str) {
    let config = dir.join("tiny.toml");
    std::fs::write(&config, TINY).unwrap();
    let out = dir.join(ablation);
    let text = affectloop(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "3",
        "--ablation",
        ablation,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(text.contains("best"), "{text}");
}

#[test]
fn train_then_evaluate_two_runs() {
    let dir = tempfile::tempdir().unwrap();
    train_into(dir.path(), "none");
    train_into(dir.path(), "all");
    let run = dir.path().join("none/seed-3");
    for f in ["curves.json", "best.json", "episodes.jsonl"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let curves: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(run.join("curves.json")).unwrap()).unwrap();
    assert_eq!(curves.len(), 2);
    let (id, _) = affectloop_cli::commands::load_policy(&run, &affectloop::Ontology::desk()).unwrap();
    assert_eq!(id, "seed-3");

    let a = run.join("episodes.jsonl");
    let b = dir.path().join("all/seed-3/episodes.jsonl");
    let report = dir.path().join("report.json");
    let (a_s, b_s) = (a.to_str().unwrap(), b.to_str().unwrap());
    let text = affectloop(&["evaluate", "--episodes", a_s, "--episodes", b_s, "--resamples", "500", "--report", report.to_str().unwrap()]);
    assert!(text.contains("paired bootstrap p ="), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("seed-3")).count(), 2, "{text}");

    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v[a_s]["episodes"], 40);
    assert_eq!(v[b_s]["episodes"], 40);
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "total_dialogues = 1000\neval_interval = 300\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_affectloop"))
        .args(["train", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("must divide"));
}

#[test]
fn corpus_stats_prints_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.json");
    let sys = |l: &str| format!(r#"{{"speaker": "system", "utterance": "ok", "annotations": ["{l}", "{l}", "neutral"]}}"#);
    let user = r#"{"speaker": "user", "utterance": "hi", "annotations": ["neutral", "neutral", "neutral"]}"#;
    let text = format!(
        r#"[{{"id": "a", "source": "multiwoz", "turns": [{user}, {}, {user}, {}, {user}, {}, {user}, {}]}}]"#,
        sys("neutral"),
        sys("apologetic"),
        sys("neutral"),
        sys("neutral")
    );
    std::fs::write(&input, text).unwrap();
    let out = affectloop(&["corpus-stats", "--input", input.to_str().unwrap(), "--by-turn"]);
    assert!(out.contains("Conduct"), "{out}");
    let json: serde_json::Value = serde_json::from_str(&out[out.find('{').unwrap()..]).unwrap();
    assert_eq!(json["count"], 4);
    assert_eq!(json["proportions"]["apologetic"], 0.25);
    assert_eq!(json["by_turn"].as_array().unwrap().len(), 2);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let train = affectloop_cli::commands::train_config(Some(&root.join("desk.toml")), false, None).unwrap();
    assert_eq!(train, affectloop::TrainConfig::default());
    let text = std::fs::read_to_string(root.join("trial.toml")).unwrap();
    let trial: affectloop::trial::TrialConfig = toml::from_str(&text).unwrap();
    assert_eq!(trial, affectloop::trial::TrialConfig::default());
}
