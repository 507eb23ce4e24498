use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use affectloop::corpus::{bc_examples, conduct_distribution, finalize, load_corpus, ConductReport, DEFAULT_TURN_BUCKETS};
use affectloop::eval::{render_table, MetricReport, report, sentiment_significance, SentimentSource};
use affectloop::policy::{Checkpoint, PolicyModel, Vocabulary};
use affectloop::trainer::{read_episodes, TrainOutput};
use affectloop::{Ablation, Modules, Ontology, TrainConfig};
use anyhow::{bail, Context, Result};

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults (desk or full scale), overlaid with a TOML file, then the ablation flags.
pub fn train_config(file: Option<&Path>, full_scale: bool, ablation: Option<&str>) -> Result<TrainConfig> {
    let base = if full_scale { TrainConfig::full_scale() } else { TrainConfig::default() };
    let mut config = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let overlay: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let mut value = toml::Value::try_from(&base)?;
            merge(&mut value, overlay);
            value.try_into().with_context(|| format!("invalid config in {}", path.display()))?
        }
        None => base,
    };
    if let Some(spec) = ablation {
        config.ablation = Ablation::disabling(spec)?;
    }
    config.validate()?;
    Ok(config)
}

pub fn curves_table(out: &TrainOutput) -> String {
    let mut s = format!("seed {} (config {})\n", out.seed, &out.config_hash[..12]);
    let _ = writeln!(s, "{:>9} {:>8} {:>10} {:>9} {:>8}", "Dialogues", "Success", "Sentiment", "Return", "Halluc.");
    for (i, c) in out.curves.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>9} {:>8.3} {:>10.3} {:>9.2} {:>8.3}{}",
            c.dialogues,
            c.success_rate,
            c.mean_sentiment,
            c.mean_return,
            c.hallucination_rate,
            if i == out.best { "  best" } else { "" }
        );
    }
    s
}

/// Trains every seed, writing each run under `out/seed-<n>`.
pub fn train(config: &TrainConfig, seeds: &[u64], out: &Path) -> Result<Vec<(PathBuf, TrainOutput)>> {
    let modules = Modules::desk();
    let mut runs = Vec::new();
    for &seed in seeds {
        let dir = out.join(format!("seed-{seed}"));
        let run = affectloop::train(config, seed, &modules, Some(&dir)).with_context(|| format!("training seed {seed}"))?;
        runs.push((dir, run));
    }
    Ok(runs)
}

/// Metric table over episode logs, plus a paired comparison when exactly two
/// are given. Reports are keyed by file path.
pub fn evaluate(files: &[PathBuf], resamples: usize) -> Result<(String, BTreeMap<String, MetricReport>)> {
    if files.is_empty() {
        bail!("no episode files given");
    }
    let ontology = Ontology::desk();
    let mut episodes = Vec::new();
    let mut reports = Vec::new();
    for f in files {
        let eps = read_episodes(f).with_context(|| format!("reading {}", f.display()))?;
        reports.push(report(&eps, &ontology, "")?);
        episodes.push(eps);
    }
    let names: Vec<String> = files.iter().map(|f| display_name(f)).collect();
    let rows: Vec<(&str, _)> = names.iter().map(String::as_str).zip(&reports).collect();
    let mut out = render_table(&rows);
    if let [a, b] = episodes.as_slice() {
        let sig = sentiment_significance(a, b, SentimentSource::Perceived, resamples, 0.05, 0)?;
        let _ = writeln!(
            out,
            "\nsentiment difference {:+.3}, paired bootstrap p = {:.4} ({} resamples)\nsuccess difference {:+.3}",
            sig.mean_difference,
            sig.p_value,
            resamples,
            reports[0].success_rate - reports[1].success_rate
        );
    }
    let keyed = files.iter().map(|f| f.display().to_string()).zip(reports).collect();
    Ok((out, keyed))
}

fn display_name(path: &Path) -> String {
    let parent = path.parent().and_then(|p| p.file_name()).map(|p| p.to_string_lossy().into_owned());
    match parent {
        Some(p) if !p.is_empty() => p,
        _ => path.display().to_string(),
    }
}

/// Finalizes labels and computes the system conduct distribution; optionally
/// writes behavior-cloning examples as JSON lines.
pub fn corpus_stats(input: &Path, by_turn: bool, export: Option<&Path>) -> Result<ConductReport> {
    let mut corpus = load_corpus(input).with_context(|| format!("loading {}", input.display()))?;
    finalize(&mut corpus);
    let r = conduct_distribution(&corpus, by_turn.then_some(&DEFAULT_TURN_BUCKETS[..]))?;
    if let Some(path) = export {
        let mut lines = String::new();
        for ex in bc_examples(&corpus, &Ontology::desk())? {
            lines += &serde_json::to_string(&ex)?;
            lines.push('\n');
        }
        std::fs::write(path, lines)?;
    }
    Ok(r)
}

/// Loads a policy from a checkpoint file or from a training directory's best checkpoint.
/// The returned id is the directory (or file stem) name.
pub fn load_policy(path: &Path, ontology: &Ontology) -> Result<(String, PolicyModel)> {
    let (file, id) = if path.is_dir() {
        let best: serde_json::Value = serde_json::from_slice(&std::fs::read(path.join("best.json")).context("reading best.json")?)?;
        let rel = best["checkpoint"].as_str().context("best.json has no checkpoint path")?;
        (path.join(rel), path.file_name())
    } else {
        (path.to_path_buf(), path.file_stem())
    };
    let id = id.map(|s| s.to_string_lossy().into_owned()).context("checkpoint path has no name")?;
    let model = Checkpoint::load(&file)
        .with_context(|| format!("loading {}", file.display()))?
        .restore(Vocabulary::from_ontology(ontology))?;
    Ok((id, model))
}
