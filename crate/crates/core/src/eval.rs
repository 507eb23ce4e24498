//! Interactive and corpus metrics: success, sentiment, hallucination,
//! macro-F1 and paired significance testing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::episode::{judge_outcome, EpisodeRecord, Verdict};
use crate::error::{Error, Result};
use crate::labels::UserEmotion;
use crate::nlg::unlicensed_values;
use crate::ontology::Ontology;

/// Turn-level polarity: positive +1, neutral and apologetic 0, negative −1.
pub fn sentiment_of(e: UserEmotion) -> f64 {
    match e {
        UserEmotion::Satisfied | UserEmotion::Excited => 1.0,
        UserEmotion::Neutral | UserEmotion::Apologetic => 0.0,
        UserEmotion::Dissatisfied | UserEmotion::Abusive | UserEmotion::Fearful => -1.0,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentSource {
    /// What the recognizer reported.
    #[default]
    Perceived,
    /// What the simulated user actually felt.
    True,
}

fn emotion(t: &crate::episode::Turn, source: SentimentSource) -> UserEmotion {
    match source {
        SentimentSource::Perceived => t.perceived_emotion,
        SentimentSource::True => t.true_emotion,
    }
}

/// Mean sentiment over all user turns of all episodes.
pub fn mean_sentiment(episodes: &[EpisodeRecord], source: SentimentSource) -> Result<f64> {
    let (sum, n) = episodes
        .iter()
        .flat_map(|e| &e.turns)
        .fold((0.0, 0usize), |(s, n), t| (s + sentiment_of(emotion(t, source)), n + 1));
    if n == 0 {
        return Err(Error::UndefinedMetric("mean sentiment over zero turns".into()));
    }
    Ok(sum / n as f64)
}

/// Mean sentiment of one dialogue's user turns.
pub fn dialogue_sentiment(episode: &EpisodeRecord, source: SentimentSource) -> Option<f64> {
    if episode.turns.is_empty() {
        return None;
    }
    let s: f64 = episode.turns.iter().map(|t| sentiment_of(emotion(t, source))).sum();
    Some(s / episode.turns.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnSentiment {
    pub turn: usize,
    pub mean: f64,
    pub count: usize,
}

/// Mean sentiment per turn index; indices no episode reaches are omitted.
pub fn sentiment_by_turn(episodes: &[EpisodeRecord], source: SentimentSource) -> Vec<TurnSentiment> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for ep in episodes {
        for t in &ep.turns {
            let e = acc.entry(t.index).or_default();
            e.0 += sentiment_of(emotion(t, source));
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(turn, (s, count))| TurnSentiment { turn, mean: s / count as f64, count })
        .collect()
}

/// Mean sentiment of turns in the first and the final third of their dialogue.
/// Turn `i` of an `n`-turn dialogue sits at relative position `(i + 0.5) / n`.
pub fn sentiment_thirds(episodes: &[EpisodeRecord], source: SentimentSource) -> Result<(f64, f64)> {
    let (mut first, mut last, mut nf, mut nl) = (0.0, 0.0, 0usize, 0usize);
    for ep in episodes {
        let n = ep.turns.len() as f64;
        for (i, t) in ep.turns.iter().enumerate() {
            let pos = (i as f64 + 0.5) / n;
            let s = sentiment_of(emotion(t, source));
            if pos < 1.0 / 3.0 {
                first += s;
                nf += 1;
            } else if pos > 2.0 / 3.0 {
                last += s;
                nl += 1;
            }
        }
    }
    if nf == 0 || nl == 0 {
        return Err(Error::UndefinedMetric("no dialogue has turns in both outer thirds".into()));
    }
    Ok((first / nf as f64, last / nl as f64))
}

/// A system turn quoting values its acts do not license.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinatedTurn {
    pub episode: usize,
    pub turn: usize,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinationReport {
    pub rate: f64,
    pub system_turns: usize,
    pub offending: Vec<HallucinatedTurn>,
}

/// Share of system turns that mention an unlicensed ontology value.
pub fn hallucination_rate(episodes: &[EpisodeRecord], ontology: &Ontology) -> Result<HallucinationReport> {
    let mut total = 0;
    let mut offending = Vec::new();
    for (ei, ep) in episodes.iter().enumerate() {
        for t in &ep.turns {
            let Some(sys) = &t.system else { continue };
            total += 1;
            let values = unlicensed_values(&sys.utterance, &sys.acts, ontology);
            if !values.is_empty() {
                offending.push(HallucinatedTurn { episode: ei, turn: t.index, values });
            }
        }
    }
    if total == 0 {
        return Err(Error::UndefinedMetric("hallucination rate over zero system turns".into()));
    }
    Ok(HallucinationReport { rate: offending.len() as f64 / total as f64, system_turns: total, offending })
}

/// Unweighted mean of per-label F1 over `labels`. With `exclude_absent`,
/// labels occurring in neither sequence are left out instead of scoring 0.
pub fn macro_f1<T: Ord + Clone>(predicted: &[T], gold: &[T], labels: &[T], exclude_absent: bool) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: gold.len() });
    }
    let mut scores = Vec::new();
    for l in labels.iter().collect::<BTreeSet<_>>() {
        let tp = predicted.iter().zip(gold).filter(|(p, g)| *p == l && *g == l).count() as f64;
        let fp = predicted.iter().zip(gold).filter(|(p, g)| *p == l && *g != l).count() as f64;
        let fn_ = predicted.iter().zip(gold).filter(|(p, g)| *p != l && *g == l).count() as f64;
        if tp + fp + fn_ == 0.0 {
            if !exclude_absent {
                scores.push(0.0);
            }
            continue;
        }
        scores.push(2.0 * tp / (2.0 * tp + fp + fn_));
    }
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("macro-F1 with no scored labels".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub const MIN_SIGNIFICANCE_SAMPLES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub method: String,
    pub mean_difference: f64,
    pub p_value: f64,
    pub significant: bool,
    pub resamples: usize,
}

/// Two-sided paired bootstrap test of mean(a − b) = 0.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, alpha: f64, seed: u64) -> Result<Significance> {
    let a: Vec<(f64, f64)> = a.iter().map(|x| (*x, 1.0)).collect();
    let b: Vec<(f64, f64)> = b.iter().map(|x| (*x, 1.0)).collect();
    paired_ratio_bootstrap(&a, &b, resamples, alpha, seed)
}

/// Paired bootstrap over units carrying `(sum, weight)`, testing
/// Σsum_a/Σw_a − Σsum_b/Σw_b = 0. Resampling whole units keeps each
/// dialogue's turns together while the statistic stays turn-weighted.
pub fn paired_ratio_bootstrap(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<Significance> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < MIN_SIGNIFICANCE_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_SIGNIFICANCE_SAMPLES, got: a.len() });
    }
    let stat = |idx: &mut dyn Iterator<Item = usize>| {
        let mut acc = [0.0; 4];
        for i in idx {
            acc[0] += a[i].0;
            acc[1] += a[i].1;
            acc[2] += b[i].0;
            acc[3] += b[i].1;
        }
        acc[0] / acc[1] - acc[2] / acc[3]
    };
    let n = a.len();
    let observed = stat(&mut (0..n));
    if !observed.is_finite() {
        return Err(Error::UndefinedMetric("bootstrap statistic over zero weight".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..resamples {
        let d = stat(&mut (0..n).map(|_| rng.gen_range(0..n)));
        // A resample can draw only zero-weight units; it then counts as extreme.
        if !d.is_finite() || (d - observed).abs() >= observed.abs() - 1e-12 {
            extreme += 1;
        }
    }
    let p = (extreme + 1) as f64 / (resamples + 1) as f64;
    Ok(Significance {
        method: "paired bootstrap".into(),
        mean_difference: observed,
        p_value: p,
        significant: p < alpha,
        resamples,
    })
}

/// Turn-weighted sentiment comparison of two systems run on the same
/// episode seeds, paired by position.
pub fn sentiment_significance(
    a: &[EpisodeRecord],
    b: &[EpisodeRecord],
    source: SentimentSource,
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<Significance> {
    let units = |eps: &[EpisodeRecord]| -> Vec<(f64, f64)> {
        eps.iter()
            .map(|e| (e.turns.iter().map(|t| sentiment_of(emotion(t, source))).sum(), e.turns.len() as f64))
            .collect()
    };
    paired_ratio_bootstrap(&units(a), &units(b), resamples, alpha, seed)
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(xs: &[f64], level: f64, resamples: usize, seed: u64) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| xs[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let lo = ((1.0 - level) / 2.0 * resamples as f64).floor() as usize;
    let hi = (((1.0 + level) / 2.0 * resamples as f64).ceil() as usize).min(resamples) - 1;
    (means[lo], means[hi])
}

/// Success and inform recomputed from logged acts.
pub fn replay_verdicts(episodes: &[EpisodeRecord], ontology: &Ontology) -> Vec<Verdict> {
    episodes.iter().map(|e| judge_outcome(ontology, &e.goal, &e.turns)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub inform_rate: f64,
    pub mean_sentiment: f64,
    pub mean_true_sentiment: f64,
    pub mean_return: f64,
    pub mean_turns: f64,
    pub hallucination_rate: f64,
    pub sentiment_by_turn: Vec<TurnSentiment>,
    /// 95% percentile-bootstrap intervals keyed by metric name.
    pub intervals: BTreeMap<String, (f64, f64)>,
    pub config_hash: String,
}

/// Full report over non-aborted episodes.
pub fn report(episodes: &[EpisodeRecord], ontology: &Ontology, config_hash: &str) -> Result<MetricReport> {
    let eps: Vec<EpisodeRecord> = episodes.iter().filter(|e| !e.outcome.aborted).cloned().collect();
    if eps.is_empty() {
        return Err(Error::UndefinedMetric("report over zero completed episodes".into()));
    }
    let n = eps.len() as f64;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let success: Vec<f64> = eps.iter().map(|e| flag(e.outcome.success)).collect();
    let inform: Vec<f64> = eps.iter().map(|e| flag(e.outcome.inform)).collect();
    let returns: Vec<f64> = eps.iter().map(|e| e.outcome.episode_return).collect();
    let sentiments: Vec<f64> = eps
        .iter()
        .filter_map(|e| dialogue_sentiment(e, SentimentSource::Perceived))
        .collect();
    let mut intervals = BTreeMap::new();
    intervals.insert("success_rate".into(), bootstrap_ci(&success, 0.95, 2000, 1));
    intervals.insert("inform_rate".into(), bootstrap_ci(&inform, 0.95, 2000, 2));
    intervals.insert("mean_return".into(), bootstrap_ci(&returns, 0.95, 2000, 3));
    intervals.insert("dialogue_sentiment".into(), bootstrap_ci(&sentiments, 0.95, 2000, 4));
    Ok(MetricReport {
        episodes: eps.len(),
        success_rate: success.iter().sum::<f64>() / n,
        inform_rate: inform.iter().sum::<f64>() / n,
        mean_sentiment: mean_sentiment(&eps, SentimentSource::Perceived)?,
        mean_true_sentiment: mean_sentiment(&eps, SentimentSource::True)?,
        mean_return: returns.iter().sum::<f64>() / n,
        mean_turns: eps.iter().map(|e| e.turns.len() as f64).sum::<f64>() / n,
        hallucination_rate: hallucination_rate(&eps, ontology).map(|h| h.rate).unwrap_or(0.0),
        sentiment_by_turn: sentiment_by_turn(&eps, SentimentSource::Perceived),
        intervals,
        config_hash: config_hash.to_owned(),
    })
}

/// Text table with one row per system.
pub fn render_table(rows: &[(&str, &MetricReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>8} {:>10} {:>9} {:>8} {:>7}",
        "System", "Success", "Inform", "Sentiment", "Return", "Halluc.", "N"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>8.3} {:>8.3} {:>10.3} {:>9.2} {:>8.3} {:>7}",
            name, r.success_rate, r.inform_rate, r.mean_sentiment, r.mean_return, r.hallucination_rate, r.episodes
        );
    }
    out
}
