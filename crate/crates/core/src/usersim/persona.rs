use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::UserEmotion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    /// Emotion the user brings to each domain, e.g. excited about an attraction.
    pub dispositions: BTreeMap<String, UserEmotion>,
    /// Consecutive failures tolerated before escalation.
    pub patience: u32,
    /// Probability of surfacing the current emotion in text.
    pub expressiveness: f64,
}

impl Default for Persona {
    fn default() -> Self {
        Self {
            dispositions: BTreeMap::new(),
            patience: 3,
            expressiveness: 1.0,
        }
    }
}

impl Persona {
    pub fn validate(&self) -> Result<()> {
        if self.patience < 1 {
            return Err(Error::Config("persona patience must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.expressiveness) {
            return Err(Error::Config(format!(
                "persona expressiveness {} is outside [0, 1]",
                self.expressiveness
            )));
        }
        Ok(())
    }

    pub fn disposition(&self, domain: &str) -> UserEmotion {
        self.dispositions
            .get(domain)
            .copied()
            .unwrap_or(UserEmotion::Neutral)
    }
}

/// A categorical distribution written as `[[outcome, probability], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Categorical<T>(pub Vec<(T, f64)>);

impl<T: Clone> Categorical<T> {
    pub fn point(value: T) -> Self {
        Self(vec![(value, 1.0)])
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Config(format!("{what} distribution is empty")));
        }
        if self.0.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(format!("{what} distribution has a negative weight")));
        }
        let s: f64 = self.0.iter().map(|(_, p)| p).sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("{what} distribution sums to {s}")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (v, p) in &self.0 {
            acc += p;
            if u < acc {
                return v.clone();
            }
        }
        self.0.last().expect("validated non-empty").0.clone()
    }
}

/// Population the simulated users are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonaConfig {
    /// Disposition drawn independently per domain.
    pub disposition: Categorical<UserEmotion>,
    pub patience: Categorical<u32>,
    pub expressiveness: Categorical<f64>,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        Self {
            disposition: Categorical(vec![
                (UserEmotion::Neutral, 0.90),
                (UserEmotion::Excited, 0.06),
                (UserEmotion::Satisfied, 0.04),
            ]),
            patience: Categorical(vec![(2, 0.3), (3, 0.4), (4, 0.3)]),
            expressiveness: Categorical(vec![(1.0, 0.3), (0.8, 0.5), (0.5, 0.2)]),
        }
    }
}

impl PersonaConfig {
    pub fn validate(&self) -> Result<()> {
        self.disposition.validate("disposition")?;
        self.patience.validate("patience")?;
        self.expressiveness.validate("expressiveness")?;
        if self.patience.0.iter().any(|(v, p)| *v == 0 && *p > 0.0) {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.expressiveness.0.iter().any(|(v, _)| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("expressiveness values must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Draws a persona with a disposition for each of `domains`.
pub fn sample_persona<R: Rng + ?Sized>(
    config: &PersonaConfig,
    domains: &[&str],
    rng: &mut R,
) -> Result<Persona> {
    config.validate()?;
    let dispositions = domains
        .iter()
        .map(|d| ((*d).to_owned(), config.disposition.sample(rng)))
        .collect();
    Ok(Persona {
        dispositions,
        patience: config.patience.sample(rng),
        expressiveness: config.expressiveness.sample(rng),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_is_deterministic() {
        let cfg = PersonaConfig {
            disposition: Categorical::point(UserEmotion::Excited),
            patience: Categorical::point(2),
            expressiveness: Categorical::point(0.8),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = sample_persona(&cfg, &["attraction"], &mut rng).unwrap();
            assert_eq!(p.disposition("attraction"), UserEmotion::Excited);
            assert_eq!((p.patience, p.expressiveness), (2, 0.8));
        }
    }

    #[test]
    fn empirical_frequencies_match_config() {
        let cfg = PersonaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut disp: BTreeMap<UserEmotion, usize> = BTreeMap::new();
        let mut pat: BTreeMap<u32, usize> = BTreeMap::new();
        for _ in 0..n {
            let p = sample_persona(&cfg, &["hotel"], &mut rng).unwrap();
            *disp.entry(p.disposition("hotel")).or_default() += 1;
            *pat.entry(p.patience).or_default() += 1;
        }
        for (e, want) in &cfg.disposition.0 {
            let got = disp.get(e).copied().unwrap_or(0) as f64 / n as f64;
            assert!((got - want).abs() < 0.01, "{e}: {got} vs {want}");
        }
        for (v, want) in &cfg.patience.0 {
            let got = pat.get(v).copied().unwrap_or(0) as f64 / n as f64;
            assert!((got - want).abs() < 0.01);
        }
    }

    #[test]
    fn default_dispositions_are_mostly_neutral() {
        let cfg = PersonaConfig::default();
        let neutral: f64 = cfg
            .disposition
            .0
            .iter()
            .filter(|(e, _)| *e == UserEmotion::Neutral)
            .map(|(_, p)| p)
            .sum();
        assert!(neutral >= 0.5);
    }

    #[test]
    fn malformed_distribution_is_a_config_error() {
        let cfg = PersonaConfig { patience: Categorical(vec![(2, 0.5), (3, 0.4)]), ..PersonaConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_persona(&cfg, &["hotel"], &mut rng), Err(Error::Config(_))));
    }
}
