use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Conduct, UserEmotion};

/// Appraisal class of the system's turn, judged against the user's goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    /// A pending need was advanced.
    Progress,
    /// An offered entity or value contradicts the user's constraints.
    Violation,
    /// A violation while earlier failures are still unresolved.
    RepeatOffense,
    /// "No such entity" when indeed nothing matches.
    NoOfferValid,
    /// "No such entity" when something does match.
    NoOfferInvalid,
    /// A booking was made or the last outstanding need was met.
    BookingSuccess,
    /// Nothing relevant to what the user asked.
    OffTopic,
}

impl Event {
    pub const ALL: [Event; 7] = [
        Event::Progress,
        Event::Violation,
        Event::RepeatOffense,
        Event::NoOfferValid,
        Event::NoOfferInvalid,
        Event::BookingSuccess,
        Event::OffTopic,
    ];

    pub fn is_failure(self) -> bool {
        matches!(
            self,
            Event::Violation | Event::RepeatOffense | Event::NoOfferInvalid | Event::OffTopic
        )
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Event::Progress | Event::BookingSuccess)
    }

    /// Failures plus a truthful "no such entity".
    pub fn is_bad_news(self) -> bool {
        self.is_failure() || self == Event::NoOfferValid
    }

    fn is_violation(self) -> bool {
        matches!(self, Event::Violation | Event::RepeatOffense)
    }
}

/// Everything besides the emotion, event and conduct that shapes a transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionContext {
    /// Turns elapsed, feeding the impatience ramp.
    pub turn: usize,
    /// Consecutive failures including the current event.
    pub failures: u32,
    pub patience: u32,
    pub expressiveness: f64,
}

/// Finite emotion transition mechanism: base distribution per (emotion,
/// event), impatience ramp, escalation to abuse, then conduct modifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTable {
    pub cells: BTreeMap<UserEmotion, BTreeMap<Event, BTreeMap<UserEmotion, f64>>>,
    /// Added to P(dissatisfied) on violations per elapsed turn.
    pub ramp_per_turn: f64,
    /// Probability that soothing conduct lifts a failure outcome one step.
    pub soothe_probability: f64,
    /// Probability that cheerful conduct lifts a non-negative outcome of a positive event.
    pub cheer_probability: f64,
    /// Probability that cheerful conduct on a failure, or soothing conduct on
    /// good news to a non-negative user, lowers the outcome.
    pub mismatch_probability: f64,
}

type Dist = BTreeMap<UserEmotion, f64>;

fn dist(pairs: &[(UserEmotion, f64)]) -> Dist {
    pairs.iter().copied().collect()
}

impl Default for RuleTable {
    fn default() -> Self {
        use Event::*;
        use UserEmotion::*;
        let neutral_row = vec![
            (Progress, dist(&[(Neutral, 0.5), (Satisfied, 0.5)])),
            (BookingSuccess, dist(&[(Satisfied, 1.0)])),
            (Violation, dist(&[(Dissatisfied, 0.6), (Neutral, 0.4)])),
            (RepeatOffense, dist(&[(Dissatisfied, 0.9), (Neutral, 0.1)])),
            (NoOfferValid, dist(&[(Fearful, 0.7), (Neutral, 0.3)])),
            (NoOfferInvalid, dist(&[(Dissatisfied, 0.6), (Neutral, 0.4)])),
            (OffTopic, dist(&[(Neutral, 0.7), (Dissatisfied, 0.2), (Apologetic, 0.1)])),
        ];
        let rows: Vec<(UserEmotion, Vec<(Event, Dist)>)> = vec![
            (Neutral, neutral_row.clone()),
            (Apologetic, neutral_row),
            (
                Satisfied,
                vec![
                    (Progress, dist(&[(Satisfied, 0.7), (Neutral, 0.3)])),
                    (BookingSuccess, dist(&[(Satisfied, 0.8), (Excited, 0.2)])),
                    (Violation, dist(&[(Dissatisfied, 0.6), (Neutral, 0.4)])),
                    (RepeatOffense, dist(&[(Dissatisfied, 0.9), (Neutral, 0.1)])),
                    (NoOfferValid, dist(&[(Fearful, 0.6), (Neutral, 0.4)])),
                    (NoOfferInvalid, dist(&[(Dissatisfied, 0.6), (Neutral, 0.4)])),
                    (OffTopic, dist(&[(Neutral, 0.6), (Satisfied, 0.3), (Dissatisfied, 0.1)])),
                ],
            ),
            (
                Excited,
                vec![
                    (Progress, dist(&[(Excited, 0.6), (Satisfied, 0.4)])),
                    (BookingSuccess, dist(&[(Excited, 0.5), (Satisfied, 0.5)])),
                    (Violation, dist(&[(Dissatisfied, 0.5), (Neutral, 0.5)])),
                    (RepeatOffense, dist(&[(Dissatisfied, 0.9), (Neutral, 0.1)])),
                    (NoOfferValid, dist(&[(Fearful, 0.6), (Neutral, 0.4)])),
                    (NoOfferInvalid, dist(&[(Dissatisfied, 0.5), (Neutral, 0.5)])),
                    (OffTopic, dist(&[(Excited, 0.5), (Neutral, 0.5)])),
                ],
            ),
            (
                Dissatisfied,
                vec![
                    (Progress, dist(&[(Dissatisfied, 0.5), (Neutral, 0.5)])),
                    (BookingSuccess, dist(&[(Satisfied, 0.4), (Neutral, 0.4), (Dissatisfied, 0.2)])),
                    (Violation, dist(&[(Dissatisfied, 1.0)])),
                    (RepeatOffense, dist(&[(Dissatisfied, 1.0)])),
                    (NoOfferValid, dist(&[(Fearful, 0.5), (Dissatisfied, 0.5)])),
                    (NoOfferInvalid, dist(&[(Dissatisfied, 1.0)])),
                    (OffTopic, dist(&[(Dissatisfied, 0.9), (Neutral, 0.1)])),
                ],
            ),
            (
                Fearful,
                vec![
                    (Progress, dist(&[(Neutral, 0.6), (Fearful, 0.2), (Satisfied, 0.2)])),
                    (BookingSuccess, dist(&[(Satisfied, 0.6), (Neutral, 0.4)])),
                    (Violation, dist(&[(Dissatisfied, 0.7), (Fearful, 0.3)])),
                    (RepeatOffense, dist(&[(Dissatisfied, 0.9), (Fearful, 0.1)])),
                    (NoOfferValid, dist(&[(Fearful, 1.0)])),
                    (NoOfferInvalid, dist(&[(Dissatisfied, 0.7), (Fearful, 0.3)])),
                    (OffTopic, dist(&[(Fearful, 0.7), (Dissatisfied, 0.3)])),
                ],
            ),
            (
                Abusive,
                vec![
                    (Progress, dist(&[(Dissatisfied, 0.5), (Neutral, 0.5)])),
                    (BookingSuccess, dist(&[(Neutral, 0.6), (Dissatisfied, 0.4)])),
                    (Violation, dist(&[(Abusive, 0.7), (Dissatisfied, 0.3)])),
                    (RepeatOffense, dist(&[(Abusive, 1.0)])),
                    (NoOfferValid, dist(&[(Abusive, 0.5), (Fearful, 0.5)])),
                    (NoOfferInvalid, dist(&[(Abusive, 0.7), (Dissatisfied, 0.3)])),
                    (OffTopic, dist(&[(Abusive, 0.6), (Dissatisfied, 0.4)])),
                ],
            ),
        ];
        Self {
            cells: rows
                .into_iter()
                .map(|(e, row)| (e, row.into_iter().collect()))
                .collect(),
            ramp_per_turn: 0.05,
            soothe_probability: 0.5,
            cheer_probability: 0.5,
            mismatch_probability: 0.5,
        }
    }
}

/// One step up the valence ladder; never lands on fearful.
pub fn step_up(e: UserEmotion) -> UserEmotion {
    use UserEmotion::*;
    match e {
        Abusive => Dissatisfied,
        Dissatisfied | Fearful => Neutral,
        Neutral | Apologetic => Satisfied,
        Satisfied | Excited => Excited,
    }
}

/// One step down, bottoming out at dissatisfied; never lands on fearful.
pub fn step_down(e: UserEmotion) -> UserEmotion {
    use UserEmotion::*;
    match e {
        Excited => Satisfied,
        Satisfied => Neutral,
        Neutral | Apologetic | Fearful | Dissatisfied => Dissatisfied,
        Abusive => Abusive,
    }
}

fn at_least(e: UserEmotion, floor: UserEmotion) -> UserEmotion {
    if e.valence_rank() < floor.valence_rank() {
        floor
    } else {
        e
    }
}

impl RuleTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let t: RuleTable = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for e in UserEmotion::ALL {
            let row = self
                .cells
                .get(&e)
                .ok_or_else(|| Error::Config(format!("rule table has no row for {e}")))?;
            for ev in Event::ALL {
                let cell = row
                    .get(&ev)
                    .ok_or_else(|| Error::Config(format!("rule table has no cell ({e}, {ev:?})")))?;
                if cell.values().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::Config(format!("cell ({e}, {ev:?}) has a probability outside [0, 1]")));
                }
                let s: f64 = cell.values().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("cell ({e}, {ev:?}) sums to {s}")));
                }
            }
        }
        for (name, p) in [
            ("ramp_per_turn", self.ramp_per_turn),
            ("soothe_probability", self.soothe_probability),
            ("cheer_probability", self.cheer_probability),
            ("mismatch_probability", self.mismatch_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Base distribution after the impatience ramp, in label order.
    pub fn base_distribution(&self, emotion: UserEmotion, event: Event, turn: usize) -> [f64; 7] {
        let mut p = [0.0; 7];
        if let Some(cell) = self.cells.get(&emotion).and_then(|r| r.get(&event)) {
            for (e, v) in cell {
                p[e.index()] = *v;
            }
        }
        if event.is_violation() && turn > 0 {
            let d = UserEmotion::Dissatisfied.index();
            let old = p[d];
            let new = (old + self.ramp_per_turn * turn as f64).min(1.0);
            if old < 1.0 {
                let scale = (1.0 - new) / (1.0 - old);
                for (i, v) in p.iter_mut().enumerate() {
                    if i != d {
                        *v *= scale;
                    }
                }
                p[d] = new;
            }
        }
        p
    }

    /// Next emotion from three uniform draws: `u[0]` picks the base outcome,
    /// `u[1]` decides escalation, `u[2]` decides the conduct modifier. All
    /// three are consumed whatever the branch, so outcomes under different
    /// conducts are coupled draw for draw.
    pub fn transition(
        &self,
        emotion: UserEmotion,
        event: Event,
        conduct: Conduct,
        ctx: &TransitionContext,
        u: [f64; 3],
    ) -> UserEmotion {
        let p = self.base_distribution(emotion, event, ctx.turn);
        let mut acc = 0.0;
        let mut next = emotion;
        for (i, v) in p.iter().enumerate() {
            acc += v;
            if u[0] < acc {
                next = UserEmotion::ALL[i];
                break;
            }
        }

        if event.is_failure() && ctx.failures >= ctx.patience && u[1] < ctx.expressiveness {
            next = UserEmotion::Abusive;
        }

        let hit = |q: f64| u[2] < q;
        if event.is_positive() {
            if conduct == Conduct::Apologetic && emotion.is_negative() {
                next = at_least(next, UserEmotion::Neutral);
            } else if conduct.is_cheerful() && !next.is_negative() && hit(self.cheer_probability) {
                if next != UserEmotion::Excited {
                    next = UserEmotion::Satisfied;
                }
            } else if conduct.is_soothing() && !emotion.is_negative() && next.is_positive() && hit(self.mismatch_probability) {
                next = UserEmotion::Neutral;
            }
        } else if event.is_bad_news() {
            if conduct.is_soothing() && next.is_negative() && hit(self.soothe_probability) {
                next = step_up(next);
            } else if conduct.is_cheerful() && hit(self.mismatch_probability) {
                next = step_down(next);
            }
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<[f64; 3]> {
        let steps = [0.0, 0.05, 0.15, 0.3, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95, 0.999];
        let mut out = Vec::new();
        for a in steps {
            for b in steps {
                for c in steps {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }

    fn ctx(turn: usize, failures: u32) -> TransitionContext {
        TransitionContext { turn, failures, patience: 3, expressiveness: 1.0 }
    }

    #[test]
    fn default_table_is_complete_and_normalized() {
        RuleTable::default().validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let t = RuleTable::default();
        let back: RuleTable = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn violation_from_neutral_can_dissatisfy() {
        let t = RuleTable::default();
        let e = t.transition(UserEmotion::Neutral, Event::Violation, Conduct::Neutral, &ctx(1, 1), [0.99, 0.9, 0.9]);
        assert_eq!(e, UserEmotion::Dissatisfied);
    }

    #[test]
    fn apologetic_repair_after_correction_is_neutral() {
        let t = RuleTable::default();
        for u in grid() {
            let e = t.transition(UserEmotion::Dissatisfied, Event::Progress, Conduct::Apologetic, &ctx(4, 0), u);
            assert_eq!(e, UserEmotion::Neutral, "draws {u:?}");
        }
    }

    #[test]
    fn patience_exhaustion_escalates_to_abuse() {
        let t = RuleTable::default();
        for u in grid() {
            let e = t.transition(UserEmotion::Dissatisfied, Event::OffTopic, Conduct::Neutral, &ctx(5, 3), u);
            assert_eq!(e, UserEmotion::Abusive);
        }
        let below = t.transition(UserEmotion::Neutral, Event::OffTopic, Conduct::Neutral, &ctx(1, 2), [0.0, 0.0, 0.0]);
        assert_ne!(below, UserEmotion::Abusive);
    }

    #[test]
    fn ramp_raises_dissatisfaction_five_points_per_turn() {
        let t = RuleTable::default();
        let d = UserEmotion::Dissatisfied.index();
        let n = UserEmotion::Neutral.index();
        for turn in 0..10 {
            let p = t.base_distribution(UserEmotion::Neutral, Event::Violation, turn);
            let want = (0.6 + 0.05 * turn as f64).min(1.0);
            assert!((p[d] - want).abs() < 1e-12);
            assert!((p[n] - (1.0 - want)).abs() < 1e-12);
        }
        let p = t.base_distribution(UserEmotion::Neutral, Event::Progress, 9);
        assert_eq!(p[UserEmotion::Satisfied.index()], 0.5);
    }

    /// Exhaustive over the finite table: apologetic conduct after a failure is
    /// never strictly worse than neutral conduct on the same draws.
    #[test]
    fn apology_is_valence_monotone() {
        let t = RuleTable::default();
        for e in UserEmotion::ALL {
            for ev in Event::ALL.into_iter().filter(|ev| ev.is_failure()) {
                for turn in [0, 3, 9] {
                    for failures in [1, 2, 3, 4] {
                        let c = ctx(turn, failures);
                        for u in grid() {
                            let a = t.transition(e, ev, Conduct::Apologetic, &c, u);
                            let n = t.transition(e, ev, Conduct::Neutral, &c, u);
                            assert!(a.valence_rank() >= n.valence_rank(), "{e} {ev:?} {u:?}: {a} < {n}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fear_only_follows_a_truthful_no_offer() {
        let t = RuleTable::default();
        for e in UserEmotion::ALL.into_iter().filter(|e| *e != UserEmotion::Fearful) {
            for ev in Event::ALL.into_iter().filter(|ev| *ev != Event::NoOfferValid) {
                for conduct in Conduct::ALL {
                    for u in grid() {
                        let next = t.transition(e, ev, conduct, &ctx(2, 1), u);
                        assert_ne!(next, UserEmotion::Fearful, "{e} {ev:?} {conduct}");
                    }
                }
            }
        }
    }

    #[test]
    fn transition_distribution_matches_cell_without_modifiers() {
        let t = RuleTable::default();
        let n = 20_000;
        for e in UserEmotion::ALL {
            for ev in Event::ALL {
                let want = t.base_distribution(e, ev, 0);
                let mut got = [0.0; 7];
                for i in 0..n {
                    let u0 = (i as f64 + 0.5) / n as f64;
                    let next = t.transition(e, ev, Conduct::Neutral, &ctx(0, 0), [u0, 0.99, 0.99]);
                    got[next.index()] += 1.0 / n as f64;
                }
                for k in 0..7 {
                    assert!((got[k] - want[k]).abs() < 1e-3, "{e} {ev:?} {k}");
                }
            }
        }
    }

    #[test]
    fn malformed_cell_is_rejected() {
        let mut t = RuleTable::default();
        t.cells
            .get_mut(&UserEmotion::Neutral)
            .unwrap()
            .insert(Event::Progress, dist(&[(UserEmotion::Neutral, 0.7)]));
        assert!(matches!(t.validate(), Err(Error::Config(_))));
    }
}
