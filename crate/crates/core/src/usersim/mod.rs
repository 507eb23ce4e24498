//! Emotional agenda-based user simulator.

mod persona;
mod rules;
mod simulator;

pub use persona::{sample_persona, Categorical, Persona, PersonaConfig};
pub use rules::{step_down, step_up, Event, RuleTable, TransitionContext};
pub use simulator::{
    first_match, AgendaItem, AgendaKind, Appraisal, DomainProgress, UserReply, UserSimulator, UserState,
    RECENT_LEN,
};
