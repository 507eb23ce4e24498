//! Semantic acts exchanged between policy, generator, simulator and metrics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pseudo-domain for acts that are not tied to a task domain.
pub const GENERAL_DOMAIN: &str = "general";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intent {
    Inform,
    Request,
    Recommend,
    Book,
    NoOffer,
    ReqMore,
    Bye,
    Greet,
    Confirm,
}

impl Intent {
    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Inform => "inform",
            Intent::Request => "request",
            Intent::Recommend => "recommend",
            Intent::Book => "book",
            Intent::NoOffer => "nooffer",
            Intent::ReqMore => "reqmore",
            Intent::Bye => "bye",
            Intent::Greet => "greet",
            Intent::Confirm => "confirm",
        }
    }

    pub fn parse(s: &str) -> Option<Intent> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "inform" => Intent::Inform,
            "request" => Intent::Request,
            "recommend" => Intent::Recommend,
            "book" => Intent::Book,
            "nooffer" => Intent::NoOffer,
            "reqmore" => Intent::ReqMore,
            "bye" => Intent::Bye,
            "greet" => Intent::Greet,
            "confirm" => Intent::Confirm,
            _ => return None,
        })
    }

    /// Whether acts of this intent carry a slot.
    pub fn has_slot(self) -> bool {
        matches!(
            self,
            Intent::Inform | Intent::Recommend | Intent::Confirm | Intent::Request | Intent::Book
        )
    }

    /// Whether acts of this intent carry a value.
    pub fn has_value(self) -> bool {
        matches!(
            self,
            Intent::Inform | Intent::Recommend | Intent::Confirm | Intent::Book
        )
    }

    /// Intents whose values may legitimately surface in a system utterance.
    pub fn licenses_value(self) -> bool {
        self.has_value()
    }

    pub fn is_general(self) -> bool {
        matches!(self, Intent::ReqMore | Intent::Bye | Intent::Greet)
    }
}

/// An (intent, domain, slot, value) tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SemanticAct {
    pub intent: Intent,
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl SemanticAct {
    pub fn new(intent: Intent, domain: impl Into<String>) -> Self {
        Self {
            intent,
            domain: domain.into(),
            slot: None,
            value: None,
        }
    }

    pub fn inform(domain: &str, slot: &str, value: &str) -> Self {
        Self::with_value(Intent::Inform, domain, slot, value)
    }

    pub fn recommend(domain: &str, slot: &str, value: &str) -> Self {
        Self::with_value(Intent::Recommend, domain, slot, value)
    }

    pub fn request(domain: &str, slot: &str) -> Self {
        Self {
            intent: Intent::Request,
            domain: domain.to_owned(),
            slot: Some(slot.to_owned()),
            value: None,
        }
    }

    pub fn book(domain: &str, name: &str) -> Self {
        Self::with_value(Intent::Book, domain, "name", name)
    }

    pub fn no_offer(domain: &str) -> Self {
        Self::new(Intent::NoOffer, domain)
    }

    pub fn bye() -> Self {
        Self::new(Intent::Bye, GENERAL_DOMAIN)
    }

    pub fn with_value(intent: Intent, domain: &str, slot: &str, value: &str) -> Self {
        Self {
            intent,
            domain: domain.to_owned(),
            slot: Some(slot.to_owned()),
            value: Some(value.to_owned()),
        }
    }

    pub fn slot(&self) -> Option<&str> {
        self.slot.as_deref()
    }

    pub fn value(&self) -> Option<&str> {
        self.value.as_deref()
    }

    /// Checks the slot/value shape required by the intent.
    pub fn validate_shape(&self) -> Result<()> {
        let ok = match self.intent {
            Intent::Inform | Intent::Recommend | Intent::Confirm | Intent::Book => {
                self.slot.is_some() && self.value.is_some()
            }
            Intent::Request => self.slot.is_some() && self.value.is_none(),
            Intent::NoOffer | Intent::Bye | Intent::Greet | Intent::ReqMore => {
                self.slot.is_none() && self.value.is_none()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("malformed act {self}")))
        }
    }

    pub fn triple(&self) -> ActTriple {
        ActTriple {
            intent: self.intent,
            domain: self.domain.clone(),
            slot: self.slot.clone(),
        }
    }
}

impl fmt::Display for SemanticAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.domain, self.intent.as_str())?;
        if let Some(slot) = &self.slot {
            write!(f, "-{slot}")?;
        }
        if let Some(value) = &self.value {
            write!(f, "={value}")?;
        }
        Ok(())
    }
}

/// A value-free (intent, domain, slot) triple: the unit the policy decodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActTriple {
    pub intent: Intent,
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
}

impl ActTriple {
    pub fn new(intent: Intent, domain: &str, slot: Option<&str>) -> Self {
        Self {
            intent,
            domain: domain.to_owned(),
            slot: slot.map(str::to_owned),
        }
    }
}

impl fmt::Display for ActTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.domain, self.intent.as_str())?;
        if let Some(slot) = &self.slot {
            write!(f, "-{slot}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_rules_follow_intent() {
        assert!(SemanticAct::inform("restaurant", "food", "italian")
            .validate_shape()
            .is_ok());
        assert!(SemanticAct::request("restaurant", "phone").validate_shape().is_ok());
        assert!(SemanticAct::no_offer("hotel").validate_shape().is_ok());
        assert!(SemanticAct::bye().validate_shape().is_ok());

        let mut bad = SemanticAct::request("restaurant", "phone");
        bad.value = Some("123".into());
        assert!(bad.validate_shape().is_err());
        let mut bad = SemanticAct::no_offer("hotel");
        bad.slot = Some("area".into());
        assert!(bad.validate_shape().is_err());
    }

    #[test]
    fn display_is_dash_joined() {
        assert_eq!(
            SemanticAct::inform("restaurant", "phone", "01223").to_string(),
            "restaurant-inform-phone=01223"
        );
        assert_eq!(
            ActTriple::new(Intent::NoOffer, "hotel", None).to_string(),
            "hotel-nooffer"
        );
    }
}
