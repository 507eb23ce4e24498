use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::acts::{ActTriple, Intent, GENERAL_DOMAIN};
use crate::labels::Conduct;
use crate::ontology::{Ontology, NAME_SLOT};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    Act(ActTriple),
    Stop,
    Conduct(Conduct),
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Token::Act(t) => write!(f, "{t}"),
            Token::Stop => f.write_str("<stop>"),
            Token::Conduct(c) => write!(f, "<{c}>"),
        }
    }
}

/// Decoder output vocabulary: act triples, then STOP, then the five conducts.
/// Index `len()` is the input-only start symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    index: HashMap<ActTriple, usize>,
    n_acts: usize,
}

impl Vocabulary {
    pub fn from_acts(acts: Vec<ActTriple>) -> Self {
        let n_acts = acts.len();
        let index = acts.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let mut tokens: Vec<Token> = acts.into_iter().map(Token::Act).collect();
        tokens.push(Token::Stop);
        tokens.extend(Conduct::ALL.iter().map(|c| Token::Conduct(*c)));
        Self { tokens, index, n_acts }
    }

    /// Every act the system may emit under `ontology`.
    pub fn from_ontology(ontology: &Ontology) -> Self {
        let mut acts = Vec::new();
        for d in &ontology.domains {
            let name = d.name.as_str();
            for s in &d.requestable {
                acts.push(ActTriple::new(Intent::Inform, name, Some(s)));
            }
            for s in d.constraint_slots().chain(d.book_slots.keys().map(String::as_str)) {
                acts.push(ActTriple::new(Intent::Request, name, Some(s)));
            }
            acts.push(ActTriple::new(Intent::Recommend, name, Some(NAME_SLOT)));
            if d.bookable {
                acts.push(ActTriple::new(Intent::Book, name, Some(NAME_SLOT)));
            }
            acts.push(ActTriple::new(Intent::NoOffer, name, None));
            for s in d.constraint_slots() {
                acts.push(ActTriple::new(Intent::Confirm, name, Some(s)));
            }
        }
        for i in [Intent::ReqMore, Intent::Bye, Intent::Greet] {
            acts.push(ActTriple::new(i, GENERAL_DOMAIN, None));
        }
        Self::from_acts(acts)
    }

    /// Output tokens, including STOP and conducts.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_acts(&self) -> usize {
        self.n_acts
    }

    pub fn stop(&self) -> usize {
        self.n_acts
    }

    pub fn bos(&self) -> usize {
        self.tokens.len()
    }

    pub fn conduct_token(&self, c: Conduct) -> usize {
        self.n_acts + 1 + c.index()
    }

    pub fn token(&self, i: usize) -> &Token {
        &self.tokens[i]
    }

    pub fn act(&self, i: usize) -> Option<&ActTriple> {
        match self.tokens.get(i) {
            Some(Token::Act(a)) => Some(a),
            _ => None,
        }
    }

    pub fn act_index(&self, triple: &ActTriple) -> Option<usize> {
        self.index.get(triple).copied()
    }

    pub fn names(&self) -> Vec<String> {
        self.tokens.iter().map(Token::to_string).collect()
    }
}
