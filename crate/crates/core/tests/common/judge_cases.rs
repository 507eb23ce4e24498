//! Twenty handcrafted dialogues for the outcome judge.

use std::collections::BTreeMap;

use affectloop::goal::Relaxation;
use affectloop::*;

pub fn turn(index: usize, user: Vec<SemanticAct>, sys: Vec<SemanticAct>) -> Turn {
    Turn {
        index,
        user_utterance: String::new(),
        user_acts: user,
        true_emotion: UserEmotion::Neutral,
        perceived_emotion: UserEmotion::Neutral,
        reward: None,
        system: Some(SystemTurn { acts: sys, conduct: Conduct::Neutral, utterance: String::new() }),
    }
}

pub fn dgoal(domain: &str, constraints: &[(&str, &str)], requests: &[&str], booking: bool) -> DomainGoal {
    DomainGoal {
        domain: domain.into(),
        constraints: constraints.iter().map(|(s, v)| (s.to_string(), v.to_string())).collect(),
        requests: requests.iter().map(|s| s.to_string()).collect(),
        booking: booking.then(|| BTreeMap::from([("people".into(), "2".into()), ("day".into(), "friday".into())])),
        unsatisfiable: false,
        fallback: None,
    }
}

pub fn name_matching<'a>(o: &'a Ontology, domain: &str, c: &[(&str, &str)]) -> &'a Entity {
    o.entities(domain).iter().find(|e| c.iter().all(|(s, v)| e.get(s) == Some(*v))).expect("some entity matches")
}

pub fn name_violating<'a>(o: &'a Ontology, domain: &str, c: &[(&str, &str)]) -> &'a Entity {
    o.entities(domain).iter().find(|e| !c.iter().all(|(s, v)| e.get(s) == Some(*v))).unwrap()
}

pub fn details(domain: &str) -> Vec<SemanticAct> {
    vec![SemanticAct::inform(domain, "people", "2"), SemanticAct::inform(domain, "day", "friday")]
}

pub struct Case {
    pub what: &'static str,
    pub goal: UserGoal,
    pub turns: Vec<Turn>,
    pub want: (bool, bool),
}

pub fn cases(o: &Ontology) -> Vec<Case> {
    let rc: &[(&str, &str)] = &[("food", "indian"), ("area", "north")];
    let good = name_matching(o, "restaurant", rc);
    let bad = name_violating(o, "restaurant", rc);
    let hc: &[(&str, &str)] = &[("area", "east")];
    let hotel = name_matching(o, "hotel", hc);
    let g = |gs: Vec<DomainGoal>| UserGoal { domains: gs };
    let rec = |e: &Entity, d: &str| SemanticAct::recommend(d, "name", e.name());
    let phone = |e: &Entity, d: &str| SemanticAct::inform(d, "phone", e.get("phone").unwrap());
    let rgoal = || dgoal("restaurant", rc, &["phone"], false);

    let mut unsat = dgoal("restaurant", &[("food", "chinese"), ("area", "north")], &["phone"], false);
    let relaxed: &[(&str, &str)] = &[("food", "indian"), ("area", "north")];
    let relaxed_pick = name_matching(o, "restaurant", relaxed);
    unsat.unsatisfiable = o.count_matching("restaurant", &unsat.constraints) == 0;
    unsat.fallback = Some(Relaxation { slot: "food".into(), value: "indian".into() });
    let chinese_elsewhere = name_matching(o, "restaurant", &[("food", "chinese")]);

    vec![
        Case {
            what: "matching offer with its phone",
            goal: g(vec![rgoal()]),
            turns: vec![turn(0, vec![], vec![rec(good, "restaurant"), phone(good, "restaurant")])],
            want: (true, true),
        },
        Case {
            what: "matching offer, phone never given",
            goal: g(vec![rgoal()]),
            turns: vec![turn(0, vec![], vec![rec(good, "restaurant")])],
            want: (false, true),
        },
        Case {
            what: "violating offer",
            goal: g(vec![rgoal()]),
            turns: vec![turn(0, vec![], vec![rec(bad, "restaurant"), phone(bad, "restaurant")])],
            want: (false, false),
        },
        Case { what: "nothing offered", goal: g(vec![rgoal()]), turns: vec![turn(0, vec![], vec![])], want: (false, false) },
        Case {
            what: "good then bad offer",
            goal: g(vec![rgoal()]),
            turns: vec![
                turn(0, vec![], vec![rec(good, "restaurant"), phone(good, "restaurant")]),
                turn(1, vec![], vec![rec(bad, "restaurant")]),
            ],
            want: (false, false),
        },
        Case {
            what: "unique phone identifies the entity",
            goal: g(vec![rgoal()]),
            turns: vec![turn(0, vec![], vec![phone(good, "restaurant")])],
            want: (true, true),
        },
        Case {
            what: "booked before details",
            goal: g(vec![dgoal("restaurant", rc, &[], true)]),
            turns: vec![turn(0, vec![], vec![SemanticAct::book("restaurant", good.name())])],
            want: (false, true),
        },
        Case {
            what: "booked after details",
            goal: g(vec![dgoal("restaurant", rc, &[], true)]),
            turns: vec![
                turn(0, vec![], vec![rec(good, "restaurant")]),
                turn(1, details("restaurant"), vec![SemanticAct::book("restaurant", good.name())]),
            ],
            want: (true, true),
        },
        Case {
            what: "booked the wrong place",
            goal: g(vec![dgoal("restaurant", rc, &[], true)]),
            turns: vec![turn(0, details("restaurant"), vec![SemanticAct::book("restaurant", bad.name())])],
            want: (false, false),
        },
        Case {
            what: "offer fits the fallback",
            goal: g(vec![unsat.clone()]),
            turns: vec![turn(0, vec![], vec![rec(relaxed_pick, "restaurant"), phone(relaxed_pick, "restaurant")])],
            want: (true, true),
        },
        Case {
            what: "offer ignores the fallback",
            goal: g(vec![unsat]),
            turns: vec![turn(0, vec![], vec![rec(chinese_elsewhere, "restaurant")])],
            want: (false, false),
        },
        Case {
            what: "second domain untouched",
            goal: g(vec![rgoal(), dgoal("hotel", hc, &[], false)]),
            turns: vec![turn(0, vec![], vec![rec(good, "restaurant"), phone(good, "restaurant")])],
            want: (false, false),
        },
        Case {
            what: "both domains served",
            goal: g(vec![rgoal(), dgoal("hotel", hc, &[], false)]),
            turns: vec![
                turn(0, vec![], vec![rec(good, "restaurant"), phone(good, "restaurant")]),
                turn(1, vec![], vec![rec(hotel, "hotel")]),
            ],
            want: (true, true),
        },
        Case {
            what: "offer in the wrong domain",
            goal: g(vec![rgoal()]),
            turns: vec![turn(0, vec![], vec![rec(hotel, "hotel"), phone(hotel, "hotel")])],
            want: (false, false),
        },
        Case {
            what: "shared value names nobody",
            goal: g(vec![rgoal()]),
            turns: vec![turn(0, vec![], vec![SemanticAct::inform("restaurant", "area", "north")])],
            want: (false, false),
        },
        Case {
            what: "phone of another place",
            goal: g(vec![rgoal()]),
            turns: vec![turn(0, vec![], vec![rec(good, "restaurant"), phone(bad, "restaurant")])],
            want: (false, false),
        },
        Case {
            what: "one of two requests",
            goal: g(vec![dgoal("restaurant", rc, &["phone", "postcode"], false)]),
            turns: vec![turn(0, vec![], vec![rec(good, "restaurant"), phone(good, "restaurant")])],
            want: (false, true),
        },
        Case {
            what: "name given through inform",
            goal: g(vec![dgoal("restaurant", rc, &[], false)]),
            turns: vec![turn(0, vec![], vec![SemanticAct::inform("restaurant", "name", good.name())])],
            want: (true, true),
        },
        Case {
            what: "only a no-offer",
            goal: g(vec![rgoal()]),
            turns: vec![turn(0, vec![], vec![SemanticAct::no_offer("restaurant")])],
            want: (false, false),
        },
        Case {
            what: "system asks but never offers",
            goal: g(vec![dgoal("hotel", hc, &["address"], true)]),
            turns: vec![
                turn(0, vec![SemanticAct::inform("hotel", "area", "east")], vec![SemanticAct::request("hotel", "pricerange")]),
                turn(1, details("hotel"), vec![SemanticAct::request("hotel", "stars")]),
            ],
            want: (false, false),
        },
    ]
}
