//! The evaluation game between the agent 𝒜 and the interrogator ℐ.
//!
//! Everything in this file works on the public model types and is
//! independent of the strategy search in [`search`], so that
//! [`verify_strategy`] is a genuine second opinion.

mod search;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::gq::{self, GqError};
use crate::model::{self, Assignment, DoubleTeam, Elem, ModelError, Structure, Team};
use crate::semantics::EvalError;
use crate::syntax::{Formula, FormulaKind, NodeId, VarName};

pub use search::{find_uniform_survival_strategy, GameLimits};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("the game only supports quantifiers of type (1), found {0}")]
    NotTypeOne(String),
    #[error("no node {0} in the formula")]
    UnknownNode(NodeId),
    #[error("strategy undefined at {0}")]
    StrategyUndefined(Position),
    #[error("illegal choice at {0}")]
    IllegalChoice(Position),
    #[error("search inconclusive after {0} choice attempts")]
    Inconclusive(u64),
    #[error("invalid strategy JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quantifier(#[from] GqError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub assignment: Assignment,
    pub sign: Sign,
    pub node: NodeId,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, #{})", self.assignment, self.sign.symbol(), self.node)
    }
}

/// `F(s,+,ψ∨ψ′)`: `(⊤,⊤)`, `(⊤,⊥)` or `(⊥,⊤)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OrPick {
    Both,
    Left,
    Right,
}

impl OrPick {
    pub const ALL: [OrPick; 3] = [OrPick::Both, OrPick::Left, OrPick::Right];
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentChoice {
    Or(OrPick),
    Set(BTreeSet<Elem>),
}

/// A positional strategy of 𝒜.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Strategy {
    pub choices: BTreeMap<Position, AgentChoice>,
}

impl Strategy {
    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn to_json(&self, structure: &Structure) -> Value {
        Value::Array(
            self.choices
                .iter()
                .map(|(p, c)| {
                    let choice = match c {
                        AgentChoice::Or(OrPick::Both) => json!({"or": ["left", "right"]}),
                        AgentChoice::Or(OrPick::Left) => json!({"or": ["left"]}),
                        AgentChoice::Or(OrPick::Right) => json!({"or": ["right"]}),
                        AgentChoice::Set(s) => {
                            json!({"set": s.iter().map(|&e| structure.label(e)).collect::<Vec<_>>()})
                        }
                    };
                    json!({
                        "assignment": model::assignment_json(&p.assignment, structure),
                        "sign": p.sign.symbol(),
                        "node": p.node,
                        "choice": choice,
                    })
                })
                .collect(),
        )
    }

    pub fn from_json(value: &Value, structure: &Structure) -> Result<Strategy, GameError> {
        let bad = |what: &str| GameError::Json(what.to_string());
        let items = value.as_array().ok_or_else(|| bad("expected a list"))?;
        let mut choices = BTreeMap::new();
        for item in items {
            let mut pairs = Vec::new();
            let bindings = item["assignment"]
                .as_object()
                .ok_or_else(|| bad("assignment must be an object"))?;
            for (v, label) in bindings {
                let v = VarName::new(v.clone()).map_err(|e| bad(&e.to_string()))?;
                let label = label.as_str().ok_or_else(|| bad("labels are strings"))?;
                pairs.push((v, structure.elem(label)?));
            }
            let sign = match item["sign"].as_str() {
                Some("+") => Sign::Plus,
                Some("-") => Sign::Minus,
                _ => return Err(bad("sign must be \"+\" or \"-\"")),
            };
            let node = item["node"]
                .as_u64()
                .ok_or_else(|| bad("node must be an integer"))? as NodeId;
            let c = &item["choice"];
            let choice = if let Some(or) = c.get("or").and_then(Value::as_array) {
                let sides: Vec<&str> = or.iter().filter_map(Value::as_str).collect();
                match sides.as_slice() {
                    ["left", "right"] | ["right", "left"] => AgentChoice::Or(OrPick::Both),
                    ["left"] => AgentChoice::Or(OrPick::Left),
                    ["right"] => AgentChoice::Or(OrPick::Right),
                    _ => return Err(bad("or choice must be a nonempty subset of [left, right]")),
                }
            } else if let Some(set) = c.get("set").and_then(Value::as_array) {
                let mut s = BTreeSet::new();
                for l in set {
                    s.insert(structure.elem(l.as_str().ok_or_else(|| bad("labels are strings"))?)?);
                }
                AgentChoice::Set(s)
            } else {
                return Err(bad("choice must have \"or\" or \"set\""));
            };
            let pos = Position {
                assignment: Assignment::from_pairs(pairs),
                sign,
                node,
            };
            choices.insert(pos, choice);
        }
        Ok(Strategy { choices })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlayResult {
    Win,
    Survive,
    Lose,
}

/// Where ℐ may send the play next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    To(Position),
    /// ℐ picked an empty witness side: the play ends, 𝒜 survives.
    Survive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    Forced(Position),
    Interrogator(Vec<Step>),
    /// Each legal choice of 𝒜 with the interrogator's replies to it.
    Agent(Vec<(AgentChoice, Vec<Step>)>),
    Terminal(PlayResult),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayOutcome {
    /// `None` only for the unique play of the game with `U = V = ∅`.
    pub terminal: Option<Position>,
    pub result: PlayResult,
}

/// Positive and negative final-assignment teams per generalized-atom node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FinalTeams {
    pub per_atom: BTreeMap<NodeId, (Team, Team)>,
}

impl FinalTeams {
    pub fn to_json(&self, structure: &Structure) -> Value {
        let mut out = serde_json::Map::new();
        for (node, (s, t)) in &self.per_atom {
            out.insert(
                node.to_string(),
                json!({"S": s.to_json(structure), "T": t.to_json(structure)}),
            );
        }
        Value::Object(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayReport {
    /// One outcome per distinct way a play can end.
    pub outcomes: Vec<PlayOutcome>,
    pub final_teams: FinalTeams,
}

/// The game `G(𝔄,U,V,φ)` over the public types.
pub struct Game<'a> {
    structure: &'a Structure,
    phi: &'a Formula,
    nodes: Vec<&'a Formula>,
    domains: Vec<BTreeSet<VarName>>,
    vars: BTreeSet<VarName>,
    lift_cap: u64,
}

impl<'a> Game<'a> {
    /// `vars` is the common variable domain of the starting teams.
    pub fn new(
        structure: &'a Structure,
        phi: &'a Formula,
        vars: &BTreeSet<VarName>,
        lift_cap: u64,
    ) -> Result<Game<'a>, GameError> {
        check_type_one(phi)?;
        let nodes = phi.preorder();
        let mut domains = vec![BTreeSet::new(); nodes.len()];
        fn fill(f: &Formula, dom: BTreeSet<VarName>, out: &mut Vec<BTreeSet<VarName>>) {
            match f.kind() {
                FormulaKind::Not(s) => fill(s, dom.clone(), out),
                FormulaKind::Or(l, r) => {
                    fill(l, dom.clone(), out);
                    fill(r, dom.clone(), out);
                }
                FormulaKind::Quant { tuples, subs, .. } => {
                    for (t, s) in tuples.iter().zip(subs) {
                        let mut d = dom.clone();
                        d.extend(t.var_set());
                        fill(s, d, out);
                    }
                }
                _ => {}
            }
            out[f.id() as usize] = dom;
        }
        fill(phi, vars.clone(), &mut domains);
        Ok(Game {
            structure,
            phi,
            nodes,
            domains,
            vars: vars.clone(),
            lift_cap,
        })
    }

    fn node(&self, id: NodeId) -> Result<&'a Formula, GameError> {
        self.nodes
            .get(id as usize)
            .copied()
            .ok_or(GameError::UnknownNode(id))
    }

    fn witness_sets(&self, quant: &gq::QuantifierDef, x: &crate::syntax::VarTuple) -> Result<Vec<BTreeSet<Elem>>, GameError> {
        let members = gq::lift(quant, self.structure, std::slice::from_ref(x), self.lift_cap)?;
        Ok(members
            .into_iter()
            .map(|rels| rels[0].iter().map(|t| t[0]).collect())
            .collect())
    }

    /// The rule that applies at `pos`.
    pub fn transitions(&self, pos: &Position) -> Result<Move, GameError> {
        let f = self.node(pos.node)?;
        let at = |sign: Sign, node: &Formula, assignment: &Assignment| {
            Step::To(Position {
                assignment: assignment.clone(),
                sign,
                node: node.id(),
            })
        };
        let t = &pos.assignment;
        Ok(match f.kind() {
            FormulaKind::Eq(a, b) => {
                let truth = t.get(a) == t.get(b);
                Move::Terminal(classical_result(truth, pos.sign))
            }
            FormulaKind::Rel { name, args } => {
                let decl = self
                    .structure
                    .relation(name)
                    .ok_or_else(|| EvalError::UnknownRelation(name.clone()))?;
                let values: Vec<Elem> = args
                    .vars()
                    .iter()
                    .map(|v| t.get(v).expect("position interprets its free variables"))
                    .collect();
                Move::Terminal(classical_result(decl.tuples.contains(&values), pos.sign))
            }
            FormulaKind::Atom { .. } => Move::Terminal(PlayResult::Survive),
            FormulaKind::Not(sub) => Move::Forced(Position {
                assignment: t.clone(),
                sign: pos.sign.flip(),
                node: sub.id(),
            }),
            FormulaKind::Or(l, r) => match pos.sign {
                Sign::Minus => Move::Interrogator(vec![at(Sign::Minus, l, t), at(Sign::Minus, r, t)]),
                Sign::Plus => Move::Agent(vec![
                    (
                        AgentChoice::Or(OrPick::Both),
                        vec![at(Sign::Plus, l, t), at(Sign::Plus, r, t)],
                    ),
                    (
                        AgentChoice::Or(OrPick::Left),
                        vec![at(Sign::Plus, l, t), at(Sign::Minus, r, t)],
                    ),
                    (
                        AgentChoice::Or(OrPick::Right),
                        vec![at(Sign::Plus, r, t), at(Sign::Minus, l, t)],
                    ),
                ]),
            },
            FormulaKind::Quant { quant, tuples, subs } => {
                let x = &tuples[0];
                let q = match pos.sign {
                    Sign::Plus => quant.clone(),
                    Sign::Minus => gq::dual(quant),
                };
                let sets = self.witness_sets(&q, x)?;
                if sets.is_empty() {
                    return Ok(Move::Terminal(PlayResult::Lose));
                }
                let mut options = Vec::with_capacity(sets.len());
                for s in sets {
                    let mut steps = Vec::new();
                    let mut inside = false;
                    let mut outside = false;
                    for a in 0..self.structure.size() {
                        let sign = if s.contains(&a) {
                            inside = true;
                            Sign::Plus
                        } else {
                            outside = true;
                            Sign::Minus
                        };
                        steps.push(Step::To(Position {
                            assignment: t.extend(x, &[a])?,
                            sign,
                            node: subs[0].id(),
                        }));
                    }
                    if !inside || !outside {
                        steps.push(Step::Survive);
                    }
                    options.push((AgentChoice::Set(s), steps));
                }
                Move::Agent(options)
            }
        })
    }

    pub fn initial_positions(&self, dt: &DoubleTeam) -> Vec<Position> {
        let root = self.phi.id();
        dt.u()
            .iter()
            .map(|s| Position {
                assignment: s.clone(),
                sign: Sign::Plus,
                node: root,
            })
            .chain(dt.v().iter().map(|t| Position {
                assignment: t.clone(),
                sign: Sign::Minus,
                node: root,
            }))
            .collect()
    }

    /// Expand every interrogator alternative under `strat`.
    pub fn enumerate_plays(&self, dt: &DoubleTeam, strat: &Strategy) -> Result<PlayReport, GameError> {
        if *dt.vars() != self.vars {
            return Err(EvalError::DomainMismatch("teams and game disagree on variables".into()).into());
        }
        let mut finals: BTreeMap<NodeId, (Team, Team)> = BTreeMap::new();
        for f in &self.nodes {
            if let FormulaKind::Atom { .. } = f.kind() {
                let dom = &self.domains[f.id() as usize];
                finals.insert(f.id(), (Team::empty(dom.clone()), Team::empty(dom.clone())));
            }
        }
        let mut outcomes = BTreeSet::new();
        let start = self.initial_positions(dt);
        if start.is_empty() {
            return Ok(PlayReport {
                outcomes: vec![PlayOutcome {
                    terminal: None,
                    result: PlayResult::Survive,
                }],
                final_teams: FinalTeams { per_atom: finals },
            });
        }
        let mut seen = BTreeSet::new();
        let mut stack: Vec<Position> = start.into_iter().rev().collect();
        while let Some(pos) = stack.pop() {
            if !seen.insert(pos.clone()) {
                continue;
            }
            let follow = |steps: Vec<Step>, stack: &mut Vec<Position>, outcomes: &mut BTreeSet<(Position, PlayResult)>| {
                for step in steps.into_iter().rev() {
                    match step {
                        Step::To(p) => stack.push(p),
                        Step::Survive => {
                            outcomes.insert((pos.clone(), PlayResult::Survive));
                        }
                    }
                }
            };
            match self.transitions(&pos)? {
                Move::Terminal(result) => {
                    if let FormulaKind::Atom { .. } = self.node(pos.node)?.kind() {
                        let (s, t) = finals.get_mut(&pos.node).expect("atom node");
                        match pos.sign {
                            Sign::Plus => s.insert(pos.assignment.clone())?,
                            Sign::Minus => t.insert(pos.assignment.clone())?,
                        }
                    }
                    outcomes.insert((pos.clone(), result));
                }
                Move::Forced(next) => stack.push(next),
                Move::Interrogator(steps) => follow(steps, &mut stack, &mut outcomes),
                Move::Agent(options) => {
                    let chosen = strat
                        .choices
                        .get(&pos)
                        .ok_or_else(|| GameError::StrategyUndefined(pos.clone()))?;
                    let steps = options
                        .into_iter()
                        .find(|(c, _)| c == chosen)
                        .map(|(_, steps)| steps)
                        .ok_or_else(|| GameError::IllegalChoice(pos.clone()))?;
                    follow(steps, &mut stack, &mut outcomes);
                }
            }
        }
        Ok(PlayReport {
            outcomes: outcomes
                .into_iter()
                .map(|(p, result)| PlayOutcome {
                    terminal: Some(p),
                    result,
                })
                .collect(),
            final_teams: FinalTeams { per_atom: finals },
        })
    }

    /// Whether `strat` is a uniform survival strategy. A strategy that leaves
    /// a reachable choice open or makes an illegal choice is not one.
    pub fn verify_strategy(&self, dt: &DoubleTeam, strat: &Strategy) -> Result<bool, GameError> {
        let report = match self.enumerate_plays(dt, strat) {
            Ok(r) => r,
            Err(GameError::StrategyUndefined(_) | GameError::IllegalChoice(_)) => return Ok(false),
            Err(e) => return Err(e),
        };
        if report.outcomes.iter().any(|o| o.result == PlayResult::Lose) {
            return Ok(false);
        }
        for (node, (s, t)) in &report.final_teams.per_atom {
            let FormulaKind::Atom { atom, pos, neg } = self.node(*node)?.kind() else {
                unreachable!()
            };
            let pair = DoubleTeam::new(s.clone(), t.clone())?;
            if !gq::atom_holds(atom, self.structure, &pair, pos, neg)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn classical_result(truth: bool, sign: Sign) -> PlayResult {
    if truth == (sign == Sign::Plus) {
        PlayResult::Win
    } else {
        PlayResult::Lose
    }
}

pub(crate) fn check_type_one(phi: &Formula) -> Result<(), GameError> {
    match phi.quantifiers().into_iter().find(|q| !q.is_type_one()) {
        Some(q) => Err(GameError::NotTypeOne(q.to_string())),
        None => Ok(()),
    }
}

/// The rule at `pos` in a game on `phi`.
pub fn transitions(structure: &Structure, phi: &Formula, pos: &Position) -> Result<Move, GameError> {
    Game::new(structure, phi, &pos.assignment.domain(), gq::ISO_CHECK_CAP)?.transitions(pos)
}

pub fn enumerate_plays(
    structure: &Structure,
    dt: &DoubleTeam,
    phi: &Formula,
    strat: &Strategy,
) -> Result<PlayReport, GameError> {
    Game::new(structure, phi, dt.vars(), gq::ISO_CHECK_CAP)?.enumerate_plays(dt, strat)
}

pub fn verify_strategy(
    structure: &Structure,
    dt: &DoubleTeam,
    phi: &Formula,
    strat: &Strategy,
) -> Result<bool, GameError> {
    Game::new(structure, phi, dt.vars(), gq::ISO_CHECK_CAP)?.verify_strategy(dt, strat)
}
