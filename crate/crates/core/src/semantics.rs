//! Double-team evaluation and the classical single-assignment evaluator.

use std::cell::{Cell, RefCell};
use std::collections::BTreeSet;

use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::gq::GqError;
use crate::kernel::{self, KNode, Kernel, Packed};
use crate::model::{Assignment, DoubleTeam, ModelError, Structure};
use crate::syntax::{free_variables, Formula, NodeId, VarName};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("free variables not interpreted by the team: {0:?}")]
    FreeVariables(Vec<String>),
    #[error("generalized atoms have no classical meaning")]
    GeneralizedAtom,
    #[error("{0} variables exceed the supported maximum of 8")]
    TooManyVariables(usize),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error(transparent)]
    Quantifier(#[from] GqError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvalConfig {
    pub max_domain: usize,
    pub max_team: usize,
    pub enumeration_cap: u64,
    pub memo: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_domain: 4,
            max_team: 6,
            enumeration_cap: 1 << 16,
            memo: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub nodes_visited: u64,
    pub witness_functions_tried: u64,
    pub memo_hits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub value: bool,
    pub stats: Stats,
}

/// Both sides of the flatness comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlatnessReport {
    pub team: bool,
    pub classical: bool,
    pub agree: bool,
}

/// A formula compiled against one structure. The memo table persists across
/// calls on the same evaluator; keys are `(node id, U, V)`.
pub struct Evaluator<'a> {
    structure: &'a Structure,
    phi: &'a Formula,
    vars: BTreeSet<VarName>,
    kernel: Kernel,
    cfg: EvalConfig,
    memo: RefCell<FxHashMap<Box<[u64]>, bool>>,
    stats: Cell<Stats>,
}

const MEMO_LIMIT: usize = 1 << 21;

impl<'a> Evaluator<'a> {
    /// `vars` is the variable domain of the teams that will be evaluated.
    pub fn new(
        structure: &'a Structure,
        phi: &'a Formula,
        vars: &BTreeSet<VarName>,
        cfg: EvalConfig,
    ) -> Result<Evaluator<'a>, EvalError> {
        if structure.size() > cfg.max_domain {
            return Err(EvalError::CapExceeded(format!(
                "domain size {} exceeds max_domain {}",
                structure.size(),
                cfg.max_domain
            )));
        }
        let unbound: Vec<String> = free_variables(phi)
            .difference(vars)
            .map(|v| v.to_string())
            .collect();
        if !unbound.is_empty() {
            return Err(EvalError::FreeVariables(unbound));
        }
        Ok(Evaluator {
            structure,
            phi,
            vars: vars.clone(),
            kernel: Kernel::compile(structure, phi, vars, cfg.enumeration_cap)?,
            cfg,
            memo: RefCell::default(),
            stats: Cell::default(),
        })
    }

    pub fn structure(&self) -> &Structure {
        self.structure
    }

    pub fn formula(&self) -> &Formula {
        self.phi
    }

    /// `𝔄,(U,V) ⊨ φ`.
    pub fn eval(&self, dt: &DoubleTeam) -> Result<Verdict, EvalError> {
        self.eval_at(self.phi.id(), dt)
    }

    /// Evaluate the subformula instance `node` of the compiled formula.
    pub fn eval_at(&self, node: NodeId, dt: &DoubleTeam) -> Result<Verdict, EvalError> {
        self.check_vars(dt.vars())?;
        let u = self.kernel.pack_team(dt.u())?;
        let v = self.kernel.pack_team(dt.v())?;
        self.stats.set(Stats::default());
        let value = self.sat(node, &u, &v)?;
        Ok(Verdict {
            value,
            stats: self.stats.get(),
        })
    }

    fn check_vars(&self, vars: &BTreeSet<VarName>) -> Result<(), EvalError> {
        if *vars != self.vars {
            return Err(EvalError::DomainMismatch(format!(
                "evaluator prepared for variables {:?}, got {:?}",
                self.vars, vars
            )));
        }
        Ok(())
    }

    pub fn vars(&self) -> &BTreeSet<VarName> {
        &self.vars
    }

    /// `𝔄,s ⊨_FO φ`.
    pub fn eval_fo(&self, s: &Assignment) -> Result<bool, EvalError> {
        if self.phi.has_generalized_atoms() {
            return Err(EvalError::GeneralizedAtom);
        }
        self.check_vars(&s.domain())?;
        self.kernel.fo(self.phi.id(), self.kernel.pack(s)?)
    }

    pub fn flatness_check(&self, dt: &DoubleTeam) -> Result<FlatnessReport, EvalError> {
        if self.phi.has_generalized_atoms() {
            return Err(EvalError::GeneralizedAtom);
        }
        let team = self.eval(dt)?.value;
        let mut classical = true;
        for s in dt.u().iter() {
            classical &= self.eval_fo(s)?;
        }
        for t in dt.v().iter() {
            classical &= !self.eval_fo(t)?;
        }
        Ok(FlatnessReport {
            team,
            classical,
            agree: team == classical,
        })
    }

    pub fn clear_memo(&self) {
        self.memo.borrow_mut().clear();
    }

    fn bump(&self, f: impl FnOnce(&mut Stats)) {
        let mut s = self.stats.get();
        f(&mut s);
        self.stats.set(s);
    }

    fn sat(&self, node: NodeId, u: &[Packed], v: &[Packed]) -> Result<bool, EvalError> {
        if u.len() > self.cfg.max_team || v.len() > self.cfg.max_team {
            return Err(EvalError::CapExceeded(format!(
                "team of size {} exceeds max_team {}",
                u.len().max(v.len()),
                self.cfg.max_team
            )));
        }
        self.bump(|s| s.nodes_visited += 1);
        let k = &self.kernel;
        match &k.nodes[node as usize] {
            KNode::Eq(..) | KNode::Rel { .. } => Ok(u.iter().all(|&s| k.atomic(node, s))
                && v.iter().all(|&t| !k.atomic(node, t))),
            KNode::Atom { .. } => Ok(k.atom_holds(node, u, v)),
            _ if !self.cfg.memo => self.compound(node, u, v),
            _ => {
                let mut key = Vec::with_capacity(2 + u.len() + v.len());
                key.push(node as u64 | (u.len() as u64) << 32);
                key.extend_from_slice(u);
                key.extend_from_slice(v);
                if let Some(&hit) = self.memo.borrow().get(key.as_slice()) {
                    self.bump(|s| s.memo_hits += 1);
                    return Ok(hit);
                }
                let value = self.compound(node, u, v)?;
                let mut memo = self.memo.borrow_mut();
                if memo.len() >= MEMO_LIMIT {
                    memo.clear();
                }
                memo.insert(key.into_boxed_slice(), value);
                Ok(value)
            }
        }
    }

    fn compound(&self, node: NodeId, u: &[Packed], v: &[Packed]) -> Result<bool, EvalError> {
        match &self.kernel.nodes[node as usize] {
            KNode::Not(c) => self.sat(*c, v, u),
            KNode::Or(l, r) => self.disjunction(*l, *r, u, v),
            KNode::Quant { comps, .. } => self.quantifier(node, comps, u, v),
            _ => unreachable!(),
        }
    }

    /// A split `h: U → 𝕍` is determined by the masks `m₁ = U[h₁]` and
    /// `m₂ = U[h₂]` with `m₁ ∪ m₂ = U`. The left disjunct sees
    /// `(U[m₁], V ∪ U∖m₁)`, the right one `(U[m₂], V ∪ U∖m₂)`; each side's
    /// verdict is cached by mask.
    fn disjunction(&self, l: NodeId, r: NodeId, u: &[Packed], v: &[Packed]) -> Result<bool, EvalError> {
        let n = u.len();
        let full: u64 = (1u64 << n) - 1;
        let side = |node: NodeId, m: u64| -> Result<bool, EvalError> {
            let pos = kernel::select(u, m);
            let neg = kernel::union(v, &kernel::select(u, full & !m));
            self.sat(node, &pos, &neg)
        };
        let mut right: Vec<Option<bool>> = vec![None; 1 << n];
        for m1 in (0..=full).rev() {
            self.bump(|s| s.witness_functions_tried += 1);
            if !side(l, m1)? {
                continue;
            }
            // m₂ ranges over supersets of U∖m₁: the complement plus any
            // subset of m₁, largest first
            let need = full & !m1;
            let mut extra = m1;
            loop {
                let m2 = need | extra;
                let ok = match right[m2 as usize] {
                    Some(b) => b,
                    None => {
                        let b = side(r, m2)?;
                        right[m2 as usize] = Some(b);
                        b
                    }
                };
                if ok {
                    debug_assert_eq!(m1 | m2, full, "split must cover U");
                    return Ok(true);
                }
                if extra == 0 {
                    break;
                }
                extra = (extra - 1) & m1;
            }
        }
        Ok(false)
    }

    /// Search `f: U → Q^𝔄` and `g: V → Q̄^𝔄` as an odometer over member
    /// choices, `f` before `g`, each in lift order.
    fn quantifier(
        &self,
        node: NodeId,
        comps: &[kernel::Comp],
        u: &[Packed],
        v: &[Packed],
    ) -> Result<bool, EvalError> {
        let lifts = self.kernel.lifts(node)?;
        if (!u.is_empty() && lifts.pos.is_empty()) || (!v.is_empty() && lifts.neg.is_empty()) {
            return Ok(false);
        }
        let work = (lifts.pos.len() as f64).powi(u.len() as i32)
            * (lifts.neg.len() as f64).powi(v.len() as i32);
        if work > self.cfg.enumeration_cap as f64 {
            return Err(EvalError::CapExceeded(format!(
                "{work} witness function pairs exceed enumeration_cap {}",
                self.cfg.enumeration_cap
            )));
        }
        let members: Vec<(Packed, &[Vec<u64>])> = u
            .iter()
            .map(|&s| (s, lifts.pos.as_slice()))
            .chain(v.iter().map(|&t| (t, lifts.neg.as_slice())))
            .collect();
        let mut choice = vec![0usize; members.len()];
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        loop {
            self.bump(|s| s.witness_functions_tried += 1);
            let mut all = true;
            for (i, c) in comps.iter().enumerate() {
                pos.clear();
                neg.clear();
                for (&(s, options), &j) in members.iter().zip(&choice) {
                    let mask = options[j][i];
                    for k in 0..c.cands.len() {
                        if mask >> k & 1 == 1 {
                            pos.push(c.ext(s, k));
                        } else {
                            neg.push(c.ext(s, k));
                        }
                    }
                }
                kernel::normalize(&mut pos);
                kernel::normalize(&mut neg);
                if !self.sat(c.sub, &pos, &neg)? {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(true);
            }
            // advance, last member fastest
            let mut i = members.len();
            loop {
                if i == 0 {
                    return Ok(false);
                }
                i -= 1;
                choice[i] += 1;
                if choice[i] < members[i].1.len() {
                    break;
                }
                choice[i] = 0;
            }
        }
    }
}

/// `𝔄,(U,V) ⊨ φ` with a fresh memo table.
pub fn eval(
    structure: &Structure,
    dt: &DoubleTeam,
    phi: &Formula,
    cfg: &EvalConfig,
) -> Result<Verdict, EvalError> {
    Evaluator::new(structure, phi, dt.vars(), *cfg)?.eval(dt)
}

/// Classical satisfaction `𝔄,s ⊨_FO φ`.
pub fn eval_fo(structure: &Structure, s: &Assignment, phi: &Formula) -> Result<bool, EvalError> {
    let cfg = EvalConfig {
        max_domain: usize::MAX,
        ..EvalConfig::default()
    };
    Evaluator::new(structure, phi, &s.domain(), cfg)?.eval_fo(s)
}

/// `𝔄 ⊨ φ` iff `𝔄,({∅},∅) ⊨ φ`.
pub fn sentence_true(structure: &Structure, phi: &Formula, cfg: &EvalConfig) -> Result<bool, EvalError> {
    Ok(eval(structure, &DoubleTeam::sentence(), phi, cfg)?.value)
}

pub fn flatness_check(
    structure: &Structure,
    dt: &DoubleTeam,
    phi: &Formula,
    cfg: &EvalConfig,
) -> Result<FlatnessReport, EvalError> {
    Evaluator::new(structure, phi, dt.vars(), *cfg)?.flatness_check(dt)
}
