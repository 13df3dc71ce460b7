//! Packed representation shared by the engines.
//!
//! An assignment over at most eight variables is a `u64`: byte `k` holds
//! `1 + value` of the variable in slot `k`, or `0` when unbound. Teams are
//! sorted, deduplicated vectors of packed assignments. A formula is compiled
//! once per structure into nodes indexed by node id.

use std::cell::OnceCell;
use std::collections::BTreeSet;
use std::sync::Arc;

use crate::gq::{self, AtomDef, GqError, QuantifierDef};
use crate::model::{Assignment, Elem, Relation, Structure, Team, Tuple};
use crate::semantics::EvalError;
use crate::syntax::{all_variables, Formula, FormulaKind, NodeId, VarName, VarTuple};

pub(crate) const MAX_SLOTS: usize = 8;
pub(crate) const MAX_ELEMS: usize = 254;

pub(crate) type Packed = u64;

#[inline]
pub(crate) fn value(s: Packed, slot: u8) -> Elem {
    (((s >> (8 * slot as u32)) & 0xff) as usize).wrapping_sub(1)
}

#[inline]
fn byte_mask(slot: u8) -> u64 {
    0xff << (8 * slot as u32)
}

pub(crate) fn normalize(team: &mut Vec<Packed>) {
    team.sort_unstable();
    team.dedup();
}

pub(crate) fn union(a: &[Packed], b: &[Packed]) -> Vec<Packed> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Members of `team` selected by `mask` (bit `k` is member `k`).
pub(crate) fn select(team: &[Packed], mask: u64) -> Vec<Packed> {
    team.iter()
        .enumerate()
        .filter(|(k, _)| mask >> k & 1 == 1)
        .map(|(_, &s)| s)
        .collect()
}

/// One slot of a quantifier application: the variable tuple, its
/// repetition-respecting candidate tuples and the precomputed extension.
pub(crate) struct Comp {
    pub tuple: VarTuple,
    pub cands: Vec<Tuple>,
    clear: u64,
    set: Vec<u64>,
    pub sub: NodeId,
}

impl Comp {
    /// `s[x̄/cands[k]]`
    #[inline]
    pub fn ext(&self, s: Packed, k: usize) -> Packed {
        (s & !self.clear) | self.set[k]
    }
}

/// `Q^𝔄` and `Q̄^𝔄` restricted to repetition-respecting tuples; each member
/// is one candidate bitmask per component, in lift order.
pub(crate) struct Lifts {
    pub pos: Vec<Vec<u64>>,
    pub neg: Vec<Vec<u64>>,
    pos_sorted: Vec<Vec<u64>>,
}

impl Lifts {
    pub fn accepts(&self, masks: &[u64]) -> bool {
        self.pos_sorted
            .binary_search_by(|m| m.as_slice().cmp(masks))
            .is_ok()
    }
}

pub(crate) enum KNode {
    Eq(u8, u8),
    Rel {
        table: Vec<bool>,
        slots: Vec<u8>,
    },
    Not(NodeId),
    Or(NodeId, NodeId),
    Quant {
        quant: Arc<QuantifierDef>,
        comps: Vec<Comp>,
        lifts: OnceCell<Result<Lifts, EvalError>>,
    },
    Atom {
        atom: Arc<AtomDef>,
        pos: Vec<Vec<u8>>,
        neg: Vec<Vec<u8>>,
    },
}

pub(crate) struct Kernel {
    pub d: usize,
    pub nodes: Vec<KNode>,
    pub slots: Vec<VarName>,
    lift_cap: u64,
}

impl Kernel {
    /// Compile `phi` over `structure`; `extra` are variables that teams may
    /// bind beyond those occurring in the formula.
    pub fn compile(
        structure: &Structure,
        phi: &Formula,
        extra: &BTreeSet<VarName>,
        lift_cap: u64,
    ) -> Result<Kernel, EvalError> {
        let mut vars = all_variables(phi);
        vars.extend(extra.iter().cloned());
        if vars.len() > MAX_SLOTS {
            return Err(EvalError::TooManyVariables(vars.len()));
        }
        let d = structure.size();
        if d > MAX_ELEMS {
            return Err(EvalError::CapExceeded(format!(
                "domain size {d} exceeds the packed limit {MAX_ELEMS}"
            )));
        }
        let slots: Vec<VarName> = vars.into_iter().collect();
        let slot = |v: &VarName| slots.binary_search(v).unwrap() as u8;
        let tuple_slots = |t: &VarTuple| t.vars().iter().map(slot).collect::<Vec<u8>>();
        let mut nodes = Vec::new();
        for f in phi.preorder() {
            debug_assert_eq!(f.id() as usize, nodes.len());
            let node = match f.kind() {
                FormulaKind::Eq(a, b) => KNode::Eq(slot(a), slot(b)),
                FormulaKind::Rel { name, args } => {
                    let decl = structure
                        .relation(name)
                        .ok_or_else(|| EvalError::UnknownRelation(name.clone()))?;
                    if decl.arity != args.len() {
                        return Err(EvalError::ArityMismatch(format!(
                            "{name} has arity {}, used with {}",
                            decl.arity,
                            args.len()
                        )));
                    }
                    let mut table = vec![false; d.pow(decl.arity as u32)];
                    for t in &decl.tuples {
                        table[tuple_index(t, d)] = true;
                    }
                    KNode::Rel {
                        table,
                        slots: tuple_slots(args),
                    }
                }
                FormulaKind::Not(sub) => KNode::Not(sub.id()),
                FormulaKind::Or(l, r) => KNode::Or(l.id(), r.id()),
                FormulaKind::Quant { quant, tuples, subs } => {
                    let comps = tuples
                        .iter()
                        .zip(subs)
                        .map(|(t, sub)| {
                            let ss = tuple_slots(t);
                            let cands = crate::model::respecting_tuples(t, d);
                            let clear = ss.iter().fold(0, |m, &s| m | byte_mask(s));
                            let set = cands
                                .iter()
                                .map(|c| {
                                    ss.iter().zip(c).fold(0u64, |m, (&s, &e)| {
                                        m | ((e as u64 + 1) << (8 * s as u32))
                                    })
                                })
                                .collect();
                            Comp {
                                tuple: t.clone(),
                                cands,
                                clear,
                                set,
                                sub: sub.id(),
                            }
                        })
                        .collect();
                    KNode::Quant {
                        quant: quant.clone(),
                        comps,
                        lifts: OnceCell::new(),
                    }
                }
                FormulaKind::Atom { atom, pos, neg } => KNode::Atom {
                    atom: atom.clone(),
                    pos: pos.iter().map(tuple_slots).collect(),
                    neg: neg.iter().map(tuple_slots).collect(),
                },
            };
            nodes.push(node);
        }
        Ok(Kernel {
            d,
            nodes,
            slots,
            lift_cap,
        })
    }

    pub fn slot_of(&self, v: &VarName) -> Option<u8> {
        self.slots.binary_search(v).ok().map(|k| k as u8)
    }

    pub fn pack(&self, s: &Assignment) -> Result<Packed, EvalError> {
        let mut p = 0u64;
        for (v, &e) in s.bindings() {
            let k = self
                .slot_of(v)
                .ok_or_else(|| EvalError::DomainMismatch(format!("variable {v} has no slot")))?;
            if e >= self.d {
                return Err(EvalError::DomainMismatch(format!(
                    "element {e} outside a domain of size {}",
                    self.d
                )));
            }
            p |= (e as u64 + 1) << (8 * k as u32);
        }
        Ok(p)
    }

    pub fn pack_team(&self, team: &Team) -> Result<Vec<Packed>, EvalError> {
        let mut out = team
            .iter()
            .map(|s| self.pack(s))
            .collect::<Result<Vec<_>, _>>()?;
        normalize(&mut out);
        Ok(out)
    }

    pub fn unpack(&self, s: Packed) -> Assignment {
        Assignment::from_pairs((0..self.slots.len() as u8).filter_map(|k| {
            let e = value(s, k);
            (e != usize::MAX).then(|| (self.slots[k as usize].clone(), e))
        }))
    }

    /// Classical truth of an equality or relation atom.
    #[inline]
    pub fn atomic(&self, node: NodeId, s: Packed) -> bool {
        match &self.nodes[node as usize] {
            KNode::Eq(a, b) => value(s, *a) == value(s, *b),
            KNode::Rel { table, slots } => {
                let mut idx = 0;
                for &k in slots.iter().rev() {
                    idx = idx * self.d + value(s, k);
                }
                table[idx]
            }
            _ => unreachable!("not a classical atom"),
        }
    }

    pub fn lifts(&self, node: NodeId) -> Result<&Lifts, EvalError> {
        let KNode::Quant {
            quant,
            comps,
            lifts,
        } = &self.nodes[node as usize]
        else {
            unreachable!("not a quantifier node")
        };
        lifts
            .get_or_init(|| {
                let patterns: Vec<VarTuple> = comps.iter().map(|c| c.tuple.clone()).collect();
                let to_masks = |members: Vec<Vec<Relation>>| -> Vec<Vec<u64>> {
                    members
                        .into_iter()
                        .map(|rels| {
                            rels.iter()
                                .zip(comps)
                                .map(|(r, c)| {
                                    c.cands.iter().enumerate().fold(0u64, |m, (k, t)| {
                                        if r.contains(t) {
                                            m | 1 << k
                                        } else {
                                            m
                                        }
                                    })
                                })
                                .collect()
                        })
                        .collect()
                };
                let pos = gq::lift_sized(quant, self.d, &patterns, self.lift_cap).map_err(cap_error)?;
                let neg = gq::lift_sized(&gq::dual(quant), self.d, &patterns, self.lift_cap)
                    .map_err(cap_error)?;
                let pos = to_masks(pos);
                let mut pos_sorted = pos.clone();
                pos_sorted.sort();
                Ok(Lifts {
                    pos,
                    neg: to_masks(neg),
                    pos_sorted,
                })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `Rel(team, ȳ)` for a slot tuple.
    pub fn project(&self, team: &[Packed], slots: &[u8]) -> Relation {
        team.iter()
            .map(|&s| slots.iter().map(|&k| value(s, k)).collect())
            .collect()
    }

    pub fn atom_holds(&self, node: NodeId, u: &[Packed], v: &[Packed]) -> bool {
        let KNode::Atom { atom, pos, neg } = &self.nodes[node as usize] else {
            unreachable!("not an atom node")
        };
        let rels: Vec<Relation> = pos
            .iter()
            .map(|ys| self.project(u, ys))
            .chain(neg.iter().map(|ys| self.project(v, ys)))
            .collect();
        atom.base().accepts(self.d, &rels)
    }

    /// Classical satisfaction, with the witness-set clause for quantifiers.
    pub fn fo(&self, node: NodeId, s: Packed) -> Result<bool, EvalError> {
        match &self.nodes[node as usize] {
            KNode::Eq(..) | KNode::Rel { .. } => Ok(self.atomic(node, s)),
            KNode::Not(c) => Ok(!self.fo(*c, s)?),
            KNode::Or(l, r) => Ok(self.fo(*l, s)? || self.fo(*r, s)?),
            KNode::Quant { comps, .. } => {
                let mut masks = Vec::with_capacity(comps.len());
                for c in comps {
                    let mut m = 0u64;
                    for k in 0..c.cands.len() {
                        if self.fo(c.sub, c.ext(s, k))? {
                            m |= 1 << k;
                        }
                    }
                    masks.push(m);
                }
                Ok(self.lifts(node)?.accepts(&masks))
            }
            KNode::Atom { .. } => Err(EvalError::GeneralizedAtom),
        }
    }
}

fn cap_error(e: GqError) -> EvalError {
    match e {
        GqError::EnumerationCap { .. } => EvalError::CapExceeded(e.to_string()),
        other => other.into(),
    }
}

/// Little-endian mixed-radix index of a tuple.
fn tuple_index(t: &[Elem], d: usize) -> usize {
    t.iter().rev().fold(0, |idx, &e| idx * d + e)
}
