//! Formula syntax: variables, variable tuples and the formula tree.
//!
//! Every node of a [`Formula`] carries a [`NodeId`]. Ids are assigned in
//! preorder whenever a tree is built, so two syntactically identical
//! subtrees at different places of a formula always have different ids, and
//! anything keyed by node id (memo tables, game positions, final teams)
//! tells them apart.

mod parser;
mod pretty;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gq::{AtomDef, QuantifierDef};

pub use parser::{parse, ParseError, ParseErrorKind};
pub use pretty::pretty;

/// Preorder index of a subformula instance.
pub type NodeId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("invalid variable name {0:?}")]
    InvalidVariable(String),
    #[error("variable tuples must be nonempty")]
    EmptyTuple,
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

/// A first-order variable symbol.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VarName(String);

impl VarName {
    pub fn new(name: impl Into<String>) -> Result<Self, SyntaxError> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(VarName(name))
        } else {
            Err(SyntaxError::InvalidVariable(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl TryFrom<String> for VarName {
    type Error = SyntaxError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        VarName::new(value)
    }
}

impl From<VarName> for String {
    fn from(value: VarName) -> Self {
        value.0
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand used heavily in tests: panics on an invalid name.
pub fn var(name: &str) -> VarName {
    VarName::new(name).expect("valid variable name")
}

/// A nonempty tuple of variables. Repetitions are allowed; a tuple of
/// elements assigned to it must repeat values at the same positions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarTuple(Vec<VarName>);

impl VarTuple {
    pub fn new(vars: Vec<VarName>) -> Result<Self, SyntaxError> {
        if vars.is_empty() {
            return Err(SyntaxError::EmptyTuple);
        }
        Ok(VarTuple(vars))
    }

    pub fn single(v: VarName) -> Self {
        VarTuple(vec![v])
    }

    /// Panicking convenience constructor from names.
    pub fn of(names: &[&str]) -> Self {
        VarTuple::new(names.iter().map(|n| var(n)).collect()).expect("nonempty tuple")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vars(&self) -> &[VarName] {
        &self.0
    }

    pub fn var_set(&self) -> BTreeSet<VarName> {
        self.0.iter().cloned().collect()
    }

    /// For each position, the index of the first position holding the same
    /// variable.
    pub fn repetition_pattern(&self) -> Vec<usize> {
        (0..self.0.len())
            .map(|k| self.0.iter().position(|v| *v == self.0[k]).unwrap())
            .collect()
    }

    pub fn has_repetitions(&self) -> bool {
        self.repetition_pattern()
            .iter()
            .enumerate()
            .any(|(k, &first)| k != first)
    }

    /// Whether `values` repeats values exactly where this tuple repeats
    /// variables. Tuples of a different length never respect the pattern.
    pub fn respects<T: PartialEq>(&self, values: &[T]) -> bool {
        values.len() == self.0.len()
            && self
                .repetition_pattern()
                .iter()
                .enumerate()
                .all(|(k, &first)| values[k] == values[first])
    }
}

impl fmt::Display for VarTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// A subformula instance.
///
/// Equality (`==`) is structural: it ignores node ids and compares tree
/// shape, names and tuple contents. Quantifiers and atoms compare by name.
#[derive(Debug, Clone)]
pub struct Formula {
    id: NodeId,
    kind: FormulaKind,
}

#[derive(Debug, Clone)]
pub enum FormulaKind {
    Eq(VarName, VarName),
    Rel {
        name: String,
        args: VarTuple,
    },
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Quant {
        quant: Arc<QuantifierDef>,
        tuples: Vec<VarTuple>,
        subs: Vec<Formula>,
    },
    Atom {
        atom: Arc<AtomDef>,
        pos: Vec<VarTuple>,
        neg: Vec<VarTuple>,
    },
}

impl Formula {
    fn build(kind: FormulaKind) -> Formula {
        let mut f = Formula { id: 0, kind };
        let mut next = 0;
        f.renumber(&mut next);
        f
    }

    fn renumber(&mut self, next: &mut NodeId) {
        self.id = *next;
        *next += 1;
        match &mut self.kind {
            FormulaKind::Eq(..) | FormulaKind::Rel { .. } | FormulaKind::Atom { .. } => {}
            FormulaKind::Not(sub) => sub.renumber(next),
            FormulaKind::Or(l, r) => {
                l.renumber(next);
                r.renumber(next);
            }
            FormulaKind::Quant { subs, .. } => {
                for s in subs {
                    s.renumber(next);
                }
            }
        }
    }

    pub fn eq(left: VarName, right: VarName) -> Formula {
        Formula::build(FormulaKind::Eq(left, right))
    }

    pub fn rel(name: impl Into<String>, args: VarTuple) -> Formula {
        Formula::build(FormulaKind::Rel {
            name: name.into(),
            args,
        })
    }

    pub fn not(sub: Formula) -> Formula {
        Formula::build(FormulaKind::Not(Box::new(sub)))
    }

    pub fn or(left: Formula, right: Formula) -> Formula {
        Formula::build(FormulaKind::Or(Box::new(left), Box::new(right)))
    }

    /// Conjunction sugar: `~(~left | ~right)`.
    pub fn and(left: Formula, right: Formula) -> Formula {
        Formula::not(Formula::or(Formula::not(left), Formula::not(right)))
    }

    pub fn quant(
        quant: Arc<QuantifierDef>,
        tuples: Vec<VarTuple>,
        subs: Vec<Formula>,
    ) -> Result<Formula, SyntaxError> {
        let sig = quant.type_sig();
        if tuples.len() != sig.len() || subs.len() != sig.len() {
            return Err(SyntaxError::TypeMismatch(format!(
                "{} has type {}, got {} tuple(s) and {} subformula(s)",
                quant.name(),
                crate::gq::format_type(sig),
                tuples.len(),
                subs.len()
            )));
        }
        for (t, &arity) in tuples.iter().zip(sig) {
            if t.len() != arity {
                return Err(SyntaxError::TypeMismatch(format!(
                    "{} has type {}, tuple {t} has length {}",
                    quant.name(),
                    crate::gq::format_type(sig),
                    t.len()
                )));
            }
        }
        Ok(Formula::build(FormulaKind::Quant { quant, tuples, subs }))
    }

    /// Type-(1) quantification over a single variable.
    pub fn quant1(
        quant: Arc<QuantifierDef>,
        x: VarName,
        sub: Formula,
    ) -> Result<Formula, SyntaxError> {
        Formula::quant(quant, vec![VarTuple::single(x)], vec![sub])
    }

    pub fn atom(
        atom: Arc<AtomDef>,
        pos: Vec<VarTuple>,
        neg: Vec<VarTuple>,
    ) -> Result<Formula, SyntaxError> {
        let (pt, nt) = (atom.pos_type(), atom.neg_type());
        let check = |which: &str, want: &[usize], got: &[VarTuple]| {
            let ok = want.len() == got.len() && want.iter().zip(got).all(|(&w, t)| t.len() == w);
            if ok {
                Ok(())
            } else {
                Err(SyntaxError::TypeMismatch(format!(
                    "atom {} expects {which} arguments of type {}, got {}",
                    atom.name(),
                    crate::gq::format_type(want),
                    crate::gq::format_type(&got.iter().map(VarTuple::len).collect::<Vec<_>>())
                )))
            }
        };
        check("positive", pt, &pos)?;
        check("negative", nt, &neg)?;
        Ok(Formula::build(FormulaKind::Atom { atom, pos, neg }))
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn kind(&self) -> &FormulaKind {
        &self.kind
    }

    /// Immediate subformulas, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        match &self.kind {
            FormulaKind::Eq(..) | FormulaKind::Rel { .. } | FormulaKind::Atom { .. } => vec![],
            FormulaKind::Not(s) => vec![s],
            FormulaKind::Or(l, r) => vec![l, r],
            FormulaKind::Quant { subs, .. } => subs.iter().collect(),
        }
    }

    /// All subformula instances in preorder; position `i` holds node id `i`.
    pub fn preorder(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            out.push(f);
            let ch = f.children();
            stack.extend(ch.into_iter().rev());
        }
        out
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Nesting depth of connectives and quantifiers; atoms have depth 0.
    pub fn depth(&self) -> usize {
        self.children()
            .iter()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn has_generalized_atoms(&self) -> bool {
        self.preorder()
            .iter()
            .any(|f| matches!(f.kind, FormulaKind::Atom { .. }))
    }

    /// Quantifiers used anywhere in the formula.
    pub fn quantifiers(&self) -> Vec<&Arc<QuantifierDef>> {
        self.preorder()
            .into_iter()
            .filter_map(|f| match &f.kind {
                FormulaKind::Quant { quant, .. } => Some(quant),
                _ => None,
            })
            .collect()
    }

    /// A copy of this formula with the instance `target` replaced by
    /// `replacement`; ids are renumbered.
    pub fn replace_node(&self, target: NodeId, replacement: &Formula) -> Formula {
        fn go(f: &Formula, target: NodeId, rep: &Formula) -> FormulaKind {
            if f.id == target {
                return rep.kind.clone();
            }
            let sub = |s: &Formula| Formula {
                id: 0,
                kind: go(s, target, rep),
            };
            match &f.kind {
                FormulaKind::Not(s) => FormulaKind::Not(Box::new(sub(s))),
                FormulaKind::Or(l, r) => FormulaKind::Or(Box::new(sub(l)), Box::new(sub(r))),
                FormulaKind::Quant { quant, tuples, subs } => FormulaKind::Quant {
                    quant: quant.clone(),
                    tuples: tuples.clone(),
                    subs: subs.iter().map(sub).collect(),
                },
                other => other.clone(),
            }
        }
        Formula::build(go(self, target, replacement))
    }
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        use FormulaKind::*;
        match (&self.kind, &other.kind) {
            (Eq(a, b), Eq(c, d)) => a == c && b == d,
            (Rel { name: n1, args: a1 }, Rel { name: n2, args: a2 }) => n1 == n2 && a1 == a2,
            (Not(a), Not(b)) => a == b,
            (Or(a, b), Or(c, d)) => a == c && b == d,
            (
                Quant {
                    quant: q1,
                    tuples: t1,
                    subs: s1,
                },
                Quant {
                    quant: q2,
                    tuples: t2,
                    subs: s2,
                },
            ) => q1.name() == q2.name() && t1 == t2 && s1 == s2,
            (
                Atom {
                    atom: a1,
                    pos: p1,
                    neg: n1,
                },
                Atom {
                    atom: a2,
                    pos: p2,
                    neg: n2,
                },
            ) => a1.name() == a2.name() && p1 == p2 && n1 == n2,
            _ => false,
        }
    }
}

impl Eq for Formula {}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

/// Free variables: quantifier slot `j` binds the variables of tuple `j`
/// inside subformula `j` only; generalized atom arguments are free.
pub fn free_variables(phi: &Formula) -> BTreeSet<VarName> {
    match &phi.kind {
        FormulaKind::Eq(a, b) => [a.clone(), b.clone()].into_iter().collect(),
        FormulaKind::Rel { args, .. } => args.var_set(),
        FormulaKind::Not(s) => free_variables(s),
        FormulaKind::Or(l, r) => {
            let mut out = free_variables(l);
            out.extend(free_variables(r));
            out
        }
        FormulaKind::Quant { tuples, subs, .. } => {
            let mut out = BTreeSet::new();
            for (t, s) in tuples.iter().zip(subs) {
                let bound = t.var_set();
                out.extend(free_variables(s).into_iter().filter(|v| !bound.contains(v)));
            }
            out
        }
        FormulaKind::Atom { pos, neg, .. } => {
            pos.iter().chain(neg).flat_map(|t| t.vars().iter().cloned()).collect()
        }
    }
}

/// All variables occurring anywhere in the formula, bound or free.
pub fn all_variables(phi: &Formula) -> BTreeSet<VarName> {
    let mut out = BTreeSet::new();
    for f in phi.preorder() {
        match &f.kind {
            FormulaKind::Eq(a, b) => {
                out.insert(a.clone());
                out.insert(b.clone());
            }
            FormulaKind::Rel { args, .. } => out.extend(args.var_set()),
            FormulaKind::Quant { tuples, .. } => {
                for t in tuples {
                    out.extend(t.var_set());
                }
            }
            FormulaKind::Atom { pos, neg, .. } => {
                for t in pos.iter().chain(neg) {
                    out.extend(t.var_set());
                }
            }
            FormulaKind::Not(_) | FormulaKind::Or(..) => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gq::Registry;

    fn p(v: &str) -> Formula {
        Formula::rel("P", VarTuple::of(&[v]))
    }

    #[test]
    fn preorder_ids_distinguish_equal_instances() {
        let f = Formula::or(p("x"), p("x"));
        let ids: Vec<_> = f.preorder().iter().map(|n| n.id()).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        let ch = f.children();
        assert_eq!(ch[0], ch[1]);
        assert_ne!(ch[0].id(), ch[1].id());
    }

    #[test]
    fn free_variables_basic() {
        let reg = Registry::builtin();
        assert_eq!(free_variables(&p("x")), [var("x")].into_iter().collect());
        let ex = Formula::quant1(reg.quantifier("exists").unwrap(), var("x"), p("x")).unwrap();
        assert!(free_variables(&ex).is_empty());
        let at = Formula::atom(
            reg.atom("none").unwrap(),
            vec![VarTuple::of(&["z"])],
            vec![VarTuple::of(&["z"])],
        )
        .unwrap();
        let f = Formula::or(Formula::eq(var("x"), var("y")), at);
        assert_eq!(
            free_variables(&f),
            [var("x"), var("y"), var("z")].into_iter().collect()
        );
    }

    #[test]
    fn quantifier_binds_only_its_own_slot() {
        let reg = Registry::builtin();
        let most = reg.quantifier("most").unwrap();
        // x is bound in the first slot's subformula; in the second it is free.
        let f = Formula::quant(
            most,
            vec![VarTuple::of(&["x"]), VarTuple::of(&["y"])],
            vec![p("x"), p("x")],
        )
        .unwrap();
        assert_eq!(free_variables(&f), [var("x")].into_iter().collect());
    }

    #[test]
    fn repetition_pattern() {
        let t = VarTuple::of(&["x", "y", "x"]);
        assert_eq!(t.repetition_pattern(), vec![0, 1, 0]);
        assert!(t.respects(&[0, 1, 0]));
        assert!(t.respects(&[1, 1, 1]));
        assert!(!t.respects(&[0, 1, 1]));
        assert!(!t.respects(&[0, 1]));
    }

    #[test]
    fn quant_type_checked() {
        let reg = Registry::builtin();
        let err = Formula::quant(
            reg.quantifier("exists").unwrap(),
            vec![VarTuple::of(&["x", "y"])],
            vec![p("x")],
        );
        assert!(matches!(err, Err(SyntaxError::TypeMismatch(_))));
    }

    #[test]
    fn invalid_names_rejected() {
        assert!(VarName::new("").is_err());
        assert!(VarName::new("1x").is_err());
        assert!(VarName::new("x-1").is_err());
        assert!(VarName::new("x_1").is_ok());
    }
}
