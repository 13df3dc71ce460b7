//! Generalized quantifiers and generalized atoms.
//!
//! A quantifier of type `(i₁,...,iₙ)` is given by a membership test on
//! `(domain size, B₁, ..., Bₙ)` with `Bⱼ ⊆ A^{iⱼ}`. Elements are the dense
//! indices of a structure, so an extensional table written over the
//! canonical domain `{0..k-1}` is transported to any size-`k` structure by
//! its index order. Isomorphism closure (checked by [`check_iso_closure`])
//! makes that choice of bijection irrelevant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::model::{self, DoubleTeam, Elem, ModelError, Relation, Structure, Tuple};
use crate::syntax::{is_identifier, VarTuple};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GqError {
    #[error("unknown quantifier {0:?}")]
    UnknownQuantifier(String),
    #[error("unknown generalized atom {0:?}")]
    UnknownAtom(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("element {0} outside the domain")]
    ElementOutOfRange(Elem),
    #[error("enumeration needs 2^{bits} candidates, cap is {cap}")]
    EnumerationCap { bits: usize, cap: u64 },
    #[error("invalid definition: {0}")]
    InvalidDefinition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn format_type(sig: &[usize]) -> String {
    let parts: Vec<String> = sig.iter().map(|i| i.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Builtin quantifiers. Each is a family over tuple arities: the
/// cardinality predicates take any single slot `(k)`, the comparisons take
/// two slots of equal arity `(k,k)`, and `none` takes any type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// `B ≠ ∅`
    Exists,
    /// `B = Aᵏ`
    Forall,
    /// `Q₀`, the empty class.
    Empty,
    /// The class of all structures of the type.
    Full,
    /// `|B| > |Aᵏ|/2`
    Majority,
    /// `|B|` even
    Even,
    AtLeast(usize),
    AtMost(usize),
    Exactly(usize),
    /// `|B₁ ∩ B₂| > |B₁ ∖ B₂|`
    Most,
    /// Accepts nothing, at any type.
    None,
    /// `|B₂| = 2·|B₁|`
    Double,
    /// `B₁ = B₂`
    Releq,
    /// The last coordinate of `B` is a function of the others.
    Dep,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Shape {
    Single,
    Pair,
    Any,
}

impl Builtin {
    pub const FIXED: [Builtin; 11] = [
        Builtin::Exists,
        Builtin::Forall,
        Builtin::Empty,
        Builtin::Full,
        Builtin::Majority,
        Builtin::Even,
        Builtin::Most,
        Builtin::None,
        Builtin::Double,
        Builtin::Releq,
        Builtin::Dep,
    ];

    pub fn name(self) -> String {
        match self {
            Builtin::Exists => "exists".into(),
            Builtin::Forall => "forall".into(),
            Builtin::Empty => "empty".into(),
            Builtin::Full => "full".into(),
            Builtin::Majority => "majority".into(),
            Builtin::Even => "even".into(),
            Builtin::AtLeast(k) => format!("at_least<{k}>"),
            Builtin::AtMost(k) => format!("at_most<{k}>"),
            Builtin::Exactly(k) => format!("exactly<{k}>"),
            Builtin::Most => "most".into(),
            Builtin::None => "none".into(),
            Builtin::Double => "double".into(),
            Builtin::Releq => "releq".into(),
            Builtin::Dep => "dep".into(),
        }
    }

    fn shape(self) -> Shape {
        match self {
            Builtin::Most | Builtin::Double | Builtin::Releq => Shape::Pair,
            Builtin::None => Shape::Any,
            _ => Shape::Single,
        }
    }

    /// The type used when no arities are given.
    pub fn default_type(self) -> Vec<usize> {
        match self.shape() {
            Shape::Single if self == Builtin::Dep => vec![2],
            Shape::Single => vec![1],
            Shape::Pair | Shape::Any => vec![1, 1],
        }
    }

    /// Whether the family has a member of type `sig`.
    pub fn admits(self, sig: &[usize]) -> bool {
        if sig.is_empty() || sig.contains(&0) {
            return false;
        }
        match self.shape() {
            Shape::Single => sig.len() == 1,
            Shape::Pair => sig.len() == 2 && sig[0] == sig[1],
            Shape::Any => true,
        }
    }

    /// Membership on well-typed input of type `sig`.
    fn accepts(self, sig: &[usize], domain_size: usize, rels: &[Relation]) -> bool {
        let card = |j: usize| rels[j].len();
        let cells = |j: usize| domain_size.pow(sig[j] as u32);
        match self {
            Builtin::Exists => card(0) > 0,
            Builtin::Forall => card(0) == cells(0),
            Builtin::Empty | Builtin::None => false,
            Builtin::Full => true,
            Builtin::Majority => 2 * card(0) > cells(0),
            Builtin::Even => card(0) % 2 == 0,
            Builtin::AtLeast(k) => card(0) >= k,
            Builtin::AtMost(k) => card(0) <= k,
            Builtin::Exactly(k) => card(0) == k,
            Builtin::Most => {
                let inside = rels[0].intersection(&rels[1]).count();
                inside > card(0) - inside
            }
            Builtin::Double => card(1) == 2 * card(0),
            Builtin::Releq => rels[0] == rels[1],
            Builtin::Dep => {
                let mut image: BTreeMap<&[Elem], Elem> = BTreeMap::new();
                rels[0].iter().all(|t| {
                    let (&last, rest) = t.split_last().expect("positive arity");
                    *image.entry(rest).or_insert(last) == last
                })
            }
        }
    }

    pub fn parse(name: &str) -> Option<Builtin> {
        if let Some(b) = Builtin::FIXED.into_iter().find(|b| b.name() == name) {
            return Some(b);
        }
        let (head, rest) = name.split_once('<')?;
        let k: usize = rest.strip_suffix('>')?.parse().ok()?;
        match head {
            "at_least" => Some(Builtin::AtLeast(k)),
            "at_most" => Some(Builtin::AtMost(k)),
            "exactly" => Some(Builtin::Exactly(k)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    BuiltinParametric,
    ExtensionalTable,
}

#[derive(Debug, Clone)]
enum Rule {
    Builtin(Builtin),
    /// Accepted relation tuples per canonical domain size. Sizes without an
    /// entry accept nothing.
    Table(BTreeMap<usize, BTreeSet<Vec<Relation>>>),
    Complement(Arc<QuantifierDef>),
}

/// A generalized quantifier: name, type signature and membership rule.
#[derive(Debug, Clone)]
pub struct QuantifierDef {
    name: String,
    type_sig: Vec<usize>,
    rule: Rule,
}

impl PartialEq for QuantifierDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.type_sig == other.type_sig
    }
}

impl fmt::Display for QuantifierDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.name, format_type(&self.type_sig))
    }
}

impl QuantifierDef {
    /// The builtin at its default type.
    pub fn builtin(b: Builtin) -> Arc<QuantifierDef> {
        QuantifierDef::builtin_at(b, &b.default_type()).expect("default type is admitted")
    }

    /// The member of the builtin family of type `sig`, if there is one.
    pub fn builtin_at(b: Builtin, sig: &[usize]) -> Option<Arc<QuantifierDef>> {
        b.admits(sig).then(|| {
            Arc::new(QuantifierDef {
                name: b.name(),
                type_sig: sig.to_vec(),
                rule: Rule::Builtin(b),
            })
        })
    }

    /// An extensional quantifier over canonical domains. Every table entry
    /// must be well typed for its size.
    pub fn table(
        name: impl Into<String>,
        type_sig: Vec<usize>,
        tables: BTreeMap<usize, BTreeSet<Vec<Relation>>>,
    ) -> Result<Arc<QuantifierDef>, GqError> {
        let name = name.into();
        if type_sig.is_empty() || type_sig.contains(&0) {
            return Err(GqError::InvalidDefinition(format!(
                "{name}: type must be a nonempty sequence of positive integers"
            )));
        }
        for (&size, entries) in &tables {
            if size == 0 {
                return Err(GqError::InvalidDefinition(format!(
                    "{name}: table for empty domain"
                )));
            }
            for rels in entries {
                check_typed(&type_sig, size, rels)?;
            }
        }
        Ok(Arc::new(QuantifierDef {
            name,
            type_sig,
            rule: Rule::Table(tables),
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn type_sig(&self) -> &[usize] {
        &self.type_sig
    }

    pub fn is_type_one(&self) -> bool {
        self.type_sig == [1]
    }

    pub fn source(&self) -> Source {
        match &self.rule {
            Rule::Builtin(_) => Source::BuiltinParametric,
            Rule::Table(_) => Source::ExtensionalTable,
            Rule::Complement(inner) => inner.source(),
        }
    }

    /// The largest domain size given a table, for extensional quantifiers.
    /// Sizes without a table accept nothing, so closure checking up to this
    /// size decides closure.
    pub fn max_table_size(&self) -> Option<usize> {
        match &self.rule {
            Rule::Builtin(_) => None,
            Rule::Table(t) => Some(t.keys().next_back().copied().unwrap_or(0)),
            Rule::Complement(inner) => inner.max_table_size(),
        }
    }

    /// Membership on well-typed input; callers guarantee typing.
    pub fn accepts(&self, domain_size: usize, rels: &[Relation]) -> bool {
        match &self.rule {
            Rule::Builtin(b) => b.accepts(&self.type_sig, domain_size, rels),
            Rule::Table(t) => t.get(&domain_size).is_some_and(|set| set.contains(rels)),
            Rule::Complement(inner) => !inner.accepts(domain_size, rels),
        }
    }

    /// `(A, B₁, ..., Bₙ) ∈ Q`, with the input checked against the type.
    pub fn member(&self, structure: &Structure, rels: &[Relation]) -> Result<bool, GqError> {
        check_typed(&self.type_sig, structure.size(), rels)?;
        Ok(self.accepts(structure.size(), rels))
    }
}

fn check_typed(type_sig: &[usize], size: usize, rels: &[Relation]) -> Result<(), GqError> {
    if rels.len() != type_sig.len() {
        return Err(GqError::ArityMismatch(format!(
            "type {} needs {} relation(s), got {}",
            format_type(type_sig),
            type_sig.len(),
            rels.len()
        )));
    }
    for (j, (r, &arity)) in rels.iter().zip(type_sig).enumerate() {
        for t in r {
            if t.len() != arity {
                return Err(GqError::ArityMismatch(format!(
                    "relation {} must have arity {arity}, found a tuple of length {}",
                    j + 1,
                    t.len()
                )));
            }
            if let Some(&e) = t.iter().find(|&&e| e >= size) {
                return Err(GqError::ElementOutOfRange(e));
            }
        }
    }
    Ok(())
}

/// `Q̄`: same type, pointwise negated membership. `dual(dual(Q))` is `Q`
/// itself.
pub fn dual(q: &Arc<QuantifierDef>) -> Arc<QuantifierDef> {
    if let Rule::Complement(inner) = &q.rule {
        return inner.clone();
    }
    Arc::new(QuantifierDef {
        name: format!("dual({})", q.name),
        type_sig: q.type_sig.clone(),
        rule: Rule::Complement(q.clone()),
    })
}

/// The members of `Q^𝔄` all of whose tuples respect the repetitions of the
/// corresponding variable tuple in `patterns`.
///
/// Candidates are the concatenation, slot by slot, of the
/// repetition-respecting tuples in lexicographic order; subsets are visited
/// in binary-counter order with candidate `k` on bit `k`.
pub fn lift(
    q: &QuantifierDef,
    structure: &Structure,
    patterns: &[VarTuple],
    cap: u64,
) -> Result<Vec<Vec<Relation>>, GqError> {
    lift_sized(q, structure.size(), patterns, cap)
}

pub(crate) fn lift_sized(
    q: &QuantifierDef,
    domain_size: usize,
    patterns: &[VarTuple],
    cap: u64,
) -> Result<Vec<Vec<Relation>>, GqError> {
    if patterns.len() != q.type_sig.len()
        || patterns.iter().zip(&q.type_sig).any(|(p, &i)| p.len() != i)
    {
        return Err(GqError::ArityMismatch(format!(
            "{} has type {}, patterns of type {}",
            q.name,
            format_type(&q.type_sig),
            format_type(&patterns.iter().map(VarTuple::len).collect::<Vec<_>>())
        )));
    }
    let slots: Vec<Vec<Tuple>> = patterns
        .iter()
        .map(|p| model::respecting_tuples(p, domain_size))
        .collect();
    let mut out = Vec::new();
    for_each_relation_tuple(&slots, cap, |rels| {
        if q.accepts(domain_size, rels) {
            out.push(rels.to_vec());
        }
    })?;
    Ok(out)
}

/// Calls `visit` on every tuple of relations `(B₁..Bₙ)` with
/// `Bⱼ ⊆ slots[j]`, in binary-counter order.
fn for_each_relation_tuple(
    slots: &[Vec<Tuple>],
    cap: u64,
    mut visit: impl FnMut(&[Relation]),
) -> Result<(), GqError> {
    let bits: usize = slots.iter().map(Vec::len).sum();
    if bits >= 63 || (1u64 << bits) > cap {
        return Err(GqError::EnumerationCap { bits, cap });
    }
    let owner: Vec<(usize, &Tuple)> = slots
        .iter()
        .enumerate()
        .flat_map(|(j, ts)| ts.iter().map(move |t| (j, t)))
        .collect();
    let mut rels = vec![Relation::new(); slots.len()];
    for mask in 0u64..(1u64 << bits) {
        for r in rels.iter_mut() {
            r.clear();
        }
        for (k, (j, t)) in owner.iter().enumerate() {
            if mask >> k & 1 == 1 {
                rels[*j].insert((*t).clone());
            }
        }
        visit(&rels);
    }
    Ok(())
}

/// A witnessed failure of isomorphism closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsoViolation {
    pub size: usize,
    /// Element `e` is mapped to `permutation[e]`.
    pub permutation: Vec<Elem>,
    pub relations: Vec<Relation>,
    pub image: Vec<Relation>,
    /// Membership of `relations`; the image got the opposite answer.
    pub accepted: bool,
}

/// Total work allowed for closure checking, counted in relation tuples.
pub const ISO_CHECK_CAP: u64 = 1 << 22;

/// Brute-force closure check: for every canonical domain of size at most
/// `max_size`, every permutation and every well-typed relation tuple,
/// membership must be preserved.
pub fn check_iso_closure(q: &QuantifierDef, max_size: usize) -> Result<Vec<IsoViolation>, GqError> {
    let mut violations = Vec::new();
    for size in 1..=max_size {
        let slots: Vec<Vec<Tuple>> = q
            .type_sig
            .iter()
            .map(|&arity| all_tuples(arity, size))
            .collect();
        let perms = permutations(size);
        for_each_relation_tuple(&slots, ISO_CHECK_CAP, |rels| {
            let accepted = q.accepts(size, rels);
            for perm in &perms {
                let image: Vec<Relation> = rels
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|t| t.iter().map(|&e| perm[e]).collect())
                            .collect()
                    })
                    .collect();
                if q.accepts(size, &image) != accepted {
                    violations.push(IsoViolation {
                        size,
                        permutation: perm.clone(),
                        relations: rels.to_vec(),
                        image,
                        accepted,
                    });
                }
            }
        })?;
    }
    Ok(violations)
}

fn all_tuples(arity: usize, size: usize) -> Vec<Tuple> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t: Tuple| {
                (0..size).map(move |e| {
                    let mut t = t.clone();
                    t.push(e);
                    t
                })
            })
            .collect();
    }
    out
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<Elem>> {
    fn go(prefix: &mut Vec<Elem>, used: &mut [bool], out: &mut Vec<Vec<Elem>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for e in 0..used.len() {
            if !used[e] {
                used[e] = true;
                prefix.push(e);
                go(prefix, used, out);
                prefix.pop();
                used[e] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// A generalized atom `A_{Q,n}`: the first `split` slots of the base
/// quantifier read the positive team, the rest read the negative team.
#[derive(Debug, Clone)]
pub struct AtomDef {
    name: String,
    base: Arc<QuantifierDef>,
    split: usize,
}

impl AtomDef {
    pub fn new(
        name: impl Into<String>,
        base: Arc<QuantifierDef>,
        split: usize,
    ) -> Result<Arc<AtomDef>, GqError> {
        let name = name.into();
        if split > base.type_sig.len() {
            return Err(GqError::InvalidDefinition(format!(
                "atom {name}: split {split} exceeds the {} slots of {}",
                base.type_sig.len(),
                base.name
            )));
        }
        Ok(Arc::new(AtomDef { name, base, split }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &Arc<QuantifierDef> {
        &self.base
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn pos_type(&self) -> &[usize] {
        &self.base.type_sig[..self.split]
    }

    pub fn neg_type(&self) -> &[usize] {
        &self.base.type_sig[self.split..]
    }
}

/// Whether `(Rel(U,ȳ₁),...,Rel(U,ȳₙ),Rel(V,ȳₙ₊₁),...,Rel(V,ȳₙ₊ₘ)) ∈ Q^𝔄`.
pub fn atom_holds(
    atom: &AtomDef,
    structure: &Structure,
    dt: &DoubleTeam,
    pos: &[VarTuple],
    neg: &[VarTuple],
) -> Result<bool, GqError> {
    let lens = |ts: &[VarTuple]| ts.iter().map(VarTuple::len).collect::<Vec<_>>();
    if lens(pos) != atom.pos_type() || lens(neg) != atom.neg_type() {
        return Err(GqError::ArityMismatch(format!(
            "atom {} has type ({}, {}), arguments have type ({}, {})",
            atom.name,
            format_type(atom.pos_type()),
            format_type(atom.neg_type()),
            format_type(&lens(pos)),
            format_type(&lens(neg))
        )));
    }
    let mut rels = Vec::with_capacity(pos.len() + neg.len());
    for ys in pos {
        rels.push(model::rel(dt.u(), ys)?);
    }
    for ys in neg {
        rels.push(model::rel(dt.v(), ys)?);
    }
    atom.base.member(structure, &rels)
}

/// Builtin atoms are families like the builtin quantifiers: `none` at any
/// type, `double` and `releq` at `((k),(k))`, `dep` at `((k),())`.
pub const BUILTIN_ATOMS: [Builtin; 4] = [Builtin::None, Builtin::Double, Builtin::Releq, Builtin::Dep];

fn builtin_atom(b: Builtin, pos: &[usize], neg: &[usize]) -> Option<Arc<AtomDef>> {
    let fits = match b {
        Builtin::None => true,
        Builtin::Double | Builtin::Releq => pos.len() == 1 && neg.len() == 1,
        Builtin::Dep => pos.len() == 1 && neg.is_empty(),
        _ => false,
    };
    if !fits {
        return None;
    }
    let base = QuantifierDef::builtin_at(b, &[pos, neg].concat())?;
    AtomDef::new(b.name(), base, pos.len()).ok()
}

fn default_builtin_atom(b: Builtin) -> Arc<AtomDef> {
    let (pos, neg): (&[usize], &[usize]) = match b {
        Builtin::Dep => (&[2], &[]),
        _ => (&[1], &[1]),
    };
    builtin_atom(b, pos, neg).expect("default atom type")
}

/// Name table for quantifiers and atoms.
///
/// Builtins and `dual(...)` of any resolvable name are always available;
/// extensional quantifiers and extra atoms can be loaded from JSON.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    quantifiers: BTreeMap<String, Arc<QuantifierDef>>,
    atoms: BTreeMap<String, Arc<AtomDef>>,
}

impl Registry {
    pub fn builtin() -> Registry {
        Registry::default()
    }

    /// Representative builtin quantifiers: every family at its default type,
    /// the single-slot families also at arity 2, parametric ones for small
    /// parameters, and the duals of all of these.
    pub fn builtin_quantifiers() -> Vec<Arc<QuantifierDef>> {
        let mut families: Vec<Builtin> = Builtin::FIXED.to_vec();
        for k in 0..=3 {
            families.extend([Builtin::AtLeast(k), Builtin::AtMost(k), Builtin::Exactly(k)]);
        }
        let mut out = Vec::new();
        for b in families {
            out.push(QuantifierDef::builtin(b));
            if b.shape() == Shape::Single && b != Builtin::Dep {
                out.push(QuantifierDef::builtin_at(b, &[2]).unwrap());
            }
        }
        let duals: Vec<_> = out.iter().map(dual).collect();
        out.extend(duals);
        out
    }

    /// The builtin atoms at their default types and at a few other types.
    pub fn builtin_atoms() -> Vec<Arc<AtomDef>> {
        let mut out: Vec<_> = BUILTIN_ATOMS.into_iter().map(default_builtin_atom).collect();
        out.extend(builtin_atom(Builtin::None, &[1], &[]));
        out.extend(builtin_atom(Builtin::None, &[], &[2]));
        out.extend(builtin_atom(Builtin::Dep, &[1], &[]));
        out.extend(builtin_atom(Builtin::Releq, &[2], &[2]));
        out
    }

    /// Resolve a quantifier name at its default type.
    pub fn quantifier(&self, name: &str) -> Result<Arc<QuantifierDef>, GqError> {
        self.resolve_quantifier(name, None)
    }

    /// Resolve a quantifier name for variable tuples of the given lengths.
    /// Builtin families are instantiated at that type when they admit it;
    /// otherwise the default instance is returned and the caller's type
    /// check reports the mismatch.
    pub fn quantifier_for(&self, name: &str, arities: &[usize]) -> Result<Arc<QuantifierDef>, GqError> {
        self.resolve_quantifier(name, Some(arities))
    }

    fn resolve_quantifier(&self, name: &str, arities: Option<&[usize]>) -> Result<Arc<QuantifierDef>, GqError> {
        let name = name.trim();
        if let Some(inner) = name.strip_prefix("dual(").and_then(|r| r.strip_suffix(')')) {
            return Ok(dual(&self.resolve_quantifier(inner, arities)?));
        }
        if let Some(q) = self.quantifiers.get(name) {
            return Ok(q.clone());
        }
        let b = Builtin::parse(name).ok_or_else(|| GqError::UnknownQuantifier(name.to_string()))?;
        Ok(arities
            .and_then(|sig| QuantifierDef::builtin_at(b, sig))
            .unwrap_or_else(|| QuantifierDef::builtin(b)))
    }

    /// Resolve an atom name at its default type.
    pub fn atom(&self, name: &str) -> Result<Arc<AtomDef>, GqError> {
        if let Some(a) = self.atoms.get(name) {
            return Ok(a.clone());
        }
        BUILTIN_ATOMS
            .into_iter()
            .find(|b| b.name() == name)
            .map(default_builtin_atom)
            .ok_or_else(|| GqError::UnknownAtom(name.to_string()))
    }

    /// Resolve an atom name for argument tuples of the given lengths, as
    /// for [`Registry::quantifier_for`].
    pub fn atom_for(&self, name: &str, pos: &[usize], neg: &[usize]) -> Result<Arc<AtomDef>, GqError> {
        let default = self.atom(name)?;
        if self.atoms.contains_key(name) {
            return Ok(default);
        }
        let b = Builtin::parse(name).expect("builtin atom names parse");
        Ok(builtin_atom(b, pos, neg).unwrap_or(default))
    }

    pub fn add_quantifier(&mut self, q: Arc<QuantifierDef>) {
        self.quantifiers.insert(q.name.clone(), q);
    }

    pub fn add_atom(&mut self, a: Arc<AtomDef>) {
        self.atoms.insert(a.name.clone(), a);
    }

    pub fn loaded_quantifiers(&self) -> impl Iterator<Item = &Arc<QuantifierDef>> {
        self.quantifiers.values()
    }

    /// Load definitions from JSON: a single object or an array of objects.
    /// Objects with `"tables"` are extensional quantifiers, objects with
    /// `"base"` are atoms. Returns the loaded quantifiers.
    pub fn load_definitions(&mut self, text: &str) -> Result<Vec<Arc<QuantifierDef>>, GqError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| GqError::InvalidDefinition(e.to_string()))?;
        let items = match value {
            Value::Array(items) => items,
            other => vec![other],
        };
        let mut loaded = Vec::new();
        for item in items {
            if item.get("base").is_some() {
                let a: AtomJson = serde_json::from_value(item)
                    .map_err(|e| GqError::InvalidDefinition(e.to_string()))?;
                if !is_identifier(&a.name) || BUILTIN_ATOMS.iter().any(|b| b.name() == a.name) {
                    return Err(GqError::InvalidDefinition(format!(
                        "{:?} is not a usable atom name",
                        a.name
                    )));
                }
                let base = self.quantifier(&a.base)?;
                self.add_atom(AtomDef::new(a.name, base, a.split)?);
            } else {
                let q = parse_table_quantifier(item)?;
                self.add_quantifier(q.clone());
                loaded.push(q);
            }
        }
        Ok(loaded)
    }
}

#[derive(Deserialize)]
struct AtomJson {
    name: String,
    base: String,
    split: usize,
}

#[derive(Deserialize)]
struct TableJson {
    name: String,
    #[serde(rename = "type")]
    type_sig: Vec<usize>,
    tables: BTreeMap<String, Vec<Value>>,
}

/// `{"name":"qx","type":[1],"tables":{"2":[[["0"]],[["1"]]]}}`.
///
/// Each entry lists the accepted relations, one per slot, each a list of
/// tuples of canonical labels `"0".."k-1"`. For single-slot types the outer
/// list may be dropped, so `[["0"]]` is the relation `{(0)}`.
fn parse_table_quantifier(value: Value) -> Result<Arc<QuantifierDef>, GqError> {
    let t: TableJson =
        serde_json::from_value(value).map_err(|e| GqError::InvalidDefinition(e.to_string()))?;
    if !is_identifier(&t.name) || Builtin::parse(&t.name).is_some() {
        return Err(GqError::InvalidDefinition(format!(
            "{:?} is not a usable quantifier name",
            t.name
        )));
    }
    let bad = |msg: String| GqError::InvalidDefinition(format!("{}: {msg}", t.name));
    let mut tables = BTreeMap::new();
    for (key, entries) in &t.tables {
        let size: usize = key
            .parse()
            .map_err(|_| bad(format!("table key {key:?} is not a domain size")))?;
        let mut accepted = BTreeSet::new();
        for entry in entries {
            accepted.insert(decode_entry(entry, t.type_sig.len(), size).map_err(bad)?);
        }
        tables.insert(size, accepted);
    }
    QuantifierDef::table(t.name.clone(), t.type_sig, tables)
}

fn decode_entry(entry: &Value, slots: usize, size: usize) -> Result<Vec<Relation>, String> {
    let items = entry
        .as_array()
        .ok_or_else(|| format!("entry {entry} is not an array"))?;
    let is_tuple = |v: &Value| {
        v.as_array()
            .is_some_and(|a| !a.is_empty() && a.iter().all(Value::is_string))
    };
    if slots == 1 && items.iter().all(is_tuple) {
        return Ok(vec![decode_relation(items, size)?]);
    }
    items
        .iter()
        .map(|r| {
            let tuples = r
                .as_array()
                .ok_or_else(|| format!("relation {r} is not an array"))?;
            decode_relation(tuples, size)
        })
        .collect()
}

fn decode_relation(tuples: &[Value], size: usize) -> Result<Relation, String> {
    let mut rel = Relation::new();
    for t in tuples {
        let labels = t
            .as_array()
            .ok_or_else(|| format!("tuple {t} is not an array"))?;
        let mut tuple = Vec::with_capacity(labels.len());
        for l in labels {
            let e = l
                .as_str()
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&e| e < size)
                .ok_or_else(|| format!("{l} is not a canonical label of the size-{size} domain"))?;
            tuple.push(e);
        }
        rel.insert(tuple);
    }
    Ok(rel)
}
