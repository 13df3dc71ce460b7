//! Finite relational structures, assignments, teams and the team algebra.
//!
//! Domain elements are dense indices `0..n` into a structure's label list.
//! Labels only matter at the JSON boundary; equality of elements is label
//! equality.

mod json;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::syntax::{VarName, VarTuple};

pub use json::{assignment_json, DoubleTeamJson, RelationJson, StructureJson, TeamJson};

pub type Elem = usize;
pub type Tuple = Vec<Elem>;
pub type Relation = BTreeSet<Tuple>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("structure domain must be nonempty")]
    EmptyDomain,
    #[error("duplicate domain label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown domain element {0:?}")]
    UnknownLabel(String),
    #[error("element {0} outside the domain")]
    ElementOutOfRange(Elem),
    #[error("relation {relation}: declared arity {arity}, tuple of length {found}")]
    ArityMismatch {
        relation: String,
        arity: usize,
        found: usize,
    },
    #[error("tuple length {found} does not match variable tuple of length {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("values {values:?} do not respect the repetitions of {vars}")]
    RepetitionViolation { vars: String, values: Tuple },
    #[error("assignment domain {found:?} differs from team domain {expected:?}")]
    VarDomainMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("function undefined on assignment {0}")]
    UndefinedOn(String),
    #[error("variable {0} outside the team domain")]
    VariableNotInDomain(String),
    #[error("malformed JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelationDecl {
    pub arity: usize,
    pub tuples: Relation,
}

/// A finite model over a purely relational vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Structure {
    labels: Vec<String>,
    relations: BTreeMap<String, RelationDecl>,
}

impl Structure {
    pub fn new(
        labels: Vec<String>,
        relations: BTreeMap<String, RelationDecl>,
    ) -> Result<Self, ModelError> {
        if labels.is_empty() {
            return Err(ModelError::EmptyDomain);
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(ModelError::DuplicateLabel(l.clone()));
            }
        }
        for (name, decl) in &relations {
            for t in &decl.tuples {
                if t.len() != decl.arity {
                    return Err(ModelError::ArityMismatch {
                        relation: name.clone(),
                        arity: decl.arity,
                        found: t.len(),
                    });
                }
                if let Some(&e) = t.iter().find(|&&e| e >= labels.len()) {
                    return Err(ModelError::ElementOutOfRange(e));
                }
            }
        }
        Ok(Structure { labels, relations })
    }

    /// The domain `{"0", ..., "n-1"}` with no relations.
    pub fn canonical(size: usize) -> Result<Self, ModelError> {
        Structure::new((0..size).map(|i| i.to_string()).collect(), BTreeMap::new())
    }

    pub fn with_relation(
        mut self,
        name: impl Into<String>,
        arity: usize,
        tuples: impl IntoIterator<Item = Tuple>,
    ) -> Result<Self, ModelError> {
        self.relations.insert(
            name.into(),
            RelationDecl {
                arity,
                tuples: tuples.into_iter().collect(),
            },
        );
        Structure::new(self.labels, self.relations)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, e: Elem) -> &str {
        &self.labels[e]
    }

    pub fn elem(&self, label: &str) -> Result<Elem, ModelError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| ModelError::UnknownLabel(label.to_string()))
    }

    pub fn relations(&self) -> &BTreeMap<String, RelationDecl> {
        &self.relations
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        self.relations.get(name)
    }

    /// Image of this structure under the bijection `perm` (element `e` goes
    /// to `perm[e]`). Labels stay attached to positions.
    pub fn permuted(&self, perm: &[Elem]) -> Structure {
        let relations = self
            .relations
            .iter()
            .map(|(name, decl)| {
                let tuples = decl
                    .tuples
                    .iter()
                    .map(|t| t.iter().map(|&e| perm[e]).collect())
                    .collect();
                (
                    name.clone(),
                    RelationDecl {
                        arity: decl.arity,
                        tuples,
                    },
                )
            })
            .collect();
        Structure {
            labels: self.labels.clone(),
            relations,
        }
    }
}

/// A variable assignment: a finite map from variables to elements.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(BTreeMap<VarName, Elem>);

impl Assignment {
    pub fn empty() -> Self {
        Assignment(BTreeMap::new())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarName, Elem)>) -> Self {
        Assignment(pairs.into_iter().collect())
    }

    pub fn get(&self, v: &VarName) -> Option<Elem> {
        self.0.get(v).copied()
    }

    pub fn bindings(&self) -> &BTreeMap<VarName, Elem> {
        &self.0
    }

    pub fn domain(&self) -> BTreeSet<VarName> {
        self.0.keys().cloned().collect()
    }

    /// `s[xs/values]`: rebinds the variables of `xs` position-wise.
    pub fn extend(&self, xs: &VarTuple, values: &[Elem]) -> Result<Assignment, ModelError> {
        check_tuple(xs, values)?;
        let mut out = self.0.clone();
        for (v, &e) in xs.vars().iter().zip(values) {
            out.insert(v.clone(), e);
        }
        Ok(Assignment(out))
    }

    pub fn permuted(&self, perm: &[Elem]) -> Assignment {
        Assignment(self.0.iter().map(|(v, &e)| (v.clone(), perm[e])).collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}↦{e}")?;
        }
        f.write_str("}")
    }
}

fn check_tuple(xs: &VarTuple, values: &[Elem]) -> Result<(), ModelError> {
    if xs.len() != values.len() {
        return Err(ModelError::LengthMismatch {
            expected: xs.len(),
            found: values.len(),
        });
    }
    if !xs.respects(values) {
        return Err(ModelError::RepetitionViolation {
            vars: xs.to_string(),
            values: values.to_vec(),
        });
    }
    Ok(())
}

/// A set of assignments sharing one variable domain. The domain is stored
/// explicitly so that the empty team still has one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Team {
    vars: BTreeSet<VarName>,
    members: BTreeSet<Assignment>,
}

impl Team {
    pub fn new(
        vars: BTreeSet<VarName>,
        members: impl IntoIterator<Item = Assignment>,
    ) -> Result<Self, ModelError> {
        let mut team = Team::empty(vars);
        for m in members {
            team.insert(m)?;
        }
        Ok(team)
    }

    pub fn empty(vars: BTreeSet<VarName>) -> Self {
        Team {
            vars,
            members: BTreeSet::new(),
        }
    }

    /// `{∅}`: the team holding only the empty assignment.
    pub fn unit() -> Self {
        Team {
            vars: BTreeSet::new(),
            members: [Assignment::empty()].into_iter().collect(),
        }
    }

    pub fn insert(&mut self, s: Assignment) -> Result<(), ModelError> {
        if !s.0.keys().eq(self.vars.iter()) {
            return Err(ModelError::VarDomainMismatch {
                expected: self.vars.iter().map(|v| v.to_string()).collect(),
                found: s.0.keys().map(|v| v.to_string()).collect(),
            });
        }
        self.members.insert(s);
        Ok(())
    }

    pub fn vars(&self) -> &BTreeSet<VarName> {
        &self.vars
    }

    pub fn members(&self) -> &BTreeSet<Assignment> {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = &Assignment> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, s: &Assignment) -> bool {
        self.members.contains(s)
    }

    pub fn union(&self, other: &Team) -> Result<Team, ModelError> {
        let mut out = self.clone();
        for s in &other.members {
            out.insert(s.clone())?;
        }
        Ok(out)
    }

    pub fn filter(&self, pred: impl Fn(&Assignment) -> bool) -> Team {
        Team {
            vars: self.vars.clone(),
            members: self.members.iter().filter(|s| pred(s)).cloned().collect(),
        }
    }

    pub fn permuted(&self, perm: &[Elem]) -> Team {
        Team {
            vars: self.vars.clone(),
            members: self.members.iter().map(|s| s.permuted(perm)).collect(),
        }
    }
}

/// A pair `(U, V)` of teams over the same variable domain: `U` holds the
/// verifying assignments, `V` the falsifying ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DoubleTeam {
    u: Team,
    v: Team,
}

impl DoubleTeam {
    pub fn new(u: Team, v: Team) -> Result<Self, ModelError> {
        if u.vars != v.vars {
            return Err(ModelError::VarDomainMismatch {
                expected: u.vars.iter().map(|v| v.to_string()).collect(),
                found: v.vars.iter().map(|v| v.to_string()).collect(),
            });
        }
        Ok(DoubleTeam { u, v })
    }

    /// `({∅}, ∅)`, the starting point for sentences.
    pub fn sentence() -> Self {
        DoubleTeam {
            u: Team::unit(),
            v: Team::empty(BTreeSet::new()),
        }
    }

    pub fn u(&self) -> &Team {
        &self.u
    }

    pub fn v(&self) -> &Team {
        &self.v
    }

    pub fn vars(&self) -> &BTreeSet<VarName> {
        &self.u.vars
    }

    pub fn swapped(&self) -> DoubleTeam {
        DoubleTeam {
            u: self.v.clone(),
            v: self.u.clone(),
        }
    }

    pub fn permuted(&self, perm: &[Elem]) -> DoubleTeam {
        DoubleTeam {
            u: self.u.permuted(perm),
            v: self.v.permuted(perm),
        }
    }
}

/// `s[xs/T]`: the team of all `s[xs/ā]` for `ā ∈ T`.
pub fn extend_by_set(s: &Assignment, xs: &VarTuple, set: &Relation) -> Result<Team, ModelError> {
    let mut vars = s.domain();
    vars.extend(xs.var_set());
    let mut team = Team::empty(vars);
    for t in set {
        team.members.insert(s.extend(xs, t)?);
    }
    Ok(team)
}

/// A witness function: each assignment of a team is mapped to a relation.
pub type WitnessFunction = BTreeMap<Assignment, Relation>;

/// `V[xs/f]`: the union of `s[xs/f(s)]` over the members of `team`.
pub fn team_extend(team: &Team, xs: &VarTuple, f: &WitnessFunction) -> Result<Team, ModelError> {
    let mut vars = team.vars.clone();
    vars.extend(xs.var_set());
    let mut out = Team::empty(vars);
    for s in &team.members {
        let image = f
            .get(s)
            .ok_or_else(|| ModelError::UndefinedOn(s.to_string()))?;
        for t in image {
            out.members.insert(s.extend(xs, t)?);
        }
    }
    Ok(out)
}

/// All tuples of length `|xs|` over `0..domain_size` that respect the
/// repetitions of `xs`, in lexicographic order.
pub fn respecting_tuples(xs: &VarTuple, domain_size: usize) -> Vec<Tuple> {
    let pattern = xs.repetition_pattern();
    let free: Vec<usize> = (0..pattern.len()).filter(|&k| pattern[k] == k).collect();
    let mut out = Vec::new();
    let mut digits = vec![0usize; free.len()];
    loop {
        let mut t = vec![0; pattern.len()];
        for (d, &k) in digits.iter().zip(&free) {
            t[k] = *d;
        }
        for k in 0..pattern.len() {
            t[k] = t[pattern[k]];
        }
        out.push(t);
        // odometer, last free position fastest
        let mut i = digits.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < domain_size {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// `f′`: each image replaced by the repetition-respecting tuples outside it.
pub fn complement_fn(f: &WitnessFunction, xs: &VarTuple, domain_size: usize) -> WitnessFunction {
    let all = respecting_tuples(xs, domain_size);
    f.iter()
        .map(|(s, image)| {
            let rest = all.iter().filter(|t| !image.contains(*t)).cloned().collect();
            (s.clone(), rest)
        })
        .collect()
}

/// An element of `{(⊤,⊤), (⊤,⊥), (⊥,⊤)}`: which disjuncts an assignment
/// is sent to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VChoice {
    Both,
    Left,
    Right,
}

impl VChoice {
    pub const ALL: [VChoice; 3] = [VChoice::Both, VChoice::Left, VChoice::Right];

    pub fn first(self) -> bool {
        matches!(self, VChoice::Both | VChoice::Left)
    }

    pub fn second(self) -> bool {
        matches!(self, VChoice::Both | VChoice::Right)
    }
}

/// The four teams of a disjunction split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// `U[h₁]`
    pub first: Team,
    /// `U[h₁′]`
    pub first_rest: Team,
    /// `U[h₂]`
    pub second: Team,
    /// `U[h₂′]`
    pub second_rest: Team,
}

pub fn split(team: &Team, h: &BTreeMap<Assignment, VChoice>) -> Result<Split, ModelError> {
    let mut out = Split {
        first: Team::empty(team.vars.clone()),
        first_rest: Team::empty(team.vars.clone()),
        second: Team::empty(team.vars.clone()),
        second_rest: Team::empty(team.vars.clone()),
    };
    for s in &team.members {
        let c = *h
            .get(s)
            .ok_or_else(|| ModelError::UndefinedOn(s.to_string()))?;
        let (a, b) = if c.first() {
            (&mut out.first, &mut out.second_rest)
        } else {
            (&mut out.first_rest, &mut out.second)
        };
        a.members.insert(s.clone());
        if c == VChoice::Both {
            out.second.members.insert(s.clone());
        } else {
            b.members.insert(s.clone());
        }
    }
    Ok(out)
}

/// `Rel(V, ys)`: the projection of a team onto a variable tuple.
pub fn rel(team: &Team, ys: &VarTuple) -> Result<Relation, ModelError> {
    if let Some(v) = ys.vars().iter().find(|v| !team.vars.contains(*v)) {
        return Err(ModelError::VariableNotInDomain(v.to_string()));
    }
    Ok(team
        .members
        .iter()
        .map(|s| ys.vars().iter().map(|v| s.0[v]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::var;

    fn asg(pairs: &[(&str, Elem)]) -> Assignment {
        Assignment::from_pairs(pairs.iter().map(|(v, e)| (var(v), *e)))
    }

    fn vars(names: &[&str]) -> BTreeSet<VarName> {
        names.iter().map(|n| var(n)).collect()
    }

    #[test]
    fn extend_examples() {
        let x = VarTuple::of(&["x"]);
        assert_eq!(Assignment::empty().extend(&x, &[0]).unwrap(), asg(&[("x", 0)]));
        let s = asg(&[("x", 0)]);
        assert_eq!(
            s.extend(&VarTuple::of(&["x", "y"]), &[1, 1]).unwrap(),
            asg(&[("x", 1), ("y", 1)])
        );
        let err = Assignment::empty().extend(&VarTuple::of(&["x", "y", "x"]), &[0, 1, 1]);
        assert!(matches!(err, Err(ModelError::RepetitionViolation { .. })));
        assert!(Assignment::empty()
            .extend(&VarTuple::of(&["x", "y", "x"]), &[0, 1, 0])
            .is_ok());
        assert!(matches!(
            Assignment::empty().extend(&x, &[0, 1]),
            Err(ModelError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn extend_by_set_examples() {
        let x = VarTuple::of(&["x"]);
        let t = extend_by_set(&Assignment::empty(), &x, &Relation::new()).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.vars(), &vars(&["x"]));
        let t = extend_by_set(&Assignment::empty(), &x, &[vec![0], vec![1]].into()).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.contains(&asg(&[("x", 0)])) && t.contains(&asg(&[("x", 1)])));
        let t = extend_by_set(&asg(&[("y", 0)]), &VarTuple::of(&["y"]), &[vec![1]].into()).unwrap();
        assert_eq!(t.members().iter().collect::<Vec<_>>(), vec![&asg(&[("y", 1)])]);
    }

    #[test]
    fn team_extend_examples() {
        let x = VarTuple::of(&["x"]);
        let empty = Team::empty(BTreeSet::new());
        let out = team_extend(&empty, &x, &WitnessFunction::new()).unwrap();
        assert!(out.is_empty());
        assert_eq!(out.vars(), &vars(&["x"]));

        let f: WitnessFunction = [(Assignment::empty(), [vec![0]].into())].into();
        let out = team_extend(&Team::unit(), &x, &f).unwrap();
        assert_eq!(out.members().iter().collect::<Vec<_>>(), vec![&asg(&[("x", 0)])]);

        let team = Team::new(vars(&["x"]), [asg(&[("x", 0)]), asg(&[("x", 1)])]).unwrap();
        let f: WitnessFunction = team
            .iter()
            .map(|s| (s.clone(), [vec![s.get(&var("x")).unwrap()]].into()))
            .collect();
        let out = team_extend(&team, &VarTuple::of(&["y"]), &f).unwrap();
        let want = Team::new(
            vars(&["x", "y"]),
            [asg(&[("x", 0), ("y", 0)]), asg(&[("x", 1), ("y", 1)])],
        )
        .unwrap();
        assert_eq!(out, want);

        assert!(matches!(
            team_extend(&team, &x, &WitnessFunction::new()),
            Err(ModelError::UndefinedOn(_))
        ));
    }

    #[test]
    fn complement_examples() {
        let s = Assignment::empty();
        let f: WitnessFunction = [(s.clone(), [vec![0]].into())].into();
        let c = complement_fn(&f, &VarTuple::of(&["x"]), 2);
        assert_eq!(c[&s], [vec![1]].into());
        let f: WitnessFunction = [(s.clone(), [vec![0, 0]].into())].into();
        let c = complement_fn(&f, &VarTuple::of(&["x", "x"]), 2);
        assert_eq!(c[&s], [vec![1, 1]].into());
        let f: WitnessFunction = [(s.clone(), [vec![0], vec![1]].into())].into();
        let c = complement_fn(&f, &VarTuple::of(&["x"]), 2);
        assert!(c[&s].is_empty());
    }

    #[test]
    fn respecting_tuples_order() {
        assert_eq!(
            respecting_tuples(&VarTuple::of(&["x", "y"]), 2),
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        assert_eq!(
            respecting_tuples(&VarTuple::of(&["x", "y", "x"]), 2),
            vec![vec![0, 0, 0], vec![0, 1, 0], vec![1, 0, 1], vec![1, 1, 1]]
        );
    }

    #[test]
    fn split_examples() {
        let s = asg(&[("x", 0)]);
        let t = asg(&[("x", 1)]);
        let team = Team::new(vars(&["x"]), [s.clone(), t.clone()]).unwrap();
        let all_both = team.iter().map(|a| (a.clone(), VChoice::Both)).collect();
        let sp = split(&team, &all_both).unwrap();
        assert_eq!(sp.first, team);
        assert_eq!(sp.second, team);
        assert!(sp.first_rest.is_empty() && sp.second_rest.is_empty());

        let h = [(s.clone(), VChoice::Left), (t.clone(), VChoice::Right)].into();
        let sp = split(&team, &h).unwrap();
        let only = |a: &Assignment| Team::new(vars(&["x"]), [a.clone()]).unwrap();
        assert_eq!(sp.first, only(&s));
        assert_eq!(sp.first_rest, only(&t));
        assert_eq!(sp.second, only(&t));
        assert_eq!(sp.second_rest, only(&s));

        let empty = Team::empty(vars(&["x"]));
        let sp = split(&empty, &BTreeMap::new()).unwrap();
        assert!(sp.first.is_empty() && sp.second.is_empty());
    }

    #[test]
    fn rel_examples() {
        let xy = vars(&["x", "y"]);
        assert!(rel(&Team::empty(xy.clone()), &VarTuple::of(&["x"]))
            .unwrap()
            .is_empty());
        let team = Team::new(xy.clone(), [asg(&[("x", 0), ("y", 1)])]).unwrap();
        assert_eq!(
            rel(&team, &VarTuple::of(&["y", "x"])).unwrap(),
            [vec![1, 0]].into()
        );
        let team = Team::new(xy, [asg(&[("x", 0), ("y", 0)]), asg(&[("x", 0), ("y", 1)])]).unwrap();
        assert_eq!(rel(&team, &VarTuple::of(&["x"])).unwrap(), [vec![0]].into());
        assert!(matches!(
            rel(&team, &VarTuple::of(&["z"])),
            Err(ModelError::VariableNotInDomain(_))
        ));
    }

    #[test]
    fn team_domain_is_enforced() {
        let mut t = Team::empty(vars(&["x"]));
        assert!(t.insert(asg(&[("y", 0)])).is_err());
        assert!(DoubleTeam::new(Team::empty(vars(&["x"])), Team::unit()).is_err());
        let dt = DoubleTeam::new(Team::empty(BTreeSet::new()), Team::unit()).unwrap();
        assert_eq!(dt.v().len(), 1);
    }

    #[test]
    fn structure_validation() {
        assert_eq!(Structure::canonical(0), Err(ModelError::EmptyDomain));
        let s = Structure::canonical(2).unwrap();
        assert!(s.clone().with_relation("P", 1, [vec![2]]).is_err());
        assert!(s.clone().with_relation("P", 2, [vec![1]]).is_err());
        assert!(s.with_relation("P", 1, [vec![1]]).is_ok());
    }
}
