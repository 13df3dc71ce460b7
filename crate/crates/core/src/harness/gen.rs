//! Formula, structure and team generation.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;

use super::HarnessError;
use crate::gq::{AtomDef, QuantifierDef, Registry};
use crate::model::{Assignment, DoubleTeam, Elem, Structure, Team, Tuple};
use crate::syntax::{Formula, VarName, VarTuple};

/// The ingredients formulas are built from.
#[derive(Debug, Clone)]
pub struct FormulaSpace {
    pub pool: Vec<VarName>,
    pub vocab: BTreeMap<String, usize>,
    pub quantifiers: Vec<Arc<QuantifierDef>>,
    pub atoms: Vec<Arc<AtomDef>>,
}

impl FormulaSpace {
    pub fn new(
        pool: &[VarName],
        vocab: &BTreeMap<String, usize>,
        quantifiers: &[String],
        atoms: &[String],
        registry: &Registry,
    ) -> Result<FormulaSpace, HarnessError> {
        if pool.is_empty() {
            return Err(HarnessError::Spec("the formula variable pool is empty".into()));
        }
        Ok(FormulaSpace {
            pool: pool.to_vec(),
            vocab: vocab.clone(),
            quantifiers: quantifiers
                .iter()
                .map(|q| registry.quantifier(q))
                .collect::<Result<_, _>>()?,
            atoms: atoms
                .iter()
                .map(|a| registry.atom(a))
                .collect::<Result<_, _>>()?,
        })
    }

    /// All variable tuples of length `n` over the pool, lexicographically.
    fn tuples(&self, n: usize) -> Vec<VarTuple> {
        let mut out: Vec<Vec<VarName>> = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|t| {
                    self.pool.iter().map(move |v| {
                        let mut t = t.clone();
                        t.push(v.clone());
                        t
                    })
                })
                .collect();
        }
        out.into_iter()
            .map(|t| VarTuple::new(t).expect("n > 0"))
            .collect()
    }

    fn tuple_lists(&self, arities: &[usize]) -> Vec<Vec<VarTuple>> {
        let mut out: Vec<Vec<VarTuple>> = vec![vec![]];
        for &n in arities {
            let options = self.tuples(n);
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    options.iter().map(move |t| {
                        let mut p = prefix.clone();
                        p.push(t.clone());
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Atomic formulas: equalities, relation atoms, generalized atoms.
    pub fn atomic(&self) -> Vec<Formula> {
        let mut out = Vec::new();
        for a in &self.pool {
            for b in &self.pool {
                out.push(Formula::eq(a.clone(), b.clone()));
            }
        }
        for (name, &arity) in &self.vocab {
            for t in self.tuples(arity) {
                out.push(Formula::rel(name.clone(), t));
            }
        }
        for atom in &self.atoms {
            let pos_lists = self.tuple_lists(atom.pos_type());
            let neg_lists = self.tuple_lists(atom.neg_type());
            for pos in &pos_lists {
                for neg in &neg_lists {
                    out.push(Formula::atom(atom.clone(), pos.clone(), neg.clone()).expect("well typed"));
                }
            }
        }
        out
    }

    /// Every formula of depth at most `depth`, grouped by exact depth. Errors
    /// once more than `cap` formulas have been produced.
    pub fn enumerate(&self, depth: usize, cap: usize) -> Result<Vec<Formula>, HarnessError> {
        let too_many = || HarnessError::Infeasible(format!("more than {cap} formulas of depth ≤ {depth}"));
        let mut levels: Vec<Vec<Formula>> = vec![self.atomic()];
        let mut total = levels[0].len();
        if total > cap {
            return Err(too_many());
        }
        for k in 1..=depth {
            let below: Vec<(&Formula, bool)> = levels
                .iter()
                .enumerate()
                .flat_map(|(j, l)| l.iter().map(move |f| (f, j == k - 1)))
                .collect();
            let prev = &levels[k - 1];
            let mut level = Vec::new();
            let mut push = |f: Formula, level: &mut Vec<Formula>| -> Result<(), HarnessError> {
                total += 1;
                if total > cap {
                    return Err(too_many());
                }
                level.push(f);
                Ok(())
            };
            for f in prev {
                push(Formula::not(f.clone()), &mut level)?;
            }
            for &(l, lk) in &below {
                for &(r, rk) in &below {
                    if lk || rk {
                        push(Formula::or(l.clone(), r.clone()), &mut level)?;
                    }
                }
            }
            for q in &self.quantifiers {
                let n = q.type_sig().len();
                for tuples in self.tuple_lists(q.type_sig()) {
                    // body choices: every n-tuple over `below` with at least
                    // one body of depth exactly k-1
                    let mut idx = vec![0usize; n];
                    'bodies: loop {
                        if idx.iter().any(|&i| below[i].1) {
                            let subs = idx.iter().map(|&i| below[i].0.clone()).collect();
                            let f = Formula::quant(q.clone(), tuples.clone(), subs).expect("well typed");
                            push(f, &mut level)?;
                        }
                        let mut j = n;
                        loop {
                            if j == 0 {
                                break 'bodies;
                            }
                            j -= 1;
                            idx[j] += 1;
                            if idx[j] < below.len() {
                                break;
                            }
                            idx[j] = 0;
                        }
                    }
                }
            }
            levels.push(level);
        }
        Ok(levels.into_iter().flatten().collect())
    }

    /// A random formula of depth at most `depth`.
    pub fn random(&self, rng: &mut impl Rng, depth: usize) -> Formula {
        let atomic = rng.random_range(0..=depth) == 0;
        if depth == 0 || atomic {
            return self.random_atomic(rng);
        }
        let kinds = if self.quantifiers.is_empty() { 2 } else { 3 };
        match rng.random_range(0..kinds) {
            0 => Formula::not(self.random(rng, depth - 1)),
            1 => Formula::or(self.random(rng, depth - 1), self.random(rng, depth - 1)),
            _ => {
                let q = &self.quantifiers[rng.random_range(0..self.quantifiers.len())];
                let tuples = q.type_sig().iter().map(|&n| self.random_tuple(rng, n)).collect();
                let subs = q.type_sig().iter().map(|_| self.random(rng, depth - 1)).collect();
                Formula::quant(q.clone(), tuples, subs).expect("well typed")
            }
        }
    }

    fn random_tuple(&self, rng: &mut impl Rng, n: usize) -> VarTuple {
        VarTuple::new(
            (0..n)
                .map(|_| self.pool[rng.random_range(0..self.pool.len())].clone())
                .collect(),
        )
        .expect("n > 0")
    }

    fn random_atomic(&self, rng: &mut impl Rng) -> Formula {
        let rels: Vec<(&String, &usize)> = self.vocab.iter().collect();
        let kinds = 1 + usize::from(!rels.is_empty()) + usize::from(!self.atoms.is_empty());
        let mut pick = rng.random_range(0..kinds);
        if pick == 0 {
            let t = self.random_tuple(rng, 2);
            return Formula::eq(t.vars()[0].clone(), t.vars()[1].clone());
        }
        if !rels.is_empty() {
            if pick == 1 {
                let (name, &arity) = rels[rng.random_range(0..rels.len())];
                return Formula::rel(name.clone(), self.random_tuple(rng, arity));
            }
            pick -= 1;
        }
        debug_assert_eq!(pick, 1);
        let atom = &self.atoms[rng.random_range(0..self.atoms.len())];
        let pos = atom.pos_type().iter().map(|&n| self.random_tuple(rng, n)).collect();
        let neg = atom.neg_type().iter().map(|&n| self.random_tuple(rng, n)).collect();
        Formula::atom(atom.clone(), pos, neg).expect("well typed")
    }
}

/// `Π_R 2^(d^arity)` as a float, for feasibility estimates.
pub fn structure_count(vocab: &BTreeMap<String, usize>, d: usize) -> f64 {
    vocab
        .values()
        .map(|&a| 2f64.powf((d as f64).powi(a as i32)))
        .product()
}

/// Number of teams of at most `max_team` members over `n` assignments.
pub fn team_count(n: usize, max_team: usize) -> f64 {
    let mut c = 1f64;
    let mut sum = 1f64;
    for k in 1..=max_team.min(n) {
        c = c * (n - k + 1) as f64 / k as f64;
        sum += c;
    }
    sum
}

/// All structures of size `d` over `vocab`, relations in name order and
/// tuple subsets in binary-counter order.
pub fn structures(vocab: &BTreeMap<String, usize>, d: usize) -> Vec<Structure> {
    let per_rel: Vec<(String, usize, Vec<Tuple>)> = vocab
        .iter()
        .map(|(n, &a)| (n.clone(), a, all_tuples(a, d)))
        .collect();
    let mut out = vec![Structure::canonical(d).expect("d > 0")];
    for (name, arity, tuples) in &per_rel {
        let mut next = Vec::new();
        for s in &out {
            for mask in 0u64..(1u64 << tuples.len()) {
                let chosen = tuples
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, t)| t.clone());
                next.push(s.clone().with_relation(name.clone(), *arity, chosen).expect("valid"));
            }
        }
        out = next;
    }
    out
}

fn all_tuples(arity: usize, d: usize) -> Vec<Tuple> {
    let mut out: Vec<Tuple> = vec![vec![]];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..d).map(move |e| {
                    let mut t = t.clone();
                    t.push(e);
                    t
                })
            })
            .collect();
    }
    out
}

/// All assignments of `vars` into a size-`d` domain, lexicographically.
pub fn assignments(vars: &BTreeSet<VarName>, d: usize) -> Vec<Assignment> {
    let vs: Vec<&VarName> = vars.iter().collect();
    all_tuples(vs.len(), d)
        .into_iter()
        .map(|t| Assignment::from_pairs(vs.iter().map(|v| (*v).clone()).zip(t)))
        .collect()
}

/// All teams of at most `max_team` members, ordered by size and then by
/// member indices.
pub fn teams(vars: &BTreeSet<VarName>, d: usize, max_team: usize) -> Vec<Team> {
    let all = assignments(vars, d);
    let mut out = Vec::new();
    for k in 0..=max_team.min(all.len()) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(Team::new(vars.clone(), idx.iter().map(|&i| all[i].clone())).expect("same domain"));
            if !next_combination(&mut idx, all.len()) {
                break;
            }
        }
    }
    out
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for j in (0..k).rev() {
        if idx[j] < n - k + j {
            idx[j] += 1;
            for l in j + 1..k {
                idx[l] = idx[l - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub fn double_teams(vars: &BTreeSet<VarName>, d: usize, max_team: usize) -> Vec<DoubleTeam> {
    let ts = teams(vars, d, max_team);
    let mut out = Vec::with_capacity(ts.len() * ts.len());
    for u in &ts {
        for v in &ts {
            out.push(DoubleTeam::new(u.clone(), v.clone()).expect("same domain"));
        }
    }
    out
}

pub fn random_structure(rng: &mut impl Rng, vocab: &BTreeMap<String, usize>, d: usize) -> Structure {
    let mut s = Structure::canonical(d).expect("d > 0");
    for (name, &arity) in vocab {
        let chosen: Vec<Tuple> = all_tuples(arity, d)
            .into_iter()
            .filter(|_| rng.random_bool(0.5))
            .collect();
        s = s.with_relation(name.clone(), arity, chosen).expect("valid");
    }
    s
}

pub fn random_team(rng: &mut impl Rng, vars: &BTreeSet<VarName>, d: usize, max_team: usize) -> Team {
    let all = assignments(vars, d);
    let k = rng.random_range(0..=max_team.min(all.len()));
    let picked = index::sample(rng, all.len(), k);
    Team::new(vars.clone(), picked.into_iter().map(|i| all[i].clone())).expect("same domain")
}

/// The structure with element `e` removed and later elements shifted down.
pub fn remove_element(s: &Structure, e: Elem) -> Option<Structure> {
    if s.size() <= 1 {
        return None;
    }
    let mut labels = s.labels().to_vec();
    labels.remove(e);
    let shift = |t: &Tuple| -> Option<Tuple> {
        t.iter()
            .map(|&a| match a.cmp(&e) {
                std::cmp::Ordering::Less => Some(a),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(a - 1),
            })
            .collect()
    };
    let relations = s
        .relations()
        .iter()
        .map(|(n, r)| {
            let mut r = r.clone();
            r.tuples = r.tuples.iter().filter_map(shift).collect();
            (n.clone(), r)
        })
        .collect();
    Structure::new(labels, relations).ok()
}

/// The team restricted to assignments avoiding `e`, shifted like
/// [`remove_element`].
pub fn team_without_element(t: &Team, e: Elem) -> Team {
    let members = t.iter().filter_map(|s| {
        let mut pairs = Vec::new();
        for (v, &a) in s.bindings() {
            match a.cmp(&e) {
                std::cmp::Ordering::Less => pairs.push((v.clone(), a)),
                std::cmp::Ordering::Equal => return None,
                std::cmp::Ordering::Greater => pairs.push((v.clone(), a - 1)),
            }
        }
        Some(Assignment::from_pairs(pairs))
    });
    Team::new(t.vars().clone(), members).expect("same domain")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{free_variables, pretty, var};

    fn space(quants: &[&str], atoms: &[&str]) -> FormulaSpace {
        FormulaSpace::new(
            &[var("x")],
            &[("P".to_string(), 1)].into(),
            &quants.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            &atoms.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            &Registry::builtin(),
        )
        .unwrap()
    }

    #[test]
    fn structure_and_team_counts() {
        let vocab: BTreeMap<String, usize> = [("P".to_string(), 1)].into();
        assert_eq!(structures(&vocab, 2).len(), 4);
        let x: BTreeSet<VarName> = [var("x")].into();
        assert_eq!(teams(&x, 2, 2).len(), 4);
        assert_eq!(double_teams(&x, 2, 2).len(), 16);
        let rp: BTreeMap<String, usize> = [("P".to_string(), 1), ("R".to_string(), 2)].into();
        assert_eq!(structures(&rp, 2).len(), 64);
        assert_eq!(structure_count(&rp, 2), 64.0);
        let xy: BTreeSet<VarName> = [var("x"), var("y")].into();
        for (d, m) in [(2, 2), (2, 4), (3, 2)] {
            assert_eq!(teams(&xy, d, m).len() as f64, team_count(d * d, m));
        }
        assert_eq!(teams(&BTreeSet::new(), 3, 5).len(), 2);
    }

    #[test]
    fn depth_one_unfolding() {
        let fs = space(&["exists"], &[]).enumerate(1, 1000).unwrap();
        let printed: Vec<String> = fs.iter().map(pretty).collect();
        for want in ["P(x)", "x = x", "~P(x)", "Q<exists> x . (P(x))"] {
            assert!(printed.iter().any(|p| p == want), "{want}");
        }
        // 2 atoms; 2 negations, 4 disjunctions, 2 quantifications
        assert_eq!(fs.len(), 10);
        assert!(fs.iter().all(|f| f.depth() <= 1));
    }

    #[test]
    fn formula_cap_is_an_error() {
        assert!(matches!(
            space(&["exists"], &[]).enumerate(3, 100),
            Err(HarnessError::Infeasible(_))
        ));
    }

    #[test]
    fn random_formulas_respect_depth() {
        use rand::SeedableRng;
        let sp = space(&["exists", "most"], &["none", "dep"]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let f = sp.random(&mut rng, 3);
            assert!(f.depth() <= 3);
            assert!(free_variables(&f).is_subset(&[var("x")].into()));
        }
    }

    #[test]
    fn element_removal() {
        let s = Structure::canonical(3)
            .unwrap()
            .with_relation("R", 2, [vec![0, 2], vec![1, 1]])
            .unwrap();
        let r = remove_element(&s, 1).unwrap();
        assert_eq!(r.size(), 2);
        assert_eq!(r.relation("R").unwrap().tuples, [vec![0, 1]].into());
        assert_eq!(r.labels(), &["0".to_string(), "2".to_string()]);
    }
}
