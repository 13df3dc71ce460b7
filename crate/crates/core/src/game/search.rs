//! Backtracking search for a uniform survival strategy.
//!
//! Positions are discovered breadth-first from the initial positions. At
//! each undecided choice of 𝒜 the search branches over the legal choices
//! in a fixed order (`Both`, `Left`, `Right`; witness sets in lift order)
//! and abandons a branch as soon as some play is lost. Uniformity is
//! checked once every reachable position has been expanded.

use std::collections::{BTreeSet, VecDeque};

use rustc_hash::FxHashSet;

use super::{check_type_one, AgentChoice, GameError, OrPick, Position, Sign, Strategy};
use crate::kernel::{self, KNode, Kernel, Packed};
use crate::model::{DoubleTeam, Structure};
use crate::semantics::EvalError;
use crate::syntax::{Formula, FormulaKind, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameLimits {
    /// Choice attempts before the search gives up as inconclusive.
    pub max_attempts: u64,
    pub enumeration_cap: u64,
    pub max_domain: usize,
}

impl Default for GameLimits {
    fn default() -> Self {
        GameLimits {
            max_attempts: 1 << 20,
            enumeration_cap: 1 << 16,
            max_domain: 4,
        }
    }
}

type KPos = (Packed, bool, NodeId);

#[derive(Clone, Copy)]
enum KChoice {
    Or(OrPick),
    Set(u64),
}

#[derive(Clone)]
struct State {
    queue: VecDeque<KPos>,
    visited: FxHashSet<KPos>,
    choices: Vec<(KPos, KChoice)>,
    finals: Vec<(Vec<Packed>, Vec<Packed>)>,
}

struct Search<'k> {
    kernel: &'k Kernel,
    atoms: Vec<NodeId>,
    attempts: u64,
    max_attempts: u64,
}

/// A uniform survival strategy for 𝒜 in `G(𝔄,U,V,φ)`, or `None` when the
/// search space is exhausted without finding one.
pub fn find_uniform_survival_strategy(
    structure: &Structure,
    dt: &DoubleTeam,
    phi: &Formula,
    limits: &GameLimits,
) -> Result<Option<Strategy>, GameError> {
    check_type_one(phi)?;
    if structure.size() > limits.max_domain {
        return Err(EvalError::CapExceeded(format!(
            "domain size {} exceeds max_domain {}",
            structure.size(),
            limits.max_domain
        ))
        .into());
    }
    let kernel = Kernel::compile(structure, phi, dt.vars(), limits.enumeration_cap)?;
    let atoms: Vec<NodeId> = phi
        .preorder()
        .into_iter()
        .filter(|f| matches!(f.kind(), FormulaKind::Atom { .. }))
        .map(Formula::id)
        .collect();
    let mut queue = VecDeque::new();
    for s in kernel.pack_team(dt.u())? {
        queue.push_back((s, true, phi.id()));
    }
    for t in kernel.pack_team(dt.v())? {
        queue.push_back((t, false, phi.id()));
    }
    let state = State {
        queue,
        visited: FxHashSet::default(),
        choices: Vec::new(),
        finals: vec![(Vec::new(), Vec::new()); kernel.nodes.len()],
    };
    let mut search = Search {
        kernel: &kernel,
        atoms,
        attempts: 0,
        max_attempts: limits.max_attempts,
    };
    let Some(done) = search.run(state)? else {
        return Ok(None);
    };
    let mut strategy = Strategy::default();
    for ((t, plus, node), choice) in done.choices {
        let pos = Position {
            assignment: kernel.unpack(t),
            sign: if plus { Sign::Plus } else { Sign::Minus },
            node,
        };
        let choice = match choice {
            KChoice::Or(p) => AgentChoice::Or(p),
            KChoice::Set(m) => AgentChoice::Set((0..kernel.d).filter(|&a| m >> a & 1 == 1).collect::<BTreeSet<_>>()),
        };
        strategy.choices.insert(pos, choice);
    }
    Ok(Some(strategy))
}

impl Search<'_> {
    fn attempt(&mut self) -> Result<(), GameError> {
        self.attempts += 1;
        if self.attempts > self.max_attempts {
            return Err(GameError::Inconclusive(self.max_attempts));
        }
        Ok(())
    }

    fn run(&mut self, mut st: State) -> Result<Option<State>, GameError> {
        let k = self.kernel;
        while let Some(p) = st.queue.pop_front() {
            if !st.visited.insert(p) {
                continue;
            }
            let (t, plus, node) = p;
            match &k.nodes[node as usize] {
                KNode::Eq(..) | KNode::Rel { .. } => {
                    if k.atomic(node, t) != plus {
                        return Ok(None);
                    }
                }
                KNode::Atom { .. } => {
                    let (s, n) = &mut st.finals[node as usize];
                    if plus {
                        s.push(t);
                    } else {
                        n.push(t);
                    }
                }
                KNode::Not(c) => st.queue.push_back((t, !plus, *c)),
                &KNode::Or(l, r) if !plus => {
                    st.queue.push_back((t, false, l));
                    st.queue.push_back((t, false, r));
                }
                &KNode::Or(l, r) => {
                    for pick in OrPick::ALL {
                        self.attempt()?;
                        let mut branch = st.clone();
                        branch.choices.push((p, KChoice::Or(pick)));
                        let (sl, sr) = match pick {
                            OrPick::Both => (true, true),
                            OrPick::Left => (true, false),
                            OrPick::Right => (false, true),
                        };
                        branch.queue.push_back((t, sl, l));
                        branch.queue.push_back((t, sr, r));
                        if let Some(done) = self.run(branch)? {
                            return Ok(Some(done));
                        }
                    }
                    return Ok(None);
                }
                KNode::Quant { comps, .. } => {
                    let lifts = k.lifts(node)?;
                    let options = if plus { &lifts.pos } else { &lifts.neg };
                    let c = &comps[0];
                    for m in options {
                        self.attempt()?;
                        let mut branch = st.clone();
                        branch.choices.push((p, KChoice::Set(m[0])));
                        for a in 0..c.cands.len() {
                            branch.queue.push_back((c.ext(t, a), m[0] >> a & 1 == 1, c.sub));
                        }
                        if let Some(done) = self.run(branch)? {
                            return Ok(Some(done));
                        }
                    }
                    return Ok(None);
                }
            }
        }
        for &a in &self.atoms {
            let (s, n) = &mut st.finals[a as usize];
            kernel::normalize(s);
            kernel::normalize(n);
            if !k.atom_holds(a, s, n) {
                return Ok(None);
            }
        }
        Ok(Some(st))
    }
}
