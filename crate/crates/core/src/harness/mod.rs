//! Differential testing of the team engine against the classical oracle
//! and against the game.

pub mod gen;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::game::{find_uniform_survival_strategy, Game, GameLimits};
use crate::gq::{GqError, Registry};
use crate::kernel::MAX_SLOTS;
use crate::model::{DoubleTeam, DoubleTeamJson, Structure, StructureJson};
use crate::semantics::{EvalConfig, Evaluator};
use crate::syntax::{free_variables, is_identifier, pretty, var, Formula, VarName};
use gen::FormulaSpace;

/// Formulas generated before a corpus is declared infeasible.
pub const FORMULA_CAP: usize = 1 << 21;
/// Instances in an exhaustive corpus before it is declared infeasible.
pub const INSTANCE_CAP: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("invalid corpus spec: {0}")]
    Spec(String),
    #[error("infeasible corpus: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Quantifier(#[from] GqError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    /// Team semantics against the classical oracle.
    #[default]
    Flatness,
    /// Team semantics against uniform survival strategy search.
    Game,
}

fn one() -> usize {
    1
}

fn default_team_vars() -> Vec<VarName> {
    vec![var("x")]
}

fn default_formula_vars() -> Vec<VarName> {
    vec![var("x"), var("y")]
}

/// A corpus description. `sampleCount` 0 enumerates exhaustively; otherwise
/// that many instances are drawn at random.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CorpusSpec {
    #[serde(default)]
    pub check: Check,
    pub vocab: BTreeMap<String, usize>,
    #[serde(default = "one")]
    pub min_domain: usize,
    pub max_domain: usize,
    #[serde(default = "default_team_vars")]
    pub team_vars: Vec<VarName>,
    #[serde(default = "default_formula_vars")]
    pub formula_vars: Vec<VarName>,
    pub max_team_size: usize,
    pub formula_depth: usize,
    pub quantifiers: Vec<String>,
    #[serde(default)]
    pub atoms: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sample_count: usize,
}

impl CorpusSpec {
    pub fn from_json(text: &str) -> Result<CorpusSpec, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))
    }
}

/// One `(𝔄, (U,V), φ)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub structure: Structure,
    pub dt: DoubleTeam,
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceJson {
    pub structure: StructureJson,
    pub double_team: DoubleTeamJson,
    pub formula: String,
}

impl Instance {
    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            structure: self.structure.to_json(),
            double_team: self.dt.to_json(&self.structure),
            formula: pretty(&self.formula),
        }
    }
}

/// A structure and formula with the double teams they are paired with.
pub struct Group<'c> {
    pub first_index: u64,
    pub structure: &'c Structure,
    pub formula: &'c Formula,
    pub double_teams: &'c [DoubleTeam],
}

/// A validated spec with its formula list.
#[derive(Debug, Clone)]
pub struct Corpus {
    spec: CorpusSpec,
    team_vars: BTreeSet<VarName>,
    formulas: Vec<Formula>,
}

impl Corpus {
    pub fn new(spec: &CorpusSpec, registry: &Registry) -> Result<Corpus, HarnessError> {
        let bad = |m: String| Err(HarnessError::Spec(m));
        if spec.min_domain == 0 || spec.min_domain > spec.max_domain {
            return bad(format!(
                "domain range {}..={} is empty or contains 0",
                spec.min_domain, spec.max_domain
            ));
        }
        if spec.quantifiers.is_empty() {
            return bad("the quantifier allowlist is empty".into());
        }
        for (name, &arity) in &spec.vocab {
            if !is_identifier(name) || arity == 0 {
                return bad(format!("relation {name}/{arity} is not a relation symbol of positive arity"));
            }
        }
        let team_vars: BTreeSet<VarName> = spec.team_vars.iter().cloned().collect();
        let pool: BTreeSet<VarName> = spec.formula_vars.iter().cloned().collect();
        if team_vars.len() != spec.team_vars.len() || pool.len() != spec.formula_vars.len() {
            return bad("variable lists contain duplicates".into());
        }
        if team_vars.union(&pool).count() > MAX_SLOTS {
            return bad(format!("more than {MAX_SLOTS} distinct variables"));
        }
        let space = FormulaSpace::new(&spec.formula_vars, &spec.vocab, &spec.quantifiers, &spec.atoms, registry)?;
        if spec.check == Check::Game {
            if let Some(q) = space.quantifiers.iter().find(|q| !q.is_type_one()) {
                return bad(format!("game corpora need type (1) quantifiers, {q} is not"));
            }
        }
        if spec.check == Check::Flatness && !spec.atoms.is_empty() {
            return bad("flatness corpora must be atom-free".into());
        }
        if spec.sample_count == 0 {
            let per_formula: f64 = (spec.min_domain..=spec.max_domain)
                .map(|d| {
                    let teams = gen::team_count(d.pow(team_vars.len() as u32), spec.max_team_size);
                    gen::structure_count(&spec.vocab, d) * teams * teams
                })
                .sum();
            if per_formula > INSTANCE_CAP {
                return Err(HarnessError::Infeasible(format!(
                    "about {per_formula:.3e} structure/double-team pairs exceed the cap of {INSTANCE_CAP:e}"
                )));
            }
        }
        let formulas: Vec<Formula> = space
            .enumerate(spec.formula_depth, FORMULA_CAP)?
            .into_iter()
            .filter(|f| free_variables(f).is_subset(&team_vars))
            .collect();
        if formulas.is_empty() {
            return bad("no formula has its free variables among teamVars".into());
        }
        let corpus = Corpus {
            spec: spec.clone(),
            team_vars,
            formulas,
        };
        if spec.sample_count == 0 && corpus.estimated_len() > INSTANCE_CAP {
            return Err(HarnessError::Infeasible(format!(
                "about {:.3e} instances exceed the cap of {INSTANCE_CAP:e}",
                corpus.estimated_len()
            )));
        }
        Ok(corpus)
    }

    pub fn spec(&self) -> &CorpusSpec {
        &self.spec
    }

    pub fn team_vars(&self) -> &BTreeSet<VarName> {
        &self.team_vars
    }

    /// The formulas of the corpus: depth-bounded, free variables among the
    /// team variables.
    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    fn estimated_len(&self) -> f64 {
        if self.spec.sample_count > 0 {
            return self.spec.sample_count as f64;
        }
        (self.spec.min_domain..=self.spec.max_domain)
            .map(|d| {
                let teams = gen::team_count(d.pow(self.team_vars.len() as u32), self.spec.max_team_size);
                gen::structure_count(&self.spec.vocab, d) * teams * teams * self.formulas.len() as f64
            })
            .sum()
    }

    pub fn len(&self) -> u64 {
        self.estimated_len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Random instance `index`, drawn from its own stream of the seeded
    /// generator so that any instance can be regenerated alone.
    pub fn sample(&self, index: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index);
        let d = rng.random_range(self.spec.min_domain..=self.spec.max_domain);
        let structure = gen::random_structure(&mut rng, &self.spec.vocab, d);
        let formula = self.formulas[rng.random_range(0..self.formulas.len())].clone();
        let u = gen::random_team(&mut rng, &self.team_vars, d, self.spec.max_team_size);
        let v = gen::random_team(&mut rng, &self.team_vars, d, self.spec.max_team_size);
        Instance {
            structure,
            dt: DoubleTeam::new(u, v).expect("same domain"),
            formula,
        }
    }

    /// Visit the corpus in instance order, grouped by structure and formula.
    /// Exhaustive order: domain size, structure, formula, double team.
    pub fn for_each_group(&self, mut visit: impl FnMut(Group<'_>)) {
        if self.spec.sample_count > 0 {
            for i in 0..self.spec.sample_count as u64 {
                let inst = self.sample(i);
                visit(Group {
                    first_index: i,
                    structure: &inst.structure,
                    formula: &inst.formula,
                    double_teams: std::slice::from_ref(&inst.dt),
                });
            }
            return;
        }
        let mut index = 0u64;
        for d in self.spec.min_domain..=self.spec.max_domain {
            let dts = gen::double_teams(&self.team_vars, d, self.spec.max_team_size);
            for structure in gen::structures(&self.spec.vocab, d) {
                for formula in &self.formulas {
                    visit(Group {
                        first_index: index,
                        structure: &structure,
                        formula,
                        double_teams: &dts,
                    });
                    index += dts.len() as u64;
                }
            }
        }
    }

    /// Every instance, in corpus order.
    pub fn instances(&self) -> Vec<Instance> {
        let mut out = Vec::new();
        self.for_each_group(|g| {
            for dt in g.double_teams {
                out.push(Instance {
                    structure: g.structure.clone(),
                    dt: dt.clone(),
                    formula: g.formula.clone(),
                });
            }
        });
        out
    }
}

/// The instances described by `spec`, in corpus order.
pub fn enumerate_instances(spec: &CorpusSpec, registry: &Registry) -> Result<Vec<Instance>, HarnessError> {
    Ok(Corpus::new(spec, registry)?.instances())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub instances: u64,
    pub agreements: u64,
    pub discrepancies: u64,
    pub inconclusive: u64,
    /// Instances on which the team engine returned true.
    pub team_true: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Discrepancy {
    pub index: u64,
    #[serde(flatten)]
    pub instance: InstanceJson,
    pub verdicts: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Value>,
    /// Set by the game check: whether the search space was exhausted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exhausted: Option<bool>,
    pub shrunk: InstanceJson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InconclusiveCase {
    pub index: u64,
    #[serde(flatten)]
    pub instance: InstanceJson,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffReport {
    pub check: Check,
    pub spec: CorpusSpec,
    pub counts: Counts,
    /// FNV-1a digest of the per-instance verdicts in corpus order.
    pub verdict_digest: String,
    pub discrepancies: Vec<Discrepancy>,
    pub inconclusive: Vec<InconclusiveCase>,
    pub wall_time_ms: u64,
}

impl DiffReport {
    pub fn is_clean(&self) -> bool {
        self.discrepancies.is_empty() && self.inconclusive.is_empty()
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable")
    }

    /// The report without its wall-clock field, for comparing runs.
    pub fn to_json_without_timing(&self) -> Value {
        let mut v = self.to_json();
        v.as_object_mut().expect("object").remove("wallTimeMs");
        v
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Fnv {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn push(&mut self, byte: u8) {
        self.0 = (self.0 ^ byte as u64).wrapping_mul(0x0100_0000_01b3);
    }
}

struct Tally {
    report: DiffReport,
    digest: Fnv,
    start: Instant,
}

impl Tally {
    fn new(spec: &CorpusSpec, check: Check) -> Tally {
        Tally {
            report: DiffReport {
                check,
                spec: spec.clone(),
                counts: Counts::default(),
                verdict_digest: String::new(),
                discrepancies: Vec::new(),
                inconclusive: Vec::new(),
                wall_time_ms: 0,
            },
            digest: Fnv::new(),
            start: Instant::now(),
        }
    }

    fn agree(&mut self, team: bool, other: bool) {
        let c = &mut self.report.counts;
        c.instances += 1;
        c.agreements += 1;
        c.team_true += team as u64;
        self.digest.push(team as u8 | (other as u8) << 1);
    }

    fn disagree(&mut self, d: Discrepancy, team: bool, other: bool) {
        let c = &mut self.report.counts;
        c.instances += 1;
        c.discrepancies += 1;
        c.team_true += team as u64;
        self.digest.push(team as u8 | (other as u8) << 1 | 4);
        self.report.discrepancies.push(d);
    }

    fn inconclusive(&mut self, index: u64, inst: &Instance, reason: String) {
        self.report.counts.instances += 1;
        self.report.counts.inconclusive += 1;
        self.digest.push(0xff);
        self.report.inconclusive.push(InconclusiveCase {
            index,
            instance: inst.to_json(),
            reason,
        });
    }

    fn finish(mut self) -> DiffReport {
        self.report.verdict_digest = format!("{:016x}", self.digest.0);
        self.report.wall_time_ms = self.start.elapsed().as_millis() as u64;
        self.report
    }
}

fn instance_of(g: &Group<'_>, dt: &DoubleTeam) -> Instance {
    Instance {
        structure: g.structure.clone(),
        dt: dt.clone(),
        formula: g.formula.clone(),
    }
}

/// Whether the team and classical verdicts differ on an atom-free instance.
pub fn flatness_fails(inst: &Instance, cfg: &EvalConfig) -> bool {
    Evaluator::new(&inst.structure, &inst.formula, inst.dt.vars(), *cfg)
        .and_then(|ev| ev.flatness_check(&inst.dt))
        .is_ok_and(|r| !r.agree)
}

/// Compare `𝔄,(U,V) ⊨ φ` with the classical reading on every instance.
pub fn diff_flatness(spec: &CorpusSpec, registry: &Registry, cfg: &EvalConfig) -> Result<DiffReport, HarnessError> {
    let mut spec = spec.clone();
    spec.check = Check::Flatness;
    let corpus = Corpus::new(&spec, registry)?;
    let mut tally = Tally::new(&spec, Check::Flatness);
    corpus.for_each_group(|g| {
        let ev = Evaluator::new(g.structure, g.formula, corpus.team_vars(), *cfg);
        for (k, dt) in g.double_teams.iter().enumerate() {
            let index = g.first_index + k as u64;
            match ev.as_ref().map_err(Clone::clone).and_then(|ev| ev.flatness_check(dt)) {
                Ok(r) if r.agree => tally.agree(r.team, r.classical),
                Ok(r) => {
                    let inst = instance_of(&g, dt);
                    let shrunk = shrink(&inst, |c| flatness_fails(c, cfg));
                    let d = Discrepancy {
                        index,
                        instance: inst.to_json(),
                        verdicts: [("team".into(), r.team), ("classical".into(), r.classical)].into(),
                        strategy: None,
                        exhausted: None,
                        shrunk: shrunk.to_json(),
                    };
                    tally.disagree(d, r.team, r.classical);
                }
                Err(e) => tally.inconclusive(index, &instance_of(&g, dt), e.to_string()),
            }
        }
    });
    Ok(tally.finish())
}

/// The verdicts of the team engine and the game on one instance, plus the
/// strategy found, if any.
struct GameVerdict {
    team: bool,
    game: bool,
    verified: bool,
    strategy: Option<Value>,
}

impl GameVerdict {
    fn agrees(&self) -> bool {
        self.team == self.game && (!self.game || self.verified)
    }
}

fn limits_of(cfg: &EvalConfig) -> GameLimits {
    GameLimits {
        enumeration_cap: cfg.enumeration_cap,
        max_domain: cfg.max_domain,
        ..GameLimits::default()
    }
}

fn game_verdict(ev: &Evaluator<'_>, game: &Game<'_>, dt: &DoubleTeam, limits: &GameLimits) -> Result<GameVerdict, String> {
    let team = ev.eval(dt).map_err(|e| e.to_string())?.value;
    let found = find_uniform_survival_strategy(ev.structure(), dt, ev.formula(), limits).map_err(|e| e.to_string())?;
    let (verified, strategy) = match &found {
        Some(s) => (
            game.verify_strategy(dt, s).map_err(|e| e.to_string())?,
            Some(s.to_json(ev.structure())),
        ),
        None => (false, None),
    };
    Ok(GameVerdict {
        team,
        game: found.is_some(),
        verified,
        strategy,
    })
}

/// Whether the team engine and the game disagree on an instance.
pub fn game_fails(inst: &Instance, cfg: &EvalConfig) -> bool {
    let Ok(ev) = Evaluator::new(&inst.structure, &inst.formula, inst.dt.vars(), *cfg) else {
        return false;
    };
    let Ok(game) = Game::new(&inst.structure, &inst.formula, inst.dt.vars(), cfg.enumeration_cap) else {
        return false;
    };
    game_verdict(&ev, &game, &inst.dt, &limits_of(cfg)).is_ok_and(|v| !v.agrees())
}

/// Compare `𝔄,(U,V) ⊨ φ` with the existence of a uniform survival strategy
/// in `G(𝔄,U,V,φ)`. Every strategy found is checked by play enumeration.
pub fn diff_game(spec: &CorpusSpec, registry: &Registry, cfg: &EvalConfig) -> Result<DiffReport, HarnessError> {
    let mut spec = spec.clone();
    spec.check = Check::Game;
    let corpus = Corpus::new(&spec, registry)?;
    let limits = limits_of(cfg);
    let mut tally = Tally::new(&spec, Check::Game);
    corpus.for_each_group(|g| {
        let setup = Evaluator::new(g.structure, g.formula, corpus.team_vars(), *cfg)
            .map_err(|e| e.to_string())
            .and_then(|ev| {
                Game::new(g.structure, g.formula, corpus.team_vars(), cfg.enumeration_cap)
                    .map(|game| (ev, game))
                    .map_err(|e| e.to_string())
            });
        for (k, dt) in g.double_teams.iter().enumerate() {
            let index = g.first_index + k as u64;
            let verdict = setup
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|(ev, game)| game_verdict(ev, game, dt, &limits));
            match verdict {
                Ok(v) if v.agrees() => tally.agree(v.team, v.game),
                Ok(v) => {
                    let inst = instance_of(&g, dt);
                    let shrunk = shrink(&inst, |c| game_fails(c, cfg));
                    let d = Discrepancy {
                        index,
                        instance: inst.to_json(),
                        verdicts: [
                            ("team".into(), v.team),
                            ("game".into(), v.game),
                            ("verified".into(), v.verified),
                        ]
                        .into(),
                        strategy: v.strategy,
                        exhausted: Some(!v.game),
                        shrunk: shrunk.to_json(),
                    };
                    tally.disagree(d, v.team, v.game);
                }
                Err(e) => tally.inconclusive(index, &instance_of(&g, dt), e),
            }
        }
    });
    Ok(tally.finish())
}

/// Run the check named by the spec.
pub fn diff(spec: &CorpusSpec, registry: &Registry, cfg: &EvalConfig) -> Result<DiffReport, HarnessError> {
    match spec.check {
        Check::Flatness => diff_flatness(spec, registry, cfg),
        Check::Game => diff_game(spec, registry, cfg),
    }
}

fn candidates(inst: &Instance) -> Vec<Instance> {
    let mut out = Vec::new();
    for e in 0..inst.structure.size() {
        if let Some(structure) = gen::remove_element(&inst.structure, e) {
            let u = gen::team_without_element(inst.dt.u(), e);
            let v = gen::team_without_element(inst.dt.v(), e);
            out.push(Instance {
                structure,
                dt: DoubleTeam::new(u, v).expect("same domain"),
                formula: inst.formula.clone(),
            });
        }
    }
    let (u, v) = (inst.dt.u(), inst.dt.v());
    for s in u.iter() {
        let smaller = u.filter(|t| t != s);
        out.push(Instance {
            dt: DoubleTeam::new(smaller, v.clone()).expect("same domain"),
            ..inst.clone()
        });
    }
    for s in v.iter() {
        let smaller = v.filter(|t| t != s);
        out.push(Instance {
            dt: DoubleTeam::new(u.clone(), smaller).expect("same domain"),
            ..inst.clone()
        });
    }
    for node in inst.formula.preorder() {
        for child in node.children() {
            let formula = inst.formula.replace_node(node.id(), child);
            if free_variables(&formula).is_subset(inst.dt.vars()) {
                out.push(Instance {
                    formula,
                    ..inst.clone()
                });
            }
        }
    }
    out
}

/// Greedily shrink a failing instance: drop domain elements, drop team
/// members, replace subformulas by their children, as long as `fails` keeps
/// holding.
pub fn shrink(inst: &Instance, mut fails: impl FnMut(&Instance) -> bool) -> Instance {
    let mut current = inst.clone();
    'outer: loop {
        for c in candidates(&current) {
            if fails(&c) {
                current = c;
                continue 'outer;
            }
        }
        return current;
    }
}
