//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use doubleteam::game::{find_uniform_survival_strategy, GameLimits};
use doubleteam::gq::{check_iso_closure, Registry};
use doubleteam::harness::gen::{self, FormulaSpace};
use doubleteam::harness::{diff_flatness, diff_game, Corpus, CorpusSpec, DiffReport};
use doubleteam::model::{
    complement_fn, extend_by_set, respecting_tuples, split, team_extend, Assignment, DoubleTeam, Relation, Team,
    VChoice, WitnessFunction,
};
use doubleteam::semantics::{eval, EvalConfig, Evaluator};
use doubleteam::syntax::{parse, pretty, var, Formula, VarName, VarTuple};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn spec(json: &str) -> CorpusSpec {
    CorpusSpec::from_json(json).expect("bundled spec")
}

fn flatness_exhaustive() -> CorpusSpec {
    spec(
        r#"{"check":"flatness","vocab":{"P":1,"R":2},"minDomain":1,"maxDomain":2,
            "teamVars":["x"],"formulaVars":["x","y"],"maxTeamSize":4,"formulaDepth":2,
            "quantifiers":["exists","forall","majority","even","empty","dual(empty)"]}"#,
    )
}

fn flatness_sampled() -> CorpusSpec {
    let mut s = flatness_exhaustive();
    s.team_vars = vec![var("x"), var("y")];
    s.sample_count = 10_000;
    s.seed = 20_240_601;
    s
}

fn game_exhaustive() -> CorpusSpec {
    spec(
        r#"{"check":"game","vocab":{"P":1},"minDomain":1,"maxDomain":2,
            "teamVars":["x"],"formulaVars":["x","y"],"maxTeamSize":2,"formulaDepth":2,
            "quantifiers":["exists","forall","empty","dual(empty)","majority"],
            "atoms":["none","double"]}"#,
    )
}

fn game_sampled() -> CorpusSpec {
    let mut s = game_exhaustive();
    s.sample_count = 2_000;
    s.seed = 7;
    s
}

fn summary(r: &DiffReport) -> String {
    format!(
        "{} instances, {} discrepancies, {} inconclusive, {} ms",
        r.counts.instances, r.counts.discrepancies, r.counts.inconclusive, r.wall_time_ms
    )
}

struct Reports {
    flat_exhaustive: DiffReport,
    flat_sampled: DiffReport,
}

fn flatness_sweep(reg: &Registry) -> (Outcome, Reports) {
    let cfg = EvalConfig::default();
    let start = Instant::now();
    let a = diff_flatness(&flatness_exhaustive(), reg, &cfg).expect("feasible");
    let b = diff_flatness(&flatness_sampled(), reg, &cfg).expect("feasible");
    let secs = start.elapsed().as_secs_f64();
    let pass = a.is_clean() && b.is_clean() && secs < 300.0;
    let detail = format!("exhaustive over {{x}}: {}; sampled over {{x,y}}: {}", summary(&a), summary(&b));
    (
        outcome(pass, detail),
        Reports {
            flat_exhaustive: a,
            flat_sampled: b,
        },
    )
}

fn game_sweep(reg: &Registry) -> Outcome {
    let r = diff_game(&game_exhaustive(), reg, &EvalConfig::default()).expect("feasible");
    let pass = r.is_clean() && r.counts.instances >= 1_000;
    outcome(pass, summary(&r))
}

fn counterexample(reg: &Registry) -> Outcome {
    let phi = parse("Q<dual(empty)> x . (@<none>(x ; x))", reg).expect("parses");
    let dt = DoubleTeam::new(Team::empty(BTreeSet::new()), Team::unit()).expect("same domain");
    let cfg = EvalConfig::default();
    let mut structures = Vec::new();
    for d in 1..=3 {
        structures.extend(gen::structures(&[("P".to_string(), 1)].into(), d));
    }
    structures.extend(gen::structures(&[("R".to_string(), 2)].into(), 2));
    let mut bad = 0;
    for s in &structures {
        let team = eval(s, &dt, &phi, &cfg).map(|v| v.value);
        let game = find_uniform_survival_strategy(s, &dt, &phi, &GameLimits::default());
        if team != Ok(false) || !matches!(game, Ok(None)) {
            bad += 1;
        }
    }
    outcome(
        bad == 0,
        format!("{} structures, {bad} where the team engine or the game search was not negative", structures.len()),
    )
}

fn random_assignment(rng: &mut ChaCha8Rng, vars: &[VarName], d: usize) -> Assignment {
    let mut pairs = Vec::new();
    for v in vars {
        if rng.random_bool(0.6) {
            pairs.push((v.clone(), rng.random_range(0..d)));
        }
    }
    Assignment::from_pairs(pairs)
}

fn random_tuple(rng: &mut ChaCha8Rng, vars: &[VarName]) -> VarTuple {
    let n = rng.random_range(1..=3);
    VarTuple::new((0..n).map(|_| vars[rng.random_range(0..vars.len())].clone()).collect()).expect("nonempty")
}

fn random_relation(rng: &mut ChaCha8Rng, xs: &VarTuple, d: usize) -> Relation {
    respecting_tuples(xs, d)
        .into_iter()
        .filter(|_| rng.random_bool(0.5))
        .collect()
}

fn team_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vars = [var("x"), var("y"), var("z")];
    let mut failures = BTreeMap::<&str, usize>::new();
    let mut fail = |name| *failures.entry(name).or_default() += 1;
    for _ in 0..1_000 {
        let d = rng.random_range(1..=3);
        let s = random_assignment(&mut rng, &vars, d);
        let xs = random_tuple(&mut rng, &vars);
        if !extend_by_set(&s, &xs, &Relation::new()).is_ok_and(|t| t.is_empty()) {
            fail("empty extension");
        }
    }
    for _ in 0..1_000 {
        let xs = random_tuple(&mut rng, &vars);
        let dom: BTreeSet<VarName> = vars.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        if !team_extend(&Team::empty(dom), &xs, &WitnessFunction::new()).is_ok_and(|t| t.is_empty()) {
            fail("empty team");
        }
    }
    for _ in 0..1_000 {
        let d = rng.random_range(1..=3);
        let dom: BTreeSet<VarName> = [var("x"), var("y")].into();
        let team = gen::random_team(&mut rng, &dom, d, 4);
        let xs = random_tuple(&mut rng, &vars);
        let f: WitnessFunction = team
            .iter()
            .map(|s| (s.clone(), random_relation(&mut rng, &xs, d)))
            .collect();
        let back = complement_fn(&complement_fn(&f, &xs, d), &xs, d);
        let disjoint = complement_fn(&f, &xs, d)
            .iter()
            .all(|(s, r)| r.is_disjoint(&f[s]) && r.len() + f[s].len() == respecting_tuples(&xs, d).len());
        if back != f || !disjoint {
            fail("complement");
        }
    }
    for _ in 0..1_000 {
        let d = rng.random_range(1..=3);
        let dom: BTreeSet<VarName> = [var("x"), var("y")].into();
        let team = gen::random_team(&mut rng, &dom, d, 6);
        let h: BTreeMap<Assignment, VChoice> = team
            .iter()
            .map(|s| (s.clone(), VChoice::ALL[rng.random_range(0..3)]))
            .collect();
        let Ok(sp) = split(&team, &h) else {
            fail("split");
            continue;
        };
        let cover = sp.first.union(&sp.second).is_ok_and(|u| u == team);
        let firsts = team.filter(|s| h[s].first());
        let seconds = team.filter(|s| h[s].second());
        let rests = sp.first_rest == team.filter(|s| !h[s].first()) && sp.second_rest == team.filter(|s| !h[s].second());
        if !cover || sp.first != firsts || sp.second != seconds || !rests {
            fail("split");
        }
    }
    let total: usize = failures.values().sum();
    outcome(
        total == 0,
        format!("4 identities × 1000 random cases, failures {failures:?}"),
    )
}

fn isomorphism(reg: &Registry) -> Outcome {
    let vocab: BTreeMap<String, usize> = [("P".to_string(), 1), ("R".to_string(), 2)].into();
    let pool = [var("x"), var("y")];
    let space = FormulaSpace::new(
        &pool,
        &vocab,
        &["exists", "forall", "majority", "even", "at_least<2>", "most", "dual(double)"]
            .map(String::from),
        &["none", "double", "releq", "dep"].map(String::from),
        reg,
    )
    .expect("names resolve");
    let vars: BTreeSet<VarName> = pool.iter().cloned().collect();
    let cfg = EvalConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut cases, mut draws, mut failures) = (0, 0, 0);
    while cases < 500 && draws < 20_000 {
        draws += 1;
        let phi = space.random(&mut rng, 3);
        if !phi.has_generalized_atoms() {
            continue;
        }
        let d = rng.random_range(1..=3);
        let s = gen::random_structure(&mut rng, &vocab, d);
        let u = gen::random_team(&mut rng, &vars, d, 2);
        let v = gen::random_team(&mut rng, &vars, d, 2);
        let dt = DoubleTeam::new(u, v).expect("same domain");
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut rng);
        let before = eval(&s, &dt, &phi, &cfg).map(|v| v.value);
        let after = eval(&s.permuted(&perm), &dt.permuted(&perm), &phi, &cfg).map(|v| v.value);
        match (before, after) {
            (Ok(a), Ok(b)) => {
                cases += 1;
                failures += (a != b) as usize;
            }
            (Err(_), Err(_)) => {}
            _ => failures += 1,
        }
    }
    let mut quantifiers = Registry::builtin_quantifiers();
    quantifiers.extend(Registry::builtin_atoms().iter().map(|a| a.base().clone()));
    let mut not_closed = Vec::new();
    for q in &quantifiers {
        match check_iso_closure(q, 3) {
            Ok(v) if v.is_empty() => {}
            _ => not_closed.push(q.to_string()),
        }
    }
    outcome(
        cases == 500 && failures == 0 && not_closed.is_empty(),
        format!(
            "{cases} permuted instances with atoms, {failures} verdict changes; {} builtin classes checked to size 3, not closed: {not_closed:?}",
            quantifiers.len()
        ),
    )
}

fn negation_laws(reg: &Registry) -> Outcome {
    let corpus = Corpus::new(&flatness_exhaustive(), reg).expect("feasible");
    let cfg = EvalConfig::default();
    let (mut checked, mut failures, mut errors) = (0u64, 0u64, 0u64);
    corpus.for_each_group(|g| {
        let nn = Formula::not(Formula::not(g.formula.clone()));
        let (Ok(ev), Ok(ev_nn)) = (
            Evaluator::new(g.structure, g.formula, corpus.team_vars(), cfg),
            Evaluator::new(g.structure, &nn, corpus.team_vars(), cfg),
        ) else {
            errors += g.double_teams.len() as u64;
            return;
        };
        for dt in g.double_teams {
            let verdicts = (|| {
                Ok::<_, doubleteam::semantics::EvalError>((
                    ev.eval(dt)?.value,
                    ev.eval(&dt.swapped())?.value,
                    ev_nn.eval_at(1, dt)?.value,
                    ev_nn.eval(dt)?.value,
                ))
            })();
            match verdicts {
                Ok((phi, phi_swapped, neg, negneg)) => {
                    checked += 1;
                    failures += (neg != phi_swapped || negneg != phi) as u64;
                }
                Err(_) => errors += 1,
            }
        }
    });
    outcome(
        failures == 0 && errors == 0,
        format!("{checked} instances, {failures} failures, {errors} errors"),
    )
}

fn determinism_and_memo(reg: &Registry, reports: &Reports) -> Outcome {
    let on = EvalConfig::default();
    let off = EvalConfig { memo: false, ..on };
    let text = |r: &DiffReport| serde_json::to_string(&r.to_json_without_timing()).expect("serializable");
    let mut notes = Vec::new();

    let again = diff_flatness(&flatness_sampled(), reg, &on).expect("feasible");
    let g1 = diff_game(&game_sampled(), reg, &on).expect("feasible");
    let g2 = diff_game(&game_sampled(), reg, &on).expect("feasible");
    let repeat_ok = text(&again) == text(&reports.flat_sampled) && text(&g1) == text(&g2);
    notes.push(format!("repeated seeded runs identical: {repeat_ok}"));

    let flat_off = diff_flatness(&flatness_exhaustive(), reg, &off).expect("feasible");
    let sampled_off = diff_flatness(&flatness_sampled(), reg, &off).expect("feasible");
    let flat_ok = flat_off.verdict_digest == reports.flat_exhaustive.verdict_digest
        && sampled_off.verdict_digest == reports.flat_sampled.verdict_digest;
    notes.push(format!("flatness corpora memo on/off identical: {flat_ok}"));

    let corpus = Corpus::new(&game_exhaustive(), reg).expect("feasible");
    let (mut compared, mut differ) = (0u64, 0u64);
    corpus.for_each_group(|g| {
        let a = Evaluator::new(g.structure, g.formula, corpus.team_vars(), on);
        let b = Evaluator::new(g.structure, g.formula, corpus.team_vars(), off);
        for dt in g.double_teams {
            let va = a.as_ref().map_err(Clone::clone).and_then(|e| e.eval(dt)).map(|v| v.value);
            let vb = b.as_ref().map_err(Clone::clone).and_then(|e| e.eval(dt)).map(|v| v.value);
            compared += 1;
            differ += (va != vb || va.is_err()) as u64;
        }
    });
    notes.push(format!("game corpus memo on/off: {compared} compared, {differ} differ"));
    outcome(repeat_ok && flat_ok && differ == 0, notes.join("; "))
}

fn round_trip(reg: &Registry) -> Outcome {
    let vocab: BTreeMap<String, usize> = [("P".to_string(), 1), ("R".to_string(), 2), ("S".to_string(), 3)].into();
    let mut space = FormulaSpace::new(&[var("x"), var("y"), var("z")], &vocab, &[], &[], reg).expect("valid");
    space.quantifiers = Registry::builtin_quantifiers();
    space.atoms = Registry::builtin_atoms();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    for _ in 0..1_000 {
        let phi = space.random(&mut rng, 4);
        let text = pretty(&phi);
        match parse(&text, reg) {
            Ok(back) if back == phi => {}
            _ => failures.push(text),
        }
    }
    outcome(
        failures.is_empty(),
        format!("1000 formulas, {} failures{}", failures.len(), failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()),
    )
}

fn main() -> ExitCode {
    let reg = Registry::builtin();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n, name, o: Outcome| {
        println!("{} {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    let (o, reports) = flatness_sweep(&reg);
    report(1, "flatness sweep", o);
    report(2, "game sweep", game_sweep(&reg));
    report(3, "empty-quantifier counterexample", counterexample(&reg));
    report(4, "team algebra identities", team_algebra());
    report(5, "isomorphism invariance", isomorphism(&reg));
    report(6, "negation laws", negation_laws(&reg));
    report(7, "determinism and memo soundness", determinism_and_memo(&reg, &reports));
    report(8, "parser round trip", round_trip(&reg));
    let failed = results.iter().filter(|(_, _, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
