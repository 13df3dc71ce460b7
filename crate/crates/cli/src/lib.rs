//! The `doubleteam` command line. Every command prints one JSON document
//! and exits 0 (true / clean), 1 (false / discrepancies) or 2 (error).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use doubleteam::game::{find_uniform_survival_strategy, Game, GameError, GameLimits};
use doubleteam::gq::{check_iso_closure, format_type, GqError, QuantifierDef, Registry};
use doubleteam::harness::{self, CorpusSpec, HarnessError};
use doubleteam::model::{assignment_json, DoubleTeam, ModelError, Relation, Structure};
use doubleteam::semantics::{EvalConfig, EvalError, Evaluator};
use doubleteam::syntax::{parse, Formula, ParseError};

#[derive(Debug, Parser)]
#[command(name = "doubleteam", version, about = "Model checking with generalized quantifiers under double-team and game semantics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Indent the JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a formula on a structure and double team.
    Eval(RunArgs),
    /// Search for a uniform survival strategy.
    Game(RunArgs),
    /// Run a differential corpus.
    Diff(DiffArgs),
    /// Check quantifier definitions for isomorphism closure.
    QuantCheck(QuantCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Team,
    Fo,
    Game,
}

#[derive(Debug, Args)]
pub struct Limits {
    #[arg(long)]
    pub max_domain: Option<usize>,
    #[arg(long)]
    pub max_team: Option<usize>,
}

impl Limits {
    fn config(&self) -> EvalConfig {
        let mut cfg = EvalConfig::default();
        if let Some(d) = self.max_domain {
            cfg.max_domain = d;
        }
        if let Some(t) = self.max_team {
            cfg.max_team = t;
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Structure JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Double team JSON.
    #[arg(long, conflicts_with = "sentence")]
    pub teams: Option<PathBuf>,
    /// Evaluate on ({∅}, ∅).
    #[arg(long)]
    pub sentence: bool,
    #[arg(long, conflicts_with = "formula_file", required_unless_present = "formula_file")]
    pub formula: Option<String>,
    #[arg(long)]
    pub formula_file: Option<PathBuf>,
    /// Quantifier and atom definition files.
    #[arg(long)]
    pub quantifiers: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "team")]
    pub engine: Engine,
    #[command(flatten)]
    pub limits: Limits,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    /// Corpus spec JSON.
    pub spec: PathBuf,
    #[arg(long)]
    pub quantifiers: Vec<PathBuf>,
    /// Replace the seed of the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub limits: Limits,
}

#[derive(Debug, Args)]
pub struct QuantCheckArgs {
    /// Definitions JSON, or a JSON list of quantifier names. Without a file
    /// the builtin quantifiers and atoms are checked.
    pub definitions: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub max_size: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quantifier(#[from] GqError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse(_) => "parse",
            CliError::Model(_) => "model",
            CliError::Quantifier(_) => "quantifier",
            CliError::Eval(_) => "eval",
            CliError::Game(_) => "game",
            CliError::Harness(_) => "harness",
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"error": self.to_string(), "kind": self.kind()})
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Parse arguments and run. Help and version requests are reported as
/// `{"help": text}` with exit code 0.
pub fn run_args<I, T>(args: I) -> (Value, i32)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                (json!({"help": e.to_string()}), 0)
            }
            _ => (CliError::Usage(e.to_string().trim().to_string()).to_json(), 2),
        },
    }
}

pub fn run(cli: &Cli) -> (Value, i32) {
    let result = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Game(a) => cmd_game(a),
        Command::Diff(a) => cmd_diff(a),
        Command::QuantCheck(a) => cmd_quant_check(a),
    };
    result.unwrap_or_else(|e| (e.to_json(), 2))
}

fn load_registry(files: &[PathBuf]) -> Result<Registry, CliError> {
    let mut registry = Registry::builtin();
    for f in files {
        registry.load_definitions(&read(f)?)?;
    }
    Ok(registry)
}

/// Extensional quantifiers are only meaningful once shown closed.
fn require_closed(registry: &Registry) -> Result<(), CliError> {
    for q in registry.loaded_quantifiers() {
        let size = q.max_table_size().unwrap_or(0);
        if let Some(v) = check_iso_closure(q, size)?.first() {
            return Err(GqError::InvalidDefinition(format!(
                "{} is not closed under isomorphism: permutation {:?} on size {} changes membership",
                q.name(),
                v.permutation,
                v.size
            ))
            .into());
        }
    }
    Ok(())
}

struct Input {
    structure: Structure,
    dt: DoubleTeam,
    formula: Formula,
    cfg: EvalConfig,
}

fn load_input(a: &RunArgs) -> Result<Input, CliError> {
    let registry = load_registry(&a.quantifiers)?;
    require_closed(&registry)?;
    let structure = Structure::from_json(&read(&a.model)?)?;
    let dt = match (&a.teams, a.sentence) {
        (Some(path), false) => DoubleTeam::from_json(&read(path)?, &structure)?,
        (None, true) => DoubleTeam::sentence(),
        _ => return Err(CliError::Usage("give either --teams or --sentence".into())),
    };
    let text = match (&a.formula, &a.formula_file) {
        (Some(f), _) => f.clone(),
        (None, Some(path)) => read(path)?,
        (None, None) => return Err(CliError::Usage("give --formula or --formula-file".into())),
    };
    let formula = parse(text.trim(), &registry)?;
    Ok(Input {
        structure,
        dt,
        formula,
        cfg: a.limits.config(),
    })
}

fn verdict_code(v: bool) -> i32 {
    if v {
        0
    } else {
        1
    }
}

fn limits_of(cfg: &EvalConfig) -> GameLimits {
    GameLimits {
        enumeration_cap: cfg.enumeration_cap,
        max_domain: cfg.max_domain,
        ..GameLimits::default()
    }
}

pub fn cmd_eval(a: &RunArgs) -> Result<(Value, i32), CliError> {
    let inp = load_input(a)?;
    match a.engine {
        Engine::Team => {
            let ev = Evaluator::new(&inp.structure, &inp.formula, inp.dt.vars(), inp.cfg)?;
            let v = ev.eval(&inp.dt)?;
            Ok((
                json!({"verdict": v.value, "engine": "double-team", "stats": v.stats}),
                verdict_code(v.value),
            ))
        }
        Engine::Fo => {
            let ev = Evaluator::new(&inp.structure, &inp.formula, inp.dt.vars(), inp.cfg)?;
            let per = |team: &doubleteam::model::Team| -> Result<Vec<Value>, CliError> {
                team.iter()
                    .map(|s| {
                        Ok(json!({
                            "assignment": assignment_json(s, &inp.structure),
                            "holds": ev.eval_fo(s)?,
                        }))
                    })
                    .collect()
            };
            let (u, v) = (per(inp.dt.u())?, per(inp.dt.v())?);
            let verdict = u.iter().all(|x| x["holds"] == true) && v.iter().all(|x| x["holds"] == false);
            Ok((
                json!({"verdict": verdict, "engine": "fo", "U": u, "V": v}),
                verdict_code(verdict),
            ))
        }
        Engine::Game => {
            let found = find_uniform_survival_strategy(&inp.structure, &inp.dt, &inp.formula, &limits_of(&inp.cfg))?;
            let verdict = found.is_some();
            Ok((
                json!({"verdict": verdict, "engine": "game", "exhausted": !verdict}),
                verdict_code(verdict),
            ))
        }
    }
}

pub fn cmd_game(a: &RunArgs) -> Result<(Value, i32), CliError> {
    let inp = load_input(a)?;
    let limits = limits_of(&inp.cfg);
    match find_uniform_survival_strategy(&inp.structure, &inp.dt, &inp.formula, &limits) {
        Ok(Some(strategy)) => {
            let game = Game::new(&inp.structure, &inp.formula, inp.dt.vars(), limits.enumeration_cap)?;
            let plays = game.enumerate_plays(&inp.dt, &strategy)?;
            let verified = game.verify_strategy(&inp.dt, &strategy)?;
            Ok((
                json!({
                    "verdict": true,
                    "strategy": strategy.to_json(&inp.structure),
                    "exhausted": false,
                    "verified": verified,
                    "plays": plays.outcomes.len(),
                    "finalTeams": plays.final_teams.to_json(&inp.structure),
                }),
                0,
            ))
        }
        Ok(None) => Ok((json!({"verdict": false, "strategy": null, "exhausted": true}), 1)),
        Err(e @ GameError::Inconclusive(_)) => Ok((
            json!({"error": e.to_string(), "kind": "game", "strategy": null, "exhausted": false}),
            2,
        )),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_diff(a: &DiffArgs) -> Result<(Value, i32), CliError> {
    let registry = load_registry(&a.quantifiers)?;
    require_closed(&registry)?;
    let mut spec = CorpusSpec::from_json(&read(&a.spec)?)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let report = harness::diff(&spec, &registry, &a.limits.config())?;
    let code = if report.is_clean() { 0 } else { 1 };
    Ok((report.to_json(), code))
}

fn relations_json(rels: &[Relation]) -> Value {
    rels.iter()
        .map(|r| {
            r.iter()
                .map(|t| t.iter().map(|e| e.to_string()).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        })
        .collect()
}

pub fn cmd_quant_check(a: &QuantCheckArgs) -> Result<(Value, i32), CliError> {
    let mut registry = Registry::builtin();
    let quantifiers: Vec<std::sync::Arc<QuantifierDef>> = match &a.definitions {
        None => {
            let mut qs = Registry::builtin_quantifiers();
            qs.extend(Registry::builtin_atoms().iter().map(|atom| atom.base().clone()));
            qs
        }
        Some(path) => {
            let text = read(path)?;
            let value: Value = serde_json::from_str(&text).map_err(|e| GqError::InvalidDefinition(e.to_string()))?;
            match value.as_array() {
                Some(items) if !items.is_empty() && items.iter().all(Value::is_string) => items
                    .iter()
                    .map(|n| registry.quantifier(n.as_str().expect("string")))
                    .collect::<Result<_, _>>()?,
                _ => registry.load_definitions(&text)?,
            }
        }
    };
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    let mut closed = true;
    for q in quantifiers {
        if !seen.insert((q.name().to_string(), q.type_sig().to_vec())) {
            continue;
        }
        let violations = check_iso_closure(&q, a.max_size)?;
        closed &= violations.is_empty();
        let vs: Vec<Value> = violations
            .iter()
            .map(|v| {
                json!({
                    "size": v.size,
                    "permutation": v.permutation,
                    "relations": relations_json(&v.relations),
                    "image": relations_json(&v.image),
                    "accepted": v.accepted,
                })
            })
            .collect();
        entries.push(json!({
            "name": q.name(),
            "type": format_type(q.type_sig()),
            "closed": violations.is_empty(),
            "violations": vs,
        }));
    }
    Ok((
        json!({"closed": closed, "maxSize": a.max_size, "quantifiers": entries}),
        verdict_code(closed),
    ))
}

/// Render the output document.
pub fn render(value: &Value, pretty: bool) -> String {
    if pretty {
        serde_json::to_string_pretty(value).expect("serializable")
    } else {
        value.to_string()
    }
}
