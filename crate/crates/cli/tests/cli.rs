use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use doubleteam::gq::Registry;
use doubleteam::harness::{Corpus, CorpusSpec};
use doubleteam::syntax::pretty;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .display()
        .to_string()
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../specs")
        .join(name)
        .display()
        .to_string()
}

fn tmp(name: &str, contents: &str) -> String {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, contents).unwrap();
    p.display().to_string()
}

/// Run the binary; stdout must be one JSON document.
fn doubleteam(args: &[&str]) -> (Value, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_doubleteam"))
        .args(args)
        .output()
        .expect("binary runs");
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"));
    (v, out.status.code().unwrap())
}

const COUNTER: &str = "Q<dual(empty)> x . (@<none>(x ; x))";

#[test]
fn eval_verdicts_and_codes() {
    let (v, code) = doubleteam(&["eval", "--model", &data("p0.json"), "--teams", &data("u0v1.json"), "--formula", "P(x)"]);
    assert_eq!((v["verdict"].clone(), v["engine"].clone(), code), (Value::Bool(true), "double-team".into(), 0));
    assert!(v["stats"]["nodes_visited"].is_u64());

    let (v, code) = doubleteam(&["eval", "--model", &data("p0.json"), "--teams", &data("counter.json"), "--formula", COUNTER]);
    assert_eq!((v["verdict"].clone(), code), (Value::Bool(false), 1));

    let (v, code) = doubleteam(&["eval", "--model", &data("p0.json"), "--teams", &data("u0v1.json"), "--formula", "Q<zzz> y . (P(y))"]);
    assert_eq!(code, 2);
    assert!(v["error"].as_str().unwrap().contains("unknown quantifier"), "{v}");
}

#[test]
fn eval_engines() {
    let args = |engine| {
        doubleteam(&[
            "eval", "--model", &data("p0.json"), "--teams", &data("u0v1.json"),
            "--formula", "Q<exists> y . (P(y) | x = y)", "--engine", engine,
        ])
    };
    for engine in ["team", "fo", "game"] {
        let (v, code) = args(engine);
        assert_eq!((v["verdict"].clone(), code), (Value::Bool(false), 1), "{engine}: {v}");
    }
    let (v, code) = doubleteam(&["eval", "--model", &data("p0.json"), "--sentence", "--formula", "Q<forall> x . (P(x) | ~P(x))", "--engine", "fo"]);
    assert_eq!((v["verdict"].clone(), code), (Value::Bool(true), 0));
    let (_, code) = doubleteam(&[
        "eval", "--model", &data("p0.json"), "--sentence", "--formula", "Q<forall> x . (@<none>(x ; x))", "--engine", "fo",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn game_outputs() {
    let (v, code) = doubleteam(&["game", "--model", &data("p0.json"), "--teams", &data("counter.json"), "--formula", COUNTER]);
    assert_eq!(code, 1);
    assert_eq!(v["strategy"], Value::Null);
    assert_eq!(v["exhausted"], true);

    let (v, code) = doubleteam(&["game", "--model", &data("p0.json"), "--teams", &data("empty.json"), "--formula", "Q<exists> x . (P(x))"]);
    assert_eq!(code, 0);
    assert_eq!(v["strategy"], serde_json::json!([]));

    // with an atom that rejects (∅,∅) the empty game is lost, as is the formula
    let (_, game) = doubleteam(&["game", "--model", &data("p0.json"), "--teams", &data("empty.json"), "--formula", COUNTER]);
    let (_, eval) = doubleteam(&["eval", "--model", &data("p0.json"), "--teams", &data("empty.json"), "--formula", COUNTER]);
    assert_eq!((game, eval), (1, 1));

    let (v, code) = doubleteam(&[
        "game", "--model", &data("p0.json"), "--teams", &data("u0v1.json"), "--formula", "P(x) | Q<exists> y . (@<double>(y ; x))",
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["verified"], true);
    assert!(v["finalTeams"]["3"]["S"]["assignments"].is_array());

    let (v, code) = doubleteam(&["game", "--model", &data("p0.json"), "--teams", &data("u0v1.json"), "--formula", "Q<most> y, y . (P(y), x = y)"]);
    assert_eq!(code, 2);
    assert!(v["error"].as_str().unwrap().contains("type (1)"));
}

#[test]
fn bundled_specs_are_clean() {
    for spec in ["flatness-small.json", "game-small.json", "flatness-sampled.json", "game-sampled.json"] {
        let (v, code) = doubleteam(&["diff", &bundled(spec)]);
        assert_eq!(code, 0, "{spec}: {}", v["counts"]);
        assert_eq!(v["counts"]["discrepancies"], 0);
        assert!(v["counts"]["instances"].as_u64().unwrap() > 1000);
        assert!(v["wallTimeMs"].is_u64());
    }
}

#[test]
fn diff_errors() {
    let big = std::fs::read_to_string(bundled("flatness-small.json"))
        .unwrap()
        .replace("\"maxDomain\": 2", "\"maxDomain\": 9");
    let (v, code) = doubleteam(&["diff", &tmp("big.json", &big)]);
    assert_eq!(code, 2);
    assert!(v["error"].as_str().unwrap().contains("infeasible"), "{v}");
    let (_, code) = doubleteam(&["diff", &tmp("broken.json", "{\"vocab\":")]);
    assert_eq!(code, 2);
    let (v, code) = doubleteam(&["diff", "/nonexistent/spec.json"]);
    assert_eq!((v["kind"].clone(), code), ("io".into(), 2));
}

#[test]
fn diff_seed_override_changes_the_sample() {
    let a = doubleteam(&["diff", &bundled("flatness-sampled.json"), "--seed", "1"]).0;
    let b = doubleteam(&["diff", &bundled("flatness-sampled.json"), "--seed", "2"]).0;
    let c = doubleteam(&["diff", &bundled("flatness-sampled.json"), "--seed", "1"]).0;
    assert_eq!(a["spec"]["seed"], 1);
    assert_ne!(a["verdictDigest"], b["verdictDigest"]);
    assert_eq!(a["verdictDigest"], c["verdictDigest"]);
}

#[test]
fn quant_check() {
    let (v, code) = doubleteam(&["quant-check", &data("builtins.json")]);
    assert_eq!((v["closed"].clone(), code), (Value::Bool(true), 0));
    let (v, code) = doubleteam(&["quant-check"]);
    assert_eq!(code, 0);
    assert!(v["quantifiers"].as_array().unwrap().len() > 40);

    let (v, code) = doubleteam(&["quant-check", &data("has0.json"), "--max-size", "2"]);
    assert_eq!(code, 1);
    let w = &v["quantifiers"][0]["violations"][0];
    assert_eq!(w["permutation"], serde_json::json!([1, 0]));
    assert_eq!(w["relations"], serde_json::json!([[["0"]]]));
    assert_eq!(w["image"], serde_json::json!([[["1"]]]));

    let (_, code) = doubleteam(&["quant-check", &data("q0like.json")]);
    assert_eq!(code, 0);
    let (_, code) = doubleteam(&["quant-check", &tmp("bad-defs.json", "[{\"name\":\"q\"}]")]);
    assert_eq!(code, 2);
}

#[test]
fn loaded_quantifiers_must_be_closed() {
    let (v, code) = doubleteam(&[
        "eval", "--model", &data("p0.json"), "--teams", &data("u0v1.json"),
        "--formula", "Q<has0> y . (P(y))", "--quantifiers", &data("has0.json"),
    ]);
    assert_eq!(code, 2);
    assert!(v["error"].as_str().unwrap().contains("not closed"));
    let (v, code) = doubleteam(&[
        "eval", "--model", &data("p0.json"), "--sentence",
        "--formula", "Q<q0like> y . (P(y))", "--quantifiers", &data("q0like.json"),
    ]);
    assert_eq!((v["verdict"].clone(), code), (Value::Bool(false), 1));
}

#[test]
fn usage_errors_are_json() {
    let (v, code) = doubleteam(&["eval", "--bogus"]);
    assert_eq!((v["kind"].clone(), code), ("usage".into(), 2));
    let (_, code) = doubleteam(&["eval", "--model", &data("p0.json"), "--formula", "P(x)"]);
    assert_eq!(code, 2);
    let (v, code) = doubleteam(&["eval", "--model", &data("p0.json"), "--teams", &data("u0v1.json"), "--formula", "P(x"]);
    assert_eq!((v["kind"].clone(), code), ("parse".into(), 2));
}

#[test]
fn pretty_output_is_indented_json() {
    let out = Command::new(env!("CARGO_BIN_EXE_doubleteam"))
        .args(["eval", "--model", &data("p0.json"), "--teams", &data("u0v1.json"), "--formula", "P(x)", "--pretty"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 3);
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap()["verdict"], true);
}

/// `eval` and `game` exit with the same code on every instance of the
/// bundled type-(1) corpus.
#[test]
fn eval_and_game_agree_on_the_bundled_corpus() {
    let reg = Registry::builtin();
    let spec = CorpusSpec::from_json(&std::fs::read_to_string(bundled("game-small.json")).unwrap()).unwrap();
    let corpus = Corpus::new(&spec, &reg).unwrap();
    let mut checked = 0;
    for (k, inst) in corpus.instances().iter().enumerate().step_by(7) {
        let model = tmp(&format!("m{k}.json"), &serde_json::to_string(&inst.structure.to_json()).unwrap());
        let teams = tmp(&format!("t{k}.json"), &serde_json::to_string(&inst.dt.to_json(&inst.structure)).unwrap());
        let formula = pretty(&inst.formula);
        let run = |cmd: &str| {
            doubleteam_cli::run_args(["doubleteam", cmd, "--model", &model, "--teams", &teams, "--formula", &formula]).1
        };
        let (e, g) = (run("eval"), run("game"));
        assert!(e < 2, "{formula}");
        assert_eq!(e, g, "{formula}");
        std::fs::remove_file(model).unwrap();
        std::fs::remove_file(teams).unwrap();
        checked += 1;
    }
    assert!(checked > 1000);
}
