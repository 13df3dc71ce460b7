//! Recursive-descent parser for the ASCII formula syntax.
//!
//! ```text
//! formula   := disj
//! disj      := conj ("|" conj)*
//! conj      := unary ("&" unary)*
//! unary     := "~" unary | "E" var "." unary | "A" var "." unary | primary
//! primary   := "(" formula ")"
//!            | var "=" var
//!            | RELNAME "(" var ("," var)* ")"
//!            | "Q<" QNAME ">" tuple ("," tuple)* "." "(" formula ("," formula)* ")"
//!            | "@<" ANAME ">" "(" tuplelist ";" tuplelist ")"
//! tuple     := var | "(" var ("," var)* ")"
//! tuplelist := empty | tuple ("," tuple)*
//! QNAME     := "dual(" QNAME ")" | ident [ "<" num ("," num)* ">" ]
//! ```
//!
//! The `E`/`A` sugar binds as tightly as `~`: `E x. P(x) | R(x)` is a
//! disjunction whose left disjunct is quantified.

use thiserror::Error;

use super::{Formula, SyntaxError, VarName, VarTuple};
use crate::gq::{GqError, Registry};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    Lexical(char),
    #[error("unexpected end of input, expected {0}")]
    Eof(&'static str),
    #[error("expected {expected}, found {found:?}")]
    Unexpected { expected: &'static str, found: String },
    #[error("unknown quantifier {0:?}")]
    UnknownQuantifier(String),
    #[error("unknown generalized atom {0:?}")]
    UnknownAtom(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("malformed tuple group: {0}")]
    MalformedTuples(String),
    #[error("trailing input {0:?}")]
    Trailing(String),
}

/// Parse `text` into a formula, resolving quantifier and atom names against
/// `registry`. Node ids are assigned in preorder.
pub fn parse(text: &str, registry: &Registry) -> Result<Formula, ParseError> {
    let mut p = Parser {
        src: text,
        pos: 0,
        registry,
    };
    let f = p.formula()?;
    p.skip_ws();
    if let Some(c) = p.peek() {
        if !is_token_char(c) {
            return Err(p.error(ParseErrorKind::Lexical(c as char)));
        }
        return Err(p.error(ParseErrorKind::Trailing(p.src[p.pos..].to_string())));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    registry: &'a Registry,
}

impl<'a> Parser<'a> {
    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            offset: self.pos,
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8, what: &'static str) -> Result<(), ParseError> {
        match self.peek() {
            Some(found) if found == c => {
                self.pos += 1;
                Ok(())
            }
            Some(_) => Err(self.unexpected(what)),
            None => Err(self.error(ParseErrorKind::Eof(what))),
        }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        let found: String = self.src[self.pos..].chars().take(8).collect();
        self.error(ParseErrorKind::Unexpected { expected, found })
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let bytes = self.src.as_bytes();
        let start = self.pos;
        match bytes.get(start) {
            Some(c) if c.is_ascii_alphabetic() || *c == b'_' => {}
            _ => return None,
        }
        let mut end = start + 1;
        while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
            end += 1;
        }
        self.pos = end;
        Some(&self.src[start..end])
    }

    fn var(&mut self) -> Result<VarName, ParseError> {
        match self.ident() {
            Some(name) => Ok(VarName(name.to_string())),
            None => Err(self.expect_failure("variable")),
        }
    }

    fn expect_failure(&mut self, what: &'static str) -> ParseError {
        match self.peek() {
            None => self.error(ParseErrorKind::Eof(what)),
            Some(c) if !is_token_char(c) => self.error(ParseErrorKind::Lexical(c as char)),
            Some(_) => self.unexpected(what),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.conj()?;
        while self.eat(b'|') {
            let right = self.conj()?;
            left = Formula::or(left, right);
        }
        Ok(left)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.unary()?;
        while self.eat(b'&') {
            let right = self.unary()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.eat(b'~') {
            return Ok(Formula::not(self.unary()?));
        }
        if let Some(which) = self.sugar_quantifier() {
            let x = self.var()?;
            self.expect(b'.', "'.'")?;
            let body = self.unary()?;
            let quant = self
                .registry
                .quantifier(which)
                .map_err(|e| self.gq_error(e))?;
            return Formula::quant1(quant, x, body).map_err(|e| self.syntax_error(e));
        }
        self.primary()
    }

    /// Detects `E x.` / `A x.` without consuming anything else.
    fn sugar_quantifier(&mut self) -> Option<&'static str> {
        let save = self.pos;
        let which = match self.ident() {
            Some("E") => "exists",
            Some("A") => "forall",
            _ => {
                self.pos = save;
                return None;
            }
        };
        let after_kw = self.pos;
        let is_sugar = self.ident().is_some() && self.peek() == Some(b'.');
        self.pos = if is_sugar { after_kw } else { save };
        is_sugar.then_some(which)
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            None => Err(self.error(ParseErrorKind::Eof("formula"))),
            Some(b'(') => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(b')', "')'")?;
                Ok(f)
            }
            Some(b'@') => self.generalized_atom(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.ident().unwrap();
                if name == "Q" && self.peek_raw() == Some(b'<') {
                    return self.quantified();
                }
                match self.peek() {
                    Some(b'=') => {
                        self.pos += 1;
                        let rhs = self.var()?;
                        Ok(Formula::eq(VarName(name.to_string()), rhs))
                    }
                    Some(b'(') => {
                        self.pos += 1;
                        let args = self.var_list()?;
                        self.expect(b')', "')'")?;
                        Ok(Formula::rel(name, VarTuple(args)))
                    }
                    _ => {
                        self.pos = start + name.len();
                        Err(self.unexpected("'=' or '(' after identifier"))
                    }
                }
            }
            Some(c) if is_token_char(c) => Err(self.unexpected("formula")),
            Some(c) => Err(self.error(ParseErrorKind::Lexical(c as char))),
        }
    }

    fn var_list(&mut self) -> Result<Vec<VarName>, ParseError> {
        let mut vars = vec![self.var()?];
        while self.eat(b',') {
            vars.push(self.var()?);
        }
        Ok(vars)
    }

    fn tuple(&mut self) -> Result<VarTuple, ParseError> {
        if self.eat(b'(') {
            let vars = self.var_list()?;
            self.expect(b')', "')'")?;
            Ok(VarTuple(vars))
        } else {
            Ok(VarTuple(vec![self.var()?]))
        }
    }

    /// After `Q`; the cursor sits on `<`.
    fn quantified(&mut self) -> Result<Formula, ParseError> {
        self.pos += 1;
        let name = self.qname()?;
        self.expect(b'>', "'>' closing quantifier name")?;
        self.registry
            .quantifier(&name)
            .map_err(|e| self.gq_error(e))?;
        let mut tuples = vec![self.tuple()?];
        while self.eat(b',') {
            tuples.push(self.tuple()?);
        }
        let arities: Vec<usize> = tuples.iter().map(VarTuple::len).collect();
        let quant = self
            .registry
            .quantifier_for(&name, &arities)
            .map_err(|e| self.gq_error(e))?;
        self.expect(b'.', "'.'")?;
        self.expect(b'(', "'(' opening quantifier body")?;
        let mut subs = vec![self.formula()?];
        while self.eat(b',') {
            subs.push(self.formula()?);
        }
        self.expect(b')', "')' closing quantifier body")?;
        Formula::quant(quant, tuples, subs).map_err(|e| self.syntax_error(e))
    }

    fn qname(&mut self) -> Result<String, ParseError> {
        let Some(head) = self.ident() else {
            return Err(self.expect_failure("quantifier name"));
        };
        if head == "dual" && self.eat(b'(') {
            let inner = self.qname()?;
            self.expect(b')', "')' closing dual(...)")?;
            return Ok(format!("dual({inner})"));
        }
        let mut name = head.to_string();
        if self.peek_raw() == Some(b'<') {
            self.pos += 1;
            name.push('<');
            loop {
                self.skip_ws();
                let start = self.pos;
                while self.peek_raw().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.unexpected("numeric quantifier parameter"));
                }
                name.push_str(&self.src[start..self.pos]);
                if self.eat(b',') {
                    name.push(',');
                } else {
                    break;
                }
            }
            self.expect(b'>', "'>' closing quantifier parameters")?;
            name.push('>');
        }
        Ok(name)
    }

    fn generalized_atom(&mut self) -> Result<Formula, ParseError> {
        self.pos += 1;
        if self.peek_raw() != Some(b'<') {
            return Err(self.unexpected("'<' after '@'"));
        }
        self.pos += 1;
        let Some(name) = self.ident() else {
            return Err(self.expect_failure("atom name"));
        };
        self.expect(b'>', "'>' closing atom name")?;
        self.registry.atom(name).map_err(|e| self.gq_error(e))?;
        self.expect(b'(', "'(' opening atom arguments")?;
        let pos = self.tuple_list(b';')?;
        if !self.eat(b';') {
            return Err(self.error(ParseErrorKind::MalformedTuples(
                "generalized atom arguments need a ';' separator".into(),
            )));
        }
        let neg = self.tuple_list(b')')?;
        self.expect(b')', "')' closing atom arguments")?;
        if pos.is_empty() && neg.is_empty() {
            return Err(self.error(ParseErrorKind::MalformedTuples(
                "generalized atom needs at least one argument tuple".into(),
            )));
        }
        let lens = |ts: &[VarTuple]| ts.iter().map(VarTuple::len).collect::<Vec<_>>();
        let atom = self
            .registry
            .atom_for(name, &lens(&pos), &lens(&neg))
            .map_err(|e| self.gq_error(e))?;
        Formula::atom(atom, pos, neg).map_err(|e| self.syntax_error(e))
    }

    fn tuple_list(&mut self, terminator: u8) -> Result<Vec<VarTuple>, ParseError> {
        if self.peek() == Some(terminator) {
            return Ok(vec![]);
        }
        let mut out = vec![self.tuple()?];
        while self.eat(b',') {
            out.push(self.tuple()?);
        }
        Ok(out)
    }

    fn gq_error(&self, e: GqError) -> ParseError {
        let kind = match e {
            GqError::UnknownQuantifier(n) => ParseErrorKind::UnknownQuantifier(n),
            GqError::UnknownAtom(n) => ParseErrorKind::UnknownAtom(n),
            other => ParseErrorKind::TypeMismatch(other.to_string()),
        };
        self.error(kind)
    }

    fn syntax_error(&self, e: SyntaxError) -> ParseError {
        match e {
            SyntaxError::TypeMismatch(m) => self.error(ParseErrorKind::TypeMismatch(m)),
            other => self.error(ParseErrorKind::MalformedTuples(other.to_string())),
        }
    }
}

fn is_token_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || b"_~|&()=<>@;,.".contains(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{var, FormulaKind};

    fn reg() -> Registry {
        Registry::builtin()
    }

    #[test]
    fn disjunction_with_negation() {
        let f = parse("P(x) | ~P(x)", &reg()).unwrap();
        let ids: Vec<_> = f.preorder().iter().map(|n| n.id()).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        let FormulaKind::Or(l, r) = f.kind() else {
            panic!("expected disjunction")
        };
        assert_eq!(**l, Formula::rel("P", VarTuple::of(&["x"])));
        assert!(matches!(r.kind(), FormulaKind::Not(_)));
    }

    #[test]
    fn counterexample_formula() {
        let f = parse("Q<dual(empty)> x . (@<none>(x ; x))", &reg()).unwrap();
        let FormulaKind::Quant { quant, tuples, subs } = f.kind() else {
            panic!("expected quantifier")
        };
        assert_eq!(quant.name(), "dual(empty)");
        assert_eq!(tuples, &vec![VarTuple::of(&["x"])]);
        let FormulaKind::Atom { atom, pos, neg } = subs[0].kind() else {
            panic!("expected atom")
        };
        assert_eq!(atom.name(), "none");
        assert_eq!(pos, &vec![VarTuple::of(&["x"])]);
        assert_eq!(neg, &vec![VarTuple::of(&["x"])]);
    }

    #[test]
    fn arity_mismatch_is_type_error() {
        let err = parse("Q<exists> (x,y),(z) . (P(x))", &reg()).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::TypeMismatch(_)), "{err}");
    }

    #[test]
    fn unknown_names() {
        let err = parse("Q<zzz> x . (P(x))", &reg()).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownQuantifier("zzz".into()));
        let err = parse("@<zzz>(x ; x)", &reg()).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownAtom("zzz".into()));
    }

    #[test]
    fn lexical_error() {
        let err = parse("P(x) $ P(y)", &reg()).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Lexical('$'));
    }

    #[test]
    fn conjunction_is_sugar() {
        let f = parse("P(x) & x = y", &reg()).unwrap();
        let g = parse("~(~P(x) | ~x = y)", &reg()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn precedence_and_associativity() {
        let r = reg();
        assert_eq!(
            parse("P(x) | P(y) & P(z)", &r).unwrap(),
            parse("P(x) | (P(y) & P(z))", &r).unwrap()
        );
        assert_eq!(
            parse("P(x) | P(y) | P(z)", &r).unwrap(),
            parse("(P(x) | P(y)) | P(z)", &r).unwrap()
        );
        assert_eq!(
            parse("E x. P(x) | P(y)", &r).unwrap(),
            parse("(E x. P(x)) | P(y)", &r).unwrap()
        );
    }

    #[test]
    fn sugar_quantifiers_and_relation_named_e() {
        let r = reg();
        let f = parse("A x. E y. E(x,y)", &r).unwrap();
        let FormulaKind::Quant { quant, .. } = f.kind() else {
            panic!()
        };
        assert_eq!(quant.name(), "forall");
        assert_eq!(
            f,
            parse("Q<forall> x . (Q<exists> y . (E(x,y)))", &r).unwrap()
        );
        let g = parse("E = x", &r).unwrap();
        assert_eq!(g, Formula::eq(var("E"), var("x")));
    }

    #[test]
    fn parametric_and_nested_dual_names() {
        let r = reg();
        let f = parse("Q<dual(dual(at_least<2>))> x . (P(x))", &r).unwrap();
        let FormulaKind::Quant { quant, .. } = f.kind() else {
            panic!()
        };
        assert_eq!(quant.name(), "at_least<2>");
    }

    #[test]
    fn atom_with_empty_side_and_malformed_groups() {
        let r = reg();
        assert!(parse("@<double>(x ; x, y)", &r).is_err());
        assert!(matches!(
            parse("@<none>(x)", &r).unwrap_err().kind,
            ParseErrorKind::MalformedTuples(_)
        ));
        assert!(parse("Q<most> x, y . (P(x))", &r).is_err());
        let f = parse("Q<most> x, y . (P(x), P(y))", &r).unwrap();
        assert_eq!(f.size(), 3);
    }

    #[test]
    fn trailing_and_eof() {
        let r = reg();
        assert!(matches!(
            parse("P(x) P(y)", &r).unwrap_err().kind,
            ParseErrorKind::Trailing(_)
        ));
        assert!(matches!(
            parse("P(x) |", &r).unwrap_err().kind,
            ParseErrorKind::Eof(_)
        ));
    }
}
