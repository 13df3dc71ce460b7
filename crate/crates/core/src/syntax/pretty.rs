use std::fmt::Write;

use super::{Formula, FormulaKind, VarTuple};

/// Render a formula in the concrete syntax accepted by [`super::parse`].
///
/// Quantifiers are always printed in the explicit `Q<name>` form and
/// conjunctions appear in their desugared shape, so the output re-parses to a
/// structurally equal tree.
pub fn pretty(phi: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, phi, false);
    out
}

// `tight` is set where a disjunction would need parentheses: the operand
// of `~` and the right operand of `|`.
fn write_formula(out: &mut String, phi: &Formula, tight: bool) {
    match phi.kind() {
        FormulaKind::Eq(a, b) => {
            let _ = write!(out, "{a} = {b}");
        }
        FormulaKind::Rel { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, v) in args.vars().iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(v.as_str());
            }
            out.push(')');
        }
        FormulaKind::Not(sub) => {
            out.push('~');
            write_formula(out, sub, true);
        }
        FormulaKind::Or(l, r) => {
            if tight {
                out.push('(');
            }
            write_formula(out, l, false);
            out.push_str(" | ");
            write_formula(out, r, true);
            if tight {
                out.push(')');
            }
        }
        FormulaKind::Quant { quant, tuples, subs } => {
            let _ = write!(out, "Q<{}> ", quant.name());
            write_tuples(out, tuples);
            out.push_str(" . (");
            for (i, s) in subs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_formula(out, s, false);
            }
            out.push(')');
        }
        FormulaKind::Atom { atom, pos, neg } => {
            let _ = write!(out, "@<{}>(", atom.name());
            write_tuples(out, pos);
            out.push_str(if pos.is_empty() { "; " } else { " ; " });
            write_tuples(out, neg);
            out.push(')');
        }
    }
}

fn write_tuples(out: &mut String, tuples: &[VarTuple]) {
    for (i, t) in tuples.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{t}");
    }
}
