//! Line-oriented text formats for queries, update streams and delta answers.
//!
//! Records are single lines with tab-separated fields. Terms are written as
//! `<iri>` (opaque, no normalization), `"literal"` with backslash escapes
//! for `"` and `\`, or `?name` for variables (queries only). Tabs and
//! newlines cannot occur inside terms, which keeps the format unambiguous
//! and diffable.
//!
//! Update stream lines: `<time> TAB ins|del TAB term TAB term TAB term`.
//! Query files: one pattern per line (`term TAB term TAB term`), optionally
//! preceded by an `OUTPUT ?V1 ?V2 ...` line fixing the output order.
//! Delta lines: `<time> TAB +|- TAB v1 TAB v2 ...`; ground answers carry
//! nothing after the sign.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::{
    Answer, DataTriple, DeltaAnswer, ModelError, Query, Term, TriplePattern, UpdateMessage,
    UpdateOp,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    VariablePredicate,
    DuplicatePattern,
    OutputMismatch(String),
    NonMonotonicTime,
}

/// A parse failure with its 1-based line number (0 for whole-file errors).
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax(reason) => write!(f, "line {}: {}", self.line, reason),
            ParseErrorKind::VariablePredicate => {
                write!(f, "line {}: predicates cannot be variables", self.line)
            }
            ParseErrorKind::DuplicatePattern => {
                write!(f, "line {}: duplicate pattern", self.line)
            }
            ParseErrorKind::OutputMismatch(reason) => {
                write!(f, "line {}: output pattern mismatch: {}", self.line, reason)
            }
            ParseErrorKind::NonMonotonicTime => write!(
                f,
                "line {}: update times must strictly increase",
                self.line
            ),
        }
    }
}

fn syntax(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError {
        line,
        kind: ParseErrorKind::Syntax(reason.into()),
    }
}

/// Parses one term field: `<iri>`, `"literal"` or `?name`.
pub fn parse_term(field: &str, line: usize) -> Result<Term, ParseError> {
    if let Some(rest) = field.strip_prefix('<') {
        return match rest.strip_suffix('>') {
            Some(iri) => Ok(Term::iri(iri)),
            None => Err(syntax(line, format!("unterminated IRI `{field}`"))),
        };
    }
    if let Some(rest) = field.strip_prefix('"') {
        let mut value = String::new();
        let mut chars = rest.chars();
        loop {
            match chars.next() {
                Some('\\') => match chars.next() {
                    Some(c @ ('"' | '\\')) => value.push(c),
                    Some(c) => {
                        return Err(syntax(line, format!("unknown escape `\\{c}` in literal")))
                    }
                    None => return Err(syntax(line, "unterminated escape in literal")),
                },
                Some('"') => {
                    return if chars.next().is_none() {
                        Ok(Term::literal(value))
                    } else {
                        Err(syntax(line, "content after closing quote"))
                    };
                }
                Some(c) => value.push(c),
                None => return Err(syntax(line, format!("unterminated literal `{field}`"))),
            }
        }
    }
    if let Some(name) = field.strip_prefix('?') {
        if name.is_empty() {
            return Err(syntax(line, "variable with empty name"));
        }
        return Ok(Term::variable(name));
    }
    Err(syntax(
        line,
        format!("unrecognized term `{field}` (expected <iri>, \"literal\" or ?var)"),
    ))
}

/// Serializes a term in the wire syntax. Inverse of [`parse_term`] for terms
/// free of tabs and newlines.
pub fn write_term(t: &Term) -> String {
    t.to_string()
}

/// Parses one update line: `<time> TAB ins|del TAB s TAB p TAB o`.
pub fn parse_update_line(line_text: &str, line: usize) -> Result<UpdateMessage, ParseError> {
    let fields: Vec<&str> = line_text.split('\t').collect();
    if fields.len() != 5 {
        return Err(syntax(
            line,
            format!("expected 5 tab-separated fields, found {}", fields.len()),
        ));
    }
    let time: u64 = fields[0]
        .parse()
        .map_err(|_| syntax(line, format!("invalid time `{}`", fields[0])))?;
    let op = match fields[1] {
        "ins" => UpdateOp::Ins,
        "del" => UpdateOp::Del,
        other => return Err(syntax(line, format!("invalid operation `{other}`"))),
    };
    let s = parse_term(fields[2], line)?;
    let p = parse_term(fields[3], line)?;
    let o = parse_term(fields[4], line)?;
    for t in [&s, &p, &o] {
        if t.is_variable() {
            return Err(syntax(line, "variables are not allowed in update streams"));
        }
    }
    let triple = DataTriple::new(s, p, o).map_err(|e| syntax(line, e.to_string()))?;
    Ok(UpdateMessage { time, op, triple })
}

/// Parses a whole update stream, enforcing strictly increasing times.
pub fn parse_stream(input: &str) -> Result<Vec<UpdateMessage>, ParseError> {
    let mut messages: Vec<UpdateMessage> = Vec::new();
    for (i, line_text) in input.lines().enumerate() {
        let line = i + 1;
        let u = parse_update_line(line_text, line)?;
        if let Some(last) = messages.last() {
            if u.time <= last.time {
                return Err(ParseError {
                    line,
                    kind: ParseErrorKind::NonMonotonicTime,
                });
            }
        }
        messages.push(u);
    }
    Ok(messages)
}

/// Parses a query file. Pattern order in the file is the query's canonical
/// pattern enumeration.
pub fn parse_query(input: &str) -> Result<Query, ParseError> {
    let mut lines = input.lines().enumerate().peekable();
    let mut output: Option<(usize, Vec<Term>)> = None;
    if let Some((_, first)) = lines.peek() {
        if first.split_whitespace().next() == Some("OUTPUT") {
            let (i, first) = lines.next().unwrap();
            let line = i + 1;
            let mut vars = Vec::new();
            for token in first.split_whitespace().skip(1) {
                let term = parse_term(token, line)?;
                if !term.is_variable() {
                    return Err(ParseError {
                        line,
                        kind: ParseErrorKind::OutputMismatch(format!(
                            "{token} is not a variable"
                        )),
                    });
                }
                vars.push(term);
            }
            output = Some((line, vars));
        }
    }

    let mut patterns: Vec<TriplePattern> = Vec::new();
    let mut seen: BTreeSet<TriplePattern> = BTreeSet::new();
    for (i, line_text) in lines {
        let line = i + 1;
        let fields: Vec<&str> = line_text.split('\t').collect();
        if fields.len() != 3 {
            return Err(syntax(
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let s = parse_term(fields[0], line)?;
        let p = parse_term(fields[1], line)?;
        let o = parse_term(fields[2], line)?;
        if p.is_variable() {
            return Err(ParseError {
                line,
                kind: ParseErrorKind::VariablePredicate,
            });
        }
        let pattern = TriplePattern::new(s, p, o).map_err(|e| syntax(line, e.to_string()))?;
        if !seen.insert(pattern.clone()) {
            return Err(ParseError {
                line,
                kind: ParseErrorKind::DuplicatePattern,
            });
        }
        patterns.push(pattern);
    }

    match output {
        Some((line, vars)) => Query::new(patterns, vars).map_err(|e| match e {
            ModelError::OutputMismatch(reason) => ParseError {
                line,
                kind: ParseErrorKind::OutputMismatch(reason),
            },
            other => syntax(0, other.to_string()),
        }),
        None => Query::with_inferred_output(patterns).map_err(|e| syntax(0, e.to_string())),
    }
}

/// One delta answer as a wire line, without the trailing newline. Ground
/// answers carry only time and sign.
pub fn delta_line(d: &DeltaAnswer) -> String {
    let mut line = format!("{}\t{}", d.time, d.sign);
    for v in d.answer.values() {
        line.push('\t');
        line.push_str(&write_term(v));
    }
    line
}

/// One update message as a wire line, without the trailing newline.
pub fn update_line(u: &UpdateMessage) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}",
        u.time,
        u.op,
        write_term(u.triple.subject()),
        write_term(u.triple.predicate()),
        write_term(u.triple.object())
    )
}

/// One consolidated answer as a wire line: the values tab-joined; the empty
/// tuple of a ground query becomes the empty line.
pub fn answer_line(a: &Answer) -> String {
    a.values()
        .iter()
        .map(write_term)
        .collect::<Vec<_>>()
        .join("\t")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sign;
    use crate::test_util::*;
    use proptest::prelude::*;

    #[test]
    fn parses_simple_insert() {
        let u = parse_update_line("1\tins\t<a>\t<p>\t<b>", 1).unwrap();
        assert_eq!(u, UpdateMessage::ins(1, dt("a", "p", "b")));
    }

    #[test]
    fn parses_escaped_literal_object() {
        let u = parse_update_line("2\tdel\t<a>\t<p>\t\"x \\\"q\\\"\"", 1).unwrap();
        assert_eq!(u.op, UpdateOp::Del);
        assert_eq!(u.triple.object(), &Term::literal("x \"q\""));
    }

    #[test]
    fn rejects_literal_subject_and_stream_variables() {
        assert!(parse_update_line("1\tins\t\"lit\"\t<p>\t<b>", 1).is_err());
        assert!(parse_update_line("1\tins\t?X\t<p>\t<b>", 1).is_err());
        assert!(parse_update_line("1\tins\t<a>\t\"p\"\t<b>", 1).is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_update_line("1\tins\t<a>\t<p>", 1).is_err());
        assert!(parse_update_line("x\tins\t<a>\t<p>\t<b>", 1).is_err());
        assert!(parse_update_line("1\tput\t<a>\t<p>\t<b>", 1).is_err());
        assert!(parse_update_line("1\tins\t<a\t<p>\t<b>", 1).is_err());
        assert!(parse_update_line("1\tins\t<a>\t<p>\t\"x\\y\"", 1).is_err());
    }

    #[test]
    fn stream_times_must_increase() {
        let input = "1\tins\t<a>\t<p>\t<b>\n1\tdel\t<a>\t<p>\t<b>";
        let err = parse_stream(input).unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.kind, ParseErrorKind::NonMonotonicTime);
    }

    #[test]
    fn parses_single_pattern_query() {
        let q = parse_query("?X\t<p>\t<b>").unwrap();
        assert_eq!(q.patterns(), &[tp(var("X"), iri("p"), iri("b"))]);
        assert_eq!(q.output(), &[var("X")]);
    }

    #[test]
    fn output_line_fixes_the_order() {
        let q = parse_query("OUTPUT ?Y ?X\n?X\t<p>\t?Y").unwrap();
        assert_eq!(q.output(), &[var("Y"), var("X")]);
    }

    #[test]
    fn query_errors() {
        assert_eq!(
            parse_query("<a>\t?P\t<b>").unwrap_err().kind,
            ParseErrorKind::VariablePredicate
        );
        assert_eq!(
            parse_query("?X\t<p>\t<b>\n?X\t<p>\t<b>").unwrap_err().kind,
            ParseErrorKind::DuplicatePattern
        );
        assert!(matches!(
            parse_query("OUTPUT ?X ?Z\n?X\t<p>\t?Y").unwrap_err().kind,
            ParseErrorKind::OutputMismatch(_)
        ));
        assert!(matches!(
            parse_query("OUTPUT ?X\n?X\t<p>\t?Y").unwrap_err().kind,
            ParseErrorKind::OutputMismatch(_)
        ));
        assert!(parse_query("\"lit\"\t<p>\t<b>").is_err());
        assert!(parse_query("").is_err());
    }

    #[test]
    fn delta_lines_are_bit_exact() {
        let d = DeltaAnswer::new(7, Sign::Positive, answer(&[iri("a"), iri("b")]));
        assert_eq!(delta_line(&d), "7\t+\t<a>\t<b>");
        let ground = DeltaAnswer::new(3, Sign::Negative, Answer::empty());
        assert_eq!(delta_line(&ground), "3\t-");
        let lit = DeltaAnswer::new(5, Sign::Positive, answer(&[Term::literal("x")]));
        assert_eq!(delta_line(&lit), "5\t+\t\"x\"");
    }

    /// Terms without tabs or newlines, which the line format can carry.
    fn arb_wire_term() -> impl Strategy<Value = Term> {
        prop_oneof![
            proptest::string::string_regex("[ -~]{0,12}")
                .unwrap()
                .prop_map(Term::iri),
            proptest::string::string_regex("[ -~]{0,12}")
                .unwrap()
                .prop_map(Term::literal),
        ]
    }

    proptest! {
        #[test]
        fn update_lines_round_trip(
            time in 0u64..1_000_000,
            op in prop_oneof![Just(UpdateOp::Ins), Just(UpdateOp::Del)],
            s in arb_wire_term(),
            p in arb_wire_term(),
            o in arb_wire_term(),
        ) {
            prop_assume!(s.is_iri() && p.is_iri());
            let u = UpdateMessage { time, op, triple: DataTriple::new(s, p, o).unwrap() };
            let line = update_line(&u);
            prop_assert_eq!(parse_update_line(&line, 1).unwrap(), u);
        }

        #[test]
        fn terms_round_trip(t in arb_wire_term()) {
            prop_assert_eq!(parse_term(&write_term(&t), 1).unwrap(), t);
        }
    }
}
