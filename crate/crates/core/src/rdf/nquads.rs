use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Dataset, Literal, Quad, RdfError, Term};
use crate::vocab::{RDF_LANG_STRING, XSD_STRING};

fn escape_literal(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c < ' ' || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
}

fn write_term(out: &mut String, term: &Term, label: &dyn Fn(&str) -> Option<String>) -> Result<(), RdfError> {
    match term {
        Term::Iri(iri) => {
            out.push('<');
            out.push_str(iri);
            out.push('>');
        }
        Term::BlankNode(l) => {
            let mapped = label(l).ok_or_else(|| RdfError::MissingLabel(l.clone()))?;
            out.push_str("_:");
            out.push_str(&mapped);
        }
        Term::Literal(Literal { lexical, datatype, language }) => {
            out.push('"');
            escape_literal(out, lexical);
            out.push('"');
            if let Some(lang) = language {
                out.push('@');
                out.push_str(lang);
            } else if datatype != XSD_STRING {
                out.push_str("^^<");
                out.push_str(datatype);
                out.push('>');
            }
        }
    }
    Ok(())
}

/// One N-Quads statement (with trailing newline), relabeling blank nodes via `label`.
pub(crate) fn quad_line(quad: &Quad, label: &dyn Fn(&str) -> Option<String>) -> Result<String, RdfError> {
    let mut out = String::new();
    write_term(&mut out, &quad.subject, label)?;
    out.push_str(" <");
    out.push_str(&quad.predicate);
    out.push_str("> ");
    write_term(&mut out, &quad.object, label)?;
    if let Some(g) = &quad.graph {
        out.push(' ');
        write_term(&mut out, g, label)?;
    }
    out.push_str(" .\n");
    Ok(out)
}

/// A single term in N-Quads syntax; blank nodes are relabeled via `labels` when given.
pub fn term_to_nquads(term: &Term, labels: Option<&BTreeMap<String, String>>) -> Result<String, RdfError> {
    let mut out = String::new();
    match labels {
        Some(map) => write_term(&mut out, term, &|l| map.get(l).cloned())?,
        None => write_term(&mut out, term, &|l| Some(l.to_string()))?,
    }
    Ok(out)
}

fn sorted_lines(dataset: &Dataset, label: &dyn Fn(&str) -> Option<String>) -> Result<String, RdfError> {
    let mut lines = dataset.iter().map(|q| quad_line(q, label)).collect::<Result<Vec<_>, _>>()?;
    lines.sort_unstable();
    lines.dedup();
    Ok(lines.concat())
}

/// Sorted N-Quads with blank nodes renamed through `labels`.
pub fn serialize_nquads(dataset: &Dataset, labels: &BTreeMap<String, String>) -> Result<String, RdfError> {
    sorted_lines(dataset, &|l| labels.get(l).cloned())
}

/// Sorted N-Quads keeping the dataset's own blank-node labels.
pub fn to_nquads(dataset: &Dataset) -> String {
    sorted_lines(dataset, &|l| Some(l.to_string())).expect("identity labeling covers every node")
}

struct LineParser<'a> {
    s: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, message: impl Into<String>) -> RdfError {
        RdfError::Parse { line: self.line, message: message.into() }
    }

    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn skip_ws(&mut self) {
        let r = self.rest();
        self.pos += r.len() - r.trim_start_matches([' ', '\t']).len();
    }

    fn iri(&mut self) -> Result<String, RdfError> {
        let r = self.rest();
        let end = r.find('>').ok_or_else(|| self.err("unterminated IRI"))?;
        let raw = &r[1..end];
        let iri = if raw.contains('\\') { unescape(raw, true).map_err(|m| self.err(m))? } else { raw.to_string() };
        if iri.chars().any(|c| c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`')) {
            return Err(self.err(format!("invalid character in IRI <{iri}>")));
        }
        self.pos += end + 1;
        Ok(iri)
    }

    fn term(&mut self) -> Result<Term, RdfError> {
        self.skip_ws();
        let r = self.rest();
        if r.starts_with('<') {
            return self.iri().map(Term::Iri);
        }
        if let Some(after) = r.strip_prefix("_:") {
            let len = after.find(|c: char| c.is_whitespace()).unwrap_or(after.len());
            let label = &after[..len];
            self.pos += 2 + len;
            return Term::try_blank(label).map_err(|e| self.err(e.to_string()));
        }
        if r.starts_with('"') {
            let bytes = r.as_bytes();
            let mut i = 1;
            while i < bytes.len() && bytes[i] != b'"' {
                i += if bytes[i] == b'\\' { 2 } else { 1 };
            }
            if i >= bytes.len() {
                return Err(self.err("unterminated literal"));
            }
            let lexical = unescape(&r[1..i], false).map_err(|m| self.err(m))?;
            self.pos += i + 1;
            let r = self.rest();
            if let Some(after) = r.strip_prefix('@') {
                let len = after.find(|c: char| !(c.is_ascii_alphanumeric() || c == '-')).unwrap_or(after.len());
                if len == 0 {
                    return Err(self.err("empty language tag"));
                }
                self.pos += 1 + len;
                return Ok(Term::lang_string(lexical, &after[..len]));
            }
            if r.starts_with("^^") {
                self.pos += 2;
                if !self.rest().starts_with('<') {
                    return Err(self.err("datatype must be an IRI"));
                }
                let dt = self.iri()?;
                if dt == RDF_LANG_STRING {
                    return Err(self.err("rdf:langString literal without a language tag"));
                }
                return Ok(Term::typed(lexical, dt));
            }
            return Ok(Term::string(lexical));
        }
        Err(self.err(format!("unexpected {:?}", r.chars().next().unwrap_or(' '))))
    }
}

fn unescape(s: &str, iri: bool) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        let e = chars.next().ok_or("dangling backslash")?;
        let hex_len = match e {
            'u' => 4,
            'U' => 8,
            _ if iri => return Err(format!("invalid IRI escape \\{e}")),
            't' => {
                out.push('\t');
                continue;
            }
            'b' => {
                out.push('\u{8}');
                continue;
            }
            'n' => {
                out.push('\n');
                continue;
            }
            'r' => {
                out.push('\r');
                continue;
            }
            'f' => {
                out.push('\u{c}');
                continue;
            }
            '"' | '\'' | '\\' => {
                out.push(e);
                continue;
            }
            other => return Err(format!("invalid escape \\{other}")),
        };
        let hex: String = chars.by_ref().take(hex_len).collect();
        let c = (hex.len() == hex_len)
            .then(|| u32::from_str_radix(&hex, 16).ok())
            .flatten()
            .and_then(char::from_u32)
            .ok_or_else(|| format!("invalid \\{e} escape"))?;
        out.push(c);
    }
    Ok(out)
}

/// Minimal N-Quads reader: one statement per line, `#` comments, no
/// relative IRIs.
pub fn parse_nquads(text: &str) -> Result<Dataset, RdfError> {
    let mut dataset = Dataset::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut p = LineParser { s: line, pos: 0, line: idx + 1 };
        let subject = p.term()?;
        p.skip_ws();
        if !p.rest().starts_with('<') {
            return Err(p.err("predicate must be an IRI"));
        }
        let predicate = p.iri()?;
        let object = p.term()?;
        p.skip_ws();
        let graph = if p.rest().starts_with('.') { None } else { Some(p.term()?) };
        p.skip_ws();
        if !p.rest().starts_with('.') {
            return Err(p.err("expected '.'"));
        }
        p.pos += 1;
        p.skip_ws();
        if !(p.rest().is_empty() || p.rest().starts_with('#')) {
            return Err(p.err("trailing content after '.'"));
        }
        let quad = Quad::new(subject, predicate, object, graph).map_err(|e| p.err(e.to_string()))?;
        dataset.insert(quad);
    }
    Ok(dataset)
}
