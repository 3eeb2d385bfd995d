//! RDF terms, quads and datasets, N-Quads text, and the envelope mapping.

mod mapping;
mod nquads;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::vocab::{RDF_LANG_STRING, XSD_STRING};

pub use mapping::{envelope_to_dataset, format_double, proof_options_dataset};
pub(crate) use nquads::quad_line;
pub use nquads::{parse_nquads, serialize_nquads, term_to_nquads, to_nquads};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RdfError {
    #[error("blank node _:{0} has no label in the label map")]
    MissingLabel(String),
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("N-Quads line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub lexical: String,
    pub datatype: String,
    pub language: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(String),
    /// Label without the `_:` prefix.
    BlankNode(String),
    Literal(Literal),
}

fn valid_blank_label(label: &str) -> bool {
    !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric())
}

impl Term {
    pub fn iri(iri: impl Into<String>) -> Self {
        Term::Iri(iri.into())
    }

    /// Panics when `label` is not `[A-Za-z0-9]+`; use [`Term::try_blank`] for
    /// untrusted labels.
    pub fn blank(label: impl Into<String>) -> Self {
        Self::try_blank(label).expect("blank-node labels are alphanumeric")
    }

    pub fn try_blank(label: impl Into<String>) -> Result<Self, RdfError> {
        let label = label.into();
        if valid_blank_label(&label) {
            Ok(Term::BlankNode(label))
        } else {
            Err(RdfError::InvalidTerm(format!("blank-node label {label:?}")))
        }
    }

    pub fn string(lexical: impl Into<String>) -> Self {
        Self::typed(lexical, XSD_STRING)
    }

    pub fn typed(lexical: impl Into<String>, datatype: impl Into<String>) -> Self {
        Term::Literal(Literal { lexical: lexical.into(), datatype: datatype.into(), language: None })
    }

    pub fn lang_string(lexical: impl Into<String>, language: impl Into<String>) -> Self {
        Term::Literal(Literal {
            lexical: lexical.into(),
            datatype: RDF_LANG_STRING.into(),
            language: Some(language.into()),
        })
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Term::BlankNode(_))
    }

    pub fn blank_label(&self) -> Option<&str> {
        match self {
            Term::BlankNode(l) => Some(l),
            _ => None,
        }
    }

    fn check(&self) -> Result<(), RdfError> {
        match self {
            Term::Iri(i) if i.is_empty() => Err(RdfError::InvalidTerm("empty IRI".into())),
            Term::BlankNode(l) if !valid_blank_label(l) => {
                Err(RdfError::InvalidTerm(format!("blank-node label {l:?}")))
            }
            Term::Literal(l) if l.language.is_some() != (l.datatype == RDF_LANG_STRING) => {
                Err(RdfError::InvalidTerm("language tags go with rdf:langString only".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&term_to_nquads(self, None).map_err(|_| fmt::Error)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quad {
    subject: Term,
    predicate: String,
    object: Term,
    /// `None` is the default graph.
    graph: Option<Term>,
}

impl Quad {
    pub fn new(
        subject: Term,
        predicate: impl Into<String>,
        object: Term,
        graph: Option<Term>,
    ) -> Result<Self, RdfError> {
        if matches!(subject, Term::Literal(_)) {
            return Err(RdfError::InvalidTerm("literal in subject position".into()));
        }
        if matches!(graph, Some(Term::Literal(_))) {
            return Err(RdfError::InvalidTerm("literal as graph name".into()));
        }
        let predicate = predicate.into();
        if predicate.is_empty() {
            return Err(RdfError::InvalidTerm("empty predicate IRI".into()));
        }
        subject.check()?;
        object.check()?;
        if let Some(g) = &graph {
            g.check()?;
        }
        Ok(Self { subject, predicate, object, graph })
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn object(&self) -> &Term {
        &self.object
    }

    pub fn graph(&self) -> Option<&Term> {
        self.graph.as_ref()
    }

    /// Subject, object and graph name, in that order.
    pub fn node_positions(&self) -> [Option<&Term>; 3] {
        [Some(&self.subject), Some(&self.object), self.graph.as_ref()]
    }

    /// Copy with every blank node passed through `f`.
    pub fn map_blanks(&self, mut f: impl FnMut(&str) -> Term) -> Quad {
        let mut m = |t: &Term| match t {
            Term::BlankNode(l) => f(l),
            other => other.clone(),
        };
        Quad {
            subject: m(&self.subject),
            predicate: self.predicate.clone(),
            object: m(&self.object),
            graph: self.graph.as_ref().map(m),
        }
    }
}

/// A set of quads; inserting an existing quad is a no-op.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    quads: BTreeSet<Quad>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the quad was new.
    pub fn insert(&mut self, quad: Quad) -> bool {
        self.quads.insert(quad)
    }

    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Quad> {
        self.quads.iter()
    }

    pub fn contains(&self, quad: &Quad) -> bool {
        self.quads.contains(quad)
    }

    /// Distinct blank-node labels, sorted.
    pub fn blank_nodes(&self) -> BTreeSet<&str> {
        self.quads.iter().flat_map(|q| q.node_positions()).flatten().filter_map(Term::blank_label).collect()
    }
}

impl FromIterator<Quad> for Dataset {
    fn from_iter<I: IntoIterator<Item = Quad>>(iter: I) -> Self {
        Self { quads: iter.into_iter().collect() }
    }
}

impl Extend<Quad> for Dataset {
    fn extend<I: IntoIterator<Item = Quad>>(&mut self, iter: I) {
        self.quads.extend(iter)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Quad;
    type IntoIter = std::collections::btree_set::Iter<'a, Quad>;

    fn into_iter(self) -> Self::IntoIter {
        self.quads.iter()
    }
}
