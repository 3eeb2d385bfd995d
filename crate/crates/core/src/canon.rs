//! RDF dataset canonicalization (RDFC-1.0 / URDNA2015).
//!
//! Blank nodes are labeled `c14n0`, `c14n1`, ... from SHA-256 hashes of
//! their surroundings, so isomorphic datasets serialize to identical
//! N-Quads. Nodes that first-degree hashes cannot tell apart are resolved by
//! the n-degree procedure, which explores permutations of related nodes;
//! [`CanonicalizeOptions`] bounds that exploration.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rdf::{quad_line, serialize_nquads, Dataset, Quad, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CanonError {
    #[error("canonicalization budget exhausted: {0}")]
    ComplexityLimitExceeded(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanonicalizeOptions {
    /// Deepest allowed nesting of n-degree hash calls.
    pub max_depth: usize,
    /// Permutations one n-degree hash call may explore (8! by default).
    pub max_permutations: u64,
}

impl Default for CanonicalizeOptions {
    fn default() -> Self {
        Self { max_depth: 50, max_permutations: 40_320 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalizationResult {
    /// Input blank-node label → canonical label.
    pub labels: BTreeMap<String, String>,
    pub nquads: String,
}

fn sha256_hex(data: &str) -> String {
    hex::encode(Sha256::digest(data.as_bytes()))
}

#[derive(Debug, Clone)]
struct IdIssuer {
    prefix: &'static str,
    counter: usize,
    issued: HashMap<String, String>,
    order: Vec<String>,
}

impl IdIssuer {
    fn new(prefix: &'static str) -> Self {
        Self { prefix, counter: 0, issued: HashMap::new(), order: Vec::new() }
    }

    fn issue(&mut self, existing: &str) -> String {
        if let Some(id) = self.issued.get(existing) {
            return id.clone();
        }
        let id = format!("{}{}", self.prefix, self.counter);
        self.counter += 1;
        self.issued.insert(existing.to_string(), id.clone());
        self.order.push(existing.to_string());
        id
    }

    fn get(&self, existing: &str) -> Option<&String> {
        self.issued.get(existing)
    }
}

struct State<'a> {
    quads_by_node: HashMap<&'a str, Vec<&'a Quad>>,
    first_degree: HashMap<&'a str, String>,
    canonical: IdIssuer,
    options: CanonicalizeOptions,
}

impl<'a> State<'a> {
    fn hash_first_degree(&self, node: &str) -> String {
        let mut lines: Vec<String> = self.quads_by_node[node]
            .iter()
            .map(|q| {
                quad_line(q, &|l| Some(if l == node { "a" } else { "z" }.to_string()))
                    .expect("placeholder labeling covers every node")
            })
            .collect();
        lines.sort_unstable();
        sha256_hex(&lines.concat())
    }

    fn hash_related(&self, related: &str, quad: &Quad, issuer: &IdIssuer, position: char) -> String {
        let mut input = String::new();
        input.push(position);
        if position != 'g' {
            input.push('<');
            input.push_str(quad.predicate());
            input.push('>');
        }
        if let Some(id) = self.canonical.get(related).or_else(|| issuer.get(related)) {
            input.push_str("_:");
            input.push_str(id);
        } else {
            input.push_str(&self.first_degree[related]);
        }
        sha256_hex(&input)
    }

    fn hash_n_degree(&self, node: &str, issuer: IdIssuer, depth: usize) -> Result<(String, IdIssuer), CanonError> {
        if depth > self.options.max_depth {
            return Err(CanonError::ComplexityLimitExceeded(format!(
                "n-degree recursion deeper than {}",
                self.options.max_depth
            )));
        }
        let mut issuer = issuer;
        let mut hash_to_related: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for quad in &self.quads_by_node[node] {
            for (term, position) in quad.node_positions().into_iter().zip(['s', 'o', 'g']) {
                let Some(related) = term.and_then(Term::blank_label) else {
                    continue;
                };
                if related == node {
                    continue;
                }
                let hash = self.hash_related(related, quad, &issuer, position);
                hash_to_related.entry(hash).or_default().push(related);
            }
        }

        let mut budget = self.options.max_permutations;
        let mut data_to_hash = String::new();
        for (hash, related) in hash_to_related {
            data_to_hash.push_str(&hash);
            let n = related.len();
            let permutations: u64 = (1..=n as u64).try_fold(1u64, |acc, k| acc.checked_mul(k)).unwrap_or(u64::MAX);
            if permutations > budget {
                return Err(CanonError::ComplexityLimitExceeded(format!(
                    "{permutations} permutations of {n} related blank nodes exceed the remaining budget of {budget}"
                )));
            }
            budget -= permutations;

            let mut chosen_path = String::new();
            let mut chosen_issuer: Option<IdIssuer> = None;
            'perm: for permutation in related.iter().copied().permutations(n) {
                let mut issuer_copy = issuer.clone();
                let mut path = String::new();
                let mut recursion = Vec::new();
                for r in &permutation {
                    if let Some(id) = self.canonical.get(r) {
                        path.push_str("_:");
                        path.push_str(id);
                    } else {
                        if issuer_copy.get(r).is_none() {
                            recursion.push(*r);
                        }
                        path.push_str("_:");
                        path.push_str(&issuer_copy.issue(r));
                    }
                    if !chosen_path.is_empty() && path.len() >= chosen_path.len() && path > chosen_path {
                        continue 'perm;
                    }
                }
                for r in recursion {
                    let (result_hash, result_issuer) = self.hash_n_degree(r, issuer_copy.clone(), depth + 1)?;
                    path.push_str("_:");
                    path.push_str(&issuer_copy.issue(r));
                    path.push('<');
                    path.push_str(&result_hash);
                    path.push('>');
                    issuer_copy = result_issuer;
                    if !chosen_path.is_empty() && path.len() >= chosen_path.len() && path > chosen_path {
                        continue 'perm;
                    }
                }
                if chosen_path.is_empty() || path < chosen_path {
                    chosen_path = path;
                    chosen_issuer = Some(issuer_copy);
                }
            }
            data_to_hash.push_str(&chosen_path);
            if let Some(chosen) = chosen_issuer {
                issuer = chosen;
            }
        }
        Ok((sha256_hex(&data_to_hash), issuer))
    }
}

pub fn canonicalize(dataset: &Dataset) -> Result<CanonicalizationResult, CanonError> {
    canonicalize_with(dataset, CanonicalizeOptions::default())
}

pub fn canonicalize_with(
    dataset: &Dataset,
    options: CanonicalizeOptions,
) -> Result<CanonicalizationResult, CanonError> {
    let mut quads_by_node: HashMap<&str, Vec<&Quad>> = HashMap::new();
    for quad in dataset {
        for label in quad.node_positions().into_iter().flatten().filter_map(Term::blank_label) {
            let entry = quads_by_node.entry(label).or_default();
            // A quad mentioning the same node twice is listed once.
            if !entry.last().is_some_and(|q| std::ptr::eq(*q, quad)) {
                entry.push(quad);
            }
        }
    }

    let mut state = State { quads_by_node, first_degree: HashMap::new(), canonical: IdIssuer::new("c14n"), options };

    let mut hash_to_nodes: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    let mut nodes: Vec<&str> = state.quads_by_node.keys().copied().collect();
    nodes.sort_unstable();
    for node in nodes {
        let hash = state.hash_first_degree(node);
        state.first_degree.insert(node, hash.clone());
        hash_to_nodes.entry(hash).or_default().push(node);
    }

    let mut shared = Vec::new();
    for (hash, group) in hash_to_nodes {
        if group.len() == 1 {
            state.canonical.issue(group[0]);
        } else {
            shared.push((hash, group));
        }
    }

    for (_, group) in shared {
        let mut results = Vec::new();
        for node in group {
            if state.canonical.get(node).is_some() {
                continue;
            }
            let mut temporary = IdIssuer::new("b");
            temporary.issue(node);
            results.push(state.hash_n_degree(node, temporary, 0)?);
        }
        results.sort_by(|a, b| a.0.cmp(&b.0));
        for (_, issuer) in results {
            for existing in &issuer.order {
                state.canonical.issue(existing);
            }
        }
    }

    let labels: BTreeMap<String, String> = state.canonical.issued.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let nquads = serialize_nquads(dataset, &labels).expect("every blank node received a canonical label");
    Ok(CanonicalizationResult { labels, nquads })
}
