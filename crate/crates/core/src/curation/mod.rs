//! Requirement-level curation: judge candidates, select one output per
//! prompt, compute RFR/FRFR and export fine-tuning data.
//!
//! RFR is the fraction of requirement questions answered yes over all
//! questions of the selected candidates; FRFR is the fraction of prompts
//! whose selected candidate satisfies every question. Only envelopes whose
//! proof verifies are judged, selected or exported.

mod constraint;
mod judge;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use uuid::Uuid;

use crate::envelope::AigcEnvelope;
use crate::generation::extract_thought;
use crate::par::parallel_map;
use crate::prompt::{ModuleKind, StructuredPrompt};
use crate::proof::{verify_envelope, KeyResolver};

pub use constraint::{judge_rule, word_count, Constraint};
pub use judge::{
    judge_external, judge_prompt, parse_verdict, ExternalJudge, Judge, MixedJudge, RuleJudge, JUDGE_RETRIES,
    JUDGE_TEMPLATE, JUDGE_TEMPLATE_VERSION,
};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("prompt has no Requirements module")]
    NoRequirementsModule,
    #[error("invalid constraint {0}")]
    InvalidConstraint(String),
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),
    #[error("no yes/no verdict for question {question_id} after {} replies: {replies:?}", .replies.len())]
    UnparseableVerdict { question_id: String, replies: Vec<String> },
    #[error("every candidate for prompt {prompt_id} failed verification")]
    AllCandidatesUnverifiable { prompt_id: String, exclusions: Vec<Exclusion> },
    #[error("no prompt has any requirement question")]
    NoQuestions,
    #[error("selected envelope {0} does not verify: {1}")]
    UnverifiedEnvelopeInSelection(Uuid, String),
    #[error("selected envelope {0} is not in the corpus")]
    MissingEnvelope(Uuid),
    #[error("questions file line {line}: {message}")]
    QuestionsFile { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementQuestion {
    pub id: String,
    pub prompt_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeKind {
    Rule,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub question_id: String,
    pub verdict: Verdict,
    pub judge: JudgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub envelope_id: Uuid,
    pub judgments: Vec<Judgment>,
    pub satisfied: u64,
    pub total: u64,
    pub all_satisfied: bool,
}

impl CandidateScore {
    pub fn from_judgments(envelope_id: Uuid, judgments: Vec<Judgment>) -> Self {
        let satisfied = judgments.iter().filter(|j| j.verdict == Verdict::Yes).count() as u64;
        let total = judgments.len() as u64;
        Self { envelope_id, judgments, satisfied, total, all_satisfied: satisfied == total }
    }

    /// `satisfied / total` compared exactly; 0/0 counts as complete.
    fn cmp_ratio(&self, other: &Self) -> Ordering {
        let (a, b) = if self.total == 0 { (1, 1) } else { (self.satisfied, self.total) };
        let (c, d) = if other.total == 0 { (1, 1) } else { (other.satisfied, other.total) };
        (a as u128 * d as u128).cmp(&(c as u128 * b as u128))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub envelope_id: Uuid,
    pub reason: String,
}

/// Content-addressed prompt id: `p-` + 12 hex digits of SHA-256 of the
/// rendered Markdown.
pub fn prompt_id(prompt: &StructuredPrompt) -> String {
    let digest = Sha256::digest(prompt.rendered().as_bytes());
    format!("p-{}", &hex::encode(digest)[..12])
}

/// Numbered (`1.`, `2)`) or bulleted (`-`, `*`, `+`, `•`) list items.
static LIST_ITEM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\d+[.)]|[-*+•])\s+(\S.*)$").expect("valid regex"));

/// One question per list item of the Requirements module; text without list
/// items becomes a single question. Unmarked lines continue the previous item.
pub fn derive_questions(prompt_id: &str, prompt: &StructuredPrompt) -> Result<Vec<RequirementQuestion>, CurationError> {
    let module = prompt.module(ModuleKind::Requirements).ok_or(CurationError::NoRequirementsModule)?;
    let mut items: Vec<String> = Vec::new();
    let mut preamble = false;
    for line in module.value().lines() {
        if let Some(c) = LIST_ITEM.captures(line) {
            items.push(c[1].trim().to_string());
        } else if let Some(last) = items.last_mut() {
            if !line.trim().is_empty() {
                last.push(' ');
                last.push_str(line.trim());
            }
        } else if !line.trim().is_empty() {
            preamble = true;
        }
    }
    if items.is_empty() {
        items.push(module.value().split_whitespace().collect::<Vec<_>>().join(" "));
    } else if preamble {
        log::debug!("{prompt_id}: text before the first requirement item is not a question");
    }
    Ok(items
        .into_iter()
        .enumerate()
        .map(|(i, item)| RequirementQuestion {
            id: format!("q{}", i + 1),
            prompt_id: prompt_id.to_string(),
            question: format!("Does the output satisfy: {item}?"),
            check: None,
        })
        .collect())
}

/// Reads a questions JSONL file: `{prompt_id, id, question, check?}` per line.
pub fn parse_questions_jsonl(text: &str) -> Result<BTreeMap<String, Vec<RequirementQuestion>>, CurationError> {
    let mut by_prompt: BTreeMap<String, Vec<RequirementQuestion>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: RequirementQuestion = serde_json::from_str(line)
            .map_err(|e| CurationError::QuestionsFile { line: i + 1, message: e.to_string() })?;
        let list = by_prompt.entry(q.prompt_id.clone()).or_default();
        if list.iter().any(|o| o.id == q.id) {
            return Err(CurationError::QuestionsFile {
                line: i + 1,
                message: format!("duplicate question id {} for prompt {}", q.id, q.prompt_id),
            });
        }
        list.push(q);
    }
    Ok(by_prompt)
}

/// Output of [`evaluate_candidates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scores: Vec<CandidateScore>,
    pub exclusions: Vec<Exclusion>,
}

/// Text judged and exported: the content value without any thought block.
pub fn reusable_text(envelope: &AigcEnvelope) -> String {
    extract_thought(&envelope.subject.value).1
}

/// Verifies each envelope, then judges the survivors on every question in
/// order. Work runs on up to `concurrency` threads; output keeps input order.
pub fn evaluate_candidates(
    prompt_id: &str,
    envelopes: &[AigcEnvelope],
    questions: &[RequirementQuestion],
    judge: &dyn Judge,
    resolver: &dyn KeyResolver,
    concurrency: usize,
) -> Result<Evaluation, CurationError> {
    if questions.is_empty() {
        log::warn!("prompt {prompt_id} has no requirement questions; candidates count as satisfied");
    }
    let outcomes = parallel_map(envelopes, concurrency, |env| {
        let result = verify_envelope(env, resolver);
        if !result.is_verified() {
            return Ok(Err(Exclusion { envelope_id: env.id, reason: result.to_string() }));
        }
        let content = reusable_text(env);
        let judgments = questions.iter().map(|q| judge.judge(&content, q)).collect::<Result<Vec<_>, _>>()?;
        Ok(Ok(CandidateScore::from_judgments(env.id, judgments)))
    });
    let mut scores = Vec::new();
    let mut exclusions = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(score) => scores.push(score),
            Err(exclusion) => {
                log::warn!("excluding {} from {prompt_id}: {}", exclusion.envelope_id, exclusion.reason);
                exclusions.push(exclusion);
            }
        }
    }
    if scores.is_empty() {
        return Err(CurationError::AllCandidatesUnverifiable { prompt_id: prompt_id.to_string(), exclusions });
    }
    Ok(Evaluation { scores, exclusions })
}

/// Tie-break data for [`select_best`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInfo {
    pub confidence_mean: Option<f64>,
    pub model_label: String,
}

impl CandidateInfo {
    pub fn of(envelope: &AigcEnvelope) -> Self {
        Self {
            confidence_mean: envelope.subject.confidence.as_ref().map(|c| c.mean),
            model_label: envelope.subject.model.label.clone(),
        }
    }
}

/// Highest `satisfied/total`, then higher confidence mean (missing ranks
/// lowest), then smaller model label, then smaller envelope id.
pub fn select_best(scores: &[CandidateScore], info: &BTreeMap<Uuid, CandidateInfo>) -> Option<Uuid> {
    let conf = |s: &CandidateScore| info.get(&s.envelope_id).and_then(|i| i.confidence_mean);
    let label = |s: &CandidateScore| info.get(&s.envelope_id).map(|i| i.model_label.as_str()).unwrap_or("");
    scores
        .iter()
        .max_by(|a, b| {
            a.cmp_ratio(b)
                .then_with(|| match (conf(a), conf(b)) {
                    (Some(x), Some(y)) => x.total_cmp(&y),
                    (x, y) => x.is_some().cmp(&y.is_some()),
                })
                .then_with(|| label(b).cmp(label(a)))
                .then_with(|| b.envelope_id.cmp(&a.envelope_id))
        })
        .map(|s| s.envelope_id)
}

/// Uniform choice per prompt, visiting prompts in id order with a ChaCha
/// stream seeded by `seed`.
pub fn select_random(candidates: &BTreeMap<String, Vec<Uuid>>, seed: u64) -> BTreeMap<String, Uuid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.iter().filter(|(_, c)| !c.is_empty()).map(|(p, c)| (p.clone(), c[rng.gen_range(0..c.len())])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rfr: f64,
    pub frfr: f64,
    pub prompts: u64,
    pub questions: u64,
    pub yes: u64,
    pub fully_satisfied: u64,
}

/// RFR and FRFR over the selected candidate of each prompt. Prompts without
/// questions count toward FRFR as satisfied but add nothing to RFR.
pub fn compute_metrics<'a>(selected: impl IntoIterator<Item = &'a CandidateScore>) -> Result<Metrics, CurationError> {
    let (mut prompts, mut questions, mut yes, mut full, mut empty) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for s in selected {
        prompts += 1;
        questions += s.total;
        yes += s.satisfied;
        full += u64::from(s.all_satisfied);
        empty += u64::from(s.total == 0);
    }
    if questions == 0 {
        return Err(CurationError::NoQuestions);
    }
    if empty > 0 {
        log::warn!("{empty} of {prompts} prompts have no questions: counted as fully satisfied, excluded from RFR");
    }
    Ok(Metrics {
        rfr: yes as f64 / questions as f64,
        frfr: full as f64 / prompts as f64,
        prompts,
        questions,
        yes,
        fully_satisfied: full,
    })
}

/// Two-row percentage table with two decimals.
pub fn metrics_table(m: &Metrics) -> String {
    format!(
        "| Metric | Score (%) |\n|--------|-----------|\n| RFR    | {:>9.2} |\n| FRFR   | {:>9.2} |\n",
        m.rfr * 100.0,
        m.frfr * 100.0
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum SelectionPolicy {
    Best,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptReport {
    pub scores: Vec<CandidateScore>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub policy: SelectionPolicy,
    pub prompts: BTreeMap<String, PromptReport>,
    pub selected: BTreeMap<String, Uuid>,
    pub rfr: f64,
    pub frfr: f64,
    pub metrics: Metrics,
}

/// Envelopes grouped by [`prompt_id`], keeping input order within a group.
pub fn group_by_prompt(envelopes: Vec<AigcEnvelope>) -> BTreeMap<String, Vec<AigcEnvelope>> {
    let mut groups: BTreeMap<String, Vec<AigcEnvelope>> = BTreeMap::new();
    for env in envelopes {
        groups.entry(prompt_id(&env.subject.prompt)).or_default().push(env);
    }
    groups
}

/// Evaluates every prompt group, selects per `policy` and computes metrics.
/// Prompts missing from `questions` get questions derived from their
/// Requirements module.
pub fn curate(
    groups: &BTreeMap<String, Vec<AigcEnvelope>>,
    questions: &BTreeMap<String, Vec<RequirementQuestion>>,
    judge: &dyn Judge,
    resolver: &dyn KeyResolver,
    policy: SelectionPolicy,
    concurrency: usize,
) -> Result<CurationReport, CurationError> {
    let mut prompts = BTreeMap::new();
    let mut info = BTreeMap::new();
    for (pid, envelopes) in groups {
        let derived;
        let qs = match questions.get(pid) {
            Some(qs) => qs,
            None => {
                derived = derive_questions(pid, &envelopes[0].subject.prompt)?;
                &derived
            }
        };
        let evaluation = evaluate_candidates(pid, envelopes, qs, judge, resolver, concurrency)?;
        for env in envelopes {
            info.insert(env.id, CandidateInfo::of(env));
        }
        prompts.insert(pid.clone(), PromptReport { scores: evaluation.scores, exclusions: evaluation.exclusions });
    }
    let selected: BTreeMap<String, Uuid> = match policy {
        SelectionPolicy::Best => {
            prompts.iter().filter_map(|(p, r)| select_best(&r.scores, &info).map(|id| (p.clone(), id))).collect()
        }
        SelectionPolicy::Random { seed } => {
            let candidates =
                prompts.iter().map(|(p, r)| (p.clone(), r.scores.iter().map(|s| s.envelope_id).collect())).collect();
            select_random(&candidates, seed)
        }
    };
    let chosen = selected.iter().map(|(p, id)| {
        prompts[p].scores.iter().find(|s| s.envelope_id == *id).expect("selection comes from the scores")
    });
    let metrics = compute_metrics(chosen)?;
    Ok(CurationReport { policy, prompts, selected, rfr: metrics.rfr, frfr: metrics.frfr, metrics })
}

#[derive(Debug, Serialize)]
struct FinetuneMeta<'a> {
    envelope_id: String,
    model_label: &'a str,
    confidence_mean: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FinetuneLine<'a> {
    prompt: &'a str,
    completion: String,
    meta: FinetuneMeta<'a>,
}

/// One JSON object per selected envelope, in prompt-id order:
/// `{"prompt", "completion", "meta": {envelope_id, model_label, confidence_mean}}`.
/// Every selected envelope is re-verified first.
pub fn export_finetune(
    selection: &BTreeMap<String, Uuid>,
    envelopes: &BTreeMap<Uuid, AigcEnvelope>,
    resolver: &dyn KeyResolver,
) -> Result<String, CurationError> {
    let mut out = String::new();
    for id in selection.values() {
        let env = envelopes.get(id).ok_or(CurationError::MissingEnvelope(*id))?;
        let result = verify_envelope(env, resolver);
        if !result.is_verified() {
            return Err(CurationError::UnverifiedEnvelopeInSelection(*id, result.to_string()));
        }
        let line = FinetuneLine {
            prompt: env.subject.prompt.rendered(),
            completion: reusable_text(env),
            meta: FinetuneMeta {
                envelope_id: env.urn(),
                model_label: &env.subject.model.label,
                confidence_mean: env.subject.confidence.as_ref().map(|c| c.mean),
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("plain values serialize"));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::PromptModule;

    fn prompt_with(requirements: &str) -> StructuredPrompt {
        StructuredPrompt::new(vec![
            PromptModule::new(ModuleKind::Role, "You are a writer.").unwrap(),
            PromptModule::new(ModuleKind::Requirements, requirements).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn numbered_requirements_split_in_order() {
        let qs = derive_questions("p", &prompt_with("1. ≤200 words\n2. mention the investor")).unwrap();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].question, "Does the output satisfy: ≤200 words?");
        assert_eq!(qs[1].question, "Does the output satisfy: mention the investor?");
        assert_eq!((qs[0].id.as_str(), qs[1].id.as_str()), ("q1", "q2"));
    }

    #[test]
    fn bullets_continuations_and_fallback() {
        let qs = derive_questions("p", &prompt_with("Please:\n- be brief\n  and polite\n* cite sources")).unwrap();
        let texts: Vec<_> = qs.iter().map(|q| q.question.as_str()).collect();
        assert_eq!(texts, ["Does the output satisfy: be brief and polite?", "Does the output satisfy: cite sources?"]);
        let qs = derive_questions("p", &prompt_with("Write one friendly paragraph\nabout spring.")).unwrap();
        assert_eq!(qs.len(), 1);
        assert_eq!(qs[0].question, "Does the output satisfy: Write one friendly paragraph about spring.?");
    }

    #[test]
    fn missing_requirements() {
        let p = StructuredPrompt::new(vec![PromptModule::new(ModuleKind::Role, "x").unwrap()]).unwrap();
        assert!(matches!(derive_questions("p", &p), Err(CurationError::NoRequirementsModule)));
    }

    fn score(id: u128, yes: usize, total: usize) -> CandidateScore {
        let judgments = (0..total)
            .map(|i| Judgment {
                question_id: format!("q{i}"),
                verdict: Verdict::from(i < yes),
                judge: JudgeKind::Rule,
                rationale: None,
            })
            .collect();
        CandidateScore::from_judgments(Uuid::from_u128(id), judgments)
    }

    fn info(entries: &[(u128, Option<f64>, &str)]) -> BTreeMap<Uuid, CandidateInfo> {
        entries
            .iter()
            .map(|&(id, c, l)| (Uuid::from_u128(id), CandidateInfo { confidence_mean: c, model_label: l.into() }))
            .collect()
    }

    #[test]
    fn best_selection_and_tie_breaks() {
        let scores = [score(1, 2, 3), score(2, 3, 3), score(3, 1, 3)];
        assert_eq!(select_best(&scores, &BTreeMap::new()), Some(Uuid::from_u128(2)));

        let tied = [score(1, 3, 3), score(2, 3, 3)];
        let i = info(&[(1, Some(-0.5), "a"), (2, Some(-0.3), "b")]);
        assert_eq!(select_best(&tied, &i), Some(Uuid::from_u128(2)));
        let i = info(&[(1, Some(-0.3), "b"), (2, Some(-0.3), "a")]);
        assert_eq!(select_best(&tied, &i), Some(Uuid::from_u128(2)));
        let i = info(&[(1, Some(-0.3), "a"), (2, Some(-0.3), "a")]);
        assert_eq!(select_best(&tied, &i), Some(Uuid::from_u128(1)));
        let i = info(&[(1, None, "a"), (2, Some(-9.0), "z")]);
        assert_eq!(select_best(&tied, &i), Some(Uuid::from_u128(2)));

        assert_eq!(select_best(&[score(7, 0, 2)], &BTreeMap::new()), Some(Uuid::from_u128(7)));
        assert_eq!(select_best(&[], &BTreeMap::new()), None);
        // 2/4 and 1/2 tie exactly; 2/3 beats 3/5.
        assert_eq!(score(1, 2, 4).cmp_ratio(&score(2, 1, 2)), Ordering::Equal);
        assert_eq!(score(1, 2, 3).cmp_ratio(&score(2, 3, 5)), Ordering::Greater);
    }

    #[test]
    fn metric_formulas() {
        let s = [score(1, 2, 3), score(2, 2, 2), score(3, 0, 1)];
        let m = compute_metrics(&s).unwrap();
        assert_eq!((m.yes, m.questions, m.fully_satisfied, m.prompts), (4, 6, 1, 3));
        assert_eq!(m.rfr, 4.0 / 6.0);
        assert_eq!(m.frfr, 1.0 / 3.0);
        let table = metrics_table(&m);
        assert!(table.contains("| RFR    |     66.67 |"), "{table}");
        assert!(table.contains("| FRFR   |     33.33 |"), "{table}");

        let all_yes = compute_metrics(&[score(1, 3, 3), score(2, 1, 1)]).unwrap();
        assert_eq!((all_yes.rfr, all_yes.frfr), (1.0, 1.0));
        let all_no = compute_metrics(&[score(1, 0, 3), score(2, 0, 1)]).unwrap();
        assert_eq!((all_no.rfr, all_no.frfr), (0.0, 0.0));
        assert!(matches!(compute_metrics(&[score(1, 0, 0)]), Err(CurationError::NoQuestions)));
        let vacuous = score(1, 0, 0);
        assert!(vacuous.all_satisfied);
    }

    #[test]
    fn random_selection() {
        let mut candidates = BTreeMap::new();
        for p in 0..10_000u128 {
            candidates.insert(
                format!("p{p:05}"),
                vec![Uuid::from_u128(p * 3), Uuid::from_u128(p * 3 + 1), Uuid::from_u128(p * 3 + 2)],
            );
        }
        let a = select_random(&candidates, 42);
        assert_eq!(a, select_random(&candidates, 42));
        assert_ne!(a, select_random(&candidates, 43));
        let mut counts = [0f64; 3];
        for (p, id) in &a {
            let idx = candidates[p].iter().position(|c| c == id).unwrap();
            counts[idx] += 1.0;
        }
        let n = 10_000f64;
        let sigma = (n * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c - n / 3.0).abs() <= 3.0 * sigma, "{counts:?}");
        }
        let single: BTreeMap<_, _> = [("p".to_string(), vec![Uuid::from_u128(5)])].into();
        assert_eq!(select_random(&single, 1)["p"], Uuid::from_u128(5));
    }

    #[test]
    fn questions_jsonl() {
        let text = "{\"prompt_id\":\"p\",\"id\":\"q1\",\"question\":\"Short?\",\"check\":\"max_words(5)\"}\n\n{\"prompt_id\":\"p\",\"id\":\"q2\",\"question\":\"Polite?\"}\n";
        let qs = parse_questions_jsonl(text).unwrap();
        assert_eq!(qs["p"].len(), 2);
        assert_eq!(qs["p"][0].check, Some(Constraint::MaxWords(5)));
        let dup = "{\"prompt_id\":\"p\",\"id\":\"q1\",\"question\":\"a\"}\n{\"prompt_id\":\"p\",\"id\":\"q1\",\"question\":\"b\"}\n";
        assert!(matches!(parse_questions_jsonl(dup), Err(CurationError::QuestionsFile { line: 2, .. })));
        let bad = "{\"prompt_id\":\"p\",\"id\":\"q1\",\"question\":\"a\",\"check\":\"max_words(x)\"}\n";
        assert!(matches!(parse_questions_jsonl(bad), Err(CurationError::QuestionsFile { line: 1, .. })));
    }
}
