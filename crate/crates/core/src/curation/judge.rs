//! Rule-based and model-based requirement judges.

use crate::client::{ChatClient, ChatMessage, ChatRequest};

use super::constraint::judge_rule;
use super::{CurationError, JudgeKind, Judgment, RequirementQuestion, Verdict};

/// Versioned judge prompt; `{question}` and `{content}` are substituted.
pub const JUDGE_TEMPLATE: &str = include_str!("../../prompts/judge-v1.txt");
pub const JUDGE_TEMPLATE_VERSION: &str = "judge-v1";
/// Extra attempts after an unparseable reply.
pub const JUDGE_RETRIES: usize = 2;

pub trait Judge: Send + Sync {
    fn judge(&self, content: &str, question: &RequirementQuestion) -> Result<Judgment, CurationError>;
}

/// Judges questions by their machine check; questions without one are an
/// error rather than a silent "no".
#[derive(Debug, Default, Clone, Copy)]
pub struct RuleJudge;

impl Judge for RuleJudge {
    fn judge(&self, content: &str, question: &RequirementQuestion) -> Result<Judgment, CurationError> {
        let check = question.check.as_ref().ok_or_else(|| {
            CurationError::JudgeUnavailable(format!("question {} has no machine check for the rule judge", question.id))
        })?;
        Ok(Judgment {
            question_id: question.id.clone(),
            verdict: judge_rule(content, check),
            judge: JudgeKind::Rule,
            rationale: Some(check.to_string()),
        })
    }
}

/// Asks a chat model; see [`judge_external`].
pub struct ExternalJudge<'a> {
    pub client: &'a dyn ChatClient,
    pub model: String,
}

impl Judge for ExternalJudge<'_> {
    fn judge(&self, content: &str, question: &RequirementQuestion) -> Result<Judgment, CurationError> {
        judge_external(content, question, self.client, &self.model)
    }
}

/// Uses the rule judge when a check exists and the external judge otherwise.
pub struct MixedJudge<'a> {
    pub external: ExternalJudge<'a>,
}

impl Judge for MixedJudge<'_> {
    fn judge(&self, content: &str, question: &RequirementQuestion) -> Result<Judgment, CurationError> {
        match question.check {
            Some(_) => RuleJudge.judge(content, question),
            None => self.external.judge(content, question),
        }
    }
}

/// `yes`/`no` as the first word, ignoring case, quotes and punctuation.
pub fn parse_verdict(reply: &str) -> Option<Verdict> {
    let word: String = reply
        .trim()
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" => Some(Verdict::Yes),
        "no" => Some(Verdict::No),
        _ => None,
    }
}

pub fn judge_prompt(content: &str, question: &str) -> String {
    JUDGE_TEMPLATE.replace("{question}", question).replace("{content}", content)
}

pub fn judge_external(
    content: &str,
    question: &RequirementQuestion,
    client: &dyn ChatClient,
    model: &str,
) -> Result<Judgment, CurationError> {
    let request = ChatRequest {
        model: model.to_string(),
        messages: vec![ChatMessage::user(judge_prompt(content, &question.question))],
        temperature: 0.0,
        max_tokens: 4,
        logprobs: false,
    };
    let mut replies = Vec::new();
    for _ in 0..=JUDGE_RETRIES {
        let reply = client.complete(&request).map_err(|e| CurationError::JudgeUnavailable(e.to_string()))?;
        if let Some(verdict) = parse_verdict(&reply.text) {
            return Ok(Judgment {
                question_id: question.id.clone(),
                verdict,
                judge: JudgeKind::External,
                rationale: Some(reply.text.trim().to_string()),
            });
        }
        replies.push(reply.text);
    }
    Err(CurationError::UnparseableVerdict { question_id: question.id.clone(), replies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{ChatResponse, MockChatClient};

    fn q() -> RequirementQuestion {
        RequirementQuestion {
            id: "q1".into(),
            prompt_id: "p".into(),
            question: "Does the output satisfy: mention the investor?".into(),
            check: None,
        }
    }

    #[test]
    fn verdict_parser_table() {
        for (reply, expected) in [
            ("yes", Some(Verdict::Yes)),
            ("Yes.", Some(Verdict::Yes)),
            ("  YES, it does", Some(Verdict::Yes)),
            ("\"no\"", Some(Verdict::No)),
            ("No.", Some(Verdict::No)),
            ("**No**", Some(Verdict::No)),
            ("maybe", None),
            ("nope", None),
            ("yesterday", None),
            ("", None),
        ] {
            assert_eq!(parse_verdict(reply), expected, "{reply:?}");
        }
    }

    #[test]
    fn scripted_yes_and_no() {
        let client = MockChatClient::scripted(vec![ChatResponse::text("yes")]);
        assert_eq!(judge_external("c", &q(), &client, "judge").unwrap().verdict, Verdict::Yes);
        let client = MockChatClient::scripted(vec![ChatResponse::text("No.")]);
        assert_eq!(judge_external("c", &q(), &client, "judge").unwrap().verdict, Verdict::No);
        let prompt = &client.requests()[0].messages[0].content;
        assert!(prompt.contains("mention the investor") && prompt.contains("\nc\n"));
    }

    #[test]
    fn retries_then_gives_up() {
        let client = MockChatClient::scripted(vec![ChatResponse::text("maybe"); 3]);
        assert!(matches!(
            judge_external("c", &q(), &client, "judge"),
            Err(CurationError::UnparseableVerdict { ref replies, .. }) if replies.len() == 3
        ));
        assert_eq!(client.requests().len(), 3);

        let client = MockChatClient::scripted(vec![ChatResponse::text("maybe"), ChatResponse::text("yes")]);
        assert_eq!(judge_external("c", &q(), &client, "judge").unwrap().verdict, Verdict::Yes);
    }

    #[test]
    fn endpoint_failure_is_unavailable() {
        let client = MockChatClient::scripted(vec![]);
        assert!(matches!(judge_external("c", &q(), &client, "judge"), Err(CurationError::JudgeUnavailable(_))));
    }

    #[test]
    fn rule_judge_requires_check() {
        assert!(matches!(RuleJudge.judge("c", &q()), Err(CurationError::JudgeUnavailable(_))));
        let mut with = q();
        with.check = Some("must_include(\"investor\")".parse().unwrap());
        assert_eq!(RuleJudge.judge("the investor", &with).unwrap().verdict, Verdict::Yes);
    }
}
