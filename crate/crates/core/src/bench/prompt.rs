use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::kg::RelationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    QaOnly,
    QaWithTriple,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qa_only" => Ok(Variant::QaOnly),
            "qa_with_triple" => Ok(Variant::QaWithTriple),
            other => Err(format!("unknown variant {other:?} (expected qa_only or qa_with_triple)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum Strategy {
    ZeroShot,
    FewShot(usize),
    Cot,
}

impl Strategy {
    pub fn demo_count(self) -> usize {
        match self {
            Strategy::FewShot(k) => k,
            Strategy::ZeroShot | Strategy::Cot => 0,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    /// `zero_shot`, `cot`, or `few_shot:<k>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "zero_shot" => Ok(Strategy::ZeroShot),
            None if s == "cot" => Ok(Strategy::Cot),
            Some(("few_shot", k)) => k
                .parse()
                .ok()
                .filter(|&k| k > 0)
                .map(Strategy::FewShot)
                .ok_or_else(|| format!("bad demonstration count {k:?}")),
            _ => Err(format!("unknown strategy {s:?} (expected zero_shot, few_shot:<k> or cot)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::ZeroShot => f.write_str("zero_shot"),
            Strategy::FewShot(k) => write!(f, "few_shot:{k}"),
            Strategy::Cot => f.write_str("cot"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub variant: Variant,
    pub strategy: Strategy,
}

impl PromptTemplate {
    pub fn new(variant: Variant, strategy: Strategy) -> Result<Self, BenchError> {
        if strategy == Strategy::Cot && variant == Variant::QaOnly {
            return Err(BenchError::Argument(
                "step-by-step prompting is only defined for the qa_with_triple variant".into(),
            ));
        }
        Ok(PromptTemplate { variant, strategy })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub story: String,
    pub response: String,
}

/// `(A, relation phrase, B)` as written in a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextTriple {
    pub source: String,
    pub relation: RelationKind,
    pub target: String,
}

impl TextTriple {
    /// Flat "A relation B" text used for scoring.
    pub fn as_text(&self) -> String {
        format!("{} {} {}", self.source, self.relation.phrase(), self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub triple: Option<TextTriple>,
    pub question: String,
    pub answer: String,
}

/// Numbered relation list as it appears in the prompt.
pub fn relation_list() -> String {
    RelationKind::WHITELIST
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{}) {}", i + 1, r.phrase()))
        .collect::<Vec<_>>()
        .join(", ")
}

const INTRO: &str = "I need you to help generate a question and answer pair for young children aged three to six. \
I will provide you with a short section of a story delimited by triple quotes.\n\
Please follow these steps:\n\
1. For each sentence, identify one key word that meets the following criteria: it is relatively complex, \
it is considered tier 1 or tier 2 vocabulary, and it is a concrete noun, verb, or adjective.\n\
2. After this, you need to completely forget about the story that I gave you, remembering only the words you identified.\n";

const QA_ONLY_STEPS: &str = "3. Based on each selected word, generate a question and answer pair that either the question \
or the answer contains that word. For example, if your identified word is 'apple', your question could be: \
where do apples grow? what do apples taste like? what color are apples? These questions should go beyond the \
context of the stories.\n\
Each question should have one single correct answer that would be the same regardless of the children's experiences. \
The questions should be focused on real-world, fact-based knowledge and beneficial to educate children during story reading.\n\
The real-world, fact-based knowledge should be based on the selected word and is in the form of a triple such as \
A relation B, where A and B are two concepts and the selected word can be either A or B. You should use one of the \
following relations for the real-world knowledge:\n\
{relations}\n\
4. After this, select one question-answer pair that you think best meets my criteria. Please note that the question \
should be answerable without reading the story. The answer should only be a concrete noun, verb, or adjective.\n\
Return the selected question-answer pair in the following format:\n\
\n\
question: ...\n\
answer: ...\n";

const TRIPLE_STEPS: &str = "3. Based on each selected word, generate one real-world relation based on the selected word. \
This real-world relation should go beyond the context of the stories. For example, if your identified word is 'apple', \
your real-world relation could be: apple grows on trees; apples are red. The real-world, fact-based knowledge should be \
based on the selected word and is in the form of a triple such as 'A relation B', where A and B are two concepts and \
the selected word can be either A or B.\n\
You should use one of the following relations for the real-world knowledge:\n\
{relations}\n\
4. After this, generate a question and answer pair based on the real-world, fact-based knowledge you generated. \
Either the question or the answer should contain that identified word. Each question should have one single correct \
answer that would be the same regardless of the children's experiences. The questions should be focused on real-world, \
fact-based knowledge and beneficial to educate children during story reading.\n\
5. After this, select one question-answer pair that you think best meets my criteria. Please note that the question \
should be answerable without reading the story. The answer should only be a concrete noun, verb, or adjective.\n\
Return the generated real-world knowledge triple and selected question-answer pair in the following format:\n\
\n\
real-world knowledge triple: (A, relation, B)\n\
question: ...\n\
answer: ...\n";

const STEP_BY_STEP: &str = "Let's think step by step, then give the final answer in the format above.\n";

fn story_block(story: &str) -> String {
    format!("<story>:\n\"\"\"{}\"\"\"\n\n<response>:\n", story.trim())
}

/// Builds the full prompt: instructions, demonstrations, then the target
/// story with an open response slot.
pub fn render_prompt(template: &PromptTemplate, demos: &[Demonstration], story: &str) -> Result<String, BenchError> {
    let expected = template.strategy.demo_count();
    if demos.len() != expected {
        return Err(BenchError::Argument(format!(
            "{} needs {expected} demonstrations, got {}",
            template.strategy,
            demos.len()
        )));
    }
    let steps = match template.variant {
        Variant::QaOnly => QA_ONLY_STEPS,
        Variant::QaWithTriple => TRIPLE_STEPS,
    };
    let mut prompt = String::new();
    prompt.push_str(INTRO);
    prompt.push_str(&steps.replace("{relations}", &relation_list()));
    if template.strategy == Strategy::Cot {
        prompt.push_str(STEP_BY_STEP);
    }
    prompt.push('\n');
    for d in demos {
        prompt.push_str(&story_block(&d.story));
        prompt.push_str(d.response.trim_end());
        prompt.push_str("\n\n");
    }
    prompt.push_str(&story_block(story));
    Ok(prompt)
}

/// The target story of a rendered prompt (the last triple-quoted block).
pub fn target_story(prompt: &str) -> Option<&str> {
    let end = prompt.rfind("\"\"\"")?;
    let start = prompt[..end].rfind("\"\"\"")? + 3;
    Some(&prompt[start..end])
}

pub fn format_response(parsed: &ParsedResponse) -> String {
    let mut out = String::new();
    if let Some(t) = &parsed.triple {
        out.push_str(&format!(
            "real-world knowledge triple: ({}, {}, {})\n",
            t.source,
            t.relation.phrase(),
            t.target
        ));
    }
    out.push_str(&format!("question: {}\nanswer: {}", parsed.question, parsed.answer));
    out
}

fn label_value<'a>(line: &'a str, labels: &[&str]) -> Option<&'a str> {
    let trimmed = line.trim().trim_start_matches(['*', '-', '#', ' ']);
    let lower = trimmed.to_lowercase();
    for label in labels {
        if lower.starts_with(label) {
            let rest = trimmed[label.len()..].trim_start_matches(['*', ' ']);
            if let Some(v) = rest.strip_prefix(':') {
                return Some(v.trim().trim_matches('*').trim());
            }
        }
    }
    None
}

/// Parses `(A, relation, B)`. The relation is matched against the known
/// phrases first, which lets A and B contain commas; otherwise exactly
/// three comma-separated parts are required.
pub fn parse_triple(text: &str) -> Option<TextTriple> {
    let inner = text.trim().trim_end_matches('.').trim();
    let inner = inner.strip_prefix('(')?.strip_suffix(')')?;
    let lower = inner.to_lowercase();
    let mut phrases: Vec<&RelationKind> = RelationKind::WHITELIST.iter().collect();
    phrases.sort_by_key(|r| std::cmp::Reverse(r.phrase().len()));
    for rel in phrases {
        let needle = format!(", {},", rel.phrase());
        if let Some(i) = lower.find(&needle) {
            let source = inner[..i].trim();
            let target = inner[i + needle.len()..].trim();
            if !source.is_empty() && !target.is_empty() {
                return Some(TextTriple {
                    source: source.to_string(),
                    relation: rel.clone(),
                    target: target.to_string(),
                });
            }
        }
    }
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, r, b] if !a.is_empty() && !r.is_empty() && !b.is_empty() => Some(TextTriple {
            source: a.to_string(),
            relation: RelationKind::parse_any(r).unwrap_or_else(|| RelationKind::Other(r.to_string())),
            target: b.to_string(),
        }),
        _ => None,
    }
}

/// Extracts labeled lines, tolerating chatter around them. The first
/// question line and the first answer after it win. The triple line is
/// required for [`Variant::QaWithTriple`].
pub fn parse_response(text: &str, variant: Variant) -> Result<ParsedResponse, String> {
    let mut triple = None;
    let mut question: Option<String> = None;
    let mut answer: Option<String> = None;
    // Split "question: ... answer: ..." written on one line.
    let expanded = text.replace("\r\n", "\n");
    let lines = expanded.lines().flat_map(|l| {
        let lower = l.to_lowercase();
        match (lower.find("question:"), lower.find("answer:")) {
            (Some(q), Some(a)) if q < a => vec![&l[..a], &l[a..]],
            _ => vec![l],
        }
    });
    for line in lines {
        if triple.is_none() {
            if let Some(v) = label_value(line, &["real-world knowledge triple", "real world knowledge triple", "triple"]) {
                triple = parse_triple(v);
                continue;
            }
        }
        if question.is_none() {
            if let Some(v) = label_value(line, &["question"]) {
                if !v.is_empty() {
                    question = Some(v.to_string());
                }
                continue;
            }
        } else if answer.is_none() {
            if let Some(v) = label_value(line, &["answer"]) {
                if !v.is_empty() {
                    answer = Some(v.to_string());
                    if variant == Variant::QaOnly || triple.is_some() {
                        break;
                    }
                }
            }
        }
    }
    match (question, answer) {
        (Some(question), Some(answer)) => {
            if variant == Variant::QaWithTriple && triple.is_none() {
                return Err("no parseable knowledge triple line".into());
            }
            Ok(ParsedResponse {
                triple: if variant == Variant::QaWithTriple { triple } else { None },
                question,
                answer,
            })
        }
        (None, _) => Err("no question line".into()),
        (Some(_), None) => Err("no answer line".into()),
    }
}
