//! Question-answer generation benchmark: prompt rendering, model
//! endpoints, response parsing and Rouge-L scoring.

mod endpoint;
mod prompt;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use endpoint::{
    DecodeParams, EchoStub, EndpointError, FailingStub, HttpChatEndpoint, ModelEndpoint, ShuffleStub,
    UnparseableStub, API_KEY_ENV,
};
pub use prompt::{
    format_response, parse_response, parse_triple, relation_list, render_prompt, target_story, Demonstration,
    ParsedResponse, PromptTemplate, Strategy, TextTriple, Variant,
};

use crate::annotation::{AnnotationRecord, Split};
use crate::metrics::{rouge_l_multi_ref, Reduction, RougeScore};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Argument(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One expert QA pair for a section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<TextTriple>,
}

impl Reference {
    pub fn as_response(&self) -> ParsedResponse {
        ParsedResponse {
            triple: self.triple.clone(),
            question: self.question.clone(),
            answer: self.answer.clone(),
        }
    }
}

/// A story section with its ground-truth QA pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchItem {
    pub item_id: String,
    pub story: String,
    pub references: Vec<Reference>,
}

/// Groups the records of one split by section, in story/section order.
pub fn bench_items(records: &[AnnotationRecord], split: Split) -> Vec<BenchItem> {
    let mut groups: BTreeMap<(String, u32), BenchItem> = BTreeMap::new();
    let mut ordered: Vec<&AnnotationRecord> = records.iter().filter(|r| r.split == Some(split)).collect();
    ordered.sort_by_key(|r| r.record_id);
    for r in ordered {
        let item = groups
            .entry((r.story_id.clone(), r.section_index))
            .or_insert_with(|| BenchItem {
                item_id: format!("{}#{}", r.story_id, r.section_index),
                story: r.section_text.clone(),
                references: Vec::new(),
            });
        item.references.push(Reference {
            question: r.question.clone(),
            answer: r.answer.clone(),
            triple: Some(TextTriple {
                source: r.triple.source_display.clone(),
                relation: r.triple.relation.clone(),
                target: r.triple.target_display.clone(),
            }),
        });
    }
    groups.into_values().collect()
}

/// Draws `k` demonstrations from `pool` under `seed`, each formatted from
/// its first reference for the given variant.
pub fn sample_demonstrations(pool: &[BenchItem], k: usize, seed: u64, variant: Variant) -> Result<Vec<Demonstration>, BenchError> {
    let usable: Vec<&BenchItem> = pool.iter().filter(|i| !i.references.is_empty()).collect();
    if usable.len() < k {
        return Err(BenchError::Argument(format!(
            "{k} demonstrations requested, pool has {}",
            usable.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(usable
        .choose_multiple(&mut rng, k)
        .map(|item| {
            let mut response = item.references[0].as_response();
            if variant == Variant::QaOnly {
                response.triple = None;
            }
            Demonstration {
                story: item.story.clone(),
                response: format_response(&response),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub template: PromptTemplate,
    pub seed: u64,
    pub repetitions: usize,
    pub concurrency: usize,
    pub reduction: Reduction,
    pub decode: DecodeParams,
}

impl BenchConfig {
    pub fn new(template: PromptTemplate, seed: u64) -> Self {
        BenchConfig {
            template,
            seed,
            repetitions: 1,
            concurrency: 4,
            reduction: Reduction::Max,
            decode: DecodeParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Parsed,
    ParseFailure,
    EndpointError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub repetition: usize,
    pub item_id: String,
    pub status: ItemStatus,
    pub raw_response: Option<String>,
    pub generated: Option<ParsedResponse>,
    pub qa_score: Option<RougeScore>,
    pub triple_score: Option<RougeScore>,
    pub error: Option<String>,
}

/// Means are over parsed items only; failure rates are reported apart.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub items: usize,
    pub parsed: usize,
    pub parse_failures: usize,
    pub endpoint_errors: usize,
    /// Parse failures over items that returned a response.
    pub parse_failure_rate: f64,
    pub mean_qa_f1: Option<f64>,
    pub mean_triple_f1: Option<f64>,
}

impl Aggregate {
    fn of<'a>(results: impl IntoIterator<Item = &'a ItemResult>) -> Aggregate {
        let mut agg = Aggregate::default();
        let mut qa = Vec::new();
        let mut triple = Vec::new();
        for r in results {
            agg.items += 1;
            match r.status {
                ItemStatus::Parsed => {
                    agg.parsed += 1;
                    qa.extend(r.qa_score.map(|s| s.f1));
                    triple.extend(r.triple_score.map(|s| s.f1));
                }
                ItemStatus::ParseFailure => agg.parse_failures += 1,
                ItemStatus::EndpointError => agg.endpoint_errors += 1,
            }
        }
        let responded = agg.parsed + agg.parse_failures;
        agg.parse_failure_rate = if responded == 0 {
            0.0
        } else {
            agg.parse_failures as f64 / responded as f64
        };
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        agg.mean_qa_f1 = mean(&qa);
        agg.mean_triple_f1 = mean(&triple);
        agg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub endpoint: String,
    pub config: BenchConfig,
    pub demonstrations: Vec<Demonstration>,
    pub items: Vec<ItemResult>,
    pub per_repetition: Vec<Aggregate>,
    pub aggregate: Aggregate,
    /// Set when more than half of the requests failed and the run stopped.
    pub aborted: bool,
}

impl BenchReport {
    /// Per-item JSON lines followed by one `{"aggregate": ...}` line.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for item in &self.items {
            serde_json::to_writer(&mut out, item).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            aggregate: &'a Aggregate,
            per_repetition: &'a [Aggregate],
            endpoint: &'a str,
            config: &'a BenchConfig,
            demonstrations: &'a [Demonstration],
            aborted: bool,
        }
        let summary = Summary {
            aggregate: &self.aggregate,
            per_repetition: &self.per_repetition,
            endpoint: &self.endpoint,
            config: &self.config,
            demonstrations: &self.demonstrations,
            aborted: self.aborted,
        };
        serde_json::to_writer(&mut out, &summary).map_err(std::io::Error::other)?;
        out.write_all(b"\n")
    }
}

fn score_item(item: &BenchItem, parsed: &ParsedResponse, config: &BenchConfig) -> (Option<RougeScore>, Option<RougeScore>) {
    let refs: Vec<String> = item
        .references
        .iter()
        .map(|r| format!("{} {}", r.question, r.answer))
        .collect();
    let candidate = format!("{} {}", parsed.question, parsed.answer);
    let qa = rouge_l_multi_ref(&candidate, &refs, config.reduction).ok();
    let triple = match (&parsed.triple, config.template.variant) {
        (Some(t), Variant::QaWithTriple) => {
            let refs: Vec<String> = item.references.iter().filter_map(|r| r.triple.as_ref()).map(TextTriple::as_text).collect();
            rouge_l_multi_ref(&t.as_text(), &refs, config.reduction).ok()
        }
        _ => None,
    };
    (qa, triple)
}

fn run_one(item: &BenchItem, prompt: &str, repetition: usize, config: &BenchConfig, endpoint: &dyn ModelEndpoint) -> ItemResult {
    let mut result = ItemResult {
        repetition,
        item_id: item.item_id.clone(),
        status: ItemStatus::EndpointError,
        raw_response: None,
        generated: None,
        qa_score: None,
        triple_score: None,
        error: None,
    };
    match endpoint.complete(prompt, &config.decode) {
        Err(e) => result.error = Some(e.to_string()),
        Ok(text) => {
            match parse_response(&text, config.template.variant) {
                Ok(parsed) => {
                    let (qa, triple) = score_item(item, &parsed, config);
                    result.status = ItemStatus::Parsed;
                    result.qa_score = qa;
                    result.triple_score = triple;
                    result.generated = Some(parsed);
                }
                Err(reason) => {
                    result.status = ItemStatus::ParseFailure;
                    result.error = Some(reason);
                }
            }
            result.raw_response = Some(text);
        }
    }
    result
}

/// Prompts the endpoint once per item and repetition, with bounded
/// parallelism. Demonstrations come from `demo_pool` under the config
/// seed. Once more than half of all planned requests have failed at the
/// endpoint, remaining work is skipped and the report is marked aborted.
pub fn run_bench(
    items: &[BenchItem],
    demo_pool: &[BenchItem],
    config: &BenchConfig,
    endpoint: &dyn ModelEndpoint,
) -> Result<BenchReport, BenchError> {
    if config.repetitions == 0 {
        return Err(BenchError::Argument("repetitions must be at least 1".into()));
    }
    let demos = sample_demonstrations(
        demo_pool,
        config.template.strategy.demo_count(),
        config.seed,
        config.template.variant,
    )?;
    let prompts: Vec<String> = items
        .iter()
        .map(|i| render_prompt(&config.template, &demos, &i.story))
        .collect::<Result<_, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..config.repetitions)
        .flat_map(|rep| (0..items.len()).map(move |i| (rep, i)))
        .collect();
    let slots: Mutex<Vec<Option<ItemResult>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let failures = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let limit = jobs.len() / 2;

    std::thread::scope(|scope| {
        for _ in 0..config.concurrency.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let j = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(rep, i)) = jobs.get(j) else { break };
                let result = run_one(&items[i], &prompts[i], rep, config, endpoint);
                if result.status == ItemStatus::EndpointError && failures.fetch_add(1, Ordering::SeqCst) + 1 > limit {
                    abort.store(true, Ordering::SeqCst);
                }
                slots.lock().unwrap()[j] = Some(result);
            });
        }
    });

    let results: Vec<ItemResult> = slots.into_inner().unwrap().into_iter().flatten().collect();
    let aborted = abort.load(Ordering::SeqCst);
    if aborted {
        tracing::error!(
            failures = failures.load(Ordering::SeqCst),
            planned = jobs.len(),
            "more than half of the requests failed; run aborted"
        );
    }
    let per_repetition = (0..config.repetitions)
        .map(|rep| Aggregate::of(results.iter().filter(|r| r.repetition == rep)))
        .collect();
    Ok(BenchReport {
        endpoint: endpoint.name(),
        config: config.clone(),
        demonstrations: demos,
        aggregate: Aggregate::of(&results),
        per_repetition,
        items: results,
        aborted,
    })
}

/// Echo responses built from each item's `which`-th reference (clamped to
/// the last one), for use with the stub endpoints.
pub fn reference_responses(items: &[BenchItem], which: usize, variant: Variant) -> Vec<(String, String)> {
    items
        .iter()
        .filter_map(|item| {
            let r = item.references.get(which.min(item.references.len().checked_sub(1)?))?;
            let mut resp = r.as_response();
            if variant == Variant::QaOnly {
                resp.triple = None;
            }
            Some((item.story.clone(), format_response(&resp)))
        })
        .collect()
}
