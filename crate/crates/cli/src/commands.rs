use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use docsift::corpus::{count_tokens, ingest, Document};
use docsift::dependency::{ConlluProvider, DependencyProvider, HeuristicLexicon, HeuristicParser, RemoteParser};
use docsift::eval::{evaluate, parse_predictions, parse_q_scores, Dataset, SystemRun};
use docsift::phonetics::soundex;
use docsift::qa_client::{ask, Answer, AskOptions, HttpBackend, Passage, QaBackend, StubServer};
use docsift::retrieval::{rank, HybridIndex, RankOutcome, RankStatus};
use docsift::tokenization::{
    apply_definition_tokenization, apply_dependency_tokenization, find_definitions, tokenize_question, Replacement,
    TokenRegistry, Warning,
};
use serde::Serialize;

use crate::config::{PipelineConfig, ProviderConfig};
use crate::failure::{Failure, Kind};
use crate::{Command, RetrievalArgs};

pub fn run(command: Command, cfg: &PipelineConfig) -> Result<(), Failure> {
    match command {
        Command::Ingest { input, title, out } => cmd_ingest(cfg, &input, title, out),
        Command::Tokenize {
            store,
            out,
            registry,
            warnings,
            no_definitions,
            no_dependency,
        } => {
            let stages = (
                cfg.tokenize.definitions && !no_definitions,
                cfg.tokenize.dependency && !no_dependency,
            );
            cmd_tokenize(cfg, store, out, registry, warnings, stages)
        }
        Command::Index { store, out } => cmd_index(cfg, store, out),
        Command::Rank {
            question,
            retrieval,
            json,
        } => cmd_rank(cfg, &question, &retrieval, json),
        Command::Ask {
            question,
            dataset,
            predictions_out,
            retrieval,
            store,
            endpoint,
            per_paragraph,
            json,
        } => {
            let ctx = AskContext::open(cfg, &retrieval, store, endpoint, per_paragraph)?;
            match (question, dataset) {
                (Some(q), _) => cmd_ask_one(&ctx, &q, json),
                (None, Some(d)) => cmd_ask_batch(cfg, &ctx, &d, predictions_out),
                (None, None) => Err(Failure::input("ask", "give a question or --dataset")),
            }
        }
        Command::Eval {
            dataset,
            predictions,
            q_scores,
            out,
        } => cmd_eval(cfg, &dataset, &predictions, &q_scores, out),
        Command::EncodeSoundex { words, length } => cmd_soundex(&words, length),
        Command::StubQa { port } => cmd_stub(port),
    }
}

fn read(stage: &'static str, path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(stage, format!("cannot read {}: {e}", path.display())))
}

fn write(stage: &'static str, path: &Path, content: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::input(stage, format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, content).map_err(|e| Failure::input(stage, format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn load_store(stage: &'static str, path: &Path) -> Result<Document, Failure> {
    serde_json::from_str(&read(stage, path)?)
        .map_err(|e| Failure::input(stage, format!("{} is not a paragraph store: {e}", path.display())))
}

fn load_registry(stage: &'static str, path: &Path) -> Result<TokenRegistry, Failure> {
    TokenRegistry::from_json(&read(stage, path)?).map_err(|e| Failure::input(stage, format!("{}: {e}", path.display())))
}

fn total_tokens(doc: &Document) -> usize {
    doc.paragraphs.iter().map(|p| count_tokens(&p.text)).sum()
}

fn cmd_ingest(cfg: &PipelineConfig, input: &Path, title: Option<String>, out: Option<PathBuf>) -> Result<(), Failure> {
    let raw = read("ingest", input)?;
    let title = title.unwrap_or_else(|| {
        input
            .file_stem()
            .map_or("document".into(), |s| s.to_string_lossy().into())
    });
    let doc = ingest(&raw, &title, &cfg.split).map_err(|e| Failure::corpus("ingest", e))?;
    let out = out.unwrap_or_else(|| cfg.paths.store.clone());
    write("ingest", &out, &to_json(&doc))?;
    println!(
        "{} paragraphs ({} tokens) written to {}",
        doc.paragraphs.len(),
        total_tokens(&doc),
        out.display()
    );
    Ok(())
}

fn provider(cfg: &PipelineConfig) -> Result<Box<dyn DependencyProvider>, Failure> {
    Ok(match &cfg.dependency_provider {
        ProviderConfig::Heuristic { lexicon_dir: None } => Box::new(HeuristicParser::default()),
        ProviderConfig::Heuristic { lexicon_dir: Some(dir) } => {
            Box::new(HeuristicParser::new(HeuristicLexicon::load_dir(dir).map_err(|e| {
                Failure::config("tokenize", format!("{}: {e}", dir.display()))
            })?))
        }
        ProviderConfig::Conllu { path } => {
            Box::new(ConlluProvider::from_path(path).map_err(|e| Failure::dependency("tokenize", e))?)
        }
        ProviderConfig::Remote { endpoint, timeout_secs } => {
            Box::new(RemoteParser::new(endpoint.clone(), Duration::from_secs(*timeout_secs)))
        }
    })
}

fn cmd_tokenize(
    cfg: &PipelineConfig,
    store: Option<PathBuf>,
    out: Option<PathBuf>,
    registry_path: Option<PathBuf>,
    warnings_path: Option<PathBuf>,
    (definitions, dependency): (bool, bool),
) -> Result<(), Failure> {
    let stage = "tokenize";
    let store = store.unwrap_or_else(|| cfg.paths.store.clone());
    let registry_path = registry_path.unwrap_or_else(|| cfg.paths.registry.clone());
    let mut doc = load_store(stage, &store)?;
    let mut registry = if registry_path.exists() {
        load_registry(stage, &registry_path)?
    } else {
        TokenRegistry::new()
    };
    let before = total_tokens(&doc);
    let mut replacements: Vec<Replacement> = Vec::new();
    let mut warnings: Vec<Warning> = Vec::new();

    if definitions || dependency {
        let dep = provider(cfg)?;
        if definitions {
            let keywords: HashSet<String> = cfg.definition_keywords.iter().cloned().collect();
            let defs = find_definitions(&doc, &keywords, dep.as_ref());
            let lexicon: Vec<String> = match &cfg.lexicon_path {
                Some(p) => read(stage, p)?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(String::from)
                    .collect(),
                None => Vec::new(),
            };
            let outcome = apply_definition_tokenization(&doc, &mut registry, &defs, &lexicon)
                .map_err(|e| Failure::token(stage, e))?;
            doc = outcome.document;
            replacements.extend(outcome.replacements);
            warnings.extend(outcome.warnings);
        }
        if dependency {
            if let ProviderConfig::Remote { .. } = cfg.dependency_provider {
                // fail fast instead of emitting one warning per sentence
                if let Some(s) = doc.paragraphs.iter().flat_map(|p| p.sentences.first()).next() {
                    dep.parse(s).map_err(|e| Failure::dependency(stage, e))?;
                }
            }
            let outcome = apply_dependency_tokenization(&doc, &mut registry, dep.as_ref())
                .map_err(|e| Failure::token(stage, e))?;
            doc = outcome.document;
            replacements.extend(outcome.replacements);
            warnings.extend(outcome.warnings);
        }
    }

    let out = out.unwrap_or_else(|| cfg.paths.tokenized_store.clone());
    let warnings_path = warnings_path.unwrap_or_else(|| cfg.paths.warnings.clone());
    write(stage, &out, &to_json(&doc))?;
    write(stage, &registry_path, &(registry.to_json() + "\n"))?;
    let jsonl: String = warnings
        .iter()
        .map(|w| serde_json::to_string(w).expect("warning serializes") + "\n")
        .collect();
    write(stage, &warnings_path, &jsonl)?;

    let after = total_tokens(&doc);
    let pct = if before == 0 {
        0.0
    } else {
        100.0 * (before - after) as f64 / before as f64
    };
    println!("tokens: {before} -> {after} ({} fewer, {pct:.1}%)", before - after);
    println!(
        "replacements: {}; registry entries: {}; warnings: {}",
        replacements.len(),
        registry.len(),
        warnings.len()
    );
    Ok(())
}

fn cmd_index(cfg: &PipelineConfig, store: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), Failure> {
    let store = store.unwrap_or_else(|| cfg.paths.tokenized_store.clone());
    let doc = load_store("index", &store)?;
    let index = HybridIndex::build(&doc.paragraphs, cfg.analyzer()?, cfg.ranking.pv.clone())
        .map_err(|e| Failure::retrieval("index", e))?;
    let out = out.unwrap_or_else(|| cfg.paths.index.clone());
    write("index", &out, &(index.to_json() + "\n"))?;
    println!(
        "indexed {} paragraphs ({} terms, {}-dim vectors) into {}",
        index.tfidf.len(),
        index.tfidf.vocabulary.len(),
        index.pv.dim(),
        out.display()
    );
    Ok(())
}

struct Retrieval {
    index: HybridIndex,
    registry: Option<TokenRegistry>,
    weight: f64,
    top_k: usize,
}

impl Retrieval {
    fn open(stage: &'static str, cfg: &PipelineConfig, args: &RetrievalArgs) -> Result<Self, Failure> {
        let index_path = args.index.clone().unwrap_or_else(|| cfg.paths.index.clone());
        let index = HybridIndex::from_json(&read(stage, &index_path)?).map_err(|e| Failure::retrieval(stage, e))?;
        let registry_path = args.registry.clone().unwrap_or_else(|| cfg.paths.registry.clone());
        let registry = if registry_path.exists() {
            Some(load_registry(stage, &registry_path)?)
        } else {
            None
        };
        let weight = args.weight.unwrap_or(cfg.ranking.weight);
        if !(0.0..=1.0).contains(&weight) {
            return Err(Failure::config(stage, format!("weight {weight} outside [0, 1]")));
        }
        let top_k = args.top_k.unwrap_or(cfg.ranking.top_k);
        if top_k == 0 {
            return Err(Failure::config(stage, "top-k must be positive"));
        }
        Ok(Self {
            index,
            registry,
            weight,
            top_k,
        })
    }

    fn rank(&self, stage: &'static str, question: &str) -> Result<RankOutcome, Failure> {
        let outcome = rank(question, &self.index, self.weight, self.top_k, self.registry.as_ref())
            .map_err(|e| Failure::retrieval(stage, e))?;
        match outcome.status {
            RankStatus::TopKExceedsCorpus => eprintln!(
                "warning: top-k {} exceeds the {} indexed paragraphs; returning all of them",
                self.top_k,
                self.index.tfidf.len()
            ),
            RankStatus::NoMatch => eprintln!("warning: the question shares no terms with any paragraph"),
            RankStatus::Ok => {}
        }
        Ok(outcome)
    }
}

fn cmd_rank(cfg: &PipelineConfig, question: &str, args: &RetrievalArgs, json: bool) -> Result<(), Failure> {
    let retrieval = Retrieval::open("rank", cfg, args)?;
    let outcome = retrieval.rank("rank", question)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&outcome).expect("outcome serializes")
        );
    } else {
        println!(
            "{:>4}  {:<20}  {:>7}  {:>7}  {:>7}",
            "rank", "paragraph", "score", "tfidf", "pv"
        );
        for r in &outcome.results {
            println!(
                "{:>4}  {:<20}  {:>7.4}  {:>7.4}  {:>7.4}",
                r.rank, r.paragraph_id, r.score, r.tfidf_sim, r.pv_sim
            );
        }
    }
    Ok(())
}

struct AskContext {
    retrieval: Retrieval,
    store: Document,
    backend: Box<dyn QaBackend>,
    per_paragraph: bool,
    options: AskOptions,
    chunking: docsift::chunking::ChunkingConfig,
}

#[derive(Serialize)]
struct AskResult {
    question: String,
    answer: String,
    source_paragraph: Option<String>,
    probability: f64,
    score: Option<f64>,
}

impl AskContext {
    fn open(
        cfg: &PipelineConfig,
        args: &RetrievalArgs,
        store: Option<PathBuf>,
        endpoint: Option<String>,
        per_paragraph: bool,
    ) -> Result<Self, Failure> {
        let retrieval = Retrieval::open("ask", cfg, args)?;
        let store = load_store("ask", &store.unwrap_or_else(|| cfg.paths.tokenized_store.clone()))?;
        let endpoint = endpoint.unwrap_or_else(|| cfg.qa.endpoint.clone());
        Ok(Self {
            retrieval,
            store,
            backend: Box::new(HttpBackend::new(endpoint, Duration::from_secs(cfg.qa.timeout_secs))),
            per_paragraph: per_paragraph || cfg.qa.per_paragraph,
            options: AskOptions {
                max_in_flight: cfg.qa.max_in_flight,
            },
            chunking: cfg.chunking.clone(),
        })
    }

    /// rank → tokenize question → chunk top-k → ask → detokenize.
    fn answer(&self, question: &str) -> Result<AskResult, Failure> {
        let outcome = self.retrieval.rank("ask", question)?;
        let mut result = AskResult {
            question: question.into(),
            answer: String::new(),
            source_paragraph: None,
            probability: 0.0,
            score: None,
        };
        if outcome.results.is_empty() {
            return Ok(result);
        }
        let passages = outcome
            .results
            .iter()
            .map(|r| {
                self.store
                    .paragraph(&r.paragraph_id)
                    .map(|p| Passage {
                        paragraph_id: p.id.clone(),
                        text: p.text.clone(),
                    })
                    .ok_or_else(|| {
                        Failure::input(
                            "ask",
                            format!("paragraph {} is in the index but not in the store", r.paragraph_id),
                        )
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let registry = self.retrieval.registry.as_ref();
        let q = registry.map_or_else(|| question.to_string(), |r| tokenize_question(question, r));
        let answer: Answer = ask(
            &q,
            &passages,
            self.per_paragraph,
            &self.chunking,
            self.backend.as_ref(),
            self.options,
            registry,
        )
        .map_err(|e| Failure::qa("ask", e))?;
        result.score = answer
            .source_paragraph
            .as_ref()
            .and_then(|id| outcome.results.iter().find(|r| &r.paragraph_id == id))
            .map(|r| r.score);
        result.answer = answer.text;
        result.source_paragraph = answer.source_paragraph;
        result.probability = answer.probability;
        Ok(result)
    }
}

fn cmd_ask_one(ctx: &AskContext, question: &str, json: bool) -> Result<(), Failure> {
    let r = ctx.answer(question)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&r).expect("answer serializes"));
    } else {
        println!("answer: {}", r.answer);
        println!("paragraph: {}", r.source_paragraph.as_deref().unwrap_or("-"));
        println!("probability: {:.4}", r.probability);
        println!("score: {}", r.score.map_or("-".into(), |s| format!("{s:.4}")));
    }
    Ok(())
}

fn cmd_ask_batch(cfg: &PipelineConfig, ctx: &AskContext, dataset: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let data = Dataset::from_squad_json(&read("ask", dataset)?).map_err(|e| Failure::eval("ask", e))?;
    let mut predictions = BTreeMap::new();
    for ex in data.examples() {
        let r = ctx.answer(&ex.question)?;
        predictions.insert(ex.id.clone(), r.answer);
    }
    let out = out.unwrap_or_else(|| cfg.paths.predictions.clone());
    write("ask", &out, &to_json(&predictions))?;
    println!(
        "answered {} questions; predictions written to {}",
        predictions.len(),
        out.display()
    );
    Ok(())
}

fn split_labeled(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => ("system".to_string(), PathBuf::from(spec)),
    }
}

fn cmd_eval(
    cfg: &PipelineConfig,
    dataset: &Path,
    predictions: &[String],
    q_scores: &[String],
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let stage = "eval";
    let data = Dataset::from_squad_json(&read(stage, dataset)?).map_err(|e| Failure::eval(stage, e))?;
    let mut grades = BTreeMap::new();
    for spec in q_scores {
        let (label, path) = split_labeled(spec);
        grades.insert(
            label,
            parse_q_scores(&read(stage, &path)?).map_err(|e| Failure::eval(stage, e))?,
        );
    }
    let mut runs = Vec::new();
    for spec in predictions {
        let (label, path) = split_labeled(spec);
        let preds = parse_predictions(&read(stage, &path)?).map_err(|e| Failure::eval(stage, e))?;
        runs.push(SystemRun {
            q_scores: grades.remove(&label),
            label,
            predictions: preds,
        });
    }
    if let Some(label) = grades.keys().next() {
        return Err(Failure::input(
            stage,
            format!("q-scores given for unknown system {label:?}"),
        ));
    }
    let report = evaluate(&data, &runs).map_err(|e| Failure::eval(stage, e))?;
    let out = out.unwrap_or_else(|| cfg.paths.report.clone());
    write(stage, &out, &(report.to_json() + "\n"))?;
    print!("{}", report.to_text_table());
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_soundex(words: &[String], length: usize) -> Result<(), Failure> {
    for w in words {
        let code = soundex(w, length).map_err(|e| Failure::new(Kind::Input, "encode-soundex", e))?;
        println!("{w}\t{code}");
    }
    Ok(())
}

fn cmd_stub(port: u16) -> Result<(), Failure> {
    let server = StubServer::start(port).map_err(|e| {
        Failure::new(
            Kind::Transport,
            "stub-qa",
            anyhow::anyhow!("cannot bind port {port}: {e}"),
        )
    })?;
    println!("stub QA listening on {}", server.url());
    let _ = std::io::stdout().flush();
    server.wait();
    Ok(())
}
