use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use argnli_core::corpus::{generate_candidates, gold_roles, load_corpus, write_corpus};
use argnli_core::entailment::BackendConfig;
use argnli_core::eval::report::Report;
use argnli_core::eval::{
    auc, parse_curve, recall_diff, score_coref_f1, score_f1, Decision, EvalGold,
};
use argnli_core::inference::{plan_candidate, predict_corpus};
use argnli_core::recast::{build_manifest, recast_corpus, write_examples, Stage};
use argnli_core::splits::{filter_documents, group_by_event, make_splits, split_stats, SplitSpec};
use argnli_core::{
    ConstraintTable, Document, Execution, InferenceConfig, SamplingConfig, Scorer, TemplateLibrary,
};
use argnli_service::{app, entail_router, AppState, ServiceConfig};
use serde_json::json;

use crate::{Cli, Command, Format, ServeMode};

const BUILTIN: &str = "builtin:";

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Verbalize => "verbalize",
        Command::Predict => "predict",
        Command::Recast { .. } => "recast",
        Command::Split { .. } => "split",
        Command::Eval { .. } => "eval",
        Command::Auc { .. } => "auc",
        Command::CompareTemplates { .. } => "compare-templates",
        Command::Serve { .. } => "serve",
        Command::Manifest { .. } => "manifest",
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Verbalize => verbalize(cli),
        Command::Predict => predict(cli),
        Command::Recast {
            n_entail,
            n_neutral,
            n_contradict,
            constrained,
            source,
        } => {
            let cfg = SamplingConfig {
                n_entail: *n_entail,
                n_neutral: *n_neutral,
                n_contradict: *n_contradict,
                constrained: *constrained,
                seed: cli.seed,
            };
            recast(cli, &cfg, source)
        }
        Command::Split { fractions } => split(cli, fractions),
        Command::Eval { predictions } => eval(cli, predictions),
        Command::Auc { curve } => auc_cmd(cli, curve),
        Command::CompareTemplates { a, b } => compare(cli, a, b),
        Command::Serve {
            mode,
            config,
            listen,
        } => serve(cli, *mode, config.as_deref(), listen.as_deref()),
        Command::Manifest { sources, target } => manifest(cli, sources, target),
    }
}

fn inference_config(cli: &Cli) -> Result<InferenceConfig> {
    InferenceConfig::with_threshold(
        cli.threshold
            .unwrap_or(InferenceConfig::default().threshold),
    )
    .context("invalid --threshold")
}

fn corpus(cli: &Cli) -> Result<Vec<Document>> {
    let path = cli.corpus.as_ref().context("--corpus is required")?;
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn library(cli: &Cli) -> Result<TemplateLibrary> {
    match cli.library.as_deref() {
        None => Ok(TemplateLibrary::ace_main()),
        Some(spec) => match spec.strip_prefix(BUILTIN) {
            Some(name) => {
                let raw = TemplateLibrary::shipped_json(name)
                    .with_context(|| format!("no built-in library `{name}`"))?;
                Ok(TemplateLibrary::from_json(raw)?)
            }
            None => TemplateLibrary::load(spec).with_context(|| format!("loading library {spec}")),
        },
    }
}

fn constraints(cli: &Cli) -> Result<ConstraintTable> {
    match cli.constraints.as_deref() {
        None | Some("builtin:ace") => Ok(ConstraintTable::ace()),
        Some(spec) if spec.starts_with(BUILTIN) => bail!("no built-in constraint table `{spec}`"),
        Some(spec) => {
            ConstraintTable::load(spec).with_context(|| format!("loading constraints {spec}"))
        }
    }
}

fn scorer(cli: &Cli) -> Result<Scorer> {
    let path = cli.backend.as_ref().context("--backend is required")?;
    let cfg = BackendConfig::load(path)
        .with_context(|| format!("loading backend config {}", path.display()))?;
    Ok(cfg.build_scorer()?)
}

fn out_path(cli: &Cli) -> Result<&Path> {
    cli.out.as_deref().context("--out is required")
}

/// Writes to `--out` when given, stdout otherwise.
fn emit(cli: &Cli, bytes: &[u8]) -> Result<()> {
    match &cli.out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => print_stdout(bytes),
    }
}

fn print_stdout(bytes: &[u8]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn print_report(cli: &Cli, report: &Report) -> Result<()> {
    let text = match cli.format {
        Format::Text => report.to_markdown(),
        Format::Json => report.to_json(),
    };
    print_stdout(text.as_bytes())
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn read_decisions(path: &Path) -> Result<Vec<Decision>> {
    let raw =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

fn has_gold(docs: &[Document]) -> bool {
    docs.iter()
        .flat_map(|d| &d.events)
        .any(|e| !e.arguments.is_empty())
}

fn verbalize(cli: &Cli) -> Result<()> {
    let (docs, lib, table) = (corpus(cli)?, library(cli)?, constraints(cli)?);
    let mut lines = Vec::new();
    for doc in &docs {
        for c in generate_candidates(doc) {
            let plan = plan_candidate(&c, doc, &lib, &table)?;
            lines.push(json!({
                "doc": c.document_id,
                "event": c.event_id,
                "entity": c.entity_id,
                "premise": plan.premise,
                "roles": plan.allowed_roles,
                "hypotheses": plan.hypotheses,
            }));
        }
    }
    emit(cli, &jsonl(&lines)?)
}

fn predict(cli: &Cli) -> Result<()> {
    let cfg = inference_config(cli)?;
    let out = out_path(cli)?;
    let (docs, lib, table, scorer) = (corpus(cli)?, library(cli)?, constraints(cli)?, scorer(cli)?);
    let predictions = predict_corpus(&docs, &lib, &table, &scorer, &cfg, Execution::default())?;
    std::fs::write(out, jsonl(&predictions)?)
        .with_context(|| format!("writing {}", out.display()))?;
    if !has_gold(&docs) {
        log::info!("corpus has no gold arguments; skipping evaluation");
        return Ok(());
    }
    let decisions: Vec<Decision> = predictions.iter().map(|p| p.decision()).collect();
    print_report(cli, &score_report("predict", cli.seed, &docs, &decisions)?)
}

fn score_report(
    title: &str,
    seed: u64,
    docs: &[Document],
    decisions: &[Decision],
) -> Result<Report> {
    let gold = EvalGold::from_documents(docs);
    let mut report = Report::new(title);
    report.result = Some(score_f1(&gold, decisions)?);
    report.coref = Some(score_coref_f1(&gold, decisions)?);
    report.seed = Some(seed);
    Ok(report)
}

fn eval(cli: &Cli, predictions: &Path) -> Result<()> {
    let docs = corpus(cli)?;
    let decisions = read_decisions(predictions)?;
    print_report(cli, &score_report("eval", cli.seed, &docs, &decisions)?)
}

fn recast(cli: &Cli, cfg: &SamplingConfig, source: &str) -> Result<()> {
    let out = out_path(cli)?;
    let (docs, lib, table) = (corpus(cli)?, library(cli)?, constraints(cli)?);
    let recast = recast_corpus(&docs, &lib, &table, cfg, source, Execution::default())?;
    let mut buf = Vec::new();
    write_examples(&mut buf, &recast.examples)?;
    std::fs::write(out, buf).with_context(|| format!("writing {}", out.display()))?;
    let s = &recast.summary;
    let text = match cli.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(s)?),
        Format::Text => format!(
            "source: {}\nseed: {}\ncandidates: {}\npositives: {}\nnegatives used: {}\nnegatives skipped: {}\n\
             entailment: {}\nneutral: {}\ncontradiction: {}\nexamples: {}\n",
            s.source,
            s.seed,
            s.candidates,
            s.positives,
            s.negatives_used,
            s.negatives_skipped,
            s.entailment,
            s.neutral,
            s.contradiction,
            s.examples()
        ),
    };
    print_stdout(text.as_bytes())
}

fn split(cli: &Cli, fractions: &[f64]) -> Result<()> {
    let dir = out_path(cli)?;
    let spec = SplitSpec::new(fractions.to_vec(), cli.seed)?;
    let docs = corpus(cli)?;
    let roles = gold_roles(&docs);
    let splits = make_splits(&group_by_event(&docs), &spec)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut entries = Vec::new();
    let mut table = String::from(
        "| Fraction | Events | Candidates | Positives | File |\n|---:|---:|---:|---:|---|\n",
    );
    for s in &splits {
        let file = format!("split-{}.jsonl", s.fraction);
        let mut buf = Vec::new();
        write_corpus(&mut buf, &filter_documents(&docs, s))?;
        std::fs::write(dir.join(&file), buf).with_context(|| format!("writing {file}"))?;
        let stats = split_stats(&s.candidates, &roles);
        let _ = writeln!(
            table,
            "| {} | {} | {} | {} | {file} |",
            s.fraction,
            s.events.len(),
            stats.total,
            stats.positives
        );
        entries.push(json!({ "fraction": s.fraction, "file": file, "events": s.events.len(), "stats": stats }));
    }
    let manifest = json!({ "seed": cli.seed, "fractions": fractions, "splits": entries });
    let manifest = format!("{}\n", serde_json::to_string_pretty(&manifest)?);
    std::fs::write(dir.join("splits.json"), &manifest)?;
    match cli.format {
        Format::Json => print_stdout(manifest.as_bytes()),
        Format::Text => print_stdout(format!("seed: {}\n\n{table}", cli.seed).as_bytes()),
    }
}

fn auc_cmd(cli: &Cli, curve: &Path) -> Result<()> {
    let raw =
        std::fs::read_to_string(curve).with_context(|| format!("reading {}", curve.display()))?;
    let points = parse_curve(&raw)?;
    let value = auc(&points)?;
    let text = match cli.format {
        Format::Text => format!("{value:.2}\n"),
        Format::Json => format!("{}\n", json!({ "auc": value, "points": points })),
    };
    print_stdout(text.as_bytes())
}

fn compare(cli: &Cli, a: &Path, b: &Path) -> Result<()> {
    let docs = corpus(cli)?;
    let gold = EvalGold::from_documents(&docs);
    let diff = recall_diff(&read_decisions(a)?, &read_decisions(b)?, &gold)?;
    let text = match cli.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&diff)?),
        Format::Text => {
            let mut s = String::from("| Role | Support | A only | B only | Both | Same |\n|---|---:|---:|---:|---:|---|\n");
            for (role, d) in &diff {
                let _ = writeln!(
                    s,
                    "| {role} | {} | {:.3} | {:.3} | {:.3} | {} |",
                    d.support, d.a_only_recall, d.b_only_recall, d.overlap_recall, d.same
                );
            }
            s
        }
    };
    print_stdout(text.as_bytes())
}

fn parse_stage(spec: &str) -> Result<Stage> {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok(Stage::new(name, path)),
        _ => bail!("stage `{spec}` is not of the form name=path"),
    }
}

fn manifest(cli: &Cli, sources: &[String], target: &str) -> Result<()> {
    let sources = sources
        .iter()
        .map(|s| parse_stage(s))
        .collect::<Result<Vec<_>>>()?;
    let m = build_manifest(sources, parse_stage(target)?)?;
    emit(cli, m.to_json().as_bytes())
}

fn service_config(cli: &Cli, config: Option<&Path>, listen: Option<&str>) -> Result<ServiceConfig> {
    let mut cfg = ServiceConfig::load(config)?;
    if let Some(c) = &cli.corpus {
        cfg.corpus = Some(c.clone());
    }
    match cli.library.as_deref() {
        Some("builtin:ace-main") => cfg.library = None,
        Some(spec) if spec.starts_with(BUILTIN) => {
            bail!("the service only ships builtin:ace-main; pass a file path")
        }
        Some(spec) => cfg.library = Some(PathBuf::from(spec)),
        None => {}
    }
    match cli.constraints.as_deref() {
        Some("builtin:ace") => cfg.constraints = None,
        Some(spec) => cfg.constraints = Some(PathBuf::from(spec)),
        None => {}
    }
    if let Some(b) = &cli.backend {
        cfg.backend = Some(b.clone());
    }
    if let Some(t) = cli.threshold {
        cfg.threshold = t;
    }
    if let Some(l) = listen {
        cfg.listen = l.to_string();
    }
    Ok(cfg)
}

fn serve(cli: &Cli, mode: ServeMode, config: Option<&Path>, listen: Option<&str>) -> Result<()> {
    let cfg = service_config(cli, config, listen)?;
    let router = match mode {
        ServeMode::Facade => app(Arc::new(AppState::from_config(&cfg)?)),
        ServeMode::Entail => {
            let path = cfg
                .backend
                .as_ref()
                .context("entail mode needs --backend")?;
            entail_router(BackendConfig::load(path)?.build_backend()?)
        }
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.listen)
            .await
            .with_context(|| format!("binding {}", cfg.listen))?;
        log::info!("listening on {}", listener.local_addr()?);
        argnli_service::serve(listener, router).await?;
        Ok(())
    })
}
