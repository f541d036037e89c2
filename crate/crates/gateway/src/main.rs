use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use medroute_core::corpus::{read_jsonl, write_jsonl};
use medroute_core::metrics::{evaluate_corpus_parallel, DeterministicEmbedder, TokenEmbedder};
use medroute_core::router::{
    calibrate_scored, evaluate_scored, train_builtin_scorer, CalibrationSpec, LinearScorerModel,
    ScoredExample, SelectionStrategy, DEFAULT_BUCKETS,
};
use medroute_core::synthetic::SyntheticCorpus;
use medroute_core::QAExample;
use medroute_gateway::embed::RemoteEmbedder;
use medroute_gateway::scoring::Scorer;
use medroute_gateway::{load_config, ChatRequest, ChatTurnResponse, Gateway};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "medroute", version, about = "Specialist-routing medical QA gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Score a text and show the routing decision.
    Route {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Train the built-in router model.
    Train {
        /// JSONL corpus of {question, reference_answer, gold_labels}.
        #[arg(long, conflicts_with = "synthetic")]
        corpus: Option<PathBuf>,
        /// Train on a generated corpus of this size instead.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_BUCKETS)]
        buckets: usize,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune the routing threshold by F-beta and report top-n baselines.
    Calibrate {
        #[command(flatten)]
        scorer: ScorerArgs,
        /// Validation JSONL.
        #[arg(long)]
        data: PathBuf,
        /// One or more beta values.
        #[arg(long, default_values_t = vec![2.0, 3.0])]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Also emit the full result as JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Score system answers against reference answers.
    Eval {
        /// Reference JSONL of {question, reference_answer, gold_labels}.
        #[arg(long, alias = "data")]
        testset: PathBuf,
        /// JSONL of {"answer": ...} per example, or `from-gateway`.
        #[arg(long)]
        outputs: String,
        /// Gateway base URL used with `--outputs from-gateway`.
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        gateway: String,
        /// Embedding provider for the BERT-style columns: `test` or a URL.
        #[arg(long)]
        embed: Option<String>,
        #[arg(long, default_value = "system")]
        system: String,
        #[arg(long, default_value_t = 4)]
        threads: usize,
        /// Write the report JSON here; the table goes to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a synthetic labelled corpus.
    Synth {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        ambiguity: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct ScorerArgs {
    /// Built-in model artifact.
    #[arg(long, conflicts_with = "config")]
    model: Option<PathBuf>,
    /// Use the scorer named in a gateway config.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize)]
struct OutputLine {
    answer: String,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(run(cli.command))
}

async fn run(command: Command) -> Result<()> {
    match command {
        Command::Serve { config, listen } => {
            let config = load_config(&config)?;
            let addr = listen.unwrap_or_else(|| config.listen.clone());
            let gateway = Arc::new(Gateway::from_config(&config)?);
            medroute_gateway::server::serve(gateway, addr.parse().context("listen address")?).await?;
        }
        Command::Route { config, text } => {
            let gateway = Gateway::from_config(&load_config(&config)?)?;
            let route = gateway.handle_route(&text).await?;
            println!("{}", serde_json::to_string_pretty(&route)?);
        }
        Command::Train {
            corpus,
            synthetic,
            buckets,
            epochs,
            seed,
            out,
        } => {
            let examples = match (corpus, synthetic) {
                (Some(path), _) => read_jsonl(&path)?,
                (None, Some(n)) => SyntheticCorpus::new(seed).generate(n),
                (None, None) => bail!("pass --corpus or --synthetic"),
            };
            let model = train_builtin_scorer(&examples, buckets, epochs, seed)?;
            model.save(&out)?;
            eprintln!("trained on {} examples -> {}", examples.len(), out.display());
        }
        Command::Calibrate {
            scorer,
            data,
            beta,
            step,
            json,
        } => calibrate(scorer, &data, &beta, step, json.as_deref()).await?,
        Command::Eval {
            testset,
            outputs,
            gateway,
            embed,
            system,
            threads,
            report: report_path,
        } => {
            let examples = read_jsonl(&testset)?;
            let answers = match outputs.as_str() {
                "from-gateway" => answers_from_gateway(&gateway, &examples).await?,
                path => read_outputs(Path::new(path))?,
            };
            let table;
            let embedder: Option<&dyn TokenEmbedder> = match embed.as_deref() {
                None => None,
                Some("test") => {
                    table = EmbedderChoice::Test(DeterministicEmbedder::dense(64, 0));
                    table.as_dyn()
                }
                Some(url) => {
                    let texts = examples
                        .iter()
                        .map(|e| e.reference_answer.as_str())
                        .chain(answers.iter().map(String::as_str));
                    table = match RemoteEmbedder::new(url).table_for(texts).await {
                        Ok(t) => EmbedderChoice::Table(t),
                        Err(err) => EmbedderChoice::Unavailable(Unavailable(err.to_string())),
                    };
                    table.as_dyn()
                }
            };
            let report = evaluate_corpus_parallel(&examples, &answers, embedder, threads)?;
            let json = serde_json::to_string_pretty(&report)?;
            match report_path {
                Some(path) => std::fs::write(&path, json + "\n")?,
                None => println!("{json}"),
            }
            print!("{}", report.to_table(&system));
        }
        Command::Synth {
            n,
            seed,
            ambiguity,
            out,
        } => {
            let examples = SyntheticCorpus::new(seed).with_ambiguity(ambiguity).generate(n);
            write_jsonl(&out, &examples)?;
        }
    }
    Ok(())
}

enum EmbedderChoice {
    Test(DeterministicEmbedder),
    Table(medroute_core::metrics::EmbeddingTable),
    Unavailable(Unavailable),
}

/// Reports the error as metric-unavailable so the lexical columns still run.
struct Unavailable(String);

impl TokenEmbedder for Unavailable {
    fn embed(&self, _: &[String]) -> medroute_core::Result<Vec<Vec<f64>>> {
        Err(medroute_core::Error::MetricUnavailable(self.0.clone()))
    }
}

impl EmbedderChoice {
    fn as_dyn(&self) -> Option<&dyn TokenEmbedder> {
        match self {
            EmbedderChoice::Test(e) => Some(e),
            EmbedderChoice::Table(t) => Some(t),
            EmbedderChoice::Unavailable(u) => Some(u),
        }
    }
}

fn read_outputs(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<OutputLine>(l)
                .map(|o| o.answer)
                .with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

async fn answers_from_gateway(url: &str, examples: &[QAExample]) -> Result<Vec<String>> {
    let http = reqwest::Client::new();
    let endpoint = format!("{}/v1/chat", url.trim_end_matches('/'));
    let mut answers = Vec::with_capacity(examples.len());
    for (i, example) in examples.iter().enumerate() {
        let response = http
            .post(&endpoint)
            .json(&ChatRequest::new(example.question.clone()))
            .send()
            .await?;
        if !response.status().is_success() {
            bail!("example {}: gateway returned HTTP {}", i + 1, response.status());
        }
        let turn: ChatTurnResponse = response.json().await?;
        answers.push(turn.final_answer.text);
    }
    Ok(answers)
}

async fn calibrate(
    args: ScorerArgs,
    data: &Path,
    betas: &[f64],
    step: f64,
    json: Option<&Path>,
) -> Result<()> {
    let scorer = match (args.model, args.config) {
        (Some(path), _) => Scorer::Builtin(Arc::new(LinearScorerModel::load(&path)?)),
        (None, Some(config)) => Scorer::from_spec(&load_config(&config)?.scorer)?,
        (None, None) => bail!("pass --model or --config"),
    };
    let examples = read_jsonl(data)?;
    let mut rows = Vec::with_capacity(examples.len());
    for example in &examples {
        rows.push(ScoredExample::new(scorer.score(&example.question).await?, example));
    }

    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<22} {:>9} {:>9} {:>12}", "strategy", "precision", "recall", "specialists")?;
    let mut reports = Vec::new();
    for n in 1..=3 {
        let report = evaluate_scored(&rows, SelectionStrategy::TopN { n })?;
        writeln!(
            out,
            "{:<22} {:>9.4} {:>9.4} {:>12.3}",
            format!("top-{n}"),
            report.precision,
            report.recall,
            report.avg_specialists
        )?;
        reports.push(serde_json::to_value(&report)?);
    }
    let mut outcomes = Vec::new();
    for &beta in betas {
        let outcome = calibrate_scored(&rows, &CalibrationSpec::with_step(beta, step)?)?;
        writeln!(
            out,
            "{:<22} {:>9.4} {:>9.4} {:>12.3}",
            format!("F{beta} tau={:.2}", outcome.tau),
            outcome.report.precision,
            outcome.report.recall,
            outcome.report.avg_specialists
        )?;
        outcomes.push(outcome);
    }
    if let Some(path) = json {
        let doc = serde_json::json!({ "top_n": reports, "calibrated": outcomes });
        std::fs::write(path, serde_json::to_vec_pretty(&doc)?)?;
    }
    Ok(())
}
