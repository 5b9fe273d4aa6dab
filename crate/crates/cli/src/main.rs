mod args;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use mosaic_core::pipeline::{
    eval_from_dir, run_bench, run_eval, run_pipeline, ConfigError, ConfigLayer, PipelineConfig,
    PipelineError, ENDPOINT_ENV,
};
use mosaic_core::prompt::{
    generate_corpus, read_lexicon, read_templates, write_corpus, CorpusError,
};
use mosaic_core::{parse_prompt, serialize_pairs, GrammarConfig, Prompt, PromptError};

use args::{BackendArgs, BenchArgs, Cli, Command, CorpusCommand, CorpusGenArgs, EvalArgs, RunArgs};

/// A failure paired with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            error: e.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: 2,
            error: anyhow::Error::new(e).context("config"),
        }
    }
}

impl From<PromptError> for Failure {
    fn from(e: PromptError) -> Self {
        Failure {
            code: 4,
            error: anyhow::Error::new(e).context("parse"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let code = match e {
            CorpusError::BadTemplate { .. } | CorpusError::BadLexicon { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            error: anyhow::Error::new(e).context("corpus"),
        }
    }
}

fn resolve(
    config: Option<&Path>,
    flags: ConfigLayer,
    need_input: bool,
) -> Result<PipelineConfig, ConfigError> {
    let file = match config {
        Some(path) => ConfigLayer::load(path)?,
        None => ConfigLayer::default(),
    };
    let env = std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty());
    PipelineConfig::resolve(file.overlay(flags), env, need_input)
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let mut flags = args.pipeline.layer();
    flags.out_dir = args.out.clone();
    let cfg = resolve(args.pipeline.common.config.as_deref(), flags, true)?;
    let (output, _) = run_pipeline(&cfg)?;
    println!(
        "wrote {} ({} objects, {} skipped, {} styles)",
        cfg.out_dir.display(),
        output.pairs.len(),
        output.skipped.len(),
        output.stylized.len()
    );
    for t in &output.timings {
        println!(
            "  {:<13} {:>9.3} ms  x{}",
            t.stage.as_str(),
            t.duration_ms,
            t.invocations
        );
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let common: &BackendArgs = &args.common;
    let mut flags = common.layer();
    flags.scale = args.scale;
    let report = match (&args.masks, &args.run_dir) {
        (Some(masks), _) => {
            let cfg = resolve(common.config.as_deref(), flags, true)?;
            eval_from_dir(&cfg, masks)?
        }
        (None, run_dir) => {
            flags.out_dir = run_dir.clone();
            let cfg = resolve(common.config.as_deref(), flags, false)?;
            run_eval(&cfg)?
        }
    };
    let text = serde_json::to_string_pretty(&report).context("serializing report")? + "\n";
    match &args.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let cfg = resolve(
        args.pipeline.common.config.as_deref(),
        args.pipeline.layer(),
        true,
    )?;
    let report = run_bench(&cfg, args.iterations)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).context("serializing report")?
        );
    } else {
        println!(
            "{} iterations, cache {}",
            report.iterations,
            if report.cache_enabled { "on" } else { "off" }
        );
        print!("{}", report.render_table());
    }
    Ok(())
}

fn cmd_parse(prompt: &str) -> Result<(), Failure> {
    let pairs = parse_prompt(&Prompt::new(prompt)?, &GrammarConfig::default())?;
    println!("{}", serialize_pairs(&pairs));
    Ok(())
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
}

fn cmd_corpus_gen(args: &CorpusGenArgs) -> Result<(), Failure> {
    let classes = read_lexicon(open(&args.classes)?)?;
    let styles = read_lexicon(open(&args.styles)?)?;
    let templates = read_templates(open(&args.templates)?)?;
    let records = generate_corpus(
        &classes,
        &styles,
        &templates,
        args.count,
        args.seed,
        &GrammarConfig::default(),
    )?;
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_corpus(&records, &mut w)?;
    w.flush()
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Parse(a) => cmd_parse(&a.prompt),
        Command::Corpus(CorpusCommand::Gen(a)) => cmd_corpus_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
