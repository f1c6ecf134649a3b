use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amt_eval::consonance::{default_chord_table, ChordTable};
use amt_eval::evaluate::{batch_csv, batch_jsonl, evaluate_files, Evaluator};
use amt_eval::features::schema_json;
use amt_eval::harness::{load_corpus, validate_rhythm, Condition, RhythmPiece, ValidationOptions};
use amt_eval::model::apply_sustain;
use amt_eval::synth::{tonal_corpus, SynthParams};
use amt_eval::{evaluate_batch, EvalConfig};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// Musically-informed evaluation of piano transcriptions.
#[derive(Debug, Parser)]
#[command(name = "amt-eval", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one (target, output) pair and print its feature vector.
    Evaluate(EvaluateArgs),
    /// Evaluate every pair of a manifest CSV (`target_path,output_path,pair_id`).
    Batch(BatchArgs),
    /// Run the rhythm perturbation validation over a corpus of target files.
    ValidateRhythm(ValidateArgs),
    /// Count chord types over a corpus and write a familiarity table.
    CorpusTable(CorpusTableArgs),
    /// Print the feature schema with higher-is-better annotations.
    Schema,
}

#[derive(Debug, Args)]
struct EvalOptions {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed recorded with the results and used for per-row seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Override one parameter, e.g. `--set onset_tolerance=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Chord-type counts for familiarity (defaults to the bundled table).
    #[arg(long, conflicts_with = "no_chord_table")]
    chord_table: Option<PathBuf>,
    /// Leave familiarity features absent.
    #[arg(long)]
    no_chord_table: bool,
}

impl EvalOptions {
    fn config(&self) -> Result<EvalConfig> {
        let mut cfg = match &self.config {
            Some(path) => EvalConfig::load(path)?,
            None => EvalConfig::default(),
        };
        for item in &self.overrides {
            let Some((key, value)) = item.split_once('=') else {
                bail!(Usage(format!("--set expects KEY=VALUE, got `{item}`")));
            };
            cfg.set(key, value).map_err(|e| Usage(e.to_string()))?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn chord_table(&self) -> Result<Option<ChordTable>> {
        if self.no_chord_table {
            return Ok(None);
        }
        Ok(Some(match &self.chord_table {
            Some(path) => ChordTable::load(path)?,
            None => default_chord_table(),
        }))
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Pretty JSON object (the default).
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// Header line plus one CSV row.
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    options: EvalOptions,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Result file; `.jsonl` or `.json` writes JSON lines, anything else CSV.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    options: EvalOptions,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Directory of target note files (.mid, .midi, .txt, .csv).
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    corpus: Option<PathBuf>,
    /// Use a generated tonal corpus of this many pieces, with beat grids.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Seed of the generated corpus.
    #[arg(long, default_value_t = 0)]
    corpus_seed: u64,
    /// Report file; `.json` writes JSON, anything else a markdown table.
    #[arg(long)]
    out: PathBuf,
    /// Noise seeds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    /// Directory of `<stem>.grid` files with 16th-note times.
    #[arg(long)]
    grids: Option<PathBuf>,
    /// Constant tempo (BPM) for pieces without a grid.
    #[arg(long)]
    tempo: Option<f64>,
    /// Noise half-widths in milliseconds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "100,300")]
    noise: Vec<u32>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusTableArgs {
    /// Directory of note files to count.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    corpus: Option<PathBuf>,
    /// Count a generated tonal corpus of this many pieces instead.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Marks an error caused by the invocation rather than by input data.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn evaluate(args: &EvaluateArgs) -> Result<u8> {
    let evaluator = Evaluator::new(args.options.config()?, args.options.chord_table()?);
    let fv = evaluate_files(&evaluator, &args.target, &args.output)?;
    warn_all(&fv.warnings);
    if args.csv {
        let header: Vec<&str> = amt_eval::features::schema_keys().collect();
        println!("{}", header.join(","));
        println!("{}", fv.csv_values().join(","));
    } else {
        println!("{}", serde_json::to_string_pretty(&fv.to_json())?);
    }
    Ok(0)
}

fn batch(args: &BatchArgs) -> Result<u8> {
    let cfg = args.options.config()?;
    let table = args.options.chord_table()?;
    let rows = evaluate_batch(&args.manifest, &cfg, table.as_ref())?;
    let jsonl = matches!(args.out.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"));
    write_file(&args.out, &if jsonl { batch_jsonl(&rows) } else { batch_csv(&rows) })?;
    let failed: Vec<_> = rows.iter().filter(|r| !r.is_ok()).collect();
    for row in &failed {
        if let Err(e) = &row.result {
            eprintln!("error: {}: {e}", row.pair_id);
        }
    }
    eprintln!("{} of {} pairs evaluated", rows.len() - failed.len(), rows.len());
    Ok(if failed.is_empty() { 0 } else { EXIT_PARTIAL })
}

fn validate(args: &ValidateArgs) -> Result<u8> {
    let pieces = match (&args.corpus, args.synthetic) {
        (Some(dir), _) => {
            let (pieces, warnings) = load_corpus(dir, args.grids.as_deref())?;
            warn_all(&warnings);
            if pieces.is_empty() {
                bail!(Usage(format!("{}: no note files found", dir.display())));
            }
            pieces
        }
        (None, Some(count)) => tonal_corpus(count, args.corpus_seed, &SynthParams::default()),
        (None, None) => unreachable!("clap requires one source"),
    };
    let mut conditions = vec![Condition::QuantConstant, Condition::Quant];
    conditions.extend(args.noise.iter().map(|&ms| Condition::Noisy(ms)));
    let options = ValidationOptions {
        conditions,
        seeds: args.seed.clone(),
        tempo: args.tempo,
        config: match &args.config {
            Some(path) => EvalConfig::load(path)?,
            None => EvalConfig::default(),
        },
    };
    let report = validate_rhythm(&pieces, &options);
    for notice in &report.notices {
        eprintln!("note: {notice}");
    }
    let is_json = args.out.extension().and_then(|e| e.to_str()) == Some("json");
    let text = if is_json {
        serde_json::to_string_pretty(&report.to_json())? + "\n"
    } else {
        report.to_table()
    };
    write_file(&args.out, &text)?;
    Ok(0)
}

fn corpus_table(args: &CorpusTableArgs) -> Result<u8> {
    let pieces: Vec<RhythmPiece> = match (&args.corpus, args.synthetic) {
        (Some(dir), _) => {
            let (pieces, warnings) = load_corpus(dir, None)?;
            warn_all(&warnings);
            pieces
        }
        (None, Some(count)) => tonal_corpus(count, args.seed, &SynthParams::default()),
        (None, None) => unreachable!("clap requires one source"),
    };
    let sounding: Vec<_> = pieces.iter().map(|p| apply_sustain(&p.notes)).collect();
    let table = ChordTable::from_pieces(sounding.iter().map(|n| n.notes()));
    match &args.out {
        Some(path) => write_file(path, &table.to_csv())?,
        None => print!("{}", table.to_csv()),
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Evaluate(args) => evaluate(args),
        Command::Batch(args) => batch(args),
        Command::ValidateRhythm(args) => validate(args),
        Command::CorpusTable(args) => corpus_table(args),
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&schema_json())?);
            Ok(0)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<amt_eval::Error>() {
        Some(e) if e.is_parse_error() => EXIT_PARSE,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
