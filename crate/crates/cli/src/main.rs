use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ippm_core::classifiers::ClassifierKind;
use ippm_core::drift_gen::{generate, ClaimProcessConfig, Variant};
use ippm_core::encoding::{encode_frequency, encode_index, extract_prefixes, write_dataset, EncodingSchema, Prefix};
use ippm_core::eval::{run_scenario1, run_scenario2, run_scenario3};
use ippm_core::event_log::{parse_csv, parse_xes, write_csv, CsvSchemaConfig, EventLog, StaticColumns};
use ippm_core::ltl::{label_case, parse_formula, write_labels, Formula};
use ippm_core::pipelines::{Approach, Pipeline, PipelineConfig};

#[derive(Parser)]
#[command(name = "ippm", version, about = "Incremental outcome prediction for business process event logs")]
struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label every case of a log with an outcome formula (case_id,label CSV).
    Label(LabelArgs),
    /// Encode case prefixes as a feature table plus a schema sidecar.
    Encode(EncodeArgs),
    /// Train a pipeline on a log and save it as JSON.
    Train(TrainArgs),
    /// Predict the outcome of every prefix of every case in a log.
    Predict(PredictArgs),
    /// Run one of the evaluation scenarios and write a report directory.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic insurance-claim log, optionally with a drift.
    GenerateDrift(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Xes,
}

#[derive(Args)]
struct LogArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// CSV only: columns holding case attributes (inferred when omitted).
    #[arg(long, value_delimiter = ',')]
    static_columns: Option<Vec<String>>,
}

impl LogArgs {
    fn read(&self) -> Result<EventLog> {
        let file = File::open(&self.log).with_context(|| format!("opening {}", self.log.display()))?;
        let log = match self.format {
            Format::Csv => {
                let config = CsvSchemaConfig {
                    static_columns: match &self.static_columns {
                        Some(cols) => StaticColumns::Listed(cols.clone()),
                        None => StaticColumns::Infer,
                    },
                    ..CsvSchemaConfig::default()
                };
                parse_csv(BufReader::new(file), &config)
            }
            Format::Xes => parse_xes(BufReader::new(file)),
        }
        .with_context(|| format!("reading {}", self.log.display()))?;
        log::info!("{} cases, {} events", log.len(), log.event_count());
        Ok(log)
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "clustering")]
    approach: Approach,
    #[arg(long, default_value = "ht")]
    classifier: ClassifierKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Canopy loose threshold (needs --t2; derived from the data otherwise).
    #[arg(long, requires = "t2")]
    t1: Option<f64>,
    /// Canopy tight threshold.
    #[arg(long, requires = "t1")]
    t2: Option<f64>,
    /// Hoeffding split confidence.
    #[arg(long)]
    delta: Option<f64>,
    /// Hoeffding tie threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Instances between split attempts at a leaf.
    #[arg(long)]
    grace: Option<u64>,
    /// Confidence of the adaptive tree's change detectors.
    #[arg(long)]
    adwin_delta: Option<f64>,
    /// Trees in the random forest.
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long, default_value_t = 1)]
    prefix_min: usize,
    #[arg(long, default_value_t = 20)]
    prefix_max: usize,
}

impl ModelArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::new(self.approach, self.classifier);
        cfg.seed = self.seed;
        cfg.t1 = self.t1;
        cfg.t2 = self.t2;
        cfg.prefix_min = self.prefix_min;
        cfg.prefix_max = self.prefix_max;
        let c = &mut cfg.classifier;
        c.forest.seed = self.seed;
        if let Some(d) = self.delta {
            c.hoeffding.delta = d;
        }
        if let Some(t) = self.tau {
            c.hoeffding.tau = t;
        }
        if let Some(g) = self.grace {
            c.hoeffding.grace_period = g;
        }
        if let Some(d) = self.adwin_delta {
            c.adwin_delta = d;
        }
        if let Some(n) = self.trees {
            c.forest.n_trees = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    log: LogArgs,
    /// Outcome formula, e.g. 'F("Accept Claim")'.
    #[arg(long)]
    outcome: String,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    Frequency,
    Index,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    log: LogArgs,
    #[arg(long, value_enum)]
    encoding: Encoding,
    /// Index encoding: the prefix length. Frequency encoding: every prefix
    /// length from --prefix-min up to this one.
    #[arg(long)]
    prefix_len: usize,
    #[arg(long, default_value_t = 1)]
    prefix_min: usize,
    /// Adds a label column computed from the completed cases.
    #[arg(long)]
    outcome: Option<String>,
    /// Output CSV; the schema goes next to it as `<out>.schema.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    log: LogArgs,
    #[arg(long)]
    outcome: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Model file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    log: LogArgs,
    #[arg(long)]
    model: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    scenario: u8,
    #[command(flatten)]
    log: LogArgs,
    #[arg(long)]
    outcome: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Scenario 3: position of the first drifted case (half the log by default).
    #[arg(long)]
    drift_index: Option<usize>,
    /// Report directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    variant: Variant,
    /// Total cases; drift variants put the drift at the midpoint.
    #[arg(long, default_value_t = 2000)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn formula(text: &str) -> Result<Formula> {
    parse_formula(text).with_context(|| format!("parsing outcome formula {text:?}"))
}

fn label(args: &LabelArgs) -> Result<()> {
    let log = args.log.read()?;
    let f = formula(&args.outcome)?;
    let mut out = output(args.out.as_deref())?;
    write_labels(&log, &f, &mut out)?;
    out.flush()?;
    Ok(())
}

fn encode(args: &EncodeArgs) -> Result<()> {
    let log = args.log.read()?;
    let f = args.outcome.as_deref().map(formula).transpose()?;
    let mut rows = Vec::new();
    let schema = match args.encoding {
        Encoding::Frequency => {
            let schema = EncodingSchema::frequency(log.activity_alphabet().to_vec());
            for case in log.cases() {
                let y = f.as_ref().map(|f| label_case(case, f)).transpose()?;
                for prefix in extract_prefixes(case, y, args.prefix_min, args.prefix_len) {
                    rows.push((encode_frequency(&prefix, &schema)?, y));
                }
            }
            schema
        }
        Encoding::Index => {
            if args.prefix_len == 0 {
                bail!("--prefix-len must be at least 1");
            }
            let schema = EncodingSchema::index_for_log(&log, args.prefix_len);
            for case in log.cases().iter().filter(|c| c.len() >= args.prefix_len) {
                let y = f.as_ref().map(|f| label_case(case, f)).transpose()?;
                rows.push((encode_index(&Prefix::new(case, args.prefix_len, y), &schema)?, y));
            }
            schema
        }
    };
    let mut sidecar = args.out.clone().into_os_string();
    sidecar.push(".schema.json");
    let data = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    let side = BufWriter::new(File::create(&sidecar)?);
    write_dataset(schema.features(), &rows, data, side)?;
    log::info!("{} rows written", rows.len());
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let log = args.log.read()?;
    let f = formula(&args.outcome)?;
    let cfg = args.model.config()?;
    let pipeline = Pipeline::train(&log, &f, &cfg)?;
    let out = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    pipeline.save(out)?;
    Ok(())
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model = File::open(&args.model).with_context(|| format!("opening {}", args.model.display()))?;
    let pipeline = Pipeline::load(BufReader::new(model))?;
    let log = args.log.read()?;
    let cfg = pipeline.config();
    let mut out = csv::Writer::from_writer(output(args.out.as_deref())?);
    out.write_record(["case_id", "prefix_len", "label", "score", "fallback"])?;
    for case in log.cases() {
        for prefix in extract_prefixes(case, None, cfg.prefix_min, cfg.prefix_max) {
            let p = pipeline.predict(&prefix)?;
            out.write_record([
                p.case_id,
                p.prefix_len.to_string(),
                p.label.to_string(),
                p.score.to_string(),
                p.fallback.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let log = args.log.read()?;
    let f = formula(&args.outcome)?;
    let cfg = args.model.config()?;
    let report = match args.scenario {
        1 => run_scenario1(&log, &f, &cfg)?,
        2 => run_scenario2(&log, &f, &cfg)?,
        _ => {
            let drift = args.drift_index.unwrap_or(log.len() / 2);
            run_scenario3(&log, &f, &cfg, drift)?
        }
    };
    report
        .write_dir(&args.out)
        .with_context(|| format!("writing report to {}", args.out.display()))?;
    print!("{}", report.to_text());
    Ok(())
}

fn generate_drift(args: &GenerateArgs) -> Result<()> {
    if args.cases == 0 {
        bail!("--cases must be positive");
    }
    let (base, drift) = match args.variant {
        Variant::Baseline => (args.cases, 0),
        _ => {
            if args.cases < 2 {
                bail!("a drift log needs at least 2 cases");
            }
            (args.cases / 2, args.cases - args.cases / 2)
        }
    };
    let cfg = ClaimProcessConfig {
        n_cases_baseline: base,
        n_cases_drift: drift,
        seed: args.seed,
        ..ClaimProcessConfig::default()
    };
    let generated = generate(&cfg, args.variant)?;
    let mut out = output(args.out.as_deref())?;
    write_csv(&generated.log, &mut out)?;
    out.flush()?;
    eprintln!("drift index: {}", generated.drift_index);
    Ok(())
}

/// A closed stdout (e.g. piping into `head`) ends the run quietly.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        let io_err = cause.downcast_ref::<io::Error>().or_else(|| match cause.downcast_ref::<csv::Error>()?.kind() {
            csv::ErrorKind::Io(inner) => Some(inner),
            _ => None,
        });
        io_err.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Label(a) => label(a),
        Command::Encode(a) => encode(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::GenerateDrift(a) => generate_drift(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
