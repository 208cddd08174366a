//! Command-line front end. Every run produces one machine-readable
//! [`RunReport`]; commands with tabular output (`--format csv`) render a
//! CSV table instead of the report on stdout, but the report is still
//! built and returned to callers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::datagen;
use crate::error::{Error, Result};
use crate::locality;
use crate::microtrain::{self, SortTrainOpts, Task, TrainConfig};
use crate::nncompiler::{self, DepthRule};
use crate::nnruntime::DenseNetwork;
use crate::patchcodec::{self, Patch, PrecisionModel};
use crate::pipeline::Pipeline;
use crate::sortnet::{self, SortingNetwork, DEFAULT_VERIFY_CAP};

/// The one record every invocation emits: what ran, with which inputs,
/// what it produced, and anything the caller should know about the
/// numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    /// Paths written by the run.
    pub outputs: Vec<String>,
    /// Flat name → number map; counts are exact integers.
    pub metrics: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl RunReport {
    fn new(command: &str, config: Value) -> Self {
        RunReport {
            command: command.into(),
            config,
            seed: None,
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn metric_u64(&mut self, name: &str, value: u64) -> &mut Self {
        self.metrics.insert(name.into(), Value::from(value));
        self
    }

    fn metric_f64(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.into(), Value::from(value));
        self
    }

    fn metric_flag(&mut self, name: &str, value: bool) -> &mut Self {
        self.metric_u64(name, u64::from(value))
    }
}

/// What a dispatched command hands back: the report, plus rendered CSV
/// when the command was asked for a table.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub table: Option<String>,
}

impl RunOutput {
    fn report_only(report: RunReport) -> Self {
        RunOutput { report, table: None }
    }

    /// What belongs on stdout for this run.
    pub fn rendered(&self) -> String {
        match &self.table {
            Some(table) => table.clone(),
            None => {
                let mut text =
                    serde_json::to_string_pretty(&self.report).expect("report serializes");
                text.push('\n');
                text
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sortnetc",
    version,
    about = "Sorting networks, their compilation to exact ReLU networks, and the tooling around them"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate image or number-list datasets
    #[command(subcommand)]
    Datagen(DatagenCmd),
    /// Construct and verify sorting networks
    #[command(subcommand)]
    Sortnet(SortnetCmd),
    /// Compile a sorting network into a dense ReLU model
    Compile(CompileArgs),
    /// Run a model JSON on one input vector
    Eval(EvalArgs),
    /// Closed-form weight counts for image-scale sorting
    Estimate(EstimateArgs),
    /// Symbol-growth and compression-factor trace
    Locality(LocalityArgs),
    /// Train classifiers or sorters
    #[command(subcommand)]
    Train(TrainCmd),
    /// Patch encoding and injectivity checks
    #[command(subcommand)]
    Codec(CodecCmd),
    /// End-to-end image classification
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NetKind {
    /// Hand-minimal networks, 2 to 4 wires
    Optimal,
    /// Odd-even mergesort, any width
    Merge,
    /// Two alternating layers; x applications sort x wires
    Brick,
}

#[derive(Debug, Subcommand)]
enum SortnetCmd {
    /// Build a network and print or write its JSON
    Gen(SortnetGenArgs),
    /// Check the sorting property of a stored network
    Verify(SortnetVerifyArgs),
}

#[derive(Debug, Args)]
struct SortnetGenArgs {
    #[arg(long, value_enum)]
    kind: NetKind,
    #[arg(long)]
    wires: usize,
    /// Write the network JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SortnetVerifyArgs {
    #[arg(long)]
    file: PathBuf,
    /// How many times to apply the network before checking order
    #[arg(long, default_value_t = 1)]
    applications: usize,
    /// Widths above this cap switch to randomized checking
    #[arg(long, default_value_t = DEFAULT_VERIFY_CAP)]
    cap: usize,
    /// Seed for the randomized fallback
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CompileArgs {
    /// Sorting-network JSON
    #[arg(long = "in")]
    input: PathBuf,
    /// Where to write the model JSON
    #[arg(long)]
    out: PathBuf,
    /// Drop idle pass-through neurons from the hidden layers
    #[arg(long)]
    prune: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model JSON produced by `compile`
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated input values
    #[arg(long, value_delimiter = ',', required = true)]
    input: Vec<f64>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Image side in pixels
    #[arg(long)]
    image: usize,
    /// Patch side in pixels
    #[arg(long)]
    patch: usize,
    /// Sort one code per patch instead of one per window position
    #[arg(long)]
    attention: bool,
    /// Sorter depth; defaults to ceil(log2 x)
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct LocalityArgs {
    #[arg(long)]
    patch_side: usize,
    #[arg(long)]
    levels: usize,
    /// Also check the trace against its closed asymptotic form
    #[arg(long)]
    closed_form: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Debug, Subcommand)]
enum TrainCmd {
    /// Learn the repeated-value class from fixed train/test lists
    Classify(TrainClassifyArgs),
    /// Learn to sort x values from unlimited fresh examples
    Sort(TrainSortArgs),
}

#[derive(Debug, Args)]
struct TrainClassifyArgs {
    /// Present each list in ascending order
    #[arg(long, conflicts_with = "unsorted")]
    sorted: bool,
    /// Present each list in generation order
    #[arg(long)]
    unsorted: bool,
    /// Layer sizes, e.g. 10,10,1
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<usize>,
    /// Training samples
    #[arg(long = "train", value_name = "COUNT", default_value_t = 4000)]
    train_count: usize,
    /// Held-out samples
    #[arg(long = "test", value_name = "COUNT", default_value_t = 1000)]
    test_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 50)]
    batch_size: usize,
    #[arg(long, default_value_t = 3e-3)]
    learning_rate: f64,
}

#[derive(Debug, Args)]
struct TrainSortArgs {
    /// How many values to sort
    #[arg(long)]
    x: usize,
    /// Layer sizes, must start and end with x
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Success threshold 1e-5 instead of 1e-4
    #[arg(long)]
    strict: bool,
    /// Optimizer steps per restart
    #[arg(long, default_value_t = 6000)]
    steps: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 4e-3)]
    learning_rate: f64,
    /// Write the best network's model JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum CodecCmd {
    /// Encode an ASCII 0/1 grid file as a real number
    Encode(CodecEncodeArgs),
    /// Check whether all patches of one size get distinct codes
    Injective(CodecInjectiveArgs),
}

fn parse_precision(text: &str) -> std::result::Result<PrecisionModel, String> {
    PrecisionModel::parse(text).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct CodecEncodeArgs {
    /// File holding one 0/1 row per line
    #[arg(long)]
    patch_file: PathBuf,
    /// Mantissa bits to emulate, or "exact"
    #[arg(long, value_parser = parse_precision)]
    mantissa: PrecisionModel,
}

#[derive(Debug, Args)]
struct CodecInjectiveArgs {
    #[arg(long)]
    side: usize,
    #[arg(long, value_parser = parse_precision)]
    mantissa: PrecisionModel,
}

#[derive(Debug, Subcommand)]
enum DatagenCmd {
    /// Images of repeated binary patches with ground-truth labels
    Identity(DatagenIdentityArgs),
    /// Number lists with a repeated-value class
    Lists(DatagenListsArgs),
}

#[derive(Debug, Args)]
struct DatagenIdentityArgs {
    #[arg(long, default_value_t = 32)]
    image_side: usize,
    #[arg(long, default_value_t = 4)]
    patch_side: usize,
    #[arg(long, default_value_t = 3)]
    min_patches: usize,
    #[arg(long, default_value_t = 6)]
    max_patches: usize,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the PGM files and manifest.json
    #[arg(long)]
    out: PathBuf,
    /// Label by coin flip instead of forcing an even class split
    #[arg(long)]
    unbalanced: bool,
}

#[derive(Debug, Args)]
struct DatagenListsArgs {
    #[arg(long, default_value_t = 5000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file to write
    #[arg(long)]
    out: PathBuf,
    /// Store each list in ascending order
    #[arg(long)]
    sorted: bool,
}

#[derive(Debug, Subcommand)]
enum PipelineCmd {
    /// Classify a generated dataset and compare against its labels
    Run(PipelineRunArgs),
}

#[derive(Debug, Args)]
struct PipelineRunArgs {
    /// Dataset directory written by `datagen identity`
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_parser = parse_precision)]
    mantissa: PrecisionModel,
    /// Write the full per-image verdict summary here
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Parses an argument vector and runs it. The first element is the
/// program name, as in `std::env::args`.
pub fn dispatch<I, S>(argv: I) -> Result<RunOutput>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<RunOutput> {
    match cli.command {
        Command::Datagen(DatagenCmd::Identity(args)) => datagen_identity(args),
        Command::Datagen(DatagenCmd::Lists(args)) => datagen_lists(args),
        Command::Sortnet(SortnetCmd::Gen(args)) => sortnet_gen(args),
        Command::Sortnet(SortnetCmd::Verify(args)) => sortnet_verify(args),
        Command::Compile(args) => compile_cmd(args),
        Command::Eval(args) => eval_cmd(args),
        Command::Estimate(args) => estimate_cmd(args),
        Command::Locality(args) => locality_cmd(args),
        Command::Train(TrainCmd::Classify(args)) => train_classify(args),
        Command::Train(TrainCmd::Sort(args)) => train_sort(args),
        Command::Codec(CodecCmd::Encode(args)) => codec_encode(args),
        Command::Codec(CodecCmd::Injective(args)) => codec_injective(args),
        Command::Pipeline(PipelineCmd::Run(args)) => pipeline_run(args),
    }
}

fn path_string(path: &Path) -> String {
    path.display().to_string()
}

fn datagen_identity(args: DatagenIdentityArgs) -> Result<RunOutput> {
    let cfg = datagen::DatasetConfig {
        image_side: args.image_side,
        patch_side: args.patch_side,
        min_patches: args.min_patches,
        max_patches: args.max_patches,
        sample_count: args.count,
        seed: args.seed,
        balanced: !args.unbalanced,
    };
    let dataset = datagen::generate_identity_dataset(&cfg)?;
    let manifest = dataset.write(&args.out)?;
    let ones = dataset
        .images
        .iter()
        .filter(|i| i.class_label == datagen::ClassLabel::One)
        .count();
    let mut report = RunReport::new("datagen identity", serde_json::to_value(&cfg)?);
    report.seed = Some(args.seed);
    report.outputs.push(path_string(&args.out.join("manifest.json")));
    report
        .metric_u64("images", manifest.images.len() as u64)
        .metric_u64("class_one", ones as u64)
        .metric_u64("class_two", (manifest.images.len() - ones) as u64);
    Ok(RunOutput::report_only(report))
}

fn datagen_lists(args: DatagenListsArgs) -> Result<RunOutput> {
    let samples = datagen::generate_list_dataset(args.count, args.seed, args.sorted)?;
    datagen::write_list_csv(&args.out, &samples)?;
    let ones = samples.iter().filter(|s| s.label == datagen::ClassLabel::One).count();
    let mut report = RunReport::new(
        "datagen lists",
        json!({"count": args.count, "seed": args.seed, "sorted": args.sorted}),
    );
    report.seed = Some(args.seed);
    report.outputs.push(path_string(&args.out));
    report
        .metric_u64("samples", samples.len() as u64)
        .metric_u64("class_one", ones as u64)
        .metric_u64("class_two", (samples.len() - ones) as u64);
    Ok(RunOutput::report_only(report))
}

fn build_network(kind: NetKind, wires: usize) -> Result<SortingNetwork> {
    match kind {
        NetKind::Optimal => sortnet::make_optimal_small(wires),
        NetKind::Merge => sortnet::make_merge_network(wires),
        NetKind::Brick => sortnet::make_brick_network(wires),
    }
}

fn sortnet_gen(args: SortnetGenArgs) -> Result<RunOutput> {
    let net = build_network(args.kind, args.wires)?;
    let bounds = sortnet::depth_bounds(args.wires)?;
    let mut report = RunReport::new(
        "sortnet gen",
        json!({"kind": format!("{:?}", args.kind).to_lowercase(), "wires": args.wires}),
    );
    report
        .metric_u64("wires", net.wires() as u64)
        .metric_u64("depth", net.depth() as u64)
        .metric_u64("comparators", net.comparator_count() as u64)
        .metric_f64("depth_bound_info_theoretic", bounds.info_theoretic)
        .metric_f64("depth_bound_kahale", bounds.kahale);
    match args.out {
        Some(path) => {
            fs::write(&path, net.to_json())?;
            report.outputs.push(path_string(&path));
            Ok(RunOutput::report_only(report))
        }
        // no file requested: the network itself is the output
        None => Ok(RunOutput { report, table: Some(net.to_json()) }),
    }
}

fn sortnet_verify(args: SortnetVerifyArgs) -> Result<RunOutput> {
    let net = SortingNetwork::from_json(&fs::read_to_string(&args.file)?)?;
    let verdict = sortnet::verify_sorts(&net, args.applications, args.cap, args.seed);
    let mut report = RunReport::new(
        "sortnet verify",
        json!({
            "file": path_string(&args.file),
            "applications": args.applications,
            "cap": args.cap,
        }),
    );
    report.seed = Some(args.seed);
    report
        .metric_flag("pass", verdict.pass)
        .metric_u64("vectors_tested", verdict.vectors_tested)
        .metric_u64("applications", verdict.applications as u64)
        .metric_flag("probabilistic", verdict.probabilistic);
    if let Some(v) = &verdict.first_failure {
        report.warnings.push(format!("first failing input: {v:?}"));
    }
    Ok(RunOutput::report_only(report))
}

fn compile_cmd(args: CompileArgs) -> Result<RunOutput> {
    let net = SortingNetwork::from_json(&fs::read_to_string(&args.input)?)?;
    let model = nncompiler::compile(&net, args.prune);
    fs::write(&args.out, model.to_json())?;
    let mut report = RunReport::new(
        "compile",
        json!({
            "in": path_string(&args.input),
            "out": path_string(&args.out),
            "prune": args.prune,
        }),
    );
    report.outputs.push(path_string(&args.out));
    report
        .metric_u64("wires", net.wires() as u64)
        .metric_u64("sorting_layers", net.depth() as u64)
        .metric_u64("model_layers", model.layers().len() as u64)
        .metric_u64(
            "weights_only",
            model.parameter_count(crate::nnruntime::Counting::WeightsOnly) as u64,
        )
        .metric_u64(
            "weights_and_biases",
            model.parameter_count(crate::nnruntime::Counting::WeightsAndBiases) as u64,
        );
    Ok(RunOutput::report_only(report))
}

fn eval_cmd(args: EvalArgs) -> Result<RunOutput> {
    let model = DenseNetwork::from_json(&fs::read_to_string(&args.model)?)?;
    let output = model.forward(&args.input)?;
    let mut report = RunReport::new(
        "eval",
        json!({"model": path_string(&args.model), "input": args.input}),
    );
    report.metric_u64("output_count", output.len() as u64);
    for (i, v) in output.iter().enumerate() {
        report.metric_f64(&format!("output_{i}"), *v);
    }
    Ok(RunOutput::report_only(report))
}

fn estimate_cmd(args: EstimateArgs) -> Result<RunOutput> {
    let rule = match args.depth {
        Some(d) => DepthRule::Explicit(d),
        None => DepthRule::InfoTheoreticCeil,
    };
    let scenario = nncompiler::estimate_parameters(args.image, args.patch, args.attention, rule)?;
    let mut report = RunReport::new("estimate", serde_json::to_value(&scenario)?);
    report
        .metric_u64("x", scenario.x)
        .metric_u64("depth", scenario.depth)
        .metric_u64("p_feedforward", scenario.p_feedforward)
        .metric_u64("p_iterative", scenario.p_iterative);
    report.warnings = scenario.notes.clone();
    let table = match args.format {
        OutputFormat::Json => None,
        OutputFormat::Csv => Some(format!(
            "image_side,patch_side,attention,x,depth,p_feedforward,p_iterative\n{},{},{},{},{},{},{}\n",
            scenario.image_side,
            scenario.patch_side,
            scenario.attention,
            scenario.x,
            scenario.depth,
            scenario.p_feedforward,
            scenario.p_iterative,
        )),
    };
    Ok(RunOutput { report, table })
}

fn locality_cmd(args: LocalityArgs) -> Result<RunOutput> {
    let trace = locality::trace_identity_locality(args.patch_side, args.levels)?;
    let mut report = RunReport::new(
        "locality",
        json!({
            "patch_side": args.patch_side,
            "levels": args.levels,
            "closed_form": args.closed_form,
        }),
    );
    let last = trace.last();
    report
        .metric_u64("levels", args.levels as u64)
        .metric_f64("final_log2_cardinality", last.log2_cardinality)
        .metric_f64("final_compression_factor", last.compression_factor.unwrap_or(f64::NAN))
        .metric_f64("locality_estimate", trace.locality_estimate);
    if args.closed_form {
        let check = locality::locality_closed_form_check(args.levels.max(2))?;
        report
            .metric_f64("locality_limit", check.locality_limit)
            .metric_f64(
                "final_asymptote_gap",
                *check.asymptote_gaps.last().expect("at least two levels"),
            );
    }
    let table = match args.format {
        OutputFormat::Json => None,
        OutputFormat::Csv => {
            let mut text =
                String::from("level,log2_cardinality,compression_factor,receptive_field_size\n");
            for level in &trace.levels {
                let c = level
                    .compression_factor
                    .map_or(String::new(), |c| c.to_string());
                text.push_str(&format!(
                    "{},{},{c},{}\n",
                    level.level, level.log2_cardinality, level.receptive_field_size
                ));
            }
            Some(text)
        }
    };
    Ok(RunOutput { report, table })
}

fn train_report_metrics(report: &mut RunReport, outcome: &microtrain::TrainReport) {
    report
        .metric_f64("final_train_loss", outcome.final_train_loss)
        .metric_f64("train_accuracy", outcome.train_accuracy)
        .metric_u64("parameter_count", outcome.parameter_count as u64)
        .metric_u64("epochs_run", outcome.epochs_run as u64)
        .metric_u64("restart_index", outcome.restart_index as u64)
        .metric_flag("diverged", outcome.diverged);
    if let Some(acc) = outcome.test_accuracy {
        report.metric_f64("test_accuracy", acc);
    }
    if let Some(success) = outcome.success {
        report.metric_flag("success", success);
    }
    report
        .warnings
        .push(format!("optimizer: {}", outcome.optimizer_note));
}

fn train_classify(args: TrainClassifyArgs) -> Result<RunOutput> {
    if args.sorted == args.unsorted {
        return Err(Error::InvalidArgument(
            "pass exactly one of --sorted or --unsorted".into(),
        ));
    }
    let (train_set, test_set) = microtrain::classification_data(
        args.train_count,
        args.test_count,
        args.seed,
        args.sorted,
    )?;
    let cfg = TrainConfig {
        layer_sizes: args.layers.clone(),
        task: Task::ClassifyList,
        loss: microtrain::Loss::Bce,
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        seed: args.seed,
        restarts: 1,
    };
    let (_, outcome) = microtrain::train(&cfg, &train_set, Some(&test_set))?;
    let mut report = RunReport::new(
        "train classify",
        json!({
            "sorted": args.sorted,
            "layers": args.layers,
            "train": args.train_count,
            "test": args.test_count,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "learning_rate": args.learning_rate,
        }),
    );
    report.seed = Some(args.seed);
    train_report_metrics(&mut report, &outcome);
    Ok(RunOutput::report_only(report))
}

fn train_sort(args: TrainSortArgs) -> Result<RunOutput> {
    let mut opts = SortTrainOpts {
        seed: args.seed,
        steps: args.steps,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        ..SortTrainOpts::default()
    };
    if args.strict {
        opts = opts.strict();
    }
    let (network, outcome) = microtrain::learn_to_sort(args.x, &args.layers, args.restarts, &opts)?;
    let mut report = RunReport::new(
        "train sort",
        json!({
            "x": args.x,
            "layers": args.layers,
            "restarts": args.restarts,
            "strict": args.strict,
            "steps": args.steps,
            "batch_size": args.batch_size,
            "learning_rate": args.learning_rate,
        }),
    );
    report.seed = Some(args.seed);
    report.metric_f64("loss_threshold", opts.loss_threshold);
    train_report_metrics(&mut report, &outcome);
    if let Some(path) = args.out {
        fs::write(&path, network.to_json())?;
        report.outputs.push(path_string(&path));
    }
    Ok(RunOutput::report_only(report))
}

fn codec_encode(args: CodecEncodeArgs) -> Result<RunOutput> {
    let patch = Patch::parse(&fs::read_to_string(&args.patch_file)?)?;
    let code = patchcodec::encode(&patch, args.mantissa)?;
    let decoded = patchcodec::decode(&code);
    let mut report = RunReport::new(
        "codec encode",
        json!({
            "patch_file": path_string(&args.patch_file),
            "side": patch.side(),
            "bits": patch.bit_string(),
            "mantissa": args.mantissa.to_string(),
        }),
    );
    report
        .metric_f64("value", code.value())
        .metric_u64("side", patch.side() as u64)
        .metric_u64("pixel_bits", (patch.side() * patch.side()) as u64)
        .metric_flag("lossy", decoded.lossy);
    if decoded.lossy {
        report.warnings.push(format!(
            "patch needs {} bits, budget keeps {}; decoding loses pixels",
            patch.side() * patch.side(),
            args.mantissa
        ));
    }
    Ok(RunOutput::report_only(report))
}

fn codec_injective(args: CodecInjectiveArgs) -> Result<RunOutput> {
    let verdict = patchcodec::codes_injective(args.side, args.mantissa)?;
    let mut report = RunReport::new(
        "codec injective",
        json!({"side": args.side, "mantissa": args.mantissa.to_string()}),
    );
    report
        .metric_flag("injective", verdict.injective)
        .metric_u64("patches_checked", verdict.patches_checked);
    if let Some((a, b)) = &verdict.collision {
        report.warnings.push(format!(
            "collision: {} and {} share a code",
            a.bit_string(),
            b.bit_string()
        ));
    }
    Ok(RunOutput::report_only(report))
}

fn pipeline_run(args: PipelineRunArgs) -> Result<RunOutput> {
    let dataset = datagen::read_identity_dataset(&args.dataset)?;
    let pipeline = Pipeline::new(
        dataset.config.max_patches,
        dataset.config.patch_side,
        args.mantissa,
    )?;
    let summary = pipeline.classify_dataset(&dataset)?;
    let mut report = RunReport::new(
        "pipeline run",
        json!({
            "dataset": path_string(&args.dataset),
            "mantissa": args.mantissa.to_string(),
            "dataset_config": serde_json::to_value(&dataset.config)?,
        }),
    );
    report.seed = Some(dataset.config.seed);
    report
        .metric_u64("total", summary.total as u64)
        .metric_u64("agreeing", summary.agreeing as u64)
        .metric_f64("agreement", summary.agreement());
    if let Some(path) = args.report {
        let mut text = serde_json::to_vec_pretty(&summary)?;
        text.push(b'\n');
        fs::write(&path, text)?;
        report.outputs.push(path_string(&path));
    }
    Ok(RunOutput::report_only(report))
}
