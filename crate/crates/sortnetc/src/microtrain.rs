//! Gradient-descent training for small dense networks: list classification
//! and learning to sort by example.
//!
//! The optimizer is plain Adam; every report records that so downstream
//! comparisons know no lookahead or warmup was involved. Randomness is
//! partitioned into named substreams of the run seed, which keeps parallel
//! restarts and serial reruns bit-identical:
//!
//!   0           He initialization for `train`
//!   1           epoch shuffling for `train`
//!   2           the fixed evaluation set for `learn_to_sort`
//!   3 + 2r      He initialization of sort restart r
//!   4 + 2r      training batches of sort restart r

use ndarray::{Array1, Array2, Axis, Zip};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{generate_list_dataset, ClassLabel, NumberListSample};
use crate::error::{Error, Result};
use crate::nnruntime::{Activation, Counting, DenseLayer, DenseNetwork};
use crate::rng::{chacha, Stream};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Probabilities are clamped this far away from {0,1} inside the log of
/// the cross entropy; the gradient uses the unclamped simplification.
const BCE_CLAMP: f64 = 1e-12;

/// A sort output counts as correct when every element lands this close to
/// the truth; uniform inputs have expected neighbor gaps of 1/(x+1), so
/// this separates "sorted" from "roughly shuffled" without being strict
/// about the final decimals.
pub const SORT_ACCURACY_TOLERANCE: f64 = 0.05;

/// Restarts run in fixed-size parallel chunks so the selected restart is
/// independent of thread count.
const RESTART_CHUNK: usize = 8;

/// Held-out vectors for the sort success criterion.
const SORT_EVAL_SAMPLES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Binary label per list; sigmoid output trained with cross entropy.
    ClassifyList,
    /// Sorted copy as the target; linear output trained with squared error.
    SortVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Bce,
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub layer_sizes: Vec<usize>,
    pub task: Task,
    pub loss: Loss,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Only the sort task retries from fresh initializations; see
    /// [`learn_to_sort`].
    pub restarts: usize,
}

impl TrainConfig {
    pub fn classify(layer_sizes: Vec<usize>, seed: u64) -> Self {
        TrainConfig {
            layer_sizes,
            task: Task::ClassifyList,
            loss: Loss::Bce,
            epochs: 300,
            batch_size: 50,
            learning_rate: 3e-3,
            seed,
            restarts: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument("need input and output layer sizes".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        match (self.task, self.loss) {
            (Task::ClassifyList, Loss::Bce) | (Task::SortVector, Loss::Mse) => {}
            (task, loss) => {
                return Err(Error::InvalidArgument(format!(
                    "{task:?} must not train with {loss:?}"
                )))
            }
        }
        if self.epochs == 0 || self.batch_size == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument("epochs, batch_size, restarts must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub parameter_count: usize,
    pub epochs_run: usize,
    pub restart_index: usize,
    /// Whether a success threshold was met; absent for tasks without one.
    pub success: Option<bool>,
    pub diverged: bool,
    pub optimizer: String,
    pub optimizer_note: String,
}

fn report_skeleton(net: &DenseNetwork) -> TrainReport {
    TrainReport {
        final_train_loss: f64::NAN,
        train_accuracy: 0.0,
        test_accuracy: None,
        parameter_count: net.parameter_count(Counting::WeightsAndBiases),
        epochs_run: 0,
        restart_index: 0,
        success: None,
        diverged: false,
        optimizer: "adam".into(),
        optimizer_note: "plain adam, no lookahead or learning-rate warmup".into(),
    }
}

/// Training pair: one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl Samples {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::LengthMismatch {
                expected: inputs.nrows(),
                actual: targets.nrows(),
            });
        }
        Ok(Samples { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Samples {
        Samples {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
        }
    }
}

/// Lays list samples out for the classifier: the training view as input,
/// class one mapped to target 1.
pub fn list_samples(lists: &[NumberListSample]) -> Samples {
    let rows = lists.len();
    let cols = lists.first().map_or(0, |s| s.values.len());
    let mut inputs = Array2::zeros((rows, cols));
    let mut targets = Array2::zeros((rows, 1));
    for (i, s) in lists.iter().enumerate() {
        for (j, &v) in s.values.iter().enumerate() {
            inputs[[i, j]] = v;
        }
        targets[[i, 0]] = if s.label == ClassLabel::One { 1.0 } else { 0.0 };
    }
    Samples { inputs, targets }
}

/// Train and test sets for the list-classification task. The test set
/// uses a far-offset seed so its lists never overlap the training draw.
pub fn classification_data(
    train_count: usize,
    test_count: usize,
    seed: u64,
    sorted: bool,
) -> Result<(Samples, Samples)> {
    let test_seed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let train = generate_list_dataset(train_count, seed, sorted)?;
    let test = generate_list_dataset(test_count, test_seed, sorted)?;
    Ok((list_samples(&train), list_samples(&test)))
}

fn init_from_rng(layer_sizes: &[usize], rng: &mut rand_chacha::ChaCha8Rng) -> DenseNetwork {
    let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
    for (idx, pair) in layer_sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let weights =
            Array2::from_shape_fn((fan_out, fan_in), |_| dist.sample(rng));
        let activation = if idx + 2 == layer_sizes.len() {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(
            DenseLayer::new(weights, Array1::zeros(fan_out), activation)
                .expect("generated parameters are finite"),
        );
    }
    DenseNetwork::new(layers).expect("consecutive sizes chain by construction")
}

/// Gaussian weights with variance 2/fan_in, zero biases, ReLU throughout
/// except for a linear final layer.
pub fn init_he(layer_sizes: &[usize], seed: u64) -> Result<DenseNetwork> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument("need input and output layer sizes".into()));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidArgument("zero-width layer".into()));
    }
    Ok(init_from_rng(layer_sizes, &mut chacha(seed, 0)))
}

struct Tape {
    /// activations[0] is the input; activations[i + 1] leaves layer i.
    activations: Vec<Array2<f64>>,
    preacts: Vec<Array2<f64>>,
}

impl Tape {
    fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("tape holds at least the input")
    }
}

fn forward_tape(net: &DenseNetwork, inputs: &Array2<f64>) -> Tape {
    let mut activations = vec![inputs.clone()];
    let mut preacts = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let z = activations.last().unwrap().dot(&layer.weights().t()) + layer.biases();
        activations.push(z.mapv(|v| layer.activation().apply(v)));
        preacts.push(z);
    }
    Tape { activations, preacts }
}

fn loss_value(loss: Loss, output: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let n = output.len() as f64;
    match loss {
        Loss::Mse => {
            Zip::from(output).and(targets).fold(0.0, |acc, &a, &y| acc + (a - y) * (a - y)) / n
        }
        Loss::Bce => {
            Zip::from(output).and(targets).fold(0.0, |acc, &p, &y| {
                let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                acc - y * p.ln() - (1.0 - y) * (1.0 - p).ln()
            }) / n
        }
    }
}

struct Grads {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

fn backward(net: &DenseNetwork, tape: &Tape, targets: &Array2<f64>, loss: Loss) -> Result<Grads> {
    let layers = net.layers();
    let depth = layers.len();
    let output = tape.output();
    let scale = 1.0 / output.len() as f64;

    // delta holds dL/dz of the layer currently being processed
    let mut delta: Array2<f64> = match loss {
        Loss::Bce => {
            if layers.last().map(|l| l.activation()) != Some(Activation::Sigmoid) {
                return Err(Error::InvalidArgument(
                    "cross entropy needs a sigmoid output layer".into(),
                ));
            }
            // sigmoid and cross entropy cancel to (p - y) / n
            (output - targets) * scale
        }
        Loss::Mse => {
            let mut d = (output - targets) * (2.0 * scale);
            let act = layers[depth - 1].activation();
            Zip::from(&mut d).and(&tape.preacts[depth - 1]).and(output).for_each(
                |d, &z, &a| *d *= act.derivative(z, a),
            );
            d
        }
    };

    let mut weights = vec![Array2::zeros((0, 0)); depth];
    let mut biases = vec![Array1::zeros(0); depth];
    for i in (0..depth).rev() {
        weights[i] = delta.t().dot(&tape.activations[i]);
        biases[i] = delta.sum_axis(Axis(0));
        if i > 0 {
            let mut back = delta.dot(layers[i].weights());
            let act = layers[i - 1].activation();
            Zip::from(&mut back)
                .and(&tape.preacts[i - 1])
                .and(&tape.activations[i])
                .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            delta = back;
        }
    }
    Ok(Grads { weights, biases })
}

struct Adam {
    learning_rate: f64,
    step: i32,
    mw: Vec<Array2<f64>>,
    vw: Vec<Array2<f64>>,
    mb: Vec<Array1<f64>>,
    vb: Vec<Array1<f64>>,
}

impl Adam {
    fn new(net: &DenseNetwork, learning_rate: f64) -> Self {
        let mw = net.layers().iter().map(|l| Array2::zeros(l.weights().dim())).collect();
        let vw = net.layers().iter().map(|l| Array2::zeros(l.weights().dim())).collect();
        let mb = net.layers().iter().map(|l| Array1::zeros(l.biases().len())).collect();
        let vb = net.layers().iter().map(|l| Array1::zeros(l.biases().len())).collect();
        Adam { learning_rate, step: 0, mw, vw, mb, vb }
    }

    fn apply(&mut self, net: &mut DenseNetwork, grads: &Grads) {
        self.step += 1;
        let correct1 = 1.0 - ADAM_BETA1.powi(self.step);
        let correct2 = 1.0 - ADAM_BETA2.powi(self.step);
        let lr = self.learning_rate;
        for (i, layer) in net.layers_mut().iter_mut().enumerate() {
            Zip::from(layer.weights_mut())
                .and(&mut self.mw[i])
                .and(&mut self.vw[i])
                .and(&grads.weights[i])
                .for_each(|w, m, v, &g| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *w -= lr * (*m / correct1) / ((*v / correct2).sqrt() + ADAM_EPS);
                });
            Zip::from(layer.biases_mut())
                .and(&mut self.mb[i])
                .and(&mut self.vb[i])
                .and(&grads.biases[i])
                .for_each(|b, m, v, &g| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *b -= lr * (*m / correct1) / ((*v / correct2).sqrt() + ADAM_EPS);
                });
        }
    }
}

/// One optimizer step; returns the pre-step batch loss.
fn sgd_step(
    net: &mut DenseNetwork,
    adam: &mut Adam,
    batch: &Samples,
    loss: Loss,
) -> Result<f64> {
    let tape = forward_tape(net, &batch.inputs);
    let value = loss_value(loss, tape.output(), &batch.targets);
    if !value.is_finite() {
        return Ok(value);
    }
    let grads = backward(net, &tape, &batch.targets, loss)?;
    adam.apply(net, &grads);
    Ok(value)
}

fn accuracy(task: Task, output: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let correct = output
        .rows()
        .into_iter()
        .zip(targets.rows())
        .filter(|(o, t)| match task {
            Task::ClassifyList => (o[0] >= 0.5) == (t[0] >= 0.5),
            Task::SortVector => o
                .iter()
                .zip(t.iter())
                .all(|(a, b)| (a - b).abs() < SORT_ACCURACY_TOLERANCE),
        })
        .count();
    correct as f64 / output.nrows() as f64
}

fn evaluate(net: &DenseNetwork, task: Task, loss: Loss, set: &Samples) -> (f64, f64) {
    let tape = forward_tape(net, &set.inputs);
    (loss_value(loss, tape.output(), &set.targets), accuracy(task, tape.output(), &set.targets))
}

/// Trains a fresh network on a fixed dataset. Deterministic per config:
/// the same seed yields the same network and report.
pub fn train(cfg: &TrainConfig, train_set: &Samples, test_set: Option<&Samples>) -> Result<(DenseNetwork, TrainReport)> {
    cfg.validate()?;
    let in_dim = *cfg.layer_sizes.first().unwrap();
    let out_dim = *cfg.layer_sizes.last().unwrap();
    if train_set.inputs.ncols() != in_dim {
        return Err(Error::DimensionMismatch { expected: in_dim, actual: train_set.inputs.ncols() });
    }
    if train_set.targets.ncols() != out_dim {
        return Err(Error::DimensionMismatch { expected: out_dim, actual: train_set.targets.ncols() });
    }
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }

    let mut net = init_he(&cfg.layer_sizes, cfg.seed)?;
    if cfg.task == Task::ClassifyList {
        net.set_final_activation(Activation::Sigmoid);
    }
    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut shuffler = Stream::new(cfg.seed, 1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut report = report_skeleton(&net);
    'epochs: for epoch in 0..cfg.epochs {
        shuffler.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for rows in order.chunks(cfg.batch_size) {
            let batch = train_set.select(rows);
            let value = sgd_step(&mut net, &mut adam, &batch, cfg.loss)?;
            if !value.is_finite() {
                report.diverged = true;
                break 'epochs;
            }
            epoch_loss += value;
            batches += 1;
        }
        report.final_train_loss = epoch_loss / batches as f64;
        report.epochs_run = epoch + 1;
    }

    if !report.diverged {
        let (loss, acc) = evaluate(&net, cfg.task, cfg.loss, train_set);
        report.final_train_loss = loss;
        report.train_accuracy = acc;
        report.test_accuracy =
            test_set.map(|t| evaluate(&net, cfg.task, cfg.loss, t).1);
    }
    Ok((net, report))
}

/// Knobs for [`learn_to_sort`]; the defaults are the calibrated budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortTrainOpts {
    pub seed: u64,
    /// Evaluation loss below this counts as a learned sorter.
    pub loss_threshold: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Steps between threshold checks on the held-out set.
    pub eval_every: usize,
}

impl Default for SortTrainOpts {
    fn default() -> Self {
        SortTrainOpts {
            seed: 0,
            loss_threshold: 1e-4,
            steps: 6000,
            batch_size: 64,
            learning_rate: 4e-3,
            eval_every: 100,
        }
    }
}

impl SortTrainOpts {
    /// The tighter threshold for callers who want near-exact sorters.
    pub fn strict(mut self) -> Self {
        self.loss_threshold = 1e-5;
        self
    }
}

fn random_sort_batch(stream: &mut Stream, x: usize, batch: usize) -> Samples {
    let mut inputs = Array2::zeros((batch, x));
    let mut targets = Array2::zeros((batch, x));
    for r in 0..batch {
        let mut row: Vec<f64> = (0..x).map(|_| stream.unit_f64()).collect();
        for (c, &v) in row.iter().enumerate() {
            inputs[[r, c]] = v;
        }
        row.sort_by(|a, b| a.partial_cmp(b).expect("unit draws are never NaN"));
        for (c, &v) in row.iter().enumerate() {
            targets[[r, c]] = v;
        }
    }
    Samples { inputs, targets }
}

struct RestartOutcome {
    net: DenseNetwork,
    eval_loss: f64,
    steps_run: usize,
    success: bool,
    diverged: bool,
}

fn run_sort_restart(
    x: usize,
    layer_sizes: &[usize],
    restart: usize,
    opts: &SortTrainOpts,
    eval_set: &Samples,
) -> Result<RestartOutcome> {
    let mut net = init_from_rng(layer_sizes, &mut chacha(opts.seed, 3 + 2 * restart as u64));
    let mut adam = Adam::new(&net, opts.learning_rate);
    let mut data = Stream::new(opts.seed, 4 + 2 * restart as u64);

    let mut eval_loss = f64::INFINITY;
    let mut steps_run = 0;
    let mut diverged = false;
    for step in 1..=opts.steps {
        let batch = random_sort_batch(&mut data, x, opts.batch_size);
        let value = sgd_step(&mut net, &mut adam, &batch, Loss::Mse)?;
        steps_run = step;
        if !value.is_finite() {
            diverged = true;
            break;
        }
        if step % opts.eval_every == 0 || step == opts.steps {
            eval_loss = evaluate(&net, Task::SortVector, Loss::Mse, eval_set).0;
            if eval_loss < opts.loss_threshold {
                break;
            }
        }
    }
    let success = !diverged && eval_loss < opts.loss_threshold;
    Ok(RestartOutcome { net, eval_loss, steps_run, success, diverged })
}

/// Trains networks of the given shape to sort x values, restarting from
/// fresh initializations until the held-out loss beats the threshold.
///
/// Restarts run in fixed chunks of 8; the first chunk containing a success
/// returns its lowest-index success, so the outcome does not depend on how
/// many threads raced. With no success anywhere the best (lowest
/// evaluation loss) restart is reported with `success = Some(false)`.
pub fn learn_to_sort(
    x: usize,
    layer_sizes: &[usize],
    restarts: usize,
    opts: &SortTrainOpts,
) -> Result<(DenseNetwork, TrainReport)> {
    if x < 2 {
        return Err(Error::InvalidArgument("need at least two values to sort".into()));
    }
    if layer_sizes.first() != Some(&x) || layer_sizes.last() != Some(&x) {
        return Err(Error::InvalidArgument(format!(
            "layer sizes must start and end with {x}"
        )));
    }
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument("need input and output layer sizes".into()));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }

    let mut eval_stream = Stream::new(opts.seed, 2);
    let eval_set = random_sort_batch(&mut eval_stream, x, SORT_EVAL_SAMPLES);

    let mut best: Option<(usize, RestartOutcome)> = None;
    for chunk_start in (0..restarts).step_by(RESTART_CHUNK) {
        let chunk_end = (chunk_start + RESTART_CHUNK).min(restarts);
        let outcomes: Vec<(usize, RestartOutcome)> = (chunk_start..chunk_end)
            .into_par_iter()
            .map(|r| run_sort_restart(x, layer_sizes, r, opts, &eval_set).map(|o| (r, o)))
            .collect::<Result<_>>()?;
        for (r, outcome) in outcomes {
            let better = match &best {
                Some((_, b)) => outcome.eval_loss < b.eval_loss,
                None => true,
            };
            if better {
                best = Some((r, outcome));
            }
        }
        if best.as_ref().is_some_and(|(_, b)| b.success) {
            break;
        }
    }

    let (restart_index, outcome) = best.expect("at least one restart ran");
    let (_, train_accuracy) = evaluate(&outcome.net, Task::SortVector, Loss::Mse, &eval_set);
    let mut report = report_skeleton(&outcome.net);
    report.final_train_loss = outcome.eval_loss;
    report.train_accuracy = train_accuracy;
    report.test_accuracy = Some(train_accuracy);
    report.epochs_run = outcome.steps_run;
    report.restart_index = restart_index;
    report.success = Some(outcome.success);
    report.diverged = outcome.diverged;
    Ok((outcome.net, report))
}

fn loss_at(net: &DenseNetwork, loss: Loss, input: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let tape = forward_tape(net, input);
    loss_value(loss, tape.output(), target)
}

/// Compares analytic gradients against central finite differences on one
/// sample; returns the maximum relative error over all parameters.
///
/// The input is nudged until every ReLU preactivation sits clear of its
/// kink and sigmoid outputs stay unsaturated, so both one-sided
/// evaluations see the same activation pattern.
pub fn gradient_check(
    net: &DenseNetwork,
    loss: Loss,
    input: &[f64],
    target: &[f64],
) -> Result<f64> {
    const H: f64 = 1e-5;
    const KINK_MARGIN: f64 = 1e-3;

    if loss == Loss::Bce
        && net.layers().last().map(|l| l.activation()) != Some(Activation::Sigmoid)
    {
        return Err(Error::InvalidArgument("cross entropy needs a sigmoid output layer".into()));
    }
    if net.input_dim() != Some(input.len()) {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim().unwrap_or(0),
            actual: input.len(),
        });
    }

    let mut x = Array2::from_shape_vec((1, input.len()), input.to_vec())
        .expect("shape matches the data");
    let target = Array2::from_shape_vec((1, target.len()), target.to_vec())
        .expect("shape matches the data");
    let mut jitter = Stream::new(0xD1CE, 0);
    for attempt in 0.. {
        let tape = forward_tape(net, &x);
        let clear = net.layers().iter().zip(&tape.preacts).zip(&tape.activations[1..]).all(
            |((layer, z), a)| match layer.activation() {
                Activation::Relu => z.iter().all(|v| v.abs() > KINK_MARGIN),
                Activation::Sigmoid => a.iter().all(|v| (1e-9..=1.0 - 1e-9).contains(v)),
                Activation::Identity => true,
            },
        );
        if clear {
            break;
        }
        if attempt > 1000 {
            return Err(Error::InvalidArgument(
                "could not move the sample off the activation kinks".into(),
            ));
        }
        x.mapv_inplace(|v| v + (jitter.unit_f64() - 0.5) * 1e-2);
    }

    let tape = forward_tape(net, &x);
    let analytic = backward(net, &tape, &target, loss)?;

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for li in 0..net.layers().len() {
        let (rows, cols) = net.layers()[li].weights().dim();
        for r in 0..rows {
            for c in 0..cols {
                let original = probe.layers()[li].weights()[[r, c]];
                probe.layers_mut()[li].weights_mut()[[r, c]] = original + H;
                let up = loss_at(&probe, loss, &x, &target);
                probe.layers_mut()[li].weights_mut()[[r, c]] = original - H;
                let down = loss_at(&probe, loss, &x, &target);
                probe.layers_mut()[li].weights_mut()[[r, c]] = original;
                let numeric = (up - down) / (2.0 * H);
                let a = analytic.weights[li][[r, c]];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            }
            let original = probe.layers()[li].biases()[r];
            probe.layers_mut()[li].biases_mut()[r] = original + H;
            let up = loss_at(&probe, loss, &x, &target);
            probe.layers_mut()[li].biases_mut()[r] = original - H;
            let down = loss_at(&probe, loss, &x, &target);
            probe.layers_mut()[li].biases_mut()[r] = original;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic.biases[li][r];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_list_dataset;

    #[test]
    fn he_init_shapes_variance_and_determinism() {
        let net = init_he(&[100, 1000, 1], 5).unwrap();
        assert_eq!(net.layers().len(), 2);
        assert_eq!(net.layers()[0].weights().dim(), (1000, 100));
        assert_eq!(net.layers()[0].activation(), Activation::Relu);
        assert_eq!(net.layers()[1].activation(), Activation::Identity);
        assert!(net.layers().iter().all(|l| l.biases().iter().all(|&b| b == 0.0)));

        let w = net.layers()[0].weights();
        let mean = w.mean().unwrap();
        let var = w.mapv(|v| (v - mean) * (v - mean)).mean().unwrap();
        let expected = 2.0 / 100.0;
        assert!((var - expected).abs() < 0.05 * expected, "variance {var}");

        assert_eq!(net, init_he(&[100, 1000, 1], 5).unwrap());
        assert_ne!(net, init_he(&[100, 1000, 1], 6).unwrap());
    }

    #[test]
    fn parameter_count_for_the_ten_ten_one_stack() {
        let net = init_he(&[10, 10, 1], 0).unwrap();
        assert_eq!(net.parameter_count(Counting::WeightsOnly), 110);
        // 110 weights + 11 biases; a two-logit head would add another 11
        assert_eq!(net.parameter_count(Counting::WeightsAndBiases), 121);
    }

    #[test]
    fn rejects_mismatched_task_and_loss() {
        let mut cfg = TrainConfig::classify(vec![10, 10, 1], 0);
        cfg.loss = Loss::Mse;
        assert!(cfg.validate().is_err());
        cfg.loss = Loss::Bce;
        cfg.task = Task::SortVector;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn constant_labels_are_learned_immediately() {
        let inputs = Array2::from_shape_fn((60, 4), |(i, j)| ((i * 7 + j * 3) % 10) as f64 / 10.0);
        let targets = Array2::ones((60, 1));
        let set = Samples::new(inputs, targets).unwrap();
        let mut cfg = TrainConfig::classify(vec![4, 6, 1], 1);
        cfg.epochs = 60;
        let (_, report) = train(&cfg, &set, None).unwrap();
        assert!(!report.diverged);
        assert_eq!(report.train_accuracy, 1.0);
        assert_eq!(report.test_accuracy, None);
        assert_eq!(report.optimizer, "adam");
    }

    #[test]
    fn training_is_deterministic() {
        let lists = generate_list_dataset(200, 21, true).unwrap();
        let set = list_samples(&lists);
        let mut cfg = TrainConfig::classify(vec![10, 10, 1], 3);
        cfg.epochs = 20;
        let (net_a, report_a) = train(&cfg, &set, Some(&set)).unwrap();
        let (net_b, report_b) = train(&cfg, &set, Some(&set)).unwrap();
        assert_eq!(report_a, report_b);
        assert_eq!(net_a, net_b);
    }

    #[test]
    fn divergence_is_reported_not_hidden() {
        let mut stream = Stream::new(9, 9);
        let mut inputs = Array2::zeros((100, 10));
        inputs.mapv_inplace(|_| stream.unit_f64() * 1e3);
        let wild = Samples::new(inputs.clone(), inputs).unwrap();
        let cfg = TrainConfig {
            layer_sizes: vec![10, 8, 10],
            task: Task::SortVector,
            loss: Loss::Mse,
            epochs: 50,
            batch_size: 10,
            // adam steps are learning-rate sized, so only an absurd rate
            // overflows the forward pass into a non-finite loss
            learning_rate: 1e150,
            seed: 0,
            restarts: 1,
        };
        let (_, report) = train(&cfg, &wild, None).unwrap();
        assert!(report.diverged);
    }

    #[test]
    fn gradient_check_holds_for_both_losses() {
        let mut stream = Stream::new(77, 0);
        for (sizes, loss) in [
            (vec![4, 5, 3, 1], Loss::Bce),
            (vec![3, 6, 3], Loss::Mse),
            (vec![5, 4, 5], Loss::Mse),
        ] {
            let mut net = init_he(&sizes, stream.next_u64()).unwrap();
            if loss == Loss::Bce {
                net.set_final_activation(Activation::Sigmoid);
            }
            let input: Vec<f64> = (0..sizes[0]).map(|_| stream.unit_f64()).collect();
            let target: Vec<f64> = (0..*sizes.last().unwrap())
                .map(|_| if loss == Loss::Bce { 1.0 } else { stream.unit_f64() })
                .collect();
            let err = gradient_check(&net, loss, &input, &target).unwrap();
            assert!(err < 1e-4, "{sizes:?} {loss:?}: {err}");
        }
    }

    #[test]
    fn gradient_check_zero_network_closed_form() {
        // zero weights and biases leave the sigmoid at 1/2, so the loss is
        // ln 2 and the output-bias gradient is p - y = -1/2
        let zero = DenseNetwork::new(vec![
            DenseLayer::new(Array2::zeros((1, 2)), Array1::zeros(1), Activation::Sigmoid)
                .unwrap(),
        ])
        .unwrap();
        let x = Array2::from_shape_vec((1, 2), vec![0.3, 0.9]).unwrap();
        let y = Array2::from_shape_vec((1, 1), vec![1.0]).unwrap();
        assert!((loss_at(&zero, Loss::Bce, &x, &y) - 2f64.ln()).abs() < 1e-12);
        let tape = forward_tape(&zero, &x);
        let grads = backward(&zero, &tape, &y, Loss::Bce).unwrap();
        assert!((grads.biases[0][0] + 0.5).abs() < 1e-12);
        let err = gradient_check(&zero, Loss::Bce, &[0.3, 0.9], &[1.0]).unwrap();
        assert!(err < 1e-4);
    }

    #[test]
    fn bce_without_sigmoid_is_refused() {
        let net = init_he(&[3, 4, 1], 0).unwrap();
        assert!(gradient_check(&net, Loss::Bce, &[0.1, 0.2, 0.3], &[1.0]).is_err());
    }

    #[test]
    fn two_values_are_learned_to_sort() {
        let opts = SortTrainOpts::default();
        let (net, report) = learn_to_sort(2, &[2, 6, 6, 2], 8, &opts).unwrap();
        assert_eq!(report.success, Some(true), "eval loss {}", report.final_train_loss);
        assert!(report.final_train_loss < opts.loss_threshold);
        assert!(report.train_accuracy > 0.95);

        // the learned net really orders unseen pairs
        let mut stream = Stream::new(123, 0);
        let mut ordered = 0;
        for _ in 0..200 {
            let pair = [stream.unit_f64(), stream.unit_f64()];
            let out = net.forward(&pair).unwrap();
            if out[1] >= out[0] - 1e-3 {
                ordered += 1;
            }
        }
        assert!(ordered >= 198, "{ordered}/200 ordered");
    }

    #[test]
    fn sort_restart_selection_is_deterministic() {
        let opts = SortTrainOpts { steps: 300, ..SortTrainOpts::default() };
        let (_, a) = learn_to_sort(2, &[2, 4, 2], 3, &opts).unwrap();
        let (_, b) = learn_to_sort(2, &[2, 4, 2], 3, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn learn_to_sort_validates_shape() {
        let opts = SortTrainOpts::default();
        assert!(learn_to_sort(3, &[3, 5, 4], 1, &opts).is_err());
        assert!(learn_to_sort(3, &[4, 5, 3], 1, &opts).is_err());
        assert!(learn_to_sort(1, &[1, 1], 1, &opts).is_err());
        assert!(learn_to_sort(3, &[3, 5, 3], 0, &opts).is_err());
        assert_eq!(SortTrainOpts::default().strict().loss_threshold, 1e-5);
    }

    #[test]
    fn list_samples_layout() {
        let lists = generate_list_dataset(10, 4, false).unwrap();
        let set = list_samples(&lists);
        assert_eq!(set.inputs.dim(), (10, 10));
        assert_eq!(set.targets.dim(), (10, 1));
        for (i, s) in lists.iter().enumerate() {
            assert_eq!(set.inputs.row(i).to_vec(), s.values);
            let expect = if s.label == ClassLabel::One { 1.0 } else { 0.0 };
            assert_eq!(set.targets[[i, 0]], expect);
        }
    }
}
