//! The contract this library is built against, one test per guarantee.
//! Each test prints a single PASS or FAIL line for its guarantee; run
//! with `--nocapture` to see them. Budgets on wall time are part of the
//! contract and asserted alongside the numbers.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};

use sortnetc::datagen::{self, DatasetConfig};
use sortnetc::locality;
use sortnetc::microtrain::{self, Loss, SortTrainOpts, TrainConfig};
use sortnetc::nncompiler::{self, DepthRule, COMPILED_SORT_TOLERANCE};
use sortnetc::nnruntime::{Activation, Counting, DenseLayer, DenseNetwork};
use sortnetc::patchcodec::{self, Patch, PrecisionModel};
use sortnetc::rng::Stream;
use sortnetc::sortnet::{self, SortingNetwork, DEFAULT_VERIFY_CAP};

/// Prints the verdict line for one guarantee, then enforces it.
fn verdict(name: &str, pass: bool, detail: &str) {
    println!("{} {name}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn within_budget(name: &str, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    assert!(
        elapsed < budget,
        "{name} took {elapsed:?}, budget {budget:?}"
    );
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

fn networks_for(wires: usize) -> Vec<SortingNetwork> {
    let mut nets = vec![
        sortnet::make_merge_network(wires).unwrap(),
        sortnet::make_brick_network(wires).unwrap(),
    ];
    if wires <= 4 {
        nets.push(sortnet::make_optimal_small(wires).unwrap());
    }
    nets
}

#[test]
fn compiled_models_match_their_networks() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for wires in 2..=8 {
        for net in networks_for(wires) {
            let model = nncompiler::compile(&net, true);
            for mask in 0u32..1 << wires {
                let input: Vec<f64> =
                    (0..wires).map(|i| f64::from(mask >> i & 1)).collect();
                let expect = net.apply(&input).unwrap();
                let got = model.forward(&input).unwrap();
                if got != expect {
                    failures.push(format!("binary {wires}-wire mask {mask}"));
                }
            }
            let mut stream = Stream::new(0xACCE, wires as u64);
            for _ in 0..1_000 {
                let input: Vec<f64> = (0..wires).map(|_| stream.unit_f64()).collect();
                let expect = net.apply(&input).unwrap();
                let got = model.forward(&input).unwrap();
                let off = got
                    .iter()
                    .zip(&expect)
                    .any(|(g, e)| (g - e).abs() > COMPILED_SORT_TOLERANCE);
                if off {
                    failures.push(format!("real {wires}-wire input {input:?}"));
                }
            }
        }
    }
    verdict(
        "compiled models reproduce their sorting networks",
        failures.is_empty(),
        &failures.join("; "),
    );
    within_budget("compiler check", start, Duration::from_secs(30));
}

#[test]
fn parameter_counts_match_closed_forms() {
    let three = sortnet::make_optimal_small(3).unwrap();
    let unpruned = nncompiler::compile(&three, false)
        .parameter_count(Counting::WeightsOnly);
    let pruned = nncompiler::compile(&three, true)
        .parameter_count(Counting::WeightsOnly);

    let attention =
        nncompiler::estimate_parameters(224, 8, true, DepthRule::Explicit(10)).unwrap();

    let windowed =
        nncompiler::estimate_parameters(224, 8, false, DepthRule::Explicit(16)).unwrap();
    let notes = windowed.notes.join(" ");

    let pass = unpruned == 90
        && pruned == 72
        && attention.p_feedforward == 18_439_680
        && windowed.x == 46_656
        && windowed.p_feedforward == 104_485_552_128
        && notes.contains("65229815808")
        && notes.contains("36864");
    verdict(
        "parameter counts match the closed forms",
        pass,
        &format!(
            "unpruned {unpruned}, pruned {pruned}, attention {}, windowed {} with notes {notes:?}",
            attention.p_feedforward, windowed.p_feedforward
        ),
    );
}

#[test]
fn weight_reuse_count_and_brick_threshold() {
    let scenario =
        nncompiler::estimate_parameters(224, 8, true, DepthRule::Explicit(10)).unwrap();
    let notes = scenario.notes.join(" ");
    let mut pass = scenario.p_iterative == 3_687_936 && notes.contains("7375872");
    let mut detail = format!("p_iterative {} notes {notes:?}", scenario.p_iterative);

    for wires in 2..=10 {
        let brick = sortnet::make_brick_network(wires).unwrap();
        let report = sortnet::verify_sorts(&brick, wires, DEFAULT_VERIFY_CAP, 0);
        if !report.pass || report.probabilistic || report.vectors_tested != 1 << wires {
            pass = false;
            detail = format!("brick width {wires}: {report:?}");
        }
    }
    verdict(
        "iterative reuse count and brick sorting threshold hold",
        pass,
        &detail,
    );
}

#[test]
fn patch_codes_survive_the_24_bit_budget_up_to_4x4() {
    let start = Instant::now();
    let budget = PrecisionModel::Mantissa(24);

    let mut bad_round_trips = 0u32;
    for pack in 0u128..1 << 16 {
        let patch = Patch::from_pack(4, pack).unwrap();
        let decoded = patchcodec::decode(&patchcodec::encode(&patch, budget).unwrap());
        if decoded.lossy || decoded.patch != patch {
            bad_round_trips += 1;
        }
    }

    let five = patchcodec::codes_injective(5, budget).unwrap();
    let witness_holds = match &five.collision {
        Some((a, b)) => {
            a != b
                && patchcodec::encode(a, budget).unwrap().value()
                    == patchcodec::encode(b, budget).unwrap().value()
        }
        None => false,
    };

    verdict(
        "patch codes round-trip at 4x4 and collide at 5x5 under 24 bits",
        bad_round_trips == 0 && !five.injective && witness_holds,
        &format!(
            "bad round-trips {bad_round_trips}, 5x5 injective {}, witness {:?}",
            five.injective, five.collision
        ),
    );
    within_budget("codec check", start, Duration::from_secs(60));
}

#[test]
fn compression_factors_approach_the_incompressible_limit() {
    let trace = locality::trace_identity_locality(3, 20).unwrap();
    let levels = &trace.levels;

    let mut pass = true;
    let mut detail = String::new();
    for pair in levels.windows(2).skip(1) {
        let (prev, next) = (pair[0].compression_factor.unwrap(), pair[1].compression_factor.unwrap());
        if next >= prev {
            pass = false;
            detail = format!("C not strictly decreasing at level {}", pair[1].level);
        }
    }
    for pair in levels.windows(2) {
        if pair[0].log2_cardinality > 500.0 {
            let c = pair[1].compression_factor.unwrap();
            if c - 1.0 >= 1e-3 {
                pass = false;
                detail = format!("C - 1 = {} past 500 bits", c - 1.0);
            }
        }
    }
    let mut compared = 0;
    for level in levels {
        // symbol counts below 2^64 have their logs tracked exactly
        if level.log2_cardinality < 64.0 {
            let exact = level.exact_log2.expect("small counts stay exact");
            if (level.log2_cardinality - exact).abs() >= 1e-12 {
                pass = false;
                detail = format!("level {} drifts from the exact count", level.level);
            }
            compared += 1;
        }
    }
    if compared == 0 {
        pass = false;
        detail = "no exact levels compared".into();
    }
    verdict(
        "compression factors decrease toward 1 and match exact counts",
        pass,
        &detail,
    );
}

#[test]
fn pipeline_matches_the_multiplicity_oracle() {
    let start = Instant::now();
    let cfg = DatasetConfig {
        image_side: 32,
        patch_side: 4,
        min_patches: 3,
        max_patches: 6,
        sample_count: 1_000,
        seed: 2024,
        balanced: true,
    };
    let dataset = datagen::generate_identity_dataset(&cfg).unwrap();
    let pipeline =
        sortnetc::pipeline::Pipeline::new(6, 4, PrecisionModel::Mantissa(24)).unwrap();
    let summary = pipeline.classify_dataset(&dataset).unwrap();

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    dataset.write(dir_a.path()).unwrap();
    datagen::generate_identity_dataset(&cfg)
        .unwrap()
        .write(dir_b.path())
        .unwrap();
    let mut identical = true;
    let mut names: Vec<String> = std::fs::read_dir(dir_a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in &names {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        if a != b {
            identical = false;
        }
    }

    verdict(
        "pipeline verdicts agree with the oracle and datasets regenerate byte-identically",
        summary.agreeing == summary.total && summary.total == 1_000 && identical,
        &format!(
            "agreement {}/{}, files {} byte-identical {identical}",
            summary.agreeing,
            summary.total,
            names.len()
        ),
    );
    within_budget("pipeline check", start, Duration::from_secs(10));
}

#[test]
fn sorted_views_are_easier_to_classify() {
    let start = Instant::now();
    let mut sorted_accs = Vec::new();
    let mut unsorted_accs = Vec::new();
    for seed in 0..5 {
        for sorted in [true, false] {
            let (train_set, test_set) =
                microtrain::classification_data(4_000, 1_000, seed, sorted).unwrap();
            let cfg = TrainConfig::classify(vec![10, 10, 1], seed);
            let (_, report) = microtrain::train(&cfg, &train_set, Some(&test_set)).unwrap();
            let acc = report.test_accuracy.unwrap();
            if sorted {
                sorted_accs.push(acc);
            } else {
                unsorted_accs.push(acc);
            }
        }
    }
    let sorted_median = median(sorted_accs.clone());
    let unsorted_median = median(unsorted_accs.clone());
    let gap = sorted_median - unsorted_median;
    verdict(
        "sorting the view makes the list class learnable",
        sorted_median >= 0.95 && unsorted_median <= 0.88 && gap >= 0.07,
        &format!(
            "sorted {sorted_accs:?} median {sorted_median}, unsorted {unsorted_accs:?} median {unsorted_median}, gap {gap}"
        ),
    );
    within_budget("learnability gap", start, Duration::from_secs(300));
}

#[test]
fn a_small_network_learns_to_sort_three_values() {
    let start = Instant::now();
    let opts = SortTrainOpts::default();
    let (_, report) = microtrain::learn_to_sort(3, &[3, 7, 6, 3], 100, &opts).unwrap();
    verdict(
        "a 3-7-6-3 network learns to sort within 100 restarts",
        report.success == Some(true)
            && report.final_train_loss < 1e-4
            && report.parameter_count == 97,
        &format!("{report:?}"),
    );
    within_budget("learn-to-sort", start, Duration::from_secs(600));
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut stream = Stream::new(0xBEEF, 0);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let bce = case % 2 == 0;
        let hidden = stream.range(2, 6) as usize;
        let input_dim = stream.range(2, 5) as usize;
        let output_dim = if bce { 1 } else { stream.range(1, 4) as usize };
        let sizes = [input_dim, hidden, output_dim];

        let mut layers = Vec::new();
        for (idx, pair) in sizes.windows(2).enumerate() {
            let weights = Array2::from_shape_fn((pair[1], pair[0]), |_| {
                stream.unit_f64() * 2.0 - 1.0
            });
            let biases = Array1::from_shape_fn(pair[1], |_| stream.unit_f64() * 2.0 - 1.0);
            let activation = match (idx + 2 == sizes.len(), bce) {
                (false, _) => Activation::Relu,
                (true, true) => Activation::Sigmoid,
                (true, false) => Activation::Identity,
            };
            layers.push(DenseLayer::new(weights, biases, activation).unwrap());
        }
        let net = DenseNetwork::new(layers).unwrap();

        let input: Vec<f64> =
            (0..input_dim).map(|_| stream.unit_f64() * 2.0 - 1.0).collect();
        let target: Vec<f64> = (0..output_dim)
            .map(|_| {
                if bce {
                    f64::from(u8::from(stream.bit()))
                } else {
                    stream.unit_f64() * 2.0 - 1.0
                }
            })
            .collect();
        let loss = if bce { Loss::Bce } else { Loss::Mse };
        let err = microtrain::gradient_check(&net, loss, &input, &target).unwrap();
        worst = worst.max(err);
    }
    verdict(
        "analytic gradients match central finite differences",
        worst < 1e-4,
        &format!("worst relative error {worst:e}"),
    );
}
