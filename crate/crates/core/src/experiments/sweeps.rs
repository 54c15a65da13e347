use rayon::prelude::*;

use super::{
    CheckpointRecord, Experiment, ExperimentReport, ExtractionRecord, KSummary, LengthRecord, SweepConfig,
    TrainingRecord,
};
use crate::dataset::{generate_dataset, generate_long_testset, negative_ratio, ratio_to_f64, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::extraction::{collect_activations, dfa_accuracy, extract_from_traces, ExtractionConfig};
use crate::rnn::{train_with, Control, SecondOrderRnn, TrainConfig};
use crate::seed::derive_seed;

const DATA_STREAM: u64 = 21;
const LONG_STREAM: u64 = 22;
const H_INIT_STREAM: u64 = 23;

/// A trained network together with what happened while training it.
#[derive(Clone, Debug)]
pub struct TrainedCell {
    pub model: SecondOrderRnn,
    pub snapshots: Vec<(usize, SecondOrderRnn)>,
    pub losses: Vec<f64>,
    pub epochs_run: usize,
    /// Test accuracy reached 1.0 (at the last epoch run).
    pub converged: bool,
    pub test_accuracy: f64,
}

/// Trains a fresh network drawn from `cfg.seed` and `h_init` on `split.train`
/// for up to `cfg.epochs` epochs. With `stop_when_perfect`, training ends
/// after the first epoch with 100% accuracy on `split.test`.
pub fn train_cell(
    split: &Split,
    cfg: &TrainConfig,
    h_init: Vec<f64>,
    checkpoints: &[usize],
    stop_when_perfect: bool,
) -> Result<TrainedCell> {
    let rnn = cfg.initial_model(h_init)?;
    let mut test_accuracy = 0.0;
    let out = train_with(rnn, &split.train, cfg, checkpoints, |_, m| {
        if !stop_when_perfect {
            return Control::Continue;
        }
        test_accuracy = m.accuracy(&split.test);
        if test_accuracy == 1.0 {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    if !stop_when_perfect {
        test_accuracy = out.model.accuracy(&split.test);
    }
    Ok(TrainedCell {
        converged: test_accuracy == 1.0,
        test_accuracy,
        model: out.model,
        snapshots: out.snapshots,
        losses: out.losses,
        epochs_run: out.epochs_run,
    })
}

fn dataset(cfg: &SweepConfig) -> Result<Split> {
    generate_dataset(
        cfg.grammar,
        cfg.min_len,
        cfg.max_len,
        cfg.test_fraction,
        derive_seed(cfg.master_seed, &[DATA_STREAM, cfg.grammar.get() as u64]),
    )
}

fn train_config(cfg: &SweepConfig, seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        ..cfg.train.clone()
    }
}

fn training_record(
    hidden: usize,
    replicate: usize,
    seed: u64,
    result: &Result<TrainedCell>,
) -> TrainingRecord {
    match result {
        Ok(cell) => TrainingRecord {
            hidden,
            replicate,
            seed,
            epochs_run: cell.epochs_run,
            converged: cell.converged,
            final_loss: cell.losses.last().copied(),
            rnn_accuracy_test: Some(cell.test_accuracy),
            losses: cell.losses.clone(),
            error: None,
        },
        Err(e) => TrainingRecord {
            hidden,
            replicate,
            seed,
            epochs_run: 0,
            converged: false,
            final_loss: None,
            rnn_accuracy_test: None,
            losses: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

struct CellKey {
    hidden: usize,
    replicate: usize,
    epoch: usize,
    converged: bool,
}

fn failed_cell(key: &CellKey, k: usize, error: &str) -> ExtractionRecord {
    ExtractionRecord {
        hidden: key.hidden,
        replicate: key.replicate,
        epoch: key.epoch,
        k,
        model_converged: key.converged,
        k_used: None,
        silhouette: None,
        unobserved_pairs: None,
        dfa_states: None,
        dfa_accuracy: None,
        extraction_success: false,
        dfa: None,
        error: Some(error.to_string()),
    }
}

fn failed_cells(cfg: &SweepConfig, key: &CellKey, error: &str) -> Vec<ExtractionRecord> {
    cfg.k_values.iter().map(|&k| failed_cell(key, k, error)).collect()
}

/// One extraction per K from a single model, scored on `test`.
fn extract_over_k(
    cfg: &SweepConfig,
    model: &SecondOrderRnn,
    test: &LabeledDataset,
    key: CellKey,
    cell_seed: u64,
) -> Vec<ExtractionRecord> {
    let traces = match collect_activations(model, test) {
        Ok(t) => t,
        Err(e) => return failed_cells(cfg, &key, &e.to_string()),
    };
    cfg.k_values
        .par_iter()
        .map(|&k| {
            let ecfg = ExtractionConfig {
                method: cfg.method,
                include_post_stop_states: cfg.include_post_stop_states,
                acceptance_vote: cfg.acceptance_vote,
                ..ExtractionConfig::kmeans(k, derive_seed(cell_seed, &[k as u64]))
            };
            match extract_from_traces(model, &traces, &ecfg) {
                Ok(ex) => {
                    let acc = dfa_accuracy(&ex.dfa, test);
                    ExtractionRecord {
                        hidden: key.hidden,
                        replicate: key.replicate,
                        epoch: key.epoch,
                        k,
                        model_converged: key.converged,
                        k_used: Some(ex.diagnostics.k_used),
                        silhouette: ex.diagnostics.silhouette,
                        unobserved_pairs: Some(ex.diagnostics.unobserved_pairs),
                        dfa_states: Some(ex.dfa.num_states()),
                        dfa_accuracy: Some(acc),
                        extraction_success: acc == 1.0,
                        dfa: Some(ex.dfa),
                        error: None,
                    }
                }
                Err(e) => failed_cell(&key, k, &e.to_string()),
            }
        })
        .collect()
}

/// Trains one network per (hidden size, replicate) to 100% test accuracy or
/// the epoch cap, then extracts at every K.
pub fn capacity_sweep(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let exp = Experiment::Capacity;
    cfg.validate(exp)?;
    let split = dataset(cfg)?;
    let g = cfg.grammar.get() as u64;
    let cells: Vec<(usize, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(n, r)| {
            let seed = derive_seed(cfg.master_seed, &[exp.stream(), g, n as u64, r as u64]);
            let tcfg = train_config(cfg, seed, cfg.epoch_cap());
            let trained = train_cell(&split, &tcfg, SecondOrderRnn::default_h_init(n), &[], true);
            let record = training_record(n, r, seed, &trained);
            let extractions = match &trained {
                Ok(cell) => extract_over_k(
                    cfg,
                    &cell.model,
                    &split.test,
                    CellKey {
                        hidden: n,
                        replicate: r,
                        epoch: cell.epochs_run,
                        converged: cell.converged,
                    },
                    seed,
                ),
                Err(e) => failed_cells(
                    cfg,
                    &CellKey {
                        hidden: n,
                        replicate: r,
                        epoch: 0,
                        converged: false,
                    },
                    &format!("training failed: {e}"),
                ),
            };
            (record, extractions)
        })
        .collect();
    let mut report = ExperimentReport::new(exp, cfg);
    for (record, extractions) in results {
        report.training.push(record);
        report.extractions.extend(extractions);
    }
    report.per_k = summarize_by_k(&report.extractions, &cfg.k_values);
    Ok(report)
}

/// One training run with snapshots at the checkpoint epochs; each snapshot
/// is scored on the test set and the long test set, and extracted at every K.
pub fn training_time_sweep(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let exp = Experiment::TrainingTime;
    cfg.validate(exp)?;
    let split = dataset(cfg)?;
    let g = cfg.grammar.get() as u64;
    let checkpoints = cfg.checkpoint_epochs();
    let long = generate_long_testset(
        cfg.grammar,
        cfg.long_length,
        cfg.long_count,
        derive_seed(cfg.master_seed, &[LONG_STREAM, g]),
    )?;
    let seed = derive_seed(cfg.master_seed, &[exp.stream(), g, cfg.hidden as u64]);
    let tcfg = train_config(cfg, seed, *checkpoints.last().unwrap());
    let trained = train_cell(
        &split,
        &tcfg,
        SecondOrderRnn::default_h_init(cfg.hidden),
        &checkpoints,
        false,
    );
    let mut report = ExperimentReport::new(exp, cfg);
    report.training.push(training_record(cfg.hidden, 0, seed, &trained));
    let cell = match trained {
        Ok(cell) => cell,
        Err(e) => {
            for &epoch in &checkpoints {
                let key = CellKey {
                    hidden: cfg.hidden,
                    replicate: 0,
                    epoch,
                    converged: false,
                };
                report
                    .extractions
                    .extend(failed_cells(cfg, &key, &format!("training failed: {e}")));
            }
            return Ok(report);
        }
    };

    let scored: Vec<_> = cell
        .snapshots
        .par_iter()
        .map(|(epoch, model)| {
            let acc_test = model.accuracy(&split.test);
            let key = CellKey {
                hidden: cfg.hidden,
                replicate: 0,
                epoch: *epoch,
                converged: acc_test == 1.0,
            };
            let records = extract_over_k(cfg, model, &split.test, key, derive_seed(seed, &[*epoch as u64]));
            let best = best_extraction(&records);
            let checkpoint = CheckpointRecord {
                epoch: *epoch,
                rnn_accuracy_test: acc_test,
                rnn_accuracy_long: model.accuracy(&long),
                best_k: best.map(|r| r.k),
                best_dfa_accuracy: best.and_then(|r| r.dfa_accuracy),
                best_dfa_accuracy_long: best.and_then(|r| r.dfa.as_ref()).map(|d| dfa_accuracy(d, &long)),
            };
            (checkpoint, records)
        })
        .collect();
    for (checkpoint, records) in scored {
        report.checkpoints.push(checkpoint);
        report.extractions.extend(records);
    }
    report.per_k = summarize_by_k(&report.extractions, &cfg.k_values);
    Ok(report)
}

/// Trains `n_inits` networks whose initial hidden states are drawn uniformly
/// from the unit cube, then extracts at every K from each.
pub fn random_init_sweep(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let exp = Experiment::RandomInit;
    cfg.validate(exp)?;
    let split = dataset(cfg)?;
    let g = cfg.grammar.get() as u64;
    let n = cfg.hidden;
    let results: Vec<_> = (0..cfg.n_inits)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.master_seed, &[exp.stream(), g, n as u64, i as u64]);
            let h_init = SecondOrderRnn::random_h_init(n, derive_seed(seed, &[H_INIT_STREAM]));
            let tcfg = train_config(cfg, seed, cfg.epoch_cap());
            let trained = train_cell(&split, &tcfg, h_init, &[], true);
            let record = training_record(n, i, seed, &trained);
            let extractions = match &trained {
                Ok(cell) => extract_over_k(
                    cfg,
                    &cell.model,
                    &split.test,
                    CellKey {
                        hidden: n,
                        replicate: i,
                        epoch: cell.epochs_run,
                        converged: cell.converged,
                    },
                    seed,
                ),
                Err(e) => failed_cells(
                    cfg,
                    &CellKey {
                        hidden: n,
                        replicate: i,
                        epoch: 0,
                        converged: false,
                    },
                    &format!("training failed: {e}"),
                ),
            };
            (record, extractions)
        })
        .collect();
    let mut report = ExperimentReport::new(exp, cfg);
    for (record, extractions) in results {
        if !record.converged {
            report.flags.push(format!(
                "init {} did not reach 100% test accuracy within {} epochs",
                record.replicate,
                cfg.epoch_cap()
            ));
        }
        report.training.push(record);
        report.extractions.extend(extractions);
    }
    report.per_k = summarize_by_k(&report.extractions, &cfg.k_values);
    Ok(report)
}

/// Trains a small network to 100% test accuracy, extracts its best automaton
/// over the K values, and compares network and automaton error on
/// proportionally sampled sets of increasing length.
///
/// Up to `attempts` training seeds are tried until the extracted automaton is
/// incorrect; the last attempt is used regardless and the outcome is flagged.
pub fn long_string_comparison(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let exp = Experiment::LongString;
    cfg.validate(exp)?;
    let split = dataset(cfg)?;
    let g = cfg.grammar.get() as u64;
    let n = cfg.long_hidden;
    let mut report = ExperimentReport::new(exp, cfg);
    let mut chosen: Option<(SecondOrderRnn, crate::automata::Dfa)> = None;

    for attempt in 0..cfg.attempts {
        let seed = derive_seed(cfg.master_seed, &[exp.stream(), g, n as u64, attempt as u64]);
        let tcfg = train_config(cfg, seed, cfg.epoch_cap());
        let trained = train_cell(&split, &tcfg, SecondOrderRnn::default_h_init(n), &[], true);
        report.training.push(training_record(n, attempt, seed, &trained));
        let cell = match trained {
            Ok(cell) => cell,
            Err(e) => {
                report.flags.push(format!("attempt {attempt}: training failed: {e}"));
                continue;
            }
        };
        let key = CellKey {
            hidden: n,
            replicate: attempt,
            epoch: cell.epochs_run,
            converged: cell.converged,
        };
        let records = extract_over_k(cfg, &cell.model, &split.test, key, seed);
        let best = best_extraction(&records).and_then(|r| r.dfa.clone().map(|d| (r.k, r.extraction_success, d)));
        report.extractions.extend(records);
        let Some((k, correct, dfa)) = best else {
            report.flags.push(format!("attempt {attempt}: no extraction succeeded"));
            continue;
        };
        if !cell.converged {
            report.flags.push(format!(
                "attempt {attempt}: network did not reach 100% test accuracy"
            ));
        } else if correct {
            report.flags.push(format!(
                "attempt {attempt}: extracted automaton (K = {k}) is correct"
            ));
        }
        let done = cell.converged && !correct;
        chosen = Some((cell.model, dfa));
        if done {
            break;
        }
    }
    let Some((model, dfa)) = chosen else {
        return Err(Error::InvalidConfig(
            "no attempt produced a network and an automaton to compare".into(),
        ));
    };

    let lengths: Vec<_> = cfg
        .lengths
        .par_iter()
        .map(|&len| -> Result<LengthRecord> {
            let set = generate_long_testset(
                cfg.grammar,
                len,
                cfg.n_per_length,
                derive_seed(cfg.master_seed, &[LONG_STREAM, g]),
            )?;
            let ratio = negative_ratio(cfg.grammar, len);
            Ok(LengthRecord {
                length: len,
                samples: set.len(),
                positives: set.positives(),
                rnn_error: 1.0 - model.accuracy(&set),
                dfa_error: 1.0 - dfa_accuracy(&dfa, &set),
                negative_ratio: ratio.to_string(),
                negative_ratio_f64: ratio_to_f64(&ratio),
            })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = lengths.iter().map(|r| r.length as f64).collect();
    let rnn: Vec<f64> = lengths.iter().map(|r| r.rnn_error).collect();
    let dfa_err: Vec<f64> = lengths.iter().map(|r| r.dfa_error).collect();
    let neg: Vec<f64> = lengths.iter().map(|r| r.negative_ratio_f64).collect();
    report.trends = vec![
        ("rnn_error".into(), least_squares_slope(&xs, &rnn)),
        ("dfa_error".into(), least_squares_slope(&xs, &dfa_err)),
        ("negative_ratio".into(), least_squares_slope(&xs, &neg)),
    ];
    report.lengths = lengths;
    Ok(report)
}

/// Highest test accuracy; ties go to the smallest K.
fn best_extraction(records: &[ExtractionRecord]) -> Option<&ExtractionRecord> {
    records
        .iter()
        .filter(|r| r.dfa_accuracy.is_some())
        .fold(None, |best: Option<&ExtractionRecord>, r| match best {
            Some(b) if b.dfa_accuracy >= r.dfa_accuracy => Some(b),
            _ => Some(r),
        })
}

fn summarize_by_k(records: &[ExtractionRecord], k_values: &[usize]) -> Vec<KSummary> {
    k_values
        .iter()
        .map(|&k| {
            let cells: Vec<&ExtractionRecord> = records.iter().filter(|r| r.k == k).collect();
            // a failed extraction scores zero accuracy
            let acc: Vec<f64> = cells.iter().map(|r| r.dfa_accuracy.unwrap_or(0.0)).collect();
            let m = acc.len().max(1) as f64;
            let mean = acc.iter().sum::<f64>() / m;
            let var = acc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / m;
            KSummary {
                k,
                cells: cells.len(),
                mean_dfa_accuracy: mean,
                var_dfa_accuracy: var,
                success_rate: cells.iter().filter(|r| r.extraction_success).count() as f64 / m,
            }
        })
        .collect()
}

/// Slope of the ordinary least-squares line through `(xs, ys)`; 0 when the
/// x values do not vary.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Runs one experiment on a pool of `jobs` threads (0 lets rayon decide).
pub fn run_experiment(experiment: Experiment, cfg: &SweepConfig, jobs: usize) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match experiment {
        Experiment::Capacity => capacity_sweep(cfg),
        Experiment::TrainingTime => training_time_sweep(cfg),
        Experiment::RandomInit => random_init_sweep(cfg),
        Experiment::LongString => long_string_comparison(cfg),
    })
}
