//! The four experiment families: capacity, training time, random initial
//! hidden state, and long-string comparison.
//!
//! Every grid cell draws its randomness from `derive_seed(master_seed, coords)`,
//! so cells can run in any order, on any number of threads, with identical
//! results.

mod report;
mod sweeps;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{AcceptanceVote, ClusteringMethod};
use crate::rnn::TrainConfig;
use crate::tomita::GrammarId;

pub use report::{config_hash, load_manifest, run_dir, write_report, Manifest, Table};
pub use sweeps::{
    capacity_sweep, least_squares_slope, long_string_comparison, random_init_sweep, run_experiment,
    train_cell, training_time_sweep, TrainedCell,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Capacity,
    TrainingTime,
    RandomInit,
    LongString,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Capacity,
        Experiment::TrainingTime,
        Experiment::RandomInit,
        Experiment::LongString,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Capacity => "capacity",
            Experiment::TrainingTime => "training-time",
            Experiment::RandomInit => "random-init",
            Experiment::LongString => "long-string",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Experiment::Capacity => 11,
            Experiment::TrainingTime => 12,
            Experiment::RandomInit => 13,
            Experiment::LongString => 14,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|e| e.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown experiment {s:?}; valid names: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Epoch cap per grammar: twice the last epoch listed for it in the published
/// training-time tables.
pub fn default_epoch_cap(g: GrammarId) -> usize {
    [420, 1400, 140, 140, 1800, 540, 280][g.get() as usize - 1]
}

/// Snapshot epochs of the published training-time tables.
pub fn default_checkpoints(g: GrammarId) -> Vec<usize> {
    let (start, step) = match g.get() {
        1 => (30, 30),
        2 => (100, 100),
        3 | 4 => (10, 10),
        5 => (600, 50),
        6 => (90, 30),
        _ => (20, 20),
    };
    (0..7).map(|i| start + i * step).collect()
}

/// Every parameter of a sweep. Fields not used by an experiment are ignored
/// by it but still enter the config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub grammar: GrammarId,
    pub min_len: usize,
    pub max_len: usize,
    pub test_fraction: f64,
    pub hidden: usize,
    /// Optimizer settings; `epochs` and `seed` are replaced per cell.
    pub train: TrainConfig,
    /// `None` uses [`default_epoch_cap`].
    pub epoch_cap: Option<usize>,
    pub k_values: Vec<usize>,
    pub method: ClusteringMethod,
    pub include_post_stop_states: bool,
    pub acceptance_vote: AcceptanceVote,
    pub master_seed: u64,
    /// Capacity sweep: hidden sizes and replicate count per size.
    pub n_values: Vec<usize>,
    pub replicates: usize,
    /// Training-time sweep; `None` uses [`default_checkpoints`].
    pub checkpoints: Option<Vec<usize>>,
    /// Long test set used by the training-time sweep.
    pub long_length: usize,
    pub long_count: usize,
    /// Random-init sweep.
    pub n_inits: usize,
    /// Long-string comparison.
    pub long_hidden: usize,
    pub lengths: Vec<usize>,
    pub n_per_length: usize,
    /// Training seeds tried until one yields an incorrect extracted automaton.
    pub attempts: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grammar: GrammarId::new(1).unwrap(),
            min_len: 3,
            max_len: 15,
            test_fraction: 0.2,
            hidden: 15,
            train: TrainConfig::default(),
            epoch_cap: None,
            k_values: (3..=15).collect(),
            method: ClusteringMethod::Kmeans,
            include_post_stop_states: false,
            acceptance_vote: AcceptanceVote::default(),
            master_seed: 0,
            n_values: vec![5, 10, 15, 20, 25, 30],
            replicates: 3,
            checkpoints: None,
            long_length: 200,
            long_count: 10_000,
            n_inits: 10,
            long_hidden: 9,
            lengths: (1..=10).map(|i| 20 * i).collect(),
            n_per_length: 10_000,
            attempts: 1,
        }
    }
}

impl SweepConfig {
    pub fn for_grammar(grammar: GrammarId) -> Self {
        Self {
            grammar,
            ..Self::default()
        }
    }

    pub fn epoch_cap(&self) -> usize {
        self.epoch_cap.unwrap_or_else(|| default_epoch_cap(self.grammar))
    }

    pub fn checkpoint_epochs(&self) -> Vec<usize> {
        self.checkpoints
            .clone()
            .unwrap_or_else(|| default_checkpoints(self.grammar))
    }

    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        self.train.validate()?;
        if self.k_values.is_empty() {
            return bad("k_values must not be empty");
        }
        if self.method == ClusteringMethod::Kmeans {
            if let Some(&k) = self.k_values.iter().find(|&&k| k < 2) {
                return Err(Error::NeedTwoClusters { k });
            }
        }
        if self.epoch_cap() == 0 {
            return bad("epoch cap must be at least 1");
        }
        match experiment {
            Experiment::Capacity => {
                if self.n_values.is_empty() || self.n_values.contains(&0) || self.replicates == 0 {
                    return bad("capacity sweep needs positive hidden sizes and replicates");
                }
            }
            Experiment::TrainingTime => {
                let cp = self.checkpoint_epochs();
                if cp.is_empty() || cp[0] == 0 || cp.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("checkpoints must be positive and strictly ascending");
                }
            }
            Experiment::RandomInit => {
                if self.n_inits < 2 {
                    return bad("random-init sweep needs at least 2 initializations");
                }
            }
            Experiment::LongString => {
                if !matches!(self.grammar.get(), 3 | 4) {
                    return bad("long-string comparison runs on grammar 3 or 4");
                }
                if self.lengths.is_empty() || self.attempts == 0 || self.n_per_length == 0 {
                    return bad("long-string comparison needs lengths, samples and attempts");
                }
            }
        }
        if self.hidden == 0 || self.long_hidden == 0 {
            return bad("hidden size must be positive");
        }
        Ok(())
    }
}

/// One trained network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub hidden: usize,
    pub replicate: usize,
    pub seed: u64,
    pub epochs_run: usize,
    pub converged: bool,
    pub final_loss: Option<f64>,
    pub rnn_accuracy_test: Option<f64>,
    pub losses: Vec<f64>,
    pub error: Option<String>,
}

/// One extraction attempt from one model snapshot at one K.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionRecord {
    pub hidden: usize,
    pub replicate: usize,
    pub epoch: usize,
    pub k: usize,
    pub model_converged: bool,
    pub k_used: Option<usize>,
    pub silhouette: Option<f64>,
    pub unobserved_pairs: Option<usize>,
    pub dfa_states: Option<usize>,
    pub dfa_accuracy: Option<f64>,
    pub extraction_success: bool,
    pub dfa: Option<crate::automata::Dfa>,
    pub error: Option<String>,
}

impl ExtractionRecord {
    pub fn dot_name(&self) -> String {
        format!(
            "h{}_r{}_e{}_k{}.dot",
            self.hidden, self.replicate, self.epoch, self.k
        )
    }
}

/// Training-time snapshot summary.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRecord {
    pub epoch: usize,
    pub rnn_accuracy_test: f64,
    pub rnn_accuracy_long: f64,
    pub best_k: Option<usize>,
    pub best_dfa_accuracy: Option<f64>,
    pub best_dfa_accuracy_long: Option<f64>,
}

/// Error rates at one string length.
#[derive(Clone, Debug, PartialEq)]
pub struct LengthRecord {
    pub length: usize,
    pub samples: usize,
    pub positives: usize,
    pub rnn_error: f64,
    pub dfa_error: f64,
    /// Exact fraction of negative strings among all strings of this length.
    pub negative_ratio: String,
    pub negative_ratio_f64: f64,
}

/// Accuracy statistics over the cells sharing one K.
#[derive(Clone, Debug, PartialEq)]
pub struct KSummary {
    pub k: usize,
    pub cells: usize,
    pub mean_dfa_accuracy: f64,
    pub var_dfa_accuracy: f64,
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub config: SweepConfig,
    pub config_hash: String,
    pub training: Vec<TrainingRecord>,
    pub extractions: Vec<ExtractionRecord>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub lengths: Vec<LengthRecord>,
    pub per_k: Vec<KSummary>,
    /// `(series, slope)` least-squares trends of error against length.
    pub trends: Vec<(String, f64)>,
    /// Conditions the caller should know about, such as a correct automaton in
    /// a scenario that needs an incorrect one.
    pub flags: Vec<String>,
}

impl ExperimentReport {
    fn new(experiment: Experiment, config: &SweepConfig) -> Self {
        Self {
            experiment,
            config: config.clone(),
            config_hash: config_hash(experiment, config),
            training: Vec::new(),
            extractions: Vec::new(),
            checkpoints: Vec::new(),
            lengths: Vec::new(),
            per_k: Vec::new(),
            trends: Vec::new(),
            flags: Vec::new(),
        }
    }

    /// Fraction of extraction cells that produced a correct automaton.
    pub fn success_rate(&self) -> f64 {
        if self.extractions.is_empty() {
            return 0.0;
        }
        let ok = self.extractions.iter().filter(|e| e.extraction_success).count();
        ok as f64 / self.extractions.len() as f64
    }

    pub fn trend(&self, series: &str) -> Option<f64> {
        self.trends.iter().find(|(s, _)| s == series).map(|&(_, v)| v)
    }
}
