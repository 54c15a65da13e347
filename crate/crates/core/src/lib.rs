//! Train second-order recurrent networks on the Tomita grammars and extract
//! minimal deterministic automata from their hidden-state dynamics.

pub mod automata;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod extraction;
pub mod rnn;
pub mod seed;
pub mod tomita;

pub use automata::{count_accepted, equivalent, minimize, sample_strings, to_dot, BigCount, Dfa};
pub use dataset::{generate_dataset, generate_long_testset, negative_ratio, LabeledDataset, Role, Sample, Split};
pub use error::{Error, Result};
pub use experiments::{run_experiment, Experiment, ExperimentReport, SweepConfig};
pub use extraction::{extract_dfa, is_correct, AcceptanceVote, ClusteringMethod, ExtractionConfig};
pub use rnn::{SecondOrderRnn, TrainConfig, TrainOutcome};
pub use tomita::{ground_truth, membership, GrammarId};
