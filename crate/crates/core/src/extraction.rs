//! Automaton extraction from a trained network: collect hidden activations,
//! cluster them into states, tabulate transitions between clusters, and
//! minimize the resulting automaton.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::automata::{minimize, to_dot, Dfa, ALPHABET_SIZE};
use crate::clustering::{kmeans, quantize_binary, silhouette_sampled, Clustering, Points, KMEANS_MAX_ITERS, SILHOUETTE_CAP};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rnn::{encode, SecondOrderRnn, RESPONSE_INDEX, STOP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringMethod {
    Kmeans,
    #[serde(alias = "quantize")]
    BinaryQuantization,
}

impl std::str::FromStr for ClusteringMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Self::Kmeans),
            "quantize" | "binary_quantization" => Ok(Self::BinaryQuantization),
            other => Err(Error::InvalidConfig(format!(
                "unknown clustering method {other:?} (expected kmeans or quantize)"
            ))),
        }
    }
}

/// How a cluster's member activations vote on acceptance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceVote {
    /// Every activation row votes, so a prefix shared by many strings votes many times.
    Rows,
    /// Each distinct activation vector votes once.
    #[default]
    Distinct,
}

impl std::str::FromStr for AcceptanceVote {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows" => Ok(Self::Rows),
            "distinct" => Ok(Self::Distinct),
            other => Err(Error::InvalidConfig(format!(
                "unknown acceptance vote {other:?} (expected rows or distinct)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub k: usize,
    pub method: ClusteringMethod,
    pub seed: u64,
    #[serde(default)]
    pub include_post_stop_states: bool,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_silhouette_cap")]
    pub silhouette_cap: usize,
    #[serde(default)]
    pub acceptance_vote: AcceptanceVote,
}

fn default_max_iters() -> usize {
    KMEANS_MAX_ITERS
}

fn default_silhouette_cap() -> usize {
    SILHOUETTE_CAP
}

impl ExtractionConfig {
    pub fn kmeans(k: usize, seed: u64) -> Self {
        Self {
            k,
            method: ClusteringMethod::Kmeans,
            seed,
            include_post_stop_states: false,
            max_iters: KMEANS_MAX_ITERS,
            silhouette_cap: SILHOUETTE_CAP,
            acceptance_vote: AcceptanceVote::default(),
        }
    }

    pub fn quantize() -> Self {
        Self {
            method: ClusteringMethod::BinaryQuantization,
            ..Self::kmeans(0, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == ClusteringMethod::Kmeans && self.k < 2 {
            return Err(Error::NeedTwoClusters { k: self.k });
        }
        Ok(())
    }
}

/// One string's path through hidden space.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub string: String,
    pub label: bool,
    pub readout: f64,
    /// Row of this string's initial state in [`ActivationTraceSet::states`].
    pub first_row: usize,
}

impl TraceEntry {
    /// Initial state, one state per symbol, and the post-stop state.
    pub fn steps(&self) -> usize {
        self.string.len() + 2
    }
}

/// Hidden vectors recorded while the network reads a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationTraceSet {
    pub hidden: usize,
    pub entries: Vec<TraceEntry>,
    /// Every recorded state, row-major, `hidden` values per row.
    pub states: Vec<f64>,
}

/// Which string and time step a clustered row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowRef {
    pub string_id: usize,
    pub position: usize,
}

impl ActivationTraceSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn state(&self, row: usize) -> &[f64] {
        &self.states[row * self.hidden..(row + 1) * self.hidden]
    }

    /// Number of binary-symbol steps across all traces.
    pub fn binary_steps(&self) -> usize {
        self.entries.iter().map(|e| e.string.len()).sum()
    }

    /// Rows to cluster: every state before the stop symbol (including the
    /// initial state) and, optionally, the post-stop states. Rows of one string
    /// are contiguous and in time order.
    pub fn clustered_rows(&self, include_post_stop: bool) -> (Vec<f64>, Vec<RowRef>) {
        let mut data = Vec::new();
        let mut refs = Vec::new();
        for (id, e) in self.entries.iter().enumerate() {
            let upto = if include_post_stop {
                e.steps()
            } else {
                e.steps() - 1
            };
            for t in 0..upto {
                data.extend_from_slice(self.state(e.first_row + t));
                refs.push(RowRef {
                    string_id: id,
                    position: t,
                });
            }
        }
        (data, refs)
    }
}

/// Runs every string of `data` through the network and records the full traces.
pub fn collect_activations(rnn: &SecondOrderRnn, data: &LabeledDataset) -> Result<ActivationTraceSet> {
    let hidden = rnn.hidden_size();
    let mut states = Vec::with_capacity((data.total_symbols() + 2 * data.len()) * hidden);
    let mut entries = Vec::with_capacity(data.len());
    let mut rows = 0;
    for item in data.iter() {
        let trace = rnn.run_encoded(&encode(&item.string)?);
        entries.push(TraceEntry {
            string: item.string.clone(),
            label: item.label,
            readout: trace.readout(),
            first_row: rows,
        });
        rows += trace.len();
        states.extend_from_slice(&trace.states);
    }
    Ok(ActivationTraceSet {
        hidden,
        entries,
        states,
    })
}

/// `counts[c][a][c']`: observed moves from cluster `c` to `c'` on symbol `a`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub k: usize,
    counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * ALPHABET_SIZE * k],
        }
    }

    #[inline]
    fn offset(&self, from: usize, symbol: usize) -> usize {
        (from * ALPHABET_SIZE + symbol) * self.k
    }

    pub fn get(&self, from: usize, symbol: usize, to: usize) -> u64 {
        self.counts[self.offset(from, symbol) + to]
    }

    pub fn add(&mut self, from: usize, symbol: usize, to: usize) {
        let o = self.offset(from, symbol);
        self.counts[o + to] += 1;
    }

    /// Target counts for one `(cluster, symbol)` pair.
    pub fn row(&self, from: usize, symbol: usize) -> &[u64] {
        let o = self.offset(from, symbol);
        &self.counts[o..o + self.k]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Most frequent target, lowest id on ties, and whether a tie occurred.
    /// `None` when the pair was never observed.
    pub fn argmax(&self, from: usize, symbol: usize) -> Option<(usize, bool)> {
        let row = self.row(from, symbol);
        let max = *row.iter().max()?;
        if max == 0 {
            return None;
        }
        let best = row.iter().position(|&c| c == max).unwrap();
        let tied = row.iter().filter(|&&c| c == max).count() > 1;
        Some((best, tied))
    }

    /// Share of observations falling on the most frequent target, per observed pair.
    pub fn dominance(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in 0..self.k {
            for a in 0..ALPHABET_SIZE {
                let row = self.row(c, a);
                let total: u64 = row.iter().sum();
                if total > 0 {
                    out.push(*row.iter().max().unwrap() as f64 / total as f64);
                }
            }
        }
        out
    }
}

/// Tabulates cluster-to-cluster moves along every binary symbol of every trace.
/// `assignment` must follow the row order of
/// [`ActivationTraceSet::clustered_rows`] with the same `include_post_stop`.
/// Stop-symbol steps are never counted.
pub fn build_transitions(
    traces: &ActivationTraceSet,
    assignment: &[usize],
    k: usize,
    include_post_stop: bool,
) -> Result<TransitionCounts> {
    let mut counts = TransitionCounts::new(k);
    let mut cursor = 0;
    for e in &traces.entries {
        let rows = if include_post_stop {
            e.steps()
        } else {
            e.steps() - 1
        };
        if cursor + rows > assignment.len() {
            return Err(Error::InvalidConfig(
                "clustering does not cover every activation".into(),
            ));
        }
        for (t, b) in e.string.bytes().enumerate() {
            let symbol = (b - b'0') as usize;
            counts.add(assignment[cursor + t], symbol, assignment[cursor + t + 1]);
        }
        cursor += rows;
    }
    if cursor != assignment.len() {
        return Err(Error::InvalidConfig(
            "clustering covers more rows than the traces hold".into(),
        ));
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub k_requested: usize,
    pub k_used: usize,
    /// `None` when fewer than two clusters survive.
    pub silhouette: Option<f64>,
    pub clustered_points: usize,
    pub unobserved_pairs: usize,
    pub transition_ties: usize,
    pub acceptance_ties: usize,
    pub initial_tie: bool,
    pub removed_empty_clusters: usize,
    /// Mean share of the dominant target over observed `(cluster, symbol)` pairs.
    pub mean_dominance: f64,
    pub pre_minimization_states: usize,
    pub states: usize,
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub dfa: Dfa,
    pub unminimized: Dfa,
    pub clustering: Clustering,
    pub counts: TransitionCounts,
    pub diagnostics: Diagnostics,
}

/// Extracts a minimal automaton from `rnn` using the strings of `data`.
///
/// Clusters the pre-stop activations, keeps the most frequent target per
/// `(cluster, symbol)` (ties to the lowest id), fills pairs that never occur
/// by stepping the network once from the cluster centroid, starts from the
/// cluster nearest the network's initial state, and marks a cluster
/// accepting when most of its members read out above 0.5 after a stop step
/// (ties reject). The result is minimized.
pub fn extract_dfa(rnn: &SecondOrderRnn, data: &LabeledDataset, cfg: &ExtractionConfig) -> Result<Extraction> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let traces = collect_activations(rnn, data)?;
    extract_from_traces(rnn, &traces, cfg)
}

/// [`extract_dfa`] over traces that were already collected, so several
/// configurations can share one pass over the data.
pub fn extract_from_traces(
    rnn: &SecondOrderRnn,
    traces: &ActivationTraceSet,
    cfg: &ExtractionConfig,
) -> Result<Extraction> {
    cfg.validate()?;
    if traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let hidden = traces.hidden;
    let (data, refs) = traces.clustered_rows(cfg.include_post_stop_states);
    let points = Points::new(&data, hidden)?;
    let clustering = match cfg.method {
        ClusteringMethod::Kmeans => kmeans(points, cfg.k, cfg.seed, cfg.max_iters)?,
        ClusteringMethod::BinaryQuantization => quantize_binary(points, 0.5)?,
    };
    let k = clustering.k;
    let silhouette = if k >= 2 {
        Some(silhouette_sampled(points, &clustering, cfg.silhouette_cap, cfg.seed)?)
    } else {
        None
    };

    let counts = build_transitions(traces, &clustering.assignment, k, cfg.include_post_stop_states)?;

    let mut delta = vec![[0usize; ALPHABET_SIZE]; k];
    let mut unobserved = 0;
    let mut transition_ties = 0;
    for (c, row) in delta.iter_mut().enumerate() {
        for (a, target) in row.iter_mut().enumerate() {
            *target = match counts.argmax(c, a) {
                Some((t, tied)) => {
                    transition_ties += usize::from(tied);
                    t
                }
                None => {
                    unobserved += 1;
                    clustering.nearest(&rnn.step(&clustering.centroids[c], a))
                }
            };
        }
    }

    let (initial, initial_tie) = nearest_with_tie(&clustering, rnn.h_init());

    // acceptance votes from the network's own readout, pre-stop rows only
    let mut votes = vec![(0usize, 0usize); k];
    let mut next = vec![0.0; hidden];
    let mut voted = HashSet::new();
    for (i, r) in refs.iter().enumerate() {
        let e = &traces.entries[r.string_id];
        if r.position > e.string.len() {
            continue;
        }
        if cfg.acceptance_vote == AcceptanceVote::Distinct {
            let bits: Vec<u64> = points.get(i).iter().map(|x| x.to_bits()).collect();
            if !voted.insert(bits) {
                continue;
            }
        }
        let accept = if r.position == e.string.len() {
            e.readout > 0.5
        } else {
            rnn.step_into(points.get(i), STOP, &mut next);
            next[RESPONSE_INDEX] > 0.5
        };
        let v = &mut votes[clustering.assignment[i]];
        if accept {
            v.0 += 1;
        } else {
            v.1 += 1;
        }
    }
    let acceptance_ties = votes.iter().filter(|(a, r)| a == r).count();
    let accepting: Vec<bool> = votes.iter().map(|(a, r)| a > r).collect();

    let unminimized = Dfa::from_flags(initial, accepting, delta)?;
    let dfa = minimize(&unminimized);
    let dominance = counts.dominance();
    let diagnostics = Diagnostics {
        k_requested: cfg.k,
        k_used: k,
        silhouette,
        clustered_points: points.len(),
        unobserved_pairs: unobserved,
        transition_ties,
        acceptance_ties,
        initial_tie,
        removed_empty_clusters: clustering.removed_empty.len(),
        mean_dominance: if dominance.is_empty() {
            0.0
        } else {
            dominance.iter().sum::<f64>() / dominance.len() as f64
        },
        pre_minimization_states: unminimized.num_states(),
        states: dfa.num_states(),
    };
    Ok(Extraction {
        dfa,
        unminimized,
        clustering,
        counts,
        diagnostics,
    })
}

fn nearest_with_tie(clustering: &Clustering, x: &[f64]) -> (usize, bool) {
    let d: Vec<f64> = clustering
        .centroids
        .iter()
        .map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let best = clustering.nearest(x);
    let tied = d.iter().filter(|&&v| v == d[best]).count() > 1;
    (best, tied)
}

/// Fraction of items the automaton labels correctly.
pub fn dfa_accuracy(dfa: &Dfa, data: &LabeledDataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data
        .iter()
        .filter(|s| dfa.accepts_unchecked(&s.string) == s.label)
        .count();
    correct as f64 / data.len() as f64
}

/// An extracted automaton counts as correct when it labels every test item correctly.
pub fn is_correct(dfa: &Dfa, test: &LabeledDataset) -> bool {
    test.iter().all(|s| dfa.accepts_unchecked(&s.string) == s.label)
}

/// Extraction summary written by the `extract` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub config: ExtractionConfig,
    pub diagnostics: Diagnostics,
    pub test_accuracy: Option<f64>,
    pub dfa: String,
    pub dot: String,
}

impl ExtractionReport {
    pub fn new(cfg: &ExtractionConfig, extraction: &Extraction, test_accuracy: Option<f64>) -> Self {
        Self {
            config: cfg.clone(),
            diagnostics: extraction.diagnostics.clone(),
            test_accuracy,
            dfa: extraction.dfa.to_text(),
            dot: to_dot(&extraction.dfa),
        }
    }
}

/// Writes `activation_index,string_id,position,cluster_id` for every clustered row.
pub fn write_clustering_dump(
    path: &Path,
    traces: &ActivationTraceSet,
    clustering: &Clustering,
    include_post_stop: bool,
) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["activation_index", "string_id", "position", "cluster_id"])
        .map_err(csv_err)?;
    let (_, refs) = traces.clustered_rows(include_post_stop);
    for (i, (r, c)) in refs.iter().zip(&clustering.assignment).enumerate() {
        w.serialize((i, r.string_id, r.position, c)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
