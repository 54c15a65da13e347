use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Experiment, ExperimentReport, SweepConfig};
use crate::automata::to_dot;
use crate::error::{Error, Result};

const MANIFEST_FORMAT: &str = "dfaforge-run-manifest";

/// A CSV table: header row plus string cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

fn num<T: ToString>(v: T) -> String {
    v.to_string()
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl ExperimentReport {
    /// The metric tables this experiment produces, in file order.
    pub fn tables(&self) -> Vec<Table> {
        let mut tables = vec![
            Table {
                name: "training",
                columns: &[
                    "hidden",
                    "replicate",
                    "seed",
                    "epochs_run",
                    "converged",
                    "final_loss",
                    "rnn_accuracy_test",
                    "error",
                ],
                rows: self
                    .training
                    .iter()
                    .map(|r| {
                        vec![
                            num(r.hidden),
                            num(r.replicate),
                            num(r.seed),
                            num(r.epochs_run),
                            num(r.converged),
                            opt(&r.final_loss),
                            opt(&r.rnn_accuracy_test),
                            opt(&r.error),
                        ]
                    })
                    .collect(),
            },
            Table {
                name: "loss",
                columns: &["hidden", "replicate", "epoch", "loss"],
                rows: self
                    .training
                    .iter()
                    .flat_map(|r| {
                        r.losses.iter().enumerate().map(move |(e, l)| {
                            vec![num(r.hidden), num(r.replicate), num(e + 1), num(l)]
                        })
                    })
                    .collect(),
            },
            Table {
                name: "extraction",
                columns: &[
                    "hidden",
                    "replicate",
                    "epoch",
                    "k",
                    "model_converged",
                    "k_used",
                    "silhouette",
                    "unobserved_pairs",
                    "dfa_states",
                    "dfa_accuracy",
                    "extraction_success",
                    "error",
                ],
                rows: self
                    .extractions
                    .iter()
                    .map(|r| {
                        vec![
                            num(r.hidden),
                            num(r.replicate),
                            num(r.epoch),
                            num(r.k),
                            num(r.model_converged),
                            opt(&r.k_used),
                            opt(&r.silhouette),
                            opt(&r.unobserved_pairs),
                            opt(&r.dfa_states),
                            opt(&r.dfa_accuracy),
                            num(r.extraction_success),
                            opt(&r.error),
                        ]
                    })
                    .collect(),
            },
            Table {
                name: "per_k",
                columns: &[
                    "k",
                    "cells",
                    "mean_dfa_accuracy",
                    "var_dfa_accuracy",
                    "success_rate",
                ],
                rows: self
                    .per_k
                    .iter()
                    .map(|s| {
                        vec![
                            num(s.k),
                            num(s.cells),
                            num(s.mean_dfa_accuracy),
                            num(s.var_dfa_accuracy),
                            num(s.success_rate),
                        ]
                    })
                    .collect(),
            },
        ];
        if self.experiment == Experiment::TrainingTime {
            tables.push(Table {
                name: "checkpoints",
                columns: &[
                    "epoch",
                    "rnn_accuracy_test",
                    "rnn_accuracy_long",
                    "best_k",
                    "best_dfa_accuracy",
                    "best_dfa_accuracy_long",
                ],
                rows: self
                    .checkpoints
                    .iter()
                    .map(|c| {
                        vec![
                            num(c.epoch),
                            num(c.rnn_accuracy_test),
                            num(c.rnn_accuracy_long),
                            opt(&c.best_k),
                            opt(&c.best_dfa_accuracy),
                            opt(&c.best_dfa_accuracy_long),
                        ]
                    })
                    .collect(),
            });
        }
        if self.experiment == Experiment::LongString {
            tables.push(Table {
                name: "lengths",
                columns: &[
                    "length",
                    "samples",
                    "positives",
                    "rnn_error",
                    "dfa_error",
                    "negative_ratio",
                    "negative_ratio_f64",
                ],
                rows: self
                    .lengths
                    .iter()
                    .map(|l| {
                        vec![
                            num(l.length),
                            num(l.samples),
                            num(l.positives),
                            num(l.rnn_error),
                            num(l.dfa_error),
                            l.negative_ratio.clone(),
                            num(l.negative_ratio_f64),
                        ]
                    })
                    .collect(),
            });
            tables.push(Table {
                name: "trends",
                columns: &["series", "slope"],
                rows: self
                    .trends
                    .iter()
                    .map(|(s, v)| vec![s.clone(), num(v)])
                    .collect(),
            });
        }
        tables
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSeed {
    pub hidden: usize,
    pub replicate: usize,
    pub seed: u64,
}

/// Everything needed to rerun a sweep, plus an index of its output files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub experiment: Experiment,
    pub config_hash: String,
    pub config: SweepConfig,
    pub cell_seeds: Vec<CellSeed>,
    pub tables: Vec<String>,
    pub dot_files: Vec<String>,
    pub flags: Vec<String>,
}

/// First 16 hex digits of the SHA-256 of the experiment name and config JSON.
pub fn config_hash(experiment: Experiment, cfg: &SweepConfig) -> String {
    let json = serde_json::to_string(&(experiment, cfg)).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// `<root>/<experiment>-g<grammar>-<hash>`.
pub fn run_dir(root: &Path, experiment: Experiment, cfg: &SweepConfig) -> PathBuf {
    root.join(format!(
        "{}-g{}-{}",
        experiment,
        cfg.grammar,
        config_hash(experiment, cfg)
    ))
}

fn write_table(path: &Path, table: &Table) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every table as `<name>.csv`, a `manifest.json`, and one DOT file per
/// extracted automaton under `dfa/`. Returns the paths written.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut table_names = Vec::new();
    for table in report.tables() {
        let file = format!("{}.csv", table.name);
        let path = dir.join(&file);
        write_table(&path, &table)?;
        table_names.push(file);
        written.push(path);
    }

    let mut dot_files = Vec::new();
    let dfas: Vec<_> = report
        .extractions
        .iter()
        .filter_map(|r| r.dfa.as_ref().map(|d| (r.dot_name(), d)))
        .collect();
    if !dfas.is_empty() {
        let dot_dir = dir.join("dfa");
        fs::create_dir_all(&dot_dir).map_err(|e| Error::io(&dot_dir, e))?;
        for (name, dfa) in dfas {
            let path = dot_dir.join(&name);
            fs::write(&path, to_dot(dfa)).map_err(|e| Error::io(&path, e))?;
            dot_files.push(format!("dfa/{name}"));
            written.push(path);
        }
    }

    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        experiment: report.experiment,
        config_hash: report.config_hash.clone(),
        config: report.config.clone(),
        cell_seeds: report
            .training
            .iter()
            .map(|t| CellSeed {
                hidden: t.hidden,
                replicate: t.replicate,
                seed: t.seed,
            })
            .collect(),
        tables: table_names,
        dot_files,
        flags: report.flags.clone(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Reads a manifest and checks that its hash matches its config.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::InvalidConfig(format!(
            "{}: not a run manifest",
            path.display()
        )));
    }
    let expected = config_hash(manifest.experiment, &manifest.config);
    if manifest.config_hash != expected {
        return Err(Error::InvalidConfig(format!(
            "{}: config hash {} does not match its config ({expected})",
            path.display(),
            manifest.config_hash
        )));
    }
    Ok(manifest)
}
