use std::fs;
use std::path::{Path, PathBuf};

use dfaforge::experiments::{Experiment, Manifest, SweepConfig};
use dfaforge::extraction::{AcceptanceVote, ClusteringMethod};
use dfaforge::{GrammarId, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every tunable of a run. Unset fields fall back to library defaults; a JSON
/// config file fills fields first and command-line flags override it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub grammar: Option<u8>,
    pub min_len: Option<usize>,
    pub max_len: Option<usize>,
    pub split: Option<f64>,
    pub long_length: Option<usize>,
    pub long_count: Option<usize>,
    pub hidden: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub rms_decay: Option<f64>,
    pub rms_epsilon: Option<f64>,
    pub init_scale: Option<f64>,
    pub k: Option<usize>,
    pub k_values: Option<Vec<usize>>,
    pub method: Option<ClusteringMethod>,
    pub include_post_stop_states: Option<bool>,
    pub acceptance_vote: Option<AcceptanceVote>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_values: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
    pub n_inits: Option<usize>,
    pub long_hidden: Option<usize>,
    pub lengths: Option<Vec<usize>>,
    pub n_per_length: Option<usize>,
    pub attempts: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// `self` with every field that `top` sets replaced.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self, top, command, grammar, min_len, max_len, split, long_length, long_count, hidden, epochs, lr,
            rms_decay, rms_epsilon, init_scale, k, k_values, method, include_post_stop_states, acceptance_vote, seed, out,
            n_values, replicates, checkpoints, n_inits, long_hidden, lengths, n_per_length, attempts
        );
        self
    }

    pub fn grammar(&self) -> Result<GrammarId, CliError> {
        let g = self
            .grammar
            .ok_or_else(|| CliError::Usage("--grammar is required".into()))?;
        GrammarId::new(g).map_err(CliError::from)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn min_len(&self) -> usize {
        self.min_len.unwrap_or(3)
    }

    pub fn max_len(&self) -> usize {
        self.max_len.unwrap_or(15)
    }

    pub fn split(&self) -> f64 {
        self.split.unwrap_or(0.2)
    }

    pub fn hidden(&self) -> usize {
        self.hidden.unwrap_or(15)
    }

    pub fn train_config(&self, epochs: usize) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs,
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            rms_decay: self.rms_decay.unwrap_or(d.rms_decay),
            rms_epsilon: self.rms_epsilon.unwrap_or(d.rms_epsilon),
            weight_init_scale: self.init_scale.unwrap_or(d.weight_init_scale),
            seed: self.seed(),
            ..d
        }
    }

    /// Sweep parameters: library defaults for the grammar, then every field set here.
    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let mut cfg = SweepConfig::for_grammar(self.grammar()?);
        cfg.min_len = self.min_len();
        cfg.max_len = self.max_len();
        cfg.test_fraction = self.split();
        cfg.hidden = self.hidden();
        cfg.train = self.train_config(cfg.train.epochs);
        cfg.epoch_cap = self.epochs;
        cfg.master_seed = self.seed();
        if let Some(k) = &self.k_values {
            cfg.k_values = k.clone();
        } else if let Some(k) = self.k {
            cfg.k_values = vec![k];
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(p) = self.include_post_stop_states {
            cfg.include_post_stop_states = p;
        }
        if let Some(v) = self.acceptance_vote {
            cfg.acceptance_vote = v;
        }
        if let Some(v) = &self.n_values {
            cfg.n_values = v.clone();
        }
        if let Some(v) = self.replicates {
            cfg.replicates = v;
        }
        if self.checkpoints.is_some() {
            cfg.checkpoints = self.checkpoints.clone();
        }
        if let Some(v) = self.long_length {
            cfg.long_length = v;
        }
        if let Some(v) = self.long_count {
            cfg.long_count = v;
        }
        if let Some(v) = self.n_inits {
            cfg.n_inits = v;
        }
        if let Some(v) = self.long_hidden {
            cfg.long_hidden = v;
        }
        if let Some(v) = &self.lengths {
            cfg.lengths = v.clone();
        }
        if let Some(v) = self.n_per_length {
            cfg.n_per_length = v;
        }
        if let Some(v) = self.attempts {
            cfg.attempts = v;
        }
        Ok(cfg)
    }

    /// Output directory: `--out` if given, else `<root>/<command>-<hash>` where
    /// root is `$DFAFORGE_OUT` or `runs`.
    pub fn out_dir(&self, command: &str) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        output_root().join(format!("{command}-{}", self.hash()))
    }

    pub fn hash(&self) -> String {
        let mut unplaced = self.clone();
        unplaced.out = None;
        let json = serde_json::to_string(&unplaced).expect("config serializes");
        Sha256::digest(json.as_bytes())[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn output_root() -> PathBuf {
    std::env::var_os("DFAFORGE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// A sweep config file is either a [`RunConfig`] or the manifest of an
/// earlier run, which pins the experiment and every parameter.
pub enum SweepSource {
    Run(RunConfig),
    Manifest(Manifest),
}

pub fn load_sweep_source(path: &Path) -> Result<SweepSource, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if value.get("config_hash").is_some() {
        let manifest = dfaforge::experiments::load_manifest(path)?;
        Ok(SweepSource::Manifest(manifest))
    } else {
        RunConfig::load(path).map(SweepSource::Run)
    }
}

/// Parses `3..15`, `3..=15`, `3-15` (all inclusive) or `3,5,8`.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad K value {t:?} in {s:?}"))
    };
    let bounds = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .or_else(|| s.split_once('-'));
    let values: Vec<usize> = match bounds {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(format!("empty K range {s:?}"));
            }
            (a..=b).collect()
        }
        None => s.split(',').map(num).collect::<Result<_, _>>()?,
    };
    Ok(values)
}

pub fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad value {t:?}")))
        .collect()
}

pub fn experiment_for(name: &str) -> Result<Experiment, CliError> {
    name.parse().map_err(CliError::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("3..5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_k_range("3..=5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_k_range("3-4").unwrap(), vec![3, 4]);
        assert_eq!(parse_k_range("7,3").unwrap(), vec![7, 3]);
        assert!(parse_k_range("5..3").is_err());
        assert!(parse_k_range("a").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            grammar: Some(3),
            hidden: Some(9),
            seed: Some(4),
            ..Default::default()
        };
        let flags = RunConfig {
            hidden: Some(20),
            ..Default::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!(merged.hidden, Some(20));
        assert_eq!(merged.grammar, Some(3));
        assert_eq!(merged.seed, Some(4));
    }

    #[test]
    fn sweep_config_picks_up_fields() {
        let rc = RunConfig {
            grammar: Some(4),
            k: Some(6),
            epochs: Some(9),
            n_inits: Some(3),
            ..Default::default()
        };
        let cfg = rc.sweep_config().unwrap();
        assert_eq!(cfg.k_values, vec![6]);
        assert_eq!(cfg.epoch_cap(), 9);
        assert_eq!(cfg.n_inits, 3);
        assert_eq!(cfg.grammar.get(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"grammer": 1}"#).is_err());
    }

    #[test]
    fn hash_ignores_out() {
        let a = RunConfig {
            grammar: Some(1),
            ..Default::default()
        };
        let b = RunConfig {
            out: Some("x".into()),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
    }
}
