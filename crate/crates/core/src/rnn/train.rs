//! Per-string RMSprop training with full backpropagation through time.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{encode, Scratch, SecondOrderRnn};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub weight_init_scale: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.003,
            rms_decay: 0.999,
            rms_epsilon: 1e-16,
            weight_init_scale: 0.5,
            seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.rms_decay > 0.0 && self.rms_decay < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rms decay must lie in (0, 1), got {}",
                self.rms_decay
            )));
        }
        if !(self.rms_epsilon > 0.0) {
            return Err(Error::InvalidConfig("rms epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Fresh model with weights drawn from this config's seed and scale.
    pub fn initial_model(&self, h_init: Vec<f64>) -> Result<SecondOrderRnn> {
        SecondOrderRnn::random(h_init, self.weight_init_scale, self.seed)
    }
}

/// What to do after an epoch completes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: SecondOrderRnn,
    /// Deep copies taken at the end of each requested epoch, ascending.
    pub snapshots: Vec<(usize, SecondOrderRnn)>,
    /// Mean per-string loss of each completed epoch.
    pub losses: Vec<f64>,
    /// Epochs actually run (less than the cap when stopped early).
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// RMSprop state for one parameter vector.
#[derive(Clone, Debug)]
pub struct RmsProp {
    learning_rate: f64,
    decay: f64,
    epsilon: f64,
    mean_square: Vec<f64>,
}

impl RmsProp {
    pub fn new(len: usize, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            mean_square: vec![0.0; len],
        }
    }

    /// `ms <- decay*ms + (1-decay)*g^2; theta <- theta - lr*g/sqrt(ms + eps)`.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        let (lr, rho, eps) = (self.learning_rate, self.decay, self.epsilon);
        for ((p, ms), &g) in params.iter_mut().zip(&mut self.mean_square).zip(grad) {
            *ms = rho * *ms + (1.0 - rho) * g * g;
            *p -= lr * g / (*ms + eps).sqrt();
        }
    }
}

/// Trains `rnn` for `cfg.epochs` epochs, keeping snapshots at `checkpoints`.
pub fn train(
    rnn: SecondOrderRnn,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    checkpoints: &[usize],
) -> Result<TrainOutcome> {
    train_with(rnn, data, cfg, checkpoints, |_, _| Control::Continue)
}

/// Like [`train`], calling `monitor(epoch, model)` after every epoch; returning
/// [`Control::Stop`] ends training after that epoch.
pub fn train_with(
    mut rnn: SecondOrderRnn,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    checkpoints: &[usize],
    mut monitor: impl FnMut(usize, &SecondOrderRnn) -> Control,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "checkpoints must be strictly ascending".into(),
        ));
    }

    let encoded: Vec<(Vec<usize>, bool)> = data
        .iter()
        .map(|item| Ok((encode(&item.string)?, item.label)))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_6169_6e00_0000);

    let mut opt = RmsProp::new(
        rnn.weights().len(),
        cfg.learning_rate,
        cfg.rms_decay,
        cfg.rms_epsilon,
    );
    let mut grad = vec![0.0; rnn.weights().len()];
    let mut scratch = Scratch::new(rnn.hidden_size());

    let mut snapshots = Vec::new();
    let mut next_checkpoint = checkpoints.iter().peekable();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle_each_epoch {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for &idx in &order {
            let (symbols, label) = &encoded[idx];
            total += rnn.loss_and_gradient_with(symbols, *label, &mut grad, &mut scratch);
            opt.update(rnn.weights_mut(), &grad);
        }
        let mean = total / encoded.len() as f64;
        if !mean.is_finite() || rnn.weights().iter().any(|w| !w.is_finite()) {
            return Err(Error::DivergedLoss { epoch });
        }
        losses.push(mean);

        while next_checkpoint.peek().is_some_and(|&&c| c <= epoch) {
            let c = *next_checkpoint.next().unwrap();
            if c == epoch {
                snapshots.push((epoch, rnn.clone()));
            }
        }
        if monitor(epoch, &rnn) == Control::Stop {
            stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    let epochs_run = losses.len();
    Ok(TrainOutcome {
        model: rnn,
        snapshots,
        losses,
        epochs_run,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_dataset;
    use crate::tomita::GrammarId;

    fn small_data() -> LabeledDataset {
        generate_dataset(GrammarId::new(4).unwrap(), 3, 6, 0.2, 1)
            .unwrap()
            .train
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.0,
            ..Default::default()
        };
        let rnn = cfg.initial_model(SecondOrderRnn::default_h_init(4)).unwrap();
        let out = train(rnn.clone(), &small_data(), &cfg, &[]).unwrap();
        assert_eq!(out.model, rnn);
        assert_eq!(out.losses.len(), 3);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = TrainConfig {
            epochs: 3,
            seed: 11,
            ..Default::default()
        };
        let rnn = cfg.initial_model(SecondOrderRnn::default_h_init(4)).unwrap();
        let a = train(rnn.clone(), &small_data(), &cfg, &[1, 3]).unwrap();
        let b = train(rnn, &small_data(), &cfg, &[1, 3]).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.model, b.model);
        assert_eq!(a.snapshots.len(), 2);
        assert_eq!(a.snapshots[1].1, a.model);
        assert_ne!(a.snapshots[0].1, a.model);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainConfig {
            epochs: 2,
            learning_rate: f64::MAX,
            ..Default::default()
        };
        let rnn = cfg.initial_model(SecondOrderRnn::default_h_init(3)).unwrap();
        assert!(matches!(
            train(rnn, &small_data(), &cfg, &[]),
            Err(Error::DivergedLoss { epoch: 1 })
        ));
    }

    #[test]
    fn monitor_stops_early() {
        let cfg = TrainConfig {
            epochs: 10,
            ..Default::default()
        };
        let rnn = cfg.initial_model(SecondOrderRnn::default_h_init(3)).unwrap();
        let out = train_with(rnn, &small_data(), &cfg, &[], |e, _| {
            if e == 2 {
                Control::Stop
            } else {
                Control::Continue
            }
        })
        .unwrap();
        assert_eq!(out.epochs_run, 2);
        assert!(out.stopped_early);
    }

    #[test]
    fn rejects_invalid_config() {
        let rnn = SecondOrderRnn::zeros(vec![1.0, 0.0]).unwrap();
        let bad = TrainConfig {
            rms_decay: 1.0,
            ..Default::default()
        };
        assert!(train(rnn.clone(), &small_data(), &bad, &[]).is_err());
        let mut empty = small_data();
        empty.items.clear();
        assert!(matches!(
            train(rnn, &empty, &TrainConfig::default(), &[]),
            Err(Error::EmptyDataset)
        ));
    }
}
