use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::substream;

use super::adam::{adam_step, AdamState};
use super::mlp::{mse_loss, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub learning_rate: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 500,
            patience: 20,
            validation_fraction: 0.2,
            learning_rate: AdamState::DEFAULT_LEARNING_RATE,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be ≥ 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction {} must lie in (0, 1)",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Input/target pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn push(&mut self, input: Vec<f64>, target: Vec<f64>) {
        self.inputs.push(input);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }
}

/// Per-feature affine standardization `(x − mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Fits mean and standard deviation; near-constant features keep unit
    /// scale.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            var.iter_mut()
                .zip(r.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
        }
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// A network together with the normalization it was trained under; speaks
/// physical units on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedMlp {
    pub net: Mlp,
    pub input_norm: Standardizer,
    pub target_norm: Standardizer,
}

impl TrainedMlp {
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let z = self.net.forward(&self.input_norm.apply(input))?;
        Ok(self.target_norm.invert(&z))
    }

    /// Mean squared error over `data`, physical units.
    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        let pred = data
            .inputs
            .iter()
            .map(|x| self.predict(x))
            .collect::<Result<Vec<_>>>()?;
        mse_loss(&pred, &data.targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the untrained network.
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedMlp,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Mini-batch Adam on a seeded train/validation split.
///
/// Normalization is fitted on the training part only. Returns the
/// parameters of the epoch with the lowest validation loss, which may be
/// the initial ones.
pub fn train(net: Mlp, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = data.len();
    let min = (2.0 / cfg.validation_fraction).ceil() as usize;
    if n < min {
        return Err(Error::InvalidConfig(format!(
            "dataset has {n} rows; at least {min} needed for a {:.0}% validation split",
            cfg.validation_fraction * 100.0
        )));
    }
    if data.targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: data.targets.len(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(cfg.rng_seed, 0x7472_6169, 0);
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_set = data.subset(train_idx);
    let val_set = data.subset(val_idx);

    let input_norm = Standardizer::fit(&train_set.inputs);
    let target_norm = Standardizer::fit(&train_set.targets);
    let xs: Vec<Vec<f64>> = train_set
        .inputs
        .iter()
        .map(|x| input_norm.apply(x))
        .collect();
    let ys: Vec<Vec<f64>> = train_set
        .targets
        .iter()
        .map(|y| target_norm.apply(y))
        .collect();

    let mut model = TrainedMlp {
        net,
        input_norm,
        target_norm,
    };
    let mut adam = AdamState::new(model.net.params().len(), cfg.learning_rate);

    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: model.loss(&train_set)?,
        validation_loss: model.loss(&val_set)?,
    }];
    let mut best = (history[0].validation_loss, 0, model.net.clone());
    let mut stale = 0;
    let mut batch_order: Vec<usize> = (0..xs.len()).collect();
    let mut bx = Vec::with_capacity(cfg.batch_size);
    let mut by = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.max_epochs {
        batch_order.shuffle(&mut rng);
        for (b, chunk) in batch_order.chunks(cfg.batch_size).enumerate() {
            bx.clear();
            by.clear();
            bx.extend(chunk.iter().map(|&i| xs[i].clone()));
            by.extend(chunk.iter().map(|&i| ys[i].clone()));
            let (loss, grads) = model.net.backward(&bx, &by)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adam_step(model.net.params_mut(), &grads.0, &mut adam)?;
        }
        let rec = EpochRecord {
            epoch,
            train_loss: model.loss(&train_set)?,
            validation_loss: model.loss(&val_set)?,
        };
        if !rec.validation_loss.is_finite() || !rec.train_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: batch_order.len().div_ceil(cfg.batch_size),
            });
        }
        history.push(rec);
        if rec.validation_loss < best.0 {
            best = (rec.validation_loss, epoch, model.net.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                break;
            }
        }
    }

    model.net = best.2;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: best.1,
    })
}
