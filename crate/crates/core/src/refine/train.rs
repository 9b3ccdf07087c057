use log::{debug, warn};
use ndarray::{Array3, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::closure::TrainingSet;
use super::grad::accumulate;
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::tt::RealTT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub batch_size: usize,
    /// Upper bound on epochs; training usually stops on the plateau rule.
    pub epochs: usize,
    /// Epochs without a new best loss before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Rescale after every epoch so the identity expectation stays 1.
    pub freeze_identity: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            batch_size: 256,
            epochs: 500,
            patience: 10,
            seed: 0,
            freeze_identity: true,
        }
    }
}

impl TrainConfig {
    fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: self.eps_adam }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    /// No new best loss for `patience` epochs.
    Plateau,
    MaxEpochs,
    /// Loss exceeded ten times its initial value or became non-finite.
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Lowest-loss iterate seen, the input when no epoch improved on it.
    pub tt: RealTT,
    pub initial_loss: f64,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    pub stop: StopReason,
}

impl TrainOutcome {
    pub fn diverged(&self) -> bool {
        self.stop == StopReason::Diverged
    }
}

fn full_loss(cores: &[Array3<f64>], data: &TrainingSet) -> Result<f64> {
    let tt = RealTT::new(cores.to_vec())?;
    Ok(data.entries().map(|(idx, v)| (v - tt.element_unchecked(idx)).powi(2)).sum())
}

fn identity_value(cores: &[Array3<f64>]) -> f64 {
    let mut env = ndarray::Array2::<f64>::ones((1, 1));
    for c in cores {
        env = env.dot(&c.index_axis(Axis(1), 0));
    }
    env[[0, 0]]
}

/// Per-core factors with unit product that equalize the core norms. Cross
/// output keeps the whole scale in one core, where a fixed Adam step would
/// be far too large relative to the entries.
fn balancing_gauge(tt: &RealTT) -> Vec<f64> {
    let norms: Vec<f64> = tt.cores().iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    if norms.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return vec![1.0; norms.len()];
    }
    let log_mean = norms.iter().map(|x| x.ln()).sum::<f64>() / norms.len() as f64;
    norms.iter().map(|x| (log_mean - x.ln()).exp()).collect()
}

/// Fits the cores of `recon` to `data` with minibatch Adam.
///
/// Internally every core is doubled, so the train evaluates expectations
/// `2^N A(g)` directly, and rescaled to a common norm; both factors are
/// removed from the result. Batches are drawn without replacement from a seeded
/// shuffle each epoch.
pub fn train(recon: &RealTT, data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if data.n() != recon.len() {
        return Err(Error::InvalidArgument(format!("training set has {} qubits, model {}", data.n(), recon.len())));
    }
    for (idx, _) in data.entries() {
        recon.element(idx)?;
    }
    let n = recon.len();
    let gauge = balancing_gauge(recon);
    let mut cores: Vec<Array3<f64>> = recon.cores().iter().zip(&gauge).map(|(c, &g)| c * (2.0 * g)).collect();
    let sizes: Vec<usize> = cores.iter().map(|c| c.len()).collect();
    let mut flat: Vec<f64> = cores.iter().flat_map(|c| c.iter().copied()).collect();
    let mut adam = Adam::new(cfg.adam(), flat.len())?;
    let mut rng = seeded(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();

    let initial_loss = full_loss(&cores, data)?;
    let (mut best_loss, mut best_epoch, mut best) = (initial_loss, 0, cores.clone());
    let mut history = Vec::new();
    let mut stale = 0;
    let mut stop = StopReason::MaxEpochs;

    let unflatten = |flat: &[f64], cores: &mut [Array3<f64>]| {
        let mut off = 0;
        for (c, &len) in cores.iter_mut().zip(&sizes) {
            c.as_slice_mut().expect("standard layout").copy_from_slice(&flat[off..off + len]);
            off += len;
        }
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let tt = RealTT::new(cores.clone())?;
            let g = accumulate(&tt, chunk.iter().map(|&i| data.entry(i)), 1.0)?;
            let grad: Vec<f64> = g.cores.iter().flat_map(|c| c.iter().copied()).collect();
            adam.step(&mut flat, &grad);
            unflatten(&flat, &mut cores);
        }
        if cfg.freeze_identity {
            let f = identity_value(&cores);
            if f > 0.0 && f.is_finite() {
                let c = f.powf(-1.0 / n as f64);
                flat.iter_mut().for_each(|x| *x *= c);
                unflatten(&flat, &mut cores);
            } else {
                warn!("epoch {epoch}: identity expectation {f:.3e} not positive, skipping normalization");
            }
        }
        let loss = full_loss(&cores, data)?;
        history.push(EpochStats { epoch, loss });
        debug!("epoch {epoch}: loss {loss:.6e}");
        if !loss.is_finite() || loss > 10.0 * initial_loss {
            warn!("training diverged at epoch {epoch}: loss {loss:.3e}, initial {initial_loss:.3e}");
            stop = StopReason::Diverged;
            break;
        }
        if loss < best_loss {
            best_loss = loss;
            best_epoch = epoch;
            best.clone_from(&cores);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stop = StopReason::Plateau;
                break;
            }
        }
    }

    let tt = if best_epoch == 0 {
        recon.clone()
    } else {
        RealTT::new(best.into_iter().zip(&gauge).map(|(c, &g)| c * (0.5 / g)).collect())?
    };
    Ok(TrainOutcome { tt, initial_loss, best_loss, best_epoch, history, stop })
}
