use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CrfError, CrfModel, CrfParams, FeatureMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty coefficient on all parameters.
    pub l2: f64,
    /// Sequences per update.
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, learning_rate: 0.05, l2: 0.0, batch_size: 4, seed: 42, optimizer: Optimizer::default() }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: CrfModel,
    /// Mean negative log-likelihood per sequence, one entry per epoch,
    /// measured during the epoch.
    pub loss_curve: Vec<f64>,
}

/// Minimizes the mean negative log-likelihood of `data` with mini-batch
/// updates. Sequences are shuffled each epoch by a ChaCha8 stream seeded
/// with `config.seed`; gradients within a batch are summed in batch order,
/// so runs with equal inputs are bit-identical.
pub fn train(mut model: CrfModel, data: &[(FeatureMatrix, Vec<usize>)], config: &TrainConfig) -> Result<TrainOutcome, CrfError> {
    if data.is_empty() {
        return Err(CrfError::EmptyDataset);
    }
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = CrfParams::zeros(model.num_labels(), model.feature_dim());
    let mut m1 = grad.clone();
    let mut m2 = grad.clone();
    let mut step = 0i32;
    let batch = config.batch_size.max(1);
    let mut loss_curve = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_nll = 0.0;
        for chunk in order.chunks(batch) {
            grad.fill(0.0);
            for &i in chunk {
                let (x, y) = &data[i];
                epoch_nll -= model.accumulate_gradient(x, y, &mut grad)?;
            }
            step += 1;
            let scale = 1.0 / chunk.len() as f64;
            let params = model.params.blocks_mut();
            let grads = grad.blocks();
            let firsts = m1.blocks_mut();
            let seconds = m2.blocks_mut();
            for (((p, g), a), b) in params.into_iter().zip(grads).zip(firsts).zip(seconds) {
                for j in 0..p.len() {
                    // descent direction on the loss: -ll/|batch| + l2/2 |w|^2
                    let gj = -g[j] * scale + config.l2 * p[j];
                    match config.optimizer {
                        Optimizer::Sgd => p[j] -= config.learning_rate * gj,
                        Optimizer::Adam { beta1, beta2, epsilon } => {
                            a[j] = beta1 * a[j] + (1.0 - beta1) * gj;
                            b[j] = beta2 * b[j] + (1.0 - beta2) * gj * gj;
                            let mhat = a[j] / (1.0 - beta1.powi(step));
                            let vhat = b[j] / (1.0 - beta2.powi(step));
                            p[j] -= config.learning_rate * mhat / (vhat.sqrt() + epsilon);
                        }
                    }
                }
            }
        }
        loss_curve.push(epoch_nll / data.len() as f64);
    }
    Ok(TrainOutcome { model, loss_curve })
}
