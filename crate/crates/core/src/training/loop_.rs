//! Epoch loop: shuffled scenarios, mini-batch gradient averaging, clipping,
//! Adam steps. Scenario passes inside a mini-batch run on worker threads;
//! the gradient reduction is an ordered, deterministic sum.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neural::{NetworkParameters, NormalizationStats};
use crate::scenario::{splitmix64, Scenario};
use crate::spectral::Dft;
use crate::training::adam::{clip_global_norm, OptimizerState};
use crate::training::{gradient, sequence_loss, LossConfig};

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch: usize,
    pub grad_clip: f64,
    pub seed: u64,
    pub loss: LossConfig,
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_grad_norm: f64,
    pub wall_seconds: f64,
}

/// How a training run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainOutcome {
    Completed,
    /// A non-finite loss appeared; parameters hold the last good state
    /// reported through the epoch callback.
    Diverged { epoch: usize, block: usize },
}

/// Train the network in place. `on_epoch` fires after every completed
/// epoch (checkpointing, logging); training is deterministic given the
/// seed, the scenario list and the options.
pub fn train(
    dft: &Dft,
    scenarios: &[Scenario],
    params: &mut NetworkParameters,
    stats: &NormalizationStats,
    opt: &mut OptimizerState,
    options: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochStats, &NetworkParameters, &OptimizerState) -> Result<()>,
) -> Result<(Vec<EpochStats>, TrainOutcome)> {
    if scenarios.is_empty() {
        return Err(Error::InvalidInput("no training scenarios".into()));
    }
    if !options.loss.mask.variant.uses_network() {
        return Err(Error::InvalidConfig(
            "training requires a variant with inferred masks".into(),
        ));
    }
    if options.batch == 0 {
        return Err(Error::InvalidConfig("batch size must be >= 1".into()));
    }

    let mut history = Vec::with_capacity(options.epochs);
    for epoch in 0..options.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..scenarios.len()).collect();
        let mut rng = StdRng::seed_from_u64(splitmix64(options.seed ^ (epoch as u64)));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut grad_norm_sum = 0.0;
        let mut steps = 0usize;

        for chunk in order.chunks(options.batch) {
            let results: Vec<Result<(f64, Vec<f64>)>> = chunk
                .par_iter()
                .map(|&i| {
                    let (loss, trace) =
                        sequence_loss(dft, &scenarios[i], Some((params, stats)), &options.loss)?;
                    let grad = gradient(dft, &trace, Some((params, stats)))?;
                    Ok((loss, grad))
                })
                .collect();

            let mut grad_mean = vec![0.0; params.len()];
            let mut batch_loss = 0.0;
            for res in results {
                match res {
                    Ok((loss, grad)) => {
                        batch_loss += loss;
                        for (g, v) in grad_mean.iter_mut().zip(&grad) {
                            *g += v;
                        }
                    }
                    Err(Error::TrainingDiverged { block }) => {
                        return Ok((history, TrainOutcome::Diverged { epoch, block }));
                    }
                    Err(e) => return Err(e),
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            for g in grad_mean.iter_mut() {
                *g *= scale;
            }
            loss_sum += batch_loss * scale;
            grad_norm_sum += clip_global_norm(&mut grad_mean, options.grad_clip);
            opt.update(params, &grad_mean)?;
            steps += 1;
        }

        let epoch_stats = EpochStats {
            epoch,
            mean_loss: loss_sum / steps as f64,
            mean_grad_norm: grad_norm_sum / steps as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&epoch_stats, params, opt)?;
        history.push(epoch_stats);
    }
    Ok((history, TrainOutcome::Completed))
}
