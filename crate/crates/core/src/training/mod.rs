//! End-to-end training of the mask-emitting network: the sequence loss
//! (average logarithmic normalized system distance), exact reverse-mode
//! gradients through the full filter update recursion, the Adam optimizer
//! and the epoch loop.

mod adam;
mod backward;
mod forward;
mod loop_;

pub use adam::{clip_global_norm, AdamParams, OptimizerState};
pub use backward::gradient;
pub use forward::{
    mask_family_block, recorded_p_hat, BlockRecord, MaskFamilyConfig, MaskFamilyState, MaskVariant,
};
pub use loop_::{train, EpochStats, TrainOptions, TrainOutcome};

use crate::error::{Error, Result};
use crate::neural::{NetworkParameters, NormalizationStats};
use crate::scenario::Scenario;
use crate::spectral::{Dft, SlidingFrame, TimeBlock};

/// Default floor inside the logarithm of the loss (-80 dB).
pub const DEFAULT_UPSILON_FLOOR: f64 = 1e-8;

/// Linear normalized system distance between two tap vectors of equal
/// length: ||w - w_hat||^2 / ||w||^2.
pub fn nesd(w_true: &[f64], w_hat_td: &[f64]) -> Result<f64> {
    if w_true.len() != w_hat_td.len() {
        return Err(Error::InvalidDimension {
            what: "system distance",
            expected: w_true.len(),
            got: w_hat_td.len(),
        });
    }
    let truth_energy: f64 = w_true.iter().map(|v| v * v).sum();
    if truth_energy <= 0.0 {
        return Err(Error::InvalidInput("zero-norm true filter".into()));
    }
    let err_energy: f64 = w_true
        .iter()
        .zip(w_hat_td)
        .map(|(t, e)| (t - e) * (t - e))
        .sum();
    Ok(err_energy / truth_energy)
}

/// Scalar pieces of the sequence loss besides the controller constants.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub mask: MaskFamilyConfig,
    /// Floor on the linear distance inside the log.
    pub upsilon_floor: f64,
    /// Number of blocks to run (truncates the scenario).
    pub num_blocks: usize,
    /// Gradient truncation interval in blocks; 0 means full
    /// backpropagation through time.
    pub detach_interval: usize,
}

/// Recorded computation of one training sequence: per-block intermediates
/// plus the loss terms, sufficient for exact reverse-mode differentiation.
#[derive(Debug, Clone)]
pub struct DifferentiableTrace {
    pub records: Vec<BlockRecord>,
    pub upsilons: Vec<f64>,
    /// First-L taps of the active truth per block.
    pub truths: Vec<Vec<f64>>,
    pub loss: f64,
    pub cfg: LossConfig,
}

impl DifferentiableTrace {
    /// Recompute the loss from the recorded per-block distances, in the
    /// same summation order as the forward pass. Bit-identical.
    pub fn replay_loss(&self) -> f64 {
        accumulate_loss(&self.upsilons, self.cfg.upsilon_floor)
    }
}

fn accumulate_loss(upsilons: &[f64], floor: f64) -> f64 {
    let mut sum = 0.0;
    for &u in upsilons {
        sum += 10.0 * u.max(floor).log10();
    }
    sum / upsilons.len() as f64
}

/// Run the mask-gated controller over one scenario for T blocks, recording
/// the trace, and return the average logarithmic system distance.
///
/// The truth entering each block's distance is the first L taps of the
/// active true response (the reachable part of an undermodeled system).
pub fn sequence_loss(
    dft: &Dft,
    scenario: &Scenario,
    net: Option<(&NetworkParameters, &NormalizationStats)>,
    cfg: &LossConfig,
) -> Result<(f64, DifferentiableTrace)> {
    let r = dft.r();
    let l = dft.l();
    if scenario.meta.block_len != r {
        return Err(Error::InvalidConfig(format!(
            "scenario block length {} disagrees with R={r}",
            scenario.meta.block_len
        )));
    }
    let t = cfg.num_blocks.min(scenario.num_blocks());
    if t == 0 {
        return Err(Error::InvalidInput("empty training sequence".into()));
    }
    let p = net.map(|(params, _)| params.dims().p).unwrap_or(1);
    let mut state = MaskFamilyState::new(dft.m(), p);
    let mut frame = SlidingFrame::new(dft.m(), r);
    let mut records = Vec::with_capacity(t);
    let mut upsilons = Vec::with_capacity(t);
    let mut truths = Vec::with_capacity(t);

    for block in 0..t {
        let x_frame = frame.push(&scenario.x[block * r..(block + 1) * r])?;
        let y_block = TimeBlock::new(scenario.block(&scenario.y, block))?;
        let (next, record) = mask_family_block(dft, &cfg.mask, net, &state, &x_frame, &y_block)?;
        let truth = scenario.true_filter_taps(block, l).to_vec();
        let upsilon = nesd(&truth, &record.w_td)?;
        if !upsilon.is_finite() {
            return Err(Error::TrainingDiverged { block });
        }
        upsilons.push(upsilon);
        truths.push(truth);
        records.push(record);
        state = next;
    }

    let loss = accumulate_loss(&upsilons, cfg.upsilon_floor);
    if !loss.is_finite() {
        return Err(Error::TrainingDiverged { block: t - 1 });
    }
    let trace = DifferentiableTrace {
        records,
        upsilons,
        truths,
        loss,
        cfg: *cfg,
    };
    Ok((loss, trace))
}

/// Normalization statistics over the log-power features of a corpus, with
/// the prior-error half approximated by the microphone spectrum.
pub fn estimate_normalization(
    dft: &Dft,
    scenarios: &[Scenario],
    log_eps: f64,
    sigma_floor: f64,
) -> Result<NormalizationStats> {
    let mut acc = crate::neural::NormalizationAccumulator::new(dft.m(), log_eps);
    for scenario in scenarios {
        let r = dft.r();
        if scenario.meta.block_len != r {
            return Err(Error::InvalidConfig(
                "scenario block length disagrees with R".into(),
            ));
        }
        let mut frame = SlidingFrame::new(dft.m(), r);
        for block in 0..scenario.num_blocks() {
            let x_frame = frame.push(&scenario.x[block * r..(block + 1) * r])?;
            let x_spec = dft.analyze(&x_frame)?;
            let y_block = TimeBlock::new(scenario.block(&scenario.y, block))?;
            let y_spec = dft.analyze_zero_padded(&y_block)?;
            acc.push(&y_spec, &x_spec)?;
        }
    }
    acc.finish(sigma_floor)
}
