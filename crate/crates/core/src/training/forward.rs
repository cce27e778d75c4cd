//! The canonical per-block update of the mask-gated controller family,
//! recording every intermediate the backward pass needs. Inference drops
//! the record; training keeps it. One code path serves both, so training
//! and deployment cannot drift apart.

use num_complex::Complex64;

use crate::controllers::{apply_error_mask, dnn_fdaf_step, masked_error_psd, psd_xx_update, PsdDiag};
use crate::error::Result;
use crate::filter::{FilterState, StepSizeDiag};
use crate::neural::{
    compute_features, forward_cached, ForwardCache, NetworkParameters, NormalizationStats,
    RecurrentState,
};
use crate::spectral::{mirror_real_to_full, Dft, InputFrame, Spectrum, TimeBlock};

/// Which masks the network supplies; fixed masks do not receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskVariant {
    /// Both masks fixed at identity (error-aware fixed-step baseline).
    EaFdaf,
    /// Both masks inferred.
    Full,
    /// Error mask fixed at zero, step mask inferred.
    NoErrorMask,
    /// Step mask fixed at identity, error mask inferred.
    NoStepMask,
}

impl MaskVariant {
    pub fn uses_network(self) -> bool {
        !matches!(self, MaskVariant::EaFdaf)
    }

    pub fn step_mask_from_net(self) -> bool {
        matches!(self, MaskVariant::Full | MaskVariant::NoErrorMask)
    }

    pub fn error_mask_from_net(self) -> bool {
        matches!(self, MaskVariant::Full | MaskVariant::NoStepMask)
    }
}

/// Constants of the mask-gated step-size law for one run.
#[derive(Debug, Clone, Copy)]
pub struct MaskFamilyConfig {
    pub variant: MaskVariant,
    pub lambda_x: f64,
    pub lambda_p: f64,
    pub mu_max: f64,
    pub delta_reg: f64,
    /// Floor inside the feature logarithm.
    pub log_eps: f64,
}

/// Mutable per-stream state of the mask-gated controller.
#[derive(Debug, Clone)]
pub struct MaskFamilyState {
    pub filter: FilterState,
    pub psi_xx: PsdDiag,
    pub psi_pp: PsdDiag,
    pub rec: RecurrentState,
}

impl MaskFamilyState {
    pub fn new(m: usize, p: usize) -> Self {
        Self {
            filter: FilterState::new(m),
            psi_xx: PsdDiag::zeros(m),
            psi_pp: PsdDiag::zeros(m),
            rec: RecurrentState::zeros(p),
        }
    }
}

/// Everything one block contributes to the backward pass.
#[derive(Debug, Clone)]
pub struct BlockRecord {
    pub x_spec: Spectrum,
    pub e_spec: Spectrum,
    pub d_hat: TimeBlock,
    /// Input PSD after this block's recursion (enters the denominator).
    pub psi_xx: PsdDiag,
    pub psi_pp_prev: PsdDiag,
    pub psi_pp: PsdDiag,
    /// Masks actually applied, mirrored to full length.
    pub m_mu_full: Vec<f64>,
    pub m_e_full: Vec<f64>,
    /// Step denominator psi_xx + (M/R) psi_pp + delta.
    pub denom: Vec<f64>,
    pub step: StepSizeDiag,
    /// Network intermediates; absent when the variant has no network.
    pub net_cache: Option<ForwardCache>,
    /// First L taps of the updated filter estimate.
    pub w_td: Vec<f64>,
}

/// One block of the mask-gated controller: prior error, features, masks,
/// PSD recursions, step-size, filter update.
pub fn mask_family_block(
    dft: &Dft,
    cfg: &MaskFamilyConfig,
    net: Option<(&NetworkParameters, &NormalizationStats)>,
    state: &MaskFamilyState,
    x_frame: &InputFrame,
    y_block: &TimeBlock,
) -> Result<(MaskFamilyState, BlockRecord)> {
    let m = dft.m();
    let half = m / 2 + 1;
    let m_over_r = m as f64 / dft.r() as f64;

    let x_spec = dft.analyze(x_frame)?;
    let (e_spec, d_hat) = state.filter.prior_error(dft, &x_spec, y_block)?;
    let psi_xx = psd_xx_update(&state.psi_xx, &x_spec, cfg.lambda_x)?;

    let (rec_next, net_cache, m_mu_half, m_e_half) = if cfg.variant.uses_network() {
        let (params, stats) =
            net.expect("network parameters required for an inferred-mask variant");
        let feat = compute_features(&e_spec, &x_spec, stats, cfg.log_eps)?;
        let (masks, rec_next, cache) = forward_cached(params, &state.rec, &feat)?;
        let m_mu = if cfg.variant.step_mask_from_net() {
            masks.m_mu
        } else {
            vec![1.0; half]
        };
        let m_e = if cfg.variant.error_mask_from_net() {
            masks.m_e
        } else {
            vec![0.0; half]
        };
        (rec_next, Some(cache), m_mu, m_e)
    } else {
        (state.rec.clone(), None, vec![1.0; half], vec![1.0; half])
    };

    let psi_pp = masked_error_psd(&state.psi_pp, &e_spec, &m_e_half, cfg.lambda_p)?;
    let step = dnn_fdaf_step(&psi_xx, &psi_pp, &m_mu_half, cfg.mu_max, m_over_r, cfg.delta_reg)?;
    let filter = state.filter.update(dft, &step, &x_spec, &e_spec)?;
    let w_td = dft.impulse_response(filter.w_hat())?;

    let m_mu_full = mirror_real_to_full(&m_mu_half);
    let m_e_full = mirror_real_to_full(&m_e_half);
    let denom: Vec<f64> = psi_xx
        .values()
        .iter()
        .zip(psi_pp.values())
        .map(|(&xx, &pp)| xx + m_over_r * pp + cfg.delta_reg)
        .collect();

    let record = BlockRecord {
        x_spec,
        e_spec,
        d_hat,
        psi_xx: psi_xx.clone(),
        psi_pp_prev: state.psi_pp.clone(),
        psi_pp: psi_pp.clone(),
        m_mu_full,
        m_e_full,
        denom,
        step,
        net_cache,
        w_td,
    };
    let next = MaskFamilyState {
        filter,
        psi_xx,
        psi_pp,
        rec: rec_next,
    };
    Ok((next, record))
}

/// Applied error-masked spectrum of a recorded block (recomputed on demand
/// by the backward pass).
pub fn recorded_p_hat(record: &BlockRecord) -> Vec<Complex64> {
    let half = record.e_spec.len() / 2 + 1;
    let m_e_half = &record.m_e_full[..half];
    apply_error_mask(&record.e_spec, m_e_half)
        .expect("recorded mask is valid")
        .into_inner()
}
