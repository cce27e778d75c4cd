//! Step-size controllers: the fixed-step law, the diagonalized DFT-domain
//! Kalman filter, and the mask-gated family driven by network outputs.
//!
//! All step-size quotients are floored by `delta_reg` in the denominator so
//! silent bins cannot blow up the division; the floor is differentiable.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filter::StepSizeDiag;
use crate::spectral::{mirror_real_to_full, Spectrum};

/// Denominator floor used in every step-size quotient.
pub const DEFAULT_DELTA_REG: f64 = 1e-10;

/// Recursive-averaging constant for the input PSD, shared by all variants.
pub const DEFAULT_LAMBDA_X: f64 = 0.5;

/// Per-bin power estimates (diagonal of a PSD matrix). Only diagonals are
/// ever consumed by the step-size laws, so only diagonals are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdDiag {
    values: Vec<f64>,
}

impl PsdDiag {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (bin, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "PSD at bin {bin} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            values: vec![0.0; m],
        }
    }

    pub fn constant(m: usize, v: f64) -> Self {
        Self {
            values: vec![v; m],
        }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// State of the diagonalized Kalman step-size controller.
#[derive(Debug, Clone)]
pub struct KalmanState {
    /// Per-bin estimation uncertainty (diagonal of the mismatch correlation).
    pub psi_dw: PsdDiag,
    /// Per-bin noise PSD estimate.
    pub psi_nn: PsdDiag,
    /// State transition parameter A in (0, 1].
    pub a: f64,
}

impl KalmanState {
    pub fn new(m: usize, a: f64, psi_dw_init: f64) -> Result<Self> {
        if !(0.0 < a && a <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Kalman state transition parameter must be in (0, 1], got {a}"
            )));
        }
        if !(psi_dw_init.is_finite() && psi_dw_init >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial uncertainty must be finite and >= 0, got {psi_dw_init}"
            )));
        }
        Ok(Self {
            psi_dw: PsdDiag::constant(m, psi_dw_init),
            psi_nn: PsdDiag::zeros(m),
            a,
        })
    }
}

/// Network mask outputs on the nonredundant bins, entries in [0, 1].
#[derive(Debug, Clone)]
pub struct MaskPair {
    pub m_mu: Vec<f64>,
    pub m_e: Vec<f64>,
}

impl MaskPair {
    pub fn new(m_mu: Vec<f64>, m_e: Vec<f64>) -> Result<Self> {
        for (bin, &v) in m_mu.iter().chain(m_e.iter()).enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidMask { bin, value: v });
            }
        }
        Ok(Self { m_mu, m_e })
    }

    /// All-ones masks (no gating).
    pub fn identity(half: usize) -> Self {
        Self {
            m_mu: vec![1.0; half],
            m_e: vec![1.0; half],
        }
    }
}

fn validate_mask(mask: &[f64]) -> Result<()> {
    for (bin, &v) in mask.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidMask { bin, value: v });
        }
    }
    Ok(())
}

/// Classical fixed-step law: mu / (psi_xx + delta_reg) per bin.
pub fn fdaf_step(psi_xx: &PsdDiag, mu_fdaf: f64, delta_reg: f64) -> Result<StepSizeDiag> {
    if !(mu_fdaf > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "fixed step-size must be > 0, got {mu_fdaf}"
        )));
    }
    let values = psi_xx
        .values()
        .iter()
        .map(|&p| mu_fdaf / (p + delta_reg))
        .collect();
    Ok(StepSizeDiag::from_raw(values))
}

/// Diagonalized Kalman gain:
/// psi_dw / (|x|^2 psi_dw + (M/R) psi_nn + delta_reg) per bin.
pub fn kalman_step(
    ks: &KalmanState,
    x_spec: &Spectrum,
    m_over_r: f64,
    delta_reg: f64,
) -> Result<StepSizeDiag> {
    if x_spec.len() != ks.psi_dw.len() {
        return Err(Error::InvalidDimension {
            what: "kalman step inputs",
            expected: ks.psi_dw.len(),
            got: x_spec.len(),
        });
    }
    let values = ks
        .psi_dw
        .values()
        .iter()
        .zip(ks.psi_nn.values())
        .zip(x_spec.bins())
        .map(|((&dw, &nn), x)| {
            let den = x.norm_sqr() * dw + m_over_r * nn + delta_reg;
            if den > 0.0 {
                dw / den
            } else {
                0.0
            }
        })
        .collect();
    Ok(StepSizeDiag::from_raw(values))
}

/// One correct/predict cycle of the Kalman uncertainty plus the noise PSD
/// recursion:
///
/// * correct: psi_dw <- (1 - step |x|^2 R/M) psi_dw
/// * predict: psi_dw <- A^2 psi_dw + (1 - A^2) |w_hat|^2
/// * noise:   psi_nn <- 0.5 psi_nn + 0.5 |e|^2 (R/M)
pub fn kalman_predict_correct(
    ks: &KalmanState,
    step: &StepSizeDiag,
    x_spec: &Spectrum,
    w_hat: &Spectrum,
    e_spec: &Spectrum,
    r_over_m: f64,
) -> Result<KalmanState> {
    let m = ks.psi_dw.len();
    if step.len() != m || x_spec.len() != m || w_hat.len() != m || e_spec.len() != m {
        return Err(Error::InvalidDimension {
            what: "kalman recursion inputs",
            expected: m,
            got: step.len().min(x_spec.len()).min(w_hat.len()).min(e_spec.len()),
        });
    }
    let a_sq = ks.a * ks.a;
    let psi_dw = ks
        .psi_dw
        .values()
        .iter()
        .zip(step.values())
        .zip(x_spec.bins().iter().zip(w_hat.bins()))
        .map(|((&dw, &mu), (x, w))| {
            let corrected = (1.0 - mu * x.norm_sqr() * r_over_m) * dw;
            a_sq * corrected + (1.0 - a_sq) * w.norm_sqr()
        })
        .collect();
    let psi_nn = ks
        .psi_nn
        .values()
        .iter()
        .zip(e_spec.bins())
        .map(|(&nn, e)| 0.5 * nn + 0.5 * e.norm_sqr() * r_over_m)
        .collect();
    Ok(KalmanState {
        psi_dw: PsdDiag::from_raw(psi_dw),
        psi_nn: PsdDiag::from_raw(psi_nn),
        a: ks.a,
    })
}

/// Input PSD recursion: lambda_x prev + (1 - lambda_x) |x|^2 per bin.
pub fn psd_xx_update(prev: &PsdDiag, x_spec: &Spectrum, lambda_x: f64) -> Result<PsdDiag> {
    if x_spec.len() != prev.len() {
        return Err(Error::InvalidDimension {
            what: "input PSD update",
            expected: prev.len(),
            got: x_spec.len(),
        });
    }
    if !(0.0..1.0).contains(&lambda_x) {
        return Err(Error::InvalidConfig(format!(
            "lambda_x must be in [0, 1), got {lambda_x}"
        )));
    }
    let values = prev
        .values()
        .iter()
        .zip(x_spec.bins())
        .map(|(&p, x)| lambda_x * p + (1.0 - lambda_x) * x.norm_sqr())
        .collect();
    Ok(PsdDiag::from_raw(values))
}

/// Masked-error PSD recursion: the error spectrum is gated by the mask
/// (mirrored to full length) before recursive averaging.
pub fn masked_error_psd(
    prev: &PsdDiag,
    e_spec: &Spectrum,
    m_e: &[f64],
    lambda_p: f64,
) -> Result<PsdDiag> {
    validate_mask(m_e)?;
    let m = prev.len();
    if e_spec.len() != m {
        return Err(Error::InvalidDimension {
            what: "masked error PSD",
            expected: m,
            got: e_spec.len(),
        });
    }
    if m_e.len() != m / 2 + 1 {
        return Err(Error::InvalidDimension {
            what: "error mask",
            expected: m / 2 + 1,
            got: m_e.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda_p) {
        return Err(Error::InvalidConfig(format!(
            "lambda_p must be in [0, 1], got {lambda_p}"
        )));
    }
    let mask_full = mirror_real_to_full(m_e);
    let values = prev
        .values()
        .iter()
        .zip(mask_full.iter().zip(e_spec.bins()))
        .map(|(&p, (&g, e))| {
            let gated = g * g * e.norm_sqr();
            lambda_p * p + (1.0 - lambda_p) * gated
        })
        .collect();
    Ok(PsdDiag::from_raw(values))
}

/// Mask-gated step-size:
/// mu_max * m_mu / (psi_xx + (M/R) psi_pp + delta_reg) per bin.
///
/// The error-aware fixed baseline is this law with both masks at identity,
/// lambda_p = 0.5 and mu_max = 0.75.
pub fn dnn_fdaf_step(
    psi_xx: &PsdDiag,
    psi_pp: &PsdDiag,
    m_mu: &[f64],
    mu_max: f64,
    m_over_r: f64,
    delta_reg: f64,
) -> Result<StepSizeDiag> {
    validate_mask(m_mu)?;
    let m = psi_xx.len();
    if psi_pp.len() != m {
        return Err(Error::InvalidDimension {
            what: "step-size PSDs",
            expected: m,
            got: psi_pp.len(),
        });
    }
    if m_mu.len() != m / 2 + 1 {
        return Err(Error::InvalidDimension {
            what: "step mask",
            expected: m / 2 + 1,
            got: m_mu.len(),
        });
    }
    if !(mu_max > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "mu_max must be > 0, got {mu_max}"
        )));
    }
    let mask_full = mirror_real_to_full(m_mu);
    let values = psi_xx
        .values()
        .iter()
        .zip(psi_pp.values())
        .zip(mask_full.iter())
        .map(|((&xx, &pp), &g)| mu_max * g / (xx + m_over_r * pp + delta_reg))
        .collect();
    Ok(StepSizeDiag::from_raw(values))
}

/// Apply the error mask to a spectrum: p_hat = mirror(m_e) ⊙ e.
pub fn apply_error_mask(e_spec: &Spectrum, m_e: &[f64]) -> Result<Spectrum> {
    validate_mask(m_e)?;
    let mask_full = mirror_real_to_full(m_e);
    if mask_full.len() != e_spec.len() {
        return Err(Error::InvalidDimension {
            what: "error mask",
            expected: e_spec.len(),
            got: mask_full.len(),
        });
    }
    let bins: Vec<Complex64> = mask_full
        .iter()
        .zip(e_spec.bins())
        .map(|(&g, e)| g * e)
        .collect();
    Ok(Spectrum::from_raw(bins))
}
