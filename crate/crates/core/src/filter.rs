//! The frequency-domain adaptive filter: prior-error computation and the
//! step-size-gated update, agnostic to how the step-size diagonal is made.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Dft, Spectrum, TimeBlock};

/// Per-bin step-sizes, the diagonal of the update gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeDiag {
    values: Vec<f64>,
}

impl StepSizeDiag {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (bin, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "step-size at bin {bin} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self { values })
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            values: vec![0.0; m],
        }
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

    /// Max relative deviation between conjugate bins, for invariant checks.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let m = self.values.len();
        let mut worst: f64 = 0.0;
        for k in 1..m / 2 {
            let a = self.values[k];
            let b = self.values[m - k];
            let scale = a.abs().max(b.abs()).max(1e-300);
            worst = worst.max((a - b).abs() / scale);
        }
        worst
    }
}

/// Frequency response estimate plus block counter. The estimate always
/// satisfies the L-tap zero-padded FIR constraint.
#[derive(Debug, Clone)]
pub struct FilterState {
    w_hat: Spectrum,
    block_index: u64,
}

impl FilterState {
    /// Zero initial estimate.
    pub fn new(m: usize) -> Self {
        Self {
            w_hat: Spectrum::zeros(m),
            block_index: 0,
        }
    }

    pub fn w_hat(&self) -> &Spectrum {
        &self.w_hat
    }

    pub fn block_index(&self) -> u64 {
        self.block_index
    }

    /// Echo estimate and prior error against the previous filter estimate.
    ///
    /// Returns `(e_spec, d_hat)` where `d_hat` is the overlap-save
    /// convolution output and `e_spec` the DFT of the zero-front-padded
    /// R-sample error block.
    pub fn prior_error(
        &self,
        dft: &Dft,
        x_spec: &Spectrum,
        y_block: &TimeBlock,
    ) -> Result<(Spectrum, TimeBlock)> {
        if y_block.len() != dft.r() {
            return Err(Error::InvalidDimension {
                what: "microphone block",
                expected: dft.r(),
                got: y_block.len(),
            });
        }
        let d_hat = dft.overlap_save_convolve(x_spec, &self.w_hat)?;
        let err: Vec<f64> = y_block
            .as_slice()
            .iter()
            .zip(d_hat.as_slice())
            .map(|(y, d)| y - d)
            .collect();
        let e_spec = dft.analyze_zero_padded(&TimeBlock::new(err)?)?;
        Ok((e_spec, d_hat))
    }

    /// One gradient step: w += Q3 (step ⊙ conj(x) ⊙ e), then the FIR
    /// constraint holds by construction of Q3. Rejects non-finite inputs so
    /// a corrupted block cannot destroy a long-running stream.
    pub fn update(
        &self,
        dft: &Dft,
        step: &StepSizeDiag,
        x_spec: &Spectrum,
        e_spec: &Spectrum,
    ) -> Result<FilterState> {
        let m = dft.m();
        if step.len() != m || x_spec.len() != m || e_spec.len() != m {
            return Err(Error::InvalidDimension {
                what: "update inputs",
                expected: m,
                got: step.len().min(x_spec.len()).min(e_spec.len()),
            });
        }
        let finite = step.values().iter().all(|v| v.is_finite())
            && x_spec.bins().iter().all(|c| c.re.is_finite() && c.im.is_finite())
            && e_spec.bins().iter().all(|c| c.re.is_finite() && c.im.is_finite());
        if !finite {
            return Err(Error::UpdateRejected {
                block: self.block_index,
            });
        }

        let increment: Vec<Complex64> = step
            .values()
            .iter()
            .zip(x_spec.bins().iter().zip(e_spec.bins()))
            .map(|(&mu, (x, e))| mu * x.conj() * e)
            .collect();
        let projected = dft.enforce_fir_constraint(&Spectrum::from_raw(increment))?;
        let bins: Vec<Complex64> = self
            .w_hat
            .bins()
            .iter()
            .zip(projected.bins())
            .map(|(w, p)| w + p)
            .collect();
        Ok(FilterState {
            w_hat: Spectrum::from_raw(bins),
            block_index: self.block_index + 1,
        })
    }

    /// Replace the estimate, projecting onto the FIR constraint set.
    pub fn with_w_hat(dft: &Dft, w: &Spectrum, block_index: u64) -> Result<Self> {
        Ok(Self {
            w_hat: dft.enforce_fir_constraint(w)?,
            block_index,
        })
    }
}
