//! Real-signal DFT machinery and overlap-save constrained convolution.
//!
//! All selection/padding operators of the block processing chain (front
//! padding of blocks, FIR tap windowing, nonredundant-bin selection) are
//! realized as slice and zero-fill operations on the time- or DFT-domain
//! vectors; no selection matrix is ever materialized.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// One block of R new time-domain samples, full-scale units.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBlock {
    samples: Vec<f64>,
}

impl TimeBlock {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample in time block".into()));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.samples
    }
}

/// Sliding M-sample window of the input signal (overlap M − R with the
/// previous frame).
#[derive(Debug, Clone, PartialEq)]
pub struct InputFrame {
    samples: Vec<f64>,
}

impl InputFrame {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample in input frame".into()));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }
}

/// M-bin DFT-domain vector of a real M-sample frame. Conjugate symmetric up
/// to floating-point noise; bins 0 and M/2 are real.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(bins: Vec<Complex64>) -> Result<Self> {
        if bins.iter().any(|b| !b.re.is_finite() || !b.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite bin in spectrum".into()));
        }
        Ok(Self { bins })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            bins: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    pub(crate) fn from_raw(bins: Vec<Complex64>) -> Self {
        Self { bins }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub(crate) fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.bins
    }

    /// Max deviation from conjugate symmetry, for tests and diagnostics.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let m = self.bins.len();
        let mut worst: f64 = self.bins[0].im.abs();
        if m % 2 == 0 {
            worst = worst.max(self.bins[m / 2].im.abs());
        }
        for k in 1..m / 2 {
            let d = self.bins[k] - self.bins[m - k].conj();
            worst = worst.max(d.norm());
        }
        worst
    }
}

/// DFT context for a fixed block geometry: frame length M, block shift R,
/// modeled filter length L = M − R.
///
/// M must be even so that the nonredundant part of a spectrum is always the
/// first M/2 + 1 bins.
pub struct Dft {
    m: usize,
    r: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Dft {
    pub fn new(m: usize, r: usize) -> Result<Self> {
        if m < 4 || m % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "frame length M must be even and >= 4, got {m}"
            )));
        }
        if r == 0 || r >= m {
            return Err(Error::InvalidConfig(format!(
                "block shift R must satisfy 0 < R < M, got R={r}, M={m}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            m,
            r,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Modeled FIR filter length L = M − R.
    pub fn l(&self) -> usize {
        self.m - self.r
    }

    /// Forward DFT of a complex buffer, in place.
    pub(crate) fn fwd_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.m);
        self.fwd.process(buf);
    }

    /// Unnormalized inverse DFT in place; caller divides by M where needed.
    pub(crate) fn inv_unnormalized_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.m);
        self.inv.process(buf);
    }

    /// DFT of a real M-sample frame.
    pub fn analyze(&self, frame: &InputFrame) -> Result<Spectrum> {
        if frame.len() != self.m {
            return Err(Error::InvalidDimension {
                what: "input frame",
                expected: self.m,
                got: frame.len(),
            });
        }
        let mut buf: Vec<Complex64> = frame
            .as_slice()
            .iter()
            .map(|&s| Complex64::new(s, 0.0))
            .collect();
        self.fwd_in_place(&mut buf);
        Ok(Spectrum::from_raw(buf))
    }

    /// DFT of an R-sample block zero-padded at the front to M samples.
    ///
    /// This is the spectrum convention used for microphone/error blocks: the
    /// block occupies the last R slots of the frame.
    pub fn analyze_zero_padded(&self, block: &TimeBlock) -> Result<Spectrum> {
        if block.len() != self.r {
            return Err(Error::InvalidDimension {
                what: "time block",
                expected: self.r,
                got: block.len(),
            });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        for (slot, &s) in buf[self.m - self.r..].iter_mut().zip(block.as_slice()) {
            *slot = Complex64::new(s, 0.0);
        }
        self.fwd_in_place(&mut buf);
        Ok(Spectrum::from_raw(buf))
    }

    /// Inverse DFT, real part. Round-trips `analyze` within 1e-10.
    pub fn synthesize(&self, spec: &Spectrum) -> Result<Vec<f64>> {
        if spec.len() != self.m {
            return Err(Error::InvalidDimension {
                what: "spectrum",
                expected: self.m,
                got: spec.len(),
            });
        }
        let mut buf = spec.bins().to_vec();
        self.inv_unnormalized_in_place(&mut buf);
        let scale = 1.0 / self.m as f64;
        Ok(buf.iter().map(|c| c.re * scale).collect())
    }

    /// Overlap-save convolution: the last R samples of IDFT(x ⊙ w).
    ///
    /// When `w` satisfies the L-tap FIR constraint these R samples equal the
    /// linear convolution of the underlying time signals.
    pub fn overlap_save_convolve(&self, x_spec: &Spectrum, w: &Spectrum) -> Result<TimeBlock> {
        if x_spec.len() != self.m {
            return Err(Error::InvalidDimension {
                what: "input spectrum",
                expected: self.m,
                got: x_spec.len(),
            });
        }
        if w.len() != self.m {
            return Err(Error::InvalidDimension {
                what: "filter spectrum",
                expected: self.m,
                got: w.len(),
            });
        }
        let mut buf: Vec<Complex64> = x_spec
            .bins()
            .iter()
            .zip(w.bins())
            .map(|(a, b)| a * b)
            .collect();
        self.inv_unnormalized_in_place(&mut buf);
        let scale = 1.0 / self.m as f64;
        let samples = buf[self.m - self.r..]
            .iter()
            .map(|c| c.re * scale)
            .collect();
        Ok(TimeBlock { samples })
    }

    /// Project a frequency response onto the set of zero-padded L-tap FIR
    /// filters: IDFT, zero the last R time-domain taps, DFT. Idempotent.
    pub fn enforce_fir_constraint(&self, w: &Spectrum) -> Result<Spectrum> {
        if w.len() != self.m {
            return Err(Error::InvalidDimension {
                what: "filter spectrum",
                expected: self.m,
                got: w.len(),
            });
        }
        let mut buf = w.bins().to_vec();
        self.inv_unnormalized_in_place(&mut buf);
        let scale = 1.0 / self.m as f64;
        for c in buf[..self.m - self.r].iter_mut() {
            *c *= scale;
        }
        for c in buf[self.m - self.r..].iter_mut() {
            *c = Complex64::new(0.0, 0.0);
        }
        self.fwd_in_place(&mut buf);
        Ok(Spectrum::from_raw(buf))
    }

    /// First L time-domain taps of a frequency response estimate.
    pub fn impulse_response(&self, w: &Spectrum) -> Result<Vec<f64>> {
        let mut td = self.synthesize(w)?;
        td.truncate(self.l());
        Ok(td)
    }
}

/// Sliding input window: drops the oldest R samples, appends the new block.
#[derive(Debug, Clone)]
pub struct SlidingFrame {
    m: usize,
    r: usize,
    buf: Vec<f64>,
}

impl SlidingFrame {
    pub fn new(m: usize, r: usize) -> Self {
        Self {
            m,
            r,
            buf: vec![0.0; m],
        }
    }

    /// Shift in one block of R new samples and return the current frame.
    pub fn push(&mut self, block: &[f64]) -> Result<InputFrame> {
        if block.len() != self.r {
            return Err(Error::InvalidDimension {
                what: "input block",
                expected: self.r,
                got: block.len(),
            });
        }
        self.buf.copy_within(self.r.., 0);
        self.buf[self.m - self.r..].copy_from_slice(block);
        InputFrame::new(self.buf.clone())
    }
}

/// The nonredundant first M/2 + 1 bins of a conjugate-symmetric spectrum.
pub fn select_nonredundant(s: &Spectrum) -> Vec<Complex64> {
    let m = s.len();
    s.bins()[..m / 2 + 1].to_vec()
}

/// Rebuild a full M-bin spectrum from its nonredundant half by conjugate
/// mirroring. Exact inverse of `select_nonredundant` on symmetric input.
pub fn mirror_to_full(half: &[Complex64]) -> Spectrum {
    let m = (half.len() - 1) * 2;
    let mut bins = Vec::with_capacity(m);
    bins.extend_from_slice(half);
    for k in (1..m / 2).rev() {
        bins.push(half[k].conj());
    }
    Spectrum::from_raw(bins)
}

/// Mirror a real half-vector (masks, per-bin gains) to full M length.
pub fn mirror_real_to_full(half: &[f64]) -> Vec<f64> {
    let m = (half.len() - 1) * 2;
    let mut full = Vec::with_capacity(m);
    full.extend_from_slice(half);
    for k in (1..m / 2).rev() {
        full.push(half[k]);
    }
    full
}

/// Fold the adjoint of `mirror_real_to_full` back onto the half vector:
/// interior bins receive contributions from both mirror images.
pub fn fold_full_to_half(full: &[f64]) -> Vec<f64> {
    let m = full.len();
    let h = m / 2 + 1;
    let mut half = vec![0.0; h];
    half[0] = full[0];
    half[m / 2] = full[m / 2];
    for k in 1..m / 2 {
        half[k] = full[k] + full[m - k];
    }
    half
}
