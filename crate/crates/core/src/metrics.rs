//! Evaluation measures: per-block zero-padded normalized system distance
//! and recursively averaged echo return loss enhancement, plus aggregation
//! across runs. Aggregation averages the dB values (the per-run logarithm
//! is taken before the mean).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Floor for the zero-padded system distance.
pub const NESD_FLOOR_DB: f64 = -120.0;

/// Cap for the echo return loss enhancement.
pub const ERLE_CAP_DB: f64 = 80.0;

/// Default ERLE smoothing constant (~6.4 s at 15.625 blocks/s).
pub const DEFAULT_LAMBDA_ERLE: f64 = 0.99;

/// Zero-padded system distance in dB: the L-tap estimate is padded to the
/// full true response length before comparison, so undermodeling shows up
/// as an irreducible floor.
pub fn nesd_zero_padded(w_true_full: &[f64], w_hat_td: &[f64]) -> Result<f64> {
    if w_hat_td.len() > w_true_full.len() {
        return Err(Error::InvalidDimension {
            what: "zero-padded distance",
            expected: w_true_full.len(),
            got: w_hat_td.len(),
        });
    }
    let truth_energy: f64 = w_true_full.iter().map(|v| v * v).sum();
    if truth_energy <= 0.0 {
        return Err(Error::InvalidInput("zero-norm true response".into()));
    }
    let mut err_energy = 0.0;
    for (i, &t) in w_true_full.iter().enumerate() {
        let e = if i < w_hat_td.len() { w_hat_td[i] } else { 0.0 };
        let d = t - e;
        err_energy += d * d;
    }
    Ok((10.0 * (err_energy / truth_energy).log10()).max(NESD_FLOOR_DB))
}

/// Recursive ERLE state: smoothed echo and residual energies.
#[derive(Debug, Clone, Default)]
pub struct ErleState {
    num: f64,
    den: f64,
}

impl ErleState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Push one block of true echo `d` and echo estimate `d_hat`; returns
    /// the smoothed ERLE in dB, capped.
    pub fn update(&mut self, d_block: &[f64], d_hat_block: &[f64], lambda_erle: f64) -> Result<f64> {
        if d_block.len() != d_hat_block.len() {
            return Err(Error::InvalidDimension {
                what: "ERLE blocks",
                expected: d_block.len(),
                got: d_hat_block.len(),
            });
        }
        let e_d: f64 = d_block.iter().map(|v| v * v).sum();
        let e_res: f64 = d_block
            .iter()
            .zip(d_hat_block)
            .map(|(d, dh)| (d - dh) * (d - dh))
            .sum();
        self.num = lambda_erle * self.num + (1.0 - lambda_erle) * e_d;
        self.den = lambda_erle * self.den + (1.0 - lambda_erle) * e_res;
        let ratio = self.num / (self.den + 1e-300);
        Ok((10.0 * ratio.log10()).min(ERLE_CAP_DB))
    }
}

/// Per-block metric series of one run.
#[derive(Debug, Clone)]
pub struct MetricSeries {
    pub run_id: String,
    /// Block period in seconds (R / fs).
    pub block_period_s: f64,
    pub nesd_zp_db: Vec<f64>,
    pub erle_db: Vec<f64>,
}

impl MetricSeries {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "block_index,time_s,nesd_zp_db,erle_db")?;
        for (i, (nesd, erle)) in self.nesd_zp_db.iter().zip(&self.erle_db).enumerate() {
            writeln!(
                f,
                "{},{:.6},{:.6},{:.6}",
                i,
                i as f64 * self.block_period_s,
                nesd,
                erle
            )?;
        }
        Ok(())
    }
}

/// Per-block arithmetic mean of already-logarithmic series.
pub fn aggregate(series: &[Vec<f64>]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no series to aggregate".into()));
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::InvalidInput("ragged series lengths".into()));
    }
    let scale = 1.0 / series.len() as f64;
    let mut mean = vec![0.0; len];
    for s in series {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v * scale;
        }
    }
    Ok(mean)
}
