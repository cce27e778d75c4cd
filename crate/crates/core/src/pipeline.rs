//! Block-streaming drivers: run any controller over a scenario and collect
//! metric series, or process raw input/microphone tracks. The mask-gated
//! controllers reuse the exact per-block update that training records, so
//! evaluation cannot drift from the trained computation.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::{ControllerKind, RunConfig};
use crate::controllers::{fdaf_step, kalman_predict_correct, kalman_step, psd_xx_update, KalmanState, PsdDiag};
use crate::error::{Error, Result};
use crate::filter::FilterState;
use crate::metrics::{nesd_zero_padded, ErleState, MetricSeries};
use crate::neural::{NetworkParameters, NormalizationStats};
use crate::scenario::{build_scenario, scenario_seed, Scenario, ScenarioConfig};
use crate::spectral::{Dft, SlidingFrame, TimeBlock};
use crate::training::{mask_family_block, MaskFamilyState};

/// Network data needed by the inferred-mask controllers.
#[derive(Clone, Copy)]
pub struct NetRef<'a> {
    pub params: &'a NetworkParameters,
    pub stats: &'a NormalizationStats,
}

/// Per-run result of one (controller, scenario) pair.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: MetricSeries,
    /// Mean over nonredundant bins of the applied step mask, per block.
    pub mask_mean_mu: Option<Vec<f64>>,
    /// Mean over nonredundant bins of the applied error mask, per block.
    pub mask_mean_e: Option<Vec<f64>>,
    pub mean_block_seconds: f64,
}

enum ControllerRuntime<'a> {
    Fdaf {
        mu: f64,
        lambda_x: f64,
        delta_reg: f64,
        psi_xx: PsdDiag,
        filter: FilterState,
    },
    Kalman {
        delta_reg: f64,
        ks: KalmanState,
        filter: FilterState,
    },
    MaskFamily {
        cfg: crate::training::MaskFamilyConfig,
        state: MaskFamilyState,
        net: Option<NetRef<'a>>,
    },
}

fn build_runtime<'a>(
    run: &RunConfig,
    kind: ControllerKind,
    net: Option<NetRef<'a>>,
) -> Result<ControllerRuntime<'a>> {
    let m = run.filter.m;
    match kind {
        ControllerKind::Fdaf => Ok(ControllerRuntime::Fdaf {
            mu: run.controller.mu_fdaf,
            lambda_x: run.controller.lambda_x,
            delta_reg: run.filter.delta_reg,
            psi_xx: PsdDiag::zeros(m),
            filter: FilterState::new(m),
        }),
        ControllerKind::Kalman => Ok(ControllerRuntime::Kalman {
            delta_reg: run.filter.delta_reg,
            ks: KalmanState::new(m, run.controller.kalman_a, run.controller.psi_dw_init)?,
            filter: FilterState::new(m),
        }),
        _ => {
            let cfg = run.mask_family(kind)?;
            if cfg.variant.uses_network() && net.is_none() {
                return Err(Error::InvalidConfig(format!(
                    "controller {} needs a checkpoint",
                    kind.name()
                )));
            }
            let p = net.map(|n| n.params.dims().p).unwrap_or(1);
            Ok(ControllerRuntime::MaskFamily {
                cfg,
                state: MaskFamilyState::new(m, p),
                net,
            })
        }
    }
}

struct BlockResult {
    d_hat: TimeBlock,
    w_td: Vec<f64>,
    mask_means: Option<(f64, f64)>,
}

impl ControllerRuntime<'_> {
    /// Advance one block; returns the echo estimate, the current impulse
    /// response estimate and mask diagnostics.
    fn step(
        &mut self,
        dft: &Dft,
        x_frame: &crate::spectral::InputFrame,
        y_block: &TimeBlock,
    ) -> Result<BlockResult> {
        match self {
            ControllerRuntime::Fdaf {
                mu,
                lambda_x,
                delta_reg,
                psi_xx,
                filter,
            } => {
                let x_spec = dft.analyze(x_frame)?;
                let (e_spec, d_hat) = filter.prior_error(dft, &x_spec, y_block)?;
                *psi_xx = psd_xx_update(psi_xx, &x_spec, *lambda_x)?;
                let step = fdaf_step(psi_xx, *mu, *delta_reg)?;
                *filter = filter.update(dft, &step, &x_spec, &e_spec)?;
                Ok(BlockResult {
                    d_hat,
                    w_td: dft.impulse_response(filter.w_hat())?,
                    mask_means: None,
                })
            }
            ControllerRuntime::Kalman {
                delta_reg,
                ks,
                filter,
            } => {
                let m_over_r = dft.m() as f64 / dft.r() as f64;
                let x_spec = dft.analyze(x_frame)?;
                let (e_spec, d_hat) = filter.prior_error(dft, &x_spec, y_block)?;
                let step = kalman_step(ks, &x_spec, m_over_r, *delta_reg)?;
                *filter = filter.update(dft, &step, &x_spec, &e_spec)?;
                *ks = kalman_predict_correct(
                    ks,
                    &step,
                    &x_spec,
                    filter.w_hat(),
                    &e_spec,
                    1.0 / m_over_r,
                )?;
                Ok(BlockResult {
                    d_hat,
                    w_td: dft.impulse_response(filter.w_hat())?,
                    mask_means: None,
                })
            }
            ControllerRuntime::MaskFamily { cfg, state, net } => {
                let net_pair = net.map(|n| (n.params, n.stats));
                let (next, record) = mask_family_block(dft, cfg, net_pair, state, x_frame, y_block)?;
                *state = next;
                let half = dft.m() / 2 + 1;
                let mask_means = cfg.variant.uses_network().then(|| {
                    let mean = |v: &[f64]| v[..half].iter().sum::<f64>() / half as f64;
                    (mean(&record.m_mu_full), mean(&record.m_e_full))
                });
                Ok(BlockResult {
                    d_hat: record.d_hat,
                    w_td: record.w_td,
                    mask_means,
                })
            }
        }
    }
}

/// Run one controller over one scenario, collecting the zero-padded system
/// distance against the full-length true response and the smoothed echo
/// return loss enhancement.
pub fn run_controller(
    run: &RunConfig,
    kind: ControllerKind,
    net: Option<NetRef<'_>>,
    scenario: &Scenario,
    run_id: &str,
) -> Result<RunOutput> {
    let dft = Dft::new(run.filter.m, run.filter.r)?;
    if scenario.meta.block_len != run.filter.r {
        return Err(Error::Data(format!(
            "scenario block length {} does not match R={}",
            scenario.meta.block_len, run.filter.r
        )));
    }
    let mut runtime = build_runtime(run, kind, net)?;
    let mut frame = SlidingFrame::new(run.filter.m, run.filter.r);
    let mut erle = ErleState::new();
    let blocks = scenario.num_blocks();
    let r = run.filter.r;

    let mut nesd_series = Vec::with_capacity(blocks);
    let mut erle_series = Vec::with_capacity(blocks);
    let mut mu_means = Vec::new();
    let mut e_means = Vec::new();
    let mut elapsed = 0.0;

    for block in 0..blocks {
        let x_frame = frame.push(&scenario.x[block * r..(block + 1) * r])?;
        let y_block = TimeBlock::new(scenario.block(&scenario.y, block))?;
        let start = Instant::now();
        let result = runtime.step(&dft, &x_frame, &y_block)?;
        elapsed += start.elapsed().as_secs_f64();

        nesd_series.push(nesd_zero_padded(scenario.active_air(block), &result.w_td)?);
        let d_block = scenario.block(&scenario.d, block);
        erle_series.push(erle.update(&d_block, result.d_hat.as_slice(), run.metrics.lambda_erle)?);
        if let Some((mu, me)) = result.mask_means {
            mu_means.push(mu);
            e_means.push(me);
        }
    }

    let has_masks = !mu_means.is_empty();
    Ok(RunOutput {
        series: MetricSeries {
            run_id: run_id.to_string(),
            block_period_s: r as f64 / scenario.meta.sample_rate as f64,
            nesd_zp_db: nesd_series,
            erle_db: erle_series,
        },
        mask_mean_mu: has_masks.then_some(mu_means),
        mask_mean_e: has_masks.then_some(e_means),
        mean_block_seconds: elapsed / blocks as f64,
    })
}

/// Output of streaming raw tracks through a controller.
#[derive(Debug, Clone)]
pub struct ProcessOutput {
    /// Prior-error track (microphone minus echo estimate).
    pub e: Vec<f64>,
    /// Echo estimate track.
    pub d_hat: Vec<f64>,
    /// Wall time of each block.
    pub block_seconds: Vec<f64>,
}

/// Stream raw input/microphone tracks through a controller. Tracks are
/// truncated to whole blocks.
pub fn process_tracks(
    run: &RunConfig,
    kind: ControllerKind,
    net: Option<NetRef<'_>>,
    x: &[f64],
    y: &[f64],
) -> Result<ProcessOutput> {
    if x.len() != y.len() {
        return Err(Error::Data(format!(
            "track lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let dft = Dft::new(run.filter.m, run.filter.r)?;
    let r = run.filter.r;
    let blocks = x.len() / r;
    if blocks == 0 {
        return Err(Error::Data("input shorter than one block".into()));
    }
    let mut runtime = build_runtime(run, kind, net)?;
    let mut frame = SlidingFrame::new(run.filter.m, r);
    let mut e_track = Vec::with_capacity(blocks * r);
    let mut d_hat_track = Vec::with_capacity(blocks * r);
    let mut block_seconds = Vec::with_capacity(blocks);

    for block in 0..blocks {
        let x_frame = frame.push(&x[block * r..(block + 1) * r])?;
        let y_block = TimeBlock::new(y[block * r..(block + 1) * r].to_vec())?;
        let start = Instant::now();
        let result = runtime.step(&dft, &x_frame, &y_block)?;
        block_seconds.push(start.elapsed().as_secs_f64());
        for (yv, dv) in y_block.as_slice().iter().zip(result.d_hat.as_slice()) {
            e_track.push(yv - dv);
            d_hat_track.push(*dv);
        }
    }
    Ok(ProcessOutput {
        e: e_track,
        d_hat: d_hat_track,
        block_seconds,
    })
}

/// Generate a seed-partitioned scenario corpus in parallel.
pub fn generate_scenarios(
    cfg: &ScenarioConfig,
    base_seed: u64,
    train_split: bool,
    count: usize,
) -> Result<Vec<Scenario>> {
    (0..count)
        .into_par_iter()
        .map(|i| build_scenario(cfg, scenario_seed(base_seed, train_split, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_toy_config() -> RunConfig {
        let mut run = RunConfig::toy();
        // Mild noise so convergence is visible in few blocks.
        run.scenario.snr_speech_lo_db = 30.0;
        run.scenario.snr_speech_hi_db = 30.0;
        run.scenario.snr_noise_lo_db = 40.0;
        run.scenario.snr_noise_hi_db = 40.0;
        run.scenario.duration_s = 10.0;
        run
    }

    #[test]
    fn fdaf_converges_on_quiet_scenario() {
        let run = quiet_toy_config();
        let scenario = build_scenario(&run.scenario, 5).unwrap();
        let out = run_controller(&run, ControllerKind::Fdaf, None, &scenario, "t").unwrap();
        let early = out.series.nesd_zp_db[2];
        let late = out.series.nesd_zp_db[scenario.switch_block - 2];
        assert!(
            late < early - 5.0,
            "no convergence: early {early} dB, late {late} dB"
        );
        // ERLE becomes positive once the echo estimate is useful.
        assert!(out.series.erle_db[scenario.switch_block - 2] > 5.0);
    }

    #[test]
    fn kalman_runs_and_reconverges_after_switch() {
        let mut run = quiet_toy_config();
        run.controller.kalman_a = 0.99; // fast-reconvergence setting
        run.scenario.duration_s = 16.0;
        let scenario = build_scenario(&run.scenario, 6).unwrap();
        let out = run_controller(&run, ControllerKind::Kalman, None, &scenario, "t").unwrap();
        let s = scenario.switch_block;
        let before = out.series.nesd_zp_db[s - 2];
        let just_after = out.series.nesd_zp_db[s + 1];
        let end = *out.series.nesd_zp_db.last().unwrap();
        assert!(just_after > before + 5.0, "switch should disturb the estimate");
        assert!(end < just_after - 5.0, "should reconverge after switch");
    }

    #[test]
    fn ea_fdaf_needs_no_checkpoint_but_dnn_does() {
        let run = quiet_toy_config();
        let scenario = build_scenario(&run.scenario, 7).unwrap();
        assert!(run_controller(&run, ControllerKind::EaFdaf, None, &scenario, "t").is_ok());
        assert!(matches!(
            run_controller(&run, ControllerKind::DnnFdaf, None, &scenario, "t"),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn process_tracks_identity_sanity() {
        let run = quiet_toy_config();
        let scenario = build_scenario(&run.scenario, 8).unwrap();
        let out = process_tracks(&run, ControllerKind::Fdaf, None, &scenario.x, &scenario.y).unwrap();
        assert_eq!(out.e.len(), scenario.num_blocks() * run.filter.r);
        assert_eq!(out.block_seconds.len(), scenario.num_blocks());
        // Silence in, silence out.
        let silent = vec![0.0; run.filter.r * 4];
        let out = process_tracks(&run, ControllerKind::Fdaf, None, &silent, &silent).unwrap();
        assert!(out.e.iter().all(|&v| v == 0.0));
        assert!(out.d_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_across_runs() {
        let run = quiet_toy_config();
        let scenario = build_scenario(&run.scenario, 9).unwrap();
        let a = run_controller(&run, ControllerKind::EaFdaf, None, &scenario, "t").unwrap();
        let b = run_controller(&run, ControllerKind::EaFdaf, None, &scenario, "t").unwrap();
        assert_eq!(a.series.nesd_zp_db, b.series.nesd_zp_db);
        assert_eq!(a.series.erle_db, b.series.erle_db);
    }
}
