//! Synthetic training/evaluation scenarios: an input signal convolved with
//! a long true impulse response, two-component additive noise at randomized
//! SNRs, and an abrupt response/signal switch at a randomized block boundary.
//!
//! Everything is pure given (config, seed); scenario generation is the
//! stand-in for speech corpora and measured impulse responses, with WAV
//! export/import for users who have real data.

use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wav::{read_wav, write_wav, SampleFormat};

/// Source signal families for the synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Unit-variance white Gaussian noise.
    White,
    /// First-order autoregressive noise (pole 0.9) gated by a random slow
    /// envelope with pauses; non-white and non-stationary by construction.
    Ar1Modulated,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sample_rate: u32,
    /// Modeled filter length L.
    pub filter_len: usize,
    /// Block shift R.
    pub block_len: usize,
    /// True impulse response length K > L.
    pub air_len: usize,
    pub duration_s: f64,
    pub switch_lo_s: f64,
    pub switch_hi_s: f64,
    pub snr_speech_lo_db: f64,
    pub snr_speech_hi_db: f64,
    pub snr_noise_lo_db: f64,
    pub snr_noise_hi_db: f64,
    pub t60_lo_s: f64,
    pub t60_hi_s: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    /// Full-scale defaults: 16 kHz, L = 2048, R = 1024, K = 4L.
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            filter_len: 2048,
            block_len: 1024,
            air_len: 8192,
            duration_s: 16.0,
            switch_lo_s: 7.2,
            switch_hi_s: 8.8,
            snr_speech_lo_db: -10.0,
            snr_speech_hi_db: 10.0,
            snr_noise_lo_db: 25.0,
            snr_noise_hi_db: 35.0,
            t60_lo_s: 0.12,
            t60_hi_s: 0.78,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Desk-scale configuration with the block rate of the full-scale setup
    /// (15.625 blocks/s), so switch windows and time constants carry over.
    pub fn toy() -> Self {
        Self {
            sample_rate: 2000,
            filter_len: 128,
            block_len: 128,
            air_len: 512,
            ..Self::default()
        }
    }

    pub fn frame_len(&self) -> usize {
        self.filter_len + self.block_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.air_len <= self.filter_len {
            return Err(Error::InvalidConfig(format!(
                "true response length K={} must exceed modeled length L={}",
                self.air_len, self.filter_len
            )));
        }
        if !(self.switch_lo_s < self.switch_hi_s && self.switch_hi_s < self.duration_s) {
            return Err(Error::InvalidConfig(format!(
                "switch window [{}, {}] must sit inside the duration {}",
                self.switch_lo_s, self.switch_hi_s, self.duration_s
            )));
        }
        if self.snr_speech_lo_db > self.snr_speech_hi_db
            || self.snr_noise_lo_db > self.snr_noise_hi_db
        {
            return Err(Error::InvalidConfig("empty SNR range".into()));
        }
        if !(self.t60_lo_s > 0.0 && self.t60_lo_s <= self.t60_hi_s) {
            return Err(Error::InvalidConfig("invalid T60 range".into()));
        }
        if self.sample_rate == 0 || self.block_len == 0 || self.filter_len == 0 {
            return Err(Error::InvalidConfig("zero geometry field".into()));
        }
        Ok(())
    }
}

/// Metadata stored next to the exported WAV tracks.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioMeta {
    pub seed: u64,
    pub sample_rate: u32,
    pub block_len: usize,
    pub air_len: usize,
    pub switch_block: usize,
    pub snr_speech_db: [f64; 2],
    pub snr_noise_db: [f64; 2],
    pub t60_s: [f64; 2],
}

/// One synthesized experiment: tracks, truths, switch point.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub x: Vec<f64>,
    /// Noise-free observation component (full K-tap convolution).
    pub d: Vec<f64>,
    pub n: Vec<f64>,
    pub y: Vec<f64>,
    pub air_pre: Vec<f64>,
    pub air_post: Vec<f64>,
    /// First block index that uses the post-switch truth.
    pub switch_block: usize,
    pub meta: ScenarioMeta,
}

impl Scenario {
    pub fn num_blocks(&self) -> usize {
        self.x.len() / self.meta.block_len
    }

    /// Active true impulse response for a given block.
    pub fn active_air(&self, block: usize) -> &[f64] {
        if block < self.switch_block {
            &self.air_pre
        } else {
            &self.air_post
        }
    }

    /// First L taps of the active truth (the part an L-tap model can reach).
    pub fn true_filter_taps(&self, block: usize, l: usize) -> &[f64] {
        &self.active_air(block)[..l]
    }

    pub fn block(&self, track: &[f64], block: usize) -> Vec<f64> {
        let r = self.meta.block_len;
        track[block * r..(block + 1) * r].to_vec()
    }
}

/// SplitMix64; used to derive independent sub-seeds from one scenario seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TRAIN_STREAM: u64 = 0x7452_41_49_4e;
const TEST_STREAM: u64 = 0x7445_53_54;

/// Seed for the i-th scenario of a split. Distinct (split, index) pairs map
/// to distinct seeds because SplitMix64 is a bijection on u64.
pub fn scenario_seed(base: u64, train_split: bool, index: u64) -> u64 {
    let stream = if train_split { TRAIN_STREAM } else { TEST_STREAM };
    splitmix64(splitmix64(base ^ stream).wrapping_add(index))
}

/// Synthetic impulse response: white noise shaped by an exponential decay
/// envelope with a short onset delay, normalized to unit energy.
pub fn synth_air(k: usize, t60_s: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    assert!(k >= 1 && t60_s > 0.0);
    let mut rng = StdRng::seed_from_u64(seed);
    let onset = rng.random_range(8..=32usize).min(k.saturating_sub(1));
    let t60_samples = t60_s * sample_rate as f64;
    let decay = 3.0 * std::f64::consts::LN_10 / t60_samples;
    let mut h = vec![0.0; k];
    for (i, tap) in h.iter_mut().enumerate().skip(onset) {
        let g: f64 = StandardNormal.sample(&mut rng);
        let t = (i - onset) as f64;
        *tap = g * (-decay * t).exp();
    }
    let energy: f64 = h.iter().map(|v| v * v).sum();
    if energy > 0.0 {
        let scale = 1.0 / energy.sqrt();
        for tap in &mut h {
            *tap *= scale;
        }
    }
    h
}

/// Synthetic source track of `duration_s` seconds.
pub fn synth_source(kind: SourceKind, duration_s: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    assert!(duration_s > 0.0);
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut rng = StdRng::seed_from_u64(seed);
    match kind {
        SourceKind::White => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        SourceKind::Ar1Modulated => {
            // AR(1) core, pole 0.9.
            let mut s = vec![0.0; n];
            let mut prev = 0.0;
            for v in &mut s {
                let w: f64 = StandardNormal.sample(&mut rng);
                prev = 0.9 * prev + w;
                *v = prev;
            }
            // Slow half-wave-rectified envelope: 3 random tones in 0.5-4 Hz.
            let tones: Vec<(f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.5..4.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            for (i, v) in s.iter_mut().enumerate() {
                let t = i as f64 / sample_rate as f64;
                let env: f64 = tones
                    .iter()
                    .map(|&(f, ph)| (std::f64::consts::TAU * f * t + ph).sin())
                    .sum::<f64>()
                    / 3.0;
                *v *= env.max(0.0);
            }
            // Random pauses: zero 0.25-1.0 s chunks with probability 0.2.
            let mut i = 0;
            while i < n {
                let chunk = rng.random_range(
                    (sample_rate as usize / 4)..=(sample_rate as usize).max(1),
                );
                let end = (i + chunk).min(n);
                if rng.random_range(0.0..1.0) < 0.2 {
                    for v in &mut s[i..end] {
                        *v = 0.0;
                    }
                }
                i = end;
            }
            // Unit RMS over the whole track.
            let energy: f64 = s.iter().map(|v| v * v).sum();
            if energy > 0.0 {
                let scale = (n as f64 / energy).sqrt();
                for v in &mut s {
                    *v *= scale;
                }
            }
            s
        }
    }
}

/// Scale `noise` so that the clean/noise energy ratio equals `snr_db`.
pub fn mix_at_snr(clean_ref: &[f64], noise: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    let e_clean: f64 = clean_ref.iter().map(|v| v * v).sum();
    let e_noise: f64 = noise.iter().map(|v| v * v).sum();
    if e_clean <= 0.0 || e_noise <= 0.0 {
        return Err(Error::InvalidInput(
            "zero-energy input to SNR mixing".into(),
        ));
    }
    let scale = (e_clean / (e_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    Ok(noise.iter().map(|v| v * scale).collect())
}

/// Full K-tap time-domain convolution, truncated to the input length.
fn convolve_full(x: &[f64], h: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for (k, &hk) in h.iter().enumerate() {
        if hk == 0.0 {
            continue;
        }
        for i in k..n {
            out[i] += hk * x[i - k];
        }
    }
    out
}

/// Draw a nonstationary source, re-seeding on the (vanishingly unlikely)
/// event that every chunk of a segment was paused.
fn draw_active_source(duration_s: f64, sample_rate: u32, mut seed: u64, range: std::ops::Range<usize>) -> Vec<f64> {
    loop {
        let s = synth_source(SourceKind::Ar1Modulated, duration_s, sample_rate, seed);
        let energy: f64 = s[range.clone()].iter().map(|v| v * v).sum();
        if energy > 0.0 {
            return s;
        }
        seed = splitmix64(seed);
    }
}

/// Build one scenario: two independent (source, response, noise, SNR)
/// draws spliced at a block boundary drawn uniformly inside the switch
/// window.
pub fn build_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let fs = cfg.sample_rate;
    let r = cfg.block_len;
    let n_blocks = ((cfg.duration_s * fs as f64).round() as usize) / r;
    let n = n_blocks * r;
    if n_blocks < 2 {
        return Err(Error::InvalidConfig("duration shorter than two blocks".into()));
    }

    let mut rng = StdRng::seed_from_u64(splitmix64(seed ^ 0x5ce0));
    let block_lo = (cfg.switch_lo_s * fs as f64 / r as f64).ceil() as usize;
    let block_hi = (cfg.switch_hi_s * fs as f64 / r as f64).floor() as usize;
    let (block_lo, block_hi) = (block_lo.max(1), block_hi.min(n_blocks - 1));
    if block_lo > block_hi {
        return Err(Error::InvalidConfig(
            "switch window contains no block boundary".into(),
        ));
    }
    let switch_block = rng.random_range(block_lo..=block_hi);
    let s = switch_block * r;

    let t60_pre = rng.random_range(cfg.t60_lo_s..=cfg.t60_hi_s);
    let t60_post = rng.random_range(cfg.t60_lo_s..=cfg.t60_hi_s);
    let snr_speech =
        [rng.random_range(cfg.snr_speech_lo_db..=cfg.snr_speech_hi_db),
         rng.random_range(cfg.snr_speech_lo_db..=cfg.snr_speech_hi_db)];
    let snr_noise =
        [rng.random_range(cfg.snr_noise_lo_db..=cfg.snr_noise_hi_db),
         rng.random_range(cfg.snr_noise_lo_db..=cfg.snr_noise_hi_db)];

    let sub = |tag: u64| splitmix64(seed ^ tag);
    let air_pre = synth_air(cfg.air_len, t60_pre, fs, sub(0xA1));
    let air_post = synth_air(cfg.air_len, t60_post, fs, sub(0xA2));

    let seg_pre = 0..s;
    let seg_post = s..n;
    let x_pre = draw_active_source(cfg.duration_s, fs, sub(0x11), seg_pre.clone());
    let x_post = draw_active_source(cfg.duration_s, fs, sub(0x12), seg_post.clone());
    let ns_pre = draw_active_source(cfg.duration_s, fs, sub(0x21), seg_pre.clone());
    let ns_post = draw_active_source(cfg.duration_s, fs, sub(0x22), seg_post.clone());
    let nw_pre = synth_source(SourceKind::White, cfg.duration_s, fs, sub(0x31));
    let nw_post = synth_source(SourceKind::White, cfg.duration_s, fs, sub(0x32));

    let d_pre = convolve_full(&x_pre[..n], &air_pre);
    let d_post = convolve_full(&x_post[..n], &air_post);

    let mut x = vec![0.0; n];
    x[seg_pre.clone()].copy_from_slice(&x_pre[seg_pre.clone()]);
    x[seg_post.clone()].copy_from_slice(&x_post[seg_post.clone()]);
    let mut d = vec![0.0; n];
    d[seg_pre.clone()].copy_from_slice(&d_pre[seg_pre.clone()]);
    d[seg_post.clone()].copy_from_slice(&d_post[seg_post.clone()]);

    // Noise: speech-like component + stationary white component, each scaled
    // against the noise-free observation energy of its own segment.
    let mut noise = vec![0.0; n];
    for (seg, ns, nw, snr_s, snr_w) in [
        (seg_pre.clone(), &ns_pre, &nw_pre, snr_speech[0], snr_noise[0]),
        (seg_post.clone(), &ns_post, &nw_post, snr_speech[1], snr_noise[1]),
    ] {
        let d_seg = &d[seg.clone()];
        let speech = mix_at_snr(d_seg, &ns[seg.clone()], snr_s)?;
        let white = mix_at_snr(d_seg, &nw[seg.clone()], snr_w)?;
        for ((slot, a), b) in noise[seg].iter_mut().zip(speech).zip(white) {
            *slot = a + b;
        }
    }

    let y: Vec<f64> = d.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let meta = ScenarioMeta {
        seed,
        sample_rate: fs,
        block_len: r,
        air_len: cfg.air_len,
        switch_block,
        snr_speech_db: snr_speech,
        snr_noise_db: snr_noise,
        t60_s: [t60_pre, t60_post],
    };
    Ok(Scenario {
        x,
        d,
        n: noise,
        y,
        air_pre,
        air_post,
        switch_block,
        meta,
    })
}

fn write_f64_le(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn read_f64_le(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Data(format!(
            "{}: length not a multiple of 8",
            path.display()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Write a scenario as a directory of WAV tracks plus metadata and the true
/// impulse responses as raw 64-bit little-endian binary.
pub fn export_scenario(dir: &Path, scenario: &Scenario) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let fs = scenario.meta.sample_rate;
    write_wav(&dir.join("x.wav"), &scenario.x, fs, SampleFormat::Float32)?;
    write_wav(&dir.join("y.wav"), &scenario.y, fs, SampleFormat::Float32)?;
    write_wav(&dir.join("n.wav"), &scenario.n, fs, SampleFormat::Float32)?;
    write_f64_le(&dir.join("air_pre.f64"), &scenario.air_pre)?;
    write_f64_le(&dir.join("air_post.f64"), &scenario.air_post)?;
    let meta = toml::to_string(&scenario.meta)
        .map_err(|e| Error::Data(format!("metadata serialization: {e}")))?;
    std::fs::write(dir.join("meta.toml"), meta)?;
    Ok(())
}

/// Read a scenario directory written by `export_scenario`.
pub fn import_scenario(dir: &Path) -> Result<Scenario> {
    let meta_text = std::fs::read_to_string(dir.join("meta.toml"))?;
    let meta: ScenarioMeta = toml::from_str(&meta_text)
        .map_err(|e| Error::Data(format!("{}: {e}", dir.join("meta.toml").display())))?;
    let (x, fs_x) = read_wav(&dir.join("x.wav"))?;
    let (y, fs_y) = read_wav(&dir.join("y.wav"))?;
    let (n, fs_n) = read_wav(&dir.join("n.wav"))?;
    if fs_x != meta.sample_rate || fs_y != meta.sample_rate || fs_n != meta.sample_rate {
        return Err(Error::Data("track sample rates disagree with metadata".into()));
    }
    if x.len() != y.len() || x.len() != n.len() {
        return Err(Error::Data("track lengths disagree".into()));
    }
    let air_pre = read_f64_le(&dir.join("air_pre.f64"))?;
    let air_post = read_f64_le(&dir.join("air_post.f64"))?;
    if air_pre.len() != meta.air_len || air_post.len() != meta.air_len {
        return Err(Error::Data("impulse response length disagrees with metadata".into()));
    }
    let d: Vec<f64> = y.iter().zip(&n).map(|(a, b)| a - b).collect();
    Ok(Scenario {
        x,
        d,
        n,
        y,
        air_pre,
        air_post,
        switch_block: meta.switch_block,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(ratio: f64) -> f64 {
        10.0 * ratio.log10()
    }

    fn energy(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    #[test]
    fn air_is_unit_energy_and_deterministic() {
        let a = synth_air(2048, 0.3, 16000, 7);
        let b = synth_air(2048, 0.3, 16000, 7);
        let c = synth_air(2048, 0.3, 16000, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((energy(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn air_decay_matches_envelope_slope() {
        // Windows of t60/3 samples should drop ~20 dB each.
        let fs = 16000;
        let t60 = 0.3;
        let k = 4800; // one full t60
        let h = synth_air(k, t60, fs, 3);
        let onset = h.iter().position(|&v| v != 0.0).unwrap();
        let window = (t60 * fs as f64 / 3.0) as usize;
        let mut levels = Vec::new();
        let mut start = onset;
        while start + window <= k {
            levels.push(db(energy(&h[start..start + window]).max(1e-300)));
            start += window;
        }
        assert!(levels.len() >= 2);
        for pair in levels.windows(2) {
            let drop = pair[0] - pair[1];
            assert!(
                (drop - 20.0).abs() < 1.0,
                "window drop {drop} dB, expected 20 +- 1"
            );
        }
    }

    #[test]
    fn air_flat_envelope_limit() {
        let h = synth_air(4096, 1e9, 16000, 5);
        let half = 2048;
        let e1 = energy(&h[..half]);
        let e2 = energy(&h[half..]);
        let ratio = e1 / e2;
        assert!(ratio > 0.8 && ratio < 1.25, "halves ratio {ratio}");
    }

    #[test]
    fn white_source_statistics() {
        let s = synth_source(SourceKind::White, 1.0, 16000, 11);
        assert_eq!(s.len(), 16000);
        let var = energy(&s) / s.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn ar1_source_is_correlated_and_deterministic() {
        let s = synth_source(SourceKind::Ar1Modulated, 4.0, 16000, 13);
        let t = synth_source(SourceKind::Ar1Modulated, 4.0, 16000, 13);
        assert_eq!(s, t);
        // Autocorrelation over active samples.
        let mut lag0 = 0.0;
        let mut lag1 = 0.0;
        let mut count = 0usize;
        for w in s.windows(2) {
            if w[0] != 0.0 && w[1] != 0.0 {
                lag0 += w[0] * w[0];
                lag1 += w[0] * w[1];
                count += 1;
            }
        }
        assert!(count > 1000);
        assert!(lag1 > 0.8 * lag0, "lag1/lag0 = {}", lag1 / lag0);
    }

    #[test]
    fn mix_at_snr_definitions() {
        let clean = vec![1.0; 100];
        let noise = vec![0.5; 100];
        let zero_db = mix_at_snr(&clean, &noise, 0.0).unwrap();
        assert!((energy(&zero_db) - energy(&clean)).abs() < 1e-9);
        let twenty = mix_at_snr(&clean, &noise, 20.0).unwrap();
        assert!((energy(&twenty) - energy(&clean) / 100.0).abs() < 1e-9);
        // Homogeneity: doubling the clean reference quadruples noise energy.
        let clean2: Vec<f64> = clean.iter().map(|v| v * 2.0).collect();
        let scaled2 = mix_at_snr(&clean2, &noise, 0.0).unwrap();
        assert!((energy(&scaled2) - 4.0 * energy(&zero_db)).abs() < 1e-9);
        assert!(mix_at_snr(&[0.0; 4], &noise, 0.0).is_err());
    }

    #[test]
    fn scenario_is_deterministic_and_consistent() {
        let cfg = ScenarioConfig::toy();
        let a = build_scenario(&cfg, 42).unwrap();
        let b = build_scenario(&cfg, 42).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.switch_block, b.switch_block);
        // Observation identity y = d + n, sample-exact.
        for ((y, d), n) in a.y.iter().zip(&a.d).zip(&a.n) {
            assert_eq!(*y, d + n);
        }
        // Switch inside the window.
        let t = a.switch_block as f64 * cfg.block_len as f64 / cfg.sample_rate as f64;
        assert!((cfg.switch_lo_s..=cfg.switch_hi_s).contains(&t), "switch at {t}");
    }

    #[test]
    fn scenario_realizes_drawn_snrs() {
        let cfg = ScenarioConfig::toy();
        let sc = build_scenario(&cfg, 3).unwrap();
        let s = sc.switch_block * cfg.block_len;
        // Total noise energy per segment against drawn component SNRs.
        for (seg, snr_s, snr_w) in [
            (0..s, sc.meta.snr_speech_db[0], sc.meta.snr_noise_db[0]),
            (s..sc.x.len(), sc.meta.snr_speech_db[1], sc.meta.snr_noise_db[1]),
        ] {
            let e_d = energy(&sc.d[seg.clone()]);
            let e_n = energy(&sc.n[seg.clone()]);
            // Components are independent draws; cross terms perturb the sum.
            let expected = e_d * (10f64.powf(-snr_s / 10.0) + 10f64.powf(-snr_w / 10.0));
            let achieved_db = db(e_n / e_d);
            let expected_db = db(expected / e_d);
            assert!(
                (achieved_db - expected_db).abs() < 0.1,
                "noise level {achieved_db} dB vs {expected_db} dB"
            );
        }
    }

    #[test]
    fn undermodeling_tail_energy_is_positive() {
        let cfg = ScenarioConfig::toy();
        for seed in 0..5 {
            let sc = build_scenario(&cfg, seed).unwrap();
            for air in [&sc.air_pre, &sc.air_post] {
                let tail = energy(&air[cfg.filter_len..]);
                assert!(tail > 0.0);
            }
        }
    }

    #[test]
    fn export_import_round_trip() {
        let cfg = ScenarioConfig::toy();
        let sc = build_scenario(&cfg, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario_009");
        export_scenario(&path, &sc).unwrap();
        let back = import_scenario(&path).unwrap();
        assert_eq!(back.meta, sc.meta);
        assert_eq!(back.air_pre, sc.air_pre);
        assert_eq!(back.switch_block, sc.switch_block);
        // Tracks go through f32: compare within f32 resolution.
        for (a, b) in sc.y.iter().zip(&back.y) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn seed_partition_is_disjoint() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..1000u64 {
            assert!(seen.insert(scenario_seed(1, true, i)));
            assert!(seen.insert(scenario_seed(1, false, i)));
        }
    }
}
