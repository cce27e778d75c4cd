//! Shared helpers for the integration test suites: hand-built scenarios
//! for tiny geometries and a dense-matrix reference implementation of the
//! block processing chain (DFT and selection matrices materialized).

#![allow(dead_code)]

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use fdaf_core::scenario::{Scenario, ScenarioMeta};

/// Decaying random impulse response with a 2-sample onset, so the first L
/// taps are nonzero for any L >= 3 (tiny geometries would otherwise risk a
/// zero-norm truncated truth).
pub fn tiny_air(k: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut h = vec![0.0; k];
    for (i, tap) in h.iter_mut().enumerate().skip(2) {
        let g: f64 = StandardNormal.sample(&mut rng);
        *tap = g * (-(i as f64) / (k as f64 / 3.0)).exp();
    }
    let energy: f64 = h.iter().map(|v| v * v).sum();
    let scale = 1.0 / energy.sqrt();
    h.iter_mut().for_each(|v| *v *= scale);
    h
}

/// Random scenario for arbitrary tiny geometries (no switch), bypassing
/// the duration/switch-window constraints of the generator.
pub fn tiny_scenario(l: usize, r: usize, k: usize, blocks: usize, snr_db: f64, seed: u64) -> Scenario {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = blocks * r;
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let air = tiny_air(k, seed ^ 0xA1);
    let mut d = vec![0.0; n];
    for (tap, &h) in air.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        for i in tap..n {
            d[i] += h * x[i - tap];
        }
    }
    let noise_raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let e_d: f64 = d.iter().map(|v| v * v).sum();
    let e_n: f64 = noise_raw.iter().map(|v| v * v).sum();
    let scale = (e_d / (e_n * 10f64.powf(snr_db / 10.0))).sqrt();
    let noise: Vec<f64> = noise_raw.iter().map(|v| v * scale).collect();
    let y: Vec<f64> = d.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let _ = l;
    Scenario {
        x,
        d,
        n: noise,
        y,
        air_pre: air.clone(),
        air_post: air,
        switch_block: blocks + 1,
        meta: ScenarioMeta {
            seed,
            sample_rate: 1000,
            block_len: r,
            air_len: k,
            switch_block: blocks + 1,
            snr_speech_db: [snr_db, snr_db],
            snr_noise_db: [snr_db, snr_db],
            t60_s: [0.05, 0.05],
        },
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone)]
pub struct Cmat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl Cmat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..self.cols {
                    acc += self.at(i, j) * x[j];
                }
                acc
            })
            .collect()
    }

    pub fn matmul(&self, other: &Cmat) -> Cmat {
        assert_eq!(self.cols, other.rows);
        let mut out = Cmat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Cmat {
        Cmat::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }
}

/// DFT matrix F[k, n] = exp(-2 pi i k n / M).
pub fn dft_matrix(m: usize) -> Cmat {
    Cmat::from_fn(m, m, |k, n| {
        let phase = -2.0 * std::f64::consts::PI * (k * n) as f64 / m as f64;
        Complex64::new(phase.cos(), phase.sin())
    })
}

/// Inverse DFT matrix (1/M) F^H.
pub fn idft_matrix(m: usize) -> Cmat {
    Cmat::from_fn(m, m, |k, n| {
        let phase = 2.0 * std::f64::consts::PI * (k * n) as f64 / m as f64;
        Complex64::new(phase.cos(), phase.sin()) / m as f64
    })
}

/// Front-padding operator: M x R, [0; I_R].
pub fn q1(m: usize, r: usize) -> Cmat {
    Cmat::from_fn(m, r, |i, j| {
        if i == m - r + j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Tap zero-padding operator: M x L, [I_L; 0].
pub fn q2(m: usize, l: usize) -> Cmat {
    Cmat::from_fn(m, l, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Gradient projection F Q2 Q2^T F^-1, dense M x M.
pub fn q3(m: usize, r: usize) -> Cmat {
    let l = m - r;
    let f = dft_matrix(m);
    let fi = idft_matrix(m);
    let q2m = q2(m, l);
    f.matmul(&q2m).matmul(&q2m.transpose()).matmul(&fi)
}

/// Nonredundant-bin selector: (M/2+1) x M, [I 0].
pub fn q4(m: usize) -> Cmat {
    let h = m / 2 + 1;
    Cmat::from_fn(h, m, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff_real(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Uniform random mask half-vector in [0, 1].
pub fn random_mask(rng: &mut StdRng, half: usize) -> Vec<f64> {
    (0..half).map(|_| rng.random_range(0.0..1.0)).collect()
}
