//! Feature extraction and the mask-emitting recurrent network.
//!
//! The network maps the normalized log-power spectra of the prior error and
//! input signals to two per-bin masks: an input feedforward layer with tanh,
//! two stacked GRU layers, and two sigmoid heads. Parameters live in one
//! flat vector so the optimizer and the checkpoint format can address them
//! uniformly.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::controllers::MaskPair;
use crate::error::{Error, Result};
use crate::math::{matvec, sigmoid};
use crate::spectral::Spectrum;

/// Floor for the feature standard deviations.
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-6;

/// Floor inside the logarithm of the feature computation.
pub const DEFAULT_LOG_EPS: f64 = 1e-12;

/// Normalized log-power features of one block, length M + 2.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Mean and element-wise standard deviation of the log-power features.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub nu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl NormalizationStats {
    /// Zero-mean, unit-variance stand-in (useful for synthetic tests).
    pub fn unit(feature_len: usize) -> Self {
        Self {
            nu: vec![0.0; feature_len],
            sigma: vec![1.0; feature_len],
        }
    }

    pub fn feature_len(&self) -> usize {
        self.nu.len()
    }
}

/// Streaming mean/std accumulator over raw log-power feature vectors.
///
/// The error half of the features is fed with whatever spectrum the caller
/// deems representative of the prior error; at estimation time that is the
/// zero-padded microphone spectrum, since true prior errors are unavailable
/// before a filter has run.
#[derive(Debug, Clone)]
pub struct NormalizationAccumulator {
    eps: f64,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl NormalizationAccumulator {
    pub fn new(m: usize, eps: f64) -> Self {
        let n = m + 2;
        Self {
            eps,
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    pub fn push(&mut self, e_like: &Spectrum, x_spec: &Spectrum) -> Result<()> {
        let raw = raw_log_power(e_like, x_spec, self.eps)?;
        if raw.len() != self.mean.len() {
            return Err(Error::InvalidDimension {
                what: "normalization features",
                expected: self.mean.len(),
                got: raw.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(raw) {
            let delta = v - *m;
            *m += delta / n;
            *m2 += delta * (v - *m);
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(self, sigma_floor: f64) -> Result<NormalizationStats> {
        if self.count == 0 {
            return Err(Error::InvalidInput(
                "normalization corpus is empty".into(),
            ));
        }
        let n = self.count as f64;
        let sigma = self
            .m2
            .iter()
            .map(|&m2| (m2 / n).sqrt().max(sigma_floor))
            .collect();
        Ok(NormalizationStats {
            nu: self.mean,
            sigma,
        })
    }
}

/// log(max(|u|^2, eps)) over the stacked nonredundant halves [e; x].
fn raw_log_power(e_spec: &Spectrum, x_spec: &Spectrum, eps: f64) -> Result<Vec<f64>> {
    if e_spec.len() != x_spec.len() {
        return Err(Error::InvalidDimension {
            what: "feature spectra",
            expected: e_spec.len(),
            got: x_spec.len(),
        });
    }
    let m = e_spec.len();
    let half = m / 2 + 1;
    let mut out = Vec::with_capacity(2 * half);
    for spec in [e_spec, x_spec] {
        for bin in &spec.bins()[..half] {
            out.push(bin.norm_sqr().max(eps).ln());
        }
    }
    Ok(out)
}

/// Normalized log-power features of one block.
pub fn compute_features(
    e_spec: &Spectrum,
    x_spec: &Spectrum,
    stats: &NormalizationStats,
    eps: f64,
) -> Result<FeatureVector> {
    let raw = raw_log_power(e_spec, x_spec, eps)?;
    if raw.len() != stats.nu.len() {
        return Err(Error::InvalidDimension {
            what: "feature normalization",
            expected: stats.nu.len(),
            got: raw.len(),
        });
    }
    let values = raw
        .iter()
        .zip(stats.nu.iter().zip(&stats.sigma))
        .map(|(&v, (&nu, &sig))| (v - nu) / sig)
        .collect();
    Ok(FeatureVector { values })
}

/// Shape and flat layout of the network parameters for a given (M, P).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkDims {
    pub m: usize,
    pub p: usize,
}

/// One named tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
pub struct TensorSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl NetworkDims {
    pub fn feature_len(&self) -> usize {
        self.m + 2
    }

    pub fn half(&self) -> usize {
        self.m / 2 + 1
    }

    /// Named tensor layout, in flat-vector order.
    pub fn tensors(&self) -> Vec<TensorSpec> {
        let f = self.feature_len();
        let p = self.p;
        let h = self.half();
        let mut specs = Vec::new();
        let mut offset = 0;
        let mut push = |name: &'static str, shape: Vec<usize>| {
            let len: usize = shape.iter().product();
            specs.push(TensorSpec {
                name,
                shape,
                offset,
            });
            offset += len;
        };
        push("ff_in.w", vec![p, f]);
        push("ff_in.b", vec![p]);
        for layer in ["gru1", "gru2"] {
            for gate in ["u", "r", "c"] {
                // Rust requires 'static names; enumerate the small fixed set.
                let (w, u, b) = gru_tensor_names(layer, gate);
                push(w, vec![p, p]);
                push(u, vec![p, p]);
                push(b, vec![p]);
            }
        }
        push("head_mu.w", vec![h, p]);
        push("head_mu.b", vec![h]);
        push("head_e.w", vec![h, p]);
        push("head_e.b", vec![h]);
        specs
    }

    /// Total trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        let f = self.feature_len();
        let p = self.p;
        let h = self.half();
        (f * p + p) + 2 * 3 * (p * p + p * p + p) + 2 * (h * p + h)
    }
}

fn gru_tensor_names(layer: &str, gate: &str) -> (&'static str, &'static str, &'static str) {
    match (layer, gate) {
        ("gru1", "u") => ("gru1.w_u", "gru1.u_u", "gru1.b_u"),
        ("gru1", "r") => ("gru1.w_r", "gru1.u_r", "gru1.b_r"),
        ("gru1", "c") => ("gru1.w_c", "gru1.u_c", "gru1.b_c"),
        ("gru2", "u") => ("gru2.w_u", "gru2.u_u", "gru2.b_u"),
        ("gru2", "r") => ("gru2.w_r", "gru2.u_r", "gru2.b_r"),
        ("gru2", "c") => ("gru2.w_c", "gru2.u_c", "gru2.b_c"),
        _ => unreachable!("unknown GRU tensor"),
    }
}

/// All trainable weights, flat-addressable.
#[derive(Debug, Clone)]
pub struct NetworkParameters {
    dims: NetworkDims,
    theta: Vec<f64>,
}

impl NetworkParameters {
    /// Zero-valued parameters (masks come out at 0.5 everywhere).
    pub fn zeros(dims: NetworkDims) -> Self {
        Self {
            theta: vec![0.0; dims.parameter_count()],
            dims,
        }
    }

    /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
    pub fn init(dims: NetworkDims, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut params = Self::zeros(dims);
        for spec in dims.tensors() {
            if spec.shape.len() != 2 {
                continue; // biases stay zero
            }
            let fan_in = spec.shape[1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dst = &mut params.theta[spec.offset..spec.offset + spec.len()];
            for v in dst {
                *v = rng.random_range(-bound..bound);
            }
        }
        params
    }

    pub fn from_theta(dims: NetworkDims, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != dims.parameter_count() {
            return Err(Error::InvalidDimension {
                what: "parameter vector",
                expected: dims.parameter_count(),
                got: theta.len(),
            });
        }
        Ok(Self { dims, theta })
    }

    pub fn dims(&self) -> NetworkDims {
        self.dims
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub(crate) fn slice(&self, name: &str) -> &[f64] {
        let spec = self
            .dims
            .tensors()
            .into_iter()
            .find(|t| t.name == name)
            .expect("tensor name");
        &self.theta[spec.offset..spec.offset + spec.len()]
    }
}

/// Hidden states of the two GRU layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(p: usize) -> Self {
        Self {
            h1: vec![0.0; p],
            h2: vec![0.0; p],
        }
    }
}

/// Intermediates of one GRU layer needed by the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x_in: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub gate_u: Vec<f64>,
    pub gate_r: Vec<f64>,
    pub cand: Vec<f64>,
}

/// Intermediates of one network evaluation needed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub feat: Vec<f64>,
    pub z_in: Vec<f64>,
    pub gru1: GruCache,
    pub gru2: GruCache,
    pub m_mu: Vec<f64>,
    pub m_e: Vec<f64>,
}

struct GruWeights<'a> {
    w_u: &'a [f64],
    u_u: &'a [f64],
    b_u: &'a [f64],
    w_r: &'a [f64],
    u_r: &'a [f64],
    b_r: &'a [f64],
    w_c: &'a [f64],
    u_c: &'a [f64],
    b_c: &'a [f64],
}

fn gru_weights<'a>(params: &'a NetworkParameters, layer: &str) -> GruWeights<'a> {
    match layer {
        "gru1" => GruWeights {
            w_u: params.slice("gru1.w_u"),
            u_u: params.slice("gru1.u_u"),
            b_u: params.slice("gru1.b_u"),
            w_r: params.slice("gru1.w_r"),
            u_r: params.slice("gru1.u_r"),
            b_r: params.slice("gru1.b_r"),
            w_c: params.slice("gru1.w_c"),
            u_c: params.slice("gru1.u_c"),
            b_c: params.slice("gru1.b_c"),
        },
        _ => GruWeights {
            w_u: params.slice("gru2.w_u"),
            u_u: params.slice("gru2.u_u"),
            b_u: params.slice("gru2.b_u"),
            w_r: params.slice("gru2.w_r"),
            u_r: params.slice("gru2.u_r"),
            b_r: params.slice("gru2.b_r"),
            w_c: params.slice("gru2.w_c"),
            u_c: params.slice("gru2.u_c"),
            b_c: params.slice("gru2.b_c"),
        },
    }
}

fn gru_layer(w: &GruWeights, p: usize, x_in: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruCache) {
    let mut a = vec![0.0; p];
    let mut b = vec![0.0; p];

    matvec(w.w_u, p, p, x_in, &mut a);
    matvec(w.u_u, p, p, h_prev, &mut b);
    let gate_u: Vec<f64> = (0..p)
        .map(|i| sigmoid(a[i] + b[i] + w.b_u[i]))
        .collect();

    matvec(w.w_r, p, p, x_in, &mut a);
    matvec(w.u_r, p, p, h_prev, &mut b);
    let gate_r: Vec<f64> = (0..p)
        .map(|i| sigmoid(a[i] + b[i] + w.b_r[i]))
        .collect();

    let rh: Vec<f64> = gate_r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    matvec(w.w_c, p, p, x_in, &mut a);
    matvec(w.u_c, p, p, &rh, &mut b);
    let cand: Vec<f64> = (0..p).map(|i| (a[i] + b[i] + w.b_c[i]).tanh()).collect();

    let h_out: Vec<f64> = (0..p)
        .map(|i| gate_u[i] * h_prev[i] + (1.0 - gate_u[i]) * cand[i])
        .collect();

    let cache = GruCache {
        x_in: x_in.to_vec(),
        h_prev: h_prev.to_vec(),
        gate_u,
        gate_r,
        cand,
    };
    (h_out, cache)
}

/// One network step: masks for the current block plus the updated hidden
/// state. The cache carries everything the backward pass needs.
pub fn forward_cached(
    params: &NetworkParameters,
    state: &RecurrentState,
    feat: &FeatureVector,
) -> Result<(MaskPair, RecurrentState, ForwardCache)> {
    let dims = params.dims();
    let p = dims.p;
    let f = dims.feature_len();
    let h = dims.half();
    if feat.values.len() != f {
        return Err(Error::InvalidDimension {
            what: "feature vector",
            expected: f,
            got: feat.values.len(),
        });
    }
    if state.h1.len() != p || state.h2.len() != p {
        return Err(Error::InvalidDimension {
            what: "recurrent state",
            expected: p,
            got: state.h1.len().min(state.h2.len()),
        });
    }

    let mut a_in = vec![0.0; p];
    matvec(params.slice("ff_in.w"), p, f, &feat.values, &mut a_in);
    let b_in = params.slice("ff_in.b");
    let z_in: Vec<f64> = (0..p).map(|i| (a_in[i] + b_in[i]).tanh()).collect();

    let w1 = gru_weights(params, "gru1");
    let (h1, gru1) = gru_layer(&w1, p, &z_in, &state.h1);
    let w2 = gru_weights(params, "gru2");
    let (h2, gru2) = gru_layer(&w2, p, &h1, &state.h2);

    let mut a_mu = vec![0.0; h];
    matvec(params.slice("head_mu.w"), h, p, &h2, &mut a_mu);
    let b_mu = params.slice("head_mu.b");
    let m_mu: Vec<f64> = (0..h).map(|i| sigmoid(a_mu[i] + b_mu[i])).collect();

    let mut a_e = vec![0.0; h];
    matvec(params.slice("head_e.w"), h, p, &h2, &mut a_e);
    let b_e = params.slice("head_e.b");
    let m_e: Vec<f64> = (0..h).map(|i| sigmoid(a_e[i] + b_e[i])).collect();

    let masks = MaskPair::new(m_mu.clone(), m_e.clone())?;
    let next = RecurrentState { h1, h2 };
    let cache = ForwardCache {
        feat: feat.values.clone(),
        z_in,
        gru1,
        gru2,
        m_mu,
        m_e,
    };
    Ok((masks, next, cache))
}

/// Inference-only forward (no cache).
pub fn forward(
    params: &NetworkParameters,
    state: &RecurrentState,
    feat: &FeatureVector,
) -> Result<(MaskPair, RecurrentState)> {
    let (masks, next, _) = forward_cached(params, state, feat)?;
    Ok((masks, next))
}
