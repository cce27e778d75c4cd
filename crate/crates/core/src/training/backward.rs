//! Hand-derived reverse-mode differentiation of the sequence loss with
//! respect to the network parameters.
//!
//! Complex intermediates are differentiated by treating real and imaginary
//! parts as independent real variables; adjoints of complex quantities are
//! stored as `dJ/dRe + i dJ/dIm`. Under that convention the adjoint of a
//! C-linear map A is its Hermitian transpose, so the adjoint of the forward
//! DFT is the unnormalized inverse DFT and vice versa, and the adjoint of
//! the FIR projection is the projection itself (it is Hermitian).
//!
//! Gradients flow through both paths of the recursion: the step-size path
//! into each filter update and the filter-state carry-over between blocks,
//! as well as through the masked error PSD recursion and the feature
//! extraction (prior error -> network input).

use num_complex::Complex64;

use crate::error::Result;
use crate::math::{matvec_t_acc, outer_acc};
use crate::neural::{ForwardCache, GruCache, NetworkDims, NetworkParameters, NormalizationStats};
use crate::spectral::{fold_full_to_half, Dft, Spectrum};
use crate::training::forward::recorded_p_hat;
use crate::training::DifferentiableTrace;

struct GruGrads {
    w_u: Vec<f64>,
    u_u: Vec<f64>,
    b_u: Vec<f64>,
    w_r: Vec<f64>,
    u_r: Vec<f64>,
    b_r: Vec<f64>,
    w_c: Vec<f64>,
    u_c: Vec<f64>,
    b_c: Vec<f64>,
}

impl GruGrads {
    fn zeros(p: usize) -> Self {
        Self {
            w_u: vec![0.0; p * p],
            u_u: vec![0.0; p * p],
            b_u: vec![0.0; p],
            w_r: vec![0.0; p * p],
            u_r: vec![0.0; p * p],
            b_r: vec![0.0; p],
            w_c: vec![0.0; p * p],
            u_c: vec![0.0; p * p],
            b_c: vec![0.0; p],
        }
    }
}

struct NetGrads {
    ff_in_w: Vec<f64>,
    ff_in_b: Vec<f64>,
    gru1: GruGrads,
    gru2: GruGrads,
    head_mu_w: Vec<f64>,
    head_mu_b: Vec<f64>,
    head_e_w: Vec<f64>,
    head_e_b: Vec<f64>,
}

impl NetGrads {
    fn zeros(dims: NetworkDims) -> Self {
        let p = dims.p;
        let f = dims.feature_len();
        let h = dims.half();
        Self {
            ff_in_w: vec![0.0; p * f],
            ff_in_b: vec![0.0; p],
            gru1: GruGrads::zeros(p),
            gru2: GruGrads::zeros(p),
            head_mu_w: vec![0.0; h * p],
            head_mu_b: vec![0.0; h],
            head_e_w: vec![0.0; h * p],
            head_e_b: vec![0.0; h],
        }
    }

    /// Flatten in the canonical tensor order of `NetworkDims::tensors`.
    fn into_flat(self, dims: NetworkDims) -> Vec<f64> {
        let mut flat = Vec::with_capacity(dims.parameter_count());
        flat.extend(self.ff_in_w);
        flat.extend(self.ff_in_b);
        for gru in [self.gru1, self.gru2] {
            flat.extend(gru.w_u);
            flat.extend(gru.u_u);
            flat.extend(gru.b_u);
            flat.extend(gru.w_r);
            flat.extend(gru.u_r);
            flat.extend(gru.b_r);
            flat.extend(gru.w_c);
            flat.extend(gru.u_c);
            flat.extend(gru.b_c);
        }
        flat.extend(self.head_mu_w);
        flat.extend(self.head_mu_b);
        flat.extend(self.head_e_w);
        flat.extend(self.head_e_b);
        debug_assert_eq!(flat.len(), dims.parameter_count());
        flat
    }
}

struct GruWeightRefs<'a> {
    w_u: &'a [f64],
    u_u: &'a [f64],
    w_r: &'a [f64],
    u_r: &'a [f64],
    w_c: &'a [f64],
    u_c: &'a [f64],
}

fn gru_weight_refs<'a>(params: &'a NetworkParameters, layer: &str) -> GruWeightRefs<'a> {
    let name = |suffix: &str| -> &'a [f64] {
        match (layer, suffix) {
            ("gru1", "w_u") => params.slice("gru1.w_u"),
            ("gru1", "u_u") => params.slice("gru1.u_u"),
            ("gru1", "w_r") => params.slice("gru1.w_r"),
            ("gru1", "u_r") => params.slice("gru1.u_r"),
            ("gru1", "w_c") => params.slice("gru1.w_c"),
            ("gru1", "u_c") => params.slice("gru1.u_c"),
            ("gru2", "w_u") => params.slice("gru2.w_u"),
            ("gru2", "u_u") => params.slice("gru2.u_u"),
            ("gru2", "w_r") => params.slice("gru2.w_r"),
            ("gru2", "u_r") => params.slice("gru2.u_r"),
            ("gru2", "w_c") => params.slice("gru2.w_c"),
            ("gru2", "u_c") => params.slice("gru2.u_c"),
            _ => unreachable!(),
        }
    };
    GruWeightRefs {
        w_u: name("w_u"),
        u_u: name("u_u"),
        w_r: name("w_r"),
        u_r: name("u_r"),
        w_c: name("w_c"),
        u_c: name("u_c"),
    }
}

/// Backward through one GRU layer. Returns (g_x_in, g_h_prev).
fn gru_backward(
    weights: &GruWeightRefs,
    p: usize,
    cache: &GruCache,
    g_h: &[f64],
    grads: &mut GruGrads,
) -> (Vec<f64>, Vec<f64>) {
    let u = &cache.gate_u;
    let r = &cache.gate_r;
    let c = &cache.cand;
    let h_prev = &cache.h_prev;
    let x_in = &cache.x_in;

    let mut g_x = vec![0.0; p];
    let mut g_hprev = vec![0.0; p];

    // h = u ⊙ h_prev + (1 - u) ⊙ c
    let g_u_gate: Vec<f64> = (0..p).map(|i| g_h[i] * (h_prev[i] - c[i])).collect();
    let g_c: Vec<f64> = (0..p).map(|i| g_h[i] * (1.0 - u[i])).collect();
    for i in 0..p {
        g_hprev[i] += g_h[i] * u[i];
    }

    // c = tanh(Wc x + Uc (r ⊙ h_prev) + bc)
    let g_ac: Vec<f64> = (0..p).map(|i| (1.0 - c[i] * c[i]) * g_c[i]).collect();
    let rh: Vec<f64> = (0..p).map(|i| r[i] * h_prev[i]).collect();
    outer_acc(&mut grads.w_c, p, p, &g_ac, x_in);
    outer_acc(&mut grads.u_c, p, p, &g_ac, &rh);
    for i in 0..p {
        grads.b_c[i] += g_ac[i];
    }
    matvec_t_acc(weights.w_c, p, p, &g_ac, &mut g_x);
    let mut g_rh = vec![0.0; p];
    matvec_t_acc(weights.u_c, p, p, &g_ac, &mut g_rh);
    let g_r_gate: Vec<f64> = (0..p).map(|i| g_rh[i] * h_prev[i]).collect();
    for i in 0..p {
        g_hprev[i] += g_rh[i] * r[i];
    }

    // u = sigmoid(Wu x + Uu h_prev + bu)
    let g_au: Vec<f64> = (0..p).map(|i| u[i] * (1.0 - u[i]) * g_u_gate[i]).collect();
    outer_acc(&mut grads.w_u, p, p, &g_au, x_in);
    outer_acc(&mut grads.u_u, p, p, &g_au, h_prev);
    for i in 0..p {
        grads.b_u[i] += g_au[i];
    }
    matvec_t_acc(weights.w_u, p, p, &g_au, &mut g_x);
    matvec_t_acc(weights.u_u, p, p, &g_au, &mut g_hprev);

    // r = sigmoid(Wr x + Ur h_prev + br)
    let g_ar: Vec<f64> = (0..p).map(|i| r[i] * (1.0 - r[i]) * g_r_gate[i]).collect();
    outer_acc(&mut grads.w_r, p, p, &g_ar, x_in);
    outer_acc(&mut grads.u_r, p, p, &g_ar, h_prev);
    for i in 0..p {
        grads.b_r[i] += g_ar[i];
    }
    matvec_t_acc(weights.w_r, p, p, &g_ar, &mut g_x);
    matvec_t_acc(weights.u_r, p, p, &g_ar, &mut g_hprev);

    (g_x, g_hprev)
}

/// Backward through the full network evaluation of one block.
/// Returns (g_feat, g_h1_prev, g_h2_prev).
#[allow(clippy::too_many_arguments)]
fn net_backward(
    params: &NetworkParameters,
    cache: &ForwardCache,
    g_mmu_half: Option<&[f64]>,
    g_me_half: Option<&[f64]>,
    gh1_in: &[f64],
    gh2_in: &[f64],
    grads: &mut NetGrads,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dims = params.dims();
    let p = dims.p;
    let h = dims.half();
    let f = dims.feature_len();

    // h2 is recomputed from the layer-2 cache.
    let g2 = &cache.gru2;
    let h2: Vec<f64> = (0..p)
        .map(|i| g2.gate_u[i] * g2.h_prev[i] + (1.0 - g2.gate_u[i]) * g2.cand[i])
        .collect();

    let mut g_h2 = gh2_in.to_vec();
    if let Some(g_mmu) = g_mmu_half {
        let g_a: Vec<f64> = (0..h)
            .map(|i| cache.m_mu[i] * (1.0 - cache.m_mu[i]) * g_mmu[i])
            .collect();
        outer_acc(&mut grads.head_mu_w, h, p, &g_a, &h2);
        for i in 0..h {
            grads.head_mu_b[i] += g_a[i];
        }
        matvec_t_acc(params.slice("head_mu.w"), h, p, &g_a, &mut g_h2);
    }
    if let Some(g_me) = g_me_half {
        let g_a: Vec<f64> = (0..h)
            .map(|i| cache.m_e[i] * (1.0 - cache.m_e[i]) * g_me[i])
            .collect();
        outer_acc(&mut grads.head_e_w, h, p, &g_a, &h2);
        for i in 0..h {
            grads.head_e_b[i] += g_a[i];
        }
        matvec_t_acc(params.slice("head_e.w"), h, p, &g_a, &mut g_h2);
    }

    let w2 = gru_weight_refs(params, "gru2");
    let (g_h1_from_gru2, g_h2_prev) = gru_backward(&w2, p, &cache.gru2, &g_h2, &mut grads.gru2);
    let mut g_h1 = gh1_in.to_vec();
    for i in 0..p {
        g_h1[i] += g_h1_from_gru2[i];
    }

    let w1 = gru_weight_refs(params, "gru1");
    let (g_z, g_h1_prev) = gru_backward(&w1, p, &cache.gru1, &g_h1, &mut grads.gru1);

    // z = tanh(W_in feat + b_in)
    let g_ain: Vec<f64> = (0..p)
        .map(|i| (1.0 - cache.z_in[i] * cache.z_in[i]) * g_z[i])
        .collect();
    outer_acc(&mut grads.ff_in_w, p, f, &g_ain, &cache.feat);
    for i in 0..p {
        grads.ff_in_b[i] += g_ain[i];
    }
    let mut g_feat = vec![0.0; f];
    matvec_t_acc(params.slice("ff_in.w"), p, f, &g_ain, &mut g_feat);

    (g_feat, g_h1_prev, g_h2_prev)
}

/// Adjoint of the FIR projection (the projection is Hermitian).
fn fir_project_adjoint(dft: &Dft, g: Vec<Complex64>) -> Result<Vec<Complex64>> {
    Ok(dft
        .enforce_fir_constraint(&Spectrum::from_raw(g))?
        .into_inner())
}

/// Exact reverse-mode gradient of the recorded sequence loss with respect
/// to every network parameter. Returns an empty vector for variants that
/// carry no network.
pub fn gradient(
    dft: &Dft,
    trace: &DifferentiableTrace,
    net: Option<(&NetworkParameters, &NormalizationStats)>,
) -> Result<Vec<f64>> {
    let variant = trace.cfg.mask.variant;
    let Some((params, stats)) = net else {
        return Ok(Vec::new());
    };
    if !variant.uses_network() {
        return Ok(vec![0.0; params.len()]);
    }

    let dims = params.dims();
    let p = dims.p;
    let m = dft.m();
    let r = dft.r();
    let l = dft.l();
    let half = m / 2 + 1;
    let m_over_r = m as f64 / r as f64;
    let t_count = trace.records.len();
    let floor = trace.cfg.upsilon_floor;
    let lambda_p = trace.cfg.mask.lambda_p;
    let mu_max = trace.cfg.mask.mu_max;
    let detach = trace.cfg.detach_interval;

    let mut grads = NetGrads::zeros(dims);
    let mut gw = vec![Complex64::new(0.0, 0.0); m];
    let mut gh1 = vec![0.0; p];
    let mut gh2 = vec![0.0; p];
    let mut gpsipp = vec![0.0; m];

    for idx in (0..t_count).rev() {
        let rec = &trace.records[idx];
        let truth = &trace.truths[idx];
        let upsilon = trace.upsilons[idx];

        // Loss term: (1/T) * 10 log10(max(upsilon, floor)).
        let d_loss_d_upsilon = if upsilon > floor {
            10.0 / (std::f64::consts::LN_10 * upsilon * t_count as f64)
        } else {
            0.0
        };
        if d_loss_d_upsilon != 0.0 {
            let truth_energy: f64 = truth.iter().map(|v| v * v).sum();
            // upsilon = ||truth - w_td||^2 / ||truth||^2
            let mut g_time = vec![Complex64::new(0.0, 0.0); m];
            for i in 0..l {
                let g_wtd = d_loss_d_upsilon * 2.0 * (rec.w_td[i] - truth[i]) / truth_energy;
                g_time[i] = Complex64::new(g_wtd, 0.0);
            }
            // w_td = first L of IDFT(w); adjoint of IDFT is (1/M) DFT.
            dft.fwd_in_place(&mut g_time);
            let scale = 1.0 / m as f64;
            for (gwi, gt) in gw.iter_mut().zip(&g_time) {
                *gwi += gt * scale;
            }
        }

        // Update recursion: w_next = w_prev + Q3 (step ⊙ conj(x) ⊙ e).
        let g_upd = fir_project_adjoint(dft, gw.clone())?;
        let x = rec.x_spec.bins();
        let e = rec.e_spec.bins();
        let step = rec.step.values();
        let mut g_e = vec![Complex64::new(0.0, 0.0); m];
        let mut g_step = vec![0.0; m];
        for i in 0..m {
            let q = x[i].conj() * e[i];
            g_step[i] = (q.conj() * g_upd[i]).re;
            g_e[i] += x[i] * (step[i] * g_upd[i]);
        }

        // Step-size law: step = mu_max m_mu / denom.
        let mut g_mmu_full = vec![0.0; m];
        let mut g_psipp_total = vec![0.0; m];
        for i in 0..m {
            g_mmu_full[i] = g_step[i] * mu_max / rec.denom[i];
            let g_denom = -g_step[i] * step[i] / rec.denom[i];
            g_psipp_total[i] = gpsipp[i] + m_over_r * g_denom;
        }

        // Masked error PSD recursion:
        // psi_pp = lambda_p psi_pp_prev + (1 - lambda_p) |m_e ⊙ e|^2.
        let p_hat = recorded_p_hat(rec);
        let mut g_me_full = vec![0.0; m];
        for i in 0..m {
            let g_phat = 2.0 * (1.0 - lambda_p) * g_psipp_total[i] * p_hat[i];
            g_me_full[i] = (e[i].conj() * g_phat).re;
            g_e[i] += rec.m_e_full[i] * g_phat;
            gpsipp[i] = lambda_p * g_psipp_total[i];
        }

        // Network and feature paths.
        let cache = rec
            .net_cache
            .as_ref()
            .expect("network variant records a cache");
        let g_mmu_half = variant
            .step_mask_from_net()
            .then(|| fold_full_to_half(&g_mmu_full));
        let g_me_half = variant
            .error_mask_from_net()
            .then(|| fold_full_to_half(&g_me_full));
        let (g_feat, gh1_prev, gh2_prev) = net_backward(
            params,
            cache,
            g_mmu_half.as_deref(),
            g_me_half.as_deref(),
            &gh1,
            &gh2,
            &mut grads,
        );
        gh1 = gh1_prev;
        gh2 = gh2_prev;

        // Features: feat[i] = (ln(max(|u|^2, eps)) - nu[i]) / sigma[i];
        // the first half of u comes from e, the second from x (constant).
        for i in 0..half {
            let pow = e[i].norm_sqr();
            if pow > trace.cfg.mask.log_eps {
                let g_pow = g_feat[i] / (stats.sigma[i] * pow);
                g_e[i] += 2.0 * g_pow * e[i];
            }
        }

        // Prior error: e = F padfront(y - d_hat); adjoint of F is the
        // unnormalized inverse transform.
        let mut g_pad = g_e;
        dft.inv_unnormalized_in_place(&mut g_pad);
        // d_hat = Re(last R of IDFT(x ⊙ w_prev)); chain into w_prev.
        let mut g_t = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..r {
            let g_err = g_pad[m - r + j].re;
            g_t[m - r + j] = Complex64::new(-g_err, 0.0);
        }
        dft.fwd_in_place(&mut g_t);
        let scale = 1.0 / m as f64;
        for i in 0..m {
            // gw passes through the update recursion unchanged and picks up
            // the prior-error contribution.
            gw[i] += x[i].conj() * (g_t[i] * scale);
        }

        // Truncated-backpropagation boundary: state entering this block is
        // treated as constant.
        if detach > 0 && idx > 0 && idx % detach == 0 {
            gw.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            gh1.iter_mut().for_each(|v| *v = 0.0);
            gh2.iter_mut().for_each(|v| *v = 0.0);
            gpsipp.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    Ok(grads.into_flat(dims))
}
