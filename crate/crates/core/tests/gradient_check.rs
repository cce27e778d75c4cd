//! Finite-difference verification of the reverse-mode gradient through the
//! full block recursion (features, network, PSD recursions, step-sizes,
//! filter updates, distance terms).

mod common;

use common::tiny_scenario;
use fdaf_core::neural::{NetworkDims, NetworkParameters, NormalizationStats};
use fdaf_core::scenario::Scenario;
use fdaf_core::spectral::Dft;
use fdaf_core::training::{
    gradient, sequence_loss, LossConfig, MaskFamilyConfig, MaskVariant,
};

fn loss_config(variant: MaskVariant, num_blocks: usize) -> LossConfig {
    LossConfig {
        mask: MaskFamilyConfig {
            variant,
            lambda_x: 0.5,
            lambda_p: 0.5,
            mu_max: 1.0,
            delta_reg: 1e-10,
            log_eps: 1e-12,
        },
        upsilon_floor: 1e-8,
        num_blocks,
        detach_interval: 0,
    }
}

fn plausible_stats(dims: NetworkDims) -> NormalizationStats {
    // Log-power features of unit-scale signals hover around -5..0.
    NormalizationStats {
        nu: vec![-3.0; dims.feature_len()],
        sigma: vec![2.0; dims.feature_len()],
    }
}

struct Setup {
    dft: Dft,
    scenario: Scenario,
    params: NetworkParameters,
    stats: NormalizationStats,
}

fn setup(m: usize, r: usize, p: usize, blocks: usize, seed: u64) -> Setup {
    let l = m - r;
    let dft = Dft::new(m, r).unwrap();
    let scenario = tiny_scenario(l, r, 2 * l, blocks, 15.0, seed);
    let dims = NetworkDims { m, p };
    let params = NetworkParameters::init(dims, seed ^ 0x99);
    let stats = plausible_stats(dims);
    Setup {
        dft,
        scenario,
        params,
        stats,
    }
}

/// Check >= `coords` randomly chosen coordinates of the gradient against
/// central differences; returns the worst relative error among coordinates
/// with non-negligible gradient.
fn check_gradient(setup: &mut Setup, cfg: &LossConfig, coords: usize, seed: u64) -> (f64, usize) {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    let (_, trace) = sequence_loss(
        &setup.dft,
        &setup.scenario,
        Some((&setup.params, &setup.stats)),
        cfg,
    )
    .unwrap();
    let grad = gradient(&setup.dft, &trace, Some((&setup.params, &setup.stats))).unwrap();
    assert_eq!(grad.len(), setup.params.len());

    let mut rng = StdRng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst_rel: f64 = 0.0;
    let mut checked = 0usize;
    for _ in 0..coords {
        let i = rng.random_range(0..setup.params.len());
        let orig = setup.params.theta()[i];

        setup.params.theta_mut()[i] = orig + h;
        let (loss_plus, _) = sequence_loss(
            &setup.dft,
            &setup.scenario,
            Some((&setup.params, &setup.stats)),
            cfg,
        )
        .unwrap();
        setup.params.theta_mut()[i] = orig - h;
        let (loss_minus, _) = sequence_loss(
            &setup.dft,
            &setup.scenario,
            Some((&setup.params, &setup.stats)),
            cfg,
        )
        .unwrap();
        setup.params.theta_mut()[i] = orig;

        let fd = (loss_plus - loss_minus) / (2.0 * h);
        let g = grad[i];
        if g.abs() < 1e-8 && fd.abs() < 1e-8 {
            checked += 1;
            continue;
        }
        let rel = (g - fd).abs() / g.abs().max(fd.abs());
        worst_rel = worst_rel.max(rel);
        checked += 1;
    }
    (worst_rel, checked)
}

#[test]
fn gradient_matches_finite_differences_full_variant() {
    let mut s = setup(32, 16, 4, 4, 11);
    let cfg = loss_config(MaskVariant::Full, 4);
    let (worst, checked) = check_gradient(&mut s, &cfg, 120, 1);
    assert!(checked >= 100);
    assert!(worst <= 1e-4, "worst relative error {worst:.3e}");
}

#[test]
fn gradient_matches_finite_differences_single_mask_variants() {
    for (variant, seed) in [(MaskVariant::NoErrorMask, 21), (MaskVariant::NoStepMask, 22)] {
        let mut s = setup(32, 16, 4, 4, seed);
        let mut cfg = loss_config(variant, 4);
        cfg.mask.lambda_p = 0.0;
        let (worst, _) = check_gradient(&mut s, &cfg, 60, 2);
        assert!(
            worst <= 1e-4,
            "variant {variant:?}: worst relative error {worst:.3e}"
        );
    }
}

#[test]
fn gradient_with_truncation_matches_truncated_finite_differences() {
    // Truncated backpropagation changes the gradient, not the loss; the
    // check here is that the backward pass stays internally consistent
    // (finite, deterministic) and differs from the full gradient.
    let mut s = setup(32, 16, 4, 6, 31);
    let full_cfg = loss_config(MaskVariant::Full, 6);
    let mut truncated_cfg = full_cfg;
    truncated_cfg.detach_interval = 2;

    let (_, trace_full) = sequence_loss(
        &s.dft,
        &s.scenario,
        Some((&s.params, &s.stats)),
        &full_cfg,
    )
    .unwrap();
    let g_full = gradient(&s.dft, &trace_full, Some((&s.params, &s.stats))).unwrap();

    let (_, trace_trunc) = sequence_loss(
        &s.dft,
        &s.scenario,
        Some((&s.params, &s.stats)),
        &truncated_cfg,
    )
    .unwrap();
    let g_trunc = gradient(&s.dft, &trace_trunc, Some((&s.params, &s.stats))).unwrap();

    assert!(g_trunc.iter().all(|v| v.is_finite()));
    let diff: f64 = g_full
        .iter()
        .zip(&g_trunc)
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(diff > 0.0, "truncation should alter the gradient");

    let g_trunc2 = gradient(&s.dft, &trace_trunc, Some((&s.params, &s.stats))).unwrap();
    assert_eq!(g_trunc, g_trunc2);

    // Consistency under truncation: zero out the carried terms by hand is
    // impractical here; instead verify the truncated gradient is exact for
    // a one-block sequence where truncation cannot engage.
    let one_cfg = LossConfig {
        num_blocks: 1,
        ..truncated_cfg
    };
    let mut s1 = setup(32, 16, 4, 1, 31);
    let (worst, _) = check_gradient(&mut s1, &one_cfg, 40, 3);
    assert!(worst <= 1e-4, "worst relative error {worst:.3e}");
}

#[test]
fn zero_mu_max_freezes_adaptation_and_gradient() {
    let s = setup(32, 16, 4, 4, 41);
    let mut cfg = loss_config(MaskVariant::Full, 4);
    cfg.mask.mu_max = 1e-300; // the law requires mu_max > 0; this is as frozen as it gets
    let (loss, trace) = sequence_loss(
        &s.dft,
        &s.scenario,
        Some((&s.params, &s.stats)),
        &cfg,
    )
    .unwrap();
    // Filter never moves: distance 1 (0 dB), loss 0 dB.
    assert!(loss.abs() < 1e-9, "loss {loss}");
    let grad = gradient(&s.dft, &trace, Some((&s.params, &s.stats))).unwrap();
    let max_grad = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
    assert!(max_grad < 1e-250, "max gradient {max_grad:.3e}");
}

#[test]
fn trace_replay_is_bit_identical() {
    let s = setup(32, 16, 4, 5, 51);
    let cfg = loss_config(MaskVariant::Full, 5);
    let (loss_a, trace_a) = sequence_loss(
        &s.dft,
        &s.scenario,
        Some((&s.params, &s.stats)),
        &cfg,
    )
    .unwrap();
    assert_eq!(trace_a.replay_loss().to_bits(), loss_a.to_bits());
    let (loss_b, _) = sequence_loss(
        &s.dft,
        &s.scenario,
        Some((&s.params, &s.stats)),
        &cfg,
    )
    .unwrap();
    assert_eq!(loss_a.to_bits(), loss_b.to_bits());
}
