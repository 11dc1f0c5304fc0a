use binspp::audio::{mix_at_snr, Utterance};
use binspp::eval::{auc, evaluate, pd_at_pfa, roc_curve, EstimatorInfo};
use binspp::spectral::{PowerRole, PowerSpectrogram};
use binspp::synth::white_noise;
use binspp::target::{
    ground_truth_labels, oracle_spp, posterior_spp, smooth_noise_psd, spp_floor, LabelMatrix,
    SppMatrix, TargetConfig,
};
use ndarray::{concatenate, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pw(values: Array2<f64>) -> PowerSpectrogram {
    PowerSpectrogram::new(values, PowerRole::Noisy)
}

/// Logistic rewrite of the posterior, evaluated independently of the library.
fn logistic_spp(r: f64, prior_ratio: f64, xi: f64) -> f64 {
    let logit = r * xi / (1.0 + xi) - (prior_ratio * (1.0 + xi)).ln();
    1.0 / (1.0 + (-logit).exp())
}

#[test]
fn posterior_matches_logistic_form() {
    let xi = 10f64.powf(1.5);
    for i in 0..200 {
        let r = i as f64 * 0.1;
        assert!((posterior_spp(r, 1.0, xi) - logistic_spp(r, 1.0, xi)).abs() < 1e-14);
    }
    assert!((posterior_spp(0.0, 1.0, xi) - spp_floor(1.0, xi)).abs() < 1e-17);
}

fn scores_and_labels(n: usize, seed: u64) -> (Vec<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n)
        .map(|i| if i < 2 { i as u8 } else { rng.gen_range(0..=1) })
        .collect();
    let scores = labels
        .iter()
        .map(|&l| f64::from(l) * 0.7 + rng.gen_range(0.0..1.0))
        .collect();
    (scores, labels)
}

#[test]
fn random_scores_give_chance_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scores: Vec<f64> = (0..100_000).map(|_| rng.gen()).collect();
    let labels: Vec<u8> = (0..100_000).map(|_| rng.gen_range(0..=1)).collect();
    let a = auc(&roc_curve(&scores, &labels).unwrap());
    assert!((a - 0.5).abs() <= 0.01, "{a}");
}

/// Mann-Whitney statistic: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

#[test]
fn pooling_is_associative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mat = |frames: usize| {
        let s = Array2::from_shape_fn((4, frames), |_| (rng.gen::<f64>() * 10.0).round() / 10.0);
        let l = s.mapv(|v| u8::from(v + rng.gen_range(-0.3..0.3) > 0.5));
        (SppMatrix { values: s }, LabelMatrix { values: l })
    };
    let (a, la) = mat(30);
    let (b, lb) = mat(17);
    let info = EstimatorInfo::default();
    let split = evaluate(&[a.clone(), b.clone()], &[la.clone(), lb.clone()], &info).unwrap();
    let joined = evaluate(
        &[SppMatrix {
            values: concatenate(Axis(1), &[a.values.view(), b.values.view()]).unwrap(),
        }],
        &[LabelMatrix {
            values: concatenate(Axis(1), &[la.values.view(), lb.values.view()]).unwrap(),
        }],
        &info,
    )
    .unwrap();
    assert_eq!(split.report, joined.report);
    assert_eq!(split.roc, joined.roc);
}

proptest! {
    #[test]
    fn oracle_spp_monotone_and_open_unit(
        y in 0.0f64..1e3, dy in 1e-6f64..1e3, d in 1e-6f64..1e3, dd in 1e-6f64..1e3,
    ) {
        let cfg = TargetConfig::default();
        let spp = |y: f64, d: f64| oracle_spp(&pw(Array2::from_elem((1, 1), y)), &pw(Array2::from_elem((1, 1), d)), &cfg).unwrap().values[[0, 0]];
        let base = spp(y, d);
        prop_assert!(base > 0.0 && base < 1.0 || (base == 1.0 && y / d > 30.0));
        prop_assert!(spp(y + dy, d) >= base);
        prop_assert!(spp(y, d + dd) <= base);
        prop_assert!((base - logistic_spp(y / d, 1.0, cfg.xi_h1)).abs() < 1e-12);
    }

    #[test]
    fn smoothed_psd_within_history_bounds(xs in proptest::collection::vec(0.0f64..10.0, 1..50), alpha in 0.01f64..0.99) {
        let p = pw(Array2::from_shape_vec((1, xs.len()), xs.clone()).unwrap());
        let s = smooth_noise_psd(&p, alpha);
        for (l, v) in s.values.iter().enumerate() {
            let hist = &xs[..=l];
            let lo = hist.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = hist.iter().cloned().fold(0.0, f64::max);
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn labels_scale_invariant(
        xs in proptest::collection::vec(0.0f64..1.0, 2..60),
        exp in -8i32..8,
    ) {
        prop_assume!(xs.iter().any(|&v| v > 0.0));
        let c = 2f64.powi(exp);
        let p = pw(Array2::from_shape_vec((2, xs.len() / 2), xs[..xs.len() / 2 * 2].to_vec()).unwrap());
        prop_assume!(p.values.iter().any(|&v| v > 0.0));
        let scaled = pw(p.values.mapv(|v| v * c));
        prop_assert_eq!(ground_truth_labels(&p, 60.0).unwrap(), ground_truth_labels(&scaled, 60.0).unwrap());
    }

    #[test]
    fn auc_matches_pairwise_statistic(n in 2usize..200, seed in any::<u64>()) {
        let (s, l) = scores_and_labels(n, seed);
        let a = auc(&roc_curve(&s, &l).unwrap());
        prop_assert!((a - pairwise_auc(&s, &l)).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_transform(n in 2usize..300, seed in any::<u64>()) {
        let (s, l) = scores_and_labels(n, seed);
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(auc(&roc_curve(&s, &l).unwrap()), auc(&roc_curve(&t, &l).unwrap()));
    }

    #[test]
    fn auc_of_negated_scores_complements(n in 2usize..300, seed in any::<u64>()) {
        let (s, l) = scores_and_labels(n, seed);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let total = auc(&roc_curve(&s, &l).unwrap()) + auc(&roc_curve(&neg, &l).unwrap());
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roc_monotone_and_pd_nondecreasing(n in 2usize..300, seed in any::<u64>()) {
        let (s, l) = scores_and_labels(n, seed);
        let c = roc_curve(&s, &l).unwrap();
        prop_assert_eq!((c.points[0].p_fa, c.points[0].p_d), (0.0, 0.0));
        let last = c.points.last().unwrap();
        prop_assert_eq!((last.p_fa, last.p_d), (1.0, 1.0));
        for w in c.points.windows(2) {
            prop_assert!(w[1].p_fa >= w[0].p_fa && w[1].p_d >= w[0].p_d);
        }
        let mut prev = 0.0;
        for i in 0..=100 {
            let pd = pd_at_pfa(&c, i as f64 / 100.0);
            prop_assert!(pd >= prev - 1e-15 && (0.0..=1.0).contains(&pd));
            prev = pd;
        }
    }

    #[test]
    fn mixing_hits_requested_snr(snr in -5.0f64..25.0, seed in 0u64..1000, clean_rms in 0.001f64..0.5) {
        let clean = white_noise("c", 4000, clean_rms, seed).unwrap();
        let noise = white_noise("n", 5000, 0.2, seed + 1).unwrap();
        let m = mix_at_snr(&clean, &noise, snr, seed).unwrap();
        let achieved = 10.0 * (m.clean.mean_power() / m.scaled_noise.mean_power()).log10();
        prop_assert!((achieved - snr).abs() < 1e-9);
        prop_assert!(m.gain > 0.0);
        prop_assert!(m.noisy.peak() <= 1.0);
        for ((y, x), d) in m.noisy.samples.iter().zip(&m.clean.samples).zip(&m.scaled_noise.samples) {
            prop_assert!((y - d - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn mixing_is_deterministic(seed in 0u64..1000) {
        let clean = Utterance::new("c", (0..3000).map(|i| (i as f64 * 0.01).sin() * 0.3).collect()).unwrap();
        let noise = white_noise("n", 2000, 0.1, seed).unwrap();
        let a = mix_at_snr(&clean, &noise, 3.0, seed).unwrap();
        let b = mix_at_snr(&clean, &noise, 3.0, seed).unwrap();
        prop_assert_eq!(a.noisy, b.noisy);
        prop_assert_eq!(a.scaled_noise, b.scaled_noise);
    }
}
