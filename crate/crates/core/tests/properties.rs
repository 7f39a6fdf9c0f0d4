//! Cross-module properties of the library, checked on random inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sigtest::cvar::{
    empirical_cvar, empirical_var, fit_max_surrogate, smooth_cvar_coefficients,
    smooth_cvar_sample_objective, CvarSurrogateSpec,
};
use sigtest::datasets::{
    simulate_bm, simulate_spiked_bm, stream_as_path, SpikeConfig, SpikeEnvelope,
};
use sigtest::multiple_testing::{benjamini_hochberg, storey_bh};
use sigtest::signature::{chen_concat, signature, truncated_sig_kernel};
use sigtest::statistics::{
    distance_to_mean, distance_to_mean_kernel, fit_conformance, fit_expected_signature_with_corpus,
    gram_matrix, ocsvm_fit, variance_norm, ConformanceModel,
};
use sigtest::tails::{
    deviation, deviation_inverse, empirical_pvalue, type1_bound, type1_bound_clipped,
    type1_bound_inverse, type1_threshold, type2_lower_bound, DeviationKind, TciParams, Type2Params,
};
use sigtest::tensor::{pairing, shuffle, shuffle_words, SparseTensor, TruncatedTensor, Word};
use sigtest::{PathStream, Signature};

fn random_path(rng: &mut ChaCha8Rng, segments: usize, dim: usize) -> PathStream {
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut points = vec![(0..dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect::<Vec<f64>>()];
    for _ in 0..segments {
        t += rng.random_range(0.1..1.0);
        times.push(t);
        points.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    PathStream::new(times, points).unwrap()
}

fn random_word(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> Word {
    Word::new((0..len).map(|_| rng.random_range(1..=dim)).collect())
}

fn random_sparse(rng: &mut ChaCha8Rng, dim: usize, max_len: usize, terms: usize) -> SparseTensor {
    let t = (0..terms).map(|_| {
        let len = rng.random_range(0..=max_len);
        (random_word(rng, dim, len), rng.random_range(-2.0..2.0))
    });
    SparseTensor::from_terms(dim, max_len, t).unwrap()
}

fn close(a: &SparseTensor, b: &SparseTensor, tol: f64) -> bool {
    let level = a.max_word_len().max(b.max_word_len());
    let (x, y) = (a.to_dense(level), b.to_dense(level));
    x.coeffs()
        .iter()
        .zip(y.coeffs())
        .all(|(p, q)| (p - q).abs() <= tol * (1.0 + p.abs()))
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shuffle_is_commutative_associative_and_unital(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (random_sparse(&mut rng, 2, 2, 3), random_sparse(&mut rng, 2, 2, 3), random_sparse(&mut rng, 2, 2, 3));
        prop_assert!(close(&shuffle(&a, &b, 4).unwrap(), &shuffle(&b, &a, 4).unwrap(), 1e-12));
        let left = shuffle(&shuffle(&a, &b, 4).unwrap(), &c, 6).unwrap();
        let right = shuffle(&a, &shuffle(&b, &c, 4).unwrap(), 6).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
        let unit = SparseTensor::unit(2);
        let u = shuffle(&unit, &a, 2).unwrap();
        let (ud, ad) = (u.to_dense(2), a.to_dense(2));
        prop_assert_eq!(ud.coeffs(), ad.coeffs());
    }

    #[test]
    fn shuffle_multiplicities_sum_to_binomial(seed in any::<u64>(), lu in 0usize..5, lv in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = (random_word(&mut rng, 3, lu), random_word(&mut rng, 3, lv));
        let total: u64 = shuffle_words(&u, &v).values().sum();
        prop_assert_eq!(total, binomial((lu + lv) as u64, lu as u64));
    }

    #[test]
    fn pairing_is_bilinear(seed in any::<u64>(), s in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_t = || {
            TruncatedTensor::from_coeffs(2, 3, (0..15).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let (a, b, c) = (rand_t(), rand_t(), rand_t());
        let mut comb = a.clone();
        comb.add_scaled(&b, s).unwrap();
        let lhs = pairing(&comb, &c).unwrap();
        let rhs = pairing(&a, &c).unwrap() + s * pairing(&b, &c).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        prop_assert_eq!(pairing(&a, &c).unwrap(), pairing(&c, &a).unwrap());
    }

    #[test]
    fn shuffle_identity_on_signatures(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_path(&mut rng, 5, 2);
        let m = 2;
        let (w1, w2) = (random_sparse(&mut rng, 2, m, 4), random_sparse(&mut rng, 2, m, 4));
        let s = signature(&x, 2 * m).unwrap();
        let lhs = w1.pair_dense(s.tensor()).unwrap() * w2.pair_dense(s.tensor()).unwrap();
        let rhs = shuffle(&w1, &w2, 2 * m).unwrap().pair_dense(s.tensor()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn chen_identity_split_anywhere(seed in any::<u64>(), cut in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_path(&mut rng, 6, 3);
        let (t, v) = (x.times(), x.values());
        let head = PathStream::from_flat(t[..=cut].to_vec(), 3, v[..3 * (cut + 1)].to_vec()).unwrap();
        let tail = PathStream::from_flat(t[cut..].to_vec(), 3, v[3 * cut..].to_vec()).unwrap();
        let whole = signature(&x, 4).unwrap();
        let joined = chen_concat(&signature(&head, 4).unwrap(), &signature(&tail, 4).unwrap()).unwrap();
        for (a, b) in whole.tensor().coeffs().iter().zip(joined.tensor().coeffs()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn subdivision_and_retiming_leave_the_signature_unchanged(seed in any::<u64>(), frac in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_path(&mut rng, 4, 2);
        let (t0, t1) = (x.times()[1], x.times()[2]);
        let tm = t0 + frac * (t1 - t0);
        let mut times = x.times().to_vec();
        times.insert(2, tm);
        let mut points: Vec<Vec<f64>> = x.points().map(<[f64]>::to_vec).collect();
        points.insert(2, x.value_at(tm));
        let finer = PathStream::new(times, points.clone()).unwrap();
        let retimed = PathStream::new((0..points.len()).map(|k| (k * k) as f64).collect(), points).unwrap();
        let s = signature(&x, 4).unwrap();
        for other in [&finer, &retimed] {
            let o = signature(other, 4).unwrap();
            for (a, b) in s.tensor().coeffs().iter().zip(o.tensor().coeffs()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn scaling_multiplies_level_k_by_lambda_to_the_k(seed in any::<u64>(), lambda in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_path(&mut rng, 4, 2);
        let scaled = PathStream::from_flat(x.times().to_vec(), 2, x.values().iter().map(|v| lambda * v).collect()).unwrap();
        let (s, t) = (signature(&x, 4).unwrap(), signature(&scaled, 4).unwrap());
        for k in 0..=4 {
            for (a, b) in s.tensor().level_slice(k).iter().zip(t.tensor().level_slice(k)) {
                let expect = a * lambda.powi(k as i32);
                prop_assert!((b - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn signature_kernel_is_psd(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths: Vec<PathStream> = (0..n).map(|_| random_path(&mut rng, 3, 2)).collect();
        let k = DMatrix::from_fn(n, n, |i, j| truncated_sig_kernel(&paths[i], &paths[j], 3).unwrap());
        let scale = k.amax().max(1.0);
        let min = k.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-8 * scale, "min eigenvalue {}", min);
    }

    #[test]
    fn distance_forms_agree_and_corpus_scores_vanish(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths: Vec<PathStream> = (0..12).map(|_| random_path(&mut rng, 4, 2)).collect();
        let m = fit_expected_signature_with_corpus(&paths, 3).unwrap();
        let probe = random_path(&mut rng, 4, 2);
        let (a, b) = (distance_to_mean(&probe, &m).unwrap(), distance_to_mean_kernel(&probe, &m).unwrap());
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a));
        let c = fit_conformance(&paths, 2, None).unwrap();
        let own = signature(&paths[3], 2).unwrap();
        prop_assert!(c.score_signature(own.tensor()).unwrap() <= 1e-10);
        prop_assert!(c.score_signature(signature(&probe, 2).unwrap().tensor()).unwrap() > 1e-10);
    }

    #[test]
    fn identity_covariance_gives_euclidean_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigs: Vec<Signature> = (0..3).map(|_| signature(&random_path(&mut rng, 3, 2), 2).unwrap()).collect();
        let c = ConformanceModel::with_covariance(&sigs, DMatrix::identity(6, 6), 0.0).unwrap();
        let v = TruncatedTensor::from_coeffs(2, 2, (0..7).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
        let euclid = v.coeffs()[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((variance_norm(&v, &c).unwrap() - euclid).abs() <= 1e-12 * (1.0 + euclid));
    }

    #[test]
    fn ocsvm_solution_is_feasible(seed in any::<u64>(), n in 4usize..40, nu in 0.3f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigs: Vec<TruncatedTensor> = (0..n).map(|_| signature(&random_path(&mut rng, 3, 2), 2).unwrap().into_tensor()).collect();
        let k = gram_matrix(&sigs).unwrap();
        let sol = ocsvm_fit(&k, nu).unwrap();
        let ub = 1.0 / (nu * n as f64);
        prop_assert!((sol.alphas.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(sol.alphas.iter().all(|&a| a >= -1e-15 && a <= ub + 1e-12));
        prop_assert!(sol.kkt_residual <= 1e-6);
    }

    #[test]
    fn cvar_dominates_var_and_is_equivariant(
        xs in prop::collection::vec(-10.0f64..10.0, 1..200),
        alpha in 0.0f64..0.99,
        c in -5.0f64..5.0,
        lambda in 0.1f64..5.0,
    ) {
        let cvar = empirical_cvar(&xs, alpha).unwrap();
        prop_assert!(cvar >= empirical_var(&xs, alpha).unwrap() - 1e-12);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((empirical_cvar(&shifted, alpha).unwrap() - cvar - c).abs() <= 1e-9 * (1.0 + cvar.abs()));
        let scaled: Vec<f64> = xs.iter().map(|x| x * lambda).collect();
        prop_assert!((empirical_cvar(&scaled, alpha).unwrap() - lambda * cvar).abs() <= 1e-9 * (1.0 + cvar.abs()));
    }

    #[test]
    fn smooth_cvar_polynomial_matches_sample_objective(seed in any::<u64>(), n in 2usize..5, level in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths: Vec<PathStream> = (0..30).map(|_| random_path(&mut rng, 3, 2)).collect();
        let sigs: Vec<TruncatedTensor> = paths.iter().map(|p| signature(p, n * level).unwrap().into_tensor()).collect();
        let mut es = TruncatedTensor::zeros(2, n * level);
        for s in &sigs {
            es.add_scaled(s, 1.0 / sigs.len() as f64).unwrap();
        }
        let w = TruncatedTensor::from_coeffs(2, level, (0..sigtest::tensor::dense_len(2, level)).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let scores: Vec<f64> = sigs.iter().map(|s| pairing(&w, &s.truncated(level)).unwrap()).collect();
        let spec = CvarSurrogateSpec::fitted(n, 3.0, 0.9).unwrap();
        let poly = smooth_cvar_coefficients(&w, &es, &spec).unwrap();
        for _ in 0..5 {
            let rho = rng.random_range(-2.0..2.0);
            let direct = smooth_cvar_sample_objective(&scores, rho, &spec).unwrap();
            prop_assert!((poly.eval(rho) - direct).abs() <= 1e-8 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn type1_threshold_and_bound_are_inverse(alpha in 1e-6f64..0.99, level in 1usize..6, dim in 1usize..4, w in 0.1f64..10.0, c1 in 0.1f64..5.0, c2 in 1.0f64..5.0) {
        let tci = TciParams { c1, c2, ..TciParams::default() };
        let exact = type1_bound_inverse(alpha, level, dim, w, &tci).unwrap();
        if exact > 0.0 {
            let b = type1_bound(exact, level, dim, w, &tci).unwrap();
            prop_assert!((b - alpha).abs() <= 1e-12 + 1e-9 * alpha, "bound {} vs α {}", b, alpha);
        }
        // the displayed threshold dominates the exact inverse once C₁ ≥ 1
        let tci = TciParams { c1: c1.max(1.0), c2, ..TciParams::default() };
        let r = type1_threshold(alpha, level, dim, w, &tci).unwrap();
        if r > 0.0 {
            prop_assert!(type1_bound(r, level, dim, w, &tci).unwrap() <= alpha + 1e-12);
        }
    }

    #[test]
    fn type1_bound_is_a_monotone_probability(r1 in 0.0f64..100.0, dr in 0.0f64..100.0, level in 1usize..5) {
        let tci = TciParams::default();
        let (a, b) = (
            type1_bound_clipped(r1, level, 2, 1.0, &tci).unwrap(),
            type1_bound_clipped(r1 + dr, level, 2, 1.0, &tci).unwrap(),
        );
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a);
    }

    #[test]
    fn deviation_inverse_round_trips(e in -6.0f64..6.0, q in 1.0f64..3.0) {
        let t = 10f64.powf(e);
        for kind in [DeviationKind::Quadratic, DeviationKind::Rde { q }] {
            let back = deviation_inverse(&kind, deviation(&kind, t).unwrap()).unwrap();
            prop_assert!((back - t).abs() <= 1e-12 * t.max(1e-300) * 10.0, "{:?}: {} vs {}", kind, back, t);
        }
    }

    #[test]
    fn type2_bound_monotone(r1 in 0.01f64..50.0, dr in 0.0f64..50.0, h1 in 0.0f64..5.0, dh in 0.0f64..5.0) {
        let tci = TciParams::default();
        let params = |h: f64| Type2Params {
            level: 3, dim: 2, w_norm: 1.0, relative_entropy: h, holder_moment: 0.5, constant: 1.0,
            exponent: Default::default(),
        };
        let at = |r: f64, h: f64| type2_lower_bound(r, &params(h), &tci).unwrap().value;
        prop_assert!(at(r1 + dr, h1) >= at(r1, h1) - 1e-15);
        prop_assert!(at(r1, h1 + dh) <= at(r1, h1) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&at(r1, h1)));
    }

    #[test]
    fn bh_nested_and_below_alpha(p in prop::collection::vec(0.0f64..=1.0, 1..60), a in 0.01f64..0.4, da in 0.0f64..0.5) {
        let r1 = benjamini_hochberg(&p, a).unwrap();
        let r2 = benjamini_hochberg(&p, (a + da).min(0.99)).unwrap();
        for i in 0..p.len() {
            prop_assert!(!r1[i] || r2[i]);
            prop_assert!(!r1[i] || p[i] <= a);
        }
        let s = storey_bh(&p, a, 0.5).unwrap();
        if s.pi0 == 1.0 {
            prop_assert_eq!(s.rejected, r1);
        }
    }

    #[test]
    fn generators_replay_and_spike_is_bm_plus_envelope(seed in any::<u64>(), eps in 0.0f64..6.0) {
        let a = simulate_bm(4, 30, &DMatrix::identity(2, 2), 1.0, seed).unwrap();
        prop_assert_eq!(&a, &simulate_bm(4, 30, &DMatrix::identity(2, 2), 1.0, seed).unwrap());
        for envelope in [SpikeEnvelope::Scaled, SpikeEnvelope::Capped] {
            let theta = 0.37;
            let cfg = SpikeConfig { epsilon: eps, steps: 40, envelope, theta: Some(theta), ..SpikeConfig::default() };
            let sp = simulate_spiked_bm(&cfg, 3, seed).unwrap();
            let bm = simulate_bm(3, 40, &DMatrix::identity(1, 1), 2.0, seed).unwrap();
            for (s, b) in sp.iter().zip(&bm) {
                for ((t, x), y) in s.times().iter().zip(s.values()).zip(b.values()) {
                    prop_assert_eq!(*x, y + envelope.eval(eps, *t, theta));
                }
            }
        }
    }

    #[test]
    fn last_value_padding_keeps_the_stream_signature(seed in any::<u64>(), len in 1usize..6, extra in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stream: Vec<Vec<f64>> = (0..len).map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
        let a = signature(&stream_as_path(&stream, len).unwrap(), 4).unwrap();
        let b = signature(&stream_as_path(&stream, len + extra).unwrap(), 4).unwrap();
        for (x, y) in a.tensor().coeffs().iter().zip(b.tensor().coeffs()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn smooth_cvar_approaches_empirical_cvar_as_degree_grows() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<f64> = (0..2000)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * 0.4)
        .collect();
    let errors: Vec<f64> = [2usize, 4, 8]
        .iter()
        .map(|&n| {
            let spec = CvarSurrogateSpec::fitted(n, 3.0, 0.9).unwrap();
            (0..=200)
                .map(|i| -0.5 + 1.5 * i as f64 / 200.0)
                .map(|rho| {
                    let smooth = smooth_cvar_sample_objective(&xs, rho, &spec).unwrap();
                    let hinge = rho
                        + xs.iter().map(|x| (x - rho).max(0.0)).sum::<f64>()
                            / (0.1 * xs.len() as f64);
                    (smooth - hinge).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let exact = empirical_cvar(&xs, 0.9).unwrap();
    let best = |n| {
        let spec = CvarSurrogateSpec::fitted(n, 3.0, 0.9).unwrap();
        (0..=600)
            .map(|i| {
                smooth_cvar_sample_objective(&xs, -0.5 + 1.5 * i as f64 / 600.0, &spec).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    };
    assert!((best(8) - exact).abs() <= errors[2] + 1e-9);
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(
        fit_max_surrogate(8, 4.0).unwrap().sup_error < fit_max_surrogate(2, 4.0).unwrap().sup_error
    );
}

#[test]
fn conformal_pvalues_are_super_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let reps = 4000;
    let mut hits = [0usize; 3];
    let ts = [0.01, 0.05, 0.1];
    for _ in 0..reps {
        let cal: Vec<f64> = (0..99).map(|_| rng.sample(StandardNormal)).collect();
        let p = empirical_pvalue(rng.sample(StandardNormal), &cal).unwrap();
        for (h, t) in hits.iter_mut().zip(ts) {
            *h += usize::from(p <= t);
        }
    }
    for (h, t) in hits.iter().zip(ts) {
        let rate = *h as f64 / reps as f64;
        assert!(
            rate <= t + 3.0 * (t * (1.0 - t) / reps as f64).sqrt(),
            "t = {t}: {rate}"
        );
    }
}
