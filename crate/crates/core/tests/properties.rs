use cma_core::grid::{complex_hessian_fd, complex_hessian_fd_at, complex_laplacian_fd, lp_norm, real_hessian_fd_at, sample};
use cma_core::moser::{b_product, critical_exponent, p_sequence, third_order_subsum_check, ThirdOrderSample};
use cma_core::viscosity::complex_hessian_of_jet;
use cma_core::{
    g_operator, ComplexPoint, GridDomain, GridField, HermitianForm, MoserParams, QuadraticJet, SolutionFamily, Verdict,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cplx(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianForm {
    HermitianForm::new(n, (0..n * n).map(|_| cplx(rng)).collect()).unwrap()
}

/// Gram-Schmidt on the columns of a random complex matrix.
fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<Complex64> = (0..n).map(|_| cplx(rng)).collect();
        for c in &cols {
            let proj: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= proj * ci;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    (0..n * n).map(|k| cols[k % n][k / n]).collect()
}

/// `U diag(lambda) U*` for a random unitary `U`.
fn with_spectrum(lambda: &[f64], rng: &mut ChaCha8Rng) -> HermitianForm {
    let u = random_unitary(lambda.len(), rng);
    let n = lambda.len();
    let u_star: Vec<Complex64> = (0..n * n).map(|k| u[(k % n) * n + k / n].conj()).collect();
    HermitianForm::diagonal(lambda).congruence(&u_star)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn det_is_unitarily_invariant(n in 1usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(n, &mut rng);
        let u = random_unitary(n, &mut rng);
        let det = h.det();
        let rotated = h.congruence(&u).det();
        // cancellation makes relative error meaningless when det is tiny against the entries
        let scale = h.scale().powi(n as i32).max(f64::MIN_POSITIVE);
        prop_assert!((det - rotated).abs() <= 1e-10 * det.abs().max(1e-3 * scale), "{det} vs {rotated}");
    }

    #[test]
    fn inverse_round_trip(n in 1usize..=6, seed in any::<u64>(), logs in prop::collection::vec(-3.0f64..3.0, 6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda: Vec<f64> = logs[..n].iter().map(|l| 10f64.powf(*l)).collect();
        let h = with_spectrum(&lambda, &mut rng);
        let back = h.inverse().unwrap().inverse().unwrap();
        prop_assert!(back.max_abs_diff(&h) <= 1e-8 * h.scale().max(1.0), "{}", back.max_abs_diff(&h));
    }

    #[test]
    fn log_det_matches_det(n in 1usize..=6, seed in any::<u64>(), logs in prop::collection::vec(-1.0f64..1.0, 6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda: Vec<f64> = logs[..n].iter().map(|l| 10f64.powf(*l)).collect();
        let h = with_spectrum(&lambda, &mut rng);
        let det = h.det();
        prop_assume!((1e-6..=1e6).contains(&det));
        let ld = h.log_det().unwrap();
        prop_assert!((ld - det.ln()).abs() <= 1e-10 * ld.abs().max(1.0), "{ld} vs {}", det.ln());
    }

    #[test]
    fn identity_shift_moves_min_eigenvalue(n in 1usize..=6, seed in any::<u64>(), c in 1e-3f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(n, &mut rng);
        let shifted = h.add_scaled_identity(c);
        let gain = shifted.psd_report(0.0).min_eigenvalue - h.psd_report(0.0).min_eigenvalue;
        prop_assert!((gain - c).abs() <= 1e-12 * c.max(1.0) * 10.0, "{gain} vs {c}");
    }

    #[test]
    fn trace_of_grid_hessian_is_laplacian(n in 1usize..=2, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..4 * n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let domain = GridDomain::cube(n, 1.0, 5).unwrap();
        let u = sample(&domain, |x| {
            x.iter().zip(&coeffs).map(|(xi, c)| c * xi * xi * xi).sum::<f64>()
                + x.iter().zip(&coeffs[2 * n..]).map(|(xi, c)| c * (3.0 * xi).sin()).sum::<f64>()
        })
        .unwrap();
        let lap = complex_laplacian_fd(&u);
        for idx in 0..u.len() {
            if domain.is_boundary(idx) {
                prop_assert!(lap.values()[idx].is_nan());
            } else {
                prop_assert_eq!(complex_hessian_fd(&u, idx).unwrap().trace(), lap.values()[idx]);
            }
        }
    }

    #[test]
    fn complex_laplacian_is_quarter_real_laplacian(n in 1usize..=3, seed in any::<u64>(), h in 1e-3f64..1e-1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = |x: &[f64]| x.iter().zip(&coeffs).map(|(xi, c)| (c * xi).exp() + xi * xi * c).sum::<f64>();
        let at = ComplexPoint::new((0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let complex = complex_hessian_fd_at(&f, &at, h).trace();
        let real = real_hessian_fd_at(&f, &at, h);
        let m = 2 * n;
        let quarter = 0.25 * (0..n).map(|i| real[2 * i * m + 2 * i] + real[(2 * i + 1) * m + 2 * i + 1]).sum::<f64>();
        prop_assert_eq!(complex, quarter);
    }

    #[test]
    fn lp_norm_is_monotone(seed in any::<u64>(), p in 0.5f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let domain = GridDomain::cube(1, 1.0, 9).unwrap();
        let f: Vec<f64> = (0..domain.node_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g: Vec<f64> = f.iter().map(|v| v.signum() * (v.abs() + rng.random_range(0.0..1.0))).collect();
        let nf = lp_norm(&GridField::from_values(domain.clone(), f).unwrap(), p);
        let ng = lp_norm(&GridField::from_values(domain, g).unwrap(), p);
        prop_assert!(nf <= ng);
    }

    #[test]
    fn eps_families_are_plurisubharmonic(m in 2usize..=4, eps in 1e-4f64..2.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = if m == 2 { SolutionFamily::pogorelov2(eps) } else { SolutionFamily::pogorelov_n(m, eps) };
        for _ in 0..8 {
            let z = ComplexPoint::new((0..2 * m).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
            let h = family.eval_analytic_hessian(&z).unwrap();
            prop_assert!(h.psd_report(0.0).is_pd, "{:?}", h);
        }
    }

    #[test]
    fn scaling_bridge_is_exact(m in 3usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mf = m as f64;
        let bridged = mf.powf(2.0 / mf) * SolutionFamily::pogorelov_n(m, 0.0).value(&x);
        prop_assert_eq!(bridged, SolutionFamily::theorem_v(m).value(&x));
    }

    #[test]
    fn p_sequence_recurrence(n in 2usize..=6, a in 1e-3f64..20.0) {
        let params = MoserParams::new(n, a);
        let nf = n as f64;
        for k in 0..=60 {
            let lhs = 2.0 * p_sequence(&params, k + 1).unwrap() + nf;
            let rhs = 2.0 * nf * p_sequence(&params, k).unwrap() / (nf - 1.0);
            prop_assert!(rel(lhs, rhs) <= 1e-12, "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn b_product_increases_to_its_bound(n in 2usize..=6, a in 0.1f64..10.0) {
        let params = MoserParams::new(n, a);
        let limit = params.p0() / a;
        let mut prev = 1.0;
        for k in 1..=60 {
            let value = b_product(&params, k).unwrap().value;
            let step = n as f64 / (2.0 * p_sequence(&params, k).unwrap());
            if step > 1e-14 {
                prop_assert!(value > prev, "k={k}");
            } else {
                prop_assert!(value >= prev, "k={k}");
            }
            prop_assert!(value <= limit + 1e-12, "k={k}: {value} > {limit}");
            prev = value;
        }
    }

    #[test]
    fn critical_exponent_increases_in_a(n in 2usize..=6, a in 1e-3f64..10.0, da in 1e-3f64..5.0) {
        let lo = critical_exponent(&MoserParams::new(n, a)).unwrap();
        let hi = critical_exponent(&MoserParams::new(n, a + da)).unwrap();
        prop_assert!(hi > lo);
        prop_assert!(lo > (n * n) as f64);
    }

    #[test]
    fn subsum_rescaling(n in 2usize..=4, seed in any::<u64>(), c in 1e-2f64..1e2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = ThirdOrderSample::random(n, &mut rng);
        let base = third_order_subsum_check(&s);
        let scaled = third_order_subsum_check(&s.rescaled(c));
        prop_assert!(rel(scaled.lhs * c * c, base.lhs) <= 1e-12);
        prop_assert!(rel(scaled.rhs * c * c, base.rhs) <= 1e-12);
        prop_assert_eq!(scaled.holds, base.holds);
        prop_assert!(base.holds);
    }

    #[test]
    fn g_operator_reverses_psd_order(n in 1usize..=4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lx: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let ld: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = with_spectrum(&lx, &mut rng);
        let d = with_spectrum(&ld, &mut rng);
        let y = HermitianForm::new(n, x.entries().iter().zip(d.entries()).map(|(a, b)| a + b).collect()).unwrap();
        let (gx, gy) = (g_operator(&x, 1e-9), g_operator(&y, 1e-9));
        prop_assert!(gx.is_finite() && gy.is_finite());
        prop_assert!(gx >= gy - 1e-12 * (1.0 + gy.abs()), "{gx} < {gy}");
    }

    #[test]
    fn jet_hessian_is_linear(n in 1usize..=3, seed in any::<u64>(), k in -8i32..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 2 * n;
        let mut sym = || {
            let mut h = vec![0.0; m * m];
            for a in 0..m {
                for b in a..m {
                    let v = rng.random_range(-5.0..5.0);
                    h[a * m + b] = v;
                    h[b * m + a] = v;
                }
            }
            h
        };
        let (h1, h2) = (sym(), sym());
        let jet = |h: Vec<f64>| complex_hessian_of_jet(&QuadraticJet::new(ComplexPoint::origin(n), 0.0, vec![0.0; m], h).unwrap());
        let scale = 2f64.powi(k);
        // power-of-two scaling commutes with rounding
        let scaled = jet(h1.iter().map(|v| v * scale).collect());
        let expected: Vec<Complex64> = jet(h1.clone()).entries().iter().map(|e| e * scale).collect();
        prop_assert_eq!(scaled.entries(), expected.as_slice());
        let sum = jet(h1.iter().zip(&h2).map(|(a, b)| a + b).collect());
        let parts: Vec<Complex64> = jet(h1).entries().iter().zip(jet(h2).entries()).map(|(a, b)| a + b).collect();
        for (s, p) in sum.entries().iter().zip(&parts) {
            prop_assert!((s - p).norm() <= 1e-14 * 10.0);
        }
    }

    #[test]
    fn verdicts_are_monotone_in_slope(a in -3.0f64..1.0, b in -3.0f64..1.0) {
        let rank = |v: Verdict| match v {
            Verdict::Divergent => 0,
            Verdict::Inconclusive => 1,
            Verdict::Bounded => 2,
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rank(Verdict::from_slope(lo)) <= rank(Verdict::from_slope(hi)));
    }
}

#[test]
fn critical_exponent_tends_to_n_squared() {
    for n in 2..=5usize {
        let nf = n as f64;
        let mut prev = f64::INFINITY;
        for e in 1..=6 {
            let a = 10f64.powi(-e);
            let gap = critical_exponent(&MoserParams::new(n, a)).unwrap() - nf * nf;
            assert!(gap > 0.0 && gap < prev);
            assert!(gap <= 2.0 * nf * a / (nf - 1.0) * (1.0 + 1e-9) + 1e-12, "n={n} a={a}: {gap}");
            prev = gap;
        }
    }
}

#[test]
fn scan_verdicts_are_monotone_in_p() {
    use cma_core::regularity::{w2p_divergence_scan, W2pScanConfig};
    let family = SolutionFamily::pogorelov2(0.0);
    let mut cfg = W2pScanConfig::for_family(&family);
    cfg.base_points = 21;
    let scan = w2p_divergence_scan(&family, &[1.0, 1.5, 2.5, 3.0], &cfg).unwrap();
    assert!(scan.is_monotone());
}
