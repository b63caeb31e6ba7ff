use planartn::tensor::{contract, eig_full, psd_sqrt_and_pinv_sqrt, qr_split, svd_truncate, Index, Label, Tensor};
use planartn::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(labels: &[(&str, usize)], rng: &mut impl Rng) -> Tensor {
    let idx = labels.iter().map(|&(l, d)| Index::new(l, d)).collect();
    Tensor::from_fn(idx, |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).unwrap()
}

fn labels(names: &[&str]) -> Vec<Label> {
    names.iter().map(|s| Label::new(s)).collect()
}

/// Element-wise contraction of `a[i,j,k]` and `b[k,l,m]` over `k`.
fn loop_oracle(a: &Tensor, b: &Tensor, d: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d.pow(4)];
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                for m in 0..d {
                    let s: C64 = (0..d).map(|k| a.get(&[i, j, k]) * b.get(&[k, l, m])).sum();
                    out[((i * d + j) * d + l) * d + m] = s;
                }
            }
        }
    }
    out
}

#[test]
fn contraction_matches_element_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random(&[("i", 4), ("j", 4), ("k", 4)], &mut rng);
    let b = random(&[("k", 4), ("l", 4), ("m", 4)], &mut rng);
    let c = contract(&a, &b).unwrap().permute(&labels(&["i", "j", "l", "m"])).unwrap();
    let oracle = loop_oracle(&a, &b, 4);
    let err = c.data().iter().zip(&oracle).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(err < 1e-13);
}

#[test]
fn chosen_spectrum_sets_discarded_weight() {
    // U diag(√0.8, √0.15, √0.04, √0.01) with U a permutation-phase matrix.
    let s = [0.8f64, 0.15, 0.04, 0.01].map(f64::sqrt);
    let t = Tensor::from_fn(vec![Index::new("a", 4), Index::new("b", 4)], |ix| {
        if ix[1] == (ix[0] + 1) % 4 {
            C64::from_polar(s[ix[0]], ix[0] as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    })
    .unwrap();
    let r = svd_truncate(&t, &labels(&["a"]), 2, 1e-14, &Label::new("s")).unwrap();
    assert!((r.discarded_weight - 0.05).abs() < 1e-14);
    assert_eq!((r.kept_rank, r.exact_rank), (2, 4));
}

#[test]
fn regularized_inverse_drops_tiny_modes() {
    let m = Tensor::diagonal(Label::new("e"), Label::new("e'"), &[1.0, 1e-16]);
    let (sqrt, inv, dropped) = psd_sqrt_and_pinv_sqrt(&m, &labels(&["e"]), 1e-12).unwrap();
    assert_eq!(dropped, 1);
    let s = sqrt.permute(&labels(&["e", "e'"])).unwrap();
    let i = inv.permute(&labels(&["e", "e'"])).unwrap();
    assert!((s.data()[0].re - 1.0).abs() < 1e-14 && (i.data()[0].re - 1.0).abs() < 1e-14);
    assert!(i.data()[3].norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn truncation_error_equals_discarded_weight(
        seed in any::<u64>(), d1 in 1usize..5, d2 in 1usize..5, d3 in 1usize..5, rank in 1usize..8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random(&[("a", d1), ("b", d2), ("c", d3)], &mut rng);
        let r = svd_truncate(&t, &labels(&["a", "c"]), rank, 1e-14, &Label::new("s")).unwrap();
        let approx = contract(&r.left, &r.right).unwrap().permute(&labels(&["a", "b", "c"])).unwrap();
        let rel = approx.distance(&t).unwrap().powi(2) / t.norm_sqr();
        prop_assert!((rel - r.discarded_weight).abs() < 1e-12);
        prop_assert!(r.kept_rank == rank.min(r.exact_rank));
    }

    #[test]
    fn contraction_is_bilinear_and_associative(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&[("i", 3), ("j", 2)], &mut rng);
        let b = random(&[("j", 2), ("k", 4)], &mut rng);
        let c = random(&[("k", 4), ("l", 3)], &mut rng);
        let alpha = C64::new(re, im);
        let lhs = contract(&a.scaled(alpha), &b).unwrap();
        let rhs = contract(&a, &b).unwrap().scaled(alpha);
        prop_assert!(lhs.distance(&rhs).unwrap() < 1e-13 * (1.0 + rhs.norm()));
        let left = contract(&contract(&a, &b).unwrap(), &c).unwrap();
        let right = contract(&a, &contract(&b, &c).unwrap()).unwrap().permute(&labels(&["i", "l"])).unwrap();
        let left = left.permute(&labels(&["i", "l"])).unwrap();
        prop_assert!(left.distance(&right).unwrap() < 1e-12 * (1.0 + left.norm()));
    }

    #[test]
    fn hermitian_eigenvalues_are_real(seed in any::<u64>(), d in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&[("r", d), ("c", d)], &mut rng);
        let ad = a.conj().map_labels(|l| Label::new(if l.as_str() == "r" { "c" } else { "r" }));
        let h = a.add_scaled(&ad, C64::new(1.0, 0.0)).unwrap();
        for z in eig_full(&h, &labels(&["r"])).unwrap() {
            prop_assert!(z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn qr_factors_reconstruct(seed in any::<u64>(), d1 in 1usize..5, d2 in 1usize..5, d3 in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random(&[("a", d1), ("b", d2), ("c", d3)], &mut rng);
        let (q, r) = qr_split(&t, &labels(&["a", "b"]), &Label::new("q")).unwrap();
        let back = contract(&q, &r).unwrap().permute(&labels(&["a", "b", "c"])).unwrap();
        prop_assert!(back.distance(&t).unwrap() < 1e-12 * (1.0 + t.norm()));
    }
}
