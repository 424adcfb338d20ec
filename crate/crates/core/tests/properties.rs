//! Invariants of channels, λ-SR and the region machinery on random inputs.

use bcbounds::bounds::{evaluate_uv_point, lp_support, region, ProductAuxiliary, RegionKind, UvAuxiliary};
use bcbounds::channel::{deterministic_kernel, make_product, Channel};
use bcbounds::marton::{lambda_sr_value, AuxiliaryJoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

fn dirichlet(rng: &mut ChaCha8Rng, n: usize, alpha: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    Dirichlet::new(&vec![alpha; n]).unwrap().sample(rng)
}

fn channel(seed: u64, nx: usize, ny: usize, nz: usize) -> Channel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = (0..nx).flat_map(|_| dirichlet(&mut rng, ny * nz, 0.7)).collect();
    Channel::new(nx, ny, nz, flat).unwrap()
}

fn aux(seed: u64, dims: (usize, usize, usize), nx: usize) -> AuxiliaryJoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AuxiliaryJoint::new(dims.0, dims.1, dims.2, nx, dirichlet(&mut rng, dims.0 * dims.1 * dims.2 * nx, 0.5)).unwrap()
}

fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

/// Channel with one deterministic receiver of the given side.
fn with_deterministic(seed: u64, nx: usize, n_other: usize, y_side: bool) -> Channel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class: Vec<usize> = (0..nx).map(|_| rng.gen_range(0..2)).collect();
    let det = deterministic_kernel(&class, 2);
    let other: Vec<Vec<f64>> = (0..nx).map(|_| dirichlet(&mut rng, n_other, 1.0)).collect();
    if y_side {
        Channel::from_marginals(&det, &other).unwrap()
    } else {
        Channel::from_marginals(&other, &det).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lambda_sr_is_affine_in_lambda(seed in any::<u64>(), l in 0.0..=1.0f64) {
        let c = channel(seed, 3, 2, 3);
        let a = aux(seed ^ 1, (2, 2, 3), 3);
        let v = |l| lambda_sr_value(&c, &a, l).unwrap();
        prop_assert!((v(l) - (l * v(1.0) + (1.0 - l) * v(0.0))).abs() < 1e-10);
    }

    #[test]
    fn mirror_swaps_lambda(seed in any::<u64>(), l in 0.0..=1.0f64) {
        let c = channel(seed, 3, 2, 3);
        let a = aux(seed ^ 2, (2, 3, 2), 3);
        let swapped = a.tensor().permute_axes(&[1, 0, 2, 3]).unwrap();
        let b = AuxiliaryJoint::new(3, 2, 2, 3, swapped.into_values()).unwrap();
        let direct = lambda_sr_value(&c, &a, l).unwrap();
        let mirrored = lambda_sr_value(&c.mirror(), &b, 1.0 - l).unwrap();
        prop_assert!((direct - mirrored).abs() < 1e-10);
        prop_assert_eq!(c.mirror().mirror(), c);
    }

    #[test]
    fn relabeling_preserves_lambda_sr(seed in any::<u64>(), l in 0.0..=1.0f64) {
        let c = channel(seed, 3, 3, 2);
        let a = aux(seed ^ 3, (2, 2, 2), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let (px, py, pz) = (permutation(&mut rng, 3), permutation(&mut rng, 3), permutation(&mut rng, 2));
        let r = c.relabel(&px, &py, &pz).unwrap();
        let mut moved = vec![0.0; a.values().len()];
        for (i, &p) in a.values().iter().enumerate() {
            moved[(i / 3) * 3 + px[i % 3]] = p;
        }
        let b = AuxiliaryJoint::new(2, 2, 2, 3, moved).unwrap();
        prop_assert!((lambda_sr_value(&c, &a, l).unwrap() - lambda_sr_value(&r, &b, l).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn product_is_associative(seed in any::<u64>()) {
        let (a, b, c) = (channel(seed, 2, 2, 1), channel(seed ^ 5, 2, 1, 2), channel(seed ^ 6, 3, 2, 2));
        let left = make_product(make_product(&a, &b).unwrap().flattened(), &c).unwrap();
        let right = make_product(&a, make_product(&b, &c).unwrap().flattened()).unwrap();
        let (l, r) = (left.flattened(), right.flattened());
        prop_assert_eq!((l.nx(), l.ny(), l.nz()), (r.nx(), r.ny(), r.nz()));
        prop_assert!(l.flat().iter().zip(r.flat()).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn product_auxiliary_lambda_sr_adds(seed in any::<u64>(), l in 0.0..=1.0f64) {
        let (c1, c2) = (channel(seed, 2, 2, 2), channel(seed ^ 7, 3, 2, 2));
        let (a1, a2) = (aux(seed ^ 8, (2, 2, 2), 2), aux(seed ^ 9, (2, 1, 2), 3));
        let pc = make_product(&c1, &c2).unwrap();
        let joint = AuxiliaryJoint::product(&a1, &a2).unwrap();
        let sum = lambda_sr_value(&c1, &a1, l).unwrap() + lambda_sr_value(&c2, &a2, l).unwrap();
        prop_assert!((lambda_sr_value(pc.flattened(), &joint, l).unwrap() - sum).abs() < 1e-9);
    }

    #[test]
    fn channel_json_round_trip(seed in any::<u64>()) {
        let c = channel(seed, 3, 2, 2);
        let text = c.to_json();
        let back: Channel = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn uv_sum_rate_bounded_by_its_terms(seed in any::<u64>()) {
        let c = channel(seed, 2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 10);
        let a = UvAuxiliary::new(3, 3, 2, dirichlet(&mut rng, 18, 0.5)).unwrap();
        let p = evaluate_uv_point(&c, &a).unwrap();
        prop_assert!(p.sum_rate() <= p.sum_u + 1e-12 && p.sum_rate() <= p.sum_v + 1e-12);
        prop_assert!(p.r1 >= -1e-12 && p.r2 >= -1e-12);
    }

    #[test]
    fn outer_polytope_sits_in_semi_deterministic(
        seed in any::<u64>(),
        w in prop::array::uniform3(0.0..2.0f64),
        pin in any::<bool>(),
    ) {
        prop_assume!(w.iter().any(|&v| v > 1e-3));
        let c1 = with_deterministic(seed, 3, 3, true);
        let c2 = with_deterministic(seed ^ 11, 2, 3, false);
        let pc = make_product(&c1, &c2).unwrap();
        prop_assert!(pc.is_reversely_semi_deterministic());
        let a = ProductAuxiliary { a1: aux(seed ^ 12, (3, 3, 3), 3), a2: aux(seed ^ 13, (2, 2, 2), 2) };
        let outer = lp_support(&region(RegionKind::ProductOuter, &pc, &a).unwrap().inequalities, w, pin);
        let semi = lp_support(&region(RegionKind::SemiDeterministic, &pc, &a).unwrap().inequalities, w, pin);
        prop_assert!(outer.value <= semi.value + 1e-9, "{} > {}", outer.value, semi.value);
    }

    #[test]
    fn lp_support_dominates_feasible_points(seed in any::<u64>(), w in prop::array::uniform3(0.0..2.0f64)) {
        prop_assume!(w.iter().any(|&v| v > 1e-3));
        let pc = make_product(&channel(seed, 2, 2, 2), &channel(seed ^ 14, 2, 2, 2)).unwrap();
        let a = ProductAuxiliary { a1: aux(seed ^ 15, (2, 2, 2), 2), a2: aux(seed ^ 16, (2, 2, 2), 2) };
        let poly = region(RegionKind::ProductInner, &pc, &a).unwrap();
        let s = lp_support(&poly.inequalities, w, false);
        if !s.feasible {
            // an empty polytope: some right-hand side is negative
            prop_assert!(!poly.contains([0.0; 3], 1e-9));
            return Ok(());
        }
        prop_assert!(poly.contains(s.vertex, 1e-9));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 17);
        let top = poly.inequalities.iter().map(|q| q.rhs).fold(0.0, f64::max);
        for _ in 0..200 {
            let r = [rng.gen::<f64>() * top, rng.gen::<f64>() * top, rng.gen::<f64>() * top];
            if poly.contains(r, 0.0) {
                prop_assert!(w.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() <= s.value + 1e-9);
            }
        }
    }
}
