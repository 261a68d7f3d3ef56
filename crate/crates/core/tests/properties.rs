//! Property tests for the metrics, compounding and file formats.

use proptest::prelude::*;

use pwzs::compounding::{compound, log_compress, AngleStack};
use pwzs::image::Image2D;
use pwzs::io::stackfile;
use pwzs::metrics::{cnr_db, gcnr, kolmogorov_survival, ks_two_sample};

fn unit_samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 2..200)
}

proptest! {
    #[test]
    fn gcnr_is_bounded_and_symmetric(a in unit_samples(), b in unit_samples()) {
        let g = gcnr(&a, &b, 256).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
        prop_assert!((g - gcnr(&b, &a, 256).unwrap()).abs() < 1e-12);
        prop_assert!(gcnr(&a, &a, 256).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ks_is_bounded_and_symmetric(a in unit_samples(), b in unit_samples()) {
        let r = ks_two_sample(&a, &b).unwrap();
        let s = ks_two_sample(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.statistic, s.statistic);
    }

    #[test]
    fn ks_statistic_matches_brute_force(a in unit_samples(), b in unit_samples()) {
        // sup over every sample point of |F_a - F_b|
        let ecdf = |v: &[f64], t: f64| v.iter().filter(|&&x| x <= t).count() as f64 / v.len() as f64;
        let brute = a.iter().chain(&b).map(|&t| (ecdf(&a, t) - ecdf(&b, t)).abs()).fold(0.0, f64::max);
        prop_assert!((ks_two_sample(&a, &b).unwrap().statistic - brute).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_survival_is_monotone(l1 in 0.0f64..4.0, l2 in 0.0f64..4.0) {
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!(kolmogorov_survival(lo) >= kolmogorov_survival(hi) - 1e-12);
    }

    #[test]
    fn cnr_is_symmetric_and_shift_invariant(a in unit_samples(), b in unit_samples(), shift in -1.0f64..1.0) {
        if let (Ok(x), Ok(y)) = (cnr_db(&a, &b), cnr_db(&b, &a)) {
            prop_assert!(x == y || (x - y).abs() < 1e-9);
            let a2: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let b2: Vec<f64> = b.iter().map(|v| v + shift).collect();
            let z = cnr_db(&a2, &b2).unwrap();
            prop_assert!(x == z || (x - z).abs() < 1e-6);
        }
    }

    #[test]
    fn log_compression_is_bounded_and_monotone(v in prop::collection::vec(0.0f32..10.0, 4..64)) {
        prop_assume!(v.iter().any(|&x| x > 0.0));
        let n = v.len();
        let img = Image2D::from_vec(1, n, v.clone()).unwrap();
        let b = log_compress(&img, 80.0).unwrap();
        let px = b.pixels().as_slice();
        prop_assert!(px.iter().all(|p| (0.0..=1.0).contains(p)));
        for i in 0..n {
            for j in 0..n {
                if v[i] < v[j] {
                    prop_assert!(px[i] <= px[j]);
                }
            }
        }
    }

    #[test]
    fn stack_roundtrip_and_compound_bounds(
        k in 2usize..6,
        h in 1usize..6,
        w in 1usize..6,
        seed in any::<u64>(),
    ) {
        let frames: Vec<Image2D<f32>> = (0..k)
            .map(|f| Image2D::from_fn(h, w, |i, j| {
                let x = seed.wrapping_mul(6364136223846793005).wrapping_add((f * 131 + i * 17 + j) as u64);
                (x >> 40) as f32 / (1u64 << 24) as f32
            }))
            .collect();
        let angles: Vec<f64> = (0..k).map(|i| i as f64 - 2.0).collect();
        let stack = AngleStack::new(frames, angles, (0.1, 0.1), "p").unwrap();
        let bytes = stackfile::encode(&stack).unwrap();
        let back = stackfile::decode(&bytes, std::path::Path::new("p")).unwrap();
        prop_assert_eq!(back.frames(), stack.frames());
        let all: Vec<usize> = (0..k).collect();
        let y = compound(&stack, &all).unwrap();
        for (idx, &v) in y.as_slice().iter().enumerate() {
            let lo = stack.frames().iter().map(|f| f.as_slice()[idx]).fold(f32::INFINITY, f32::min);
            let hi = stack.frames().iter().map(|f| f.as_slice()[idx]).fold(0.0, f32::max);
            prop_assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
        }
    }
}
