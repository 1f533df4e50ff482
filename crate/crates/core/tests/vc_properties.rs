mod common;

use common::*;
use proptest::prelude::*;
use valuechange::grid::{BoxDomain, SampledField};
use valuechange::vc::{
    ivc, ivc_distance, ivc_field, vc_field, windowed_extrema_radii, Extremum, IvcSpec, WindowSpec,
};

fn field_strategy() -> impl Strategy<Value = SampledField> {
    (1usize..=3, any::<u64>()).prop_map(|(dims, seed)| {
        let mut r = rng(seed);
        let d = random_domain(&mut r, dims, 7);
        random_field(&mut r, d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extrema_match_exhaustive_scan(f in field_strategy(), seed in any::<u64>()) {
        let mut r = rng(seed);
        use rand::Rng;
        let radii: Vec<usize> = (0..f.domain().dims()).map(|_| r.gen_range(0..6)).collect();
        let (max, min) = scan_extrema(f.values(), f.domain().counts(), &radii);
        prop_assert_eq!(windowed_extrema_radii(&f, &radii, Extremum::Max), max);
        prop_assert_eq!(windowed_extrema_radii(&f, &radii, Extremum::Min), min);
    }

    #[test]
    fn vc_matches_geometric_windows(f in field_strategy(), l in 0.05f64..2.0) {
        let vc = vc_field(&f, &WindowSpec::isotropic(l).unwrap()).unwrap();
        prop_assert_eq!(vc.values(), &scan_vc_geometric(&f, &[l])[..]);
    }

    #[test]
    fn vc_is_monotone_in_length(f in field_strategy(), l in 0.05f64..1.5, grow in 0.0f64..1.5) {
        let small = vc_field(&f, &WindowSpec::isotropic(l).unwrap()).unwrap();
        let large = vc_field(&f, &WindowSpec::isotropic(l + grow).unwrap()).unwrap();
        for (a, b) in small.values().iter().zip(large.values()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn vc_is_bounded_by_range(f in field_strategy(), l in 0.05f64..5.0) {
        let vc = vc_field(&f, &WindowSpec::isotropic(l).unwrap()).unwrap();
        let range = f.max() - f.min();
        prop_assert!(vc.values().iter().all(|&v| (0.0..=range).contains(&v)));
    }

    #[test]
    fn affine_maps_scale_vc(f in field_strategy(), kappa in -5.0f64..5.0, c in -10.0f64..10.0, l in 0.05f64..2.0) {
        let w = WindowSpec::isotropic(l).unwrap();
        let base = vc_field(&f, &w).unwrap();
        let moved = vc_field(&f.map(|v| kappa * v + c).unwrap(), &w).unwrap();
        let scale = 1.0 + kappa.abs() + c.abs();
        for (b, m) in base.values().iter().zip(moved.values()) {
            prop_assert!((m - kappa.abs() * b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn ivc_distance_matches_brute_force(dims in 1usize..=2, seed in any::<u64>(), l_min in 0.05f64..0.5, span in 0.05f64..1.0) {
        let mut r = rng(seed);
        let d = random_domain(&mut r, dims, 6);
        let a = random_field(&mut r, d.clone());
        let b = random_field(&mut r, d);
        let got = ivc_distance(&a, &b, &IvcSpec::new(l_min, l_min + span, 5).unwrap()).unwrap();
        let want = brute_ivc_distance(&a, &b, l_min, l_min + span, 5);
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want), "{} vs {}", got, want);
    }

    #[test]
    fn pointwise_ivc_agrees_with_field(f in field_strategy(), node_pick in any::<usize>()) {
        let spec = IvcSpec::new(0.1, 0.9, 7).unwrap();
        let k = node_pick % f.len();
        let all = ivc_field(&f, &spec).unwrap();
        prop_assert!((ivc(&f, &spec, k).unwrap() - all.values()[k]).abs() <= 1e-14);
    }

    #[test]
    fn ivc_distance_is_a_pseudometric(f in field_strategy(), seed in any::<u64>(), shift in -3.0f64..3.0) {
        let mut r = rng(seed);
        let g = random_field(&mut r, f.domain().clone());
        let h = random_field(&mut r, f.domain().clone());
        let spec = IvcSpec::new(0.1, 0.8, 6).unwrap();
        let fg = ivc_distance(&f, &g, &spec).unwrap();
        prop_assert!(fg >= 0.0);
        prop_assert_eq!(fg.to_bits(), ivc_distance(&g, &f, &spec).unwrap().to_bits());
        let shifted = f.map(|v| v + shift).unwrap();
        prop_assert!(ivc_distance(&f, &shifted, &spec).unwrap() <= 1e-12);
        let fh = ivc_distance(&f, &h, &spec).unwrap();
        let hg = ivc_distance(&h, &g, &spec).unwrap();
        prop_assert!(fh + hg - fg >= -1e-9);
    }
}

#[test]
fn clipped_example_values() {
    let f = line(0.0, 4.0, 5, |x| [3.0, 1.0, 4.0, 1.0, 5.0][x as usize]);
    let max = windowed_extrema_radii(&f, &[1], Extremum::Max);
    assert_eq!(max, vec![3.0, 4.0, 4.0, 5.0, 5.0]);
    let vc = vc_field(&f, &WindowSpec::isotropic(2.0).unwrap()).unwrap();
    assert_eq!(vc.values(), &[2.0, 3.0, 3.0, 4.0, 4.0]);
}

#[test]
fn anisotropic_zero_length_axis_scans_a_line() {
    let d = BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![6, 5]).unwrap();
    let mut r = rng(9);
    let f = random_field(&mut r, d);
    let vc = vc_field(&f, &WindowSpec::anisotropic(vec![0.5, 0.0]).unwrap()).unwrap();
    assert_eq!(vc.values(), &scan_vc_geometric(&f, &[0.5, 0.0])[..]);
}

#[test]
fn ivc_of_a_line_is_mean_length_times_slope() {
    let a = 3.0;
    let f = line(-1.0, 1.0, 2001, |x| a * x);
    let spec = IvcSpec::new(0.1, 0.3, 33).unwrap();
    let mid = 1000;
    let got = ivc(&f, &spec, mid).unwrap();
    let h = 1e-3;
    assert!((got - a * 0.2).abs() <= a * 2.0 * h, "{got}");
}
