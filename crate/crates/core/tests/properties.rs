mod common;

use marketlag_core::correlation::{correlation_matrix, cross_correlation, lag_augment};
use marketlag_core::network::{asset_graph, correlation_distance};
use marketlag_core::panel::{business_days, log_returns, weekly_average};
use marketlag_core::spectral::classify;
use marketlag_core::{DistanceMatrix, Method, NoiseClass, PricePanel, ReturnPanel, SeriesLabel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn columns(n: usize, t: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, t), n)
}

fn panel(cols: &[Vec<f64>]) -> ReturnPanel {
    ReturnPanel::from_columns(common::labels("S", cols.len()), cols).unwrap()
}

fn rank(c: NoiseClass) -> u8 {
    match c {
        NoiseClass::BelowNoise => 0,
        NoiseClass::Noise => 1,
        NoiseClass::AboveNoise => 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_returns_ignore_price_scale(
        steps in prop::collection::vec(-0.05f64..0.05, 30),
        scale in 0.01f64..1000.0,
    ) {
        let mut p = vec![100.0];
        for s in &steps {
            p.push(p.last().unwrap() * s.exp());
        }
        let n = p.len();
        let a = DMatrix::from_fn(n, 2, |t, i| p[t] * (1.0 + i as f64));
        let b = a.map(|v| v * scale);
        let labels = vec!["a".to_owned(), "b".to_owned()];
        let ra = log_returns(&PricePanel::complete(business_days(n), labels.clone(), a).unwrap()).unwrap();
        let rb = log_returns(&PricePanel::complete(business_days(n), labels, b).unwrap()).unwrap();
        for (x, y) in ra.returns().iter().zip(rb.returns().iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_is_affine_invariant(
        cols in columns(4, 40),
        scale in prop::collection::vec(0.1f64..10.0, 4),
        shift in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let moved: Vec<Vec<f64>> = cols
            .iter()
            .enumerate()
            .map(|(i, c)| c.iter().map(|v| scale[i] * v + shift[i]).collect())
            .collect();
        for method in [Method::Pearson, Method::Spearman] {
            let a = correlation_matrix(&panel(&cols), method).unwrap();
            let b = correlation_matrix(&panel(&moved), method).unwrap();
            prop_assert!((a.values - b.values).amax() < 1e-10);
        }
    }

    #[test]
    fn spearman_is_monotone_invariant(cols in columns(3, 40)) {
        let moved: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|v| (3.0 * v).exp() + v.powi(3)).collect()).collect();
        let a = correlation_matrix(&panel(&cols), Method::Spearman).unwrap();
        let b = correlation_matrix(&panel(&moved), Method::Spearman).unwrap();
        prop_assert!((a.values - b.values).amax() < 1e-12);
    }

    #[test]
    fn lag_zero_augmentation_is_identity(cols in columns(3, 20)) {
        let p = panel(&cols);
        prop_assert_eq!(lag_augment(&p, 0).unwrap(), p);
    }

    #[test]
    fn lag_one_block_is_shifted_lag_zero_block(cols in columns(3, 30)) {
        let p = panel(&cols);
        let aug = lag_augment(&p, 1).unwrap();
        let n = p.n_series();
        for i in 0..n {
            let lag0 = aug.column(i);
            let lag1 = aug.column(n + i);
            prop_assert_eq!(&aug.labels()[n + i], &SeriesLabel::lagged(p.labels()[i].name.clone(), 1));
            prop_assert_eq!(lag0, &p.column(i)[1..]);
            for (a, b) in lag1.iter().zip(p.column(i)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn cross_correlation_is_antisymmetric_in_lag(cols in columns(2, 40), k in 0i64..4) {
        let p = panel(&cols);
        let (a, b) = (p.labels()[0].clone(), p.labels()[1].clone());
        let ab = cross_correlation(&p, &a, std::slice::from_ref(&b), (-k, k), Method::Pearson).unwrap();
        let ba = cross_correlation(&p, &b, &[a], (-k, k), Method::Pearson).unwrap();
        for lag in -k..=k {
            prop_assert!((ab[0].at(lag).unwrap() - ba[0].at(-lag).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn graphs_nest_across_thresholds(cols in columns(6, 25), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        let c = correlation_matrix(&panel(&cols), Method::Pearson).unwrap();
        let d = marketlag_core::network::distance_matrix(&c).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let small = asset_graph(&d, lo).unwrap();
        let big = asset_graph(&d, hi).unwrap();
        for n in &small.nodes {
            prop_assert!(big.nodes.contains(n));
        }
        for e in &small.edges {
            prop_assert!(big.edges.iter().any(|f| f.source == e.source && f.target == e.target));
            prop_assert!(e.distance < lo);
        }
    }

    #[test]
    fn distance_decreases_with_correlation(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(correlation_distance(hi) <= correlation_distance(lo));
    }

    #[test]
    fn classification_is_monotone(a in 0.0f64..5.0, b in 0.0f64..5.0, lo in 0.0f64..2.0, width in 0.0f64..3.0) {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rank(classify(x, lo, lo + width)) <= rank(classify(y, lo, lo + width)));
    }

    #[test]
    fn weekly_average_of_constant_is_constant(v in -0.1f64..0.1, days in 10usize..60) {
        let cols = vec![vec![v; days], vec![2.0 * v; days]];
        let w = weekly_average(&panel(&cols)).unwrap();
        for t in 0..w.n_rows() {
            prop_assert!((w.returns()[(t, 0)] - v).abs() < 1e-15);
            prop_assert!((w.returns()[(t, 1)] - 2.0 * v).abs() < 1e-15);
        }
    }

    #[test]
    fn distance_matrix_roundtrips_through_csv(cols in columns(4, 20)) {
        let c = correlation_matrix(&panel(&cols), Method::Pearson).unwrap();
        let d = marketlag_core::network::distance_matrix(&c).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = DistanceMatrix::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, d);
    }
}
