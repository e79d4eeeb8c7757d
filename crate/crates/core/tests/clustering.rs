use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmot::clustering::{
    build_hypergraph, clustering_error, clustering_error_hungarian, kmeans, nhcut, spectral_cluster, threshold_pairs, ttm,
    tune_threshold, ClusteringSolution, Clusterer, Hypergraph3,
};
use mmot::metric::{combinations, DistanceTensor};
use mmot::Error;

/// Three tight groups of four on a line, far apart.
fn blobs(order: usize) -> (DistanceTensor, ClusteringSolution) {
    let xs: Vec<f64> = (0..12).map(|i| 10.0 * (i / 4) as f64 + 0.1 * (i % 4) as f64).collect();
    let mut t = DistanceTensor::new(order, 12).unwrap();
    for k in combinations(12, order) {
        let mut v = 0.0;
        for a in 0..k.len() {
            for b in (a + 1)..k.len() {
                v += (xs[k[a]] - xs[k[b]]).abs();
            }
        }
        t.set(&k, v).unwrap();
    }
    (t, ClusteringSolution::new((0..12).map(|i| i / 4).collect(), 3).unwrap())
}

fn arb_labels() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
    (2usize..=5, 5usize..30).prop_flat_map(|(k, n)| {
        (prop::collection::vec(0..k, n), prop::collection::vec(0..k, n), Just(k))
    })
}

#[test]
fn separated_groups_are_recovered() {
    let (t3, truth) = blobs(3);
    let (t2, _) = blobs(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let th3 = 2.0;
    let th2 = 1.0;
    let a = ttm(&build_hypergraph(&t3, th3).unwrap(), 3, &mut rng).unwrap();
    let b = nhcut(&build_hypergraph(&t3, th3).unwrap(), 3, &mut rng).unwrap();
    let c = spectral_cluster(&threshold_pairs(&t2, th2).unwrap(), 3, &mut rng).unwrap();
    for s in [a, b, c] {
        assert_eq!(clustering_error(&s, &truth).unwrap(), 0.0);
    }
}

#[test]
fn tuning_finds_a_perfect_threshold() {
    let (t, truth) = blobs(3);
    for c in [Clusterer::Ttm, Clusterer::Nhcut] {
        let r = tune_threshold(&t, &truth, c, None, 11).unwrap();
        assert_eq!(r.error, 0.0, "{c:?}");
    }
}

#[test]
fn ttm_and_nhcut_agree_on_three_uniform_input() {
    let (t, _) = blobs(3);
    for th in [2.0, 12.0, 25.0] {
        let h = build_hypergraph(&t, th).unwrap();
        let a = ttm(&h, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = nhcut(&h, 3, &mut ChaCha8Rng::seed_from_u64(9));
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(a.labels, b.labels),
            (a, b) => assert_eq!(a.is_err(), b.is_err()),
        }
    }
}

#[test]
fn kmeans_splits_well_separated_points() {
    let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![if i < 10 { 0.0 } else { 5.0 } + 0.01 * i as f64]).collect();
    let km = kmeans(&pts, 2, &mut ChaCha8Rng::seed_from_u64(1), 10).unwrap();
    assert_eq!(km.labels, (0..20).map(|i| usize::from(i >= 10)).collect::<Vec<_>>());
}

#[test]
fn isolated_vertices_are_reported() {
    let h = Hypergraph3::new(5, vec![([0, 1, 2], 1.0)]).unwrap();
    let err = ttm(&h, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
    assert!(matches!(err, Error::IsolatedVertices(ref v) if *v == [3, 4]), "{err}");
}

proptest! {
    #[test]
    fn error_matches_hungarian_and_is_bounded((p, t, k) in arb_labels()) {
        let pred = ClusteringSolution::new(p, k).unwrap();
        let truth = ClusteringSolution::new(t, k).unwrap();
        let e = clustering_error(&pred, &truth).unwrap();
        prop_assert!((e - clustering_error_hungarian(&pred, &truth).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0 - 1.0 / k as f64 + 1e-12).contains(&e));
    }

    #[test]
    fn error_ignores_label_names((p, t, k) in arb_labels(), shift in 1usize..5) {
        let renamed: Vec<usize> = p.iter().map(|&l| (l + shift) % k).collect();
        let truth = ClusteringSolution::new(t, k).unwrap();
        let a = clustering_error(&ClusteringSolution::new(p, k).unwrap(), &truth).unwrap();
        let b = clustering_error(&ClusteringSolution::new(renamed, k).unwrap(), &truth).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn solution_json_round_trips((p, _, k) in arb_labels()) {
        let s = ClusteringSolution::new(p, k).unwrap();
        prop_assert_eq!(ClusteringSolution::from_json(&s.to_json().unwrap()).unwrap(), s);
    }
}
