//! Tree search against a brute-force scan over many random clouds.

use jhat_core::cloud::{PointCloud, SampleSet};
use jhat_core::neighbors::{build_pairs, nearest_neighbors, NeighborIndex};
use proptest::prelude::*;

/// All indices `j` with `0 < ‖X[j] - q‖ < r`, ordered by `(distance², j)`, first `k`.
fn brute_force(cloud: &PointCloud, q: &[f64], k: usize, r: f64) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = cloud
        .iter()
        .enumerate()
        .map(|(j, p)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j))
        .filter(|&(d2, _)| d2 > 0.0 && d2.sqrt() < r)
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.into_iter().take(k).map(|(_, j)| j).collect()
}

fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
    (1usize..=4, 2usize..160).prop_flat_map(|(d, n)| {
        // Coarse lattice values force exact ties and coincident points.
        let coord = prop_oneof![(-8i32..8).prop_map(|v| v as f64 / 4.0), -2.0f64..2.0];
        proptest::collection::vec(coord, d * n).prop_map(move |data| PointCloud::new(d, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tree_matches_brute_force(
        cloud in cloud_strategy(),
        k in 1usize..40,
        r in prop_oneof![Just(f64::INFINITY), 0.05f64..3.0],
        pick in any::<proptest::sample::Index>(),
    ) {
        let index = NeighborIndex::new(&cloud);
        let i = pick.index(cloud.len());
        let got: Vec<usize> = index.neighbors_of(i, k, r).iter().map(|n| n.index).collect();
        prop_assert_eq!(&got, &brute_force(&cloud, cloud.point(i), k, r));
        prop_assert_eq!(nearest_neighbors(&cloud, i, k, r).unwrap(), got);
    }

    #[test]
    fn arbitrary_queries_match_brute_force(
        cloud in cloud_strategy(),
        k in 1usize..20,
        q in proptest::collection::vec(-2.5f64..2.5, 4),
    ) {
        let q = &q[..cloud.dim()];
        let index = NeighborIndex::new(&cloud);
        let got: Vec<usize> = index.knn(q, k, f64::INFINITY, true).iter().map(|n| n.index).collect();
        prop_assert_eq!(got, brute_force(&cloud, q, k, f64::INFINITY));
        let nearest = index.nearest(q).unwrap();
        let best = cloud
            .iter()
            .map(|p| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((nearest.distance - best.sqrt()).abs() <= 1e-15 * best.sqrt().max(1.0));
    }

    #[test]
    fn pair_count_and_normalization(cloud in cloud_strategy(), k in 1usize..10) {
        let outputs = PointCloud::new(1, cloud.iter().map(|p| p.iter().sum()).collect()).unwrap();
        let samples = SampleSet::new(cloud.clone(), outputs).unwrap();
        if let Ok(pairs) = build_pairs(&samples, k, f64::INFINITY) {
            let distinct_peers = |i: usize| cloud.iter().filter(|p| *p != cloud.point(i)).count();
            let expected: usize = (0..cloud.len()).map(|i| distinct_peers(i).min(k)).sum();
            prop_assert_eq!(pairs.len(), expected);
            prop_assert!(pairs.len() <= cloud.len() * k);
            for p in 0..pairs.len() {
                let n: f64 = pairs.direction(p).iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((n - 1.0).abs() < 1e-12);
                prop_assert!(pairs.entries()[p].distance > 0.0);
            }
        }
    }
}

#[test]
fn high_dimensional_scan_path_matches_brute_force() {
    let cloud = jhat_core::testbed::DomainBox::cube(12, -1.0, 1.0).sample(300, 4);
    let index = NeighborIndex::new(&cloud);
    for i in [0, 17, 299] {
        let got: Vec<usize> = index.neighbors_of(i, 7, 2.5).iter().map(|n| n.index).collect();
        assert_eq!(got, brute_force(&cloud, cloud.point(i), 7, 2.5));
    }
}
