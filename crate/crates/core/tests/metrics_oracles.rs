//! Metrics against brute-force oracles, plus algebraic properties.

mod common;

use std::time::Instant;

use common::oracles;
use ecr_cad::metrics::{b_cubed, ceaf_e, conll, lea, lea_with, muc, LeaSingletons, Prf};
use ecr_cad::ClusterSet;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn same(label: &str, got: Prf, want: oracles::Prf) {
    for (name, g, w) in [("R", got.recall, want.0), ("P", got.precision, want.1), ("F1", got.f1, want.2)] {
        assert!((g - w).abs() < TOL, "{label} {name}: {g} vs oracle {w}");
    }
}

fn cs(clusters: &[&[&str]]) -> ClusterSet {
    ClusterSet::from_clusters(clusters.iter().map(|c| c.iter().map(|m| m.to_string()).collect::<Vec<_>>()))
}

#[test]
fn random_partitions_match_the_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..300 {
        let universe = oracles::random_universe(&mut rng, 12);
        let key = oracles::random_partition(&mut rng, &universe, 6);
        let resp = oracles::random_partition(&mut rng, &universe, 6);
        same("MUC", muc(&key, &resp).unwrap(), oracles::muc(&key, &resp));
        same("B3", b_cubed(&key, &resp).unwrap(), oracles::b_cubed(&key, &resp));
        same("LEA", lea(&key, &resp).unwrap(), oracles::lea(&key, &resp, true));
        same(
            "LEA excl",
            lea_with(&key, &resp, LeaSingletons::Exclude).unwrap(),
            oracles::lea(&key, &resp, false),
        );
        same("CEAF_e", ceaf_e(&key, &resp).unwrap(), oracles::ceaf_e(&key, &resp));
    }
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn running_example_against_oracles() {
    let key = cs(&[&["a", "b", "c"], &["d", "e"]]);
    let resp = cs(&[&["a", "b"], &["c", "d", "e"]]);
    let r = conll(&key, &resp).unwrap();
    same("MUC", r.muc, oracles::muc(&key, &resp));
    same("B3", r.b_cubed, oracles::b_cubed(&key, &resp));
    same("CEAF_e", r.ceaf_e, oracles::ceaf_e(&key, &resp));
    same("LEA", r.lea, oracles::lea(&key, &resp, true));
    assert!((r.muc.f1 - 2.0 / 3.0).abs() < 1e-6);
    assert!((r.b_cubed.f1 - 11.0 / 15.0).abs() < 1e-6);
    assert!((r.ceaf_e.f1 - 0.8).abs() < 1e-6);
    assert!((r.lea.f1 - 0.6).abs() < 1e-6);
    assert!((r.conll_f1 - 0.7333).abs() < 1e-4);
}

#[test]
fn giant_response_against_singleton_keys() {
    // k singleton keys vs one cluster of k: one alignment, φ₄ = 2/(k+1).
    for k in 2..=6usize {
        let ids: Vec<String> = (0..k).map(|i| format!("m{i}")).collect();
        let key = ClusterSet::from_clusters(ids.iter().map(|m| vec![m.clone()]));
        let resp = ClusterSet::from_clusters([ids.clone()]);
        let c = ceaf_e(&key, &resp).unwrap();
        let phi = 2.0 / (k as f64 + 1.0);
        assert!((c.recall - phi / k as f64).abs() < TOL);
        assert!((c.precision - phi).abs() < TOL);
        same("CEAF_e", c, oracles::ceaf_e(&key, &resp));
    }
}

fn partitions() -> impl Strategy<Value = (ClusterSet, ClusterSet)> {
    (1usize..=12, 1usize..=6, 1usize..=6).prop_flat_map(|(n, kk, kr)| {
        (
            proptest::collection::vec(0..kk, n),
            proptest::collection::vec(0..kr, n),
        )
            .prop_map(move |(a, b)| {
                let build = |labels: &[usize]| {
                    let mut groups: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
                    for (i, l) in labels.iter().enumerate() {
                        groups.entry(*l).or_default().push(format!("m{i:02}"));
                    }
                    ClusterSet::from_clusters(groups.into_values())
                };
                (build(&a), build(&b))
            })
    })
}

fn bounded(p: Prf) -> bool {
    [p.recall, p.precision, p.f1].iter().all(|v| (0.0..=1.0 + TOL).contains(v))
}

proptest! {
    #[test]
    fn metrics_are_bounded_and_conll_is_the_mean((key, resp) in partitions()) {
        let r = conll(&key, &resp).unwrap();
        prop_assert!(bounded(r.muc) && bounded(r.b_cubed) && bounded(r.ceaf_e) && bounded(r.lea));
        prop_assert!((r.conll_f1 - (r.muc.f1 + r.b_cubed.f1 + r.ceaf_e.f1) / 3.0).abs() < TOL);
    }

    #[test]
    fn swapping_key_and_response_swaps_recall_and_precision((key, resp) in partitions()) {
        let a = conll(&key, &resp).unwrap();
        let b = conll(&resp, &key).unwrap();
        for (x, y) in [(a.muc, b.muc), (a.b_cubed, b.b_cubed), (a.ceaf_e, b.ceaf_e), (a.lea, b.lea)] {
            prop_assert!((x.recall - y.precision).abs() < TOL);
            prop_assert!((x.precision - y.recall).abs() < TOL);
        }
    }

    #[test]
    fn perfect_scores_only_for_identical_partitions((key, resp) in partitions()) {
        let r = conll(&key, &resp).unwrap();
        if key == resp {
            prop_assert!((r.b_cubed.f1 - 1.0).abs() < TOL && (r.ceaf_e.f1 - 1.0).abs() < TOL && (r.lea.f1 - 1.0).abs() < TOL);
        } else {
            // B³ and CEAF_e are perfect exactly on identical partitions.
            prop_assert!(r.b_cubed.f1 < 1.0 - TOL);
            prop_assert!(r.ceaf_e.f1 < 1.0 - TOL);
        }
    }

    #[test]
    fn ceaf_assignment_matches_exhaustive_alignment((key, resp) in partitions()) {
        let got = ceaf_e(&key, &resp).unwrap();
        let want = oracles::ceaf_e(&key, &resp);
        prop_assert!((got.f1 - want.2).abs() < TOL);
    }
}
