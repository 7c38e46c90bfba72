use std::collections::BTreeSet;

use proptest::prelude::*;

use nodaldtn_core::partition::{
    build_neighbor_graph, cut_from_weights, is_bipartite, is_valid_cut, weight_equivalence, weights_for_cut,
    weights_from_orientations, Partition, PartitionDocument, WeightAssignment,
};

/// Loop-free multigraph with `k` vertices and at least one edge.
fn multigraph(max_k: usize, max_edges: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max_k).prop_flat_map(move |k| {
        let edge = (0..k, 1..k).prop_map(move |(i, d)| {
            let j = (i + d) % k;
            (i.min(j), i.max(j))
        });
        (Just(k), prop::collection::vec(edge, 1..=max_edges))
    })
}

fn signs(n: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 }), n)
}

fn brute_force_valid_cuts(p: &Partition) -> BTreeSet<Vec<usize>> {
    (0..1usize << p.k())
        .map(|mask| {
            p.segments
                .iter()
                .enumerate()
                .filter(|(_, s)| (mask >> s.left & 1) == (mask >> s.right & 1))
                .map(|(a, _)| a)
                .collect()
        })
        .collect()
}

/// Every sign table on the segments, valid or not.
fn all_weights(p: &Partition) -> Vec<WeightAssignment> {
    let n = p.n_segments();
    (0..1usize << (2 * n))
        .map(|mask| WeightAssignment {
            signs: (0..n)
                .map(|a| {
                    let s = |bit: usize| if mask >> bit & 1 == 1 { -1 } else { 1 };
                    [s(2 * a), s(2 * a + 1)]
                })
                .collect(),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn weights_round_trip_through_their_cut((k, pairs) in multigraph(8, 14), seed in signs(8 + 14)) {
        let p = Partition::abstract_graph(k, &pairs).unwrap();
        let trav = vec![1; p.n_segments()];
        let w = weights_from_orientations(&p, &trav, &seed[..k], &seed[8..8 + p.n_segments()]);
        prop_assert!(w.is_valid(&p));
        let cut = cut_from_weights(&w);
        let witness = is_valid_cut(&p, &cut.members);
        prop_assert!(witness.is_some());
        let o = witness.unwrap();
        for (a, s) in p.segments.iter().enumerate() {
            prop_assert_eq!(cut.members.contains(&a), o[s.left] == o[s.right]);
        }
        let rebuilt = weights_for_cut(&p, &trav, &cut.members).unwrap();
        prop_assert_eq!(cut_from_weights(&rebuilt).members, cut.members);
    }

    #[test]
    fn gf2_validity_matches_brute_force((k, pairs) in multigraph(10, 12), picks in prop::collection::vec(prop::bool::ANY, 12)) {
        let p = Partition::abstract_graph(k, &pairs).unwrap();
        let valid = brute_force_valid_cuts(&p);
        let members: Vec<usize> = (0..p.n_segments()).filter(|&a| picks[a]).collect();
        prop_assert_eq!(is_valid_cut(&p, &members).is_some(), valid.contains(&members));
        for cut in &valid {
            prop_assert!(is_valid_cut(&p, cut).is_some());
        }
    }

    #[test]
    fn empty_cut_is_valid_exactly_for_bipartite_graphs((k, pairs) in multigraph(9, 14)) {
        let p = Partition::abstract_graph(k, &pairs).unwrap();
        let g = build_neighbor_graph(&p);
        prop_assert_eq!(is_valid_cut(&p, &[]).is_some(), is_bipartite(&g).is_some());
    }

    #[test]
    fn neighbor_graph_has_one_edge_per_segment((k, pairs) in multigraph(9, 14)) {
        let p = Partition::abstract_graph(k, &pairs).unwrap();
        let g = build_neighbor_graph(&p);
        prop_assert_eq!(g.edges.len(), p.n_segments());
        prop_assert!(g.edges.iter().all(|&(i, j)| i != j));
    }

    #[test]
    fn document_round_trip_keeps_partition_and_weights((k, pairs) in multigraph(6, 8), seed in signs(14)) {
        let p = Partition::abstract_graph(k, &pairs).unwrap();
        let trav = vec![1; p.n_segments()];
        let w = weights_from_orientations(&p, &trav, &seed[..k], &seed[6..6 + p.n_segments()]);
        let text = serde_json::to_string(&PartitionDocument::from_partition(&p, Some(&w))).unwrap();
        let (q, w2) = PartitionDocument::parse(&text).unwrap();
        prop_assert_eq!(q.k(), p.k());
        prop_assert_eq!(q.n_segments(), p.n_segments());
        prop_assert_eq!(w2, Some(w));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Both relations are equivalences, and any two valid weights are linked
    /// by one edge step followed by one domain step.
    #[test]
    fn equivalences_link_all_valid_weights((k, pairs) in multigraph(4, 4)) {
        let p = Partition::abstract_graph(k, &pairs).unwrap();
        let all = all_weights(&p);
        let valid: Vec<&WeightAssignment> = all.iter().filter(|w| w.is_valid(&p)).collect();
        prop_assert!(!valid.is_empty());
        for a in &all {
            let e = weight_equivalence(&p, a, a);
            prop_assert!(e.edge && e.domain);
        }
        for a in &all {
            for b in &all {
                let ab = weight_equivalence(&p, a, b);
                let ba = weight_equivalence(&p, b, a);
                prop_assert_eq!(ab, ba);
            }
        }
        // transitivity on a sample of triples
        for (i, a) in all.iter().enumerate().step_by(3) {
            for b in all.iter().skip(i % 5).step_by(7) {
                for c in all.iter().skip(i % 3).step_by(11) {
                    let (ab, bc, ac) = (weight_equivalence(&p, a, b), weight_equivalence(&p, b, c), weight_equivalence(&p, a, c));
                    prop_assert!(!(ab.edge && bc.edge) || ac.edge);
                    prop_assert!(!(ab.domain && bc.domain) || ac.domain);
                }
            }
        }
        for a in &valid {
            for b in &valid {
                let linked = all.iter().any(|m| weight_equivalence(&p, a, m).edge && weight_equivalence(&p, m, b).domain);
                prop_assert!(linked);
            }
        }
    }
}

#[test]
fn flipping_one_subdomain_is_domain_equivalent() {
    let p = Partition::abstract_graph(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    let w = weights_from_orientations(&p, &[1, 1, 1], &[1, 1, 1], &[1, 1, 1]);
    let f = w.flip_subdomain(&p, 1);
    let e = weight_equivalence(&p, &w, &f);
    assert!(e.domain && !e.edge);
    assert_ne!(w, f);
}
