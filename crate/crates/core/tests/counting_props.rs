use espa::counting::{brute_force_count, count_completions, count_linear_extensions};
use espa::structure::{is_valid, pairs, Labeling};
use espa::{PartialAnnotation, StructureFamily};
use num_bigint::BigUint;
use proptest::prelude::*;

/// Permutations of `0..n` in which every edge `(a, b)` has `a` before `b`,
/// counted by filtering all `n!` orders.
fn extensions_by_filtering(n: usize, edges: &[(usize, usize)]) -> u64 {
    fn rec(n: usize, used: &mut Vec<bool>, pos: &mut Vec<usize>, depth: usize, edges: &[(usize, usize)]) -> u64 {
        if depth == n {
            return u64::from(edges.iter().all(|&(a, b)| pos[a] < pos[b]));
        }
        let mut total = 0;
        for item in 0..n {
            if !used[item] {
                used[item] = true;
                pos[item] = depth;
                total += rec(n, used, pos, depth + 1, edges);
                used[item] = false;
            }
        }
        total
    }
    rec(n, &mut vec![false; n], &mut vec![0; n], 0, edges)
}

fn family_strategy() -> impl Strategy<Value = StructureFamily> {
    prop_oneof![
        (2usize..=5).prop_map(|n| StructureFamily::Chain { n }),
        (1usize..=4, 0usize..=2).prop_map(|(d, extra)| StructureFamily::Assignment { agents: d, tasks: d + extra }),
        (1usize..=7, 1usize..=2).prop_map(|(len, types)| StructureFamily::Bio { len, types }),
        (1usize..=5, 1usize..=3).prop_map(|(len, labels)| StructureFamily::Unconstrained { len, labels }),
        (1usize..=5, 1usize..=3).prop_map(|(len, labels)| StructureFamily::UniformLabel { len, labels }),
    ]
}

/// A family plus a partial annotation whose entries are arbitrary labels,
/// so infeasible partials occur too.
fn family_and_partial() -> impl Strategy<Value = (StructureFamily, PartialAnnotation)> {
    family_strategy().prop_flat_map(|f| {
        let d = f.dim();
        let l = f.label_count();
        prop::collection::vec(prop::option::weighted(0.4, 0..l), d).prop_map(move |v| (f, PartialAnnotation::new(v)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn counting_matches_enumeration((family, partial) in family_and_partial()) {
        prop_assert_eq!(count_completions(&family, &partial).unwrap(), brute_force_count(&family, &partial).unwrap());
    }

    #[test]
    fn linear_extensions_match_filtering(n in 1usize..=6, raw in prop::collection::vec((0usize..6, 0usize..6), 0..8)) {
        let edges: Vec<(usize, usize)> = raw.into_iter().filter(|&(a, b)| a < n && b < n && a != b).collect();
        prop_assert_eq!(count_linear_extensions(n, &edges).unwrap(), BigUint::from(extensions_by_filtering(n, &edges)));
    }

    #[test]
    fn revealing_a_consistent_label_never_increases_the_count((family, partial) in family_and_partial(), pick in 0usize..64) {
        let before = count_completions(&family, &partial).unwrap();
        let completions = espa::counting::enumerate_valid(&family, &partial);
        if let Some(y) = completions.get(pick % completions.len().max(1)) {
            let mut more = partial.clone();
            let open: Vec<usize> = (0..family.dim()).filter(|&i| partial.get(i).is_none()).collect();
            if let Some(&i) = open.first() {
                more.set(i, Some(y.0[i]));
                let after = count_completions(&family, &more).unwrap();
                prop_assert!(after <= before);
                prop_assert!(after >= BigUint::from(1u32));
            }
        } else {
            prop_assert_eq!(before, BigUint::from(0u32));
        }
    }
}

#[test]
fn known_poset_counts() {
    // antichain, chain, the "N" poset, a diamond, two disjoint 2-chains
    assert_eq!(count_linear_extensions(5, &[]).unwrap(), BigUint::from(120u32));
    assert_eq!(count_linear_extensions(4, &[(0, 1), (1, 2), (2, 3)]).unwrap(), BigUint::from(1u32));
    assert_eq!(count_linear_extensions(4, &[(0, 2), (1, 2), (1, 3)]).unwrap(), BigUint::from(5u32));
    assert_eq!(count_linear_extensions(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap(), BigUint::from(2u32));
    assert_eq!(count_linear_extensions(4, &[(0, 1), (2, 3)]).unwrap(), BigUint::from(6u32));
    assert_eq!(count_linear_extensions(3, &[(0, 1), (1, 2), (2, 0)]).unwrap(), BigUint::from(0u32));
}

#[test]
fn bio_example_partials() {
    let f = StructureFamily::Bio { len: 2, types: 1 };
    // [O, _] completes to OB or OO
    let p = PartialAnnotation::new(vec![Some(2), None]);
    assert_eq!(count_completions(&f, &p).unwrap(), BigUint::from(2u32));
    // [O, I] is infeasible
    let p = PartialAnnotation::new(vec![Some(2), Some(1)]);
    assert_eq!(count_completions(&f, &p).unwrap(), BigUint::from(0u32));
}

#[test]
fn chain_labelings_are_exactly_the_transitive_tournaments() {
    for n in 2..=4 {
        let f = StructureFamily::Chain { n };
        let m = pairs(n).len();
        let valid = (0..1u32 << m)
            .filter(|bits| {
                let y = Labeling((0..m).map(|i| ((bits >> i) & 1) as usize).collect());
                is_valid(&f, &y).unwrap()
            })
            .count();
        assert_eq!(valid as u64, (1..=n as u64).product::<u64>());
    }
}
