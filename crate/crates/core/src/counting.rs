//! Counting the valid completions `f(a_k)` of a partial annotation.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::structure::{
    consistent, falling_factorial, pairs, satisfies_constraints, BioTag, Labeling, PartialAnnotation, StructureFamily,
};

/// Largest item count handled by the downset-bitmask DP.
pub const BITMASK_DP_MAX_ITEMS: usize = 20;

/// Largest `|L|^d` the brute-force oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

/// Number of labelings in `C(L^d)` consistent with `partial`.
///
/// Returns zero when the annotation admits no valid completion.
pub fn count_completions(family: &StructureFamily, partial: &PartialAnnotation) -> Result<BigUint> {
    family.validate()?;
    partial.check_against(family)?;
    let k = partial.k();
    Ok(match *family {
        StructureFamily::Chain { n } => count_linear_extensions(n, &chain_edges(n, partial))?,
        StructureFamily::Assignment { agents, tasks } => {
            let mut used = vec![false; tasks];
            let clash = partial.values().iter().flatten().any(|&t| std::mem::replace(&mut used[t], true));
            if clash {
                BigUint::zero()
            } else {
                falling_factorial(tasks - k, agents - k)
            }
        }
        StructureFamily::Bio { len, types } => count_bio_completions(len, types, partial)?,
        StructureFamily::Unconstrained { len, labels } => BigUint::from(labels).pow((len - k) as u32),
        StructureFamily::UniformLabel { labels, .. } => {
            let mut seen = partial.values().iter().flatten();
            match seen.next() {
                None => BigUint::from(labels),
                Some(first) if seen.all(|v| v == first) => BigUint::one(),
                Some(_) => BigUint::zero(),
            }
        }
    })
}

/// Precedence edges `(before, after)` implied by the annotated pairs of a
/// chain labeling.
pub fn chain_edges(n: usize, partial: &PartialAnnotation) -> Vec<(usize, usize)> {
    pairs(n)
        .into_iter()
        .zip(partial.values())
        .filter_map(|((i, j), v)| match v {
            Some(0) => Some((i, j)),
            Some(_) => Some((j, i)),
            None => None,
        })
        .collect()
}

/// Number of total orders of `0..n` that respect every edge `(a, b)`
/// (`a` before `b`). Zero if the edges contain a cycle.
pub fn count_linear_extensions(n: usize, edges: &[(usize, usize)]) -> Result<BigUint> {
    let mut preds = vec![0u64; n];
    let mut pred_lists = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::input(format!("edge ({a}, {b}) outside 0..{n}")));
        }
        if a == b {
            return Ok(BigUint::zero());
        }
        if n <= BITMASK_DP_MAX_ITEMS {
            preds[b] |= 1 << a;
        }
        pred_lists[b].push(a);
    }
    if n <= BITMASK_DP_MAX_ITEMS {
        Ok(BigUint::from(linear_extensions_bitmask(&preds)))
    } else {
        Ok(linear_extensions_backtrack(n, &pred_lists))
    }
}

/// Downset DP: `ways[S]` counts orderings of the downset `S` as a prefix.
/// `preds[j]` is the bitmask of items that must precede `j`. At most 20 items,
/// so every count fits (20! < 2^64).
pub(crate) fn linear_extensions_bitmask(preds: &[u64]) -> u64 {
    let n = preds.len();
    if n == 0 {
        return 1;
    }
    let full = (1usize << n) - 1;
    let mut ways = vec![0u64; full + 1];
    ways[0] = 1;
    for set in 0..full {
        let w = ways[set];
        if w == 0 {
            continue;
        }
        let s = set as u64;
        for (j, &p) in preds.iter().enumerate() {
            if s >> j & 1 == 0 && p & s == p {
                ways[set | 1 << j] += w;
            }
        }
    }
    ways[full]
}

/// Kahn-style enumeration: repeatedly pick any current source.
fn linear_extensions_backtrack(n: usize, pred_lists: &[Vec<usize>]) -> BigUint {
    let mut succ = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (b, ps) in pred_lists.iter().enumerate() {
        for &a in ps {
            succ[a].push(b);
            indegree[b] += 1;
        }
    }
    let mut placed = vec![false; n];

    fn go(remaining: usize, succ: &[Vec<usize>], indegree: &mut [usize], placed: &mut [bool]) -> BigUint {
        if remaining == 0 {
            return BigUint::one();
        }
        let mut total = BigUint::zero();
        for v in 0..indegree.len() {
            if placed[v] || indegree[v] != 0 {
                continue;
            }
            placed[v] = true;
            for &w in &succ[v] {
                indegree[w] -= 1;
            }
            total += go(remaining - 1, succ, indegree, placed);
            for &w in &succ[v] {
                indegree[w] += 1;
            }
            placed[v] = false;
        }
        total
    }

    go(n, &succ, &mut indegree, &mut placed)
}

/// Valid BIO sequences of length `len` over `types` chunk types that agree
/// with `partial`.
pub fn count_bio_completions(len: usize, types: usize, partial: &PartialAnnotation) -> Result<BigUint> {
    let family = StructureFamily::bio(len, types)?;
    partial.check_against(&family)?;
    let suffix = bio_suffix_counts(len, types, partial);
    Ok(suffix[0][BioTag::Outside.index(types)].clone())
}

/// `table[pos][prev]`: completions of positions `pos..len` given that the
/// label at `pos - 1` is `prev`. Position 0 is preceded by a virtual `O`.
pub(crate) fn bio_suffix_counts(len: usize, types: usize, partial: &PartialAnnotation) -> Vec<Vec<BigUint>> {
    let labels = 2 * types + 1;
    let mut table = vec![vec![BigUint::zero(); labels]; len + 1];
    table[len] = vec![BigUint::one(); labels];
    for pos in (0..len).rev() {
        let allowed: Vec<usize> = match partial.get(pos) {
            Some(l) => vec![l],
            None => (0..labels).collect(),
        };
        for prev in 0..labels {
            let prev_tag = BioTag::from_index(prev, types);
            let mut sum = BigUint::zero();
            for &l in &allowed {
                if BioTag::may_follow(Some(prev_tag), BioTag::from_index(l, types)) {
                    sum += &table[pos + 1][l];
                }
            }
            table[pos][prev] = sum;
        }
    }
    table
}

/// Exhaustive enumeration of `L^d`, keeping valid labelings consistent with
/// `partial`. Annotated positions are held fixed during enumeration.
pub fn brute_force_count(family: &StructureFamily, partial: &PartialAnnotation) -> Result<BigUint> {
    family.validate()?;
    partial.check_against(family)?;
    let labels = family.label_count() as u64;
    let d = family.dim() as u32;
    match labels.checked_pow(d) {
        Some(size) if size <= BRUTE_FORCE_LIMIT => {}
        _ => {
            return Err(Error::Capacity(format!(
                "{family}: |L|^d exceeds the brute-force limit of {BRUTE_FORCE_LIMIT}"
            )))
        }
    }
    let mut count = 0u64;
    for_each_completion(family, partial, |y| {
        if satisfies_constraints(family, y) {
            count += 1;
        }
    });
    Ok(BigUint::from(count))
}

/// Calls `visit` on every labeling in `L^d` that agrees with `partial`
/// (validity is not checked).
pub fn for_each_completion(family: &StructureFamily, partial: &PartialAnnotation, mut visit: impl FnMut(&[usize])) {
    let labels = family.label_count();
    let free: Vec<usize> = (0..partial.len()).filter(|&i| partial.get(i).is_none()).collect();
    let mut y: Vec<usize> = partial.values().iter().map(|v| v.unwrap_or(0)).collect();
    loop {
        visit(&y);
        let mut carry = true;
        for &i in &free {
            y[i] += 1;
            if y[i] < labels {
                carry = false;
                break;
            }
            y[i] = 0;
        }
        if carry {
            return;
        }
    }
}

/// All valid labelings consistent with `partial`, by enumeration.
pub fn enumerate_valid(family: &StructureFamily, partial: &PartialAnnotation) -> Vec<Labeling> {
    let mut out = Vec::new();
    for_each_completion(family, partial, |y| {
        if satisfies_constraints(family, y) {
            out.push(Labeling(y.to_vec()));
        }
    });
    debug_assert!(out.iter().all(|y| consistent(partial, y).unwrap_or(false)));
    out
}

/// Base-2 logarithm of an arbitrary-precision integer. `-inf` for zero.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return x.to_u64().map(|v| (v as f64).log2()).unwrap_or(f64::NAN);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).log2() + shift as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::structure::{sample_structure, total_count};
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn p(v: &[Option<usize>]) -> PartialAnnotation {
        PartialAnnotation::new(v.to_vec())
    }

    /// Counts permutations respecting the edges by enumerating all of them.
    fn permutations_respecting(n: usize, edges: &[(usize, usize)]) -> u64 {
        fn rec(order: &mut Vec<usize>, used: &mut [bool], edges: &[(usize, usize)], count: &mut u64) {
            let n = used.len();
            if order.len() == n {
                let mut rank = vec![0; n];
                for (r, &v) in order.iter().enumerate() {
                    rank[v] = r;
                }
                if edges.iter().all(|&(a, b)| rank[a] < rank[b]) {
                    *count += 1;
                }
                return;
            }
            for v in 0..n {
                if !used[v] {
                    used[v] = true;
                    order.push(v);
                    rec(order, used, edges, count);
                    order.pop();
                    used[v] = false;
                }
            }
        }
        let mut count = 0;
        rec(&mut Vec::new(), &mut vec![false; n], edges, &mut count);
        count
    }

    #[test]
    fn linear_extension_examples() {
        assert_eq!(count_linear_extensions(3, &[]).unwrap(), big(6));
        assert_eq!(permutations_respecting(3, &[(0, 1)]), 3);
        assert_eq!(count_linear_extensions(3, &[(0, 1)]).unwrap(), big(3));
        assert_eq!(count_linear_extensions(3, &[(0, 1), (1, 2), (2, 0)]).unwrap(), big(0));
        assert_eq!(count_linear_extensions(2, &[(1, 1)]).unwrap(), big(0));
        assert!(count_linear_extensions(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn bitmask_and_backtracking_agree_with_enumeration() {
        let mut rng = rng_from_seed(11);
        for _ in 0..60 {
            let n = rng.random_range(1..7);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    if a != b && rng.random_bool(0.15) {
                        edges.push((a, b));
                    }
                }
            }
            let expected = permutations_respecting(n, &edges);
            let mut preds = vec![0u64; n];
            let mut lists = vec![Vec::new(); n];
            for &(a, b) in &edges {
                preds[b] |= 1 << a;
                lists[b].push(a);
            }
            assert_eq!(linear_extensions_bitmask(&preds), expected);
            assert_eq!(linear_extensions_backtrack(n, &lists), big(expected));
        }
    }

    #[test]
    fn backtracking_path_above_bitmask_limit() {
        // 22 items: a chain 0<1<...<19 plus two free items -> 22!/20! = 462.
        let edges: Vec<_> = (0..19).map(|i| (i, i + 1)).collect();
        assert_eq!(count_linear_extensions(22, &edges).unwrap(), big(22 * 21));
    }

    #[test]
    fn bio_examples() {
        let (b, i, o) = (0, 1, 2);
        assert_eq!(count_bio_completions(1, 1, &PartialAnnotation::empty(1)).unwrap(), big(2));
        assert_eq!(count_bio_completions(3, 1, &PartialAnnotation::empty(3)).unwrap(), big(13));
        assert_eq!(count_bio_completions(3, 1, &p(&[None, Some(i), None])).unwrap(), big(3));
        let f = StructureFamily::bio(2, 1).unwrap();
        assert_eq!(count_completions(&f, &p(&[Some(o), None])).unwrap(), big(2));
        assert_eq!(count_completions(&f, &p(&[Some(o), Some(i)])).unwrap(), big(0));
        assert_eq!(count_completions(&f, &p(&[Some(b), Some(i)])).unwrap(), big(1));
    }

    #[test]
    fn closed_form_families() {
        let a = StructureFamily::assignment(4, 10).unwrap();
        assert_eq!(count_completions(&a, &PartialAnnotation::empty(4)).unwrap(), big(5040));
        let y = sample_structure(&a, 5).unwrap();
        assert_eq!(count_completions(&a, &PartialAnnotation::full(&y)).unwrap(), big(1));
        assert_eq!(count_completions(&a, &p(&[Some(3), Some(3), None, None])).unwrap(), big(0));
        let u = StructureFamily::unconstrained(5, 3).unwrap();
        assert_eq!(count_completions(&u, &p(&[Some(0), None, Some(2), None, None])).unwrap(), big(27));
        let w = StructureFamily::uniform_label(3, 4).unwrap();
        assert_eq!(brute_force_count(&w, &PartialAnnotation::empty(3)).unwrap(), big(4));
        assert_eq!(count_completions(&w, &p(&[Some(1), None, Some(1)])).unwrap(), big(1));
        assert_eq!(count_completions(&w, &p(&[Some(1), None, Some(2)])).unwrap(), big(0));
    }

    #[test]
    fn brute_force_guard() {
        let f = StructureFamily::unconstrained(30, 3).unwrap();
        assert!(matches!(brute_force_count(&f, &PartialAnnotation::empty(30)), Err(Error::Capacity(_))));
        let c = StructureFamily::chain(4).unwrap();
        assert_eq!(brute_force_count(&c, &PartialAnnotation::empty(6)).unwrap(), big(24));
    }

    #[test]
    fn empty_partial_matches_total_count() {
        for f in [
            StructureFamily::chain(5).unwrap(),
            StructureFamily::assignment(3, 6).unwrap(),
            StructureFamily::bio(6, 2).unwrap(),
            StructureFamily::unconstrained(4, 3).unwrap(),
            StructureFamily::uniform_label(4, 3).unwrap(),
        ] {
            let empty = PartialAnnotation::empty(f.dim());
            assert_eq!(count_completions(&f, &empty).unwrap(), total_count(&f).unwrap(), "{f}");
            assert_eq!(brute_force_count(&f, &empty).unwrap(), total_count(&f).unwrap(), "{f}");
        }
    }

    #[test]
    fn revealing_more_never_increases_the_count() {
        let f = StructureFamily::bio(8, 1).unwrap();
        let mut rng = rng_from_seed(99);
        for seed in 0..30 {
            let y = sample_structure(&f, seed).unwrap();
            let mut order: Vec<usize> = (0..8).collect();
            order.shuffle(&mut rng);
            let mut partial = PartialAnnotation::empty(8);
            let mut last = count_completions(&f, &partial).unwrap();
            for &v in &order {
                partial.set(v, Some(y.0[v]));
                let c = count_completions(&f, &partial).unwrap();
                assert!(c <= last);
                last = c;
            }
            assert_eq!(last, big(1));
        }
    }

    #[test]
    fn log2_of_big_values() {
        assert_eq!(log2_big(&big(1)), 0.0);
        assert_eq!(log2_big(&big(1024)), 10.0);
        assert_eq!(log2_big(&BigUint::zero()), f64::NEG_INFINITY);
        let huge = BigUint::one() << 300u32;
        assert_eq!(log2_big(&huge), 300.0);
        let x = falling_factorial(40, 40);
        let direct: f64 = (1..=40).map(|v| (v as f64).log2()).sum();
        assert!((log2_big(&x) - direct).abs() < 1e-9);
    }
}
