//! Structure families, labelings and partial annotations.
//!
//! A structure is a vector of `d` variables over a label set `L`, restricted
//! to a family-specific valid set `C(L^d)`. Five families are supported:
//!
//! * `Chain { n }`: `d = n(n-1)/2` pairwise comparisons between `n` items,
//!   labels `{<, >}`. Variables are the pairs `(i, j)` with `i < j` in
//!   lexicographic order; label `<` (index 0) means item `i` precedes `j`.
//!   Valid labelings are exactly those induced by a total order.
//! * `Assignment { agents, tasks }`: each of `d = agents` variables picks one
//!   of `tasks` labels, pairwise distinct.
//! * `Bio { len, types }`: chunk tags `B_1..B_t, I_1..I_t, O` with index
//!   `B_j = j`, `I_j = t + j`, `O = 2t`. An `I_j` must follow `B_j` or `I_j`;
//!   position 0 behaves as if preceded by `O`.
//! * `Unconstrained { len, labels }`: every labeling is valid.
//! * `UniformLabel { len, labels }`: only constant labelings are valid.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::counting;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureFamily {
    Chain { n: usize },
    Assignment { agents: usize, tasks: usize },
    Bio { len: usize, types: usize },
    Unconstrained { len: usize, labels: usize },
    UniformLabel { len: usize, labels: usize },
}

impl StructureFamily {
    pub fn chain(n: usize) -> Result<Self> {
        Self::Chain { n }.validated()
    }

    pub fn assignment(agents: usize, tasks: usize) -> Result<Self> {
        Self::Assignment { agents, tasks }.validated()
    }

    pub fn bio(len: usize, types: usize) -> Result<Self> {
        Self::Bio { len, types }.validated()
    }

    pub fn unconstrained(len: usize, labels: usize) -> Result<Self> {
        Self::Unconstrained { len, labels }.validated()
    }

    pub fn uniform_label(len: usize, labels: usize) -> Result<Self> {
        Self::UniformLabel { len, labels }.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Checks the parameter invariants of the family.
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Chain { n } => n >= 2,
            Self::Assignment { agents, tasks } => agents >= 1 && agents <= tasks,
            Self::Bio { len, types } => len >= 1 && types >= 1,
            Self::Unconstrained { len, labels } | Self::UniformLabel { len, labels } => len >= 1 && labels >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("invalid family parameters: {self}")))
        }
    }

    /// Number of variables `d`.
    pub fn dim(&self) -> usize {
        match *self {
            Self::Chain { n } => n * (n - 1) / 2,
            Self::Assignment { agents, .. } => agents,
            Self::Bio { len, .. } => len,
            Self::Unconstrained { len, .. } | Self::UniformLabel { len, .. } => len,
        }
    }

    /// Size of the label set `|L|`.
    pub fn label_count(&self) -> usize {
        match *self {
            Self::Chain { .. } => 2,
            Self::Assignment { tasks, .. } => tasks,
            Self::Bio { types, .. } => 2 * types + 1,
            Self::Unconstrained { labels, .. } | Self::UniformLabel { labels, .. } => labels,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Chain { .. } => "chain",
            Self::Assignment { .. } => "assignment",
            Self::Bio { .. } => "bio",
            Self::Unconstrained { .. } => "unconstrained",
            Self::UniformLabel { .. } => "uniform",
        }
    }

    /// Same family kind and parameters but a different number of variables.
    /// Only meaningful for the sequence-like families and assignment.
    pub fn with_dim(&self, d: usize) -> Result<Self> {
        match *self {
            Self::Bio { types, .. } => Self::bio(d, types),
            Self::Unconstrained { labels, .. } => Self::unconstrained(d, labels),
            Self::UniformLabel { labels, .. } => Self::uniform_label(d, labels),
            Self::Assignment { tasks, .. } => Self::assignment(d, tasks),
            Self::Chain { .. } => Err(Error::input("chain size is set by item count")),
        }
    }

    /// Human-readable name of label `idx`.
    pub fn label_name(&self, idx: usize) -> String {
        match *self {
            Self::Chain { .. } => if idx == 0 { "<" } else { ">" }.to_string(),
            Self::Bio { types, .. } => match BioTag::from_index(idx, types) {
                BioTag::Outside => "O".to_string(),
                BioTag::Begin(_) if types == 1 => "B".to_string(),
                BioTag::Inside(_) if types == 1 => "I".to_string(),
                BioTag::Begin(j) => format!("B-{}", j + 1),
                BioTag::Inside(j) => format!("I-{}", j + 1),
            },
            _ => idx.to_string(),
        }
    }

    /// Parses a label by name or by numeric index.
    pub fn parse_label(&self, token: &str) -> Result<usize> {
        let token = token.trim();
        if let Some(idx) = (0..self.label_count()).find(|&i| self.label_name(i) == token) {
            return Ok(idx);
        }
        if let Self::Chain { .. } = self {
            return match token {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(Error::input(format!("unknown chain label '{token}'"))),
            };
        }
        token
            .parse::<usize>()
            .ok()
            .filter(|&i| i < self.label_count())
            .ok_or_else(|| Error::input(format!("unknown label '{token}' for {self}")))
    }
}

impl fmt::Display for StructureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Chain { n } => write!(f, "chain-n{n}"),
            Self::Assignment { agents, tasks } => write!(f, "assignment-d{agents}-t{tasks}"),
            Self::Bio { len, types } => write!(f, "bio-d{len}-t{types}"),
            Self::Unconstrained { len, labels } => write!(f, "unconstrained-d{len}-l{labels}"),
            Self::UniformLabel { len, labels } => write!(f, "uniform-d{len}-l{labels}"),
        }
    }
}

/// Decoded view of a BIO label index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BioTag {
    Begin(usize),
    Inside(usize),
    Outside,
}

impl BioTag {
    pub fn from_index(idx: usize, types: usize) -> Self {
        if idx < types {
            BioTag::Begin(idx)
        } else if idx < 2 * types {
            BioTag::Inside(idx - types)
        } else {
            BioTag::Outside
        }
    }

    pub fn index(self, types: usize) -> usize {
        match self {
            BioTag::Begin(j) => j,
            BioTag::Inside(j) => types + j,
            BioTag::Outside => 2 * types,
        }
    }

    /// Whether `next` may immediately follow `prev` (`None` = sequence start).
    pub fn may_follow(prev: Option<BioTag>, next: BioTag) -> bool {
        match next {
            BioTag::Inside(j) => matches!(prev, Some(BioTag::Begin(p)) | Some(BioTag::Inside(p)) if p == j),
            _ => true,
        }
    }
}

/// Index of pair `(i, j)`, `i < j`, in lexicographic pair order over `n` items.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)`, `i < j`, in variable order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// A complete assignment of labels to the `d` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Labeling(pub Vec<usize>);

impl Labeling {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    /// Pairwise labels induced by an ordering of items (`order[r]` is the
    /// item at rank `r`).
    pub fn from_order(order: &[usize]) -> Self {
        let n = order.len();
        let mut rank = vec![0; n];
        for (r, &item) in order.iter().enumerate() {
            rank[item] = r;
        }
        Labeling(pairs(n).into_iter().map(|(i, j)| usize::from(rank[i] > rank[j])).collect())
    }
}

/// A labeling with some variables left unannotated (`None`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialAnnotation {
    values: Vec<Option<usize>>,
    k: usize,
}

impl PartialAnnotation {
    pub fn new(values: Vec<Option<usize>>) -> Self {
        let k = values.iter().filter(|v| v.is_some()).count();
        Self { values, k }
    }

    /// All-null annotation over `d` variables.
    pub fn empty(d: usize) -> Self {
        Self { values: vec![None; d], k: 0 }
    }

    pub fn full(y: &Labeling) -> Self {
        Self::new(y.0.iter().map(|&v| Some(v)).collect())
    }

    /// Reveals `y` at the given variable indices only.
    pub fn reveal(y: &Labeling, indices: &[usize]) -> Self {
        let mut p = Self::empty(y.len());
        for &i in indices {
            p.set(i, Some(y.0[i]));
        }
        p
    }

    pub fn values(&self) -> &[Option<usize>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of annotated variables.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, value: Option<usize>) {
        match (self.values[i].is_some(), value.is_some()) {
            (false, true) => self.k += 1,
            (true, false) => self.k -= 1,
            _ => {}
        }
        self.values[i] = value;
    }

    pub fn is_complete(&self) -> bool {
        self.k == self.values.len()
    }

    /// The labeling, if every variable is annotated.
    pub fn to_labeling(&self) -> Option<Labeling> {
        self.values.iter().copied().collect::<Option<Vec<_>>>().map(Labeling)
    }

    pub fn check_against(&self, family: &StructureFamily) -> Result<()> {
        if self.len() != family.dim() {
            return Err(Error::input(format!(
                "partial annotation has length {}, {family} needs {}",
                self.len(),
                family.dim()
            )));
        }
        let labels = family.label_count();
        if let Some(bad) = self.values.iter().flatten().find(|&&v| v >= labels) {
            return Err(Error::input(format!("label {bad} out of range for {family}")));
        }
        Ok(())
    }
}

fn check_labeling(family: &StructureFamily, y: &Labeling) -> Result<()> {
    family.validate()?;
    if y.len() != family.dim() {
        return Err(Error::input(format!("labeling has length {}, {family} needs {}", y.len(), family.dim())));
    }
    let labels = family.label_count();
    if let Some(bad) = y.0.iter().find(|&&v| v >= labels) {
        return Err(Error::input(format!("label {bad} out of range for {family}")));
    }
    Ok(())
}

/// Whether `y` belongs to the valid set of `family`.
pub fn is_valid(family: &StructureFamily, y: &Labeling) -> Result<bool> {
    check_labeling(family, y)?;
    Ok(satisfies_constraints(family, &y.0))
}

/// Constraint check without the shape checks. `y` must be well-formed.
pub(crate) fn satisfies_constraints(family: &StructureFamily, y: &[usize]) -> bool {
    match *family {
        StructureFamily::Chain { n } => {
            // A tournament is transitive iff its out-degrees are 0..n-1.
            let mut before = vec![0usize; n];
            for ((i, j), &label) in pairs(n).into_iter().zip(y) {
                if label == 0 {
                    before[i] += 1;
                } else {
                    before[j] += 1;
                }
            }
            let mut seen = vec![false; n];
            before.into_iter().all(|c| !std::mem::replace(&mut seen[c], true))
        }
        StructureFamily::Assignment { tasks, .. } => {
            let mut used = vec![false; tasks];
            y.iter().all(|&t| !std::mem::replace(&mut used[t], true))
        }
        StructureFamily::Bio { types, .. } => {
            let mut prev = None;
            y.iter().all(|&l| {
                let tag = BioTag::from_index(l, types);
                let ok = BioTag::may_follow(prev, tag);
                prev = Some(tag);
                ok
            })
        }
        StructureFamily::Unconstrained { .. } => true,
        StructureFamily::UniformLabel { .. } => y.windows(2).all(|w| w[0] == w[1]),
    }
}

/// Whether `y` agrees with every annotated entry of `partial`.
pub fn consistent(partial: &PartialAnnotation, y: &Labeling) -> Result<bool> {
    if partial.len() != y.len() {
        return Err(Error::input(format!("length mismatch: partial {} vs labeling {}", partial.len(), y.len())));
    }
    Ok(partial.values.iter().zip(&y.0).all(|(p, &v)| p.is_none_or(|p| p == v)))
}

/// `|C(L^d)|`.
pub fn total_count(family: &StructureFamily) -> Result<BigUint> {
    family.validate()?;
    Ok(match *family {
        StructureFamily::Chain { n } => falling_factorial(n, n),
        StructureFamily::Assignment { agents, tasks } => falling_factorial(tasks, agents),
        StructureFamily::Bio { len, types } => {
            counting::count_bio_completions(len, types, &PartialAnnotation::empty(len))?
        }
        StructureFamily::Unconstrained { len, labels } => BigUint::from(labels).pow(len as u32),
        StructureFamily::UniformLabel { labels, .. } => BigUint::from(labels),
    })
}

/// `n (n-1) ... (n-k+1)`.
pub fn falling_factorial(n: usize, k: usize) -> BigUint {
    (n - k + 1..=n).fold(BigUint::one(), |acc, v| acc * BigUint::from(v))
}

/// Draws a labeling uniformly from `C(L^d)`; deterministic given `seed`.
pub fn sample_structure(family: &StructureFamily, seed: u64) -> Result<Labeling> {
    family.validate()?;
    let mut rng = rng_from_seed(seed);
    Ok(sample_structure_with(family, &mut rng))
}

pub(crate) fn sample_structure_with(family: &StructureFamily, rng: &mut SeededRng) -> Labeling {
    match *family {
        StructureFamily::Chain { n } => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            Labeling::from_order(&order)
        }
        StructureFamily::Assignment { agents, tasks } => {
            let mut all: Vec<usize> = (0..tasks).collect();
            let (chosen, _) = all.partial_shuffle(rng, agents);
            Labeling(chosen.to_vec())
        }
        StructureFamily::Bio { len, types } => sample_bio(len, types, rng),
        StructureFamily::Unconstrained { len, labels } => {
            Labeling((0..len).map(|_| rng.random_range(0..labels)).collect())
        }
        StructureFamily::UniformLabel { len, labels } => Labeling(vec![rng.random_range(0..labels); len]),
    }
}

/// Sequential sampling weighted by the number of valid suffixes.
fn sample_bio(len: usize, types: usize, rng: &mut SeededRng) -> Labeling {
    let suffix = counting::bio_suffix_counts(len, types, &PartialAnnotation::empty(len));
    let labels = 2 * types + 1;
    let mut prev = None;
    let mut out = Vec::with_capacity(len);
    for pos in 0..len {
        let weights: Vec<BigUint> = (0..labels)
            .map(|l| {
                let tag = BioTag::from_index(l, types);
                if BioTag::may_follow(prev, tag) {
                    suffix[pos + 1][l].clone()
                } else {
                    BigUint::zero()
                }
            })
            .collect();
        let total: BigUint = weights.iter().sum();
        let mut draw = uniform_below(rng, &total);
        let mut pick = labels - 1;
        for (l, w) in weights.iter().enumerate() {
            if &draw < w {
                pick = l;
                break;
            }
            draw -= w;
        }
        prev = Some(BioTag::from_index(pick, types));
        out.push(pick);
    }
    Labeling(out)
}

/// Uniform integer in `[0, bound)` by rejection sampling over `bits(bound)` bits.
pub(crate) fn uniform_below(rng: &mut SeededRng, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let excess = (words as u64) * 32 - bits;
    loop {
        let mut digits: Vec<u32> = (0..words).map(|_| rng.random()).collect();
        if let Some(top) = digits.last_mut() {
            *top >>= excess;
        }
        let candidate = BigUint::from_slice(&digits);
        if &candidate < bound {
            return candidate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn lab(v: &[usize]) -> Labeling {
        Labeling(v.to_vec())
    }

    #[test]
    fn chain_validity() {
        let f = StructureFamily::chain(3).unwrap();
        // pairs (0,1), (0,2), (1,2): a<b, a<c, b<c
        assert!(is_valid(&f, &lab(&[0, 0, 0])).unwrap());
        // a<b, b<c, c<a: (0,1)=<, (0,2)=>, (1,2)=<
        assert!(!is_valid(&f, &lab(&[0, 1, 0])).unwrap());
    }

    #[test]
    fn bio_validity() {
        let f = StructureFamily::bio(2, 1).unwrap();
        let (b, i, o) = (0, 1, 2);
        assert!(!is_valid(&f, &lab(&[o, i])).unwrap());
        assert!(is_valid(&f, &lab(&[b, i])).unwrap());
        assert!(!is_valid(&f, &lab(&[i, o])).unwrap());
        let f2 = StructureFamily::bio(2, 2).unwrap();
        // B-1 I-2 is invalid, B-1 I-1 is valid
        assert!(!is_valid(&f2, &lab(&[0, 3])).unwrap());
        assert!(is_valid(&f2, &lab(&[0, 2])).unwrap());
    }

    #[test]
    fn assignment_and_uniform_validity() {
        let a = StructureFamily::assignment(3, 4).unwrap();
        assert!(is_valid(&a, &lab(&[0, 3, 1])).unwrap());
        assert!(!is_valid(&a, &lab(&[0, 3, 0])).unwrap());
        let u = StructureFamily::uniform_label(3, 2).unwrap();
        assert!(is_valid(&u, &lab(&[1, 1, 1])).unwrap());
        assert!(!is_valid(&u, &lab(&[1, 0, 1])).unwrap());
    }

    #[test]
    fn shape_errors() {
        let f = StructureFamily::bio(2, 1).unwrap();
        assert!(is_valid(&f, &lab(&[0])).is_err());
        assert!(is_valid(&f, &lab(&[0, 3])).is_err());
        assert!(consistent(&PartialAnnotation::empty(3), &lab(&[0, 0])).is_err());
        assert!(StructureFamily::assignment(5, 4).is_err());
        assert!(StructureFamily::chain(1).is_err());
        assert!(StructureFamily::bio(3, 0).is_err());
    }

    #[test]
    fn total_counts() {
        assert_eq!(total_count(&StructureFamily::chain(10).unwrap()).unwrap(), BigUint::from(3_628_800u32));
        assert_eq!(total_count(&StructureFamily::assignment(4, 10).unwrap()).unwrap(), BigUint::from(5040u32));
        assert_eq!(total_count(&StructureFamily::bio(3, 1).unwrap()).unwrap(), BigUint::from(13u32));
        assert_eq!(total_count(&StructureFamily::unconstrained(5, 3).unwrap()).unwrap(), BigUint::from(243u32));
        assert_eq!(total_count(&StructureFamily::uniform_label(5, 3).unwrap()).unwrap(), BigUint::from(3u32));
    }

    #[test]
    fn consistency_examples() {
        let (b, o) = (0, 2);
        assert!(consistent(&PartialAnnotation::new(vec![None, None]), &lab(&[o, b])).unwrap());
        assert!(!consistent(&PartialAnnotation::new(vec![Some(o), None]), &lab(&[b, b])).unwrap());
        assert!(consistent(&PartialAnnotation::new(vec![Some(o), Some(b)]), &lab(&[o, b])).unwrap());
    }

    #[test]
    fn partial_k_tracks_entries() {
        let mut p = PartialAnnotation::empty(4);
        p.set(1, Some(2));
        p.set(3, Some(0));
        p.set(3, Some(1));
        assert_eq!(p.k(), 2);
        p.set(1, None);
        assert_eq!(p.k(), 1);
    }

    #[test]
    fn pair_indexing_matches_enumeration() {
        for n in 2..8 {
            for (idx, (i, j)) in pairs(n).into_iter().enumerate() {
                assert_eq!(pair_index(n, i, j), idx);
            }
        }
    }

    #[test]
    fn uniform_label_samples_are_constant() {
        let f = StructureFamily::uniform_label(5, 3).unwrap();
        for seed in 0..50 {
            let y = sample_structure(&f, seed).unwrap();
            assert!(y.0.iter().all(|&v| v == y.0[0]));
        }
    }

    #[test]
    fn chain_samples_are_uniform() {
        let f = StructureFamily::chain(3).unwrap();
        let mut freq: HashMap<Labeling, usize> = HashMap::new();
        let trials = 10_000;
        for seed in 0..trials {
            *freq.entry(sample_structure(&f, seed).unwrap()).or_default() += 1;
        }
        assert_eq!(freq.len(), 6);
        for (y, c) in freq {
            assert!(is_valid(&f, &y).unwrap());
            let p = c as f64 / trials as f64;
            assert!((p - 1.0 / 6.0).abs() < 0.02, "{y:?} frequency {p}");
        }
    }

    #[test]
    fn bio_samples_are_uniform() {
        let f = StructureFamily::bio(2, 1).unwrap();
        let mut freq: HashMap<Labeling, usize> = HashMap::new();
        let trials = 10_000;
        for seed in 0..trials {
            *freq.entry(sample_structure(&f, seed).unwrap()).or_default() += 1;
        }
        // BB BI BO OB OO
        assert_eq!(freq.len(), 5);
        for (y, c) in freq {
            assert!(is_valid(&f, &y).unwrap());
            let p = c as f64 / trials as f64;
            assert!((p - 0.2).abs() < 0.02, "{y:?} frequency {p}");
        }
    }

    #[test]
    fn label_names_round_trip() {
        let f = StructureFamily::bio(3, 2).unwrap();
        for l in 0..f.label_count() {
            assert_eq!(f.parse_label(&f.label_name(l)).unwrap(), l);
        }
        let b1 = StructureFamily::bio(3, 1).unwrap();
        assert_eq!(b1.parse_label("I").unwrap(), 1);
        let c = StructureFamily::chain(3).unwrap();
        assert_eq!(c.parse_label(">").unwrap(), 1);
    }

    #[test]
    fn uniform_below_stays_in_range() {
        let mut rng = rng_from_seed(3);
        let bound = BigUint::from(13u32);
        let mut hits = [0usize; 13];
        for _ in 0..1300 {
            let v = uniform_below(&mut rng, &bound);
            hits[v.to_u32_digits().first().copied().unwrap_or(0) as usize] += 1;
        }
        assert!(hits.iter().all(|&h| h > 50));
    }
}
