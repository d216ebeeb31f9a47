//! Budgeted annotation of a fully labeled source pool.
//!
//! Both schemes spend exactly `B = floor(fraction * total_instances)` labels.
//! Scheme I annotates whole structures in a random order and spends any
//! remainder on one final structure. Scheme II (early-stopping partial
//! annotation) draws `B` instance slots uniformly without replacement from the
//! union of all structures.

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::structure::{is_valid, Labeling, PartialAnnotation, StructureFamily};

/// What a structure looks like to the learner.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// One categorical symbol per variable.
    Symbols(Vec<u32>),
    /// Tokens with part-of-speech tags (chunking corpora).
    Tokens { words: Vec<String>, tags: Vec<String> },
    /// Agent-by-task affinity matrix.
    Affinity(Vec<Vec<f64>>),
    /// One observed score per item; variables are item pairs.
    Scores(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceStructure {
    pub family: StructureFamily,
    pub truth: Labeling,
    pub observation: Observation,
}

impl SourceStructure {
    pub fn dim(&self) -> usize {
        self.family.dim()
    }
}

/// Fully labeled structures from which annotation schemes are simulated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourcePool {
    structures: Vec<SourceStructure>,
}

impl SourcePool {
    /// Rejects structures whose truth is not valid under their family.
    pub fn new(structures: Vec<SourceStructure>) -> Result<Self> {
        for (i, s) in structures.iter().enumerate() {
            if !is_valid(&s.family, &s.truth)? {
                return Err(Error::input(format!("structure {i} is not valid under {}", s.family)));
            }
        }
        Ok(Self { structures })
    }

    pub fn structures(&self) -> &[SourceStructure] {
        &self.structures
    }

    pub fn len(&self) -> usize {
        self.structures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structures.is_empty()
    }

    pub fn total_instances(&self) -> usize {
        self.structures.iter().map(SourceStructure::dim).sum()
    }

    /// Sub-pool with the given structures, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self { structures: indices.iter().map(|&i| self.structures[i].clone()).collect() }
    }
}

/// Result of applying an annotation scheme. Indices refer to the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDataset {
    pub complete: Vec<usize>,
    /// Partially annotated structures; their truth stays in the pool and is
    /// only used for evaluation.
    pub partial: Vec<(usize, PartialAnnotation)>,
    pub untouched: Vec<usize>,
    pub annotated_count: usize,
}

impl AnnotatedDataset {
    /// Labels actually revealed, recounted from the contents.
    pub fn revealed_labels(&self, pool: &SourcePool) -> usize {
        self.complete.iter().map(|&i| pool.structures[i].dim()).sum::<usize>()
            + self.partial.iter().map(|(_, p)| p.k()).sum::<usize>()
    }
}

/// What scheme I does with budget left over once no whole structure fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Remainder {
    /// Spend it on a partial annotation of the next structure.
    #[default]
    Partial,
    /// Leave it unspent.
    Discard,
}

/// `floor(fraction * total)`, guarding against products like 0.57 * 100
/// landing just below an integer.
pub fn budget(fraction: f64, total: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::input(format!("budget fraction {fraction} is outside (0, 1]")));
    }
    Ok(((fraction * total as f64) + 1e-9).floor() as usize)
}

pub fn scheme_complete(pool: &SourcePool, fraction: f64, seed: u64) -> Result<AnnotatedDataset> {
    scheme_complete_with(pool, fraction, seed, Remainder::Partial)
}

/// Scheme I: annotate structures completely, one after another.
pub fn scheme_complete_with(
    pool: &SourcePool,
    fraction: f64,
    seed: u64,
    remainder: Remainder,
) -> Result<AnnotatedDataset> {
    if pool.is_empty() {
        return Err(Error::input("empty source pool"));
    }
    let b = budget(fraction, pool.total_instances())?;
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng);

    let mut left = b;
    let mut out =
        AnnotatedDataset { complete: Vec::new(), partial: Vec::new(), untouched: Vec::new(), annotated_count: 0 };
    let mut spent_remainder = false;
    for idx in order {
        let s = &pool.structures[idx];
        let d = s.dim();
        if !spent_remainder && d <= left {
            out.complete.push(idx);
            left -= d;
        } else if !spent_remainder && left > 0 && remainder == Remainder::Partial {
            let slots = index::sample(&mut rng, d, left).into_vec();
            out.partial.push((idx, PartialAnnotation::reveal(&s.truth, &slots)));
            left = 0;
            spent_remainder = true;
        } else {
            spent_remainder = true;
            out.untouched.push(idx);
        }
    }
    out.annotated_count = b - left;
    if remainder == Remainder::Discard {
        out.annotated_count = out.revealed_labels(pool);
    }
    Ok(out)
}

/// Scheme II: reveal `B` instances drawn uniformly from the whole pool.
pub fn scheme_espa(pool: &SourcePool, fraction: f64, seed: u64) -> Result<AnnotatedDataset> {
    if pool.is_empty() {
        return Err(Error::input("empty source pool"));
    }
    let total = pool.total_instances();
    let b = budget(fraction, total)?;
    let mut rng = rng_from_seed(seed);
    let offsets: Vec<usize> = pool
        .structures
        .iter()
        .scan(0, |acc, s| {
            let start = *acc;
            *acc += s.dim();
            Some(start)
        })
        .collect();
    let mut drawn: Vec<Vec<usize>> = vec![Vec::new(); pool.len()];
    let mut slots = index::sample(&mut rng, total, b).into_vec();
    slots.sort_unstable();
    for slot in slots {
        let owner = offsets.partition_point(|&o| o <= slot) - 1;
        drawn[owner].push(slot - offsets[owner]);
    }
    let mut out =
        AnnotatedDataset { complete: Vec::new(), partial: Vec::new(), untouched: Vec::new(), annotated_count: b };
    for (idx, vars) in drawn.into_iter().enumerate() {
        let s = &pool.structures[idx];
        if vars.len() == s.dim() {
            out.complete.push(idx);
        } else {
            out.partial.push((idx, PartialAnnotation::reveal(&s.truth, &vars)));
        }
    }
    Ok(out)
}
