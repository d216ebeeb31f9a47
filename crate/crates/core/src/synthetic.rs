//! Synthetic structured tasks with planted labels, and feature extraction.
//!
//! Generators draw each truth uniformly from the family and emit
//! observations correlated with it:
//!
//! * sequence families (BIO, unconstrained, uniform-label): one symbol per
//!   variable from a label-specific vocabulary of [`SYMBOLS_PER_LABEL`]
//!   symbols; with probability `noise` the symbol comes from the vocabulary of
//!   a different, uniformly chosen label;
//! * assignment: affinity `(1 - noise) [task = truth] + noise U(0, 1)`;
//! * chain: item score `(1 - noise) rank / (n - 1) + noise U(0, 1)`.

use rand::Rng;

use crate::annotation::{Observation, SourcePool, SourceStructure};
use crate::error::{Error, Result};
use crate::perceptron::{feature_id, FeatureBag};
use crate::rng::{derived_rng, SeededRng};
use crate::structure::{pairs, sample_structure_with, StructureFamily};

pub const SYMBOLS_PER_LABEL: u32 = 100;

/// Value given to the neighbour and bigram indicators; the observed symbol
/// itself carries weight 1, so it dominates once its weight is learned.
pub const CONTEXT_WEIGHT: f64 = 0.25;

const AFFINITY_BUCKETS: f64 = 5.0;
const GAP_BUCKETS: f64 = 10.0;

/// Turns a structure's observation into one feature bag per variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureExtractor {
    /// Current/previous/next symbol, symbol bigrams, position parity.
    Symbols,
    /// Word, tag and suffix features of a token window.
    Tokens,
    /// Per-task affinity buckets and row-maximum indicators.
    Affinity,
    /// Signed score-gap buckets per item pair.
    ScoreGap,
}

impl FeatureExtractor {
    pub fn for_observation(obs: &Observation) -> Self {
        match obs {
            Observation::Symbols(_) => Self::Symbols,
            Observation::Tokens { .. } => Self::Tokens,
            Observation::Affinity(_) => Self::Affinity,
            Observation::Scores(_) => Self::ScoreGap,
        }
    }

    pub fn extract(&self, s: &SourceStructure) -> Result<Vec<FeatureBag>> {
        let d = s.dim();
        let bags = match (self, &s.observation) {
            (Self::Symbols, Observation::Symbols(sym)) if sym.len() == d => symbol_features(sym),
            (Self::Tokens, Observation::Tokens { words, tags }) if words.len() == d && tags.len() == d => {
                token_features(words, tags)
            }
            (Self::Affinity, Observation::Affinity(aff)) if aff.len() == d => affinity_features(aff),
            (Self::ScoreGap, Observation::Scores(sc)) => {
                if let StructureFamily::Chain { n } = s.family {
                    if sc.len() != n {
                        return Err(Error::input("score count differs from item count"));
                    }
                }
                gap_features(sc)
            }
            _ => {
                return Err(Error::input(format!(
                    "{self:?} features do not fit the observation of a {} structure",
                    s.family
                )))
            }
        };
        Ok(bags)
    }
}

fn symbol_features(sym: &[u32]) -> Vec<FeatureBag> {
    let d = sym.len();
    let at = |i: isize| -> String {
        if i < 0 {
            "<s>".to_string()
        } else if i as usize >= d {
            "</s>".to_string()
        } else {
            sym[i as usize].to_string()
        }
    };
    (0..d as isize)
        .map(|i| {
            let (p, c, n) = (at(i - 1), at(i), at(i + 1));
            FeatureBag::from_pairs(
                [
                    ("bias".to_string(), 1.0),
                    (format!("cur={c}"), 1.0),
                    (format!("prev={p}"), CONTEXT_WEIGHT),
                    (format!("next={n}"), CONTEXT_WEIGHT),
                    (format!("prev_cur={p}_{c}"), CONTEXT_WEIGHT),
                    (format!("cur_next={c}_{n}"), CONTEXT_WEIGHT),
                    (format!("parity={}", i % 2), 1.0),
                ]
                .map(|(k, v)| (feature_id(&k), v)),
            )
            .expect("weights are finite")
        })
        .collect()
}

fn token_features(words: &[String], tags: &[String]) -> Vec<FeatureBag> {
    let d = words.len();
    let w = |i: isize| -> String {
        if i < 0 || i as usize >= d {
            "<pad>".into()
        } else {
            words[i as usize].to_lowercase()
        }
    };
    let t = |i: isize| -> &str {
        if i < 0 || i as usize >= d {
            "<pad>"
        } else {
            &tags[i as usize]
        }
    };
    (0..d as isize)
        .map(|i| {
            let word = &words[i as usize];
            let suffix: String = {
                let chars: Vec<char> = word.to_lowercase().chars().collect();
                chars[chars.len().saturating_sub(3)..].iter().collect()
            };
            let shape = if word.chars().next().is_some_and(char::is_uppercase) { "cap" } else { "low" };
            FeatureBag::from_names([
                "bias".to_string(),
                format!("w={}", w(i)),
                format!("t={}", t(i)),
                format!("w-1={}", w(i - 1)),
                format!("w+1={}", w(i + 1)),
                format!("t-1={}", t(i - 1)),
                format!("t+1={}", t(i + 1)),
                format!("t-1_t={}_{}", t(i - 1), t(i)),
                format!("t_t+1={}_{}", t(i), t(i + 1)),
                format!("suf={suffix}"),
                format!("shape={shape}"),
            ])
        })
        .collect()
}

fn affinity_features(aff: &[Vec<f64>]) -> Vec<FeatureBag> {
    aff.iter()
        .map(|row| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut names = vec!["bias".to_string()];
            for (task, &a) in row.iter().enumerate() {
                let bucket = ((a * AFFINITY_BUCKETS).floor() as i64).clamp(0, AFFINITY_BUCKETS as i64 - 1);
                names.push(format!("aff[{task}]={bucket}"));
                if a == best {
                    names.push(format!("rowmax={task}"));
                }
            }
            FeatureBag::from_names(names)
        })
        .collect()
}

fn gap_features(scores: &[f64]) -> Vec<FeatureBag> {
    pairs(scores.len())
        .into_iter()
        .map(|(i, j)| {
            let gap = scores[j] - scores[i];
            let bucket = ((gap * GAP_BUCKETS).floor() as i64).clamp(-GAP_BUCKETS as i64, GAP_BUCKETS as i64);
            FeatureBag::from_names([
                "bias".to_string(),
                format!("gap={bucket}"),
                format!("sign={}", if gap > 0.0 { '+' } else { '-' }),
            ])
        })
        .collect()
}

/// A generated pool together with the extractor matching its observations.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub pool: SourcePool,
    pub extractor: FeatureExtractor,
}

/// Generates `count` structures of `family` with observations at noise
/// level `noise`. Deterministic given `seed`.
pub fn make_synthetic_task(family: &StructureFamily, count: usize, noise: f64, seed: u64) -> Result<SyntheticTask> {
    family.validate()?;
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::input(format!("noise {noise} is outside [0, 1)")));
    }
    let structures = (0..count)
        .map(|i| {
            let mut rng = derived_rng(seed, &[i as u64]);
            let truth = sample_structure_with(family, &mut rng);
            let observation = observe(family, &truth.0, noise, &mut rng);
            SourceStructure { family: *family, truth, observation }
        })
        .collect();
    let extractor = match family {
        StructureFamily::Chain { .. } => FeatureExtractor::ScoreGap,
        StructureFamily::Assignment { .. } => FeatureExtractor::Affinity,
        _ => FeatureExtractor::Symbols,
    };
    Ok(SyntheticTask { pool: SourcePool::new(structures)?, extractor })
}

fn observe(family: &StructureFamily, truth: &[usize], noise: f64, rng: &mut SeededRng) -> Observation {
    match *family {
        StructureFamily::Chain { n } => {
            let mut rank = vec![0usize; n];
            // Items preceding item i under the truth = its rank.
            for ((i, j), &l) in pairs(n).into_iter().zip(truth) {
                if l == 0 {
                    rank[j] += 1;
                } else {
                    rank[i] += 1;
                }
            }
            Observation::Scores(
                rank.iter().map(|&r| (1.0 - noise) * r as f64 / (n - 1) as f64 + noise * rng.random::<f64>()).collect(),
            )
        }
        StructureFamily::Assignment { tasks, .. } => Observation::Affinity(
            truth
                .iter()
                .map(|&y| {
                    (0..tasks)
                        .map(|t| (1.0 - noise) * f64::from(u8::from(t == y)) + noise * rng.random::<f64>())
                        .collect()
                })
                .collect(),
        ),
        _ => {
            let labels = family.label_count();
            Observation::Symbols(
                truth
                    .iter()
                    .map(|&y| {
                        let source = if labels > 1 && rng.random_bool(noise) {
                            let other = rng.random_range(0..labels - 1);
                            if other >= y {
                                other + 1
                            } else {
                                other
                            }
                        } else {
                            y
                        };
                        source as u32 * SYMBOLS_PER_LABEL + rng.random_range(0..SYMBOLS_PER_LABEL)
                    })
                    .collect(),
            )
        }
    }
}
