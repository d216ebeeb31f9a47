//! Sparse features and the multiclass averaged perceptron.
//!
//! # Model file format
//!
//! [`LinearModel::write_to`] emits UTF-8 text, one record per line:
//!
//! ```text
//! espa-linear-model 1
//! labels <L>
//! epochs <E>
//! updates <U>
//! instances <N>
//! features <F>
//! <feature id, 16 hex digits> <w_0> ... <w_{L-1}>   (F lines, ascending id)
//! ```
//!
//! Weights are the averaged weights, printed in Rust's shortest round-trip
//! float notation, so reading a file back yields a bit-identical model.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::derived_rng;

const FORMAT_MAGIC: &str = "espa-linear-model";
const FORMAT_VERSION: u32 = 1;

/// 64-bit FNV-1a. Stable across runs and platforms.
pub fn feature_id(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sparse feature vector, sorted by id with duplicates merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureBag {
    entries: Vec<(u64, f64)>,
}

impl FeatureBag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut entries: Vec<(u64, f64)> = pairs.into_iter().collect();
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::input("feature values must be finite"));
        }
        entries.sort_by_key(|&(id, _)| id);
        entries.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        Ok(Self { entries })
    }

    /// Indicator features (value 1) from names.
    pub fn from_names<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        Self::from_pairs(names.into_iter().map(|n| (feature_id(n.as_ref()), 1.0))).expect("indicator values are finite")
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Averaged multiclass linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    labels: usize,
    weights: HashMap<u64, Vec<f64>>,
    epochs: u32,
    updates: u64,
    instances: u64,
}

impl LinearModel {
    /// An all-zero model.
    pub fn zeros(labels: usize) -> Self {
        Self { labels, weights: HashMap::new(), epochs: 0, updates: 0, instances: 0 }
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn epochs(&self) -> u32 {
        self.epochs
    }

    /// Number of mistake-driven updates made during training.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Number of examples visited during training (the averaging horizon).
    pub fn instances(&self) -> u64 {
        self.instances
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, feature: u64, label: usize) -> f64 {
        self.weights.get(&feature).map_or(0.0, |w| w[label])
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for w in out.weights.values_mut() {
            w.iter_mut().for_each(|x| *x *= factor);
        }
        out
    }

    /// Averaged-weight dot product for every label.
    pub fn score_labels(&self, features: &FeatureBag) -> Vec<f64> {
        let mut scores = vec![0.0; self.labels];
        for &(id, v) in features.entries() {
            if let Some(w) = self.weights.get(&id) {
                for (s, wl) in scores.iter_mut().zip(w) {
                    *s += wl * v;
                }
            }
        }
        scores
    }

    /// Highest-scoring label; ties go to the smallest index.
    pub fn predict(&self, features: &FeatureBag) -> usize {
        argmax(&self.score_labels(features))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{FORMAT_MAGIC} {FORMAT_VERSION}")?;
        writeln!(out, "labels {}", self.labels)?;
        writeln!(out, "epochs {}", self.epochs)?;
        writeln!(out, "updates {}", self.updates)?;
        writeln!(out, "instances {}", self.instances)?;
        writeln!(out, "features {}", self.weights.len())?;
        let mut ids: Vec<&u64> = self.weights.keys().collect();
        ids.sort();
        for id in ids {
            write!(out, "{id:016x}")?;
            for w in &self.weights[id] {
                write!(out, " {w:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(Error::Parse { line: 0, message: format!("missing {what}") }),
            }
        };
        let (ln, header) = next("header")?;
        if header.trim() != format!("{FORMAT_MAGIC} {FORMAT_VERSION}") {
            return Err(Error::Parse { line: ln, message: format!("unsupported header '{header}'") });
        }
        let mut field = |key: &str| -> Result<u64> {
            let (ln, line) = next(key)?;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next().and_then(|v| v.parse().ok())) {
                (Some(k), Some(v)) if k == key => Ok(v),
                _ => Err(Error::Parse { line: ln, message: format!("expected '{key} <n>'") }),
            }
        };
        let labels = field("labels")? as usize;
        let epochs = field("epochs")? as u32;
        let updates = field("updates")?;
        let instances = field("instances")?;
        let count = field("features")? as usize;
        let mut weights = HashMap::with_capacity(count);
        for _ in 0..count {
            let (ln, line) = next("feature row")?;
            let bad = |m: &str| Error::Parse { line: ln, message: m.to_string() };
            let mut parts = line.split_whitespace();
            let id = parts.next().and_then(|h| u64::from_str_radix(h, 16).ok()).ok_or_else(|| bad("bad feature id"))?;
            let w: Vec<f64> = parts.map(|p| p.parse::<f64>().map_err(|_| bad("bad weight"))).collect::<Result<_>>()?;
            if w.len() != labels {
                return Err(bad("wrong number of weights"));
            }
            weights.insert(id, w);
        }
        Ok(Self { labels, weights, epochs, updates, instances })
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Running weights plus the bookkeeping for lazy averaging.
struct Accumulator {
    current: Vec<f64>,
    total: Vec<f64>,
    stamp: Vec<u64>,
}

/// Multiclass perceptron with weight averaging. Examples are visited in a
/// fresh seeded order each epoch.
pub fn perceptron_train(
    examples: &[(&FeatureBag, usize)],
    labels: usize,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel> {
    if examples.is_empty() {
        return Err(Error::input("no training examples"));
    }
    if epochs == 0 {
        return Err(Error::input("epochs must be at least 1"));
    }
    if let Some(&(_, y)) = examples.iter().find(|(_, y)| *y >= labels) {
        return Err(Error::input(format!("label {y} out of range 0..{labels}")));
    }
    let mut acc: HashMap<u64, Accumulator> = HashMap::new();
    let mut clock: u64 = 0;
    let mut updates: u64 = 0;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut scores = vec![0.0; labels];

    for epoch in 0..epochs {
        order.shuffle(&mut derived_rng(seed, &[epoch as u64]));
        for &ix in &order {
            let (bag, truth) = examples[ix];
            scores.fill(0.0);
            for &(id, v) in bag.entries() {
                if let Some(a) = acc.get(&id) {
                    for (s, w) in scores.iter_mut().zip(&a.current) {
                        *s += w * v;
                    }
                }
            }
            let guess = argmax(&scores);
            if guess != truth {
                updates += 1;
                for &(id, v) in bag.entries() {
                    let a = acc.entry(id).or_insert_with(|| Accumulator {
                        current: vec![0.0; labels],
                        total: vec![0.0; labels],
                        stamp: vec![0; labels],
                    });
                    for (label, delta) in [(truth, v), (guess, -v)] {
                        a.total[label] += (clock - a.stamp[label]) as f64 * a.current[label];
                        a.stamp[label] = clock;
                        a.current[label] += delta;
                    }
                }
            }
            clock += 1;
        }
    }

    let horizon = clock as f64;
    let weights = acc
        .into_iter()
        .filter_map(|(id, a)| {
            let avg: Vec<f64> =
                (0..labels).map(|l| (a.total[l] + (clock - a.stamp[l]) as f64 * a.current[l]) / horizon).collect();
            avg.iter().any(|&w| w != 0.0).then_some((id, avg))
        })
        .collect();
    Ok(LinearModel { labels, weights, epochs: epochs as u32, updates, instances: clock })
}

/// The learning component used by self-training.
pub trait Learner: Sync {
    fn learn(&self, examples: &[(&FeatureBag, usize)]) -> Result<LinearModel>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerceptronLearner {
    pub labels: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Learner for PerceptronLearner {
    fn learn(&self, examples: &[(&FeatureBag, usize)]) -> Result<LinearModel> {
        perceptron_train(examples, self.labels, self.epochs, self.seed)
    }
}
