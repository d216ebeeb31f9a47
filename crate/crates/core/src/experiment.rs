//! The scheme I vs. scheme II sweep.
//!
//! Each repetition splits the pool into a held-out test set, an initial
//! complete set `T0` and an annotation pool `U0`. For every budget fraction
//! both schemes spend the same number of labels on `U0`; scheme I trains
//! with CoDL (SSPAN when a leftover partial structure exists), scheme II with
//! SSPAN. Both models are scored on the test set.

use std::path::PathBuf;

use rand::seq::SliceRandom;

use crate::annotation::{budget, scheme_complete_with, scheme_espa, AnnotatedDataset, Remainder, SourcePool};
use crate::corpus::{ingest_conll_chunking, TagPolicy};
use crate::error::{Error, Result};
use crate::eval::{chunk_f1, mean, micro_f1, savitzky_golay, standard_error, wilcoxon_rank_sum};
use crate::exec::Execution;
use crate::inference::decode;
use crate::perceptron::{LinearModel, PerceptronLearner};
use crate::rng::{derive_seed, derived_rng};
use crate::sspan::{sspan_train_with, ConstrainedDecoder, Instance};
use crate::structure::{Labeling, PartialAnnotation, StructureFamily};
use crate::synthetic::{make_synthetic_task, FeatureExtractor};

// Seed-path tags.
const DATA: u64 = 1;
const SPLIT: u64 = 2;
const ANNOTATE: u64 = 3;
const LEARN: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { family: StructureFamily, pool_size: usize, noise: f64 },
    Corpus { path: PathBuf, policy: TagPolicy },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    /// Share of structures in the initial complete set.
    pub initial_fraction: f64,
    /// Share of structures held out for testing.
    pub test_fraction: f64,
    pub epochs: usize,
    pub max_iters: usize,
    pub remainder: Remainder,
    pub smoothing_window: usize,
    pub smoothing_degree: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic {
                family: StructureFamily::Bio { len: 10, types: 1 },
                pool_size: 600,
                noise: 0.2,
            },
            fractions: (1..=10).map(|i| f64::from(i) / 10.0).collect(),
            repetitions: 50,
            seed: 0,
            initial_fraction: 0.15,
            test_fraction: 0.30,
            epochs: 5,
            max_iters: 10,
            remainder: Remainder::Partial,
            smoothing_window: 5,
            smoothing_degree: 2,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::input("no budget fractions"));
        }
        if let Some(f) = self.fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::input(format!("budget fraction {f} is outside (0, 1]")));
        }
        if self.repetitions == 0 {
            return Err(Error::input("repetitions must be at least 1"));
        }
        let (a, b) = (self.initial_fraction, self.test_fraction);
        if !(a > 0.0 && b > 0.0 && a + b < 1.0) {
            return Err(Error::input(format!("initial ({a}) and test ({b}) shares must be positive and sum below 1")));
        }
        if self.epochs == 0 || self.max_iters == 0 {
            return Err(Error::input("epochs and max_iters must be at least 1"));
        }
        if self.smoothing_window.is_multiple_of(2) || self.smoothing_degree >= self.smoothing_window {
            return Err(Error::input("smoothing window must be odd and exceed the degree"));
        }
        if let DataSource::Synthetic { family, pool_size, noise } = &self.source {
            family.validate()?;
            if *pool_size < 3 {
                return Err(Error::input("pool size must be at least 3"));
            }
            if !(0.0..1.0).contains(noise) {
                return Err(Error::input(format!("noise {noise} is outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Complete annotation, structure by structure.
    Complete,
    /// Early-stopping partial annotation.
    Espa,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Complete, Scheme::Espa];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Complete => "complete",
            Scheme::Espa => "espa",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Scheme::Complete),
            "espa" => Ok(Scheme::Espa),
            _ => Err(Error::input(format!("unknown scheme '{s}'"))),
        }
    }

    fn tag(self) -> u64 {
        match self {
            Scheme::Complete => 1,
            Scheme::Espa => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scheme: Scheme,
    pub fraction: f64,
    /// F1 per repetition, in repetition order.
    pub f1: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

impl Cell {
    pub fn new(scheme: Scheme, fraction: f64, f1: Vec<f64>) -> Self {
        Self { scheme, fraction, mean: mean(&f1), stderr: standard_error(&f1), f1 }
    }
}

/// Contract checks accumulated over the sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Audit {
    pub runs: usize,
    pub completion_passes: usize,
    pub completions_checked: usize,
    pub converged_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub fractions: Vec<f64>,
    /// Scheme-major: all fractions of `Complete`, then all of `Espa`.
    pub cells: Vec<Cell>,
    /// Two-sided rank-sum p-value between the schemes, per fraction.
    pub p_values: Vec<f64>,
    /// Smoothed mean curves per scheme, when there are enough fractions.
    pub smoothed: Option<Vec<(Scheme, Vec<f64>)>>,
    pub audit: Audit,
}

impl SweepReport {
    pub fn cell(&self, scheme: Scheme, fraction: f64) -> Option<&Cell> {
        self.cells.iter().find(|c| c.scheme == scheme && c.fraction == fraction)
    }

    /// Assembles a report from per-repetition scores; everything else is
    /// derived from them.
    pub fn from_scores(
        fractions: Vec<f64>,
        scores: Vec<(Scheme, Vec<Vec<f64>>)>,
        smoothing: Option<(usize, usize)>,
        audit: Audit,
    ) -> Result<Self> {
        let mut cells = Vec::new();
        for (scheme, per_fraction) in &scores {
            for (&f, f1) in fractions.iter().zip(per_fraction) {
                cells.push(Cell::new(*scheme, f, f1.clone()));
            }
        }
        let find = |s: Scheme, f: f64| cells.iter().find(|c| c.scheme == s && c.fraction == f);
        let mut p_values = Vec::new();
        for &f in &fractions {
            let p = match (find(Scheme::Espa, f), find(Scheme::Complete, f)) {
                (Some(a), Some(b)) => wilcoxon_rank_sum(&a.f1, &b.f1)?,
                _ => f64::NAN,
            };
            p_values.push(p);
        }
        let smoothed = match smoothing {
            Some((w, d)) if fractions.len() >= w => {
                let mut out = Vec::new();
                for scheme in Scheme::ALL {
                    let means: Option<Vec<f64>> = fractions.iter().map(|&f| find(scheme, f).map(|c| c.mean)).collect();
                    if let Some(m) = means {
                        out.push((scheme, savitzky_golay(&m, w, d)?));
                    }
                }
                Some(out)
            }
            _ => None,
        };
        Ok(Self { fractions, cells, p_values, smoothed, audit })
    }
}

/// Pool, per-structure instances and the metric used for evaluation.
pub struct PreparedData {
    pub pool: SourcePool,
    pub instances: Vec<Instance>,
    pub labels: usize,
}

pub fn prepare_data(config: &ExperimentConfig, exec: Execution) -> Result<PreparedData> {
    let (pool, extractor) = match &config.source {
        DataSource::Synthetic { family, pool_size, noise } => {
            let task = make_synthetic_task(family, *pool_size, *noise, derive_seed(config.seed, &[DATA]))?;
            (task.pool, task.extractor)
        }
        DataSource::Corpus { path, policy } => (ingest_conll_chunking(path, *policy)?.pool, FeatureExtractor::Tokens),
    };
    if pool.len() < 3 {
        return Err(Error::input(format!("need at least 3 structures, found {}", pool.len())));
    }
    let labels = pool.structures()[0].family.label_count();
    if pool.structures().iter().any(|s| s.family.label_count() != labels) {
        return Err(Error::input("structures disagree on the label set"));
    }
    let instances = exec
        .map_slice(pool.structures(), |s| Instance::new(s.family, extractor.extract(s)?))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedData { pool, instances, labels })
}

/// One repetition's split of structure indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub test: Vec<usize>,
    pub initial: Vec<usize>,
    pub annotation: Vec<usize>,
}

pub fn split_pool(n: usize, initial_fraction: f64, test_fraction: f64, seed: u64, repetition: usize) -> Result<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derived_rng(seed, &[SPLIT, repetition as u64]));
    let n_test = ((n as f64 * test_fraction).round() as usize).max(1);
    let n_init = ((n as f64 * initial_fraction).round() as usize).max(1);
    if n_test + n_init >= n {
        return Err(Error::input(format!("pool of {n} structures is too small to split")));
    }
    let mut split = Split {
        test: order[..n_test].to_vec(),
        initial: order[n_test..n_test + n_init].to_vec(),
        annotation: order[n_test + n_init..].to_vec(),
    };
    split.test.sort_unstable();
    split.initial.sort_unstable();
    split.annotation.sort_unstable();
    Ok(split)
}

fn check_disjoint(split: &Split, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in split.test.iter().chain(&split.initial).chain(&split.annotation) {
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::ContractViolation(format!("structure {i} appears in two splits")));
        }
    }
    Ok(())
}

/// Outcome of training one scheme at one fraction in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub f1: f64,
    pub completion_passes: usize,
    pub completions_checked: usize,
    pub converged: bool,
}

/// Annotates `U0` under `scheme`, trains and evaluates.
pub fn run_once(
    data: &PreparedData,
    config: &ExperimentConfig,
    split: &Split,
    scheme: Scheme,
    fraction_index: usize,
    repetition: usize,
) -> Result<RunResult> {
    let fraction = config.fractions[fraction_index];
    let u0 = data.pool.subset(&split.annotation);
    let seed = derive_seed(config.seed, &[ANNOTATE, scheme.tag(), fraction_index as u64, repetition as u64]);
    let annotated = match scheme {
        Scheme::Complete => scheme_complete_with(&u0, fraction, seed, config.remainder)?,
        Scheme::Espa => scheme_espa(&u0, fraction, seed)?,
    };
    check_budget(&annotated, &u0, fraction, config.remainder)?;

    let global = |i: usize| split.annotation[i];
    let mut complete_ix: Vec<usize> =
        split.initial.iter().copied().chain(annotated.complete.iter().map(|&i| global(i))).collect();
    complete_ix.sort_unstable();
    let truths: Vec<&Labeling> = complete_ix.iter().map(|&i| &data.pool.structures()[i].truth).collect();
    let complete: Vec<(&Instance, &Labeling)> = complete_ix.iter().map(|&i| &data.instances[i]).zip(truths).collect();

    let learner = PerceptronLearner {
        labels: data.labels,
        epochs: config.epochs,
        seed: derive_seed(config.seed, &[LEARN, repetition as u64]),
    };
    let decoder = ConstrainedDecoder;
    let mut passes = 0;
    let mut checked = 0;
    let mut observer = |_: usize, c: &[Labeling]| {
        passes += 1;
        checked += c.len();
    };

    let (model, converged): (LinearModel, bool) = match scheme {
        Scheme::Complete if annotated.partial.is_empty() => {
            let unlabeled: Vec<&Instance> = annotated.untouched.iter().map(|&i| &data.instances[global(i)]).collect();
            if unlabeled.is_empty() {
                let state = sspan_train_with(
                    &complete,
                    &[],
                    &learner,
                    &decoder,
                    config.max_iters,
                    Execution::Sequential,
                    &mut observer,
                )?;
                (state.model, state.converged)
            } else {
                // CoDL: self-training over all-null partials, observed so the
                // audit sees the completions.
                let empties: Vec<PartialAnnotation> =
                    unlabeled.iter().map(|x| PartialAnnotation::empty(x.family.dim())).collect();
                let partial: Vec<(&Instance, &PartialAnnotation)> = unlabeled.iter().copied().zip(&empties).collect();
                let state = sspan_train_with(
                    &complete,
                    &partial,
                    &learner,
                    &decoder,
                    config.max_iters,
                    Execution::Sequential,
                    &mut observer,
                )?;
                (state.model, state.converged)
            }
        }
        _ => {
            let empties: Vec<PartialAnnotation> =
                annotated.untouched.iter().map(|&i| PartialAnnotation::empty(u0.structures()[i].dim())).collect();
            let partial: Vec<(&Instance, &PartialAnnotation)> = annotated
                .partial
                .iter()
                .map(|(i, a)| (&data.instances[global(*i)], a))
                .chain(annotated.untouched.iter().map(|&i| &data.instances[global(i)]).zip(&empties))
                .collect();
            let state = sspan_train_with(
                &complete,
                &partial,
                &learner,
                &decoder,
                config.max_iters,
                Execution::Sequential,
                &mut observer,
            )?;
            (state.model, state.converged)
        }
    };

    let f1 = evaluate(&model, data, &split.test)?;
    Ok(RunResult { f1, completion_passes: passes, completions_checked: checked, converged })
}

fn check_budget(a: &AnnotatedDataset, u0: &SourcePool, fraction: f64, remainder: Remainder) -> Result<()> {
    let b = budget(fraction, u0.total_instances())?;
    let revealed = a.revealed_labels(u0);
    let spent_ok = match remainder {
        Remainder::Partial => a.annotated_count == b,
        Remainder::Discard => a.annotated_count <= b,
    };
    if !spent_ok || revealed != a.annotated_count {
        return Err(Error::ContractViolation(format!(
            "budget parity broken: budget {b}, reported {}, revealed {revealed}",
            a.annotated_count
        )));
    }
    Ok(())
}

/// Decodes every test structure without pins and scores it: chunk F1 for
/// BIO, label-level micro F1 otherwise.
pub fn evaluate(model: &LinearModel, data: &PreparedData, test: &[usize]) -> Result<f64> {
    let mut predicted = Vec::with_capacity(test.len());
    let mut gold = Vec::with_capacity(test.len());
    for &i in test {
        let x = &data.instances[i];
        predicted.push(decode(&x.family, &x.scores(model)?, &PartialAnnotation::empty(x.family.dim()))?);
        gold.push(data.pool.structures()[i].truth.clone());
    }
    let result = match data.pool.structures()[test[0]].family {
        StructureFamily::Bio { types, .. } => chunk_f1(&predicted, &gold, types)?,
        _ => micro_f1(&predicted, &gold, None)?,
    };
    Ok(result.f1)
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    run_sweep_with(config, Execution::default())
}

pub fn run_sweep_with(config: &ExperimentConfig, exec: Execution) -> Result<SweepReport> {
    config.validate()?;
    let data = prepare_data(config, exec)?;
    let n = data.pool.len();
    let splits = (0..config.repetitions)
        .map(|r| split_pool(n, config.initial_fraction, config.test_fraction, config.seed, r))
        .collect::<Result<Vec<_>>>()?;
    for s in &splits {
        check_disjoint(s, n)?;
    }

    let nf = config.fractions.len();
    let per_scheme = config.repetitions * nf;
    let results = exec.map_indexed(2 * per_scheme, |job| {
        let scheme = Scheme::ALL[job / per_scheme];
        let r = (job % per_scheme) / nf;
        let fi = job % nf;
        run_once(&data, config, &splits[r], scheme, fi, r)
    });

    let mut audit = Audit::default();
    let mut scores: Vec<(Scheme, Vec<Vec<f64>>)> = Scheme::ALL.iter().map(|&s| (s, vec![Vec::new(); nf])).collect();
    for (job, result) in results.into_iter().enumerate() {
        let run = result?;
        let s = job / per_scheme;
        let fi = job % nf;
        scores[s].1[fi].push(run.f1);
        audit.runs += 1;
        audit.completion_passes += run.completion_passes;
        audit.completions_checked += run.completions_checked;
        audit.converged_runs += usize::from(run.converged);
    }
    SweepReport::from_scores(
        config.fractions.clone(),
        scores,
        Some((config.smoothing_window, config.smoothing_degree)),
        audit,
    )
}
