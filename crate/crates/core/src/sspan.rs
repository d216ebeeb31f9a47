//! Self-training over partially annotated structures.
//!
//! Starting from a model learned on the complete set `T`, each iteration
//! completes every partial structure with constrained inference (structural
//! constraints plus equality to every revealed label), then retrains on `T`
//! together with the completions. The loop stops once the completions repeat
//! or after `max_iters` iterations. CoDL is the special case where nothing
//! is revealed.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::inference::{decode, LocalScores};
use crate::perceptron::{FeatureBag, Learner, LinearModel};
use crate::structure::{consistent, is_valid, Labeling, PartialAnnotation, StructureFamily};

pub const DEFAULT_MAX_ITERS: usize = 10;

/// A structure as the learner sees it: its family and one feature bag per
/// variable. Labels are never part of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub family: StructureFamily,
    pub features: Vec<FeatureBag>,
}

impl Instance {
    pub fn new(family: StructureFamily, features: Vec<FeatureBag>) -> Result<Self> {
        if features.len() != family.dim() {
            return Err(Error::input(format!("{} feature bags for a {family} structure", features.len())));
        }
        Ok(Self { family, features })
    }

    pub fn scores(&self, model: &LinearModel) -> Result<LocalScores> {
        let cols = self.family.label_count();
        if model.label_count() != cols {
            return Err(Error::input(format!(
                "model has {} labels, {} needs {cols}",
                model.label_count(),
                self.family
            )));
        }
        let data = self.features.iter().flat_map(|b| model.score_labels(b)).collect();
        LocalScores::new(self.features.len(), cols, data)
    }
}

/// The inference component used by self-training.
pub trait Decoder: Sync {
    fn decode(&self, model: &LinearModel, input: &Instance, partial: &PartialAnnotation) -> Result<Labeling>;
}

/// Exact constrained decoding of model scores.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstrainedDecoder;

impl Decoder for ConstrainedDecoder {
    fn decode(&self, model: &LinearModel, input: &Instance, partial: &PartialAnnotation) -> Result<Labeling> {
        decode(&input.family, &input.scores(model)?, partial)
    }
}

#[derive(Debug, Clone)]
pub struct TrainingState {
    pub model: LinearModel,
    /// Number of completion passes performed.
    pub iteration: usize,
    /// Completions from the last pass, in the order of the partial set.
    pub completed_pool: Vec<Labeling>,
    /// True when the loop stopped because the multiset of completions
    /// repeated.
    pub converged: bool,
}

fn flatten<'a>(items: impl IntoIterator<Item = (&'a Instance, &'a Labeling)>) -> Vec<(&'a FeatureBag, usize)> {
    items.into_iter().flat_map(|(x, y)| x.features.iter().zip(y.0.iter().copied())).collect()
}

pub fn sspan_train(
    complete: &[(&Instance, &Labeling)],
    partial: &[(&Instance, &PartialAnnotation)],
    learner: &dyn Learner,
    decoder: &dyn Decoder,
    max_iters: usize,
) -> Result<LinearModel> {
    sspan_train_with(complete, partial, learner, decoder, max_iters, Execution::default(), &mut |_, _| {})
        .map(|s| s.model)
}

/// Full self-training loop. `observer` sees every completion pass before
/// the model is retrained on it.
pub fn sspan_train_with(
    complete: &[(&Instance, &Labeling)],
    partial: &[(&Instance, &PartialAnnotation)],
    learner: &dyn Learner,
    decoder: &dyn Decoder,
    max_iters: usize,
    exec: Execution,
    observer: &mut dyn FnMut(usize, &[Labeling]),
) -> Result<TrainingState> {
    if complete.is_empty() {
        return Err(Error::input("self-training needs at least one complete structure"));
    }
    if max_iters == 0 {
        return Err(Error::input("max_iters must be at least 1"));
    }
    for (x, y) in complete {
        if y.len() != x.features.len() {
            return Err(Error::input("complete structure label count differs from its features"));
        }
    }
    for (x, a) in partial {
        a.check_against(&x.family)?;
    }
    let base = flatten(complete.iter().copied());
    let mut model = learner.learn(&base)?;
    let mut state = TrainingState { model: model.clone(), iteration: 0, completed_pool: Vec::new(), converged: true };
    if partial.is_empty() {
        return Ok(state);
    }

    let mut previous: Option<Vec<Labeling>> = None;
    state.converged = false;
    for iteration in 1..=max_iters {
        let decoded = exec.map_slice(partial, |(x, a)| decoder.decode(&model, x, a));
        let mut completions = Vec::with_capacity(partial.len());
        for (r, (x, a)) in decoded.into_iter().zip(partial) {
            let y = r?;
            if !is_valid(&x.family, &y)? {
                return Err(Error::ContractViolation(format!(
                    "decoder returned a labeling outside the valid set of {}",
                    x.family
                )));
            }
            if !consistent(a, &y)? {
                return Err(Error::ContractViolation("decoder overrode a revealed label".into()));
            }
            completions.push(y);
        }
        observer(iteration, &completions);
        state.iteration = iteration;
        let mut signature = completions.clone();
        signature.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        if previous.as_ref() == Some(&signature) {
            state.converged = true;
            state.completed_pool = completions;
            break;
        }
        let mut examples = base.clone();
        examples.extend(flatten(partial.iter().map(|(x, _)| *x).zip(completions.iter())));
        model = learner.learn(&examples)?;
        state.completed_pool = completions;
        previous = Some(signature);
    }
    state.model = model;
    Ok(state)
}

/// Self-training on unlabeled structures: [`sspan_train`] with nothing
/// revealed.
pub fn codl_train(
    complete: &[(&Instance, &Labeling)],
    unlabeled: &[&Instance],
    learner: &dyn Learner,
    decoder: &dyn Decoder,
    max_iters: usize,
) -> Result<LinearModel> {
    let empties: Vec<PartialAnnotation> = unlabeled.iter().map(|x| PartialAnnotation::empty(x.family.dim())).collect();
    let partial: Vec<(&Instance, &PartialAnnotation)> = unlabeled.iter().copied().zip(empties.iter()).collect();
    sspan_train(complete, &partial, learner, decoder, max_iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perceptron::{perceptron_train, PerceptronLearner};
    use crate::synthetic::make_synthetic_task;

    fn bio_instances(count: usize, noise: f64, seed: u64) -> (Vec<Instance>, Vec<Labeling>) {
        let f = StructureFamily::bio(6, 1).unwrap();
        let task = make_synthetic_task(&f, count, noise, seed).unwrap();
        let xs = task
            .pool
            .structures()
            .iter()
            .map(|s| Instance::new(s.family, task.extractor.extract(s).unwrap()).unwrap())
            .collect();
        let ys = task.pool.structures().iter().map(|s| s.truth.clone()).collect();
        (xs, ys)
    }

    fn learner() -> PerceptronLearner {
        PerceptronLearner { labels: 3, epochs: 3, seed: 5 }
    }

    #[test]
    fn empty_partial_set_is_supervised_training() {
        let (xs, ys) = bio_instances(10, 0.2, 1);
        let t: Vec<_> = xs.iter().zip(&ys).collect();
        let m = sspan_train(&t, &[], &learner(), &ConstrainedDecoder, 5).unwrap();
        assert_eq!(m, perceptron_train(&flatten(t.iter().copied()), 3, 3, 5).unwrap());
    }

    #[test]
    fn fully_revealed_partials_equal_training_on_the_union() {
        let (xs, ys) = bio_instances(12, 0.2, 2);
        let t: Vec<_> = xs[..6].iter().zip(&ys[..6]).collect();
        let fulls: Vec<PartialAnnotation> = ys[6..].iter().map(PartialAnnotation::full).collect();
        let p: Vec<_> = xs[6..].iter().zip(&fulls).collect();
        let mut passes = 0;
        let state =
            sspan_train_with(&t, &p, &learner(), &ConstrainedDecoder, 10, Execution::Sequential, &mut |_, c| {
                passes += 1;
                assert_eq!(c, &ys[6..]);
            })
            .unwrap();
        assert!(state.converged);
        assert_eq!(passes, 2);
        let union: Vec<_> = xs.iter().zip(&ys).collect();
        assert_eq!(state.model, perceptron_train(&flatten(union), 3, 3, 5).unwrap());
    }

    #[test]
    fn completions_honor_pins() {
        let (xs, ys) = bio_instances(20, 0.3, 3);
        let t: Vec<_> = xs[..5].iter().zip(&ys[..5]).collect();
        let partials: Vec<PartialAnnotation> = ys[5..].iter().map(|y| PartialAnnotation::reveal(y, &[0, 3])).collect();
        let p: Vec<_> = xs[5..].iter().zip(&partials).collect();
        let state = sspan_train_with(&t, &p, &learner(), &ConstrainedDecoder, 4, Execution::Parallel, &mut |_, cs| {
            for (c, (x, a)) in cs.iter().zip(&p) {
                assert!(is_valid(&x.family, c).unwrap());
                assert!(consistent(a, c).unwrap());
            }
        })
        .unwrap();
        assert!(state.iteration <= 4);
        assert_eq!(state.completed_pool.len(), 15);
    }

    #[test]
    fn codl_is_sspan_with_empty_partials() {
        let (xs, ys) = bio_instances(16, 0.3, 4);
        let t: Vec<_> = xs[..4].iter().zip(&ys[..4]).collect();
        let u: Vec<&Instance> = xs[4..].iter().collect();
        let a = codl_train(&t, &u, &learner(), &ConstrainedDecoder, 6).unwrap();
        let empties: Vec<_> = u.iter().map(|x| PartialAnnotation::empty(x.family.dim())).collect();
        let p: Vec<_> = u.iter().copied().zip(&empties).collect();
        let b = sspan_train(&t, &p, &learner(), &ConstrainedDecoder, 6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_errors() {
        let (xs, ys) = bio_instances(3, 0.1, 5);
        let empty = PartialAnnotation::empty(6);
        let p = vec![(&xs[0], &empty)];
        assert!(sspan_train(&[], &p, &learner(), &ConstrainedDecoder, 3).is_err());
        let t = vec![(&xs[1], &ys[1])];
        assert!(sspan_train(&t, &p, &learner(), &ConstrainedDecoder, 0).is_err());
    }

    struct Rogue;
    impl Decoder for Rogue {
        fn decode(&self, _: &LinearModel, input: &Instance, _: &PartialAnnotation) -> Result<Labeling> {
            // O followed by I everywhere
            Ok(Labeling((0..input.family.dim()).map(|i| if i % 2 == 0 { 2 } else { 1 }).collect()))
        }
    }

    #[test]
    fn invalid_decoder_output_fails_fast() {
        let (xs, ys) = bio_instances(3, 0.1, 6);
        let t = vec![(&xs[0], &ys[0])];
        let empty = PartialAnnotation::empty(6);
        let p = vec![(&xs[1], &empty)];
        let err = sspan_train(&t, &p, &learner(), &Rogue, 3).unwrap_err();
        assert!(err.is_contract_violation());
    }
}
