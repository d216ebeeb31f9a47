//! F1 scores, the Wilcoxon rank-sum test and Savitzky-Golay smoothing.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::structure::{is_valid, BioTag, Labeling, StructureFamily};

/// Combined sample size up to which the rank-sum p-value is exact.
pub const WILCOXON_EXACT_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Result {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl F1Result {
    pub fn from_counts(true_positives: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, gold);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1, true_positives, predicted, gold }
    }
}

fn check_aligned(predicted: &[Labeling], gold: &[Labeling]) -> Result<()> {
    if predicted.len() != gold.len() {
        return Err(Error::input(format!("{} predictions for {} gold structures", predicted.len(), gold.len())));
    }
    if let Some(i) = predicted.iter().zip(gold).position(|(p, g)| p.len() != g.len()) {
        return Err(Error::input(format!("structure {i}: prediction and gold lengths differ")));
    }
    Ok(())
}

/// Micro-averaged F1 over individual variable labels. Variables labeled
/// `negative` do not count as predictions or gold items.
pub fn micro_f1(predicted: &[Labeling], gold: &[Labeling], negative: Option<usize>) -> Result<F1Result> {
    check_aligned(predicted, gold)?;
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (p, g) in predicted.iter().zip(gold) {
        for (&pl, &gl) in p.0.iter().zip(&g.0) {
            let p_pos = Some(pl) != negative;
            let g_pos = Some(gl) != negative;
            np += usize::from(p_pos);
            ng += usize::from(g_pos);
            tp += usize::from(p_pos && g_pos && pl == gl);
        }
    }
    Ok(F1Result::from_counts(tp, np, ng))
}

/// Maximal chunks `(type, start, end)` (inclusive end) of a valid BIO labeling.
pub fn chunks(y: &Labeling, types: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    for (pos, &l) in y.0.iter().enumerate() {
        match BioTag::from_index(l, types) {
            BioTag::Begin(j) => {
                if let Some((t, s)) = open.take() {
                    out.push((t, s, pos - 1));
                }
                open = Some((j, pos));
            }
            BioTag::Inside(_) => {}
            BioTag::Outside => {
                if let Some((t, s)) = open.take() {
                    out.push((t, s, pos - 1));
                }
            }
        }
    }
    if let Some((t, s)) = open {
        out.push((t, s, y.len() - 1));
    }
    out
}

/// Phrase-level F1: a predicted chunk counts only if type and span match.
pub fn chunk_f1(predicted: &[Labeling], gold: &[Labeling], types: usize) -> Result<F1Result> {
    check_aligned(predicted, gold)?;
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (p, g) in predicted.iter().zip(gold) {
        if p.is_empty() {
            continue;
        }
        let family = StructureFamily::bio(p.len(), types)?;
        if !is_valid(&family, p)? || !is_valid(&family, g)? {
            return Err(Error::input("chunk F1 needs valid BIO labelings"));
        }
        let pc = chunks(p, types);
        let gc = chunks(g, types);
        np += pc.len();
        ng += gc.len();
        tp += pc.iter().filter(|c| gc.contains(c)).count();
    }
    Ok(F1Result::from_counts(tp, np, ng))
}

/// Midranks of the pooled sample; also returns the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && pooled[idx[end]] == pooled[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("rank-sum test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::input("rank-sum test samples contain NaN"));
    }
    Ok(())
}

/// Two-sided Wilcoxon rank-sum p-value: exact up to
/// [`WILCOXON_EXACT_MAX`] combined observations, normal approximation
/// (tie- and continuity-corrected) beyond.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() + b.len() <= WILCOXON_EXACT_MAX {
        wilcoxon_exact(a, b)
    } else {
        wilcoxon_normal(a, b)
    }
}

/// Exact permutation p-value: the fraction of all `C(n, |a|)` splits of the
/// pooled midranks whose rank sum is at least as far from its mean.
pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    if n > 30 {
        return Err(Error::Capacity(format!("exact rank-sum enumeration over {n} observations")));
    }
    let (ranks, _) = midranks(&pooled);
    // Work in doubled ranks so every sum is an integer.
    let doubled: Vec<i64> = ranks.iter().map(|r| (r * 2.0).round() as i64).collect();
    let na = a.len();
    let observed: i64 = doubled[..na].iter().sum();
    let mean2 = (na * (n + 1)) as i64; // 2 * na (n + 1) / 2
    let target = (observed - mean2).abs();

    // counts[j][s]: subsets of size j with doubled rank sum s.
    let max_sum: i64 = doubled.iter().sum();
    let width = max_sum as usize + 1;
    let mut counts = vec![vec![0u64; width]; na + 1];
    counts[0][0] = 1;
    for &r in &doubled {
        for j in (1..=na).rev() {
            let (lower, upper) = counts.split_at_mut(j);
            let (src, dst) = (&lower[j - 1], &mut upper[0]);
            for s in (r as usize..width).rev() {
                dst[s] += src[s - r as usize];
            }
        }
    }
    let total: u64 = counts[na].iter().sum();
    let extreme: u64 =
        counts[na].iter().enumerate().filter(|(s, _)| (*s as i64 - mean2).abs() >= target).map(|(_, &c)| c).sum();
    Ok(extreme as f64 / total as f64)
}

/// Normal approximation with tie correction and continuity correction.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<f64> {
    check_samples(a, b)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let w: f64 = ranks[..a.len()].iter().sum();
    let mean = na * (n + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((2.0 * normal.sf(z)).min(1.0))
}

/// Savitzky-Golay smoothing: each output is the value at that point of the
/// least-squares polynomial of `degree` fitted to a `window`-point
/// neighbourhood. Near the ends the window is shifted inward so it stays
/// inside the series, and the polynomial is evaluated off-centre.
pub fn savitzky_golay(series: &[f64], window: usize, degree: usize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) {
        return Err(Error::input(format!("window {window} must be odd")));
    }
    if degree >= window {
        return Err(Error::input(format!("degree {degree} must be below window {window}")));
    }
    if window > series.len() {
        return Err(Error::input(format!("window {window} exceeds series length {}", series.len())));
    }
    let n = series.len();
    let half = window / 2;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let start = i.saturating_sub(half).min(n - window);
        // Abscissae relative to i, so the fitted value is the constant term.
        let design = DMatrix::from_fn(window, degree + 1, |r, c| ((start + r) as f64 - i as f64).powi(c as i32));
        let rhs = DVector::from_column_slice(&series[start..start + window]);
        let coef = design
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::input(format!("least-squares fit failed: {e}")))?;
        out.push(coef[0]);
    }
    Ok(out)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean (sample standard deviation / sqrt(n)).
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}
