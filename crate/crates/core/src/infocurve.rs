//! Information curves `I_k = log2 |C(L^d)| - E[log2 f(a_k)]`, in bits.
//!
//! A Monte-Carlo trial draws a structure uniformly from the family, draws a
//! uniformly random reveal order over its variables, and reveals labels one
//! at a time. `I_k` is the mean over trials of `log2(|C| / f(a_k))`, and the
//! increments `I_k - I_{k-1}` are the means of the per-trial
//! `log2(f(a_{k-1}) / f(a_k))`. When a ratio of counts is an exact integer,
//! its logarithm is taken directly, so distribution-free families reproduce
//! their closed forms bit for bit.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::Zero;
use rand::seq::SliceRandom;

use crate::counting::{count_completions, linear_extensions_bitmask, log2_big, BITMASK_DP_MAX_ITEMS};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::derived_rng;
use crate::structure::{
    falling_factorial, pairs, sample_structure_with, total_count, PartialAnnotation, StructureFamily,
};

#[derive(Debug, Clone, PartialEq)]
pub struct InfoCurve {
    pub family: StructureFamily,
    /// `I_k` for `k = 0..=d`.
    pub info: Vec<f64>,
    /// Monte-Carlo standard error of each `I_k` (zero for closed forms).
    pub stderr: Vec<f64>,
    /// `I_k - I_{k-1}` for `k = 1..=d`.
    pub diffs: Vec<f64>,
    pub diff_stderr: Vec<f64>,
    /// Standard error of `diffs[k+1] - diffs[k]`, estimated from per-trial
    /// second differences.
    pub curvature_stderr: Vec<f64>,
    /// Number of trials; 0 marks a closed-form curve.
    pub trials: usize,
}

impl InfoCurve {
    pub fn dim(&self) -> usize {
        self.diffs.len()
    }

    /// Largest violation of "diffs non-increasing" measured in standard errors.
    /// Non-positive when the curve is concave everywhere.
    pub fn worst_concavity_violation(&self) -> f64 {
        self.diffs
            .windows(2)
            .zip(&self.curvature_stderr)
            .map(|(w, &se)| {
                let rise = w[1] - w[0];
                if se > 0.0 {
                    rise / se
                } else if rise > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `log2(num / den)`, exact through integer division when it divides.
fn log2_ratio(num: &BigUint, den: &BigUint) -> f64 {
    let (q, r) = num.div_rem(den);
    if r.is_zero() {
        log2_big(&q)
    } else {
        log2_big(num) - log2_big(den)
    }
}

/// Completion counts after each reveal: `counts[k]` for `k = 0..=d`.
fn reveal_counts(family: &StructureFamily, seed: u64, trial: usize) -> Result<Vec<BigUint>> {
    let mut rng = derived_rng(seed, &[trial as u64]);
    let truth = sample_structure_with(family, &mut rng);
    let d = family.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);

    if let StructureFamily::Chain { n } = *family {
        if n <= BITMASK_DP_MAX_ITEMS {
            let pair_list = pairs(n);
            let mut preds = vec![0u64; n];
            let mut counts = Vec::with_capacity(d + 1);
            counts.push(BigUint::from(linear_extensions_bitmask(&preds)));
            for &v in &order {
                let (i, j) = pair_list[v];
                if truth.0[v] == 0 {
                    preds[j] |= 1 << i;
                } else {
                    preds[i] |= 1 << j;
                }
                counts.push(BigUint::from(linear_extensions_bitmask(&preds)));
            }
            return Ok(counts);
        }
    }

    let mut partial = PartialAnnotation::empty(d);
    let mut counts = Vec::with_capacity(d + 1);
    counts.push(count_completions(family, &partial)?);
    for &v in &order {
        partial.set(v, Some(truth.0[v]));
        counts.push(count_completions(family, &partial)?);
    }
    Ok(counts)
}

/// Mean and standard error of each column, with every column shifted by its
/// first row so identical samples average exactly.
fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut mean = Vec::with_capacity(width);
    let mut se = Vec::with_capacity(width);
    for c in 0..width {
        let shift = rows[0][c];
        let (mut s, mut ss) = (0.0, 0.0);
        for row in rows {
            let dv = row[c] - shift;
            s += dv;
            ss += dv * dv;
        }
        let nf = n as f64;
        mean.push(shift + s / nf);
        if n > 1 {
            let var = ((ss - s * s / nf) / (nf - 1.0)).max(0.0);
            se.push((var / nf).sqrt());
        } else {
            se.push(0.0);
        }
    }
    (mean, se)
}

pub fn estimate_curve(family: &StructureFamily, trials: usize, seed: u64) -> Result<InfoCurve> {
    estimate_curve_with(family, trials, seed, Execution::default())
}

/// Monte-Carlo estimate of the information curve. The result depends only on
/// `(family, trials, seed)`, not on `exec`.
pub fn estimate_curve_with(family: &StructureFamily, trials: usize, seed: u64, exec: Execution) -> Result<InfoCurve> {
    family.validate()?;
    if trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    let total = total_count(family)?;
    let per_trial = exec.map_indexed(trials, |t| -> Result<(Vec<f64>, Vec<f64>)> {
        let counts = reveal_counts(family, seed, t)?;
        let info = counts.iter().map(|f| log2_ratio(&total, f)).collect();
        let incs = counts.windows(2).map(|w| log2_ratio(&w[0], &w[1])).collect();
        Ok((info, incs))
    });
    let mut info_rows = Vec::with_capacity(trials);
    let mut inc_rows = Vec::with_capacity(trials);
    for r in per_trial {
        let (i, d) = r?;
        info_rows.push(i);
        inc_rows.push(d);
    }
    let curvature_rows: Vec<Vec<f64>> =
        inc_rows.iter().map(|row| row.windows(2).map(|w| w[1] - w[0]).collect()).collect();
    let (info, stderr) = column_stats(&info_rows);
    let (diffs, diff_stderr) = column_stats(&inc_rows);
    let (_, curvature_stderr) = column_stats(&curvature_rows);
    Ok(InfoCurve { family: *family, info, stderr, diffs, diff_stderr, curvature_stderr, trials })
}

/// Exact curve for the families whose `f(a_k)` does not depend on which
/// variables were revealed or on their values.
pub fn closed_form_curve(family: &StructureFamily) -> Result<InfoCurve> {
    family.validate()?;
    let d = family.dim();
    let (info, diffs): (Vec<f64>, Vec<f64>) = match *family {
        StructureFamily::Assignment { tasks, .. } => (
            (0..=d).map(|k| log2_big(&falling_factorial(tasks, k))).collect(),
            (1..=d).map(|k| log2_big(&BigUint::from(tasks - k + 1))).collect(),
        ),
        StructureFamily::Unconstrained { labels, .. } => (
            (0..=d).map(|k| log2_big(&BigUint::from(labels).pow(k as u32))).collect(),
            vec![log2_big(&BigUint::from(labels)); d],
        ),
        StructureFamily::UniformLabel { labels, .. } => {
            let step = log2_big(&BigUint::from(labels));
            (
                (0..=d).map(|k| if k == 0 { 0.0 } else { step }).collect(),
                (1..=d).map(|k| if k == 1 { step } else { 0.0 }).collect(),
            )
        }
        StructureFamily::Chain { .. } | StructureFamily::Bio { .. } => {
            return Err(Error::UnsupportedFamily(format!("{family} has no closed-form information curve")))
        }
    };
    Ok(InfoCurve {
        family: *family,
        info,
        stderr: vec![0.0; d + 1],
        diffs,
        diff_stderr: vec![0.0; d],
        curvature_stderr: vec![0.0; d.saturating_sub(1)],
        trials: 0,
    })
}

/// Least-squares slope of the increments `I_k - I_{k-1}` against the
/// annotated fraction `k/d`, `k = 1..=d`. More negative means a stronger
/// structure; a flat curve gives exactly zero.
pub fn strength_slope(curve: &InfoCurve) -> Result<f64> {
    let d = curve.dim();
    if d < 2 {
        return Err(Error::input("strength slope needs at least two variables"));
    }
    let xs: Vec<f64> = (1..=d).map(|k| k as f64 / d as f64).collect();
    let x_mean = xs.iter().sum::<f64>() / d as f64;
    // Centering y on its first value is exact for constant series.
    let y0 = curve.diffs[0];
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&curve.diffs) {
        let dx = x - x_mean;
        sxy += dx * (y - y0);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}
