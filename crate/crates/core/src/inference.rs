//! Exact constrained decoders.
//!
//! Every decoder maximizes the sum of local scores over the valid set of its
//! family, with annotated variables pinned to their labels. Among optimal
//! labelings (up to [`TIE_EPS`]) the lexicographically smallest one is
//! returned; for chains, the lexicographically smallest item order.

use crate::counting::chain_edges;
use crate::error::{Error, Result};
use crate::structure::{pair_index, BioTag, Labeling, PartialAnnotation, StructureFamily};

/// Relative tolerance under which two total scores are considered tied.
pub const TIE_EPS: f64 = 1e-9;

/// Largest chain decoded exactly.
pub const CHAIN_EXACT_MAX_ITEMS: usize = 12;

#[inline]
fn ties(a: f64, b: f64) -> bool {
    a >= b - TIE_EPS * (1.0 + b.abs())
}

/// Row-major `d x |L|` score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalScores {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LocalScores {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!("score matrix needs {} entries, got {}", rows * cols, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("score matrix has non-finite entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::input("ragged score rows"));
        }
        let n = rows.len();
        Self::new(n, cols, rows.into_iter().flatten().collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, var: usize, label: usize) -> f64 {
        self.data[var * self.cols + label]
    }

    pub fn row(&self, var: usize) -> &[f64] {
        &self.data[var * self.cols..(var + 1) * self.cols]
    }

    /// Sum of the scores of `y`.
    pub fn total(&self, y: &Labeling) -> f64 {
        y.0.iter().enumerate().map(|(i, &l)| self.get(i, l)).sum()
    }
}

fn check_dims(scores: &LocalScores, partial: &PartialAnnotation, family: &StructureFamily) -> Result<()> {
    partial.check_against(family)?;
    if scores.rows() != family.dim() || scores.cols() != family.label_count() {
        return Err(Error::input(format!(
            "scores are {}x{}, {family} needs {}x{}",
            scores.rows(),
            scores.cols(),
            family.dim(),
            family.label_count()
        )));
    }
    Ok(())
}

/// Decodes any family; the single entry point used during training.
pub fn decode(family: &StructureFamily, scores: &LocalScores, partial: &PartialAnnotation) -> Result<Labeling> {
    match *family {
        StructureFamily::Bio { types, .. } => decode_bio(scores, partial, types),
        StructureFamily::Assignment { .. } => {
            check_dims(scores, partial, family)?;
            decode_assignment(scores, partial)
        }
        StructureFamily::Chain { n } => decode_chain(scores, partial, n).map(|c| c.labeling),
        StructureFamily::Unconstrained { .. } => {
            check_dims(scores, partial, family)?;
            Ok(Labeling(
                (0..scores.rows()).map(|i| partial.get(i).unwrap_or_else(|| argmax_first(scores.row(i)))).collect(),
            ))
        }
        StructureFamily::UniformLabel { len, labels } => {
            check_dims(scores, partial, family)?;
            let mut pinned = partial.values().iter().flatten();
            let candidates: Vec<usize> = match pinned.next() {
                Some(&l) if pinned.all(|&o| o == l) => vec![l],
                Some(_) => return Err(Error::Infeasible("conflicting uniform-label pins".into())),
                None => (0..labels).collect(),
            };
            let totals: Vec<f64> =
                (0..labels)
                    .map(|l| {
                        if candidates.contains(&l) {
                            (0..len).map(|i| scores.get(i, l)).sum()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
            Ok(Labeling(vec![argmax_first(&totals); len]))
        }
    }
}

/// Index of the first maximum, with [`TIE_EPS`] tolerance.
fn argmax_first(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|&v| ties(v, best)).unwrap_or(0)
}

/// Constrained Viterbi over BIO sequences.
pub fn decode_bio(scores: &LocalScores, partial: &PartialAnnotation, types: usize) -> Result<Labeling> {
    let family = StructureFamily::bio(partial.len().max(1), types)?;
    if partial.is_empty() {
        return Err(Error::input("empty sequence"));
    }
    check_dims(scores, partial, &family)?;
    let d = partial.len();
    let labels = 2 * types + 1;
    let tags: Vec<BioTag> = (0..labels).map(|l| BioTag::from_index(l, types)).collect();
    let allowed = |pos: usize, l: usize| partial.get(pos).is_none_or(|p| p == l);

    // best[pos][prev]: best score of positions pos.. given label `prev` at pos-1.
    let mut best = vec![vec![f64::NEG_INFINITY; labels]; d + 1];
    best[d].fill(0.0);
    for pos in (0..d).rev() {
        for prev in 0..labels {
            let mut m = f64::NEG_INFINITY;
            for l in 0..labels {
                if allowed(pos, l) && BioTag::may_follow(Some(tags[prev]), tags[l]) {
                    m = m.max(scores.get(pos, l) + best[pos + 1][l]);
                }
            }
            best[pos][prev] = m;
        }
    }
    let start = BioTag::Outside.index(types);
    if best[0][start] == f64::NEG_INFINITY {
        return Err(Error::Infeasible("pinned labels admit no valid BIO sequence".into()));
    }

    let mut out = Vec::with_capacity(d);
    let mut prev = start;
    for pos in 0..d {
        let target = best[pos][prev];
        let pick = (0..labels)
            .find(|&l| {
                allowed(pos, l)
                    && BioTag::may_follow(Some(tags[prev]), tags[l])
                    && best[pos + 1][l] > f64::NEG_INFINITY
                    && ties(scores.get(pos, l) + best[pos + 1][l], target)
            })
            .ok_or_else(|| Error::ContractViolation("viterbi backtrace lost the optimum".into()))?;
        out.push(pick);
        prev = pick;
    }
    Ok(Labeling(out))
}

/// Maximum-weight assignment of every row to a distinct column
/// (rows <= columns), by the Hungarian method with potentials.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = weights.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let m = weights[0].len();
    assert!(n <= m, "more rows than columns");
    // 1-indexed arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=m {
                if used[col] {
                    continue;
                }
                let cur = -weights[r0 - 1][col - 1] - u[r0] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=m {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=m {
        if owner[col] != 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| weights[r][c]).sum();
    (total, assignment)
}

/// Best total over `free_agents` x `free_tasks`.
fn reduced_optimum(scores: &LocalScores, free_agents: &[usize], free_tasks: &[usize]) -> f64 {
    let w: Vec<Vec<f64>> =
        free_agents.iter().map(|&a| free_tasks.iter().map(|&t| scores.get(a, t)).collect()).collect();
    max_weight_assignment(&w).0
}

/// Maximum-score assignment of agents (rows) to distinct tasks (columns)
/// with pinned agents fixed.
pub fn decode_assignment(scores: &LocalScores, partial: &PartialAnnotation) -> Result<Labeling> {
    let (agents, tasks) = (scores.rows(), scores.cols());
    if partial.len() != agents {
        return Err(Error::input("partial annotation length differs from agent count"));
    }
    if agents > tasks {
        return Err(Error::input(format!("{agents} agents cannot fill {tasks} tasks")));
    }
    let mut taken = vec![false; tasks];
    for &t in partial.values().iter().flatten() {
        if t >= tasks {
            return Err(Error::input(format!("task {t} out of range")));
        }
        if std::mem::replace(&mut taken[t], true) {
            return Err(Error::Infeasible(format!("task {t} pinned to two agents")));
        }
    }
    let mut out: Vec<usize> = partial.values().iter().map(|v| v.unwrap_or(usize::MAX)).collect();
    let mut free_agents: Vec<usize> = (0..agents).filter(|&a| partial.get(a).is_none()).collect();
    let mut free_tasks: Vec<usize> = (0..tasks).filter(|&t| !taken[t]).collect();

    // Fix free agents in index order, each to the smallest task that keeps
    // the remaining optimum.
    let mut target = reduced_optimum(scores, &free_agents, &free_tasks);
    while !free_agents.is_empty() {
        let agent = free_agents.remove(0);
        let mut chosen = None;
        for (pos, &task) in free_tasks.iter().enumerate() {
            let mut rest_tasks = free_tasks.clone();
            rest_tasks.remove(pos);
            let rest = reduced_optimum(scores, &free_agents, &rest_tasks);
            let value = scores.get(agent, task) + rest;
            if ties(value, target) {
                chosen = Some((pos, rest));
                break;
            }
        }
        let (pos, rest) =
            chosen.ok_or_else(|| Error::ContractViolation("assignment tie-break lost the optimum".into()))?;
        out[agent] = free_tasks.remove(pos);
        target = rest;
    }
    Ok(Labeling(out))
}

/// Result of chain decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDecode {
    pub labeling: Labeling,
    /// Items in decoded order.
    pub order: Vec<usize>,
    /// False when the greedy fallback for large chains was used.
    pub exact: bool,
}

/// Score gained by placing item `i` anywhere before item `j`.
fn before_score(scores: &LocalScores, n: usize, i: usize, j: usize) -> f64 {
    if i < j {
        scores.get(pair_index(n, i, j), 0)
    } else {
        scores.get(pair_index(n, j, i), 1)
    }
}

/// Highest-scoring total order of `n` items under pinned comparisons.
pub fn decode_chain(scores: &LocalScores, partial: &PartialAnnotation, n: usize) -> Result<ChainDecode> {
    let family = StructureFamily::chain(n)?;
    check_dims(scores, partial, &family)?;
    let edges = chain_edges(n, partial);
    let order =
        if n <= CHAIN_EXACT_MAX_ITEMS { chain_exact(scores, n, &edges)? } else { chain_greedy(scores, n, &edges)? };
    Ok(ChainDecode { labeling: Labeling::from_order(&order), order, exact: n <= CHAIN_EXACT_MAX_ITEMS })
}

fn chain_exact(scores: &LocalScores, n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut preds = vec![0usize; n];
    for &(a, b) in edges {
        preds[b] |= 1 << a;
    }
    let before: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { before_score(scores, n, i, j) }).collect()).collect();
    let gain = |set: usize, j: usize| -> f64 { (0..n).filter(|&i| set >> i & 1 == 1).map(|i| before[i][j]).sum() };
    let full = (1usize << n) - 1;
    // best[S]: best score for ordering the complement of S after prefix S.
    let mut best = vec![f64::NEG_INFINITY; full + 1];
    best[full] = 0.0;
    for set in (0..full).rev() {
        let mut m = f64::NEG_INFINITY;
        for j in 0..n {
            if set >> j & 1 == 0 && preds[j] & set == preds[j] {
                let next = best[set | 1 << j];
                if next > f64::NEG_INFINITY {
                    m = m.max(gain(set, j) + next);
                }
            }
        }
        best[set] = m;
    }
    if best[0] == f64::NEG_INFINITY {
        return Err(Error::Infeasible("pinned comparisons contain a cycle".into()));
    }
    let mut set = 0usize;
    let mut order = Vec::with_capacity(n);
    while set != full {
        let target = best[set];
        let j = (0..n)
            .find(|&j| {
                set >> j & 1 == 0
                    && preds[j] & set == preds[j]
                    && best[set | 1 << j] > f64::NEG_INFINITY
                    && ties(gain(set, j) + best[set | 1 << j], target)
            })
            .ok_or_else(|| Error::ContractViolation("chain backtrace lost the optimum".into()))?;
        order.push(j);
        set |= 1 << j;
    }
    Ok(order)
}

/// Inserts items 0..n one at a time at the best slot allowed by the
/// transitive closure of the pins. Not guaranteed optimal.
#[allow(clippy::needless_range_loop)]
fn chain_greedy(scores: &LocalScores, n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    if (0..n).any(|i| reach[i][i]) {
        return Err(Error::Infeasible("pinned comparisons contain a cycle".into()));
    }
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for x in 0..n {
        let lo = order.iter().rposition(|&p| reach[p][x]).map_or(0, |p| p + 1);
        let hi = order.iter().position(|&s| reach[x][s]).unwrap_or(order.len());
        let mut best_slot = lo;
        let mut best_val = f64::NEG_INFINITY;
        for slot in lo..=hi {
            let val: f64 = order[..slot].iter().map(|&p| before_score(scores, n, p, x)).sum::<f64>()
                + order[slot..].iter().map(|&s| before_score(scores, n, x, s)).sum::<f64>();
            if val > best_val + TIE_EPS * (1.0 + best_val.abs()) {
                best_val = val;
                best_slot = slot;
            }
        }
        order.insert(best_slot, x);
    }
    Ok(order)
}
