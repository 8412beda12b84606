//! Transport distances between normalized bags of words.
//!
//! Word-pair ground cost is `1 - max(0, cos)`, so every cost, and therefore
//! every distance, lies in `[0, 1]`. Similarity is reported as `1 - distance`.
//!
//! The relaxed distance lets every word ship all of its mass to its cheapest
//! counterpart, which drops one marginal constraint of the exact problem and
//! makes it a lower bound on it. [`lc_rwmd_batch`] evaluates one query against
//! many candidates by scanning the union vocabulary of the candidates once
//! against the query words, so the per-candidate work is linear in its size.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EmbeddingTable;
use crate::textprep::{NBow, TextError};

/// Largest vocabulary (per side) accepted by the exact solver.
pub const EXACT_LIMIT: usize = 64;

/// Number of union-vocabulary words scanned per parallel block.
const SCAN_BLOCK: usize = 256;

/// Reduced costs above `-PIVOT_TOL` are treated as optimal.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("cost matrix is {rows}x{cols} but weights have length {len}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("exact transport limited to {EXACT_LIMIT} words per side, got {0}x{1}")]
    TooLarge(usize, usize),
    #[error("variant {0} is not a relaxed distance")]
    UnsupportedVariant(Variant),
    #[error("bag of words was built against a different embedding table")]
    ForeignDocument,
    #[error("transport simplex did not converge after {0} pivots")]
    NoConvergence(usize),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Query words ship to the candidate: `l(query -> candidate)`.
    OneSidedQuery,
    /// Candidate words ship to the query: `l(candidate -> query)`.
    OneSidedCandidate,
    /// `max` of the two one-sided relaxations.
    SymmetricMax,
    Exact,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::OneSidedQuery => "one-sided-query",
            Variant::OneSidedCandidate => "one-sided-candidate",
            Variant::SymmetricMax => "symmetric-max",
            Variant::Exact => "exact",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one-sided-query" => Ok(Variant::OneSidedQuery),
            "one-sided-candidate" => Ok(Variant::OneSidedCandidate),
            "symmetric-max" => Ok(Variant::SymmetricMax),
            "exact" => Ok(Variant::Exact),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub distance: f64,
    pub similarity: f64,
    pub variant: Variant,
}

impl DistanceResult {
    fn new(distance: f64, variant: Variant) -> Self {
        let distance = distance.clamp(0.0, 1.0);
        DistanceResult {
            distance,
            similarity: 1.0 - distance,
            variant,
        }
    }
}

/// Word-pair transport costs, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundCost(Array2<f64>);

impl GroundCost {
    /// Wraps a precomputed cost matrix, clamping entries into `[0, 1]`.
    pub fn from_costs(mut costs: Array2<f64>) -> Self {
        costs.mapv_inplace(|c| c.clamp(0.0, 1.0));
        GroundCost(costs)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }
}

#[inline]
fn cost_of(similarity: f64) -> f64 {
    1.0 - similarity.max(0.0)
}

pub fn ground_cost(similarity: &Array2<f64>) -> GroundCost {
    GroundCost(similarity.mapv(cost_of))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Source weights index the cost rows.
    SourceRows,
    /// Source weights index the cost columns.
    SourceColumns,
}

/// `sum_i w_i * min_j c[i][j]`, each source word moving all its mass to its cheapest target.
pub fn relaxed_one_sided(
    weights: &[f64],
    cost: &GroundCost,
    direction: Direction,
) -> Result<f64, TransportError> {
    let c = &cost.0;
    let (sources, mismatch) = match direction {
        Direction::SourceRows => (c.nrows(), weights.len() != c.nrows()),
        Direction::SourceColumns => (c.ncols(), weights.len() != c.ncols()),
    };
    if mismatch || c.is_empty() {
        return Err(TransportError::DimensionMismatch {
            rows: c.nrows(),
            cols: c.ncols(),
            len: weights.len(),
        });
    }
    let mut total = 0.0;
    for (s, &w) in weights.iter().enumerate().take(sources) {
        let line = match direction {
            Direction::SourceRows => c.row(s),
            Direction::SourceColumns => c.column(s),
        };
        total += w * strict_min(line.iter().copied());
    }
    Ok(total)
}

/// Minimum with strict comparison; the first minimal element wins.
fn strict_min(values: impl Iterator<Item = f64>) -> f64 {
    let mut best = f64::INFINITY;
    for v in values {
        if v < best {
            best = v;
        }
    }
    best
}

fn check_membership(doc: &NBow, table: &EmbeddingTable) -> Result<(), TransportError> {
    let ok = doc
        .rows()
        .iter()
        .zip(doc.words())
        .all(|(&r, w)| r < table.len() && table.word(r) == w);
    if ok && !doc.is_empty() {
        Ok(())
    } else {
        Err(TransportError::ForeignDocument)
    }
}

fn pair_cost(a: &NBow, b: &NBow, table: &EmbeddingTable) -> Result<GroundCost, TransportError> {
    check_membership(a, table)?;
    check_membership(b, table)?;
    Ok(ground_cost(
        &table.similarity_matrix_rows(a.rows(), b.rows()),
    ))
}

/// Relaxed distance between two documents, `a` playing the query role.
pub fn rwmd_distance(
    a: &NBow,
    b: &NBow,
    table: &EmbeddingTable,
    variant: Variant,
) -> Result<DistanceResult, TransportError> {
    let cost = pair_cost(a, b, table)?;
    let d = match variant {
        Variant::OneSidedQuery => relaxed_one_sided(a.weights(), &cost, Direction::SourceRows)?,
        Variant::OneSidedCandidate => {
            relaxed_one_sided(b.weights(), &cost, Direction::SourceColumns)?
        }
        Variant::SymmetricMax => {
            let ab = relaxed_one_sided(a.weights(), &cost, Direction::SourceRows)?;
            let ba = relaxed_one_sided(b.weights(), &cost, Direction::SourceColumns)?;
            ab.max(ba)
        }
        Variant::Exact => return Err(TransportError::UnsupportedVariant(variant)),
    };
    Ok(DistanceResult::new(d, variant))
}

/// Symmetric relaxed similarity, `1 - rwmd_distance`.
pub fn rwmd_similarity(a: &NBow, b: &NBow, table: &EmbeddingTable) -> Result<f64, TransportError> {
    rwmd_distance(a, b, table, Variant::SymmetricMax).map(|r| r.similarity)
}

/// Nonnegative flow matrix with the two documents' weights as marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan(Array2<f64>);

impl TransportPlan {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn cost(&self, cost: &GroundCost) -> f64 {
        self.0.iter().zip(cost.0.iter()).map(|(t, c)| t * c).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.0.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.0.columns().into_iter().map(|c| c.sum()).collect()
    }
}

/// Exact word mover's distance with its optimal plan.
pub fn wmd_exact(
    a: &NBow,
    b: &NBow,
    table: &EmbeddingTable,
) -> Result<(DistanceResult, TransportPlan), TransportError> {
    if a.len() > EXACT_LIMIT || b.len() > EXACT_LIMIT {
        return Err(TransportError::TooLarge(a.len(), b.len()));
    }
    let cost = pair_cost(a, b, table)?;
    let plan = optimal_plan(a.weights(), b.weights(), &cost)?;
    let d = plan.cost(&cost);
    Ok((DistanceResult::new(d, Variant::Exact), plan))
}

/// Solves the balanced transportation problem by the transportation simplex
/// (northwest-corner start, potentials, cycle pivots on the basis tree).
pub fn optimal_plan(
    supply: &[f64],
    demand: &[f64],
    cost: &GroundCost,
) -> Result<TransportPlan, TransportError> {
    let (m, n) = (supply.len(), demand.len());
    if m != cost.rows() || n != cost.cols() || m == 0 || n == 0 {
        return Err(TransportError::DimensionMismatch {
            rows: cost.rows(),
            cols: cost.cols(),
            len: if m != cost.rows() { m } else { n },
        });
    }
    if m > EXACT_LIMIT || n > EXACT_LIMIT {
        return Err(TransportError::TooLarge(m, n));
    }
    Simplex::new(supply, demand, cost.matrix()).solve()
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a Array2<f64>,
    flow: Array2<f64>,
    basic: Vec<(usize, usize)>,
    is_basic: Array2<bool>,
}

impl<'a> Simplex<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a Array2<f64>) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let total_supply: f64 = supply.iter().sum();
        let total_demand: f64 = demand.iter().sum();
        let mut a = supply.to_vec();
        let mut b: Vec<f64> = demand
            .iter()
            .map(|d| d * total_supply / total_demand)
            .collect();

        let mut flow = Array2::zeros((m, n));
        let mut is_basic = Array2::from_elem((m, n), false);
        let mut basic = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let q = a[i].min(b[j]);
            flow[[i, j]] = q;
            is_basic[[i, j]] = true;
            basic.push((i, j));
            a[i] -= q;
            b[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Simplex {
            m,
            n,
            cost,
            flow,
            basic,
            is_basic,
        }
    }

    /// Node ids: rows are `0..m`, columns `m..m+n`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.basic.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let mut pot = vec![f64::NAN; self.m + self.n];
        let mut stack = vec![0];
        pot[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &(next, k) in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j) = self.basic[k];
                    pot[next] = self.cost[[i, j]] - pot[node];
                    stack.push(next);
                }
            }
        }
        let v = pot.split_off(self.m);
        (pot, v)
    }

    /// Basis cells on the tree path from column `j` to row `i`.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let start = self.m + j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            for &(next, k) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = i;
        while node != start {
            let (prev, k) = parent[node].expect("basis is a spanning tree");
            cells.push(k);
            node = prev;
        }
        cells.reverse();
        cells
    }

    #[allow(clippy::needless_range_loop)]
    fn entering(&self, u: &[f64], v: &[f64], bland: bool) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for i in 0..self.m {
            for j in 0..self.n {
                if self.is_basic[[i, j]] {
                    continue;
                }
                let reduced = self.cost[[i, j]] - u[i] - v[j];
                if reduced < -PIVOT_TOL {
                    if bland {
                        return Some((i, j));
                    }
                    if best.is_none_or(|(_, r)| reduced < r) {
                        best = Some(((i, j), reduced));
                    }
                }
            }
        }
        best.map(|(cell, _)| cell)
    }

    fn solve(mut self) -> Result<TransportPlan, TransportError> {
        let size = self.m + self.n;
        let max_pivots = 50 * size * size;
        let mut degenerate_run = 0;
        for _ in 0..max_pivots {
            let adj = self.adjacency();
            let (u, v) = self.potentials(&adj);
            let bland = degenerate_run > 4 * size;
            let Some((i, j)) = self.entering(&u, &v, bland) else {
                return Ok(TransportPlan(self.flow));
            };
            let cycle = self.path(&adj, i, j);
            // cells at even positions of the path lose flow
            let mut leave = cycle[0];
            let mut theta = f64::INFINITY;
            for &k in cycle.iter().step_by(2) {
                let (r, c) = self.basic[k];
                let x = self.flow[[r, c]];
                if x < theta || (bland && x == theta && self.basic[k] < self.basic[leave]) {
                    theta = x;
                    leave = k;
                }
            }
            for (pos, &k) in cycle.iter().enumerate() {
                let (r, c) = self.basic[k];
                if pos % 2 == 0 {
                    self.flow[[r, c]] -= theta;
                } else {
                    self.flow[[r, c]] += theta;
                }
            }
            let (lr, lc) = self.basic[leave];
            self.flow[[lr, lc]] = 0.0;
            self.is_basic[[lr, lc]] = false;
            self.flow[[i, j]] = theta;
            self.is_basic[[i, j]] = true;
            self.basic[leave] = (i, j);
            degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
        }
        Err(TransportError::NoConvergence(max_pivots))
    }
}

/// Scores every candidate against the query with one scan of the candidates'
/// union vocabulary. Failures are reported per entry.
pub fn lc_rwmd_batch(
    query: &NBow,
    candidates: &[NBow],
    table: &EmbeddingTable,
    variant: Variant,
) -> Result<Vec<Result<DistanceResult, TransportError>>, TransportError> {
    if variant == Variant::Exact {
        return Err(TransportError::UnsupportedVariant(variant));
    }
    check_membership(query, table)?;
    let valid: Vec<bool> = candidates
        .iter()
        .map(|c| check_membership(c, table).is_ok())
        .collect();

    let mut slot_of: HashMap<usize, usize> = HashMap::new();
    let mut union_rows = Vec::new();
    for (c, _) in candidates.iter().zip(&valid).filter(|(_, &ok)| ok) {
        for &r in c.rows() {
            slot_of.entry(r).or_insert_with(|| {
                union_rows.push(r);
                union_rows.len() - 1
            });
        }
    }

    // costs[slot * q + i]: cost between union word `slot` and query word `i`
    let q = query.len();
    let mut costs = vec![0.0; union_rows.len() * q];
    let mut nearest = vec![0.0; union_rows.len()];
    costs
        .par_chunks_mut(SCAN_BLOCK * q)
        .zip(nearest.par_chunks_mut(SCAN_BLOCK))
        .enumerate()
        .for_each(|(block, (cost_block, near_block))| {
            for (k, (line, near)) in cost_block
                .chunks_mut(q)
                .zip(near_block.iter_mut())
                .enumerate()
            {
                let row = union_rows[block * SCAN_BLOCK + k];
                for (i, c) in line.iter_mut().enumerate() {
                    *c = cost_of(table.cosine_rows(query.rows()[i], row));
                }
                *near = strict_min(line.iter().copied());
            }
        });

    let results = candidates
        .par_iter()
        .zip(valid.par_iter())
        .map(|(cand, &ok)| {
            if !ok {
                return Err(TransportError::ForeignDocument);
            }
            let slots: Vec<usize> = cand.rows().iter().map(|r| slot_of[r]).collect();
            let query_to_cand = || -> f64 {
                query
                    .weights()
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| w * strict_min(slots.iter().map(|&s| costs[s * q + i])))
                    .sum()
            };
            let cand_to_query = || -> f64 {
                cand.weights()
                    .iter()
                    .zip(&slots)
                    .map(|(&w, &s)| w * nearest[s])
                    .sum()
            };
            let d = match variant {
                Variant::OneSidedQuery => query_to_cand(),
                Variant::OneSidedCandidate => cand_to_query(),
                _ => query_to_cand().max(cand_to_query()),
            };
            Ok(DistanceResult::new(d, variant))
        })
        .collect();
    Ok(results)
}

/// A document to be scored; documents that failed preprocessing are skipped.
#[derive(Debug)]
pub struct Candidate {
    pub id: String,
    pub nbow: Result<NBow, TextError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub id: String,
    pub similarity: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ranking {
    pub entries: Vec<RankedDoc>,
    pub skipped: Vec<Skipped>,
}

/// Orders ids numerically when both parse as integers, otherwise lexically.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Candidates sorted by similarity, highest first; ties by ascending id.
pub fn rank_against_query(
    query: &NBow,
    candidates: Vec<Candidate>,
    table: &EmbeddingTable,
    variant: Variant,
) -> Result<Ranking, TransportError> {
    let mut ranking = Ranking::default();
    let mut ids = Vec::new();
    let mut docs = Vec::new();
    for c in candidates {
        match c.nbow {
            Ok(n) => {
                ids.push(c.id);
                docs.push(n);
            }
            Err(e) => ranking.skipped.push(Skipped {
                id: c.id,
                reason: e.to_string(),
            }),
        }
    }
    let scores = lc_rwmd_batch(query, &docs, table, variant)?;
    for (id, score) in ids.into_iter().zip(scores) {
        match score {
            Ok(r) => ranking.entries.push(RankedDoc {
                id,
                similarity: r.similarity,
                distance: r.distance,
            }),
            Err(e) => ranking.skipped.push(Skipped {
                id,
                reason: e.to_string(),
            }),
        }
    }
    ranking.entries.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| compare_ids(&a.id, &b.id))
    });
    Ok(ranking)
}
