//! Uniqueness of the clearing vector and the set of all clearing vectors.
//!
//! Every clearing vector agrees with the dominant vector `p*` on the nodes
//! the staged analysis pins down. The remaining "free" nodes have no assets,
//! receive nothing and owe nothing outside themselves; on them a clearing
//! vector is any `ξ` with `Bᵀξ = ξ`, `0 ≤ ξ ≤ p̄`, where `B` is the
//! (stochastic) block of relative liabilities among the free nodes.
//!
//! The module also carries an exhaustive oracle that finds every clearing
//! vector of a small network by enumerating default sets, independently of
//! `p*`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::Digraph;
use crate::model::{FinancialNetwork, EPS};

/// Largest network the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 10;

/// Rank and feasibility tolerance of the exhaustive oracle.
pub const ORACLE_TOL: f64 = 1e-8;

/// Residual every sampled clearing vector must meet.
pub const SAMPLE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SufficientTest {
    pub unique: bool,
    /// Asset holders and sinks.
    pub seeds: BTreeSet<usize>,
    /// Every node from which a seed can be reached.
    pub closure: BTreeSet<usize>,
}

/// Uniqueness holds when every node can reach an asset holder or a sink.
/// The closure's payments are pinned even when the test fails.
pub fn sufficient_uniqueness(net: &FinancialNetwork) -> SufficientTest {
    let g = Digraph::from_matrix(net.liabilities());
    let seeds: BTreeSet<usize> = net.asset_holders().union(&net.sinks()).copied().collect();
    let closure = g.reachable_to(&seeds);
    SufficientTest {
        unique: closure.len() == net.n(),
        seeds,
        closure,
    }
}

/// Uniqueness decided on the graph alone: every non-trivial sink component
/// must contain an asset holder or be reachable from one.
pub fn unique_by_sink_components(net: &FinancialNetwork) -> bool {
    let g = Digraph::from_matrix(net.liabilities());
    let scc = g.strongly_connected_components();
    let funded = g.reachable_from(&net.asset_holders());
    scc.components
        .iter()
        .enumerate()
        .filter(|&(c, _)| scc.is_sink[c] && !scc.is_trivial[c])
        .all(|(_, comp)| comp.iter().any(|v| funded.contains(v)))
}

/// One round of the staged analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub q: usize,
    /// Nodes not yet pinned when the stage starts.
    pub candidates: Vec<usize>,
    /// Positive payments into the candidates from the previous stage's
    /// closure, as `(node, amount)`. Empty at stage 0.
    pub inflow: Vec<(usize, f64)>,
    /// Stage 0: asset holders and sinks. Later: candidates with positive inflow.
    pub seeds: Vec<usize>,
    /// Candidates from which a seed is reachable; their payments are pinned.
    pub closure: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StageTrace {
    pub stages: Vec<Stage>,
}

/// All clearing vectors: `p*` on `fixed_nodes`, and on `free_nodes` any `ξ`
/// with `free_matrixᵀ ξ = ξ`, `0 ≤ ξ ≤ free_bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearingSet {
    pub p_star: DVector<f64>,
    pub fixed_nodes: BTreeSet<usize>,
    pub free_nodes: Vec<usize>,
    pub free_matrix: DMatrix<f64>,
    pub free_bounds: DVector<f64>,
    pub is_unique: bool,
}

impl ClearingSet {
    /// Assembles a full payment vector from a free-node block `xi`.
    pub fn compose(&self, xi: &DVector<f64>) -> DVector<f64> {
        assert_eq!(xi.len(), self.free_nodes.len());
        let mut p = self.p_star.clone();
        for (k, &i) in self.free_nodes.iter().enumerate() {
            p[i] = xi[k];
        }
        p
    }
}

/// Staged uniqueness analysis given the dominant clearing vector.
///
/// Stage 0 pins every node that can reach an asset holder or a sink. Each
/// later stage treats the payments flowing from the previous stage's pinned
/// nodes into the unpinned ones as outside assets, and pins every unpinned
/// node that can reach a recipient. The loop stops when nothing is left or
/// no payment flows in.
pub fn analyze_clearing_set(net: &FinancialNetwork, p_star: &DVector<f64>) -> (ClearingSet, StageTrace) {
    let n = net.n();
    assert_eq!(p_star.len(), n, "p_star has the wrong length");
    let rel = net.relative_liabilities();
    let g = Digraph::from_matrix(net.liabilities());

    let initial = sufficient_uniqueness(net);
    let mut pinned = vec![false; n];
    for &i in &initial.closure {
        pinned[i] = true;
    }
    let mut trace = StageTrace {
        stages: vec![Stage {
            q: 0,
            candidates: (0..n).collect(),
            inflow: Vec::new(),
            seeds: initial.seeds.iter().copied().collect(),
            closure: initial.closure.iter().copied().collect(),
        }],
    };
    let mut previous: Vec<usize> = initial.closure.into_iter().collect();

    for q in 1..=n {
        let candidates: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
        if candidates.is_empty() {
            break;
        }
        let inflow: Vec<(usize, f64)> = candidates
            .iter()
            .map(|&i| (i, previous.iter().map(|&k| rel.a[(k, i)] * p_star[k]).sum::<f64>()))
            .filter(|&(_, v)| v > EPS)
            .collect();
        let seeds: BTreeSet<usize> = inflow.iter().map(|&(i, _)| i).collect();
        let closure: Vec<usize> = if seeds.is_empty() {
            Vec::new()
        } else {
            let allowed: Vec<bool> = pinned.iter().map(|&p| !p).collect();
            g.reachable_to_within(&seeds, &allowed).into_iter().collect()
        };
        for &i in &closure {
            pinned[i] = true;
        }
        let done = closure.is_empty();
        trace.stages.push(Stage {
            q,
            candidates,
            inflow,
            seeds: seeds.into_iter().collect(),
            closure: closure.clone(),
        });
        if done {
            break;
        }
        previous = closure;
    }

    let fixed_nodes: BTreeSet<usize> = (0..n).filter(|&i| pinned[i]).collect();
    let free_nodes: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();
    let m = free_nodes.len();
    let free_matrix = DMatrix::from_fn(m, m, |a, b| rel.a[(free_nodes[a], free_nodes[b])]);
    let free_bounds = DVector::from_fn(m, |a, _| rel.total_out[free_nodes[a]]);
    let set = ClearingSet {
        p_star: p_star.clone(),
        is_unique: free_nodes.is_empty(),
        fixed_nodes,
        free_nodes,
        free_matrix,
        free_bounds,
    };
    (set, trace)
}

/// Stationary distribution of an irreducible stochastic matrix.
fn stationary(b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let m = b.nrows();
    let mut sys = b.transpose() - DMatrix::identity(m, m);
    let mut rhs = DVector::zeros(m);
    for j in 0..m {
        sys[(m - 1, j)] = 1.0;
    }
    rhs[m - 1] = 1.0;
    let v = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular stationary-distribution system".into()))?;
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::Numerical(
            "stationary distribution of a free sink component is not positive".into(),
        ));
    }
    Ok(v)
}

/// Largest feasible free vector supported on each sink component of the
/// free block: the component's stationary distribution, scaled until one
/// bound is tight.
pub fn free_extreme_vectors(cs: &ClearingSet) -> Result<Vec<DVector<f64>>> {
    let m = cs.free_nodes.len();
    let g = Digraph::from_arcs(
        m,
        (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter(|&(a, b)| cs.free_matrix[(a, b)] > 0.0),
    );
    let scc = g.strongly_connected_components();
    let mut out = Vec::new();
    for comp in scc.sink_components() {
        let block = DMatrix::from_fn(comp.len(), comp.len(), |a, b| cs.free_matrix[(comp[a], comp[b])]);
        let v = stationary(&block)?;
        let scale = comp
            .iter()
            .enumerate()
            .map(|(a, &i)| cs.free_bounds[i] / v[a])
            .fold(f64::INFINITY, f64::min);
        let mut xi = DVector::zeros(m);
        for (a, &i) in comp.iter().enumerate() {
            xi[i] = (scale * v[a]).min(cs.free_bounds[i]);
        }
        out.push(xi);
    }
    Ok(out)
}

/// Random clearing vectors from the set: `p*` on pinned nodes and, on each
/// free sink component, a uniform point of the segment from zero to the
/// component's extreme vector. A unique set yields `p*` alone.
pub fn sample_clearing_vectors(
    net: &FinancialNetwork,
    cs: &ClearingSet,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if cs.is_unique {
        return Ok(vec![cs.p_star.clone()]);
    }
    let extremes = free_extreme_vectors(cs)?;
    let rel = net.relative_liabilities();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut xi = DVector::zeros(cs.free_nodes.len());
        for e in &extremes {
            let t: f64 = rng.random();
            xi += e * t;
        }
        let p = cs.compose(&xi);
        let residual = rel.clearing_residual(net.assets(), &p);
        if residual > SAMPLE_RESIDUAL_TOL {
            return Err(Error::Numerical(format!(
                "sampled clearing vector has residual {residual:e}"
            )));
        }
        out.push(p);
    }
    Ok(out)
}

/// Clearing vectors sharing one default set: an affine solution set cut
/// down to a polytope, described by its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedPiece {
    /// Nodes allowed to pay less than in full.
    pub default_set: Vec<usize>,
    /// Dimension of the affine solution set before the bounds are applied.
    pub dimension: usize,
    pub vertices: Vec<DVector<f64>>,
}

/// Every clearing vector of a small network, found by enumeration.
///
/// The set is convex, so it is the convex hull of `vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedClearingSet {
    pub pieces: Vec<EnumeratedPiece>,
    pub vertices: Vec<DVector<f64>>,
}

impl EnumeratedClearingSet {
    pub fn is_single_point(&self, tol: f64) -> bool {
        match self.vertices.split_first() {
            None => false,
            Some((first, rest)) => rest.iter().all(|v| (v - first).amax() <= tol),
        }
    }

    /// Componentwise maximum over the set.
    pub fn upper_envelope(&self) -> Option<DVector<f64>> {
        let (first, rest) = self.vertices.split_first()?;
        Some(rest.iter().fold(first.clone(), |acc, v| acc.sup(v)))
    }
}

/// Enumerates clearing vectors exhaustively.
///
/// For each candidate default set `J` of non-sink nodes, nodes outside `J`
/// pay in full and nodes in `J` pay exactly their in-flow. That linear
/// system may be singular; its affine solution set (particular solution
/// plus null space, rank decided at [`ORACLE_TOL`]) is intersected with the
/// bounds `0 ≤ p_J ≤ p̄_J` and with solvency of the nodes outside `J`, and
/// the resulting polytope's vertices are enumerated.
pub fn brute_force_clearing_set(net: &FinancialNetwork) -> Result<EnumeratedClearingSet> {
    brute_force_clearing_set_with(net, Execution::Sequential)
}

pub fn brute_force_clearing_set_with(net: &FinancialNetwork, exec: Execution) -> Result<EnumeratedClearingSet> {
    let n = net.n();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let rel = net.relative_liabilities();
    let payers: Vec<usize> = (0..n).filter(|i| !rel.sinks.contains(i)).collect();
    let subsets = 1usize << payers.len();
    let scale = rel.total_out.amax().max(net.assets().amax()).max(1.0);
    let pieces: Vec<EnumeratedPiece> = exec
        .map(subsets, |mask| {
            let j: Vec<usize> = payers
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &i)| i)
                .collect();
            solve_default_set(net, &rel.a, &rel.total_out, &j, scale)
        })
        .into_iter()
        .flatten()
        .collect();
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    for piece in &pieces {
        for v in &piece.vertices {
            push_unique(&mut vertices, v.clone(), ORACLE_TOL * scale);
        }
    }
    Ok(EnumeratedClearingSet { pieces, vertices })
}

fn push_unique(set: &mut Vec<DVector<f64>>, v: DVector<f64>, tol: f64) {
    if !set.iter().any(|w| (w - &v).amax() <= tol) {
        set.push(v);
    }
}

fn solve_default_set(
    net: &FinancialNetwork,
    a: &DMatrix<f64>,
    pbar: &DVector<f64>,
    j: &[usize],
    scale: f64,
) -> Option<EnumeratedPiece> {
    let n = net.n();
    let c = net.assets();
    let tol = ORACLE_TOL * scale;
    let in_j = {
        let mut mask = vec![false; n];
        for &i in j {
            mask[i] = true;
        }
        mask
    };
    let outside: Vec<usize> = (0..n).filter(|&i| !in_j[i]).collect();
    let size = j.len();

    // (I − A_JJᵀ) p_J = c_J + Σ_{k∉J} a_ki p̄_k
    let sys = DMatrix::from_fn(size, size, |r, s| {
        let delta = if r == s { 1.0 } else { 0.0 };
        delta - a[(j[s], j[r])]
    });
    let rhs = DVector::from_fn(size, |r, _| {
        c[j[r]] + outside.iter().map(|&k| a[(k, j[r])] * pbar[k]).sum::<f64>()
    });

    let (x0, null) = if size == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let svd = sys.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
        let mut x0 = DVector::zeros(size);
        let mut null_cols = Vec::new();
        for (k, &sigma) in svd.singular_values.iter().enumerate() {
            let vk = v_t.row(k).transpose();
            if sigma > ORACLE_TOL {
                let coef = u.column(k).dot(&rhs) / sigma;
                x0 += vk * coef;
            } else {
                null_cols.push(vk);
            }
        }
        if (&sys * &x0 - &rhs).amax() > tol {
            return None;
        }
        let null = if null_cols.is_empty() {
            DMatrix::zeros(size, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        (x0, null)
    };
    let dim = null.ncols();

    // Constraints on the null-space coordinates z: rows·z ≤ bound.
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut bounds: Vec<f64> = Vec::new();
    for r in 0..size {
        let nr = null.row(r).transpose();
        rows.push(-&nr);
        bounds.push(x0[r]);
        rows.push(nr);
        bounds.push(pbar[j[r]] - x0[r]);
    }
    for &i in &outside {
        // c_i + Σ_k a_ki p_k ≥ p̄_i with p_k = p̄_k off J and x0 + N z on J.
        let base = c[i]
            + outside.iter().map(|&k| a[(k, i)] * pbar[k]).sum::<f64>()
            + (0..size).map(|r| a[(j[r], i)] * x0[r]).sum::<f64>()
            - pbar[i];
        let coef = DVector::from_fn(dim, |d, _| (0..size).map(|r| a[(j[r], i)] * null[(r, d)]).sum::<f64>());
        rows.push(-coef);
        bounds.push(base);
    }

    let feasible = |z: &DVector<f64>| rows.iter().zip(&bounds).all(|(g, &h)| g.dot(z) <= h + tol);
    let assemble = |z: &DVector<f64>| {
        let pj = &x0 + &null * z;
        let mut p = pbar.clone();
        for r in 0..size {
            p[j[r]] = pj[r].clamp(0.0, pbar[j[r]]);
        }
        p
    };

    let mut vertices = Vec::new();
    if dim == 0 {
        let z = DVector::zeros(0);
        if feasible(&z) {
            vertices.push(assemble(&z));
        }
    } else {
        for combo in Combinations::new(rows.len(), dim) {
            let g = DMatrix::from_fn(dim, dim, |r, s| rows[combo[r]][s]);
            let h = DVector::from_fn(dim, |r, _| bounds[combo[r]]);
            let lu = g.clone().full_piv_lu();
            if lu.determinant().abs() < 1e-10 {
                continue;
            }
            let Some(z) = lu.solve(&h) else { continue };
            if feasible(&z) {
                push_unique(&mut vertices, assemble(&z), tol);
            }
        }
    }
    (!vertices.is_empty()).then(|| EnumeratedPiece {
        default_set: j.to_vec(),
        dimension: dim,
        vertices,
    })
}

/// Lexicographic `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for t in i + 1..k {
                    self.idx[t] = self.idx[t - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
