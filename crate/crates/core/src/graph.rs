//! Directed graphs of nonnegative matrices.
//!
//! An arc `i → j` exists whenever entry `(i, j)` is positive. For a
//! liability matrix this is "i owes j".

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ROW_SUM_TOL;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let arcs = (0..n).flat_map(|i| (0..n).map(move |j| (i, j)));
        Self::from_arcs(n, arcs.filter(|&(i, j)| m[(i, j)] > 0.0))
    }

    pub fn from_arcs(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for (i, j) in arcs {
            assert!(i < n && j < n, "arc ({i}, {j}) out of range for {n} nodes");
            succ[i].push(j);
            pred[j].push(i);
        }
        Self { succ, pred }
    }

    pub fn n(&self) -> usize {
        self.succ.len()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.succ[i].contains(&j)
    }

    /// Nodes from which some target can be reached, targets included.
    pub fn reachable_to(&self, targets: &BTreeSet<usize>) -> BTreeSet<usize> {
        let all = vec![true; self.n()];
        self.reachable_to_within(targets, &all)
    }

    /// Like [`reachable_to`](Self::reachable_to), but walks only through
    /// nodes flagged in `allowed`.
    pub fn reachable_to_within(&self, targets: &BTreeSet<usize>, allowed: &[bool]) -> BTreeSet<usize> {
        bfs(&self.pred, targets, allowed)
    }

    /// Nodes reachable from some source, sources included.
    pub fn reachable_from(&self, sources: &BTreeSet<usize>) -> BTreeSet<usize> {
        bfs(&self.succ, sources, &vec![true; self.n()])
    }

    /// Strongly connected components by Tarjan's algorithm with an explicit
    /// stack.
    pub fn strongly_connected_components(&self) -> CondensationReport {
        let n = self.n();
        const UNVISITED: usize = usize::MAX;
        let mut index = vec![UNVISITED; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut components: Vec<Vec<usize>> = Vec::new();
        let mut next = 0;
        // (node, position in its successor list)
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            call.push((root, 0));
            index[root] = next;
            low[root] = next;
            next += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if let Some(&w) = self.succ[v].get(*pos) {
                    *pos += 1;
                    if index[w] == UNVISITED {
                        index[w] = next;
                        low[w] = next;
                        next += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
            }
        }

        let mut component_of = vec![0; n];
        for (c, comp) in components.iter().enumerate() {
            for &v in comp {
                component_of[v] = c;
            }
        }
        let is_sink = components
            .iter()
            .enumerate()
            .map(|(c, comp)| {
                comp.iter()
                    .all(|&v| self.succ[v].iter().all(|&w| component_of[w] == c))
            })
            .collect();
        let is_trivial = components
            .iter()
            .map(|comp| comp.len() == 1 && !self.has_arc(comp[0], comp[0]))
            .collect();
        CondensationReport {
            components,
            component_of,
            is_sink,
            is_trivial,
        }
    }
}

fn bfs(adj: &[Vec<usize>], start: &BTreeSet<usize>, allowed: &[bool]) -> BTreeSet<usize> {
    let mut seen = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in start {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if allowed[w] && !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.iter()
        .enumerate()
        .filter_map(|(i, &s)| s.then_some(i))
        .collect()
}

/// Strongly connected components with sink and triviality flags.
///
/// Components come out in reverse topological order (Tarjan's order); each
/// is sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondensationReport {
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
    /// No arc leaves the component.
    pub is_sink: Vec<bool>,
    /// A single node without a self-arc.
    pub is_trivial: Vec<bool>,
}

impl CondensationReport {
    pub fn sink_components(&self) -> impl Iterator<Item = &[usize]> {
        self.components
            .iter()
            .zip(&self.is_sink)
            .filter(|(_, &s)| s)
            .map(|(c, _)| c.as_slice())
    }

    pub fn in_sink_component(&self, v: usize) -> bool {
        self.is_sink[self.component_of[v]]
    }
}

fn check_substochastic(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    for i in 0..n {
        for j in 0..n {
            if a[(i, j)] < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: a[(i, j)],
                });
            }
        }
    }
    let sums = DVector::from_fn(n, |i, _| a.row(i).sum());
    if let Some((row, &sum)) = sums.iter().enumerate().find(|(_, &s)| s > 1.0 + ROW_SUM_TOL) {
        return Err(Error::NotSubstochastic { row, sum });
    }
    Ok(sums)
}

/// Schur stability of a substochastic matrix, decided on its graph: the
/// rows summing to less than one must be reachable from every node.
pub fn is_schur_stable_substochastic(a: &DMatrix<f64>) -> Result<bool> {
    let sums = check_substochastic(a)?;
    let deficient: BTreeSet<usize> = (0..a.nrows())
        .filter(|&i| sums[i] < 1.0 - ROW_SUM_TOL)
        .collect();
    if deficient.is_empty() {
        return Ok(false);
    }
    let g = Digraph::from_matrix(a);
    Ok(g.reachable_to(&deficient).len() == a.nrows())
}

/// Power-iteration estimate of a spectral radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    /// Collatz–Wielandt bracket around the true radius.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    /// `false` when the bracket did not close within the iteration budget;
    /// `value` is then only an estimate.
    pub converged: bool,
}

/// Spectral radius of a nonnegative matrix by power iteration.
///
/// The radius is the largest radius over the diagonal blocks of the strongly
/// connected components, so each irreducible block is handled separately.
/// On a block the iteration runs on `B + I`, which is primitive, so periodic
/// blocks converge too; the Collatz–Wielandt ratios of the positive iterate
/// bracket the block's radius. The reported bracket is the one of the block
/// attaining the maximum. Diagnostic only.
pub fn spectral_radius(a: &DMatrix<f64>, iters: usize, tol: f64) -> SpectralEstimate {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "spectral_radius needs a square matrix");
    let mut best = SpectralEstimate {
        value: 0.0,
        lower: 0.0,
        upper: 0.0,
        iterations: 0,
        converged: true,
    };
    let mut all_converged = true;
    for comp in Digraph::from_matrix(a).strongly_connected_components().components {
        let block = DMatrix::from_fn(comp.len(), comp.len(), |r, s| a[(comp[r], comp[s])]);
        let est = irreducible_radius(&block, iters, tol);
        all_converged &= est.converged;
        if est.value > best.value {
            best = est;
        }
    }
    best.converged = all_converged;
    best
}

fn irreducible_radius(a: &DMatrix<f64>, iters: usize, tol: f64) -> SpectralEstimate {
    let n = a.nrows();
    if n == 1 {
        return SpectralEstimate {
            value: a[(0, 0)],
            lower: a[(0, 0)],
            upper: a[(0, 0)],
            iterations: 0,
            converged: true,
        };
    }
    let shifted = a + DMatrix::identity(n, n);
    let mut x = DVector::from_element(n, 1.0);
    let (mut lower, mut upper) = (0.0f64, f64::INFINITY);
    for it in 1..=iters {
        let y = &shifted * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        lower = lower.max(lo - 1.0);
        upper = upper.min(hi - 1.0);
        let scale = y.amax();
        x = y / scale;
        if upper - lower <= tol {
            return SpectralEstimate {
                value: 0.5 * (lower + upper),
                lower,
                upper,
                iterations: it,
                converged: true,
            };
        }
    }
    SpectralEstimate {
        value: 0.5 * (lower + upper),
        lower,
        upper,
        iterations: iters,
        converged: false,
    }
}
