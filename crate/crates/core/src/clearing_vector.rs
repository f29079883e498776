//! The dominant (maximal) clearing vector under the pro-rata rule.
//!
//! Two independent routes: the LP `max 1ᵀp s.t. 0 ≤ p ≤ p̄, c + Aᵀp ≥ p`,
//! whose unique optimum is the dominant vector, and the fictitious default
//! iteration `p ← min(p̄, c + Aᵀp)` started from `p̄`, which decreases
//! monotonically to it.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::graph::Digraph;
use crate::lp::LinearProgram;
use crate::model::{FinancialNetwork, RelativeLiabilities};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lp,
    FictitiousDefault,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominantVector {
    pub p_star: DVector<f64>,
    pub method: Method,
    /// Map applications until the stopping test held (fictitious default only).
    pub iterations: Option<usize>,
    pub converged: bool,
}

/// Default fictitious-default stopping tolerance.
pub const FDA_TOL: f64 = 1e-10;

/// Default iteration cap, `10·n²`.
pub fn default_fda_cap(n: usize) -> usize {
    (10 * n * n).max(10)
}

/// The clearing LP over total payments.
pub fn clearing_vector_lp(net: &FinancialNetwork, rel: &RelativeLiabilities) -> Result<LinearProgram> {
    let n = net.n();
    let g = DMatrix::identity(n, n) - rel.a.transpose();
    LinearProgram::new(
        vec![1.0; n],
        g,
        net.assets().as_slice().to_vec(),
        rel.total_out.as_slice().to_vec(),
    )
}

pub fn dominant_vector_lp(net: &FinancialNetwork) -> Result<DominantVector> {
    let rel = net.relative_liabilities();
    let sol = clearing_vector_lp(net, &rel)?.solve().into_optimal()?;
    Ok(DominantVector {
        p_star: DVector::from_vec(sol.x),
        method: Method::Lp,
        iterations: None,
        converged: true,
    })
}

/// Iterates of the fictitious default algorithm, starting at `p̄`.
#[derive(Debug, Clone)]
pub struct FictitiousDefault<'a> {
    rel: RelativeLiabilities,
    assets: &'a DVector<f64>,
    current: Option<DVector<f64>>,
}

impl<'a> FictitiousDefault<'a> {
    pub fn new(net: &'a FinancialNetwork) -> Self {
        Self {
            rel: net.relative_liabilities(),
            assets: net.assets(),
            current: None,
        }
    }
}

impl Iterator for FictitiousDefault<'_> {
    type Item = DVector<f64>;

    fn next(&mut self) -> Option<DVector<f64>> {
        let next = match &self.current {
            None => self.rel.total_out.clone(),
            Some(p) => self.rel.clearing_map(self.assets, p),
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

pub fn dominant_vector_fda(net: &FinancialNetwork, max_iters: usize, tol: f64) -> DominantVector {
    let mut iter = FictitiousDefault::new(net);
    let mut prev = iter.next().expect("iteration is infinite");
    for k in 1..=max_iters {
        let next = iter.next().expect("iteration is infinite");
        let step = (&prev - &next).amax();
        prev = next;
        if step <= tol {
            return DominantVector {
                p_star: prev,
                method: Method::FictitiousDefault,
                iterations: Some(k),
                converged: true,
            };
        }
    }
    DominantVector {
        p_star: prev,
        method: Method::FictitiousDefault,
        iterations: Some(max_iters),
        converged: false,
    }
}

/// Nodes whose dominant payment is positive, predicted from the graph alone:
/// non-sinks that hold assets, are downstream of an asset holder, or belong
/// to a sink component.
pub fn predict_positive_support(net: &FinancialNetwork) -> BTreeSet<usize> {
    let g = Digraph::from_matrix(net.liabilities());
    let scc = g.strongly_connected_components();
    let funded = g.reachable_from(&net.asset_holders());
    let pbar = net.total_out();
    (0..net.n())
        .filter(|&i| pbar[i] > 0.0 && (funded.contains(&i) || scc.in_sink_component(i)))
        .collect()
}
