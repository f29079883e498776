//! Clearing matrices: entrywise payments without the pro-rata rule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lp::LinearProgram;
use crate::model::{FinancialNetwork, PaymentMatrix};

/// The pro-rata matrix of a clearing vector, `p_ij = p_i·a_ij`.
pub fn prorata_matrix(net: &FinancialNetwork, p: &DVector<f64>) -> PaymentMatrix {
    let n = net.n();
    let pbar = net.total_out();
    let liab = net.liabilities();
    let entries = DMatrix::from_fn(n, n, |i, j| {
        if i == j || pbar[i] <= 0.0 {
            0.0
        } else {
            p[i] * (liab[(i, j)] / pbar[i])
        }
    });
    PaymentMatrix::new(entries).expect("diagonal is zero")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalMatrix {
    pub matrix: PaymentMatrix,
    /// Optimal `Σ p_ij`; unique even when the matrix is not.
    pub total_payments: f64,
}

/// The payment LP: maximise `Σ p_ij` over `0 ≤ P ≤ P̄` with every node's
/// out-flow covered by its in-flow. Only arcs with positive liability get a
/// variable; they are listed row-major in the returned vector.
pub fn payment_lp(net: &FinancialNetwork) -> Result<(LinearProgram, Vec<(usize, usize)>)> {
    let n = net.n();
    let liab = net.liabilities();
    let arcs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| liab[(i, j)] > 0.0)
        .collect();
    let mut g = DMatrix::zeros(n, arcs.len());
    for (k, &(i, j)) in arcs.iter().enumerate() {
        g[(i, k)] += 1.0;
        g[(j, k)] -= 1.0;
    }
    let lp = LinearProgram::new(
        vec![1.0; arcs.len()],
        g,
        net.assets().as_slice().to_vec(),
        arcs.iter().map(|&(i, j)| liab[(i, j)]).collect(),
    )?;
    Ok((lp, arcs))
}

/// An optimal clearing matrix. Optimizers are generally not unique; the
/// simplex tie-breaking picks one deterministically.
pub fn optimal_matrix_lp(net: &FinancialNetwork) -> Result<OptimalMatrix> {
    let n = net.n();
    let (lp, arcs) = payment_lp(net)?;
    let sol = lp.solve().into_optimal()?;
    let mut entries = DMatrix::zeros(n, n);
    for (&(i, j), &x) in arcs.iter().zip(&sol.x) {
        entries[(i, j)] = x;
    }
    Ok(OptimalMatrix {
        matrix: PaymentMatrix::new(entries)?,
        total_payments: sol.objective_value,
    })
}

/// Total shortfall `Σ (p̄_i − Σ_j p_ij)`.
pub fn system_loss(net: &FinancialNetwork, pm: &PaymentMatrix) -> f64 {
    (net.total_out() - pm.outflow()).sum()
}

/// Two clearing matrices whose entrywise maximum is not a clearing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NoMaximalWitness {
    /// The debtor pays creditor 0 first.
    pub first: PaymentMatrix,
    /// The debtor pays creditor 1 first.
    pub second: PaymentMatrix,
    pub envelope: DMatrix<f64>,
    /// Debtor out-flow under the envelope.
    pub envelope_outflow: f64,
    /// Debtor in-flow, which no clearing matrix can exceed.
    pub debtor_inflow: f64,
}

impl NoMaximalWitness {
    /// True when the two matrices differ, so the set of clearing matrices
    /// has no maximal element.
    pub fn incomparable(&self) -> bool {
        self.first != self.second
    }

    /// Any matrix dominating the envelope pays at least `envelope_outflow`,
    /// more than the debtor can.
    pub fn envelope_infeasible(&self, tol: f64) -> bool {
        self.envelope_outflow > self.debtor_inflow + tol
    }
}

/// Builds the witness on a network with two asset-less sinks 0 and 1 and a
/// debtor 2 owing both.
pub fn demonstrate_no_maximal(net: &FinancialNetwork) -> Result<NoMaximalWitness> {
    let liab = net.liabilities();
    let shape_ok = net.n() == 3
        && (0..3).all(|j| liab[(0, j)] == 0.0 && liab[(1, j)] == 0.0)
        && liab[(2, 0)] > 0.0
        && liab[(2, 1)] > 0.0;
    if !shape_ok {
        return Err(Error::Shape(
            "expected three nodes: sinks 0 and 1, node 2 owing both".into(),
        ));
    }
    let (to0, to1) = (liab[(2, 0)], liab[(2, 1)]);
    let inflow = net.assets()[2];
    let theta = inflow.min(to0 + to1);
    let row = |a: f64, b: f64| {
        let mut m = DMatrix::zeros(3, 3);
        m[(2, 0)] = a;
        m[(2, 1)] = b;
        m
    };
    let first = row(theta.min(to0), theta - theta.min(to0));
    let second = row(theta - theta.min(to1), theta.min(to1));
    let envelope = first.sup(&second);
    Ok(NoMaximalWitness {
        envelope_outflow: envelope.row(2).sum(),
        debtor_inflow: inflow,
        first: PaymentMatrix::new(first)?,
        second: PaymentMatrix::new(second)?,
        envelope,
    })
}
