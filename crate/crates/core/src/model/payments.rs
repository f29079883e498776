use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::network::FinancialNetwork;
use crate::error::{Error, Result};

/// Absolute tolerance, in currency units, for equalities and defaults.
pub const EPS: f64 = 1e-9;

/// Matrix of actual payments, entry `(i, j)` paid by `i` to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentMatrix {
    entries: DMatrix<f64>,
}

impl PaymentMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.ncols(),
            });
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "payment matrix has nonzero diagonal entry at node {i}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
        }
    }

    /// The nominal payment matrix: everyone pays in full.
    pub fn nominal(net: &FinancialNetwork) -> Self {
        Self {
            entries: net.liabilities().clone(),
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Total payment of each node, `P·1`.
    pub fn outflow(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.entries.row(i).sum())
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.entries.sum()
    }

    /// Positive entries as `(debtor, creditor, amount)`, row-major.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.entries[(i, j)];
                if v > 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Largest violation of `0 ≤ P ≤ P̄`.
    pub fn bound_violation(&self, net: &FinancialNetwork) -> f64 {
        self.entries
            .iter()
            .zip(net.liabilities().iter())
            .map(|(&p, &pbar)| (-p).max(p - pbar).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flows {
    pub inflow: DVector<f64>,
    pub outflow: DVector<f64>,
}

/// Actual in-flows `c + Pᵀ1` and out-flows `P·1`.
pub fn flows(net: &FinancialNetwork, pm: &PaymentMatrix) -> Result<Flows> {
    if pm.n() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: pm.n(),
        });
    }
    let n = net.n();
    let inflow = DVector::from_fn(n, |i, _| net.assets()[i] + pm.entries.column(i).sum());
    Ok(Flows {
        inflow,
        outflow: pm.outflow(),
    })
}

/// Per-node check of `P·1 = min(p̄, c + Pᵀ1)`.
#[derive(Debug, Clone, Serialize)]
pub struct ClearingReport {
    pub violations: Vec<f64>,
    pub residual: f64,
    pub bound_violation: f64,
    pub passed: bool,
}

pub fn check_clearing_matrix(net: &FinancialNetwork, pm: &PaymentMatrix, tol: f64) -> ClearingReport {
    let n = net.n();
    if pm.n() != n {
        return ClearingReport {
            violations: Vec::new(),
            residual: f64::INFINITY,
            bound_violation: f64::INFINITY,
            passed: false,
        };
    }
    let f = flows(net, pm).expect("dimensions checked above");
    let pbar = net.total_out();
    let violations: Vec<f64> = (0..n)
        .map(|i| (f.outflow[i] - pbar[i].min(f.inflow[i])).abs())
        .collect();
    let residual = violations.iter().copied().fold(0.0, f64::max);
    let bound_violation = pm.bound_violation(net);
    ClearingReport {
        passed: residual <= tol && bound_violation <= tol,
        violations,
        residual,
        bound_violation,
    }
}

/// Equities `ζ = c + Aᵀp − p`; fails if any is below `-tol`.
pub fn equities(net: &FinancialNetwork, p: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    if p.len() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: p.len(),
        });
    }
    let rel = net.relative_liabilities();
    let zeta = rel.inflow(net.assets(), p) - p;
    if let Some((node, &value)) = zeta.iter().enumerate().find(|(_, &z)| z < -tol) {
        return Err(Error::NegativeEquity { node, value });
    }
    Ok(zeta)
}

/// Nodes paying less than their nominal obligation.
pub fn defaults(total_out: &DVector<f64>, payments: &DVector<f64>, tol: f64) -> BTreeSet<usize> {
    (0..payments.len())
        .filter(|&i| payments[i] < total_out[i] - tol)
        .collect()
}

/// A payment vector together with its clearing diagnostics.
#[derive(Debug, Clone)]
pub struct ClearingSolution {
    pub payments: DVector<f64>,
    pub residual: f64,
    pub equities: DVector<f64>,
    pub defaults: BTreeSet<usize>,
}

impl ClearingSolution {
    /// Evaluates `p` against the network; fails unless it clears within `tol`.
    pub fn evaluate(net: &FinancialNetwork, payments: DVector<f64>, tol: f64) -> Result<Self> {
        let rel = net.relative_liabilities();
        let residual = rel.clearing_residual(net.assets(), &payments);
        if residual > tol {
            return Err(Error::Numerical(format!(
                "payment vector has clearing residual {residual:e} above tolerance {tol:e}"
            )));
        }
        let equities = equities(net, &payments, tol)?;
        let defaults = defaults(&rel.total_out, &payments, tol);
        Ok(Self {
            payments,
            residual,
            equities,
            defaults,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_node(c0: f64) -> FinancialNetwork {
        FinancialNetwork::from_rows(&[&[0.0, 10.0], &[5.0, 0.0]], &[c0, 0.0]).unwrap()
    }

    fn example2() -> FinancialNetwork {
        FinancialNetwork::from_rows(
            &[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[6.0, 4.0, 0.0]],
            &[0.0, 0.0, 5.0],
        )
        .unwrap()
    }

    fn pm(rows: &[&[f64]]) -> PaymentMatrix {
        let n = rows.len();
        PaymentMatrix::new(DMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn nominal_flows() {
        let net = two_node(3.0);
        let f = flows(&net, &PaymentMatrix::nominal(&net)).unwrap();
        assert_eq!(f.inflow.as_slice(), &[8.0, 10.0]);
        assert_eq!(f.outflow.as_slice(), &[10.0, 5.0]);
    }

    #[test]
    fn zero_flows() {
        let net = two_node(0.0);
        let f = flows(&net, &PaymentMatrix::zeros(2)).unwrap();
        assert_eq!(f.inflow.as_slice(), &[0.0, 0.0]);
        assert_eq!(f.outflow.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn partial_payment_flows() {
        let net = two_node(3.0);
        let f = flows(&net, &pm(&[&[0.0, 8.0], &[5.0, 0.0]])).unwrap();
        assert_eq!(f.inflow.as_slice(), &[8.0, 8.0]);
        assert_eq!(f.outflow.as_slice(), &[8.0, 5.0]);
    }

    #[test]
    fn flows_dimension_mismatch() {
        assert!(flows(&two_node(0.0), &PaymentMatrix::zeros(3)).is_err());
    }

    #[test]
    fn example2_prorata_row_clears() {
        let net = example2();
        let report = check_clearing_matrix(&net, &pm(&[&[0.0; 3], &[0.0; 3], &[3.0, 2.0, 0.0]]), EPS);
        assert!(report.passed);
        assert_eq!(report.residual, 0.0);
    }

    #[test]
    fn example2_full_payment_violates_limited_liability() {
        let net = example2();
        let report = check_clearing_matrix(&net, &pm(&[&[0.0; 3], &[0.0; 3], &[6.0, 4.0, 0.0]]), EPS);
        assert!(!report.passed);
        assert_eq!(report.violations[2], 5.0);
    }

    #[test]
    fn nominal_payments_clear_unshocked_network() {
        let net = FinancialNetwork::from_rows(
            &[&[0.0, 4.0, 1.0], &[2.0, 0.0, 3.0], &[1.0, 1.0, 0.0]],
            &[2.0, 0.0, 3.0],
        )
        .unwrap();
        assert!(check_clearing_matrix(&net, &PaymentMatrix::nominal(&net), EPS).passed);
    }

    #[test]
    fn equities_of_two_node_example() {
        let net = two_node(3.0);
        let zeta = equities(&net, &DVector::from_vec(vec![8.0, 5.0]), EPS).unwrap();
        assert_eq!(zeta.as_slice(), &[0.0, 3.0]);
    }

    #[test]
    fn equities_vanish_on_zero_asset_ring() {
        let net = FinancialNetwork::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]], &[0.0, 0.0]).unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let zeta = equities(&net, &DVector::from_vec(vec![t, t]), EPS).unwrap();
            assert_eq!(zeta.as_slice(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn equities_flag_non_clearing_payments() {
        let net = two_node(3.0);
        let err = equities(&net, &DVector::from_vec(vec![10.0, 5.0]), EPS).unwrap_err();
        assert!(matches!(err, Error::NegativeEquity { node: 0, .. }));
    }

    #[test]
    fn unshocked_equities_nonnegative() {
        let net = FinancialNetwork::from_rows(
            &[&[0.0, 4.0, 1.0], &[2.0, 0.0, 3.0], &[1.0, 1.0, 0.0]],
            &[2.0, 0.0, 3.0],
        )
        .unwrap();
        let zeta = equities(&net, &net.total_out(), EPS).unwrap();
        assert!(zeta.iter().all(|&z| z >= 0.0));
    }

    #[test]
    fn clearing_solution_reports_defaults() {
        let net = two_node(3.0);
        let sol = ClearingSolution::evaluate(&net, DVector::from_vec(vec![8.0, 5.0]), EPS).unwrap();
        assert_eq!(sol.defaults, BTreeSet::from([0]));
        assert!(ClearingSolution::evaluate(&net, DVector::from_vec(vec![7.0, 5.0]), EPS).is_err());
    }

    proptest! {
        #[test]
        fn external_assets_are_conserved(
            n in 2usize..6,
            w in proptest::collection::vec(0.0f64..10.0, 36),
            frac in proptest::collection::vec(0.0f64..=1.0, 36),
            c in proptest::collection::vec(0.0f64..20.0, 6),
        ) {
            let liab = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w[i * 6 + j] });
            let net = FinancialNetwork::unshocked(liab.clone(), DVector::from_fn(n, |i, _| c[i])).unwrap();
            let p = PaymentMatrix::new(DMatrix::from_fn(n, n, |i, j| liab[(i, j)] * frac[i * 6 + j])).unwrap();
            let f = flows(&net, &p).unwrap();
            prop_assume!((0..n).all(|i| f.inflow[i] >= f.outflow[i]));
            let net_total = (f.inflow - f.outflow).sum();
            prop_assert!((net_total - net.assets().sum()).abs() < 1e-9);
        }

        #[test]
        fn nominal_matrix_clears_without_shock(
            n in 2usize..6,
            w in proptest::collection::vec(0.0f64..10.0, 36),
            slack in proptest::collection::vec(0.0f64..5.0, 6),
        ) {
            let liab = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w[i * 6 + j] });
            let c = DVector::from_fn(n, |i, _| {
                let deficit = liab.row(i).sum() - liab.column(i).sum();
                deficit.max(0.0) + slack[i]
            });
            let net = FinancialNetwork::unshocked(liab, c).unwrap();
            prop_assert!(check_clearing_matrix(&net, &PaymentMatrix::nominal(&net), 1e-9).passed);
        }
    }
}
