use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance used when classifying a row of relative liabilities.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// An interbank liability network.
///
/// Entry `(i, j)` of the liability matrix is the nominal amount node `i`
/// owes node `j`. There is no separate vector of outside liabilities: debts
/// to the external sector are modelled by an explicit sink node.
#[derive(Debug, Clone, PartialEq)]
pub struct FinancialNetwork {
    liabilities: DMatrix<f64>,
    nominal_assets: DVector<f64>,
    assets: DVector<f64>,
}

impl FinancialNetwork {
    /// Builds a network and checks every invariant.
    pub fn new(
        liabilities: DMatrix<f64>,
        nominal_assets: DVector<f64>,
        assets: DVector<f64>,
    ) -> Result<Self> {
        let n = liabilities.nrows();
        if liabilities.ncols() != n {
            return Err(Error::InvalidNetwork(format!(
                "liability matrix is {}x{}, expected a square matrix",
                n,
                liabilities.ncols()
            )));
        }
        for (name, v) in [("nominal_assets", &nominal_assets), ("assets", &assets)] {
            if v.len() != n {
                return Err(Error::InvalidNetwork(format!(
                    "{name} has length {}, expected {n}",
                    v.len()
                )));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = liabilities[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidNetwork(format!(
                        "liability ({i}, {j}) = {v} must be finite and nonnegative"
                    )));
                }
            }
            if liabilities[(i, i)] != 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "node {i} has a liability to itself ({})",
                    liabilities[(i, i)]
                )));
            }
            let (cn, c) = (nominal_assets[i], assets[i]);
            if !cn.is_finite() || cn < 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "nominal asset of node {i} = {cn} must be finite and nonnegative"
                )));
            }
            if !c.is_finite() || c < 0.0 || c > cn {
                return Err(Error::InvalidNetwork(format!(
                    "asset of node {i} = {c} must lie in [0, {cn}]"
                )));
            }
        }
        Ok(Self {
            liabilities,
            nominal_assets,
            assets,
        })
    }

    /// Unshocked network: assets equal nominal assets.
    pub fn unshocked(liabilities: DMatrix<f64>, nominal_assets: DVector<f64>) -> Result<Self> {
        let assets = nominal_assets.clone();
        Self::new(liabilities, nominal_assets, assets)
    }

    /// Convenience constructor from row slices, assets equal to nominal.
    pub fn from_rows(rows: &[&[f64]], assets: &[f64]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::unshocked(m, DVector::from_column_slice(assets))
    }

    /// Same liabilities and nominal assets, different post-shock assets.
    pub fn with_assets(&self, assets: DVector<f64>) -> Result<Self> {
        Self::new(
            self.liabilities.clone(),
            self.nominal_assets.clone(),
            assets,
        )
    }

    pub fn n(&self) -> usize {
        self.liabilities.nrows()
    }

    pub fn liabilities(&self) -> &DMatrix<f64> {
        &self.liabilities
    }

    pub fn nominal_assets(&self) -> &DVector<f64> {
        &self.nominal_assets
    }

    pub fn assets(&self) -> &DVector<f64> {
        &self.assets
    }

    /// Nominal total obligations, the row sums of the liability matrix.
    pub fn total_out(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.liabilities.row(i).sum())
    }

    /// Nominal in-flows `c̄ + P̄ᵀ1`.
    pub fn nominal_inflow(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| {
            self.nominal_assets[i] + self.liabilities.column(i).sum()
        })
    }

    /// Number of arcs, i.e. positive liabilities.
    pub fn arc_count(&self) -> usize {
        self.liabilities.iter().filter(|&&v| v > 0.0).count()
    }

    /// Nodes that owe nothing.
    pub fn sinks(&self) -> BTreeSet<usize> {
        (0..self.n())
            .filter(|&i| self.liabilities.row(i).iter().all(|&v| v == 0.0))
            .collect()
    }

    /// Nodes with positive post-shock assets.
    pub fn asset_holders(&self) -> BTreeSet<usize> {
        (0..self.n()).filter(|&i| self.assets[i] > 0.0).collect()
    }

    /// Relative liability matrix with identity rows on sinks.
    pub fn relative_liabilities(&self) -> RelativeLiabilities {
        let n = self.n();
        let total_out = self.total_out();
        let mut a = DMatrix::zeros(n, n);
        let mut sinks = BTreeSet::new();
        for i in 0..n {
            if total_out[i] > 0.0 {
                for j in 0..n {
                    a[(i, j)] = self.liabilities[(i, j)] / total_out[i];
                }
            } else {
                a[(i, i)] = 1.0;
                sinks.insert(i);
            }
        }
        RelativeLiabilities {
            a,
            sinks,
            total_out,
        }
    }
}

/// Row-stochastic normalisation of a liability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeLiabilities {
    pub a: DMatrix<f64>,
    pub sinks: BTreeSet<usize>,
    pub total_out: DVector<f64>,
}

impl RelativeLiabilities {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `c + Aᵀp`, the in-flow each node receives when everyone pays `p`
    /// pro rata.
    pub fn inflow(&self, assets: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        assets + self.a.tr_mul(p)
    }

    /// One application of the clearing map `p ↦ min(p̄, c + Aᵀp)`.
    pub fn clearing_map(&self, assets: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        self.inflow(assets, p).zip_map(&self.total_out, f64::min)
    }

    /// Max-norm distance between `p` and its image under the clearing map.
    pub fn clearing_residual(&self, assets: &DVector<f64>, p: &DVector<f64>) -> f64 {
        (p - self.clearing_map(assets, p)).amax()
    }

    pub fn is_row_stochastic(&self) -> bool {
        self.a.iter().all(|&v| v >= 0.0)
            && (0..self.n()).all(|i| (self.a.row(i).sum() - 1.0).abs() <= ROW_SUM_TOL)
    }
}
