//! JSON network files.
//!
//! ```json
//! {"n": 3, "liabilities": [[2, 0, 6.0], [2, 1, 4.0]],
//!  "nominal_assets": [0, 0, 5], "assets": [0, 0, 5]}
//! ```
//!
//! Liabilities are a sparse `[debtor, creditor, amount]` list; absent pairs
//! are zero. `assets` may be omitted, in which case it equals
//! `nominal_assets`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::network::FinancialNetwork;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub liabilities: Vec<(usize, usize, f64)>,
    pub nominal_assets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assets: Option<Vec<f64>>,
}

impl NetworkFile {
    pub fn from_network(net: &FinancialNetwork) -> Self {
        let n = net.n();
        let mut liabilities = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = net.liabilities()[(i, j)];
                if v > 0.0 {
                    liabilities.push((i, j, v));
                }
            }
        }
        let assets = (net.assets() != net.nominal_assets()).then(|| net.assets().as_slice().to_vec());
        Self {
            n,
            liabilities,
            nominal_assets: net.nominal_assets().as_slice().to_vec(),
            assets,
        }
    }

    /// Validates the file and builds the dense network.
    pub fn into_network(self) -> Result<FinancialNetwork> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for (k, &(i, j, amount)) in self.liabilities.iter().enumerate() {
            let entry = || format!("liability entry #{k} [{i}, {j}, {amount}]");
            if i >= n || j >= n {
                return Err(Error::InvalidNetwork(format!(
                    "{} references a node outside 0..{n}",
                    entry()
                )));
            }
            if i == j {
                return Err(Error::InvalidNetwork(format!("{} is a self-liability", entry())));
            }
            if !amount.is_finite() || amount < 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "{} has a negative or non-finite amount",
                    entry()
                )));
            }
            if m[(i, j)] != 0.0 {
                return Err(Error::InvalidNetwork(format!("{} duplicates an earlier entry", entry())));
            }
            m[(i, j)] = amount;
        }
        if self.nominal_assets.len() != n {
            return Err(Error::InvalidNetwork(format!(
                "nominal_assets has length {}, expected {n}",
                self.nominal_assets.len()
            )));
        }
        let nominal = DVector::from_vec(self.nominal_assets);
        let assets = match self.assets {
            Some(a) if a.len() != n => {
                return Err(Error::InvalidNetwork(format!(
                    "assets has length {}, expected {n}",
                    a.len()
                )))
            }
            Some(a) => DVector::from_vec(a),
            None => nominal.clone(),
        };
        FinancialNetwork::new(m, nominal, assets)
    }
}

impl FinancialNetwork {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<NetworkFile>(s)?.into_network()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkFile::from_network(self))?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json_string()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}
