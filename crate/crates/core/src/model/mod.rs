//! Financial networks, payment matrices and the clearing equations.

mod format;
mod network;
mod payments;

pub use format::NetworkFile;
pub use network::{FinancialNetwork, RelativeLiabilities, ROW_SUM_TOL};
pub use payments::{
    check_clearing_matrix, defaults, equities, flows, ClearingReport, ClearingSolution, Flows,
    PaymentMatrix, EPS,
};
