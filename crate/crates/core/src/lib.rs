//! Interbank clearing: dominant clearing vectors, uniqueness analysis and
//! the full set of clearing vectors, optimal clearing matrices without the
//! pro-rata rule, and Monte-Carlo contagion experiments on random networks.

pub mod clearing_matrix;
pub mod clearing_set;
pub mod clearing_vector;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod graph;
pub mod lp;
pub mod model;
pub mod sample_networks;
pub mod simgen;

pub use clearing_matrix::{demonstrate_no_maximal, optimal_matrix_lp, prorata_matrix, system_loss};
pub use clearing_set::{
    analyze_clearing_set, brute_force_clearing_set, sample_clearing_vectors, sufficient_uniqueness,
    unique_by_sink_components, ClearingSet,
};
pub use clearing_vector::{dominant_vector_fda, dominant_vector_lp, predict_positive_support};
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{FinancialNetwork, PaymentMatrix, EPS};
