//! JSON shapes printed by the subcommands.

use clearnet::clearing_set::Stage;
use serde::Serialize;

#[derive(Serialize)]
pub struct MethodAgreement {
    pub agree: bool,
    pub max_abs_difference: f64,
    pub tolerance: f64,
    pub fda_iterations: usize,
    pub fda_converged: bool,
}

#[derive(Serialize)]
pub struct ClearVectorReport {
    pub p_star: Vec<f64>,
    pub equities: Vec<f64>,
    pub defaults: Vec<usize>,
    pub residual: f64,
    pub method: &'static str,
    pub method_agreement: MethodAgreement,
}

#[derive(Serialize)]
pub struct ClearMatrixReport {
    pub rule: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
    /// `[debtor, creditor, amount]` for every positive payment.
    pub matrix: Vec<(usize, usize, f64)>,
    pub total_payments: f64,
    pub system_loss: f64,
    pub residual: f64,
    pub clears: bool,
}

#[derive(Serialize)]
pub struct UniquenessReport {
    pub unique: bool,
    /// Every node reaches an asset holder or a sink (sufficient only).
    pub criterion_lemma4: bool,
    /// Every non-trivial sink component is funded (necessary and sufficient).
    pub criterion_theorem2: bool,
    pub fixed_nodes: Vec<usize>,
    pub free_nodes: Vec<usize>,
    pub stage_trace: Vec<Stage>,
}

#[derive(Serialize)]
pub struct ClearingSetReport {
    pub unique: bool,
    pub p_star: Vec<f64>,
    pub fixed_nodes: Vec<usize>,
    pub free_nodes: Vec<usize>,
    pub free_matrix: Vec<Vec<f64>>,
    pub free_bounds: Vec<f64>,
    /// Per free sink component, the largest feasible free vector on it.
    pub free_extremes: Vec<Vec<f64>>,
    pub samples: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
pub struct ValidateReport {
    pub valid: bool,
    pub n: usize,
    pub arcs: usize,
    pub total_liabilities: f64,
    pub sinks: Vec<usize>,
    pub asset_holders: Vec<usize>,
    pub shocked: bool,
    pub nominal_payments_clear: bool,
}
