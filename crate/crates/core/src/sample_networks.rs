//! Small hand-built networks with known clearing behaviour.

use nalgebra::{DMatrix, DVector};

use crate::model::FinancialNetwork;

/// Node 0 owes 10 to node 1, node 1 owes 5 to node 0; node 0 holds 3.
/// Dominant clearing vector `(8, 5)`.
pub fn two_node() -> FinancialNetwork {
    FinancialNetwork::from_rows(&[&[0.0, 10.0], &[5.0, 0.0]], &[3.0, 0.0]).expect("valid network")
}

/// Two nodes owing each other 1, node 0 holding `c0`. With `c0 = 0` every
/// `(t, t)`, `t ∈ [0, 1]`, clears.
pub fn ring2(c0: f64) -> FinancialNetwork {
    FinancialNetwork::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]], &[c0, 0.0]).expect("valid network")
}

/// Nodes 0 and 1 are asset-less sinks; node 2 holds `c` and owes `to0` and
/// `to1` to them.
pub fn two_creditors(to0: f64, to1: f64, c: f64) -> FinancialNetwork {
    FinancialNetwork::from_rows(
        &[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[to0, to1, 0.0]],
        &[0.0, 0.0, c],
    )
    .expect("valid network")
}

/// A solvent three-bank cycle.
pub fn balanced_triangle() -> FinancialNetwork {
    FinancialNetwork::from_rows(
        &[&[0.0, 4.0, 1.0], &[2.0, 0.0, 3.0], &[1.0, 1.0, 0.0]],
        &[2.0, 0.0, 3.0],
    )
    .expect("valid network")
}

/// Sixteen nodes arranged so the uniqueness analysis needs three stages.
///
/// * node 0 is the only sink; nodes 1, 2, 3 hold outside assets;
/// * 4 and 5 are funded by 1 and 3 and owe 0 and 2;
/// * 6, 7, 8 are paid by 4 and 5 and owe nothing upstream; 9 owes 6 but
///   nobody pays 9;
/// * 10, 11 are paid by 6 and 8; 12 sits between them;
/// * 13, 14, 15 form an isolated ring with no assets.
///
/// Payments of nodes 0..=12 are the same in every clearing vector; the ring
/// can carry any common amount in `[0, 4]`.
pub fn staged_uniqueness() -> FinancialNetwork {
    let arcs: &[(usize, usize, f64)] = &[
        (1, 0, 10.0),
        (1, 4, 5.0),
        (2, 0, 5.0),
        (2, 1, 3.0),
        (3, 2, 4.0),
        (3, 5, 5.0),
        (4, 0, 6.0),
        (4, 6, 4.0),
        (4, 7, 3.0),
        (5, 2, 5.0),
        (5, 7, 2.0),
        (5, 8, 4.0),
        (6, 7, 3.0),
        (6, 10, 4.0),
        (7, 8, 2.0),
        (8, 6, 2.0),
        (8, 11, 3.0),
        (9, 6, 5.0),
        (10, 11, 3.0),
        (10, 12, 2.0),
        (11, 10, 2.0),
        (12, 11, 3.0),
        (13, 14, 4.0),
        (14, 15, 4.0),
        (15, 13, 4.0),
    ];
    let n = 16;
    let mut m = DMatrix::zeros(n, n);
    for &(i, j, v) in arcs {
        m[(i, j)] = v;
    }
    let mut c = DVector::zeros(n);
    c[1] = 6.0;
    c[2] = 5.0;
    c[3] = 7.0;
    FinancialNetwork::unshocked(m, c).expect("valid network")
}
