//! Brute-force reference computations for the classification metrics, the
//! profit matrix and single-layer network scores.

#![allow(dead_code)]

/// (accuracy, recall, specificity) straight from the four counts, with an
/// empty class scoring 1.
pub fn rates(tp: u64, fn_: u64, fp: u64, tn: u64) -> (f64, f64, f64) {
    let (tp, fn_, fp, tn) = (tp as f64, fn_ as f64, fp as f64, tn as f64);
    let accuracy = (tp + tn) / (tp + tn + fp + fn_);
    let recall = if tp + fn_ == 0.0 { 1.0 } else { tp / (tp + fn_) };
    let specificity = if tn + fp == 0.0 { 1.0 } else { tn / (tn + fp) };
    (accuracy, recall, specificity)
}

/// Counts by walking (actual_positive, predicted_positive) pairs.
pub fn count(pairs: &[(bool, bool)]) -> (u64, u64, u64, u64) {
    let mut m = [[0u64; 2]; 2];
    for &(actual, predicted) in pairs {
        m[actual as usize][predicted as usize] += 1;
    }
    (m[1][1], m[1][0], m[0][1], m[0][0])
}

/// Profit matrix lookup: rows are actual (negative, positive), columns are
/// predicted (negative, positive).
pub fn profit(actual_positive: bool, predicted_positive: bool, loan: f64, interest: f64) -> f64 {
    let matrix = [[loan, -loan], [-interest, interest]];
    matrix[actual_positive as usize][predicted_positive as usize]
}

/// Score of a network with only input-to-output and bias-to-output links.
pub fn single_layer_score(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    let z: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
    1.0 / (1.0 + (-4.9 * z).exp())
}
