use crate::numeric::{sigmoid, sigmoid_diff};

/// Largest change of a vertex's `+1` probability over all configurations of
/// its `degree` neighbors:
///
/// `M(Δ, h, β) = |σ(2βΔ + 2h) − σ(2h − 2βΔ)|`, with `σ` the logistic function.
pub fn influence_bound(degree: usize, h: f64, beta: f64) -> f64 {
    let spread = 2.0 * beta * degree as f64;
    sigmoid_diff(2.0 * h + spread, 2.0 * h - spread).abs()
}

/// `P(σ_v = +1)` given the field `h` and the sum `s` of neighboring spins.
pub fn conditional_plus(h: f64, beta: f64, neighbor_sum: f64) -> f64 {
    sigmoid(2.0 * h + 2.0 * beta * neighbor_sum)
}
