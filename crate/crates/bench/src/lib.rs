//! Deterministic fixtures shared by the benchmarks.

/// `n` mutually non-dominated points on the unit simplex in `d` dimensions,
/// spread by an additive recurrence so no two coincide.
pub fn simplex_front(n: usize, d: usize) -> Vec<Vec<f64>> {
    let alpha: Vec<f64> = (1..=d).map(|k| (k as f64 * 2.0f64.sqrt()).fract()).collect();
    (1..=n)
        .map(|i| {
            let raw: Vec<f64> = alpha.iter().map(|a| (i as f64 * a).fract() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|v| v / sum).collect()
        })
        .collect()
}
