//! Hypervolume, computational effort and adaption-cost aggregates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact hypervolume dominated by `front` with respect to `reference`.
///
/// Points that do not strictly dominate the reference in every coordinate
/// contribute nothing. Uses recursive slicing along the last coordinate with a
/// staircase sweep in two dimensions.
pub fn hypervolume(front: &[Vec<f64>], reference: &[f64]) -> f64 {
    let d = reference.len();
    let mut pts: Vec<Vec<f64>> = front
        .iter()
        .filter(|p| p.len() == d && p.iter().zip(reference).all(|(x, r)| x < r))
        .cloned()
        .collect();
    if pts.is_empty() || d == 0 {
        return 0.0;
    }
    slice_volume(&mut pts, reference)
}

/// [`hypervolume`] against the unit reference point `(1, ..., 1)`.
pub fn hypervolume_unit(front: &[Vec<f64>]) -> f64 {
    match front.first() {
        Some(p) => hypervolume(front, &vec![1.0; p.len()]),
        None => 0.0,
    }
}

// pts non-empty, each strictly below `reference`
fn slice_volume(pts: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    let d = reference.len();
    match d {
        1 => reference[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => {
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let mut area = 0.0;
            let mut floor = reference[1];
            for p in pts.iter() {
                if p[1] < floor {
                    area += (reference[0] - p[0]) * (floor - p[1]);
                    floor = p[1];
                }
            }
            area
        }
        _ => {
            let last = d - 1;
            pts.sort_by(|a, b| a[last].total_cmp(&b[last]));
            let mut volume = 0.0;
            let mut layer: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
            for i in 0..pts.len() {
                let projected = pts[i][..last].to_vec();
                if !layer.iter().any(|q| weakly_dominates(q, &projected)) {
                    layer.retain(|q| !weakly_dominates(&projected, q));
                    layer.push(projected);
                }
                let top = if i + 1 < pts.len() { pts[i + 1][last] } else { reference[last] };
                let depth = top - pts[i][last];
                if depth > 0.0 {
                    let mut work = layer.clone();
                    volume += depth * slice_volume(&mut work, &reference[..last]);
                }
            }
            volume
        }
    }
}

fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Koza's minimum computational effort.
///
/// `checkpoints[r]` is the evaluation count at which run `r` first met its
/// success criterion, or `None` if it never did. With `P(k)` the fraction of
/// runs succeeded by `k`, `R(k) = ceil(ln(1 - z) / ln(1 - P(k)))` (1 when
/// `P(k) = 1`) and the effort is the minimum of `k * R(k)` over checkpoints
/// with `P(k) > 0`. Returns `Ok(None)` when no run succeeded.
pub fn computational_effort(checkpoints: &[Option<u64>], granularity: u64, z: f64) -> Result<Option<u64>> {
    if granularity == 0 {
        return Err(Error::Domain("checkpoint granularity must be positive".into()));
    }
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::Domain(format!("target probability {z} must lie in (0, 1)")));
    }
    if checkpoints.is_empty() {
        return Err(Error::Domain("no runs".into()));
    }
    let mut succeeded: Vec<u64> = checkpoints.iter().flatten().copied().collect();
    if let Some(bad) = succeeded.iter().find(|&&k| k == 0 || k % granularity != 0) {
        return Err(Error::Domain(format!(
            "checkpoint {bad} is not a positive multiple of {granularity}"
        )));
    }
    succeeded.sort_unstable();
    let total = checkpoints.len() as f64;
    let mut best: Option<u64> = None;
    // k * R(k) only changes at success checkpoints, where its minimum lies
    for (i, &k) in succeeded.iter().enumerate() {
        if succeeded.get(i + 1) == Some(&k) {
            continue;
        }
        let p = (i + 1) as f64 / total;
        let effort = k.saturating_mul(independent_runs(p, z));
        best = Some(best.map_or(effort, |b| b.min(effort)));
    }
    Ok(best)
}

/// Runs needed to succeed at least once with probability `z`, each run
/// succeeding with probability `p`.
pub fn independent_runs(p: f64, z: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let r = (1.0 - z).ln() / (1.0 - p).ln();
    // integer-valued ratios must not round up through representation error
    (r - 1.0e-9).ceil().max(1.0) as u64
}

/// Worst, average and best cost over a set of cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostAggregate {
    pub worst: f64,
    pub average: f64,
    pub best: f64,
}

/// Aggregates defined costs: max, arithmetic mean, and min.
pub fn cost_aggregates(costs: &[f64]) -> Result<CostAggregate> {
    if costs.is_empty() {
        return Err(Error::Domain("cost aggregates need at least one cell".into()));
    }
    let worst = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let average = costs.iter().sum::<f64>() / costs.len() as f64;
    Ok(CostAggregate { worst, average, best })
}

/// Adaption costs between tasks. Rows are targets, columns sources; the
/// diagonal and cells without any successful run are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub targets: Vec<String>,
    pub sources: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl CostMatrix {
    pub fn defined(&self) -> Vec<f64> {
        self.cells.iter().flatten().flatten().copied().collect()
    }

    pub fn aggregates(&self) -> Result<CostAggregate> {
        cost_aggregates(&self.defined())
    }
}

/// `fraction * reference_hv`.
pub fn success_threshold(reference_hv: f64, fraction: f64) -> Result<f64> {
    if !(reference_hv > 0.0 && reference_hv <= 1.0) {
        return Err(Error::Domain(format!("reference hypervolume {reference_hv} outside (0, 1]")));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Domain(format!("threshold fraction {fraction} outside (0, 1]")));
    }
    Ok(fraction * reference_hv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singletons() {
        assert_eq!(hypervolume_unit(&[vec![0.0; 4]]), 1.0);
        assert_eq!(hypervolume_unit(&[vec![0.5; 4]]), 0.0625);
        assert_eq!(hypervolume_unit(&[]), 0.0);
        assert_eq!(hypervolume_unit(&[vec![1.0, 0.0, 0.0, 0.0]]), 0.0);
    }

    #[test]
    fn two_boxes_by_inclusion_exclusion() {
        let front = [vec![0.2, 0.8, 0.5, 0.5], vec![0.8, 0.2, 0.5, 0.5]];
        assert!((hypervolume_unit(&front) - 0.07).abs() < 1e-15);
    }

    #[test]
    fn dominated_and_duplicate_points_change_nothing() {
        let base = vec![vec![0.1, 0.5, 0.3], vec![0.4, 0.2, 0.6], vec![0.7, 0.1, 0.2]];
        let h = hypervolume_unit(&base);
        let mut more = base.clone();
        more.push(vec![0.5, 0.6, 0.7]);
        more.push(base[1].clone());
        assert!((hypervolume_unit(&more) - h).abs() < 1e-15);
    }

    #[test]
    fn effort_hand_cases() {
        let all_first = vec![Some(100); 100];
        assert_eq!(computational_effort(&all_first, 100, 0.99).unwrap(), Some(100));
        let half: Vec<Option<u64>> = (0..10).map(|i| (i % 2 == 0).then_some(100)).collect();
        assert_eq!(computational_effort(&half, 100, 0.99).unwrap(), Some(700));
        assert_eq!(computational_effort(&[None, None], 100, 0.99).unwrap(), None);
        assert!(computational_effort(&[Some(150)], 100, 0.99).is_err());
    }

    #[test]
    fn effort_picks_best_checkpoint() {
        // P(100) = 0.5 -> 700; P(300) = 1 -> 300
        let runs = [Some(100), Some(300), Some(100), Some(300)];
        assert_eq!(computational_effort(&runs, 100, 0.99).unwrap(), Some(300));
    }

    #[test]
    fn integer_run_ratio_is_exact() {
        assert_eq!(independent_runs(0.9, 0.99), 2);
        assert_eq!(independent_runs(0.5, 0.99), 7);
        assert_eq!(independent_runs(1.0, 0.99), 1);
    }

    #[test]
    fn aggregates() {
        let a = cost_aggregates(&[200.0, 400.0, 600.0, 800.0]).unwrap();
        assert_eq!((a.worst, a.average, a.best), (800.0, 500.0, 200.0));
        let one = cost_aggregates(&[300.0]).unwrap();
        assert_eq!((one.worst, one.average, one.best), (300.0, 300.0, 300.0));
        assert!(cost_aggregates(&[]).is_err());
    }

    #[test]
    fn baseline_adaption_table() {
        let n = None;
        let m = CostMatrix {
            targets: vec![],
            sources: vec![],
            cells: vec![
                vec![n, Some(200.0), Some(800.0), Some(1000.0)],
                vec![Some(100.0), n, Some(200.0), Some(600.0)],
                vec![Some(300.0), Some(500.0), n, Some(700.0)],
                vec![Some(400.0), Some(400.0), Some(500.0), n],
            ],
        };
        let a = m.aggregates().unwrap();
        assert_eq!((a.worst, a.average, a.best), (1000.0, 475.0, 100.0));
    }

    #[test]
    fn thresholds() {
        assert!((success_threshold(0.8891, 0.99).unwrap() - 0.880209).abs() < 1e-12);
        assert!((success_threshold(0.9144, 0.99).unwrap() - 0.905256).abs() < 1e-12);
        assert_eq!(success_threshold(0.7, 1.0).unwrap(), 0.7);
        assert!(success_threshold(0.0, 0.99).is_err());
    }
}
