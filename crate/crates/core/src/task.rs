//! One optimization task per material: objectives, feasibility and
//! normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::oxley::{solve_cut, Bound, CutOutputs, ProcessParams, PROCESS_BOUNDS};

/// Number of objectives.
pub const N_OBJECTIVES: usize = 4;

/// Achieved production-time range used for normalization, s.
pub const TIME_RANGE: (f64, f64) = (200.0, 1.0e7);
/// Achieved tool-wear range used for normalization.
pub const WEAR_RANGE: (f64, f64) = (110.0, 7.72e223);
/// Violation reported when the cut solver fails.
pub const VIOLATION_SENTINEL: f64 = f64::MAX;

/// Tool wear reported when the formula overflows.
pub const WEAR_SENTINEL: f64 = f64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub material: MaterialParams,
    /// Length of the stock, m.
    pub total_length: f64,
    /// Depth of material removed in total.
    pub total_depth: f64,
    /// Feasible cutting speeds lie strictly below this, m/s.
    pub speed_limit: f64,
    /// Feasible force magnitudes lie strictly below this, N.
    pub force_limit: f64,
}

impl TaskSpec {
    pub fn new(material: MaterialParams) -> Self {
        TaskSpec {
            material,
            total_length: 1.0,
            total_depth: 1.0,
            speed_limit: 50.0,
            force_limit: 500.0,
        }
    }

    pub fn bounds(&self) -> &'static [Bound] {
        &PROCESS_BOUNDS
    }

    pub fn name(&self) -> &str {
        &self.material.name
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        for (what, v) in [
            ("total_length", self.total_length),
            ("total_depth", self.total_depth),
            ("speed_limit", self.speed_limit),
            ("force_limit", self.force_limit),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{what} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// Evaluates one parameter set; see [`evaluate`].
    pub fn evaluate(&self, proc: &ProcessParams) -> EvalResult {
        evaluate(self, proc)
    }
}

/// The four minimization objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub production_time: f64,
    pub tool_wear: f64,
    pub abs_fc: f64,
    pub abs_ft: f64,
}

impl ObjectiveVector {
    pub fn to_array(&self) -> [f64; N_OBJECTIVES] {
        [self.production_time, self.tool_wear, self.abs_fc, self.abs_ft]
    }

    pub fn from_array(v: [f64; N_OBJECTIVES]) -> Self {
        ObjectiveVector {
            production_time: v[0],
            tool_wear: v[1],
            abs_fc: v[2],
            abs_ft: v[3],
        }
    }
}

/// Outcome of one model evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub feasible: bool,
    /// Present iff `feasible`.
    pub objectives: Option<ObjectiveVector>,
    /// Absent when the cut solver failed.
    pub outputs: Option<CutOutputs>,
    /// Sum of excesses over the limits; zero iff feasible.
    pub violation: f64,
}

impl EvalResult {
    /// Result of a failed solve.
    pub fn failed() -> Self {
        EvalResult {
            feasible: false,
            objectives: None,
            outputs: None,
            violation: VIOLATION_SENTINEL,
        }
    }
}

/// `(total_length / cutting_speed) * n_layers`.
pub fn production_time(cutting_speed: f64, n_layers: u64, total_length: f64) -> f64 {
    total_length / cutting_speed * n_layers as f64
}

/// `(V e^|Fc| + 0.1 V e^|Ft|) * n_layers`; overflow yields [`WEAR_SENTINEL`].
pub fn tool_wear(cutting_speed: f64, fc: f64, ft: f64, n_layers: u64) -> f64 {
    let w = (cutting_speed * fc.abs().exp() + 0.1 * cutting_speed * ft.abs().exp()) * n_layers as f64;
    if w.is_finite() {
        w
    } else {
        WEAR_SENTINEL
    }
}

/// Feasibility flag and violation magnitude.
pub fn is_feasible(proc: &ProcessParams, outputs: &CutOutputs, task: &TaskSpec) -> (bool, f64) {
    let excess = |value: f64, limit: f64| (value - limit).max(0.0);
    let violation = excess(proc.cutting_speed, task.speed_limit)
        + excess(outputs.fc.abs(), task.force_limit)
        + excess(outputs.ft.abs(), task.force_limit);
    let feasible = proc.cutting_speed < task.speed_limit
        && outputs.fc.abs() < task.force_limit
        && outputs.ft.abs() < task.force_limit;
    // a value exactly at a limit is infeasible with zero excess
    let violation = if feasible { 0.0 } else { violation.max(f64::MIN_POSITIVE) };
    (feasible, violation)
}

/// Solves the cut and composes the objectives. Solver failures produce an
/// infeasible result carrying [`VIOLATION_SENTINEL`].
pub fn evaluate(task: &TaskSpec, proc: &ProcessParams) -> EvalResult {
    let outputs = match solve_cut(&task.material, proc, task.total_depth) {
        Ok(o) => o,
        Err(_) => return EvalResult::failed(),
    };
    let (feasible, violation) = is_feasible(proc, &outputs, task);
    let objectives = feasible.then(|| ObjectiveVector {
        production_time: production_time(proc.cutting_speed, outputs.n_layers, task.total_length),
        tool_wear: tool_wear(proc.cutting_speed, outputs.fc, outputs.ft, outputs.n_layers),
        abs_fc: outputs.fc.abs(),
        abs_ft: outputs.ft.abs(),
    });
    EvalResult {
        feasible,
        objectives,
        outputs: Some(outputs),
        violation,
    }
}

/// Maps objectives into the unit box: time and wear on a log scale between
/// their achieved ranges, forces linearly over `[0, 500]`, all clamped.
pub fn normalize(obj: &ObjectiveVector) -> [f64; N_OBJECTIVES] {
    let log_scaled = |v: f64, (lo, hi): (f64, f64)| {
        let (lo, hi) = (lo.ln(), hi.ln());
        ((v.ln() - lo) / (hi - lo)).clamp(0.0, 1.0)
    };
    let linear = |v: f64| (v / 500.0).clamp(0.0, 1.0);
    [
        log_scaled(obj.production_time, TIME_RANGE),
        log_scaled(obj.tool_wear, WEAR_RANGE),
        linear(obj.abs_fc),
        linear(obj.abs_ft),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oxley::CUTTING_WIDTH;

    fn outputs(fc: f64, ft: f64) -> CutOutputs {
        CutOutputs {
            shear_angle: 0.4,
            fc,
            ft,
            chip_thickness: 1e-4,
            n_layers: 10,
        }
    }

    #[test]
    fn production_time_endpoints() {
        assert_eq!(production_time(5.0, 1000, 1.0), 200.0);
        assert!((production_time(0.1, 1_000_000, 1.0) - 1.0e7).abs() < 1e-6);
        assert_eq!(production_time(1.0, 1, 1.0), 1.0);
    }

    #[test]
    fn tool_wear_endpoints() {
        assert!((tool_wear(0.1, 0.0, 0.0, 1000) - 110.0).abs() < 1e-9);
        let top = tool_wear(5.0, 500.0, 500.0, 1_000_000);
        assert!(((top - 7.72e223) / 7.72e223).abs() < 1e-3, "{top}");
        assert!((tool_wear(2.5, 0.0, 0.0, 40) - 1.1 * 2.5 * 40.0).abs() < 1e-9);
        assert_eq!(tool_wear(1.0, 1e4, 0.0, 1), WEAR_SENTINEL);
    }

    #[test]
    fn feasibility_rules() {
        let task = TaskSpec::new(MaterialParams::steel());
        let proc = ProcessParams::new(5.0, 0.0, 1e-4);
        assert_eq!(is_feasible(&proc, &outputs(100.0, 50.0), &task), (true, 0.0));
        assert_eq!(is_feasible(&proc, &outputs(600.0, 50.0), &task), (false, 100.0));
        assert_eq!(is_feasible(&proc, &outputs(-600.0, 50.0), &task), (false, 100.0));
        let fast = ProcessParams {
            cutting_speed: 60.0,
            cutting_angle: 0.0,
            cutting_depth: 1e-4,
            cutting_width: CUTTING_WIDTH,
        };
        assert_eq!(is_feasible(&fast, &outputs(0.0, 0.0), &task), (false, 10.0));
        let (ok, v) = is_feasible(&proc, &outputs(500.0, 0.0), &task);
        assert!(!ok && v > 0.0);
    }

    #[test]
    fn normalize_endpoints() {
        let lo = ObjectiveVector::from_array([200.0, 110.0, 0.0, 0.0]);
        assert_eq!(normalize(&lo), [0.0; 4]);
        let hi = ObjectiveVector::from_array([1.0e7, 7.72e223, 500.0, 500.0]);
        let n = normalize(&hi);
        for v in n {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let mid = normalize(&ObjectiveVector::from_array([1e3, 1e5, 250.0, 250.0]));
        assert_eq!(&mid[2..], &[0.5, 0.5]);
    }

    #[test]
    fn evaluate_composes_golden_record() {
        let task = TaskSpec::new(MaterialParams::steel());
        let proc = ProcessParams::new(2.0, 0.0, 1.0e-4);
        let r = task.evaluate(&proc);
        let out = solve_cut(&task.material, &proc, 1.0).unwrap();
        let obj = r.objectives.unwrap();
        assert!(r.feasible && r.violation == 0.0);
        assert_eq!(obj.production_time, 0.5 * 10_000.0);
        assert_eq!(obj.tool_wear, tool_wear(2.0, out.fc, out.ft, 10_000));
        assert_eq!(obj.abs_fc, out.fc.abs());
    }

    #[test]
    fn evaluate_gates_infeasible_forces() {
        let task = TaskSpec::new(MaterialParams::inconel_718());
        let r = task.evaluate(&ProcessParams::new(4.0, -0.3, 1.0e-3));
        assert!(!r.feasible);
        assert!(r.objectives.is_none());
        assert!((r.violation - (r.outputs.unwrap().fc - 500.0)).abs() < 1e-9);
    }

    #[test]
    fn production_time_minimum_is_reached() {
        let task = TaskSpec::new(MaterialParams::tungsten_alloy());
        let r = task.evaluate(&ProcessParams::new(5.0, 0.0, 1.0e-3));
        let n = r.outputs.expect("solver converges").n_layers;
        assert_eq!(n, 1000);
        assert_eq!(production_time(5.0, n, 1.0), 200.0);
    }
}
