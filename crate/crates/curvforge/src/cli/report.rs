//! Machine-readable run reports. The deterministic body excludes wall-clock
//! data so identical configurations reproduce byte-identical bodies.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// stable identifier tying the check to its rule in the anchor index
    pub anchor: String,
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    pub tolerance: String,
    pub pass: bool,
}

impl CheckRecord {
    pub fn absolute(name: &str, anchor: &str, err: f64, tol: f64) -> CheckRecord {
        CheckRecord {
            name: name.to_string(),
            anchor: anchor.to_string(),
            resolutions: Vec::new(),
            errors: vec![err],
            order: None,
            tolerance: format!("abs <= {tol:e}"),
            pass: err <= tol,
        }
    }

    pub fn order_based(
        name: &str,
        anchor: &str,
        resolutions: &[usize],
        errors: &[f64],
        min_order: f64,
        roundoff_floor: f64,
    ) -> CheckRecord {
        let pts: Vec<(f64, f64)> = resolutions
            .iter()
            .zip(errors)
            .map(|(&n, &e)| (1.0 / n as f64, e))
            .collect();
        let order = crate::util::convergence_order(&pts);
        // errors already at roundoff pass regardless of the slope
        let pass = order >= min_order || errors.iter().all(|&e| e <= roundoff_floor);
        CheckRecord {
            name: name.to_string(),
            anchor: anchor.to_string(),
            resolutions: resolutions.to_vec(),
            errors: errors.to_vec(),
            order: Some(order),
            tolerance: format!("order >= {min_order}"),
            pass,
        }
    }

    pub fn boolean(name: &str, anchor: &str, pass: bool) -> CheckRecord {
        CheckRecord {
            name: name.to_string(),
            anchor: anchor.to_string(),
            resolutions: Vec::new(),
            errors: Vec::new(),
            order: None,
            tolerance: "exact".to_string(),
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Timing {
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub checks: Vec<CheckRecord>,
    pub solver_trace: Vec<String>,
    pub artifacts: Vec<String>,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(config: serde_json::Value) -> RunReport {
        RunReport {
            config,
            checks: Vec::new(),
            solver_trace: Vec::new(),
            artifacts: Vec::new(),
            timing: Timing::default(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Deterministic body: everything except the timing block.
    pub fn body_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            config: &'a serde_json::Value,
            checks: &'a [CheckRecord],
            solver_trace: &'a [String],
            artifacts: &'a [String],
        }
        serde_json::to_string_pretty(&Body {
            config: &self.config,
            checks: &self.checks,
            solver_trace: &self.solver_trace,
            artifacts: &self.artifacts,
        })
        .expect("report serialises")
    }

    pub fn full_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let status = if c.pass { "PASS" } else { "FAIL" };
                let detail = match c.order {
                    Some(o) => format!("order {:.2}", o),
                    None => c
                        .errors
                        .first()
                        .map(|e| format!("err {:.3e}", e))
                        .unwrap_or_default(),
                };
                format!("[{status}] {} ({}) {} [{}]", c.name, c.anchor, detail, c.tolerance)
            })
            .collect()
    }
}
