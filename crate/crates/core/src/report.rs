//! Structured record of one numerical certification check.

use std::fmt::Write as _;

/// Outcome of a single inequality/identity check: measured quantities,
/// fitted constants, tolerance and verdict.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub name: String,
    /// (key, value) input summary, serialized as a JSON object in CSV rows.
    pub params: Vec<(String, String)>,
    /// (label, value) measured quantities.
    pub measured: Vec<(String, f64)>,
    /// Fitted lower-rate constant c, when the check fits one.
    pub fitted_c: Option<f64>,
    /// Fitted upper constant C, when the check fits one.
    pub fitted_big_c: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    pub runtime_ms: f64,
}

impl VerificationReport {
    pub fn new(name: &str) -> Self {
        VerificationReport {
            name: name.to_string(),
            params: Vec::new(),
            measured: Vec::new(),
            fitted_c: None,
            fitted_big_c: None,
            tol: 0.0,
            pass: false,
            runtime_ms: 0.0,
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn measure(&mut self, label: &str, value: f64) {
        self.measured.push((label.to_string(), value));
    }

    pub fn measured_value(&self, label: &str) -> Option<f64> {
        self.measured
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| *v)
    }

    pub fn all_finite(&self) -> bool {
        self.measured.iter().all(|(_, v)| v.is_finite())
    }

    fn param_json(&self) -> String {
        let mut s = String::from("{");
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            // finite numbers stay bare, everything else is quoted
            if v.parse::<f64>().map(|x| x.is_finite()).unwrap_or(false) {
                let _ = write!(s, "\"{k}\":{v}");
            } else {
                let _ = write!(s, "\"{k}\":\"{v}\"");
            }
        }
        s.push('}');
        s
    }

    /// One CSV row: check,param_json,measured,fitted_c,fitted_C,tol,pass
    pub fn csv_row(&self) -> String {
        let measured = self
            .measured
            .iter()
            .map(|(k, v)| format!("{k}={v:.6e}"))
            .collect::<Vec<_>>()
            .join("|");
        format!(
            "{},{},{},{},{},{},{}\n",
            self.name,
            self.param_json(),
            measured,
            self.fitted_c.map_or(String::new(), |c| format!("{c:.6e}")),
            self.fitted_big_c
                .map_or(String::new(), |c| format!("{c:.6e}")),
            self.tol,
            if self.pass { "pass" } else { "FAIL" },
        )
    }

    /// Human-readable one-line summary.
    pub fn summary_line(&self) -> String {
        let mut s = format!(
            "[{}] {} (tol {:.2e}, {:.0} ms)",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.tol,
            self.runtime_ms
        );
        for (k, v) in &self.measured {
            let _ = write!(s, " {k}={v:.4e}");
        }
        if let Some(c) = self.fitted_c {
            let _ = write!(s, " c={c:.4e}");
        }
        if let Some(c) = self.fitted_big_c {
            let _ = write!(s, " C={c:.4e}");
        }
        s
    }
}

/// CSV header for report files.
pub const REPORT_CSV_COLUMNS: &str = "check,param_json,measured,fitted_c,fitted_C,tol,pass\n";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_row_shape() {
        let mut r = VerificationReport::new("demo").param("j", 3).param("p", "inf");
        r.measure("ratio", 1.25);
        r.fitted_big_c = Some(2.0);
        r.tol = 0.1;
        r.pass = true;
        let row = r.csv_row();
        assert!(row.starts_with("demo,{\"j\":3;\"p\":\"inf\"},ratio=1.250000e0,"));
        assert!(row.trim_end().ends_with("pass"));
        assert_eq!(row.trim_end().split(',').count(), 7);
    }
}
