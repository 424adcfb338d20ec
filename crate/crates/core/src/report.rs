//! Check records and number formatting shared by the CLI reports.

use serde::{Deserialize, Serialize};

/// Largest denominator tried by [`rational_annotation`].
pub const MAX_DENOMINATOR: i64 = 64;

/// `v` to 12 significant digits, trailing zeros trimmed.
pub fn sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..=11).contains(&mag) {
        return format!("{v:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `p/q` with the smallest `q <= 64` such that `|v - p/q| <= 1e-9`.
pub fn rational_annotation(v: f64) -> Option<String> {
    if !v.is_finite() {
        return None;
    }
    (1..=MAX_DENOMINATOR).find_map(|q| {
        let p = (v * q as f64).round();
        ((v - p / q as f64).abs() <= 1e-9).then(|| if q == 1 { format!("{p}") } else { format!("{p}/{q}") })
    })
}

/// Display form used in reports: `2.66666666667 (8/3)`.
pub fn bits(v: f64) -> String {
    match rational_annotation(v) {
        Some(r) if r != sig12(v) => format!("{} ({r})", sig12(v)),
        _ => sig12(v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value - target| <= tol`
    Within,
    /// `value >= target - tol`
    AtLeast,
    /// `value <= target + tol`
    AtMost,
}

/// One numeric result with its target, tolerance and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub display: String,
    pub target: f64,
    pub relation: Relation,
    pub tol: f64,
    pub converged: bool,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, target: f64, tol: f64) -> Self {
        let pass = match relation {
            Relation::Within => (value - target).abs() <= tol,
            Relation::AtLeast => value >= target - tol,
            Relation::AtMost => value <= target + tol,
        };
        Self { name: name.into(), value, display: bits(value), target, relation, tol, converged: true, pass }
    }

    pub fn with_converged(mut self, converged: bool) -> Self {
        self.converged = converged;
        self
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self::new(name, v, Relation::Within, 1.0, 0.0)
    }

    /// One line, `PASS name: value (relation target ± tol)`.
    pub fn line(&self) -> String {
        let rel = match self.relation {
            Relation::Within => "=",
            Relation::AtLeast => ">=",
            Relation::AtMost => "<=",
        };
        format!(
            "{} {}: {} ({rel} {} ± {:e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.display,
            bits(self.target),
            self.tol
        )
    }
}

/// What every CLI command prints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    pub results: serde_json::Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    /// Every search behind the results met its stopping rule.
    pub converged: bool,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value, results: serde_json::Value, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        let converged = checks.iter().all(|c| c.converged);
        Self { command: command.into(), config, results, checks, pass, converged }
    }

    pub fn with_converged(mut self, converged: bool) -> Self {
        self.converged &= converged;
        self
    }

    /// 0 on success, 1 on a failed check, 3 when every check passed but a
    /// search stopped on its budget.
    pub fn exit_code(&self) -> i32 {
        match (self.pass, self.converged) {
            (false, _) => 1,
            (true, false) => 3,
            (true, true) => 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_small_rationals() {
        assert_eq!(bits(8.0 / 3.0), "2.66666666667 (8/3)");
        assert_eq!(bits(44.0 / 15.0), "2.93333333333 (44/15)");
        assert_eq!(bits(1.0), "1");
        assert_eq!(bits(0.5), "0.5 (1/2)");
        assert_eq!(rational_annotation(std::f64::consts::PI), None);
        assert_eq!(rational_annotation(-2.0 / 3.0).as_deref(), Some("-2/3"));
    }

    #[test]
    fn check_relations() {
        assert!(Check::new("a", 1.0, Relation::Within, 1.0 + 1e-10, 1e-9).pass);
        assert!(!Check::new("b", 1.0, Relation::AtLeast, 1.1, 1e-3).pass);
        assert!(Check::new("c", 1.0, Relation::AtMost, 1.1, 0.0).pass);
        assert!(Check::flag("d", true).pass && !Check::flag("e", false).pass);
    }
}
