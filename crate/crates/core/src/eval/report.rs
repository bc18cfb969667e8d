//! Markdown and JSON reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{auc, CurvePoint, EvalResult};

/// F1 across training fractions for one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub system: String,
    pub points: Vec<CurvePoint>,
    pub auc: Option<f64>,
}

impl CurveRow {
    /// AUC is filled in when the points admit one.
    pub fn new(system: impl Into<String>, points: Vec<CurvePoint>) -> Self {
        let auc = auc(&points).ok();
        CurveRow {
            system: system.into(),
            points,
            auc,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    #[serde(default)]
    pub curves: Vec<CurveRow>,
    #[serde(default)]
    pub result: Option<EvalResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coref: Option<EvalResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    fn fractions(&self) -> Vec<f64> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for p in self.curves.iter().flat_map(|c| &c.points) {
            if seen.insert(p.fraction.to_bits()) {
                out.push(p.fraction);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.title);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "\nseed: {seed}");
        }

        if !self.curves.is_empty() {
            self.curve_table(&mut s);
        }
        if let Some(r) = &self.result {
            let _ = writeln!(s, "\n## Scores\n");
            let _ = writeln!(
                s,
                "| Metric | P | R | F1 | TP | FP | FN |\n|---|---:|---:|---:|---:|---:|---:|"
            );
            for (name, r) in [("F1", Some(r)), ("Coref-F1", self.coref.as_ref())] {
                if let Some(r) = r {
                    let _ = writeln!(
                        s,
                        "| {name} | {:.3} | {:.3} | {:.3} | {} | {} | {} |",
                        r.precision, r.recall, r.f1, r.tp, r.fp, r.fn_
                    );
                }
            }
            let _ = writeln!(s, "\n## Per role\n");
            let _ = writeln!(
                s,
                "| Role | TP | FP | FN | Recall |\n|---|---:|---:|---:|---:|"
            );
            for (role, c) in &r.per_role {
                let _ = writeln!(
                    s,
                    "| {role} | {} | {} | {} | {:.3} |",
                    c.tp, c.fp, c.fn_, c.recall
                );
            }
        }
        s
    }

    fn curve_table(&self, s: &mut String) {
        let fractions = self.fractions();
        let _ = writeln!(s, "\n## F1 by training fraction\n");
        let mut header = String::from("| System |");
        let mut rule = String::from("|---|");
        for f in &fractions {
            let _ = write!(header, " {}% |", trim_number(*f));
            rule.push_str("---:|");
        }
        header.push_str(" AUC |");
        rule.push_str("---:|");
        let _ = writeln!(s, "{header}\n{rule}");
        for c in &self.curves {
            let mut line = format!("| {} |", c.system);
            for f in &fractions {
                match c.points.iter().find(|p| p.fraction == *f) {
                    Some(p) => {
                        let _ = write!(line, " {:.2} |", p.f1);
                    }
                    None => line.push_str(" - |"),
                }
            }
            match c.auc {
                Some(a) => {
                    let _ = write!(line, " {a:.2} |");
                }
                None => line.push_str(" - |"),
            }
            let _ = writeln!(s, "{line}");
        }
    }
}

fn trim_number(f: f64) -> String {
    if f.fract() == 0.0 {
        format!("{f:.0}")
    } else {
        let s = format!("{f:.4}");
        s.trim_end_matches('0').to_string()
    }
}
