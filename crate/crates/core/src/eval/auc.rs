use serde::{Deserialize, Serialize};

use super::EvalError;

/// One point of a few-shot learning curve. `fraction` is a percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub f1: f64,
}

impl CurvePoint {
    pub fn new(fraction: f64, f1: f64) -> Self {
        CurvePoint { fraction, f1 }
    }
}

/// Trapezoidal area under the F1 curve, divided by the fraction span.
pub fn auc(points: &[CurvePoint]) -> Result<f64, EvalError> {
    if points.len() < 2 {
        return Err(EvalError::TooFewPoints(points.len()));
    }
    for p in points {
        if !(0.0..=100.0).contains(&p.fraction) {
            return Err(EvalError::FractionOutOfRange(p.fraction));
        }
    }
    for w in points.windows(2) {
        if w[1].fraction == w[0].fraction {
            return Err(EvalError::DuplicateFraction(w[1].fraction));
        }
        if w[1].fraction < w[0].fraction {
            return Err(EvalError::Unsorted(w[1].fraction, w[0].fraction));
        }
    }
    let area: f64 = points
        .windows(2)
        .map(|w| (w[1].fraction - w[0].fraction) * (w[0].f1 + w[1].f1) / 2.0)
        .sum();
    let span = points[points.len() - 1].fraction - points[0].fraction;
    Ok(area / span)
}

/// Reads `fraction,f1` lines (whitespace also separates). Blank lines and `#`
/// comments are skipped, and a leading header line that does not parse as
/// numbers is tolerated.
pub fn parse_curve(text: &str) -> Result<Vec<CurvePoint>, EvalError> {
    let mut points = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| EvalError::CurveParse {
            line: i + 1,
            message,
        };
        let mut fields: Box<dyn Iterator<Item = &str>> = if line.contains(',') {
            Box::new(line.split(',').map(str::trim))
        } else {
            Box::new(line.split_whitespace())
        };
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err(format!("expected `fraction,f1`, got `{line}`")));
        };
        let a = a.trim_end_matches('%');
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(fraction), Ok(f1)) if fraction.is_finite() && f1.is_finite() => {
                points.push(CurvePoint { fraction, f1 });
            }
            _ if !seen_data => {}
            _ => return Err(err(format!("not a number pair: `{line}`"))),
        }
        seen_data = true;
    }
    Ok(points)
}
