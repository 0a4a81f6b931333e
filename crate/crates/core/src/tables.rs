//! CSV forms of reputation inputs and classification outputs.
//!
//! Inputs: `node_id,value` (point) or `node_id,p,q` (interval).
//! Outputs: `node_id,grade,class`, with verbatim error rows written as
//! `node_id,ERROR,reputation-value-error`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::classifier::{
    ClassificationOutcome, CooperationClass, Grade, Method, NodeId, ReputationInput,
    ReputationInterval,
};

pub const POINT_HEADER: [&str; 2] = ["node_id", "value"];
pub const INTERVAL_HEADER: [&str; 3] = ["node_id", "p", "q"];
pub const CLASSIFICATION_HEADER: &str = "node_id,grade,class";
pub const ERROR_GRADE: &str = "ERROR";
pub const ERROR_CLASS: &str = "reputation-value-error";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct CsvInputError {
    pub line: u64,
    pub message: String,
}

impl CsvInputError {
    fn new(line: u64, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<T, CsvInputError> {
    let raw = rec.get(idx).unwrap_or_default();
    raw.parse()
        .map_err(|_| CsvInputError::new(line, format!("invalid {name} `{raw}`")))
}

/// Parses a reputation CSV for `method`. Values are not range-checked here;
/// that depends on the classification mode.
pub fn parse_reputation_csv(
    text: &str,
    method: Method,
) -> Result<Vec<(NodeId, ReputationInput)>, CsvInputError> {
    let mut rdr = reader(text);
    let expected: &[&str] = match method {
        Method::Point => &POINT_HEADER,
        Method::Interval => &INTERVAL_HEADER,
    };
    let header = rdr
        .headers()
        .map_err(|e| CsvInputError::new(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(CsvInputError::new(
            1,
            format!(
                "expected header `{}` for {method} input, found `{}`",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CsvInputError::new(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != expected.len() {
            return Err(CsvInputError::new(
                line,
                format!("expected {} fields, found {}", expected.len(), rec.len()),
            ));
        }
        let id: NodeId = parse_field(&rec, 0, "node_id", line)?;
        let input = match method {
            Method::Point => {
                let v: f64 = parse_field(&rec, 1, "value", line)?;
                ReputationInput::Point(v)
            }
            Method::Interval => {
                let p: f64 = parse_field(&rec, 1, "p", line)?;
                let q: f64 = parse_field(&rec, 2, "q", line)?;
                ReputationInput::Interval(ReputationInterval { p, q })
            }
        };
        rows.push((id, input));
    }
    Ok(rows)
}

pub fn format_outcome(outcome: ClassificationOutcome) -> (&'static str, &'static str) {
    match outcome {
        ClassificationOutcome::Graded(g) => (g.as_str(), g.class().as_str()),
        ClassificationOutcome::ReputationValueError => (ERROR_GRADE, ERROR_CLASS),
    }
}

pub fn write_classification_csv(rows: &[(NodeId, ClassificationOutcome)]) -> String {
    let mut out = String::from(CLASSIFICATION_HEADER);
    out.push('\n');
    for &(id, o) in rows {
        let (g, c) = format_outcome(o);
        writeln!(out, "{id},{g},{c}").expect("writing to a String");
    }
    out
}

fn parse_outcome(
    grade: &str,
    class: &str,
    line: u64,
) -> Result<ClassificationOutcome, CsvInputError> {
    if grade == ERROR_GRADE && class == ERROR_CLASS {
        return Ok(ClassificationOutcome::ReputationValueError);
    }
    let g = Grade::ALL
        .into_iter()
        .find(|g| g.as_str() == grade)
        .ok_or_else(|| CsvInputError::new(line, format!("unknown grade `{grade}`")))?;
    let expected: CooperationClass = g.class();
    if expected.as_str() != class {
        return Err(CsvInputError::new(
            line,
            format!("class `{class}` does not match grade {grade}"),
        ));
    }
    Ok(ClassificationOutcome::Graded(g))
}

pub fn parse_classification_csv(
    text: &str,
) -> Result<Vec<(NodeId, ClassificationOutcome)>, CsvInputError> {
    let mut rdr = reader(text);
    let header = rdr
        .headers()
        .map_err(|e| CsvInputError::new(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CLASSIFICATION_HEADER {
        return Err(CsvInputError::new(
            1,
            format!("expected header `{CLASSIFICATION_HEADER}`"),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            CsvInputError::new(e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(CsvInputError::new(
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let id: NodeId = parse_field(&rec, 0, "node_id", line)?;
        rows.push((id, parse_outcome(&rec[1], &rec[2], line)?));
    }
    Ok(rows)
}
