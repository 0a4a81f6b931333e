//! Bundled golden tables: the eight-node example network graded under
//! `Q(50, 70)` with both the point-valued and interval-valued methods.

use crate::classifier::{
    classify_batch, ClassificationMode, ClassificationOutcome, Method, NodeId, QueryRange,
    ReputationInput, ReputationInterval,
};
use crate::tables::{parse_reputation_csv, write_classification_csv};

pub const POINT_INPUT_CSV: &str = include_str!("../fixtures/point_input.csv");
pub const POINT_EXPECTED_CSV: &str = include_str!("../fixtures/point_expected.csv");
pub const INTERVAL_INPUT_CSV: &str = include_str!("../fixtures/interval_input.csv");
pub const INTERVAL_EXPECTED_CSV: &str = include_str!("../fixtures/interval_expected.csv");

pub const GOLDEN_RANGE: (f64, f64) = (50.0, 70.0);

pub fn golden_range() -> QueryRange {
    QueryRange::new(GOLDEN_RANGE.0, GOLDEN_RANGE.1).expect("constant range")
}

pub fn point_rows() -> Vec<(NodeId, f64)> {
    parse_reputation_csv(POINT_INPUT_CSV, Method::Point)
        .expect("bundled fixture parses")
        .into_iter()
        .map(|(id, input)| match input {
            ReputationInput::Point(v) => (id, v),
            ReputationInput::Interval(_) => unreachable!("point fixture"),
        })
        .collect()
}

pub fn interval_rows() -> Vec<(NodeId, ReputationInterval)> {
    parse_reputation_csv(INTERVAL_INPUT_CSV, Method::Interval)
        .expect("bundled fixture parses")
        .into_iter()
        .map(|(id, input)| match input {
            ReputationInput::Interval(iv) => (id, iv),
            ReputationInput::Point(_) => unreachable!("interval fixture"),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub expected: String,
    pub actual: String,
}

impl GoldenCheck {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

fn run(name: &'static str, input: &str, expected: &str, method: Method) -> GoldenCheck {
    let rows = parse_reputation_csv(input, method).expect("bundled fixture parses");
    let graded: Vec<(NodeId, ClassificationOutcome)> =
        classify_batch(&rows, golden_range(), ClassificationMode::Reconciled)
            .into_iter()
            .map(|(id, r)| (id, r.expect("fixture values are in range")))
            .collect();
    GoldenCheck {
        name,
        expected: expected.to_owned(),
        actual: write_classification_csv(&graded),
    }
}

/// Both golden reproductions under reconciled mode.
pub fn verify_golden_tables() -> Vec<GoldenCheck> {
    vec![
        run(
            "point-valued (Q(50,70))",
            POINT_INPUT_CSV,
            POINT_EXPECTED_CSV,
            Method::Point,
        ),
        run(
            "interval-valued (Q(50,70))",
            INTERVAL_INPUT_CSV,
            INTERVAL_EXPECTED_CSV,
            Method::Interval,
        ),
    ]
}
