//! Grade a node's reputation against a query range.
//!
//! Two methods are supported: point-valued (a single scalar reputation) and
//! interval-valued (a `[p, q]` range observed over several epochs). Each has
//! two modes:
//!
//! * [`ClassificationMode::Verbatim`] follows the original branch structure
//!   literally, unreachable branches and all. It can yield
//!   [`ClassificationOutcome::ReputationValueError`].
//! * [`ClassificationMode::Reconciled`] is a total, monotone rule that agrees
//!   with the published classification tables. It never yields the error
//!   outcome; out-of-domain inputs are rejected with [`ClassifyError`].
//!
//! The two interval modes genuinely disagree: the literal branches send any
//! interval whose lower bound exceeds `y` to the error outcome, while the
//! tables grade such nodes `certain`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest reputation on the cooperativeness scale.
pub const MINR: f64 = 0.0;
/// Highest reputation on the cooperativeness scale.
pub const MAXR: f64 = 100.0;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("reputation {0} outside [0, 100]")]
    ReputationOutOfRange(f64),
    #[error("invalid reputation interval [{p}, {q}]: need 0 <= p <= q <= 100")]
    InvalidInterval { p: f64, q: f64 },
    #[error("invalid query range Q({x}, {y}): need 0 <= x <= y <= 100")]
    InvalidRange { x: f64, y: f64 },
}

fn in_scale(v: f64) -> bool {
    (MINR..=MAXR).contains(&v)
}

/// A validated scalar reputation on `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Reputation(f64);

impl Reputation {
    pub fn new(value: f64) -> Result<Self, ClassifyError> {
        if in_scale(value) {
            Ok(Self(value))
        } else {
            Err(ClassifyError::ReputationOutOfRange(value))
        }
    }

    /// Clamps into the scale. NaN maps to [`MINR`].
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Self(MINR)
        } else {
            Self(value.clamp(MINR, MAXR))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Reputation {
    type Error = ClassifyError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Reputation> for f64 {
    fn from(r: Reputation) -> f64 {
        r.0
    }
}

/// Reputation observed as a range `[p, q]`.
///
/// Fields are public so verbatim classification can be fed arbitrary reals;
/// use [`ReputationInterval::new`] to get a checked value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReputationInterval {
    pub p: f64,
    pub q: f64,
}

impl ReputationInterval {
    pub fn new(p: f64, q: f64) -> Result<Self, ClassifyError> {
        let iv = Self { p, q };
        if iv.is_valid() {
            Ok(iv)
        } else {
            Err(ClassifyError::InvalidInterval { p, q })
        }
    }

    pub fn is_valid(&self) -> bool {
        in_scale(self.p) && in_scale(self.q) && self.p <= self.q
    }
}

/// The `Q(x, y)` thresholds. Invariant: `0 <= x <= y <= 100`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct QueryRange {
    x: f64,
    y: f64,
}

impl QueryRange {
    pub fn new(x: f64, y: f64) -> Result<Self, ClassifyError> {
        if in_scale(x) && in_scale(y) && x <= y {
            Ok(Self { x, y })
        } else {
            Err(ClassifyError::InvalidRange { x, y })
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }
}

impl TryFrom<(f64, f64)> for QueryRange {
    type Error = ClassifyError;
    fn try_from((x, y): (f64, f64)) -> Result<Self, Self::Error> {
        Self::new(x, y)
    }
}

impl From<QueryRange> for (f64, f64) {
    fn from(r: QueryRange) -> Self {
        (r.x, r.y)
    }
}

/// Ordered `LOW < MED < HIGH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Grade {
    Low,
    Med,
    High,
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::Low, Grade::Med, Grade::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::High => "HIGH",
            Grade::Med => "MED",
            Grade::Low => "LOW",
        }
    }

    pub fn class(self) -> CooperationClass {
        grade_to_class(self)
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CooperationClass {
    NotPossible,
    Possible,
    Certain,
}

impl CooperationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CooperationClass::Certain => "certain",
            CooperationClass::Possible => "possible",
            CooperationClass::NotPossible => "not-possible",
        }
    }
}

impl fmt::Display for CooperationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn grade_to_class(g: Grade) -> CooperationClass {
    match g {
        Grade::High => CooperationClass::Certain,
        Grade::Med => CooperationClass::Possible,
        Grade::Low => CooperationClass::NotPossible,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassificationOutcome {
    Graded(Grade),
    /// Verbatim mode only: no branch matched.
    ReputationValueError,
}

impl ClassificationOutcome {
    pub fn grade(self) -> Option<Grade> {
        match self {
            ClassificationOutcome::Graded(g) => Some(g),
            ClassificationOutcome::ReputationValueError => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassificationMode {
    Verbatim,
    #[default]
    Reconciled,
}

impl FromStr for ClassificationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "verbatim" => Ok(Self::Verbatim),
            "reconciled" => Ok(Self::Reconciled),
            other => Err(format!(
                "unknown mode `{other}` (expected verbatim|reconciled)"
            )),
        }
    }
}

impl fmt::Display for ClassificationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Verbatim => "verbatim",
            Self::Reconciled => "reconciled",
        })
    }
}

/// Point-valued or interval-valued grading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Point,
    Interval,
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "point" => Ok(Self::Point),
            "interval" => Ok(Self::Interval),
            other => Err(format!(
                "unknown method `{other}` (expected point|interval)"
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Point => "point",
            Self::Interval => "interval",
        })
    }
}

/// Grade a scalar reputation.
///
/// Reconciled: `HIGH` iff `y <= r <= 100`, `MED` iff `x <= r < y`, `LOW` iff
/// `0 <= r < x`. Verbatim accepts any real and keeps the literal branch order,
/// so `r = 0` is an error and `r > 100` with `r >= x` is `MED`.
pub fn classify_point(
    r: f64,
    range: QueryRange,
    mode: ClassificationMode,
) -> Result<ClassificationOutcome, ClassifyError> {
    let (x, y) = (range.x, range.y);
    match mode {
        ClassificationMode::Reconciled => {
            let r = Reputation::new(r)?.value();
            let g = if r >= y {
                Grade::High
            } else if r >= x {
                Grade::Med
            } else {
                Grade::Low
            };
            Ok(ClassificationOutcome::Graded(g))
        }
        ClassificationMode::Verbatim => {
            let out = if r >= x && r >= y && r <= MAXR {
                ClassificationOutcome::Graded(Grade::High)
            } else if r >= x {
                ClassificationOutcome::Graded(Grade::Med)
            } else if r > MINR && r < x {
                ClassificationOutcome::Graded(Grade::Low)
            } else {
                ClassificationOutcome::ReputationValueError
            };
            Ok(out)
        }
    }
}

/// Grade an interval reputation.
///
/// Reconciled: `HIGH` iff `p >= x`, `MED` iff `p < x <= q`, `LOW` iff `q < x`;
/// `y` does not participate. Verbatim mirrors the literal branches, reading
/// the upper bound of the `MED` guard as `y`.
pub fn classify_interval(
    iv: ReputationInterval,
    range: QueryRange,
    mode: ClassificationMode,
) -> Result<ClassificationOutcome, ClassifyError> {
    let (x, y) = (range.x, range.y);
    let ReputationInterval { p, q } = iv;
    match mode {
        ClassificationMode::Reconciled => {
            if !iv.is_valid() {
                return Err(ClassifyError::InvalidInterval { p, q });
            }
            let g = if p >= x {
                Grade::High
            } else if q >= x {
                Grade::Med
            } else {
                Grade::Low
            };
            Ok(ClassificationOutcome::Graded(g))
        }
        ClassificationMode::Verbatim => {
            let p_in = p >= x && p <= y;
            let out = if p_in && (q >= x && q <= MAXR) {
                ClassificationOutcome::Graded(Grade::High)
            } else if p_in || (q >= x && q <= y) {
                ClassificationOutcome::Graded(Grade::Med)
            } else if p < MINR || q < MINR {
                ClassificationOutcome::Graded(Grade::Low)
            } else {
                ClassificationOutcome::ReputationValueError
            };
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReputationInput {
    Point(f64),
    Interval(ReputationInterval),
}

impl ReputationInput {
    pub fn method(&self) -> Method {
        match self {
            ReputationInput::Point(_) => Method::Point,
            ReputationInput::Interval(_) => Method::Interval,
        }
    }
}

pub fn classify(
    input: ReputationInput,
    range: QueryRange,
    mode: ClassificationMode,
) -> Result<ClassificationOutcome, ClassifyError> {
    match input {
        ReputationInput::Point(r) => classify_point(r, range, mode),
        ReputationInput::Interval(iv) => classify_interval(iv, range, mode),
    }
}

/// Classify rows independently, keeping input order. A bad row does not stop
/// the rest.
pub fn classify_batch(
    inputs: &[(NodeId, ReputationInput)],
    range: QueryRange,
    mode: ClassificationMode,
) -> Vec<(NodeId, Result<ClassificationOutcome, ClassifyError>)> {
    inputs
        .iter()
        .map(|&(id, input)| (id, classify(input, range, mode)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    use ClassificationMode::{Reconciled, Verbatim};
    use ClassificationOutcome::{Graded, ReputationValueError};

    fn q(x: f64, y: f64) -> QueryRange {
        QueryRange::new(x, y).unwrap()
    }

    fn iv(p: f64, q: f64) -> ReputationInterval {
        ReputationInterval::new(p, q).unwrap()
    }

    #[test]
    fn point_examples() {
        let r = q(50.0, 70.0);
        assert_eq!(classify_point(90.0, r, Reconciled), Ok(Graded(Grade::High)));
        assert_eq!(classify_point(56.0, r, Reconciled), Ok(Graded(Grade::Med)));
        assert_eq!(classify_point(46.0, r, Reconciled), Ok(Graded(Grade::Low)));
        assert_eq!(classify_point(0.0, r, Verbatim), Ok(ReputationValueError));
        for mode in [Reconciled, Verbatim] {
            assert_eq!(classify_point(100.0, r, mode), Ok(Graded(Grade::High)));
        }
    }

    #[test]
    fn point_boundaries() {
        let r = q(50.0, 70.0);
        assert_eq!(classify_point(70.0, r, Reconciled), Ok(Graded(Grade::High)));
        assert_eq!(classify_point(50.0, r, Reconciled), Ok(Graded(Grade::Med)));
        assert_eq!(classify_point(0.0, r, Reconciled), Ok(Graded(Grade::Low)));
        assert_eq!(classify_point(70.0, r, Verbatim), Ok(Graded(Grade::High)));
        assert_eq!(classify_point(50.0, r, Verbatim), Ok(Graded(Grade::Med)));
    }

    #[test]
    fn verbatim_point_quirks() {
        let r = q(50.0, 70.0);
        assert_eq!(classify_point(120.0, r, Verbatim), Ok(Graded(Grade::Med)));
        assert_eq!(classify_point(-5.0, r, Verbatim), Ok(ReputationValueError));
        assert_eq!(
            classify_point(f64::NAN, r, Verbatim),
            Ok(ReputationValueError)
        );
    }

    #[test]
    fn reconciled_point_rejects_out_of_scale() {
        let r = q(50.0, 70.0);
        assert_eq!(
            classify_point(100.5, r, Reconciled),
            Err(ClassifyError::ReputationOutOfRange(100.5))
        );
        assert!(classify_point(-0.1, r, Reconciled).is_err());
        assert!(classify_point(f64::NAN, r, Reconciled).is_err());
    }

    #[test]
    fn interval_examples() {
        let r = q(50.0, 70.0);
        assert_eq!(
            classify_interval(iv(90.0, 95.0), r, Reconciled),
            Ok(Graded(Grade::High))
        );
        assert_eq!(
            classify_interval(iv(46.0, 60.0), r, Reconciled),
            Ok(Graded(Grade::Med))
        );
        assert_eq!(
            classify_interval(iv(33.0, 45.0), r, Reconciled),
            Ok(Graded(Grade::Low))
        );
        assert_eq!(
            classify_interval(iv(56.0, 70.0), r, Verbatim),
            Ok(Graded(Grade::High))
        );
        assert_eq!(
            classify_interval(iv(90.0, 95.0), r, Verbatim),
            Ok(ReputationValueError)
        );
    }

    #[test]
    fn interval_boundaries() {
        let r = q(50.0, 70.0);
        // p = x is HIGH, q = x is MED
        assert_eq!(
            classify_interval(iv(50.0, 55.0), r, Reconciled),
            Ok(Graded(Grade::High))
        );
        assert_eq!(
            classify_interval(iv(24.0, 50.0), r, Reconciled),
            Ok(Graded(Grade::Med))
        );
        assert_eq!(
            classify_interval(iv(24.0, 49.9), r, Reconciled),
            Ok(Graded(Grade::Low))
        );
    }

    #[test]
    fn reconciled_interval_rejects_invalid() {
        let r = q(50.0, 70.0);
        let bad = ReputationInterval { p: 60.0, q: 40.0 };
        assert_eq!(
            classify_interval(bad, r, Reconciled),
            Err(ClassifyError::InvalidInterval { p: 60.0, q: 40.0 })
        );
        let neg = ReputationInterval { p: -1.0, q: 40.0 };
        assert!(classify_interval(neg, r, Reconciled).is_err());
        // verbatim reaches its LOW branch only for negative bounds
        assert_eq!(classify_interval(neg, r, Verbatim), Ok(Graded(Grade::Low)));
    }

    #[test]
    fn degenerate_interval_vs_point() {
        let r = q(50.0, 70.0);
        assert_eq!(
            classify_interval(iv(56.0, 56.0), r, Reconciled),
            Ok(Graded(Grade::High))
        );
        assert_eq!(classify_point(56.0, r, Reconciled), Ok(Graded(Grade::Med)));
    }

    #[test]
    fn grade_class_mapping() {
        assert_eq!(grade_to_class(Grade::High), CooperationClass::Certain);
        assert_eq!(grade_to_class(Grade::Med), CooperationClass::Possible);
        assert_eq!(grade_to_class(Grade::Low), CooperationClass::NotPossible);
        assert!(Grade::Low < Grade::Med && Grade::Med < Grade::High);
    }

    #[test]
    fn range_validation() {
        assert!(QueryRange::new(70.0, 50.0).is_err());
        assert!(QueryRange::new(-1.0, 50.0).is_err());
        assert!(QueryRange::new(0.0, 101.0).is_err());
        assert!(QueryRange::new(f64::NAN, 50.0).is_err());
        assert!(QueryRange::new(50.0, 50.0).is_ok());
    }

    #[test]
    fn batch_keeps_order_and_errors() {
        let r = q(50.0, 70.0);
        let rows = vec![
            (3, ReputationInput::Point(90.0)),
            (1, ReputationInput::Point(146.0)),
            (2, ReputationInput::Interval(iv(46.0, 60.0))),
        ];
        let out = classify_batch(&rows, r, Reconciled);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0], (3, Ok(Graded(Grade::High))));
        assert!(out[1].1.is_err());
        assert_eq!(out[2], (2, Ok(Graded(Grade::Med))));
        assert!(classify_batch(&[], r, Reconciled).is_empty());
    }
}
