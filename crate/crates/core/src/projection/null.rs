use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ThetaPair;

/// Slack used when deciding whether a point lies on a null's boundary.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// A closed convex null set `Θ0 ⊂ [0, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullSpec {
    /// `θ_a = θ_b`.
    Equality,
    /// `θ_b = s + c·θ_a`.
    Line { s: f64, c: f64 },
    /// `θ_b ≤ s + c·θ_a`.
    HalfPlaneLe { s: f64, c: f64 },
    /// `θ_b ≥ s + c·θ_a`.
    HalfPlaneGe { s: f64, c: f64 },
    /// `log OR ≤ δ`; convex only for `δ ≥ 0`.
    LogOddsLe { delta: f64 },
    /// `log OR ≥ δ`; convex only for `δ ≤ 0`.
    LogOddsGe { delta: f64 },
}

impl NullSpec {
    pub fn line(s: f64, c: f64) -> Result<Self> {
        let null = NullSpec::Line { s, c };
        null.validate()?;
        Ok(null)
    }

    pub fn half_plane_le(s: f64, c: f64) -> Result<Self> {
        let null = NullSpec::HalfPlaneLe { s, c };
        null.validate()?;
        Ok(null)
    }

    pub fn half_plane_ge(s: f64, c: f64) -> Result<Self> {
        let null = NullSpec::HalfPlaneGe { s, c };
        null.validate()?;
        Ok(null)
    }

    pub fn log_odds_le(delta: f64) -> Result<Self> {
        let null = NullSpec::LogOddsLe { delta };
        null.validate()?;
        Ok(null)
    }

    pub fn log_odds_ge(delta: f64) -> Result<Self> {
        let null = NullSpec::LogOddsGe { delta };
        null.validate()?;
        Ok(null)
    }

    /// Checks the set is convex and meets the open unit square.
    pub fn validate(&self) -> Result<()> {
        match *self {
            NullSpec::Equality => Ok(()),
            NullSpec::Line { s, c }
            | NullSpec::HalfPlaneLe { s, c }
            | NullSpec::HalfPlaneGe { s, c } => {
                if !(s.is_finite() && c.is_finite()) {
                    return Err(Error::InvalidNull(format!(
                        "line parameters must be finite, got s = {s}, c = {c}"
                    )));
                }
                if line_segment(s, c).is_none() {
                    return Err(Error::InvalidNull(format!(
                        "line θ_b = {s} + {c}·θ_a does not pass through the interior of the unit square"
                    )));
                }
                Ok(())
            }
            NullSpec::LogOddsLe { delta } => {
                if !delta.is_finite() || delta < 0.0 {
                    return Err(Error::InvalidNull(format!(
                        "{{log OR ≤ δ}} is convex only for finite δ ≥ 0, got δ = {delta}"
                    )));
                }
                Ok(())
            }
            NullSpec::LogOddsGe { delta } => {
                if !delta.is_finite() || delta > 0.0 {
                    return Err(Error::InvalidNull(format!(
                        "{{log OR ≥ δ}} is convex only for finite δ ≤ 0, got δ = {delta}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Membership of a point of the closed unit square. Log-odds nulls treat
    /// the corners `(0, 0)` and `(1, 1)`, where every curve `log OR = δ`
    /// accumulates, as members.
    pub fn contains(&self, theta: ThetaPair) -> bool {
        let (a, b) = (theta.a(), theta.b());
        match *self {
            NullSpec::Equality => (a - b).abs() <= MEMBERSHIP_TOL,
            NullSpec::Line { s, c } => (b - (s + c * a)).abs() <= MEMBERSHIP_TOL,
            NullSpec::HalfPlaneLe { s, c } => b <= s + c * a + MEMBERSHIP_TOL,
            NullSpec::HalfPlaneGe { s, c } => b >= s + c * a - MEMBERSHIP_TOL,
            NullSpec::LogOddsLe { delta } => {
                let lor = theta.log_odds_ratio();
                lor.is_nan() || lor <= delta + MEMBERSHIP_TOL
            }
            NullSpec::LogOddsGe { delta } => {
                let lor = theta.log_odds_ratio();
                lor.is_nan() || lor >= delta - MEMBERSHIP_TOL
            }
        }
    }

    /// Short stable identifier, also accepted by [`FromStr`].
    pub fn to_token(&self) -> String {
        match *self {
            NullSpec::Equality => "equality".to_string(),
            NullSpec::Line { s, c } => format!("line:{s}:{c}"),
            NullSpec::HalfPlaneLe { s, c } => format!("le:{s}:{c}"),
            NullSpec::HalfPlaneGe { s, c } => format!("ge:{s}:{c}"),
            NullSpec::LogOddsLe { delta } => format!("lor-le:{delta}"),
            NullSpec::LogOddsGe { delta } => format!("lor-ge:{delta}"),
        }
    }
}

impl fmt::Display for NullSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NullSpec::Equality => f.write_str("{θ_a = θ_b}"),
            NullSpec::Line { s, c } => write!(f, "{{θ_b = {s} + {c}·θ_a}}"),
            NullSpec::HalfPlaneLe { s, c } => write!(f, "{{θ_b ≤ {s} + {c}·θ_a}}"),
            NullSpec::HalfPlaneGe { s, c } => write!(f, "{{θ_b ≥ {s} + {c}·θ_a}}"),
            NullSpec::LogOddsLe { delta } => write!(f, "{{log OR ≤ {delta}}}"),
            NullSpec::LogOddsGe { delta } => write!(f, "{{log OR ≥ {delta}}}"),
        }
    }
}

impl FromStr for NullSpec {
    type Err = Error;

    fn from_str(token: &str) -> Result<Self> {
        let parts: Vec<&str> = token.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::InvalidNull(format!("missing parameter in '{token}'")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidNull(format!("'{token}': {e}")))
        };
        let null = match (parts[0], parts.len()) {
            ("equality", 1) => NullSpec::Equality,
            ("line", 3) => NullSpec::Line { s: num(1)?, c: num(2)? },
            ("le", 3) => NullSpec::HalfPlaneLe { s: num(1)?, c: num(2)? },
            ("ge", 3) => NullSpec::HalfPlaneGe { s: num(1)?, c: num(2)? },
            ("lor-le", 2) => NullSpec::LogOddsLe { delta: num(1)? },
            ("lor-ge", 2) => NullSpec::LogOddsGe { delta: num(1)? },
            _ => return Err(Error::InvalidNull(format!("unrecognized null '{token}'"))),
        };
        null.validate()?;
        Ok(null)
    }
}

/// Open interval of `θ_a` over which `(θ_a, s + c·θ_a)` lies in the open
/// unit square, or `None` if the line misses it.
pub(crate) fn line_segment(s: f64, c: f64) -> Option<(f64, f64)> {
    let (lo, hi) = if c > 0.0 {
        ((-s / c).max(0.0), ((1.0 - s) / c).min(1.0))
    } else if c < 0.0 {
        (((1.0 - s) / c).max(0.0), (-s / c).min(1.0))
    } else if s > 0.0 && s < 1.0 {
        (0.0, 1.0)
    } else {
        return None;
    };
    (lo < hi).then_some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(a: f64, b: f64) -> ThetaPair {
        ThetaPair::new(a, b).unwrap()
    }

    #[test]
    fn membership_examples() {
        assert!(NullSpec::Equality.contains(tp(0.4, 0.4)));
        assert!(!NullSpec::HalfPlaneLe { s: 0.1, c: 1.0 }.contains(tp(0.2, 0.5)));
        assert!(NullSpec::LogOddsLe { delta: 2.0 }.contains(tp(0.5, 0.5)));
        assert!(NullSpec::HalfPlaneGe { s: 0.1, c: 1.0 }.contains(tp(0.2, 0.5)));
        assert!(NullSpec::Line { s: 0.2, c: 1.0 }.contains(tp(0.3, 0.5)));
    }

    #[test]
    fn log_odds_membership_on_square_boundary() {
        let le = NullSpec::LogOddsLe { delta: 1.0 };
        let ge = NullSpec::LogOddsGe { delta: -1.0 };
        // (0, 1) has log OR +inf, (1, 0) has -inf.
        assert!(!le.contains(tp(0.0, 1.0)));
        assert!(ge.contains(tp(0.0, 1.0)));
        assert!(le.contains(tp(1.0, 0.0)));
        assert!(!ge.contains(tp(1.0, 0.0)));
        for corner in [tp(0.0, 0.0), tp(1.0, 1.0)] {
            assert!(le.contains(corner) && ge.contains(corner));
        }
        assert!(!le.contains(tp(0.0, 0.3)));
    }

    #[test]
    fn degenerate_lines_rejected() {
        // Touches the square only at the corner (0, 1).
        assert!(NullSpec::line(1.0, 1.0).is_err());
        assert!(NullSpec::line(-1.0, 1.0).is_err());
        assert!(NullSpec::line(2.0, -0.5).is_err());
        assert!(NullSpec::line(f64::NAN, 1.0).is_err());
        assert!(NullSpec::half_plane_le(1.5, 0.0).is_err());
        assert!(NullSpec::line(0.3, 0.0).is_ok());
        assert!(NullSpec::line(0.0, 20.0).is_ok());
        assert!(NullSpec::line(0.99, 1.0).is_ok());
    }

    #[test]
    fn log_odds_convexity_guard() {
        assert!(NullSpec::log_odds_le(-0.5).is_err());
        assert!(NullSpec::log_odds_ge(0.5).is_err());
        assert!(NullSpec::log_odds_le(0.0).is_ok());
        assert!(NullSpec::log_odds_ge(0.0).is_ok());
    }

    #[test]
    fn segment_bounds() {
        assert_eq!(line_segment(0.0, 1.0), Some((0.0, 1.0)));
        assert_eq!(line_segment(0.1, 1.0), Some((0.0, 0.9)));
        assert_eq!(line_segment(0.0, 4.0), Some((0.0, 0.25)));
        assert_eq!(line_segment(1.0, -1.0), Some((0.0, 1.0)));
        assert_eq!(line_segment(-0.5, 1.0), Some((0.5, 1.0)));
    }

    #[test]
    fn token_round_trip() {
        for null in [
            NullSpec::Equality,
            NullSpec::Line { s: 0.1, c: 1.0 },
            NullSpec::HalfPlaneLe { s: -0.25, c: 2.0 },
            NullSpec::HalfPlaneGe { s: 0.1, c: 1.0 },
            NullSpec::LogOddsLe { delta: 2.5 },
            NullSpec::LogOddsGe { delta: -0.05 },
        ] {
            assert_eq!(null.to_token().parse::<NullSpec>().unwrap(), null);
        }
        assert!("circle:1".parse::<NullSpec>().is_err());
        assert!("line:0.1".parse::<NullSpec>().is_err());
    }
}
