//! Anytime-valid confidence sequences over a grid of candidate effect sizes.
//!
//! Each grid value `δ` carries its own plug-in e-process against the null
//! "the effect equals `δ`". A value is dropped, for good, the first time its
//! e-process reaches `1/α`; the surviving values form the running
//! intersection of the per-block confidence sets.
//!
//! Risk difference and relative risk have straight-line, hence convex, level
//! sets. The log odds ratio does not, so it is covered by two one-sided
//! families: `δ ≥ 0` tests `{log OR ≤ δ}` (the lower-bound family, `Plus`)
//! and `δ ≤ 0` tests `{log OR ≥ δ}` (the upper-bound family, `Minus`). The
//! reported set is the union of the two.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eprocess::{log_ratio_from_counts, plug_in_estimate, Alpha, BetaPrior};
use crate::error::{Error, Result};
use crate::model::{log_pmf, Block, BlockDesign, GroupCounts, ThetaPair};
use crate::projection::{project, NullSpec};

/// Grid values closer than this are treated as the same point.
const GRID_DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSize {
    /// `θ_b - θ_a`.
    #[serde(alias = "rd")]
    RiskDifference,
    /// `θ_b / θ_a`.
    #[serde(alias = "rr")]
    RelativeRisk,
    /// `log[θ_b (1 - θ_a) / ((1 - θ_b) θ_a)]`.
    #[serde(alias = "lor")]
    LogOddsRatio,
}

impl EffectSize {
    pub fn of(&self, theta: ThetaPair) -> f64 {
        match self {
            EffectSize::RiskDifference => theta.risk_difference(),
            EffectSize::RelativeRisk => theta.relative_risk(),
            EffectSize::LogOddsRatio => theta.log_odds_ratio(),
        }
    }

    pub fn default_grid(&self) -> GridSpec {
        match self {
            EffectSize::RiskDifference => GridSpec::Linear {
                lo: -1.0,
                hi: 1.0,
                step: 0.01,
            },
            EffectSize::RelativeRisk => GridSpec::LogSpaced {
                log_lo: -3.0,
                log_hi: 3.0,
                points: 241,
            },
            EffectSize::LogOddsRatio => GridSpec::Linear {
                lo: -6.0,
                hi: 6.0,
                step: 0.05,
            },
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            EffectSize::RiskDifference => "rd",
            EffectSize::RelativeRisk => "rr",
            EffectSize::LogOddsRatio => "lor",
        }
    }

    fn check_value(&self, delta: f64) -> Result<()> {
        let ok = match self {
            EffectSize::RiskDifference => (-1.0..=1.0).contains(&delta),
            EffectSize::RelativeRisk => delta.is_finite() && delta > 0.0,
            EffectSize::LogOddsRatio => delta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Grid(format!(
                "{delta} is not a valid {} value",
                self.token()
            )))
        }
    }

    fn arms(&self, delta: f64) -> Vec<Arm> {
        let convex = |family, null| Arm::new(family, ArmNull::Convex(null));
        match self {
            EffectSize::RiskDifference if delta >= 1.0 => {
                vec![Arm::new(Family::TwoSided, ArmNull::Corner(ThetaPair::new_unchecked(0.0, 1.0)))]
            }
            EffectSize::RiskDifference if delta <= -1.0 => {
                vec![Arm::new(Family::TwoSided, ArmNull::Corner(ThetaPair::new_unchecked(1.0, 0.0)))]
            }
            EffectSize::RiskDifference => {
                vec![convex(Family::TwoSided, NullSpec::Line { s: delta, c: 1.0 })]
            }
            EffectSize::RelativeRisk => {
                vec![convex(Family::TwoSided, NullSpec::Line { s: 0.0, c: delta })]
            }
            EffectSize::LogOddsRatio => {
                let mut arms = Vec::with_capacity(2);
                if delta >= 0.0 {
                    arms.push(convex(Family::Plus, NullSpec::LogOddsLe { delta }));
                }
                if delta <= 0.0 {
                    arms.push(convex(Family::Minus, NullSpec::LogOddsGe { delta }));
                }
                arms
            }
        }
    }
}

impl fmt::Display for EffectSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for EffectSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rd" | "risk_difference" | "risk-difference" => Ok(EffectSize::RiskDifference),
            "rr" | "relative_risk" | "relative-risk" => Ok(EffectSize::RelativeRisk),
            "lor" | "log_odds_ratio" | "log-odds-ratio" => Ok(EffectSize::LogOddsRatio),
            _ => Err(Error::Config(format!("unknown effect size '{s}' (expected rd, rr or lor)"))),
        }
    }
}

/// How candidate effect sizes are laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    /// `lo, lo + step, …` up to `hi`.
    Linear { lo: f64, hi: f64, step: f64 },
    /// `points` values evenly spaced in `log δ` over `[log_lo, log_hi]`.
    LogSpaced { log_lo: f64, log_hi: f64, points: usize },
    Explicit { values: Vec<f64> },
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            GridSpec::Linear { lo, hi, step } => {
                if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && lo <= hi) {
                    return Err(Error::Grid(format!("bad linear grid lo={lo} hi={hi} step={step}")));
                }
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| round_grid(lo + k as f64 * step)).collect())
            }
            GridSpec::LogSpaced { log_lo, log_hi, points } => {
                if !(log_lo.is_finite() && log_hi.is_finite() && log_lo < log_hi && points >= 2) {
                    return Err(Error::Grid(format!(
                        "bad log-spaced grid log_lo={log_lo} log_hi={log_hi} points={points}"
                    )));
                }
                let h = (log_hi - log_lo) / (points - 1) as f64;
                Ok((0..points).map(|k| (log_lo + k as f64 * h).exp()).collect())
            }
            GridSpec::Explicit { ref values } => Ok(values.clone()),
        }
    }
}

impl GridSpec {
    /// Compact form accepted by [`FromStr`]: `linear:lo:hi:step`,
    /// `log:log_lo:log_hi:points` or `list:v1,v2,…`.
    pub fn to_token(&self) -> String {
        match self {
            GridSpec::Linear { lo, hi, step } => format!("linear:{lo}:{hi}:{step}"),
            GridSpec::LogSpaced { log_lo, log_hi, points } => format!("log:{log_lo}:{log_hi}:{points}"),
            GridSpec::Explicit { values } => {
                let v: Vec<String> = values.iter().map(f64::to_string).collect();
                format!("list:{}", v.join(","))
            }
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(token: &str) -> Result<Self> {
        let bad = |why: &str| Error::Grid(format!("'{token}': {why}"));
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| bad(&e.to_string()));
        let (kind, rest) = token.split_once(':').ok_or_else(|| bad("expected kind:parameters"))?;
        let parts: Vec<&str> = rest.split(':').collect();
        let spec = match (kind, parts.as_slice()) {
            ("linear", [lo, hi, step]) => GridSpec::Linear {
                lo: num(lo)?,
                hi: num(hi)?,
                step: num(step)?,
            },
            ("log", [lo, hi, points]) => GridSpec::LogSpaced {
                log_lo: num(lo)?,
                log_hi: num(hi)?,
                points: points.trim().parse().map_err(|e: std::num::ParseIntError| bad(&e.to_string()))?,
            },
            ("list", [values]) => GridSpec::Explicit {
                values: values.split(',').map(num).collect::<Result<_>>()?,
            },
            _ => return Err(bad("expected linear:lo:hi:step, log:lo:hi:points or list:v1,v2,...")),
        };
        spec.values()?;
        Ok(spec)
    }
}

fn round_grid(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Inserts `delta` into a sorted grid unless a point is already within
/// [`GRID_DEDUP_TOL`]. Returns the index of the matching point.
pub fn insert_grid_point(grid: &mut Vec<f64>, delta: f64) -> usize {
    let idx = grid.partition_point(|&g| g < delta - GRID_DEDUP_TOL);
    if idx < grid.len() && (grid[idx] - delta).abs() <= GRID_DEDUP_TOL {
        idx
    } else {
        grid.insert(idx, delta);
        idx
    }
}

/// Which one-sided family an e-process belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Risk difference / relative risk: one process per point.
    TwoSided,
    /// Log OR, `δ ≥ 0`, null `{log OR ≤ δ}`.
    Plus,
    /// Log OR, `δ ≤ 0`, null `{log OR ≥ δ}`.
    Minus,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::TwoSided => "two_sided",
            Family::Plus => "plus",
            Family::Minus => "minus",
        })
    }
}

/// How the log-OR point `δ = 0`, present in both families, counts as alive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroRule {
    /// Alive while either family still holds it (union of the two sets).
    #[default]
    Union,
    /// Alive only while both families hold it.
    Both,
}

impl FromStr for ZeroRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(ZeroRule::Union),
            "both" => Ok(ZeroRule::Both),
            _ => Err(Error::Config(format!("unknown zero rule '{s}' (expected union or both)"))),
        }
    }
}

impl fmt::Display for ZeroRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZeroRule::Union => "union",
            ZeroRule::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ArmNull {
    Convex(NullSpec),
    /// Degenerate null consisting of a single corner of the square, where the
    /// likelihood ratio is exact: `p_est(block)` if the block is possible
    /// under the corner and `+inf` otherwise.
    Corner(ThetaPair),
}

#[derive(Debug, Clone, PartialEq)]
struct Arm {
    family: Family,
    null: ArmNull,
    log_e: f64,
    rejected: bool,
}

impl Arm {
    fn new(family: Family, null: ArmNull) -> Self {
        Self {
            family,
            null,
            log_e: 0.0,
            rejected: false,
        }
    }

    fn increment(&self, star: ThetaPair, block: &GroupCounts, design: BlockDesign) -> Result<f64> {
        match &self.null {
            ArmNull::Convex(null) => {
                let proj = project(null, star, design)?;
                Ok(if proj.interior_hit {
                    0.0
                } else {
                    log_ratio_from_counts(star, proj.theta_circ, block)
                })
            }
            ArmNull::Corner(corner) => {
                let possible = |ones: u64, trials: u64, p: f64| {
                    (p == 1.0 && ones == trials) || (p == 0.0 && ones == 0)
                };
                if possible(block.ones_a, block.trials_a, corner.a())
                    && possible(block.ones_b, block.trials_b, corner.b())
                {
                    let zeros_a = (block.trials_a - block.ones_a) as f64;
                    let zeros_b = (block.trials_b - block.ones_b) as f64;
                    let lp = |k: f64, t: f64, y| if k == 0.0 { 0.0 } else { k * log_pmf(t, y) };
                    Ok(lp(block.ones_a as f64, star.a(), 1)
                        + lp(zeros_a, star.a(), 0)
                        + lp(block.ones_b as f64, star.b(), 1)
                        + lp(zeros_b, star.b(), 0))
                } else {
                    Ok(f64::INFINITY)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GridPoint {
    delta: f64,
    arms: Vec<Arm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfSeqConfig {
    pub effect: EffectSize,
    pub alpha: Alpha,
    pub prior: BetaPrior,
    pub design: BlockDesign,
    /// Keep updating rejected points so the per-block (non-intersected)
    /// confidence set is available too.
    #[serde(default)]
    pub track_instantaneous: bool,
    #[serde(default)]
    pub zero_rule: ZeroRule,
}

impl ConfSeqConfig {
    pub fn new(effect: EffectSize, alpha: Alpha, prior: BetaPrior, design: BlockDesign) -> Self {
        Self {
            effect,
            alpha,
            prior,
            design,
            track_instantaneous: false,
            zero_rule: ZeroRule::Union,
        }
    }

    pub fn with_instantaneous(mut self, on: bool) -> Self {
        self.track_instantaneous = on;
        self
    }
}

/// Smallest closed interval containing a set of grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfInterval {
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
}

impl ConfInterval {
    pub const EMPTY: ConfInterval = ConfInterval {
        lower: f64::NAN,
        upper: f64::NAN,
        empty: true,
    };

    /// Hull of `points`, which must be sorted ascending.
    pub fn hull(points: &[f64]) -> Self {
        match (points.first(), points.last()) {
            (Some(&lower), Some(&upper)) => ConfInterval {
                lower,
                upper,
                empty: false,
            },
            _ => Self::EMPTY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.empty && self.lower <= x && x <= self.upper
    }

    pub fn is_subset_of(&self, other: &ConfInterval) -> bool {
        self.empty || (!other.empty && other.lower <= self.lower && self.upper <= other.upper)
    }
}

/// One row of the per-block confidence-sequence report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsRecord {
    pub m: u64,
    pub effect: EffectSize,
    pub lower: f64,
    pub upper: f64,
    pub n_alive: usize,
}

/// Per-process detail for a single grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLogE {
    pub m: u64,
    pub delta: f64,
    pub family: Family,
    pub log_e: f64,
    pub rejected: bool,
}

/// A grid of e-processes sharing one block history.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfSeqState {
    config: ConfSeqConfig,
    points: Vec<GridPoint>,
    counts: GroupCounts,
    m: u64,
    log_threshold: f64,
}

impl ConfSeqState {
    pub fn new(config: ConfSeqConfig, grid: &[f64]) -> Result<Self> {
        config.prior.validate()?;
        if grid.is_empty() {
            return Err(Error::Grid("grid is empty".into()));
        }
        let bad: Vec<String> = grid
            .iter()
            .filter(|&&d| config.effect.check_value(d).is_err())
            .map(|d| d.to_string())
            .collect();
        if !bad.is_empty() {
            return Err(Error::Grid(format!(
                "values outside the {} domain: {}",
                config.effect,
                bad.join(", ")
            )));
        }
        let unordered: Vec<String> = grid
            .windows(2)
            .filter(|w| w[0] >= w[1])
            .map(|w| format!("{} >= {}", w[0], w[1]))
            .collect();
        if !unordered.is_empty() {
            return Err(Error::Grid(format!(
                "grid must be strictly increasing: {}",
                unordered.join(", ")
            )));
        }
        let points = grid
            .iter()
            .map(|&delta| GridPoint {
                delta,
                arms: config.effect.arms(delta),
            })
            .collect();
        Ok(Self {
            log_threshold: config.alpha.log_threshold(),
            config,
            points,
            counts: GroupCounts::default(),
            m: 0,
        })
    }

    /// Builds the state from a grid specification.
    pub fn from_spec(config: ConfSeqConfig, grid: &GridSpec) -> Result<Self> {
        Self::new(config, &grid.values()?)
    }

    pub fn config(&self) -> &ConfSeqConfig {
        &self.config
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn counts(&self) -> &GroupCounts {
        &self.counts
    }

    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    /// Total number of e-processes (the log-OR point 0 carries two).
    pub fn process_count(&self) -> usize {
        self.points.iter().map(|p| p.arms.len()).sum()
    }

    /// Shared plug-in estimate for the next block.
    pub fn plug_in(&self) -> ThetaPair {
        plug_in_estimate(&self.config.prior, &self.counts)
    }

    /// Scores `block` on every live process and folds it into the history.
    /// Rejections are sticky. On error the state is unchanged.
    pub fn update(&mut self, block: &Block) -> Result<()> {
        let design = self.config.design;
        design.check(block)?;
        let star = self.plug_in();
        let block_counts = block.counts();
        let track_all = self.config.track_instantaneous;

        let mut increments = Vec::with_capacity(self.process_count());
        for point in &self.points {
            for arm in &point.arms {
                increments.push(if arm.rejected && !track_all {
                    0.0
                } else {
                    arm.increment(star, &block_counts, design)?
                });
            }
        }

        let mut inc = increments.into_iter();
        for point in &mut self.points {
            for arm in &mut point.arms {
                let d = inc.next().expect("one increment per arm");
                if arm.rejected && !track_all {
                    continue;
                }
                arm.log_e += d;
                if arm.log_e >= self.log_threshold {
                    arm.rejected = true;
                }
            }
        }
        self.counts += block_counts;
        self.m += 1;
        Ok(())
    }

    fn point_alive(&self, point: &GridPoint, alive: impl Fn(&Arm) -> bool) -> bool {
        match self.config.zero_rule {
            ZeroRule::Union => point.arms.iter().any(alive),
            ZeroRule::Both => point.arms.iter().all(alive),
        }
    }

    /// Grid values never rejected so far (the running intersection).
    pub fn current_set(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| self.point_alive(p, |a| !a.rejected))
            .map(|p| p.delta)
            .collect()
    }

    pub fn current_interval(&self) -> ConfInterval {
        ConfInterval::hull(&self.current_set())
    }

    /// Grid values whose current e-value is below `1/α`, ignoring history.
    /// Only available when the state tracks instantaneous sets.
    pub fn instantaneous_set(&self) -> Option<Vec<f64>> {
        self.config.track_instantaneous.then(|| {
            self.points
                .iter()
                .filter(|p| self.point_alive(p, |a| a.log_e < self.log_threshold))
                .map(|p| p.delta)
                .collect()
        })
    }

    pub fn instantaneous_interval(&self) -> Option<ConfInterval> {
        self.instantaneous_set().map(|s| ConfInterval::hull(&s))
    }

    /// Surviving values of one family.
    pub fn family_set(&self, family: Family) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.arms.iter().any(|a| a.family == family && !a.rejected))
            .map(|p| p.delta)
            .collect()
    }

    pub fn family_interval(&self, family: Family) -> ConfInterval {
        ConfInterval::hull(&self.family_set(family))
    }

    /// True iff the family has at least one process and all are rejected.
    pub fn family_fully_rejected(&self, family: Family) -> bool {
        let mut any = false;
        for arm in self.points.iter().flat_map(|p| &p.arms).filter(|a| a.family == family) {
            any = true;
            if !arm.rejected {
                return false;
            }
        }
        any
    }

    /// Whether grid value `delta` has left [`current_set`]; `None` if it is
    /// not on the grid.
    ///
    /// [`current_set`]: Self::current_set
    pub fn is_rejected(&self, delta: f64) -> Option<bool> {
        self.points
            .iter()
            .find(|p| (p.delta - delta).abs() <= GRID_DEDUP_TOL)
            .map(|p| !self.point_alive(p, |a| !a.rejected))
    }

    pub fn record(&self) -> CsRecord {
        let set = self.current_set();
        let iv = ConfInterval::hull(&set);
        CsRecord {
            m: self.m,
            effect: self.config.effect,
            lower: iv.lower,
            upper: iv.upper,
            n_alive: set.len(),
        }
    }

    /// Current log e-value of every process.
    pub fn point_log_e(&self) -> Vec<PointLogE> {
        self.points
            .iter()
            .flat_map(|p| {
                p.arms.iter().map(move |a| PointLogE {
                    m: self.m,
                    delta: p.delta,
                    family: a.family,
                    log_e: a.log_e,
                    rejected: a.rejected,
                })
            })
            .collect()
    }
}
