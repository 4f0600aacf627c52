//! Bernoulli block data model: parameter pairs, block designs, outcome
//! blocks, sufficient statistics, and the two KL divergences the rest of the
//! crate is built on.
//!
//! All likelihood work happens in log space.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the two streams an observation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    A,
    B,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::A => f.write_str("a"),
            Group::B => f.write_str("b"),
        }
    }
}

/// A point `(theta_a, theta_b)` in the unit square. Each component is the
/// probability of a `1` in the corresponding group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct ThetaPair {
    a: f64,
    b: f64,
}

impl ThetaPair {
    pub fn new(theta_a: f64, theta_b: f64) -> Result<Self> {
        check_probability("theta_a", theta_a)?;
        check_probability("theta_b", theta_b)?;
        Ok(Self {
            a: theta_a,
            b: theta_b,
        })
    }

    /// Caller guarantees both components are in [0, 1].
    pub(crate) fn new_unchecked(theta_a: f64, theta_b: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&theta_a) && (0.0..=1.0).contains(&theta_b));
        Self {
            a: theta_a,
            b: theta_b,
        }
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    #[inline]
    pub fn get(&self, group: Group) -> f64 {
        match group {
            Group::A => self.a,
            Group::B => self.b,
        }
    }

    /// Both components strictly inside (0, 1).
    pub fn is_interior(&self) -> bool {
        is_open_unit(self.a) && is_open_unit(self.b)
    }

    /// Reflection `(θ_a, θ_b) -> (1 - θ_a, 1 - θ_b)`, which swaps the roles of
    /// zeros and ones.
    pub fn flipped(&self) -> Self {
        Self {
            a: 1.0 - self.a,
            b: 1.0 - self.b,
        }
    }

    pub fn risk_difference(&self) -> f64 {
        self.b - self.a
    }

    pub fn relative_risk(&self) -> f64 {
        self.b / self.a
    }

    /// `log[θ_b (1 - θ_a) / ((1 - θ_b) θ_a)]`, with boundary components
    /// resolved by limits to `±inf`. Returns NaN at the corners `(0, 0)` and
    /// `(1, 1)` where the limit depends on the approach direction.
    pub fn log_odds_ratio(&self) -> f64 {
        logit(self.b) - logit(self.a)
    }
}

impl TryFrom<(f64, f64)> for ThetaPair {
    type Error = Error;

    fn try_from((a, b): (f64, f64)) -> Result<Self> {
        Self::new(a, b)
    }
}

impl From<ThetaPair> for (f64, f64) {
    fn from(t: ThetaPair) -> Self {
        (t.a, t.b)
    }
}

impl fmt::Display for ThetaPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// Per-block group sizes, fixed for the lifetime of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDesign")]
pub struct BlockDesign {
    n_a: u32,
    n_b: u32,
}

#[derive(Deserialize)]
struct RawDesign {
    n_a: u32,
    n_b: u32,
}

impl TryFrom<RawDesign> for BlockDesign {
    type Error = Error;

    fn try_from(raw: RawDesign) -> Result<Self> {
        Self::new(raw.n_a, raw.n_b)
    }
}

impl BlockDesign {
    pub fn new(n_a: u32, n_b: u32) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::Design(format!(
                "group sizes must be positive, got n_a = {n_a}, n_b = {n_b}"
            )));
        }
        Ok(Self { n_a, n_b })
    }

    /// The balanced one-per-group design used throughout the simulations.
    pub fn balanced() -> Self {
        Self { n_a: 1, n_b: 1 }
    }

    #[inline]
    pub fn n_a(&self) -> u32 {
        self.n_a
    }

    #[inline]
    pub fn n_b(&self) -> u32 {
        self.n_b
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n_a + self.n_b
    }

    pub fn size(&self, group: Group) -> u32 {
        match group {
            Group::A => self.n_a,
            Group::B => self.n_b,
        }
    }

    /// Checks that `block` has exactly `n_a` and `n_b` outcomes.
    pub fn check(&self, block: &Block) -> Result<()> {
        if block.ys_a.len() != self.n_a as usize || block.ys_b.len() != self.n_b as usize {
            return Err(Error::BlockShape {
                expected_a: self.n_a as usize,
                expected_b: self.n_b as usize,
                got_a: block.ys_a.len(),
                got_b: block.ys_b.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for BlockDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n_a={}, n_b={}", self.n_a, self.n_b)
    }
}

/// One block of binary outcomes: `n_a` from group a and `n_b` from group b.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    ys_a: Vec<u8>,
    ys_b: Vec<u8>,
}

impl Block {
    pub fn new(ys_a: Vec<u8>, ys_b: Vec<u8>) -> Result<Self> {
        if let Some(y) = ys_a.iter().chain(&ys_b).find(|&&y| y > 1) {
            return Err(Error::Domain(format!("outcome {y} is not binary")));
        }
        Ok(Self { ys_a, ys_b })
    }

    pub fn from_bools(ys_a: &[bool], ys_b: &[bool]) -> Self {
        Self {
            ys_a: ys_a.iter().map(|&y| u8::from(y)).collect(),
            ys_b: ys_b.iter().map(|&y| u8::from(y)).collect(),
        }
    }

    pub fn ys_a(&self) -> &[u8] {
        &self.ys_a
    }

    pub fn ys_b(&self) -> &[u8] {
        &self.ys_b
    }

    pub fn outcomes(&self, group: Group) -> &[u8] {
        match group {
            Group::A => &self.ys_a,
            Group::B => &self.ys_b,
        }
    }

    pub fn ones(&self, group: Group) -> u64 {
        self.outcomes(group).iter().map(|&y| u64::from(y)).sum()
    }

    pub fn counts(&self) -> GroupCounts {
        GroupCounts {
            ones_a: self.ones(Group::A),
            trials_a: self.ys_a.len() as u64,
            ones_b: self.ones(Group::B),
            trials_b: self.ys_b.len() as u64,
        }
    }
}

/// Sufficient statistics of a block history.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupCounts {
    pub ones_a: u64,
    pub trials_a: u64,
    pub ones_b: u64,
    pub trials_b: u64,
}

impl GroupCounts {
    pub fn new(ones_a: u64, trials_a: u64, ones_b: u64, trials_b: u64) -> Result<Self> {
        let c = Self {
            ones_a,
            trials_a,
            ones_b,
            trials_b,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ones_a > self.trials_a || self.ones_b > self.trials_b {
            return Err(Error::Domain(format!(
                "more ones than trials: {}/{} (a), {}/{} (b)",
                self.ones_a, self.trials_a, self.ones_b, self.trials_b
            )));
        }
        Ok(())
    }

    pub fn ones(&self, group: Group) -> u64 {
        match group {
            Group::A => self.ones_a,
            Group::B => self.ones_b,
        }
    }

    pub fn trials(&self, group: Group) -> u64 {
        match group {
            Group::A => self.trials_a,
            Group::B => self.trials_b,
        }
    }

    pub fn add_block(&mut self, block: &Block) {
        *self += block.counts();
    }
}

impl std::ops::AddAssign for GroupCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.ones_a += rhs.ones_a;
        self.trials_a += rhs.trials_a;
        self.ones_b += rhs.ones_b;
        self.trials_b += rhs.trials_b;
    }
}

impl std::ops::Add for GroupCounts {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

#[inline]
pub(crate) fn is_open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::NotAProbability { name, value })
    }
}

/// `log(p / (1 - p))`, `-inf` at 0 and `+inf` at 1.
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Logistic function, the inverse of [`logit`].
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Log of the Bernoulli mass `p_theta(y)`. `-inf` when the mass is zero.
pub fn bern_log_pmf(theta: f64, y: u8) -> Result<f64> {
    check_probability("theta", theta)?;
    match y {
        0 => Ok(log_pmf(theta, 0)),
        1 => Ok(log_pmf(theta, 1)),
        _ => Err(Error::Domain(format!("outcome {y} is not binary"))),
    }
}

#[inline]
pub(crate) fn log_pmf(theta: f64, y: u8) -> f64 {
    if y == 1 {
        theta.ln()
    } else {
        (-theta).ln_1p()
    }
}

/// Single-outcome Bernoulli KL divergence `d(p ‖ q)` in nats, with
/// `0 · log 0 = 0` and `+inf` whenever `q` puts zero mass where `p` does not.
pub fn bern_kl(p: f64, q: f64) -> f64 {
    xlogx_ratio(p, q) + xlogx_ratio(1.0 - p, 1.0 - q)
}

#[inline]
fn xlogx_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

/// KL divergence between the block distributions `P_star` and `P_theta`:
/// `n_a d(θ*_a ‖ θ_a) + n_b d(θ*_b ‖ θ_b)`.
pub fn kl_block(star: ThetaPair, theta: ThetaPair, design: BlockDesign) -> f64 {
    f64::from(design.n_a) * bern_kl(star.a, theta.a)
        + f64::from(design.n_b) * bern_kl(star.b, theta.b)
}

/// KL divergence in the single-outcome problem where the group is drawn with
/// probabilities `n_a/n` and `n_b/n`. Equals `kl_block / n`.
pub fn kl_single(star: ThetaPair, theta: ThetaPair, design: BlockDesign) -> f64 {
    let n = f64::from(design.n());
    (f64::from(design.n_a) / n) * bern_kl(star.a, theta.a)
        + (f64::from(design.n_b) / n) * bern_kl(star.b, theta.b)
}
