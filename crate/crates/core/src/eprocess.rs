//! Block E-variables and the sequential plug-in e-process.
//!
//! For an alternative `θ*` and its projection `θ°` onto a convex null, the
//! likelihood ratio `p_θ*(block) / p_θ°(block)` has expectation at most one
//! under every point of the null. Chaining such ratios, with `θ*` replaced
//! before each block by an estimate from the blocks already seen, gives a
//! test martingale: by Ville's inequality it exceeds `1/α` with probability at
//! most `α`, whenever one chooses to look.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{log_pmf, Block, BlockDesign, Group, GroupCounts, ThetaPair};
use crate::projection::{project, NullSpec};

/// Beta prior parameter recommended for `n_a = n_b = 1`.
pub const DEFAULT_GAMMA: f64 = 0.18;

/// Plug-in estimates are kept this far from 0 and 1.
pub const ESTIMATE_CLAMP: f64 = 1e-12;

/// Significance level `α ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::Domain(format!("significance level must lie in (0, 1), got {alpha}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `log(1/α)`: a log e-value at or above this rejects.
    pub fn log_threshold(self) -> f64 {
        (1.0 / self.0).ln()
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Self(0.05)
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Reject,
    Continue,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Reject => "reject",
            Decision::Continue => "continue",
        })
    }
}

/// Rejects iff `log_e ≥ log(1/α)`.
pub fn decision(log_e: f64, alpha: Alpha) -> Decision {
    if log_e >= alpha.log_threshold() {
        Decision::Reject
    } else {
        Decision::Continue
    }
}

/// Independent beta priors on `θ_a` and `θ_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha_a: f64,
    pub beta_a: f64,
    pub alpha_b: f64,
    pub beta_b: f64,
}

impl BetaPrior {
    pub fn new(alpha_a: f64, beta_a: f64, alpha_b: f64, beta_b: f64) -> Result<Self> {
        let prior = Self {
            alpha_a,
            beta_a,
            alpha_b,
            beta_b,
        };
        prior.validate()?;
        Ok(prior)
    }

    /// All four parameters equal to `gamma`.
    pub fn symmetric(gamma: f64) -> Result<Self> {
        Self::new(gamma, gamma, gamma, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_a", self.alpha_a),
            ("beta_a", self.beta_a),
            ("alpha_b", self.alpha_b),
            ("beta_b", self.beta_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Prior(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    fn params(&self, group: Group) -> (f64, f64) {
        match group {
            Group::A => (self.alpha_a, self.beta_a),
            Group::B => (self.alpha_b, self.beta_b),
        }
    }
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self {
            alpha_a: DEFAULT_GAMMA,
            beta_a: DEFAULT_GAMMA,
            alpha_b: DEFAULT_GAMMA,
            beta_b: DEFAULT_GAMMA,
        }
    }
}

/// Bayes posterior mean of `θ_g` given the counts.
pub fn posterior_mean(prior: &BetaPrior, counts: &GroupCounts, group: Group) -> f64 {
    let (a, b) = prior.params(group);
    (a + counts.ones(group) as f64) / (a + b + counts.trials(group) as f64)
}

/// Posterior means for both groups, clamped into `[ESTIMATE_CLAMP, 1 - ESTIMATE_CLAMP]`.
pub fn plug_in_estimate(prior: &BetaPrior, counts: &GroupCounts) -> ThetaPair {
    let clamp = |x: f64| x.clamp(ESTIMATE_CLAMP, 1.0 - ESTIMATE_CLAMP);
    ThetaPair::new_unchecked(
        clamp(posterior_mean(prior, counts, Group::A)),
        clamp(posterior_mean(prior, counts, Group::B)),
    )
}

/// Log of `p_star(block) / p_circ(block)`.
pub fn block_evalue(star: ThetaPair, circ: ThetaPair, block: &Block) -> Result<f64> {
    if !circ.is_interior() {
        return Err(Error::Domain(format!(
            "null point {circ} must be interior for the likelihood ratio to be defined"
        )));
    }
    Ok(log_ratio_from_counts(star, circ, &block.counts()))
}

/// Same ratio as [`block_evalue`] from sufficient statistics. `circ` must be
/// interior.
pub(crate) fn log_ratio_from_counts(star: ThetaPair, circ: ThetaPair, counts: &GroupCounts) -> f64 {
    if star == circ {
        return 0.0;
    }
    let term = |k: u64, s: f64, c: f64, y: u8| {
        if k == 0 {
            0.0
        } else {
            k as f64 * (log_pmf(s, y) - log_pmf(c, y))
        }
    };
    let zeros_a = counts.trials_a - counts.ones_a;
    let zeros_b = counts.trials_b - counts.ones_b;
    term(counts.ones_a, star.a(), circ.a(), 1)
        + term(zeros_a, star.a(), circ.a(), 0)
        + term(counts.ones_b, star.b(), circ.b(), 1)
        + term(zeros_b, star.b(), circ.b(), 0)
}

/// Log e-value for the equality null in its original mixture form: each
/// outcome, whichever group it came from, is scored against the mixture
/// `(n_a/n) p_θ*_a + (n_b/n) p_θ*_b`.
pub fn equality_mixture_evalue(star: ThetaPair, block: &Block, design: BlockDesign) -> Result<f64> {
    design.check(block)?;
    let n = f64::from(design.n());
    let (wa, wb) = (f64::from(design.n_a()) / n, f64::from(design.n_b()) / n);
    let mut log_e = 0.0;
    for group in [Group::A, Group::B] {
        let theta = star.get(group);
        for &y in block.outcomes(group) {
            let mass = |t: f64| if y == 1 { t } else { 1.0 - t };
            let mixture = wa * mass(star.a()) + wb * mass(star.b());
            if mixture == 0.0 {
                return Err(Error::Domain(format!(
                    "mixture under {star} gives zero mass to observed outcome {y}"
                )));
            }
            log_e += mass(theta).ln() - mixture.ln();
        }
    }
    Ok(log_e)
}

/// Running plug-in e-process against one null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EProcessState {
    design: BlockDesign,
    null: NullSpec,
    prior: BetaPrior,
    counts: GroupCounts,
    log_e: f64,
    m: u64,
}

impl EProcessState {
    pub fn new(null: NullSpec, design: BlockDesign, prior: BetaPrior) -> Result<Self> {
        null.validate()?;
        prior.validate()?;
        Ok(Self {
            design,
            null,
            prior,
            counts: GroupCounts::default(),
            log_e: 0.0,
            m: 0,
        })
    }

    pub fn design(&self) -> BlockDesign {
        self.design
    }

    pub fn null(&self) -> &NullSpec {
        &self.null
    }

    pub fn prior(&self) -> &BetaPrior {
        &self.prior
    }

    pub fn counts(&self) -> &GroupCounts {
        &self.counts
    }

    pub fn log_e(&self) -> f64 {
        self.log_e
    }

    pub fn e_value(&self) -> f64 {
        self.log_e.exp()
    }

    /// Number of completed blocks.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Estimate used for the next block; depends only on past blocks.
    pub fn plug_in(&self) -> ThetaPair {
        plug_in_estimate(&self.prior, &self.counts)
    }

    /// Scores `block` against the current plug-in and folds it into the
    /// history. Returns the log e-value increment. On error the state is
    /// unchanged.
    pub fn update(&mut self, block: &Block) -> Result<f64> {
        self.design.check(block)?;
        let star = self.plug_in();
        let proj = project(&self.null, star, self.design)?;
        let increment = if proj.interior_hit {
            0.0
        } else {
            log_ratio_from_counts(star, proj.theta_circ, &block.counts())
        };
        self.log_e += increment;
        self.counts.add_block(block);
        self.m += 1;
        Ok(increment)
    }

    pub fn decision(&self, alpha: Alpha) -> Decision {
        decision(self.log_e, alpha)
    }

    fn config_line(&self) -> String {
        let p = &self.prior;
        format!(
            "n_a={};n_b={};null={};prior={},{},{},{}",
            self.design.n_a(),
            self.design.n_b(),
            self.null.to_token(),
            p.alpha_a,
            p.beta_a,
            p.alpha_b,
            p.beta_b
        )
    }

    fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.config_line().as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Plain-text `key=value` snapshot, enough to resume the stream.
    pub fn to_snapshot(&self) -> String {
        let p = &self.prior;
        let mut out = String::new();
        let _ = writeln!(out, "{SNAPSHOT_HEADER}");
        let _ = writeln!(out, "n_a={}", self.design.n_a());
        let _ = writeln!(out, "n_b={}", self.design.n_b());
        let _ = writeln!(out, "null={}", self.null.to_token());
        let _ = writeln!(out, "prior={},{},{},{}", p.alpha_a, p.beta_a, p.alpha_b, p.beta_b);
        let _ = writeln!(out, "config_hash={}", self.config_hash());
        let _ = writeln!(out, "m={}", self.m);
        let _ = writeln!(out, "ones_a={}", self.counts.ones_a);
        let _ = writeln!(out, "trials_a={}", self.counts.trials_a);
        let _ = writeln!(out, "ones_b={}", self.counts.ones_b);
        let _ = writeln!(out, "trials_b={}", self.counts.trials_b);
        let _ = writeln!(out, "log_e={}", self.log_e);
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some(SNAPSHOT_HEADER) => {}
            other => {
                return Err(Error::Snapshot(format!(
                    "expected header '{SNAPSHOT_HEADER}', found {other:?}"
                )))
            }
        }
        let mut fields = std::collections::HashMap::new();
        for line in lines {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Snapshot(format!("malformed line '{line}'")))?;
            if fields.insert(k, v).is_some() {
                return Err(Error::Snapshot(format!("duplicate key '{k}'")));
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Snapshot(format!("missing key '{k}'")))
        };
        fn parse<T: std::str::FromStr>(k: &str, v: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>()
                .map_err(|e| Error::Snapshot(format!("{k}: {e}")))
        }

        let design = BlockDesign::new(parse("n_a", get("n_a")?)?, parse("n_b", get("n_b")?)?)?;
        let null: NullSpec = get("null")?.parse()?;
        let prior_vals: Vec<f64> = get("prior")?
            .split(',')
            .map(|v| parse("prior", v))
            .collect::<Result<_>>()?;
        let [aa, ba, ab, bb] = prior_vals[..] else {
            return Err(Error::Snapshot("prior must have four values".into()));
        };
        let mut state = Self::new(null, design, BetaPrior::new(aa, ba, ab, bb)?)?;
        let expected_hash = state.config_hash();
        if get("config_hash")? != expected_hash {
            return Err(Error::Snapshot(format!(
                "config_hash mismatch: snapshot has {}, configuration hashes to {expected_hash}",
                get("config_hash")?
            )));
        }
        state.m = parse("m", get("m")?)?;
        state.counts = GroupCounts::new(
            parse("ones_a", get("ones_a")?)?,
            parse("trials_a", get("trials_a")?)?,
            parse("ones_b", get("ones_b")?)?,
            parse("trials_b", get("trials_b")?)?,
        )?;
        if state.counts.trials_a != state.m * u64::from(design.n_a())
            || state.counts.trials_b != state.m * u64::from(design.n_b())
        {
            return Err(Error::Snapshot(format!(
                "trial counts {}+{} inconsistent with m = {} blocks of {design}",
                state.counts.trials_a, state.counts.trials_b, state.m
            )));
        }
        state.log_e = parse("log_e", get("log_e")?)?;
        if !state.log_e.is_finite() {
            return Err(Error::Snapshot(format!("log_e must be finite, got {}", state.log_e)));
        }
        Ok(state)
    }
}

const SNAPSHOT_HEADER: &str = "# avtable e-process snapshot v1";
