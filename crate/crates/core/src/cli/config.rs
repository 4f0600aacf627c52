//! Shared settings, layered as flags over config file over defaults.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::input::InputFormat;
use crate::confseq::{EffectSize, GridSpec, ZeroRule};
use crate::eprocess::{Alpha, BetaPrior, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::model::{BlockDesign, ThetaPair};
use crate::projection::NullSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sequential test of one null: reports the log e-value per block.
    #[default]
    Test,
    /// Confidence sequence over an effect-size grid.
    Cs,
}

/// Every field is optional so layers can be merged; unset fields fall
/// through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Significance level in (0, 1).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,

    /// Group-a observations per block.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_a: Option<u32>,

    /// Group-b observations per block.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_b: Option<u32>,

    /// Symmetric Beta(γ, γ) prior for both groups.
    #[arg(long, global = true, conflicts_with = "prior")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,

    /// Beta prior as alpha_a,beta_a,alpha_b,beta_b.
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,

    /// Effect size for confidence sequences: rd, rr or lor.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect: Option<EffectSize>,

    /// Null hypothesis: equality, line:s:c, le:s:c, ge:s:c, lor-le:d or lor-ge:d.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null: Option<String>,

    /// Effect grid: linear:lo:hi:step, log:lo:hi:points or list:v1,v2,...
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,

    /// How the log-OR point 0 is kept: union or both.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_rule: Option<ZeroRule>,

    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,

    /// Success probabilities as theta_a,theta_b.
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub star: Option<Vec<f64>>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Simulated streams per experiment.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub streams: Option<u64>,

    /// Blocks per simulated stream.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<u64>,

    /// Most input rows allowed to wait for an incomplete block.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lookahead: Option<usize>,

    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<InputFormat>,

    /// Also track per-block (non-intersected) confidence sets in simulations.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instantaneous: Option<bool>,
}

impl Settings {
    pub fn defaults() -> Self {
        Self {
            alpha: Some(Alpha::default().value()),
            n_a: Some(1),
            n_b: Some(1),
            gamma: None,
            prior: Some(vec![DEFAULT_GAMMA; 4]),
            effect: Some(EffectSize::RiskDifference),
            null: Some(NullSpec::Equality.to_token()),
            grid: None,
            zero_rule: Some(ZeroRule::Union),
            mode: Some(Mode::Test),
            star: None,
            seed: Some(1),
            streams: Some(2000),
            blocks: Some(200),
            lookahead: Some(1000),
            format: Some(InputFormat::Auto),
            instantaneous: Some(false),
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `gamma` is shorthand for a symmetric `prior`.
    fn normalized(mut self) -> Self {
        if let Some(g) = self.gamma.take() {
            self.prior.get_or_insert_with(|| vec![g; 4]);
        }
        self
    }

    /// Fields set in `self` win over those in `below`.
    pub fn over(self, below: Settings) -> Settings {
        let (top, below) = (self.normalized(), below.normalized());
        Settings {
            alpha: top.alpha.or(below.alpha),
            n_a: top.n_a.or(below.n_a),
            n_b: top.n_b.or(below.n_b),
            gamma: None,
            prior: top.prior.or(below.prior),
            effect: top.effect.or(below.effect),
            null: top.null.or(below.null),
            grid: top.grid.or(below.grid),
            zero_rule: top.zero_rule.or(below.zero_rule),
            mode: top.mode.or(below.mode),
            star: top.star.or(below.star),
            seed: top.seed.or(below.seed),
            streams: top.streams.or(below.streams),
            blocks: top.blocks.or(below.blocks),
            lookahead: top.lookahead.or(below.lookahead),
            format: top.format.or(below.format),
            instantaneous: top.instantaneous.or(below.instantaneous),
        }
    }

    /// Fills the effect-dependent grid default so the dump is complete.
    pub fn completed(mut self) -> Self {
        if self.grid.is_none() {
            let effect = self.effect.unwrap_or(EffectSize::RiskDifference);
            self.grid = Some(effect.default_grid().to_token());
        }
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize to TOML")
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let missing = |field: &str| Error::Config(format!("{field}: no value"));
        let field = |field: &str, e: Error| Error::Config(format!("{field}: {e}"));

        let alpha = Alpha::new(self.alpha.ok_or_else(|| missing("alpha"))?).map_err(|e| field("alpha", e))?;
        let design = BlockDesign::new(
            self.n_a.ok_or_else(|| missing("n_a"))?,
            self.n_b.ok_or_else(|| missing("n_b"))?,
        )
        .map_err(|e| field("n_a/n_b", e))?;
        let prior = match self.prior.as_deref() {
            Some(&[a_a, b_a, a_b, b_b]) => BetaPrior::new(a_a, b_a, a_b, b_b).map_err(|e| field("prior", e))?,
            Some(p) => return Err(Error::Config(format!("prior: expected 4 values, got {}", p.len()))),
            None => match self.gamma {
                Some(g) => BetaPrior::symmetric(g).map_err(|e| field("gamma", e))?,
                None => return Err(missing("prior")),
            },
        };
        let effect = self.effect.ok_or_else(|| missing("effect"))?;
        let null: NullSpec = self
            .null
            .as_deref()
            .ok_or_else(|| missing("null"))?
            .parse()
            .map_err(|e| field("null", e))?;
        let grid = match self.grid.as_deref() {
            Some(token) => token.parse().map_err(|e| field("grid", e))?,
            None => effect.default_grid(),
        };
        let star = match self.star.as_deref() {
            Some(&[a, b]) => Some(ThetaPair::new(a, b).map_err(|e| field("star", e))?),
            Some(s) => return Err(Error::Config(format!("star: expected 2 values, got {}", s.len()))),
            None => None,
        };
        Ok(RunConfig {
            alpha,
            design,
            prior,
            effect,
            null,
            grid,
            zero_rule: self.zero_rule.ok_or_else(|| missing("zero_rule"))?,
            mode: self.mode.ok_or_else(|| missing("mode"))?,
            star,
            seed: self.seed.ok_or_else(|| missing("seed"))?,
            streams: self.streams.ok_or_else(|| missing("streams"))?,
            blocks: self.blocks.ok_or_else(|| missing("blocks"))?,
            lookahead: self.lookahead.ok_or_else(|| missing("lookahead"))?,
            format: self.format.ok_or_else(|| missing("format"))?,
            instantaneous: self.instantaneous.ok_or_else(|| missing("instantaneous"))?,
        })
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: Alpha,
    pub design: BlockDesign,
    pub prior: BetaPrior,
    pub effect: EffectSize,
    pub null: NullSpec,
    pub grid: GridSpec,
    pub zero_rule: ZeroRule,
    pub mode: Mode,
    pub star: Option<ThetaPair>,
    pub seed: u64,
    pub streams: u64,
    pub blocks: u64,
    pub lookahead: usize,
    pub format: InputFormat,
    pub instantaneous: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let cfg = Settings::defaults().resolve().unwrap();
        assert_eq!(cfg.alpha, Alpha::default());
        assert_eq!(cfg.null, NullSpec::Equality);
        assert_eq!(cfg.grid, EffectSize::RiskDifference.default_grid());
        assert_eq!(cfg.prior, BetaPrior::default());
    }

    #[test]
    fn precedence_flags_file_defaults() {
        let file: Settings = toml::from_str("alpha = 0.1\nseed = 9\ngamma = 0.5\n").unwrap();
        let flags = Settings {
            seed: Some(3),
            ..Settings::default()
        };
        let cfg = flags.over(file.over(Settings::defaults())).resolve().unwrap();
        assert_eq!(cfg.alpha.value(), 0.1);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.prior, BetaPrior::symmetric(0.5).unwrap());
        assert_eq!(cfg.blocks, 200);
    }

    #[test]
    fn dump_round_trips() {
        let s = Settings {
            effect: Some(EffectSize::LogOddsRatio),
            ..Settings::default()
        }
        .over(Settings::defaults())
        .completed();
        let back: Settings = toml::from_str(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.grid.as_deref(), Some("linear:-6:6:0.05"));
    }

    #[test]
    fn errors_name_fields() {
        let bad = Settings {
            alpha: Some(1.5),
            ..Settings::default()
        }
        .over(Settings::defaults());
        assert!(bad.resolve().unwrap_err().to_string().contains("alpha"));
        let bad = Settings {
            null: Some("line:5:1".into()),
            ..Settings::default()
        }
        .over(Settings::defaults());
        assert!(bad.resolve().unwrap_err().to_string().contains("null"));
        assert!(toml::from_str::<Settings>("colour = 1").is_err());
    }
}
