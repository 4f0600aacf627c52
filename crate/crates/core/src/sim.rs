//! Seeded data generation and Monte Carlo experiments.
//!
//! Every stream draws each group from its own ChaCha8 generator, seeded with
//! the experiment seed and placed on stream `2·index + group` (`a = 0`,
//! `b = 1`). A stream's first `m` blocks therefore do not depend on `m_max`,
//! on the other group's block size or on thread scheduling.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confseq::{
    insert_grid_point, ConfInterval, ConfSeqConfig, ConfSeqState, CsRecord, EffectSize, Family, GridSpec,
};
use crate::eprocess::{Alpha, BetaPrior, Decision, EProcessState};
use crate::error::{Error, Result};
use crate::model::{sigmoid, logit, Block, BlockDesign, Group, GroupCounts, ThetaPair};
use crate::projection::NullSpec;

/// Parameters shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub star: ThetaPair,
    pub design: BlockDesign,
    pub m_max: u64,
    pub n_streams: u64,
    pub seed: u64,
    pub alpha: Alpha,
    pub effect: EffectSize,
    pub prior: BetaPrior,
    /// Defaults to the effect size's own grid.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Also track per-block sets so running ⊆ instantaneous can be checked.
    #[serde(default)]
    pub instantaneous: bool,
}

impl SimConfig {
    pub fn new(star: ThetaPair, effect: EffectSize, m_max: u64, n_streams: u64, seed: u64) -> Self {
        Self {
            star,
            design: BlockDesign::balanced(),
            m_max,
            n_streams,
            seed,
            alpha: Alpha::default(),
            effect,
            prior: BetaPrior::default(),
            grid: None,
            instantaneous: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_max < 1 {
            return Err(Error::Config("m_max must be at least 1".into()));
        }
        if self.n_streams < 1 {
            return Err(Error::Config("n_streams must be at least 1".into()));
        }
        self.prior.validate()
    }

    fn grid_values(&self) -> Result<Vec<f64>> {
        self.grid.clone().unwrap_or_else(|| self.effect.default_grid()).values()
    }

    fn confseq_config(&self) -> ConfSeqConfig {
        ConfSeqConfig::new(self.effect, self.alpha, self.prior, self.design)
            .with_instantaneous(self.instantaneous)
    }
}

/// Monte Carlo standard error of a rejection frequency whose true value is `α`.
pub fn mc_sigma(alpha: f64, n_streams: u64) -> f64 {
    (alpha * (1.0 - alpha) / n_streams as f64).sqrt()
}

/// Infinite source of blocks for one stream of an experiment.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    star: ThetaPair,
    design: BlockDesign,
    rng_a: ChaCha8Rng,
    rng_b: ChaCha8Rng,
}

impl BlockSampler {
    pub fn new(star: ThetaPair, design: BlockDesign, seed: u64, stream: u64) -> Self {
        let rng = |group: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(2 * stream + group);
            r
        };
        Self {
            star,
            design,
            rng_a: rng(0),
            rng_b: rng(1),
        }
    }

    pub fn next_block(&mut self) -> Block {
        let draw = |rng: &mut ChaCha8Rng, theta: f64, n: u32| -> Vec<u8> {
            (0..n).map(|_| u8::from(rng.random::<f64>() < theta)).collect()
        };
        let ys_a = draw(&mut self.rng_a, self.star.get(Group::A), self.design.n_a());
        let ys_b = draw(&mut self.rng_b, self.star.get(Group::B), self.design.n_b());
        Block::new(ys_a, ys_b).expect("draws are binary")
    }
}

/// `m` blocks of independent Bernoulli draws: stream 0 of `seed`.
pub fn generate_stream(star: ThetaPair, design: BlockDesign, m: u64, seed: u64) -> Vec<Block> {
    let mut sampler = BlockSampler::new(star, design, seed, 0);
    (0..m).map(|_| sampler.next_block()).collect()
}

/// Smoothed per-group success rate for display: `(ones + 0.5) / (trials + 1)`.
pub fn display_mle(counts: &GroupCounts) -> (f64, f64) {
    let smooth = |ones: u64, trials: u64| (ones as f64 + 0.5) / (trials as f64 + 1.0);
    (
        smooth(counts.ones_a, counts.trials_a),
        smooth(counts.ones_b, counts.trials_b),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type1Summary {
    pub experiment: String,
    pub null: String,
    pub star: ThetaPair,
    pub alpha: f64,
    pub n_streams: u64,
    pub m_max: u64,
    pub seed: u64,
    pub rejections: u64,
    pub frequency: f64,
    pub mc_sigma: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// Fraction of streams whose e-process against `null` ever reaches `1/α`
/// within `m_max` blocks.
pub fn run_type1(config: &SimConfig, null: &NullSpec) -> Result<Type1Summary> {
    config.validate()?;
    null.validate()?;
    if !null.contains(config.star) {
        return Err(Error::Config(format!(
            "type-I experiment needs a star inside the null, but ({}, {}) is outside {null}",
            config.star.a(),
            config.star.b()
        )));
    }
    let rejected: Vec<bool> = (0..config.n_streams)
        .into_par_iter()
        .map(|idx| {
            let mut sampler = BlockSampler::new(config.star, config.design, config.seed, idx);
            let mut ep = EProcessState::new(*null, config.design, config.prior)?;
            for _ in 0..config.m_max {
                ep.update(&sampler.next_block())?;
                if ep.decision(config.alpha) == Decision::Reject {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect::<Result<_>>()?;
    let rejections = rejected.iter().filter(|&&r| r).count() as u64;
    let alpha = config.alpha.value();
    let frequency = rejections as f64 / config.n_streams as f64;
    let sigma = mc_sigma(alpha, config.n_streams);
    Ok(Type1Summary {
        experiment: "type1".into(),
        null: null.to_token(),
        star: config.star,
        alpha,
        n_streams: config.n_streams,
        m_max: config.m_max,
        seed: config.seed,
        rejections,
        frequency,
        mc_sigma: sigma,
        bound: alpha + 3.0 * sigma,
        within_bound: frequency <= alpha + 3.0 * sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub experiment: String,
    pub effect: EffectSize,
    pub star: ThetaPair,
    pub true_delta: f64,
    pub alpha: f64,
    pub n_streams: u64,
    pub m_max: u64,
    pub seed: u64,
    pub grid_points: usize,
    pub misses: u64,
    pub frequency: f64,
    pub mc_sigma: f64,
    pub bound: f64,
    pub within_bound: bool,
    /// Blocks at which the running set or interval grew.
    pub monotonicity_violations: u64,
    /// Blocks at which the running interval left the instantaneous one;
    /// `None` unless instantaneous sets were tracked.
    pub instantaneous_violations: Option<u64>,
}

#[derive(Debug, Default, Clone, Copy)]
struct StreamCoverage {
    missed: bool,
    monotonicity: u64,
    instantaneous: u64,
}

fn is_subset(inner: &[f64], outer: &[f64]) -> bool {
    let mut it = outer.iter();
    inner.iter().all(|x| it.any(|y| y == x))
}

/// Fraction of streams whose running confidence set excludes the true effect
/// at some `m ≤ m_max`. The true effect is added to the grid if absent.
pub fn run_coverage(config: &SimConfig) -> Result<CoverageSummary> {
    config.validate()?;
    let true_delta = config.effect.of(config.star);
    let mut grid = config.grid_values()?;
    insert_grid_point(&mut grid, true_delta);
    let cs_config = config.confseq_config();
    // Surface grid errors before fanning out.
    ConfSeqState::new(cs_config.clone(), &grid)?;

    let per_stream: Vec<StreamCoverage> = (0..config.n_streams)
        .into_par_iter()
        .map(|idx| {
            let mut sampler = BlockSampler::new(config.star, config.design, config.seed, idx);
            let mut cs = ConfSeqState::new(cs_config.clone(), &grid)?;
            let mut out = StreamCoverage::default();
            let mut prev_set = cs.current_set();
            let mut prev_iv = cs.current_interval();
            for _ in 0..config.m_max {
                cs.update(&sampler.next_block())?;
                let set = cs.current_set();
                let iv = cs.current_interval();
                if !is_subset(&set, &prev_set) || !iv.is_subset_of(&prev_iv) {
                    out.monotonicity += 1;
                }
                if let Some(inst) = cs.instantaneous_interval() {
                    if !iv.is_subset_of(&inst) {
                        out.instantaneous += 1;
                    }
                }
                if cs.is_rejected(true_delta) == Some(true) {
                    out.missed = true;
                }
                prev_set = set;
                prev_iv = iv;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let misses = per_stream.iter().filter(|s| s.missed).count() as u64;
    let alpha = config.alpha.value();
    let frequency = misses as f64 / config.n_streams as f64;
    let sigma = mc_sigma(alpha, config.n_streams);
    Ok(CoverageSummary {
        experiment: "coverage".into(),
        effect: config.effect,
        star: config.star,
        true_delta,
        alpha,
        n_streams: config.n_streams,
        m_max: config.m_max,
        seed: config.seed,
        grid_points: grid.len(),
        misses,
        frequency,
        mc_sigma: sigma,
        bound: alpha + 3.0 * sigma,
        within_bound: frequency <= alpha + 3.0 * sigma,
        monotonicity_violations: per_stream.iter().map(|s| s.monotonicity).sum(),
        instantaneous_violations: config
            .instantaneous
            .then(|| per_stream.iter().map(|s| s.instantaneous).sum()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedSummary {
    pub experiment: String,
    pub star: ThetaPair,
    pub true_delta: f64,
    pub n_streams: u64,
    pub m_max: u64,
    pub seed: u64,
    /// Streams in which every `{log OR ≤ δ}` process was rejected by `m_max`.
    pub plus_empty: u64,
    /// Streams in which every `{log OR ≥ δ}` process was rejected by `m_max`.
    pub minus_empty: u64,
    pub plus_frequency: f64,
    pub minus_frequency: f64,
}

/// How often each log-OR family is emptied within `m_max` blocks.
pub fn run_one_sided(config: &SimConfig) -> Result<OneSidedSummary> {
    config.validate()?;
    if config.effect != EffectSize::LogOddsRatio {
        return Err(Error::Config("one-sided experiment needs effect = lor".into()));
    }
    let grid = config.grid_values()?;
    let cs_config = config.confseq_config().with_instantaneous(false);
    ConfSeqState::new(cs_config.clone(), &grid)?;
    let per_stream: Vec<(bool, bool)> = (0..config.n_streams)
        .into_par_iter()
        .map(|idx| {
            let mut sampler = BlockSampler::new(config.star, config.design, config.seed, idx);
            let mut cs = ConfSeqState::new(cs_config.clone(), &grid)?;
            for _ in 0..config.m_max {
                cs.update(&sampler.next_block())?;
            }
            Ok((
                cs.family_fully_rejected(Family::Plus),
                cs.family_fully_rejected(Family::Minus),
            ))
        })
        .collect::<Result<_>>()?;
    let plus_empty = per_stream.iter().filter(|s| s.0).count() as u64;
    let minus_empty = per_stream.iter().filter(|s| s.1).count() as u64;
    let n = config.n_streams as f64;
    Ok(OneSidedSummary {
        experiment: "one_sided".into(),
        star: config.star,
        true_delta: config.effect.of(config.star),
        n_streams: config.n_streams,
        m_max: config.m_max,
        seed: config.seed,
        plus_empty,
        minus_empty,
        plus_frequency: plus_empty as f64 / n,
        minus_frequency: minus_empty as f64 / n,
    })
}

/// Per-block report of a confidence sequence over `blocks`, starting with
/// the `m = 0` row.
pub fn cs_trace(config: &ConfSeqConfig, grid: &[f64], blocks: &[Block]) -> Result<Vec<CsRecord>> {
    let mut cs = ConfSeqState::new(config.clone(), grid)?;
    let mut out = Vec::with_capacity(blocks.len() + 1);
    out.push(cs.record());
    for b in blocks {
        cs.update(b)?;
        out.push(cs.record());
    }
    Ok(out)
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig2,
    Fig3,
    FigA1,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig2" => Ok(Scenario::Fig2),
            "fig3" => Ok(Scenario::Fig3),
            "figa1" => Ok(Scenario::FigA1),
            _ => Err(Error::Config(format!("unknown scenario '{s}' (expected fig2, fig3 or figA1)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    pub m: u64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    pub mle_a: f64,
    pub mle_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3Row {
    pub m: u64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    pub plus_lower: f64,
    pub plus_upper: f64,
    pub plus_empty: bool,
    pub minus_lower: f64,
    pub minus_upper: f64,
    pub minus_empty: bool,
    pub mle_a: f64,
    pub mle_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigA1Row {
    pub m: u64,
    pub plain_lower: f64,
    pub plain_upper: f64,
    pub running_lower: f64,
    pub running_upper: f64,
    pub mle_a: f64,
    pub mle_b: f64,
}

/// Blocks per trace.
pub const FIG2_BLOCKS: u64 = 500;
pub const FIG3_BLOCKS: u64 = 500;
pub const FIGA1_BLOCKS: u64 = 100;

/// Star with the given `θ_a` and log odds ratio.
pub fn lor_star(theta_a: f64, lor: f64) -> ThetaPair {
    ThetaPair::new(theta_a, sigmoid(logit(theta_a) + lor)).expect("interior")
}

fn run_trace<R>(
    effect: EffectSize,
    star: ThetaPair,
    blocks: u64,
    seed: u64,
    instantaneous: bool,
    row: impl Fn(&ConfSeqState) -> R,
) -> Result<Vec<R>> {
    let config = ConfSeqConfig::new(effect, Alpha::default(), BetaPrior::default(), BlockDesign::balanced())
        .with_instantaneous(instantaneous);
    let mut cs = ConfSeqState::from_spec(config, &effect.default_grid())?;
    let mut rows = vec![row(&cs)];
    for block in generate_stream(star, BlockDesign::balanced(), blocks, seed) {
        cs.update(&block)?;
        rows.push(row(&cs));
    }
    Ok(rows)
}

fn fig2_rows(effect: EffectSize, star: ThetaPair, seed: u64) -> Result<Vec<Fig2Row>> {
    run_trace(effect, star, FIG2_BLOCKS, seed, false, |cs| {
        let iv = cs.current_interval();
        let (mle_a, mle_b) = display_mle(cs.counts());
        Fig2Row {
            m: cs.m(),
            delta_lower: iv.lower,
            delta_upper: iv.upper,
            mle_a,
            mle_b,
        }
    })
}

pub fn fig3_rows(star: ThetaPair, seed: u64) -> Result<Vec<Fig3Row>> {
    run_trace(EffectSize::LogOddsRatio, star, FIG3_BLOCKS, seed, false, |cs| {
        let iv = cs.current_interval();
        let plus = cs.family_interval(Family::Plus);
        let minus = cs.family_interval(Family::Minus);
        let (mle_a, mle_b) = display_mle(cs.counts());
        Fig3Row {
            m: cs.m(),
            delta_lower: iv.lower,
            delta_upper: iv.upper,
            plus_lower: plus.lower,
            plus_upper: plus.upper,
            plus_empty: plus.empty,
            minus_lower: minus.lower,
            minus_upper: minus.upper,
            minus_empty: minus.empty,
            mle_a,
            mle_b,
        }
    })
}

pub fn figa1_rows(star: ThetaPair, seed: u64) -> Result<Vec<FigA1Row>> {
    run_trace(EffectSize::RiskDifference, star, FIGA1_BLOCKS, seed, true, |cs| {
        let running = cs.current_interval();
        let plain = cs.instantaneous_interval().unwrap_or(ConfInterval::EMPTY);
        let (mle_a, mle_b) = display_mle(cs.counts());
        FigA1Row {
            m: cs.m(),
            plain_lower: plain.lower,
            plain_upper: plain.upper,
            running_lower: running.lower,
            running_upper: running.upper,
            mle_a,
            mle_b,
        }
    })
}

/// Stars used by the traces.
pub const FIG2_RD_STAR: (f64, f64) = (0.05, 0.35);
pub const FIG2_RR_STAR: (f64, f64) = (0.2, 0.5);
/// `(θ_a, log OR)` for the positive and negative log-OR traces.
pub const FIG3_POS: (f64, f64) = (0.2, 2.5);
pub const FIG3_NEG: (f64, f64) = (0.8, -2.5);
pub const FIGA1_STAR: (f64, f64) = (0.05, 0.35);

/// Writes the CSV traces of `scenario` into `out_dir` and returns their paths.
pub fn figure_traces(scenario: Scenario, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let tp = |(a, b): (f64, f64)| ThetaPair::new(a, b).expect("constant star");
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut csv_bytes = |name: &str, write: &dyn Fn(&mut Vec<u8>) -> Result<()>| -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        files.push((name.to_string(), buf));
        Ok(())
    };
    match scenario {
        Scenario::Fig2 => {
            let rd = fig2_rows(EffectSize::RiskDifference, tp(FIG2_RD_STAR), seed)?;
            let rr = fig2_rows(EffectSize::RelativeRisk, tp(FIG2_RR_STAR), seed)?;
            csv_bytes("fig2_rd.csv", &|b| write_csv(b, &rd))?;
            csv_bytes("fig2_rr.csv", &|b| write_csv(b, &rr))?;
        }
        Scenario::Fig3 => {
            let pos = fig3_rows(lor_star(FIG3_POS.0, FIG3_POS.1), seed)?;
            let neg = fig3_rows(lor_star(FIG3_NEG.0, FIG3_NEG.1), seed)?;
            csv_bytes("fig3_pos.csv", &|b| write_csv(b, &pos))?;
            csv_bytes("fig3_neg.csv", &|b| write_csv(b, &neg))?;
        }
        Scenario::FigA1 => {
            let rows = figa1_rows(tp(FIGA1_STAR), seed)?;
            csv_bytes("figA1.csv", &|b| write_csv(b, &rows))?;
        }
    }
    let mut paths = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
