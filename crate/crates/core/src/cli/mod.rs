//! The `avtable` command line.
//!
//! Exit codes: 0 when a test continues (or any other command succeeds), 10
//! when a test rejects, 2 for invalid input or configuration, 1 for other
//! runtime failures.

pub mod config;
pub mod input;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::confseq::{ConfSeqConfig, ConfSeqState};
use crate::eprocess::{Decision, EProcessState};
use crate::error::{Error, Result};
use crate::projection::project;
use crate::sim::{self, Scenario, SimConfig};

pub use config::{Mode, RunConfig, Settings};
use input::{read_rows, BlockAssembler};

pub const EXIT_CONTINUE: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_REJECT: i32 = 10;

#[derive(Debug, Parser)]
#[command(
    name = "avtable",
    version,
    about = "Anytime-valid tests and confidence sequences for streams of 2x2 tables"
)]
pub struct Cli {
    /// TOML file supplying any of the shared settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Print the resolved settings as TOML and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(flatten)]
    pub settings: Settings,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a recorded or live stream of `group,outcome` rows.
    Analyze {
        /// Input file; `-` or absent reads stdin.
        input: Option<PathBuf>,
        /// Report destination; stdout if absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// In cs mode, also write every process's log e-value per block here.
        #[arg(long)]
        per_point: Option<PathBuf>,
    },
    /// Print the KL projection of --star onto --null.
    Project,
    /// Run a Monte Carlo experiment and print a JSON summary line.
    Simulate {
        #[arg(value_enum)]
        experiment: Experiment,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write CSV traces for one of the figure scenarios: fig2, fig3 or figA1.
    Trace {
        scenario: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Any-time rejection rate of a test whose null holds.
    Type1,
    /// Any-time miscoverage rate of a confidence sequence.
    Coverage,
    /// How often each log-OR family is fully rejected.
    OneSided,
}

/// Exit status for an error: 1 for I/O and numerical failures, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Projection(_) | Error::Snapshot(_) => EXIT_RUNTIME,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` and runs the command. Never panics on bad input; returns
/// the process exit status.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(stdout, "{rendered}");
                EXIT_CONTINUE
            };
        }
    };
    match dispatch(cli, stdin, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let file = match &cli.config {
        Some(path) => Settings::from_toml_file(path)?,
        None => Settings::default(),
    };
    let settings = cli.settings.over(file.over(Settings::defaults())).completed();
    if cli.print_config {
        write!(stdout, "{}", settings.to_toml()).map_err(|e| Error::io("<stdout>", e))?;
        return Ok(EXIT_CONTINUE);
    }
    let cfg = settings.resolve()?;
    match cli.command {
        Command::Analyze {
            input,
            output,
            per_point,
        } => {
            let reader: Box<dyn BufRead + '_> = match input.as_deref() {
                None => Box::new(stdin),
                Some(p) if p == Path::new("-") => Box::new(stdin),
                Some(p) => Box::new(BufReader::new(File::open(p).map_err(|e| Error::io(p, e))?)),
            };
            let mut out = Output::open(output.as_deref(), stdout)?;
            let per_point = per_point.as_deref().map(create_file).transpose()?;
            analyze(&cfg, reader, &mut out, per_point, stderr)
        }
        Command::Project => {
            let star = cfg
                .star
                .ok_or_else(|| Error::Config("star: required for project (--star A,B)".into()))?;
            let p = project(&cfg.null, star, cfg.design)?;
            #[derive(Serialize)]
            struct ProjectRow {
                theta_a: f64,
                theta_b: f64,
                kl_value: f64,
                member: bool,
            }
            let row = ProjectRow {
                theta_a: p.theta_circ.a(),
                theta_b: p.theta_circ.b(),
                kl_value: p.kl_value,
                member: p.interior_hit,
            };
            sim::write_csv(stdout, &[row])?;
            Ok(EXIT_CONTINUE)
        }
        Command::Simulate { experiment, output } => {
            let line = simulate(&cfg, experiment)?;
            let mut out = Output::open(output.as_deref(), stdout)?;
            writeln!(out, "{line}").map_err(|e| Error::io(out.name(), e))?;
            out.flush().map_err(|e| Error::io(out.name(), e))?;
            Ok(EXIT_CONTINUE)
        }
        Command::Trace { scenario, out_dir } => {
            let scenario: Scenario = scenario.parse()?;
            for path in sim::figure_traces(scenario, cfg.seed, &out_dir)? {
                writeln!(stdout, "{}", path.display()).map_err(|e| Error::io("<stdout>", e))?;
            }
            Ok(EXIT_CONTINUE)
        }
    }
}

fn create_file(path: &Path) -> Result<(PathBuf, File)> {
    Ok((path.to_path_buf(), File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Either a named file or the caller's stdout.
enum Output<'a> {
    File(PathBuf, io::BufWriter<File>),
    Stdout(&'a mut dyn Write),
}

impl<'a> Output<'a> {
    fn open(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Self> {
        Ok(match path {
            Some(p) => {
                let (p, f) = create_file(p)?;
                Output::File(p, io::BufWriter::new(f))
            }
            None => Output::Stdout(stdout),
        })
    }

    fn name(&self) -> String {
        match self {
            Output::File(p, _) => p.display().to_string(),
            Output::Stdout(_) => "<stdout>".into(),
        }
    }
}

impl Write for Output<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Output::File(_, w) => w.write(buf),
            Output::Stdout(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Output::File(_, w) => w.flush(),
            Output::Stdout(w) => w.flush(),
        }
    }
}

#[derive(Serialize)]
struct TestRow {
    m: u64,
    log_e: f64,
    decision: Decision,
}

/// Row-by-row CSV sink that flushes after every record, so live streams
/// see each block as soon as it completes.
struct CsvSink<W: Write> {
    name: String,
    inner: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    fn new(name: String, w: W) -> Self {
        Self {
            name,
            inner: csv::Writer::from_writer(w),
        }
    }

    fn put<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.inner
            .serialize(row)
            .and_then(|()| self.inner.flush().map_err(Into::into))
            .map_err(|e| Error::io(&self.name, e))
    }
}

fn analyze(
    cfg: &RunConfig,
    reader: Box<dyn BufRead + '_>,
    out: &mut Output<'_>,
    per_point: Option<(PathBuf, File)>,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let mut assembler = BlockAssembler::new(cfg.design, cfg.lookahead)?;
    let rows = read_rows(reader, cfg.format)?;
    let name = out.name();
    let mut sink = CsvSink::new(name, out);

    let code = match cfg.mode {
        Mode::Test => {
            let mut ep = EProcessState::new(cfg.null, cfg.design, cfg.prior)?;
            // Rejection is final: a test that crossed 1/α has already stopped.
            let mut decision = ep.decision(cfg.alpha);
            sink.put(&TestRow {
                m: 0,
                log_e: 0.0,
                decision,
            })?;
            for row in rows {
                if let Some(block) = assembler.push(row?)? {
                    ep.update(&block)?;
                    if decision == Decision::Continue {
                        decision = ep.decision(cfg.alpha);
                    }
                    sink.put(&TestRow {
                        m: ep.m(),
                        log_e: ep.log_e(),
                        decision,
                    })?;
                }
            }
            warn_pending(&assembler, stderr);
            let _ = writeln!(
                stderr,
                "decision: {decision} after {} blocks (log_e = {}, threshold = {})",
                ep.m(),
                ep.log_e(),
                cfg.alpha.log_threshold()
            );
            if decision == Decision::Reject {
                EXIT_REJECT
            } else {
                EXIT_CONTINUE
            }
        }
        Mode::Cs => {
            let mut cs_config = ConfSeqConfig::new(cfg.effect, cfg.alpha, cfg.prior, cfg.design);
            cs_config.zero_rule = cfg.zero_rule;
            let mut cs = ConfSeqState::from_spec(cs_config, &cfg.grid)?;
            let mut points = per_point.map(|(p, f)| CsvSink::new(p.display().to_string(), io::BufWriter::new(f)));
            let mut emit = |cs: &ConfSeqState, points: &mut Option<CsvSink<_>>| -> Result<()> {
                sink.put(&cs.record())?;
                if let Some(pp) = points {
                    for rec in cs.point_log_e() {
                        pp.put(&rec)?;
                    }
                }
                Ok(())
            };
            emit(&cs, &mut points)?;
            for row in rows {
                if let Some(block) = assembler.push(row?)? {
                    cs.update(&block)?;
                    emit(&cs, &mut points)?;
                }
            }
            warn_pending(&assembler, stderr);
            let iv = cs.current_interval();
            let _ = if iv.empty {
                writeln!(stderr, "interval: empty after {} blocks", cs.m())
            } else {
                writeln!(
                    stderr,
                    "interval: [{}, {}] after {} blocks ({} grid points alive)",
                    iv.lower,
                    iv.upper,
                    cs.m(),
                    cs.current_set().len()
                )
            };
            EXIT_CONTINUE
        }
    };
    Ok(code)
}

fn warn_pending(assembler: &BlockAssembler, stderr: &mut dyn Write) {
    let (a, b) = assembler.pending();
    if a + b > 0 {
        let _ = writeln!(
            stderr,
            "warning: incomplete trailing block ignored ({a} group-a and {b} group-b rows)"
        );
    }
}

fn simulate(cfg: &RunConfig, experiment: Experiment) -> Result<String> {
    let effect = match experiment {
        Experiment::OneSided => crate::confseq::EffectSize::LogOddsRatio,
        _ => cfg.effect,
    };
    let star = cfg.star.unwrap_or_else(|| default_star(experiment, effect));
    let sim = SimConfig {
        star,
        design: cfg.design,
        m_max: cfg.blocks,
        n_streams: cfg.streams,
        seed: cfg.seed,
        alpha: cfg.alpha,
        effect,
        prior: cfg.prior,
        grid: Some(if effect == cfg.effect {
            cfg.grid.clone()
        } else {
            effect.default_grid()
        }),
        instantaneous: cfg.instantaneous,
    };
    let json = match experiment {
        Experiment::Type1 => serde_json::to_string(&sim::run_type1(&sim, &cfg.null)?),
        Experiment::Coverage => serde_json::to_string(&sim::run_coverage(&sim)?),
        Experiment::OneSided => serde_json::to_string(&sim::run_one_sided(&sim)?),
    };
    Ok(json.expect("summaries serialize"))
}

fn default_star(experiment: Experiment, effect: crate::confseq::EffectSize) -> crate::model::ThetaPair {
    use crate::confseq::EffectSize::*;
    let tp = |(a, b)| crate::model::ThetaPair::new(a, b).expect("constant star");
    match (experiment, effect) {
        (Experiment::Type1, _) => tp((0.5, 0.5)),
        (_, RiskDifference) => tp(sim::FIG2_RD_STAR),
        (_, RelativeRisk) => tp(sim::FIG2_RR_STAR),
        (_, LogOddsRatio) => sim::lor_star(sim::FIG3_POS.0, sim::FIG3_POS.1),
    }
}
