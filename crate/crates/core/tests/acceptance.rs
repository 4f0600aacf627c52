//! Acceptance criteria. Each test writes one `PASS`/`FAIL` line to the real
//! stdout (bypassing libtest capture) and then asserts the criterion at its
//! stated tolerance.

use std::io::Write;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use avtable::confseq::EffectSize;
use avtable::eprocess::{block_evalue, equality_mixture_evalue};
use avtable::model::{bern_log_pmf, kl_block, logit, sigmoid, Block, BlockDesign, ThetaPair};
use avtable::projection::oracle::grid_oracle_project;
use avtable::projection::{project, project_equality, NullSpec};
use avtable::sim::{self, lor_star, run_coverage, run_one_sided, run_type1, CoverageSummary, Scenario, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("acceptance {id} [{name}]: {verdict} - {detail}\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "acceptance criterion {id} failed: {detail}");
}

fn tp(a: f64, b: f64) -> ThetaPair {
    ThetaPair::new(a, b).unwrap()
}

/// A random valid null of the given variant (0..6).
fn random_null(rng: &mut ChaCha8Rng, variant: usize) -> NullSpec {
    let through = |rng: &mut ChaCha8Rng| {
        let (pa, pb) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
        let c: f64 = rng.random_range(-3.0..3.0);
        (pb - c * pa, c)
    };
    match variant {
        0 => NullSpec::Equality,
        1 => {
            let (s, c) = through(rng);
            NullSpec::Line { s, c }
        }
        2 => {
            let (s, c) = through(rng);
            NullSpec::HalfPlaneLe { s, c }
        }
        3 => {
            let (s, c) = through(rng);
            NullSpec::HalfPlaneGe { s, c }
        }
        4 => NullSpec::LogOddsLe {
            delta: rng.random_range(0.0..4.0),
        },
        _ => NullSpec::LogOddsGe {
            delta: rng.random_range(-4.0..0.0),
        },
    }
}

/// `k` interior points on the boundary of `null`, evenly spread in `θ_a`.
fn boundary_points(null: &NullSpec, k: usize) -> Vec<ThetaPair> {
    let on = |ta: f64| -> Option<f64> {
        match *null {
            NullSpec::Equality => Some(ta),
            NullSpec::Line { s, c } | NullSpec::HalfPlaneLe { s, c } | NullSpec::HalfPlaneGe { s, c } => {
                Some(s + c * ta)
            }
            NullSpec::LogOddsLe { delta } | NullSpec::LogOddsGe { delta } => Some(sigmoid(logit(ta) + delta)),
        }
        .filter(|&tb| tb > 0.0 && tb < 1.0)
    };
    // Oversample so short segments still yield k points.
    let n = 200 * k;
    let all: Vec<ThetaPair> = (1..n)
        .filter_map(|i| {
            let ta = i as f64 / n as f64;
            on(ta).map(|tb| tp(ta, tb))
        })
        .collect();
    let stride = (all.len() / k).max(1);
    all.into_iter().step_by(stride).take(k).collect()
}

fn four_blocks() -> [Block; 4] {
    [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(a, b)| Block::new(vec![a], vec![b]).unwrap())
}

#[test]
fn criterion_1_exact_e_variable() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let design = BlockDesign::balanced();
    let blocks = four_blocks();
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    for cfg in 0..100 {
        let null = random_null(&mut rng, cfg % 6);
        let star = tp(rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
        let circ = project(&null, star, design).unwrap().theta_circ;
        let points = boundary_points(&null, 50);
        assert_eq!(points.len(), 50, "{null}");
        for theta in points {
            let expectation: f64 = blocks
                .iter()
                .map(|b| {
                    let p = bern_log_pmf(theta.a(), b.ys_a()[0]).unwrap() + bern_log_pmf(theta.b(), b.ys_b()[0]).unwrap();
                    let log_s = if circ == star { 0.0 } else { block_evalue(star, circ, b).unwrap() };
                    (p + log_s).exp()
                })
                .sum();
            worst = worst.max(expectation);
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1.0 + 1e-9 && elapsed < Duration::from_secs(10);
    report(
        1,
        "exact E-variable",
        pass,
        &format!("max E[S] = {worst:.15} over {checked} null points (limit 1 + 1e-9), {elapsed:.2?}"),
    );
}

/// Stationarity residual along a line `θ_b = s + c·θ_a`.
fn line_residual(s: f64, c: f64, star: ThetaPair, ta: f64, design: BlockDesign) -> f64 {
    let tb = s + c * ta;
    let (na, nb) = (f64::from(design.n_a()), f64::from(design.n_b()));
    na * (ta - star.a()) / (ta * (1.0 - ta)) + c * nb * (tb - star.b()) / (tb * (1.0 - tb))
}

#[test]
fn criterion_2_projection_matches_grid_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_gap, mut worst_residual) = (0.0f64, 0.0f64);
    let mut lines = 0;
    for cfg in 0..200 {
        let null = random_null(&mut rng, cfg % 6);
        let star = tp(rng.random_range(0.02..0.98), rng.random_range(0.02..0.98));
        let design = BlockDesign::new(rng.random_range(1..=3), rng.random_range(1..=3)).unwrap();
        let fast = project(&null, star, design).unwrap();
        let oracle = grid_oracle_project(&null, star, design, 1e-5).unwrap();
        worst_gap = worst_gap.max((fast.kl_value - oracle.kl_value).abs());
        assert!((kl_block(star, fast.theta_circ, design) - fast.kl_value).abs() <= 1e-15);
        let line = match null {
            NullSpec::Line { s, c } => Some((s, c)),
            NullSpec::HalfPlaneLe { s, c } | NullSpec::HalfPlaneGe { s, c } if !fast.interior_hit => Some((s, c)),
            NullSpec::Equality if !fast.interior_hit => Some((0.0, 1.0)),
            _ => None,
        };
        if let Some((s, c)) = line {
            lines += 1;
            let r = line_residual(s, c, star, fast.theta_circ.a(), design);
            worst_residual = worst_residual.max(r.abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_gap <= 1e-8 && worst_residual < 1e-8 && elapsed < Duration::from_secs(30);
    report(
        2,
        "projection correctness",
        pass,
        &format!(
            "max |KL - oracle| = {worst_gap:.3e} (limit 1e-8), max line residual = {worst_residual:.3e} over {lines} line projections (limit 1e-8), {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_3_equality_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_mean = 0.0f64;
    for _ in 0..1000 {
        let design = BlockDesign::new(rng.random_range(1..=6), rng.random_range(1..=6)).unwrap();
        let star = tp(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let p = project_equality(star, design).unwrap();
        let (na, nb) = (f64::from(design.n_a()), f64::from(design.n_b()));
        let mean = (na * star.a() + nb * star.b()) / (na + nb);
        worst_mean = worst_mean.max((p.theta_circ.a() - mean).abs().max((p.theta_circ.b() - mean).abs()));
    }
    let mut worst_gap = 0.0f64;
    for _ in 0..10_000 {
        let design = BlockDesign::new(rng.random_range(1..=4), rng.random_range(1..=4)).unwrap();
        let star = tp(rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
        let ys = |n: u32, rng: &mut ChaCha8Rng| (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect::<Vec<_>>();
        let block = Block::new(ys(design.n_a(), &mut rng), ys(design.n_b(), &mut rng)).unwrap();
        let circ = project_equality(star, design).unwrap().theta_circ;
        let mixture = equality_mixture_evalue(star, &block, design).unwrap().exp();
        let projected = block_evalue(star, circ, &block).unwrap().exp();
        worst_gap = worst_gap.max((mixture - projected).abs() / projected.max(1.0));
    }
    let pass = worst_mean <= 1e-14 && worst_gap <= 1e-12;
    report(
        3,
        "equality closed form",
        pass,
        &format!("max |θ° - weighted mean| = {worst_mean:.3e} (limit 1e-14), max mixture vs projected e-value gap = {worst_gap:.3e} over 1e4 blocks (limit 1e-12)"),
    );
}

#[test]
fn criterion_4_type_one_error() {
    let start = Instant::now();
    let cases = [
        (NullSpec::Equality, tp(0.5, 0.5)),
        (NullSpec::HalfPlaneLe { s: 0.1, c: 1.0 }, tp(0.2, 0.3)),
        (NullSpec::HalfPlaneGe { s: 0.1, c: 1.0 }, tp(0.2, 0.3)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (null, star)) in cases.iter().enumerate() {
        let cfg = SimConfig::new(*star, EffectSize::RiskDifference, 200, 2000, 4000 + i as u64);
        let s = run_type1(&cfg, null).unwrap();
        pass &= s.frequency <= 0.0646;
        parts.push(format!("{} at ({}, {}): {:.4}", s.null, star.a(), star.b(), s.frequency));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(180);
    report(
        4,
        "type-I error",
        pass,
        &format!("{} (limit 0.0646, 2000 streams x 200 blocks), {elapsed:.2?}", parts.join("; ")),
    );
}

fn coverage_runs() -> &'static (Vec<CoverageSummary>, Duration) {
    static RUNS: OnceLock<(Vec<CoverageSummary>, Duration)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let settings = [
            (EffectSize::RiskDifference, tp(0.05, 0.35)),
            (EffectSize::RelativeRisk, tp(0.2, 0.5)),
            (EffectSize::LogOddsRatio, lor_star(0.2, 2.5)),
        ];
        let runs = settings
            .iter()
            .enumerate()
            .map(|(i, &(effect, star))| {
                run_coverage(&SimConfig::new(star, effect, 200, 1000, 5000 + i as u64)).unwrap()
            })
            .collect();
        (runs, start.elapsed())
    })
}

#[test]
fn criterion_5_coverage() {
    let (runs, elapsed) = coverage_runs();
    let bound = 0.05 + 3.0 * sim::mc_sigma(0.05, 1000);
    let pass = runs.iter().all(|r| r.frequency <= bound) && *elapsed < Duration::from_secs(300);
    let parts: Vec<String> = runs
        .iter()
        .map(|r| format!("{} (true {:.4}): {:.4}", r.effect, r.true_delta, r.frequency))
        .collect();
    report(
        5,
        "coverage",
        pass,
        &format!("miscoverage {} (limit {bound:.4}, 1000 streams x 200 blocks), {elapsed:.2?}", parts.join("; ")),
    );
}

#[test]
fn criterion_6_monotone_running_intersection() {
    let (runs, _) = coverage_runs();
    let mut fig_a1 = SimConfig::new(tp(0.05, 0.35), EffectSize::RiskDifference, 100, 100, 6000);
    fig_a1.instantaneous = true;
    let extra = run_coverage(&fig_a1).unwrap();
    let violations: u64 = runs.iter().chain([&extra]).map(|r| r.monotonicity_violations).sum();
    let streams: u64 = runs.iter().chain([&extra]).map(|r| r.n_streams).sum();
    report(
        6,
        "monotone running intersection",
        violations == 0,
        &format!("{violations} set or interval growth events across {streams} streams (limit 0)"),
    );
}

#[test]
fn criterion_7_running_inside_instantaneous() {
    let mut cfg = SimConfig::new(tp(0.05, 0.35), EffectSize::RiskDifference, 100, 100, 7000);
    cfg.instantaneous = true;
    let s = run_coverage(&cfg).unwrap();
    let violations = s.instantaneous_violations.unwrap();
    report(
        7,
        "running interval within instantaneous interval",
        violations == 0,
        &format!("{violations} violating blocks across 100 streams x 100 blocks at θ_a = 0.05, δ = 0.3 (limit 0)"),
    );
}

#[test]
fn criterion_8_one_sided_family_emptied() {
    let pos = run_one_sided(&SimConfig::new(lor_star(0.2, 2.5), EffectSize::LogOddsRatio, 500, 200, 8000)).unwrap();
    let neg = run_one_sided(&SimConfig::new(lor_star(0.8, -2.5), EffectSize::LogOddsRatio, 500, 200, 8001)).unwrap();
    let pass = pos.minus_frequency >= 0.9 && neg.plus_frequency >= 0.9;
    report(
        8,
        "one-sided family emptied",
        pass,
        &format!(
            "lOR 2.5 at θ_a = 0.2: CS- fully rejected in {:.3} of streams (CS+ {:.3}); lOR -2.5 at θ_a = 0.8: CS+ fully rejected in {:.3} (CS- {:.3}); limit 0.9, 200 streams x 500 blocks",
            pos.minus_frequency, pos.plus_frequency, neg.plus_frequency, neg.minus_frequency
        ),
    );
}

fn run_cli(args: &[&str], stdin: &[u8]) -> (i32, Vec<u8>) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_avtable"))
        .args(args)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    let out = child.wait_with_output().unwrap();
    (out.status.code().unwrap(), out.stdout)
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_9_determinism() {
    let mut checks = Vec::new();

    let cfg = SimConfig::new(tp(0.5, 0.5), EffectSize::RiskDifference, 100, 200, 9);
    let a = serde_json::to_string(&run_type1(&cfg, &NullSpec::Equality).unwrap()).unwrap();
    let b = serde_json::to_string(&run_type1(&cfg, &NullSpec::Equality).unwrap()).unwrap();
    checks.push(("type1 summary", a == b));
    let mut cov = SimConfig::new(lor_star(0.2, 2.5), EffectSize::LogOddsRatio, 100, 50, 9);
    cov.instantaneous = true;
    let a = serde_json::to_string(&run_coverage(&cov).unwrap()).unwrap();
    let b = serde_json::to_string(&run_coverage(&cov).unwrap()).unwrap();
    checks.push(("coverage summary", a == b));

    for scenario in [Scenario::Fig2, Scenario::Fig3, Scenario::FigA1] {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        sim::figure_traces(scenario, 7, d1.path()).unwrap();
        sim::figure_traces(scenario, 7, d2.path()).unwrap();
        checks.push(("figure traces", dir_bytes(d1.path()) == dir_bytes(d2.path())));
    }

    let stream: String = sim::generate_stream(tp(0.2, 0.6), BlockDesign::balanced(), 150, 3)
        .iter()
        .map(|b| format!("a,{}\nb,{}\n", b.ys_a()[0], b.ys_b()[0]))
        .collect();
    for args in [
        &["analyze", "--mode", "test"][..],
        &["analyze", "--mode", "cs", "--effect", "lor"][..],
        &["simulate", "type1", "--streams", "100", "--blocks", "50", "--seed", "4"][..],
        &["simulate", "coverage", "--streams", "20", "--blocks", "50", "--effect", "rr"][..],
        &["project", "--null", "lor-le:1", "--star", "0.2,0.8"][..],
    ] {
        let first = run_cli(args, stream.as_bytes());
        let second = run_cli(args, stream.as_bytes());
        checks.push(("cli run", first == second && !first.1.is_empty()));
    }
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        let out = d.path().to_str().unwrap();
        assert_eq!(run_cli(&["trace", "fig2", "--seed", "7", "--out-dir", out], b"").0, 0);
    }
    checks.push(("cli trace", dir_bytes(d1.path()) == dir_bytes(d2.path())));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(
        9,
        "determinism",
        failed.is_empty(),
        &format!("{} of {} repeated runs byte-identical{}", checks.len() - failed.len(), checks.len(),
            if failed.is_empty() { String::new() } else { format!("; differing: {}", failed.join(", ")) }),
    );
}
