//! Reverse information projection of a point alternative onto a convex null
//! set in the unit square.
//!
//! For a closed convex null `Θ0` that meets the interior of `[0, 1]²` and an
//! interior alternative `θ*`, the block KL `kl_block(θ*, ·)` has a unique
//! minimizer `θ°` over `Θ0`. It equals `θ*` when `θ* ∈ Θ0`, and otherwise sits
//! on the part of the boundary of `Θ0` that lies strictly inside the square.
//! Every null handled here has a one-dimensional boundary, so the search is a
//! monotone root-finding problem along it:
//!
//! * straight line `θ_b = s + c·θ_a`: the derivative of the KL along the line
//!   is `n_a (θ_a - θ*_a) / (θ_a (1 - θ_a)) + c · n_b (θ_b - θ*_b) / (θ_b (1 - θ_b))`,
//!   increasing from `-inf` to `+inf` across the open segment;
//! * log-odds curve `logit θ_b = logit θ_a + δ`: the derivative has the sign of
//!   `n_a (θ_a - θ*_a) + n_b (θ_b - θ*_b)`, also increasing in `θ_a`.
//!
//! Both are solved by bisection down to adjacent floating-point values.

mod null;
pub mod oracle;

pub use null::{NullSpec, MEMBERSHIP_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_open_unit, kl_block, BlockDesign, ThetaPair};

/// Result of projecting an alternative onto a null set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// The KL minimizer `θ°`.
    pub theta_circ: ThetaPair,
    /// `kl_block(star, theta_circ, design)`.
    pub kl_value: f64,
    /// True iff the alternative already belongs to the null, so `θ° = θ*`.
    pub interior_hit: bool,
}

impl Projection {
    fn member(star: ThetaPair) -> Self {
        Self {
            theta_circ: star,
            kl_value: 0.0,
            interior_hit: true,
        }
    }

    fn boundary(star: ThetaPair, circ: ThetaPair, design: BlockDesign) -> Self {
        Self {
            theta_circ: circ,
            kl_value: kl_block(star, circ, design),
            interior_hit: false,
        }
    }
}

/// Closed-form check that `theta` lies in `null`.
pub fn membership(null: &NullSpec, theta: ThetaPair) -> bool {
    null.contains(theta)
}

/// Projects `star` onto `null`, dispatching on the null's shape.
pub fn project(null: &NullSpec, star: ThetaPair, design: BlockDesign) -> Result<Projection> {
    match *null {
        NullSpec::Equality => project_equality(star, design),
        NullSpec::Line { s, c } => project_line(s, c, star, design),
        NullSpec::HalfPlaneLe { .. } | NullSpec::HalfPlaneGe { .. } => {
            project_halfplane(null, star, design)
        }
        NullSpec::LogOddsLe { .. } | NullSpec::LogOddsGe { .. } => {
            project_log_odds(null, star, design)
        }
    }
}

fn require_interior(star: ThetaPair) -> Result<()> {
    if star.is_interior() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alternative {star} must lie strictly inside the unit square"
        )))
    }
}

/// Projection onto `θ_a = θ_b`: the design-weighted mean of the two rates.
pub fn project_equality(star: ThetaPair, design: BlockDesign) -> Result<Projection> {
    require_interior(star)?;
    if star.a() == star.b() {
        return Ok(Projection::member(star));
    }
    let (n_a, n_b) = (f64::from(design.n_a()), f64::from(design.n_b()));
    let pooled = (n_a * star.a() + n_b * star.b()) / f64::from(design.n());
    let circ = ThetaPair::new_unchecked(pooled, pooled);
    Ok(Projection::boundary(star, circ, design))
}

/// Projection onto the line `θ_b = s + c·θ_a`.
pub fn project_line(s: f64, c: f64, star: ThetaPair, design: BlockDesign) -> Result<Projection> {
    let null = NullSpec::Line { s, c };
    null.validate()?;
    require_interior(star)?;
    if null.contains(star) {
        return Ok(Projection::member(star));
    }
    line_minimizer(s, c, star, design)
}

/// Projection onto a half-plane `θ_b ≤ s + c·θ_a` or `θ_b ≥ s + c·θ_a`.
/// Non-members project onto the boundary line.
pub fn project_halfplane(null: &NullSpec, star: ThetaPair, design: BlockDesign) -> Result<Projection> {
    let (s, c) = match *null {
        NullSpec::HalfPlaneLe { s, c } | NullSpec::HalfPlaneGe { s, c } => (s, c),
        _ => {
            return Err(Error::InvalidNull(format!(
                "{null} is not a half-plane null"
            )))
        }
    };
    null.validate()?;
    require_interior(star)?;
    if null.contains(star) {
        return Ok(Projection::member(star));
    }
    line_minimizer(s, c, star, design)
}

/// Projection onto `{log OR ≤ δ}` (δ ≥ 0) or `{log OR ≥ δ}` (δ ≤ 0).
/// Non-members project onto the curve `log OR = δ`.
pub fn project_log_odds(null: &NullSpec, star: ThetaPair, design: BlockDesign) -> Result<Projection> {
    let delta = match *null {
        NullSpec::LogOddsLe { delta } | NullSpec::LogOddsGe { delta } => delta,
        _ => {
            return Err(Error::InvalidNull(format!(
                "{null} is not a log-odds null"
            )))
        }
    };
    null.validate()?;
    require_interior(star)?;
    if null.contains(star) {
        return Ok(Projection::member(star));
    }
    log_odds_minimizer(delta, star, design)
}

fn line_minimizer(s: f64, c: f64, star: ThetaPair, design: BlockDesign) -> Result<Projection> {
    let (lo, hi) = null::line_segment(s, c)
        .ok_or_else(|| Error::InvalidNull(format!("line θ_b = {s} + {c}·θ_a misses the open square")))?;
    let (n_a, n_b) = (f64::from(design.n_a()), f64::from(design.n_b()));
    let (sa, sb) = (star.a(), star.b());
    let slope = |ta: f64| {
        let tb = s + c * ta;
        n_a * (ta - sa) / (ta * (1.0 - ta)) + c * n_b * (tb - sb) / (tb * (1.0 - tb))
    };
    let ta = bisect_increasing(slope, lo, hi)?;
    let tb = s + c * ta;
    finish(star, ta, tb, design)
}

fn log_odds_minimizer(delta: f64, star: ThetaPair, design: BlockDesign) -> Result<Projection> {
    let (n_a, n_b) = (f64::from(design.n_a()), f64::from(design.n_b()));
    let odds_ratio = delta.exp();
    let target = n_a * star.a() + n_b * star.b();
    let on_curve = move |ta: f64| odds_ratio * ta / (1.0 - ta + odds_ratio * ta);
    let ta = bisect_increasing(|ta| n_a * ta + n_b * on_curve(ta) - target, 0.0, 1.0)?;
    finish(star, ta, on_curve(ta), design)
}

fn finish(star: ThetaPair, ta: f64, tb: f64, design: BlockDesign) -> Result<Projection> {
    if !(is_open_unit(ta) && is_open_unit(tb)) {
        return Err(Error::Projection(format!(
            "minimizer ({ta}, {tb}) for alternative {star} left the open square"
        )));
    }
    Ok(Projection::boundary(star, ThetaPair::new_unchecked(ta, tb), design))
}

/// Root of a function that increases from `-inf` at `lo` to `+inf` at `hi`.
/// The endpoints are never evaluated. Bisects until the bracket collapses to
/// adjacent floats, then returns the evaluated point of smallest `|f|`.
fn bisect_increasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut best = (f64::INFINITY, f64::NAN);
    let (mut seen_neg, mut seen_pos) = (false, false);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v.is_nan() {
            return Err(Error::Projection(format!(
                "first-order condition is NaN at θ_a = {mid}"
            )));
        }
        if v.abs() < best.0 {
            best = (v.abs(), mid);
        }
        if v == 0.0 {
            return Ok(mid);
        } else if v < 0.0 {
            seen_neg = true;
            lo = mid;
        } else {
            seen_pos = true;
            hi = mid;
        }
    }
    if !(seen_neg && seen_pos) {
        return Err(Error::Projection(format!(
            "no sign change of the first-order condition inside ({lo}, {hi})"
        )));
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tp(a: f64, b: f64) -> ThetaPair {
        ThetaPair::new(a, b).unwrap()
    }

    fn d11() -> BlockDesign {
        BlockDesign::balanced()
    }

    #[test]
    fn equality_closed_form() {
        let p = project_equality(tp(0.3, 0.7), d11()).unwrap();
        assert_abs_diff_eq!(p.theta_circ.a(), 0.5, epsilon = 1e-15);
        assert_eq!(p.theta_circ.a(), p.theta_circ.b());
        assert!(!p.interior_hit);

        let p = project_equality(tp(0.5, 0.5), BlockDesign::new(3, 7).unwrap()).unwrap();
        assert_eq!(p.theta_circ, tp(0.5, 0.5));
        assert_eq!(p.kl_value, 0.0);

        let p = project_equality(tp(0.3, 0.6), BlockDesign::new(2, 1).unwrap()).unwrap();
        assert_abs_diff_eq!(p.theta_circ.a(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn equality_rejects_boundary_alternative() {
        assert!(matches!(
            project_equality(tp(0.0, 0.5), d11()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn identity_line_reduces_to_equality() {
        let line = project_line(0.0, 1.0, tp(0.3, 0.7), d11()).unwrap();
        assert_abs_diff_eq!(line.theta_circ.a(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(line.theta_circ.b(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn shifted_line_example() {
        // Brute-force grid at step 1e-6 puts the minimizer at θ_a ≈ 0.233852.
        let p = project_line(0.1, 1.0, tp(0.1, 0.5), d11()).unwrap();
        assert_abs_diff_eq!(p.theta_circ.a(), 0.233_852, epsilon = 2e-6);
        assert_abs_diff_eq!(p.theta_circ.b(), 0.333_852, epsilon = 2e-6);
        assert_abs_diff_eq!(p.kl_value, 0.118_468_909_503_323, epsilon = 1e-10);
    }

    #[test]
    fn alternative_on_line_is_its_own_projection() {
        let p = project_line(0.2, 1.0, tp(0.3, 0.5), d11()).unwrap();
        assert_eq!(p.theta_circ, tp(0.3, 0.5));
        assert_eq!(p.kl_value, 0.0);
        assert!(p.interior_hit);
    }

    #[test]
    fn horizontal_line_fixes_theta_b() {
        let p = project_line(0.4, 0.0, tp(0.3, 0.7), d11()).unwrap();
        assert_abs_diff_eq!(p.theta_circ.a(), 0.3, epsilon = 1e-12);
        assert_eq!(p.theta_circ.b(), 0.4);
    }

    #[test]
    fn halfplane_cases() {
        let le = NullSpec::HalfPlaneLe { s: 0.1, c: 1.0 };
        let p = project_halfplane(&le, tp(0.3, 0.2), d11()).unwrap();
        assert_eq!(p.theta_circ, tp(0.3, 0.2));
        assert!(p.interior_hit);

        let p = project_halfplane(&le, tp(0.1, 0.5), d11()).unwrap();
        let q = project_line(0.1, 1.0, tp(0.1, 0.5), d11()).unwrap();
        assert_eq!(p, q);

        let ge = NullSpec::HalfPlaneGe { s: 0.1, c: 1.0 };
        let p = project_halfplane(&ge, tp(0.5, 0.1), d11()).unwrap();
        assert_abs_diff_eq!(p.theta_circ.a(), 0.2708, epsilon = 2e-4);
        assert_abs_diff_eq!(p.theta_circ.b() - p.theta_circ.a(), 0.1, epsilon = 1e-12);
        assert!(project_halfplane(&NullSpec::Equality, tp(0.5, 0.1), d11()).is_err());
    }

    #[test]
    fn log_odds_cases() {
        let p = project_log_odds(&NullSpec::LogOddsLe { delta: 0.0 }, tp(0.2, 0.2), d11()).unwrap();
        assert_eq!(p.theta_circ, tp(0.2, 0.2));

        let le = project_log_odds(&NullSpec::LogOddsLe { delta: 2.0 }, tp(0.2, 0.8), d11()).unwrap();
        assert_abs_diff_eq!(le.theta_circ.log_odds_ratio(), 2.0, epsilon = 1e-10);
        // Grid search at step 1e-6 gives θ_a ≈ 0.268941 = σ(-1).
        assert_abs_diff_eq!(le.theta_circ.a(), 0.268_941, epsilon = 2e-6);

        let ge = project_log_odds(&NullSpec::LogOddsGe { delta: -2.0 }, tp(0.8, 0.2), d11()).unwrap();
        assert_abs_diff_eq!(ge.theta_circ.a(), 1.0 - le.theta_circ.a(), epsilon = 1e-12);
        assert_abs_diff_eq!(ge.theta_circ.b(), 1.0 - le.theta_circ.b(), epsilon = 1e-12);
        assert_abs_diff_eq!(ge.kl_value, le.kl_value, epsilon = 1e-13);
    }

    #[test]
    fn log_odds_minimizer_preserves_weighted_mean() {
        let design = BlockDesign::new(2, 3).unwrap();
        let star = tp(0.1, 0.9);
        let p = project_log_odds(&NullSpec::LogOddsLe { delta: 1.3 }, star, design).unwrap();
        let circ = p.theta_circ;
        assert_abs_diff_eq!(2.0 * circ.a() + 3.0 * circ.b(), 2.0 * 0.1 + 3.0 * 0.9, epsilon = 1e-12);
    }

    #[test]
    fn projection_is_interior_even_near_corners() {
        let star = tp(1e-6, 1.0 - 1e-6);
        for null in [
            NullSpec::Equality,
            NullSpec::Line { s: 0.0, c: 1.0 },
            NullSpec::HalfPlaneLe { s: 0.5, c: 0.2 },
            NullSpec::LogOddsLe { delta: 6.0 },
        ] {
            let p = project(&null, star, d11()).unwrap();
            assert!(p.theta_circ.is_interior(), "{null}: {:?}", p.theta_circ);
        }
    }
}
