//! Exhaustive grid search over a null's boundary. Slow and only as accurate
//! as its step, but shares no numerics with the root-finding projection, so
//! it serves as an independent check in tests.

use super::{null::line_segment, NullSpec, Projection};
use crate::error::{Error, Result};
use crate::model::{is_open_unit, kl_block, logit, sigmoid, BlockDesign, ThetaPair};

/// Minimizes `kl_block(star, ·)` over the boundary of `null`, parametrized by
/// `θ_a ∈ {step, 2·step, …} ∩ (0, 1)`.
pub fn grid_oracle_project(
    null: &NullSpec,
    star: ThetaPair,
    design: BlockDesign,
    step: f64,
) -> Result<Projection> {
    if !(step > 0.0 && step <= 0.01) {
        return Err(Error::Domain(format!("grid step {step} outside (0, 0.01]")));
    }
    null.validate()?;
    if null.contains(star) {
        return Ok(Projection {
            theta_circ: star,
            kl_value: 0.0,
            interior_hit: true,
        });
    }

    let boundary: Box<dyn Fn(f64) -> Option<f64>> = match *null {
        NullSpec::Equality => Box::new(Some),
        NullSpec::Line { s, c } | NullSpec::HalfPlaneLe { s, c } | NullSpec::HalfPlaneGe { s, c } => {
            Box::new(move |ta| Some(s + c * ta).filter(|&tb| is_open_unit(tb)))
        }
        NullSpec::LogOddsLe { delta } | NullSpec::LogOddsGe { delta } => {
            Box::new(move |ta| Some(sigmoid(logit(ta) + delta)).filter(|&tb| is_open_unit(tb)))
        }
    };

    let mut best: Option<(f64, ThetaPair)> = None;
    let mut consider = |ta: f64| {
        if let Some(tb) = boundary(ta) {
            let theta = ThetaPair::new_unchecked(ta, tb);
            let kl = kl_block(star, theta, design);
            if best.is_none_or(|(b, _)| kl < b) {
                best = Some((kl, theta));
            }
        }
    };
    let steps = (1.0 / step).ceil() as u64;
    for k in 1..steps {
        consider(k as f64 * step);
    }
    // Segments shorter than one step still get a candidate.
    if let NullSpec::Line { s, c } | NullSpec::HalfPlaneLe { s, c } | NullSpec::HalfPlaneGe { s, c } = *null {
        if let Some((lo, hi)) = line_segment(s, c) {
            consider(0.5 * (lo + hi));
        }
    }

    let (kl_value, theta_circ) =
        best.ok_or_else(|| Error::Projection(format!("grid found no boundary point of {null}")))?;
    Ok(Projection {
        theta_circ,
        kl_value,
        interior_hit: false,
    })
}
