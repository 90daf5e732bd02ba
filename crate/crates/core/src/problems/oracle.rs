use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PlantModel;
use crate::error::{Error, Result};
use crate::space::ScaledPoint;

pub const MAX_GRID_POINTS: u128 = 10_000_000;

/// Best feasible point of a uniform grid over the scaled domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub u_opt: Vec<f64>,
    pub u_opt_scaled: Vec<f64>,
    pub phi_opt: f64,
    pub grid_resolution: f64,
    pub feasible_count: u64,
}

/// Exhaustive search of the noiseless plant on a grid of spacing
/// `resolution` in scaled coordinates.
///
/// Ties go to the grid point with the lowest linear index.
pub fn grid_oracle(model: &dyn PlantModel, resolution: f64) -> Result<OracleResult> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must lie in (0, 1], got {resolution}"
        )));
    }
    let space = model.space();
    let n = space.dim();
    let steps = (1.0 / resolution).round().max(1.0) as u64;
    let per_axis = u128::from(steps) + 1;
    let total = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(per_axis));
    let total = match total {
        Some(t) if t <= MAX_GRID_POINTS => t as u64,
        Some(t) => return Err(Error::GridTooLarge(t)),
        None => return Err(Error::GridTooLarge(u128::MAX)),
    };

    let point = |idx: u64| -> Vec<f64> {
        let mut rest = idx;
        (0..n)
            .map(|_| {
                let i = rest % (steps + 1);
                rest /= steps + 1;
                i as f64 / steps as f64
            })
            .collect()
    };

    let (best, feasible_count) = (0..total)
        .into_par_iter()
        .fold(
            || (None::<(f64, u64)>, 0u64),
            |(best, count), idx| {
                let scaled = point(idx);
                let u = space.unscale(&ScaledPoint::new(scaled).expect("grid lies in the cube"));
                if model.constraints(&u).iter().any(|g| *g > 0.0) {
                    return (best, count);
                }
                let phi = model.cost(&u);
                (pick(best, Some((phi, idx))), count + 1)
            },
        )
        .reduce(|| (None, 0), |(a, ca), (b, cb)| (pick(a, b), ca + cb));

    let Some((phi_opt, idx)) = best else {
        return Err(Error::InvalidArgument("no feasible grid point".into()));
    };
    let scaled = point(idx);
    let u_opt = space.unscale(&ScaledPoint::new(scaled.clone()).expect("grid lies in the cube"));
    Ok(OracleResult {
        u_opt,
        u_opt_scaled: scaled,
        phi_opt,
        grid_resolution: 1.0 / steps as f64,
        feasible_count,
    })
}

fn pick(a: Option<(f64, u64)>, b: Option<(f64, u64)>) -> Option<(f64, u64)> {
    match (a, b) {
        (Some(x), Some(y)) => {
            if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                Some(y)
            } else {
                Some(x)
            }
        }
        (x, None) => x,
        (None, y) => y,
    }
}
