//! Central-finite-difference gradient checking against analytic gradients.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::mlp::ModelParams;

/// Perturbation used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Magnitude floor for the relative-error denominator; gradients smaller
/// than this are compared on an absolute-like scale.
const SCALE_FLOOR: f64 = 1e-4;

/// A scalar loss that can also produce its analytic gradient.
pub trait DifferentiableLoss {
    fn loss(&self, params: &ModelParams) -> Result<f64>;
    fn grad(&self, params: &ModelParams) -> Result<ModelParams>;
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub tolerance: f64,
    pub pass: bool,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(SCALE_FLOOR)
}

/// Compares analytic gradients against central differences on a random
/// subsample of at least `min_coords` coordinates (all of them when the
/// model is smaller than that).
pub fn grad_check<L: DifferentiableLoss, R: Rng + ?Sized>(
    params: &ModelParams,
    loss: &L,
    tolerance: f64,
    min_coords: usize,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let count = params.param_count();
    if count == 0 {
        return Err(Error::Usage("model has no parameters to check".into()));
    }
    let analytic = loss.grad(params)?;
    let n_check = min_coords.max(1).min(count);
    let coords: Vec<usize> = if n_check == count {
        (0..count).collect()
    } else {
        rand::seq::index::sample(rng, count, n_check).into_vec()
    };

    let mut work = params.clone();
    let mut max_rel = 0.0f64;
    let mut worst = coords[0];
    for &i in &coords {
        let original = work.param(i);
        work.set_param(i, original + FD_STEP);
        let plus = loss.loss(&work)?;
        work.set_param(i, original - FD_STEP);
        let minus = loss.loss(&work)?;
        work.set_param(i, original);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss while perturbing parameter {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let rel = rel_error(analytic.param(i), numeric);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst_index: worst,
        checked: coords.len(),
        tolerance,
        pass: max_rel <= tolerance,
    })
}
