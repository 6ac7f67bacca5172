use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::ParameterSet;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Compares analytic gradients against central finite differences.
///
/// `f` evaluates a scalar loss for the given parameters and, when asked,
/// writes analytic gradients into the parameter gradient slots. `probes`
/// entries are drawn uniformly over all parameter values. Returns the largest
/// relative error `|a − fd| / max(|a|, |fd|, 1e-6)` seen.
pub fn grad_check<F, R>(
    mut f: F,
    params: &mut ParameterSet,
    probes: usize,
    rng: &mut R,
) -> Result<f64>
where
    F: FnMut(&mut ParameterSet, bool) -> Result<f64>,
    R: Rng + ?Sized,
{
    params.zero_grads();
    let base = f(params, true)?;
    let again = f(params, false)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::CheckInvalid(format!(
            "function is not deterministic: {base} then {again}"
        )));
    }
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|(name, t)| {
            t.grad()
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::CheckInvalid(format!("no gradient for {name:?}")))
        })
        .collect::<Result<_>>()?;

    let total = params.num_values();
    if total == 0 {
        return Err(Error::CheckInvalid("empty parameter set".into()));
    }
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let mut flat = rng.random_range(0..total);
        let mut pi = 0;
        while flat >= params.get(pi).len() {
            flat -= params.get(pi).len();
            pi += 1;
        }
        let orig = params.get(pi).data()[flat];
        params.get_mut(pi).data_mut()[flat] = orig + FD_STEP;
        let plus = f(params, false)?;
        params.get_mut(pi).data_mut()[flat] = orig - FD_STEP;
        let minus = f(params, false)?;
        params.get_mut(pi).data_mut()[flat] = orig;
        let fd = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic[pi][flat];
        let denom = a.abs().max(fd.abs()).max(1e-6);
        worst = worst.max((a - fd).abs() / denom);
    }
    Ok(worst)
}
