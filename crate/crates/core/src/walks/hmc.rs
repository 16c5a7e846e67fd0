use crate::densities::TargetDensity;
use crate::error::Result;
use crate::geometry::ConvexBody;

use super::billiard::reflective_flight;
use super::state::WalkState;

/// Reflective Hamiltonian Monte Carlo with `steps` leapfrog steps of size `eta`.
///
/// Position updates that meet the boundary reflect the momentum; more than
/// `rho` reflections within one position update, or a non-finite energy,
/// reject the proposal. With `uturn` the trajectory stops early once it
/// starts heading back towards its origin.
#[allow(clippy::too_many_arguments)]
pub fn rehmc_step(
    body: &ConvexBody,
    target: &TargetDensity,
    state: &mut WalkState,
    eta: f64,
    steps: usize,
    rho: usize,
    uturn: bool,
) -> Result<bool> {
    let d = body.dim();
    let p0 = state.current().clone();
    let lp0 = state.log_pi;
    let mut v = state.normal_vector(d);
    let h0 = -lp0 + 0.5 * v.norm_squared();

    let reject = |state: &mut WalkState| -> Result<bool> {
        state.jump(body, p0.clone(), lp0);
        Ok(false)
    };
    let Ok(mut grad) = target.grad_log_density(&p0) else {
        return reject(state);
    };
    let mut lp = lp0;
    for _ in 0..steps.max(1) {
        v.axpy(0.5 * eta, &grad, 1.0);
        if !v.iter().all(|x| x.is_finite()) || !reflective_flight(body, state, &mut v, eta, rho)? {
            return reject(state);
        }
        lp = target.log_density(state.current());
        if !lp.is_finite() {
            return reject(state);
        }
        grad = match target.grad_log_density(state.current()) {
            Ok(g) => g,
            Err(_) => return reject(state),
        };
        v.axpy(0.5 * eta, &grad, 1.0);
        if uturn && (state.current() - &p0).dot(&v) < 0.0 {
            break;
        }
    }
    let h1 = -lp + 0.5 * v.norm_squared();
    if !h1.is_finite() || !state.accept(h0 - h1) {
        return reject(state);
    }
    state.log_pi = lp;
    Ok(true)
}
