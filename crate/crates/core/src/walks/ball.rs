use crate::densities::TargetDensity;
use crate::error::Result;
use crate::geometry::ConvexBody;

use super::state::WalkState;

/// One ball-walk step: uniform proposal in the `delta`-ball, rejected outside
/// the body, then a Metropolis filter on the target. Returns whether it moved.
pub fn baw_step(body: &ConvexBody, target: &TargetDensity, state: &mut WalkState, delta: f64) -> Result<bool> {
    let d = body.dim();
    let u = state.in_unit_ball(d);
    let y = state.current() + u * delta;
    if !(body.min_slack(&y) > 0.0) {
        return Ok(false);
    }
    let log_pi = target.log_density(&y);
    if !log_pi.is_finite() || !state.accept(log_pi - state.log_pi) {
        return Ok(false);
    }
    state.jump(body, y, log_pi);
    Ok(true)
}
