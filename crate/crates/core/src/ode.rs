//! Fixed-step RK4 integration of the controlled Bloch equations, with
//! optional event stopping.

use crate::bloch::{BlochState, RelaxationPair, BALL_EPS};
use crate::error::{Error, Result};

/// A control field `u(t, state)`. Open-loop controls ignore the state;
/// feedback laws on singular arcs use it.
pub trait Control {
    fn at(&self, t: f64, s: BlochState) -> f64;
}

impl<F: Fn(f64, BlochState) -> f64> Control for F {
    #[inline]
    fn at(&self, t: f64, s: BlochState) -> f64 {
        self(t, s)
    }
}

/// Constant amplitude `u ≡ value`.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Control for Constant {
    #[inline]
    fn at(&self, _t: f64, _s: BlochState) -> f64 {
        self.0
    }
}

/// Free evolution.
pub const FREE: Constant = Constant(0.0);

pub fn rk4_step<C: Control + ?Sized>(
    p: &RelaxationPair,
    s: BlochState,
    t: f64,
    h: f64,
    control: &C,
) -> BlochState {
    let f = |t: f64, s: BlochState| p.velocity(s, control.at(t, s));
    let k1 = f(t, s);
    let k2 = f(t + 0.5 * h, s.axpy(0.5 * h, k1));
    let k3 = f(t + 0.5 * h, s.axpy(0.5 * h, k2));
    let k4 = f(t + h, s.axpy(h, k3));
    BlochState {
        y: s.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
        z: s.z + h / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
    }
}

fn check_disk(s: BlochState, t: f64) -> Result<()> {
    if s.norm_sq() > 1.0 + BALL_EPS || !s.y.is_finite() || !s.z.is_finite() {
        return Err(Error::IntegrationBlowup { time: t, radius: s.radius() });
    }
    Ok(())
}

/// Integrates over exactly `duration` using `ceil(duration/step)` equal steps.
pub fn integrate<C: Control + ?Sized>(
    p: &RelaxationPair,
    s: BlochState,
    control: &C,
    duration: f64,
    step: f64,
) -> Result<BlochState> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::domain(format!("duration must be non-negative, got {duration}")));
    }
    if !(step > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {step}")));
    }
    if duration == 0.0 {
        return Ok(s);
    }
    let n = (duration / step).ceil().max(1.0) as u64;
    let h = duration / n as f64;
    let mut state = s;
    for i in 0..n {
        let t = i as f64 * h;
        state = rk4_step(p, state, t, h, control);
        check_disk(state, t + h)?;
    }
    Ok(state)
}

/// Where an event-stopped integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStop {
    pub state: BlochState,
    pub time: f64,
    /// `false` when `max_duration` elapsed before the event fired.
    pub triggered: bool,
}

/// Integrates until `event(state)` changes sign relative to its initial
/// value, locating the crossing inside the last step by bisection on the
/// sub-step length. `step_rule` gives the step to take from a state, so
/// callers can refine near singular feedback laws.
pub fn integrate_until<C, S, E>(
    p: &RelaxationPair,
    s: BlochState,
    control: &C,
    step_rule: S,
    max_duration: f64,
    event: E,
) -> Result<EventStop>
where
    C: Control + ?Sized,
    S: Fn(BlochState) -> f64,
    E: Fn(BlochState) -> f64,
{
    let g0 = event(s);
    if g0 == 0.0 {
        return Ok(EventStop { state: s, time: 0.0, triggered: true });
    }
    let sign = g0.signum();
    let mut state = s;
    let mut t = 0.0;
    while t < max_duration {
        let h = step_rule(state).min(max_duration - t);
        if !(h > 0.0) {
            return Err(Error::Numerical(format!("non-positive step {h} at t = {t}")));
        }
        let next = rk4_step(p, state, t, h, control);
        check_disk(next, t + h)?;
        let g = event(next);
        if g * sign <= 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            let mut hit = next;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let trial = rk4_step(p, state, t, mid, control);
                if event(trial) * sign <= 0.0 {
                    hi = mid;
                    hit = trial;
                } else {
                    lo = mid;
                }
            }
            return Ok(EventStop { state: hit, time: t + hi, triggered: true });
        }
        state = next;
        t += h;
    }
    Ok(EventStop { state, time: t, triggered: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_flow_matches_closed_form() {
        let p = RelaxationPair::new(1.8, 1.0).unwrap();
        let s = BlochState::new(0.6, 0.3);
        let out = integrate(&p, s, &FREE, 1.0, 1e-4).unwrap();
        let exact = p.relax(s, 1.0);
        assert!(out.distance(exact) < 1e-12);
    }

    #[test]
    fn zero_duration_is_identity() {
        let p = RelaxationPair::new(1.0, 1.0).unwrap();
        let s = BlochState::new(0.2, -0.1);
        assert_eq!(integrate(&p, s, &FREE, 0.0, 1e-3).unwrap(), s);
        assert!(integrate(&p, s, &FREE, 1.0, 0.0).is_err());
    }

    #[test]
    fn blowup_is_reported() {
        // An unphysical pair lets free relaxation push the pole outwards.
        let p = RelaxationPair::with_override(0.01, 5.0, true).unwrap();
        let s = BlochState::new(0.6, 0.79);
        assert!(matches!(
            integrate(&p, s, &FREE, 1.0, 1e-3),
            Err(Error::IntegrationBlowup { .. })
        ));
    }

    #[test]
    fn event_locates_axis_crossing() {
        // On y = 0 with u = 0, z(t) = 1 - (1 - z0) e^{-γ t}.
        let p = RelaxationPair::new(1.8, 1.0).unwrap();
        let hit = integrate_until(&p, BlochState::new(0.0, -0.5), &FREE, |_| 1e-3, 10.0, |s| s.z).unwrap();
        assert!(hit.triggered);
        assert!((hit.time - 1.5f64.ln()).abs() < 1e-10);
        assert!(hit.state.z.abs() < 1e-12);
    }

    #[test]
    fn event_not_reached_within_horizon() {
        let p = RelaxationPair::new(1.8, 1.0).unwrap();
        let hit = integrate_until(&p, BlochState::new(0.0, 0.0), &FREE, |_| 1e-2, 0.5, |s| s.z - 0.9).unwrap();
        assert!(!hit.triggered);
        assert!((hit.time - 0.5).abs() < 1e-12);
    }
}
