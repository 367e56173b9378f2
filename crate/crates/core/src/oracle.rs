//! Independent numerical checks of the closed forms: cycle fixed points,
//! delta-pulse sweeps, event-stopped ODE travel times and finite-amplitude
//! simulation of each optimal control structure.
//!
//! Nothing here calls the travel-time formulas except to add the analytic
//! remainder for the final sliver of a magic-plane arc, where the feedback
//! law is singular.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{BlochState, RelaxationPair, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::ode::{integrate, integrate_until, Constant, EventStop, FREE};
use crate::optim::golden_section_max;
use crate::qsurface::{optimal_trajectory, q_value, time_magic, Segment};
use crate::synthesis::{magic_plane, ControlStructure};

/// Magic-plane arcs stop at this `y` and add the remaining time analytically.
pub const MAGIC_Y_FLOOR: f64 = 1e-8;

/// Largest rotation per RK4 step during bangs and feedback arcs, in rad.
const MAX_ROTATION_PER_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseSegment {
    /// Constant pulse rotating at `rate` rad per unit time; positive rates
    /// tip +z toward +y, like [`BlochState::rotated`].
    Constant { rate: f64, duration: f64 },
    /// Magic-plane feedback `u = −γ(1 − z₀)/y`.
    MagicFeedback { duration: f64 },
    Free { duration: f64 },
}

impl PulseSegment {
    pub fn duration(&self) -> f64 {
        match *self {
            PulseSegment::Constant { duration, .. }
            | PulseSegment::MagicFeedback { duration }
            | PulseSegment::Free { duration } => duration,
        }
    }
}

/// The control applied in one period, between detection windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PulsePolicy {
    DeltaPulse(f64),
    Shaped(Vec<PulseSegment>),
}

impl PulsePolicy {
    pub fn control_time(&self) -> f64 {
        match self {
            PulsePolicy::DeltaPulse(_) => 0.0,
            PulsePolicy::Shaped(segments) => segments.iter().map(PulseSegment::duration).sum(),
        }
    }

    pub fn apply(&self, s: BlochState, p: &RelaxationPair) -> Result<BlochState> {
        match self {
            PulsePolicy::DeltaPulse(flip) => Ok(s.rotated(*flip)),
            PulsePolicy::Shaped(segments) => segments.iter().try_fold(s, |state, seg| {
                if seg.duration() < 0.0 {
                    return Err(Error::domain("segment durations must be non-negative"));
                }
                match *seg {
                    PulseSegment::Constant { rate, duration } => {
                        let step = DEFAULT_STEP.min(MAX_ROTATION_PER_STEP / rate.abs().max(f64::MIN_POSITIVE));
                        integrate(p, state, &Constant(-rate), duration, step)
                    }
                    PulseSegment::Free { duration } => integrate(p, state, &FREE, duration, DEFAULT_STEP),
                    PulseSegment::MagicFeedback { duration } => {
                        let law = magic_feedback(p)?;
                        integrate(p, state, &law, duration, DEFAULT_STEP)
                    }
                }
            }),
        }
    }
}

fn magic_feedback(p: &RelaxationPair) -> Result<impl Fn(f64, BlochState) -> f64> {
    let z0 = magic_plane(p)
        .z0
        .filter(|_| magic_plane(p).present)
        .ok_or_else(|| Error::domain("magic-plane feedback needs the plane inside the disk"))?;
    let c = p.gamma_t1() * (1.0 - z0);
    Ok(move |_t: f64, s: BlochState| -c / s.y)
}

/// Steady state of a periodically repeated policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleFixedPoint {
    /// State at the end of detection.
    pub s: BlochState,
    /// State after the control, where detection starts.
    pub m: BlochState,
    pub iterations: usize,
    /// Distance between the last two iterates of `s`.
    pub residual: f64,
}

/// Iterates `S ← relax(policy(S), 1)` from thermal equilibrium.
pub fn cycle_fixed_point(
    policy: &PulsePolicy,
    p: &RelaxationPair,
    tol: f64,
    max_iter: usize,
) -> Result<CycleFixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut s = BlochState::EQUILIBRIUM;
    let mut residual = f64::INFINITY;
    for iterations in 1..=max_iter {
        let m = policy.apply(s, p)?;
        let next = p.relax(m, 1.0);
        residual = next.distance(s);
        s = next;
        if residual <= tol {
            let m = policy.apply(s, p)?;
            return Ok(CycleFixedPoint { s, m, iterations, residual });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub best_flip: f64,
    pub best_q: f64,
    /// `(flip, q)` on the coarse grid.
    pub table: Vec<(f64, f64)>,
}

/// Stopping distance between iterates for delta-pulse steady states; near
/// the rounding floor when the contraction factor approaches 1.
pub const FIXED_POINT_TOL: f64 = 1e-14;

fn delta_pulse_q(flip: f64, p: &RelaxationPair) -> Result<f64> {
    let fp = cycle_fixed_point(&PulsePolicy::DeltaPulse(flip), p, FIXED_POINT_TOL, 1_000_000)?;
    Ok(fp.m.y)
}

/// Brute-force flip-angle search for single delta pulses, where `T_c = 0`
/// and `Q = y_m`.
pub fn sweep_delta_pulse(p: &RelaxationPair, n: usize) -> Result<DeltaSweep> {
    if n < 100 {
        return Err(Error::domain(format!("sweep needs at least 100 points, got {n}")));
    }
    let step = PI / (n + 1) as f64;
    let table = (1..=n)
        .map(|k| {
            let flip = k as f64 * step;
            delta_pulse_q(flip, p).map(|q| (flip, q))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = table
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("non-empty table");
    let lo = table[best].0 - step;
    let hi = table[best].0 + step;
    let refined = golden_section_max(|f| delta_pulse_q(f, p).unwrap_or(f64::NEG_INFINITY), lo, hi, 1e-11);
    Ok(DeltaSweep { best_flip: refined.x, best_q: refined.value, table })
}

fn axis_step(step: f64) -> impl Fn(BlochState) -> f64 {
    move |_| step
}

fn magic_step(p: &RelaxationPair, z0: f64, step: f64) -> impl Fn(BlochState) -> f64 {
    let c = p.gamma_t1() * (1.0 - z0);
    let g2 = p.gamma_t2();
    let z0_abs = z0.abs();
    move |s: BlochState| {
        let y = s.y.abs().max(f64::MIN_POSITIVE);
        step.min(MAX_ROTATION_PER_STEP * y / c)
            .min(MAX_ROTATION_PER_STEP * y * y / (c * z0_abs + g2 * y * y))
    }
}

/// Event-stopped RK4 time along the z-axis from `z1` to `z2`.
pub fn rk4_time_vertical(z1: f64, z2: f64, p: &RelaxationPair, step: f64) -> Result<f64> {
    if !(z1 <= z2 && z2 < 1.0) {
        return Err(Error::domain(format!("cannot travel up the axis from {z1} to {z2}")));
    }
    let stop = integrate_until(p, BlochState::new(0.0, z1), &FREE, axis_step(step), 1e4, |s| s.z - z2)?;
    triggered(stop).map(|s| s.time)
}

/// Event-stopped RK4 time along the magic plane from `y1` to `y2` under
/// the feedback law.
pub fn rk4_time_magic(y1: f64, y2: f64, p: &RelaxationPair, step: f64) -> Result<f64> {
    let plane = magic_plane(p);
    let z0 = plane.z0.filter(|_| plane.present).ok_or_else(|| Error::domain("no magic plane"))?;
    if !(y1 >= y2 && y2 >= 0.0) {
        return Err(Error::domain(format!("cannot travel along the plane from {y1} to {y2}")));
    }
    let target = y2.max(MAGIC_Y_FLOOR);
    if y1 <= target {
        return Ok(0.0);
    }
    let law = magic_feedback(p)?;
    let stop = integrate_until(p, BlochState::new(y1, z0), &law, magic_step(p, z0, step), 1e4, |s| s.y - target)?;
    let t = triggered(stop)?.time;
    Ok(if y2 < MAGIC_Y_FLOOR { t + time_magic(target, y2, p)? } else { t })
}

fn triggered(stop: EventStop) -> Result<EventStop> {
    if stop.triggered {
        Ok(stop)
    } else {
        Err(Error::Numerical(format!("event not reached after t = {}", stop.time)))
    }
}

/// Outcome of simulating one optimal cycle with finite-amplitude bangs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedCycle {
    pub structure: ControlStructure,
    /// Realized control duration, bangs included.
    pub t_control: f64,
    /// Part of `t_control` spent in bangs.
    pub bang_time: f64,
    pub terminal: BlochState,
    /// Distance from the simulated end of the control to `M`.
    pub terminal_error: f64,
}

/// Drives `S = relax(m, 1)` to `m` along the classified structure: bangs
/// as constant pulses of amplitude `bang_amplitude` stopped on the target
/// polar angle, axis arcs with `u = 0`, magic-plane arcs with the feedback
/// law.
pub fn simulate_structure(
    m: BlochState,
    p: &RelaxationPair,
    bang_amplitude: f64,
    step: f64,
) -> Result<SimulatedCycle> {
    if !(bang_amplitude > 0.0) {
        return Err(Error::domain(format!("bang amplitude must be positive, got {bang_amplitude}")));
    }
    if !(step > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {step}")));
    }
    let traj = optimal_trajectory(m, p)?;
    let plane = magic_plane(p);
    let bang_step = step.min(MAX_ROTATION_PER_STEP / bang_amplitude);

    let mut state = traj.s;
    let mut t_control = 0.0;
    let mut bang_time = 0.0;
    for seg in &traj.segments {
        match *seg {
            Segment::Bang { to, .. } => {
                let target = to.angle();
                let phi = state.angle() - target;
                if phi.abs() < 1e-15 {
                    continue;
                }
                let u = Constant(-bang_amplitude * phi.signum());
                let horizon = 2.0 * phi.abs() / bang_amplitude + 1e-3;
                let stop = integrate_until(p, state, &u, axis_step(bang_step), horizon, |s| s.angle() - target)?;
                let stop = triggered(stop)?;
                state = stop.state;
                t_control += stop.time;
                bang_time += stop.time;
            }
            Segment::AxisArc { to, duration, .. } => {
                // A slow bang can relax past a short arc's end.
                if state.z >= to.z {
                    continue;
                }
                let horizon = 2.0 * duration + 10.0;
                let stop = integrate_until(p, state, &FREE, axis_step(step), horizon, |s| s.z - to.z)?;
                let stop = triggered(stop)?;
                state = stop.state;
                t_control += stop.time;
            }
            Segment::MagicArc { to, duration, .. } => {
                let z0 = plane.z0.ok_or_else(|| Error::domain("magic arc without a plane"))?;
                let target = to.y.max(MAGIC_Y_FLOOR);
                if state.y > target {
                    let law = magic_feedback(p)?;
                    let horizon = 2.0 * duration + 10.0;
                    let stop =
                        integrate_until(p, state, &law, magic_step(p, z0, step), horizon, |s| s.y - target)?;
                    let stop = triggered(stop)?;
                    state = stop.state;
                    t_control += stop.time;
                }
                if to.y < MAGIC_Y_FLOOR {
                    t_control += time_magic(state.y.max(to.y), to.y, p)?;
                }
            }
            Segment::Detection { .. } => {}
        }
    }
    Ok(SimulatedCycle {
        structure: traj.structure,
        t_control,
        bang_time,
        terminal: state,
        terminal_error: state.distance(m),
    })
}

/// Uniform random point of the open half-disk `{y > 0, r ≤ r_max}`.
pub fn random_half_disk_point<R: Rng + ?Sized>(rng: &mut R, r_max: f64) -> BlochState {
    loop {
        let y: f64 = rng.random::<f64>() * r_max;
        let z: f64 = (2.0 * rng.random::<f64>() - 1.0) * r_max;
        let m = BlochState::new(y, z);
        if y > 0.0 && m.radius() <= r_max {
            return m;
        }
    }
}

/// Radius of the sampling disk for randomized oracle comparisons; the rim
/// `r → 1` makes axis travel times diverge logarithmically.
pub const ORACLE_SAMPLE_RADIUS: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSurfaceDeviation {
    pub max_deviation: f64,
    pub worst_point: BlochState,
    pub samples: usize,
}

/// Compares `analytic_q` against Q built from simulated control durations
/// at `n_samples` random measurement points.
pub fn verify_q_surface_with<F>(
    p: &RelaxationPair,
    n_samples: usize,
    bang_amplitude: f64,
    step: f64,
    seed: u64,
    analytic_q: F,
) -> Result<QSurfaceDeviation>
where
    F: Fn(BlochState) -> Result<f64> + Sync,
{
    if n_samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<BlochState> =
        (0..n_samples).map(|_| random_half_disk_point(&mut rng, ORACLE_SAMPLE_RADIUS)).collect();
    let deviations = points
        .par_iter()
        .map(|&m| {
            let sim = simulate_structure(m, p, bang_amplitude, step)?;
            let q_sim = m.y / (1.0 + sim.t_control).sqrt();
            Ok((m, (analytic_q(m)? - q_sim).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst_point, max_deviation) =
        deviations.into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
    Ok(QSurfaceDeviation { max_deviation, worst_point, samples: n_samples })
}

pub fn verify_q_surface(
    p: &RelaxationPair,
    n_samples: usize,
    bang_amplitude: f64,
    step: f64,
    seed: u64,
) -> Result<QSurfaceDeviation> {
    verify_q_surface_with(p, n_samples, bang_amplitude, step, seed, |m| q_value(m, p).map(|s| s.q))
}
