//! Normalized Bloch dynamics in the transverse/longitudinal plane.
//!
//! Time is measured in units of the detection window, so one detection
//! period always lasts exactly `1.0`. With that scaling the equations of
//! motion read
//!
//! ```text
//! dy/dt = -Γ y - u z
//! dz/dt =  γ (1 - z) + u y
//! ```
//!
//! where `u` is the control field. Polar coordinates follow
//! `y = r cos θ`, `z = r sin θ`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Control};

/// Slack allowed on `y² + z² ≤ 1` before a state is considered off the disk.
pub const BALL_EPS: f64 = 1e-12;

/// Default fixed RK4 step, in units of the detection time.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Normalized relaxation rates `Γ = 2π T_d/T₂` and `γ = 2π T_d/T₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationPair {
    gamma_t2: f64,
    gamma_t1: f64,
}

impl RelaxationPair {
    /// Builds a pair, rejecting non-positive rates and `2Γ < γ`.
    pub fn new(gamma_t2: f64, gamma_t1: f64) -> Result<Self> {
        Self::with_override(gamma_t2, gamma_t1, false)
    }

    /// Like [`RelaxationPair::new`], but `allow_unphysical` lets `2Γ < γ` through.
    pub fn with_override(gamma_t2: f64, gamma_t1: f64, allow_unphysical: bool) -> Result<Self> {
        if !(gamma_t2.is_finite() && gamma_t2 > 0.0) {
            return Err(Error::domain(format!("Γ must be positive and finite, got {gamma_t2}")));
        }
        if !(gamma_t1.is_finite() && gamma_t1 > 0.0) {
            return Err(Error::domain(format!("γ must be positive and finite, got {gamma_t1}")));
        }
        if 2.0 * gamma_t2 < gamma_t1 && !allow_unphysical {
            return Err(Error::Unphysical { gamma_t2, gamma_t1 });
        }
        Ok(Self { gamma_t2, gamma_t1 })
    }

    /// Converts physical relaxation times and the detection duration (any
    /// common time unit) into normalized rates.
    pub fn from_physical(t1: f64, t2: f64, t_detect: f64, allow_unphysical: bool) -> Result<Self> {
        for (name, v) in [("T1", t1), ("T2", t2), ("Td", t_detect)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Self::with_override(TAU * t_detect / t2, TAU * t_detect / t1, allow_unphysical)
    }

    /// Transverse rate Γ.
    #[inline]
    pub fn gamma_t2(&self) -> f64 {
        self.gamma_t2
    }

    /// Longitudinal rate γ.
    #[inline]
    pub fn gamma_t1(&self) -> f64 {
        self.gamma_t1
    }

    pub fn is_physical(&self) -> bool {
        2.0 * self.gamma_t2 >= self.gamma_t1
    }

    /// Free relaxation over `tau` (closed form).
    pub fn relax(&self, s: BlochState, tau: f64) -> BlochState {
        debug_assert!(tau >= 0.0);
        BlochState {
            y: s.y * (-self.gamma_t2 * tau).exp(),
            z: 1.0 + (s.z - 1.0) * (-self.gamma_t1 * tau).exp(),
        }
    }

    /// Runs free relaxation backwards over `tau`. Fails when the preimage
    /// is not in the closed unit disk.
    pub fn relax_inverse(&self, s: BlochState, tau: f64) -> Result<BlochState> {
        if !(tau >= 0.0) {
            return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
        }
        let pre = BlochState {
            y: s.y * (self.gamma_t2 * tau).exp(),
            z: 1.0 + (s.z - 1.0) * (self.gamma_t1 * tau).exp(),
        };
        if !pre.in_disk() {
            return Err(Error::OutOfDisk { radius: pre.radius() });
        }
        Ok(pre)
    }

    /// Right-hand side of the normalized Bloch equations.
    #[inline]
    pub fn velocity(&self, s: BlochState, u: f64) -> BlochState {
        BlochState {
            y: -self.gamma_t2 * s.y - u * s.z,
            z: self.gamma_t1 * (1.0 - s.z) + u * s.y,
        }
    }

    /// Fixed-step RK4 solution over `duration`, failing if the state leaves
    /// the unit disk.
    pub fn integrate<C: Control>(
        &self,
        s: BlochState,
        control: C,
        duration: f64,
        step: f64,
    ) -> Result<BlochState> {
        ode::integrate(self, s, &control, duration, step)
    }

    /// `dr/dt`, which does not depend on the control.
    pub fn radial_speed(&self, s: BlochState) -> Result<f64> {
        let r = s.radius();
        if r == 0.0 {
            return Err(Error::AtOrigin);
        }
        let (g2, g1) = (self.gamma_t2, self.gamma_t1);
        Ok((-g2 * s.y * s.y + g1 * s.z - g1 * s.z * s.z) / r)
    }

    /// `d(dr/dt)/dθ` at fixed radius, as `(|y|/r)·(2Γz + γ − 2γz)`.
    pub fn radial_speed_dtheta(&self, s: BlochState) -> Result<f64> {
        let r = s.radius();
        if r == 0.0 {
            return Err(Error::AtOrigin);
        }
        let (g2, g1) = (self.gamma_t2, self.gamma_t1);
        Ok(s.y.abs() / r * (2.0 * g2 * s.z + g1 - 2.0 * g1 * s.z))
    }
}

/// Magnetization normalized by its equilibrium value: `y` transverse, `z`
/// longitudinal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochState {
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    /// Thermal equilibrium `(0, 1)`.
    pub const EQUILIBRIUM: BlochState = BlochState { y: 0.0, z: 1.0 };

    pub const fn new(y: f64, z: f64) -> Self {
        Self { y, z }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        Self { y: r * cos, z: r * sin }
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.y.hypot(self.z)
    }

    /// Polar angle measured from the +y axis.
    #[inline]
    pub fn angle(&self) -> f64 {
        self.z.atan2(self.y)
    }

    pub fn distance(&self, other: BlochState) -> f64 {
        (self.y - other.y).hypot(self.z - other.z)
    }

    /// Closed unit disk membership, with [`BALL_EPS`] slack.
    pub fn in_disk(&self) -> bool {
        self.norm_sq() <= 1.0 + BALL_EPS
    }

    /// Instantaneous rotation by `phi`; positive angles tip +z toward +y.
    pub fn rotated(&self, phi: f64) -> BlochState {
        let (sin, cos) = phi.sin_cos();
        BlochState {
            y: self.y * cos + self.z * sin,
            z: -self.y * sin + self.z * cos,
        }
    }

    pub(crate) fn axpy(self, a: f64, d: BlochState) -> BlochState {
        BlochState { y: self.y + a * d.y, z: self.z + a * d.z }
    }
}

/// Acquisition bookkeeping in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTiming {
    pub t_detect: f64,
    pub t_total: f64,
    pub n_cycles: u64,
}

impl ExperimentTiming {
    /// Derives the repetition count for a normalized control time `t_control`.
    pub fn new(t_detect: f64, t_total: f64, t_control: f64) -> Result<Self> {
        if !(t_detect > 0.0 && t_total > 0.0 && t_control >= 0.0) {
            return Err(Error::domain("timing values must be positive"));
        }
        let block = t_detect * (1.0 + t_control);
        let n_cycles = (t_total / block).round().max(1.0) as u64;
        Ok(Self { t_detect, t_total, n_cycles })
    }
}

/// Total SNR `R = √(T/T_d)·q` accumulated over the whole experiment.
pub fn total_snr(q: f64, timing: &ExperimentTiming) -> f64 {
    (timing.t_total / timing.t_detect).sqrt() * q
}
