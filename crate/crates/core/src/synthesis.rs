//! Steady-state synthesis: which optimal control structure drives the
//! detection-relaxed state `S = relax(M, 1)` back to each measurement
//! point `M`, and how the (γ, Γ) plane splits into qualitatively different
//! syntheses.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bloch::{BlochState, RelaxationPair};
use crate::error::{Error, Result};
use crate::optim::bisect;

/// Half-width of the `r_s = r_m` band classified as a single bang.
pub const CLASS_EPS: f64 = 1e-10;

/// Optimal pulse-sequence shape taking `S` to `M`.
///
/// `B` is an instantaneous rotation, `Sv+`/`Sv-` are free-evolution arcs
/// on the positive/negative z-axis, `Sh` is the feedback arc on the magic
/// plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlStructure {
    B,
    BSvPosB,
    BSvNegB,
    BShB,
    BShSvNegB,
}

impl ControlStructure {
    pub const ALL: [ControlStructure; 5] = [
        ControlStructure::B,
        ControlStructure::BSvPosB,
        ControlStructure::BSvNegB,
        ControlStructure::BShB,
        ControlStructure::BShSvNegB,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ControlStructure::B => "B",
            ControlStructure::BSvPosB => "BSvPosB",
            ControlStructure::BSvNegB => "BSvNegB",
            ControlStructure::BShB => "BShB",
            ControlStructure::BShSvNegB => "BShSvNegB",
        }
    }
}

impl fmt::Display for ControlStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ControlStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControlStructure::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::domain(format!("unknown control structure {s:?}")))
    }
}

/// Layout of the synthesis, ordered by decreasing Γ at fixed γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SynthesisRegime {
    /// Γ ≥ Γ_ab(γ).
    A,
    /// 3γ/2 < Γ < Γ_ab(γ).
    B,
    /// Γ ≤ 3γ/2: the magic plane misses the disk.
    C,
}

impl fmt::Display for SynthesisRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisRegime::A => "A",
            SynthesisRegime::B => "B",
            SynthesisRegime::C => "C",
        })
    }
}

/// The horizontal line of fastest radial shrinkage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicPlane {
    /// `−γ/(2(Γ−γ))`; `None` when Γ ≤ γ (no finite plane).
    pub z0: Option<f64>,
    /// Whether the plane cuts the open unit disk.
    pub present: bool,
}

impl MagicPlane {
    /// `|z₀|` when the plane crosses the disk.
    pub fn radius(&self) -> Option<f64> {
        if self.present {
            self.z0.map(f64::abs)
        } else {
            None
        }
    }
}

pub fn magic_plane(p: &RelaxationPair) -> MagicPlane {
    let (g2, g1) = (p.gamma_t2(), p.gamma_t1());
    if g2 <= g1 {
        return MagicPlane { z0: None, present: false };
    }
    let z0 = -g1 / (2.0 * (g2 - g1));
    MagicPlane { z0: Some(z0), present: g2 > 1.5 * g1 }
}

/// `r_s² − r_m²` with `S = relax(M, 1)`; zero on the Ernst ellipsoid.
pub fn ernst_ellipsoid_residual(m: BlochState, p: &RelaxationPair) -> f64 {
    let ey = (-2.0 * p.gamma_t2()).exp();
    let zs = (m.z - 1.0) * (-p.gamma_t1()).exp() + 1.0;
    m.y * m.y * ey + zs * zs - m.z * m.z - m.y * m.y
}

/// `Γy² + γz² − γz = −r·ṙ`: zero where the radius is stationary, positive
/// where it shrinks.
pub fn zero_radial_speed_residual(s: BlochState, p: &RelaxationPair) -> f64 {
    let g1 = p.gamma_t1();
    p.gamma_t2() * s.y * s.y + g1 * s.z * s.z - g1 * s.z
}

/// Radii of the measurement point and its detection-relaxed image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRadii {
    pub r_m: f64,
    pub r_s: f64,
}

pub fn cycle_radii(m: BlochState, p: &RelaxationPair) -> CycleRadii {
    CycleRadii { r_m: m.radius(), r_s: p.relax(m, 1.0).radius() }
}

pub(crate) fn check_half_disk(m: BlochState) -> Result<()> {
    if !(m.y.is_finite() && m.z.is_finite()) {
        return Err(Error::domain("measurement point must be finite"));
    }
    if m.y < 0.0 {
        return Err(Error::domain(format!("measurement point must have y ≥ 0, got y = {}", m.y)));
    }
    if m.norm_sq() >= 1.0 {
        return Err(Error::domain(format!(
            "measurement point must lie in the open unit disk, got radius {}",
            m.radius()
        )));
    }
    Ok(())
}

/// Optimal control structure for the measurement point `m`.
pub fn classify(m: BlochState, p: &RelaxationPair) -> Result<ControlStructure> {
    check_half_disk(m)?;
    let CycleRadii { r_m, r_s } = cycle_radii(m, p);
    Ok(classify_radii(r_m, r_s, &magic_plane(p)))
}

pub(crate) fn classify_radii(r_m: f64, r_s: f64, plane: &MagicPlane) -> ControlStructure {
    if (r_s - r_m).abs() <= CLASS_EPS {
        return ControlStructure::B;
    }
    if r_s < r_m {
        return ControlStructure::BSvPosB;
    }
    let Some(z0_abs) = plane.radius() else {
        return ControlStructure::BSvNegB;
    };
    if r_s > z0_abs && z0_abs > r_m {
        ControlStructure::BShSvNegB
    } else if r_m >= z0_abs {
        ControlStructure::BShB
    } else {
        ControlStructure::BSvNegB
    }
}

/// `(Γ_ab, Γ_bc)` separating regimes A/B and B/C at longitudinal rate γ.
pub fn regime_boundaries(gamma: f64) -> (f64, f64) {
    // (γ/2)(1 − 3e^γ)/(1 − e^γ), written with expm1 for small γ.
    let em1 = gamma.exp_m1();
    let gamma_ab = 0.5 * gamma * (2.0 + 3.0 * em1) / em1;
    (gamma_ab, 1.5 * gamma)
}

pub fn regime(p: &RelaxationPair) -> SynthesisRegime {
    let (gamma_ab, gamma_bc) = regime_boundaries(p.gamma_t1());
    let g2 = p.gamma_t2();
    if g2 <= gamma_bc {
        SynthesisRegime::C
    } else if g2 >= gamma_ab {
        SynthesisRegime::A
    } else {
        SynthesisRegime::B
    }
}

/// `z` range `[z_min, 1]` spanned by the Ernst ellipsoid; `z_min = −tanh(γ/2)`.
pub fn ernst_ellipsoid_z_range(p: &RelaxationPair) -> (f64, f64) {
    (-(0.5 * p.gamma_t1()).tanh(), 1.0)
}

/// Transverse coordinate of the Ernst ellipsoid at height `z`, found by
/// bisection on the residual. `None` outside the ellipsoid's z range.
pub fn ernst_ellipsoid_y(z: f64, p: &RelaxationPair) -> Option<f64> {
    let (z_min, z_max) = ernst_ellipsoid_z_range(p);
    if !(z_min..=z_max).contains(&z) {
        return None;
    }
    let res = |y: f64| ernst_ellipsoid_residual(BlochState::new(y, z), p);
    let y_max = (1.0 - z * z).max(0.0).sqrt();
    if res(0.0) <= 0.0 {
        return Some(0.0);
    }
    if res(y_max) > 0.0 {
        // Only possible for unphysical pairs, where S can leave the disk.
        return None;
    }
    bisect(res, 0.0, y_max, 1e-15).ok()
}

/// Boundary curves of the synthesis, sampled in M space on `y ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurves {
    /// `r_s = r_m`.
    pub ernst_ellipsoid: Vec<BlochState>,
    /// `r_m = |z₀|`.
    pub magic_circle: Vec<BlochState>,
    /// `r_s = |z₀|`.
    pub relaxed_magic_circle: Vec<BlochState>,
}

pub fn boundary_curves(p: &RelaxationPair, n: usize) -> Result<BoundaryCurves> {
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 samples per curve, got {n}")));
    }
    let (z_min, z_max) = ernst_ellipsoid_z_range(p);
    // Cosine spacing clusters samples toward the poles, where y(z) is steep.
    let ernst_ellipsoid = (0..n)
        .filter_map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let z = z_min + (z_max - z_min) * 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
            ernst_ellipsoid_y(z, p).map(|y| BlochState::new(y, z))
        })
        .collect();

    let (magic_circle, relaxed_magic_circle) = match magic_plane(p).radius() {
        None => (Vec::new(), Vec::new()),
        Some(rho) => {
            let half_circle: Vec<BlochState> = (0..n)
                .map(|i| {
                    let theta = -FRAC_PI_2 + std::f64::consts::PI * i as f64 / (n - 1) as f64;
                    BlochState::from_polar(rho, theta)
                })
                .collect();
            let relaxed = half_circle
                .iter()
                .filter_map(|&s| p.relax_inverse(s, 1.0).ok())
                .filter(|m| m.norm_sq() < 1.0)
                .collect();
            (half_circle, relaxed)
        }
    };
    Ok(BoundaryCurves { ernst_ellipsoid, magic_circle, relaxed_magic_circle })
}
