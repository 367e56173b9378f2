//! Travel times along the singular sets, the control time `T_c(M)` and the
//! figure of merit `Q(M) = y_m / √(1 + T_c)`.
//!
//! Control times are composed segment by segment from two exact travel
//! times:
//!
//! * the z-axis (`y = 0`, `u = 0`): `ż = γ(1 − z)`;
//! * the magic plane (`z = z₀`, `u = −γ(1 − z₀)/y`): with `w = y²`,
//!   `ẇ = −2Γw + 2γ(1 − z₀)z₀`, a linear ODE with negative fixed point
//!   `w∞ = γ(1 − z₀)z₀/Γ`, so `y` reaches 0 in finite time.

use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::bloch::{BlochState, RelaxationPair};
use crate::error::{Error, Result};
use crate::optim::bisect;
use crate::synthesis::{self, classify_radii, cycle_radii, magic_plane, ControlStructure, CycleRadii, MagicPlane};

/// Time to move from `z1` up to `z2` along the z-axis under free evolution.
pub fn time_vertical(z1: f64, z2: f64, p: &RelaxationPair) -> Result<f64> {
    if !(z2 < 1.0) {
        return Err(Error::domain(format!("z-axis target {z2} is not reachable (z2 must be < 1)")));
    }
    if !(z1 <= z2) {
        return Err(Error::domain(format!(
            "free evolution on the z-axis only raises z; cannot go from {z1} to {z2}"
        )));
    }
    if z1 == z2 {
        return Ok(0.0);
    }
    Ok(((1.0 - z1) / (1.0 - z2)).ln() / p.gamma_t1())
}

/// Time to move from `y1` down to `y2` along the magic plane.
pub fn time_magic(y1: f64, y2: f64, p: &RelaxationPair) -> Result<f64> {
    let plane = magic_plane(p);
    let z0 = match (plane.present, plane.z0) {
        (true, Some(z0)) => z0,
        _ => return Err(Error::domain("the magic plane does not intersect the unit disk")),
    };
    if !(y2 >= 0.0 && y1 >= y2) {
        return Err(Error::domain(format!(
            "the magic-plane flow lowers y toward 0; cannot go from {y1} to {y2}"
        )));
    }
    if y1 == y2 {
        return Ok(0.0);
    }
    let g2 = p.gamma_t2();
    let w_inf = p.gamma_t1() * (1.0 - z0) * z0 / g2;
    Ok(((y1 * y1 - w_inf) / (y2 * y2 - w_inf)).ln() / (2.0 * g2))
}

fn magic_y(r: f64, z0: f64) -> f64 {
    (r * r - z0 * z0).max(0.0).sqrt()
}

/// Optimal control structure and minimum control time for `m`.
pub fn control_time(m: BlochState, p: &RelaxationPair) -> Result<(ControlStructure, f64)> {
    synthesis::check_half_disk(m)?;
    let radii = cycle_radii(m, p);
    let plane = magic_plane(p);
    let structure = classify_radii(radii.r_m, radii.r_s, &plane);
    let t = structure_time(structure, radii, &plane, p)?;
    Ok((structure, t))
}

fn structure_time(
    structure: ControlStructure,
    CycleRadii { r_m, r_s }: CycleRadii,
    plane: &MagicPlane,
    p: &RelaxationPair,
) -> Result<f64> {
    let z0 = || plane.z0.ok_or_else(|| Error::domain("structure needs the magic plane"));
    match structure {
        ControlStructure::B => Ok(0.0),
        ControlStructure::BSvPosB => time_vertical(r_s, r_m, p),
        ControlStructure::BSvNegB => time_vertical(-r_s, -r_m, p),
        ControlStructure::BShB => {
            let z0 = z0()?;
            time_magic(magic_y(r_s, z0), magic_y(r_m, z0), p)
        }
        ControlStructure::BShSvNegB => {
            let z0 = z0()?;
            Ok(time_magic(magic_y(r_s, z0), 0.0, p)? + time_vertical(z0, -r_m, p)?)
        }
    }
}

/// One evaluation of the figure of merit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSample {
    pub m: BlochState,
    pub structure: ControlStructure,
    pub t_control: f64,
    pub q: f64,
}

pub fn q_value(m: BlochState, p: &RelaxationPair) -> Result<QSample> {
    let (structure, t_control) = control_time(m, p)?;
    Ok(QSample { m, structure, t_control, q: m.y / (1.0 + t_control).sqrt() })
}

/// Q evaluated on a regular lattice of the open half-disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub params: RelaxationPair,
    pub n_y: usize,
    pub n_z: usize,
    /// Row-major: rows of constant z from bottom to top, y increasing.
    pub samples: Vec<QSample>,
}

/// Cell-centred lattice coordinates over `y ∈ (0, 1)`, `z ∈ (−1, 1)`.
pub fn lattice_point(i: usize, j: usize, n_y: usize, n_z: usize) -> BlochState {
    BlochState::new((i as f64 + 0.5) / n_y as f64, -1.0 + 2.0 * (j as f64 + 0.5) / n_z as f64)
}

pub fn q_grid(p: &RelaxationPair, n_y: usize, n_z: usize) -> Result<QGrid> {
    if n_y < 2 || n_z < 2 {
        return Err(Error::domain(format!("grid resolution must be at least 2×2, got {n_y}×{n_z}")));
    }
    let rows: Vec<Vec<QSample>> = (0..n_z)
        .into_par_iter()
        .map(|j| {
            (0..n_y)
                .map(|i| lattice_point(i, j, n_y, n_z))
                .filter(|m| m.norm_sq() < 1.0)
                .map(|m| q_value(m, p))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(QGrid { params: *p, n_y, n_z, samples: rows.into_iter().flatten().collect() })
}

impl QGrid {
    pub fn max_sample(&self) -> Option<&QSample> {
        self.samples.iter().max_by(|a, b| a.q.total_cmp(&b.q))
    }

    /// The `k` best samples by Q, best first.
    pub fn top_samples(&self, k: usize) -> Vec<QSample> {
        let mut sorted = self.samples.clone();
        sorted.sort_by(|a, b| b.q.total_cmp(&a.q));
        sorted.truncate(k);
        sorted
    }
}

/// One piece of an optimal cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    /// Instantaneous rotation by `angle` (positive tips +z toward +y).
    Bang { from: BlochState, to: BlochState, angle: f64 },
    MagicArc { from: BlochState, to: BlochState, duration: f64 },
    AxisArc { from: BlochState, to: BlochState, duration: f64 },
    /// Free relaxation during the detection window, `M → S`.
    Detection { from: BlochState, to: BlochState, duration: f64 },
}

impl Segment {
    pub fn kind(&self) -> &'static str {
        match self {
            Segment::Bang { .. } => "bang",
            Segment::MagicArc { .. } => "magic_arc",
            Segment::AxisArc { .. } => "axis_arc",
            Segment::Detection { .. } => "detection",
        }
    }

    pub fn endpoints(&self) -> (BlochState, BlochState) {
        match *self {
            Segment::Bang { from, to, .. }
            | Segment::MagicArc { from, to, .. }
            | Segment::AxisArc { from, to, .. }
            | Segment::Detection { from, to, .. } => (from, to),
        }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Bang { .. } => 0.0,
            Segment::MagicArc { duration, .. }
            | Segment::AxisArc { duration, .. }
            | Segment::Detection { duration, .. } => duration,
        }
    }

    /// `n ≥ 2` points along the segment, endpoints included.
    pub fn sample(&self, p: &RelaxationPair, n: usize) -> Vec<BlochState> {
        let n = n.max(2);
        let frac = |k: usize| k as f64 / (n - 1) as f64;
        match *self {
            Segment::Bang { from, angle, .. } => (0..n).map(|k| from.rotated(angle * frac(k))).collect(),
            Segment::AxisArc { from, to, .. } => (0..n)
                .map(|k| BlochState::new(0.0, from.z + (to.z - from.z) * frac(k)))
                .collect(),
            Segment::MagicArc { from, to, .. } => (0..n)
                .map(|k| BlochState::new(from.y + (to.y - from.y) * frac(k), from.z))
                .collect(),
            Segment::Detection { from, duration, .. } => {
                (0..n).map(|k| p.relax(from, duration * frac(k))).collect()
            }
        }
    }
}

/// The optimal cycle through `m`: control segments from `S` to `M`, then
/// detection back to `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub structure: ControlStructure,
    pub s: BlochState,
    pub m: BlochState,
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn control_time(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| !matches!(s, Segment::Detection { .. }))
            .map(Segment::duration)
            .sum()
    }

    /// Total rotation angle of the bangs.
    pub fn bang_angle(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Bang { angle, .. } => angle.abs(),
                _ => 0.0,
            })
            .sum()
    }

    /// `(segment index, point)` polyline for plotting.
    pub fn polyline(&self, p: &RelaxationPair, points_per_segment: usize) -> Vec<(usize, BlochState)> {
        self.segments
            .iter()
            .enumerate()
            .flat_map(|(k, seg)| seg.sample(p, points_per_segment).into_iter().map(move |s| (k, s)))
            .collect()
    }
}

fn bang(from: BlochState, to_angle: f64) -> Segment {
    let angle = from.angle() - to_angle;
    Segment::Bang { from, to: BlochState::from_polar(from.radius(), to_angle), angle }
}

/// Builds the optimal cycle for `m` with exact segment endpoints.
pub fn optimal_trajectory(m: BlochState, p: &RelaxationPair) -> Result<Trajectory> {
    synthesis::check_half_disk(m)?;
    let s = p.relax(m, 1.0);
    let radii = cycle_radii(m, p);
    let CycleRadii { r_m, r_s } = radii;
    let plane = magic_plane(p);
    let structure = classify_radii(r_m, r_s, &plane);
    let theta_m = m.angle();
    let mut segments = Vec::with_capacity(5);

    let finish = |segments: &mut Vec<Segment>, last: BlochState| {
        segments.push(bang(last, theta_m));
        segments.push(Segment::Detection { from: m, to: s, duration: 1.0 });
    };

    match structure {
        ControlStructure::B => {
            segments.push(Segment::Bang { from: s, to: m, angle: s.angle() - theta_m });
            segments.push(Segment::Detection { from: m, to: s, duration: 1.0 });
        }
        ControlStructure::BSvPosB | ControlStructure::BSvNegB => {
            let (start, end) = if structure == ControlStructure::BSvPosB {
                (BlochState::new(0.0, r_s), BlochState::new(0.0, r_m))
            } else {
                (BlochState::new(0.0, -r_s), BlochState::new(0.0, -r_m))
            };
            segments.push(bang(s, start.angle()));
            let duration = structure_time(structure, radii, &plane, p)?;
            segments.push(Segment::AxisArc { from: start, to: end, duration });
            finish(&mut segments, end);
        }
        ControlStructure::BShB | ControlStructure::BShSvNegB => {
            let z0 = plane.z0.ok_or_else(|| Error::domain("structure needs the magic plane"))?;
            let on_plane = BlochState::new(magic_y(r_s, z0), z0);
            segments.push(bang(s, on_plane.angle()));
            if structure == ControlStructure::BShB {
                let end = BlochState::new(magic_y(r_m, z0), z0);
                let duration = time_magic(on_plane.y, end.y, p)?;
                segments.push(Segment::MagicArc { from: on_plane, to: end, duration });
                finish(&mut segments, end);
            } else {
                let axis = BlochState::new(0.0, z0);
                let end = BlochState::new(0.0, -r_m);
                segments.push(Segment::MagicArc {
                    from: on_plane,
                    to: axis,
                    duration: time_magic(on_plane.y, 0.0, p)?,
                });
                segments.push(Segment::AxisArc { from: axis, to: end, duration: time_vertical(z0, -r_m, p)? });
                finish(&mut segments, end);
            }
        }
    }
    Ok(Trajectory { structure, s, m, segments })
}

/// The printed closed form for the magic-plane-then-axis structure, which
/// lacks the constant `(1/2Γ) ln((Γ−γ)/(2Γ−γ))` carried by the composed
/// time. Kept only to quantify that discrepancy.
pub fn printed_magic_axis_time(m: BlochState, p: &RelaxationPair) -> Result<f64> {
    synthesis::check_half_disk(m)?;
    if !magic_plane(p).present {
        return Err(Error::domain("the magic plane does not intersect the unit disk"));
    }
    let (g2, g1) = (p.gamma_t2(), p.gamma_t1());
    let r_s = p.relax(m, 1.0).radius();
    let plane = ((4.0 * r_s * r_s * g2 * (g2 - g1) + g1 * g1) / (g1 * g1)).ln() / (2.0 * g2);
    let axis = ((2.0 * g2 - g1) / (2.0 * (g2 - g1)) / (1.0 + m.radius())).ln() / g1;
    Ok(plane + axis)
}

/// Difference between the composed and the printed magic-then-axis times.
pub fn printed_magic_axis_offset(p: &RelaxationPair) -> f64 {
    let (g2, g1) = (p.gamma_t2(), p.gamma_t1());
    ((g2 - g1) / (2.0 * g2 - g1)).ln() / (2.0 * g2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// `r_s = r_m`
    ErnstEllipsoid,
    /// `r_m = |z₀|`
    MagicCircle,
    /// `r_s = |z₀|`
    RelaxedMagicCircle,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 3] =
        [BoundaryKind::ErnstEllipsoid, BoundaryKind::MagicCircle, BoundaryKind::RelaxedMagicCircle];

    pub fn label(&self) -> &'static str {
        match self {
            BoundaryKind::ErnstEllipsoid => "ernst_ellipsoid",
            BoundaryKind::MagicCircle => "magic_circle",
            BoundaryKind::RelaxedMagicCircle => "relaxed_magic_circle",
        }
    }

    /// Signed level-set function whose zero set is the curve.
    pub fn level(&self, m: BlochState, p: &RelaxationPair) -> f64 {
        let CycleRadii { r_m, r_s } = cycle_radii(m, p);
        let rho = magic_plane(p).radius().unwrap_or(f64::NAN);
        match self {
            BoundaryKind::ErnstEllipsoid => r_s - r_m,
            BoundaryKind::MagicCircle => r_m - rho,
            BoundaryKind::RelaxedMagicCircle => r_s - rho,
        }
    }

    fn unit_normal(&self, m: BlochState, p: &RelaxationPair) -> Option<BlochState> {
        let s = p.relax(m, 1.0);
        let (e2, e1) = ((-p.gamma_t2()).exp(), (-p.gamma_t1()).exp());
        let r_m = m.radius();
        let r_s = s.radius();
        let grad_m = BlochState::new(m.y / r_m, m.z / r_m);
        let grad_s = BlochState::new(s.y * e2 / r_s, s.z * e1 / r_s);
        let g = match self {
            BoundaryKind::ErnstEllipsoid => BlochState::new(grad_s.y - grad_m.y, grad_s.z - grad_m.z),
            BoundaryKind::MagicCircle => grad_m,
            BoundaryKind::RelaxedMagicCircle => grad_s,
        };
        let norm = g.radius();
        (norm.is_finite() && norm > 0.0).then(|| BlochState::new(g.y / norm, g.z / norm))
    }
}

/// `n` points evenly spaced in the curve parameter over the part of the
/// curve inside the open half-disk, endpoints excluded: height for the
/// ellipsoid, polar angle for the circles. Empty if the curve is absent.
pub fn boundary_samples(boundary: BoundaryKind, p: &RelaxationPair, n: usize) -> Vec<BlochState> {
    let spaced = |a: f64, b: f64| (1..=n).map(move |k| a + (b - a) * k as f64 / (n + 1) as f64);
    let rho = magic_plane(p).radius();
    match (boundary, rho) {
        (BoundaryKind::ErnstEllipsoid, _) => {
            let (z_min, z_max) = synthesis::ernst_ellipsoid_z_range(p);
            spaced(z_min, z_max)
                .filter_map(|z| synthesis::ernst_ellipsoid_y(z, p).map(|y| BlochState::new(y, z)))
                .collect()
        }
        (BoundaryKind::MagicCircle, Some(rho)) => {
            spaced(-FRAC_PI_2, FRAC_PI_2).map(|t| BlochState::from_polar(rho, t)).collect()
        }
        (BoundaryKind::RelaxedMagicCircle, Some(rho)) => {
            let preimage = |t: f64| {
                p.relax_inverse(BlochState::from_polar(rho, t), 1.0).ok().filter(|m| m.norm_sq() < 1.0)
            };
            // The in-disk part can be several disjoint arcs; find each run on
            // a scan, sharpen its ends, and spread the samples over their
            // combined length.
            const SCAN: usize = 4096;
            let cell = PI / SCAN as f64;
            let at = |k: usize| -FRAC_PI_2 + cell * k as f64;
            let inside = |t: f64| if preimage(t).is_some() { 1.0 } else { -1.0 };
            let mut runs: Vec<(f64, f64)> = Vec::new();
            let mut open: Option<usize> = None;
            for k in 1..=SCAN {
                let hit = k < SCAN && preimage(at(k)).is_some();
                match (hit, open) {
                    (true, None) => open = Some(k),
                    (false, Some(first)) => {
                        let last = k - 1;
                        let lo = if first > 1 { bisect(inside, at(first), at(first - 1), 1e-14).unwrap_or(at(first)) } else { at(first) };
                        let hi = if last + 1 < SCAN { bisect(inside, at(last), at(last + 1), 1e-14).unwrap_or(at(last)) } else { at(last) };
                        runs.push((lo, hi));
                        open = None;
                    }
                    _ => {}
                }
            }
            let total: f64 = runs.iter().map(|(a, b)| b - a).sum();
            if runs.is_empty() || total <= 0.0 {
                return Vec::new();
            }
            spaced(0.0, total)
                .filter_map(|mut s| {
                    for &(a, b) in &runs {
                        if s <= b - a {
                            return preimage(a + s);
                        }
                        s -= b - a;
                    }
                    None
                })
                .collect()
        }
        (_, None) => Vec::new(),
    }
}

/// Largest jump of `Q` across one boundary curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryJump {
    pub boundary: BoundaryKind,
    pub samples: usize,
    pub max_jump: f64,
    pub worst_point: BlochState,
}

/// Samples `n` interior points on each boundary curve present for `p` and
/// compares `Q` at `±offset` along the curve normal.
pub fn boundary_continuity(p: &RelaxationPair, n: usize, offset: f64) -> Result<Vec<BoundaryJump>> {
    if !(offset > 0.0) {
        return Err(Error::domain(format!("offset must be positive, got {offset}")));
    }
    let margin = 10.0 * offset;
    let mut out = Vec::new();
    for boundary in BoundaryKind::ALL {
        let points: Vec<BlochState> = boundary_samples(boundary, p, n)
            .into_iter()
            .filter(|m| m.y > margin && m.radius() < 1.0 - margin)
            .collect();
        if points.is_empty() {
            continue;
        }
        let jumps = points
            .par_iter()
            .filter_map(|&m| boundary.unit_normal(m, p).map(|nrm| (m, nrm)))
            .map(|(m, nrm)| {
                let plus = BlochState::new(m.y + offset * nrm.y, m.z + offset * nrm.z);
                let minus = BlochState::new(m.y - offset * nrm.y, m.z - offset * nrm.z);
                Ok((m, (q_value(plus, p)?.q - q_value(minus, p)?.q).abs()))
            })
            .collect::<Result<Vec<_>>>()?;
        let samples = jumps.len();
        let (worst_point, max_jump) =
            jumps.into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((BlochState::EQUILIBRIUM, 0.0));
        out.push(BoundaryJump { boundary, samples, max_jump, worst_point });
    }
    Ok(out)
}
