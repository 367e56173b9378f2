//! The Ernst solution: the single-pulse steady state that maximizes the
//! figure of merit, and the numerical searches that confirm it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{BlochState, RelaxationPair};
use crate::error::{Error, Result};
use crate::optim::{bisect, golden_section_max, nelder_mead_min};
use crate::qsurface::{q_grid, q_value};
use crate::synthesis::{
    ernst_ellipsoid_residual, ernst_ellipsoid_y, ernst_ellipsoid_z_range, regime, regime_boundaries,
    SynthesisRegime,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErnstSolution {
    /// Measurement point.
    pub m: BlochState,
    /// Steady state, `relax(m, 1)`.
    pub s: BlochState,
    pub q: f64,
    /// Flip angle taking `s` to `m`.
    pub flip: f64,
}

impl ErnstSolution {
    fn from_m(m: BlochState, p: &RelaxationPair) -> Self {
        let s = p.relax(m, 1.0);
        ErnstSolution { m, s, q: m.y, flip: s.angle() - m.angle() }
    }
}

/// Closed-form optimum.
pub fn ernst_solution(p: &RelaxationPair) -> ErnstSolution {
    let (g2, g1) = (p.gamma_t2(), p.gamma_t1());
    let z = 1.0 / (1.0 + g1.exp());
    // e^Γ/(1+e^γ)·√((e^{2γ}−1)/(e^{2Γ}−1)) rearranged to avoid overflow.
    let y = ((0.5 * g1).tanh() / -(-2.0 * g2).exp_m1()).sqrt();
    let cos_flip = ((-g1).exp() + (-g2).exp()) / (1.0 + (-g2 - g1).exp());
    let m = BlochState::new(y, z);
    ErnstSolution { m, s: p.relax(m, 1.0), q: y, flip: cos_flip.clamp(-1.0, 1.0).acos() }
}

/// Numerically maximizes `y` along the Ernst ellipsoid in the `z`
/// parameterization, then polishes the first-order condition.
pub fn maximize_on_ellipsoid(p: &RelaxationPair) -> Result<ErnstSolution> {
    let (z_min, z_max) = ernst_ellipsoid_z_range(p);
    let y_of = |z: f64| ernst_ellipsoid_y(z, p).unwrap_or(f64::NEG_INFINITY);
    let coarse = golden_section_max(y_of, z_min, z_max, 1e-12);
    if !coarse.value.is_finite() || coarse.value <= 0.0 {
        return Err(Error::Numerical("Ernst ellipsoid has no interior point".into()));
    }

    // dy/dz = 0 ⇔ ∂res/∂z = 0 at fixed y (implicit function theorem;
    // ∂res/∂y ≠ 0 for y > 0). The residual is quadratic, so the central
    // difference is exact up to rounding.
    let y_star = coarse.value;
    let h = 1e-4;
    let dres_dz = |z: f64| {
        (ernst_ellipsoid_residual(BlochState::new(y_star, z + h), p)
            - ernst_ellipsoid_residual(BlochState::new(y_star, z - h), p))
            / (2.0 * h)
    };
    let width = 1e-3;
    let lo = (coarse.x - width).max(z_min);
    let hi = (coarse.x + width).min(z_max);
    let z = bisect(dres_dz, lo, hi, 1e-15)?;
    let y = ernst_ellipsoid_y(z, p).ok_or_else(|| Error::Numerical("polished z left the ellipsoid".into()))?;
    Ok(ErnstSolution::from_m(BlochState::new(y, z), p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMaximum {
    pub m: BlochState,
    pub q: f64,
    /// Best value seen on the coarse grid.
    pub grid_q: f64,
}

const MULTI_STARTS: usize = 5;

/// Coarse grid scan of Q over the half-disk followed by simplex refinement
/// from the best few cells.
pub fn maximize_q_global(p: &RelaxationPair, coarse_n: usize) -> Result<GlobalMaximum> {
    if coarse_n < 64 {
        return Err(Error::domain(format!("coarse grid needs at least 64 points per axis, got {coarse_n}")));
    }
    let grid = q_grid(p, coarse_n, coarse_n)?;
    let starts = grid.top_samples(MULTI_STARTS);
    let grid_q = starts.first().map(|s| s.q).ok_or_else(|| Error::Numerical("empty grid".into()))?;

    // Outside the open half-disk the objective is +∞, which keeps the
    // simplex inside without an explicit projection step.
    let neg_q = |x: [f64; 2]| {
        let m = BlochState::new(x[0], x[1]);
        if m.y < 0.0 || m.norm_sq() >= 1.0 {
            return f64::INFINITY;
        }
        q_value(m, p).map(|s| -s.q).unwrap_or(f64::INFINITY)
    };
    let cell = 1.0 / coarse_n as f64;
    let best = starts
        .par_iter()
        .map(|s| nelder_mead_min(neg_q, [s.m.y, s.m.z], cell, 1e-10, 20_000))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    Ok(GlobalMaximum { m: BlochState::new(best.x[0], best.x[1]), q: -best.value, grid_q })
}

/// One (γ, Γ) cell of the Ernst phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub big_gamma: f64,
    /// `None` on the masked non-physical region `2Γ < γ`.
    pub q_ernst: Option<f64>,
    pub regime: SynthesisRegime,
    pub physical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub n_gamma: usize,
    pub n_big_gamma: usize,
    /// Row-major: γ outer, Γ inner.
    pub cells: Vec<PhaseCell>,
    /// `(γ, Γ_ab(γ))`.
    pub boundary_ab: Vec<(f64, f64)>,
    /// `(γ, Γ_bc(γ)) = (γ, 3γ/2)`.
    pub boundary_bc: Vec<(f64, f64)>,
    /// `(γ, γ/2)`: below it the rates are unphysical.
    pub physical_limit: Vec<(f64, f64)>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

/// Ernst figure of merit over a (γ, Γ) lattice, endpoints included.
pub fn q_max_surface(
    gamma_range: (f64, f64),
    big_gamma_range: (f64, f64),
    n_gamma: usize,
    n_big_gamma: usize,
) -> Result<PhaseDiagram> {
    for (name, (lo, hi)) in [("gamma", gamma_range), ("Gamma", big_gamma_range)] {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::domain(format!("{name} range must satisfy 0 < lo ≤ hi, got ({lo}, {hi})")));
        }
    }
    if n_gamma == 0 || n_big_gamma == 0 {
        return Err(Error::domain("lattice needs at least one point per axis"));
    }
    let cells = linspace(gamma_range.0, gamma_range.1, n_gamma)
        .flat_map(|g1| {
            linspace(big_gamma_range.0, big_gamma_range.1, n_big_gamma).map(move |g2| {
                let p = RelaxationPair::with_override(g2, g1, true).expect("positive rates");
                let physical = p.is_physical();
                PhaseCell {
                    gamma: g1,
                    big_gamma: g2,
                    q_ernst: physical.then(|| ernst_solution(&p).q),
                    regime: regime(&p),
                    physical,
                }
            })
        })
        .collect();
    let gammas: Vec<f64> = linspace(gamma_range.0, gamma_range.1, n_gamma.max(2)).collect();
    Ok(PhaseDiagram {
        n_gamma,
        n_big_gamma,
        cells,
        boundary_ab: gammas.iter().map(|&g| (g, regime_boundaries(g).0)).collect(),
        boundary_bc: gammas.iter().map(|&g| (g, regime_boundaries(g).1)).collect(),
        physical_limit: gammas.iter().map(|&g| (g, 0.5 * g)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b_pair() -> RelaxationPair {
        RelaxationPair::new(1.8, 1.0).unwrap()
    }

    /// Direct transcription of the closed forms, no rearrangement.
    fn closed_form(g2: f64, g1: f64) -> (f64, f64, f64) {
        let e = f64::exp;
        let y = e(g2) / (1.0 + e(g1)) * ((e(2.0 * g1) - 1.0) / (e(2.0 * g2) - 1.0)).sqrt();
        let z = 1.0 / (1.0 + e(g1));
        let flip = ((e(-g1) + e(-g2)) / (1.0 + e(-g2 - g1))).acos();
        (y, z, flip)
    }

    #[test]
    fn ernst_reference_values() {
        let sol = ernst_solution(&b_pair());
        assert!((sol.m.y - 0.689_273_980_424_658_9).abs() < 1e-14);
        assert!((sol.m.z - 0.268_941_421_369_995_1).abs() < 1e-15);
        assert!((sol.flip - 1.044_176_153_403_274).abs() < 1e-13);
        assert_eq!(sol.q, sol.m.y);
        let (y, z, flip) = closed_form(1.8, 1.0);
        assert!((sol.m.y - y).abs() < 1e-14 && (sol.m.z - z).abs() < 1e-15 && (sol.flip - flip).abs() < 1e-13);
    }

    #[test]
    fn ernst_polar_consistency() {
        let sol = ernst_solution(&b_pair());
        assert!((sol.s.angle() - 1.416_189_083_332_950_7).abs() < 1e-12);
        assert!((sol.m.angle() - 0.372_012_929_929_676_55).abs() < 1e-12);
        assert!((sol.s.angle() - sol.m.angle() - sol.flip).abs() < 1e-12);
    }

    #[test]
    fn ernst_symmetric_rates() {
        for g in [0.3, 1.0, 2.2] {
            let sol = ernst_solution(&RelaxationPair::new(g, g).unwrap());
            let e = g.exp();
            assert!((sol.m.y - e / (1.0 + e)).abs() < 1e-13);
            let flip = (2.0 * (-g).exp() / (1.0 + (-2.0 * g).exp())).acos();
            assert!((sol.flip - flip).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipsoid_search_matches_closed_form() {
        for (g2, g1) in [(1.8, 1.0), (1.9, 0.5), (1.69, 1.5), (0.6, 1.0), (4.0, 0.2)] {
            let p = RelaxationPair::new(g2, g1).unwrap();
            let num = maximize_on_ellipsoid(&p).unwrap();
            let exact = ernst_solution(&p);
            assert!((num.m.z - exact.m.z).abs() < 1e-9, "{g2},{g1}: {} vs {}", num.m.z, exact.m.z);
            assert!((num.m.y - exact.m.y).abs() < 1e-9);
        }
    }

    #[test]
    fn ellipsoid_maximizer_is_stationary() {
        let p = b_pair();
        let sol = maximize_on_ellipsoid(&p).unwrap();
        let h = 1e-4;
        let dy = (ernst_ellipsoid_y(sol.m.z + h, &p).unwrap() - ernst_ellipsoid_y(sol.m.z - h, &p).unwrap()) / (2.0 * h);
        assert!(dy.abs() <= 1e-6, "{dy}");
    }

    #[test]
    fn global_max_rejects_coarse_grid() {
        assert!(maximize_q_global(&b_pair(), 32).is_err());
    }

    #[test]
    fn q_max_surface_mask_and_values() {
        let d = q_max_surface((0.5, 1.5), (0.2, 2.0), 3, 10).unwrap();
        assert_eq!(d.cells.len(), 30);
        for c in &d.cells {
            assert_eq!(c.physical, 2.0 * c.big_gamma >= c.gamma);
            assert_eq!(c.q_ernst.is_some(), c.physical);
        }
        let cell = d
            .cells
            .iter()
            .find(|c| c.gamma == 1.0 && (c.big_gamma - 1.8).abs() < 1e-12)
            .unwrap();
        assert!((cell.q_ernst.unwrap() - 0.689_273_980_424_658_9).abs() < 1e-13);
        assert_eq!(cell.regime, SynthesisRegime::B);
        assert!(d.boundary_ab.iter().zip(&d.boundary_bc).all(|(a, b)| a.1 >= b.1));
    }

    #[test]
    fn q_max_surface_monotone_in_big_gamma() {
        let d = q_max_surface((0.1, 3.0), (0.1, 6.0), 12, 60).unwrap();
        for row in d.cells.chunks(d.n_big_gamma) {
            let qs: Vec<f64> = row.iter().filter_map(|c| c.q_ernst).collect();
            assert!(qs.windows(2).all(|w| w[1] < w[0]), "{qs:?}");
        }
    }
}
