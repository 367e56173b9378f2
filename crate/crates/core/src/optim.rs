//! Small derivative-free scalar and 2-D optimizers.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarOptimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> ScalarOptimum {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a) > tol && iterations < 500 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    ScalarOptimum { x, value, iterations }
}

/// Root of `f` on a sign-changing bracket `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Numerical(format!(
            "bisection bracket [{a}, {b}] does not change sign ({flo}, {fhi})"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptimum {
    pub x: [f64; 2],
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder–Mead minimization in two dimensions.
///
/// Restarts from the incumbent with a fresh simplex whenever it collapses,
/// until a restart no longer improves the value; this keeps the search
/// moving along ridges where the objective is not differentiable.
pub fn nelder_mead_min<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    initial_step: f64,
    x_tol: f64,
    max_evaluations: usize,
) -> SimplexOptimum {
    let mut best = start;
    let mut best_value = f(start);
    let mut evaluations = 1;
    let mut step = initial_step;
    loop {
        let (x, value, used) = nelder_mead_pass(&f, best, step, x_tol, max_evaluations.saturating_sub(evaluations));
        evaluations += used;
        let improved = value < best_value;
        let moved = ((x[0] - best[0]).powi(2) + (x[1] - best[1]).powi(2)).sqrt();
        if improved {
            best = x;
            best_value = value;
        }
        if evaluations >= max_evaluations {
            break;
        }
        if !improved || moved <= x_tol {
            if step <= 10.0 * x_tol {
                break;
            }
            step *= 0.1;
        }
    }
    SimplexOptimum { x: best, value: best_value, evaluations }
}

fn nelder_mead_pass<F: Fn([f64; 2]) -> f64>(
    f: &F,
    start: [f64; 2],
    step: f64,
    x_tol: f64,
    budget: usize,
) -> ([f64; 2], f64, usize) {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let mut pts = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut vals = [f(pts[0]), f(pts[1]), f(pts[2])];
    let mut used = 3;
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    while used < budget {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = [pts[idx[0]], pts[idx[1]], pts[idx[2]]];
        vals = [vals[idx[0]], vals[idx[1]], vals[idx[2]]];

        let size = (1..3)
            .map(|i| ((pts[i][0] - pts[0][0]).powi(2) + (pts[i][1] - pts[0][1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        if size <= x_tol {
            break;
        }

        let centroid = lerp(pts[0], pts[1], 0.5);
        let reflected = lerp(centroid, pts[2], -ALPHA);
        let fr = f(reflected);
        used += 1;
        if fr < vals[0] {
            let expanded = lerp(centroid, pts[2], -GAMMA);
            let fe = f(expanded);
            used += 1;
            if fe < fr {
                pts[2] = expanded;
                vals[2] = fe;
            } else {
                pts[2] = reflected;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = reflected;
            vals[2] = fr;
        } else {
            let (contracted, fc) = if fr < vals[2] {
                let c = lerp(centroid, reflected, RHO);
                (c, f(c))
            } else {
                let c = lerp(centroid, pts[2], RHO);
                (c, f(c))
            };
            used += 1;
            if fc < vals[2].min(fr) {
                pts[2] = contracted;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    pts[i] = lerp(pts[0], pts[i], SIGMA);
                    vals[i] = f(pts[i]);
                }
                used += 2;
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    (pts[best], vals[best], used)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let opt = golden_section_max(|x| -(x - 0.3).powi(2), -1.0, 2.0, 1e-12);
        assert!((opt.x - 0.3).abs() < 1e-7);
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: [f64; 2]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opt = nelder_mead_min(f, [-1.2, 1.0], 0.1, 1e-12, 20_000);
        assert!((opt.x[0] - 1.0).abs() < 1e-6, "{opt:?}");
        assert!((opt.x[1] - 1.0).abs() < 1e-6, "{opt:?}");
    }

    #[test]
    fn nelder_mead_kinked_ridge() {
        // Non-differentiable along a diagonal ridge, like the Q surface.
        let f = |x: [f64; 2]| 3.0 * (x[0] - x[1]).abs() + 0.5 * (x[0] + x[1] - 0.4).powi(2);
        let opt = nelder_mead_min(f, [0.9, -0.3], 0.05, 1e-12, 50_000);
        assert!((opt.x[0] - 0.2).abs() < 1e-6, "{opt:?}");
        assert!((opt.x[1] - 0.2).abs() < 1e-6, "{opt:?}");
    }
}
