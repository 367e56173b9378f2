mod common;

use common::*;
use proptest::prelude::*;
use spin_snr_core::qsurface::optimal_trajectory;
use spin_snr_core::{control_time, magic_plane, q_value, time_magic, time_vertical, BlochState};

proptest! {
    #![proptest_config(seeded(5000))]

    #[test]
    fn vertical_time_is_additive(p in admissible_pair(), a in -0.999f64..0.999, b in -0.999f64..0.999, c in -0.999f64..0.999) {
        let mut z = [a, b, c];
        z.sort_by(f64::total_cmp);
        let whole = time_vertical(z[0], z[2], &p).unwrap();
        let parts = time_vertical(z[0], z[1], &p).unwrap() + time_vertical(z[1], z[2], &p).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole));
    }

    #[test]
    fn magic_time_is_additive(p in magic_pair(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let z0 = magic_plane(&p).z0.unwrap();
        let y_max = (1.0 - z0 * z0).sqrt();
        let mut y = [a * y_max, b * y_max, c * y_max];
        y.sort_by(|u, v| v.total_cmp(u));
        let whole = time_magic(y[0], y[2], &p).unwrap();
        let parts = time_magic(y[0], y[1], &p).unwrap() + time_magic(y[1], y[2], &p).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole));
    }

    #[test]
    fn magic_arc_time_matches_printed_radius_form(p in magic_pair(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        // Any r_s > r_m ≥ |z₀| is a magic-plane-only transfer.
        let (g2, g1) = (p.gamma_t2(), p.gamma_t1());
        let z0 = magic_plane(&p).z0.unwrap();
        let rho = z0.abs();
        let (r_s, r_m) = (rho + (1.0 - rho) * a.max(b), rho + (1.0 - rho) * a.min(b));
        let t = time_magic((r_s * r_s - z0 * z0).sqrt(), (r_m * r_m - z0 * z0).sqrt(), &p).unwrap();
        let k = 4.0 * g2 * (g2 - g1);
        let printed = ((k * r_s * r_s + g1 * g1) / (k * r_m * r_m + g1 * g1)).ln() / (2.0 * g2);
        prop_assert!((t - printed).abs() <= 1e-12 * (1.0 + t), "{t} vs {printed}");
    }

    #[test]
    fn q_is_in_unit_interval(p in admissible_pair(), m in half_disk_point(0.999)) {
        let s = q_value(m, &p).unwrap();
        prop_assert!(s.t_control >= 0.0);
        prop_assert!(s.q >= 0.0 && s.q < 1.0);
        prop_assert!(s.q <= m.y);
    }
}

proptest! {
    #![proptest_config(seeded(1000))]

    #[test]
    fn degenerate_legs_vanish(p in magic_pair()) {
        let rho = magic_plane(&p).radius().unwrap();
        prop_assert_eq!(time_magic(0.0, 0.0, &p).unwrap(), 0.0);
        let z0 = magic_plane(&p).z0.unwrap();
        prop_assert_eq!(time_vertical(z0, -rho, &p).unwrap(), 0.0);
    }

    #[test]
    fn control_time_continuous_at_magic_circles(p in magic_pair(), theta in -1.5f64..1.5, on_m in prop::bool::ANY) {
        // Straddle r_m = |z₀| or r_s = |z₀|. A jump would show as a step
        // across the curve much larger than the steps on either side.
        let rho = magic_plane(&p).radius().unwrap();
        let eps = 1e-8;
        let point = |dr: f64| {
            let on_curve = BlochState::from_polar(rho + dr, theta);
            if on_m { Some(on_curve) } else { p.relax_inverse(on_curve, 1.0).ok() }
        };
        let pts: Option<Vec<BlochState>> = [-3.0, -1.0, 1.0, 3.0].iter().map(|k| point(k * eps)).collect();
        let Some(pts) = pts else { return Ok(()) };
        prop_assume!(pts.iter().all(|m| m.norm_sq() < 0.999 && m.y > 0.0));
        let t: Vec<f64> = pts.iter().map(|&m| control_time(m, &p).unwrap().1).collect();
        let across = (t[2] - t[1]).abs();
        let sides = (t[1] - t[0]).abs() + (t[3] - t[2]).abs();
        prop_assert!(across <= sides + 1e-10 * (1.0 + t[1]), "{t:?}");
    }

    #[test]
    fn trajectory_segments_chain(p in admissible_pair(), m in half_disk_point(0.999)) {
        let traj = optimal_trajectory(m, &p).unwrap();
        let (structure, t) = control_time(m, &p).unwrap();
        prop_assert_eq!(traj.structure, structure);
        prop_assert!((traj.control_time() - t).abs() <= 1e-12 * (1.0 + t));
        for w in traj.segments.windows(2) {
            prop_assert!(w[0].endpoints().1.distance(w[1].endpoints().0) <= 1e-12);
        }
        let first = traj.segments.first().unwrap().endpoints().0;
        let last = traj.segments.last().unwrap().endpoints().1;
        prop_assert!(first.distance(traj.s) <= 1e-12 && last.distance(traj.s) <= 1e-12);
    }
}
