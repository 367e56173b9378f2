use std::io::Write;

use serde::Serialize;
use spin_snr_core::qsurface::{optimal_trajectory, Segment};
use spin_snr_core::synthesis::{boundary_curves, cycle_radii, BoundaryCurves, MagicPlane};
use spin_snr_core::verify::{run_verification, VerifyConfig, VerifyReport};
use spin_snr_core::{
    ernst_solution, magic_plane, q_grid, q_max_surface, q_value, regime, BlochState, RelaxationPair, SynthesisRegime,
};

use crate::output::{io_err, num, open_sink, opt_num, sidecar_path, write_csv, write_json, write_json_file};
use crate::{CliError, Format, OutArgs, PointArgs};

const CURVE_SAMPLES: usize = 400;

#[derive(Serialize)]
struct ErnstReport {
    params: RelaxationPair,
    regime: SynthesisRegime,
    m: BlochState,
    s: BlochState,
    flip_rad: f64,
    flip_deg: f64,
    q: f64,
}

pub fn ernst(p: &RelaxationPair, out: &OutArgs) -> Result<(), CliError> {
    let sol = ernst_solution(p);
    let report = ErnstReport {
        params: *p,
        regime: regime(p),
        m: sol.m,
        s: sol.s,
        flip_rad: sol.flip,
        flip_deg: sol.flip.to_degrees(),
        q: sol.q,
    };
    let mut sink = open_sink(out.out.as_deref())?;
    match out.format {
        Some(Format::Json) => write_json(sink.as_mut(), &report),
        Some(Format::Csv) => write_csv(
            sink.as_mut(),
            "ernst",
            Some(p),
            &["y_m", "z_m", "y_s", "z_s", "flip_rad", "flip_deg", "q", "regime"],
            [vec![
                num(sol.m.y),
                num(sol.m.z),
                num(sol.s.y),
                num(sol.s.z),
                num(sol.flip),
                num(report.flip_deg),
                num(sol.q),
                report.regime.to_string(),
            ]],
        ),
        None => {
            let text = format!(
                "Gamma = {}, gamma = {} (regime {})\n\
                 M = ({:.9}, {:.9})\n\
                 S = ({:.9}, {:.9})\n\
                 flip = {:.9} rad ({:.6} deg)\n\
                 Q = {:.9}\n",
                p.gamma_t2(),
                p.gamma_t1(),
                report.regime,
                sol.m.y,
                sol.m.z,
                sol.s.y,
                sol.s.z,
                sol.flip,
                report.flip_deg,
                sol.q
            );
            sink.write_all(text.as_bytes()).map_err(io_err)?;
            sink.flush().map_err(io_err)
        }
    }
}

#[derive(Serialize)]
struct SurfaceMeta {
    params: RelaxationPair,
    regime: SynthesisRegime,
    magic_plane: MagicPlane,
    grid_ny: usize,
    grid_nz: usize,
    ernst_point: BlochState,
    boundary_curves: BoundaryCurves,
}

pub fn qsurface(p: &RelaxationPair, n_y: usize, n_z: usize, out: &OutArgs) -> Result<(), CliError> {
    if n_y < 2 || n_z < 2 {
        return Err(CliError::Input(format!("grid resolution must be at least 2, got {n_y} x {n_z}")));
    }
    let grid = q_grid(p, n_y, n_z)?;
    let meta = SurfaceMeta {
        params: *p,
        regime: regime(p),
        magic_plane: magic_plane(p),
        grid_ny: n_y,
        grid_nz: n_z,
        ernst_point: ernst_solution(p).m,
        boundary_curves: boundary_curves(p, CURVE_SAMPLES)?,
    };
    if out.format == Some(Format::Json) {
        #[derive(Serialize)]
        struct Full<'a> {
            #[serde(flatten)]
            meta: &'a SurfaceMeta,
            samples: &'a [spin_snr_core::QSample],
        }
        let mut sink = open_sink(out.out.as_deref())?;
        return write_json(sink.as_mut(), &Full { meta: &meta, samples: &grid.samples });
    }
    let mut sink = open_sink(out.out.as_deref())?;
    write_csv(
        sink.as_mut(),
        "qsurface",
        Some(p),
        &["y", "z", "structure", "t_control", "q"],
        grid.samples
            .iter()
            .map(|s| vec![num(s.m.y), num(s.m.z), s.structure.label().to_string(), num(s.t_control), num(s.q)]),
    )?;
    if let Some(path) = &out.out {
        write_json_file(&sidecar_path(path), &meta)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassifyReport {
    params: RelaxationPair,
    m: BlochState,
    s: BlochState,
    structure: String,
    r_m: f64,
    r_s: f64,
    z0: Option<f64>,
    magic_plane_present: bool,
    t_control: f64,
    q: f64,
    segments: Vec<Segment>,
}

fn point_of(point: &PointArgs) -> BlochState {
    BlochState::new(point.point[0], point.point[1])
}

fn classify_report(p: &RelaxationPair, m: BlochState) -> Result<ClassifyReport, CliError> {
    let sample = q_value(m, p)?;
    let traj = optimal_trajectory(m, p)?;
    let radii = cycle_radii(m, p);
    let plane = magic_plane(p);
    Ok(ClassifyReport {
        params: *p,
        m,
        s: traj.s,
        structure: sample.structure.label().to_string(),
        r_m: radii.r_m,
        r_s: radii.r_s,
        z0: plane.z0,
        magic_plane_present: plane.present,
        t_control: sample.t_control,
        q: sample.q,
        segments: traj.segments,
    })
}

pub fn classify(p: &RelaxationPair, point: &PointArgs, out: &OutArgs) -> Result<(), CliError> {
    let r = classify_report(p, point_of(point))?;
    let mut sink = open_sink(out.out.as_deref())?;
    match out.format {
        Some(Format::Json) => write_json(sink.as_mut(), &r),
        Some(Format::Csv) => write_csv(
            sink.as_mut(),
            "classify",
            Some(p),
            &["y", "z", "structure", "r_m", "r_s", "z0", "t_control", "q"],
            [vec![num(r.m.y), num(r.m.z), r.structure.clone(), num(r.r_m), num(r.r_s), opt_num(r.z0), num(r.t_control), num(r.q)]],
        ),
        None => {
            let mut text = format!(
                "M = ({}, {})  S = ({:.9}, {:.9})\n\
                 structure = {}\n\
                 r_m = {:.9}, r_s = {:.9}, z0 = {}\n\
                 T_c = {:.9}, Q = {:.9}\n\
                 segments:\n",
                r.m.y,
                r.m.z,
                r.s.y,
                r.s.z,
                r.structure,
                r.r_m,
                r.r_s,
                r.z0.map(|z| format!("{z:.9}")).unwrap_or_else(|| "none".into()),
                r.t_control,
                r.q
            );
            for seg in &r.segments {
                let (a, b) = seg.endpoints();
                text.push_str(&format!(
                    "  {:<9} ({:.6}, {:.6}) -> ({:.6}, {:.6})  t = {:.9}\n",
                    seg.kind(),
                    a.y,
                    a.z,
                    b.y,
                    b.z,
                    seg.duration()
                ));
            }
            sink.write_all(text.as_bytes()).map_err(io_err)?;
            sink.flush().map_err(io_err)
        }
    }
}

pub fn trajectory(p: &RelaxationPair, point: &PointArgs, samples: usize, out: &OutArgs) -> Result<(), CliError> {
    if samples < 2 {
        return Err(CliError::Input(format!("need at least 2 points per segment, got {samples}")));
    }
    let m = point_of(point);
    let traj = optimal_trajectory(m, p)?;
    let poly = traj.polyline(p, samples);
    let mut sink = open_sink(out.out.as_deref())?;
    if out.format == Some(Format::Json) {
        #[derive(Serialize)]
        struct Poly<'a> {
            report: ClassifyReport,
            polyline: Vec<(usize, &'a str, BlochState)>,
        }
        let polyline = poly.iter().map(|&(i, s)| (i, traj.segments[i].kind(), s)).collect();
        return write_json(sink.as_mut(), &Poly { report: classify_report(p, m)?, polyline });
    }
    write_csv(
        sink.as_mut(),
        &format!("trajectory {}", traj.structure.label()),
        Some(p),
        &["segment", "kind", "y", "z"],
        poly.iter().map(|&(i, s)| vec![i.to_string(), traj.segments[i].kind().to_string(), num(s.y), num(s.z)]),
    )
}

#[derive(Serialize)]
struct PhaseMeta<'a> {
    gamma_range: (f64, f64),
    #[serde(rename = "Gamma_range")]
    big_gamma_range: (f64, f64),
    n_gamma: usize,
    #[serde(rename = "n_Gamma")]
    n_big_gamma: usize,
    boundary_ab: &'a [(f64, f64)],
    boundary_bc: &'a [(f64, f64)],
    physical_limit: &'a [(f64, f64)],
}

pub fn phase_diagram(
    gamma_range: (f64, f64),
    big_gamma_range: (f64, f64),
    n_gamma: usize,
    n_big_gamma: usize,
    out: &OutArgs,
) -> Result<(), CliError> {
    let pd = q_max_surface(gamma_range, big_gamma_range, n_gamma, n_big_gamma)?;
    let meta = PhaseMeta {
        gamma_range,
        big_gamma_range,
        n_gamma,
        n_big_gamma,
        boundary_ab: &pd.boundary_ab,
        boundary_bc: &pd.boundary_bc,
        physical_limit: &pd.physical_limit,
    };
    let mut sink = open_sink(out.out.as_deref())?;
    if out.format == Some(Format::Json) {
        return write_json(sink.as_mut(), &pd);
    }
    write_csv(
        sink.as_mut(),
        "phase-diagram",
        None,
        &["gamma", "Gamma", "q_ernst", "regime", "physical"],
        pd.cells.iter().map(|c| {
            vec![num(c.gamma), num(c.big_gamma), opt_num(c.q_ernst), c.regime.to_string(), c.physical.to_string()]
        }),
    )?;
    if let Some(path) = &out.out {
        write_json_file(&sidecar_path(path), &meta)?;
    }
    Ok(())
}

pub fn verify(p: &RelaxationPair, seed: u64, q_perturb: f64, out: &OutArgs) -> Result<(), CliError> {
    if out.format == Some(Format::Csv) {
        return Err(CliError::Input("verify reports are JSON only".into()));
    }
    let cfg = VerifyConfig { q_offset: q_perturb, ..VerifyConfig::new(*p, seed) };
    let report: VerifyReport = run_verification(&cfg);
    let mut sink = open_sink(out.out.as_deref())?;
    write_json(sink.as_mut(), &report)?;
    for c in &report.checks {
        eprintln!(
            "{} {:<26} measured {:.3e}  tolerance {:.0e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance
        );
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<String> = report.failures().map(|c| c.name.clone()).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}
