//! Experiment setups, output files and run summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bendflow::fem::{DktField, MetricKind, P1Field};
use bendflow::flow::{run_flow, FlowModel, FlowParams, FlowTrace};
use bendflow::fvk::{compression_setup, sign_changes, FvkFlow, FvkParams, FvkState};
use bendflow::harmonic_map::{HarmonicMapFlow, HmParams};
use bendflow::kkt::{SolverOptions, Strategy};
use bendflow::mesh::{rect_tri_mesh, write_vtk, Mesh1D, TriMesh, VtkCells, VtkField, VtkGeometry};
use bendflow::plate::{flat_plate, isometry_defects, Bilayer, PlateFlow, PlateParams};
use bendflow::rod::{RodBc, RodEnd, RodFlow, RodParams, RodState};
use bendflow::scenarios;
use bendflow::tangent_point::{min_nonneighbor_distance, KnotFlow, KnotParams, TpParams};
use bendflow::Exec;

use crate::config::{Config, ConfigError, Experiment};

/// Settings shared by all experiments.
struct Common {
    output: PathBuf,
    snapshot_every: usize,
    trace_every: usize,
    max_steps: usize,
    solver: SolverOptions,
    exec: Exec,
}

/// Files written by a run plus the summary text.
pub struct RunReport {
    pub output: PathBuf,
    pub summary: String,
    pub converged: bool,
}

fn common(cfg: &Config, exec: Exec) -> Result<Common, ConfigError> {
    let output: String = cfg.or("output", format!("out/{}", cfg.experiment.name()))?;
    let strategy: String = cfg.or("solver", "reduced_direct".to_string())?;
    let strategy: Strategy = strategy.parse().map_err(|e: bendflow::Error| cfg.invalid("solver", e.to_string()))?;
    let mut solver = SolverOptions::with_strategy(strategy);
    solver.tol = cfg.positive("solver_tol", solver.tol)?;
    Ok(Common {
        output: PathBuf::from(output),
        snapshot_every: cfg.or("snapshot_every", 0)?,
        trace_every: cfg.or("trace_every", 1)?,
        max_steps: cfg.or("max_steps", 100_000)?,
        solver,
        exec,
    })
}

fn metric(cfg: &Config, key: &str, default: MetricKind) -> Result<MetricKind, ConfigError> {
    let s: Option<String> = cfg.get(key)?;
    match s {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: bendflow::Error| cfg.invalid(key, e.to_string())),
    }
}

fn flow_params(cfg: &Config, c: &Common, tau: f64, eps_stop: f64) -> Result<FlowParams, ConfigError> {
    let mut p = FlowParams::new(cfg.positive("tau", tau)?, cfg.positive("eps_stop", eps_stop)?).max_steps(c.max_steps);
    p.trace_every = c.trace_every.max(1);
    Ok(p)
}

/// Runs the flow, writing snapshots `snapshot_XXXXXX.vtk` of the initial,
/// every `snapshot_every`-th and the final state.
fn drive<M, W>(model: &mut M, s0: M::State, params: &FlowParams, c: &Common, snap: W) -> Result<(M::State, FlowTrace)>
where
    M: FlowModel,
    W: Fn(&Path, &M::State) -> bendflow::Result<()>,
{
    let dir = c.output.clone();
    let mut failure = None;
    let (state, trace) = run_flow(model, s0, params, |k, s, _| {
        if failure.is_none() && (k == 0 || (c.snapshot_every > 0 && k % c.snapshot_every == 0)) {
            if let Err(e) = snap(&dir.join(format!("snapshot_{k:06}.vtk")), s) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e).context("writing snapshot");
    }
    snap(&c.output.join(format!("snapshot_{:06}.vtk", trace.steps)), &state).context("writing final snapshot")?;
    Ok((state, trace))
}

fn summary_header(exp: Experiment, trace: &FlowTrace) -> String {
    let mut s = String::new();
    let e0 = trace.initial().map(|r| r.energy).unwrap_or_default();
    let el = trace.last().map(|r| r.energy).unwrap_or_default();
    writeln!(s, "experiment = {}", exp.name()).unwrap();
    writeln!(s, "steps = {}", trace.steps).unwrap();
    writeln!(s, "converged = {}", trace.converged).unwrap();
    writeln!(s, "energy_initial = {:.12e}", e0.total()).unwrap();
    writeln!(s, "energy_final = {:.12e}", el.total()).unwrap();
    for (name, v) in [("bend", el.bend), ("twist", el.twist), ("penalty", el.penalty), ("tp", el.tp), ("membrane", el.membrane), ("other", el.other)] {
        if v != 0.0 {
            writeln!(s, "energy_final_{name} = {v:.12e}").unwrap();
        }
    }
    writeln!(s, "dissipation = {:.12e}", trace.dissipation).unwrap();
    writeln!(s, "max_violation_l1 = {:.6e}", trace.max_violation.l1).unwrap();
    writeln!(s, "max_violation_linf = {:.6e}", trace.max_violation.linf).unwrap();
    writeln!(s, "solver_iterations_total = {}", trace.total_solver_iters).unwrap();
    writeln!(s, "solver_iterations_average = {:.4}", trace.average_solver_iters()).unwrap();
    s
}

fn to3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

pub fn run(cfg: &Config, exec: Exec) -> Result<RunReport> {
    let c = common(cfg, exec)?;
    let (trace, extra) = match cfg.experiment {
        Experiment::RodTwist => rod_twist(cfg, &c)?,
        Experiment::Knot => knot(cfg, &c)?,
        Experiment::Moebius | Experiment::Bilayer => plate(cfg, &c)?,
        Experiment::HarmonicMap => harmonic_map(cfg, &c)?,
        Experiment::Fvk => fvk(cfg, &c)?,
    };
    let mut summary = summary_header(cfg.experiment, &trace);
    summary.push_str(&extra);
    fs::write(c.output.join("summary.txt"), &summary)?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    fs::write(c.output.join("trace.csv"), csv)?;
    Ok(RunReport { output: c.output, summary, converged: trace.converged })
}

/// Creates the output directory once the configuration is fully validated.
fn prepare(cfg: &Config, c: &Common) -> Result<()> {
    cfg.finish()?;
    fs::create_dir_all(&c.output).with_context(|| format!("creating {}", c.output.display()))?;
    Ok(())
}

fn rod_end(cfg: &Config, key: &str) -> Result<RodEnd, ConfigError> {
    let s: String = cfg.or(key, "clamped".to_string())?;
    match s.as_str() {
        "clamped" => Ok(RodEnd::Clamped),
        "free" => Ok(RodEnd::Free),
        _ => Err(cfg.invalid(key, format!("'{key}' must be 'clamped' or 'free'"))),
    }
}

fn rod_twist(cfg: &Config, c: &Common) -> Result<(FlowTrace, String)> {
    let n: usize = cfg.or("n", 1006)?;
    let length = cfg.positive("length", 10.0)?;
    let h = length / n as f64;
    let loops = cfg.positive("loops", 2.0)?;
    let turns: f64 = cfg.or("turns", 2.0)?;
    let mut p = RodParams::new(cfg.positive("c_b", 2.0)?, cfg.positive("c_t", 1.0)?, cfg.positive("eps", h)?);
    p.metric_y = metric(cfg, "metric", MetricKind::H2)?;
    p.metric_b = metric(cfg, "metric_director", MetricKind::H1)?;
    p.metric_mass = cfg.or("metric_mass", 0.0)?;
    p.solver = c.solver.clone();
    p.exec = c.exec;
    let bc = RodBc { left: rod_end(cfg, "left_end")?, right: rod_end(cfg, "right_end")? };
    let fp = flow_params(cfg, c, h, 1e-3)?;
    prepare(cfg, c)?;
    let mesh = Mesh1D::uniform(length, n, false)?;
    let s0 = scenarios::twisted_loop(&mesh, loops, turns)?;
    let mut flow = RodFlow::new(mesh, p, bc)?;
    let snap = |path: &Path, s: &RodState| {
        let pts: Vec<[f64; 3]> = (0..s.y.n_nodes()).map(|i| to3(s.y.value(i))).collect();
        let b: Vec<[f64; 3]> = (0..s.b.n_nodes()).map(|i| to3(s.b.at(i))).collect();
        let t: Vec<[f64; 3]> = (0..s.y.n_nodes()).map(|i| to3(s.y.deriv(i))).collect();
        write_vtk(path, &VtkGeometry { points: pts, cells: VtkCells::Polyline { closed: false } }, &[VtkField::Vectors("director".into(), b), VtkField::Vectors("tangent".into(), t)], "rod")
    };
    let (s, trace) = drive(&mut flow, s0, &fp, c, snap)?;
    let e = flow.energy_components(&s);
    let mut extra = String::new();
    writeln!(extra, "torsion_final = {:.12e}", e.torsion())?;
    writeln!(extra, "length = {length}\nelements = {n}")?;
    Ok((trace, extra))
}

fn knot(cfg: &Config, c: &Common) -> Result<(FlowTrace, String)> {
    let tp = TpParams { q: cfg.or("q", 3.9)?, rho: cfg.or("rho", 1e-3)?, quad_points: cfg.or("quad_points", 3)? };
    let params = KnotParams {
        c_b: cfg.positive("c_b", 10.0)?,
        tp,
        metric: metric(cfg, "metric", MetricKind::H2)?,
        metric_mass: cfg.or("metric_mass", 1.0)?,
        solver: c.solver.clone(),
        exec: c.exec,
    };
    let curve_file: Option<String> = cfg.get("curve_file")?;
    let points = match curve_file {
        Some(f) => {
            let text = fs::read_to_string(&f).with_context(|| format!("reading curve file {f}"))?;
            scenarios::parse_polyline(&text).with_context(|| format!("parsing curve file {f}"))?
        }
        None => scenarios::torus_knot(
            cfg.or("knot_p", 2)?,
            cfg.or("knot_q", 3)?,
            cfg.or("n", 150)?,
            cfg.positive("radius_major", 2.0)?,
            cfg.positive("radius_minor", 1.0)?,
        ),
    };
    let (mesh, y0) = scenarios::closed_curve_from_points(&points)?;
    let h = mesh.h_max();
    let fp = flow_params(cfg, c, 0.1 * h, 1e-4)?;
    prepare(cfg, c)?;
    let d0 = min_nonneighbor_distance(&mesh, &y0, 3);
    let l0 = y0.arc_length(&mesh, 4);
    let mut flow = KnotFlow::new(mesh.clone(), params)?;
    let snap = |path: &Path, y: &bendflow::fem::HermiteField| {
        let pts: Vec<[f64; 3]> = (0..y.n_nodes()).map(|i| to3(y.value(i))).collect();
        let t: Vec<[f64; 3]> = (0..y.n_nodes()).map(|i| to3(y.deriv(i))).collect();
        write_vtk(path, &VtkGeometry { points: pts, cells: VtkCells::Polyline { closed: true } }, &[VtkField::Vectors("tangent".into(), t)], "knot")
    };
    let (y, trace) = drive(&mut flow, y0, &fp, c, snap)?;
    let mut extra = String::new();
    writeln!(extra, "length_initial = {l0:.12e}\nlength_final = {:.12e}", y.arc_length(&mesh, 4))?;
    writeln!(extra, "min_distance_initial = {d0:.6e}\nmin_distance_final = {:.6e}", min_nonneighbor_distance(&mesh, &y, 3))?;
    Ok((trace, extra))
}

fn plate(cfg: &Config, c: &Common) -> Result<(FlowTrace, String)> {
    let bilayer = cfg.experiment == Experiment::Bilayer;
    let length = cfg.positive("length", 10.0)?;
    let width = cfg.positive("width", if bilayer { 4.0 } else { 1.0 })?;
    let nx: usize = cfg.or("nx", if bilayer { 20 } else { 40 })?;
    let ny: usize = cfg.or("ny", ((nx as f64 * width / length).round() as usize).max(1))?;
    let mut params = PlateParams {
        c_b: cfg.positive("c_b", 1.0)?,
        metric: metric(cfg, "metric", MetricKind::H2)?,
        metric_mass: cfg.or("metric_mass", 0.0)?,
        solver: c.solver.clone(),
        exec: c.exec,
        ..Default::default()
    };
    let mesh = rect_tri_mesh(length, width, nx, ny)?;
    let h = mesh.h_max();
    let fp = if bilayer {
        params.bilayer = Some(Bilayer { alpha: cfg.or("alpha", -1.0)?, c_sc: cfg.or("c_sc", 1.0)? });
        flow_params(cfg, c, h / 20.0, 1e-3)?
    } else {
        params.load = [cfg.or("load_x", 0.0)?, cfg.or("load_y", 0.0)?, cfg.or("load_z", -1e-3)?];
        flow_params(cfg, c, 0.01, 5e-3)?
    };
    prepare(cfg, c)?;
    let (y0, bc) = if bilayer {
        (flat_plate(&mesh), scenarios::strip_left_end(&mesh))
    } else {
        (scenarios::moebius_initial(&mesh, length, width), scenarios::strip_ends(&mesh, length))
    };
    let mut flow = PlateFlow::new(mesh.clone(), params, &bc)?;
    let tris = mesh.triangles().to_vec();
    let snap = |path: &Path, y: &DktField| {
        let pts: Vec<[f64; 3]> = (0..y.n_nodes()).map(|i| to3(&y.nodal_value(i))).collect();
        let defect: Vec<f64> = isometry_defects(y).iter().map(|d| (d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2]).sqrt()).collect();
        write_vtk(path, &VtkGeometry { points: pts, cells: VtkCells::Triangles(tris.clone()) }, &[VtkField::Scalars("isometry_defect".into(), defect)], "plate")
    };
    let (y, trace) = drive(&mut flow, y0, &fp, c, snap)?;
    let mut extra = String::new();
    writeln!(extra, "triangles = {}", mesh.n_triangles())?;
    if bilayer {
        let away = |p: [f64; 2]| p[0] > 1.0;
        let (pts, nrm) = scenarios::surface_samples(&mesh, &y, away);
        let fit = scenarios::fit_cylinder(&pts, &nrm)?;
        let hm = flow.mean_curvature(&y)?;
        let mut hs: Vec<f64> = (0..mesh.n_vertices()).filter(|&v| away(mesh.vertices()[v])).map(|v| hm[v]).collect();
        hs.sort_by(f64::total_cmp);
        writeln!(extra, "cylinder_radius = {:.6e}\ncylinder_rms = {:.6e}", fit.radius, fit.rms)?;
        writeln!(extra, "cylinder_axis = {:.4} {:.4} {:.4}", fit.axis[0], fit.axis[1], fit.axis[2])?;
        writeln!(extra, "mean_curvature_median = {:.6e}", hs[hs.len() / 2])?;
    }
    Ok((trace, extra))
}

fn harmonic_map(cfg: &Config, c: &Common) -> Result<(FlowTrace, String)> {
    let level: u32 = cfg.or("level", 3)?;
    let seed: u64 = cfg.or("seed", 0)?;
    let params = HmParams { comps: 3, metric: metric(cfg, "metric", MetricKind::H1)?, solver: c.solver.clone(), exec: c.exec };
    let h = 0.5f64.powi(level as i32);
    let fp = flow_params(cfg, c, h, h / 10.0)?;
    prepare(cfg, c)?;
    let (mesh, u0) = scenarios::cube_harmonic_map(level, seed)?;
    let mut flow = HarmonicMapFlow::on_tets(&mesh, params)?;
    let tets = mesh.tets().to_vec();
    let pts = mesh.vertices().to_vec();
    let snap = |path: &Path, u: &P1Field| {
        let v: Vec<[f64; 3]> = (0..u.n_nodes()).map(|i| to3(u.at(i))).collect();
        write_vtk(path, &VtkGeometry { points: pts.clone(), cells: VtkCells::Tetrahedra(tets.clone()) }, &[VtkField::Vectors("u".into(), v)], "harmonic map")
    };
    let (_, mut trace) = drive(&mut flow, u0, &fp, c, snap)?;
    trace.seed = Some(seed);
    let mut extra = String::new();
    writeln!(extra, "seed = {seed}\nlevel = {level}\nvertices = {}\nsolver = {}", mesh.n_vertices(), c.solver.strategy.name())?;
    Ok((trace, extra))
}

fn fvk(cfg: &Config, c: &Common) -> Result<(FlowTrace, String)> {
    let n: usize = cfg.or("n", 32)?;
    let params = FvkParams {
        thickness: cfg.positive("delta", 1.0 / 40.0)?,
        newton_tol: cfg.positive("newton_tol", 1e-10)?,
        newton_max: cfg.or("newton_max", 8)?,
        r: cfg.or("r", 2.0)?,
        adaptive: cfg.or("adaptive", true)?,
        metric_weight: cfg.get("metric_weight")?,
        metric_mass: cfg.or("metric_mass", 0.0)?,
        exec: c.exec,
    };
    let compression: f64 = cfg.or("compression", 0.1)?;
    let amplitude = cfg.positive("perturbation", 1e-3)?;
    let seed: u64 = cfg.or("seed", 1)?;
    let fp = flow_params(cfg, c, 10.0 / n as f64, 1e-6)?;
    prepare(cfg, c)?;
    let mesh: TriMesh = rect_tri_mesh(1.0, 1.0, n, n)?;
    let (s0, clamped) = compression_setup(&mesh, compression, amplitude, seed);
    let mut flow = FvkFlow::new(mesh.clone(), params, &clamped)?;
    let tris = mesh.triangles().to_vec();
    let verts = mesh.vertices().to_vec();
    let snap = |path: &Path, s: &FvkState| {
        let pts: Vec<[f64; 3]> = verts.iter().enumerate().map(|(i, x)| [x[0] + s.u.at(i)[0], x[1] + s.u.at(i)[1], s.w.value(i, 0)]).collect();
        let w: Vec<f64> = (0..verts.len()).map(|i| s.w.value(i, 0)).collect();
        write_vtk(path, &VtkGeometry { points: pts, cells: VtkCells::Triangles(tris.clone()) }, &[VtkField::Scalars("w".into(), w)], "fvk")
    };
    let (s, mut trace) = drive(&mut flow, s0, &fp, c, snap)?;
    trace.seed = Some(seed);
    let section: Vec<f64> = flow.section(&s.w, 0.5, 1e-9).iter().map(|p| p.1).collect();
    let min_tau = trace.rows.iter().skip(1).fold(f64::INFINITY, |m, r| m.min(r.tau));
    let mut extra = String::new();
    writeln!(extra, "seed = {seed}\nsign_changes_mid = {}", sign_changes(&section, 1e-6))?;
    writeln!(extra, "min_accepted_tau = {min_tau:.6e}\nrejected_steps = {}", flow.rejections)?;
    Ok((trace, extra))
}
