//! Runs a scenario end to end and writes its artifacts.

use crate::adaptivity::{refine_step, run_steady_cycles, CycleRecord, CycleSettings};
use crate::dae::{reinit_position, reinit_velocity, Bdf, TankProblem};
use crate::meshkit::{assign_double_nodes, build_domain_mesh};
use crate::postproc::{
    force_record, hydrostatic_lift, node_field, nodal_pressure, write_cycle_table, write_vtk, ForceHistoryWriter,
    ForceRecord, PointField,
};
use crate::scenario::{Mode, Scenario};
use crate::{Error, Vec3};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Command-line style overrides of scenario values.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub mode: Option<Mode>,
    pub cycles: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub dump_matrices: bool,
}

impl RunOptions {
    pub fn apply(&self, sc: &mut Scenario) {
        if let Some(m) = self.mode {
            sc.run.mode = m;
        }
        if let Some(c) = self.cycles {
            sc.refinement.cycles = c;
        }
        if let Some(dt) = self.dt {
            sc.solver.dt = dt;
            sc.solver.dt_min = sc.solver.dt_min.min(dt);
            sc.solver.dt_max = sc.solver.dt_max.max(dt);
        }
        if let Some(t) = self.t_end {
            sc.run.t_end = t;
        }
        if let Some(d) = &self.output_dir {
            sc.run.output_dir = d.clone();
        }
    }
}

/// An error together with the stage of the run that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub cycles: Vec<CycleRecord>,
    pub forces: Vec<ForceRecord>,
    pub steps: usize,
}

/// Plain-text run log next to the other outputs; every line is also
/// forwarded to the `log` facade.
pub struct RunLog {
    file: File,
    path: PathBuf,
}

impl RunLog {
    pub fn create(path: &Path) -> crate::Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(RunLog {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn line(&mut self, msg: &str) -> crate::Result<()> {
        log::info!("{msg}");
        writeln!(self.file, "{msg}").map_err(|e| Error::io(&self.path, e))
    }
}

fn snapshot(problem: &TankProblem, y: &[f64], ydot: &[f64], t: f64, path: &Path) -> crate::Result<()> {
    let n = problem.n();
    let nodes = problem.node_positions(&y[2 * n..]);
    let eta: Vec<f64> = nodes.iter().zip(&problem.mesh().nodes).map(|(a, b)| a.z - b.z).collect();
    let phi = node_field(problem.mesh(), problem.dofs(), &y[..n]);
    let gamma = node_field(problem.mesh(), problem.dofs(), &y[n..2 * n]);
    let p = nodal_pressure(problem, y, ydot, t);
    write_vtk(
        path,
        problem.mesh(),
        &nodes,
        &[
            PointField::Scalar("eta", &eta),
            PointField::Scalar("phi", &phi),
            PointField::Scalar("gamma", &gamma),
            PointField::Scalar("p", &p),
        ],
    )
}

fn dump_matrices(problem: &TankProblem, y: &[f64], dir: &Path) -> crate::Result<()> {
    let g = problem.geometry(y)?;
    for (name, m) in [("N.txt", &g.bem.n), ("D.txt", &g.bem.d)] {
        let path = dir.join(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        m.write_text(std::io::BufWriter::new(f)).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("alpha.txt");
    let text: String = g.bem.alpha.iter().map(|a| format!("{a:.16e}\n")).collect();
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Build the initial problem of a scenario.
pub fn build_problem(sc: &Scenario) -> crate::Result<TankProblem> {
    let mesh = build_domain_mesh(sc)?;
    let dofs = assign_double_nodes(&mesh);
    let mut p = TankProblem::new(mesh, dofs, sc.flow(), sc.fs_params(), sc.quad_settings())?;
    p.set_strategy(sc.solver_config().jacobian);
    p.set_beach(sc.run.mode != Mode::Steady);
    Ok(p)
}

/// Run a scenario, writing snapshots, `forces.csv`, `cycles.csv` and
/// `run.log` into its output directory.
pub fn run(sc: &Scenario, dump: bool) -> Result<RunSummary, StageError> {
    let out = sc.run.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e)).stage("output setup")?;
    let mut log = RunLog::create(&out.join("run.log")).stage("output setup")?;
    log.line(&format!(
        "scenario: mode {:?}, U = {:.6} m/s (Fr {:.4}), submergence {} m, cycles {}",
        sc.run.mode,
        sc.u_inf(),
        sc.froude(),
        sc.submergence(),
        sc.refinement.cycles
    ))
    .stage("output setup")?;
    let problem = build_problem(sc).stage("mesh generation")?;
    log.line(&format!(
        "mesh: {} nodes, {} cells, {} DOFs",
        problem.mesh().nodes.len(),
        problem.mesh().cells.len(),
        problem.n()
    ))
    .stage("output setup")?;
    if dump {
        let dir = out.join("matrices");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e)).stage("matrix dump")?;
        dump_matrices(&problem, &problem.rest_state(), &dir).stage("matrix dump")?;
    }
    let l0 = hydrostatic_lift(sc.flow.rho, sc.semi_axes());
    match sc.run.mode {
        Mode::Steady => run_steady(sc, problem, l0, &out, &mut log),
        Mode::Unsteady | Mode::Ramped => run_transient(sc, problem, l0, &out, &mut log),
    }
}

fn run_steady(
    sc: &Scenario,
    problem: TankProblem,
    l0: f64,
    out: &Path,
    log: &mut RunLog,
) -> Result<RunSummary, StageError> {
    let cfg = sc.solver_config();
    let settings = CycleSettings {
        cycles: sc.refinement.cycles,
        fraction: sc.refinement.fraction,
    };
    let mut forces = ForceHistoryWriter::create(&out.join("forces.csv")).stage("output setup")?;
    let mut summary = RunSummary::default();
    let mut records = Vec::new();
    let y0 = problem.rest_state();
    let result = run_steady_cycles(problem, y0, &settings, &cfg.newton, l0, |p, y, rec| {
        let zero = vec![0.0; y.len()];
        let f = force_record(p, y, &zero, rec.cycle as f64, l0);
        forces.append(&f)?;
        summary.forces.push(f);
        snapshot(p, y, &zero, f64::INFINITY, &out.join(format!("steady_cycle_{:02}.vtk", rec.cycle)))?;
        log.line(&format!(
            "cycle {} nodes {} dofs {} newton {} jacobians {} R {:.9e} L {:.9e} Lstar {:.6e} Rstar {:.6e}",
            rec.cycle,
            rec.nodes,
            p.n(),
            rec.newton_iters,
            rec.jacobians,
            f.r,
            f.l,
            f.l_star,
            f.r_star
        ))?;
        records.push(rec.clone());
        write_cycle_table(&out.join("cycles.csv"), &records)
    });
    match result {
        Ok(run) => {
            summary.cycles = run.records;
            Ok(summary)
        }
        Err(e) if e.is_solver_failure() => Err(StageError {
            stage: "steady solve",
            error: e,
        }),
        Err(e) => Err(StageError {
            stage: "output",
            error: e,
        }),
    }
}

fn run_transient(
    sc: &Scenario,
    problem: TankProblem,
    l0: f64,
    out: &Path,
    log: &mut RunLog,
) -> Result<RunSummary, StageError> {
    let cfg = sc.solver_config();
    let t_end = sc.run.t_end;
    let windows = sc.refinement.cycles + 1;
    let mut problem = problem;
    let mut forces = ForceHistoryWriter::create(&out.join("forces.csv")).stage("output setup")?;
    let mut summary = RunSummary::default();
    let y0 = problem.rest_state();
    let (mut y, mut ydot, _) =
        reinit_velocity(&problem, &y0, &vec![0.0; y0.len()], 0.0, &cfg.newton).stage("initial conditions")?;
    let mut t = 0.0;
    let mut dt = cfg.bdf.dt_initial;
    let mut step = 0usize;
    let stride = sc.run.snapshot_stride;
    snapshot(&problem, &y, &ydot, t, &out.join("snapshot_00000.vtk")).stage("output")?;
    for w in 0..windows {
        let start = Instant::now();
        let t_stop = if w + 1 == windows { t_end } else { t_end * (w + 1) as f64 / windows as f64 };
        let mut bdf = Bdf::new(&problem, cfg.bdf, cfg.newton, t, y, ydot);
        bdf.set_dt(dt);
        let mut iters = 0;
        let mut jacs = 0;
        let mut last = ForceRecord::new(t, Vec3::zeros(), l0);
        let mut io_error: Option<Error> = None;
        let res = bdf.advance_to(t_stop, |b, r| {
            step += 1;
            iters += r.newton.iterations;
            jacs += r.newton.jacobians;
            let f = force_record(&problem, &b.y, &b.ydot, b.t, l0);
            last = f;
            summary.forces.push(f);
            let mut io = || -> crate::Result<()> {
                forces.append(&f)?;
                log.line(&format!(
                    "step {step} t {:.6} dt {:.6e} order {} newton {} jacobians {} rejected {} residual {:.3e} R {:.9e} L {:.9e}",
                    b.t,
                    r.dt,
                    r.order,
                    r.newton.iterations,
                    r.newton.jacobians,
                    r.rejected,
                    r.newton.final_residual(),
                    f.r,
                    f.l
                ))?;
                if step % stride == 0 {
                    snapshot(&problem, &b.y, &b.ydot, b.t, &out.join(format!("snapshot_{step:05}.vtk")))?;
                }
                Ok(())
            };
            io().map_err(|e| {
                let msg = e.to_string();
                io_error = Some(e);
                Error::Invalid(msg)
            })
        });
        if let Some(e) = io_error {
            return Err(StageError { stage: "output", error: e });
        }
        res.stage("time integration")?;
        t = bdf.t;
        dt = bdf.dt();
        y = bdf.y;
        ydot = bdf.ydot;
        let rec = CycleRecord {
            cycle: w,
            nodes: problem.mesh().nodes.len(),
            newton_iters: iters,
            jacobians: jacs,
            drag: last.r,
            lift: last.l,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        summary.cycles.push(rec);
        write_cycle_table(&out.join("cycles.csv"), &summary.cycles).stage("output")?;
        if w + 1 < windows {
            let (p2, y2, yd2) = refine_step(&problem, &y, &ydot, sc.refinement.fraction).stage("refinement")?;
            let (y3, rep) = reinit_position(&p2, &yd2, &y2, t, &cfg.newton).stage("restart")?;
            log.line(&format!(
                "refined at t {t:.6}: {} nodes, {} DOFs, restart in {} Newton iterations",
                p2.mesh().nodes.len(),
                p2.n(),
                rep.iterations
            ))
            .stage("output")?;
            problem = p2;
            y = y3;
            ydot = yd2;
        }
    }
    summary.steps = step;
    snapshot(&problem, &y, &ydot, t, &out.join("final.vtk")).stage("output")?;
    Ok(summary)
}
