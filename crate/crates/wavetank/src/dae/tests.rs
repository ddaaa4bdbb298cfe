use super::*;
use crate::bem::QuadSettings;
use crate::freesurface::{AsymptoticFlow, FsParams};
use crate::linalg::{norm_inf, DenseMatrix};
use crate::meshkit::{assign_double_nodes, build_domain, DomainSpec};
use crate::Error;

struct Decay;

impl DaeSystem for Decay {
    fn dim(&self) -> usize {
        1
    }
    fn active(&self) -> &[usize] {
        &[0]
    }
    fn residual(&self, ydot: &[f64], y: &[f64], _t: f64) -> crate::Result<Vec<f64>> {
        Ok(vec![ydot[0] + y[0]])
    }
    fn jacobian(&self, _: &[f64], _: &[f64], _t: f64, c: f64) -> crate::Result<DenseMatrix> {
        Ok(DenseMatrix::from_fn(1, 1, |_, _| 1.0 + c))
    }
}

fn fixed_step(order: usize, dt: f64) -> BdfSettings {
    BdfSettings {
        order,
        dt_initial: dt,
        dt_min: dt,
        dt_max: dt,
        easy_iterations: 2,
    }
}

#[test]
fn bdf1_scalar_decay() {
    let mut bdf = Bdf::new(&Decay, fixed_step(1, 0.1), NewtonConfig::default(), 0.0, vec![1.0], vec![-1.0]);
    bdf.advance_to(1.0, |_, _| Ok(())).unwrap();
    assert!((bdf.t - 1.0).abs() < 1e-12);
    assert!((bdf.y[0] - 1.1f64.powi(-10)).abs() < 1e-9, "{}", bdf.y[0]);
}

#[test]
fn bdf2_is_second_order() {
    let err = |dt: f64| {
        let mut bdf = Bdf::new(&Decay, fixed_step(2, dt), NewtonConfig::default(), 0.0, vec![1.0], vec![-1.0]);
        bdf.advance_to(1.0, |_, _| Ok(())).unwrap();
        (bdf.y[0] - (-1.0f64).exp()).abs()
    };
    let (e1, e2) = (err(0.02), err(0.01));
    let rate = (e1 / e2).log2();
    assert!(rate > 1.8 && rate < 2.2, "observed order {rate}");
}

#[test]
fn variable_steps_grow_on_easy_problems() {
    let settings = BdfSettings {
        order: 2,
        dt_initial: 0.01,
        dt_min: 1e-4,
        dt_max: 0.08,
        easy_iterations: 2,
    };
    let mut bdf = Bdf::new(&Decay, settings, NewtonConfig::default(), 0.0, vec![1.0], vec![-1.0]);
    let steps = bdf.advance_to(2.0, |_, _| Ok(())).unwrap();
    assert!(steps.iter().any(|s| s.dt > 0.05));
    assert!((bdf.y[0] - (-2.0f64).exp()).abs() < 5e-3);
}

fn tiny_spec() -> DomainSpec {
    DomainSpec {
        x_min: -25.0,
        x_max: 25.0,
        half_width: 10.0,
        depth: 10.0,
        fs_near_x: (-10.0, 10.0),
        fs_near_y: 5.0,
        fs_cell: 5.0,
        fs_growth: 1.0,
        fs_max_cell: 5.0,
        wall_cell: 10.0,
        curvature_cycles: 0,
        ..DomainSpec::default()
    }
}

fn tiny_problem(flow: AsymptoticFlow) -> TankProblem {
    let mesh = build_domain(&tiny_spec()).unwrap();
    let dofs = assign_double_nodes(&mesh);
    TankProblem::new(mesh, dofs, flow, FsParams::default(), QuadSettings::default()).unwrap()
}

#[test]
fn rest_state_is_an_equilibrium() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let y = p.rest_state();
    let f = p.residual(&vec![0.0; y.len()], &y, 0.0).unwrap();
    assert!(norm_inf(&f) < 1e-12, "{}", norm_inf(&f));
}

#[test]
fn constant_potential_satisfies_the_integral_equation() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let n = p.n();
    let mut y = p.rest_state();
    for v in &mut y[..n] {
        *v = 3.0;
    }
    let f = p.residual(&vec![0.0; y.len()], &y, 0.0).unwrap();
    for i in 0..n {
        if !p.dofs().is_hanging(i) && p.dofs().dofs[i].bc == crate::meshkit::BoundaryCondition::Neumann {
            assert!(f[i].abs() < 1e-10, "row {i}: {}", f[i]);
        }
    }
}

#[test]
fn pinned_elevations_do_not_move_the_geometry() {
    let p = tiny_problem(AsymptoticFlow::uniform(2.0));
    let n = p.n();
    let y = p.rest_state();
    let ydot = vec![0.0; y.len()];
    let base = p.residual(&ydot, &y, 1.0).unwrap();
    let k = (0..n).find(|&i| !p.is_fs(i)).unwrap();
    let mut y2 = y.clone();
    y2[2 * n + k] += 0.3;
    let f = p.residual(&ydot, &y2, 1.0).unwrap();
    for r in 0..3 * n {
        let expect = if r == 2 * n + k { 0.3 } else { 0.0 };
        assert!((f[r] - base[r] - expect).abs() < 1e-12, "row {r}");
    }
}

#[test]
fn inverted_cells_are_reported() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let n = p.n();
    let mut y = p.rest_state();
    for i in 0..n {
        if p.is_fs(i) {
            y[2 * n + i] = -20.0;
        }
    }
    let r = p.residual(&vec![0.0; y.len()], &y, 0.0);
    assert!(matches!(r, Err(Error::InvertedCell { .. })), "{r:?}");
}

fn perturbed_state(p: &TankProblem) -> (Vec<f64>, Vec<f64>) {
    let n = p.n();
    let mut y = p.rest_state();
    let mut ydot = vec![0.0; y.len()];
    for i in 0..n {
        let x = p.mesh().nodes[p.dofs().dofs[i].node];
        y[i] = 0.3 * (0.2 * x.x).sin() + 0.1 * x.y / 10.0;
        y[n + i] = 0.05 * (0.3 * x.x + 0.1 * x.z).cos();
        if p.is_fs(i) {
            y[2 * n + i] = 0.1 * (0.25 * x.x).cos() * (0.2 * x.y).cos();
            ydot[i] = 0.2 * (0.1 * x.y).sin();
            ydot[2 * n + i] = 0.05 * (0.15 * x.x).sin();
        }
    }
    (y, ydot)
}

#[test]
fn structured_jacobian_matches_directional_differences() {
    let flow = AsymptoticFlow {
        ramp_time: Some(4.0),
        ..AsymptoticFlow::uniform(2.0)
    };
    let mut p = tiny_problem(flow);
    p.set_beach(true);
    let (y, ydot) = perturbed_state(&p);
    let c = 15.0;
    let a = p.jacobian(&ydot, &y, 1.5, c).unwrap();
    p.set_strategy(JacobianStrategy::Directional);
    let b = p.jacobian(&ydot, &y, 1.5, c).unwrap();
    let scale = b.max_abs();
    let mut worst = 0.0f64;
    for r in 0..a.rows() {
        for s in 0..a.cols() {
            worst = worst.max((a[(r, s)] - b[(r, s)]).abs());
        }
    }
    assert!(worst < 1e-5 * scale, "max deviation {worst:e} of {scale:e}");
}

#[test]
fn steady_rejects_waves() {
    let flow = AsymptoticFlow {
        wave: Some(crate::freesurface::AiryWave::new(0.02, 0.1571, 50.0)),
        ..AsymptoticFlow::uniform(1.0)
    };
    let p = tiny_problem(flow);
    let y = p.rest_state();
    assert!(matches!(steady_solve(&p, &y, &NewtonConfig::default()), Err(Error::Config(_))));
}

#[test]
fn steady_stream_converges() {
    let p = tiny_problem(AsymptoticFlow::uniform(2.0));
    let y0 = p.rest_state();
    let (y, rep) = steady_solve(&p, &y0, &NewtonConfig::default()).unwrap();
    assert!(rep.iterations <= 10, "{rep:?}");
    let f = p.residual(&vec![0.0; y.len()], &y, f64::INFINITY).unwrap();
    assert!(norm_inf(&f) <= 1e-5 * rep.history[0]);
}

#[test]
fn reinit_velocity_gives_consistent_rates() {
    let flow = AsymptoticFlow {
        ramp_time: Some(4.0),
        ..AsymptoticFlow::uniform(2.0)
    };
    let p = tiny_problem(flow);
    let y0 = p.rest_state();
    let ydot0 = vec![0.0; y0.len()];
    let (y, ydot, rep) = reinit_velocity(&p, &y0, &ydot0, 1.0, &NewtonConfig::default()).unwrap();
    let f = p.residual(&ydot, &y, 1.0).unwrap();
    assert!(norm_inf(&f) <= 1e-5 * rep.history[0], "{}", norm_inf(&f));
    let n = p.n();
    // during the ramp the surface potential must start to change
    assert!(ydot[..n].iter().any(|v| v.abs() > 1e-6));
}

#[test]
fn transient_start_takes_bdf_steps() {
    let flow = AsymptoticFlow {
        ramp_time: Some(2.0),
        ..AsymptoticFlow::uniform(2.0)
    };
    let mut p = tiny_problem(flow);
    p.set_beach(true);
    let y0 = p.rest_state();
    let settings = BdfSettings {
        dt_initial: 0.25,
        dt_max: 0.5,
        ..BdfSettings::default()
    };
    let mut bdf = Bdf::new(&p, settings, NewtonConfig::default(), 0.0, y0.clone(), vec![0.0; y0.len()]);
    bdf.advance_to(1.0, |_, _| Ok(())).unwrap();
    let f = p.residual(&bdf.ydot, &bdf.y, bdf.t).unwrap();
    assert!(norm_inf(&f) < 1e-4, "{}", norm_inf(&f));
    assert!((bdf.t - 1.0).abs() < 1e-12);
}

struct Ramp;

impl DaeSystem for Ramp {
    fn dim(&self) -> usize {
        1
    }
    fn active(&self) -> &[usize] {
        &[0]
    }
    fn residual(&self, ydot: &[f64], _y: &[f64], t: f64) -> crate::Result<Vec<f64>> {
        Ok(vec![ydot[0] - 2.0 * t])
    }
    fn jacobian(&self, _: &[f64], _: &[f64], _t: f64, c: f64) -> crate::Result<DenseMatrix> {
        Ok(DenseMatrix::from_fn(1, 1, |_, _| c))
    }
}

#[test]
fn implicit_euler_first_step() {
    let mut bdf = Bdf::new(&Decay, fixed_step(1, 0.1), NewtonConfig::default(), 0.0, vec![1.0], vec![-1.0]);
    bdf.step(10.0).unwrap();
    assert!((bdf.y[0] - 1.0 / 1.1).abs() < 1e-12);
}

#[test]
fn observed_orders_on_the_scalar_probe() {
    for order in [1usize, 2] {
        let err = |dt: f64| {
            let mut bdf = Bdf::new(&Decay, fixed_step(order, dt), NewtonConfig::default(), 0.0, vec![1.0], vec![-1.0]);
            if order == 2 {
                bdf.set_history(vec![dt.exp()], dt);
            }
            bdf.advance_to(1.0, |_, _| Ok(())).unwrap();
            (bdf.y[0] - (-1.0f64).exp()).abs()
        };
        let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| err(dt)).collect();
        for w in e.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - order as f64).abs() < 0.15, "order {order}: observed {rate}");
        }
    }
}

#[test]
fn bdf2_is_exact_for_quadratics() {
    let mut bdf = Bdf::new(&Ramp, fixed_step(2, 0.1), NewtonConfig::default(), 1.0, vec![1.0], vec![2.0]);
    bdf.set_history(vec![0.81], 0.1);
    for _ in 0..5 {
        bdf.step(10.0).unwrap();
        assert!((bdf.y[0] - bdf.t * bdf.t).abs() < 1e-12, "{} at {}", bdf.y[0], bdf.t);
        assert!((bdf.ydot[0] - 2.0 * bdf.t).abs() < 1e-10);
    }
}

#[test]
fn rest_tank_stays_at_rest() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let y0 = p.rest_state();
    for dt in [0.05, 0.7] {
        let mut bdf = Bdf::new(&p, fixed_step(2, dt), NewtonConfig::default(), 0.0, y0.clone(), vec![0.0; y0.len()]);
        bdf.step(10.0).unwrap();
        bdf.step(10.0).unwrap();
        assert!(bdf.y.iter().zip(&y0).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn linear_rows_have_identity_jacobians() {
    let p = tiny_problem(AsymptoticFlow::uniform(1.0));
    let n = p.n();
    let y = p.rest_state();
    let j = p.jacobian_full(&vec![0.0; y.len()], &y, 2.0, 10.0).unwrap();
    for i in 0..n {
        let d = p.dofs();
        if p.is_fs(i) || d.is_hanging(i) {
            continue;
        }
        let r = 2 * n + i;
        for c in 0..3 * n {
            assert_eq!(j[(r, c)], if c == r { 1.0 } else { 0.0 });
        }
        if d.dofs[i].bc == crate::meshkit::BoundaryCondition::Dirichlet {
            for c in 0..3 * n {
                assert_eq!(j[(i, c)], if c == i { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn reinit_velocity_of_a_consistent_state_is_zero() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let y0 = p.rest_state();
    let (y, ydot, _) = reinit_velocity(&p, &y0, &vec![0.0; y0.len()], 0.0, &NewtonConfig::default()).unwrap();
    assert!(norm_inf(&ydot) < 1e-12);
    assert_eq!(y, y0);
}

#[test]
fn perturbed_potential_drives_a_local_rate() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let n = p.n();
    let mut y0 = p.rest_state();
    let target = (0..n)
        .filter(|&i| p.is_fs(i) && !p.dofs().is_hanging(i) && !p.touches_dirichlet(i))
        .min_by(|&a, &b| {
            let xa = p.mesh().nodes[p.dofs().dofs[a].node].norm();
            let xb = p.mesh().nodes[p.dofs().dofs[b].node].norm();
            xa.partial_cmp(&xb).unwrap()
        })
        .unwrap();
    y0[target] = 0.01;
    let (_, ydot, _) = reinit_velocity(&p, &y0, &vec![0.0; y0.len()], 0.0, &NewtonConfig::default()).unwrap();
    // the potential rate is quadratic in the perturbation, the surface rate linear
    assert!(ydot[..n].iter().any(|v| v.abs() > 1e-8));
    let peak = ydot[2 * n..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak > 1e-4);
    let x0 = p.mesh().nodes[p.dofs().dofs[target].node];
    let far = (0..n)
        .filter(|&i| p.is_fs(i) && (p.mesh().nodes[p.dofs().dofs[i].node] - x0).norm() > 15.0)
        .fold(0.0f64, |m, i| m.max(ydot[2 * n + i].abs()));
    assert!(far < 0.5 * peak, "far {far} peak {peak}");
}

#[test]
fn reinit_velocity_reports_inverted_cells() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let n = p.n();
    let mut y0 = p.rest_state();
    for i in 0..n {
        if p.is_fs(i) {
            y0[2 * n + i] = -20.0;
        }
    }
    assert!(reinit_velocity(&p, &y0, &vec![0.0; y0.len()], 0.0, &NewtonConfig::default()).is_err());
}

#[test]
fn reinit_position_fixed_points() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let rest = p.rest_state();
    let zero = vec![0.0; rest.len()];
    let mut guess = rest.clone();
    let n = p.n();
    for i in 0..n {
        if p.is_fs(i) {
            guess[2 * n + i] += 0.01;
        }
    }
    let (y, _) = reinit_position(&p, &zero, &guess, 0.0, &NewtonConfig::default()).unwrap();
    assert!(y.iter().zip(&rest).all(|(a, b)| (a - b).abs() < 1e-8));

    let flow = AsymptoticFlow {
        ramp_time: Some(4.0),
        ..AsymptoticFlow::uniform(2.0)
    };
    let p = tiny_problem(flow);
    let y0 = p.rest_state();
    let (y, ydot, _) = reinit_velocity(&p, &y0, &vec![0.0; y0.len()], 1.0, &NewtonConfig::default()).unwrap();
    let (yr, rep) = reinit_position(&p, &ydot, &y, 1.0, &NewtonConfig::default()).unwrap();
    assert!(rep.iterations <= 1);
    let scale = norm_inf(&y).max(1.0);
    assert!(yr.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-6 * scale));
}

#[test]
fn still_water_is_the_steady_state_without_a_stream() {
    let p = tiny_problem(AsymptoticFlow::at_rest());
    let rest = p.rest_state();
    let (y, _) = steady_solve(&p, &rest, &NewtonConfig::default()).unwrap();
    assert_eq!(y, rest);
}
