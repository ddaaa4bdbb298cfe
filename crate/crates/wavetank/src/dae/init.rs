use super::newton::{newton_solve, NewtonConfig, NewtonReport};
use super::problem::TankProblem;
use super::{gather, scatter, DaeSystem};
use crate::linalg::DenseMatrix;
use crate::{Error, Result};

/// Solve `F(0, y, ∞) = 0` starting from `y0`.
pub fn steady_solve(problem: &TankProblem, y0: &[f64], cfg: &NewtonConfig) -> Result<(Vec<f64>, NewtonReport)> {
    if problem.flow().wave.is_some() {
        return Err(Error::Config("a steady solve needs an asymptotic flow without waves".into()));
    }
    let ydot = vec![0.0; y0.len()];
    reinit_position_at(problem, &ydot, y0, f64::INFINITY, cfg)
}

/// Make `y` consistent with a prescribed `ẏ` at time `t`.
pub fn reinit_position(
    problem: &TankProblem,
    ydot: &[f64],
    y0: &[f64],
    t: f64,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonReport)> {
    reinit_position_at(problem, ydot, y0, t, cfg)
}

fn reinit_position_at(
    problem: &TankProblem,
    ydot: &[f64],
    y0: &[f64],
    t: f64,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonReport)> {
    let active = problem.active().to_vec();
    let mut y = y0.to_vec();
    let mut yj = y0.to_vec();
    let mut lu = None;
    let (x, report) = newton_solve(
        |x| {
            scatter(&mut y, &active, x);
            Ok(gather(&problem.residual(ydot, &y, t)?, &active))
        },
        |x| {
            scatter(&mut yj, &active, x);
            problem.jacobian(ydot, &yj, t, 0.0)
        },
        gather(y0, &active),
        cfg,
        &mut lu,
    )?;
    let mut out = y0.to_vec();
    scatter(&mut out, &active, &x);
    Ok((out, report))
}

/// Given the differential unknowns (potential and elevation of the free
/// surface) in `y0`, solve for their rates and for all algebraic unknowns.
/// At nodes shared with a Dirichlet boundary the free-surface potential and
/// elevation are treated as algebraic and keep the rates given in `ydot0`.
/// Returns the consistent `(y, ẏ)`.
pub fn reinit_velocity(
    problem: &TankProblem,
    y0: &[f64],
    ydot0: &[f64],
    t: f64,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, Vec<f64>, NewtonReport)> {
    let n = problem.n();
    let active = problem.active().to_vec();
    let differential: Vec<bool> = active
        .iter()
        .map(|&a| {
            let i = a % n;
            match a / n {
                0 => problem.is_fs(i) && !problem.touches_dirichlet(i),
                1 => false,
                _ => problem.is_fs(i) && !problem.touches_dirichlet(i),
            }
        })
        .collect();
    // hanging free-surface rows become ẏ_i − Σ w ẏ_p
    let mut replaced: Vec<Option<Vec<(usize, f64)>>> = vec![None; active.len()];
    let pos = |a: usize| active.iter().position(|&b| b == a).expect("active index");
    for i in 0..n {
        if !problem.is_fs(i) {
            continue;
        }
        if let Some(c) = &problem.dofs().constraints[i] {
            for off in [0, 2 * n] {
                let mut row = vec![(pos(off + i), 1.0)];
                for (p, w) in c.parents.iter().zip(&c.weights) {
                    row.push((pos(off + p), -w));
                }
                replaced[pos(off + i)] = Some(row);
            }
        }
    }
    let split = |u: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut y = y0.to_vec();
        let mut yd = ydot0.to_vec();
        for (k, &a) in active.iter().enumerate() {
            if differential[k] {
                yd[a] = u[k];
            } else {
                y[a] = u[k];
            }
        }
        (y, yd)
    };
    let u0: Vec<f64> = active
        .iter()
        .enumerate()
        .map(|(k, &a)| if differential[k] { ydot0[a] } else { y0[a] })
        .collect();
    let mut lu = None;
    let (u, report) = newton_solve(
        |u| {
            let (y, yd) = split(u);
            let f = problem.residual(&yd, &y, t)?;
            let mut g = gather(&f, &active);
            for (r, rep) in replaced.iter().enumerate() {
                if let Some(row) = rep {
                    g[r] = row.iter().map(|&(c, w)| w * u[c]).sum();
                }
            }
            Ok(g)
        },
        |u| {
            let (y, yd) = split(u);
            let j0 = problem.jacobian(&yd, &y, t, 0.0)?;
            let j1 = problem.jacobian(&yd, &y, t, 1.0)?;
            let m = active.len();
            let mut j = DenseMatrix::from_fn(m, m, |r, c| {
                if differential[c] {
                    j1[(r, c)] - j0[(r, c)]
                } else {
                    j0[(r, c)]
                }
            });
            for (r, rep) in replaced.iter().enumerate() {
                if let Some(row) = rep {
                    j.row_mut(r).fill(0.0);
                    for &(c, w) in row {
                        j[(r, c)] += w;
                    }
                }
            }
            Ok(j)
        },
        u0,
        cfg,
        &mut lu,
    )?;
    let (y, yd) = split(&u);
    Ok((y, yd, report))
}
