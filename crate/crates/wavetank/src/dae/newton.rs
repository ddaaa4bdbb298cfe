use crate::linalg::{norm_inf, DenseMatrix, LuFactors};
use crate::{Error, Result};

/// Newton iteration controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Convergence when `‖G‖∞ ≤ rel_tol · ‖G(y0)‖∞`.
    pub rel_tol: f64,
    /// Absolute floor on `‖G‖∞`.
    pub abs_tol: f64,
    pub max_iterations: usize,
    /// A fresh Jacobian is assembled after a damped step and whenever a step
    /// with reused factors contracts the residual by less than this factor.
    /// Zero gives the full Newton method.
    pub reassemble_rate: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            rel_tol: 1e-5,
            abs_tol: 1e-12,
            max_iterations: 20,
            reassemble_rate: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub jacobians: usize,
    /// `‖G‖∞` at the initial guess and after every accepted iteration.
    pub history: Vec<f64>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }
}

/// Solve `G(x) = 0` by modified Newton with LU-factored Jacobians.
///
/// `lu` carries factors between calls; when it holds factors they are used
/// until convergence slows down. Trial points where `G` fails with a solver
/// error are treated like a residual increase.
pub fn newton_solve<G, J>(
    mut g: G,
    mut jac: J,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
    lu: &mut Option<LuFactors>,
) -> Result<(Vec<f64>, NewtonReport)>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<DenseMatrix>,
{
    let mut x = x0;
    let mut f = g(&x)?;
    let r0 = norm_inf(&f);
    let mut report = NewtonReport {
        history: vec![r0],
        ..NewtonReport::default()
    };
    if !r0.is_finite() {
        return Err(failure(report, "non-finite initial residual", x));
    }
    let tol = (cfg.rel_tol * r0).max(cfg.abs_tol);
    if r0 <= tol {
        return Ok((x, report));
    }
    let mut fresh = false;
    if let Some(l) = lu.as_ref() {
        if l.dim() != x.len() {
            *lu = None;
        }
    }
    let mut best = (r0, x.clone());
    let mut r = r0;
    while report.iterations < cfg.max_iterations {
        if lu.is_none() {
            let j = jac(&x)?;
            report.jacobians += 1;
            match LuFactors::new(j) {
                Ok(f) => *lu = Some(f),
                Err(Error::SingularMatrix { column }) => {
                    return Err(failure(report, &format!("singular Jacobian (column {column})"), best.1));
                }
                Err(e) => return Err(e),
            }
            fresh = true;
        }
        let factors = lu.as_ref().expect("factors present");
        let mut dx: Vec<f64> = f.iter().map(|v| -v).collect();
        factors.solve_in_place(&mut dx);

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..if fresh { 6 } else { 1 } {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            match g(&xt) {
                Ok(ft) => {
                    let rt = norm_inf(&ft);
                    if rt.is_finite() && (rt < r || rt <= tol) {
                        accepted = Some((xt, ft, rt, lambda));
                        break;
                    }
                }
                Err(e) if e.is_solver_failure() => {}
                Err(e) => return Err(e),
            }
            lambda *= 0.5;
        }
        report.iterations += 1;
        match accepted {
            Some((xt, ft, rt, lambda)) => {
                let rate = rt / r;
                x = xt;
                f = ft;
                r = rt;
                report.history.push(r);
                log::debug!(
                    "newton iteration {} residual {:.3e} jacobians {}",
                    report.iterations,
                    r,
                    report.jacobians
                );
                if r < best.0 {
                    best = (r, x.clone());
                }
                if r <= tol {
                    return Ok((x, report));
                }
                if lambda < 1.0 || cfg.reassemble_rate <= 0.0 || (!fresh && rate > cfg.reassemble_rate) {
                    *lu = None;
                }
                fresh = false;
            }
            None if fresh => {
                return Err(failure(report, "no descent along the Newton direction", best.1));
            }
            None => {
                *lu = None;
            }
        }
    }
    Err(failure(report, "maximum iterations reached", best.1))
}

fn failure(report: NewtonReport, reason: &str, best: Vec<f64>) -> Error {
    Error::NewtonFailure {
        iterations: report.iterations,
        residual: report.final_residual(),
        reason: reason.to_string(),
        best,
        history: report.history,
    }
}
