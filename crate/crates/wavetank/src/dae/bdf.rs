use super::newton::{newton_solve, NewtonConfig, NewtonReport};
use super::{gather, scatter, DaeSystem};
use crate::linalg::LuFactors;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BdfSettings {
    /// 1 or 2.
    pub order: usize,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Steps converging in at most this many iterations double the step.
    pub easy_iterations: usize,
}

impl Default for BdfSettings {
    fn default() -> Self {
        BdfSettings {
            order: 2,
            dt_initial: 0.05,
            dt_min: 1e-4,
            dt_max: 0.5,
            easy_iterations: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    pub order: usize,
    pub newton: NewtonReport,
    /// Attempts rejected before this step succeeded.
    pub rejected: usize,
}

/// Variable-step BDF integrator of order 1 or 2. Step size adapts to Newton
/// performance only: failures halve it and easy steps double it.
pub struct Bdf<'a, S: DaeSystem> {
    sys: &'a S,
    settings: BdfSettings,
    newton: NewtonConfig,
    pub t: f64,
    pub y: Vec<f64>,
    pub ydot: Vec<f64>,
    prev: Option<(Vec<f64>, f64)>,
    dt: f64,
    lu: Option<LuFactors>,
    lu_c: f64,
}

impl<'a, S: DaeSystem> Bdf<'a, S> {
    pub fn new(sys: &'a S, settings: BdfSettings, newton: NewtonConfig, t0: f64, y0: Vec<f64>, ydot0: Vec<f64>) -> Self {
        Bdf {
            sys,
            dt: settings.dt_initial,
            settings,
            newton,
            t: t0,
            y: y0,
            ydot: ydot0,
            prev: None,
            lu: None,
            lu_c: 0.0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.dt = dt.clamp(self.settings.dt_min, self.settings.dt_max);
    }

    /// Supply the state one step of length `h_prev` back, enabling a
    /// second-order first step.
    pub fn set_history(&mut self, y_prev: Vec<f64>, h_prev: f64) {
        self.prev = Some((y_prev, h_prev));
    }

    /// Forget the step history, e.g. after the state was modified externally.
    pub fn restart(&mut self, t: f64, y: Vec<f64>, ydot: Vec<f64>) {
        self.t = t;
        self.y = y;
        self.ydot = ydot;
        self.prev = None;
        self.lu = None;
    }

    /// Take one step, never past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<StepReport> {
        let active = self.sys.active().to_vec();
        let mut rejected = 0;
        loop {
            let h = self.dt.min(t_limit - self.t);
            if !(h > 0.0) {
                return Err(Error::Invalid(format!("no time left before {t_limit}")));
            }
            let order = if self.prev.is_some() && self.settings.order >= 2 { 2 } else { 1 };
            // ẏ = a0 y + a1 y_n + a2 y_{n−1}
            let (a0, a1, a2, pred) = match (&self.prev, order) {
                (Some((yp, hp)), 2) => {
                    let w = h / hp;
                    let a0 = (1.0 + 2.0 * w) / ((1.0 + w) * h);
                    let a1 = -(1.0 + w) / h;
                    let a2 = w * w / ((1.0 + w) * h);
                    let pred: Vec<f64> = (0..self.y.len())
                        .map(|i| {
                            let c = (yp[i] - self.y[i] + self.ydot[i] * hp) / (hp * hp);
                            self.y[i] + self.ydot[i] * h + c * h * h
                        })
                        .collect();
                    (a0, a1, a2, pred)
                }
                _ => {
                    let pred: Vec<f64> = self.y.iter().zip(&self.ydot).map(|(y, d)| y + h * d).collect();
                    (1.0 / h, -1.0 / h, 0.0, pred)
                }
            };
            let empty = Vec::new();
            let yprev = self.prev.as_ref().map(|p| &p.0).unwrap_or(&empty);
            let hist: Vec<f64> = (0..self.y.len())
                .map(|i| a1 * self.y[i] + if a2 != 0.0 { a2 * yprev[i] } else { 0.0 })
                .collect();
            let t1 = self.t + h;
            let mut full = self.y.clone();
            let sys = self.sys;
            let assemble = |x: &[f64], full: &mut Vec<f64>| -> Vec<f64> {
                scatter(full, &active, x);
                full.iter().zip(&hist).map(|(y, hs)| a0 * y + hs).collect()
            };
            if self.lu.is_some() && !(a0 >= 0.9 * self.lu_c && a0 <= 1.1 * self.lu_c) {
                self.lu = None;
            }
            let mut full_j = full.clone();
            let res = newton_solve(
                |x| {
                    let yd = assemble(x, &mut full);
                    let f = sys.residual(&yd, &full, t1)?;
                    Ok(gather(&f, &active))
                },
                |x| {
                    let yd = assemble(x, &mut full_j);
                    sys.jacobian(&yd, &full_j, t1, a0)
                },
                gather(&pred, &active),
                &self.newton,
                &mut self.lu,
            );
            match res {
                Ok((x, report)) => {
                    if report.jacobians > 0 {
                        self.lu_c = a0;
                    }
                    let mut ynew = self.y.clone();
                    scatter(&mut ynew, &active, &x);
                    let ydot: Vec<f64> = ynew.iter().zip(&hist).map(|(y, hs)| a0 * y + hs).collect();
                    let old = std::mem::replace(&mut self.y, ynew);
                    self.prev = Some((old, h));
                    self.ydot = ydot;
                    self.t = t1;
                    let taken = h;
                    if report.iterations <= self.settings.easy_iterations && rejected == 0 {
                        self.dt = (self.dt * 2.0).min(self.settings.dt_max);
                    }
                    return Ok(StepReport {
                        t: self.t,
                        dt: taken,
                        order,
                        newton: report,
                        rejected,
                    });
                }
                Err(e) if e.is_solver_failure() => {
                    log::debug!("step of {h:e} s at t = {} rejected: {e}", self.t);
                    rejected += 1;
                    self.lu = None;
                    self.dt = h * 0.5;
                    if self.dt < self.settings.dt_min {
                        return Err(Error::StepTooSmall {
                            t: self.t,
                            dt_min: self.settings.dt_min,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Step until `t_end`, calling `observe` after every accepted step.
    pub fn advance_to(&mut self, t_end: f64, mut observe: impl FnMut(&Self, &StepReport) -> Result<()>) -> Result<Vec<StepReport>> {
        let mut out = Vec::new();
        while self.t < t_end - 1e-12 * t_end.abs().max(1.0) {
            let r = self.step(t_end)?;
            observe(self, &r)?;
            out.push(r);
        }
        Ok(out)
    }
}
