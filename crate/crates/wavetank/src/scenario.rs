//! Scenario files: a TOML document with the sections `hull`, `flow`,
//! `domain`, `beach`, `solver`, `refinement` and `run`. Every key is optional;
//! an empty file describes the default spheroid campaign.

use crate::bem::QuadSettings;
use crate::dae::{BdfSettings, JacobianStrategy, NewtonConfig, SolverConfig};
use crate::freesurface::{airy_dispersion, AiryWave, AsymptoticFlow, BeachParams, FsParams};
use crate::meshkit::DomainSpec;
use crate::{Error, Result, Vec3, GRAVITY};
use serde::Deserialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct HullConfig {
    /// Spheroid length `L`, m.
    pub length: f64,
    pub radius: f64,
    /// Depth of the axis below the free surface, m.
    pub submergence: Option<f64>,
    /// Alternative to `submergence`: diameter over axis depth.
    pub d_over_f: Option<f64>,
    /// Side cells of the coarse hull along its axis.
    pub stations: usize,
}

impl Default for HullConfig {
    fn default() -> Self {
        HullConfig {
            length: 10.0,
            radius: 1.0,
            submergence: None,
            d_over_f: None,
            stations: 2,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Stream speed, m/s.
    #[serde(rename = "U")]
    pub u: Option<f64>,
    /// Froude number `U/√(gL)`.
    #[serde(rename = "Fr")]
    pub fr: Option<f64>,
    /// Airy amplitude, m.
    pub a: f64,
    pub lambda: Option<f64>,
    pub k: Option<f64>,
    /// Water depth, m.
    pub h: f64,
    pub rho: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            u: None,
            fr: None,
            a: 0.0,
            lambda: None,
            k: None,
            h: 50.0,
            rho: 1000.0,
        }
    }
}

/// Tank proportions, all in multiples of the hull length.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub upstream: f64,
    pub downstream: f64,
    pub half_width: f64,
    pub near_upstream: f64,
    pub near_downstream: f64,
    pub near_half_width: f64,
    pub fs_cell: f64,
    pub fs_growth: f64,
    pub fs_max_cell: f64,
    pub wall_cell: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            upstream: 15.0,
            downstream: 15.0,
            half_width: 5.0,
            near_upstream: 0.75,
            near_downstream: 1.5,
            near_half_width: 0.75,
            fs_cell: 0.25,
            fs_growth: 1.2,
            fs_max_cell: 0.85,
            wall_cell: 2.5,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BeachConfig {
    /// Distance from the hull where damping starts, m.
    pub x_d: f64,
    /// Length of the damping ramp, m.
    #[serde(rename = "L_d")]
    pub l_d: f64,
    /// Damping velocity scale, m/s; defaults to `√(gL)`.
    pub rate: Option<f64>,
}

impl Default for BeachConfig {
    fn default() -> Self {
        BeachConfig {
            x_d: 50.0,
            l_d: 100.0,
            rate: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianKind {
    FiniteDifference,
    Directional,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Relative Newton tolerance.
    pub tol: f64,
    pub abs_tol: f64,
    pub max_iterations: usize,
    pub reassemble_rate: f64,
    pub jacobian: JacobianKind,
    pub order: usize,
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub easy_iterations: usize,
    /// SUPG length factor; `0` disables stabilization.
    pub supg: f64,
    pub quad_order: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let n = NewtonConfig::default();
        let b = BdfSettings::default();
        let f = FsParams::default();
        SolverSection {
            tol: n.rel_tol,
            abs_tol: n.abs_tol,
            max_iterations: n.max_iterations,
            reassemble_rate: n.reassemble_rate,
            jacobian: JacobianKind::FiniteDifference,
            order: b.order,
            dt: b.dt_initial,
            dt_min: b.dt_min,
            dt_max: b.dt_max,
            easy_iterations: b.easy_iterations,
            supg: f.c_tau,
            quad_order: f.quad_order,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    pub curvature_cycles: usize,
    pub curvature_angle: f64,
    /// Hull cells with a longer diagonal are refined, in multiples of `L`.
    pub hull_max_diagonal: f64,
    pub max_aspect_ratio: f64,
    /// Adaptive cycles on the free-surface elevation.
    pub cycles: usize,
    pub fraction: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            curvature_cycles: 7,
            curvature_angle: 20.0,
            hull_max_diagonal: 0.2,
            max_aspect_ratio: 3.5,
            cycles: 6,
            fraction: 0.04,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Steady,
    Unsteady,
    Ramped,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "steady" => Ok(Mode::Steady),
            "unsteady" => Ok(Mode::Unsteady),
            "ramped" => Ok(Mode::Ramped),
            _ => Err(Error::Config(format!("unknown mode '{s}', expected steady, unsteady or ramped"))),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Duration of the start-up ramp, s.
    pub ramp_time: f64,
    pub t_end: f64,
    pub output_dir: PathBuf,
    /// Time steps between snapshots in time-accurate runs.
    pub snapshot_stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Steady,
            ramp_time: 7.5,
            t_end: 60.0,
            output_dir: PathBuf::from("output"),
            snapshot_stride: 10,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub hull: HullConfig,
    pub flow: FlowConfig,
    pub domain: DomainConfig,
    pub beach: BeachConfig,
    pub solver: SolverSection,
    pub refinement: RefinementConfig,
    pub run: RunConfig,
}

/// 1-based line of the first assignment of `key` in `section`, or 1.
fn line_of(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(s) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = s.trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        let full = if current.is_empty() { lhs.to_string() } else { format!("{current}.{lhs}") };
        if full == format!("{section}.{key}") {
            return i + 1;
        }
    }
    1
}

impl Scenario {
    /// Parse scenario text; `path` only labels errors.
    pub fn parse(text: &str, path: &Path) -> Result<Scenario> {
        let sc: Scenario = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })?;
        sc.validate().map_err(|(section, key, message)| Error::Parse {
            path: path.to_path_buf(),
            line: line_of(text, section, key),
            message,
        })?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::parse(&text, path)
    }

    /// Re-check the invariants, e.g. after overrides.
    pub fn check(&self) -> Result<()> {
        self.validate()
            .map_err(|(section, key, message)| Error::Config(format!("{section}.{key}: {message}")))
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, &'static str, String)> {
        let f = &self.flow;
        match (f.u, f.fr) {
            (Some(_), Some(_)) => return Err(("flow", "Fr", "give either flow.U or flow.Fr, not both".into())),
            (Some(u), None) if !u.is_finite() => return Err(("flow", "U", "flow.U must be finite".into())),
            (None, Some(fr)) if !(fr >= 0.0) => return Err(("flow", "Fr", "flow.Fr must be nonnegative".into())),
            _ => {}
        }
        if !(f.a >= 0.0) {
            return Err(("flow", "a", format!("wave amplitude must be nonnegative, got {}", f.a)));
        }
        if f.lambda.is_some() && f.k.is_some() {
            return Err(("flow", "k", "give either flow.lambda or flow.k, not both".into()));
        }
        if f.a > 0.0 {
            match (f.lambda, f.k) {
                (None, None) => return Err(("flow", "a", "a wave needs flow.lambda or flow.k".into())),
                (Some(l), _) if !(l > 0.0) => return Err(("flow", "lambda", "wave length must be positive".into())),
                (_, Some(k)) if !(k > 0.0) => return Err(("flow", "k", "wave number must be positive".into())),
                _ => {}
            }
        }
        if !(f.h > 0.0) {
            return Err(("flow", "h", "depth must be positive".into()));
        }
        if !(f.rho > 0.0) {
            return Err(("flow", "rho", "density must be positive".into()));
        }
        let h = &self.hull;
        if h.submergence.is_some() && h.d_over_f.is_some() {
            return Err(("hull", "d_over_f", "give either hull.submergence or hull.d_over_f, not both".into()));
        }
        if let Some(r) = h.d_over_f {
            if !(r > 0.0) {
                return Err(("hull", "d_over_f", "d/f must be positive".into()));
            }
        }
        if self.run.mode != Mode::Steady && !(self.run.t_end > 0.0) {
            return Err(("run", "t_end", "t_end must be positive in time-accurate modes".into()));
        }
        if self.run.mode == Mode::Ramped && !(self.run.ramp_time > 0.0) {
            return Err(("run", "ramp_time", "ramp_time must be positive".into()));
        }
        if self.run.mode == Mode::Steady && f.a > 0.0 {
            return Err(("run", "mode", "steady runs cannot include incident waves".into()));
        }
        if self.run.snapshot_stride == 0 {
            return Err(("run", "snapshot_stride", "snapshot_stride must be at least 1".into()));
        }
        let r = &self.refinement;
        if !(r.fraction > 0.0 && r.fraction <= 1.0) {
            return Err(("refinement", "fraction", "fraction must lie in (0, 1]".into()));
        }
        let s = &self.solver;
        if !(1..=2).contains(&s.order) {
            return Err(("solver", "order", "BDF order must be 1 or 2".into()));
        }
        if !(s.dt > 0.0 && s.dt_min > 0.0 && s.dt_min <= s.dt && s.dt <= s.dt_max) {
            return Err(("solver", "dt", "need 0 < dt_min ≤ dt ≤ dt_max".into()));
        }
        if !(s.tol > 0.0) || s.max_iterations == 0 {
            return Err(("solver", "tol", "Newton tolerance and iteration limit must be positive".into()));
        }
        if !(s.supg >= 0.0) {
            return Err(("solver", "supg", "SUPG factor must be nonnegative".into()));
        }
        if s.quad_order == 0 {
            return Err(("solver", "quad_order", "quadrature order must be positive".into()));
        }
        self.domain_spec().validate().map_err(|e| ("hull", "submergence", e.to_string()))?;
        Ok(())
    }

    /// Stream speed, m/s.
    pub fn u_inf(&self) -> f64 {
        match (self.flow.u, self.flow.fr) {
            (Some(u), _) => u,
            (None, Some(fr)) => fr * (GRAVITY * self.hull.length).sqrt(),
            (None, None) => 0.0,
        }
    }

    pub fn froude(&self) -> f64 {
        self.u_inf() / (GRAVITY * self.hull.length).sqrt()
    }

    pub fn submergence(&self) -> f64 {
        match (self.hull.submergence, self.hull.d_over_f) {
            (Some(f), _) => f,
            (None, Some(r)) => 2.0 * self.hull.radius / r,
            (None, None) => 2.5 * self.hull.radius,
        }
    }

    pub fn wavenumber(&self) -> Option<f64> {
        self.flow.k.or(self.flow.lambda.map(|l| 2.0 * PI / l))
    }

    pub fn wave(&self) -> Option<AiryWave> {
        if self.flow.a > 0.0 {
            self.wavenumber().map(|k| AiryWave::new(self.flow.a, k, self.flow.h))
        } else {
            None
        }
    }

    pub fn wave_frequency(&self) -> Option<f64> {
        self.wavenumber().map(|k| airy_dispersion(k, self.flow.h))
    }

    /// Asymptotic flow with the ramp of the run mode.
    pub fn flow(&self) -> AsymptoticFlow {
        AsymptoticFlow {
            u_inf: self.u_inf(),
            wave: self.wave(),
            ramp_time: (self.run.mode == Mode::Ramped).then_some(self.run.ramp_time),
        }
    }

    pub fn domain_spec(&self) -> DomainSpec {
        let l = self.hull.length;
        let d = &self.domain;
        let r = &self.refinement;
        DomainSpec {
            hull_length: l,
            hull_radius: self.hull.radius,
            submergence: self.submergence(),
            x_min: -d.upstream * l,
            x_max: d.downstream * l,
            half_width: d.half_width * l,
            depth: self.flow.h,
            fs_near_x: (-d.near_upstream * l, d.near_downstream * l),
            fs_near_y: d.near_half_width * l,
            fs_cell: d.fs_cell * l,
            fs_growth: d.fs_growth,
            fs_max_cell: d.fs_max_cell * l,
            wall_cell: d.wall_cell * l,
            hull_stations: self.hull.stations,
            curvature_cycles: r.curvature_cycles,
            curvature_angle_deg: r.curvature_angle,
            hull_max_diagonal: r.hull_max_diagonal * l,
            max_aspect_ratio: r.max_aspect_ratio,
        }
    }

    pub fn fs_params(&self) -> FsParams {
        FsParams {
            c_tau: self.solver.supg,
            rho: self.flow.rho,
            beach: BeachParams {
                onset: self.beach.x_d,
                length: self.beach.l_d,
            },
            damping_rate: self.beach.rate.unwrap_or((GRAVITY * self.hull.length).sqrt()),
            quad_order: self.solver.quad_order,
        }
    }

    pub fn quad_settings(&self) -> QuadSettings {
        QuadSettings::default()
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            newton: NewtonConfig {
                rel_tol: s.tol,
                abs_tol: s.abs_tol,
                max_iterations: s.max_iterations,
                reassemble_rate: s.reassemble_rate,
            },
            bdf: BdfSettings {
                order: s.order,
                dt_initial: s.dt,
                dt_min: s.dt_min,
                dt_max: s.dt_max,
                easy_iterations: s.easy_iterations,
            },
            jacobian: match s.jacobian {
                JacobianKind::FiniteDifference => JacobianStrategy::FiniteDifference,
                JacobianKind::Directional => JacobianStrategy::Directional,
            },
        }
    }

    /// Semi-axes of the spheroid.
    pub fn semi_axes(&self) -> Vec3 {
        Vec3::new(0.5 * self.hull.length, self.hull.radius, self.hull.radius)
    }
}
