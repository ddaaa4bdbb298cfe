use crate::{Vec3, GRAVITY};
use std::f64::consts::PI;

/// Linear Airy wave travelling along +x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AiryWave {
    pub amplitude: f64,
    pub wavenumber: f64,
    pub omega: f64,
    pub depth: f64,
}

impl AiryWave {
    /// Wave with ω from the finite-depth dispersion relation.
    pub fn new(amplitude: f64, wavenumber: f64, depth: f64) -> Self {
        AiryWave {
            amplitude,
            wavenumber,
            omega: airy_dispersion(wavenumber, depth),
            depth,
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
}

/// `ω = √(g k tanh(k h))`.
pub fn airy_dispersion(k: f64, h: f64) -> f64 {
    (GRAVITY * k * (k * h).tanh()).sqrt()
}

/// Asymptotic potential at a point: uniform stream plus optional Airy wave,
/// both scaled by the start-up ramp.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSample {
    pub phi: f64,
    pub grad: Vec3,
    pub dphi_dt: f64,
    pub eta: f64,
    pub deta_dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticFlow {
    /// Stream speed along +x, m/s.
    pub u_inf: f64,
    pub wave: Option<AiryWave>,
    /// Duration of the `sin²` start-up ramp; `None` means fully developed.
    pub ramp_time: Option<f64>,
}

impl AsymptoticFlow {
    pub fn uniform(u_inf: f64) -> Self {
        AsymptoticFlow {
            u_inf,
            wave: None,
            ramp_time: None,
        }
    }

    pub fn at_rest() -> Self {
        Self::uniform(0.0)
    }

    /// Ramp factor and its time derivative.
    pub fn ramp(&self, t: f64) -> (f64, f64) {
        match self.ramp_time {
            Some(tr) if t < tr => {
                if t <= 0.0 {
                    return (0.0, 0.0);
                }
                let a = 0.5 * PI * t / tr;
                let (s, c) = a.sin_cos();
                (s * s, PI / tr * s * c)
            }
            _ => (1.0, 0.0),
        }
    }

    pub fn eval(&self, x: Vec3, t: f64) -> FlowSample {
        let (r, rdot) = self.ramp(t);
        let mut phi = self.u_inf * x.x;
        let mut grad = Vec3::new(self.u_inf, 0.0, 0.0);
        let mut dphi_dt = 0.0;
        let mut eta = 0.0;
        let mut deta_dt = 0.0;
        if let Some(w) = &self.wave {
            let (k, om, a, h) = (w.wavenumber, w.omega, w.amplitude, w.depth);
            // cosh(k(z+h))/sinh(kh) and sinh(k(z+h))/sinh(kh) without overflow
            let den = 1.0 - (-2.0 * k * h).exp();
            let e1 = (k * x.z).exp();
            let e2 = (-k * (x.z + 2.0 * h)).exp();
            let ch = (e1 + e2) / den;
            let sh = (e1 - e2) / den;
            let th = k * x.x - om * t;
            let (s, c) = th.sin_cos();
            phi += a * om / k * ch * s;
            grad += Vec3::new(a * om * ch * c, 0.0, a * om * sh * s);
            dphi_dt = -a * om * om / k * ch * c;
            eta = a * c;
            deta_dt = a * om * s;
        }
        FlowSample {
            phi: r * phi,
            grad: grad * r,
            dphi_dt: rdot * phi + r * dphi_dt,
            eta: r * eta,
            deta_dt: rdot * eta + r * deta_dt,
        }
    }

    /// Bernoulli constant of the asymptotic flow, evaluated at the origin.
    pub fn bernoulli_constant(&self, t: f64) -> f64 {
        let s = self.eval(Vec3::zeros(), t);
        s.dphi_dt + 0.5 * s.grad.norm_squared() + GRAVITY * s.eta
    }
}

/// Absorbing-beach zone: damping starts at `|x| = onset` and reaches full
/// strength `length` meters further out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeachParams {
    pub onset: f64,
    pub length: f64,
}

/// Beach coefficient `μ = (max(|x| − x_d, 0) / L_d)²`.
pub fn damping_mu(x: Vec3, beach: &BeachParams) -> f64 {
    let s = (x.x.abs() - beach.onset).max(0.0) / beach.length;
    s * s
}

/// Grid velocity: free-surface nodes move vertically, all others are fixed.
pub fn grid_velocity(zdot: f64, region: crate::meshkit::Region) -> Vec3 {
    if region == crate::meshkit::Region::FreeSurface {
        Vec3::new(0.0, 0.0, zdot)
    } else {
        Vec3::zeros()
    }
}
