//! The scale function `Theta(t, c) = (-(alpha/n) t + e^{alpha c})^{1/alpha}`,
//! the change of time `dt/ds = Theta^alpha` and rescaled slice quantities.
//!
//! Along the rescaled time the scale collapses to `log Theta(t(s)) = c - s/n`,
//! which every routine here uses in place of the power form whenever `s` is
//! available.

use crate::curvature;
use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field::{differentiate, Flavor, GhostedField, GraphField};
use crate::linalg::{Mat2, ZERO2};

/// Exact spatially constant solution `phi(t) = (1/alpha) ln(-(alpha/n) t + e^{alpha c})`,
/// or `c - t/n` when `alpha = 0`.
pub fn radial_solution(alpha: f64, n: usize, c: f64, t: f64) -> f64 {
    let n = n as f64;
    if alpha == 0.0 {
        c - t / n
    } else {
        (-(alpha / n) * t + (alpha * c).exp()).ln() / alpha
    }
}

/// Rescaling constants derived from the initial slice.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScalePlan {
    pub alpha: f64,
    pub dimension: usize,
    pub c: f64,
    /// `inf phi_0`.
    pub phi_min: f64,
    /// `sup phi_0`.
    pub phi_max: f64,
}

impl ScalePlan {
    /// `c` defaults to the midpoint of `[inf phi_0, sup phi_0]`.
    pub fn new(alpha: f64, dimension: usize, phi_min: f64, phi_max: f64, c: Option<f64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha <= 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be <= 0, got {alpha}")));
        }
        if !(phi_min <= phi_max) {
            return Err(Error::InvalidParams(format!(
                "inf phi0 = {phi_min} exceeds sup phi0 = {phi_max}"
            )));
        }
        let c = c.unwrap_or(0.5 * (phi_min + phi_max));
        let slack = 1e-12 * (1.0 + phi_min.abs().max(phi_max.abs()));
        if !(c >= phi_min - slack && c <= phi_max + slack) {
            return Err(Error::InvalidParams(format!(
                "rescaling constant c = {c} outside [{phi_min}, {phi_max}]"
            )));
        }
        Ok(Self {
            alpha,
            dimension,
            c,
            phi_min,
            phi_max,
        })
    }

    pub fn from_field(alpha: f64, dimension: usize, field: &GraphField, c: Option<f64>) -> Result<Self> {
        Self::new(alpha, dimension, field.min(), field.max(), c)
    }

    fn n(&self) -> f64 {
        self.dimension as f64
    }

    /// `Theta^alpha = -(alpha/n) t + e^{alpha c}`, exact (no power taken).
    pub fn theta_pow_alpha(&self, t: f64) -> f64 {
        -(self.alpha / self.n()) * t + (self.alpha * self.c).exp()
    }

    pub fn log_theta(&self, t: f64) -> f64 {
        radial_solution(self.alpha, self.dimension, self.c, t)
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.log_theta(t).exp()
    }

    /// The exact radial solution started from `phi_0 = c`.
    pub fn exact_phi(&self, t: f64) -> f64 {
        self.log_theta(t)
    }

    /// `t(s)` solving `dt/ds = Theta(t)^alpha`, `t(0) = 0`.
    pub fn t_of_s(&self, s: f64) -> f64 {
        if self.alpha == 0.0 {
            return s;
        }
        let (a, n) = (self.alpha, self.n());
        -(n / a) * (a * self.c).exp() * (-a * s / n).exp_m1()
    }

    pub fn s_of_t(&self, t: f64) -> f64 {
        if self.alpha == 0.0 {
            return t;
        }
        let (a, n) = (self.alpha, self.n());
        -(n / a) * (-(a / n) * t * (-a * self.c).exp()).ln_1p()
    }

    /// `log Theta(t(s)) = c - s/n`.
    pub fn log_theta_at_s(&self, s: f64) -> f64 {
        self.c - s / self.n()
    }

    /// `log Theta(t, c') - log Theta(t, c)` at rescaled time `s`; the rescaled
    /// image of the radial solution started from `c'`.
    pub fn envelope_offset(&self, s: f64, c_prime: f64) -> f64 {
        if self.alpha == 0.0 {
            return c_prime - self.c;
        }
        let a = self.alpha;
        ((a * s / self.n()).exp() * (a * (c_prime - self.c)).exp_m1()).ln_1p() / a
    }

    /// Lower and upper maximum-principle envelopes for `phi~` at rescaled time `s`.
    pub fn rescaled_envelopes(&self, s: f64) -> (f64, f64) {
        (
            self.envelope_offset(s, self.phi_min),
            self.envelope_offset(s, self.phi_max),
        )
    }

    /// Physical-time envelopes for `phi` at time `t`.
    pub fn physical_envelopes(&self, t: f64) -> (f64, f64) {
        (
            radial_solution(self.alpha, self.dimension, self.phi_min, t),
            radial_solution(self.alpha, self.dimension, self.phi_max, t),
        )
    }

    /// Both clocks for a field stamped in either time variable.
    pub fn clock(&self, field: &GraphField) -> Clock {
        match field.flavor {
            Flavor::Physical => Clock {
                t: field.time,
                s: self.s_of_t(field.time),
            },
            Flavor::Rescaled => Clock {
                t: self.t_of_s(field.time),
                s: field.time,
            },
        }
    }

    /// `phi~ = phi - log Theta`, stamped in `s`.
    pub fn to_rescaled(&self, field: &GraphField) -> GraphField {
        match field.flavor {
            Flavor::Rescaled => field.clone(),
            Flavor::Physical => {
                let s = self.s_of_t(field.time);
                let shift = self.log_theta_at_s(s);
                GraphField::new(field.phi.iter().map(|p| p - shift).collect(), s, Flavor::Rescaled)
            }
        }
    }

    /// Inverse of [`ScalePlan::to_rescaled`].
    pub fn to_physical(&self, field: &GraphField) -> GraphField {
        match field.flavor {
            Flavor::Physical => field.clone(),
            Flavor::Rescaled => {
                let shift = self.log_theta_at_s(field.time);
                GraphField::new(
                    field.phi.iter().map(|p| p + shift).collect(),
                    self.t_of_s(field.time),
                    Flavor::Physical,
                )
            }
        }
    }
}

/// Flow time and rescaled time of one slice.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Clock {
    pub t: f64,
    pub s: f64,
}

/// Rescaled quantities at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledNode {
    pub u: f64,
    pub phi: f64,
    pub mean_curvature: f64,
    pub g: Mat2,
    pub h: Mat2,
    pub grad: [f64; 2],
}

/// A slice expressed in rescaled variables:
/// `u~ = u / Theta`, `H~ = H Theta`, `g~ = g / Theta^2`, `h~ = h / Theta`, `D phi~ = D phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledSlice {
    pub clock: Clock,
    pub theta: f64,
    pub nodes: Vec<RescaledNode>,
}

pub fn rescale_state(field: &GraphField, grid: &Grid, plan: &ScalePlan) -> Result<RescaledSlice> {
    let physical = plan.to_physical(field);
    let clock = plan.clock(field);
    let log_theta = plan.log_theta_at_s(clock.s);
    let theta = log_theta.exp();
    let pack = differentiate(&GhostedField::reflect(&physical.phi, grid), grid)?;
    let geo = curvature::slice(&physical.phi, &pack, grid)?;
    let n = grid.dimension();
    let nodes = physical
        .phi
        .iter()
        .zip(&pack.nodes)
        .zip(&geo.nodes)
        .map(|((phi, d), ng)| {
            let mut g = ZERO2;
            let mut h = ZERO2;
            for i in 0..n {
                for j in 0..n {
                    g[i][j] = ng.g[i][j] / (theta * theta);
                    h[i][j] = ng.h[i][j] / theta;
                }
            }
            RescaledNode {
                u: (phi - log_theta).exp(),
                phi: phi - log_theta,
                mean_curvature: ng.mean_curvature * theta,
                g,
                h,
                grad: d.grad,
            }
        })
        .collect();
    Ok(RescaledSlice { clock, theta, nodes })
}
