//! The evolving unknown `phi = log u` and its discrete derivatives.

use std::f64::consts::PI;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::exec::{map_nodes, Exec};
use crate::linalg::{self, Mat2, Vec2};

/// Which time variable a field is parametrized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// `phi = log u` in flow time `t`.
    Physical,
    /// `phi~ = log(u / Theta)` in rescaled time `s`.
    Rescaled,
}

/// Nodal values of `phi` at one time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphField {
    pub phi: Vec<f64>,
    pub time: f64,
    pub flavor: Flavor,
}

impl GraphField {
    pub fn new(phi: Vec<f64>, time: f64, flavor: Flavor) -> Self {
        Self { phi, time, flavor }
    }

    pub fn constant(grid: &Grid, value: f64, flavor: Flavor) -> Self {
        Self::new(vec![value; grid.len()], 0.0, flavor)
    }

    pub fn u(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p.exp()).collect()
    }

    pub fn min(&self) -> f64 {
        self.phi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn non_finite_nodes(&self) -> Vec<usize> {
        self.phi
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_finite())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Field values padded with the ghost layer used by the centered stencils.
///
/// `n = 1`: one ghost node beyond each end of the segment.
/// `n = 2`: one ghost ring outside `r = R`; ring `-1` is resolved across the
/// pole, `(-1, k) -> (0, k + N_theta / 2)`.
#[derive(Debug, Clone)]
pub struct GhostedField {
    values: Vec<f64>,
    radial: usize,
    angular: usize,
    dimension: usize,
}

impl GhostedField {
    /// Pads `phi` and fills the ghosts by reflection through the boundary, which
    /// makes the centered conormal difference vanish there.
    pub fn reflect(phi: &[f64], grid: &Grid) -> Self {
        let radial = grid.radial_count();
        let angular = grid.angular_count();
        let dimension = grid.dimension();
        let values = if dimension == 1 {
            let mut v = Vec::with_capacity(radial + 2);
            v.push(phi[1]);
            v.extend_from_slice(phi);
            v.push(phi[radial - 2]);
            v
        } else {
            let mut v = Vec::with_capacity((radial + 1) * angular);
            v.extend_from_slice(phi);
            v.extend_from_slice(&phi[(radial - 1) * angular..]);
            v
        };
        Self {
            values,
            radial,
            angular,
            dimension,
        }
    }

    /// Value at segment index `i` in `-1..=N` (`n = 1`).
    #[inline]
    pub fn line(&self, i: isize) -> f64 {
        self.values[(i + 1) as usize]
    }

    /// Value at ring `j` in `-1..=N_r`, any sector `k` (`n = 2`).
    #[inline]
    pub fn polar(&self, j: isize, k: isize) -> f64 {
        let nt = self.angular as isize;
        let (j, k) = if j < 0 { (0, k + nt / 2) } else { (j, k) };
        let k = k.rem_euclid(nt);
        self.values[j as usize * self.angular + k as usize]
    }

    /// The ghost values alone (one per boundary node, in boundary order).
    pub fn ghosts(&self) -> Vec<f64> {
        if self.dimension == 1 {
            vec![self.values[0], self.values[self.radial + 1]]
        } else {
            self.values[self.radial * self.angular..].to_vec()
        }
    }
}

/// Discrete first and covariant second derivatives at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeDiff {
    /// `D_i phi` in chart components.
    pub grad: Vec2,
    /// Covariant Hessian `phi_ij = d_i d_j phi - Gamma^k_ij d_k phi`.
    pub hess: Mat2,
    /// `|D phi|^2_sigma`.
    pub grad_norm_sq: f64,
    /// Lorentz factor `sqrt(1 - |D phi|^2)`; NaN when not spacelike.
    pub v: f64,
}

impl NodeDiff {
    /// Raised gradient `phi^i = sigma^{ij} phi_j`.
    pub fn grad_up(&self, n: usize, sigma_inv: &Mat2) -> Vec2 {
        linalg::mat_vec(n, sigma_inv, &self.grad)
    }

    /// `sigma^{ij} + phi^i phi^j / v^2`.
    pub fn tilde_sigma_inv(&self, n: usize, sigma_inv: &Mat2) -> Mat2 {
        let up = self.grad_up(n, sigma_inv);
        let v2 = self.v * self.v;
        let mut m = *sigma_inv;
        for i in 0..n {
            for j in 0..n {
                m[i][j] += up[i] * up[j] / v2;
            }
        }
        m
    }

    /// `n + (sigma^{ij} + phi^i phi^j / v^2) phi_ij`; equals `u v H`.
    pub fn mean_convexity_denominator(&self, n: usize, sigma_inv: &Mat2) -> f64 {
        n as f64 + linalg::contract(n, &self.tilde_sigma_inv(n, sigma_inv), &self.hess)
    }
}

/// Per-node derivatives of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialPack {
    pub nodes: Vec<NodeDiff>,
}

impl DifferentialPack {
    pub fn max_grad(&self) -> f64 {
        self.nodes
            .iter()
            .map(|d| d.grad_norm_sq.sqrt())
            .fold(0.0, f64::max)
    }
}

/// Second-order centered derivatives at node `idx`.
#[inline]
pub fn node_diff(ghosted: &GhostedField, grid: &Grid, idx: usize) -> NodeDiff {
    let node = &grid.nodes[idx];
    let metric = &grid.metrics[idx];
    let h = grid.h_r;
    let (grad, hess, n) = if grid.dimension() == 1 {
        let i = node.ring as isize;
        let (w, c, e) = (ghosted.line(i - 1), ghosted.line(i), ghosted.line(i + 1));
        let d = (e - w) / (2.0 * h);
        let dd = (e - 2.0 * c + w) / (h * h);
        ([d, 0.0], [[dd, 0.0], [0.0, 0.0]], 1)
    } else {
        let (j, k) = (node.ring as isize, node.sector as isize);
        let ht = grid.h_theta;
        let f = |dj: isize, dk: isize| ghosted.polar(j + dj, k + dk);
        let c = f(0, 0);
        let (e, w, nn, s) = (f(1, 0), f(-1, 0), f(0, 1), f(0, -1));
        let d_r = (e - w) / (2.0 * h);
        let d_t = (nn - s) / (2.0 * ht);
        let d_rr = (e - 2.0 * c + w) / (h * h);
        let d_tt = (nn - 2.0 * c + s) / (ht * ht);
        let d_rt = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4.0 * h * ht);
        let g = &metric.christoffel;
        let grad = [d_r, d_t];
        let mut hess = [[d_rr, d_rt], [d_rt, d_tt]];
        for (a, row) in hess.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                *entry -= g[0][a][b] * d_r + g[1][a][b] * d_t;
            }
        }
        (grad, hess, 2)
    };
    let up = linalg::mat_vec(n, &metric.sigma_inv, &grad);
    let grad_norm_sq = linalg::dot(n, &grad, &up);
    let v = if grad_norm_sq < 1.0 {
        (1.0 - grad_norm_sq).sqrt()
    } else {
        f64::NAN
    };
    NodeDiff {
        grad,
        hess,
        grad_norm_sq,
        v,
    }
}

/// Differentiates a ghost-filled field on every node.
///
/// Fails with [`Error::Spacelike`] when `|D phi|_sigma >= 1` anywhere.
pub fn differentiate(ghosted: &GhostedField, grid: &Grid) -> Result<DifferentialPack> {
    differentiate_with(ghosted, grid, Exec::default())
}

pub fn differentiate_with(ghosted: &GhostedField, grid: &Grid, exec: Exec) -> Result<DifferentialPack> {
    let nodes = map_nodes(exec, grid.len(), |i| node_diff(ghosted, grid, i));
    let bad: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, d)| !(d.grad_norm_sq < 1.0))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        let max_grad = nodes.iter().map(|d| d.grad_norm_sq.sqrt()).fold(0.0, f64::max);
        return Err(Error::Spacelike { nodes: bad, max_grad });
    }
    Ok(DifferentialPack { nodes })
}

/// Strict-inequality margin used by admissibility tests.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-12;

/// Summary of the spacelike and mean-convexity conditions on a slice.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AdmissibilityReport {
    pub min_denominator: f64,
    pub min_v: f64,
    pub max_grad: f64,
    pub spacelike: bool,
    pub mean_convex: bool,
    pub admissible: bool,
    pub spacelike_violations: Vec<usize>,
    pub convexity_violations: Vec<usize>,
}

/// Pure report; never fails. Works on packs that contain non-spacelike nodes.
pub fn check_admissible(field: &GraphField, pack: &DifferentialPack, grid: &Grid) -> AdmissibilityReport {
    let n = grid.dimension();
    debug_assert_eq!(field.phi.len(), pack.nodes.len());
    let mut min_denominator = f64::INFINITY;
    let mut min_v = f64::INFINITY;
    let mut max_grad: f64 = 0.0;
    let mut spacelike_violations = Vec::new();
    let mut convexity_violations = Vec::new();
    for (i, d) in pack.nodes.iter().enumerate() {
        let grad = d.grad_norm_sq.sqrt();
        max_grad = max_grad.max(grad);
        if !(grad < 1.0 - ADMISSIBILITY_MARGIN) {
            spacelike_violations.push(i);
            min_v = 0.0;
            continue;
        }
        min_v = min_v.min(d.v);
        let den = d.mean_convexity_denominator(n, &grid.metrics[i].sigma_inv);
        min_denominator = min_denominator.min(den);
        if !(den > ADMISSIBILITY_MARGIN) {
            convexity_violations.push(i);
        }
    }
    let spacelike = spacelike_violations.is_empty();
    let mean_convex = convexity_violations.is_empty();
    AdmissibilityReport {
        min_denominator,
        min_v,
        max_grad,
        spacelike,
        mean_convex,
        admissible: spacelike && mean_convex,
        spacelike_violations,
        convexity_violations,
    }
}

/// Largest admissible preset gradient, `sup |D phi_0|_sigma`.
pub const PRESET_GRADIENT_CAP: f64 = 0.5;

/// Initial data presets.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `u_0 = r_0` everywhere.
    Constant { u0: f64 },
    /// `u_0 = r_0 (1 + eps cos(pi r^2 / R^2))`, Neumann-compatible and smooth at the pole.
    Bump { r0: f64, epsilon: f64 },
    /// Nodal values of `phi_0` in grid order.
    Table(Vec<f64>),
}

impl InitialData {
    /// Analytic bound on `sup |D phi_0|_sigma` for the bump preset.
    pub fn bump_gradient_bound(radius: f64, epsilon: f64, dimension: usize) -> f64 {
        let metric_factor = if dimension == 1 {
            1.0
        } else {
            (1.0 + radius * radius).sqrt()
        };
        epsilon * 2.0 * PI * metric_factor / (radius * (1.0 - epsilon))
    }

    pub fn build(&self, grid: &Grid) -> Result<GraphField> {
        let radius = grid.spec().radius;
        let phi = match self {
            InitialData::Constant { u0 } => {
                if !(u0.is_finite() && *u0 > 0.0) {
                    return Err(Error::InvalidInitialData(format!("u0 must be positive, got {u0}")));
                }
                vec![u0.ln(); grid.len()]
            }
            InitialData::Bump { r0, epsilon } => {
                if !(r0.is_finite() && *r0 > 0.0) {
                    return Err(Error::InvalidInitialData(format!("r0 must be positive, got {r0}")));
                }
                if !(epsilon.is_finite() && *epsilon >= 0.0 && *epsilon < 1.0) {
                    return Err(Error::InvalidInitialData(format!(
                        "epsilon must lie in [0, 1), got {epsilon}"
                    )));
                }
                let bound = Self::bump_gradient_bound(radius, *epsilon, grid.dimension());
                if bound > PRESET_GRADIENT_CAP {
                    return Err(Error::InvalidInitialData(format!(
                        "bump amplitude {epsilon} allows sup|Dphi0| up to {bound:.4}, above {PRESET_GRADIENT_CAP}"
                    )));
                }
                grid.nodes
                    .iter()
                    .map(|node| {
                        let x = node.point.coords[0] / radius;
                        (r0 * (1.0 + epsilon * (PI * x * x).cos())).ln()
                    })
                    .collect()
            }
            InitialData::Table(values) => {
                if values.len() != grid.len() {
                    return Err(Error::InvalidInitialData(format!(
                        "table has {} values, grid has {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInitialData("table contains non-finite values".into()));
                }
                values.clone()
            }
        };
        Ok(GraphField::new(phi, 0.0, Flavor::Physical))
    }
}
