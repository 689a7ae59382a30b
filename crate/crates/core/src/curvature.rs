//! Extrinsic geometry of a radial graph slice `X = u(x) x`.
//!
//! Sign conventions: the normal `nu` is past-directed with `<nu, nu>_L = -1`
//! and `H = <nu, nu>_L tr(A) = -g^{ij} h_ij`, so the hyperboloid of radius
//! `r0` has `H = n / r0 > 0`.

use crate::domain::{Grid, MetricAtPoint};
use crate::error::{Error, Result};
use crate::exec::{map_nodes, Exec};
use crate::field::{DifferentialPack, NodeDiff};
use crate::linalg::{self, Mat2, ZERO2};

/// Induced metric `g_ij = u^2 sigma_ij - u_i u_j` and its closed-form inverse
/// `g^{ij} = u^{-2} (sigma^{ij} + u^i u^j / (u^2 v^2))`.
pub fn induced_metric(n: usize, u: f64, d: &NodeDiff, metric: &MetricAtPoint) -> Result<(Mat2, Mat2)> {
    let u2 = u * u;
    let up = d.grad_up(n, &metric.sigma_inv);
    let v2 = d.v * d.v;
    let mut g = ZERO2;
    let mut g_inv = ZERO2;
    for i in 0..n {
        for j in 0..n {
            // u_i = u phi_i
            g[i][j] = u2 * (metric.sigma[i][j] - d.grad[i] * d.grad[j]);
            g_inv[i][j] = (metric.sigma_inv[i][j] + up[i] * up[j] / v2) / u2;
        }
    }
    if !(linalg::sym_min_eig(n, &g) > 0.0) || !d.v.is_finite() {
        return Err(Error::Spacelike {
            nodes: Vec::new(),
            max_grad: d.grad_norm_sq.sqrt(),
        });
    }
    Ok((g, g_inv))
}

/// `h_ij = (1/v) (2 u_i u_j / u - u_ij - u sigma_ij)` with the covariant
/// `u_ij = u (phi_ij + phi_i phi_j)`.
pub fn second_fundamental(n: usize, u: f64, d: &NodeDiff, metric: &MetricAtPoint) -> Mat2 {
    let mut h = ZERO2;
    for i in 0..n {
        for j in 0..n {
            let ui_uj_over_u = u * d.grad[i] * d.grad[j];
            let u_ij = u * (d.hess[i][j] + d.grad[i] * d.grad[j]);
            h[i][j] = (2.0 * ui_uj_over_u - u_ij - u * metric.sigma[i][j]) / d.v;
        }
    }
    h
}

/// Mean curvature by the scalar formula `e^{-phi} v^{-1} (n + tilde_sigma^{ij} phi_ij)`.
pub fn mean_curvature_scalar(n: usize, phi: f64, d: &NodeDiff, metric: &MetricAtPoint) -> f64 {
    (-phi).exp() * d.mean_convexity_denominator(n, &metric.sigma_inv) / d.v
}

/// Mean curvature as the trace `-g^{ij} h_ij`.
pub fn mean_curvature_trace(n: usize, g_inv: &Mat2, h: &Mat2) -> f64 {
    -linalg::contract(n, g_inv, h)
}

/// Both mean curvature routes on identical discrete inputs.
pub fn mean_curvature(n: usize, phi: f64, d: &NodeDiff, metric: &MetricAtPoint) -> Result<(f64, f64)> {
    let u = phi.exp();
    let (_, g_inv) = induced_metric(n, u, d, metric)?;
    let h = second_fundamental(n, u, d, metric);
    Ok((
        mean_curvature_scalar(n, phi, d, metric),
        mean_curvature_trace(n, &g_inv, &h),
    ))
}

/// Support function and normal speeds of the flow at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportSpeed {
    /// `w = <X, nu>_L = u / v`.
    pub w: f64,
    /// Normal speed `Phi = 1 / (|X|^alpha H)` with `|X| = u`.
    pub speed: f64,
    /// `Psi = Phi / w = v / (u^{1+alpha} H)`.
    pub psi: f64,
}

pub fn support_and_speed(u: f64, v: f64, mean_curvature: f64, alpha: f64) -> Result<SupportSpeed> {
    if !(mean_curvature > 0.0) {
        return Err(Error::MeanConvexity {
            nodes: Vec::new(),
            min_denominator: mean_curvature,
        });
    }
    let speed = u.powf(-alpha) / mean_curvature;
    let w = u / v;
    Ok(SupportSpeed {
        w,
        speed,
        psi: speed / w,
    })
}

/// Geometry of the slice at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGeometry {
    pub g: Mat2,
    pub g_inv: Mat2,
    pub h: Mat2,
    /// Scalar-formula mean curvature (route A).
    pub mean_curvature: f64,
    /// Trace mean curvature (route B).
    pub mean_curvature_trace: f64,
    /// `|A|^2 = h^i_j h^j_i`.
    pub a_norm_sq: f64,
    pub w: f64,
    /// `sqrt(det g)` per unit chart measure: `u^n v sqrt(det sigma)`.
    pub area_element: f64,
}

/// Extrinsic data of a whole slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSlice {
    pub nodes: Vec<NodeGeometry>,
    /// `H^n(M_t)`.
    pub hausdorff: f64,
}

/// Largest tolerated disagreement between the two mean curvature routes,
/// relative to `max(1, |H|)`.
pub const ROUTE_TOLERANCE: f64 = 1e-10;

pub fn node_geometry(n: usize, phi: f64, d: &NodeDiff, metric: &MetricAtPoint) -> Result<NodeGeometry> {
    let u = phi.exp();
    let (g, g_inv) = induced_metric(n, u, d, metric)?;
    let h = second_fundamental(n, u, d, metric);
    let mean_curvature = mean_curvature_scalar(n, phi, d, metric);
    let trace = mean_curvature_trace(n, &g_inv, &h);
    let mismatch = (mean_curvature - trace).abs();
    if mismatch > ROUTE_TOLERANCE * mean_curvature.abs().max(1.0) {
        return Err(Error::CurvatureMismatch(mismatch));
    }
    let shape = linalg::mul(n, &g_inv, &h);
    let mut a_norm_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            a_norm_sq += shape[i][j] * shape[j][i];
        }
    }
    Ok(NodeGeometry {
        g,
        g_inv,
        h,
        mean_curvature,
        mean_curvature_trace: trace,
        a_norm_sq,
        w: u / d.v,
        area_element: u.powi(n as i32) * d.v * metric.sqrt_det,
    })
}

/// `H^n(M_t) = sum u^n v * weight`; the weights already carry `sqrt(det sigma)`.
pub fn hausdorff_measure(phi: &[f64], pack: &DifferentialPack, grid: &Grid) -> f64 {
    let n = grid.dimension() as i32;
    phi.iter()
        .zip(&pack.nodes)
        .zip(&grid.weights)
        .map(|((p, d), w)| (n as f64 * p).exp() * d.v * w)
        .sum()
}

/// `-integral u^{-alpha} dH^n`, the first variation of area along the flow.
pub fn area_variation(phi: &[f64], pack: &DifferentialPack, grid: &Grid, alpha: f64) -> f64 {
    let n = grid.dimension() as f64;
    -phi.iter()
        .zip(&pack.nodes)
        .zip(&grid.weights)
        .map(|((p, d), w)| ((n - alpha) * p).exp() * d.v * w)
        .sum::<f64>()
}

pub fn slice(phi: &[f64], pack: &DifferentialPack, grid: &Grid) -> Result<CurvatureSlice> {
    slice_with(phi, pack, grid, Exec::default())
}

pub fn slice_with(phi: &[f64], pack: &DifferentialPack, grid: &Grid, exec: Exec) -> Result<CurvatureSlice> {
    let n = grid.dimension();
    let nodes = map_nodes(exec, grid.len(), |i| {
        node_geometry(n, phi[i], &pack.nodes[i], &grid.metrics[i])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(CurvatureSlice {
        nodes,
        hausdorff: hausdorff_measure(phi, pack, grid),
    })
}
