//! Chart geometry of a geodesic disk in the hyperbolic space.
//!
//! The hyperboloid `x_1^2 + .. + x_n^2 - x_{n+1}^2 = -1` is charted by
//! projecting onto its first `n` coordinates. For `n = 2` we use polar
//! coordinates `(r, theta)` of the projection, which gives
//!
//! ```text
//! sigma = dr^2 / (1 + r^2) + r^2 dtheta^2
//! ```
//!
//! and the chart disk `r <= R` is the geodesic disk of radius `asinh(R)`
//! around the pole. For `n = 1` the chart is arclength `rho` along the
//! hyperbola, so `sigma = 1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2, ZERO2};

/// Input description of the base domain and its resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub dimension: usize,
    pub radius: f64,
    /// Node count along the radial direction (`n = 2`) or along the segment (`n = 1`).
    pub radial_nodes: usize,
    /// Node count around the circle; ignored for `n = 1`.
    pub angular_nodes: usize,
}

pub const MIN_NODES: usize = 8;

impl DomainSpec {
    pub fn segment(radius: f64, nodes: usize) -> Self {
        Self {
            dimension: 1,
            radius,
            radial_nodes: nodes,
            angular_nodes: 1,
        }
    }

    pub fn disk(radius: f64, radial_nodes: usize, angular_nodes: usize) -> Self {
        Self {
            dimension: 2,
            radius,
            radial_nodes,
            angular_nodes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dimension == 1 || self.dimension == 2) {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1 or 2, got {}",
                self.dimension
            )));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "chart radius must be positive, got {}",
                self.radius
            )));
        }
        if self.radial_nodes < MIN_NODES {
            return Err(Error::InvalidDomain(format!(
                "radial node count {} is below the minimum {MIN_NODES}",
                self.radial_nodes
            )));
        }
        if self.dimension == 2 {
            if self.angular_nodes < MIN_NODES {
                return Err(Error::InvalidDomain(format!(
                    "angular node count {} is below the minimum {MIN_NODES}",
                    self.angular_nodes
                )));
            }
            // the across-the-pole stencil pairs theta with theta + pi
            if self.angular_nodes % 2 != 0 {
                return Err(Error::InvalidDomain(format!(
                    "angular node count must be even, got {}",
                    self.angular_nodes
                )));
            }
        }
        Ok(())
    }

    /// Exact `n`-dimensional measure of the geodesic disk.
    pub fn exact_area(&self) -> f64 {
        match self.dimension {
            1 => 2.0 * self.radius,
            _ => 2.0 * PI * ((1.0 + self.radius * self.radius).sqrt() - 1.0),
        }
    }

    fn check_in_chart(&self, p: &ChartPoint) -> Result<()> {
        const SLACK: f64 = 1e-12;
        let ok = match self.dimension {
            1 => p.coords[0].abs() <= self.radius * (1.0 + SLACK),
            _ => p.coords[0] >= 0.0 && p.coords[0] <= self.radius * (1.0 + SLACK),
        };
        if ok && p.coords.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::OutOfChart {
                coords: p.coords[..self.dimension].to_vec(),
                radius: self.radius,
            })
        }
    }

    /// Pull-back of the Lorentzian metric to the chart at `p`.
    pub fn metric_at(&self, p: &ChartPoint) -> Result<MetricAtPoint> {
        self.check_in_chart(p)?;
        Ok(match self.dimension {
            1 => MetricAtPoint::flat_line(),
            _ => MetricAtPoint::polar(p.coords[0]),
        })
    }

    /// Outward sigma-unit conormal at a boundary point.
    pub fn conormal_at(&self, p: &ChartPoint) -> Result<Vec2> {
        self.check_in_chart(p)?;
        let tol = 1e-12 * self.radius.max(1.0);
        match self.dimension {
            1 => {
                let rho = p.coords[0];
                if (rho.abs() - self.radius).abs() > tol {
                    return Err(Error::NotBoundary(vec![rho]));
                }
                Ok([rho.signum(), 0.0])
            }
            _ => {
                if (p.coords[0] - self.radius).abs() > tol {
                    return Err(Error::NotBoundary(p.coords.to_vec()));
                }
                Ok([(1.0 + self.radius * self.radius).sqrt(), 0.0])
            }
        }
    }
}

/// A point in chart coordinates: `[rho, _]` for `n = 1`, `[r, theta]` for `n = 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub coords: Vec2,
}

impl ChartPoint {
    pub fn line(rho: f64) -> Self {
        Self { coords: [rho, 0.0] }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Self { coords: [r, theta] }
    }

    /// Position on the hyperboloid in `R^{n+1}_1` (ambient coordinates, last
    /// entry timelike). Unused slots are zero.
    pub fn embed(&self, n: usize) -> [f64; 3] {
        match n {
            1 => {
                let rho = self.coords[0];
                [rho.sinh(), rho.cosh(), 0.0]
            }
            _ => {
                let [r, th] = self.coords;
                [r * th.cos(), r * th.sin(), (1.0 + r * r).sqrt()]
            }
        }
    }
}

/// Metric data of the base manifold at one chart point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricAtPoint {
    pub sigma: Mat2,
    pub sigma_inv: Mat2,
    pub sqrt_det: f64,
    /// `christoffel[k][i][j]` is the symbol with upper index `k`.
    pub christoffel: [Mat2; 2],
}

impl MetricAtPoint {
    pub fn flat_line() -> Self {
        Self {
            sigma: [[1.0, 0.0], [0.0, 0.0]],
            sigma_inv: [[1.0, 0.0], [0.0, 0.0]],
            sqrt_det: 1.0,
            christoffel: [ZERO2, ZERO2],
        }
    }

    /// Closed-form projected-polar metric. Valid for any `r != 0`; the chart
    /// check lives in [`DomainSpec::metric_at`].
    pub fn polar(r: f64) -> Self {
        let q = 1.0 + r * r;
        let mut christoffel = [ZERO2, ZERO2];
        christoffel[0][0][0] = -r / q;
        christoffel[0][1][1] = -r * q;
        christoffel[1][0][1] = 1.0 / r;
        christoffel[1][1][0] = 1.0 / r;
        Self {
            sigma: [[1.0 / q, 0.0], [0.0, r * r]],
            sigma_inv: [[q, 0.0], [0.0, 1.0 / (r * r)]],
            sqrt_det: r.abs() / q.sqrt(),
            christoffel,
        }
    }
}

/// Riemann tensor `R_{abcd}` of the polar chart assembled from Christoffel
/// symbols whose radial derivatives are taken by centered differences of
/// step `h`. The metric does not depend on theta.
pub fn riemann_fd(r: f64, h: f64) -> [[[[f64; 2]; 2]; 2]; 2] {
    let m = MetricAtPoint::polar(r);
    let plus = MetricAtPoint::polar(r + h);
    let minus = MetricAtPoint::polar(r - h);
    let gamma = &m.christoffel;
    // d_c Gamma^a_{db}, only c = 0 is nonzero
    let d_gamma = |c: usize, a: usize, d: usize, b: usize| -> f64 {
        if c == 0 {
            (plus.christoffel[a][d][b] - minus.christoffel[a][d][b]) / (2.0 * h)
        } else {
            0.0
        }
    };
    let mut upper = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    let mut v = d_gamma(c, a, d, b) - d_gamma(d, a, c, b);
                    for e in 0..2 {
                        v += gamma[a][c][e] * gamma[e][d][b] - gamma[a][d][e] * gamma[e][c][b];
                    }
                    upper[a][b][c][d] = v;
                }
            }
        }
    }
    let mut lowered = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    lowered[a][b][c][d] = (0..2).map(|e| m.sigma[a][e] * upper[e][b][c][d]).sum();
                }
            }
        }
    }
    lowered
}

/// Constant-curvature model `R_{abcd} = sigma_ad sigma_bc - sigma_ac sigma_bd`.
pub fn riemann_model(r: f64) -> [[[[f64; 2]; 2]; 2]; 2] {
    let s = MetricAtPoint::polar(r).sigma;
    let mut out = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    out[a][b][c][d] = s[a][d] * s[b][c] - s[a][c] * s[b][d];
                }
            }
        }
    }
    out
}

/// Gauss curvature from the finite-difference Riemann tensor.
pub fn gauss_curvature_fd(r: f64, h: f64) -> f64 {
    let riem = riemann_fd(r, h);
    let m = MetricAtPoint::polar(r);
    riem[0][1][0][1] / linalg::det(2, &m.sigma)
}

/// Node of the structured grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode {
    pub point: ChartPoint,
    /// Radial index (`n = 2`) or segment index (`n = 1`).
    pub ring: usize,
    /// Angular index; always 0 for `n = 1`.
    pub sector: usize,
    pub boundary: bool,
}

/// Where a boundary node meets `dM` and the conormal there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub node: usize,
    pub face: ChartPoint,
    pub conormal: Vec2,
}

/// Structured node set with cached metric data, quadrature and conormals.
///
/// `n = 1`: uniform nodes on `[-R, R]` including both endpoints.
/// `n = 2`: half-cell-offset polar grid `r_j = (j + 1/2) h_r`, periodic in
/// theta, no node at the pole. Node index is `ring * angular + sector`.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: DomainSpec,
    pub h_r: f64,
    pub h_theta: f64,
    pub nodes: Vec<GridNode>,
    pub metrics: Vec<MetricAtPoint>,
    pub weights: Vec<f64>,
    pub boundary: Vec<BoundaryFace>,
    angular_cutoff: Vec<usize>,
}

pub fn build_grid(spec: DomainSpec) -> Result<Grid> {
    spec.validate()?;
    let radius = spec.radius;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut boundary = Vec::new();
    let (h_r, h_theta, angular_cutoff);
    match spec.dimension {
        1 => {
            let count = spec.radial_nodes;
            h_r = 2.0 * radius / (count - 1) as f64;
            h_theta = 0.0;
            angular_cutoff = Vec::new();
            for i in 0..count {
                let rho = if i == count - 1 {
                    radius
                } else {
                    -radius + i as f64 * h_r
                };
                let is_boundary = i == 0 || i == count - 1;
                nodes.push(GridNode {
                    point: ChartPoint::line(rho),
                    ring: i,
                    sector: 0,
                    boundary: is_boundary,
                });
                weights.push(if is_boundary { 0.5 * h_r } else { h_r });
                if is_boundary {
                    let face = ChartPoint::line(rho);
                    boundary.push(BoundaryFace {
                        node: i,
                        face,
                        conormal: spec.conormal_at(&face)?,
                    });
                }
            }
        }
        _ => {
            let (nr, nt) = (spec.radial_nodes, spec.angular_nodes);
            h_r = radius / nr as f64;
            h_theta = 2.0 * PI / nt as f64;
            angular_cutoff = (0..nr)
                .map(|j| {
                    let resolved = (PI * (j as f64 + 0.5)).floor() as usize;
                    resolved.clamp(1, nt / 2)
                })
                .collect();
            for j in 0..nr {
                let r = (j as f64 + 0.5) * h_r;
                for k in 0..nt {
                    let theta = k as f64 * h_theta;
                    let idx = nodes.len();
                    let is_boundary = j == nr - 1;
                    nodes.push(GridNode {
                        point: ChartPoint::polar(r, theta),
                        ring: j,
                        sector: k,
                        boundary: is_boundary,
                    });
                    let sqrt_det = r / (1.0 + r * r).sqrt();
                    weights.push(h_r * h_theta * sqrt_det);
                    if is_boundary {
                        let face = ChartPoint::polar(radius, theta);
                        boundary.push(BoundaryFace {
                            node: idx,
                            face,
                            conormal: spec.conormal_at(&face)?,
                        });
                    }
                }
            }
        }
    }
    let metrics = nodes
        .iter()
        .map(|node| spec.metric_at(&node.point))
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid {
        spec,
        h_r,
        h_theta,
        nodes,
        metrics,
        weights,
        boundary,
        angular_cutoff,
    })
}

impl Grid {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn radial_count(&self) -> usize {
        self.spec.radial_nodes
    }

    /// Angular node count (1 for `n = 1`).
    pub fn angular_count(&self) -> usize {
        if self.spec.dimension == 1 {
            1
        } else {
            self.spec.angular_nodes
        }
    }

    pub fn index(&self, ring: usize, sector: usize) -> usize {
        ring * self.angular_count() + sector
    }

    /// Discrete measure of the base domain.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Quadrature of nodal values against the base measure.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Highest angular Fourier mode kept on ring `j` by the pole filter.
    pub fn angular_cutoff(&self, ring: usize) -> usize {
        self.angular_cutoff.get(ring).copied().unwrap_or(0)
    }

    /// Rings whose angular resolution is limited by the pole filter.
    pub fn filtered_rings(&self) -> usize {
        let half = self.spec.angular_nodes / 2;
        self.angular_cutoff.iter().take_while(|&&m| m < half).count()
    }

    /// Angular spacing that governs stability on ring `j` once modes above the
    /// cutoff are removed: the grid spacing scaled so that `4 / spacing^2` is
    /// the largest retained symbol of the second difference.
    pub fn effective_angular_spacing(&self, ring: usize) -> f64 {
        let m = self.angular_cutoff(ring) as f64;
        self.h_theta / (0.5 * m * self.h_theta).sin()
    }

    /// Characteristic mesh width used in discretization tolerances.
    pub fn mesh_width(&self) -> f64 {
        self.h_r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_specs() {
        assert!(build_grid(DomainSpec { dimension: 3, ..DomainSpec::segment(1.0, 10) }).is_err());
        assert!(build_grid(DomainSpec::segment(0.0, 10)).is_err());
        assert!(build_grid(DomainSpec::segment(-1.0, 10)).is_err());
        assert!(build_grid(DomainSpec::segment(1.0, 7)).is_err());
        assert!(build_grid(DomainSpec::disk(1.0, 8, 6)).is_err());
        assert!(build_grid(DomainSpec::disk(1.0, 7, 8)).is_err());
        assert!(build_grid(DomainSpec::disk(1.0, 8, 9)).is_err());
    }

    #[test]
    fn segment_nodes_and_conormals() {
        let g = build_grid(DomainSpec::segment(1.0, 11)).unwrap();
        assert_eq!(g.len(), 11);
        for (i, node) in g.nodes.iter().enumerate() {
            assert_relative_eq!(node.point.coords[0], -1.0 + 0.2 * i as f64, epsilon = 1e-14);
        }
        assert_eq!(g.boundary.len(), 2);
        assert_eq!(g.boundary[0].conormal, [-1.0, 0.0]);
        assert_eq!(g.boundary[1].conormal, [1.0, 0.0]);
        assert_relative_eq!(g.total_weight(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn offset_polar_nodes() {
        let g = build_grid(DomainSpec::disk(1.0, 8, 8)).unwrap();
        let radii: Vec<f64> = (0..8).map(|j| g.nodes[g.index(j, 0)].point.coords[0]).collect();
        for (j, r) in radii.iter().enumerate() {
            assert_relative_eq!(*r, (2 * j + 1) as f64 / 16.0, epsilon = 1e-15);
        }
        assert!(g.nodes.iter().all(|n| n.point.coords[0] > 0.0));
        assert_eq!(g.boundary.len(), 8);
    }

    #[test]
    fn metric_closed_form_at_unit_radius() {
        let spec = DomainSpec::disk(2.0, 8, 8);
        let m = spec.metric_at(&ChartPoint::polar(1.0, 0.3)).unwrap();
        assert_relative_eq!(m.sigma[0][0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.sigma[1][1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.sqrt_det, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(m.christoffel[0][0][0], -0.5, epsilon = 1e-15);
        assert_relative_eq!(m.christoffel[0][1][1], -2.0, epsilon = 1e-15);
        assert_relative_eq!(m.christoffel[1][0][1], 1.0, epsilon = 1e-15);
        assert!(spec.metric_at(&ChartPoint::polar(2.5, 0.0)).is_err());
        assert!(spec.metric_at(&ChartPoint::polar(-0.1, 0.0)).is_err());
    }

    #[test]
    fn metric_matches_ambient_pullback() {
        // pull back <.,.>_L through the embedding with centered differences
        let (r, th, e) = (1.0, 0.7, 1e-5);
        let p = |r: f64, th: f64| ChartPoint::polar(r, th).embed(2);
        let lorentz = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] - a[2] * b[2];
        let dr: Vec<f64> = (0..3).map(|i| (p(r + e, th)[i] - p(r - e, th)[i]) / (2.0 * e)).collect();
        let dt: Vec<f64> = (0..3).map(|i| (p(r, th + e)[i] - p(r, th - e)[i]) / (2.0 * e)).collect();
        let dr = [dr[0], dr[1], dr[2]];
        let dt = [dt[0], dt[1], dt[2]];
        let m = MetricAtPoint::polar(r);
        assert!((lorentz(dr, dr) - m.sigma[0][0]).abs() < 1e-9);
        assert!((lorentz(dt, dt) - m.sigma[1][1]).abs() < 1e-9);
        assert!(lorentz(dr, dt).abs() < 1e-9);
        let det = lorentz(dr, dr) * lorentz(dt, dt);
        assert!((det.sqrt() - m.sqrt_det).abs() < 1e-9);
    }

    #[test]
    fn christoffels_match_finite_difference_oracle() {
        // Gamma^k_ij = 1/2 sigma^{kl} (d_i sigma_lj + d_j sigma_li - d_l sigma_ij)
        let (r, e) = (1.0, 1e-5);
        let ds = |i: usize, a: usize, b: usize| -> f64 {
            if i == 0 {
                (MetricAtPoint::polar(r + e).sigma[a][b] - MetricAtPoint::polar(r - e).sigma[a][b])
                    / (2.0 * e)
            } else {
                0.0
            }
        };
        let m = MetricAtPoint::polar(r);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let oracle: f64 = (0..2)
                        .map(|l| 0.5 * m.sigma_inv[k][l] * (ds(i, l, j) + ds(j, l, i) - ds(l, i, j)))
                        .sum();
                    assert!(
                        (oracle - m.christoffel[k][i][j]).abs() < 1e-8,
                        "Gamma^{k}_{i}{j}: {oracle} vs {}",
                        m.christoffel[k][i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn near_pole_metric_is_euclidean_polar() {
        let m = MetricAtPoint::polar(1e-4);
        assert_relative_eq!(m.sigma[0][0], 1.0, epsilon = 1e-7);
        assert_relative_eq!(m.sigma[1][1], 1e-8, epsilon = 1e-20);
        assert_relative_eq!(m.christoffel[1][0][1] * 1e-4, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn conormals_are_unit() {
        for radius in [0.5, 1.0, 2.0] {
            let g = build_grid(DomainSpec::disk(radius, 8, 8)).unwrap();
            for b in &g.boundary {
                let m = g.spec().metric_at(&b.face).unwrap();
                let norm = m.sigma[0][0] * b.conormal[0] * b.conormal[0];
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
        let spec = DomainSpec::disk(2.0, 8, 8);
        assert_relative_eq!(spec.conormal_at(&ChartPoint::polar(2.0, 1.0)).unwrap()[0], 5f64.sqrt());
        assert_relative_eq!(
            DomainSpec::disk(1.0, 8, 8).conormal_at(&ChartPoint::polar(1.0, 0.0)).unwrap()[0],
            2f64.sqrt()
        );
        assert!(matches!(
            spec.conormal_at(&ChartPoint::polar(1.0, 0.0)),
            Err(Error::NotBoundary(_))
        ));
        assert_eq!(
            DomainSpec::segment(1.0, 9).conormal_at(&ChartPoint::line(1.0)).unwrap(),
            [1.0, 0.0]
        );
    }

    #[test]
    fn metric_is_spd_at_every_node() {
        let g = build_grid(DomainSpec::disk(1.5, 16, 16)).unwrap();
        for m in &g.metrics {
            assert!(linalg::sym_min_eig(2, &m.sigma) > 0.0);
            let p = linalg::mul(2, &m.sigma, &m.sigma_inv);
            assert!(linalg::max_abs_diff(2, &p, &linalg::identity(2)) < 1e-12);
            assert!((m.sqrt_det * m.sqrt_det - linalg::det(2, &m.sigma)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_converges_to_disk_area() {
        let exact = DomainSpec::disk(1.0, 8, 8).exact_area();
        assert_relative_eq!(exact, 2.0 * PI * (2f64.sqrt() - 1.0));
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| (build_grid(DomainSpec::disk(1.0, n, 16)).unwrap().total_weight() - exact).abs())
            .collect();
        assert!(errs[0] < 1e-2);
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9);
        }
    }

    #[test]
    fn pole_filter_cutoffs() {
        let g = build_grid(DomainSpec::disk(1.0, 64, 64)).unwrap();
        assert_eq!(g.angular_cutoff(0), 1);
        assert_eq!(g.angular_cutoff(1), 4);
        assert_eq!(g.angular_cutoff(63), 32);
        assert!(g.filtered_rings() > 0 && g.filtered_rings() < 64);
        assert_relative_eq!(g.effective_angular_spacing(63), g.h_theta, epsilon = 1e-14);
        assert!(g.effective_angular_spacing(0) > g.h_theta);
    }
}
