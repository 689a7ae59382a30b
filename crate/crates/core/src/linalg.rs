//! Tiny dense helpers for the 1x1 / 2x2 tensors that live at every node.
//!
//! One-dimensional quantities are stored in the top-left entry with the rest
//! left at zero, so every loop runs over `0..n`.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const ZERO2: Mat2 = [[0.0; 2]; 2];

pub fn identity(n: usize) -> Mat2 {
    let mut m = ZERO2;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn det(n: usize, m: &Mat2) -> f64 {
    if n == 1 {
        m[0][0]
    } else {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

pub fn inverse(n: usize, m: &Mat2) -> Mat2 {
    if n == 1 {
        return [[1.0 / m[0][0], 0.0], [0.0, 0.0]];
    }
    let d = det(2, m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

pub fn mul(n: usize, a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = ZERO2;
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mat_vec(n: usize, a: &Mat2, x: &Vec2) -> Vec2 {
    let mut y = [0.0; 2];
    for i in 0..n {
        y[i] = (0..n).map(|k| a[i][k] * x[k]).sum();
    }
    y
}

/// Full contraction `a^{ij} b_{ij}`.
pub fn contract(n: usize, a: &Mat2, b: &Mat2) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

pub fn dot(n: usize, x: &Vec2, y: &Vec2) -> f64 {
    (0..n).map(|i| x[i] * y[i]).sum()
}

/// Max-norm of `a - b` over the leading n x n block.
pub fn max_abs_diff(n: usize, a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_max_eig(n: usize, m: &Mat2) -> f64 {
    if n == 1 {
        return m[0][0];
    }
    let tr = 0.5 * (m[0][0] + m[1][1]);
    let d = 0.5 * (m[0][0] - m[1][1]);
    tr + (d * d + m[0][1] * m[0][1]).sqrt()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn sym_min_eig(n: usize, m: &Mat2) -> f64 {
    if n == 1 {
        return m[0][0];
    }
    let tr = 0.5 * (m[0][0] + m[1][1]);
    let d = 0.5 * (m[0][0] - m[1][1]);
    tr - (d * d + m[0][1] * m[0][1]).sqrt()
}
