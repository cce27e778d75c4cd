//! Small dense-linear-algebra helpers for the network and its backward pass.
//!
//! Matrices are row-major `rows x cols` slices. The dimensions involved are
//! tiny (a few hundred at most), so plain loops are the right tool.

/// y = W x, W is rows x cols row-major, x has length cols.
pub fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for (i, yi) in y.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x.iter()) {
            acc += a * b;
        }
        *yi = acc;
    }
}

/// y += Wᵀ x, W is rows x cols row-major, x has length rows, y length cols.
pub fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(y.len(), cols);
    for i in 0..rows {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (yj, wj) in y.iter_mut().zip(row.iter()) {
            *yj += wj * xi;
        }
    }
}

/// G += g xᵀ, G is rows x cols row-major, g length rows, x length cols.
pub fn outer_acc(grad: &mut [f64], rows: usize, cols: usize, g: &[f64], x: &[f64]) {
    debug_assert_eq!(grad.len(), rows * cols);
    debug_assert_eq!(g.len(), rows);
    debug_assert_eq!(x.len(), cols);
    for i in 0..rows {
        let gi = g[i];
        if gi == 0.0 {
            continue;
        }
        let row = &mut grad[i * cols..(i + 1) * cols];
        for (rj, xj) in row.iter_mut().zip(x.iter()) {
            *rj += gi * xj;
        }
    }
}

/// y += x element-wise.
pub fn add_assign(y: &mut [f64], x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
