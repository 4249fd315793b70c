use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Result};
use crate::linalg::dot;

/// `E(beta, t) = sum_{Z_i >= t} e^{beta^T Psi_i} Psi_i / sum_{Z_i >= t} e^{beta^T Psi_i}`
/// at each grid time (`None` for an empty risk set). Rows are produced on
/// demand by `row(i, out)`, so large reference samples need not be stored
/// as a design matrix.
pub fn risk_mean_curve<F: FnMut(usize, &mut [f64])>(
    times: &[f64],
    beta: &[f64],
    grid: &[f64],
    mut row: F,
) -> Result<Vec<Option<Vec<f64>>>> {
    let dim = beta.len();
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut grid_order: Vec<usize> = (0..grid.len()).collect();
    grid_order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));

    let mut out = vec![None; grid.len()];
    let (mut shift, mut s0) = (f64::NEG_INFINITY, 0.0);
    // Running weighted mean: exact when every row is the same.
    let mut mean = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    let mut pos = 0;
    for &g in &grid_order {
        let t = grid[g];
        while pos < order.len() && times[order[pos]] >= t {
            row(order[pos], &mut buf);
            let eta = dot(beta, &buf);
            if eta > shift {
                let r = if shift == f64::NEG_INFINITY {
                    0.0
                } else {
                    libm::exp(shift - eta)
                };
                s0 *= r;
                shift = eta;
            }
            let w = libm::exp(eta - shift);
            s0 += w;
            let frac = w / s0;
            for (m, x) in mean.iter_mut().zip(&buf) {
                *m += frac * (x - *m);
            }
            pos += 1;
        }
        if s0 > 0.0 {
            out[g] = Some(mean.clone());
        }
    }
    Ok(out)
}

/// `max_t ||a(t) - b(t)||_inf` over grid points where both are defined.
pub fn sup_deviation(a: &[Option<Vec<f64>>], b: &[Option<Vec<f64>>]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            check_len(x.len(), y.len())?;
            for (u, v) in x.iter().zip(y) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    Ok(worst)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    if x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("rate table", "needs two or more positive points"));
    }
    let lx: Vec<f64> = x.iter().map(|v| libm::log(*v)).collect();
    let ly: Vec<f64> = y.iter().map(|v| libm::log(*v)).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate table", "needs distinct x values"));
    }
    Ok(sxy / sxx)
}

/// Sample mean and its standard error.
pub fn mean_and_std_error(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}
