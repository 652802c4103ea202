use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PropagationMatrix;
use crate::tensor::Tensor;

/// Row norms below this count as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;
/// Contribution of a zero output row whose input was not zero.
pub const CONV_RATIO_CAP: f64 = 1e6;

pub const SVD_TOLERANCE: f64 = 1e-10;
pub const SVD_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvRatio {
    pub value: f64,
    /// Rows that hit the cap.
    pub capped_rows: usize,
}

/// Mean over nodes of `‖h_next_i − h_prev_i‖ / ‖h_next_i‖`.
pub fn conv_ratio(prev: &Tensor, next: &Tensor) -> Result<ConvRatio> {
    if prev.shape() != next.shape() {
        return Err(Error::shape("conv_ratio", format!("{:?} vs {:?}", prev.shape(), next.shape())));
    }
    let n = next.rows();
    if n == 0 {
        return Err(Error::shape("conv_ratio", "needs at least one row"));
    }
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut sum = 0.0;
    let mut capped_rows = 0;
    for i in 0..n {
        let (a, b) = (prev.row(i), next.row(i));
        let delta = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt();
        let out = norm(b);
        if out < DEGENERATE_NORM {
            if delta >= DEGENERATE_NORM {
                sum += CONV_RATIO_CAP;
                capped_rows += 1;
            }
        } else {
            sum += delta / out;
        }
    }
    Ok(ConvRatio {
        value: sum / n as f64,
        capped_rows,
    })
}

/// Singular values in descending order by one-sided Jacobi rotations.
pub fn singular_values(m: &Tensor) -> Vec<f64> {
    let a = if m.rows() >= m.cols() { m.clone() } else { m.transpose() };
    let (rows, cols) = a.shape();
    let mut u: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| a.get(i, j)).collect()).collect();
    for _ in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for (x, y) in u[p].iter().zip(&u[q]) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= SVD_TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = u.split_at_mut(q);
                for (x, y) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    (*x, *y) = (c * *x - s * *y, s * *x + c * *y);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = u.iter().map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropy {
    pub value: f64,
    /// The matrix was all zeros; `value` is 0 by convention.
    pub zero_matrix: bool,
}

/// `−Σ σ̂_i ln σ̂_i / ln k` with `σ̂` the singular values normalized to sum 1
/// and `k = min(rows, cols)`.
pub fn von_neumann_entropy(m: &Tensor) -> Result<Entropy> {
    let k = m.rows().min(m.cols());
    if k < 2 {
        return Err(Error::shape("von_neumann_entropy", format!("needs at least 2x2, got {:?}", m.shape())));
    }
    let sv = singular_values(m);
    let total: f64 = sv.iter().sum();
    if total == 0.0 {
        return Ok(Entropy {
            value: 0.0,
            zero_matrix: true,
        });
    }
    let h: f64 = sv
        .iter()
        .map(|&s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    let value = h / (k as f64).ln();
    Ok(Entropy {
        // also maps -0.0 (a single nonzero singular value) to 0.0
        value: if value <= 0.0 { 0.0 } else { value.min(1.0) },
        zero_matrix: false,
    })
}

/// Mean Euclidean distance over all unordered row pairs.
pub fn dispersion(h: &Tensor) -> f64 {
    let n = h.rows();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += h.row(i).iter().zip(h.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// Dispersion of `((P + I)/2)^L H0` for each requested `L`, in input order.
pub fn lazy_walk_convergence(p: &PropagationMatrix, ls: &[usize], h0: &Tensor) -> Result<Vec<(usize, f64)>> {
    let mut order: Vec<usize> = ls.to_vec();
    order.sort_unstable();
    order.dedup();
    let mut h = h0.clone();
    let mut step = 0;
    let mut at = std::collections::BTreeMap::new();
    for &l in &order {
        while step < l {
            let ph = p.spmm(&h)?;
            h = ph.add(&h)?.scale(0.5);
            step += 1;
        }
        at.insert(l, dispersion(&h));
    }
    Ok(ls.iter().map(|l| (*l, at[l])).collect())
}
