//! Small dense linear algebra by pivoted Gaussian elimination, over reals and jets.

use crate::error::{Error, Result};
use crate::smoothfn::Jet;

/// Smallest pivot ratio accepted by the solvers (condition estimate 1e12).
pub const ABORT_PIVOT_RATIO: f64 = 1e-12;

/// Pivots of partial-pivot elimination on an `n×n` row-major matrix.
///
/// Returns the determinant and the pivot magnitudes in elimination order.
pub fn pivots(a: &[f64], n: usize) -> (f64, Vec<f64>) {
    let mut m = a.to_vec();
    let mut det = 1.0;
    let mut piv = Vec::with_capacity(n);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i * n + k].abs().total_cmp(&m[j * n + k].abs()))
            .unwrap_or(k);
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            det = -det;
        }
        let d = m[k * n + k];
        det *= d;
        piv.push(d.abs());
        if d == 0.0 {
            continue;
        }
        for i in k + 1..n {
            let f = m[i * n + k] / d;
            for c in k..n {
                m[i * n + c] -= f * m[k * n + c];
            }
        }
    }
    (det, piv)
}

/// Ratio of the smallest to the largest pivot; 0 for a zero matrix.
pub fn pivot_ratio(piv: &[f64]) -> f64 {
    let max = piv.iter().cloned().fold(0.0, f64::max);
    let min = piv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Solves `A x = b` for jet entries, pivoting on the values.
pub fn solve_jets(a: &[Jet], b: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().map(|j| j.value().abs()).fold(0.0, f64::max);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i * n + k].value().abs().total_cmp(&m[j * n + k].value().abs()))
            .unwrap_or(k);
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            rhs.swap(k, p);
        }
        let d = m[k * n + k].clone();
        if scale == 0.0 || d.value().abs() < ABORT_PIVOT_RATIO * scale {
            return Err(Error::SingularHessian {
                ratio: if scale == 0.0 { 0.0 } else { d.value().abs() / scale },
            });
        }
        for i in k + 1..n {
            let f = &m[i * n + k] / &d;
            for c in k..n {
                let t = &f * &m[k * n + c];
                m[i * n + c] = &m[i * n + c] - &t;
            }
            let t = &f * &rhs[k];
            rhs[i] = &rhs[i] - &t;
        }
    }
    let mut x: Vec<Jet> = rhs.clone();
    for k in (0..n).rev() {
        let mut s = rhs[k].clone();
        for c in k + 1..n {
            s = s - &m[k * n + c] * &x[c];
        }
        x[k] = &s / &m[k * n + k];
    }
    Ok(x)
}

/// Inverse of an `n×n` jet matrix (row-major).
pub fn inverse_jets(a: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let space = a[0].space().clone();
    let mut inv = vec![Jet::constant(&space, 0.0); n * n];
    for col in 0..n {
        let e: Vec<Jet> = (0..n)
            .map(|i| Jet::constant(&space, if i == col { 1.0 } else { 0.0 }))
            .collect();
        let x = solve_jets(a, &e, n)?;
        for (i, v) in x.into_iter().enumerate() {
            inv[i * n + col] = v;
        }
    }
    Ok(inv)
}

pub fn inverse(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let jets: Vec<Jet> = a.iter().map(|&v| Jet::real(v)).collect();
    Ok(inverse_jets(&jets, n)?.iter().map(Jet::value).collect())
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
