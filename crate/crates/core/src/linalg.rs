//! Small dense helpers shared by the training and gradient code.
//!
//! Every reduction sums left to right so results are reproducible bit for bit.

use ndarray::{Array2, ArrayView2};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn unit(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|v| v / n).collect()
}

/// Squared cosine between two non-zero vectors.
pub fn cos_sq(a: &[f64], b: &[f64]) -> f64 {
    let d = dot(a, b);
    d * d / (norm_sq(a) * norm_sq(b))
}

/// Uncentered second-moment matrix `XᵀX / N` of the rows of `rows`.
pub fn second_moment(rows: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = rows.nrows().max(1) as f64;
    let mut c = rows.t().dot(&rows);
    c.mapv_inplace(|v| v / n);
    c
}

pub fn mat_vec(m: &Array2<f64>, v: &[f64]) -> Vec<f64> {
    m.rows().into_iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `vᵀ M v / vᵀ v`
pub fn rayleigh_quotient(m: &Array2<f64>, v: &[f64]) -> f64 {
    dot(v, &mat_vec(m, v)) / norm_sq(v)
}

#[derive(Debug, Clone)]
pub struct PowerIteration {
    /// Unit-norm estimate of the leading eigenvector.
    pub vector: Vec<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Leading eigenvector of a symmetric positive semi-definite matrix by power iteration,
/// warm-started from `start`. Stops once successive unit iterates have cosine above
/// `1 - tol`. Returns `None` when `start` lies in the null space of `m`.
pub fn power_iteration(
    m: &Array2<f64>,
    start: &[f64],
    max_iter: usize,
    tol: f64,
) -> Option<PowerIteration> {
    let mut v = unit(start);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let w = mat_vec(m, &v);
        let nw = norm(&w);
        if !(nw > 0.0) || !nw.is_finite() {
            return None;
        }
        let w: Vec<f64> = w.iter().map(|x| x / nw).collect();
        let c = dot(&w, &v);
        v = w;
        iterations += 1;
        if c > 1.0 - tol {
            converged = true;
            break;
        }
    }
    let eigenvalue = rayleigh_quotient(m, &v);
    Some(PowerIteration { vector: v, eigenvalue, iterations, converged })
}

/// [`power_iteration`] that, when `max_iter` steps do not converge, continues from the last
/// iterate on `m²`, `m⁴`, ... (up to `max_squarings` times). The iterates on `m^(2^s)` are a
/// subsequence of the plain power sequence, so the limit is the same; the eigenvalue is
/// reported for `m` itself.
pub fn power_iteration_squaring(
    m: &Array2<f64>,
    start: &[f64],
    max_iter: usize,
    tol: f64,
    max_squarings: usize,
) -> Option<PowerIteration> {
    let mut p = power_iteration(m, start, max_iter, tol)?;
    let mut power = m.clone();
    let mut squarings = 0;
    while !p.converged && squarings < max_squarings {
        power = power.dot(&power);
        let trace = power.diag().sum();
        if !(trace > 0.0) || !trace.is_finite() {
            break;
        }
        power /= trace;
        squarings += 1;
        let next = power_iteration(&power, &p.vector, max_iter, tol)?;
        p = PowerIteration { iterations: p.iterations + next.iterations, ..next };
    }
    p.eigenvalue = rayleigh_quotient(m, &p.vector);
    Some(p)
}

/// Removes from `v` its components along each (mutually orthogonal) vector in `basis`.
pub fn orthogonalize_against<'a>(v: &mut [f64], basis: impl IntoIterator<Item = &'a [f64]>) {
    for b in basis {
        let bb = norm_sq(b);
        if bb > 0.0 {
            let c = dot(v, b) / bb;
            axpy(-c, b, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn power_iteration_finds_dominant_axis() {
        let m = array![[3.0, 0.0], [0.0, 1.0]];
        let p = power_iteration(&m, &[1.0, 1.0], 500, 1e-12).unwrap();
        assert!(p.converged);
        assert!((p.vector[0].abs() - 1.0).abs() < 1e-6);
        assert!((p.eigenvalue - 3.0).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_null_start() {
        let m = array![[1.0, 0.0], [0.0, 0.0]];
        assert!(power_iteration(&m, &[0.0, 1.0], 10, 1e-12).is_none());
    }

    #[test]
    fn orthogonalize_removes_components() {
        let mut v = vec![1.0, 2.0, 3.0];
        let e1 = [2.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 1.0];
        orthogonalize_against(&mut v, [&e1[..], &e2[..]]);
        assert!(dot(&v, &e1).abs() < 1e-15);
        assert!(dot(&v, &e2).abs() < 1e-15);
    }

    #[test]
    fn squaring_handles_small_gap() {
        let m = ndarray::array![[1.0, 0.0, 0.0], [0.0, 0.999, 0.0], [0.0, 0.0, 0.5]];
        let plain = power_iteration(&m, &[1.0, 1.0, 1.0], 500, 1e-12).unwrap();
        assert!(!plain.converged);
        let p = power_iteration_squaring(&m, &[1.0, 1.0, 1.0], 500, 1e-12, 6).unwrap();
        assert!(p.converged);
        assert!(p.vector[0].abs() > 1.0 - 1e-8, "{:?}", p);
    }
}
