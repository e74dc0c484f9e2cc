//! Seeded synthetic datasets. Every generator is a pure function of its arguments.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, dim);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Rows i.i.d. uniform on the unit sphere of `R^dim`.
pub fn gen_uniform_sphere(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n).flat_map(|_| unit_vec(&mut rng, dim)).collect();
    Array2::from_shape_vec((n, dim), values).expect("n * dim values")
}

/// Samples spread over `n_lines` random lines through the origin: a standard normal
/// scalar times the line's unit direction, plus isotropic Gaussian noise of scale `noise`.
/// Sample `i` lies on line `i % n_lines`; the labels are returned alongside.
pub fn gen_clustered_lines(n: usize, dim: usize, n_lines: usize, noise: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    assert!(n_lines >= 1, "need at least one line");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Vec<Vec<f64>> = (0..n_lines).map(|_| unit_vec(&mut rng, dim)).collect();
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let line = i % n_lines;
        let s: f64 = rng.sample(StandardNormal);
        for &d in &directions[line] {
            let eps: f64 = if noise > 0.0 { noise * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
            values.push(s * d + eps);
        }
        labels.push(line);
    }
    (Array2::from_shape_vec((n, dim), values).expect("n * dim values"), labels)
}

/// Standard normal samples.
pub fn gen_gaussian(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
    Array2::from_shape_vec((n, dim), values).expect("n * dim values")
}

/// Gaussian samples confined to a random `rank`-dimensional subspace.
pub fn gen_subspace(n: usize, dim: usize, rank: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis: Vec<Vec<f64>> = (0..rank).map(|_| gaussian_vec(&mut rng, dim)).collect();
    let mut out = Array2::zeros((n, dim));
    for mut row in out.outer_iter_mut() {
        for b in &basis {
            let z: f64 = rng.sample(StandardNormal);
            for (r, bi) in row.iter_mut().zip(b) {
                *r += z * bi;
            }
        }
    }
    out
}
