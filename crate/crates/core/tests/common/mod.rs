//! Oracles and generators shared by the integration tests. Nothing here calls into the
//! library's numerical code, so comparisons against it are independent.
#![allow(dead_code)]

use dron::{Atom, Dictionary};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_vec((n, d), gaussian(rng, n * d)).unwrap()
}

pub fn dict_of(rows: &[Vec<f64>]) -> Dictionary {
    Dictionary::new(rows.iter().map(|r| Atom::new(r.clone()).unwrap()).collect()).unwrap()
}

pub fn random_dict(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Dictionary {
    dict_of(&(0..k).map(|_| gaussian(rng, d)).collect::<Vec<_>>())
}

pub fn ip(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq(a: &[f64]) -> f64 {
    ip(a, a)
}

pub fn abs_cos(a: &[f64], b: &[f64]) -> f64 {
    ip(a, b).abs() / (sq(a) * sq(b)).sqrt()
}

/// Eigenpairs of `XᵀX / N`, largest eigenvalue first.
pub fn eigen_second_moment(rows: &Array2<f64>) -> Vec<(f64, Vec<f64>)> {
    let (n, d) = rows.dim();
    let x = DMatrix::from_row_slice(n, d, rows.as_standard_layout().as_slice().unwrap());
    let m = x.transpose() * &x / n as f64;
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, Vec<f64>)> =
        (0..d).map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

pub fn top_eigen(rows: &Array2<f64>) -> (f64, Vec<f64>) {
    eigen_second_moment(rows).swap_remove(0)
}

/// Modified Gram–Schmidt; vectors that collapse below `1e-10` relative are dropped.
pub fn gram_schmidt(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for b in &basis {
            let c = ip(&w, b);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let n = sq(&w).sqrt();
        if n > 1e-10 * sq(v).sqrt() {
            basis.push(w.iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Orthonormal basis of `R^d` whose first vector is `first / ‖first‖`.
pub fn basis_extension(first: &[f64]) -> Vec<Vec<f64>> {
    let d = first.len();
    let mut vs = vec![first.to_vec()];
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        vs.push(e);
    }
    gram_schmidt(&vs)
}

/// Residual recursion written out directly: per layer the best atom by brute-force cosine
/// scan, then `r ← r − ⟨r,φ⟩/‖φ‖² φ`. Returns residual energies and selected indices.
pub fn recursion_oracle(x: &[f64], layers: &[Vec<Vec<f64>>]) -> (Vec<f64>, Vec<usize>) {
    let mut r = x.to_vec();
    let mut energies = vec![sq(&r)];
    let mut picks = Vec::new();
    for atoms in layers {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, a) in atoms.iter().enumerate() {
            let s = ip(&r, a).powi(2) / sq(a);
            if s > best.1 {
                best = (k, s);
            }
        }
        let a = &atoms[best.0];
        let c = if sq(&r) == 0.0 { 0.0 } else { ip(&r, a) / sq(a) };
        for (ri, ai) in r.iter_mut().zip(a) {
            *ri -= c * ai;
        }
        energies.push(sq(&r));
        picks.push(best.0);
    }
    (energies, picks)
}

pub fn layers_of(model: &dron::DeepModel) -> Vec<Vec<Vec<f64>>> {
    model.layers().iter().map(|d| d.atoms().iter().map(|a| a.values().to_vec()).collect()).collect()
}
