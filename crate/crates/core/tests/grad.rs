mod common;

use common::*;
use dron::grad::{finite_difference_check, jacobian_init, jacobian_propagate, loss_gradient, refine_joint, relative_error, RefineConfig};
use dron::shallow::update_atom_oja;
use dron::{Atom, DeepModel, Dictionary, TrainConfig};

/// `‖R⁽ᴸ⁾‖²` along a fixed list of atoms, one per layer.
fn pinned(x: &[f64], atoms: &[Vec<f64>]) -> f64 {
    let mut r = x.to_vec();
    for a in atoms {
        let c = ip(&r, a) / sq(a);
        for (ri, ai) in r.iter_mut().zip(a) {
            *ri -= c * ai;
        }
    }
    sq(&r)
}

/// Central differences with respect to every coordinate of the atom at `layer`.
fn fd_gradient(x: &[f64], atoms: &[Vec<f64>], layer: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * atoms[layer][i].abs().max(1.0);
            let mut plus = atoms.to_vec();
            plus[layer][i] += h;
            let mut minus = atoms.to_vec();
            minus[layer][i] -= h;
            (pinned(x, &plus) - pinned(x, &minus)) / (2.0 * h)
        })
        .collect()
}

fn random_case(seed: u64) -> (Vec<f64>, DeepModel) {
    let mut r = rng(seed);
    let d = 2 + (seed % 7) as usize;
    let depth = 1 + (seed % 4) as usize;
    let layers: Vec<Dictionary> = (0..depth).map(|_| random_dict(&mut r, 3, d)).collect();
    (gaussian(&mut r, d), DeepModel::new(layers, TrainConfig::default()).unwrap())
}

#[test]
fn gradient_matches_independent_differences() {
    for seed in 0..100 {
        let (x, model) = random_case(seed);
        let layers = layers_of(&model);
        let (_, picks) = recursion_oracle(&x, &layers);
        let atoms: Vec<Vec<f64>> = picks.iter().enumerate().map(|(l, &k)| layers[l][k].clone()).collect();
        let g = loss_gradient(&x, &model).unwrap();
        assert!((g.loss - pinned(&x, &atoms)).abs() <= 1e-12 * sq(&x));
        for (l, lg) in g.layers.iter().enumerate() {
            assert_eq!(lg.atom_index, picks[l]);
            let err = relative_error(&lg.gradient, &fd_gradient(&x, &atoms, l));
            assert!(err < 1e-5, "seed {seed}, layer {l}: {err}");
        }
        assert!(finite_difference_check(&x, &model).unwrap().max_rel_error < 1e-5);
    }
}

#[test]
fn projection_jacobian_example() {
    let j = jacobian_init(&[1.0, 0.0], &Atom::new(vec![1.0, 0.0]).unwrap(), 0).unwrap();
    assert_eq!(j.matrix, ndarray::array![[0.0, 0.0], [0.0, 1.0]]);
}

#[test]
fn projection_jacobian_matches_differences() {
    let mut r = rng(3);
    for _ in 0..20 {
        let rv = gaussian(&mut r, 4);
        let phi = gaussian(&mut r, 4);
        let j = jacobian_init(&rv, &Atom::new(phi.clone()).unwrap(), 0).unwrap();
        let proj = |p: &[f64]| -> Vec<f64> {
            let c = ip(&rv, p) / sq(p);
            p.iter().map(|v| c * v).collect()
        };
        for col in 0..4 {
            let h = 1e-6;
            let mut a = phi.clone();
            a[col] += h;
            let mut b = phi.clone();
            b[col] -= h;
            let (pa, pb) = (proj(&a), proj(&b));
            for row in 0..4 {
                let fd = (pa[row] - pb[row]) / (2.0 * h);
                assert!((j.matrix[[row, col]] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}

#[test]
fn propagation_removes_the_next_atom_direction() {
    let j = jacobian_init(&[0.3, 1.0, -0.5], &Atom::new(vec![1.0, 2.0, 0.0]).unwrap(), 0).unwrap();
    let next = Atom::new(vec![0.0, 0.0, 1.0]).unwrap();
    let p = jacobian_propagate(&j, &next).unwrap();
    assert_eq!((p.from, p.to), (0, 1));
    assert!(p.matrix.row(2).iter().all(|v| *v == 0.0));
    assert_eq!(p.matrix.row(0), j.matrix.row(0));
}

#[test]
fn single_layer_gradient_is_oja_direction() {
    let mut r = rng(4);
    for _ in 0..20 {
        let x = gaussian(&mut r, 5);
        let phi = gaussian(&mut r, 5);
        let atom = Atom::new(phi.clone()).unwrap();
        let model = DeepModel::new(vec![Dictionary::new(vec![atom.clone()]).unwrap()], TrainConfig::default()).unwrap();
        let g = loss_gradient(&x, &model).unwrap();
        let oja = update_atom_oja(&x, &atom, 1.0).unwrap();
        for i in 0..5 {
            let direction = oja.values()[i] - phi[i];
            assert!((g.layers[0].gradient[i] + 2.0 * direction).abs() < 1e-10 * (1.0 + direction.abs()));
        }
    }
}

#[test]
fn small_step_against_gradient_does_not_increase_loss() {
    for seed in 0..30 {
        let (x, model) = random_case(1000 + seed);
        let layers = layers_of(&model);
        let (_, picks) = recursion_oracle(&x, &layers);
        let atoms: Vec<Vec<f64>> = picks.iter().enumerate().map(|(l, &k)| layers[l][k].clone()).collect();
        let g = loss_gradient(&x, &model).unwrap();
        let base = pinned(&x, &atoms);
        let mut step = 1.0;
        let mut ok = false;
        for _ in 0..=30 {
            let moved: Vec<Vec<f64>> = atoms
                .iter()
                .zip(&g.layers)
                .map(|(a, lg)| a.iter().zip(&lg.gradient).map(|(v, d)| v - step * d).collect())
                .collect();
            if pinned(&x, &moved) <= base {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        assert!(ok, "seed {seed}");
    }
}

#[test]
fn joint_refinement_lowers_mean_loss() {
    let mut r = rng(6);
    let x = gaussian_matrix(&mut r, 40, 4);
    let model = DeepModel::new(vec![random_dict(&mut r, 3, 4), random_dict(&mut r, 3, 4)], TrainConfig::default()).unwrap();
    let (_, history) = refine_joint(x.view(), &model, &RefineConfig::default()).unwrap();
    assert!(history.len() > 1);
    assert!(history.windows(2).all(|w| w[1] < w[0]));
}
