mod common;

use common::*;
use dron::model::{project_coefficient, reconstruct_complete};
use dron::selection::{residual_step, scores, select_atom, shallow_error};
use dron::shallow::assign_all;
use dron::{Atom, Dictionary, Error};
use proptest::prelude::*;

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, d).prop_filter("non-zero", |v| sq(v) > 1e-6)
}

/// `(x, atoms)` with `1..=6` atoms in dimension `1..=8`.
fn case() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..=8, 1usize..=6)
        .prop_flat_map(|(d, k)| (vec_strategy(d), prop::collection::vec(vec_strategy(d), k)))
}

/// Relative gap between the best and second-best selection score.
fn score_gap(x: &[f64], atoms: &[Vec<f64>]) -> f64 {
    let mut s: Vec<f64> = atoms.iter().map(|a| ip(x, a).powi(2) / sq(a)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if s.len() < 2 {
        f64::INFINITY
    } else {
        (s[0] - s[1]) / s[0].max(f64::MIN_POSITIVE)
    }
}

proptest! {
    #[test]
    fn pythagoras((x, atoms) in case()) {
        let s = residual_step(&x, &dict_of(&atoms)).unwrap();
        let lhs = sq(&x);
        prop_assert!((lhs - sq(&s.projection) - sq(&s.residual)).abs() <= 1e-10 * lhs);
    }

    #[test]
    fn residual_is_orthogonal_to_selected_atom((x, atoms) in case()) {
        let s = residual_step(&x, &dict_of(&atoms)).unwrap();
        let phi = &atoms[s.assignment.atom_index];
        prop_assert!(ip(&s.residual, phi).abs() <= 1e-10 * sq(&x).sqrt() * sq(phi).sqrt());
    }

    #[test]
    fn shallow_error_is_explicit_residual_norm((x, atoms) in case()) {
        let d = dict_of(&atoms);
        let a = select_atom(&x, &d).unwrap();
        let phi = &atoms[a.atom_index];
        let alpha = ip(&x, phi) / sq(phi);
        let direct: f64 = x.iter().zip(phi).map(|(xi, p)| (xi - alpha * p).powi(2)).sum();
        let e = shallow_error(&x, &d).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((e - direct).abs() <= 1e-10 * sq(&x));
    }

    #[test]
    fn collinear_input_has_no_error((_x, atoms) in case(), pick in 0usize..6, c in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.0])) {
        let phi = &atoms[pick % atoms.len()];
        let x: Vec<f64> = phi.iter().map(|p| c * p).collect();
        let e = shallow_error(&x, &dict_of(&atoms)).unwrap();
        prop_assert!(e <= 1e-12 * sq(&x));
    }

    #[test]
    fn selection_ignores_atom_scale_and_sign((x, atoms) in case(), k in 0usize..6, a in prop::sample::select(vec![-1e3, -2.0, -1.0, 1e-3, 0.5, 4.0, 1e3])) {
        prop_assume!(score_gap(&x, &atoms) > 1e-9);
        let before = select_atom(&x, &dict_of(&atoms)).unwrap().atom_index;
        let mut scaled = atoms.clone();
        let k = k % atoms.len();
        scaled[k] = scaled[k].iter().map(|v| a * v).collect();
        let after = select_atom(&x, &dict_of(&scaled)).unwrap();
        prop_assert_eq!(after.atom_index, before);
    }

    #[test]
    fn min_error_and_max_cosine_pick_the_same_atom((x, atoms) in case()) {
        prop_assume!(score_gap(&x, &atoms) > 1e-9);
        // brute force: the atom whose own projection leaves the smallest residual
        let errors: Vec<f64> = atoms
            .iter()
            .map(|phi| {
                let alpha = ip(&x, phi) / sq(phi);
                x.iter().zip(phi).map(|(xi, p)| (xi - alpha * p).powi(2)).sum()
            })
            .collect();
        let argmin = (0..atoms.len()).min_by(|&a, &b| errors[a].total_cmp(&errors[b])).unwrap();
        let cos: Vec<f64> = atoms.iter().map(|phi| ip(&x, phi).powi(2) / (sq(&x) * sq(phi))).collect();
        let argmax = (0..atoms.len()).max_by(|&a, &b| cos[a].total_cmp(&cos[b]).then(b.cmp(&a))).unwrap();
        prop_assert_eq!(argmin, argmax);
        prop_assert_eq!(select_atom(&x, &dict_of(&atoms)).unwrap().atom_index, argmax);
    }

    #[test]
    fn second_step_with_same_atom_projects_nothing(x in vec_strategy(6), phi in vec_strategy(6)) {
        let d = dict_of(&[phi]);
        let first = residual_step(&x, &d).unwrap();
        let second = residual_step(&first.residual, &d).unwrap();
        prop_assert!(sq(&second.projection).sqrt() <= 1e-15 * sq(&x).sqrt());
    }

    #[test]
    fn parseval_with_extended_basis(x in vec_strategy(7), phi in vec_strategy(7)) {
        let basis = basis_extension(&phi);
        prop_assert_eq!(basis.len(), 7);
        let coords: Vec<f64> = basis.iter().map(|e| ip(&x, e)).collect();
        let total: f64 = coords.iter().map(|c| c * c).sum();
        prop_assert!((total - sq(&x)).abs() <= 1e-10 * sq(&x));
        // the error from a single atom is the energy along the rest of the basis
        let e = shallow_error(&x, &dict_of(&[phi])).unwrap();
        let rest: f64 = coords[1..].iter().map(|c| c * c).sum();
        prop_assert!((e - rest).abs() <= 1e-10 * sq(&x));
    }

    #[test]
    fn complete_orthogonal_basis_reconstructs(x in vec_strategy(8), raw in prop::collection::vec(vec_strategy(8), 8), scales in prop::collection::vec(0.1f64..5.0, 8)) {
        let basis = gram_schmidt(&raw);
        prop_assume!(basis.len() == 8);
        let atoms: Vec<Vec<f64>> = basis.iter().zip(&scales).map(|(b, s)| b.iter().map(|v| s * v).collect()).collect();
        let y = reconstruct_complete(&x, &dict_of(&atoms)).unwrap();
        let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!(err.sqrt() <= 1e-10 * sq(&x).sqrt());
    }
}

#[test]
fn project_coefficient_examples() {
    let c = |x: &[f64], a: &[f64]| project_coefficient(x, &Atom::new(a.to_vec()).unwrap()).unwrap();
    assert_eq!(c(&[2.0, 0.0], &[1.0, 0.0]), 2.0);
    assert_eq!(c(&[1.0, 1.0], &[0.0, 3.0]), 1.0 / 3.0);
    assert_eq!(c(&[1.0, 0.0], &[0.0, 5.0]), 0.0);
}

#[test]
fn complete_reconstruction_examples() {
    let r = reconstruct_complete(&[3.0, 4.0], &dict_of(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
    assert_eq!(r, vec![3.0, 4.0]);
    let r = reconstruct_complete(&[1.0, 0.0], &dict_of(&[vec![1.0, 1.0], vec![1.0, -1.0]])).unwrap();
    assert_eq!(r, vec![1.0, 0.0]);
    assert!(matches!(
        reconstruct_complete(&[1.0, 0.0], &dict_of(&[vec![1.0, 1.0], vec![1.0, 0.0]])),
        Err(Error::NotOrthogonal(0, 1))
    ));
}

#[test]
fn assign_all_matches_per_sample_selection() {
    let mut r = rng(21);
    let x = gaussian_matrix(&mut r, 100, 8);
    let d = random_dict(&mut r, 9, 8);
    let clusters = assign_all(x.view(), &d).unwrap();
    let mut seen = vec![0; 100];
    for (n, row) in x.outer_iter().enumerate() {
        let s = scores(row.as_slice().unwrap(), &d).unwrap();
        let best = (0..s.len()).fold(0, |b, k| if s[k] > s[b] { k } else { b });
        assert_eq!(clusters.labels[n], best);
        assert!(clusters.members[best].contains(&n));
    }
    for m in &clusters.members {
        for &n in m {
            seen[n] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
}

#[test]
fn assign_all_simple_cases() {
    let x = ndarray::array![[2.0, 0.0], [0.0, -1.0]];
    let c = assign_all(x.view(), &dict_of(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
    assert_eq!(c.members, vec![vec![0], vec![1]]);
    let x = ndarray::array![[1.0, 1.0], [-2.0, -2.0], [0.5, 0.5]];
    let c = assign_all(x.view(), &dict_of(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]])).unwrap();
    assert_eq!(c.members, vec![vec![], vec![0, 1, 2], vec![]]);
    let x = ndarray::array![[0.0, 0.0], [0.0, 1.0]];
    let c = assign_all(x.view(), &dict_of(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
    assert_eq!(c.zero_samples, vec![0]);
    assert_eq!(c.labels, vec![0, 1]);
}

#[test]
fn zero_atoms_are_rejected() {
    assert!(matches!(Atom::new(vec![0.0, 0.0]), Err(Error::ZeroAtom)));
    assert!(matches!(Dictionary::new(vec![]), Err(Error::EmptyDictionary)));
}
