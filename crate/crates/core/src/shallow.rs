//! Single-layer training: batch alternating PCA and the three online update rules.
//!
//! The batch trainer alternates a full assignment pass with a per-cluster leading
//! eigenvector update. Both half-steps minimize the same objective, so the mean loss
//! never increases. The online trainer visits samples in a seeded shuffled order and moves
//! only the winning atom, renormalizing it to unit norm after every step.

use log::warn;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq, power_iteration_squaring, rayleigh_quotient, second_moment};
use crate::model::{Assignment, Atom, Dictionary, Rule, TrainConfig};
use crate::selection::select_atom;

pub const POWER_MAX_ITER: usize = 500;
pub const POWER_TOL: f64 = 1e-12;
/// Matrix squarings tried after `POWER_MAX_ITER` plain steps fail to converge.
pub const POWER_MAX_SQUARINGS: usize = 6;
/// Below this norm an updated atom counts as collapsed.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Sample indices grouped by winning atom.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterIndex {
    /// Winning atom per sample.
    pub labels: Vec<usize>,
    /// `members[k]` lists the samples assigned to atom `k`, in increasing order.
    pub members: Vec<Vec<usize>>,
    /// Zero-norm samples; they sit in cluster 0.
    pub zero_samples: Vec<usize>,
}

impl ClusterIndex {
    fn from_assignments(assignments: &[Assignment], k: usize) -> Self {
        let mut members = vec![Vec::new(); k];
        let mut zero_samples = Vec::new();
        let mut labels = Vec::with_capacity(assignments.len());
        for (n, a) in assignments.iter().enumerate() {
            if a.zero_input {
                zero_samples.push(n);
            }
            members[a.atom_index].push(n);
            labels.push(a.atom_index);
        }
        Self { labels, members, zero_samples }
    }

    /// Members of cluster `k` with non-zero norm.
    pub fn active_members(&self, k: usize) -> Vec<usize> {
        self.members[k].iter().copied().filter(|n| self.zero_samples.binary_search(n).is_err()).collect()
    }
}

/// Per-layer training record.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LayerReport {
    /// Mean shallow error before training and after every epoch.
    pub losses: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
    /// Atoms re-seeded because their cluster emptied.
    pub reinitialized: usize,
    /// Updates rejected as degenerate and skipped.
    pub degenerate_updates: usize,
    /// Set when the layer received no non-zero residuals and kept its initial atoms.
    pub untrained: bool,
    /// Samples with non-zero input that took part in training.
    pub active_samples: usize,
}

impl LayerReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub layers: Vec<LayerReport>,
    /// Share of the total input energy captured by each level.
    pub level_energy: Vec<f64>,
    /// Share of the total input energy left in the final residual.
    pub residual_energy: f64,
}

fn standard(samples: ArrayView2<'_, f64>) -> Array2<f64> {
    samples.as_standard_layout().into_owned()
}

fn row(samples: &Array2<f64>, n: usize) -> &[f64] {
    samples.row(n).to_slice().expect("standard layout")
}

fn check_cols(samples: &Array2<f64>, dim: usize) -> Result<()> {
    if samples.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: samples.ncols() });
    }
    Ok(())
}

fn assign_rows(samples: &Array2<f64>, dict: &Dictionary) -> Vec<(Assignment, f64)> {
    (0..samples.nrows())
        .into_par_iter()
        .map(|n| {
            let x = row(samples, n);
            match select_atom(x, dict) {
                Ok(a) => {
                    // explicit residual energy, so that an atom equal to x gives exactly 0
                    let phi = dict.atom(a.atom_index).values();
                    let e = x.iter().zip(phi).map(|(xi, p)| (xi - a.coefficient * p).powi(2)).sum();
                    (a, e)
                }
                Err(_) => (Assignment::zero(), 0.0),
            }
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        v.sum::<f64>() / n as f64
    }
}

/// Assigns every sample to its winning atom.
pub fn assign_all(samples: ArrayView2<'_, f64>, dict: &Dictionary) -> Result<ClusterIndex> {
    let samples = standard(samples);
    check_cols(&samples, dict.dim())?;
    let a: Vec<Assignment> = assign_rows(&samples, dict).into_iter().map(|(a, _)| a).collect();
    Ok(ClusterIndex::from_assignments(&a, dict.len()))
}

/// Mean shallow error of a dictionary over a sample set.
pub fn mean_loss(samples: ArrayView2<'_, f64>, dict: &Dictionary) -> Result<f64> {
    let samples = standard(samples);
    check_cols(&samples, dict.dim())?;
    let errs = assign_rows(&samples, dict);
    Ok(mean(errs.iter().map(|e| e.1), errs.len()))
}

/// Leading eigenvector of the cluster's second-moment matrix, warm-started from `atom`.
///
/// Returns a unit atom whose Rayleigh quotient is at least that of `atom`; when power
/// iteration cannot improve on the incoming atom it is returned unchanged.
pub fn update_atom_pca(cluster: ArrayView2<'_, f64>, atom: &Atom) -> Result<Atom> {
    if cluster.nrows() == 0 {
        return Err(Error::EmptyCluster);
    }
    if cluster.ncols() != atom.dim() {
        return Err(Error::DimensionMismatch { expected: atom.dim(), found: cluster.ncols() });
    }
    let cov = second_moment(cluster);
    let before = rayleigh_quotient(&cov, atom.values());
    let mut result = power_iteration_squaring(&cov, atom.values(), POWER_MAX_ITER, POWER_TOL, POWER_MAX_SQUARINGS);
    if result.is_none() {
        // atom orthogonal to every member: restart from the largest member
        let start = cluster
            .outer_iter()
            .map(|r| r.to_vec())
            .max_by(|a, b| norm_sq(a).total_cmp(&norm_sq(b)))
            .expect("non-empty cluster");
        if norm_sq(&start) > 0.0 {
            result = power_iteration_squaring(&cov, &start, POWER_MAX_ITER, POWER_TOL, POWER_MAX_SQUARINGS);
        }
    }
    match result {
        Some(p) if p.eigenvalue >= before => Atom::new(p.vector),
        _ => Ok(atom.clone()),
    }
}

/// Cosine-weighted averaging step (adaptive step λ₁).
///
/// `φ ← φ − (1/Σcos²) Σ cos²θ_n (⟨x_n,φ⟩φ/‖φ‖² − x_n)` with the normalizer taken over the
/// cluster members.
pub fn update_atom_lambda1(cluster: ArrayView2<'_, f64>, atom: &Atom) -> Result<Atom> {
    if cluster.nrows() == 0 {
        return Err(Error::EmptyCluster);
    }
    if cluster.ncols() != atom.dim() {
        return Err(Error::DimensionMismatch { expected: atom.dim(), found: cluster.ncols() });
    }
    let phi = atom.values();
    let pp = atom.squared_norm();
    let mut weight_sum = 0.0;
    let mut step = vec![0.0; phi.len()];
    for x in cluster.outer_iter() {
        let x = x.to_vec();
        let xx = norm_sq(&x);
        if xx == 0.0 {
            continue;
        }
        let ip = dot(&x, phi);
        let w = ip * ip / (xx * pp);
        let alpha = ip / pp;
        weight_sum += w;
        for ((s, p), xi) in step.iter_mut().zip(phi).zip(&x) {
            *s += w * (alpha * p - xi);
        }
    }
    if weight_sum < 1e-12 {
        return Err(Error::DegenerateCluster(weight_sum));
    }
    let updated: Vec<f64> = phi.iter().zip(&step).map(|(p, s)| p - s / weight_sum).collect();
    checked_atom(updated)
}

/// Outcome of a λ₂ update, which may have to drop members orthogonal to the atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambda2Update {
    pub atom: Atom,
    /// Row indices (within the cluster) that were skipped.
    pub skipped: Vec<usize>,
}

/// Convex-NMF style step (adaptive step λ₂): `φ ← mean_n (‖φ‖² / ⟨x_n,φ⟩) x_n`.
pub fn update_atom_lambda2(cluster: ArrayView2<'_, f64>, atom: &Atom) -> Result<Lambda2Update> {
    if cluster.nrows() == 0 {
        return Err(Error::EmptyCluster);
    }
    if cluster.ncols() != atom.dim() {
        return Err(Error::DimensionMismatch { expected: atom.dim(), found: cluster.ncols() });
    }
    let phi = atom.values();
    let pp = atom.squared_norm();
    let mut acc = vec![0.0; phi.len()];
    let mut used = 0usize;
    let mut skipped = Vec::new();
    for (i, x) in cluster.outer_iter().enumerate() {
        let x = x.to_vec();
        let ip = dot(&x, phi);
        if ip.abs() < 1e-12 * norm(&x) * atom.norm() || ip == 0.0 {
            skipped.push(i);
            continue;
        }
        let s = pp / ip;
        for (a, xi) in acc.iter_mut().zip(&x) {
            *a += s * xi;
        }
        used += 1;
    }
    if !skipped.is_empty() {
        warn!("lambda2 update skipped {} member(s) orthogonal to the atom", skipped.len());
    }
    if used == 0 {
        return Err(Error::NearOrthogonalMember);
    }
    let updated: Vec<f64> = acc.iter().map(|a| a / used as f64).collect();
    Ok(Lambda2Update { atom: checked_atom(updated)?, skipped })
}

/// Oja step `φ ← φ + γ (x α − α² φ)` with `α = ⟨x,φ⟩/‖φ‖²`.
pub fn update_atom_oja(x: &[f64], atom: &Atom, gamma: f64) -> Result<Atom> {
    if x.len() != atom.dim() {
        return Err(Error::DimensionMismatch { expected: atom.dim(), found: x.len() });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig("Oja learning rate must be positive".into()));
    }
    let alpha = dot(x, atom.values()) / atom.squared_norm();
    let updated = atom
        .values()
        .iter()
        .zip(x)
        .map(|(p, xi)| p + gamma * (xi * alpha - alpha * alpha * p))
        .collect();
    checked_atom(updated)
}

fn checked_atom(values: Vec<f64>) -> Result<Atom> {
    let n = norm(&values);
    if !(n >= DEGENERATE_NORM) || !n.is_finite() {
        return Err(Error::DegenerateUpdate(n));
    }
    Atom::new(values)
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-6 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Dictionary of `k` seeded random unit atoms.
pub fn random_dictionary(k: usize, dim: usize, rng: &mut ChaCha8Rng) -> Dictionary {
    Dictionary::new((0..k).map(|_| Atom::new(random_unit(rng, dim)).expect("unit")).collect())
        .expect("k >= 1")
}

/// `k` distinct non-zero samples chosen by error-weighted seeding: the first uniformly,
/// each next one with probability proportional to its shallow error against the atoms
/// picked so far. Random unit atoms
/// fill in if there are fewer non-zero samples than atoms.
pub fn init_from_samples(samples: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Dictionary {
    let rows: Vec<Vec<f64>> = samples.outer_iter().map(|r| r.to_vec()).collect();
    let mut weight: Vec<f64> = rows.iter().map(|r| if norm_sq(r) > 0.0 { f64::INFINITY } else { 0.0 }).collect();
    let mut atoms: Vec<Atom> = Vec::with_capacity(k);
    while atoms.len() < k {
        let open: Vec<usize> = (0..rows.len()).filter(|&n| weight[n] > 0.0).collect();
        if open.is_empty() {
            break;
        }
        let total: f64 = open.iter().map(|&n| weight[n]).sum();
        let pick = if total.is_finite() && total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = *open.last().expect("non-empty");
            for &n in &open {
                if u < weight[n] {
                    chosen = n;
                    break;
                }
                u -= weight[n];
            }
            chosen
        } else {
            // first pick
            open[rng.random_range(0..open.len())]
        };
        let atom = Atom::new(rows[pick].clone()).expect("non-zero sample");
        weight[pick] = 0.0;
        for (n, r) in rows.iter().enumerate() {
            if weight[n] > 0.0 {
                let d = dot(r, atom.values());
                let e = (norm_sq(r) - d * d / atom.squared_norm()).max(0.0);
                // keep unpicked samples selectable even when their error is zero
                weight[n] = weight[n].min(e).max(f64::MIN_POSITIVE);
            }
        }
        atoms.push(atom);
    }
    while atoms.len() < k {
        atoms.push(Atom::new(random_unit(rng, samples.ncols())).expect("unit"));
    }
    Dictionary::new(atoms).expect("k >= 1")
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    if prev == 0.0 {
        if cur == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (prev - cur).abs() / prev.abs()
    }
}

fn validate(samples: &Array2<f64>, k: usize, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if samples.ncols() == 0 {
        return Err(Error::InvalidConfig("samples must have at least one column".into()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("layer width must be positive".into()));
    }
    if samples.nrows() < k {
        return Err(Error::InsufficientSamples { n: samples.nrows(), k });
    }
    Ok(())
}

/// Batch training of one layer with an externally owned RNG.
pub(crate) fn batch_layer(
    samples: &Array2<f64>,
    k: usize,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Dictionary, LayerReport)> {
    let n = samples.nrows();
    let mut dict = init_from_samples(samples.view(), k, rng);
    let mut report = LayerReport::default();

    let mut state = assign_rows(samples, &dict);
    let mut loss = mean(state.iter().map(|e| e.1), n);
    report.active_samples = state.iter().filter(|e| !e.0.zero_input).count();
    report.losses.push(loss);
    report.converged = loss == 0.0;

    while !report.converged && report.epochs < config.max_epochs {
        let assignments: Vec<Assignment> = state.iter().map(|e| e.0).collect();
        let clusters = ClusterIndex::from_assignments(&assignments, k);

        let updates: Vec<Option<Result<Atom>>> = (0..k)
            .into_par_iter()
            .map(|j| {
                let members = clusters.active_members(j);
                if members.is_empty() {
                    None
                } else {
                    Some(update_atom_pca(samples.select(Axis(0), &members).view(), dict.atom(j)))
                }
            })
            .collect();

        let mut empty = Vec::new();
        for (j, u) in updates.into_iter().enumerate() {
            match u {
                Some(Ok(atom)) => dict.replace(j, atom)?,
                Some(Err(e)) => {
                    warn!("atom {j}: pca update failed: {e}");
                    report.degenerate_updates += 1;
                }
                None => empty.push(j),
            }
        }

        // farthest-point reseeding of emptied atoms, one distinct sample each
        let mut reseeded = false;
        if !empty.is_empty() {
            let mut order: Vec<usize> = (0..n).filter(|&i| state[i].1 > 0.0).collect();
            order.sort_by(|&a, &b| state[b].1.total_cmp(&state[a].1).then(a.cmp(&b)));
            for (j, &src) in empty.iter().zip(&order) {
                dict.replace(*j, Atom::new(row(samples, src).to_vec())?)?;
                report.reinitialized += 1;
                reseeded = true;
            }
        }

        state = assign_rows(samples, &dict);
        let next = mean(state.iter().map(|e| e.1), n);
        report.epochs += 1;
        report.losses.push(next);
        report.converged = next == 0.0 || (!reseeded && relative_change(loss, next) < config.tol_rel_loss);
        loss = next;
    }
    Ok((dict, report))
}

/// Hook for observing online training one sample at a time.
#[derive(Debug)]
pub struct OnlineStep<'a> {
    pub epoch: usize,
    pub sample: usize,
    /// Dictionary before the update for this sample.
    pub dictionary: &'a Dictionary,
    pub assignment: Assignment,
}

pub(crate) fn online_layer(
    samples: &Array2<f64>,
    k: usize,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut observe: impl FnMut(OnlineStep<'_>),
) -> Result<(Dictionary, LayerReport)> {
    if !config.rule.is_online() {
        return Err(Error::InvalidConfig("online training needs an online rule".into()));
    }
    let n = samples.nrows();
    let mut dict = init_from_samples(samples.view(), k, rng);
    let mut report = LayerReport::default();
    let state = assign_rows(samples, &dict);
    let mut loss = mean(state.iter().map(|e| e.1), n);
    report.active_samples = state.iter().filter(|e| !e.0.zero_input).count();
    report.losses.push(loss);
    report.converged = loss == 0.0;

    let mut order: Vec<usize> = (0..n).collect();
    while !report.converged && report.epochs < config.max_epochs {
        order.shuffle(rng);
        for &i in &order {
            let x = row(samples, i);
            let a = match select_atom(x, &dict) {
                Ok(a) => a,
                Err(_) => continue,
            };
            observe(OnlineStep { epoch: report.epochs, sample: i, dictionary: &dict, assignment: a });
            let atom = dict.atom(a.atom_index);
            let member = samples.select(Axis(0), &[i]);
            let updated = match config.rule {
                Rule::OnlineLambda1 => update_atom_lambda1(member.view(), atom),
                Rule::OnlineLambda2 => update_atom_lambda2(member.view(), atom).map(|u| u.atom),
                Rule::OnlineOja => update_atom_oja(x, atom, config.learning_rate),
                Rule::BatchPca => unreachable!("checked above"),
            };
            match updated {
                Ok(atom) => dict.replace(a.atom_index, atom.normalized())?,
                Err(e) => {
                    warn!("sample {i}: update of atom {} skipped: {e}", a.atom_index);
                    report.degenerate_updates += 1;
                }
            }
        }
        let next = mean(assign_rows(samples, &dict).iter().map(|e| e.1), n);
        report.epochs += 1;
        report.losses.push(next);
        report.converged = next == 0.0 || relative_change(loss, next) < config.tol_rel_loss;
        loss = next;
    }
    Ok((dict, report))
}

fn single_layer_report(samples: &Array2<f64>, layer: LayerReport) -> TrainReport {
    let total: f64 = samples.outer_iter().map(|r| norm_sq(&r.to_vec())).sum();
    let residual = if total > 0.0 { layer.final_loss() * samples.nrows() as f64 / total } else { 0.0 };
    TrainReport { layers: vec![layer], level_energy: vec![1.0 - residual], residual_energy: residual }
}

/// Alternates [`assign_all`] and [`update_atom_pca`] until the relative change of the mean
/// loss falls below `tol_rel_loss`, the loss reaches zero, or `max_epochs` run out.
pub fn train_shallow_batch(samples: ArrayView2<'_, f64>, config: &TrainConfig) -> Result<(Dictionary, TrainReport)> {
    let samples = standard(samples);
    let k = config.effective_k(samples.ncols());
    validate(&samples, k, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (dict, layer) = batch_layer(&samples, k, config, &mut rng)?;
    let report = single_layer_report(&samples, layer);
    Ok((dict, report))
}

/// Online training with the rule in `config` (λ₁, λ₂ or Oja).
pub fn train_shallow_online(samples: ArrayView2<'_, f64>, config: &TrainConfig) -> Result<(Dictionary, TrainReport)> {
    train_shallow_online_observed(samples, config, |_| {})
}

/// [`train_shallow_online`] calling `observe` before every atom update.
pub fn train_shallow_online_observed(
    samples: ArrayView2<'_, f64>,
    config: &TrainConfig,
    observe: impl FnMut(OnlineStep<'_>),
) -> Result<(Dictionary, TrainReport)> {
    let samples = standard(samples);
    let k = config.effective_k(samples.ncols());
    validate(&samples, k, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (dict, layer) = online_layer(&samples, k, config, &mut rng, observe)?;
    let report = single_layer_report(&samples, layer);
    Ok((dict, report))
}

/// Dispatches on `config.rule`.
pub fn train_shallow(samples: ArrayView2<'_, f64>, config: &TrainConfig) -> Result<(Dictionary, TrainReport)> {
    match config.rule {
        Rule::BatchPca => train_shallow_batch(samples, config),
        _ => train_shallow_online(samples, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn atom(v: &[f64]) -> Atom {
        Atom::new(v.to_vec()).unwrap()
    }

    fn collinear(a: &[f64], b: &[f64]) -> bool {
        let c = dot(a, b);
        (c * c / (norm_sq(a) * norm_sq(b)) - 1.0).abs() < 1e-12
    }

    #[test]
    fn assign_axes() {
        let d = Dictionary::new(vec![atom(&[1.0, 0.0]), atom(&[0.0, 1.0])]).unwrap();
        let c = assign_all(array![[2.0, 0.1], [0.1, -3.0]].view(), &d).unwrap();
        assert_eq!(c.members, vec![vec![0], vec![1]]);
        assert!(c.zero_samples.is_empty());
    }

    #[test]
    fn assign_collinear_and_zero() {
        let d = Dictionary::new(vec![atom(&[1.0, 1.0]), atom(&[1.0, -1.0])]).unwrap();
        let c = assign_all(array![[1.0, -1.0], [2.0, -2.0], [-3.0, 3.0], [0.0, 0.0]].view(), &d).unwrap();
        assert_eq!(c.members[1], vec![0, 1, 2]);
        assert_eq!(c.members[0], vec![3]);
        assert_eq!(c.zero_samples, vec![3]);
        assert!(c.active_members(0).is_empty());
    }

    #[test]
    fn pca_rank_one() {
        let a = update_atom_pca(array![[1.0, 0.0], [2.0, 0.0]].view(), &atom(&[0.3, 0.9])).unwrap();
        assert!(collinear(a.values(), &[1.0, 0.0]));
        let a = update_atom_pca(array![[1.0, 1.0], [-1.0, -1.0]].view(), &atom(&[1.0, 0.0])).unwrap();
        assert!(collinear(a.values(), &[1.0, 1.0]));
    }

    #[test]
    fn pca_empty_cluster() {
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(update_atom_pca(empty.view(), &atom(&[1.0, 0.0])), Err(Error::EmptyCluster)));
    }

    #[test]
    fn pca_restarts_when_atom_orthogonal_to_cluster() {
        let a = update_atom_pca(array![[0.0, 2.0], [0.0, -1.0]].view(), &atom(&[1.0, 0.0])).unwrap();
        assert!(collinear(a.values(), &[0.0, 1.0]));
    }

    #[test]
    fn lambda1_single_member() {
        let phi = atom(&[1.0, 0.5]);
        let x = [0.4, 2.0];
        let a = update_atom_lambda1(array![[0.4, 2.0]].view(), &phi).unwrap();
        let alpha = dot(&x, phi.values()) / phi.squared_norm();
        for i in 0..2 {
            let expected = phi.values()[i] - (alpha * phi.values()[i] - x[i]);
            assert!((a.values()[i] - expected).abs() < 1e-14);
        }
        let a = update_atom_lambda1(array![[2.0, 1.0]].view(), &phi).unwrap();
        assert!(collinear(a.values(), phi.values()));
    }

    #[test]
    fn lambda1_degenerate() {
        let r = update_atom_lambda1(array![[0.0, 1.0]].view(), &atom(&[1.0, 0.0]));
        assert!(matches!(r, Err(Error::DegenerateCluster(_))));
    }

    #[test]
    fn lambda2_examples() {
        let u = update_atom_lambda2(array![[2.0, 0.0]].view(), &atom(&[1.0, 0.0])).unwrap();
        assert_eq!(u.atom.values(), &[1.0, 0.0]);
        let phi = [0.6, -0.8, 1.5];
        let u = update_atom_lambda2(array![[0.6, -0.8, 1.5], [0.6, -0.8, 1.5]].view(), &atom(&phi)).unwrap();
        for (a, b) in u.atom.values().iter().zip(&phi) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda2_skips_orthogonal_members() {
        let u = update_atom_lambda2(array![[0.0, 5.0], [2.0, 0.0]].view(), &atom(&[1.0, 0.0])).unwrap();
        assert_eq!(u.skipped, vec![0]);
        assert_eq!(u.atom.values(), &[1.0, 0.0]);
        let r = update_atom_lambda2(array![[0.0, 5.0]].view(), &atom(&[1.0, 0.0]));
        assert!(matches!(r, Err(Error::NearOrthogonalMember)));
    }

    #[test]
    fn oja_fixed_points() {
        let phi = atom(&[1.0, 0.0]);
        assert_eq!(update_atom_oja(&[0.0, 3.0], &phi, 0.1).unwrap(), phi);
        assert_eq!(update_atom_oja(&[1.0, 0.0], &phi, 0.1).unwrap(), phi);
        assert!(update_atom_oja(&[1.0, 0.0], &phi, 0.0).is_err());
    }

    #[test]
    fn batch_two_orthogonal_lines() {
        let x = array![[1.0, 0.0], [-2.0, 0.0], [3.0, 0.0], [0.0, 1.5], [0.0, -0.5], [0.0, 4.0]];
        let cfg = TrainConfig { k_per_layer: 2, seed: 3, ..Default::default() };
        let (_, report) = train_shallow_batch(x.view(), &cfg).unwrap();
        assert!(report.layers[0].final_loss() < 1e-10);
    }

    #[test]
    fn batch_distinct_directions_n_equals_k() {
        let x = array![[1.0, 0.2, 0.0], [0.0, 1.0, 0.3], [0.5, 0.0, 1.0]];
        let cfg = TrainConfig { k_per_layer: 3, seed: 1, ..Default::default() };
        let (dict, report) = train_shallow_batch(x.view(), &cfg).unwrap();
        assert_eq!(report.layers[0].final_loss(), 0.0);
        for r in x.outer_iter() {
            assert!(dict.atoms().iter().any(|a| collinear(a.values(), &r.to_vec())));
        }
    }

    #[test]
    fn batch_needs_enough_samples() {
        let cfg = TrainConfig { k_per_layer: 3, ..Default::default() };
        let r = train_shallow_batch(array![[1.0, 0.0]].view(), &cfg);
        assert!(matches!(r, Err(Error::InsufficientSamples { n: 1, k: 3 })));
    }

    #[test]
    fn online_lambda2_converges_on_single_direction() {
        let x = array![[2.0, 1.0], [4.0, 2.0], [-1.0, -0.5]];
        let cfg = TrainConfig { k_per_layer: 1, rule: Rule::OnlineLambda2, seed: 9, ..Default::default() };
        let (dict, report) = train_shallow_online(x.view(), &cfg).unwrap();
        assert!(collinear(dict.atom(0).values(), &[2.0, 1.0]));
        assert!(report.layers[0].final_loss() < 1e-20);
    }

    #[test]
    fn online_rejects_batch_rule() {
        let cfg = TrainConfig { k_per_layer: 1, ..Default::default() };
        assert!(train_shallow_online(array![[1.0, 0.0]].view(), &cfg).is_err());
    }
}
