//! Deep residual Oja networks.
//!
//! Layer `l` encodes the residual left by layers `1..l`:
//!
//! ```text
//! R⁽⁰⁾ = x,   R⁽ˡ⁾ = R⁽ˡ⁻¹⁾ − P⁽ˡ⁾,   P⁽ˡ⁾ = ⟨R⁽ˡ⁻¹⁾, φ_κ⟩ / ‖φ_κ‖² · φ_κ
//! ```
//!
//! so `‖R⁽ᴸ⁾‖² = ‖x‖² Π_l (1 − cos²θ_l)` and the reconstruction is the flat template
//! `T = Σ_l P⁽ˡ⁾`. Training is greedy: each layer is fit on the current residuals and then
//! the residuals are advanced.

use log::{info, warn};
use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::seq::index;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq, orthogonalize_against};
use crate::model::{Atom, DecompositionTrace, DeepModel, Dictionary, TrainConfig};
use crate::selection::residual_step;
use crate::shallow::{batch_layer, online_layer, random_dictionary, update_atom_pca, LayerReport, TrainReport};

/// Residuals with norm below this are treated as fully explained during training.
pub const CONVERGED_NORM: f64 = 1e-12;

/// Decomposes `x` through an arbitrary stack of dictionaries (possibly empty).
pub fn decompose_layers(x: &[f64], layers: &[Dictionary]) -> Result<DecompositionTrace> {
    let mut residuals = vec![x.to_vec()];
    let mut projections = Vec::with_capacity(layers.len());
    let mut assignments = Vec::with_capacity(layers.len());
    let mut energies = vec![norm_sq(x)];
    let mut converged_at = (energies[0] == 0.0).then_some(0);
    for (l, dict) in layers.iter().enumerate() {
        let step = residual_step(residuals.last().expect("non-empty"), dict)?;
        let e = norm_sq(&step.residual);
        if e == 0.0 && converged_at.is_none() {
            converged_at = Some(l + 1);
        }
        energies.push(e);
        projections.push(step.projection);
        residuals.push(step.residual);
        assignments.push(step.assignment);
    }
    Ok(DecompositionTrace { projections, residuals, assignments, energies, converged_at })
}

/// Runs the residual recursion of `model` on one sample.
pub fn decompose(x: &[f64], model: &DeepModel) -> Result<DecompositionTrace> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: x.len() });
    }
    decompose_layers(x, model.layers())
}

/// Sum of all per-layer projections; the input equals this plus the final residual.
pub fn flatten_template(trace: &DecompositionTrace) -> Vec<f64> {
    let mut t = vec![0.0; trace.input().len()];
    for p in &trace.projections {
        for (ti, pi) in t.iter_mut().zip(p) {
            *ti += pi;
        }
    }
    t
}

/// Greedy layerwise training. Each layer is trained on the residuals of the previous ones
/// with the rule in `config`; samples whose residual has vanished are left out of the
/// statistics of later layers.
pub fn train_deep(samples: ArrayView2<'_, f64>, config: &TrainConfig) -> Result<(DeepModel, TrainReport)> {
    config.validate()?;
    let mut residuals = samples.as_standard_layout().into_owned();
    let (n, dim) = residuals.dim();
    if dim == 0 {
        return Err(Error::InvalidConfig("samples must have at least one column".into()));
    }
    let k = config.effective_k(dim);
    if k == 0 {
        return Err(Error::InvalidConfig("layer width must be positive".into()));
    }
    if n < k {
        return Err(Error::InsufficientSamples { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let total: f64 = residuals.outer_iter().map(|r| norm_sq(r.as_slice().expect("standard"))).sum();

    let mut layers = Vec::with_capacity(config.depth);
    let mut report = TrainReport::default();
    for l in 0..config.depth {
        let active: Vec<usize> = (0..n)
            .filter(|&i| norm_sq(residuals.row(i).as_slice().expect("standard")) >= CONVERGED_NORM * CONVERGED_NORM)
            .collect();
        let (dict, layer_report) = if active.is_empty() {
            warn!("layer {}: every residual has vanished; layer left untrained", l + 1);
            let dict = random_dictionary(k, dim, &mut rng);
            (dict, LayerReport { untrained: true, converged: true, losses: vec![0.0], ..Default::default() })
        } else {
            let sub = if active.len() == n { residuals.clone() } else { residuals.select(Axis(0), &active) };
            if config.rule.is_online() {
                online_layer(&sub, k, config, &mut rng, |_| {})?
            } else {
                batch_layer(&sub, k, config, &mut rng)?
            }
        };
        info!(
            "layer {}: {} epochs, loss {:.6e} (converged: {})",
            l + 1,
            layer_report.epochs,
            layer_report.final_loss(),
            layer_report.converged
        );

        let mut captured = 0.0;
        for mut r in residuals.outer_iter_mut() {
            let step = residual_step(r.as_slice().expect("standard"), &dict)?;
            captured += norm_sq(&step.projection);
            r.as_slice_mut().expect("standard").copy_from_slice(&step.residual);
        }
        report.level_energy.push(if total > 0.0 { (captured / total).clamp(0.0, 1.0) } else { 0.0 });
        report.layers.push(layer_report);
        layers.push(dict);
    }
    let left: f64 = residuals.outer_iter().map(|r| norm_sq(r.as_slice().expect("standard"))).sum();
    report.residual_energy = if total > 0.0 { left / total } else { 0.0 };
    Ok((DeepModel::new(layers, config.clone())?, report))
}

/// Reconstruction of `x` using every atom of `dict` at once: `Σ_k ⟨x,φ_k⟩/‖φ_k‖² φ_k`.
pub fn multi_atom_reconstruct(x: &[f64], dict: &Dictionary) -> Result<Vec<f64>> {
    if x.len() != dict.dim() {
        return Err(Error::DimensionMismatch { expected: dict.dim(), found: x.len() });
    }
    let mut out = vec![0.0; x.len()];
    for a in dict.atoms() {
        axpy(dot(x, a.values()) / a.squared_norm(), a.values(), &mut out);
    }
    Ok(out)
}

/// `x` minus the projections onto every atom except `skip`.
fn leave_one_out(x: &[f64], atoms: &[Vec<f64>], skip: usize) -> Vec<f64> {
    let mut y = x.to_vec();
    for (k, a) in atoms.iter().enumerate() {
        if k != skip {
            axpy(-dot(x, a) / norm_sq(a), a, &mut y);
        }
    }
    y
}

fn full_residual_energy(x: &[f64], atoms: &[Vec<f64>]) -> f64 {
    let mut y = x.to_vec();
    for a in atoms {
        axpy(-dot(x, a) / norm_sq(a), a, &mut y);
    }
    norm_sq(&y)
}

/// Index of the sample with the largest residual after removing the `basis` projections
/// whose orthogonalized copy is non-degenerate, together with that copy.
fn farthest_direction(samples: &Array2<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in samples.outer_iter() {
        let mut v = r.to_vec();
        let xx = norm_sq(&v);
        if xx == 0.0 {
            continue;
        }
        orthogonalize_against(&mut v, basis.iter().map(Vec::as_slice));
        let e = norm_sq(&v);
        if e > 1e-18 * xx && best.as_ref().is_none_or(|b| e > b.0) {
            best = Some((e, v));
        }
    }
    best.map(|b| b.1)
}

/// Coordinate scheme for a layer whose samples use every atom at once.
///
/// Atoms start as `k` seeded distinct samples, Gram–Schmidt orthogonalized (a sample that
/// collapses is replaced by the farthest remaining direction). Each pass then cycles over
/// the atoms and refits atom `k'` by [`update_atom_pca`] on the samples with the other
/// atoms' projections removed. Because those targets are orthogonal to the other atoms,
/// the refit atom is too, so the atoms stay mutually orthogonal.
pub fn fit_layer_multi_atom(samples: ArrayView2<'_, f64>, k: usize, passes: usize, seed: u64) -> Result<Dictionary> {
    let samples = samples.as_standard_layout().into_owned();
    let (n, dim) = samples.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidConfig(format!("multi-atom layer needs 1 <= K <= D, got K={k}, D={dim}")));
    }
    if n < k {
        return Err(Error::InsufficientSamples { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nonzero: Vec<usize> = (0..n).filter(|&i| samples.row(i).iter().any(|v| *v != 0.0)).collect();
    if nonzero.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let picks = index::sample(&mut rng, nonzero.len(), k.min(nonzero.len())).into_vec();

    let mut atoms: Vec<Vec<f64>> = Vec::with_capacity(k);
    for slot in 0..k {
        let mut v = picks.get(slot).map(|&i| samples.row(nonzero[i]).to_vec()).unwrap_or_else(|| vec![0.0; dim]);
        let vv = norm_sq(&v);
        orthogonalize_against(&mut v, atoms.iter().map(Vec::as_slice));
        if !(norm_sq(&v) > 1e-18 * vv) {
            v = match farthest_direction(&samples, &atoms) {
                Some(d) => d,
                None => {
                    // data span fewer than k directions: complete with a random orthogonal direction
                    let mut r = random_dictionary(1, dim, &mut rng).atom(0).values().to_vec();
                    orthogonalize_against(&mut r, atoms.iter().map(Vec::as_slice));
                    r
                }
            };
        }
        atoms.push(v);
    }

    for _ in 0..passes {
        for slot in 0..k {
            let targets: Vec<Vec<f64>> =
                samples.outer_iter().map(|r| leave_one_out(r.as_slice().expect("standard"), &atoms, slot)).collect();
            let members: Vec<usize> = (0..n).filter(|&i| norm_sq(&targets[i]) > 1e-24).collect();
            let others: Vec<Vec<f64>> =
                atoms.iter().enumerate().filter(|(j, _)| *j != slot).map(|(_, a)| a.clone()).collect();
            let mut updated = if members.is_empty() {
                // nothing left for this slot: reseed from the worst-reconstructed sample
                let worst = (0..n)
                    .map(|i| (i, full_residual_energy(samples.row(i).as_slice().expect("standard"), &atoms)))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
                match worst {
                    Some((i, e)) if e > 0.0 => {
                        let mut v = samples.row(i).to_vec();
                        orthogonalize_against(&mut v, others.iter().map(Vec::as_slice));
                        if norm_sq(&v) > 0.0 { v } else { atoms[slot].clone() }
                    }
                    _ => atoms[slot].clone(),
                }
            } else {
                let mut y = Array2::zeros((members.len(), dim));
                for (row, &i) in members.iter().enumerate() {
                    y.row_mut(row).as_slice_mut().expect("standard").copy_from_slice(&targets[i]);
                }
                update_atom_pca(y.view(), &Atom::new(atoms[slot].clone())?)?.into_values()
            };
            // strip rounding drift so the atoms stay orthogonal
            orthogonalize_against(&mut updated, others.iter().map(Vec::as_slice));
            atoms[slot] = updated;
        }
    }
    Dictionary::new(atoms.into_iter().map(Atom::new).collect::<Result<Vec<_>>>()?)
}
