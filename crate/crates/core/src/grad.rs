//! Exact gradients of the deep residual loss `‖R⁽ᴸ⁾‖²` with respect to the selected atoms.
//!
//! Winner-take-all selection is piecewise constant, so derivatives are taken with the
//! selections held fixed. For the atom selected at layer `i`:
//!
//! ```text
//! dP⁽ⁱ⁾/dφ = (⟨R,φ⟩ I + φ Rᵀ) / ‖φ‖² − 2 ⟨R,φ⟩ φ φᵀ / ‖φ‖⁴        R = R⁽ⁱ⁻¹⁾
//! dR⁽ⁱ⁾/dφ = −dP⁽ⁱ⁾/dφ
//! dR⁽ʲ⁾/dφ = (I − φ_j φ_jᵀ / ‖φ_j‖²) dR⁽ʲ⁻¹⁾/dφ                     j > i
//! ```
//!
//! Matrices are in numerator layout: row = output coordinate, column = atom coordinate.

use log::warn;
use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::deep::decompose;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::model::{Atom, DecompositionTrace, DeepModel, Dictionary};
use crate::selection::scores;

/// Jacobian of a layer-`to` quantity with respect to the atom selected at layer `from`.
/// Blocks with `to < from` are identically zero and never built.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlock {
    pub matrix: Array2<f64>,
    pub from: usize,
    pub to: usize,
}

impl JacobianBlock {
    pub fn negated(mut self) -> Self {
        self.matrix.mapv_inplace(|v| -v);
        self
    }
}

/// `dP/dφ` for the projection of `r_prev` on `atom`, tagged as layer `layer`.
pub fn jacobian_init(r_prev: &[f64], atom: &Atom, layer: usize) -> Result<JacobianBlock> {
    let d = atom.dim();
    if r_prev.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: r_prev.len() });
    }
    let phi = atom.values();
    let pp = atom.squared_norm();
    let rp = dot(r_prev, phi);
    let matrix = Array2::from_shape_fn((d, d), |(i, j)| {
        let diag = if i == j { rp } else { 0.0 };
        (diag + phi[i] * r_prev[j]) / pp - 2.0 * rp * phi[i] * phi[j] / (pp * pp)
    });
    Ok(JacobianBlock { matrix, from: layer, to: layer })
}

/// Pushes a block one layer forward through the deflation by `atom_next`.
pub fn jacobian_propagate(block: &JacobianBlock, atom_next: &Atom) -> Result<JacobianBlock> {
    let d = atom_next.dim();
    if block.matrix.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, found: block.matrix.nrows() });
    }
    let phi = atom_next.values();
    let pp = atom_next.squared_norm();
    // φᵀA, one entry per column
    let row: Vec<f64> =
        block.matrix.columns().into_iter().map(|c| c.iter().zip(phi).map(|(a, b)| a * b).sum()).collect();
    let mut matrix = block.matrix.clone();
    for ((i, j), v) in matrix.indexed_iter_mut() {
        *v -= phi[i] * row[j] / pp;
    }
    Ok(JacobianBlock { matrix, from: block.from, to: block.to + 1 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerGradient {
    pub atom_index: usize,
    /// Gradient with respect to the selected atom. Every other atom of the layer has
    /// gradient exactly zero.
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossGradient {
    /// `‖R⁽ᴸ⁾‖²`
    pub loss: f64,
    pub layers: Vec<LayerGradient>,
    /// Layers whose selection was an exact tie; their gradient follows the lowest index.
    pub tied_layers: Vec<usize>,
}

fn tied(x: &[f64], dict: &Dictionary, chosen: usize) -> Result<bool> {
    let s = scores(x, dict)?;
    Ok(s.iter().enumerate().any(|(k, &v)| k != chosen && v == s[chosen]))
}

fn gradient_from_trace(trace: &DecompositionTrace, model: &DeepModel) -> Result<LossGradient> {
    let depth = model.depth();
    let r_last = trace.final_residual();
    let mut tied_layers = Vec::new();
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let a = trace.assignments[l];
        if !a.zero_input && tied(&trace.residuals[l], &model.layers()[l], a.atom_index)? {
            tied_layers.push(l);
        }
        let atom = model.layers()[l].atom(a.atom_index);
        let mut block = jacobian_init(&trace.residuals[l], atom, l)?.negated();
        for j in l + 1..depth {
            let next = model.layers()[j].atom(trace.assignments[j].atom_index);
            block = jacobian_propagate(&block, next)?;
        }
        // 2 (dR⁽ᴸ⁾/dφ)ᵀ R⁽ᴸ⁾
        let gradient = block
            .matrix
            .columns()
            .into_iter()
            .map(|c| 2.0 * c.iter().zip(r_last).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        layers.push(LayerGradient { atom_index: a.atom_index, gradient });
    }
    if !tied_layers.is_empty() {
        warn!("selection tie at layer(s) {tied_layers:?}; gradient follows the lowest-index branch");
    }
    Ok(LossGradient { loss: norm_sq(r_last), layers, tied_layers })
}

/// Gradient of `‖R⁽ᴸ⁾‖²` for one sample with respect to each layer's selected atom.
pub fn loss_gradient(x: &[f64], model: &DeepModel) -> Result<LossGradient> {
    let trace = decompose(x, model)?;
    gradient_from_trace(&trace, model)
}

/// `‖R⁽ᴸ⁾‖²` with the atom used at every layer given explicitly.
pub fn pinned_loss(x: &[f64], atoms: &[Vec<f64>]) -> f64 {
    let mut r = x.to_vec();
    for phi in atoms {
        let c = dot(&r, phi) / norm_sq(phi);
        for (ri, p) in r.iter_mut().zip(phi) {
            *ri -= c * p;
        }
    }
    norm_sq(&r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    /// Per layer, `‖g − g_fd‖∞ / max(‖g‖∞, ‖g_fd‖∞)` (zero when both vanish).
    pub layer_errors: Vec<f64>,
    pub max_rel_error: f64,
}

/// Relative error between two gradient vectors in the max norm.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Compares [`loss_gradient`] with central finite differences of [`pinned_loss`], using the
/// step `h = 1e-5 · max(1, |φ_i|)` per coordinate.
pub fn finite_difference_check(x: &[f64], model: &DeepModel) -> Result<GradCheck> {
    let trace = decompose(x, model)?;
    let analytic = gradient_from_trace(&trace, model)?;
    let selected: Vec<Vec<f64>> = trace
        .assignments
        .iter()
        .zip(model.layers())
        .map(|(a, d)| d.atom(a.atom_index).values().to_vec())
        .collect();
    let mut layer_errors = Vec::with_capacity(selected.len());
    for (l, g) in analytic.layers.iter().enumerate() {
        let mut fd = vec![0.0; g.gradient.len()];
        for (i, slot) in fd.iter_mut().enumerate() {
            let h = 1e-5 * selected[l][i].abs().max(1.0);
            let mut plus = selected.clone();
            plus[l][i] += h;
            let mut minus = selected.clone();
            minus[l][i] -= h;
            *slot = (pinned_loss(x, &plus) - pinned_loss(x, &minus)) / (2.0 * h);
        }
        layer_errors.push(relative_error(&g.gradient, &fd));
    }
    let max_rel_error = layer_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradCheck { layer_errors, max_rel_error })
}

/// Settings for the optional joint refinement of all layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub epochs: usize,
    /// Initial step; halved (up to 30 times) until the mean loss decreases.
    pub step: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { epochs: 10, step: 0.1 }
    }
}

fn mean_final_energy(samples: &Array2<f64>, model: &DeepModel) -> Result<f64> {
    let mut total = 0.0;
    for r in samples.outer_iter() {
        total += decompose(r.as_slice().expect("standard"), model)?.energies.last().copied().unwrap_or(0.0);
    }
    Ok(total / samples.nrows().max(1) as f64)
}

/// Joint gradient descent on the mean deep loss. Selections are recomputed every epoch and
/// a step is only taken when it lowers the loss. Returns the refined model and the mean loss
/// before refinement and after each accepted epoch.
pub fn refine_joint(samples: ArrayView2<'_, f64>, model: &DeepModel, config: &RefineConfig) -> Result<(DeepModel, Vec<f64>)> {
    let samples = samples.as_standard_layout().into_owned();
    if samples.ncols() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: samples.ncols() });
    }
    let n = samples.nrows().max(1) as f64;
    let mut model = model.clone();
    let mut loss = mean_final_energy(&samples, &model)?;
    let mut history = vec![loss];
    for _ in 0..config.epochs {
        let mut grads: Vec<Vec<Vec<f64>>> =
            model.layers().iter().map(|d| vec![vec![0.0; model.dim()]; d.len()]).collect();
        for r in samples.outer_iter() {
            let g = loss_gradient(r.as_slice().expect("standard"), &model)?;
            for (l, lg) in g.layers.iter().enumerate() {
                for (acc, v) in grads[l][lg.atom_index].iter_mut().zip(&lg.gradient) {
                    *acc += v / n;
                }
            }
        }
        let mut step = config.step;
        let mut accepted = None;
        for _ in 0..=30 {
            if let Some(trial) = stepped(&model, &grads, step) {
                let trial_loss = mean_final_energy(&samples, &trial)?;
                if trial_loss < loss {
                    accepted = Some((trial, trial_loss));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((m, l)) => {
                model = m;
                loss = l;
                history.push(l);
            }
            None => break,
        }
    }
    Ok((model, history))
}

fn stepped(model: &DeepModel, grads: &[Vec<Vec<f64>>], step: f64) -> Option<DeepModel> {
    let mut out = model.clone();
    for (l, dict) in out.layers_mut().iter_mut().enumerate() {
        for (k, g) in grads[l].iter().enumerate() {
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let values = dict.atom(k).values().iter().zip(g).map(|(a, gi)| a - step * gi).collect();
            dict.replace(k, Atom::new(values).ok()?).ok()?;
        }
    }
    Some(out)
}
