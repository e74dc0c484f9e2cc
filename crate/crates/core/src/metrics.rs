//! Reconstruction and per-level energy metrics, cluster purity, and their CSV export.
//!
//! Metrics take an immutable model; per-sample work runs in parallel and is reduced in
//! sample order so results do not depend on the thread count.

use std::io::Write;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::format_number;
use crate::deep::{decompose_layers, flatten_template};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::model::{DecompositionTrace, DeepModel, Dictionary};
use crate::shallow::TrainReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub n_samples: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// `Σ‖x − T‖² / Σ‖x‖²`, zero when the data has no energy.
    pub relative: f64,
}

/// Captured energy share of each level plus the share left in the final residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLevels {
    pub levels: Vec<f64>,
    pub residual: f64,
    /// Residual share after each level; `residual_after[l] = 1 − Σ_{i≤l} levels[i]` up to rounding.
    pub residual_after: Vec<f64>,
}

fn traces(samples: ArrayView2<'_, f64>, layers: &[Dictionary]) -> Result<Vec<DecompositionTrace>> {
    if let Some(d) = layers.first() {
        if samples.ncols() != d.dim() {
            return Err(Error::DimensionMismatch { expected: d.dim(), found: samples.ncols() });
        }
    }
    let samples = samples.as_standard_layout();
    (0..samples.nrows())
        .into_par_iter()
        .map(|n| decompose_layers(samples.row(n).as_slice().expect("standard layout"), layers))
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Summary of `‖x − T‖²` over the samples for an arbitrary stack of layers.
pub fn reconstruction_error_layers(samples: ArrayView2<'_, f64>, layers: &[Dictionary]) -> Result<ErrorSummary> {
    let traces = traces(samples, layers)?;
    let mut errors: Vec<f64> = traces
        .par_iter()
        .map(|t| {
            let template = flatten_template(t);
            t.input().iter().zip(&template).map(|(x, p)| (x - p) * (x - p)).sum()
        })
        .collect();
    let n = errors.len();
    let total_err: f64 = errors.iter().sum();
    let total_energy: f64 = traces.iter().map(|t| t.energies[0]).sum();
    let max = errors.iter().copied().fold(0.0, f64::max);
    Ok(ErrorSummary {
        n_samples: n,
        mean: if n == 0 { 0.0 } else { total_err / n as f64 },
        median: median(&mut errors),
        max,
        relative: if total_energy > 0.0 { total_err / total_energy } else { 0.0 },
    })
}

pub fn reconstruction_error(samples: ArrayView2<'_, f64>, model: &DeepModel) -> Result<ErrorSummary> {
    reconstruction_error_layers(samples, model.layers())
}

/// Level `l` gets `Σ_n ‖P⁽ˡ⁾_n‖² / Σ_n ‖x_n‖²`.
pub fn energy_per_level(samples: ArrayView2<'_, f64>, model: &DeepModel) -> Result<EnergyLevels> {
    let traces = traces(samples, model.layers())?;
    let depth = model.depth();
    let total: f64 = traces.iter().map(|t| t.energies[0]).sum();
    // shares are fractions of the total; clamp the last-ulp overshoot of a full capture
    let share = |v: f64| if total > 0.0 { (v / total).clamp(0.0, 1.0) } else { 0.0 };
    let levels = (0..depth).map(|l| share(traces.iter().map(|t| norm_sq(&t.projections[l])).sum())).collect();
    let residual_after: Vec<f64> =
        (1..=depth).map(|l| share(traces.iter().map(|t| t.energies[l]).sum())).collect();
    let residual = residual_after.last().copied().unwrap_or(if total > 0.0 { 1.0 } else { 0.0 });
    Ok(EnergyLevels { levels, residual, residual_after })
}

/// `Σ_k max_label |{n : assignment n = k, label n = label}| / N`.
pub fn cluster_purity(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: assignments.len(), found: labels.len() });
    }
    if assignments.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts: std::collections::BTreeMap<usize, std::collections::BTreeMap<usize, usize>> = Default::default();
    for (&a, &l) in assignments.iter().zip(labels) {
        *counts.entry(a).or_default().entry(l).or_default() += 1;
    }
    let hits: usize = counts.values().map(|c| c.values().copied().max().unwrap_or(0)).sum();
    Ok(hits as f64 / assignments.len() as f64)
}

/// One row per layer and epoch: `layer,epoch,mean_loss`. Epoch 0 is the loss at initialization.
pub fn write_epoch_csv<W: Write>(mut w: W, report: &TrainReport) -> Result<()> {
    writeln!(w, "layer,epoch,mean_loss")?;
    for (l, layer) in report.layers.iter().enumerate() {
        for (e, loss) in layer.losses.iter().enumerate() {
            writeln!(w, "{},{},{}", l + 1, e, format_number(*loss))?;
        }
    }
    Ok(())
}

/// One row per level: `level,captured,cumulative,residual`, where `cumulative + residual = 1`.
pub fn write_energy_csv<W: Write>(mut w: W, energy: &EnergyLevels) -> Result<()> {
    writeln!(w, "level,captured,cumulative,residual")?;
    let mut cumulative = 0.0;
    for (l, (c, r)) in energy.levels.iter().zip(&energy.residual_after).enumerate() {
        cumulative += c;
        writeln!(w, "{},{},{},{}", l + 1, format_number(*c), format_number(cumulative), format_number(*r))?;
    }
    Ok(())
}
