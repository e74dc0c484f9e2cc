//! Winner-take-all atom selection and the single-atom residual step.
//!
//! The winner maximizes `⟨x, φ_k⟩² / ‖φ_k‖²`. Dividing by `‖x‖²` as well gives the squared
//! cosine but is constant per sample, so the argmax is computed without it and the cosine
//! is derived afterwards. Ties go to the lowest index.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::model::{Assignment, Dictionary};

/// Result of subtracting the best atom's projection from an input.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStep {
    pub projection: Vec<f64>,
    pub residual: Vec<f64>,
    pub assignment: Assignment,
}

fn check_dim(x: &[f64], dict: &Dictionary) -> Result<()> {
    if x.len() != dict.dim() {
        return Err(Error::DimensionMismatch { expected: dict.dim(), found: x.len() });
    }
    Ok(())
}

/// Selection scores `⟨x, φ_k⟩² / ‖φ_k‖²` for every atom.
pub fn scores(x: &[f64], dict: &Dictionary) -> Result<Vec<f64>> {
    check_dim(x, dict)?;
    Ok(dict
        .atoms()
        .iter()
        .map(|a| {
            let d = dot(x, a.values());
            d * d / a.squared_norm()
        })
        .collect())
}

pub fn select_atom(x: &[f64], dict: &Dictionary) -> Result<Assignment> {
    check_dim(x, dict)?;
    let xx = norm_sq(x);
    if xx == 0.0 {
        return Err(Error::ZeroInput);
    }
    let mut best = 0;
    let mut best_dot = 0.0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, atom) in dict.atoms().iter().enumerate() {
        let d = dot(x, atom.values());
        let s = d * d / atom.squared_norm();
        if s > best_score {
            best = k;
            best_dot = d;
            best_score = s;
        }
    }
    let atom = dict.atom(best);
    Ok(Assignment {
        atom_index: best,
        coefficient: best_dot / atom.squared_norm(),
        cos_sq: (best_score / xx).clamp(0.0, 1.0),
        zero_input: false,
    })
}

/// Reconstruction error of `x` from its best atom: `‖x‖² (1 − cos²θ)`. Zero for a zero input.
pub fn shallow_error(x: &[f64], dict: &Dictionary) -> Result<f64> {
    match select_atom(x, dict) {
        Ok(a) => Ok(norm_sq(x) * (1.0 - a.cos_sq)),
        Err(Error::ZeroInput) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Projects `x` on its best atom and returns the projection and what is left.
///
/// A zero input yields zero projection and residual with a flagged assignment.
pub fn residual_step(x: &[f64], dict: &Dictionary) -> Result<ResidualStep> {
    let assignment = match select_atom(x, dict) {
        Ok(a) => a,
        Err(Error::ZeroInput) => Assignment::zero(),
        Err(e) => return Err(e),
    };
    let atom = dict.atom(assignment.atom_index);
    let projection: Vec<f64> = atom.values().iter().map(|v| assignment.coefficient * v).collect();
    let residual = x.iter().zip(&projection).map(|(a, p)| a - p).collect();
    Ok(ResidualStep { projection, residual, assignment })
}
