//! Dictionaries, deep models and the per-sample containers they produce.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq};

/// Orthogonality tolerance for complete bases, relative to the atom norms.
pub const ORTHOGONAL_TOL: f64 = 1e-10;

/// One dictionary element. Stored un-normalized; the squared norm is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    values: Vec<f64>,
    squared_norm: f64,
}

impl Atom {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let squared_norm = norm_sq(&values);
        if !(squared_norm > 0.0) || !squared_norm.is_finite() {
            return Err(Error::ZeroAtom);
        }
        Ok(Self { values, squared_norm })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn squared_norm(&self) -> f64 {
        self.squared_norm
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm.sqrt()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// The same direction with unit norm.
    pub fn normalized(&self) -> Atom {
        let n = self.norm();
        Atom::new(self.values.iter().map(|v| v / n).collect()).expect("non-zero atom")
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// An ordered set of atoms sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Vec<Atom>,
    dim: usize,
}

impl Dictionary {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let dim = atoms.first().ok_or(Error::EmptyDictionary)?.dim();
        if dim == 0 {
            return Err(Error::InvalidConfig("atoms must have positive dimension".into()));
        }
        if let Some(a) = atoms.iter().find(|a| a.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: a.dim() });
        }
        Ok(Self { atoms, dim })
    }

    /// One atom per row.
    pub fn from_rows(rows: ArrayView2<'_, f64>) -> Result<Self> {
        let atoms = rows.outer_iter().map(|r| Atom::new(r.to_vec())).collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, k: usize) -> &Atom {
        &self.atoms[k]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn replace(&mut self, k: usize, atom: Atom) -> Result<()> {
        if atom.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: atom.dim() });
        }
        self.atoms[k] = atom;
        Ok(())
    }

    /// Copy with every atom rescaled to unit norm.
    pub fn normalized(&self) -> Dictionary {
        Dictionary { atoms: self.atoms.iter().map(Atom::normalized).collect(), dim: self.dim }
    }
}

/// Per-sample update rule used while training a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Alternating assignment and per-cluster leading eigenvector.
    BatchPca,
    /// Online cosine-weighted average step.
    OnlineLambda1,
    /// Online convex-NMF style step.
    OnlineLambda2,
    /// Online Oja rule with a constant learning rate.
    OnlineOja,
}

impl Rule {
    pub fn is_online(self) -> bool {
        !matches!(self, Rule::BatchPca)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k_per_layer: usize,
    /// When set, the layer width is `round(F * D)` instead of `k_per_layer`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub increase_factor: Option<f64>,
    pub depth: usize,
    pub rule: Rule,
    /// Oja learning rate; ignored by the other rules.
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub tol_rel_loss: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k_per_layer: 8,
            increase_factor: None,
            depth: 1,
            rule: Rule::BatchPca,
            learning_rate: 0.05,
            max_epochs: 100,
            tol_rel_loss: 1e-9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.k_per_layer == 0 && self.increase_factor.is_none() {
            return bad("k_per_layer must be positive");
        }
        if let Some(f) = self.increase_factor {
            if !(f > 0.0) || !f.is_finite() {
                return bad("increase_factor must be positive");
            }
        }
        if self.depth == 0 {
            return bad("depth must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if !(self.tol_rel_loss > 0.0) {
            return bad("tol_rel_loss must be positive");
        }
        if self.rule == Rule::OnlineOja && !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive for the Oja rule");
        }
        Ok(())
    }

    /// Number of atoms per layer for inputs of dimension `dim`.
    pub fn effective_k(&self, dim: usize) -> usize {
        match self.increase_factor {
            Some(f) => ((f * dim as f64).round() as usize).max(1),
            None => self.k_per_layer,
        }
    }
}

/// Stacked dictionaries of a deep residual network.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepModel {
    layers: Vec<Dictionary>,
    dim: usize,
    pub config: TrainConfig,
}

impl DeepModel {
    pub fn new(layers: Vec<Dictionary>, config: TrainConfig) -> Result<Self> {
        let dim = layers.first().ok_or(Error::EmptyModel)?.dim();
        if let Some(l) = layers.iter().find(|l| l.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: l.dim() });
        }
        Ok(Self { layers, dim, config })
    }

    pub fn layers(&self) -> &[Dictionary] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dictionary] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Winner-take-all choice for one input against one dictionary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub atom_index: usize,
    /// `⟨x, φ⟩ / ‖φ‖²`
    pub coefficient: f64,
    /// `⟨x, φ⟩² / (‖x‖² ‖φ‖²)`, zero for a zero input.
    pub cos_sq: f64,
    /// Set when the input had zero norm; index and coefficient are then 0.
    pub zero_input: bool,
}

impl Assignment {
    pub fn zero() -> Self {
        Self { atom_index: 0, coefficient: 0.0, cos_sq: 0.0, zero_input: true }
    }
}

/// Layer-by-layer record of a deep decomposition of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTrace {
    /// `P⁽¹⁾ … P⁽ᴸ⁾`
    pub projections: Vec<Vec<f64>>,
    /// `R⁽⁰⁾ … R⁽ᴸ⁾`, with `R⁽⁰⁾` the input.
    pub residuals: Vec<Vec<f64>>,
    pub assignments: Vec<Assignment>,
    /// `‖R⁽ˡ⁾‖²` for `l = 0..=L`.
    pub energies: Vec<f64>,
    /// First level whose residual is exactly zero.
    pub converged_at: Option<usize>,
}

impl DecompositionTrace {
    pub fn input(&self) -> &[f64] {
        &self.residuals[0]
    }

    pub fn final_residual(&self) -> &[f64] {
        self.residuals.last().expect("trace holds the input residual")
    }

    pub fn depth(&self) -> usize {
        self.projections.len()
    }
}

/// Coefficient of `x` along `atom`: `⟨x, φ⟩ / ‖φ‖²`.
pub fn project_coefficient(x: &[f64], atom: &Atom) -> Result<f64> {
    if x.len() != atom.dim() {
        return Err(Error::DimensionMismatch { expected: atom.dim(), found: x.len() });
    }
    Ok(dot(x, atom.values()) / atom.squared_norm())
}

/// Exact expansion of `x` in a complete orthogonal basis.
pub fn reconstruct_complete(x: &[f64], basis: &Dictionary) -> Result<Vec<f64>> {
    if basis.len() != basis.dim() {
        return Err(Error::NotComplete { dim: basis.dim(), count: basis.len() });
    }
    for (j, a) in basis.atoms().iter().enumerate() {
        for (k, b) in basis.atoms().iter().enumerate().skip(j + 1) {
            if dot(a.values(), b.values()).abs() > ORTHOGONAL_TOL * a.norm() * b.norm() {
                return Err(Error::NotOrthogonal(j, k));
            }
        }
    }
    let mut out = vec![0.0; basis.dim()];
    for atom in basis.atoms() {
        let c = project_coefficient(x, atom)?;
        axpy(c, atom.values(), &mut out);
    }
    Ok(out)
}
