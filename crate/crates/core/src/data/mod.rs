//! Dataset ingestion, synthetic generators and model persistence.

mod csv;
mod idx;
mod model_file;
mod synth;

use std::fmt;

use ndarray::Array2;
use serde::Serialize;

pub use self::csv::{load_csv, read_csv, write_csv, write_matrix_csv};
pub(crate) use self::csv::format_number;
pub use self::idx::{load_idx, parse_idx};
pub use self::model_file::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use self::synth::{gen_clustered_lines, gen_gaussian, gen_subspace, gen_uniform_sphere};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Csv,
    Idx,
    Synth(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Csv => f.write_str("csv"),
            Source::Idx => f.write_str("idx"),
            Source::Synth(name) => write!(f, "synth:{name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Every non-zero row rescaled to unit norm.
    UnitNorm,
    /// Column means subtracted.
    Center,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetMeta {
    pub n_samples: usize,
    pub dim: usize,
    pub source: Source,
    pub normalization: Normalization,
}

impl DatasetMeta {
    pub fn new(data: &Array2<f64>, source: Source) -> Self {
        Self { n_samples: data.nrows(), dim: data.ncols(), source, normalization: Normalization::None }
    }
}

/// Applies `how` in place and records it in `meta`.
pub fn normalize(data: &mut Array2<f64>, meta: &mut DatasetMeta, how: Normalization) {
    match how {
        Normalization::None => {}
        Normalization::UnitNorm => {
            for mut row in data.outer_iter_mut() {
                let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    row.mapv_inplace(|v| v / n);
                }
            }
        }
        Normalization::Center => {
            if data.nrows() > 0 {
                let mean = data.mean_axis(ndarray::Axis(0)).expect("non-empty");
                for mut row in data.outer_iter_mut() {
                    row -= &mean;
                }
            }
        }
    }
    meta.normalization = how;
}
