use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GoalError, Result};
use crate::model::GaugeModel;
use crate::numerics::Matrix;

use super::write_atomic;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub d: usize,
    pub g: usize,
    pub k: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub seed: u64,
    pub iterations: usize,
    pub final_objective: f64,
}

/// JSON model document. Matrices are nested row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub dimensions: Dimensions,
    pub r: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub eps_cl: f64,
    pub lambda_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitMetadata>,
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<Matrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(GoalError::invalid(format!(
            "model file: {what} is not {nrows}x{ncols}"
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_model(model: &GaugeModel, fit: Option<FitMetadata>) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            dimensions: Dimensions {
                d: model.d(),
                g: model.g(),
                k: model.k(),
                m: model.m(),
            },
            r: to_rows(&model.r),
            s: to_rows(&model.s),
            lambda: to_rows(&model.lambda),
            eps_cl: model.eps_cl,
            lambda_floor: model.lambda_floor,
            fit,
        }
    }

    pub fn to_model(&self) -> Result<GaugeModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(GoalError::invalid(format!(
                "unsupported model format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let Dimensions { d, g, k, m } = self.dimensions;
        GaugeModel::new(
            from_rows(&self.r, d, g, "R")?,
            from_rows(&self.s, g, k, "S")?,
            from_rows(&self.lambda, m, k, "Lambda")?,
            self.eps_cl,
            self.lambda_floor,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GoalError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| GoalError::format(path, e.to_string()))
    }
}

pub fn save_model(path: &Path, model: &GaugeModel, fit: Option<FitMetadata>) -> Result<()> {
    ModelFile::from_model(model, fit).save(path)
}

pub fn load_model(path: &Path) -> Result<GaugeModel> {
    ModelFile::load(path)?
        .to_model()
        .map_err(|e| GoalError::format(path, e.to_string()))
}

/// Pretty-printed JSON, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}
