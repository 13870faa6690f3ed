//! Jump-set model: the set of admissible jumps as an exact d x A matrix.
//!
//! A model holds the jump matrix whose columns are the jump vectors. Entries
//! are exact: the matrix is given as a sum over declared constants,
//! `A = sum_k kappa_k * layers[k]`, where each layer is a d x A matrix of
//! rationals and the constants (kappa_1 = 1 always, further ones such as
//! sqrt3) are linearly independent over the rationals. An integer vector c
//! then satisfies `A c = 0` exactly when every layer maps c to zero, which
//! turns kernel computations into exact integer arithmetic regardless of
//! irrational jump coordinates.

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One rational layer of the jump matrix, tagged with the constant it
/// multiplies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    constant: String,
    matrix: Vec<Vec<BigRational>>,
}

impl Layer {
    pub fn new(constant: impl Into<String>, matrix: Vec<Vec<BigRational>>) -> Self {
        Layer {
            constant: constant.into(),
            matrix,
        }
    }

    pub fn constant(&self) -> &str {
        &self.constant
    }

    pub fn matrix(&self) -> &[Vec<BigRational>] {
        &self.matrix
    }
}

/// Numeric value of a declared layer constant, for the constants with a
/// built-in interpretation.
fn constant_value(label: &str) -> Option<f64> {
    match label {
        "1" => Some(1.0),
        "sqrt3" => Some(3.0f64.sqrt()),
        _ => None,
    }
}

/// The jump set of a process: ambient dimension, number of jump types, and
/// the exact layered jump matrix.
///
/// Immutable after construction; all derived forms (integerized layer rows,
/// the numeric matrix when every constant has a known value) are computed up
/// front.
#[derive(Debug, Clone)]
pub struct JumpModel {
    dim: usize,
    n_jumps: usize,
    layers: Vec<Layer>,
    /// Integerized layer rows, stacked: each row is a layer row scaled by the
    /// least common multiple of its layer's denominators. `A c = 0` over the
    /// rationals iff `stacked * c = 0` over the integers.
    stacked: Vec<Vec<BigInt>>,
    /// i64 copy of `stacked` when every entry fits, for fast scanning.
    stacked_i64: Option<Vec<Vec<i64>>>,
    /// Numeric d x A matrix when every layer constant is interpretable.
    numeric: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    constant: String,
    matrix: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct JumpModelJson {
    dim: usize,
    jumps: usize,
    layers: Vec<LayerJson>,
}

fn parse_rational(s: &str, layer: usize, row: usize, col: usize) -> Result<BigRational> {
    BigRational::from_str(s.trim()).map_err(|e| {
        Error::InvalidInput(format!(
            "layer {layer} entry ({row},{col}) {s:?} is not a rational: {e}"
        ))
    })
}

fn rational_string(r: &BigRational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl JumpModel {
    /// Build and validate a model from its layers.
    ///
    /// Requirements: at least one layer, the first with constant "1"; all
    /// layers of identical d x A shape with A >= 1; no jump is the zero
    /// vector; all jumps are pairwise distinct (checked on the exact stacked
    /// representation).
    pub fn new(dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidInput("at least one layer required".into()));
        }
        if layers[0].constant != "1" {
            return Err(Error::InvalidInput(format!(
                "first layer constant must be \"1\", got {:?}",
                layers[0].constant
            )));
        }
        let n_jumps = layers[0].matrix.first().map_or(0, Vec::len);
        if n_jumps == 0 {
            return Err(Error::InvalidInput("at least one jump type required".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.matrix.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "layer {k} has {} rows, expected dim {dim}",
                    layer.matrix.len()
                )));
            }
            for (i, row) in layer.matrix.iter().enumerate() {
                if row.len() != n_jumps {
                    return Err(Error::InvalidInput(format!(
                        "layer {k} row {i} has {} entries, expected {n_jumps}",
                        row.len()
                    )));
                }
            }
        }
        for (k, layer) in layers.iter().enumerate().skip(1) {
            if layers[..k].iter().any(|l| l.constant == layer.constant) {
                return Err(Error::InvalidInput(format!(
                    "duplicate layer constant {:?}",
                    layer.constant
                )));
            }
        }

        // Integerize each layer: multiply by the lcm of its denominators.
        let mut stacked: Vec<Vec<BigInt>> = Vec::new();
        for layer in &layers {
            let mut lcm = BigInt::from(1);
            for row in &layer.matrix {
                for e in row {
                    lcm = lcm.lcm(e.denom());
                }
            }
            for row in &layer.matrix {
                stacked.push(
                    row.iter()
                        .map(|e| {
                            let scaled = e * BigRational::from_integer(lcm.clone());
                            debug_assert!(scaled.is_integer());
                            scaled.to_integer()
                        })
                        .collect(),
                );
            }
        }

        // Column sanity on the exact representation.
        let column = |j: usize| -> Vec<&BigInt> { stacked.iter().map(|r| &r[j]).collect() };
        for j in 0..n_jumps {
            if column(j).iter().all(|e| e.is_zero()) {
                return Err(Error::InvalidInput(format!(
                    "jump {} is the zero vector",
                    j + 1
                )));
            }
            for j2 in 0..j {
                if column(j) == column(j2) {
                    return Err(Error::InvalidInput(format!(
                        "jumps {} and {} are identical",
                        j2 + 1,
                        j + 1
                    )));
                }
            }
        }

        let stacked_i64 = stacked
            .iter()
            .map(|row| row.iter().map(|e| e.to_i64()).collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>();

        let numeric = layers
            .iter()
            .map(|l| constant_value(&l.constant))
            .collect::<Option<Vec<f64>>>()
            .map(|consts| {
                let mut m = vec![vec![0.0; n_jumps]; dim];
                for (kappa, layer) in consts.iter().zip(&layers) {
                    for (i, row) in layer.matrix.iter().enumerate() {
                        for (j, e) in row.iter().enumerate() {
                            m[i][j] += kappa * e.to_f64().unwrap_or(f64::NAN);
                        }
                    }
                }
                m
            });

        Ok(JumpModel {
            dim,
            n_jumps,
            layers,
            stacked,
            stacked_i64,
            numeric,
        })
    }

    /// Convenience constructor for a purely integer jump matrix, given as a
    /// list of columns (one per jump type, each of length `dim`).
    pub fn from_integer_columns(dim: usize, columns: Vec<Vec<i64>>) -> Result<Self> {
        let n = columns.len();
        for (j, col) in columns.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "column {} has length {}, expected {dim}",
                    j + 1,
                    col.len()
                )));
            }
        }
        let matrix: Vec<Vec<BigRational>> = (0..dim)
            .map(|i| {
                (0..n)
                    .map(|j| BigRational::from_integer(BigInt::from(columns[j][i])))
                    .collect()
            })
            .collect();
        JumpModel::new(dim, vec![Layer::new("1", matrix)])
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: JumpModelJson = serde_json::from_str(s)?;
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (k, lj) in raw.layers.iter().enumerate() {
            let mut matrix = Vec::with_capacity(lj.matrix.len());
            for (i, row) in lj.matrix.iter().enumerate() {
                let mut out = Vec::with_capacity(row.len());
                for (j, e) in row.iter().enumerate() {
                    out.push(parse_rational(e, k, i, j)?);
                }
                matrix.push(out);
            }
            layers.push(Layer::new(lj.constant.clone(), matrix));
        }
        let model = JumpModel::new(raw.dim, layers)?;
        if model.n_jumps != raw.jumps {
            return Err(Error::InvalidInput(format!(
                "\"jumps\" is {} but the layer matrices have {} columns",
                raw.jumps, model.n_jumps
            )));
        }
        Ok(model)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        JumpModel::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let raw = JumpModelJson {
            dim: self.dim,
            jumps: self.n_jumps,
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    constant: l.constant.clone(),
                    matrix: l
                        .matrix
                        .iter()
                        .map(|row| row.iter().map(rational_string).collect())
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("model serialization cannot fail")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_jumps(&self) -> usize {
        self.n_jumps
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Integerized stacked layer rows; the exact kernel test is
    /// `stacked * c = 0`.
    pub(crate) fn stacked_rows(&self) -> &[Vec<BigInt>] {
        &self.stacked
    }

    /// i64 view of the stacked rows when every entry fits.
    pub(crate) fn stacked_rows_i64(&self) -> Option<&[Vec<i64>]> {
        self.stacked_i64.as_deref()
    }

    /// The numeric d x A jump matrix. Errors when a layer constant has no
    /// built-in value (exact kernel operations still work in that case).
    pub fn jump_matrix(&self) -> Result<&[Vec<f64>]> {
        self.numeric.as_deref().ok_or_else(|| {
            let unknown: Vec<&str> = self
                .layers
                .iter()
                .map(|l| l.constant())
                .filter(|c| constant_value(c).is_none())
                .collect();
            Error::Unsupported(format!(
                "layer constants {unknown:?} have no numeric value; numeric operations need \"1\" or \"sqrt3\""
            ))
        })
    }

    /// Real displacement `A n` for a jump-count vector.
    pub fn displacement(&self, counts: &[i64]) -> Result<Vec<f64>> {
        if counts.len() != self.n_jumps {
            return Err(Error::InvalidInput(format!(
                "count vector has length {}, expected {}",
                counts.len(),
                self.n_jumps
            )));
        }
        let m = self.jump_matrix()?;
        Ok(m.iter()
            .map(|row| row.iter().zip(counts).map(|(a, &n)| a * n as f64).sum())
            .collect())
    }

    /// Human-readable description of the jump set, used in report headers.
    pub fn describe(&self) -> String {
        let mut s = format!("{} jump types in dimension {}", self.n_jumps, self.dim);
        if let Some(m) = &self.numeric {
            let _ = write!(s, "; columns ");
            for j in 0..self.n_jumps {
                let col: Vec<String> = (0..self.dim).map(|i| format!("{}", m[i][j])).collect();
                let _ = write!(s, "({})", col.join(","));
            }
        }
        s
    }
}
