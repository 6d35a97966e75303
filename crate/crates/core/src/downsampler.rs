//! 2x2 token grouping with a linear fusion layer.
//!
//! Every output token concatenates the four inputs of its 2x2 block in the
//! order top-left, top-right, bottom-left, bottom-right and applies
//! `weight * concat + bias`. Odd grids are zero-padded on the right and
//! bottom, so a 27x27 grid becomes 14x14.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FACTOR: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    data: Vec<f64>,
}

impl TokenGrid {
    pub fn new(rows: usize, cols: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::Degenerate(format!("token grid {rows}x{cols}x{dim}")));
        }
        if data.len() != rows * cols * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for {rows}x{cols}x{dim}, got {}",
                rows * cols * dim,
                data.len()
            )));
        }
        Ok(Self { rows, cols, dim, data })
    }

    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Result<Self> {
        Self::new(rows, cols, dim, vec![0.0; rows * cols * dim])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn token(&self, r: usize, c: usize) -> &[f64] {
        let start = (r * self.cols + c) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn token_count(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadRule {
    ZeroPadRightBottom,
}

/// Fusion layer: `out_dim x (4 * in_dim)` row-major weights plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownsampleSpec {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
    pub pad_rule: PadRule,
}

impl DownsampleSpec {
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Degenerate("fusion dims must be positive".into()));
        }
        let fan_in = FACTOR * FACTOR * in_dim;
        if weight.len() != out_dim * fan_in {
            return Err(Error::DimensionMismatch(format!(
                "weight has {} entries, expected {out_dim}x{fan_in}",
                weight.len()
            )));
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch(format!(
                "bias has {} entries, expected {out_dim}",
                bias.len()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weight,
            bias,
            pad_rule: PadRule::ZeroPadRightBottom,
        })
    }

    /// Fusion that averages the four block members (`out_dim == in_dim`).
    pub fn averaging(dim: usize) -> Result<Self> {
        let fan_in = FACTOR * FACTOR * dim;
        let mut weight = vec![0.0; dim * fan_in];
        for o in 0..dim {
            for k in 0..FACTOR * FACTOR {
                weight[o * fan_in + k * dim + o] = 0.25;
            }
        }
        Self::new(dim, dim, weight, vec![0.0; dim])
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn fan_in(&self) -> usize {
        FACTOR * FACTOR * self.in_dim
    }
}

/// `(ceil(rows / 2), ceil(cols / 2))`.
pub fn output_shape(rows: usize, cols: usize) -> (usize, usize) {
    (rows.div_ceil(FACTOR), cols.div_ceil(FACTOR))
}

pub fn downsample(grid: &TokenGrid, spec: &DownsampleSpec) -> Result<TokenGrid> {
    if grid.dim != spec.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "grid dim {} != fusion input dim {}",
            grid.dim, spec.in_dim
        )));
    }
    let (out_rows, out_cols) = output_shape(grid.rows, grid.cols);
    let dim = grid.dim;
    let fan_in = spec.fan_in();
    let mut out = Vec::with_capacity(out_rows * out_cols * spec.out_dim);
    let mut block: [Option<&[f64]>; 4] = [None; 4];
    for r in 0..out_rows {
        for c in 0..out_cols {
            for (k, slot) in block.iter_mut().enumerate() {
                let (sr, sc) = (FACTOR * r + k / FACTOR, FACTOR * c + k % FACTOR);
                *slot = (sr < grid.rows && sc < grid.cols).then(|| grid.token(sr, sc));
            }
            for o in 0..spec.out_dim {
                let row = &spec.weight[o * fan_in..(o + 1) * fan_in];
                let mut acc = 0.0;
                for (k, member) in block.iter().enumerate() {
                    let w = &row[k * dim..(k + 1) * dim];
                    match member {
                        Some(x) => {
                            for (wi, xi) in w.iter().zip(x.iter()) {
                                acc += wi * xi;
                            }
                        }
                        // Padded positions contribute w * 0.
                        None => {
                            for wi in w {
                                acc += wi * 0.0;
                            }
                        }
                    }
                }
                out.push(acc + spec.bias[o]);
            }
        }
    }
    TokenGrid::new(out_rows, out_cols, spec.out_dim, out)
}

/// Straightforward reference: pads the grid, materializes every
/// concatenated block vector, then applies the dense layer.
pub fn downsample_reference(grid: &TokenGrid, spec: &DownsampleSpec) -> Result<TokenGrid> {
    if grid.dim != spec.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "grid dim {} != fusion input dim {}",
            grid.dim, spec.in_dim
        )));
    }
    let padded_rows = grid.rows + grid.rows % 2;
    let padded_cols = grid.cols + grid.cols % 2;
    let zero = vec![0.0; grid.dim];
    let at = |r: usize, c: usize| -> &[f64] {
        if r < grid.rows && c < grid.cols {
            grid.token(r, c)
        } else {
            &zero
        }
    };
    let mut out = Vec::new();
    for r in (0..padded_rows).step_by(2) {
        for c in (0..padded_cols).step_by(2) {
            let mut concat = Vec::with_capacity(spec.fan_in());
            concat.extend_from_slice(at(r, c));
            concat.extend_from_slice(at(r, c + 1));
            concat.extend_from_slice(at(r + 1, c));
            concat.extend_from_slice(at(r + 1, c + 1));
            for o in 0..spec.out_dim {
                let mut acc = 0.0;
                for j in 0..concat.len() {
                    acc += spec.weight[o * spec.fan_in() + j] * concat[j];
                }
                out.push(acc + spec.bias[o]);
            }
        }
    }
    TokenGrid::new(padded_rows / 2, padded_cols / 2, spec.out_dim, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_grid_shrinks_to_fourteen_square() {
        assert_eq!(27 * 27, 729);
        assert_eq!(output_shape(27, 27), (14, 14));
        let grid = TokenGrid::zeros(27, 27, 3).unwrap();
        let out = downsample(&grid, &DownsampleSpec::averaging(3).unwrap()).unwrap();
        assert_eq!(out.token_count(), 196);
    }

    #[test]
    fn averaging_constant_block() {
        let grid = TokenGrid::new(2, 2, 2, vec![1.5, -2.0, 1.5, -2.0, 1.5, -2.0, 1.5, -2.0]).unwrap();
        let out = downsample(&grid, &DownsampleSpec::averaging(2).unwrap()).unwrap();
        assert_eq!((out.rows(), out.cols()), (1, 1));
        assert_eq!(out.data(), &[1.5, -2.0]);
    }

    #[test]
    fn dim_mismatch_rejected() {
        let grid = TokenGrid::zeros(2, 2, 3).unwrap();
        let spec = DownsampleSpec::averaging(2).unwrap();
        assert!(matches!(downsample(&grid, &spec), Err(Error::DimensionMismatch(_))));
        assert!(DownsampleSpec::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(TokenGrid::new(2, 2, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn single_token_is_zero_padded() {
        // Identity on the top-left slot: output equals the lone input.
        let mut weight = vec![0.0; 4];
        weight[0] = 1.0;
        let spec = DownsampleSpec::new(1, 1, weight, vec![0.5]).unwrap();
        let grid = TokenGrid::new(1, 1, 1, vec![3.0]).unwrap();
        assert_eq!(downsample(&grid, &spec).unwrap().data(), &[3.5]);
    }
}
