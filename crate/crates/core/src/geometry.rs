//! Image and grid value types, plus the effective/wasted resolution score
//! every matcher is built on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default side length of one base cell in pixels.
pub const DEFAULT_CELL_SIDE: u32 = 384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        let size = Self { width, height };
        size.validate()?;
        Ok(size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Degenerate(format!(
                "image size {}x{} has a zero dimension",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// An `m:n` tiling grid: `m` columns by `n` rows of base cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridRatio {
    pub m: u32,
    pub n: u32,
}

impl GridRatio {
    pub fn new(m: u32, n: u32) -> Result<Self> {
        let grid = Self { m, n };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::Degenerate(format!("grid {}:{} has a zero side", self.m, self.n)));
        }
        Ok(())
    }

    /// Number of base cells, `m * n`.
    pub fn area(&self) -> u64 {
        self.m as u64 * self.n as u64
    }

    /// Pixel size of the target canvas for this grid.
    pub fn target(&self, cell: BaseCell) -> ImageSize {
        ImageSize {
            width: cell.side * self.m,
            height: cell.side * self.n,
        }
    }
}

impl fmt::Display for GridRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.m, self.n)
    }
}

impl FromStr for GridRatio {
    type Err = Error;

    /// Accepts `m:n` or `mxn`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .or_else(|| s.split_once(['x', 'X']))
            .ok_or_else(|| Error::Degenerate(format!("cannot parse grid ratio {s:?}")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::Degenerate(format!("cannot parse grid ratio {s:?}")))
        };
        GridRatio::new(parse(a)?, parse(b)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BaseCell {
    pub side: u32,
}

impl BaseCell {
    pub fn new(side: u32) -> Result<Self> {
        if side == 0 {
            return Err(Error::Degenerate("base cell side must be positive".into()));
        }
        Ok(Self { side })
    }
}

impl Default for BaseCell {
    fn default() -> Self {
        Self {
            side: DEFAULT_CELL_SIDE,
        }
    }
}

/// Effective and wasted resolution of one image/grid pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitScore {
    /// Area of the proportionally scaled image inside the target, capped at
    /// the original area.
    pub effective: u64,
    /// Target area minus `effective`.
    pub wasted: u64,
    pub scale: f64,
    pub scaled_width: u64,
    pub scaled_height: u64,
}

/// Scores how well `original` fits the canvas of `grid`.
///
/// The scale factor is the largest that keeps the aspect-preserved image
/// inside the target; the scaled sides are truncated toward zero, which is
/// the only rounding step.
pub fn score_fit(original: ImageSize, grid: GridRatio, cell: BaseCell) -> Result<FitScore> {
    original.validate()?;
    grid.validate()?;
    if cell.side == 0 {
        return Err(Error::Degenerate("base cell side must be positive".into()));
    }
    let target_w = cell.side as u64 * grid.m as u64;
    let target_h = cell.side as u64 * grid.n as u64;
    let w = original.width as f64;
    let h = original.height as f64;
    let scale = f64::min(target_w as f64 / w, target_h as f64 / h);
    let scaled_width = (w * scale).trunc() as u64;
    let scaled_height = (h * scale).trunc() as u64;
    let effective = u64::min(scaled_width * scaled_height, original.area());
    let wasted = target_w * target_h - effective;
    Ok(FitScore {
        effective,
        wasted,
        scale,
        scaled_width,
        scaled_height,
    })
}
