//! Resize/pad/tile planning for a selected grid, with per-patch token
//! accounting.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{score_fit, BaseCell, GridRatio, ImageSize};

pub const TOKENS_PER_PATCH_RAW: u64 = 729;
pub const TOKENS_PER_PATCH_DOWNSAMPLED: u64 = 196;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeMode {
    /// Aspect-preserving resize into the canvas, then centered padding.
    FitAndPad,
    /// Direct resize to the canvas, ignoring aspect.
    Stretch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Padding {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPlan {
    pub original: ImageSize,
    pub grid: GridRatio,
    pub cell: BaseCell,
    pub target: ImageSize,
    pub resize_mode: ResizeMode,
    pub scale_x: f64,
    pub scale_y: f64,
    pub resized: ImageSize,
    pub pad: Padding,
    /// Local tiles in target coordinates, row-major.
    pub local_patches: Vec<Rect>,
    /// Global thumbnail, appended after the local patches.
    pub thumbnail: Option<ImageSize>,
}

impl ResolutionPlan {
    /// Local patches plus the thumbnail, if any.
    pub fn patch_count(&self) -> usize {
        self.local_patches.len() + usize::from(self.thumbnail.is_some())
    }
}

pub fn build_plan(original: ImageSize, grid: GridRatio, cell: BaseCell, mode: ResizeMode) -> Result<ResolutionPlan> {
    build_plan_with(original, grid, cell, mode, true)
}

/// Like [`build_plan`], with control over the global thumbnail.
///
/// In fit-and-pad mode a degenerate image whose scaled side truncates to
/// zero is kept at one pixel on that side.
pub fn build_plan_with(
    original: ImageSize,
    grid: GridRatio,
    cell: BaseCell,
    mode: ResizeMode,
    include_thumbnail: bool,
) -> Result<ResolutionPlan> {
    let fit = score_fit(original, grid, cell)?;
    let target = grid.target(cell);
    let (resized, scale_x, scale_y) = match mode {
        ResizeMode::FitAndPad => {
            let resized = ImageSize {
                width: (fit.scaled_width as u32).max(1),
                height: (fit.scaled_height as u32).max(1),
            };
            (resized, fit.scale, fit.scale)
        }
        ResizeMode::Stretch => (
            target,
            target.width as f64 / original.width as f64,
            target.height as f64 / original.height as f64,
        ),
    };
    let pad_x = target.width - resized.width;
    let pad_y = target.height - resized.height;
    let pad = Padding {
        left: pad_x / 2,
        right: pad_x - pad_x / 2,
        top: pad_y / 2,
        bottom: pad_y - pad_y / 2,
    };
    let side = cell.side;
    let local_patches = (0..grid.n)
        .flat_map(|row| {
            (0..grid.m).map(move |col| Rect {
                x: col * side,
                y: row * side,
                w: side,
                h: side,
            })
        })
        .collect();
    let thumbnail = include_thumbnail.then_some(ImageSize {
        width: side,
        height: side,
    });
    Ok(ResolutionPlan {
        original,
        grid,
        cell,
        target,
        resize_mode: mode,
        scale_x,
        scale_y,
        resized,
        pad,
        local_patches,
        thumbnail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDefaults {
    pub tokens_per_patch_raw: u64,
    pub tokens_per_patch_downsampled: u64,
    pub include_thumbnail: bool,
}

impl Default for TokenDefaults {
    fn default() -> Self {
        Self {
            tokens_per_patch_raw: TOKENS_PER_PATCH_RAW,
            tokens_per_patch_downsampled: TOKENS_PER_PATCH_DOWNSAMPLED,
            include_thumbnail: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub tokens_per_patch_raw: u64,
    pub tokens_per_patch_downsampled: u64,
    pub patch_count: u64,
    pub total_raw: u64,
    pub total_downsampled: u64,
}

pub fn token_budget(grid: GridRatio, defaults: TokenDefaults) -> TokenBudget {
    let patch_count = grid.area() + u64::from(defaults.include_thumbnail);
    TokenBudget {
        tokens_per_patch_raw: defaults.tokens_per_patch_raw,
        tokens_per_patch_downsampled: defaults.tokens_per_patch_downsampled,
        patch_count,
        total_raw: patch_count * defaults.tokens_per_patch_raw,
        total_downsampled: patch_count * defaults.tokens_per_patch_downsampled,
    }
}
