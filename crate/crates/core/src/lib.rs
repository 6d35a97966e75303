//! Dynamic-resolution planning for vision-language models on mobile
//! hardware, and a deterministic simulator of the on-device inference
//! pipeline.
//!
//! - [`geometry`]: image/grid value types and effective/wasted resolution.
//! - [`matchers`]: relaxed aspect-ratio matching plus the LLaVA-NeXT and
//!   InternVL 1.5 baselines, all with replayable traces.
//! - [`planner`]: resize/pad/tile plans and token budgets.
//! - [`downsampler`]: 2x2 token grouping with linear fusion.
//! - [`sched`]: encode/prefill/decode/timeline simulation from a calibration.
//! - [`memory`]: mixed-precision peak-memory estimate.
//! - [`corpus`]: manifest ingestion and matcher comparison statistics.

pub mod corpus;
pub mod downsampler;
pub mod error;
pub mod geometry;
pub mod kvconfig;
pub mod matchers;
pub mod memory;
pub mod planner;
pub mod plots;
pub mod sched;

/// Path of the shipped Dimensity 9300 calibration, relative to this crate.
pub const D9300_CALIBRATION: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/d9300.cal");
/// Path of the shipped memory configuration.
pub const DEFAULT_MEMORY_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mobile_3b.mem");
/// Path of the shipped 10k synthetic image-size manifest.
pub const SYNTHETIC_MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic_10k.manifest");

pub use error::{Error, Result};
pub use geometry::{score_fit, BaseCell, FitScore, GridRatio, ImageSize};
pub use kvconfig::KvConfig;
pub use matchers::{
    enumerate_candidates_descending, match_internvl, match_llava_next, match_relaxed, replay_trace, CandidateSet,
    MatchMethod, MatchTrace, RelaxedParams,
};
pub use planner::{build_plan, token_budget, ResizeMode, ResolutionPlan, TokenBudget, TokenDefaults};
