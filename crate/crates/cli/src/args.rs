use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "dynres",
    version,
    about = "Dynamic-resolution planning and on-device pipeline simulation"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Human)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select a grid for one image and print its resolution plan.
    Plan(PlanArgs),
    /// Compare matchers over an image-size manifest.
    Compare(CompareArgs),
    /// Simulate one pipeline stage or the full request timeline.
    Simulate(SimulateArgs),
    /// Rank batch sizes or prefill chunk sizes.
    Sweep(SweepArgs),
    /// Estimate peak memory for a mixed-precision configuration.
    Mem(MemArgs),
    /// Run the 2x2 token downsampler on seeded data and check it against the
    /// reference implementation.
    Downsample(DownsampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Relaxed,
    LlavaNext,
    Internvl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Resize {
    FitAndPad,
    Stretch,
}

#[derive(Debug, Args, Clone)]
pub struct CandidateArgs {
    /// All grids 1:1 through AxB, e.g. `3x3`.
    #[arg(long, conflicts_with = "max_num")]
    pub ratios: Option<String>,

    /// Every grid with m*n <= K.
    #[arg(long)]
    pub max_num: Option<u32>,

    /// Base cell side in pixels.
    #[arg(long, default_value_t = 384)]
    pub cell: u32,
}

#[derive(Debug, Args, Clone)]
pub struct PlanArgs {
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    #[arg(long, value_enum, default_value_t = Method::Relaxed)]
    pub method: Method,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[command(flatten)]
    pub candidates: CandidateArgs,
    /// Resize policy; defaults to stretch for internvl, fit-and-pad otherwise.
    #[arg(long, value_enum)]
    pub resize: Option<Resize>,
    /// Leave out the global thumbnail.
    #[arg(long)]
    pub no_thumbnail: bool,
    /// Include the full match trace.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Grid bound for the relaxed and llava-next matchers.
    #[arg(long, default_value = "3x3")]
    pub ratios: String,
    /// Candidate bound for internvl.
    #[arg(long, default_value_t = 9)]
    pub max_num: u32,
    /// Skip malformed lines with a warning instead of failing.
    #[arg(long)]
    pub lenient: bool,
    /// Write the aggregate CSV here, plus `<stem>.entries.csv` and
    /// `<stem>.hist.csv` next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the selection histogram as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct CalArgs {
    /// Calibration file; falls back to $DYNRES_CALIBRATION, then the shipped
    /// Dimensity 9300 calibration.
    #[arg(long)]
    pub cal: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(subcommand)]
    pub stage: Stage,
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Write the event trace CSV here.
    #[arg(long)]
    pub events_csv: Option<PathBuf>,
    /// Write a Gantt chart SVG here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ImageSource {
    /// Plan JSON emitted by `dynres plan --format json`.
    #[arg(long, conflicts_with_all = ["width", "height"])]
    pub plan: Option<PathBuf>,
    /// Image width; the grid is chosen by the relaxed matcher.
    #[arg(long, requires = "height")]
    pub width: Option<u32>,
    #[arg(long, requires = "width")]
    pub height: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Stage {
    /// Batched patch encoding.
    Encode {
        #[command(flatten)]
        cal: CalArgs,
        /// Number of patches (ignored with --plan/--width).
        #[arg(long, default_value_t = 9)]
        patches: usize,
        #[command(flatten)]
        image: ImageSource,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        /// Run Conv2D and the transformer serially.
        #[arg(long)]
        no_overlap: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Chunked prefill.
    Prefill {
        #[command(flatten)]
        cal: CalArgs,
        #[arg(long, default_value_t = 2048)]
        tokens: u64,
        #[arg(long, default_value_t = 128)]
        chunk: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Token-by-token decode.
    Decode {
        #[command(flatten)]
        cal: CalArgs,
        #[arg(long, default_value_t = 1)]
        tokens: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Load, encode alongside instruction entry, prefill, decode.
    Timeline {
        #[command(flatten)]
        cal: CalArgs,
        #[command(flatten)]
        image: ImageSource,
        #[arg(long, default_value_t = 0.0)]
        instruction_ms: f64,
        #[arg(long, default_value_t = 2048)]
        input_tokens: u64,
        #[arg(long, default_value_t = 128)]
        chunk: u64,
        #[arg(long, default_value_t = 1)]
        output_tokens: u64,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long)]
        no_overlap: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(subcommand)]
    pub kind: SweepKind,
}

#[derive(Debug, Subcommand)]
pub enum SweepKind {
    /// Encode makespan per batch size.
    Batch {
        #[command(flatten)]
        cal: CalArgs,
        #[arg(long, default_value_t = 9)]
        patches: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,6")]
        candidates: Vec<usize>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Prefill latency per chunk size.
    Chunk {
        #[command(flatten)]
        cal: CalArgs,
        #[arg(long, default_value_t = 2048)]
        tokens: u64,
        #[arg(long, value_delimiter = ',', default_value = "32,128,512,2048")]
        candidates: Vec<u64>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct MemArgs {
    /// Memory configuration; defaults to the shipped 3B configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DownsampleArgs {
    #[arg(long, default_value_t = 27)]
    pub rows: usize,
    #[arg(long, default_value_t = 27)]
    pub cols: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    /// Fused output width; defaults to --dim.
    #[arg(long)]
    pub out_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
