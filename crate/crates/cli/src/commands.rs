use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use dynres_core::corpus::{compare_methods, load_manifest, CompareConfig, ComparisonReport, ParseMode};
use dynres_core::downsampler::{downsample, downsample_reference, DownsampleSpec, TokenGrid};
use dynres_core::matchers::{
    match_internvl, match_with, replay_trace, CandidateSet, MatchMethod, MatchTrace, RelaxedParams,
};
use dynres_core::memory::{estimate_peak, MemoryBreakdown, MemorySpec, GIB};
use dynres_core::planner::{build_plan_with, token_budget, ResizeMode, ResolutionPlan, TokenBudget, TokenDefaults};
use dynres_core::sched::{
    simulate_decode, simulate_encode, simulate_prefill, simulate_timeline, sweep_batch_size, sweep_chunk_size,
    CostModel, EncodeScenario, Schedule, TimelineScenario,
};
use dynres_core::{plots, BaseCell, GridRatio, ImageSize, D9300_CALIBRATION, DEFAULT_MEMORY_CONFIG};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::*;
use crate::{CliError, CliResult, CALIBRATION_ENV};

pub fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let fmt = cli.format;
    let text = match cli.command {
        Command::Plan(a) => plan(&a, fmt)?,
        Command::Compare(a) => compare(&a, fmt)?,
        Command::Simulate(a) => simulate(a.stage, fmt)?,
        Command::Sweep(a) => sweep(a.kind, fmt)?,
        Command::Mem(a) => mem(&a, fmt)?,
        Command::Downsample(a) => downsample_check(&a, fmt)?,
    };
    out.write_all(text.as_bytes()).context("writing output")?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn method_of(m: Method) -> MatchMethod {
    match m {
        Method::Relaxed => MatchMethod::Relaxed,
        Method::LlavaNext => MatchMethod::LlavaNext,
        Method::Internvl => MatchMethod::Internvl,
    }
}

fn parse_bound(s: &str) -> CliResult<GridRatio> {
    s.parse::<GridRatio>()
        .map_err(|_| CliError::usage(format!("--ratios expects AxB, got {s:?}")))
}

fn candidate_set(c: &CandidateArgs, method: Method) -> CliResult<CandidateSet> {
    let cell = BaseCell::new(c.cell)?;
    let set = match (&c.ratios, c.max_num) {
        (Some(r), _) => {
            let bound = parse_bound(r)?;
            CandidateSet::grid_up_to(bound.m, bound.n, cell)?
        }
        (None, Some(k)) => {
            if k == 0 {
                return Err(CliError::usage("--max-num must be at least 1"));
            }
            CandidateSet::max_num(k, cell)?
        }
        (None, None) if method == Method::Internvl => CandidateSet::max_num(9, cell)?,
        (None, None) => CandidateSet::grid_up_to(3, 3, cell)?,
    };
    Ok(set)
}

#[derive(Serialize)]
struct PlanOutput {
    method: MatchMethod,
    selected: GridRatio,
    plan: ResolutionPlan,
    tokens: TokenBudget,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<MatchTrace>,
}

fn select(a: &PlanArgs) -> CliResult<(MatchTrace, ResolutionPlan, TokenBudget)> {
    let img = ImageSize::new(a.width, a.height)?;
    let params = RelaxedParams::new(a.alpha)?;
    let set = candidate_set(&a.candidates, a.method)?;
    let trace = match (a.method, set.origin()) {
        (Method::Internvl, dynres_core::matchers::CandidateOrigin::MaxNum(k)) => match_internvl(img, k, set.cell())?,
        (m, _) => match_with(method_of(m), img, &set, params)?,
    };
    if let Err(e) = replay_trace(&trace, img, params) {
        return Err(CliError::internal(format!("trace failed replay: {e}")));
    }
    let mode = match a.resize {
        Some(Resize::FitAndPad) => ResizeMode::FitAndPad,
        Some(Resize::Stretch) => ResizeMode::Stretch,
        None if a.method == Method::Internvl => ResizeMode::Stretch,
        None => ResizeMode::FitAndPad,
    };
    let plan = build_plan_with(img, trace.selected, set.cell(), mode, !a.no_thumbnail)?;
    let tokens = token_budget(
        trace.selected,
        TokenDefaults {
            include_thumbnail: !a.no_thumbnail,
            ..TokenDefaults::default()
        },
    );
    Ok((trace, plan, tokens))
}

fn plan(a: &PlanArgs, fmt: Format) -> CliResult<String> {
    let (trace, plan, tokens) = select(a)?;
    let mut s = String::new();
    match fmt {
        Format::Json => {
            let out = PlanOutput {
                method: trace.method,
                selected: trace.selected,
                plan,
                tokens,
                trace: a.trace.then_some(trace),
            };
            s = to_json(&out);
        }
        Format::Csv => {
            s.push_str("index,kind,x,y,w,h\n");
            for (i, r) in plan.local_patches.iter().enumerate() {
                let _ = writeln!(s, "{i},local,{},{},{},{}", r.x, r.y, r.w, r.h);
            }
            if let Some(t) = plan.thumbnail {
                let _ = writeln!(s, "{},global,0,0,{},{}", plan.local_patches.len(), t.width, t.height);
            }
        }
        Format::Human => {
            let _ = writeln!(s, "method      {}", trace.method.name());
            let _ = writeln!(s, "image       {}", plan.original);
            let _ = writeln!(s, "grid        {}", trace.selected);
            let _ = writeln!(s, "target      {}", plan.target);
            let _ = writeln!(s, "resized     {} ({:?})", plan.resized, plan.resize_mode);
            let p = plan.pad;
            let _ = writeln!(
                s,
                "padding     left {} top {} right {} bottom {}",
                p.left, p.top, p.right, p.bottom
            );
            let _ = writeln!(
                s,
                "patches     {} local + {} global",
                plan.local_patches.len(),
                u8::from(plan.thumbnail.is_some())
            );
            let _ = writeln!(
                s,
                "tokens      {} raw, {} after downsampling",
                tokens.total_raw, tokens.total_downsampled
            );
            if a.trace {
                let _ = writeln!(s, "\nstep  grid  R_e        R_w        accepted  rule");
                for (i, st) in trace.steps.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "{i:<5} {:<5} {:<10} {:<10} {:<9} {:?}",
                        st.grid.to_string(),
                        st.fit.effective,
                        st.fit.wasted,
                        st.accepted,
                        st.rule_fired
                    );
                }
            }
        }
    }
    Ok(s)
}

fn compare(a: &CompareArgs, fmt: Format) -> CliResult<String> {
    let mode = if a.lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    };
    let manifest = load_manifest(&a.manifest, mode)?;
    let config = CompareConfig {
        grid_max: parse_bound(&a.ratios)?,
        internvl_max_num: a.max_num,
        alpha: a.alpha,
        ..CompareConfig::default()
    };
    RelaxedParams::new(a.alpha)?;
    let report = compare_methods(&manifest, &config)?;
    if let Some(path) = &a.out {
        write_file(path, &report.aggregate_csv())?;
        write_file(&sibling(path, "entries"), &report.entries_csv())?;
        write_file(&sibling(path, "hist"), &report.histogram_csv())?;
    }
    if let Some(path) = &a.svg {
        write_file(path, &plots::selection_histogram(&report))?;
    }
    let mut s = String::new();
    for w in &manifest.warnings {
        let _ = writeln!(s, "warning: line {}: {}", w.line, w.message);
    }
    Ok(match fmt {
        Format::Json => to_json(&report),
        Format::Csv => report.aggregate_csv(),
        Format::Human => {
            human_compare(&mut s, &report);
            s
        }
    })
}

fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.csv"))
}

fn human_compare(s: &mut String, r: &ComparisonReport) {
    let _ = writeln!(s, "entries {} (text-only skipped: {})", r.entries, r.text_only_skipped);
    let _ = writeln!(s, "relaxed grid area vs baseline   smaller    equal   larger");
    for (name, b) in [("llava-next", r.vs_llava_next), ("internvl", r.vs_internvl)] {
        let _ = writeln!(s, "  {name:<29} {:>8} {:>8} {:>8}", b.smaller, b.equal, b.larger);
    }
    for (method, bins) in &r.histograms {
        let parts: Vec<String> = bins.iter().map(|b| format!("{}={}", b.grid, b.count)).collect();
        let _ = writeln!(s, "{method:<11} {}", parts.join(" "));
    }
}

fn calibration(cal: &CalArgs) -> CliResult<(CostModel, String)> {
    let path = cal
        .cal
        .clone()
        .or_else(|| std::env::var_os(CALIBRATION_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(D9300_CALIBRATION));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((CostModel::load(&path)?, name))
}

fn image_plan(src: &ImageSource) -> CliResult<Option<ResolutionPlan>> {
    if let Some(path) = &src.plan {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let inner = value.get("plan").cloned().unwrap_or(value);
        let plan: ResolutionPlan =
            serde_json::from_value(inner).with_context(|| format!("{} is not a plan", path.display()))?;
        return Ok(Some(plan));
    }
    match (src.width, src.height) {
        (Some(width), Some(height)) => {
            let args = PlanArgs {
                width,
                height,
                method: Method::Relaxed,
                alpha: 0.1,
                candidates: CandidateArgs {
                    ratios: None,
                    max_num: None,
                    cell: 384,
                },
                resize: None,
                no_thumbnail: false,
                trace: false,
            };
            Ok(Some(select(&args)?.1))
        }
        _ => Ok(None),
    }
}

fn emit_schedule(title: &str, s: &Schedule, out: &OutputArgs, fmt: Format) -> CliResult<String> {
    s.check_exclusive()
        .map_err(|e| CliError::internal(format!("schedule invariant violated: {e}")))?;
    if let Some(p) = &out.events_csv {
        write_file(p, &s.to_csv())?;
    }
    if let Some(p) = &out.svg {
        write_file(p, &plots::gantt(title, s))?;
    }
    Ok(match fmt {
        Format::Json => to_json(s),
        Format::Csv => s.to_csv(),
        Format::Human => {
            let mut t = String::new();
            let _ = writeln!(t, "{title}");
            let _ = writeln!(t, "makespan        {:.1} ms", s.makespan_ms);
            let _ = writeln!(t, "hidden latency  {:.1} ms", s.hidden_latency_ms);
            if let Some(tp) = s.throughput_tokens_per_s {
                let _ = writeln!(t, "throughput      {tp:.2} token/s");
            }
            for (k, v) in &s.marks {
                let _ = writeln!(t, "{k:<24} {v:.1}");
            }
            let _ = writeln!(t, "events          {}", s.events.len());
            t
        }
    })
}

fn simulate(stage: Stage, fmt: Format) -> CliResult<String> {
    match stage {
        Stage::Encode {
            cal,
            patches,
            image,
            batch,
            no_overlap,
            out,
        } => {
            let (costs, name) = calibration(&cal)?;
            let patch_count = image_plan(&image)?.map_or(patches, |p| p.patch_count());
            let s = simulate_encode(
                &EncodeScenario {
                    patch_count,
                    batch_size: batch,
                    pipeline_overlap: !no_overlap,
                },
                &costs,
            )?;
            emit_schedule(
                &format!("Patch encoding, {patch_count} patches, batch {batch} (simulated, {name})"),
                &s,
                &out,
                fmt,
            )
        }
        Stage::Prefill {
            cal,
            tokens,
            chunk,
            out,
        } => {
            let (costs, name) = calibration(&cal)?;
            let s = simulate_prefill(tokens, chunk, &costs)?;
            emit_schedule(
                &format!("Prefill, {tokens} tokens, chunk {chunk} (simulated, {name})"),
                &s,
                &out,
                fmt,
            )
        }
        Stage::Decode { cal, tokens, out } => {
            let (costs, name) = calibration(&cal)?;
            let s = simulate_decode(tokens, &costs)?;
            emit_schedule(&format!("Decode, {tokens} tokens (simulated, {name})"), &s, &out, fmt)
        }
        Stage::Timeline {
            cal,
            image,
            instruction_ms,
            input_tokens,
            chunk,
            output_tokens,
            batch,
            no_overlap,
            out,
        } => {
            let (costs, name) = calibration(&cal)?;
            let plan = match image_plan(&image)? {
                Some(p) => p,
                None => return Err(CliError::usage("timeline needs --plan or --width/--height")),
            };
            let scenario = TimelineScenario {
                instruction_entry_ms: instruction_ms,
                input_token_count: input_tokens,
                chunk_size: chunk,
                output_token_count: output_tokens,
                encode_batch_size: batch,
                pipeline_overlap: !no_overlap,
            };
            let s = simulate_timeline(&plan, &scenario, &costs)?;
            emit_schedule(
                &format!("Request timeline, grid {} (simulated, {name})", plan.grid),
                &s,
                &out,
                fmt,
            )
        }
    }
}

#[derive(Serialize)]
struct Ranked<T> {
    candidate: T,
    makespan_ms: f64,
}

fn ranked_output<T: Serialize + ToString + Copy>(
    title: &str,
    unit: &str,
    ranked: &[(T, f64)],
    svg: Option<&Path>,
    fmt: Format,
) -> CliResult<String> {
    if let Some(p) = svg {
        write_file(p, &plots::sweep_chart(title, "ms", ranked))?;
    }
    Ok(match fmt {
        Format::Json => {
            let rows: Vec<Ranked<T>> = ranked
                .iter()
                .map(|&(candidate, makespan_ms)| Ranked { candidate, makespan_ms })
                .collect();
            to_json(&rows)
        }
        Format::Csv => {
            let mut s = format!("rank,{unit},makespan_ms\n");
            for (i, (c, m)) in ranked.iter().enumerate() {
                let _ = writeln!(s, "{},{},{}", i + 1, c.to_string(), m);
            }
            s
        }
        Format::Human => {
            let mut s = format!("{title}\nrank  {unit:<8} makespan\n");
            for (i, (c, m)) in ranked.iter().enumerate() {
                let _ = writeln!(s, "{:<5} {:<8} {:.1} ms", i + 1, c.to_string(), m);
            }
            s
        }
    })
}

fn sweep(kind: SweepKind, fmt: Format) -> CliResult<String> {
    match kind {
        SweepKind::Batch {
            cal,
            patches,
            candidates,
            svg,
        } => {
            let (costs, name) = calibration(&cal)?;
            let ranked = sweep_batch_size(patches, &candidates, &costs)?;
            let title = format!("Encode latency by batch size, {patches} patches (simulated, {name})");
            ranked_output(&title, "batch", &ranked, svg.as_deref(), fmt)
        }
        SweepKind::Chunk {
            cal,
            tokens,
            candidates,
            svg,
        } => {
            let (costs, name) = calibration(&cal)?;
            let ranked = sweep_chunk_size(tokens, &candidates, &costs)?;
            let title = format!("Prefill latency by chunk size, {tokens} tokens (simulated, {name})");
            ranked_output(&title, "chunk", &ranked, svg.as_deref(), fmt)
        }
    }
}

fn mem(a: &MemArgs, fmt: Format) -> CliResult<String> {
    let path = a.config.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_MEMORY_CONFIG));
    let b: MemoryBreakdown = estimate_peak(&MemorySpec::load(&path)?)?;
    Ok(match fmt {
        Format::Json => to_json(&b),
        Format::Csv => {
            let mut s = String::from("component,bytes\n");
            for (k, v) in &b.weights {
                let _ = writeln!(s, "weights.{k},{v}");
            }
            let _ = writeln!(
                s,
                "kv_cache,{}\nworkspace,{}\ntotal,{}\npost_free_total,{}\nbudget,{}",
                b.kv_cache, b.workspace, b.total, b.post_free_total, b.budget
            );
            s
        }
        Format::Human => {
            let gib = |v: u64| v as f64 / GIB;
            let mut s = String::new();
            for (k, v) in &b.weights {
                let _ = writeln!(s, "weights.{k:<10} {v:>14} B  {:>7.3} GiB", gib(*v));
            }
            for (k, v) in [
                ("kv_cache", b.kv_cache),
                ("workspace", b.workspace),
                ("total", b.total),
                ("post_free", b.post_free_total),
                ("budget", b.budget),
            ] {
                let _ = writeln!(s, "{k:<18} {v:>14} B  {:>7.3} GiB", gib(v));
            }
            let _ = writeln!(
                s,
                "within budget      {} (after ViT release: {})",
                b.within_budget, b.post_free_within_budget
            );
            s
        }
    })
}

#[derive(Serialize)]
struct DownsampleReport {
    rows: usize,
    cols: usize,
    dim: usize,
    out_rows: usize,
    out_cols: usize,
    out_dim: usize,
    tokens_in: usize,
    tokens_out: usize,
    checksum: f64,
    oracle_checksum: f64,
    max_abs_diff: f64,
    matches_oracle: bool,
}

fn downsample_check(a: &DownsampleArgs, fmt: Format) -> CliResult<String> {
    let out_dim = a.out_dim.unwrap_or(a.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let grid = TokenGrid::new(a.rows, a.cols, a.dim, draw(a.rows * a.cols * a.dim))?;
    let spec = DownsampleSpec::new(a.dim, out_dim, draw(out_dim * 4 * a.dim), draw(out_dim))?;
    let got = downsample(&grid, &spec)?;
    let want = downsample_reference(&grid, &spec)?;
    let max_abs_diff = got
        .data()
        .iter()
        .zip(want.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let r = DownsampleReport {
        rows: a.rows,
        cols: a.cols,
        dim: a.dim,
        out_rows: got.rows(),
        out_cols: got.cols(),
        out_dim,
        tokens_in: grid.token_count(),
        tokens_out: got.token_count(),
        checksum: got.data().iter().sum(),
        oracle_checksum: want.data().iter().sum(),
        max_abs_diff,
        matches_oracle: got == want,
    };
    if !r.matches_oracle {
        return Err(CliError::internal(format!(
            "downsampler diverges from reference (max diff {max_abs_diff:e})"
        )));
    }
    Ok(match fmt {
        Format::Json => to_json(&r),
        Format::Csv => format!(
            "rows,cols,dim,out_rows,out_cols,out_dim,checksum,oracle_checksum,max_abs_diff\n{},{},{},{},{},{},{:e},{:e},{:e}\n",
            r.rows, r.cols, r.dim, r.out_rows, r.out_cols, r.out_dim, r.checksum, r.oracle_checksum, r.max_abs_diff
        ),
        Format::Human => format!(
            "input    {}x{}x{} ({} tokens)\noutput   {}x{}x{} ({} tokens)\nchecksum {:.12e} (reference {:.12e})\nmatches reference: {}\n",
            r.rows, r.cols, r.dim, r.tokens_in, r.out_rows, r.out_cols, r.out_dim, r.tokens_out, r.checksum, r.oracle_checksum, r.matches_oracle
        ),
    })
}
