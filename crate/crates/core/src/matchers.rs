//! Aspect-ratio matchers: the relaxed thresholded matcher and the two
//! baselines it is compared against (LLaVA-NeXT best-resolution search and
//! InternVL 1.5 closest-aspect search). Every matcher returns a
//! [`MatchTrace`] that [`replay_trace`] can re-derive step by step.

use std::cmp::Reverse;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{score_fit, BaseCell, FitScore, GridRatio, ImageSize};

/// Threshold used by the deployed relaxed matcher.
pub const DEFAULT_ALPHA: f64 = 0.1;

/// How a candidate set was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateOrigin {
    ExplicitList,
    GridUpTo { m_max: u32, n_max: u32 },
    MaxNum(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    ratios: Vec<GridRatio>,
    cell: BaseCell,
    origin: CandidateOrigin,
}

impl CandidateSet {
    pub fn explicit(ratios: Vec<GridRatio>, cell: BaseCell) -> Result<Self> {
        Self::build(ratios, cell, CandidateOrigin::ExplicitList)
    }

    /// All grids `1:1 ..= m_max:n_max`, column-major from `1:1`.
    pub fn grid_up_to(m_max: u32, n_max: u32, cell: BaseCell) -> Result<Self> {
        let ratios = (1..=m_max)
            .flat_map(|m| (1..=n_max).map(move |n| GridRatio { m, n }))
            .collect();
        Self::build(ratios, cell, CandidateOrigin::GridUpTo { m_max, n_max })
    }

    /// Every grid with `m * n <= max_num`, ordered by area ascending then
    /// by `m` ascending.
    pub fn max_num(max_num: u32, cell: BaseCell) -> Result<Self> {
        let mut ratios: Vec<GridRatio> = (1..=max_num)
            .flat_map(|m| (1..=max_num / m).map(move |n| GridRatio { m, n }))
            .collect();
        ratios.sort_by_key(|g| (g.area(), g.m));
        Self::build(ratios, cell, CandidateOrigin::MaxNum(max_num))
    }

    fn build(ratios: Vec<GridRatio>, cell: BaseCell, origin: CandidateOrigin) -> Result<Self> {
        BaseCell::new(cell.side)?;
        if ratios.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let mut seen = HashSet::with_capacity(ratios.len());
        for g in &ratios {
            g.validate()?;
            if !seen.insert((g.m, g.n)) {
                return Err(Error::DuplicateCandidate { m: g.m, n: g.n });
            }
            if let CandidateOrigin::MaxNum(k) = origin {
                if g.area() > k as u64 {
                    return Err(Error::CandidateExceedsMaxNum {
                        m: g.m,
                        n: g.n,
                        max_num: k,
                    });
                }
            }
        }
        Ok(Self { ratios, cell, origin })
    }

    pub fn ratios(&self) -> &[GridRatio] {
        &self.ratios
    }

    pub fn cell(&self) -> BaseCell {
        self.cell
    }

    pub fn origin(&self) -> CandidateOrigin {
        self.origin
    }

    pub fn contains(&self, grid: GridRatio) -> bool {
        self.ratios.contains(&grid)
    }

    /// The same candidates in the exact reverse of the descending order.
    pub fn ascending(&self) -> Self {
        let mut out = enumerate_candidates_descending(self);
        out.ratios.reverse();
        out
    }
}

/// Reorders candidates by area descending, then `|m - n|` ascending, then
/// `m` ascending.
pub fn enumerate_candidates_descending(set: &CandidateSet) -> CandidateSet {
    let mut ratios = set.ratios.clone();
    ratios.sort_by_key(|g| (Reverse(g.area()), g.m.abs_diff(g.n), g.m));
    CandidateSet { ratios, ..set.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedParams {
    alpha: f64,
}

impl RelaxedParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for RelaxedParams {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMethod {
    Relaxed,
    LlavaNext,
    Internvl,
}

impl MatchMethod {
    pub const ALL: [MatchMethod; 3] = [MatchMethod::Relaxed, MatchMethod::LlavaNext, MatchMethod::Internvl];

    pub fn name(&self) -> &'static str {
        match self {
            MatchMethod::Relaxed => "relaxed",
            MatchMethod::LlavaNext => "llava-next",
            MatchMethod::Internvl => "internvl",
        }
    }
}

/// Which acceptance condition admitted a candidate.
///
/// For the baselines `CondImprove` means a strict improvement of the primary
/// criterion and `CondNearTie` means the tie-break admitted it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleFired {
    CondImprove,
    CondNearTie,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub grid: GridRatio,
    pub fit: FitScore,
    /// `|w/h - m/n|`, recorded by the InternVL matcher only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aspect_gap: Option<f64>,
    pub accepted: bool,
    pub rule_fired: RuleFired,
    /// Running `R_e,max` after this step.
    pub effective_max: u64,
    /// Running `R_w,min` after this step; `None` while unset (+inf).
    pub wasted_min: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTrace {
    pub method: MatchMethod,
    pub cell: BaseCell,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    pub steps: Vec<TraceStep>,
    pub selected: GridRatio,
    /// True when no step was accepted and the first enumerated candidate was
    /// taken instead (every candidate scored `R_e = 0`).
    pub fallback: bool,
}

impl MatchTrace {
    pub fn selected_fit(&self) -> Option<&FitScore> {
        self.steps.iter().find(|s| s.grid == self.selected).map(|s| &s.fit)
    }
}

/// Running state of the relaxed update rule.
#[derive(Debug, Clone, Copy)]
struct Running {
    effective_max: u64,
    wasted_min: Option<u64>,
}

impl Running {
    const INIT: Running = Running {
        effective_max: 0,
        wasted_min: None,
    };
}

fn relaxed_rule(fit: &FitScore, run: Running, alpha: f64) -> RuleFired {
    let re = fit.effective as f64;
    let re_max = run.effective_max as f64;
    let slack = alpha * re_max;
    if re - re_max > slack {
        return RuleFired::CondImprove;
    }
    let less_waste = run.wasted_min.is_none_or(|w| fit.wasted < w);
    if re_max - re < slack && less_waste {
        return RuleFired::CondNearTie;
    }
    RuleFired::None
}

fn llava_rule(fit: &FitScore, run: Running) -> RuleFired {
    if fit.effective > run.effective_max {
        RuleFired::CondImprove
    } else if fit.effective == run.effective_max && run.wasted_min.is_none_or(|w| fit.wasted < w) {
        RuleFired::CondNearTie
    } else {
        RuleFired::None
    }
}

fn finish(method: MatchMethod, cell: BaseCell, alpha: Option<f64>, steps: Vec<TraceStep>) -> MatchTrace {
    let accepted = steps.iter().rev().find(|s| s.accepted).map(|s| s.grid);
    let (selected, fallback) = match accepted {
        Some(g) => (g, false),
        None => (steps[0].grid, true),
    };
    MatchTrace {
        method,
        cell,
        alpha,
        steps,
        selected,
        fallback,
    }
}

fn run_fit_rule(
    original: ImageSize,
    ratios: &[GridRatio],
    cell: BaseCell,
    rule: impl Fn(&FitScore, Running) -> RuleFired,
) -> Result<Vec<TraceStep>> {
    original.validate()?;
    if ratios.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut run = Running::INIT;
    let mut steps = Vec::with_capacity(ratios.len());
    for &grid in ratios {
        let fit = score_fit(original, grid, cell)?;
        let rule_fired = rule(&fit, run);
        let accepted = rule_fired != RuleFired::None;
        if accepted {
            run = Running {
                effective_max: fit.effective,
                wasted_min: Some(fit.wasted),
            };
        }
        steps.push(TraceStep {
            grid,
            fit,
            aspect_gap: None,
            accepted,
            rule_fired,
            effective_max: run.effective_max,
            wasted_min: run.wasted_min,
        });
    }
    Ok(steps)
}

/// Relaxed aspect-ratio matching over the candidates in descending order.
///
/// A candidate replaces the current best when its effective resolution beats
/// the running maximum by more than `alpha` of that maximum, or when it is
/// within `alpha` of the maximum and wastes strictly less.
pub fn match_relaxed(original: ImageSize, set: &CandidateSet, params: RelaxedParams) -> Result<MatchTrace> {
    let ordered = enumerate_candidates_descending(set);
    match_relaxed_in_order(original, &ordered, params)
}

/// Same update rule as [`match_relaxed`], but visiting `set` in the order it
/// is stored.
pub fn match_relaxed_in_order(original: ImageSize, set: &CandidateSet, params: RelaxedParams) -> Result<MatchTrace> {
    let alpha = params.alpha();
    let steps = run_fit_rule(original, set.ratios(), set.cell(), |fit, run| {
        relaxed_rule(fit, run, alpha)
    })?;
    Ok(finish(MatchMethod::Relaxed, set.cell(), Some(alpha), steps))
}

/// LLaVA-NeXT selection: largest effective resolution, then smallest waste,
/// then first in the set's stored order.
pub fn match_llava_next(original: ImageSize, set: &CandidateSet) -> Result<MatchTrace> {
    let steps = run_fit_rule(original, set.ratios(), set.cell(), llava_rule)?;
    Ok(finish(MatchMethod::LlavaNext, set.cell(), None, steps))
}

fn internvl_rule(gap: f64, best_gap: Option<f64>, original: ImageSize, grid: GridRatio, cell: BaseCell) -> RuleFired {
    match best_gap {
        None => RuleFired::CondImprove,
        Some(b) if gap < b => RuleFired::CondImprove,
        Some(b) if gap == b => {
            let side = cell.side as f64;
            let half_target = 0.5 * side * side * grid.area() as f64;
            if original.area() as f64 > half_target {
                RuleFired::CondNearTie
            } else {
                RuleFired::None
            }
        }
        Some(_) => RuleFired::None,
    }
}

fn aspect_gap(original: ImageSize, grid: GridRatio) -> f64 {
    let aspect = original.width as f64 / original.height as f64;
    (aspect - grid.m as f64 / grid.n as f64).abs()
}

/// InternVL 1.5 selection over every grid with `m * n <= max_num`: the grid
/// whose `m/n` is closest to the image's `w/h`. On an exact tie the later
/// (larger) grid wins if the image covers more than half of its canvas.
pub fn match_internvl(original: ImageSize, max_num: u32, cell: BaseCell) -> Result<MatchTrace> {
    if max_num == 0 {
        return Err(Error::Degenerate("max_num must be at least 1".into()));
    }
    let set = CandidateSet::max_num(max_num, cell)?;
    match_internvl_in_order(original, &set)
}

fn match_internvl_in_order(original: ImageSize, set: &CandidateSet) -> Result<MatchTrace> {
    original.validate()?;
    let cell = set.cell();
    let mut best_gap: Option<f64> = None;
    let mut run = Running::INIT;
    let mut steps = Vec::with_capacity(set.ratios().len());
    for &grid in set.ratios() {
        let fit = score_fit(original, grid, cell)?;
        let gap = aspect_gap(original, grid);
        let rule_fired = internvl_rule(gap, best_gap, original, grid, cell);
        let accepted = rule_fired != RuleFired::None;
        if accepted {
            best_gap = Some(gap);
            run = Running {
                effective_max: fit.effective,
                wasted_min: Some(fit.wasted),
            };
        }
        steps.push(TraceStep {
            grid,
            fit,
            aspect_gap: Some(gap),
            accepted,
            rule_fired,
            effective_max: run.effective_max,
            wasted_min: run.wasted_min,
        });
    }
    Ok(finish(MatchMethod::Internvl, cell, None, steps))
}

/// Runs the selected method with its conventional candidate source.
pub fn match_with(
    method: MatchMethod,
    original: ImageSize,
    set: &CandidateSet,
    params: RelaxedParams,
) -> Result<MatchTrace> {
    match method {
        MatchMethod::Relaxed => match_relaxed(original, set, params),
        MatchMethod::LlavaNext => match_llava_next(original, set),
        MatchMethod::Internvl => match_internvl_in_order(original, set),
    }
}

/// Re-derives every step of `trace` from scratch and checks it is reproduced
/// exactly. `params` supplies alpha for relaxed traces and is ignored by the
/// baselines.
pub fn replay_trace(trace: &MatchTrace, original: ImageSize, params: RelaxedParams) -> Result<()> {
    original.validate()?;
    if trace.steps.is_empty() {
        return Err(Error::TraceMismatch {
            step: 0,
            reason: "trace has no steps".into(),
        });
    }
    let mismatch = |step: usize, reason: String| Err(Error::TraceMismatch { step, reason });
    let mut run = Running::INIT;
    let mut best_gap: Option<f64> = None;
    let mut last_accepted = None;
    for (i, step) in trace.steps.iter().enumerate() {
        let fit = score_fit(original, step.grid, trace.cell)?;
        if fit != step.fit {
            return mismatch(i, format!("fit {:?} != recomputed {:?}", step.fit, fit));
        }
        let rule = match trace.method {
            MatchMethod::Relaxed => relaxed_rule(&fit, run, params.alpha()),
            MatchMethod::LlavaNext => llava_rule(&fit, run),
            MatchMethod::Internvl => {
                let gap = aspect_gap(original, step.grid);
                if step.aspect_gap != Some(gap) {
                    return mismatch(i, format!("aspect gap {:?} != recomputed {gap}", step.aspect_gap));
                }
                internvl_rule(gap, best_gap, original, step.grid, trace.cell)
            }
        };
        let accepted = rule != RuleFired::None;
        if accepted != step.accepted {
            return mismatch(i, format!("accepted={} but rule gives {}", step.accepted, accepted));
        }
        if rule != step.rule_fired {
            return mismatch(i, format!("rule {:?} != recomputed {:?}", step.rule_fired, rule));
        }
        if accepted {
            run = Running {
                effective_max: fit.effective,
                wasted_min: Some(fit.wasted),
            };
            best_gap = step.aspect_gap;
            last_accepted = Some(step.grid);
        }
        if (step.effective_max, step.wasted_min) != (run.effective_max, run.wasted_min) {
            return mismatch(
                i,
                format!(
                    "running ({}, {:?}) != recomputed ({}, {:?})",
                    step.effective_max, step.wasted_min, run.effective_max, run.wasted_min
                ),
            );
        }
    }
    let expected = last_accepted.unwrap_or(trace.steps[0].grid);
    let last = trace.steps.len() - 1;
    if expected != trace.selected {
        return mismatch(
            last,
            format!("selected {} but replay selects {}", trace.selected, expected),
        );
    }
    if trace.fallback != last_accepted.is_none() {
        return mismatch(last, "fallback flag disagrees with replay".into());
    }
    Ok(())
}

/// Boolean form of [`replay_trace`].
pub fn replays(trace: &MatchTrace, original: ImageSize, params: RelaxedParams) -> bool {
    replay_trace(trace, original, params).is_ok()
}
