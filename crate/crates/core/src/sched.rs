//! Deterministic event simulator for the on-device inference pipeline.
//!
//! Stage latencies come from a [`CostModel`], normally loaded from a device
//! calibration file. The simulator covers batched patch encoding with
//! optional CPU/NPU pipelining, chunked prefill, token-by-token decode and
//! the full request timeline in which image encoding runs while the user is
//! still entering the instruction.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kvconfig::KvConfig;
use crate::planner::ResolutionPlan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefillCost {
    pub fixed_overhead: f64,
    pub per_token: f64,
    pub quadratic: f64,
}

impl PrefillCost {
    /// Latency of one chunk of `len` tokens.
    pub fn chunk_ms(&self, len: u64) -> f64 {
        let c = len as f64;
        self.fixed_overhead + self.per_token * c + self.quadratic * c * c
    }
}

/// Stage latencies in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// CPU Conv2D time for one batch group, keyed by group size.
    pub conv2d_per_batch: BTreeMap<usize, f64>,
    /// NPU transformer time for one batch group, keyed by group size.
    pub vit_per_batch: BTreeMap<usize, f64>,
    pub prefill: PrefillCost,
    pub decode_per_token: f64,
    pub model_load: f64,
    /// Releasing the vision encoder after encoding. Zero in shipped files.
    pub vit_unload: f64,
    pub kv_capacity: u64,
}

impl CostModel {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let model = Self {
            conv2d_per_batch: cfg.indexed("encode.conv2d.batch")?,
            vit_per_batch: cfg.indexed("encode.vit.batch")?,
            prefill: PrefillCost {
                fixed_overhead: cfg.require("prefill.fixed_overhead_ms")?,
                per_token: cfg.require("prefill.per_token_ms")?,
                quadratic: cfg.require("prefill.quadratic_ms")?,
            },
            decode_per_token: cfg.require("decode.per_token_ms")?,
            model_load: cfg.require("model.load_ms")?,
            vit_unload: cfg.get_or("model.vit_unload_ms", 0.0),
            kv_capacity: cfg.require("kv.capacity_tokens")? as u64,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config(&KvConfig::load(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("prefill.fixed_overhead_ms", self.prefill.fixed_overhead),
            ("prefill.per_token_ms", self.prefill.per_token),
            ("prefill.quadratic_ms", self.prefill.quadratic),
            ("decode.per_token_ms", self.decode_per_token),
            ("model.load_ms", self.model_load),
            ("model.vit_unload_ms", self.vit_unload),
        ];
        let tables = self
            .conv2d_per_batch
            .iter()
            .chain(self.vit_per_batch.iter())
            .map(|(_, &v)| ("batch cost", v));
        for (name, v) in scalars.into_iter().chain(tables) {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InconsistentScenario(format!(
                    "{name} must be a finite non-negative latency"
                )));
            }
        }
        if self.decode_per_token <= 0.0 {
            return Err(Error::InconsistentScenario(
                "decode.per_token_ms must be positive".into(),
            ));
        }
        Ok(())
    }

    fn conv2d(&self, batch: usize) -> Result<f64> {
        self.conv2d_per_batch
            .get(&batch)
            .copied()
            .ok_or(Error::MissingCost { stage: "conv2d", batch })
    }

    fn vit(&self, batch: usize) -> Result<f64> {
        self.vit_per_batch
            .get(&batch)
            .copied()
            .ok_or(Error::MissingCost { stage: "vit", batch })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Resource {
    Cpu,
    Npu,
    /// The person typing the instruction; not a device resource.
    User,
}

impl Resource {
    pub fn name(&self) -> &'static str {
        match self {
            Resource::Cpu => "CPU",
            Resource::Npu => "NPU",
            Resource::User => "USER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub stage: String,
    pub resource: Resource,
    pub start_ms: f64,
    pub end_ms: f64,
}

impl Event {
    pub fn duration(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub events: Vec<Event>,
    pub makespan_ms: f64,
    pub hidden_latency_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub throughput_tokens_per_s: Option<f64>,
    /// Named instants and spans reported by the scenario.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub marks: BTreeMap<String, f64>,
}

impl Schedule {
    fn from_events(mut events: Vec<Event>) -> Self {
        events.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms));
        let makespan_ms = events.iter().map(|e| e.end_ms).fold(0.0, f64::max);
        let hidden_latency_ms = hidden_cpu_time(&events);
        Self {
            events,
            makespan_ms,
            hidden_latency_ms,
            throughput_tokens_per_s: None,
            marks: BTreeMap::new(),
        }
    }

    pub fn busy_ms(&self, resource: Resource) -> f64 {
        self.events
            .iter()
            .filter(|e| e.resource == resource)
            .map(Event::duration)
            .sum()
    }

    pub fn events_on(&self, resource: Resource) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.resource == resource)
    }

    /// Checks that no two events on the same resource overlap and that the
    /// list is sorted by start time.
    pub fn check_exclusive(&self) -> Result<()> {
        if self.events.windows(2).any(|w| w[0].start_ms > w[1].start_ms) {
            return Err(Error::InconsistentScenario("events not sorted by start".into()));
        }
        let mut last_end: HashMap<Resource, (f64, &str)> = HashMap::new();
        for e in &self.events {
            if e.end_ms < e.start_ms {
                return Err(Error::InconsistentScenario(format!(
                    "{} ends before it starts",
                    e.stage
                )));
            }
            if let Some(&(end, prev)) = last_end.get(&e.resource) {
                if e.start_ms < end && e.duration() > 0.0 {
                    return Err(Error::InconsistentScenario(format!(
                        "{} overlaps {} on {}",
                        e.stage,
                        prev,
                        e.resource.name()
                    )));
                }
            }
            let entry = last_end.entry(e.resource).or_insert((e.end_ms, &e.stage));
            if e.end_ms >= entry.0 {
                *entry = (e.end_ms, &e.stage);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    /// `stage,resource,start_ms,end_ms` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,resource,start_ms,end_ms\n");
        for e in &self.events {
            let _ = writeln!(out, "{},{},{},{}", e.stage, e.resource.name(), e.start_ms, e.end_ms);
        }
        out
    }
}

/// CPU time that runs while the NPU is busy.
fn hidden_cpu_time(events: &[Event]) -> f64 {
    let npu: Vec<(f64, f64)> = events
        .iter()
        .filter(|e| e.resource == Resource::Npu)
        .map(|e| (e.start_ms, e.end_ms))
        .collect();
    events
        .iter()
        .filter(|e| e.resource == Resource::Cpu)
        .map(|cpu| {
            npu.iter()
                .map(|&(s, t)| (t.min(cpu.end_ms) - s.max(cpu.start_ms)).max(0.0))
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeScenario {
    pub patch_count: usize,
    pub batch_size: usize,
    pub pipeline_overlap: bool,
}

impl EncodeScenario {
    /// Group sizes covering all patches; the last may be short.
    pub fn groups(&self) -> Vec<usize> {
        let mut left = self.patch_count;
        let mut out = Vec::new();
        while left > 0 {
            let g = left.min(self.batch_size);
            out.push(g);
            left -= g;
        }
        out
    }
}

fn encode_events(scenario: &EncodeScenario, costs: &CostModel, t0: f64) -> Result<Vec<Event>> {
    if scenario.patch_count == 0 || scenario.batch_size == 0 {
        return Err(Error::InconsistentScenario(
            "patch_count and batch_size must be positive".into(),
        ));
    }
    let mut events = Vec::new();
    let mut cpu_free = t0;
    let mut npu_free = t0;
    for (i, g) in scenario.groups().into_iter().enumerate() {
        let conv = costs.conv2d(g)?;
        let vit = costs.vit(g)?;
        // Without pipelining the next Conv2D waits for the previous ViT.
        let conv_start = if scenario.pipeline_overlap {
            cpu_free
        } else {
            cpu_free.max(npu_free)
        };
        let conv_end = conv_start + conv;
        let vit_start = conv_end.max(npu_free);
        let vit_end = vit_start + vit;
        events.push(Event {
            stage: format!("conv2d#{i}"),
            resource: Resource::Cpu,
            start_ms: conv_start,
            end_ms: conv_end,
        });
        events.push(Event {
            stage: format!("vit#{i}"),
            resource: Resource::Npu,
            start_ms: vit_start,
            end_ms: vit_end,
        });
        cpu_free = conv_end;
        npu_free = vit_end;
    }
    Ok(events)
}

/// Batched patch encoding: Conv2D embedding on the CPU feeding transformer
/// blocks on the NPU, one batch group at a time. With `pipeline_overlap`
/// the Conv2D of group `k + 1` runs while group `k` is on the NPU.
pub fn simulate_encode(scenario: &EncodeScenario, costs: &CostModel) -> Result<Schedule> {
    Ok(Schedule::from_events(encode_events(scenario, costs, 0.0)?))
}

/// Encode makespan for each candidate batch size (pipelined), fastest
/// first; equal makespans rank the smaller batch first.
pub fn sweep_batch_size(patch_count: usize, candidates: &[usize], costs: &CostModel) -> Result<Vec<(usize, f64)>> {
    let mut ranked = candidates
        .iter()
        .map(|&batch_size| {
            let s = simulate_encode(
                &EncodeScenario {
                    patch_count,
                    batch_size,
                    pipeline_overlap: true,
                },
                costs,
            )?;
            Ok((batch_size, s.makespan_ms))
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

fn prefill_events(input_tokens: u64, chunk_size: u64, costs: &CostModel, t0: f64) -> Result<Vec<Event>> {
    if chunk_size == 0 {
        return Err(Error::InconsistentScenario("chunk_size must be at least 1".into()));
    }
    if input_tokens > costs.kv_capacity {
        return Err(Error::KvCapacityExceeded {
            tokens: input_tokens,
            capacity: costs.kv_capacity,
        });
    }
    let mut t = t0;
    let mut done = 0;
    let mut events = Vec::with_capacity(input_tokens.div_ceil(chunk_size) as usize);
    while done < input_tokens {
        let len = chunk_size.min(input_tokens - done);
        let end = t + costs.prefill.chunk_ms(len);
        events.push(Event {
            stage: format!("prefill#{}", events.len()),
            resource: Resource::Npu,
            start_ms: t,
            end_ms: end,
        });
        t = end;
        done += len;
    }
    Ok(events)
}

/// Chunked prefill: `ceil(input_tokens / chunk_size)` sequential NPU
/// chunks, the last one possibly short.
pub fn simulate_prefill(input_tokens: u64, chunk_size: u64, costs: &CostModel) -> Result<Schedule> {
    Ok(Schedule::from_events(prefill_events(
        input_tokens,
        chunk_size,
        costs,
        0.0,
    )?))
}

/// Prefill makespan per candidate chunk size, fastest first.
pub fn sweep_chunk_size(input_tokens: u64, candidates: &[u64], costs: &CostModel) -> Result<Vec<(u64, f64)>> {
    let mut ranked = candidates
        .iter()
        .map(|&c| Ok((c, simulate_prefill(input_tokens, c, costs)?.makespan_ms)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

fn decode_events(output_tokens: u64, costs: &CostModel, t0: f64) -> Vec<Event> {
    let mut t = t0;
    (0..output_tokens)
        .map(|i| {
            let start = t;
            t += costs.decode_per_token;
            Event {
                stage: format!("decode#{i}"),
                resource: Resource::Npu,
                start_ms: start,
                end_ms: t,
            }
        })
        .collect()
}

pub fn simulate_decode(output_tokens: u64, costs: &CostModel) -> Result<Schedule> {
    if output_tokens == 0 {
        return Err(Error::InconsistentScenario("output_tokens must be at least 1".into()));
    }
    let mut s = Schedule::from_events(decode_events(output_tokens, costs, 0.0));
    s.throughput_tokens_per_s = Some(1000.0 / costs.decode_per_token);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineScenario {
    /// How long the user spends entering the instruction, starting once the
    /// models are loaded.
    pub instruction_entry_ms: f64,
    pub input_token_count: u64,
    pub chunk_size: u64,
    pub output_token_count: u64,
    pub encode_batch_size: usize,
    pub pipeline_overlap: bool,
}

impl Default for TimelineScenario {
    fn default() -> Self {
        Self {
            instruction_entry_ms: 0.0,
            input_token_count: 2048,
            chunk_size: 128,
            output_token_count: 1,
            encode_batch_size: 4,
            pipeline_overlap: true,
        }
    }
}

pub const MARK_IMAGE_SPAN: &str = "image_processing_span_ms";
pub const MARK_ENCODE: &str = "encode_ms";
pub const MARK_LOAD: &str = "model_load_ms";
pub const MARK_PREFILL_START: &str = "prefill_start_ms";
pub const MARK_PREFILL: &str = "prefill_ms";
pub const MARK_TTFT: &str = "time_to_first_token_ms";

/// Full request timeline: model load, then image encoding and instruction
/// entry side by side, then prefill, then decode.
pub fn simulate_timeline(plan: &ResolutionPlan, scenario: &TimelineScenario, costs: &CostModel) -> Result<Schedule> {
    if !(scenario.instruction_entry_ms >= 0.0) || !scenario.instruction_entry_ms.is_finite() {
        return Err(Error::InconsistentScenario(
            "instruction entry duration must be finite and non-negative".into(),
        ));
    }
    if scenario.output_token_count == 0 {
        return Err(Error::InconsistentScenario(
            "output_token_count must be at least 1".into(),
        ));
    }
    if scenario.input_token_count > costs.kv_capacity {
        return Err(Error::KvCapacityExceeded {
            tokens: scenario.input_token_count,
            capacity: costs.kv_capacity,
        });
    }
    let load_end = costs.model_load;
    let mut events = vec![Event {
        stage: "model_load".into(),
        resource: Resource::Cpu,
        start_ms: 0.0,
        end_ms: load_end,
    }];

    let encode = EncodeScenario {
        patch_count: plan.patch_count(),
        batch_size: scenario.encode_batch_size,
        pipeline_overlap: scenario.pipeline_overlap,
    };
    let enc = encode_events(&encode, costs, load_end)?;
    let encode_end = enc.iter().map(|e| e.end_ms).fold(load_end, f64::max);
    events.extend(enc);
    events.push(Event {
        stage: "vit_unload".into(),
        resource: Resource::Cpu,
        start_ms: encode_end,
        end_ms: encode_end + costs.vit_unload,
    });

    let instr_end = load_end + scenario.instruction_entry_ms;
    events.push(Event {
        stage: "instruction_entry".into(),
        resource: Resource::User,
        start_ms: load_end,
        end_ms: instr_end,
    });

    let prefill_start = (encode_end + costs.vit_unload).max(instr_end);
    let pre = prefill_events(scenario.input_token_count, scenario.chunk_size, costs, prefill_start)?;
    let prefill_end = pre.last().map_or(prefill_start, |e| e.end_ms);
    events.extend(pre);
    events.extend(decode_events(scenario.output_token_count, costs, prefill_end));

    let mut s = Schedule::from_events(events);
    s.throughput_tokens_per_s = Some(1000.0 / costs.decode_per_token);
    s.marks.insert(MARK_LOAD.into(), load_end);
    s.marks.insert(MARK_ENCODE.into(), encode_end - load_end);
    s.marks.insert(MARK_IMAGE_SPAN.into(), encode_end);
    s.marks.insert(MARK_PREFILL_START.into(), prefill_start);
    s.marks.insert(MARK_PREFILL.into(), prefill_end - prefill_start);
    s.marks.insert(MARK_TTFT.into(), prefill_end + costs.decode_per_token);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_costs() -> CostModel {
        CostModel {
            conv2d_per_batch: [(1, 10.0), (2, 100.0)].into_iter().collect(),
            vit_per_batch: [(1, 50.0), (2, 500.0)].into_iter().collect(),
            prefill: PrefillCost {
                fixed_overhead: 1.0,
                per_token: 0.5,
                quadratic: 0.0,
            },
            decode_per_token: 40.0,
            model_load: 100.0,
            vit_unload: 0.0,
            kv_capacity: 4096,
        }
    }

    #[test]
    fn two_group_pipeline() {
        let s = simulate_encode(
            &EncodeScenario {
                patch_count: 4,
                batch_size: 2,
                pipeline_overlap: true,
            },
            &toy_costs(),
        )
        .unwrap();
        assert_eq!(s.makespan_ms, 1100.0);
        assert_eq!(s.hidden_latency_ms, 100.0);
        s.check_exclusive().unwrap();
        let serial = simulate_encode(
            &EncodeScenario {
                patch_count: 4,
                batch_size: 2,
                pipeline_overlap: false,
            },
            &toy_costs(),
        )
        .unwrap();
        assert_eq!(serial.makespan_ms, 1200.0);
        assert_eq!(serial.hidden_latency_ms, 0.0);
    }

    #[test]
    fn single_group_overlap_is_moot() {
        let c = toy_costs();
        let on = simulate_encode(
            &EncodeScenario {
                patch_count: 1,
                batch_size: 1,
                pipeline_overlap: true,
            },
            &c,
        )
        .unwrap();
        let off = simulate_encode(
            &EncodeScenario {
                patch_count: 1,
                batch_size: 1,
                pipeline_overlap: false,
            },
            &c,
        )
        .unwrap();
        assert_eq!(on.makespan_ms, off.makespan_ms);
    }

    #[test]
    fn grouping_leaves_short_tail() {
        let s = EncodeScenario {
            patch_count: 9,
            batch_size: 4,
            pipeline_overlap: true,
        };
        assert_eq!(s.groups(), vec![4, 4, 1]);
    }

    #[test]
    fn missing_batch_entry() {
        let err = simulate_encode(
            &EncodeScenario {
                patch_count: 3,
                batch_size: 3,
                pipeline_overlap: true,
            },
            &toy_costs(),
        );
        assert!(matches!(err, Err(Error::MissingCost { batch: 3, .. })));
    }

    #[test]
    fn prefill_chunks_and_capacity() {
        let c = toy_costs();
        let s = simulate_prefill(300, 128, &c).unwrap();
        assert_eq!(s.events.len(), 3);
        // 128, 128, 44 tokens.
        assert_eq!(s.makespan_ms, 3.0 + 0.5 * 300.0);
        assert!(matches!(
            simulate_prefill(5000, 128, &c),
            Err(Error::KvCapacityExceeded { .. })
        ));
        assert!(simulate_prefill(10, 0, &c).is_err());
    }

    #[test]
    fn decode_is_linear() {
        let c = toy_costs();
        assert_eq!(simulate_decode(1, &c).unwrap().makespan_ms, 40.0);
        let s = simulate_decode(100, &c).unwrap();
        assert_eq!(s.makespan_ms, 4000.0);
        assert_eq!(s.throughput_tokens_per_s, Some(25.0));
        assert!(simulate_decode(0, &c).is_err());
    }

    #[test]
    fn csv_export() {
        let s = simulate_decode(2, &toy_costs()).unwrap();
        assert_eq!(
            s.to_csv(),
            "stage,resource,start_ms,end_ms\ndecode#0,NPU,0,40\ndecode#1,NPU,40,80\n"
        );
    }

    #[test]
    fn overlapping_events_detected() {
        let mut s = simulate_decode(2, &toy_costs()).unwrap();
        s.events[1].start_ms = 30.0;
        assert!(s.check_exclusive().is_err());
    }
}
