//! Image-size manifests and corpus-level comparison of the three matchers.
//!
//! Manifest grammar (UTF-8, one record per line):
//!
//! ```text
//! line   := blank | '#' comment | header | record
//! header := "id,width,height"
//! record := id ',' width ',' height      -- image entry
//!         | id | id ',' ',' ''           -- text-only entry, counted and skipped
//! ```
//!
//! Fields are trimmed; `id` is non-empty and unique; sizes are positive
//! integers.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BaseCell, GridRatio, ImageSize};
use crate::matchers::{match_internvl, match_llava_next, match_relaxed, CandidateSet, RelaxedParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    /// Malformed lines and duplicate ids become warnings and are skipped.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub size: ImageSize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub text_only: usize,
    pub warnings: Vec<ManifestWarning>,
    pub source: PathBuf,
}

pub fn load_manifest(path: impl AsRef<Path>, mode: ParseMode) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path, mode)
}

fn parse_record(line: &str) -> std::result::Result<(String, Option<ImageSize>), String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let id = fields[0];
    if id.is_empty() {
        return Err("empty id".into());
    }
    match fields.as_slice() {
        [_] => Ok((id.to_string(), None)),
        [_, w, h] if w.is_empty() && h.is_empty() => Ok((id.to_string(), None)),
        [_, w, h] => {
            let dim = |s: &str, name: &str| -> std::result::Result<u32, String> {
                match s.parse::<u32>() {
                    Ok(v) if v > 0 => Ok(v),
                    _ => Err(format!("{name} {s:?} is not a positive integer")),
                }
            };
            Ok((
                id.to_string(),
                Some(ImageSize {
                    width: dim(w, "width")?,
                    height: dim(h, "height")?,
                }),
            ))
        }
        _ => Err(format!("expected 3 fields, found {}", fields.len())),
    }
}

pub fn parse_manifest(text: &str, source: impl Into<PathBuf>, mode: ParseMode) -> Result<Manifest> {
    let source = source.into();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    let mut text_only = 0;
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || (line_no == 1 && line.eq_ignore_ascii_case("id,width,height")) {
            continue;
        }
        let (id, size) = match parse_record(line) {
            Ok(rec) => rec,
            Err(message) => match mode {
                ParseMode::Strict => {
                    return Err(Error::Parse {
                        path: source.clone(),
                        line: line_no,
                        message,
                    })
                }
                ParseMode::Lenient => {
                    warnings.push(ManifestWarning { line: line_no, message });
                    continue;
                }
            },
        };
        if !seen.insert(id.clone()) {
            match mode {
                ParseMode::Strict => return Err(Error::DuplicateId { id, line: line_no }),
                ParseMode::Lenient => {
                    warnings.push(ManifestWarning {
                        line: line_no,
                        message: format!("duplicate id {id:?} skipped"),
                    });
                    continue;
                }
            }
        }
        match size {
            Some(size) => entries.push(ManifestEntry { id, size }),
            None => text_only += 1,
        }
    }
    if entries.is_empty() && text_only == 0 {
        warnings.push(ManifestWarning {
            line: 0,
            message: "manifest has no entries".into(),
        });
    }
    Ok(Manifest {
        entries,
        text_only,
        warnings,
        source,
    })
}

/// Candidate pools for a corpus comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub cell: BaseCell,
    /// Grid bound shared by the relaxed and LLaVA-NeXT matchers.
    pub grid_max: GridRatio,
    pub internvl_max_num: u32,
    pub alpha: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            cell: BaseCell::default(),
            grid_max: GridRatio { m: 3, n: 3 },
            internvl_max_num: 9,
            alpha: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BucketCounts {
    pub smaller: u64,
    pub equal: u64,
    pub larger: u64,
}

impl BucketCounts {
    pub fn total(&self) -> u64 {
        self.smaller + self.equal + self.larger
    }

    fn add(&mut self, ours: GridRatio, theirs: GridRatio) {
        match ours.area().cmp(&theirs.area()) {
            std::cmp::Ordering::Less => self.smaller += 1,
            std::cmp::Ordering::Equal => self.equal += 1,
            std::cmp::Ordering::Greater => self.larger += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryRow {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub relaxed: GridRatio,
    pub llava_next: GridRatio,
    pub internvl: GridRatio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub grid: GridRatio,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: CompareConfig,
    pub entries: u64,
    pub text_only_skipped: u64,
    /// Relaxed grid area compared against each baseline.
    pub vs_llava_next: BucketCounts,
    pub vs_internvl: BucketCounts,
    /// Selected-grid histograms keyed by method name, bins sorted by grid.
    pub histograms: BTreeMap<String, Vec<HistogramBin>>,
    pub rows: Vec<EntryRow>,
}

fn annotate(id: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Entry {
        id: id.to_string(),
        source: Box::new(e),
    }
}

/// Runs all three matchers on every manifest entry and aggregates how often
/// the relaxed matcher picks a smaller, equal or larger grid area than each
/// baseline. Entries are processed in parallel; rows keep manifest order.
pub fn compare_methods(manifest: &Manifest, config: &CompareConfig) -> Result<ComparisonReport> {
    let params = RelaxedParams::new(config.alpha)?;
    let set = CandidateSet::grid_up_to(config.grid_max.m, config.grid_max.n, config.cell)?;
    let rows = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let tag = annotate(&entry.id);
            let relaxed = match_relaxed(entry.size, &set, params).map_err(&tag)?.selected;
            let llava_next = match_llava_next(entry.size, &set).map_err(&tag)?.selected;
            let internvl = match_internvl(entry.size, config.internvl_max_num, config.cell)
                .map_err(&tag)?
                .selected;
            Ok(EntryRow {
                id: entry.id.clone(),
                width: entry.size.width,
                height: entry.size.height,
                relaxed,
                llava_next,
                internvl,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut vs_llava_next = BucketCounts::default();
    let mut vs_internvl = BucketCounts::default();
    let mut hist: [BTreeMap<GridRatio, u64>; 3] = Default::default();
    for row in &rows {
        vs_llava_next.add(row.relaxed, row.llava_next);
        vs_internvl.add(row.relaxed, row.internvl);
        for (h, g) in hist.iter_mut().zip([row.relaxed, row.llava_next, row.internvl]) {
            *h.entry(g).or_default() += 1;
        }
    }
    let histograms = ["relaxed", "llava-next", "internvl"]
        .into_iter()
        .zip(hist)
        .map(|(name, h)| {
            (
                name.to_string(),
                h.into_iter()
                    .map(|(grid, count)| HistogramBin { grid, count })
                    .collect(),
            )
        })
        .collect();
    Ok(ComparisonReport {
        config: config.clone(),
        entries: rows.len() as u64,
        text_only_skipped: manifest.text_only as u64,
        vs_llava_next,
        vs_internvl,
        histograms,
        rows,
    })
}

impl ComparisonReport {
    /// `baseline,smaller,equal,larger,total`.
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("baseline,smaller,equal,larger,total\n");
        for (name, b) in [("llava-next", self.vs_llava_next), ("internvl", self.vs_internvl)] {
            let _ = writeln!(out, "{name},{},{},{},{}", b.smaller, b.equal, b.larger, b.total());
        }
        out
    }

    /// `method,grid,count`.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("method,grid,count\n");
        for (method, bins) in &self.histograms {
            for bin in bins {
                let _ = writeln!(out, "{method},{},{}", bin.grid, bin.count);
            }
        }
        out
    }

    /// One row per entry with the grid chosen by each method.
    pub fn entries_csv(&self) -> String {
        let mut out = String::from("id,width,height,relaxed,llava_next,internvl\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.id, r.width, r.height, r.relaxed, r.llava_next, r.internvl
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_well_formed_lines() {
        let m = parse_manifest("a,10,20\nb,30,40\nc,1,1\n", "m", ParseMode::Strict).unwrap();
        assert_eq!(m.entries.len(), 3);
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn lenient_skips_malformed() {
        let m = parse_manifest("a,10,20\nb,x,40\nc,1,1\n", "m", ParseMode::Lenient).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.warnings.len(), 1);
        assert_eq!(m.warnings[0].line, 2);
        match parse_manifest("a,10,20\nb,x,40\n", "m", ParseMode::Strict) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_manifest_warns() {
        let m = parse_manifest("", "m", ParseMode::Strict).unwrap();
        assert!(m.entries.is_empty());
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn header_comments_and_text_only() {
        let m = parse_manifest("id,width,height\n# note\nt1\nt2,,\ni1,5,5\n", "m", ParseMode::Strict).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.text_only, 2);
    }

    #[test]
    fn duplicate_ids() {
        assert!(matches!(
            parse_manifest("a,1,1\na,2,2\n", "m", ParseMode::Strict),
            Err(Error::DuplicateId { line: 2, .. })
        ));
        let m = parse_manifest("a,1,1\na,2,2\n", "m", ParseMode::Lenient).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn zero_size_is_malformed() {
        assert!(parse_manifest("a,0,5\n", "m", ParseMode::Strict).is_err());
    }

    #[test]
    fn all_square_cells_are_equal() {
        let text: String = (0..5).map(|i| format!("sq{i},384,384\n")).collect();
        let m = parse_manifest(&text, "m", ParseMode::Strict).unwrap();
        let r = compare_methods(&m, &CompareConfig::default()).unwrap();
        assert_eq!(
            r.vs_llava_next,
            BucketCounts {
                smaller: 0,
                equal: 5,
                larger: 0
            }
        );
        assert_eq!(
            r.vs_internvl,
            BucketCounts {
                smaller: 0,
                equal: 5,
                larger: 0
            }
        );
        assert!(r.rows.iter().all(|row| row.relaxed == GridRatio { m: 1, n: 1 }));
    }
}
