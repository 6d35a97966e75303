mod common;

use dynres_core::corpus::{compare_methods, load_manifest, parse_manifest, BucketCounts, CompareConfig, ParseMode};
use dynres_core::SYNTHETIC_MANIFEST;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recounts buckets from the raw manifest text with the test-side matchers.
fn recount(text: &str) -> (BucketCounts, BucketCounts) {
    let mut vs_llava = BucketCounts::default();
    let mut vs_ivl = BucketCounts::default();
    let bump = |b: &mut BucketCounts, ours: (u64, u64), theirs: (u64, u64)| {
        let (a, t) = (ours.0 * ours.1, theirs.0 * theirs.1);
        if a < t {
            b.smaller += 1
        } else if a == t {
            b.equal += 1
        } else {
            b.larger += 1
        }
    };
    for line in text.lines().skip(1) {
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            continue;
        }
        let (w, h): (u64, u64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let ours = common::relaxed_selected(w, h, common::grid(3, 3), 0.1);
        bump(&mut vs_llava, ours, common::llava_next(w, h, &common::grid(3, 3)));
        bump(&mut vs_ivl, ours, common::internvl(w, h, 9));
    }
    (vs_llava, vs_ivl)
}

#[test]
fn synthetic_manifest_matches_recount() {
    let manifest = load_manifest(SYNTHETIC_MANIFEST, ParseMode::Strict).unwrap();
    assert_eq!(manifest.entries.len(), 10_000);
    assert_eq!(manifest.text_only, 40);
    let report = compare_methods(&manifest, &CompareConfig::default()).unwrap();
    let text = std::fs::read_to_string(SYNTHETIC_MANIFEST).unwrap();
    let (llava, ivl) = recount(&text);
    assert_eq!(report.vs_llava_next, llava);
    assert_eq!(report.vs_internvl, ivl);
    assert_eq!(report.vs_llava_next.total(), 10_000);
    assert_eq!(report.vs_internvl.total(), 10_000);
    for bins in report.histograms.values() {
        assert_eq!(bins.iter().map(|b| b.count).sum::<u64>(), 10_000);
    }
}

#[test]
fn shuffling_changes_no_aggregate() {
    let text = std::fs::read_to_string(SYNTHETIC_MANIFEST).unwrap();
    let mut lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && *l != "id,width,height")
        .take(2000)
        .collect();
    let a = parse_manifest(&lines.join("\n"), "a", ParseMode::Strict).unwrap();
    lines.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let b = parse_manifest(&lines.join("\n"), "b", ParseMode::Strict).unwrap();
    let cfg = CompareConfig::default();
    let ra = compare_methods(&a, &cfg).unwrap();
    let rb = compare_methods(&b, &cfg).unwrap();
    assert_eq!(ra.vs_llava_next, rb.vs_llava_next);
    assert_eq!(ra.vs_internvl, rb.vs_internvl);
    assert_eq!(ra.histograms, rb.histograms);
    // Parallel execution keeps rows in manifest order.
    assert_eq!(
        ra.rows.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
        a.entries.iter().map(|e| e.id.as_str()).collect::<Vec<_>>()
    );
}

#[test]
fn report_csv_shapes() {
    let m = parse_manifest("a,394,390\nb,380,76\n", "m", ParseMode::Strict).unwrap();
    let r = compare_methods(&m, &CompareConfig::default()).unwrap();
    let agg = r.aggregate_csv();
    assert_eq!(agg.lines().count(), 3);
    assert!(agg.starts_with("baseline,smaller,equal,larger,total\n"));
    assert_eq!(r.entries_csv().lines().nth(1), Some("a,394,390,1:1,2:2,1:1"));
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["entries"], 2);
}
