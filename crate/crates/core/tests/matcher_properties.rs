mod common;

use dynres_core::geometry::{score_fit, BaseCell, GridRatio, ImageSize};
use dynres_core::matchers::{
    match_internvl, match_llava_next, match_relaxed, match_relaxed_in_order, replay_trace, CandidateSet, RelaxedParams,
    RuleFired,
};
use proptest::prelude::*;

fn size_strategy() -> impl Strategy<Value = ImageSize> {
    (1u32..=4096, 1u32..=4096).prop_map(|(width, height)| ImageSize { width, height })
}

fn set3() -> CandidateSet {
    CandidateSet::grid_up_to(3, 3, BaseCell::default()).unwrap()
}

fn pair(g: GridRatio) -> (u64, u64) {
    (g.m as u64, g.n as u64)
}

proptest! {
    #[test]
    fn effective_plus_wasted_is_target_area(img in size_strategy(), m in 1u32..=8, n in 1u32..=8) {
        let fit = score_fit(img, GridRatio { m, n }, BaseCell::default()).unwrap();
        prop_assert_eq!(fit.effective + fit.wasted, 384 * 384 * m as u64 * n as u64);
        prop_assert!(fit.effective <= img.area());
        let oracle = common::fit(img.width as u64, img.height as u64, m as u64, n as u64, 384);
        prop_assert_eq!((fit.effective, fit.wasted), oracle);
    }

    #[test]
    fn effective_is_monotone_in_grid(img in size_strategy(), m in 1u32..=6, n in 1u32..=6, dm in 0u32..3, dn in 0u32..3) {
        let cell = BaseCell::default();
        let small = score_fit(img, GridRatio { m, n }, cell).unwrap();
        let big = score_fit(img, GridRatio { m: m + dm, n: n + dn }, cell).unwrap();
        prop_assert!(big.effective >= small.effective);
    }

    #[test]
    fn full_area_iff_scaled_image_covers_original(img in size_strategy(), m in 1u32..=6, n in 1u32..=6) {
        let fit = score_fit(img, GridRatio { m, n }, BaseCell::default()).unwrap();
        let covers = fit.scaled_width * fit.scaled_height >= img.area();
        prop_assert_eq!(fit.effective == img.area(), covers);
    }

    #[test]
    fn relaxed_trace_is_valid(img in size_strategy(), alpha in 0.0f64..0.5) {
        let p = RelaxedParams::new(alpha).unwrap();
        let t = match_relaxed(img, &set3(), p).unwrap();
        prop_assert!(set3().contains(t.selected));
        let mut prev = (0u64, None::<u64>);
        for s in &t.steps {
            let re = s.fit.effective as f64;
            let max = prev.0 as f64;
            let eq1 = re - max > alpha * max;
            let eq2 = max - re < alpha * max && prev.1.is_none_or(|w| s.fit.wasted < w);
            prop_assert_eq!(s.accepted, eq1 || eq2);
            prop_assert_eq!(s.rule_fired == RuleFired::CondImprove, eq1);
            let changed = (s.effective_max, s.wasted_min) != prev;
            prop_assert!(!changed || s.accepted);
            prev = (s.effective_max, s.wasted_min);
        }
        if let Some(last) = t.steps.iter().rev().find(|s| s.accepted) {
            prop_assert_eq!(last.grid, t.selected);
        }
        replay_trace(&t, img, p).unwrap();
        let oracle = common::relaxed_selected(img.width as u64, img.height as u64, common::grid(3, 3), alpha);
        prop_assert_eq!(pair(t.selected), oracle);
    }

    #[test]
    fn matchers_are_deterministic(img in size_strategy()) {
        let p = RelaxedParams::default();
        prop_assert_eq!(match_relaxed(img, &set3(), p).unwrap(), match_relaxed(img, &set3(), p).unwrap());
        prop_assert_eq!(match_llava_next(img, &set3()).unwrap(), match_llava_next(img, &set3()).unwrap());
        let cell = BaseCell::default();
        prop_assert_eq!(match_internvl(img, 9, cell).unwrap(), match_internvl(img, 9, cell).unwrap());
    }

    #[test]
    fn baselines_match_reference_behaviour(img in size_strategy(), k in 1u32..=12) {
        let (w, h) = (img.width as u64, img.height as u64);
        let llava = match_llava_next(img, &set3()).unwrap();
        prop_assert_eq!(pair(llava.selected), common::llava_next(w, h, &common::grid(3, 3)));
        let ivl = match_internvl(img, k, BaseCell::default()).unwrap();
        prop_assert_eq!(pair(ivl.selected), common::internvl(w, h, k as u64));
        prop_assert!(ivl.selected.area() <= k as u64);
    }

    #[test]
    fn zero_alpha_ascending_equals_llava_next(img in size_strategy()) {
        for set in [set3(), CandidateSet::max_num(9, BaseCell::default()).unwrap()] {
            let asc = set.ascending();
            let relaxed = match_relaxed_in_order(img, &asc, RelaxedParams::new(0.0).unwrap()).unwrap();
            let llava = match_llava_next(img, &asc).unwrap();
            prop_assert_eq!(relaxed.selected, llava.selected);
        }
    }
}

#[test]
fn flipped_rule_label_is_caught() {
    let img = ImageSize {
        width: 500,
        height: 102,
    };
    let p = RelaxedParams::default();
    let mut t = match_relaxed(img, &set3(), p).unwrap();
    let i = t.steps.iter().position(|s| s.accepted).unwrap();
    t.steps[i].rule_fired = RuleFired::CondNearTie;
    assert!(replay_trace(&t, img, p).is_err());
}

#[test]
fn tampered_selection_is_caught() {
    let img = ImageSize {
        width: 380,
        height: 393,
    };
    let p = RelaxedParams::default();
    let mut t = match_relaxed(img, &set3(), p).unwrap();
    t.selected = GridRatio { m: 2, n: 2 };
    assert!(replay_trace(&t, img, p).is_err());
}
