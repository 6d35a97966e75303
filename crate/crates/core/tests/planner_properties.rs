use dynres_core::geometry::{BaseCell, GridRatio, ImageSize};
use dynres_core::matchers::{match_internvl, match_llava_next, match_relaxed, CandidateSet, RelaxedParams};
use dynres_core::planner::{build_plan, token_budget, ResizeMode, TokenDefaults};
use proptest::prelude::*;

#[test]
fn patches_tile_the_target_for_all_grids_up_to_six() {
    let cell = BaseCell { side: 16 };
    let img = ImageSize { width: 37, height: 23 };
    for m in 1..=6 {
        for n in 1..=6 {
            let plan = build_plan(img, GridRatio { m, n }, cell, ResizeMode::FitAndPad).unwrap();
            assert_eq!(plan.local_patches.len(), (m * n) as usize);
            for (i, a) in plan.local_patches.iter().enumerate() {
                for b in &plan.local_patches[i + 1..] {
                    assert!(!a.intersects(b), "{m}:{n} overlap {a:?} {b:?}");
                }
            }
            // Every pixel of the target is covered exactly once.
            let mut cover = vec![0u8; (plan.target.width * plan.target.height) as usize];
            for r in &plan.local_patches {
                for y in r.y..r.y + r.h {
                    for x in r.x..r.x + r.w {
                        cover[(y * plan.target.width + x) as usize] += 1;
                    }
                }
            }
            assert!(cover.iter().all(|&c| c == 1), "{m}:{n} gap or overlap");
        }
    }
}

proptest! {
    #[test]
    fn selected_plans_embed_the_image(w in 1u32..=4096, h in 1u32..=4096) {
        let img = ImageSize { width: w, height: h };
        let cell = BaseCell::default();
        let set = CandidateSet::grid_up_to(3, 3, cell).unwrap();
        let grids = [
            match_relaxed(img, &set, RelaxedParams::default()).unwrap().selected,
            match_llava_next(img, &set).unwrap().selected,
            match_internvl(img, 9, cell).unwrap().selected,
        ];
        for grid in grids {
            let plan = build_plan(img, grid, cell, ResizeMode::FitAndPad).unwrap();
            prop_assert!(plan.resized.width <= plan.target.width);
            prop_assert!(plan.resized.height <= plan.target.height);
            prop_assert_eq!(plan.resized.width + plan.pad.left + plan.pad.right, plan.target.width);
            prop_assert_eq!(plan.resized.height + plan.pad.top + plan.pad.bottom, plan.target.height);
            prop_assert!(plan.pad.right >= plan.pad.left && plan.pad.right - plan.pad.left <= 1);
            prop_assert!(plan.pad.bottom >= plan.pad.top && plan.pad.bottom - plan.pad.top <= 1);
            prop_assert_eq!(plan.scale_x, plan.scale_y);

            let stretched = build_plan(img, grid, cell, ResizeMode::Stretch).unwrap();
            prop_assert_eq!(stretched.resized, stretched.target);
            prop_assert_eq!(stretched.pad, Default::default());
        }
    }

    #[test]
    fn tokens_linear_in_patch_count(m in 1u32..=8, n in 1u32..=8, raw in 1u64..1000, down in 1u64..500) {
        let d = TokenDefaults { tokens_per_patch_raw: raw, tokens_per_patch_downsampled: down, include_thumbnail: true };
        let b = token_budget(GridRatio { m, n }, d);
        prop_assert_eq!(b.patch_count, (m * n) as u64 + 1);
        prop_assert_eq!(b.total_raw, b.patch_count * raw);
        prop_assert_eq!(b.total_downsampled, b.patch_count * down);
    }
}

#[test]
fn plan_json_round_trips() {
    let plan = build_plan(
        ImageSize {
            width: 394,
            height: 390,
        },
        GridRatio { m: 2, n: 2 },
        BaseCell::default(),
        ResizeMode::FitAndPad,
    )
    .unwrap();
    let json = serde_json::to_string(&plan).unwrap();
    assert!(json.contains("\"local_patches\""));
    assert!(json.contains("\"resize_mode\":\"fit_and_pad\""));
    let back: dynres_core::ResolutionPlan = serde_json::from_str(&json).unwrap();
    assert_eq!(back, plan);
}
