use gladas_core::pipeline::{crop_upper_body, scale_bbox, PipelineError};
use gladas_core::BBox;
use proptest::prelude::*;

const SMALL: (u32, u32) = (768, 288);
const FULL: (u32, u32) = (1280, 480);

fn small_box() -> impl Strategy<Value = BBox> {
    (0u32..SMALL.0 - 9, 0u32..SMALL.1 - 7)
        .prop_flat_map(|(x0, y0)| (Just(x0), Just(y0), x0 + 9..=SMALL.0, y0 + 7..=SMALL.1))
        .prop_map(|(x0, y0, x1, y1)| BBox::new(x0, y0, x1, y1))
}

/// Largest coordinate gap between two boxes.
fn deviation(a: BBox, b: BBox) -> u32 {
    [a.x0.abs_diff(b.x0), a.y0.abs_diff(b.y0), a.x1.abs_diff(b.x1), a.y1.abs_diff(b.y1)]
        .into_iter()
        .max()
        .unwrap()
}

/// Cropping in detector space and scaling up, against scaling up and then
/// cropping. `None` when either side rejects the box.
fn both_orders(b: BBox) -> Option<(BBox, BBox)> {
    let crop_then_scale = scale_bbox(crop_upper_body(b).ok()?, SMALL, FULL);
    let scale_then_crop = crop_upper_body(scale_bbox(b, SMALL, FULL)).ok()?;
    Some((crop_then_scale, scale_then_crop))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn crop_commutes_with_scaling_within_one_pixel(b in small_box()) {
        if let Some((a, c)) = both_orders(b) {
            prop_assert!(deviation(a, c) <= 1, "{b:?}: {a:?} vs {c:?}");
        }
    }

    #[test]
    fn crop_and_scaling_disagree_by_at_most_two_pixels(b in small_box()) {
        if let Some((a, c)) = both_orders(b) {
            prop_assert!(deviation(a, c) <= 2, "{b:?}: {a:?} vs {c:?}");
        }
    }

    #[test]
    fn crop_never_grows_the_box(b in small_box()) {
        let c = crop_upper_body(b).unwrap();
        prop_assert!(c.x0 > b.x0 && c.y0 > b.y0 && c.x1 < b.x1 && c.y1 < b.y1);
    }
}

#[test]
fn boxes_below_the_crop_minimum_are_degenerate() {
    for b in [BBox::new(0, 0, 2, 2), BBox::new(10, 10, 18, 40), BBox::new(10, 10, 40, 16), BBox::new(5, 5, 5, 30)] {
        assert_eq!(crop_upper_body(b), Err(PipelineError::DegenerateBox(b)));
    }
    assert!(crop_upper_body(BBox::new(0, 0, 9, 7)).is_ok());
}
