//! Region similarity J and contour accuracy F on simple masks.

use rgbdkit::eval_vos::{aggregate, contour_accuracy, default_radius, evaluate_track, region_similarity};
use rgbdkit::model::{Track, TargetMask};

fn main() -> rgbdkit::Result<()> {
    let gt = TargetMask::from_rect(40, 40, 10, 10, 20, 20);
    let shifted = TargetMask::from_rect(40, 40, 11, 10, 21, 20);
    println!("J(shifted) = {:.4}", region_similarity(&shifted, &gt)?);
    for r in [0.0, 1.0, 2.0] {
        println!("F(shifted, r={r}) = {:.4}", contour_accuracy(&shifted, &gt, r)?);
    }
    println!("default radius at 256x192: {}", default_radius(256, 192));

    let mut track = Track::from_boxes("demo", 1, vec![None; 4]);
    track.masks = (0..4).map(|i| Some(TargetMask::from_rect(40, 40, 5 + 2 * i, 8, 20 + 2 * i, 24))).collect();
    let preds: Vec<Option<TargetMask>> = (0..4)
        .map(|i| (i != 2).then(|| TargetMask::from_rect(40, 40, 6 + 2 * i, 8, 21 + 2 * i, 25)))
        .collect();
    let scores = evaluate_track(&track, &preds, None)?;
    println!("per frame J {:.3?}", scores.j);
    println!("per frame F {:.3?}", scores.f);
    let all = aggregate(std::slice::from_ref(&scores), false)?;
    let inner = aggregate(std::slice::from_ref(&scores), true)?;
    println!("J&F {:.4} (first and last frames excluded: {:.4})", all.j_and_f, inner.j_and_f);
    Ok(())
}
