//! Keyframe annotation helpers: fill in boxes between keyframes and derive
//! the low-depth-quality flag from the confidence map.

use rgbdkit::annotation::{compute_ld_flag, interpolate_boxes, KeyframeTrack, LD_THRESHOLD};
use rgbdkit::model::{BoundingBox, ConfidenceMap};

fn main() -> rgbdkit::Result<()> {
    let track = KeyframeTrack::new(vec![
        (0, Some(BoundingBox::new(10.0, 10.0, 20.0, 20.0)?)),
        (4, Some(BoundingBox::new(30.0, 14.0, 24.0, 20.0)?)),
        (6, None), // target leaves view
        (9, Some(BoundingBox::new(50.0, 20.0, 20.0, 20.0)?)),
    ])?;
    for (frame, b) in (0..10).zip(interpolate_boxes(&track, 0..10)?) {
        match b {
            Some(b) => println!("frame {frame}: x={:.1} y={:.1} w={:.1} h={:.1}", b.x(), b.y(), b.w(), b.h()),
            None => println!("frame {frame}: absent"),
        }
    }

    // left half of the map is low confidence
    let conf = ConfidenceMap::new(64, 32, (0..64 * 32).map(|i| if i % 64 < 32 { 0 } else { 2 }).collect())?;
    for x in [4.0, 24.0, 40.0] {
        let b = BoundingBox::new(x, 4.0, 16.0, 16.0)?;
        println!("box at x={x}: LD = {}", compute_ld_flag(&conf, &b, LD_THRESHOLD)?);
    }
    Ok(())
}
