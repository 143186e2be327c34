//! Box decoding from head maps and the dynamic template memory.

use rgbdkit::heads::{decode_box, HeadMaps, MemoryPolicy, MemoryStrategy, SearchRegion, TemplateMemory, TemplateRecord};

fn main() -> rgbdkit::Result<()> {
    let (h, w) = (16, 16);
    let n = h * w;
    let mut score = vec![0.05f32; n];
    score[5 * w + 9] = 0.93;
    let mut offset = vec![0.0f32; 2 * n];
    offset[5 * w + 9] = 0.4;
    offset[n + 5 * w + 9] = 0.25;
    let size = vec![3.0f32; 2 * n];
    let maps = HeadMaps::new(h, w, score, offset, size)?;
    let d = decode_box(&maps)?;
    println!("peak {:?} conf {:.2} center {:?}", d.peak, d.confidence, d.center);
    // map cells are 16 pixels in a crop whose corner sits at (100, 60)
    let img = SearchRegion::new((100.0, 60.0), 16.0)?.to_image(&d.bbox)?;
    println!("image box x={:.1} y={:.1} w={:.1} h={:.1}", img.x(), img.y(), img.w(), img.h());

    let policy = MemoryPolicy {
        strategy: MemoryStrategy::Add { capacity: 3 },
        interval: 10,
        iou_threshold: Some(0.7),
    };
    let mut mem = TemplateMemory::new(policy, TemplateRecord { frame: 0, payload: "first" })?;
    for (frame, iou) in [(10, 0.9), (15, 0.99), (20, 0.5), (30, 0.8), (40, 0.75), (50, 0.95)] {
        let outcome = mem.maybe_update(frame, iou, "mask");
        let frames: Vec<u64> = mem.templates().map(|t| t.frame).collect();
        println!("frame {frame} iou {iou}: {outcome:?}, memory {frames:?}");
    }
    Ok(())
}
