//! Lifts an image feature map into the BEV plane, modulates it, samples it
//! back per pixel and fuses it with the image features.
//!
//! `cargo run --release --example bev_cross_view_fusion -- [seed]`

use rgbdkit::bev::{depth_weights, CrossViewFusion, DepthDistributionSpec, FeatureMap, PoolBackend};
use rgbdkit::model::{CameraIntrinsics, DepthMap};

fn main() -> rgbdkit::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    println!("seed {seed}");

    let spec = DepthDistributionSpec::new(0.5, 3.5, 3, 0.5)?;
    println!("weights at 2 m over bins 1, 2, 3: {:.4?}", depth_weights(2.0, &spec));

    let (w, h) = (64, 48);
    let k = CameraIntrinsics::new(55.0, 55.0, 32.0, 24.0, w, h)?;
    // a floor plane receding with image row, nearer at the bottom
    let depth = DepthMap::new(w, h, (0..w * h).map(|i| 6.0 - 4.0 * (i / w) as f32 / h as f32).collect())?;
    let feat = FeatureMap::random(8, 12, 16, seed);

    let mut fusion = CrossViewFusion::with_random_weights(8, seed)?;
    let out = fusion.run(&feat, &depth, None, &k)?;
    let occupied = (0..out.bev.grid().rows())
        .flat_map(|r| (0..out.bev.grid().cols()).map(move |c| (r, c)))
        .filter(|&(r, c)| out.bev.pillar(r, c).iter().any(|&v| v != 0.0))
        .count();
    println!(
        "BEV {}x{}x{}: {occupied} occupied pillars, mass {:.4}",
        out.bev.grid().rows(),
        out.bev.grid().cols(),
        out.bev.channels(),
        out.bev.sum()
    );
    println!("fused {}x{}x{}, sum {:.4}", out.fused.channels(), out.fused.height(), out.fused.width(), out.fused.sum());

    fusion.backend = PoolBackend::Naive;
    assert_eq!(fusion.run(&feat, &depth, None, &k)?, out);
    println!("naive scatter backend gives identical output");
    Ok(())
}
