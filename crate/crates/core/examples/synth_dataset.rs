//! Writes a small synthetic RGB-D sequence, validates it, and loads it back.
//!
//! `cargo run --example synth_dataset -- [out_dir]`

use std::path::PathBuf;

use rgbdkit::dataset::{load_dataset, synth_sequence, validate_dataset, DepthModel, SynthSpec, SynthTarget};

fn main() -> rgbdkit::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("rgbdkit-synth"));
    let spec = SynthSpec {
        id: "corridor".into(),
        frames: 12,
        width: 96,
        height: 64,
        depth_model: DepthModel::Ramp { near: 1.0, far: 6.0 },
        targets: vec![
            SynthTarget {
                hidden: vec![[5, 7]],
                ..SynthTarget::default()
            },
            SynthTarget {
                id: 2,
                start: [70.0, 30.0],
                velocity: [-3.0, 0.0],
                size: [10, 14],
                depth: 1.2,
                confidence: 0, // low confidence everywhere on the target, so LD gets flagged
                ..SynthTarget::default()
            },
        ],
        noise_seed: 42,
        noise_std: 0.02,
        ..SynthSpec::default()
    };
    println!("noise seed {}", spec.noise_seed);
    let gt = synth_sequence(&spec, &out.join(&spec.id))?;
    for t in &gt.tracks {
        let visible = t.boxes.iter().flatten().count();
        let keyframes = t.keyframes.iter().filter(|&&k| k).count();
        println!("target {}: {visible}/{} visible frames, {keyframes} keyframes", t.target, t.len());
    }

    let report = validate_dataset(&out)?;
    println!("validation: {} sequences, {} violations", report.summary.sequences, report.summary.violations);
    let seqs = load_dataset(&out)?;
    println!("loaded {} tracks from {}", seqs.iter().map(|s| s.tracks().len()).sum::<usize>(), out.display());
    Ok(())
}
