//! Long-term tracking precision/recall sweep on a hand-made track.

use rgbdkit::eval_vot::{attribute_report, sweep, Aggregation, EvalTrack, TrackResult};
use rgbdkit::model::{Attribute, AttributeFlags, BoundingBox, TrackPrediction};
use rgbdkit::report::{to_json, VotReport};

fn main() -> rgbdkit::Result<()> {
    let b = |x: f64| BoundingBox::new(x, 10.0, 20.0, 20.0);
    let gt = vec![Some(b(0.0)?), Some(b(2.0)?), None, None, Some(b(8.0)?), Some(b(10.0)?)];
    let preds = TrackResult::new(vec![
        TrackPrediction::present(b(1.0)?, 0.9)?,
        TrackPrediction::present(b(2.0)?, 0.8)?,
        TrackPrediction::present(b(40.0)?, 0.3)?, // false alarm while the target is gone
        TrackPrediction::absent(0.1)?,
        TrackPrediction::present(b(12.0)?, 0.6)?,
        TrackPrediction::present(b(10.0)?, 0.7)?,
    ]);
    let tracks = [EvalTrack { result: &preds, gt: &gt }];
    let curve = sweep(&tracks, Aggregation::Pooled)?;
    for p in &curve.points {
        println!("tau {:>5}: Pr {:.3} Re {:.3} F {:.3}", p.tau, p.pr, p.re, p.f);
    }
    println!("best: tau {} F {:.4}", curve.best.tau, curve.best.f);

    let flags = vec![
        AttributeFlags::none().with(Attribute::ALL[0]),
        AttributeFlags::none().with(Attribute::ALL[0]),
        AttributeFlags::none(),
        AttributeFlags::none(),
        AttributeFlags::none(),
        AttributeFlags::none(),
    ];
    let rep = attribute_report(&tracks, &[flags], &curve, Aggregation::Pooled)?;
    println!("{} at best tau: {:?}", Attribute::ALL[0].code(), rep.attributes[&Attribute::ALL[0]]);
    print!("{}", to_json(&VotReport::new(&curve, Aggregation::Pooled, 1))?);
    Ok(())
}
