//! Training losses with analytic gradients, checked by central differences.

use rgbdkit::losses::{check_gradient, giou, giou_loss, gradient_suite, LossConfig, SUITE_STEP, SUITE_TOLERANCE};
use rgbdkit::model::BoundingBox;

fn main() -> rgbdkit::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let target = BoundingBox::new(2.0, 2.0, 4.0, 4.0)?;
    let pred = BoundingBox::new(3.0, 1.5, 4.5, 3.0)?;
    println!("GIoU {:.4}, loss {:.4}", giou(&pred, &target), giou_loss(&pred, &target).value);

    let report = check_gradient(
        |v| Ok(giou_loss(&BoundingBox::new(v[0], v[1], v[2], v[3])?, &target)),
        &pred.to_array(),
        SUITE_STEP,
        SUITE_TOLERANCE,
    )?;
    println!("GIoU gradient {:.4?}, max rel error {:.2e}", report.analytic, report.max_rel_error);

    println!("suite with seed {seed}:");
    for e in gradient_suite(seed, 20, &LossConfig::default())? {
        println!("  {:<16} {} points  max rel err {:.2e}  {}", e.loss, e.points, e.max_rel_error, if e.passed { "ok" } else { "FAIL" });
    }
    Ok(())
}
