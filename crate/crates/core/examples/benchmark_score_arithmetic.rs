//! Recomputes summary scores from their printed components: F from
//! precision and recall, J&F from region and contour means.

use rgbdkit::eval_vot::f_score;

fn main() {
    let vot = [("tracker A", 0.488, 0.469, 0.478), ("tracker B", 0.495, 0.413, 0.450), ("tracker C", 0.440, 0.440, 0.440)];
    for (name, pr, re, printed) in vot {
        let f = f_score(pr, re);
        println!("{name}: F({pr}, {re}) = {f:.4}, printed {printed}, diff {:+.4}", f - printed);
    }
    let vos: [(&str, f64, f64, f64); 2] = [("method A", 0.625, 0.698, 0.662), ("method B", 0.555, 0.627, 0.582)];
    for (name, j, f, printed) in vos {
        let jf = (j + f) / 2.0;
        let note = if (jf - printed).abs() > 1e-3 { "  <- does not match" } else { "" };
        println!("{name}: (J {j} + F {f}) / 2 = {jf:.4}, printed {printed}{note}");
    }
}
