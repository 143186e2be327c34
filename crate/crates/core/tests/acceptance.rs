//! Acceptance checks, one line per criterion. Exits nonzero if any fails.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use rgbdkit::bev::{bev_pool, depth_weights, DepthDistributionSpec, PoolBackend, Reduction};
use rgbdkit::dataset::{load_sequence, read_depth_tiff, synth_sequence, validate_dataset, SynthSpec, SynthTarget};
use rgbdkit::eval_vos::{aggregate, contour_accuracy, evaluate_track};
use rgbdkit::eval_vot::{f_score, sweep, Aggregation, EvalTrack, TrackResult};
use rgbdkit::geometry::{bev_cell_of, project, unproject, BEVGridSpec};
use rgbdkit::heads::{decode_box, HeadMaps, MemoryPolicy, MemoryStrategy, TemplateMemory, TemplateRecord};
use rgbdkit::losses::{gradient_suite, LossConfig};
use rgbdkit::model::{BoundingBox, CameraIntrinsics, TargetMask};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < budget_s, || {
        format!("took {:.2} s, budget {budget_s} s", elapsed.as_secs_f64())
    })
}

// -- published benchmark rows ------------------------------------------------

/// (Pr, Re, F) as printed.
type PrReF = (f64, f64, f64);

/// Tracker rows over the three long-term RGB-D benchmarks.
const VOT_ROWS: &[(&str, [PrReF; 3])] = &[
    ("Stark-ST101", [(0.407, 0.381, 0.393), (0.503, 0.468, 0.485), (0.657, 0.669, 0.663)]),
    ("OSTrack", [(0.440, 0.440, 0.440), (0.572, 0.563, 0.567), (0.713, 0.686, 0.699)]),
    ("MixFormer1k", [(0.449, 0.421, 0.434), (0.490, 0.454, 0.471), (0.692, 0.664, 0.678)]),
    ("ToMP101", [(0.449, 0.433, 0.441), (0.515, 0.495, 0.505), (0.670, 0.683, 0.676)]),
    ("TSDM", [(0.389, 0.292, 0.334), (0.442, 0.363, 0.398), (0.647, 0.543, 0.591)]),
    ("ATCAIS", [(0.389, 0.343, 0.364), (0.473, 0.402, 0.435), (0.709, 0.696, 0.702)]),
    ("DAL", [(0.446, 0.329, 0.378), (0.512, 0.369, 0.429), (0.620, 0.560, 0.589)]),
    ("TALGD", [(0.428, 0.352, 0.386), (0.494, 0.424, 0.456), (0.630, 0.596, 0.613)]),
    ("DeT", [(0.428, 0.405, 0.416), (0.560, 0.506, 0.532), (0.674, 0.642, 0.657)]),
    ("STARK_RGBD", [(0.469, 0.426, 0.446), (0.570, 0.558, 0.564), (0.743, 0.769, 0.755)]),
    ("DDiMP", [(0.495, 0.413, 0.450), (0.540, 0.475, 0.506), (0.703, 0.689, 0.696)]),
    ("proposed", [(0.488, 0.469, 0.478), (0.617, 0.607, 0.612), (0.711, 0.671, 0.690)]),
];

/// (method, J&F, J_M, F_M) on the RGB-D VOS test split.
const VOS_ROWS: &[(&str, f64, f64, f64)] = &[
    ("STCN", 0.525, 0.489, 0.560),
    ("AOT", 0.582, 0.555, 0.627),
    ("RPCM", 0.509, 0.492, 0.527),
    ("QDMN", 0.306, 0.276, 0.337),
    ("STCN_RGBD", 0.537, 0.498, 0.575),
    ("proposed", 0.662, 0.625, 0.698),
];

/// Printed J&F disagrees with the mean of its printed J_M and F_M.
const VOS_KNOWN_MISMATCH: &[&str] = &["AOT"];

const TABLE_TOL: f64 = 1e-3;

fn f_score_rows() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for (name, cols) in VOT_ROWS {
        for (i, &(pr, re, f)) in cols.iter().enumerate() {
            let err = (f_score(pr, re) - f).abs();
            worst = worst.max(err);
            n += 1;
            ensure(err <= TABLE_TOL, || format!("{name} column {i}: f({pr}, {re}) = {:.4} vs {f}", f_score(pr, re)))?;
        }
    }
    Ok(format!("{n} rows, max |err| {worst:.5}"))
}

fn j_and_f_rows() -> Outcome {
    let mut checked = 0;
    for &(name, jf, j, f) in VOS_ROWS {
        let err = ((j + f) / 2.0 - jf).abs();
        if VOS_KNOWN_MISMATCH.contains(&name) {
            ensure(err > TABLE_TOL, || format!("{name} now agrees; drop it from the known mismatches"))?;
        } else {
            ensure(err <= TABLE_TOL, || format!("{name}: ({j} + {f}) / 2 vs {jf}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} columns agree; AOT mismatch (0.591 vs 0.582) is known"))
}

// -- evaluation ----------------------------------------------------------------

fn sweep_oracle() -> Outcome {
    let cases = vot_cases(2024, 10, 200);
    let tracks: Vec<EvalTrack<'_>> = cases.iter().map(|c| EvalTrack { result: &c.result, gt: &c.gt }).collect();
    let mut elapsed = Duration::ZERO;
    for (mode, per_track) in [(Aggregation::Pooled, false), (Aggregation::PerTrack, true)] {
        let t = Instant::now();
        let curve = sweep(&tracks, mode).map_err(|e| e.to_string())?;
        elapsed += t.elapsed();
        let (points, best) = oracle_sweep(&cases, per_track);
        ensure(curve.points.len() == points.len(), || "threshold count differs".into())?;
        ensure(curve.best.f.to_bits() == best.f.to_bits() && curve.best.tau == best.tau, || {
            format!("{mode:?}: best {:?} vs oracle {best:?}", curve.best)
        })?;
        for (p, o) in curve.points.iter().zip(&points) {
            ensure(p.f.to_bits() == o.f.to_bits(), || format!("{mode:?} at tau {}: {} vs {}", p.tau, p.f, o.f))?;
        }
    }
    within(elapsed, 5.0)?;
    let frames: usize = cases.iter().map(|c| c.gt.len()).sum();
    Ok(format!("10 tracks, {frames} frames, both modes exact, sweep {:.3} s", elapsed.as_secs_f64()))
}

fn self_evaluation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        frames: 9,
        targets: vec![
            SynthTarget {
                hidden: vec![[2, 4]],
                ..SynthTarget::default()
            },
            SynthTarget {
                id: 2,
                start: [40.0, 20.0],
                velocity: [-1.0, 0.5],
                ..SynthTarget::default()
            },
        ],
        ..SynthSpec::default()
    };
    synth_sequence(&spec, dir.path()).map_err(|e| e.to_string())?;
    let seq = load_sequence(dir.path()).map_err(|e| e.to_string())?;
    let tracks = seq.tracks();
    let results: Vec<TrackResult> = tracks.iter().map(|t| TrackResult::from_ground_truth(&t.boxes)).collect();
    let eval: Vec<EvalTrack<'_>> = tracks.iter().zip(&results).map(|(t, r)| EvalTrack { result: r, gt: &t.boxes }).collect();
    for mode in [Aggregation::Pooled, Aggregation::PerTrack] {
        let b = sweep(&eval, mode).map_err(|e| e.to_string())?.best;
        ensure(b.pr == 1.0 && b.re == 1.0 && b.f == 1.0, || format!("{mode:?}: {b:?}"))?;
    }
    let scores = tracks
        .iter()
        .map(|t| evaluate_track(t, &t.masks, None))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let agg = aggregate(&scores, false).map_err(|e| e.to_string())?;
    ensure(agg.j_m == 1.0 && agg.f_m == 1.0 && agg.j_and_f == 1.0, || format!("{agg:?}"))?;
    Ok("Pr = Re = F = 1 in both modes; J_M = F_M = J&F = 1".into())
}

fn contour_accuracy_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..5 {
        let m = random_mask(&mut rng, 20, 16);
        let f = contour_accuracy(&m, &m, 0.0).map_err(|e| e.to_string())?;
        ensure(f == 1.0, || format!("identical masks gave {f}"))?;
    }
    let a = TargetMask::from_rect(24, 24, 5, 5, 15, 15);
    let b = TargetMask::from_rect(24, 24, 6, 5, 16, 15);
    let shifted = contour_accuracy(&a, &b, 1.0).map_err(|e| e.to_string())?;
    ensure(shifted == 1.0, || format!("shifted square at r=1 gave {shifted}"))?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (w, h) = (rng.gen_range(4..=32), rng.gen_range(4..=32));
        let p = random_mask(&mut rng, w, h);
        let g = random_mask(&mut rng, w, h);
        let r = f64::from(rng.gen_range(0..4u8));
        let lib = contour_accuracy(&p, &g, r).map_err(|e| e.to_string())?;
        let reference = oracle_contour(&p, &g, r);
        worst = worst.max((lib - reference).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation from brute force {worst:e}"))?;
    Ok(format!("identity, shifted square, 20 random pairs max |err| {worst:e}"))
}

// -- geometry and BEV ------------------------------------------------------------

fn bev_pooling() -> Outcome {
    let grid = BEVGridSpec::new([-3.2, 3.2], [0.0, 6.4], 0.1).map_err(|e| e.to_string())?;
    ensure(grid.rows() == 64 && grid.cols() == 64, || "grid is not 64x64".into())?;
    let cloud = random_cloud(10, 10_000, 4, &grid);
    let t = Instant::now();
    let bev = bev_pool(&cloud, &grid, PoolBackend::Accelerated, Reduction::Sum);
    let elapsed = t.elapsed();
    let reference = oracle_scatter(&cloud, &grid);
    let mut worst: f64 = 0.0;
    for (a, b) in bev.data().iter().zip(&reference) {
        worst = worst.max((f64::from(*a) - b).abs());
    }
    ensure(worst <= 1e-6, || format!("element-wise deviation {worst:e}"))?;
    let naive = bev_pool(&cloud, &grid, PoolBackend::Naive, Reduction::Sum);
    ensure(naive == bev, || "naive and accelerated backends differ".into())?;
    let mass: f64 = reference.iter().sum();
    let rel = (bev.sum() - mass).abs() / mass.abs().max(f64::MIN_POSITIVE);
    ensure(rel <= 1e-5, || format!("mass relative error {rel:e}"))?;
    within(elapsed, 5.0)?;
    Ok(format!("max |err| {worst:e}, mass rel err {rel:e}, pool {:.3} s", elapsed.as_secs_f64()))
}

fn geometry_round_trip() -> Outcome {
    let k = CameraIntrinsics::new(211.3, 209.8, 127.2, 96.4, 256, 192).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (u, v, d) = (rng.gen_range(0.0..256.0), rng.gen_range(0.0..192.0), rng.gen_range(0.05..10.0));
        let p = unproject((u, v), d, &k).map_err(|e| e.to_string())?;
        let (pu, pv) = project(&p, &k).map_err(|e| e.to_string())?;
        worst = worst.max((pu - u).abs() / u.abs().max(1.0)).max((pv - v).abs() / v.abs().max(1.0));
        worst = worst.max((p.z - d).abs() / d);
    }
    ensure(worst <= 1e-9, || format!("round trip relative error {worst:e}"))?;
    let grid = BEVGridSpec::new([-2.0, 2.0], [0.0, 4.0], 0.125).map_err(|e| e.to_string())?;
    let cloud = random_cloud(34, 2000, 2, &grid);
    for dy in [-3.5, 0.25, 100.0] {
        let moved = cloud.shifted_vertically(dy);
        for (a, b) in cloud.positions().iter().zip(moved.positions()) {
            ensure(bev_cell_of(a, &grid) == bev_cell_of(b, &grid), || format!("cell moved with dy {dy}"))?;
        }
        let (x, y) = (
            bev_pool(&cloud, &grid, PoolBackend::Accelerated, Reduction::Sum),
            bev_pool(&moved, &grid, PoolBackend::Accelerated, Reduction::Sum),
        );
        ensure(x == y, || format!("pooled BEV changed with dy {dy}"))?;
    }
    Ok(format!("1000 points max rel err {worst:e}; pillars invariant to height"))
}

fn gaussian_depth_weights() -> Outcome {
    let spec = DepthDistributionSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let d: f64 = rng.gen_range(0.01..12.0);
        let w = depth_weights(d, &spec);
        let sum: f64 = w.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-9, || format!("weights at {d} sum to {sum}"))?;
        let argmax = (0..w.len()).fold(0, |b, i| if w[i] > w[b] { i } else { b });
        let nearest = (0..spec.n_bins).fold(0, |b, i| {
            if (spec.bin_center(i) - d).abs() < (spec.bin_center(b) - d).abs() {
                i
            } else {
                b
            }
        });
        ensure(argmax == nearest, || format!("depth {d}: argmax bin {argmax}, nearest {nearest}"))?;
    }
    // bin centers 1, 2, 3 with sigma 0.5, observed at the middle one
    let three = DepthDistributionSpec::new(0.5, 3.5, 3, 0.5).map_err(|e| e.to_string())?;
    let w = depth_weights(2.0, &three);
    let want = [0.1065, 0.7870, 0.1065];
    ensure(w.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-4), || format!("three-bin weights {w:?}"))?;
    Ok(format!("500 depths sum to 1, argmax at nearest bin; three-bin case {:.4?}", w))
}

// -- heads and losses ------------------------------------------------------------

fn gradient_checks() -> Outcome {
    let t = Instant::now();
    let entries = gradient_suite(0, 20, &LossConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let required = [
        "focal",
        "giou",
        "l1",
        "dice",
        "bootstrapped_ce",
        "iou_l2",
        "vot_composite",
        "vos_composite",
    ];
    for name in required {
        let e = entries
            .iter()
            .find(|e| e.loss == name)
            .ok_or_else(|| format!("{name} missing from the suite"))?;
        ensure(e.points == 20 && e.passed && e.max_rel_error < 1e-4, || format!("{name}: {e:?}"))?;
    }
    within(elapsed, 10.0)?;
    let worst = entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max);
    Ok(format!("{} losses x 20 points, max rel err {worst:.2e}, {:.2} s", entries.len(), elapsed.as_secs_f64()))
}

fn random_maps(rng: &mut ChaCha8Rng, tied: bool) -> HeadMaps {
    let (h, w) = (rng.gen_range(1..20), rng.gen_range(1..20));
    let n = h * w;
    // few distinct levels so the maximum is often shared
    let levels = rng.gen_range(1..6);
    let score = (0..n)
        .map(|_| if tied { rng.gen_range(0..levels) as f32 * 0.125 } else { rng.gen_range(0.0..1.0) })
        .collect();
    let offset = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let size = (0..2 * n).map(|_| rng.gen_range(0.5..8.0)).collect();
    HeadMaps::new(h, w, score, offset, size).unwrap()
}

/// Peak by exhaustive scan: gather every maximal cell and take the smallest (row, column).
fn reference_peak(m: &HeadMaps) -> (usize, usize) {
    let top = m.score().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for y in 0..m.height() {
        for x in 0..m.width() {
            if m.score_at(x, y) == top {
                cells.push((y, x));
            }
        }
    }
    let (y, x) = *cells.iter().min().unwrap();
    (x, y)
}

fn decode_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut ties = 0;
    for i in 0..100 {
        let m = random_maps(&mut rng, i % 2 == 0);
        let top = m.score().iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        if m.score().iter().filter(|&&s| s == top).count() > 1 {
            ties += 1;
        }
        let d = decode_box(&m).map_err(|e| e.to_string())?;
        let (x, y) = reference_peak(&m);
        let (ox, oy) = m.offset_at(x, y);
        let (w, h) = m.size_at(x, y);
        let want = BoundingBox::from_center(x as f64 + f64::from(ox), y as f64 + f64::from(oy), f64::from(w), f64::from(h))
            .map_err(|e| e.to_string())?;
        ensure(d.peak == (x, y) && d.bbox == want, || format!("map {i}: {:?} vs peak {:?}", d.peak, (x, y)))?;
        for factor in [0.25f32, 3.0, 1000.0] {
            let s = decode_box(&m.with_scaled_scores(factor)).map_err(|e| e.to_string())?;
            ensure(s.peak == d.peak && s.bbox == d.bbox, || format!("map {i}: scaling by {factor} moved the box"))?;
        }
    }
    ensure(ties >= 25, || format!("only {ties} maps had tied maxima"))?;
    Ok(format!("100 maps ({ties} with tied maxima) match the exhaustive scan; rescaling invariant"))
}

fn memory_policy() -> Outcome {
    let ious = scripted_ious(9, 500);
    let policies = [
        ("ONE", PolicyKind::One, None),
        ("ADD", PolicyKind::Add(5), None),
        ("ONE+IP", PolicyKind::One, Some(0.7)),
        ("ADD+IP", PolicyKind::Add(5), Some(0.7)),
        ("ADD3+IP", PolicyKind::Add(3), Some(0.8)),
        ("frozen", PolicyKind::Add(5), Some(1.0)),
    ];
    let mut stored = 0;
    for (name, kind, threshold) in policies {
        for interval in [1u64, 7, 30] {
            let strategy = match kind {
                PolicyKind::One => MemoryStrategy::One,
                PolicyKind::Add(capacity) => MemoryStrategy::Add { capacity },
            };
            let policy = MemoryPolicy {
                strategy,
                interval,
                iou_threshold: threshold,
            };
            let initial = TemplateRecord {
                frame: u64::MAX,
                payload: -1i64,
            };
            let mut mem = TemplateMemory::new(policy, initial.clone()).map_err(|e| e.to_string())?;
            let expected = oracle_memory(kind, interval, threshold, &ious);
            for (step, (&iou, want)) in ious.iter().zip(&expected).enumerate() {
                mem.maybe_update(step as u64, iou, step as i64);
                let got: Vec<u64> = mem.dynamic().map(|r| r.frame).collect();
                ensure(&got == want, || format!("{name} N={interval} step {step}: {got:?} vs {want:?}"))?;
                ensure(mem.dynamic().all(|r| r.payload == r.frame as i64), || "payload detached from frame".into())?;
                ensure(mem.initial() == &initial, || format!("{name}: initial template changed"))?;
                ensure(mem.len() <= 1 + policy.capacity(), || format!("{name}: {} records", mem.len()))?;
            }
            if threshold == Some(1.0) {
                ensure(mem.dynamic_len() == 0, || "threshold 1.0 admitted an update".into())?;
            }
            stored += mem.dynamic_len();
        }
    }
    Ok(format!("6 policies x 3 intervals x 500 steps match the step oracle ({stored} live dynamic slots)"))
}

// -- dataset -------------------------------------------------------------------

fn dataset_round_trip() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut frames = 0;
    for seed in 0..5 {
        let spec = seeded_spec(seed);
        let dir = root.path().join(&spec.id);
        let gt = synth_sequence(&spec, &dir).map_err(|e| e.to_string())?;
        let seq = load_sequence(&dir).map_err(|e| e.to_string())?;
        ensure(seq.tracks() == gt.tracks, || format!("seed {seed}: loaded tracks differ"))?;
        for (f, want) in seq.frames().iter().zip(&gt.depth) {
            let disk = read_depth_tiff(&dir.join(format!("depth/{:06}.tiff", f.index))).map_err(|e| e.to_string())?;
            let exact = disk.values().iter().zip(want.values()).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(exact && disk.values().len() == want.values().len(), || {
                format!("seed {seed} frame {}: depth not bit-exact", f.index)
            })?;
            frames += 1;
        }
    }
    let report = validate_dataset(root.path()).map_err(|e| e.to_string())?;
    ensure(report.is_clean(), || format!("{} violations", report.summary.violations))?;
    Ok(format!("5 sequences, {frames} frames, zero violations, depth bit-exact"))
}

fn main() {
    let checks: &[Check] = &[
        ("f-score arithmetic", f_score_rows),
        ("J&F arithmetic", j_and_f_rows),
        ("VOT sweep oracle", sweep_oracle),
        ("self-evaluation identity", self_evaluation),
        ("BEV pooling equivalence", bev_pooling),
        ("geometry round trip", geometry_round_trip),
        ("Gaussian depth weights", gaussian_depth_weights),
        ("gradient suite", gradient_checks),
        ("decode determinism", decode_determinism),
        ("memory-policy simulation", memory_policy),
        ("dataset round trip", dataset_round_trip),
        ("contour accuracy", contour_accuracy_checks),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
