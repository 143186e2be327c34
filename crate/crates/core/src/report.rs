//! Machine-readable reports. Display values are printed with exactly four
//! decimals; the same quantities at full precision sit under `raw`. Field
//! order is fixed by the struct definitions and maps are sorted, so identical
//! inputs give byte-identical output.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::Result;
use crate::eval_vos::{TrackScores, VosAggregate};
use crate::eval_vot::{Aggregation, AttributeReport, CurvePoint, PRCurve, Score};
use crate::model::Attribute;

/// A float printed with four decimals; non-finite values print as `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixed4(pub f64);

impl Serialize for Fixed4 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        // avoid printing -0.0000
        let v = if self.0 == 0.0 { 0.0 } else { self.0 };
        let raw = RawValue::from_string(format!("{v:.4}")).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

/// A full-precision float; non-finite values print as `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Raw(pub f64);

impl Serialize for Raw {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_none()
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Debug, Serialize)]
pub struct PointOut<F> {
    /// `null` for the admit-all sentinel.
    pub tau: F,
    pub pr: F,
    pub re: F,
    pub f: F,
}

impl PointOut<Fixed4> {
    fn of(p: &CurvePoint) -> Self {
        PointOut {
            tau: Fixed4(p.tau),
            pr: Fixed4(p.pr),
            re: Fixed4(p.re),
            f: Fixed4(p.f),
        }
    }
}

impl PointOut<Raw> {
    fn of(p: &CurvePoint) -> Self {
        PointOut {
            tau: Raw(p.tau),
            pr: Raw(p.pr),
            re: Raw(p.re),
            f: Raw(p.f),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VotRaw {
    pub best: PointOut<Raw>,
    pub curve: Vec<PointOut<Raw>>,
}

#[derive(Debug, Serialize)]
pub struct VotReport {
    pub mode: Aggregation,
    pub tracks: usize,
    pub best: PointOut<Fixed4>,
    pub curve: Vec<PointOut<Fixed4>>,
    pub raw: VotRaw,
}

impl VotReport {
    pub fn new(curve: &PRCurve, mode: Aggregation, tracks: usize) -> Self {
        VotReport {
            mode,
            tracks,
            best: PointOut::<Fixed4>::of(&curve.best),
            curve: curve.points.iter().map(PointOut::<Fixed4>::of).collect(),
            raw: VotRaw {
                best: PointOut::<Raw>::of(&curve.best),
                curve: curve.points.iter().map(PointOut::<Raw>::of).collect(),
            },
        }
    }
}

/// Curve as CSV, `tau` empty for the sentinel.
pub fn curve_csv(curve: &PRCurve) -> String {
    let mut out = String::from("tau,pr,re,f\n");
    for p in &curve.points {
        let tau = if p.tau.is_finite() { p.tau.to_string() } else { String::new() };
        out.push_str(&format!("{tau},{},{},{}\n", p.pr, p.re, p.f));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct ScoreOut<F> {
    pub pr: F,
    pub re: F,
    pub f: F,
    pub frames: usize,
}

fn score<F>(s: &Score, wrap: fn(f64) -> F) -> ScoreOut<F> {
    ScoreOut {
        pr: wrap(s.pr),
        re: wrap(s.re),
        f: wrap(s.f),
        frames: s.visible_frames,
    }
}

#[derive(Debug, Serialize)]
pub struct AttributeRaw {
    pub tau: Raw,
    pub overall: ScoreOut<Raw>,
    pub attributes: BTreeMap<&'static str, Option<ScoreOut<Raw>>>,
}

#[derive(Debug, Serialize)]
pub struct AttributeReportOut {
    pub mode: Aggregation,
    pub tau: Fixed4,
    pub overall: ScoreOut<Fixed4>,
    /// `null` for attributes no visible frame carries.
    pub attributes: BTreeMap<&'static str, Option<ScoreOut<Fixed4>>>,
    pub raw: AttributeRaw,
}

impl AttributeReportOut {
    pub fn new(rep: &AttributeReport, mode: Aggregation) -> Self {
        AttributeReportOut {
            mode,
            tau: Fixed4(rep.tau),
            overall: score(&rep.overall, Fixed4),
            attributes: codes(rep, Fixed4),
            raw: AttributeRaw {
                tau: Raw(rep.tau),
                overall: score(&rep.overall, Raw),
                attributes: codes(rep, Raw),
            },
        }
    }
}

fn codes<F>(rep: &AttributeReport, wrap: fn(f64) -> F) -> BTreeMap<&'static str, Option<ScoreOut<F>>> {
    rep.attributes.iter().map(|(a, s)| (a.code(), s.as_ref().map(|s| score(s, wrap)))).collect()
}

/// Per-attribute rows for radar plots, in the canonical attribute order.
pub fn attributes_csv(rep: &AttributeReport) -> String {
    let mut out = String::from("attribute,pr,re,f,frames\n");
    for a in Attribute::ALL {
        match rep.attributes.get(&a).copied().flatten() {
            Some(s) => out.push_str(&format!("{},{},{},{},{}\n", a.code(), s.pr, s.re, s.f, s.visible_frames)),
            None => out.push_str(&format!("{},,,,0\n", a.code())),
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct VosTrackOut<F> {
    #[serde(rename = "J_M")]
    pub j_m: F,
    #[serde(rename = "F_M")]
    pub f_m: F,
    #[serde(rename = "JandF")]
    pub j_and_f: F,
    pub frames: usize,
}

#[derive(Debug, Serialize)]
pub struct VosRaw {
    #[serde(rename = "J_M")]
    pub j_m: Raw,
    #[serde(rename = "F_M")]
    pub f_m: Raw,
    #[serde(rename = "JandF")]
    pub j_and_f: Raw,
    pub per_track: BTreeMap<String, VosTrackOut<Raw>>,
}

#[derive(Debug, Serialize)]
pub struct VosReport {
    #[serde(rename = "J_M")]
    pub j_m: Fixed4,
    #[serde(rename = "F_M")]
    pub f_m: Fixed4,
    #[serde(rename = "JandF")]
    pub j_and_f: Fixed4,
    /// `null` when each track's default radius was used.
    pub radius: Option<f64>,
    pub exclude_ends: bool,
    pub per_track: BTreeMap<String, VosTrackOut<Fixed4>>,
    pub raw: VosRaw,
}

impl VosReport {
    pub fn new(total: &VosAggregate, tracks: &[TrackScores], radius: Option<f64>, exclude_ends: bool) -> Result<Self> {
        let mut per_fixed = BTreeMap::new();
        let mut per_raw = BTreeMap::new();
        for t in tracks {
            let Ok(a) = crate::eval_vos::aggregate(std::slice::from_ref(t), exclude_ends) else {
                continue;
            };
            per_fixed.insert(
                t.name.clone(),
                VosTrackOut {
                    j_m: Fixed4(a.j_m),
                    f_m: Fixed4(a.f_m),
                    j_and_f: Fixed4(a.j_and_f),
                    frames: t.j.len(),
                },
            );
            per_raw.insert(
                t.name.clone(),
                VosTrackOut {
                    j_m: Raw(a.j_m),
                    f_m: Raw(a.f_m),
                    j_and_f: Raw(a.j_and_f),
                    frames: t.j.len(),
                },
            );
        }
        Ok(VosReport {
            j_m: Fixed4(total.j_m),
            f_m: Fixed4(total.f_m),
            j_and_f: Fixed4(total.j_and_f),
            radius,
            exclude_ends,
            per_track: per_fixed,
            raw: VosRaw {
                j_m: Raw(total.j_m),
                f_m: Raw(total.f_m),
                j_and_f: Raw(total.j_and_f),
                per_track: per_raw,
            },
        })
    }
}

/// Per-track rows: `track,J_M,F_M,JandF,frames`.
pub fn vos_csv(report: &VosReport) -> String {
    let mut out = String::from("track,J_M,F_M,JandF,frames\n");
    for (name, t) in &report.raw.per_track {
        out.push_str(&format!("{name},{},{},{},{}\n", t.j_m.0, t.f_m.0, t.j_and_f.0, t.frames));
    }
    out
}
