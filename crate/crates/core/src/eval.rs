//! Saliency benchmark metrics: PR curve, adaptive-threshold F-measure, MAE and
//! ROC-AUC, plus the directory-level harness and its CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::imageio::{self, BinaryMask, GrayMap};
use crate::par;

/// Weight of precision relative to recall in the F-measure.
pub const BETA_SQ: f64 = 0.3;
pub const THRESHOLDS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMetrics {
    pub name: String,
    pub mae: f64,
    /// `None` when the ground truth holds a single class.
    pub auc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: u8,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub images: usize,
    pub mae: f64,
    /// Mean over images with a defined AUC.
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Sorted by name.
    pub per_image: Vec<ImageMetrics>,
    pub aggregate: Aggregate,
    /// One row per threshold 0..=255.
    pub pr_curve: Vec<PrPoint>,
    pub warnings: Vec<String>,
}

fn check_dims(map: (usize, usize), gt: &BinaryMask) -> Result<()> {
    if map != (gt.width, gt.height) {
        return Err(Error::contract(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            map.0, map.1, gt.width, gt.height
        )));
    }
    Ok(())
}

/// Foreground where `v > min(2 mean(v), 1)`.
pub fn binarize_adaptive(map: &GrayMap) -> BinaryMask {
    let t = (2.0 * map.mean()).min(1.0);
    BinaryMask {
        width: map.width,
        height: map.height,
        data: map.data.iter().map(|&v| v > t).collect(),
    }
}

/// F-measure with the given precision and recall; zero when both are zero.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        (1.0 + BETA_SQ) * p * r / (BETA_SQ * p + r)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F-measure of a binary prediction.
pub fn pr_f_measure(pred: &BinaryMask, gt: &BinaryMask) -> Result<(f64, f64, f64)> {
    check_dims((pred.width, pred.height), gt)?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fneg);
    Ok((p, r, f_measure(p, r)))
}

pub fn mae(map: &GrayMap, gt: &BinaryMask) -> Result<f64> {
    check_dims((map.width, map.height), gt)?;
    let sum: f64 = map
        .data
        .iter()
        .zip(&gt.data)
        .map(|(&v, &g)| (v - if g { 1.0 } else { 0.0 }).abs())
        .sum();
    Ok(sum / map.data.len() as f64)
}

/// Per-level counts of foreground and background pixels of the quantized map.
fn level_histograms(map: &GrayMap, gt: &BinaryMask) -> ([usize; 256], [usize; 256]) {
    let mut pos = [0usize; 256];
    let mut neg = [0usize; 256];
    for (&v, &g) in map.data.iter().zip(&gt.data) {
        let b = imageio::quantize(v) as usize;
        if g {
            pos[b] += 1;
        } else {
            neg[b] += 1;
        }
    }
    (pos, neg)
}

/// `(tp, fp)` at each threshold `t` for the rule `byte >= t`, `t = 0..=256`.
fn cumulative(pos: &[usize; 256], neg: &[usize; 256]) -> Vec<(usize, usize)> {
    let mut out = vec![(0, 0); 257];
    for t in (0..256).rev() {
        out[t] = (out[t + 1].0 + pos[t], out[t + 1].1 + neg[t]);
    }
    out
}

/// Area under the ROC curve over the 8-bit quantized map; a pixel is
/// predicted foreground at threshold `t` when its byte value is `>= t`.
pub fn auc(map: &GrayMap, gt: &BinaryMask) -> Result<f64> {
    check_dims((map.width, map.height), gt)?;
    let (pos, neg) = level_histograms(map, gt);
    let (np, nn) = (pos.iter().sum::<usize>(), neg.iter().sum::<usize>());
    if np == 0 || nn == 0 {
        return Err(Error::UndefinedAuc);
    }
    let cum = cumulative(&pos, &neg);
    // walk from t = 256 (nothing predicted) down to t = 0 (everything)
    let mut area = 0.0;
    let (mut prev_fpr, mut prev_tpr) = (0.0, 0.0);
    for t in (0..256).rev() {
        let tpr = cum[t].0 as f64 / np as f64;
        let fpr = cum[t].1 as f64 / nn as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    Ok(area.clamp(0.0, 1.0))
}

/// Precision and recall at thresholds 0..=255 under `byte >= t`.
pub fn pr_curve(map: &GrayMap, gt: &BinaryMask) -> Result<Vec<(f64, f64)>> {
    check_dims((map.width, map.height), gt)?;
    let (pos, neg) = level_histograms(map, gt);
    let np: usize = pos.iter().sum();
    let cum = cumulative(&pos, &neg);
    Ok((0..THRESHOLDS)
        .map(|t| {
            let (tp, fp) = cum[t];
            (ratio(tp, tp + fp), ratio(tp, np))
        })
        .collect())
}

struct Evaluated {
    metrics: ImageMetrics,
    curve: Vec<(f64, f64)>,
    auc_error: bool,
}

fn evaluate_pair(name: &str, pred: &Path, gt: &Path) -> Result<Evaluated> {
    let map = imageio::load_gray_map(pred)?;
    let mask = imageio::load_mask(gt)?;
    let m = mae(&map, &mask)?;
    let (p, r, f) = pr_f_measure(&binarize_adaptive(&map), &mask)?;
    let (auc_value, auc_error) = match auc(&map, &mask) {
        Ok(a) => (Some(a), false),
        Err(Error::UndefinedAuc) => (None, true),
        Err(e) => return Err(e),
    };
    Ok(Evaluated {
        metrics: ImageMetrics {
            name: name.to_string(),
            mae: m,
            auc: auc_value,
            precision: p,
            recall: r,
            f_measure: f,
        },
        curve: pr_curve(&map, &mask)?,
        auc_error,
    })
}

fn png_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !path.is_file() || !is_png {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_string(), path);
        }
    }
    Ok(out)
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Evaluates every prediction PNG in `pred_dir` against the ground-truth PNG
/// with the same file stem in `gt_dir`.
pub fn run_benchmark(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>) -> Result<EvalReport> {
    let preds = png_stems(pred_dir.as_ref())?;
    let gts = png_stems(gt_dir.as_ref())?;
    let mut warnings = Vec::new();
    for name in preds.keys().filter(|k| !gts.contains_key(*k)) {
        warnings.push(format!("prediction {name} has no ground truth"));
    }
    for name in gts.keys().filter(|k| !preds.contains_key(*k)) {
        warnings.push(format!("ground truth {name} has no prediction"));
    }
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> = preds
        .iter()
        .filter_map(|(k, p)| gts.get(k).map(|g| (k, p, g)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::contract("no prediction / ground-truth pairs with matching names"));
    }

    let results = par::map_slice(&pairs, |(name, p, g)| (name.to_string(), evaluate_pair(name, p, g)));
    let mut evaluated = Vec::new();
    for (name, r) in results {
        match r {
            Ok(e) => {
                if e.auc_error {
                    warnings.push(format!("{name}: single-class ground truth, AUC excluded"));
                }
                evaluated.push(e);
            }
            Err(e) => warnings.push(format!("{name}: skipped ({e})")),
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    if evaluated.is_empty() {
        return Err(Error::contract("no image pair could be evaluated"));
    }

    let n = evaluated.len() as f64;
    let pr_curve = (0..THRESHOLDS)
        .map(|t| PrPoint {
            threshold: t as u8,
            precision: evaluated.iter().map(|e| e.curve[t].0).sum::<f64>() / n,
            recall: evaluated.iter().map(|e| e.curve[t].1).sum::<f64>() / n,
        })
        .collect();
    let per_image: Vec<ImageMetrics> = evaluated.into_iter().map(|e| e.metrics).collect();
    let aggregate = Aggregate {
        images: per_image.len(),
        mae: mean_of(per_image.iter().map(|m| m.mae)),
        auc: mean_of(per_image.iter().filter_map(|m| m.auc)),
        precision: mean_of(per_image.iter().map(|m| m.precision)),
        recall: mean_of(per_image.iter().map(|m| m.recall)),
        f_measure: mean_of(per_image.iter().map(|m| m.f_measure)),
    };
    Ok(EvalReport {
        per_image,
        aggregate,
        pr_curve,
        warnings,
    })
}

impl EvalReport {
    pub fn per_image_csv(&self) -> String {
        let mut s = String::from("name,mae,auc,precision,recall,f_measure\n");
        for m in &self.per_image {
            let auc = m.auc.map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{:.6},{},{:.6},{:.6},{:.6}",
                m.name, m.mae, auc, m.precision, m.recall, m.f_measure
            );
        }
        s
    }

    pub fn pr_curve_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall\n");
        for p in &self.pr_curve {
            let _ = writeln!(s, "{},{:.6},{:.6}", p.threshold, p.precision, p.recall);
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let a = &self.aggregate;
        format!(
            "images,mae,auc,precision,recall,f_measure\n{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            a.images, a.mae, a.auc, a.precision, a.recall, a.f_measure
        )
    }

    /// Writes `per_image.csv`, `pr_curve.csv` and `summary.csv` into `dir`.
    pub fn write_csvs(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("per_image.csv", self.per_image_csv()),
            ("pr_curve.csv", self.pr_curve_csv()),
            ("summary.csv", self.summary_csv()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// One-line human-readable summary.
    pub fn summary_line(&self) -> String {
        let a = &self.aggregate;
        format!(
            "images={} MAE={:.4} AUC={:.4} precision={:.4} recall={:.4} F={:.4}",
            a.images, a.mae, a.auc, a.precision, a.recall, a.f_measure
        )
    }
}
