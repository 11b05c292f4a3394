//! Seed estimation, per-branch saliency, fusion and geodesic refinement.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{self, min_max_normalize, GrayMap, LabImage, RgbImage};
use crate::par;
use crate::ranking_graph::{
    self, AffinityExponent, AffinityGraph, GeodesicField, GraphParams, SeedSet, SigmaCSource,
};
use crate::superpixel::{self, lab_distance, Segmentation};
use crate::surroundedness::{self, SurroundednessMap};

/// Which side of the mean border-color distance counts as strong background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundPolarity {
    /// Border superpixels far from the mean border color are strong seeds.
    #[default]
    AsWritten,
    /// Border superpixels close to the mean border color are strong seeds.
    Inverted,
}

/// Every tunable of the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub target_k: usize,
    pub compactness: f64,
    pub iterations: usize,
    pub threshold_step: f64,
    /// Opening radius at a 400x300 working image; scaled by the diagonal.
    pub opening_radius: usize,
    /// Longest side of the image the Boolean maps are computed on.
    pub working_side: usize,
    pub sigma_sq: f64,
    pub alpha: f64,
    pub affinity_exponent: AffinityExponent,
    pub background_seed_polarity: BackgroundPolarity,
    pub sigma_c_source: SigmaCSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            target_k: superpixel::DEFAULT_TARGET_K,
            compactness: superpixel::DEFAULT_COMPACTNESS,
            iterations: superpixel::DEFAULT_ITERATIONS,
            threshold_step: surroundedness::DEFAULT_THRESHOLD_STEP,
            opening_radius: surroundedness::DEFAULT_OPENING_RADIUS,
            working_side: surroundedness::DEFAULT_WORKING_SIDE,
            sigma_sq: ranking_graph::DEFAULT_SIGMA_SQ,
            alpha: ranking_graph::DEFAULT_ALPHA,
            affinity_exponent: AffinityExponent::Norm,
            background_seed_polarity: BackgroundPolarity::AsWritten,
            sigma_c_source: SigmaCSource::EdgeDc,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: &str| Err(Error::contract(format!("{field}: {why}")));
        if self.target_k < 2 {
            return fail("target_k", "must be at least 2");
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return fail("compactness", "must be positive");
        }
        if self.iterations == 0 {
            return fail("iterations", "must be at least 1");
        }
        if !(self.threshold_step > 0.0 && self.threshold_step.is_finite()) {
            return fail("threshold_step", "must be positive");
        }
        if self.working_side == 0 {
            return fail("working_side", "must be at least 1");
        }
        if !(self.sigma_sq > 0.0 && self.sigma_sq.is_finite()) {
            return fail("sigma_sq", "must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail("alpha", "must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn graph_params(&self) -> GraphParams {
        GraphParams {
            sigma_sq: self.sigma_sq,
            alpha: self.alpha,
            exponent: self.affinity_exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Foreground,
    Background,
    Combined,
    Final,
}

/// Per-superpixel saliency in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyVector {
    pub values: Vec<f64>,
    pub stage: Stage,
}

impl SaliencyVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }
}

/// Correctly rounded mean (Neumaier summation), so thresholds like
/// `x >= mean(x)` behave on decimal inputs the way they read.
pub(crate) fn mean(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / values.len() as f64
}

/// Strong and weak foreground seeds from per-superpixel surroundedness.
pub fn foreground_seeds(sp: &SurroundednessMap) -> Result<SeedSet> {
    foreground_seeds_from_scores(&sp.per_superpixel)
}

/// Strong seeds have `s >= 2 mean(s)`; weak seeds `mean(s) <= s < 2 mean(s)`.
pub fn foreground_seeds_from_scores(scores: &[f64]) -> Result<SeedSet> {
    if scores.len() < 2 {
        return Err(Error::contract("need at least 2 superpixels"));
    }
    let m = mean(scores);
    if !(m > 0.0) {
        return Err(Error::EmptySeeds("surroundedness is zero everywhere"));
    }
    let strong = (0..scores.len()).filter(|&i| scores[i] >= 2.0 * m).collect();
    let weak = (0..scores.len())
        .filter(|&i| scores[i] >= m && scores[i] < 2.0 * m)
        .collect();
    SeedSet::new(scores.len(), strong, weak)
}

/// Background seeds among the border superpixels, split by their color
/// distance to the mean border color.
pub fn background_seeds(seg: &Segmentation, polarity: BackgroundPolarity) -> Result<SeedSet> {
    let border = superpixel::border_superpixels(seg);
    if border.len() < 2 {
        return Err(Error::contract(format!(
            "need at least 2 border superpixels, found {}",
            border.len()
        )));
    }
    let mut center = [0.0; 3];
    for c in 0..3 {
        let channel: Vec<f64> = border.iter().map(|&i| seg.mean_lab[i][c]).collect();
        center[c] = mean(&channel);
    }
    let dc: Vec<f64> = border.iter().map(|&i| lab_distance(seg.mean_lab[i], center)).collect();
    background_seeds_from_distances(seg.count, &border, &dc, polarity)
}

/// Seed split given candidate ids and their distances to the mean color.
pub fn background_seeds_from_distances(
    n: usize,
    candidates: &[usize],
    dc: &[f64],
    polarity: BackgroundPolarity,
) -> Result<SeedSet> {
    if candidates.len() != dc.len() {
        return Err(Error::contract("one distance per candidate required"));
    }
    let m = mean(dc);
    let pick = |keep: &dyn Fn(f64) -> bool| -> Vec<usize> {
        candidates
            .iter()
            .zip(dc)
            .filter(|(_, &d)| keep(d))
            .map(|(&i, _)| i)
            .collect()
    };
    // below this the border is one color up to rounding of the mean
    if !(m > 1e-9) {
        return match polarity {
            BackgroundPolarity::AsWritten => {
                Err(Error::EmptySeeds("border superpixels share a single color"))
            }
            BackgroundPolarity::Inverted => SeedSet::new(n, candidates.to_vec(), vec![]),
        };
    }
    let weak = pick(&|d| d >= m && d < 2.0 * m);
    let strong = match polarity {
        BackgroundPolarity::AsWritten => pick(&|d| d >= 2.0 * m),
        BackgroundPolarity::Inverted => pick(&|d| d < m),
    };
    SeedSet::new(n, strong, weak)
}

/// Ranks all nodes against `seeds` and min-max normalizes the scores;
/// `complement` returns `1 - score` instead.
pub fn saliency_from_seeds(g: &AffinityGraph, seeds: &SeedSet, complement: bool) -> Result<SaliencyVector> {
    let scores = ranking_graph::rank(g, seeds)?;
    let mut values = min_max_normalize(&scores);
    if complement {
        for v in &mut values {
            *v = 1.0 - *v;
        }
    }
    Ok(SaliencyVector {
        values,
        stage: if complement {
            Stage::Background
        } else {
            Stage::Foreground
        },
    })
}

/// Fuses two maps by ranking again from every element above the mean of
/// either map. All fused seeds are strong.
///
/// When neither map has an element above its mean, `fallback` seeds are
/// used; if that is empty too the result is a flat 0.5.
pub fn combine_maps(
    fg: &SaliencyVector,
    bg: &SaliencyVector,
    g: &AffinityGraph,
    fallback: &[usize],
) -> Result<SaliencyVector> {
    if fg.len() != bg.len() || fg.len() != g.n {
        return Err(Error::contract(format!(
            "map lengths {} and {} for a graph of {} nodes",
            fg.len(),
            bg.len(),
            g.n
        )));
    }
    let (mf, mb) = (fg.mean(), bg.mean());
    let mut seeds: Vec<usize> = (0..g.n)
        .filter(|&i| fg.values[i] > mf || bg.values[i] > mb)
        .collect();
    if seeds.is_empty() {
        seeds = fallback.to_vec();
        seeds.sort_unstable();
        seeds.dedup();
    }
    if seeds.is_empty() {
        warn!("no fusion seeds available; combined map is flat");
        return Ok(SaliencyVector {
            values: vec![0.5; g.n],
            stage: Stage::Combined,
        });
    }
    let set = SeedSet::new(g.n, seeds, vec![])?;
    let mut out = saliency_from_seeds(g, &set, false)?;
    out.stage = Stage::Combined;
    Ok(out)
}

/// Smooths `s_com` with row-normalized weights `exp(-d_g^2 / (2 sigma_c^2))`
/// and min-max normalizes. `sigma_c = 0` leaves the values unsmoothed.
pub fn geodesic_refine(s_com: &SaliencyVector, field: &GeodesicField) -> Result<SaliencyVector> {
    let n = s_com.len();
    if field.n != n {
        return Err(Error::contract(format!(
            "{n} saliency values for a {}-node geodesic field",
            field.n
        )));
    }
    let sigma = field.sigma_c;
    let refined: Vec<f64> = if sigma > 0.0 && sigma.is_finite() {
        let denom = 2.0 * sigma * sigma;
        par::map_range(n, |q| {
            let mut num = 0.0;
            let mut total = 0.0;
            for j in 0..n {
                let d = field.get(q, j);
                let w = (-d * d / denom).exp();
                num += w * s_com.values[j];
                total += w;
            }
            num / total
        })
    } else {
        s_com.values.clone()
    };
    Ok(SaliencyVector {
        values: min_max_normalize(&refined),
        stage: Stage::Final,
    })
}

/// Everything the detector computed for one image.
#[derive(Debug, Clone)]
pub struct Detection {
    pub segmentation: Option<Segmentation>,
    pub surroundedness: Option<SurroundednessMap>,
    pub foreground: Option<SaliencyVector>,
    pub background: Option<SaliencyVector>,
    pub combined: Option<SaliencyVector>,
    pub refined: Option<SaliencyVector>,
    /// Pixel-level final map.
    pub map: GrayMap,
}

impl Detection {
    fn degenerate(width: usize, height: usize) -> Self {
        Self {
            segmentation: None,
            surroundedness: None,
            foreground: None,
            background: None,
            combined: None,
            refined: None,
            map: GrayMap::zeros(width, height),
        }
    }

    /// Writes `sb.png`, `sp.png`, `fg.png`, `bg.png`, `com.png` and
    /// `final.png` into `dir`. Stages that did not run are written as zero
    /// maps.
    pub fn write_intermediates(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let (w, h) = (self.map.width, self.map.height);
        let zeros = GrayMap::zeros(w, h);
        let render = |v: Option<&[f64]>| -> Result<GrayMap> {
            match (v, &self.segmentation) {
                (Some(v), Some(seg)) => imageio::render_map(v, seg),
                _ => Ok(zeros.clone()),
            }
        };
        let sb = self
            .surroundedness
            .as_ref()
            .map(|s| s.pixel.clone())
            .unwrap_or_else(|| zeros.clone());
        imageio::write_gray_png(&sb, dir.join("sb.png"))?;
        let sp = render(self.surroundedness.as_ref().map(|s| s.per_superpixel.as_slice()))?;
        imageio::write_gray_png(&sp, dir.join("sp.png"))?;
        for (name, v) in [
            ("fg.png", &self.foreground),
            ("bg.png", &self.background),
            ("com.png", &self.combined),
        ] {
            let m = render(v.as_ref().map(|s| s.values.as_slice()))?;
            imageio::write_gray_png(&m, dir.join(name))?;
        }
        imageio::write_gray_png(&self.map, dir.join("final.png"))
    }
}

/// Surroundedness at the working resolution, resampled to full size.
fn surroundedness_map(lab: &LabImage, cfg: &PipelineConfig) -> Result<GrayMap> {
    let (w, h) = (lab.width, lab.height);
    let longest = w.max(h);
    let (ww, wh) = if longest > cfg.working_side {
        let s = cfg.working_side as f64 / longest as f64;
        (
            ((w as f64 * s).round() as usize).max(1),
            ((h as f64 * s).round() as usize).max(1),
        )
    } else {
        (w, h)
    };
    let small = lab.resized(ww, wh);
    let radius = surroundedness::scaled_opening_radius(cfg.opening_radius, ww, wh);
    let sb = surroundedness::bms_pixel_map(&small, cfg.threshold_step, radius)?;
    Ok(sb.resized(w, h))
}

/// Runs the full detector and keeps every intermediate.
pub fn detect(img: &RgbImage, cfg: &PipelineConfig) -> Result<Detection> {
    cfg.validate()?;
    let (w, h) = (img.width(), img.height());
    if w * h < 2 {
        warn!("{w}x{h} image is too small to segment");
        return Ok(Detection::degenerate(w, h));
    }
    let lab = imageio::rgb_to_lab(img);
    let seg = superpixel::slic_segment(&lab, cfg.target_k.min(w * h), cfg.compactness, cfg.iterations)?;
    detect_segmented(&lab, seg, cfg)
}

/// Runs everything after segmentation on a fixed superpixel partition.
pub fn detect_segmented(lab: &LabImage, seg: Segmentation, cfg: &PipelineConfig) -> Result<Detection> {
    cfg.validate()?;
    let (w, h) = (lab.width, lab.height);
    if (seg.width, seg.height) != (w, h) {
        return Err(Error::contract("segmentation does not match the image"));
    }
    let graph = ranking_graph::build_graph(&seg, &cfg.graph_params())?;

    let (fg_branch, bg_branch) = par::join(
        || -> Result<(SurroundednessMap, Result<(SeedSet, SaliencyVector)>)> {
            let sb = surroundedness_map(lab, cfg)?;
            let sp = surroundedness::pool_to_superpixels(&sb, &seg)?;
            let fg = foreground_seeds(&sp)
                .and_then(|s| saliency_from_seeds(&graph, &s, false).map(|v| (s, v)));
            Ok((sp, fg))
        },
        || {
            background_seeds(&seg, cfg.background_seed_polarity)
                .and_then(|s| saliency_from_seeds(&graph, &s, true).map(|v| (s, v)))
        },
    );
    let (sp, fg_branch) = fg_branch?;

    let mut fallback = Vec::new();
    let (fg, bg) = match (fg_branch, bg_branch) {
        (Ok((fs, fg)), Ok((_, bg))) => {
            fallback.extend(&fs.strong);
            (fg, bg)
        }
        (Ok((fs, fg)), Err(e)) => {
            warn!("background branch failed ({e}); using the foreground map in its place");
            fallback.extend(&fs.strong);
            let bg = SaliencyVector {
                values: fg.values.clone(),
                stage: Stage::Background,
            };
            (fg, bg)
        }
        (Err(e), Ok((_, bg))) => {
            warn!("foreground branch failed ({e}); using the background map in its place");
            let fg = SaliencyVector {
                values: bg.values.clone(),
                stage: Stage::Foreground,
            };
            (fg, bg)
        }
        (Err(ef), Err(eb)) => {
            warn!("both branches failed ({ef}; {eb}); emitting a zero map");
            let mut d = Detection::degenerate(w, h);
            d.segmentation = Some(seg);
            d.surroundedness = Some(sp);
            return Ok(d);
        }
    };
    // strong background-derived salient elements: twice the mean of the map
    let mb = bg.mean();
    if mb > 0.0 {
        fallback.extend((0..bg.len()).filter(|&i| bg.values[i] >= 2.0 * mb));
    }

    let combined = combine_maps(&fg, &bg, &graph, &fallback)?;
    let field = ranking_graph::geodesic_distances(&graph, cfg.sigma_c_source);
    let refined = geodesic_refine(&combined, &field)?;
    let map = imageio::render_map(&refined.values, &seg)?;
    Ok(Detection {
        segmentation: Some(seg),
        surroundedness: Some(sp),
        foreground: Some(fg),
        background: Some(bg),
        combined: Some(combined),
        refined: Some(refined),
        map,
    })
}

/// Final pixel-level saliency map of `img`.
pub fn detect_full(img: &RgbImage, cfg: &PipelineConfig) -> Result<GrayMap> {
    detect(img, cfg).map(|d| d.map)
}
