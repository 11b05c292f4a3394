//! Boolean-map surroundedness.
//!
//! Each LAB channel is swept by a ladder of thresholds. Every threshold gives
//! a Boolean map and its complement; regions of either map that are not
//! connected to the image border are "surrounded". Averaging the surrounded
//! masks over all maps yields the pixel-level surroundedness map, which is
//! then pooled per superpixel.

use crate::error::{Error, Result};
use crate::imageio::{min_max_normalize, GrayMap, LabImage};
use crate::par;
use crate::superpixel::Segmentation;

pub const DEFAULT_THRESHOLD_STEP: f64 = 8.0;
pub const DEFAULT_OPENING_RADIUS: usize = 3;
/// Longest image side at which the Boolean maps are computed.
pub const DEFAULT_WORKING_SIDE: usize = 400;
/// Image diagonal at which [`DEFAULT_OPENING_RADIUS`] applies (400 x 300).
pub const REFERENCE_DIAGONAL: f64 = 500.0;

// Channels whose dynamic range is below this carry no usable structure.
const FLAT_CHANNEL_RANGE: f64 = 1e-6;

/// Pixel-level surroundedness and its per-superpixel means.
#[derive(Debug, Clone, PartialEq)]
pub struct SurroundednessMap {
    pub pixel: GrayMap,
    pub per_superpixel: Vec<f64>,
}

/// Opening radius for an image of the given size, scaled from the reference
/// diagonal.
pub fn scaled_opening_radius(base: usize, width: usize, height: usize) -> usize {
    let diag = ((width * width + height * height) as f64).sqrt();
    (base as f64 * diag / REFERENCE_DIAGONAL).round() as usize
}

/// Pixel-level surroundedness map in [0, 1].
pub fn bms_pixel_map(img: &LabImage, threshold_step: f64, opening_radius: usize) -> Result<GrayMap> {
    if !(threshold_step > 0.0) || !threshold_step.is_finite() {
        return Err(Error::contract(format!(
            "threshold step must be positive, got {threshold_step}"
        )));
    }
    let (w, h) = (img.width, img.height);

    let channels: Vec<Vec<f64>> = (0..3)
        .filter_map(|c| rescale_channel(&img.channel(c)))
        .collect();
    let mut thresholds = Vec::new();
    let mut t = 0.0;
    while t <= 255.0 {
        thresholds.push(t);
        t += threshold_step;
    }
    // channel-major, threshold-minor
    let tasks: Vec<(usize, f64)> = (0..channels.len())
        .flat_map(|c| thresholds.iter().map(move |&t| (c, t)))
        .collect();

    let disk = Disk::new(opening_radius);
    let per_task: Vec<Vec<u8>> = par::map_slice(&tasks, |&(c, t)| {
        let plane = &channels[c];
        let mut hits = vec![0u8; w * h];
        for polarity in [true, false] {
            let map: Vec<bool> = plane.iter().map(|&v| (v > t) == polarity).collect();
            let attention = remove_border_connected(&map, w, h);
            if !attention.iter().any(|&b| b) {
                continue;
            }
            let opened = disk.open(&attention, w, h);
            for (acc, on) in hits.iter_mut().zip(opened) {
                *acc += on as u8;
            }
        }
        hits
    });

    // integer accumulation keeps the sum independent of evaluation order
    let mut total = vec![0u32; w * h];
    for hits in &per_task {
        for (acc, &v) in total.iter_mut().zip(hits) {
            *acc += v as u32;
        }
    }
    let maps = (2 * tasks.len()).max(1) as f64;
    let mean: Vec<f64> = total.iter().map(|&n| n as f64 / maps).collect();
    GrayMap::new(w, h, min_max_normalize(&mean))
}

/// Rescales a channel to [0, 255] by its own min and max. Flat channels
/// yield `None`.
fn rescale_channel(values: &[f64]) -> Option<Vec<f64>> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if !(range > FLAT_CHANNEL_RANGE) {
        return None;
    }
    Some(values.iter().map(|&v| (v - lo) / range * 255.0).collect())
}

/// Clears every 8-connected `true` component that touches the image border.
pub(crate) fn remove_border_connected(map: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut out = map.to_vec();
    let mut stack = Vec::new();
    let seed = |i: usize, out: &mut Vec<bool>, stack: &mut Vec<usize>| {
        if out[i] {
            out[i] = false;
            stack.push(i);
        }
    };
    for x in 0..w {
        seed(x, &mut out, &mut stack);
        seed((h - 1) * w + x, &mut out, &mut stack);
    }
    for y in 0..h {
        seed(y * w, &mut out, &mut stack);
        seed(y * w + w - 1, &mut out, &mut stack);
    }
    while let Some(p) = stack.pop() {
        let (x, y) = ((p % w) as isize, (p / w) as isize);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if out[q] {
                    out[q] = false;
                    stack.push(q);
                }
            }
        }
    }
    out
}

/// Disk structuring element stored as a half-width per row offset.
struct Disk {
    radius: usize,
    half_widths: Vec<usize>,
}

impl Disk {
    fn new(radius: usize) -> Self {
        let r = radius as isize;
        let half_widths = (-r..=r)
            .map(|dy| (((r * r - dy * dy) as f64).sqrt()).floor() as usize)
            .collect();
        Self {
            radius,
            half_widths,
        }
    }

    fn open(&self, map: &[bool], w: usize, h: usize) -> Vec<bool> {
        if self.radius == 0 {
            return map.to_vec();
        }
        let eroded = self.apply(map, w, h, true);
        self.apply(&eroded, w, h, false)
    }

    // Erosion treats pixels outside the image as background.
    fn apply(&self, map: &[bool], w: usize, h: usize, erode: bool) -> Vec<bool> {
        let mut prefix = vec![0u32; (w + 1) * h];
        for y in 0..h {
            let row = &mut prefix[y * (w + 1)..(y + 1) * (w + 1)];
            for x in 0..w {
                row[x + 1] = row[x] + map[y * w + x] as u32;
            }
        }
        let r = self.radius as isize;
        let mut out = vec![false; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut hit = erode;
                for (k, &hw) in self.half_widths.iter().enumerate() {
                    let yy = y + k as isize - r;
                    let (a, b) = (x - hw as isize, x + hw as isize);
                    if erode {
                        if yy < 0 || yy >= h as isize || a < 0 || b >= w as isize {
                            hit = false;
                            break;
                        }
                        let row = &prefix[yy as usize * (w + 1)..];
                        if row[b as usize + 1] - row[a as usize] != (b - a + 1) as u32 {
                            hit = false;
                            break;
                        }
                    } else {
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        let a = a.max(0) as usize;
                        let b = b.min(w as isize - 1) as usize;
                        let row = &prefix[yy as usize * (w + 1)..];
                        if row[b + 1] > row[a] {
                            hit = true;
                            break;
                        }
                    }
                }
                out[y as usize * w + x as usize] = hit;
            }
        }
        out
    }
}

/// Averages a pixel map inside each superpixel.
pub fn pool_to_superpixels(pixel_map: &GrayMap, seg: &Segmentation) -> Result<SurroundednessMap> {
    if pixel_map.width != seg.width || pixel_map.height != seg.height {
        return Err(Error::contract(format!(
            "map is {}x{}, segmentation is {}x{}",
            pixel_map.width, pixel_map.height, seg.width, seg.height
        )));
    }
    let mut sums = vec![0.0; seg.count];
    for (&l, &v) in seg.labels.iter().zip(&pixel_map.data) {
        sums[l as usize] += v;
    }
    let per_superpixel = sums
        .iter()
        .zip(&seg.pixel_count)
        .map(|(s, &n)| (s / n as f64).clamp(0.0, 1.0))
        .collect();
    Ok(SurroundednessMap {
        pixel: pixel_map.clone(),
        per_superpixel,
    })
}
