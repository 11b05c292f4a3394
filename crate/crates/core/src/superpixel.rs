//! SLIC superpixels and per-superpixel statistics.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::imageio::LabImage;
use crate::par;

pub const DEFAULT_TARGET_K: usize = 200;
pub const DEFAULT_COMPACTNESS: f64 = 10.0;
pub const DEFAULT_ITERATIONS: usize = 10;

/// Superpixel label map with the per-region statistics the graph needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub width: usize,
    pub height: usize,
    /// Per-pixel superpixel id in `[0, count)`, row-major.
    pub labels: Vec<u32>,
    pub count: usize,
    /// Mean CIELAB color of each superpixel.
    pub mean_lab: Vec<[f64; 3]>,
    /// Mean `(x, y)` pixel position of each superpixel.
    pub centroid: Vec<[f64; 2]>,
    pub pixel_count: Vec<usize>,
    /// Whether the superpixel touches row 0, row H-1, column 0 or column W-1.
    pub is_border: Vec<bool>,
    /// Sorted ids of 4-adjacent superpixels.
    pub adjacency: Vec<Vec<usize>>,
}

impl Segmentation {
    /// Builds statistics for an explicit label map. Ids must be dense in
    /// `[0, N)` with `N >= 2`.
    pub fn from_labels(img: &LabImage, labels: Vec<u32>) -> Result<Self> {
        let (w, h) = (img.width, img.height);
        if labels.len() != w * h {
            return Err(Error::contract(format!(
                "label map has {} entries for a {w}x{h} image",
                labels.len()
            )));
        }
        let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        if count < 2 {
            return Err(Error::contract("segmentation needs at least 2 superpixels"));
        }

        let mut sum_lab = vec![[0.0f64; 3]; count];
        let mut sum_xy = vec![[0.0f64; 2]; count];
        let mut pixel_count = vec![0usize; count];
        let mut is_border = vec![false; count];
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); count];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let l = labels[i] as usize;
                let p = img.data[i];
                for c in 0..3 {
                    sum_lab[l][c] += p[c];
                }
                sum_xy[l][0] += x as f64;
                sum_xy[l][1] += y as f64;
                pixel_count[l] += 1;
                if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                    is_border[l] = true;
                }
                if x + 1 < w {
                    let r = labels[i + 1] as usize;
                    if r != l {
                        adj[l].insert(r);
                        adj[r].insert(l);
                    }
                }
                if y + 1 < h {
                    let d = labels[i + w] as usize;
                    if d != l {
                        adj[l].insert(d);
                        adj[d].insert(l);
                    }
                }
            }
        }
        if let Some(empty) = pixel_count.iter().position(|&n| n == 0) {
            return Err(Error::contract(format!("superpixel id {empty} has no pixels")));
        }
        let mean_lab = sum_lab
            .iter()
            .zip(&pixel_count)
            .map(|(s, &n)| s.map(|v| v / n as f64))
            .collect();
        let centroid = sum_xy
            .iter()
            .zip(&pixel_count)
            .map(|(s, &n)| s.map(|v| v / n as f64))
            .collect();
        Ok(Self {
            width: w,
            height: h,
            labels,
            count,
            mean_lab,
            centroid,
            pixel_count,
            is_border,
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Euclidean LAB distance between the mean colors of two superpixels.
    pub fn color_distance(&self, i: usize, j: usize) -> f64 {
        lab_distance(self.mean_lab[i], self.mean_lab[j])
    }
}

pub fn lab_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Ids of superpixels that touch the image edge.
pub fn border_superpixels(seg: &Segmentation) -> Vec<usize> {
    (0..seg.count).filter(|&i| seg.is_border[i]).collect()
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

/// SLIC segmentation in CIELAB space.
///
/// Centers start on a regular grid with spacing `s = sqrt(W*H / target_k)`
/// and are nudged to the lowest-gradient pixel of their 3x3 neighborhood.
/// Each iteration assigns pixels inside a `2s x 2s` window around each center
/// under `d = sqrt(d_lab^2 + (compactness / s)^2 d_xy^2)` and moves centers to
/// the mean of their members. A final pass makes every superpixel 4-connected
/// by merging stray components into their largest neighbor.
pub fn slic_segment(
    img: &LabImage,
    target_k: usize,
    compactness: f64,
    iterations: usize,
) -> Result<Segmentation> {
    let (w, h) = (img.width, img.height);
    if target_k < 2 || target_k > w * h {
        return Err(Error::contract(format!(
            "target_k = {target_k} outside [2, {}]",
            w * h
        )));
    }
    if iterations == 0 {
        return Err(Error::contract("SLIC needs at least one iteration"));
    }
    if !(compactness > 0.0) {
        return Err(Error::contract("compactness must be positive"));
    }

    let s = ((w * h) as f64 / target_k as f64).sqrt();
    let mut centers = init_centers(img, s);
    let spatial = (compactness / s) * (compactness / s);
    let mut labels = vec![u32::MAX; w * h];

    for _ in 0..iterations {
        // centers touching each row, in ascending center order
        let mut by_row: Vec<Vec<u32>> = vec![Vec::new(); h];
        for (k, c) in centers.iter().enumerate() {
            let y0 = (c.y - s).ceil().max(0.0) as usize;
            let y1 = ((c.y + s).floor() as isize).min(h as isize - 1);
            if y1 < 0 {
                continue;
            }
            for row in by_row.iter_mut().take(y1 as usize + 1).skip(y0) {
                row.push(k as u32);
            }
        }

        let mut row_state: Vec<(u32, f64)> = labels.iter().map(|&l| (l, f64::INFINITY)).collect();
        par::for_each_row(&mut row_state, w, |y, row| {
            for &k in &by_row[y] {
                let c = &centers[k as usize];
                let x0 = (c.x - s).ceil().max(0.0) as usize;
                let x1 = ((c.x + s).floor() as isize).min(w as isize - 1);
                if x1 < x0 as isize {
                    continue;
                }
                let dy = y as f64 - c.y;
                for x in x0..=x1 as usize {
                    let p = img.data[y * w + x];
                    let dl = [p[0] - c.lab[0], p[1] - c.lab[1], p[2] - c.lab[2]];
                    let dx = x as f64 - c.x;
                    let d = dl[0] * dl[0]
                        + dl[1] * dl[1]
                        + dl[2] * dl[2]
                        + spatial * (dx * dx + dy * dy);
                    if d < row[x].1 {
                        row[x] = (k, d);
                    }
                }
            }
        });
        for (l, (k, _)) in labels.iter_mut().zip(row_state) {
            *l = k;
        }

        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for y in 0..h {
            for x in 0..w {
                let l = labels[y * w + x];
                if l == u32::MAX {
                    continue;
                }
                let p = img.data[y * w + x];
                let acc = &mut sums[l as usize];
                acc[0] += p[0];
                acc[1] += p[1];
                acc[2] += p[2];
                acc[3] += x as f64;
                acc[4] += y as f64;
                acc[5] += 1.0;
            }
        }
        for (c, acc) in centers.iter_mut().zip(&sums) {
            if acc[5] > 0.0 {
                let n = acc[5];
                c.lab = [acc[0] / n, acc[1] / n, acc[2] / n];
                c.x = acc[3] / n;
                c.y = acc[4] / n;
            }
        }
    }

    // Every pixel is covered by some window on the first pass, so no
    // sentinel survives; guard anyway for degenerate shapes.
    if labels.contains(&u32::MAX) {
        return Err(Error::contract("SLIC left unassigned pixels"));
    }

    let min_size = ((s * s) / 4.0).floor().max(1.0) as usize;
    let labels = enforce_connectivity(&labels, w, h, min_size);
    Segmentation::from_labels(img, labels)
}

fn init_centers(img: &LabImage, s: f64) -> Vec<Center> {
    let (w, h) = (img.width, img.height);
    let mut nx = ((w as f64 / s).round() as usize).clamp(1, w);
    let mut ny = ((h as f64 / s).round() as usize).clamp(1, h);
    if nx * ny < 2 {
        if w >= h {
            nx = 2.min(w);
        } else {
            ny = 2.min(h);
        }
    }
    let step_x = w as f64 / nx as f64;
    let step_y = h as f64 / ny as f64;

    let grad = |x: usize, y: usize| -> f64 {
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(w - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        let sq = |a: [f64; 3], b: [f64; 3]| {
            (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
        };
        sq(img.pixel(xr, y), img.pixel(xl, y)) + sq(img.pixel(x, yd), img.pixel(x, yu))
    };

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (((i as f64 + 0.5) * step_x) as usize).min(w - 1);
            let cy = (((j as f64 + 0.5) * step_y) as usize).min(h - 1);
            let mut best = (cx, cy);
            let mut best_g = grad(cx, cy);
            for yy in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
                for xx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                    let g = grad(xx, yy);
                    if g < best_g {
                        best_g = g;
                        best = (xx, yy);
                    }
                }
            }
            centers.push(Center {
                lab: img.pixel(best.0, best.1),
                x: best.0 as f64,
                y: best.1 as f64,
            });
        }
    }
    centers
}

/// Relabels `labels` so that every id is one 4-connected component.
///
/// Each label keeps its largest component when that component has at least
/// `min_size` pixels. Every other component is an orphan and is absorbed by
/// the largest adjacent superpixel (ties go to the lowest id). Final ids are
/// dense and ordered by first appearance in raster order.
pub(crate) fn enforce_connectivity(labels: &[u32], w: usize, h: usize, min_size: usize) -> Vec<u32> {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comp_label.len();
        let l = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if comp[q] == usize::MAX && labels[q] == l {
                    comp[q] = id;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        comp_label.push(l);
        comp_size.push(size);
    }
    let ncomp = comp_label.len();

    let mut comp_adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncomp];
    for y in 0..h {
        for x in 0..w {
            let a = comp[y * w + x];
            if x + 1 < w {
                let b = comp[y * w + x + 1];
                if a != b {
                    comp_adj[a].insert(b);
                    comp_adj[b].insert(a);
                }
            }
            if y + 1 < h {
                let b = comp[(y + 1) * w + x];
                if a != b {
                    comp_adj[a].insert(b);
                    comp_adj[b].insert(a);
                }
            }
        }
    }

    let pick_largest = |min: usize| -> Vec<bool> {
        let mut best: std::collections::BTreeMap<u32, usize> = Default::default();
        for c in 0..ncomp {
            let e = best.entry(comp_label[c]).or_insert(c);
            if comp_size[c] > comp_size[*e] {
                *e = c;
            }
        }
        let mut kept = vec![false; ncomp];
        for &c in best.values() {
            if comp_size[c] >= min {
                kept[c] = true;
            }
        }
        kept
    };
    let mut kept = pick_largest(min_size);
    if kept.iter().filter(|&&k| k).count() < 2 {
        kept = pick_largest(1);
    }

    // kept components get ids in raster order of their first pixel, which is
    // the component discovery order
    let mut final_id = vec![u32::MAX; ncomp];
    let mut sizes = Vec::new();
    for c in 0..ncomp {
        if kept[c] {
            final_id[c] = sizes.len() as u32;
            sizes.push(comp_size[c]);
        }
    }

    let mut pending: Vec<usize> = (0..ncomp).filter(|&c| !kept[c]).collect();
    while !pending.is_empty() {
        let mut deferred = Vec::new();
        for &c in &pending {
            let target = comp_adj[c]
                .iter()
                .filter_map(|&nb| (final_id[nb] != u32::MAX).then_some(final_id[nb]))
                .max_by(|&a, &b| {
                    sizes[a as usize]
                        .cmp(&sizes[b as usize])
                        .then_with(|| b.cmp(&a))
                });
            match target {
                Some(t) => {
                    final_id[c] = t;
                    sizes[t as usize] += comp_size[c];
                }
                None => deferred.push(c),
            }
        }
        if deferred.len() == pending.len() {
            // unreachable on a connected pixel grid
            break;
        }
        pending = deferred;
    }

    comp.iter().map(|&c| final_id[c]).collect()
}
