//! Acceptance suite. Each test covers one exit criterion and prints a single
//! `criterion N: PASS|FAIL ...` line (visible with `--nocapture`).

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saliency_core::eval::{self, auc, binarize_adaptive, mae, pr_curve, pr_f_measure};
use saliency_core::imageio::{self, rgb_to_lab, LabImage};
use saliency_core::linalg::{self, DenseMatrix};
use saliency_core::pipeline::{detect_full, detect_segmented, BackgroundPolarity, PipelineConfig};
use saliency_core::ranking_graph::{
    affinity, geodesic_distances, geodesic_from_edges, rank, AffinityExponent, AffinityGraph, Edge,
    GeodesicField, SeedSet, SigmaCSource,
};
use saliency_core::superpixel::{lab_distance, slic_segment};
use saliency_core::surroundedness::bms_pixel_map;
use saliency_core::{BinaryMask, GrayMap, RgbImage, Segmentation};

fn report(n: u32, pass: bool, detail: impl std::fmt::Display) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn single_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

/// Connected random graph over random LAB colors, weighted like the
/// superpixel graph: ring plus random chords, normalized distances.
fn random_color_graph(n: usize, rng: &mut ChaCha8Rng) -> AffinityGraph {
    let colors: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(-80.0..80.0), rng.gen_range(-80.0..80.0)])
        .collect();
    let mut pairs = std::collections::BTreeSet::new();
    for i in 0..n {
        let j = (i + 1) % n;
        if i != j {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    for _ in 0..3 * n {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i != j {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let max = pairs
        .iter()
        .map(|&(i, j)| lab_distance(colors[i], colors[j]))
        .fold(0.0f64, f64::max);
    let mut w = DenseMatrix::zeros(n);
    let mut edges = Vec::new();
    for &(i, j) in &pairs {
        let d = lab_distance(colors[i], colors[j]);
        let v = affinity(d / max, 0.1, AffinityExponent::Norm);
        w.set(i, j, v);
        w.set(j, i, v);
        edges.push(Edge { a: i, b: j, dc: d });
    }
    AffinityGraph::from_weights(w, edges, 0.99).unwrap()
}

fn random_seeds(n: usize, rng: &mut ChaCha8Rng) -> SeedSet {
    let mut strong = Vec::new();
    let mut weak = Vec::new();
    for i in 0..n {
        match rng.gen_range(0..10) {
            0 => strong.push(i),
            1 | 2 => weak.push(i),
            _ => {}
        }
    }
    if strong.is_empty() {
        strong.push(0);
        weak.retain(|&i| i != 0);
    }
    SeedSet::new(n, strong, weak).unwrap()
}

#[test]
fn criterion_1_solver_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = if k % 10 == 0 { 500 } else { rng.gen_range(2..=500) };
        let g = random_color_graph(n, &mut rng);
        let seeds = random_seeds(n, &mut rng);
        let x = rank(&g, &seeds).unwrap();
        let r = linalg::residual_inf(&g.system_matrix(), &x, &seeds.indicator);
        worst = worst.max(r);
    }

    let g = random_color_graph(200, &mut rng);
    let seeds = random_seeds(200, &mut rng);
    let mut times: Vec<Duration> = (0..15)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(rank(&g, &seeds).unwrap());
            t.elapsed()
        })
        .collect();
    times.sort();
    let median = times[times.len() / 2];

    let pass = worst < 1e-8 && median < Duration::from_millis(50);
    report(1, pass, format!("max residual {worst:.3e} (< 1e-8), n=200 solve {median:?} (< 50ms)"));
    assert!(worst < 1e-8, "residual {worst}");
    assert!(median < Duration::from_millis(50), "solve time {median:?}");
}

/// Shortest simple-path length from `a` to `b` by exhaustive enumeration.
fn brute_force(adj: &[Vec<(usize, f64)>], a: usize, b: usize) -> f64 {
    fn walk(adj: &[Vec<(usize, f64)>], at: usize, goal: usize, acc: f64, seen: &mut Vec<bool>, best: &mut f64) {
        if at == goal {
            *best = best.min(acc);
            return;
        }
        for &(next, w) in &adj[at] {
            if !seen[next] {
                seen[next] = true;
                walk(adj, next, goal, acc + w, seen, best);
                seen[next] = false;
            }
        }
    }
    let mut seen = vec![false; adj.len()];
    seen[a] = true;
    let mut best = f64::INFINITY;
    walk(adj, a, b, 0.0, &mut seen, &mut best);
    best
}

fn check_metric(f: &GeodesicField) -> bool {
    let n = f.n;
    (0..n).all(|i| f.get(i, i) == 0.0)
        && (0..n).all(|i| (0..n).all(|j| f.get(i, j) == f.get(j, i)))
        && (0..n).all(|i| {
            (0..n).all(|j| (0..n).all(|k| f.get(i, k) <= f.get(i, j) + f.get(j, k) + 1e-9))
        })
}

#[test]
fn criterion_2_geodesic_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(0.45) {
                    edges.push(Edge { a, b, dc: rng.gen_range(0.0..50.0) });
                }
            }
        }
        let field = geodesic_from_edges(n, &edges, SigmaCSource::EdgeDc);
        let mut adj = vec![Vec::new(); n];
        for e in &edges {
            adj[e.a].push((e.b, e.dc));
            adj[e.b].push((e.a, e.dc));
        }
        let mut oracle = vec![0.0; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let d = brute_force(&adj, a, b);
                oracle[a * n + b] = d;
                oracle[b * n + a] = d;
            }
        }
        let max_finite = oracle.iter().filter(|d| d.is_finite()).fold(0.0f64, |m, &d| m.max(d));
        for d in &mut oracle {
            if d.is_infinite() {
                *d = 3.0 * max_finite;
            }
        }
        if field.dist != oracle {
            mismatches += 1;
        }
    }
    report(2, mismatches == 0, format!("{mismatches} of 200 graphs differ from path enumeration"));
    assert_eq!(mismatches, 0);
}

fn region_means(map: &GrayMap, inside: impl Fn(usize, usize) -> bool) -> (f64, f64) {
    let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
    for y in 0..map.height {
        for x in 0..map.width {
            if inside(x, y) {
                si += map.get(x, y);
                ni += 1;
            } else {
                so += map.get(x, y);
                no += 1;
            }
        }
    }
    (si / ni as f64, so / no as f64)
}

#[test]
fn criterion_3_synthetic_end_to_end() {
    let (w, h, side) = (400, 300, 80);
    let img = common::square_image(w, h, side);
    let map = detect_full(&img, &PipelineConfig::default()).unwrap();
    let (mi, mo) = region_means(&map, |x, y| common::in_square(w, h, side, x, y));
    let ratio_ok = mi >= 5.0 * mo;

    let flat = RgbImage::filled(w, h, [128, 128, 128]).unwrap();
    let zero_ok = detect_full(&flat, &PipelineConfig::default())
        .map(|m| m.data.iter().all(|&v| v == 0.0))
        .unwrap_or(false);

    report(
        3,
        ratio_ok && zero_ok,
        format!("square mean {mi:.4} vs outside {mo:.4} (need >= 5x); uniform image zero map: {zero_ok}"),
    );
    assert!(ratio_ok, "inside {mi}, outside {mo}");
    assert!(zero_ok);
}

struct Dataset {
    images: Vec<PathBuf>,
    gt_dir: PathBuf,
}

fn dataset(var: &str) -> Option<Dataset> {
    let root = PathBuf::from(std::env::var_os(var)?);
    let mut images: Vec<PathBuf> = std::fs::read_dir(root.join("images"))
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png"))
        })
        .collect();
    images.sort();
    Some(Dataset {
        images,
        gt_dir: root.join("gt"),
    })
}

/// Mean MAE and mean AUC of the detector over `images`, scored on the 8-bit
/// maps the CLI would write.
fn score(images: &[PathBuf], gt_dir: &Path, cfg: &PipelineConfig) -> (f64, f64) {
    let mut maes = Vec::new();
    let mut aucs = Vec::new();
    for path in images {
        let stem = path.file_stem().unwrap().to_str().unwrap();
        let gt = imageio::load_mask(gt_dir.join(format!("{stem}.png"))).unwrap();
        let img = imageio::load_image(path).unwrap();
        let map = detect_full(&img, cfg).unwrap();
        let q = GrayMap::new(
            map.width,
            map.height,
            map.to_bytes().into_iter().map(|b| b as f64 / 255.0).collect(),
        )
        .unwrap();
        maes.push(mae(&q, &gt).unwrap());
        if let Ok(a) = auc(&q, &gt) {
            aucs.push(a);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    (mean(&maes), mean(&aucs))
}

// Needs the ASD and DUT-OMRON benchmark sets on disk:
//   SALIENCY_ASD_DIR=<dir with images/ and gt/>
//   SALIENCY_DUTOMRON_DIR=<dir with images/ and gt/>
// then: cargo test -p saliency-core --test acceptance -- --ignored --nocapture
#[test]
#[ignore = "requires ASD and DUT-OMRON datasets (SALIENCY_ASD_DIR, SALIENCY_DUTOMRON_DIR)"]
fn criterion_4_benchmark_reproduction() {
    let (Some(asd), Some(dut)) = (dataset("SALIENCY_ASD_DIR"), dataset("SALIENCY_DUTOMRON_DIR")) else {
        report(4, false, "datasets not available; set SALIENCY_ASD_DIR and SALIENCY_DUTOMRON_DIR");
        panic!("benchmark datasets not available");
    };
    assert!(asd.images.len() >= 120, "ASD needs at least 120 images");
    assert!(dut.images.len() >= 100, "DUT-OMRON needs at least 100 images");
    let tuning = &asd.images[..20];
    let asd_test = &asd.images[20..120];
    let dut_test = &dut.images[..100];

    let mut best: Option<(f64, PipelineConfig)> = None;
    for polarity in [BackgroundPolarity::AsWritten, BackgroundPolarity::Inverted] {
        for exponent in [AffinityExponent::Norm, AffinityExponent::NormSq] {
            let cfg = PipelineConfig {
                background_seed_polarity: polarity,
                affinity_exponent: exponent,
                ..Default::default()
            };
            let (m, a) = score(tuning, &asd.gt_dir, &cfg);
            println!("tuning {polarity:?}/{exponent:?}: MAE {m:.4} AUC {a:.4}");
            let objective = a - m;
            if best.as_ref().is_none_or(|(b, _)| objective > *b) {
                best = Some((objective, cfg));
            }
        }
    }
    let cfg = best.unwrap().1;
    let (asd_mae, asd_auc) = score(asd_test, &asd.gt_dir, &cfg);
    let (dut_mae, dut_auc) = score(dut_test, &dut.gt_dir, &cfg);
    let pass = asd_mae <= 0.10 && asd_auc >= 0.90 && dut_mae <= 0.15 && dut_auc >= 0.70;
    report(
        4,
        pass,
        format!(
            "config {:?}/{:?}; ASD MAE {asd_mae:.4} AUC {asd_auc:.4}; DUT-OMRON MAE {dut_mae:.4} AUC {dut_auc:.4}",
            cfg.background_seed_polarity, cfg.affinity_exponent
        ),
    );
    assert!(asd_mae <= 0.10 && asd_auc >= 0.90);
    assert!(dut_mae <= 0.15 && dut_auc >= 0.70);
}

#[test]
fn criterion_5_metric_self_test() {
    let (w, h) = (64, 48);
    let gt = BinaryMask {
        width: w,
        height: h,
        // object under half the area, so the adaptive threshold stays below 1
        data: (0..w * h).map(|i| (i % w) >= w / 3 && (i / w) >= h / 2).collect(),
    };
    let exact = GrayMap::new(w, h, gt.data.iter().map(|&b| b as u8 as f64).collect()).unwrap();
    let inverse = GrayMap::new(w, h, exact.data.iter().map(|v| 1.0 - v).collect()).unwrap();
    let (_, _, f_mask) = pr_f_measure(&gt, &gt).unwrap();
    let (_, _, f_map) = pr_f_measure(&binarize_adaptive(&exact), &gt).unwrap();
    let f = f_mask.min(f_map);
    let perfect = mae(&exact, &gt).unwrap() == 0.0 && auc(&exact, &gt).unwrap() == 1.0 && f == 1.0;
    let anti = mae(&inverse, &gt).unwrap() == 1.0 && auc(&inverse, &gt).unwrap() == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 256;
    let balanced = BinaryMask {
        width: n,
        height: n,
        data: (0..n * n).map(|i| i % 2 == 0).collect(),
    };
    let noise = GrayMap::new(n, n, (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let noise_auc = auc(&noise, &balanced).unwrap();
    let noise_ok = (noise_auc - 0.5).abs() <= 0.02;

    report(
        5,
        perfect && anti && noise_ok,
        format!("pred=gt ok: {perfect}; pred=1-gt ok: {anti}; noise AUC {noise_auc:.4}"),
    );
    assert!(perfect && anti && noise_ok);
}

fn shifted_l(lab: &LabImage, delta: f64) -> LabImage {
    let mut out = lab.clone();
    for p in &mut out.data {
        p[0] += delta;
    }
    out
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a))).unwrap()
}

fn mirrored(lab: &LabImage) -> LabImage {
    let mut out = lab.clone();
    for y in 0..lab.height {
        for x in 0..lab.width {
            out.data[y * lab.width + x] = lab.data[y * lab.width + lab.width - 1 - x];
        }
    }
    out
}

#[test]
fn criterion_6_invariant_suites() {
    let cfg = PipelineConfig::default();
    let mut failures = Vec::new();

    // LAB shift: fixed labels, L + 7.5 everywhere
    let mut shift_ok = true;
    for seed in 0..4 {
        let (img, _) = common::scene(200, 150, 100 + seed);
        let lab = rgb_to_lab(&img);
        let seg = slic_segment(&lab, 120, 10.0, 10).unwrap();
        let lab2 = shifted_l(&lab, 7.5);
        let seg2 = Segmentation::from_labels(&lab2, seg.labels.clone()).unwrap();
        let a = detect_segmented(&lab, seg, &cfg).unwrap();
        let b = detect_segmented(&lab2, seg2, &cfg).unwrap();
        let (ra, rb) = (a.refined.unwrap().values, b.refined.unwrap().values);
        let close = ra.iter().zip(&rb).all(|(x, y)| (x - y).abs() < 1e-6);
        shift_ok &= argmax(&ra) == argmax(&rb) && close;
    }
    if !shift_ok {
        failures.push("LAB-shift argmax invariance");
    }

    // mirror equivariance of the surroundedness map
    let mut mirror_ok = true;
    for seed in 0..3 {
        let (img, _) = common::scene(160, 120, 200 + seed);
        let lab = rgb_to_lab(&img);
        let a = bms_pixel_map(&lab, 8.0, 2).unwrap();
        let b = bms_pixel_map(&mirrored(&lab), 8.0, 2).unwrap();
        for y in 0..lab.height {
            for x in 0..lab.width {
                mirror_ok &= a.get(x, y) == b.get(lab.width - 1 - x, y);
            }
        }
    }
    if !mirror_ok {
        failures.push("surroundedness mirror equivariance");
    }

    // geodesic symmetry and triangle inequality
    let mut metric_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let n = rng.gen_range(2..60);
        let g = random_color_graph(n, &mut rng);
        for src in [SigmaCSource::EdgeDc, SigmaCSource::GeodesicAllPairs] {
            metric_ok &= check_metric(&geodesic_distances(&g, src));
        }
    }
    let (img, _) = common::scene(200, 150, 9);
    let seg = slic_segment(&rgb_to_lab(&img), 200, 10.0, 10).unwrap();
    let g = saliency_core::ranking_graph::build_graph(&seg, &cfg.graph_params()).unwrap();
    metric_ok &= check_metric(&geodesic_distances(&g, SigmaCSource::EdgeDc));
    if !metric_ok {
        failures.push("geodesic symmetry / triangle inequality");
    }

    // recall never increases with the threshold
    let mut recall_ok = true;
    for _ in 0..20 {
        let n = 64;
        let m = GrayMap::new(n, n, (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let gt = BinaryMask {
            width: n,
            height: n,
            data: (0..n * n).map(|_| rng.gen_bool(0.3)).collect(),
        };
        let c = pr_curve(&m, &gt).unwrap();
        recall_ok &= c.windows(2).all(|p| p[1].1 <= p[0].1);
    }
    if !recall_ok {
        failures.push("PR-curve recall monotonicity");
    }

    // bit-exact detection with 1 and 4 worker threads
    let (img, _) = common::scene(240, 180, 12);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| detect_full(&img, &cfg).unwrap().to_bytes())
    };
    let det_ok = run(1) == run(4);
    if !det_ok {
        failures.push("determinism across thread counts");
    }

    report(
        6,
        failures.is_empty(),
        if failures.is_empty() {
            "LAB shift, mirror, geodesic metric, recall monotonicity, jobs 1 vs 4".to_string()
        } else {
            format!("failed: {}", failures.join(", "))
        },
    );
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn criterion_7_throughput() {
    let (img, _) = common::scene(400, 300, 42);
    let cfg = PipelineConfig::default();
    // warm-up run, then the best of three
    single_thread(|| detect_full(&img, &cfg).unwrap());
    let best = (0..3)
        .map(|_| {
            let t = Instant::now();
            single_thread(|| detect_full(&img, &cfg).unwrap());
            t.elapsed()
        })
        .min()
        .unwrap();
    let pass = best < Duration::from_secs(2);
    report(7, pass, format!("400x300 single-threaded detect {best:?} (< 2s)"));
    assert!(pass);
}

#[test]
fn eval_harness_on_written_maps() {
    // not a numbered criterion: exercises run_benchmark end to end
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&gt).unwrap();
    for seed in 0..3 {
        let (img, mask) = common::scene(120, 90, 300 + seed);
        let map = detect_full(&img, &PipelineConfig::default()).unwrap();
        imageio::write_gray_png(&map, pred.join(format!("s{seed}.png"))).unwrap();
        let gt_map = GrayMap::new(120, 90, mask.data.iter().map(|&b| b as u8 as f64).collect()).unwrap();
        imageio::write_gray_png(&gt_map, gt.join(format!("s{seed}.png"))).unwrap();
    }
    let report = eval::run_benchmark(&pred, &gt).unwrap();
    assert_eq!(report.per_image.len(), 3);
    assert_eq!(report.pr_curve.len(), 256);
    assert!(report.aggregate.auc > 0.9);
}
