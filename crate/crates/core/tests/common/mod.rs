#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saliency_core::{BinaryMask, RgbImage};

/// Black image with a centered white square of side `side`.
pub fn square_image(w: usize, h: usize, side: usize) -> RgbImage {
    let mut img = RgbImage::filled(w, h, [0, 0, 0]).unwrap();
    let (x0, y0) = ((w - side) / 2, (h - side) / 2);
    for y in y0..y0 + side {
        for x in x0..x0 + side {
            img.set_pixel(x, y, [255, 255, 255]);
        }
    }
    img
}

pub fn in_square(w: usize, h: usize, side: usize, x: usize, y: usize) -> bool {
    let (x0, y0) = ((w - side) / 2, (h - side) / 2);
    (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
}

/// Scene with a smooth two-tone background, sensor-like noise and one
/// textured elliptical object. Returns the image and the object mask.
pub fn scene(w: usize, h: usize, seed: u64) -> (RgbImage, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top: [f64; 3] = [rng.gen_range(90.0..200.0), rng.gen_range(110.0..210.0), rng.gen_range(140.0..230.0)];
    let bottom: [f64; 3] = [rng.gen_range(60.0..160.0), rng.gen_range(70.0..150.0), rng.gen_range(40.0..120.0)];
    let object: [f64; 3] = [rng.gen_range(150.0..255.0), rng.gen_range(0.0..90.0), rng.gen_range(0.0..90.0)];
    let cx = w as f64 * rng.gen_range(0.4..0.6);
    let cy = h as f64 * rng.gen_range(0.4..0.6);
    let rx = w as f64 * rng.gen_range(0.12..0.22);
    let ry = h as f64 * rng.gen_range(0.15..0.28);
    let mut img = RgbImage::filled(w, h, [0, 0, 0]).unwrap();
    let mut mask = vec![false; w * h];
    for y in 0..h {
        let t = y as f64 / (h - 1) as f64;
        for x in 0..w {
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            let inside = dx * dx + dy * dy <= 1.0;
            let base = if inside {
                let stripe = if ((x + y) / 6) % 2 == 0 { 12.0 } else { -12.0 };
                object.map(|c| c + stripe)
            } else {
                [0, 1, 2].map(|c| top[c] * (1.0 - t) + bottom[c] * t)
            };
            let px = base.map(|c| (c + rng.gen_range(-6.0..6.0)).clamp(0.0, 255.0).round() as u8);
            img.set_pixel(x, y, px);
            mask[y * w + x] = inside;
        }
    }
    (
        img,
        BinaryMask {
            width: w,
            height: h,
            data: mask,
        },
    )
}
