//! Image ingestion, sRGB to CIELAB conversion and map serialization.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::superpixel::Segmentation;

/// 8-bit sRGB image, row-major RGB triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract("image dimensions must be at least 1x1"));
        }
        if data.len() != width * height * 3 {
            return Err(Error::contract(format!(
                "rgb buffer has {} bytes, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with one color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// CIELAB image (D65, 2° observer), row-major `[L, a, b]` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// One channel as a flat plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().map(|p| p[c]).collect()
    }

    /// Bilinear resample to `width` x `height`.
    pub fn resized(&self, width: usize, height: usize) -> LabImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let planes: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                resize_bilinear(&self.channel(c), self.width, self.height, width, height)
            })
            .collect();
        let data = (0..width * height)
            .map(|i| [planes[0][i], planes[1][i], planes[2][i]])
            .collect();
        LabImage {
            width,
            height,
            data,
        }
    }
}

/// Per-pixel scalar map with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::contract(format!(
                "gray map has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::contract(format!("gray value {v} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Bilinear resample to `width` x `height`; values stay in [0, 1].
    pub fn resized(&self, width: usize, height: usize) -> GrayMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut data = resize_bilinear(&self.data, self.width, self.height, width, height);
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        GrayMap {
            width,
            height,
            data,
        }
    }

    /// 8-bit quantization, `round(255 v)` with halves rounded up.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }
}

/// Per-pixel boolean mask (ground truth or binarized prediction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

pub fn quantize(v: f64) -> u8 {
    (255.0 * v + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Decodes a PNG or JPEG into 8-bit sRGB. Gray sources are expanded to
/// three equal channels; alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let rgb = decode(path)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::new(w as usize, h as usize, rgb.into_raw())
}

/// Reads an 8-bit map as values `byte / 255`.
pub fn load_gray_map(path: impl AsRef<Path>) -> Result<GrayMap> {
    let path = path.as_ref();
    let gray = decode(path)?.into_luma8();
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(|b| b as f64 / 255.0).collect();
    Ok(GrayMap {
        width: w as usize,
        height: h as usize,
        data,
    })
}

/// Reads a ground-truth mask; a pixel is foreground iff its gray value > 127.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let gray = decode(path)?.into_luma8();
    let (w, h) = gray.dimensions();
    Ok(BinaryMask {
        width: w as usize,
        height: h as usize,
        data: gray.into_raw().into_iter().map(|b| b > 127).collect(),
    })
}

// IEC 61966-2-1 linear RGB -> XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124, 0.3576, 0.1805],
    [0.2126, 0.7152, 0.0722],
    [0.0193, 0.1192, 0.9505],
];

// D65 reference white, taken as the XYZ of linear RGB (1, 1, 1) so that
// sRGB white maps to exactly a = b = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const LAB_DELTA: f64 = 6.0 / 29.0;

pub fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_DELTA * LAB_DELTA * LAB_DELTA {
        t.cbrt()
    } else {
        t / (3.0 * LAB_DELTA * LAB_DELTA) + 4.0 / 29.0
    }
}

/// Converts one 8-bit sRGB triple to CIELAB.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let mut f = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        let xyz = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[i] = lab_f(xyz / WHITE[i]);
    }
    [
        116.0 * f[1] - 16.0,
        500.0 * (f[0] - f[1]),
        200.0 * (f[1] - f[2]),
    ]
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    // 8-bit input has at most 2^24 colors but natural images repeat heavily;
    // a per-channel linearization table removes the powf from the hot loop.
    let lin: Vec<f64> = (0..=255u8).map(srgb_to_linear).collect();
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let l = [lin[p[0] as usize], lin[p[1] as usize], lin[p[2] as usize]];
            let mut f = [0.0; 3];
            for (i, row) in RGB_TO_XYZ.iter().enumerate() {
                let xyz = row[0] * l[0] + row[1] * l[1] + row[2] * l[2];
                f[i] = lab_f(xyz / WHITE[i]);
            }
            [
                116.0 * f[1] - 16.0,
                500.0 * (f[0] - f[1]),
                200.0 * (f[1] - f[2]),
            ]
        })
        .collect();
    LabImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Min-max normalizes `values` into [0, 1]; a constant vector maps to zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
        .collect()
}

/// Paints each pixel with its superpixel's value, then min-max normalizes.
pub fn render_map(values: &[f64], seg: &Segmentation) -> Result<GrayMap> {
    if values.len() != seg.count {
        return Err(Error::contract(format!(
            "{} values for {} superpixels",
            values.len(),
            seg.count
        )));
    }
    let norm = min_max_normalize(values);
    let data = seg.labels.iter().map(|&l| norm[l as usize]).collect();
    Ok(GrayMap {
        width: seg.width,
        height: seg.height,
        data,
    })
}

pub fn write_gray_png(map: &GrayMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = GrayImage::from_raw(map.width as u32, map.height as u32, map.to_bytes())
        .ok_or_else(|| Error::contract("gray map buffer does not match its dimensions"))?;
    save(&DynamicImage::ImageLuma8(img), path)
}

/// Debug dump of superpixel labels, one 16-bit gray value per id.
pub fn write_label_png(seg: &Segmentation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if seg.count > u16::MAX as usize + 1 {
        return Err(Error::contract("too many superpixels for a 16-bit label map"));
    }
    let raw: Vec<u16> = seg.labels.iter().map(|&l| l as u16).collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(seg.width as u32, seg.height as u32, raw)
            .ok_or_else(|| Error::contract("label buffer does not match its dimensions"))?;
    save(&DynamicImage::ImageLuma16(img), path)
}

fn save(img: &DynamicImage, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut buf), image::ImageFormat::Png)
        .map_err(|e| Error::Encode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Bilinear resampling of a single plane with pixel-center alignment.
pub(crate) fn resize_bilinear(
    src: &[f64],
    sw: usize,
    sh: usize,
    dw: usize,
    dh: usize,
) -> Vec<f64> {
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    let sample = |pos: f64, len: usize| -> (usize, usize, f64) {
        let p = pos.clamp(0.0, (len - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, p - i0 as f64)
    };
    let cols: Vec<_> = (0..dw)
        .map(|x| sample((x as f64 + 0.5) * sx - 0.5, sw))
        .collect();
    let mut out = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let (y0, y1, ty) = sample((y as f64 + 0.5) * sy - 0.5, sh);
        for &(x0, x1, tx) in &cols {
            let top = src[y0 * sw + x0] * (1.0 - tx) + src[y0 * sw + x1] * tx;
            let bot = src[y1 * sw + x0] * (1.0 - tx) + src[y1 * sw + x1] * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}
