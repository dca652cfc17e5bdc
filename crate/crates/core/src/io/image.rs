use std::path::Path;

use image::imageops::{self, FilterType};
use image::{GrayImage, Luma};

use super::IoError;
use crate::render::{Mask, SilhouetteImage};

/// Luma weights applied to RGB input.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Reads a target silhouette with values in `[0, 1]`, tube white.
///
/// Colour input is reduced with [`LUMA`]; alpha is ignored. A size other
/// than `width x height` is an error unless `resize` is set.
pub fn load_target(path: &Path, width: usize, height: usize, resize: bool, invert: bool) -> Result<SilhouetteImage<f64>, IoError> {
    let err = |m: String| IoError::Image {
        path: path.to_path_buf(),
        message: m,
    };
    let img = image::open(path).map_err(|e| err(e.to_string()))?;
    let mut rgb = img.to_rgb16();
    if (rgb.width() as usize, rgb.height() as usize) != (width, height) {
        if !resize {
            return Err(err(format!(
                "image is {}x{}, expected {width}x{height} (enable resize to resample)",
                rgb.width(),
                rgb.height()
            )));
        }
        rgb = imageops::resize(&rgb, width as u32, height as u32, FilterType::Triangle);
    }
    let values = rgb
        .pixels()
        .map(|p| {
            let v = if p[0] == p[1] && p[1] == p[2] {
                p[0] as f64 / 65535.0
            } else {
                (LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64) / 65535.0
            };
            if invert {
                1.0 - v
            } else {
                v
            }
        })
        .collect();
    Ok(SilhouetteImage { width, height, values })
}

fn write_gray(path: &Path, width: usize, height: usize, value: impl Fn(usize) -> u8) -> Result<(), IoError> {
    let img = GrayImage::from_fn(width as u32, height as u32, |i, j| Luma([value(j as usize * width + i as usize)]));
    img.save(path).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes a rendered image as 8-bit grayscale; the format follows the
/// extension (`.png` or `.pgm`).
pub fn save_silhouette(img: &SilhouetteImage<f64>, path: &Path) -> Result<(), IoError> {
    write_gray(path, img.width, img.height, |p| (img.values[p].clamp(0.0, 1.0) * 255.0).round() as u8)
}

pub fn save_mask(mask: &Mask, path: &Path) -> Result<(), IoError> {
    write_gray(path, mask.width, mask.height, |p| if mask.data[p] { 255 } else { 0 })
}
