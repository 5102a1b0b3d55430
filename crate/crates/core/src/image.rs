//! Linear RGB images, PPM/PNG files and PSNR.

use std::path::Path;

use image::{ImageFormat, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error(transparent)]
    Codec(#[from] image::ImageError),
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("unsupported image extension {0:?}, expected .ppm or .png")]
    UnknownFormat(String),
}

/// Row-major RGB, channels nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<[f32; 3]>,
}

impl Image {
    pub fn filled(width: u32, height: u32, rgb: [f32; 3]) -> Self {
        Self { width, height, pixels: vec![rgb; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [f32; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [f32; 3]) {
        self.pixels[(y * self.width + x) as usize] = rgb;
    }

    /// Largest absolute per-channel difference.
    pub fn max_abs_diff(&self, other: &Image) -> Result<f32, ImageError> {
        self.check_size(other)?;
        Ok(self
            .pixels
            .iter()
            .zip(&other.pixels)
            .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs()))
            .fold(0.0, f32::max))
    }

    /// Clamped and rounded to 8 bits per channel.
    pub fn to_rgb8(&self) -> RgbImage {
        let raw = self.pixels.iter().flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)).collect();
        RgbImage::from_raw(self.width, self.height, raw).expect("buffer matches dimensions")
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let pixels = img.pixels().map(|p| p.0.map(|c| c as f32 / 255.0)).collect();
        Self { width: img.width(), height: img.height(), pixels }
    }

    /// Binary PPM (P6) bytes: `P6\n<w> <h>\n255\n` then RGB rows.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(self.to_rgb8().as_raw());
        out
    }

    /// Writes PPM or PNG, chosen by extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        match format_of(path)? {
            ImageFormat::Pnm => std::fs::write(path, self.to_ppm()).map_err(image::ImageError::IoError)?,
            format => self.to_rgb8().save_with_format(path, format)?,
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let path = path.as_ref();
        format_of(path)?;
        Ok(Self::from_rgb8(&image::open(path)?.to_rgb8()))
    }

    fn check_size(&self, other: &Image) -> Result<(), ImageError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(ImageError::SizeMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }
}

fn format_of(path: &Path) -> Result<ImageFormat, ImageError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "ppm" => Ok(ImageFormat::Pnm),
        "png" => Ok(ImageFormat::Png),
        _ => Err(ImageError::UnknownFormat(ext)),
    }
}

/// Peak signal-to-noise ratio in dB for peak 1.0; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, ImageError> {
    a.check_size(b)?;
    let n = a.pixels.len() * 3;
    let sse: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] as f64 - q[c] as f64).powi(2)))
        .sum();
    if sse == 0.0 || n == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (n as f64 / sse).log10())
}
