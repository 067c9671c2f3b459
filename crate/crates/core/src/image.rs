//! Planar floating-point images.
//!
//! Pixels are stored channel-major (all of channel 0, then channel 1, ...),
//! each channel row-major. Values are reals in `[0, 1]`.

use std::path::Path;

use image::imageops::FilterType;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch {
                name: "image".into(),
                expected: vec![channels, height, width],
                found: vec![data.len()],
            });
        }
        Ok(Image {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Image {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// `(height, width, channels)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f32 {
        &mut self.data[(c * self.height + y) * self.width + x]
    }

    /// Arithmetic mean over every pixel of every channel.
    pub fn mean_intensity(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Load a raster file, resizing to `(height, width)` when it differs, and
    /// converting to `channels` (1 = luma, 3 = RGB).
    pub fn load(path: &Path, channels: usize, height: usize, width: usize) -> Result<Self> {
        let img = image::open(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(other),
        })?;
        let img = if img.height() as usize != height || img.width() as usize != width {
            img.resize_exact(width as u32, height as u32, FilterType::Triangle)
        } else {
            img
        };
        let mut out = Image::zeros(channels, height, width);
        match channels {
            1 => {
                let luma = img.to_luma8();
                for (x, y, p) in luma.enumerate_pixels() {
                    *out.at_mut(0, y as usize, x as usize) = p.0[0] as f32 / 255.0;
                }
            }
            3 => {
                let rgb = img.to_rgb8();
                for (x, y, p) in rgb.enumerate_pixels() {
                    for c in 0..3 {
                        *out.at_mut(c, y as usize, x as usize) = p.0[c] as f32 / 255.0;
                    }
                }
            }
            n => return Err(Error::config(format!("unsupported channel count {n}"))),
        }
        Ok(out)
    }

    /// Quantize to 8 bits and write as PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let (w, h) = (self.width as u32, self.height as u32);
        let result = match self.channels {
            1 => image::GrayImage::from_fn(w, h, |x, y| {
                image::Luma([q(self.at(0, y as usize, x as usize))])
            })
            .save(path),
            3 => image::RgbImage::from_fn(w, h, |x, y| {
                let (x, y) = (x as usize, y as usize);
                image::Rgb([q(self.at(0, y, x)), q(self.at(1, y, x)), q(self.at(2, y, x))])
            })
            .save(path),
            n => return Err(Error::config(format!("unsupported channel count {n}"))),
        };
        result.map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(other),
        })
    }

    /// Round-trip through 8-bit quantization without touching disk.
    pub fn quantized(&self) -> Image {
        Image {
            data: self
                .data
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
                .collect(),
            ..self.clone()
        }
    }
}
