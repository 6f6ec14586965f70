//! In-memory pixel containers.
//!
//! `Image` holds RGB samples as `f64` in [0, 1], row-major and
//! channel-interleaved. `DepthMap` holds one value per pixel and is tagged
//! with whether those values are relative ([0, 1]) or absolute metres.
//! `ClipMask` records, per pixel and channel, where a model operation lost
//! information (range clamping or a floored transmission divisor).

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

pub const RED: usize = 0;
pub const GREEN: usize = 1;
pub const BLUE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from interleaved RGB samples in [0, 1].
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image dimensions must be nonzero".into()));
        }
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "image buffer holds {} samples, {}x{} RGB needs {}",
                data.len(),
                width,
                height,
                expected
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidInput(format!(
                "image sample {v} outside [0, 1]"
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image from samples already known to lie in [0, 1].
    pub(crate) fn from_clamped(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * CHANNELS);
        Self { width, height, data }
    }

    pub fn constant(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    /// Mean of one channel over all pixels.
    pub fn channel_mean(&self, c: usize) -> f64 {
        let sum: f64 = self.data[c..].iter().step_by(CHANNELS).sum();
        sum / self.pixel_count() as f64
    }

    pub fn channel_means(&self) -> [f64; 3] {
        [self.channel_mean(0), self.channel_mean(1), self.channel_mean(2)]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Mirrors the image left-right.
    pub fn flip_horizontal(&self) -> Image {
        let mut data = vec![0.0; self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let src = (y * self.width + x) * CHANNELS;
                let dst = (y * self.width + (self.width - 1 - x)) * CHANNELS;
                data[dst..dst + CHANNELS].copy_from_slice(&self.data[src..src + CHANNELS]);
            }
        }
        Image { width: self.width, height: self.height, data }
    }

    /// Mirrors the image top-bottom.
    pub fn flip_vertical(&self) -> Image {
        let mut data = vec![0.0; self.data.len()];
        let row = self.width * CHANNELS;
        for y in 0..self.height {
            let src = y * row;
            let dst = (self.height - 1 - y) * row;
            data[dst..dst + row].copy_from_slice(&self.data[src..src + row]);
        }
        Image { width: self.width, height: self.height, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthKind {
    /// Values normalized to [0, 1]; larger means farther.
    Relative,
    /// Values in metres.
    AbsoluteMeters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    kind: DepthKind,
}

impl DepthMap {
    pub fn relative(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::validate_shape(width, height, &values)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidInput(format!(
                "relative depth value {v} outside [0, 1]"
            )));
        }
        Ok(Self { width, height, values, kind: DepthKind::Relative })
    }

    pub fn absolute(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::validate_shape(width, height, &values)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "absolute depth value {v} must be finite and nonnegative"
            )));
        }
        Ok(Self { width, height, values, kind: DepthKind::AbsoluteMeters })
    }

    fn validate_shape(width: usize, height: usize, values: &[f64]) -> Result<()> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("depth dimensions must be nonzero".into()));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "depth buffer holds {} values, {}x{} needs {}",
                values.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn same_shape_as_image(&self, img: &Image) -> bool {
        self.width == img.width() && self.height == img.height()
    }
}

/// Per-pixel, per-channel flags marking lossy model arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipMask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl ClipMask {
    pub fn none(width: usize, height: usize) -> Self {
        Self { width, height, flags: vec![false; width * height * CHANNELS] }
    }

    pub(crate) fn from_flags(width: usize, height: usize, flags: Vec<bool>) -> Self {
        debug_assert_eq!(flags.len(), width * height * CHANNELS);
        Self { width, height, flags }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channel_flagged(&self, x: usize, y: usize, c: usize) -> bool {
        self.flags[(y * self.width + x) * CHANNELS + c]
    }

    /// True when any channel of the pixel is flagged.
    pub fn pixel_flagged(&self, x: usize, y: usize) -> bool {
        let base = (y * self.width + x) * CHANNELS;
        self.flags[base] || self.flags[base + 1] || self.flags[base + 2]
    }

    pub fn flagged_pixel_count(&self) -> usize {
        self.flags
            .chunks_exact(CHANNELS)
            .filter(|px| px.iter().any(|&f| f))
            .count()
    }

    /// Fraction of pixels with at least one flagged channel.
    pub fn pixel_fraction(&self) -> f64 {
        self.flagged_pixel_count() as f64 / (self.width * self.height) as f64
    }

    /// Pixelwise OR of two masks of the same shape.
    pub fn union(&self, other: &ClipMask) -> Result<ClipMask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch("clip mask shapes differ".into()));
        }
        let flags = self
            .flags
            .iter()
            .zip(&other.flags)
            .map(|(a, b)| *a || *b)
            .collect();
        Ok(ClipMask { width: self.width, height: self.height, flags })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_samples() {
        let err = Image::new(1, 1, vec![0.0, 0.5, 1.5]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(Image::new(1, 1, vec![0.0, f64::NAN, 0.5]).is_err());
    }

    #[test]
    fn rejects_wrong_buffer_length() {
        assert!(matches!(
            Image::new(2, 2, vec![0.0; 9]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(DepthMap::relative(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn rejects_zero_dimensions() {
        assert!(Image::new(0, 4, vec![]).is_err());
        assert!(DepthMap::absolute(3, 0, vec![]).is_err());
    }

    #[test]
    fn channel_means_of_constant_image() {
        let img = Image::constant(4, 3, [0.25, 0.5, 0.75]).unwrap();
        assert_eq!(img.channel_means(), [0.25, 0.5, 0.75]);
    }

    #[test]
    fn flips_are_involutions() {
        let data: Vec<f64> = (0..3 * 4 * 3).map(|i| i as f64 / 100.0).collect();
        let img = Image::new(3, 4, data).unwrap();
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
        assert_eq!(img.flip_vertical().flip_vertical(), img);
        assert_eq!(img.flip_horizontal().get(0, 0, 1), img.get(2, 0, 1));
    }

    #[test]
    fn clip_mask_counts_pixels_not_channels() {
        let mut flags = vec![false; 2 * 2 * 3];
        flags[0] = true;
        flags[1] = true; // same pixel, two channels
        flags[9] = true; // second pixel of row two
        let mask = ClipMask::from_flags(2, 2, flags);
        assert_eq!(mask.flagged_pixel_count(), 2);
        assert!((mask.pixel_fraction() - 0.5).abs() < 1e-15);
        assert!(mask.pixel_flagged(0, 0));
        assert!(!mask.pixel_flagged(1, 0));
    }

    #[test]
    fn clip_mask_union() {
        let mut a = ClipMask::none(2, 1);
        let mut b = ClipMask::none(2, 1);
        a.flags[0] = true;
        b.flags[5] = true;
        let u = a.union(&b).unwrap();
        assert!(u.channel_flagged(0, 0, 0));
        assert!(u.channel_flagged(1, 0, 2));
        assert!(a.union(&ClipMask::none(1, 1)).is_err());
    }
}
