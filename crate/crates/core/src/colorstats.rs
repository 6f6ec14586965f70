//! CIE Lab conversion and the six-statistic Gaussian color model.
//!
//! Natural above-water images occupy a tight region of Lab space. The model
//! captures that region with six independent Gaussians, one per statistic:
//! the per-image mean and per-image spread of each of L, a, b. Fitting is
//! moment matching across a reference set; scoring sums the squared
//! z-distances, halved, so one statistic sitting one sigma off costs 0.5.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, CHANNELS};

/// D65 two-degree reference white.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];
/// sRGB to XYZ (D65) row-major matrix.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];
const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

/// L, a, b samples, row-major and interleaved like [`Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl LabImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }
}

fn srgb_linearize(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

fn pixel_to_lab(rgb: &[f64]) -> [f64; 3] {
    let lin = [srgb_linearize(rgb[0]), srgb_linearize(rgb[1]), srgb_linearize(rgb[2])];
    let mut f = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        let t = (row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]) / WHITE[i];
        f[i] = lab_f(t);
    }
    [116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

/// Converts gamma-encoded sRGB in [0, 1] to CIE Lab under D65.
pub fn rgb_to_lab(img: &Image) -> LabImage {
    let mut data = vec![0.0; img.data().len()];
    data.par_chunks_mut(CHANNELS)
        .zip(img.data().par_chunks(CHANNELS))
        .for_each(|(out, rgb)| {
            out.copy_from_slice(&pixel_to_lab(rgb));
        });
    LabImage { width: img.width(), height: img.height(), data }
}

/// Within-image mean and population spread of each Lab channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabChannelStats {
    pub mean: [f64; 3],
    /// Population standard deviation; exactly 0 iff the channel is constant.
    pub stdev: [f64; 3],
}

pub fn lab_channel_stats(lab: &LabImage) -> LabChannelStats {
    let n = (lab.width * lab.height) as f64;
    let mut mean = [0.0; 3];
    let mut stdev = [0.0; 3];
    for c in 0..CHANNELS {
        let first = lab.data[c];
        if lab.data[c..].iter().step_by(CHANNELS).all(|v| *v == first) {
            mean[c] = first;
            stdev[c] = 0.0;
            continue;
        }
        let sum: f64 = lab.data[c..].iter().step_by(CHANNELS).sum();
        let m = sum / n;
        let var: f64 = lab.data[c..]
            .iter()
            .step_by(CHANNELS)
            .map(|v| (v - m) * (v - m))
            .sum::<f64>()
            / n;
        mean[c] = m;
        stdev[c] = var.sqrt();
    }
    LabChannelStats { mean, stdev }
}

/// The six summary statistics of one image, in model order:
/// mean L, mean a, mean b, spread L, spread a, spread b.
pub fn image_stat_vector(img: &Image) -> [f64; 6] {
    let s = lab_channel_stats(&rgb_to_lab(img));
    [s.mean[0], s.mean[1], s.mean[2], s.stdev[0], s.stdev[1], s.stdev[2]]
}

pub const STAT_NAMES: [&str; 6] = [
    "mean_l", "mean_a", "mean_b", "stdev_l", "stdev_a", "stdev_b",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStat {
    pub mu: f64,
    pub sigma: f64,
}

/// Six-Gaussian model of how reference images distribute in Lab space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabStatsModel {
    /// Indexed like [`STAT_NAMES`].
    pub stats: [GaussianStat; 6],
    /// Where the reference set came from.
    pub source: String,
    pub image_count: usize,
}

/// Fits the model from per-image statistic vectors by moment matching:
/// sample mean and sample (n-1) spread across vectors. Rejects fewer than
/// two vectors and any statistic without spread.
pub fn fit_from_stat_vectors(
    vectors: &[[f64; 6]],
    source: &str,
) -> Result<LabStatsModel> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::ModelFit(format!(
            "need at least 2 reference images, got {n}"
        )));
    }
    let mut stats = [GaussianStat { mu: 0.0, sigma: 0.0 }; 6];
    for (k, stat) in stats.iter_mut().enumerate() {
        let first = vectors[0][k];
        if vectors.iter().all(|v| v[k] == first) {
            return Err(Error::ModelFit(format!(
                "statistic {} is identical across all {n} reference images; \
                 a degenerate axis cannot be scored",
                STAT_NAMES[k]
            )));
        }
        let mean = vectors.iter().map(|v| v[k]).sum::<f64>() / n as f64;
        let var = vectors
            .iter()
            .map(|v| (v[k] - mean) * (v[k] - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        stat.mu = mean;
        stat.sigma = var.sqrt();
    }
    Ok(LabStatsModel { stats, source: source.to_string(), image_count: n })
}

/// Fits the six-Gaussian model from reference images.
pub fn fit_model(reference: &[Image], source: &str) -> Result<LabStatsModel> {
    let vectors: Vec<[f64; 6]> = reference.par_iter().map(image_stat_vector).collect();
    fit_from_stat_vectors(&vectors, source)
}

/// Sum over the six statistics of (x - mu)^2 / (2 sigma^2).
pub fn score_stat_vector(vector: &[f64; 6], model: &LabStatsModel) -> f64 {
    let mut score = 0.0;
    for (x, g) in vector.iter().zip(&model.stats) {
        let z = (x - g.mu) / g.sigma;
        score += 0.5 * z * z;
    }
    score
}

/// How far an image's Lab statistics sit from the reference model; 0 means
/// every statistic is at its Gaussian mean, larger is worse.
pub fn lab_score(img: &Image, model: &LabStatsModel) -> f64 {
    score_stat_vector(&image_stat_vector(img), model)
}
