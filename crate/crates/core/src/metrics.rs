//! Image quality metrics and training-style losses.
//!
//! Full-reference: `psnr` and `ssim` (luma, 11x11 Gaussian window).
//! No-reference: `uiqm` (colorfulness + sharpness + contrast) and `uciqe`
//! (chroma spread + luminance contrast + saturation), both computed from
//! pixel statistics that are invariant to image flips. Blockwise terms use a
//! mirror-symmetric partition so that invariance is exact for every image
//! size, not only multiples of the block size.
//!
//! Losses: a proximity-weighted reference loss, a structure-based
//! degradation-consistency loss, and their weighted combination with a
//! color-statistics score.

use serde::{Deserialize, Serialize};

use crate::colorstats::rgb_to_lab;
use crate::error::{Error, Result};
use crate::image::{DepthKind, DepthMap, Image, CHANNELS};

/// Reported when two images are bit-identical and the error power is zero.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
/// Both metrics operate on [0, 1] data.
const DYNAMIC_RANGE: f64 = 1.0;

/// Rec. 601 luma from gamma-encoded RGB.
pub(crate) fn luma_plane(img: &Image) -> Vec<f64> {
    img.data()
        .chunks_exact(CHANNELS)
        .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
        .collect()
}

fn require_same_shape(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "images are {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over all samples, peak 1.0. Bit-identical
/// inputs report [`PSNR_CAP_DB`] instead of infinity.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    require_same_shape(a, b)?;
    if a.data() == b.data() {
        return Ok(PSNR_CAP_DB);
    }
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    Ok(10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-((i as f64 - mid) * (i as f64 - mid)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-mode convolution; output is (w - 10) x (h - 10).
fn gaussian_filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        let out = &mut horiz[y * ow..(y + 1) * ow];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * row[x + t];
            }
            *o = acc;
        }
    }
    let oh = h - SSIM_WINDOW + 1;
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * horiz[(y + t) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Mean structural similarity on luma with the standard 11x11 Gaussian
/// window (sigma 1.5), valid-mode. Needs both sides of both images >= 11.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    require_same_shape(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let k = gaussian_kernel();
    let ya = luma_plane(a);
    let yb = luma_plane(b);
    let sq = |p: &[f64]| -> Vec<f64> { p.iter().map(|v| v * v).collect() };
    let prod: Vec<f64> = ya.iter().zip(&yb).map(|(x, y)| x * y).collect();
    let mu_a = gaussian_filter_valid(&ya, w, h, &k);
    let mu_b = gaussian_filter_valid(&yb, w, h, &k);
    let mu_aa = gaussian_filter_valid(&sq(&ya), w, h, &k);
    let mu_bb = gaussian_filter_valid(&sq(&yb), w, h, &k);
    let mu_ab = gaussian_filter_valid(&prod, w, h, &k);

    let c1 = (SSIM_K1 * DYNAMIC_RANGE) * (SSIM_K1 * DYNAMIC_RANGE);
    let c2 = (SSIM_K2 * DYNAMIC_RANGE) * (SSIM_K2 * DYNAMIC_RANGE);
    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = mu_aa[i] - ma * ma;
        let vb = mu_bb[i] - mb * mb;
        let cov = mu_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        sum += num / den;
    }
    Ok((sum / mu_a.len() as f64).clamp(-1.0, 1.0))
}

/// Sobel gradient magnitude with replicated edges. Sums are grouped so that
/// mirroring the plane mirrors the output bit for bit.
pub(crate) fn sobel_magnitude(plane: &[f64], w: usize, h: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        plane[yc * w + xc]
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let right = (at(x + 1, y - 1) + at(x + 1, y + 1)) + 2.0 * at(x + 1, y);
            let left = (at(x - 1, y - 1) + at(x - 1, y + 1)) + 2.0 * at(x - 1, y);
            let bottom = (at(x - 1, y + 1) + at(x + 1, y + 1)) + 2.0 * at(x, y + 1);
            let top = (at(x - 1, y - 1) + at(x + 1, y - 1)) + 2.0 * at(x, y - 1);
            let gx = right - left;
            let gy = bottom - top;
            out[(y as usize) * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Mirror-symmetric 1-D partition into about `len / target` cells. Left-half
/// boundaries are floor(i * len / k); the right half mirrors them, and the
/// cell count is forced odd for odd `len`, so the boundary set maps to
/// itself under reflection.
fn symmetric_partition(len: usize, target: usize) -> Vec<(usize, usize)> {
    let mut k = ((len as f64 / target as f64).round() as usize).clamp(1, len);
    if len % 2 == 1 && k % 2 == 0 {
        k -= 1; // k >= 2 here, so this stays >= 1
    }
    let mut bounds = Vec::with_capacity(k + 1);
    for i in 0..=k {
        if 2 * i <= k {
            bounds.push(i * len / k);
        } else {
            bounds.push(len - (k - i) * len / k);
        }
    }
    bounds.windows(2).map(|p| (p[0], p[1])).collect()
}

/// Coefficients of the three-part no-reference water metric. The defaults
/// are the published linear-model weights; `alpha_trim` is the fraction
/// trimmed from each end of the colorfulness statistics and `block_size`
/// the nominal cell edge for the sharpness and contrast terms.
#[derive(Debug, Clone, PartialEq)]
pub struct UiqmConfig {
    pub colorfulness_weight: f64,
    pub sharpness_weight: f64,
    pub contrast_weight: f64,
    pub alpha_trim: f64,
    pub block_size: usize,
}

impl Default for UiqmConfig {
    fn default() -> Self {
        Self {
            colorfulness_weight: 0.0282,
            sharpness_weight: 0.2953,
            contrast_weight: 3.5753,
            alpha_trim: 0.1,
            block_size: 10,
        }
    }
}

fn alpha_trimmed_stats(values: &mut [f64], alpha: f64) -> (f64, f64) {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    let t = (alpha * n as f64).floor() as usize;
    let kept = &values[t..n - t];
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    // Spread stays over the full population, relative to the trimmed mean.
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var)
}

fn colorfulness(img: &Image, alpha: f64) -> f64 {
    let n = img.pixel_count();
    let mut rg = Vec::with_capacity(n);
    let mut yb = Vec::with_capacity(n);
    for px in img.data().chunks_exact(CHANNELS) {
        let (r, g, b) = (px[0] * 255.0, px[1] * 255.0, px[2] * 255.0);
        rg.push(r - g);
        yb.push((r + g) / 2.0 - b);
    }
    let (mu_rg, var_rg) = alpha_trimmed_stats(&mut rg, alpha);
    let (mu_yb, var_yb) = alpha_trimmed_stats(&mut yb, alpha);
    -0.0268 * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt() + 0.1586 * (var_rg + var_yb).sqrt()
}

fn log_contrast_over_blocks(
    plane: &[f64],
    w: usize,
    h: usize,
    block: usize,
    mut per_block: impl FnMut(f64, f64) -> f64,
) -> f64 {
    let cols = symmetric_partition(w, block);
    let rows = symmetric_partition(h, block);
    let mut sum = 0.0;
    for &(y0, y1) in &rows {
        for &(x0, x1) in &cols {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for y in y0..y1 {
                for x in x0..x1 {
                    let v = plane[y * w + x];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            sum += per_block(lo, hi);
        }
    }
    sum / (rows.len() * cols.len()) as f64
}

fn sharpness(img: &Image, block: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];
    let mut total = 0.0;
    for c in 0..CHANNELS {
        let plane: Vec<f64> = img.data()[c..].iter().step_by(CHANNELS).copied().collect();
        let edges = sobel_magnitude(&plane, w, h);
        let edge_map: Vec<f64> = edges.iter().zip(&plane).map(|(e, p)| e * p).collect();
        // Enhancement-measure form: 2 * mean over blocks of ln(max/min),
        // skipping blocks that touch zero.
        let eme = 2.0
            * log_contrast_over_blocks(&edge_map, w, h, block, |lo, hi| {
                if lo > 0.0 && hi > lo {
                    (hi / lo).ln()
                } else {
                    0.0
                }
            });
        total += LUMA_WEIGHTS[c] * eme;
    }
    total
}

fn contrast(img: &Image, block: usize) -> f64 {
    // Michelson contrast of the luminance plane in entropy form; flat
    // blocks contribute 0, so any constant image scores exactly 0.
    let plane = luma_plane(img);
    log_contrast_over_blocks(&plane, img.width(), img.height(), block, |lo, hi| {
        if hi > lo && hi + lo > 0.0 {
            let m = (hi - lo) / (hi + lo);
            -(m * m.ln())
        } else {
            0.0
        }
    })
}

/// Three-part no-reference quality score for water-degraded images:
/// colorfulness + sharpness + contrast, each weighted per the config.
pub fn uiqm(img: &Image, cfg: &UiqmConfig) -> Result<f64> {
    if !(0.0..0.5).contains(&cfg.alpha_trim) {
        return Err(Error::InvalidInput(format!(
            "alpha_trim must lie in [0, 0.5), got {}",
            cfg.alpha_trim
        )));
    }
    if cfg.block_size == 0 {
        return Err(Error::InvalidInput("block_size must be nonzero".into()));
    }
    Ok(cfg.colorfulness_weight * colorfulness(img, cfg.alpha_trim)
        + cfg.sharpness_weight * sharpness(img, cfg.block_size)
        + cfg.contrast_weight * contrast(img, cfg.block_size))
}

/// Coefficients of the chroma/contrast/saturation metric. Defaults are the
/// published weights; `contrast_quantile` sets the tail fraction of the
/// luminance contrast term.
#[derive(Debug, Clone, PartialEq)]
pub struct UciqeConfig {
    pub chroma_weight: f64,
    pub contrast_weight: f64,
    pub saturation_weight: f64,
    pub contrast_quantile: f64,
}

impl Default for UciqeConfig {
    fn default() -> Self {
        Self {
            chroma_weight: 0.4680,
            contrast_weight: 0.2745,
            saturation_weight: 0.2576,
            contrast_quantile: 0.01,
        }
    }
}

/// Chroma spread, luminance tail contrast, and mean saturation in Lab space,
/// linearly combined per the config. L and chroma are used on a 0-1 scale.
pub fn uciqe(img: &Image, cfg: &UciqeConfig) -> Result<f64> {
    if !(0.0..=0.5).contains(&cfg.contrast_quantile) || cfg.contrast_quantile == 0.0 {
        return Err(Error::InvalidInput(format!(
            "contrast_quantile must lie in (0, 0.5], got {}",
            cfg.contrast_quantile
        )));
    }
    let lab = rgb_to_lab(img);
    let n = img.pixel_count();
    let mut l_norm = Vec::with_capacity(n);
    let mut chroma = Vec::with_capacity(n);
    let mut sat_sum = 0.0;
    for px in lab.data().chunks_exact(CHANNELS) {
        let (l, a, b) = (px[0], px[1], px[2]);
        let c = (a * a + b * b).sqrt();
        l_norm.push(l / 100.0);
        chroma.push(c / 100.0);
        if l > 1e-9 {
            sat_sum += c / l;
        }
    }
    let mean_sat = sat_sum / n as f64;

    let chroma_mean = chroma.iter().sum::<f64>() / n as f64;
    let chroma_var = chroma
        .iter()
        .map(|c| (c - chroma_mean) * (c - chroma_mean))
        .sum::<f64>()
        / n as f64;

    l_norm.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let q = ((cfg.contrast_quantile * n as f64).ceil() as usize).clamp(1, n);
    let bottom: f64 = l_norm[..q].iter().sum::<f64>() / q as f64;
    let top: f64 = l_norm[n - q..].iter().sum::<f64>() / q as f64;

    Ok(cfg.chroma_weight * chroma_var.sqrt()
        + cfg.contrast_weight * (top - bottom)
        + cfg.saturation_weight * mean_sat)
}

/// L1 distance weighted by per-pixel proximity (1 = near camera, trusted),
/// plus the structural term 1 - ssim. The proximity map must be a relative
/// depth-shaped map already converted by the caller (proximity = 1 - depth).
pub fn weighted_reference_loss(
    enhanced: &Image,
    reference: &Image,
    proximity: &DepthMap,
) -> Result<f64> {
    require_same_shape(enhanced, reference)?;
    if proximity.kind() != DepthKind::Relative {
        return Err(Error::InvalidInput(
            "proximity weights must be a relative-kind map in [0, 1]".into(),
        ));
    }
    if !proximity.same_shape_as_image(enhanced) {
        return Err(Error::DimensionMismatch(
            "proximity map and image shapes differ".into(),
        ));
    }
    let mut sum = 0.0;
    for (i, (e, r)) in enhanced.data().iter().zip(reference.data()).enumerate() {
        sum += proximity.values()[i / CHANNELS] * (e - r).abs();
    }
    let weighted_l1 = sum / enhanced.data().len() as f64;
    Ok(weighted_l1 + (1.0 - ssim(enhanced, reference)?))
}

/// Structural + gradient agreement between an observation and the re-degraded
/// prediction: (1 - ssim) plus the mean absolute difference of Sobel
/// magnitudes on luma.
pub fn degradation_consistency_loss(raw: &Image, predicted: &Image) -> Result<f64> {
    require_same_shape(raw, predicted)?;
    let (w, h) = (raw.width(), raw.height());
    let ga = sobel_magnitude(&luma_plane(raw), w, h);
    let gb = sobel_magnitude(&luma_plane(predicted), w, h);
    let grad: f64 = ga
        .iter()
        .zip(&gb)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / ga.len() as f64;
    Ok((1.0 - ssim(raw, predicted)?) + grad)
}

/// Mixing weights of the full objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedWeights {
    pub reference: f64,
    pub consistency: f64,
    pub color: f64,
}

impl Default for CombinedWeights {
    fn default() -> Self {
        Self { reference: 0.6, consistency: 0.2, color: 0.2 }
    }
}

pub fn combined_loss(
    reference_loss: f64,
    consistency_loss: f64,
    color_score: f64,
    weights: &CombinedWeights,
) -> f64 {
    weights.reference * reference_loss
        + weights.consistency * consistency_loss
        + weights.color * color_score
}

/// One row of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub uiqm: f64,
    pub uciqe: f64,
}
