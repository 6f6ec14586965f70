//! Deterministic fixture generators shared by the integration suites. The
//! degradation-recovery fixtures mirror the calibration harness in the core
//! crate (different seeds there, so calibration stays held out).

#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uwphys::image::{DepthMap, Image};
use uwphys::imaging::{absolutize_depth, restore};
use uwphys::metrics::psnr;
use uwphys::synthesis::SyntheticSample;

/// Clean test image: layered sinusoid texture with per-image global
/// statistics held in a tight band, the curated-reference flavor that makes
/// a fitted color model an informative prior.
pub fn clean_image(seed: u64, size: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [
        rng.gen_range(0.46..0.54),
        rng.gen_range(0.46..0.54),
        rng.gen_range(0.46..0.54),
    ];
    let layers: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            (
                rng.gen_range(2.0..9.0),
                rng.gen_range(2.0..9.0),
                rng.gen_range(0.0..6.28),
                rng.gen_range(0.08..0.14),
                [
                    rng.gen_range(0.5..1.0),
                    rng.gen_range(0.5..1.0),
                    rng.gen_range(0.5..1.0),
                ],
            )
        })
        .collect();
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let u = x as f64 / size as f64;
            let v = y as f64 / size as f64;
            for c in 0..3 {
                let mut s = base[c];
                for (fx, fy, ph, amp, chw) in &layers {
                    s += amp * chw[c] * (fx * u * 6.28 + ph).sin() * (fy * v * 6.28 + ph).cos();
                }
                s += rng.gen_range(-0.02..0.02);
                data.push(s.clamp(0.02, 0.98));
            }
        }
    }
    Image::new(size, size, data).unwrap()
}

/// Relative depth from four scene families: horizontal ramp, vertical ramp,
/// radial bowl, and a sinusoid blend, each optionally flipped.
pub fn scene_depth(seed: u64, size: usize) -> DepthMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDE47);
    let family = seed % 4;
    let (w, h) = (size, size);
    let mut vals = Vec::with_capacity(w * h);
    let (cx, cy) = (rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
    let (fx, fy) = (rng.gen_range(1.0..3.0), rng.gen_range(1.0..3.0));
    let flip = rng.gen_bool(0.5);
    for y in 0..h {
        for x in 0..w {
            let u = x as f64 / (w - 1) as f64;
            let v = y as f64 / (h - 1) as f64;
            let raw = match family {
                0 => u,
                1 => v,
                2 => ((u - cx).powi(2) + (v - cy).powi(2)).sqrt(),
                _ => 0.5 + 0.25 * (fx * u * 6.28).sin() + 0.25 * (fy * v * 6.28).cos(),
            };
            vals.push(if flip { -raw } else { raw });
        }
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm = vals.into_iter().map(|v| (v - lo) / (hi - lo)).collect();
    DepthMap::relative(w, h, norm).unwrap()
}

/// Water-colored field feeding the background-light pre-estimate: dim red,
/// strong green/blue, mild texture and a vertical gradient.
pub fn backlight_image(seed: u64, size: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBAC1);
    let r = rng.gen_range(0.08..0.30);
    let g = rng.gen_range(0.52..0.68);
    let b = rng.gen_range(0.42..0.66);
    let tex = rng.gen_range(0.01..0.06);
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        let grad = 0.05 * (y as f64 / size as f64 - 0.5);
        for _x in 0..size {
            for base in [r, g, b] {
                let s: f64 = base + grad + rng.gen_range(-tex..tex);
                data.push(s.clamp(0.0, 1.0));
            }
        }
    }
    Image::new(size, size, data).unwrap()
}

/// Uniform noise in [0, 1], the adversarial texture for metric properties.
pub fn noise_image(seed: u64, w: usize, h: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..w * h * 3).map(|_| rng.gen_range(0.0..1.0)).collect();
    Image::new(w, h, data).unwrap()
}

/// A sample's recorded parameters are only a usable label when the
/// degradation is invertible and identifiable: synthesis must not have
/// clamped away content, restoring with the exact parameters must reproduce
/// the clean input, and the background light must be visible in the
/// degraded image (clear-water scattering over a short path leaves the
/// backlight label without any imprint to recover). A sample failing any
/// check carries a label that even an oracle could not verify from the
/// degraded image, so it cannot measure estimator quality.
pub fn label_survives(clean: &Image, depth: &DepthMap, sample: &SyntheticSample) -> bool {
    if sample.clip_fraction > 0.02 {
        return false;
    }
    let depth_abs = absolutize_depth(
        depth,
        sample.params.depth_scale.0,
        sample.params.depth_scale.1,
    )
    .unwrap();
    let beta_b_g = sample.params.beta_b[1];
    let visibility = depth_abs
        .values()
        .iter()
        .map(|d| 1.0 - (-beta_b_g * d).exp())
        .sum::<f64>()
        / depth_abs.values().len() as f64;
    if visibility < 0.45 {
        return false;
    }
    let (restored, _mask) = restore(&sample.degraded, &depth_abs, &sample.params).unwrap();
    psnr(&restored, clean).unwrap() >= 30.0
}

/// Writes an 8-bit binary PGM depth file.
pub fn write_pgm8(path: &Path, w: usize, h: usize, values: &[u8]) {
    assert_eq!(values.len(), w * h);
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend_from_slice(values);
    std::fs::write(path, bytes).unwrap();
}

/// Writes a 16-bit big-endian binary PGM depth file.
pub fn write_pgm16(path: &Path, w: usize, h: usize, values: &[u16]) {
    assert_eq!(values.len(), w * h);
    let mut bytes = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for v in values {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    std::fs::write(path, bytes).unwrap();
}

/// Quantizes a relative depth map into 16-bit PGM samples.
pub fn depth_to_pgm16(depth: &DepthMap) -> Vec<u16> {
    depth
        .values()
        .iter()
        .map(|v| (v * 65535.0).round().clamp(0.0, 65535.0) as u16)
        .collect()
}
