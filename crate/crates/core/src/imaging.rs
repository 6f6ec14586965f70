//! Underwater image formation and its inversion.
//!
//! Each pixel and channel of a degraded observation is modeled as
//!
//! ```text
//! I = J * exp(-beta_d * d) + b_inf * (1 - exp(-beta_b * d))
//! ```
//!
//! where `J` is the clean radiance, `d` the scene depth in metres, `beta_d`
//! the direct-signal attenuation, `beta_b` the backscatter growth rate, and
//! `b_inf` the waterbody background light. Restoration inverts the same
//! expression, guarding the division with a transmission floor. Both
//! directions clamp results into [0, 1] and report every lossy sample
//! (clamped value or floored divisor) in a [`ClipMask`]; on unflagged pixels
//! the two maps invert each other to floating-point accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ClipMask, DepthKind, DepthMap, Image, CHANNELS};

/// Smallest direct transmission the restoration divides by. Restored pixels
/// whose true transmission fell below this are flagged: their signal is gone.
pub const TRANSMISSION_FLOOR: f64 = 0.01;

/// Full parameter set of the formation model. Channel order is R, G, B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    /// Direct-signal attenuation per channel, 1/m.
    pub beta_d: [f64; 3],
    /// Backscatter growth rate per channel, 1/m.
    pub beta_b: [f64; 3],
    /// Background light per channel, [0, 1].
    pub b_inf: [f64; 3],
    /// (d_min, d_max) metres used to absolutize relative depth.
    pub depth_scale: (f64, f64),
}

impl DegradationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, triple) in [("beta_d", &self.beta_d), ("beta_b", &self.beta_b)] {
            if triple.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and nonnegative, got {triple:?}"
                )));
            }
        }
        if self.b_inf.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidInput(format!(
                "b_inf must lie in [0, 1], got {:?}",
                self.b_inf
            )));
        }
        validate_scale(self.depth_scale.0, self.depth_scale.1)
    }
}

fn validate_scale(d_min: f64, d_max: f64) -> Result<()> {
    if !d_min.is_finite() || !d_max.is_finite() || d_min < 0.0 || d_min >= d_max {
        return Err(Error::InvalidInput(format!(
            "depth scale needs 0 <= d_min < d_max, got ({d_min}, {d_max})"
        )));
    }
    Ok(())
}

/// Per-pixel, per-channel factors of the formation model: `direct` holds
/// exp(-beta_d * d) and `backscatter_complement` holds 1 - exp(-beta_b * d).
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMaps {
    width: usize,
    height: usize,
    pub direct: Vec<f64>,
    pub backscatter_complement: Vec<f64>,
}

impl TransmissionMaps {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Maps relative depth to metres via d_min + v * (d_max - d_min).
pub fn absolutize_depth(rel: &DepthMap, d_min: f64, d_max: f64) -> Result<DepthMap> {
    if rel.kind() != DepthKind::Relative {
        return Err(Error::InvalidInput(
            "absolutize_depth expects a relative depth map".into(),
        ));
    }
    validate_scale(d_min, d_max)?;
    let span = d_max - d_min;
    let values = rel.values().iter().map(|v| d_min + v * span).collect();
    DepthMap::absolute(rel.width(), rel.height(), values)
}

fn require_absolute(depth: &DepthMap) -> Result<()> {
    if depth.kind() != DepthKind::AbsoluteMeters {
        return Err(Error::InvalidInput(
            "formation model needs absolute depth in metres".into(),
        ));
    }
    Ok(())
}

/// Evaluates both exponential factors for every pixel and channel.
pub fn compute_transmissions(
    depth: &DepthMap,
    params: &DegradationParams,
) -> Result<TransmissionMaps> {
    require_absolute(depth)?;
    params.validate()?;
    let n = depth.width() * depth.height();
    let mut direct = vec![0.0; n * CHANNELS];
    let mut backscatter_complement = vec![0.0; n * CHANNELS];
    let depths = depth.values();
    direct
        .par_chunks_mut(CHANNELS)
        .zip(backscatter_complement.par_chunks_mut(CHANNELS))
        .zip(depths.par_iter())
        .for_each(|((t, s), &d)| {
            for c in 0..CHANNELS {
                t[c] = (-params.beta_d[c] * d).exp();
                s[c] = 1.0 - (-params.beta_b[c] * d).exp();
            }
        });
    Ok(TransmissionMaps {
        width: depth.width(),
        height: depth.height(),
        direct,
        backscatter_complement,
    })
}

/// Applies the formation model to a clean image.
pub fn degrade(
    clean: &Image,
    depth: &DepthMap,
    params: &DegradationParams,
) -> Result<(Image, ClipMask)> {
    if !depth.same_shape_as_image(clean) {
        return Err(Error::DimensionMismatch(
            "clean image and depth map shapes differ".into(),
        ));
    }
    let maps = compute_transmissions(depth, params)?;
    Ok(degrade_with_parts(
        clean,
        &maps.direct,
        &maps.backscatter_complement,
        &params.b_inf,
    ))
}

/// Inverts the formation model, flagging clamped values and floored divisors.
pub fn restore(
    degraded: &Image,
    depth: &DepthMap,
    params: &DegradationParams,
) -> Result<(Image, ClipMask)> {
    if !depth.same_shape_as_image(degraded) {
        return Err(Error::DimensionMismatch(
            "degraded image and depth map shapes differ".into(),
        ));
    }
    let maps = compute_transmissions(depth, params)?;
    let (out, mask, _clamps) = restore_with_parts(
        degraded,
        &maps.direct,
        &maps.backscatter_complement,
        &params.b_inf,
    );
    Ok((out, mask))
}

/// Forward model from precomputed factors. Buffers must be interleaved RGB of
/// the image's shape.
pub(crate) fn degrade_with_parts(
    clean: &Image,
    direct: &[f64],
    backscatter_complement: &[f64],
    b_inf: &[f64; 3],
) -> (Image, ClipMask) {
    let mut out = vec![0.0; clean.data().len()];
    let mut flags = vec![false; clean.data().len()];
    out.par_chunks_mut(CHANNELS)
        .zip(flags.par_chunks_mut(CHANNELS))
        .zip(
            clean
                .data()
                .par_chunks(CHANNELS)
                .zip(direct.par_chunks(CHANNELS))
                .zip(backscatter_complement.par_chunks(CHANNELS)),
        )
        .for_each(|((o, f), ((j, t), s))| {
            for c in 0..CHANNELS {
                let v = j[c] * t[c] + b_inf[c] * s[c];
                (o[c], f[c]) = clamp_unit(v);
            }
        });
    (
        Image::from_clamped(clean.width(), clean.height(), out),
        ClipMask::from_flags(clean.width(), clean.height(), flags),
    )
}

/// Inverse model from precomputed factors; see [`degrade_with_parts`].
///
/// The full mask flags both range clamps and floored transmissions; the
/// separate clamp mask flags range clamps alone. Floored pixels with an
/// accurate background light stay in range (the direct term shrinks below
/// the floor before division), so the clamp mask isolates genuinely
/// inconsistent parameters and drives the estimator's clip penalty, while
/// the full mask tells round-trip checks which pixels cannot invert.
pub(crate) fn restore_with_parts(
    degraded: &Image,
    direct: &[f64],
    backscatter_complement: &[f64],
    b_inf: &[f64; 3],
) -> (Image, ClipMask, ClipMask) {
    let mut out = vec![0.0; degraded.data().len()];
    let mut flags = vec![false; degraded.data().len()];
    let mut clamp_flags = vec![false; degraded.data().len()];
    out.par_chunks_mut(CHANNELS)
        .zip(flags.par_chunks_mut(CHANNELS))
        .zip(clamp_flags.par_chunks_mut(CHANNELS))
        .zip(
            degraded
                .data()
                .par_chunks(CHANNELS)
                .zip(direct.par_chunks(CHANNELS))
                .zip(backscatter_complement.par_chunks(CHANNELS)),
        )
        .for_each(|(((o, f), cf), ((i, t), s))| {
            for c in 0..CHANNELS {
                let floored = t[c] < TRANSMISSION_FLOOR;
                let v = (i[c] - b_inf[c] * s[c]) / t[c].max(TRANSMISSION_FLOOR);
                let (clamped, hit) = clamp_unit(v);
                o[c] = clamped;
                f[c] = hit || floored;
                cf[c] = hit;
            }
        });
    (
        Image::from_clamped(degraded.width(), degraded.height(), out),
        ClipMask::from_flags(degraded.width(), degraded.height(), flags),
        ClipMask::from_flags(degraded.width(), degraded.height(), clamp_flags),
    )
}

fn clamp_unit(v: f64) -> (f64, bool) {
    if v < 0.0 {
        (0.0, true)
    } else if v > 1.0 {
        (1.0, true)
    } else {
        (v, false)
    }
}
