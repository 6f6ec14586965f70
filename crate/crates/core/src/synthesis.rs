//! Physically consistent degradation synthesis.
//!
//! One sample couples a clean image with a relative depth map, draws an
//! ordered pair of water types (attenuation donor, backscatter donor),
//! anchors the background light to the green-channel statistics of a real
//! underwater image, derives red/blue background light through the
//! coefficient ratios, absolutizes depth, and runs the forward model. Every
//! random choice derives from an explicit seed, and batch sample `i` uses a
//! seed derived from (master seed, i) alone, so any sample can be replayed
//! in isolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backlight::{channel_stats, coupled_backlight, pre_backlight};
use crate::error::{Error, Result};
use crate::image::{DepthKind, DepthMap, Image};
use crate::imaging::{absolutize_depth, degrade, DegradationParams};
use crate::water::{sample_type_pair_indices, WaterTypeTable};

/// One synthesized degradation with its full ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub degraded: Image,
    pub params: DegradationParams,
    pub attenuation_type: String,
    pub scattering_type: String,
    /// Ratio-coupled background light before clamping into [0, 1];
    /// `b_inf_raw[c] * beta_d[c] / beta_b[c]` is channel-independent.
    pub b_inf_raw: [f64; 3],
    pub b_inf_clamped: [bool; 3],
    /// Fraction of pixels the forward model clamped.
    pub clip_fraction: f64,
    pub seed: u64,
    /// Which backlight-corpus image anchored the green channel (0 for
    /// single-sample synthesis).
    pub backlight_index: usize,
}

/// Splitmix-style mixing of a master seed and a sample position. Position
/// `i` always yields the same seed regardless of corpus contents.
pub fn derive_seed(master: u64, index: usize) -> u64 {
    let mut z = master ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn validate_bounds(scale_bounds: (f64, f64)) -> Result<()> {
    let (lo, hi) = scale_bounds;
    if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || lo >= hi {
        return Err(Error::InvalidInput(format!(
            "scale bounds need 0 <= d_min < d_max, got ({lo}, {hi})"
        )));
    }
    Ok(())
}

/// Synthesizes one degraded image. The water-type pair comes from `seed`,
/// the green background light from `backlight_source`, and the depth scale
/// from `scale_bounds`.
pub fn synthesize_one(
    clean: &Image,
    depth_rel: &DepthMap,
    table: &WaterTypeTable,
    backlight_source: &Image,
    scale_bounds: (f64, f64),
    seed: u64,
) -> Result<SyntheticSample> {
    if depth_rel.kind() != DepthKind::Relative {
        return Err(Error::InvalidInput(
            "synthesis expects a relative depth map".into(),
        ));
    }
    if !depth_rel.same_shape_as_image(clean) {
        return Err(Error::DimensionMismatch(
            "clean image and depth map shapes differ".into(),
        ));
    }
    validate_bounds(scale_bounds)?;

    let (ai, si) = sample_type_pair_indices(table, seed);
    let attenuation = table.get(ai);
    let scattering = table.get(si);

    let b_green = pre_backlight(&channel_stats(backlight_source)).value[1];
    let coupled = coupled_backlight(b_green, &attenuation.beta_d, &scattering.beta_b);

    let params = DegradationParams {
        beta_d: attenuation.beta_d,
        beta_b: scattering.beta_b,
        b_inf: coupled.value,
        depth_scale: scale_bounds,
    };
    let depth_abs = absolutize_depth(depth_rel, scale_bounds.0, scale_bounds.1)?;
    let (degraded, mask) = degrade(clean, &depth_abs, &params)?;

    Ok(SyntheticSample {
        degraded,
        params,
        attenuation_type: attenuation.name.clone(),
        scattering_type: scattering.name.clone(),
        b_inf_raw: coupled.raw,
        b_inf_clamped: coupled.clamped,
        clip_fraction: mask.pixel_fraction(),
        seed,
        backlight_index: 0,
    })
}

/// Synthesizes one sample per corpus entry. Sample `i` uses
/// `derive_seed(master_seed, i)` for its water-type pair and a salted
/// variant to pick its backlight image, so outputs are a deterministic
/// function of (entry, position, master seed).
pub fn synthesize_batch(
    corpus: &[(Image, DepthMap)],
    table: &WaterTypeTable,
    backlight_corpus: &[Image],
    scale_bounds: (f64, f64),
    master_seed: u64,
) -> Result<Vec<SyntheticSample>> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty synthesis corpus".into()));
    }
    if backlight_corpus.is_empty() {
        return Err(Error::InvalidInput("empty backlight corpus".into()));
    }
    corpus
        .par_iter()
        .enumerate()
        .map(|(i, (clean, depth))| {
            let seed = derive_seed(master_seed, i);
            let backlight_index = pick_backlight_index(seed, backlight_corpus.len());
            let mut sample = synthesize_one(
                clean,
                depth,
                table,
                &backlight_corpus[backlight_index],
                scale_bounds,
                seed,
            )?;
            sample.backlight_index = backlight_index;
            Ok(sample)
        })
        .collect()
}

/// Backlight selection draws from a salted stream so it cannot correlate
/// with the water-type draws made from the same sample seed.
pub fn pick_backlight_index(sample_seed: u64, corpus_len: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed ^ 0xB1_ACD1_D0_u64);
    rng.gen_range(0..corpus_len)
}

/// Ground-truth record for one batch entry, as persisted in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub clean_path: String,
    pub depth_path: String,
    pub degraded_path: String,
    pub seed: u64,
    pub attenuation_type: String,
    pub scattering_type: String,
    pub params: DegradationParams,
    pub b_inf_raw: [f64; 3],
    pub b_inf_clamped: [bool; 3],
    pub clip_fraction: f64,
    pub backlight_index: usize,
}

/// Batch-level ground truth; serializes to one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub master_seed: u64,
    pub scale_bounds: (f64, f64),
    pub entries: Vec<ManifestEntry>,
}

impl BatchManifest {
    /// Assembles the manifest from synthesized samples and the file names
    /// the caller wrote them under.
    pub fn from_samples(
        master_seed: u64,
        scale_bounds: (f64, f64),
        samples: &[SyntheticSample],
        paths: &[(String, String, String)],
    ) -> Result<Self> {
        if samples.len() != paths.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples but {} path triples",
                samples.len(),
                paths.len()
            )));
        }
        let entries = samples
            .iter()
            .zip(paths)
            .enumerate()
            .map(|(index, (s, (clean, depth, degraded)))| ManifestEntry {
                index,
                clean_path: clean.clone(),
                depth_path: depth.clone(),
                degraded_path: degraded.clone(),
                seed: s.seed,
                attenuation_type: s.attenuation_type.clone(),
                scattering_type: s.scattering_type.clone(),
                params: s.params.clone(),
                b_inf_raw: s.b_inf_raw,
                b_inf_clamped: s.b_inf_clamped,
                clip_fraction: s.clip_fraction,
                backlight_index: s.backlight_index,
            })
            .collect();
        Ok(Self { master_seed, scale_bounds, entries })
    }
}
