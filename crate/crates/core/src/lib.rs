//! Physical model of underwater image formation, with tools built around
//! it: synthesis of degraded images from clean RGB-D input, blind
//! estimation of the degradation parameters from a single degraded image,
//! restoration by model inversion, and quality metrics for judging the
//! results.
//!
//! The formation model treats each pixel as a direct component, the scene
//! radiance attenuated along the line of sight, plus a backscatter
//! component that saturates toward the background light with distance.
//! Attenuation and backscatter use separate per-channel coefficient
//! triples drawn from a ten-entry water-type table, and the background
//! light is tied across channels through those coefficients, so a single
//! green-channel estimate pins down all three.
//!
//! Modules:
//! - [`image`]: RGB buffers in [0, 1], depth maps, clip masks.
//! - [`water`]: the editable water-type coefficient table.
//! - [`imaging`]: forward degradation and its inverse.
//! - [`backlight`]: background-light pre-estimation from image statistics.
//! - [`synthesis`]: seeded batch generation of degraded samples.
//! - [`colorstats`]: Lab statistics model scoring restoration naturalness.
//! - [`estimator`]: exhaustive parameter search plus local refinement.
//! - [`metrics`]: PSNR, SSIM, UIQM, UCIQE, and model-consistency losses.
//! - [`io`]: PNG/PPM images, PGM/PFM depth maps, JSON artifacts.

pub mod backlight;
pub mod colorstats;
pub mod error;
pub mod estimator;
pub mod image;
pub mod imaging;
pub mod io;
pub mod metrics;
pub mod synthesis;
pub mod water;

pub use error::{Error, Result};
pub use image::{ClipMask, DepthKind, DepthMap, Image, BLUE, CHANNELS, GREEN, RED};
pub use imaging::{
    absolutize_depth, degrade, restore, DegradationParams, TransmissionMaps, TRANSMISSION_FLOOR,
};
