//! Background-light estimation from image statistics.
//!
//! The red-channel background light follows a logistic curve of the channel
//! median; green and blue follow an affine form in channel mean and spread.
//! Both work on the 0-255 scale of the original statistical fits and are
//! coarse by design: they seed later optimization rather than decide it.
//! `coupled_backlight` then propagates a green estimate to red and blue
//! through the attenuation/backscatter ratios of a candidate water type, so
//! that b_inf * beta_d / beta_b is a channel-independent constant.

use serde::{Deserialize, Serialize};

use crate::image::{Image, CHANNELS};

/// Per-channel order statistics on the 0-255 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation; exactly 0 iff the channel is constant.
    pub stdev: f64,
}

/// Medians, means, and spreads of the three channels, scaled to 0-255.
pub fn channel_stats(img: &Image) -> [ChannelStats; 3] {
    let mut out = [ChannelStats { median: 0.0, mean: 0.0, stdev: 0.0 }; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut values: Vec<f64> = img.data()[c..]
            .iter()
            .step_by(CHANNELS)
            .map(|v| v * 255.0)
            .collect();
        let first = values[0];
        if values.iter().all(|v| *v == first) {
            // Short-circuit keeps the spread exactly zero for constant
            // channels instead of accumulating rounding dust.
            *slot = ChannelStats { median: first, mean: first, stdev: 0.0 };
            continue;
        }
        values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            (values[n / 2 - 1] + values[n / 2]) / 2.0
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        *slot = ChannelStats { median, mean, stdev: var.sqrt() };
    }
    out
}

/// Red-channel background light from the channel median, 0-255 in and out.
pub fn red_channel_backlight(median: f64) -> f64 {
    140.0 / (1.0 + 14.4 * (-0.034 * median).exp())
}

/// Green/blue background light from channel mean and spread, 0-255 scale.
/// May go negative on dark images; callers clamp.
pub fn mean_std_backlight(mean: f64, stdev: f64) -> f64 {
    1.13 * mean + 1.11 * stdev - 25.6
}

/// Normalized pre-estimate with flags for channels whose raw affine value
/// was negative before clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreBacklight {
    /// (R, G, B) in [0, 1].
    pub value: [f64; 3],
    pub clamped_negative: [bool; 3],
}

/// Statistical background-light pre-estimate for all three channels.
pub fn pre_backlight(stats: &[ChannelStats; 3]) -> PreBacklight {
    let raw = [
        red_channel_backlight(stats[0].median),
        mean_std_backlight(stats[1].mean, stats[1].stdev),
        mean_std_backlight(stats[2].mean, stats[2].stdev),
    ];
    let mut value = [0.0; 3];
    let mut clamped_negative = [false; 3];
    for c in 0..3 {
        let normalized = raw[c] / 255.0;
        clamped_negative[c] = normalized < 0.0;
        value[c] = normalized.clamp(0.0, 1.0);
    }
    PreBacklight { value, clamped_negative }
}

/// Green estimate propagated to red and blue through a water type's
/// coefficient ratios, with the pre-clamp values preserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledBacklight {
    /// Values clamped into [0, 1], the ones the formation model uses.
    pub value: [f64; 3],
    /// Ratio-coupled values before clamping; `raw[1]` equals the input.
    pub raw: [f64; 3],
    pub clamped: [bool; 3],
}

/// Derives (R, G, B) background light from a green value in [0, 1]:
/// the background light scales inversely with attenuation and directly
/// with backscatter, so b_inf_c * beta_d_c / beta_b_c is constant across
/// channels before clamping.
pub fn coupled_backlight(b_inf_green: f64, beta_d: &[f64; 3], beta_b: &[f64; 3]) -> CoupledBacklight {
    let g = b_inf_green;
    let raw = [
        (beta_d[1] * beta_b[0]) / (beta_d[0] * beta_b[1]) * g,
        g,
        (beta_d[1] * beta_b[2]) / (beta_d[2] * beta_b[1]) * g,
    ];
    let mut value = [0.0; 3];
    let mut clamped = [false; 3];
    for c in 0..3 {
        value[c] = raw[c].clamp(0.0, 1.0);
        clamped[c] = value[c] != raw[c];
    }
    CoupledBacklight { value, raw, clamped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_pixel_stats_match_hand_computation() {
        // Channel {0, 1.0} scales to {0, 255}: median and mean 127.5,
        // population spread 127.5.
        let img = Image::new(2, 1, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        for s in channel_stats(&img) {
            assert_eq!(s.median, 127.5);
            assert_eq!(s.mean, 127.5);
            assert_eq!(s.stdev, 127.5);
        }
    }

    #[test]
    fn constant_channel_has_exactly_zero_spread() {
        // 0.1 * 255 does not sum exactly in binary; the constant-channel
        // short-circuit must still report spread 0.
        let img = Image::constant(7, 3, [0.1, 0.5, 0.9]).unwrap();
        for s in channel_stats(&img) {
            assert_eq!(s.stdev, 0.0);
            assert_eq!(s.mean, s.median);
        }
    }

    #[test]
    fn median_of_odd_count_is_middle_value() {
        let img = Image::new(
            3,
            1,
            vec![0.0, 0.2, 0.4, 1.0, 0.6, 0.8, 0.4, 0.4, 0.6],
        )
        .unwrap();
        let s = channel_stats(&img);
        assert_eq!(s[0].median, 0.4 * 255.0);
        assert!(s[0].stdev > 0.0);
    }

    #[test]
    fn red_backlight_matches_frozen_curve_points() {
        // Logistic curve evaluated independently at three medians.
        assert!((red_channel_backlight(0.0) - 9.09090909090909).abs() < 1e-3);
        assert!((red_channel_backlight(128.0) - 118.09495065316186).abs() < 1e-3);
        assert!((red_channel_backlight(255.0) - 139.65478857094274).abs() < 1e-3);
    }

    #[test]
    fn mean_std_backlight_matches_affine_form() {
        assert!((mean_std_backlight(100.0, 0.0) - 87.4).abs() < 1e-6);
    }

    #[test]
    fn pre_backlight_black_image() {
        let img = Image::constant(4, 4, [0.0, 0.0, 0.0]).unwrap();
        let pre = pre_backlight(&channel_stats(&img));
        assert!((pre.value[0] - 0.035650623885918).abs() < 1e-9);
        assert_eq!(pre.value[1], 0.0);
        assert_eq!(pre.value[2], 0.0);
        assert_eq!(pre.clamped_negative, [false, true, true]);
    }

    #[test]
    fn pre_backlight_clamps_bright_images_to_one() {
        let img = Image::constant(4, 4, [1.0, 1.0, 1.0]).unwrap();
        let pre = pre_backlight(&channel_stats(&img));
        // 1.13 * 255 - 25.6 = 262.55 on the 0-255 scale.
        assert_eq!(pre.value[1], 1.0);
        assert_eq!(pre.clamped_negative[1], false);
    }

    #[test]
    fn coupled_backlight_worked_example() {
        let out = coupled_backlight(0.5, &[0.7, 0.3, 0.2], &[0.2, 0.25, 0.3]);
        assert!((out.value[0] - 0.17142857142857143).abs() < 1e-6);
        assert!((out.value[1] - 0.5).abs() < 1e-12);
        assert!((out.value[2] - 0.9).abs() < 1e-6);
        assert_eq!(out.clamped, [false, false, false]);
    }

    #[test]
    fn coupled_backlight_flags_clamped_channels() {
        let out = coupled_backlight(0.8, &[0.7, 0.3, 0.2], &[0.2, 0.25, 0.3]);
        // Blue raw value is 1.8 * 0.8 = 1.44.
        assert!(out.raw[2] > 1.0);
        assert_eq!(out.value[2], 1.0);
        assert_eq!(out.clamped, [false, false, true]);
    }

    proptest! {
        // b_inf * beta_d / beta_b is channel-independent before clamping.
        #[test]
        fn coupling_preserves_cross_channel_identity(
            g in 0.0f64..1.0,
            bd0 in 0.01f64..2.0,
            bd1 in 0.01f64..2.0,
            bd2 in 0.01f64..2.0,
            bb0 in 0.001f64..1.5,
            bb1 in 0.001f64..1.5,
            bb2 in 0.001f64..1.5,
        ) {
            prop_assume!(g > 1e-6);
            let out = coupled_backlight(g, &[bd0, bd1, bd2], &[bb0, bb1, bb2]);
            let k = |c: usize| out.raw[c] * [bd0, bd1, bd2][c] / [bb0, bb1, bb2][c];
            let kg = k(1);
            prop_assert!(((k(0) - kg) / kg).abs() < 1e-9);
            prop_assert!(((k(2) - kg) / kg).abs() < 1e-9);
        }

        #[test]
        fn pre_backlight_always_in_unit_range(
            r in 0.0f64..1.0,
            g in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let img = Image::constant(3, 3, [r, g, b]).unwrap();
            let pre = pre_backlight(&channel_stats(&img));
            for v in pre.value {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
