//! Acceptance gate: nine end-to-end criteria, one test each, every test
//! printing one `ACCEPTANCE <name>: PASS/FAIL` line (run with --nocapture to
//! see the lines for passing tests too).
//!
//! The degradation-recovery criteria (c4, c5, c7) share one lazily built
//! oracle suite of 50 synthesized samples so the expensive estimation pass
//! runs once per process.

mod common;

use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uwphys::backlight::{coupled_backlight, mean_std_backlight, red_channel_backlight};
use uwphys::colorstats::{fit_from_stat_vectors, fit_model, score_stat_vector, GaussianStat};
use uwphys::estimator::{enhance, EnhanceResult, EstimatorConfig};
use uwphys::image::{ClipMask, DepthMap, Image};
use uwphys::imaging::{degrade, restore, DegradationParams};
use uwphys::io::save_image;
use uwphys::metrics::{psnr, ssim, uciqe, uiqm, UciqeConfig, UiqmConfig, PSNR_CAP_DB};
use uwphys::synthesis::{derive_seed, synthesize_one, SyntheticSample};
use uwphys::water::WaterTypeTable;

fn criterion(name: &str, body: impl FnOnce() -> Result<(), String>) {
    match std::panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => println!("ACCEPTANCE {name}: PASS"),
        Ok(Err(msg)) => {
            println!("ACCEPTANCE {name}: FAIL ({msg})");
            panic!("{name}: {msg}");
        }
        Err(payload) => {
            println!("ACCEPTANCE {name}: FAIL (panicked)");
            std::panic::resume_unwind(payload);
        }
    }
}

fn fail(msg: String) -> Result<(), String> {
    Err(msg)
}

// ---------------------------------------------------------------- c1

#[test]
fn acceptance_c1_round_trip() {
    criterion("c1 round-trip reconstruction", || {
        let table = WaterTypeTable::default_table();
        let (bd_lo, bd_hi) = table.beta_d_range();
        let (bb_lo, bb_hi) = beta_b_range(table);
        let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
        let (n, size) = (100, 256);
        let mut secs_degrade = 0.0;
        let mut secs_restore = 0.0;
        for trial in 0..n {
            let clean = common::noise_image(10_000 + trial, size, size);
            let observed = common::noise_image(20_000 + trial, size, size);
            let depth_vals = (0..size * size)
                .map(|_| rng.gen_range(0.5..10.0))
                .collect();
            let depth = DepthMap::absolute(size, size, depth_vals).unwrap();
            let params = DegradationParams {
                beta_d: std::array::from_fn(|_| rng.gen_range(bd_lo..bd_hi)),
                beta_b: std::array::from_fn(|_| rng.gen_range(bb_lo..bb_hi)),
                b_inf: std::array::from_fn(|_| rng.gen_range(0.0..1.0)),
                depth_scale: (0.5, 10.0),
            };

            let t = Instant::now();
            let (degraded, m_deg) = degrade(&clean, &depth, &params).unwrap();
            secs_degrade += t.elapsed().as_secs_f64();
            let t = Instant::now();
            let (recovered, m_rec) = restore(&degraded, &depth, &params).unwrap();
            secs_restore += t.elapsed().as_secs_f64();
            let excluded = m_deg.union(&m_rec).unwrap();
            if let Some(err) = max_unflagged_diff(&recovered, &clean, &excluded) {
                if err > 1e-6 {
                    return fail(format!(
                        "trial {trial}: restore(degrade(x)) off by {err:.3e}"
                    ));
                }
            }

            let (reconstructed, m_res) = restore(&observed, &depth, &params).unwrap();
            let (reprojected, m_rep) = degrade(&reconstructed, &depth, &params).unwrap();
            let excluded = m_res.union(&m_rep).unwrap();
            if let Some(err) = max_unflagged_diff(&reprojected, &observed, &excluded) {
                if err > 1e-6 {
                    return fail(format!(
                        "trial {trial}: degrade(restore(y)) off by {err:.3e}"
                    ));
                }
            }
        }
        let per_degrade = secs_degrade / n as f64;
        let per_restore = secs_restore / n as f64;
        if per_degrade >= 1.0 || per_restore >= 1.0 {
            return fail(format!(
                "too slow: degrade {per_degrade:.3}s, restore {per_restore:.3}s per image"
            ));
        }
        Ok(())
    });
}

fn beta_b_range(table: &WaterTypeTable) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in table.types() {
        for v in t.beta_b {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Largest per-channel difference over channels not flagged by `excluded`;
/// None when every channel is flagged.
fn max_unflagged_diff(a: &Image, b: &Image, excluded: &ClipMask) -> Option<f64> {
    let mut max = None;
    for y in 0..a.height() {
        for x in 0..a.width() {
            for c in 0..3 {
                if !excluded.channel_flagged(x, y, c) {
                    let d = (a.get(x, y, c) - b.get(x, y, c)).abs();
                    if max.map_or(true, |m| d > m) {
                        max = Some(d);
                    }
                }
            }
        }
    }
    max
}

// ---------------------------------------------------------------- c2

#[test]
fn acceptance_c2_formula_spot_checks() {
    criterion("c2 formula spot checks", || {
        // Red-channel background light at medians 0, 128, 255 (0-255 scale).
        // Expected values come from an independent high-precision evaluation
        // of the logistic; the mid value is checked against that oracle
        // because shorter printed forms of it are truncations.
        let cases = [
            (0.0, 9.090_909_090_909_092, 1e-9),
            (128.0, 118.094_950_653_161_86, 1e-9),
            (255.0, 139.654_788_570_942_74, 1e-9),
        ];
        for (med, expected, tol) in cases {
            let got = red_channel_backlight(med);
            if (got - expected).abs() > tol {
                return fail(format!(
                    "red backlight({med}) = {got:.12}, expected {expected:.12}"
                ));
            }
        }
        if (red_channel_backlight(0.0) - 9.0909).abs() > 1e-3 {
            return fail("red backlight(0) strays from 9.0909".into());
        }
        if (red_channel_backlight(255.0) - 139.654).abs() > 1e-3 {
            return fail("red backlight(255) strays from 139.654".into());
        }

        let affine = mean_std_backlight(100.0, 0.0);
        if (affine - 87.4).abs() > 1e-6 {
            return fail(format!("affine backlight(100, 0) = {affine}, expected 87.4"));
        }

        let coupled = coupled_backlight(0.5, &[0.7, 0.3, 0.2], &[0.2, 0.25, 0.3]);
        let expected = [0.171_428_571_428_571_43, 0.5, 0.9];
        for c in 0..3 {
            if (coupled.raw[c] - expected[c]).abs() > 1e-6 {
                return fail(format!(
                    "coupling channel {c}: {} vs {}",
                    coupled.raw[c], expected[c]
                ));
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- c3

#[test]
fn acceptance_c3_coupling_identity_on_batch() {
    criterion("c3 cross-channel coupling identity", || {
        let table = WaterTypeTable::default_table();
        for i in 0..100 {
            let clean = common::clean_image(40_000 + i, 16);
            let depth = common::scene_depth(41_000 + i, 16);
            let backlight = common::backlight_image(42_000 + i, 16);
            let sample = synthesize_one(
                &clean,
                &depth,
                table,
                &backlight,
                (0.5, 8.0),
                derive_seed(0xC3, i as usize),
            )
            .unwrap();
            // The ratio B.raw[c] * beta_d[c] / beta_b[c] is channel-free.
            let ratio = |c: usize| {
                sample.b_inf_raw[c] * sample.params.beta_d[c] / sample.params.beta_b[c]
            };
            let green = ratio(1);
            for c in [0, 2] {
                let rel = ((ratio(c) - green) / green).abs();
                if rel > 1e-9 {
                    return fail(format!(
                        "sample {i}: channel {c} ratio off by {rel:.3e} relative"
                    ));
                }
            }
        }
        Ok(())
    });
}

// ------------------------------------------------- shared oracle suite

const SUITE_N: usize = 50;
const SUITE_SIZE: usize = 64;

struct OracleSuite {
    samples: Vec<SyntheticSample>,
    results: Vec<EnhanceResult>,
    build_seconds: f64,
}

/// Synthesize-then-enhance oracle: 50 samples with far planes cycling
/// through the estimator's own grid, keeping only samples whose recorded
/// parameters are invertible (see `common::label_survives`), then one
/// `enhance` run per sample with default estimator settings.
fn oracle_suite() -> &'static OracleSuite {
    static SUITE: OnceLock<OracleSuite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let t0 = Instant::now();
        let table = WaterTypeTable::default_table();
        let cfg = EstimatorConfig::default();
        let mut cleans = Vec::with_capacity(SUITE_N);
        let mut depths = Vec::with_capacity(SUITE_N);
        let mut samples = Vec::with_capacity(SUITE_N);
        for i in 0..SUITE_N {
            let d_max = cfg.d_max_grid[i % cfg.d_max_grid.len()];
            let mut j = i;
            loop {
                let clean = common::clean_image(5_000 + j as u64, SUITE_SIZE);
                let depth = common::scene_depth(6_000 + j as u64, SUITE_SIZE);
                let backlight = common::backlight_image(7_000 + j as u64, SUITE_SIZE);
                let sample = synthesize_one(
                    &clean,
                    &depth,
                    table,
                    &backlight,
                    (cfg.d_min, d_max),
                    derive_seed(9, j),
                )
                .unwrap();
                if common::label_survives(&clean, &depth, &sample) {
                    cleans.push(clean);
                    depths.push(depth);
                    samples.push(sample);
                    break;
                }
                j += SUITE_N;
            }
        }
        let model = fit_model(&cleans, "oracle suite reference set").unwrap();
        let results: Vec<EnhanceResult> = samples
            .iter()
            .zip(&depths)
            .map(|(sample, depth)| {
                enhance(&sample.degraded, depth, table, &model, &cfg).unwrap()
            })
            .collect();
        OracleSuite {
            samples,
            results,
            build_seconds: t0.elapsed().as_secs_f64(),
        }
    })
}

// ---------------------------------------------------------------- c4

#[test]
fn acceptance_c4_synthesize_then_estimate() {
    criterion("c4 synthesize-then-estimate recovery", || {
        let suite = oracle_suite();
        let mut top1 = 0;
        let mut top3 = 0;
        let mut sq = 0.0;
        for (sample, result) in suite.samples.iter().zip(&suite.results) {
            let truth = (
                sample.attenuation_type.as_str(),
                sample.scattering_type.as_str(),
            );
            let est = &result.estimate;
            let rank = est
                .ranked_alternatives
                .iter()
                .position(|c| {
                    (c.attenuation_type.as_str(), c.scattering_type.as_str()) == truth
                })
                .map(|p| p + 1);
            if rank == Some(1) {
                top1 += 1;
            }
            if rank.is_some_and(|r| r <= 3) {
                top3 += 1;
            }
            for c in 0..3 {
                let d = est.params.b_inf[c] - sample.params.b_inf[c];
                sq += d * d;
            }
        }
        let b_rms = (sq / (SUITE_N * 3) as f64).sqrt();
        let summary = format!(
            "top1 {top1}/{SUITE_N}, top3 {top3}/{SUITE_N}, B-inf RMS {b_rms:.4}, \
             suite {:.0}s",
            suite.build_seconds
        );
        println!("  c4 detail: {summary}");
        if top1 * 100 < SUITE_N * 60 {
            return fail(format!("top-1 below 60%: {summary}"));
        }
        if top3 * 100 < SUITE_N * 90 {
            return fail(format!("top-3 below 90%: {summary}"));
        }
        if b_rms > 0.08 {
            return fail(format!("B-inf RMS above 0.08: {summary}"));
        }
        if suite.build_seconds >= 600.0 {
            return fail(format!("suite too slow: {summary}"));
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- c5

#[test]
fn acceptance_c5_degradation_consistency() {
    criterion("c5 degradation consistency", || {
        let suite = oracle_suite();
        for (i, (sample, result)) in suite.samples.iter().zip(&suite.results).enumerate() {
            let excluded = result.restored_clip.union(&result.predicted_clip).unwrap();
            if let Some(err) =
                max_unflagged_diff(&result.predicted_degraded, &sample.degraded, &excluded)
            {
                if err > 1e-6 {
                    return fail(format!(
                        "sample {i}: re-degraded output off by {err:.3e}"
                    ));
                }
            }
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- c6

#[test]
fn acceptance_c6_color_model_scoring() {
    criterion("c6 color-model scoring and fit recovery", || {
        let mu = [55.0, 3.0, -6.0, 20.0, 4.5, 7.0];
        let sigma = [6.0, 1.5, 2.0, 3.0, 0.9, 1.4];
        let stats: [GaussianStat; 6] =
            std::array::from_fn(|k| GaussianStat { mu: mu[k], sigma: sigma[k] });
        let model = uwphys::colorstats::LabStatsModel {
            stats,
            source: "analytic".into(),
            image_count: 2,
        };
        let at_mu = score_stat_vector(&mu, &model);
        if at_mu.abs() > 1e-9 {
            return fail(format!("score at the means is {at_mu:.3e}, expected 0"));
        }
        for k in 0..6 {
            for (steps, expected) in [(1.0, 0.5), (2.0, 2.0)] {
                let mut v = mu;
                v[k] += steps * sigma[k];
                let got = score_stat_vector(&v, &model);
                if (got - expected).abs() > 1e-9 {
                    return fail(format!(
                        "axis {k} displaced {steps} sigma scored {got}, expected {expected}"
                    ));
                }
            }
        }

        // Moment recovery from 500 Gaussian draws per axis.
        let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
        let vectors: Vec<[f64; 6]> = (0..500)
            .map(|_| std::array::from_fn(|k| mu[k] + sigma[k] * normal_draw(&mut rng)))
            .collect();
        let fitted = fit_from_stat_vectors(&vectors, "gaussian draws").unwrap();
        for k in 0..6 {
            let dm = (fitted.stats[k].mu - mu[k]).abs();
            let ds = (fitted.stats[k].sigma - sigma[k]).abs();
            if dm > 0.5 || ds > 0.5 {
                return fail(format!(
                    "axis {k} recovered (mu {:.3}, sigma {:.3}) vs true ({}, {})",
                    fitted.stats[k].mu, fitted.stats[k].sigma, mu[k], sigma[k]
                ));
            }
        }
        Ok(())
    });
}

fn normal_draw(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// ---------------------------------------------------------------- c7

#[test]
fn acceptance_c7_channel_balance() {
    criterion("c7 channel balance recovery", || {
        let suite = oracle_suite();
        let mut shrunk = 0;
        for (sample, result) in suite.samples.iter().zip(&suite.results) {
            let before = red_green_gap(&sample.degraded);
            let after = red_green_gap(&result.restored);
            if after < before {
                shrunk += 1;
            }
        }
        println!("  c7 detail: gap shrank in {shrunk}/{SUITE_N}");
        if shrunk * 100 < SUITE_N * 80 {
            return fail(format!("gap shrank in only {shrunk}/{SUITE_N}"));
        }
        Ok(())
    });
}

fn channel_mean(img: &Image, c: usize) -> f64 {
    img.data()[c..].iter().step_by(3).sum::<f64>() / img.pixel_count() as f64
}

fn red_green_gap(img: &Image) -> f64 {
    (channel_mean(img, 0) - channel_mean(img, 1)).abs()
}

// ---------------------------------------------------------------- c8

#[test]
fn acceptance_c8_metric_sanity() {
    criterion("c8 metric sanity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
        // Symmetry and identity of the full-reference metrics.
        for trial in 0..50 {
            let w = 11 + 2 * (rng.gen_range(3..20) as usize);
            let h = 11 + 2 * (rng.gen_range(3..20) as usize);
            let a = common::noise_image(50_000 + trial, w, h);
            let b = common::noise_image(51_000 + trial, w, h);
            let (pab, pba) = (psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
            if (pab - pba).abs() > 1e-12 {
                return fail(format!("psnr asymmetric: {pab} vs {pba}"));
            }
            let (sab, sba) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
            if (sab - sba).abs() > 1e-12 {
                return fail(format!("ssim asymmetric: {sab} vs {sba}"));
            }
            if psnr(&a, &a).unwrap() != PSNR_CAP_DB {
                return fail("psnr identity is not the cap value".into());
            }
            if (ssim(&a, &a).unwrap() - 1.0).abs() > 1e-12 {
                return fail("ssim identity is not 1".into());
            }
        }

        // Flip invariance of the no-reference metrics at odd and even sizes.
        let uiqm_cfg = UiqmConfig::default();
        let uciqe_cfg = UciqeConfig::default();
        for trial in 0..20u64 {
            let w = 16 + (trial as usize * 7) % 33;
            let h = 16 + (trial as usize * 5) % 29;
            let img = common::noise_image(52_000 + trial, w, h);
            let flips = [hflip(&img), vflip(&img)];
            let u0 = uiqm(&img, &uiqm_cfg).unwrap();
            let q0 = uciqe(&img, &uciqe_cfg).unwrap();
            for f in &flips {
                let uf = uiqm(f, &uiqm_cfg).unwrap();
                let qf = uciqe(f, &uciqe_cfg).unwrap();
                if (uf - u0).abs() > 1e-9 || (qf - q0).abs() > 1e-9 {
                    return fail(format!(
                        "flip changed metrics at {w}x{h}: uiqm {u0} vs {uf}, uciqe {q0} vs {qf}"
                    ));
                }
            }
        }

        // Independent reimplementation agreement on block-aligned sizes.
        for trial in 0..10u64 {
            let w = 20 + 10 * ((trial as usize) % 4);
            let h = 20 + 10 * ((trial as usize * 3) % 4);
            let img = common::noise_image(53_000 + trial, w, h);
            let (u, nu) = (uiqm(&img, &uiqm_cfg).unwrap(), naive_uiqm(&img));
            if (u - nu).abs() > 1e-6 {
                return fail(format!("uiqm {u} departs from oracle {nu} at {w}x{h}"));
            }
            let (q, nq) = (uciqe(&img, &uciqe_cfg).unwrap(), naive_uciqe(&img));
            if (q - nq).abs() > 1e-6 {
                return fail(format!("uciqe {q} departs from oracle {nq} at {w}x{h}"));
            }
        }
        Ok(())
    });
}

fn hflip(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in (0..w).rev() {
            for c in 0..3 {
                data.push(img.get(x, y, c));
            }
        }
    }
    Image::new(w, h, data).unwrap()
}

fn vflip(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h * 3);
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..3 {
                data.push(img.get(x, y, c));
            }
        }
    }
    Image::new(w, h, data).unwrap()
}

// Plain-form reimplementations of the two no-reference metrics, written
// directly from their published definitions with their own color math, used
// as the agreement oracle. Sizes are kept at multiples of the block size so
// block layout is the unambiguous exact tiling.

fn naive_lab(r: f64, g: f64, b: f64) -> [f64; 3] {
    fn lin(c: f64) -> f64 {
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    fn f(t: f64) -> f64 {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    }
    let (rl, gl, bl) = (lin(r), lin(g), lin(b));
    let x = (0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl) / 0.95047;
    let y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    let z = (0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl) / 1.08883;
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn naive_uiqm(img: &Image) -> f64 {
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let px = |x: usize, y: usize, c: usize| img.get(x, y, c);

    // Colorfulness: alpha-trimmed means of the opponent axes on 0-255,
    // spread taken over the full population around the trimmed mean.
    let mut rg = Vec::with_capacity(n);
    let mut yb = Vec::with_capacity(n);
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = (px(x, y, 0) * 255.0, px(x, y, 1) * 255.0, px(x, y, 2) * 255.0);
            rg.push(r - g);
            yb.push((r + g) / 2.0 - b);
        }
    }
    let trimmed = |vals: &mut Vec<f64>| {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let t = (0.1 * n as f64).floor() as usize;
        let kept = &vals[t..n - t];
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        (mean, var)
    };
    let (mu_rg, var_rg) = trimmed(&mut rg);
    let (mu_yb, var_yb) = trimmed(&mut yb);
    let uicm =
        -0.0268 * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt() + 0.1586 * (var_rg + var_yb).sqrt();

    let block = 10;
    let blocks = ((w / block) * (h / block)) as f64;

    // Sharpness: per-channel Sobel magnitude (replicated edges) weighted by
    // the plane, then the log enhancement measure over blocks.
    let mut uism = 0.0;
    for (c, lw) in [(0usize, 0.299), (1, 0.587), (2, 0.114)] {
        let sample = |x: isize, y: isize| {
            px(
                x.clamp(0, w as isize - 1) as usize,
                y.clamp(0, h as isize - 1) as usize,
                c,
            )
        };
        let mut edge = vec![0.0; n];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let gx = (sample(x + 1, y - 1) + 2.0 * sample(x + 1, y) + sample(x + 1, y + 1))
                    - (sample(x - 1, y - 1) + 2.0 * sample(x - 1, y) + sample(x - 1, y + 1));
                let gy = (sample(x - 1, y + 1) + 2.0 * sample(x, y + 1) + sample(x + 1, y + 1))
                    - (sample(x - 1, y - 1) + 2.0 * sample(x, y - 1) + sample(x + 1, y - 1));
                edge[y as usize * w + x as usize] =
                    (gx * gx + gy * gy).sqrt() * sample(x, y);
            }
        }
        let mut sum = 0.0;
        fold_blocks(w, h, block, &|x, y| edge[y * w + x], &mut |lo, hi| {
            if lo > 0.0 && hi > lo {
                sum += (hi / lo).ln();
            }
        });
        uism += lw * 2.0 * sum / blocks;
    }

    // Contrast: Michelson entropy over luminance blocks.
    let luma: Vec<f64> =
        (0..n).map(|i| {
            let (x, y) = (i % w, i / w);
            0.299 * px(x, y, 0) + 0.587 * px(x, y, 1) + 0.114 * px(x, y, 2)
        })
        .collect();
    let mut conm = 0.0;
    fold_blocks(w, h, block, &|x, y| luma[y * w + x], &mut |lo, hi| {
        if hi > lo && hi + lo > 0.0 {
            let m = (hi - lo) / (hi + lo);
            conm += -(m * m.ln());
        }
    });
    let uiconm = conm / blocks;

    0.0282 * uicm + 0.2953 * uism + 3.5753 * uiconm
}

/// Exact `block`-sized tiling of a plane, reporting each tile's extrema.
fn fold_blocks(
    w: usize,
    h: usize,
    block: usize,
    plane: &dyn Fn(usize, usize) -> f64,
    fold: &mut dyn FnMut(f64, f64),
) {
    for by in 0..h / block {
        for bx in 0..w / block {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for y in by * block..(by + 1) * block {
                for x in bx * block..(bx + 1) * block {
                    let v = plane(x, y);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            fold(lo, hi);
        }
    }
}

fn naive_uciqe(img: &Image) -> f64 {
    let n = img.pixel_count();
    let mut l_norm = Vec::with_capacity(n);
    let mut chroma = Vec::with_capacity(n);
    let mut sat = 0.0;
    for px in img.data().chunks_exact(3) {
        let [l, a, b] = naive_lab(px[0], px[1], px[2]);
        let c = (a * a + b * b).sqrt();
        l_norm.push(l / 100.0);
        chroma.push(c / 100.0);
        if l > 1e-9 {
            sat += c / l;
        }
    }
    let mean_c = chroma.iter().sum::<f64>() / n as f64;
    let var_c = chroma.iter().map(|c| (c - mean_c) * (c - mean_c)).sum::<f64>() / n as f64;
    l_norm.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = ((0.01 * n as f64).ceil() as usize).clamp(1, n);
    let bottom = l_norm[..q].iter().sum::<f64>() / q as f64;
    let top = l_norm[n - q..].iter().sum::<f64>() / q as f64;
    0.4680 * var_c.sqrt() + 0.2745 * (top - bottom) + 0.2576 * (sat / n as f64)
}

// ---------------------------------------------------------------- c9

#[test]
fn acceptance_c9_cli_determinism() {
    criterion("c9 CLI determinism", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let root = dir.path();
        let cleans = root.join("cleans");
        let backs = root.join("backs");
        std::fs::create_dir_all(&cleans).unwrap();
        std::fs::create_dir_all(&backs).unwrap();
        let size = 48;
        for i in 0..3u64 {
            let img = common::clean_image(90_000 + i, size);
            save_image(&cleans.join(format!("s{i}.png")), &img).unwrap();
            let depth = common::scene_depth(91_000 + i, size);
            common::write_pgm16(
                &cleans.join(format!("s{i}.pgm")),
                size,
                size,
                &common::depth_to_pgm16(&depth),
            );
        }
        for i in 0..2u64 {
            let img = common::backlight_image(92_000 + i, size);
            save_image(&backs.join(format!("b{i}.png")), &img).unwrap();
        }

        let model = root.join("model.json");
        let run = |args: &[&str], threads: &str| -> Result<(), String> {
            let out = Command::new(env!("CARGO_BIN_EXE_uwphys"))
                .args(args)
                .env("RAYON_NUM_THREADS", threads)
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!(
                    "command {args:?} failed: {}",
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
            Ok(())
        };
        let s = |p: &Path| p.to_str().unwrap().to_string();

        // Each command runs twice, once single-threaded and once with a
        // wider pool; artifacts must agree byte for byte.
        let stats_out = [root.join("m1.json"), root.join("m2.json")];
        for (i, out) in stats_out.iter().enumerate() {
            run(
                &["stats", "--input", &s(&cleans), "--output", &s(out)],
                if i == 0 { "1" } else { "4" },
            )?;
        }
        expect_same(&stats_out[0], &stats_out[1])?;
        std::fs::copy(&stats_out[0], &model).unwrap();

        let synth_out = [root.join("outA"), root.join("outB")];
        for (i, out) in synth_out.iter().enumerate() {
            run(
                &[
                    "synthesize",
                    "--input",
                    &s(&cleans),
                    "--backlight",
                    &s(&backs),
                    "--output",
                    &s(out),
                    "--seed",
                    "3",
                ],
                if i == 0 { "1" } else { "4" },
            )?;
        }
        expect_same(&synth_out[0].join("manifest.json"), &synth_out[1].join("manifest.json"))?;
        for i in 0..3 {
            let name = format!("s{i}.png");
            expect_same(&synth_out[0].join(&name), &synth_out[1].join(&name))?;
        }

        let degraded = s(&synth_out[0].join("s0.png"));
        let depth = s(&cleans.join("s0.pgm"));
        let est_out = [root.join("e1.json"), root.join("e2.json")];
        for (i, out) in est_out.iter().enumerate() {
            run(
                &[
                    "estimate",
                    "--input",
                    &degraded,
                    "--depth",
                    &depth,
                    "--lab-model",
                    &s(&model),
                    "--grid-dmax",
                    "2,6",
                    "--output",
                    &s(out),
                ],
                if i == 0 { "1" } else { "4" },
            )?;
        }
        expect_same(&est_out[0], &est_out[1])?;

        let restore_out = [root.join("r1.png"), root.join("r2.png")];
        for (i, out) in restore_out.iter().enumerate() {
            run(
                &[
                    "restore",
                    "--input",
                    &degraded,
                    "--depth",
                    &depth,
                    "--params",
                    &s(&est_out[0]),
                    "--output",
                    &s(out),
                ],
                if i == 0 { "1" } else { "4" },
            )?;
        }
        expect_same(&restore_out[0], &restore_out[1])?;

        let enh_out = [root.join("enhA"), root.join("enhB")];
        for (i, out) in enh_out.iter().enumerate() {
            run(
                &[
                    "enhance",
                    "--input",
                    &degraded,
                    "--depth",
                    &depth,
                    "--lab-model",
                    &s(&model),
                    "--grid-dmax",
                    "2,6",
                    "--output",
                    &s(out),
                ],
                if i == 0 { "1" } else { "4" },
            )?;
        }
        for name in ["restored.png", "predicted.png", "estimate.json"] {
            expect_same(&enh_out[0].join(name), &enh_out[1].join(name))?;
        }

        let score_out = [root.join("sc1.json"), root.join("sc2.json")];
        for (i, out) in score_out.iter().enumerate() {
            run(
                &[
                    "score",
                    "--input",
                    &s(&restore_out[0]),
                    "--reference",
                    &s(&cleans.join("s0.png")),
                    "--depth",
                    &depth,
                    "--lab-model",
                    &s(&model),
                    "--output",
                    &s(out),
                ],
                if i == 0 { "1" } else { "4" },
            )?;
        }
        expect_same(&score_out[0], &score_out[1])?;

        let eval_out = [root.join("ev1.json"), root.join("ev2.json")];
        for (i, out) in eval_out.iter().enumerate() {
            run(
                &[
                    "eval",
                    "--input",
                    &s(&synth_out[0]),
                    "--reference",
                    &s(&synth_out[1]),
                    "--output",
                    &s(out),
                ],
                if i == 0 { "1" } else { "4" },
            )?;
        }
        expect_same(&eval_out[0], &eval_out[1])?;
        Ok(())
    });
}

fn expect_same(a: &Path, b: &Path) -> Result<(), String> {
    let ba = std::fs::read(a).map_err(|e| format!("{}: {e}", a.display()))?;
    let bb = std::fs::read(b).map_err(|e| format!("{}: {e}", b.display()))?;
    if ba != bb {
        return Err(format!(
            "artifacts differ: {} vs {}",
            a.display(),
            b.display()
        ));
    }
    Ok(())
}
