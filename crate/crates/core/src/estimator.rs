//! Degradation-parameter estimation by exhaustive candidate search.
//!
//! The estimator never sees ground truth: it scores each candidate by how
//! natural the corresponding restoration looks. A candidate is an ordered
//! water-type pair (attenuation donor, backscatter donor) crossed with a
//! depth-scale choice; its background light derives from the degraded
//! image's green statistics through the pair's coefficient ratios. All
//! pair x scale combinations are evaluated with the background light held
//! at the pre-estimate, ties breaking toward the lowest (pair index, scale
//! index).
//!
//! The pre-estimate is only a seed: its statistics assume imagery whose
//! background has saturated, so on weakly or unevenly degraded inputs it
//! can sit far from any value consistent with the scene. Refinement
//! therefore line-searches the green background light at every (pair,
//! scale) candidate before final ranking, then runs full coordinate
//! descent on the winner over (green background light, far depth bound).
//! Each candidate's search interval is the configured window around the
//! pre-estimate pulled inside the candidate's own far-field feasibility
//! bracket (see [`feasible_b`]), so a biased pre-estimate cannot strand
//! the search where no background light explains the farthest pixels.
//! Every move is accept-only-on-improvement, so the reported objective
//! never exceeds any grid candidate's.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backlight::{channel_stats, coupled_backlight, pre_backlight};
use crate::colorstats::{lab_score, LabStatsModel};
use crate::error::{Error, Result};
use crate::image::{ClipMask, DepthKind, DepthMap, Image, CHANNELS};
use crate::imaging::{
    absolutize_depth, compute_transmissions, degrade, restore, restore_with_parts,
    DegradationParams,
};
use crate::water::WaterTypeTable;

/// Mixing weights of the restoration objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    /// Distance of the restoration's Lab statistics from the reference model.
    pub color: f64,
    /// Fraction of pixels the restoration clamped or floored.
    pub clip: f64,
    /// Mean pairwise absolute difference of the RGB channel means.
    pub balance: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { color: 1.0, clip: 5.0, balance: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Near bound of every depth-scale candidate, metres.
    pub d_min: f64,
    /// Far-bound candidates, metres, strictly ascending.
    pub d_max_grid: Vec<f64>,
    pub weights: ObjectiveWeights,
    /// Run coordinate descent on (green background light, far bound).
    pub refine: bool,
    /// Maximum descent sweeps.
    pub refine_iters: usize,
    /// Half-width of the green background-light search interval.
    pub b_inf_window: f64,
    /// How many distinct water-type pairs to report as alternatives.
    pub top_k: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            d_min: 0.5,
            d_max_grid: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            weights: ObjectiveWeights::default(),
            refine: true,
            refine_iters: 2,
            b_inf_window: 0.25,
            top_k: 5,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.d_min.is_finite() || self.d_min < 0.0 {
            return Err(Error::InvalidInput(format!(
                "d_min must be finite and nonnegative, got {}",
                self.d_min
            )));
        }
        if self.d_max_grid.is_empty() {
            return Err(Error::InvalidInput("d_max grid is empty".into()));
        }
        for w in self.d_max_grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidInput(format!(
                    "d_max grid must be strictly ascending, got {:?}",
                    self.d_max_grid
                )));
            }
        }
        if self
            .d_max_grid
            .iter()
            .any(|d| !d.is_finite() || *d <= self.d_min)
        {
            return Err(Error::InvalidInput(format!(
                "every d_max must be finite and exceed d_min {}, got {:?}",
                self.d_min, self.d_max_grid
            )));
        }
        let w = &self.weights;
        if [w.color, w.clip, w.balance]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::InvalidInput(
                "objective weights must be finite and nonnegative".into(),
            ));
        }
        if !self.b_inf_window.is_finite() || self.b_inf_window < 0.0 {
            return Err(Error::InvalidInput(
                "b_inf_window must be finite and nonnegative".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidInput("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// How un-natural a restoration looks: color-statistics distance, clipping,
/// and channel imbalance, mixed per the weights. Lower is better.
pub fn restoration_objective(
    restored: &Image,
    clip_fraction: f64,
    model: &LabStatsModel,
    weights: &ObjectiveWeights,
) -> f64 {
    let means = restored.channel_means();
    let balance = ((means[0] - means[1]).abs()
        + (means[0] - means[2]).abs()
        + (means[1] - means[2]).abs())
        / 3.0;
    weights.color * lab_score(restored, model)
        + weights.clip * clip_fraction
        + weights.balance * balance
}

/// One scored candidate, ranked among the alternatives of an [`Estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub attenuation_type: String,
    pub scattering_type: String,
    pub params: DegradationParams,
    pub objective: f64,
}

/// Estimation result: the winning parameters (after refinement, when
/// enabled) plus the best grid candidates deduplicated by water-type pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub params: DegradationParams,
    pub objective: f64,
    pub attenuation_type: String,
    pub scattering_type: String,
    /// Green background light pre-estimated from the degraded image.
    pub pre_backlight_green: f64,
    /// Green background light after refinement (equal to the pre-estimate
    /// when refinement is off or declined every move).
    pub refined_backlight_green: f64,
    pub ranked_alternatives: Vec<RankedCandidate>,
}

struct CandidateScore {
    scale_idx: usize,
    objective: f64,
    b_g: f64,
}

/// Golden-section minimization; returns the best probed point. Deterministic
/// for a deterministic objective.
fn golden_min(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    debug_assert!(hi >= lo);
    if hi - lo <= tol {
        let x = 0.5 * (lo + hi);
        return (x, f(x));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Interval-width tolerance of the winner's coordinate-descent line searches.
const REFINE_TOL: f64 = 1e-3;

/// Coarser tolerance for the per-pair preselection searches; the winner is
/// re-polished at [`REFINE_TOL`] afterwards, so preselection only has to
/// rank pairs, not pin their optima.
const PRESELECT_TOL: f64 = 5e-3;

/// Fraction of the relative-depth span that counts as far field when
/// bracketing the background light.
const FAR_FIELD_SPAN: f64 = 0.9;

/// Hard bracket on a candidate's green background light from its far-field
/// pixels. Each far pixel obeys `I = J t + b s` with `J` in [0, 1], so
/// `(I - t) / s <= b <= I / s` pointwise; the intersection over the far
/// field brackets the true value whenever the candidate is the true one
/// (range clamping during synthesis only widens the inequalities). The
/// bracket is tight exactly where the backscatter has saturated, which is
/// where the statistics pre-estimate is least reliable.
struct FeasibleB {
    lo: f64,
    hi: f64,
}

fn feasible_b(degraded: &Image, far: &[usize], direct: &[f64], scatter: &[f64]) -> FeasibleB {
    let data = degraded.data();
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for &p in far {
        let g = p * CHANNELS + 1;
        let s = scatter[g];
        if s < 1e-9 {
            continue;
        }
        let i = data[g];
        let t = direct[g];
        lo = lo.max((i - t) / s);
        hi = hi.min(i / s);
    }
    lo = lo.clamp(0.0, 1.0);
    hi = hi.clamp(0.0, 1.0);
    if lo > hi {
        // Inconsistent pixels (model violation); fall back to the midpoint
        // so the candidate still gets one honest probe.
        let mid = 0.5 * (lo + hi);
        lo = mid;
        hi = mid;
    }
    FeasibleB { lo, hi }
}

/// Search interval for one candidate's green background light: the
/// configured window around the pre-estimate, pulled inside the feasible
/// bracket when the two disagree. The window width caps how far any search
/// may roam, but physics decides where the interval sits.
fn search_interval(b0: f64, w: f64, feasible: &FeasibleB) -> (f64, f64) {
    let mut lo = (b0 - w).max(feasible.lo);
    let mut hi = (b0 + w).min(feasible.hi);
    if lo > hi {
        if b0 < feasible.lo {
            lo = feasible.lo;
            hi = (feasible.lo + w).min(feasible.hi);
        } else {
            hi = feasible.hi;
            lo = (feasible.hi - w).max(feasible.lo);
        }
    }
    (lo, hi)
}

/// Indices of the farthest pixels under the relative depth map.
fn far_field_indices(depth_rel: &DepthMap) -> Vec<usize> {
    let vals = depth_rel.values();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let cut = lo + FAR_FIELD_SPAN * (hi - lo);
    (0..vals.len()).filter(|&p| vals[p] >= cut).collect()
}

/// Estimates degradation parameters for a degraded image with relative
/// depth. Exhaustive over all ordered water-type pairs and the d_max grid.
pub fn estimate(
    degraded: &Image,
    depth_rel: &DepthMap,
    table: &WaterTypeTable,
    model: &LabStatsModel,
    cfg: &EstimatorConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    if depth_rel.kind() != DepthKind::Relative {
        return Err(Error::InvalidInput(
            "estimation expects a relative depth map".into(),
        ));
    }
    if !depth_rel.same_shape_as_image(degraded) {
        return Err(Error::DimensionMismatch(
            "degraded image and depth map shapes differ".into(),
        ));
    }

    let b0 = pre_backlight(&channel_stats(degraded)).value[1];
    let n_types = table.len();
    let n_scales = cfg.d_max_grid.len();

    // exp(-rate * d) is the whole per-candidate cost that depends only on
    // (type, scale), so build those maps once: direct transmission per
    // attenuation donor, backscatter complement per backscatter donor.
    let depth_abs: Vec<DepthMap> = cfg
        .d_max_grid
        .iter()
        .map(|&d_max| absolutize_depth(depth_rel, cfg.d_min, d_max))
        .collect::<Result<_>>()?;
    let direct_maps: Vec<Vec<f64>> = (0..n_types * n_scales)
        .into_par_iter()
        .map(|i| exp_map(depth_abs[i % n_scales].values(), &table.get(i / n_scales).beta_d, false))
        .collect();
    let scatter_maps: Vec<Vec<f64>> = (0..n_types * n_scales)
        .into_par_iter()
        .map(|i| exp_map(depth_abs[i % n_scales].values(), &table.get(i / n_scales).beta_b, true))
        .collect();

    // Candidate order fixes the tie-break: pair index major, scale minor.
    let n_pairs = n_types * n_types;
    let scores: Vec<f64> = (0..n_pairs * n_scales)
        .into_par_iter()
        .map(|idx| {
            let scale_idx = idx % n_scales;
            let pair_idx = idx / n_scales;
            let (att_idx, sct_idx) = (pair_idx / n_types, pair_idx % n_types);
            let att = table.get(att_idx);
            let sct = table.get(sct_idx);
            let coupled = coupled_backlight(b0, &att.beta_d, &sct.beta_b);
            let (restored, _mask, clamps) = restore_with_parts(
                degraded,
                &direct_maps[att_idx * n_scales + scale_idx],
                &scatter_maps[sct_idx * n_scales + scale_idx],
                &coupled.value,
            );
            restoration_objective(&restored, clamps.pixel_fraction(), model, &cfg.weights)
        })
        .collect();

    let far = far_field_indices(depth_rel);

    // One scored entry per pair: the best grid scale at the pre-estimate,
    // improved (when refining) by a line search over the green background
    // light at every scale of the pair. Searching each scale matters: the
    // pre-estimate's bias can make the wrong scale look best on the grid,
    // and a line search run only there would lock the error in. The grid
    // value is kept unless a search strictly improves on it, and scales are
    // visited in grid order so ties resolve deterministically.
    let pair_results: Vec<CandidateScore> = (0..n_pairs)
        .into_par_iter()
        .map(|pair_idx| {
            let mut scale_idx = 0;
            let mut objective = scores[pair_idx * n_scales];
            for k in 1..n_scales {
                let o = scores[pair_idx * n_scales + k];
                if o < objective {
                    objective = o;
                    scale_idx = k;
                }
            }
            let mut best = CandidateScore { scale_idx, objective, b_g: b0 };
            if cfg.refine {
                let (att_idx, sct_idx) = (pair_idx / n_types, pair_idx % n_types);
                let att = table.get(att_idx);
                let sct = table.get(sct_idx);
                for k in 0..n_scales {
                    let direct = &direct_maps[att_idx * n_scales + k];
                    let scatter = &scatter_maps[sct_idx * n_scales + k];
                    let feasible = feasible_b(degraded, &far, direct, scatter);
                    let (b_lo, b_hi) = search_interval(b0, cfg.b_inf_window, &feasible);
                    let (bx, bf) = golden_min(
                        |b| {
                            let coupled = coupled_backlight(b, &att.beta_d, &sct.beta_b);
                            let (restored, _mask, clamps) =
                                restore_with_parts(degraded, direct, scatter, &coupled.value);
                            restoration_objective(
                                &restored,
                                clamps.pixel_fraction(),
                                model,
                                &cfg.weights,
                            )
                        },
                        b_lo,
                        b_hi,
                        PRESELECT_TOL,
                    );
                    if bf < best.objective {
                        best.objective = bf;
                        best.b_g = bx;
                        best.scale_idx = k;
                    }
                }
            }
            best
        })
        .collect();

    let mut order: Vec<usize> = (0..n_pairs).collect();
    order.sort_unstable_by(|&a, &b| {
        pair_results[a]
            .objective
            .partial_cmp(&pair_results[b].objective)
            .expect("objective is finite")
            .then(a.cmp(&b))
    });

    let ranked_alternatives: Vec<RankedCandidate> = order
        .iter()
        .take(cfg.top_k)
        .map(|&pair_idx| {
            let pr = &pair_results[pair_idx];
            let (att_idx, sct_idx) = (pair_idx / n_types, pair_idx % n_types);
            let att = table.get(att_idx);
            let sct = table.get(sct_idx);
            let coupled = coupled_backlight(pr.b_g, &att.beta_d, &sct.beta_b);
            RankedCandidate {
                attenuation_type: att.name.clone(),
                scattering_type: sct.name.clone(),
                params: DegradationParams {
                    beta_d: att.beta_d,
                    beta_b: sct.beta_b,
                    b_inf: coupled.value,
                    depth_scale: (cfg.d_min, cfg.d_max_grid[pr.scale_idx]),
                },
                objective: pr.objective,
            }
        })
        .collect();

    let winner_pair = order[0];
    let winner_scale = pair_results[winner_pair].scale_idx;
    let (att_idx, sct_idx) = (winner_pair / n_types, winner_pair % n_types);
    let att = table.get(att_idx);
    let sct = table.get(sct_idx);

    // Descent keeps the winner's search interval from its chosen scale; the
    // far bound only moves within the neighboring grid span, which shifts
    // the bracket too little to matter.
    let (b_lo, b_hi) = search_interval(
        b0,
        cfg.b_inf_window,
        &feasible_b(
            degraded,
            &far,
            &direct_maps[att_idx * n_scales + winner_scale],
            &scatter_maps[sct_idx * n_scales + winner_scale],
        ),
    );

    let mut best_b = pair_results[winner_pair].b_g;
    let mut best_d_max = cfg.d_max_grid[winner_scale];
    let mut best_obj = pair_results[winner_pair].objective;

    if cfg.refine && cfg.refine_iters > 0 {
        let eval = |b_g: f64, d_max: f64| -> Result<f64> {
            let coupled = coupled_backlight(b_g, &att.beta_d, &sct.beta_b);
            let params = DegradationParams {
                beta_d: att.beta_d,
                beta_b: sct.beta_b,
                b_inf: coupled.value,
                depth_scale: (cfg.d_min, d_max),
            };
            let depth = absolutize_depth(depth_rel, cfg.d_min, d_max)?;
            let maps = compute_transmissions(&depth, &params)?;
            let (restored, _mask, clamps) = restore_with_parts(
                degraded,
                &maps.direct,
                &maps.backscatter_complement,
                &coupled.value,
            );
            Ok(restoration_objective(
                &restored,
                clamps.pixel_fraction(),
                model,
                &cfg.weights,
            ))
        };
        let d_lo = cfg.d_max_grid[winner_scale.saturating_sub(1)];
        let d_hi = cfg.d_max_grid[(winner_scale + 1).min(n_scales - 1)];
        for _ in 0..cfg.refine_iters {
            let mut improved = false;
            if b_hi > b_lo {
                let mut failure = None;
                let (bx, bf) = golden_min(
                    |x| match eval(x, best_d_max) {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            f64::INFINITY
                        }
                    },
                    b_lo,
                    b_hi,
                    REFINE_TOL,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                if bf < best_obj {
                    best_b = bx;
                    best_obj = bf;
                    improved = true;
                }
            }
            if d_hi > d_lo {
                let mut failure = None;
                let (dx, df) = golden_min(
                    |x| match eval(best_b, x) {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            f64::INFINITY
                        }
                    },
                    d_lo,
                    d_hi,
                    REFINE_TOL,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                if df < best_obj {
                    best_d_max = dx;
                    best_obj = df;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
    }

    let coupled = coupled_backlight(best_b, &att.beta_d, &sct.beta_b);
    Ok(Estimate {
        params: DegradationParams {
            beta_d: att.beta_d,
            beta_b: sct.beta_b,
            b_inf: coupled.value,
            depth_scale: (cfg.d_min, best_d_max),
        },
        objective: best_obj,
        attenuation_type: att.name.clone(),
        scattering_type: sct.name.clone(),
        pre_backlight_green: b0,
        refined_backlight_green: best_b,
        ranked_alternatives,
    })
}

fn exp_map(depths: &[f64], rates: &[f64; 3], complement: bool) -> Vec<f64> {
    let mut out = vec![0.0; depths.len() * CHANNELS];
    out.par_chunks_mut(CHANNELS)
        .zip(depths.par_iter())
        .for_each(|(o, &d)| {
            for c in 0..CHANNELS {
                let e = (-rates[c] * d).exp();
                o[c] = if complement { 1.0 - e } else { e };
            }
        });
    out
}

/// Full estimate-restore-reproject pipeline.
#[derive(Debug, Clone)]
pub struct EnhanceResult {
    pub estimate: Estimate,
    pub restored: Image,
    pub restored_clip: ClipMask,
    /// The restored image pushed back through the forward model with the
    /// estimated parameters; agreement with the input is the
    /// degradation-consistency check.
    pub predicted_degraded: Image,
    pub predicted_clip: ClipMask,
}

/// Estimates parameters, restores, and re-degrades with the estimate.
pub fn enhance(
    degraded: &Image,
    depth_rel: &DepthMap,
    table: &WaterTypeTable,
    model: &LabStatsModel,
    cfg: &EstimatorConfig,
) -> Result<EnhanceResult> {
    let est = estimate(degraded, depth_rel, table, model, cfg)?;
    let (d_min, d_max) = est.params.depth_scale;
    let depth = absolutize_depth(depth_rel, d_min, d_max)?;
    let (restored, restored_clip) = restore(degraded, &depth, &est.params)?;
    let (predicted_degraded, predicted_clip) = degrade(&restored, &depth, &est.params)?;
    Ok(EnhanceResult {
        estimate: est,
        restored,
        restored_clip,
        predicted_degraded,
        predicted_clip,
    })
}
