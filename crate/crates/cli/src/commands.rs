//! Implementations of the seven subcommands. Each validates every referenced
//! path up front, registers outputs with the tracker before writing, and
//! returns errors for the caller to map onto the data-error exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use uwphys::colorstats::{fit_model, lab_score, LabStatsModel};
use uwphys::estimator::{enhance, estimate, EstimatorConfig, ObjectiveWeights};
use uwphys::image::{DepthMap, Image};
use uwphys::imaging::{absolutize_depth, restore, DegradationParams};
use uwphys::io::{load_depth, load_image, load_json, save_image, save_json};
use uwphys::metrics::{
    psnr, ssim, uciqe, uiqm, weighted_reference_loss, MetricReport, UciqeConfig, UiqmConfig,
};
use uwphys::synthesis::{synthesize_batch, BatchManifest};
use uwphys::water::WaterTypeTable;

use crate::opts::{
    Command, CsvF64, EnhanceArgs, EstimateArgs, EstimatorOpts, EvalArgs, RestoreArgs, ScoreArgs,
    StatsArgs, SynthesizeArgs, Weights3,
};
use crate::outputs::OutputTracker;

pub fn run(cmd: Command, outputs: &mut OutputTracker) -> Result<()> {
    match cmd {
        Command::Synthesize(a) => synthesize_cmd(a, outputs),
        Command::Estimate(a) => estimate_cmd(a, outputs),
        Command::Restore(a) => restore_cmd(a, outputs),
        Command::Enhance(a) => enhance_cmd(a, outputs),
        Command::Score(a) => score_cmd(a, outputs),
        Command::Stats(a) => stats_cmd(a, outputs),
        Command::Eval(a) => eval_cmd(a, outputs),
    }
}

const IMAGE_EXTS: [&str; 2] = ["png", "ppm"];
const DEPTH_EXTS: [&str; 2] = ["pgm", "pfm"];

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} is not a readable file: {}", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        bail!("{what} is not a directory: {}", path.display());
    }
    Ok(())
}

/// Files under `dir` with one of `exts`, sorted by name so every run
/// processes them in the same order regardless of filesystem enumeration.
fn sorted_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let matches = path.is_file()
            && path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if matches {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn load_table(path: Option<&Path>) -> Result<WaterTypeTable> {
    match path {
        Some(p) => {
            require_file(p, "water-type table")?;
            Ok(WaterTypeTable::load(p)?)
        }
        None => Ok(WaterTypeTable::default_table().clone()),
    }
}

fn load_model(path: &Path) -> Result<LabStatsModel> {
    require_file(path, "color-statistics model")?;
    let model: LabStatsModel = load_json(path)?;
    Ok(model)
}

fn estimator_config(opts: &EstimatorOpts) -> EstimatorConfig {
    let mut cfg = EstimatorConfig::default();
    if let Some(CsvF64(grid)) = &opts.grid_dmax {
        cfg.d_max_grid = grid.clone();
    }
    if let Some(d_min) = opts.scale_min {
        cfg.d_min = d_min;
    }
    if let Some(Weights3([color, clip, balance])) = opts.weights {
        cfg.weights = ObjectiveWeights { color, clip, balance };
    }
    if let Some(k) = opts.topk {
        cfg.top_k = k;
    }
    cfg.refine = !opts.no_refine;
    cfg
}

fn file_stem(path: &Path) -> Result<&str> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow::anyhow!("unusable file name: {}", path.display()))
}

/// Finds the same-stem depth file next to a clean image.
fn sibling_depth(image_path: &Path) -> Result<PathBuf> {
    for ext in DEPTH_EXTS {
        let candidate = image_path.with_extension(ext);
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    bail!(
        "no depth file ({}) alongside {}",
        DEPTH_EXTS.join("/"),
        image_path.display()
    );
}

fn synthesize_cmd(args: SynthesizeArgs, outputs: &mut OutputTracker) -> Result<()> {
    require_dir(&args.input, "input corpus")?;
    require_dir(&args.backlight, "backlight corpus")?;
    let table = load_table(args.table.as_deref())?;

    let image_paths = sorted_files(&args.input, &IMAGE_EXTS)?;
    if image_paths.is_empty() {
        bail!("no input images (.png/.ppm) in {}", args.input.display());
    }
    let mut stems: Vec<String> = Vec::with_capacity(image_paths.len());
    let mut depth_paths = Vec::with_capacity(image_paths.len());
    for path in &image_paths {
        let stem = file_stem(path)?.to_string();
        if stems.contains(&stem) {
            bail!("two input images share the stem {stem:?}; outputs would collide");
        }
        depth_paths.push(sibling_depth(path)?);
        stems.push(stem);
    }

    let corpus: Vec<(Image, DepthMap)> = image_paths
        .par_iter()
        .zip(&depth_paths)
        .map(|(img, dep)| {
            Ok((
                load_image(img)?,
                load_depth(dep, args.invert_depth)?,
            ))
        })
        .collect::<Result<_>>()?;

    let backlight_paths = sorted_files(&args.backlight, &IMAGE_EXTS)?;
    if backlight_paths.is_empty() {
        bail!("no backlight images (.png/.ppm) in {}", args.backlight.display());
    }
    let backlights: Vec<Image> = backlight_paths
        .par_iter()
        .map(|p| load_image(p))
        .collect::<uwphys::Result<_>>()?;

    let bounds = (args.scale_min, args.scale_max);
    let samples = synthesize_batch(&corpus, &table, &backlights, bounds, args.seed)?;

    outputs.create_dir(&args.output)?;
    let mut path_triples = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let degraded_name = format!("{}.png", stems[i]);
        let degraded_path = args.output.join(&degraded_name);
        outputs.will_write(&degraded_path);
        save_image(&degraded_path, &sample.degraded)?;
        path_triples.push((
            image_paths[i].display().to_string(),
            depth_paths[i].display().to_string(),
            degraded_name,
        ));
    }
    let manifest = BatchManifest::from_samples(args.seed, bounds, &samples, &path_triples)?;
    let manifest_path = args.output.join("manifest.json");
    outputs.will_write(&manifest_path);
    save_json(&manifest_path, &manifest)?;
    Ok(())
}

fn estimate_cmd(args: EstimateArgs, outputs: &mut OutputTracker) -> Result<()> {
    require_file(&args.input, "input image")?;
    require_file(&args.depth, "depth map")?;
    let model = load_model(&args.lab_model)?;
    let table = load_table(args.table.as_deref())?;
    let degraded = load_image(&args.input)?;
    let depth = load_depth(&args.depth, args.invert_depth)?;
    let cfg = estimator_config(&args.estimator);
    let est = estimate(&degraded, &depth, &table, &model, &cfg)?;
    outputs.will_write(&args.output);
    save_json(&args.output, &est)?;
    Ok(())
}

/// Accepts either an `estimate` output document or bare parameters.
fn load_params(path: &Path) -> Result<DegradationParams> {
    require_file(path, "parameter file")?;
    let value: serde_json::Value = load_json(path)?;
    let params: DegradationParams = if let Some(inner) = value.get("params") {
        serde_json::from_value(inner.clone())
            .with_context(|| format!("params field of {}", path.display()))?
    } else {
        serde_json::from_value(value)
            .with_context(|| format!("parameter file {}", path.display()))?
    };
    params.validate()?;
    Ok(params)
}

fn restore_cmd(args: RestoreArgs, outputs: &mut OutputTracker) -> Result<()> {
    require_file(&args.input, "input image")?;
    require_file(&args.depth, "depth map")?;
    let params = load_params(&args.params)?;
    let degraded = load_image(&args.input)?;
    let depth_rel = load_depth(&args.depth, args.invert_depth)?;
    let (d_min, d_max) = params.depth_scale;
    let depth = absolutize_depth(&depth_rel, d_min, d_max)?;
    let (restored, _clip) = restore(&degraded, &depth, &params)?;
    outputs.will_write(&args.output);
    save_image(&args.output, &restored)?;
    Ok(())
}

fn enhance_cmd(args: EnhanceArgs, outputs: &mut OutputTracker) -> Result<()> {
    require_file(&args.input, "input image")?;
    require_file(&args.depth, "depth map")?;
    let model = load_model(&args.lab_model)?;
    let table = load_table(args.table.as_deref())?;
    let degraded = load_image(&args.input)?;
    let depth = load_depth(&args.depth, args.invert_depth)?;
    let cfg = estimator_config(&args.estimator);
    let result = enhance(&degraded, &depth, &table, &model, &cfg)?;
    outputs.create_dir(&args.output)?;
    for (name, image) in [
        ("restored.png", &result.restored),
        ("predicted.png", &result.predicted_degraded),
    ] {
        let path = args.output.join(name);
        outputs.will_write(&path);
        save_image(&path, image)?;
    }
    let est_path = args.output.join("estimate.json");
    outputs.will_write(&est_path);
    save_json(&est_path, &result.estimate)?;
    Ok(())
}

/// Score report; reference-dependent entries appear only when inputs allow.
#[derive(Serialize)]
struct ScoreReport {
    uiqm: f64,
    uciqe: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    color_score: Option<f64>,
}

fn score_cmd(args: ScoreArgs, outputs: &mut OutputTracker) -> Result<()> {
    require_file(&args.input, "input image")?;
    if args.depth.is_some() && args.reference.is_none() {
        bail!("--depth only weights the reference loss; it requires --reference");
    }
    let img = load_image(&args.input)?;
    let mut report = ScoreReport {
        uiqm: uiqm(&img, &UiqmConfig::default())?,
        uciqe: uciqe(&img, &UciqeConfig::default())?,
        psnr: None,
        ssim: None,
        reference_loss: None,
        color_score: None,
    };
    if let Some(ref_path) = &args.reference {
        require_file(ref_path, "reference image")?;
        let reference = load_image(ref_path)?;
        report.psnr = Some(psnr(&img, &reference)?);
        report.ssim = Some(ssim(&img, &reference)?);
        if let Some(depth_path) = &args.depth {
            require_file(depth_path, "depth map")?;
            let depth = load_depth(depth_path, args.invert_depth)?;
            let proximity = proximity_from_depth(&depth)?;
            report.reference_loss =
                Some(weighted_reference_loss(&img, &reference, &proximity)?);
        }
    }
    if let Some(model_path) = &args.lab_model {
        let model = load_model(model_path)?;
        report.color_score = Some(lab_score(&img, &model));
    }
    match &args.output {
        Some(path) => {
            outputs.will_write(path);
            save_json(path, &report)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

/// Near pixels carry weight 1, the farthest carry 0.
fn proximity_from_depth(depth: &DepthMap) -> Result<DepthMap> {
    let values = depth.values().iter().map(|v| 1.0 - v).collect();
    Ok(DepthMap::relative(depth.width(), depth.height(), values)?)
}

fn stats_cmd(args: StatsArgs, outputs: &mut OutputTracker) -> Result<()> {
    require_dir(&args.input, "reference directory")?;
    let paths = sorted_files(&args.input, &IMAGE_EXTS)?;
    if paths.is_empty() {
        bail!("no reference images (.png/.ppm) in {}", args.input.display());
    }
    let images: Vec<Image> = paths
        .par_iter()
        .map(|p| load_image(p))
        .collect::<uwphys::Result<_>>()?;
    let model = fit_model(&images, &args.input.display().to_string())?;
    outputs.will_write(&args.output);
    save_json(&args.output, &model)?;
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    name: String,
    psnr: f64,
    ssim: f64,
    uiqm: f64,
    uciqe: f64,
}

#[derive(Serialize)]
struct EvalReport {
    rows: Vec<EvalRow>,
    mean: MetricReport,
}

fn eval_cmd(args: EvalArgs, outputs: &mut OutputTracker) -> Result<()> {
    require_dir(&args.input, "result directory")?;
    require_dir(&args.reference, "reference directory")?;
    let result_paths = sorted_files(&args.input, &IMAGE_EXTS)?;
    if result_paths.is_empty() {
        bail!("no result images (.png/.ppm) in {}", args.input.display());
    }
    for path in &result_paths {
        let name = path.file_name().unwrap();
        if !args.reference.join(name).is_file() {
            bail!(
                "no reference named {:?} in {}",
                name,
                args.reference.display()
            );
        }
    }

    let rows: Vec<EvalRow> = result_paths
        .par_iter()
        .map(|path| {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let result = load_image(path)?;
            let reference = load_image(&args.reference.join(path.file_name().unwrap()))?;
            Ok(EvalRow {
                name,
                psnr: psnr(&result, &reference)?,
                ssim: ssim(&result, &reference)?,
                uiqm: uiqm(&result, &UiqmConfig::default())?,
                uciqe: uciqe(&result, &UciqeConfig::default())?,
            })
        })
        .collect::<Result<_>>()?;

    let n = rows.len() as f64;
    let mean = MetricReport {
        psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        uiqm: rows.iter().map(|r| r.uiqm).sum::<f64>() / n,
        uciqe: rows.iter().map(|r| r.uciqe).sum::<f64>() / n,
    };

    print!("{}", format_table(&rows, &mean));
    if let Some(path) = &args.output {
        outputs.will_write(path);
        save_json(path, &EvalReport { rows, mean })?;
    }
    Ok(())
}

/// Fixed-width table; column layout depends only on row contents.
fn format_table(rows: &[EvalRow], mean: &MetricReport) -> String {
    let name_w = rows
        .iter()
        .map(|r| r.name.len())
        .chain(["name".len(), "mean".len()])
        .max()
        .unwrap();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_w$}  {:>9}  {:>7}  {:>7}  {:>7}",
        "name", "psnr", "ssim", "uiqm", "uciqe"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>9.4}  {:>7.4}  {:>7.4}  {:>7.4}",
            r.name, r.psnr, r.ssim, r.uiqm, r.uciqe
        );
    }
    let _ = writeln!(
        out,
        "{:<name_w$}  {:>9.4}  {:>7.4}  {:>7.4}  {:>7.4}",
        "mean", mean.psnr, mean.ssim, mean.uiqm, mean.uciqe
    );
    out
}
