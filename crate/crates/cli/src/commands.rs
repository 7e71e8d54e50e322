use std::fs;
use std::path::{Path, PathBuf};

use defocus_core::cache::{cache_path, cached_framework, default_cache_dir, CacheStatus};
use defocus_core::io::{load_gray, save_blur_raster, save_blur_visualization, save_gray};
use defocus_core::optics::{
    c_m_from_c_max, c_max_background, c_max_bounded, c_max_foreground, decimation_warning,
    recommend_decimation, recommend_decimation_pow2, solve_focal_length, CMax, CameraSettings,
    Distance,
};
use defocus_core::parallel::with_workers;
use defocus_core::reconstruct::reconstruct_and_score;
use defocus_core::resample::decimate as decimate_image;
use defocus_core::sharpness::{evaluate_pair, write_table, PairEvaluation, TableRow};
use defocus_core::synth::{apply_sigma_field, linear_sigma_field, Axis};
use defocus_core::{estimate_blur_map, BlurMap, Framework, GrayImage, RunConfig};
use serde::{Deserialize, Serialize};

use crate::report::{CliError, CliResult, Report};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackDistance {
    Finite(f64),
    Infinity,
}

impl From<BackDistance> for Distance {
    fn from(d: BackDistance) -> Self {
        match d {
            BackDistance::Finite(v) => Distance::Finite(v),
            BackDistance::Infinity => Distance::Infinity,
        }
    }
}

/// Loads (or builds and caches) the framework for `config`.
fn framework(config: &RunConfig) -> CliResult<(Framework, String)> {
    let sg = config.sigma_grid()?;
    let rg = config.radial_grid()?;
    let dir = default_cache_dir();
    let (fw, status) = cached_framework(&dir, &sg, &rg)?;
    let path = cache_path(&dir, &sg, &rg);
    let note = match status {
        CacheStatus::Hit => format!("hit {}", path.display()),
        CacheStatus::Stored => format!("stored {}", path.display()),
        CacheStatus::Unwritable => format!("unwritable {}", path.display()),
    };
    Ok((fw, note))
}

fn run<T: Send>(config: &RunConfig, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    config.validate()?;
    with_workers(config.worker_count, f)?
}

/// Decimates and clips filter overshoot back into `[0, 1]`; returns the
/// number of clipped pixels.
fn decimate_clamped(img: &GrayImage, factor: usize) -> CliResult<(GrayImage, usize)> {
    let small = decimate_image(img, factor)?;
    let clipped = small
        .pixels()
        .iter()
        .filter(|v| !(0.0..=1.0).contains(*v))
        .count();
    Ok((small.map(|v| v.clamp(0.0, 1.0)), clipped))
}

fn load_input(config: &RunConfig, path: &Path) -> CliResult<GrayImage> {
    let img = load_gray(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    if config.decimation_factor > 1 {
        Ok(decimate_clamped(&img, config.decimation_factor)?.0)
    } else {
        Ok(img)
    }
}

#[derive(Serialize)]
struct SynthResult {
    image: PathBuf,
    width: usize,
    height: usize,
    axis: Axis,
    sigma_start: f64,
    sigma_end: f64,
    sigma_mae_percent: f64,
    recon_mae: f64,
    recon_max_abs: f64,
    coverage: f64,
}

pub fn synth_eval(
    config: &RunConfig,
    image: &Path,
    range: (f64, f64),
    axis: Axis,
) -> CliResult<()> {
    run(config, || {
        let left =
            load_gray(image).map_err(|e| CliError::Runtime(format!("{}: {e}", image.display())))?;
        let (w, h) = left.dims();
        let field = linear_sigma_field(w, h, range.0, range.1, axis)?;
        let right = apply_sigma_field(&left, &field)?;
        let (fw, cache) = framework(config)?;
        let map = estimate_blur_map(&left, &right, &fw, None, &config.estimate_params())?;
        let (mut sum, mut n) = (0.0, 0usize);
        for y in 0..h {
            for x in 0..w {
                if let Some(s) = map.sigma_at(x, y) {
                    sum += (s - field.get(x, y)).abs() / field.get(x, y);
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(CliError::Invalid(
                "no pixel received a valid estimate".into(),
            ));
        }
        let recon = reconstruct_and_score(&left, &right, &map, None)?;

        let out = &config.output_dir;
        fs::create_dir_all(out)?;
        save_gray(&right, out.join("blurred.png"))?;
        save_blur_raster(&map, out.join("sigma_hat.dfbm"))?;
        save_blur_visualization(&map, out.join("sigma_hat.pgm"))?;
        let lo = range.0.min(range.1);
        let hi = range.0.max(range.1);
        let truth: Vec<Option<f64>> = field.values().iter().map(|&s| Some(s)).collect();
        let truth = BlurMap::from_parts(w, h, &truth, &vec![0.0; w * h], (lo, hi))?;
        save_blur_raster(&truth, out.join("sigma_true.dfbm"))?;
        if let Some(r_hat) = &recon.r_hat {
            save_gray(r_hat, out.join("reconstruction.png"))?;
        }

        let result = SynthResult {
            image: image.to_path_buf(),
            width: w,
            height: h,
            axis,
            sigma_start: range.0,
            sigma_end: range.1,
            sigma_mae_percent: 100.0 * sum / n as f64,
            recon_mae: recon.mae,
            recon_max_abs: recon.max_abs,
            coverage: map.valid_fraction(),
        };
        println!(
            "{}",
            Report::new("synth-eval", config, Some(cache), result).save(out)?
        );
        Ok(())
    })
}

#[derive(Serialize)]
struct EstimateResult {
    left: PathBuf,
    right: PathBuf,
    width: usize,
    height: usize,
    valid_fraction: f64,
    floor_fraction: f64,
    sigma_mean: Option<f64>,
    recon_mae: Option<f64>,
    recon_max_abs: Option<f64>,
}

pub fn estimate(config: &RunConfig, left_path: &Path, right_path: &Path) -> CliResult<()> {
    run(config, || {
        let left = load_input(config, left_path)?;
        let right = load_input(config, right_path)?;
        left.ensure_same_dims(&right)?;
        let (fw, cache) = framework(config)?;
        let map = estimate_blur_map(&left, &right, &fw, None, &config.estimate_params())?;
        let out = &config.output_dir;
        fs::create_dir_all(out)?;
        save_blur_raster(&map, out.join("blur.dfbm"))?;
        save_blur_visualization(&map, out.join("blur.pgm"))?;

        let valid = map.valid().count();
        let recon = if valid > 0 {
            let r = reconstruct_and_score(&left, &right, &map, None)?;
            if let Some(r_hat) = &r.r_hat {
                save_gray(r_hat, out.join("reconstruction.png"))?;
            }
            Some(r)
        } else {
            None
        };
        let total = map.width() * map.height();
        let sigma_sum: f64 = map.sigmas().iter().filter(|s| !s.is_nan()).sum();
        let result = EstimateResult {
            left: left_path.to_path_buf(),
            right: right_path.to_path_buf(),
            width: map.width(),
            height: map.height(),
            valid_fraction: map.valid_fraction(),
            floor_fraction: map.floor().count() as f64 / total as f64,
            sigma_mean: (valid > 0).then(|| sigma_sum / valid as f64),
            recon_mae: recon.as_ref().map(|r| r.mae),
            recon_max_abs: recon.as_ref().map(|r| r.max_abs),
        };
        println!(
            "{}",
            Report::new("estimate", config, Some(cache), result).save(out)?
        );
        Ok(())
    })
}

#[derive(Debug, Clone, Deserialize)]
pub struct PairInput {
    #[serde(rename = "dataset_id")]
    pub id: String,
    pub ib: PathBuf,
    #[serde(rename = "if")]
    pub i_f: PathBuf,
}

/// Reads a `dataset_id,ib,if` manifest; relative paths are taken from the
/// manifest's directory.
pub fn read_manifest(path: &Path) -> CliResult<Vec<PairInput>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for row in reader.deserialize::<PairInput>() {
        let mut p = row.map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        p.ib = base.join(&p.ib);
        p.i_f = base.join(&p.i_f);
        pairs.push(p);
    }
    if pairs.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no pairs listed",
            path.display()
        )));
    }
    Ok(pairs)
}

#[derive(Serialize)]
struct PairResult {
    dataset_id: String,
    evaluation: PairEvaluation,
}

pub fn evaluate_pairs(config: &RunConfig, pairs: &[PairInput]) -> CliResult<()> {
    run(config, || {
        let (fw, cache) = framework(config)?;
        let mut rows = Vec::new();
        for p in pairs {
            let ib = load_input(config, &p.ib)?;
            let i_f = load_input(config, &p.i_f)?;
            let evaluation = evaluate_pair(&ib, &i_f, &fw, &config.pair_params())?;
            rows.push(TableRow {
                dataset_id: p.id.clone(),
                evaluation,
            });
        }
        let out = &config.output_dir;
        fs::create_dir_all(out)?;
        let mut table = Vec::new();
        write_table(&mut table, &rows)?;
        fs::write(out.join("results.csv"), &table)?;
        let result: Vec<PairResult> = rows
            .into_iter()
            .map(|r| PairResult {
                dataset_id: r.dataset_id,
                evaluation: r.evaluation,
            })
            .collect();
        Report::new("evaluate-pair", config, Some(cache), result).save(out)?;
        print!("{}", String::from_utf8_lossy(&table));
        Ok(())
    })
}

#[derive(Serialize)]
struct Blur {
    exact_mm: f64,
    approx_mm: f64,
    exact_pitches: f64,
    approx_pitches: f64,
}

impl Blur {
    fn new(c: CMax, s: &CameraSettings) -> Self {
        Self {
            exact_mm: c.exact_mm,
            approx_mm: c.approx_mm,
            exact_pitches: s.mm_to_pitches(c.exact_mm),
            approx_pitches: s.mm_to_pitches(c.approx_mm),
        }
    }
}

#[derive(Serialize)]
struct Bounded {
    eta: f64,
    c_max_mm: f64,
    c_max_pitches: f64,
    c_m_mm: f64,
    focal_length_for_c_m_mm: f64,
}

#[derive(Serialize)]
struct OpticsResult {
    focal_mm: f64,
    f_number: f64,
    focus_dist_mm: f64,
    background: BackDistance,
    pixel_pitch_um: f64,
    c_o_mm: f64,
    c_o_pitches: f64,
    c_max: Blur,
    c_max_background_focus: Blur,
    recommended_decimation: usize,
    recommended_decimation_pow2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounded: Option<Bounded>,
}

pub fn optics(
    config: &RunConfig,
    f: f64,
    f_number: f64,
    df: f64,
    db: BackDistance,
    pitch: f64,
    eta: Option<f64>,
) -> CliResult<()> {
    let s = CameraSettings::new(f, f_number, df, pitch)?;
    let fore = c_max_foreground(df, db.into(), f, f_number)?;
    let back = c_max_background(df, db.into(), f, f_number)?;
    let pitches = s.mm_to_pitches(fore.exact_mm);
    let recommended = recommend_decimation(pitches)?;
    let bounded = match eta {
        Some(eta) => {
            let c_max_mm = c_max_bounded(&s, eta)?;
            let c_m_mm = c_m_from_c_max(fore.exact_mm, eta)?;
            Some(Bounded {
                eta,
                c_max_mm,
                c_max_pitches: s.mm_to_pitches(c_max_mm),
                c_m_mm,
                focal_length_for_c_m_mm: solve_focal_length(c_m_mm, f_number, df)?,
            })
        }
        None => None,
    };
    let result = OpticsResult {
        focal_mm: f,
        f_number,
        focus_dist_mm: df,
        background: db,
        pixel_pitch_um: pitch,
        c_o_mm: s.coc_at_infinity(),
        c_o_pitches: s.mm_to_pitches(s.coc_at_infinity()),
        c_max: Blur::new(fore, &s),
        c_max_background_focus: Blur::new(back, &s),
        recommended_decimation: recommended,
        recommended_decimation_pow2: recommend_decimation_pow2(pitches)?,
        warning: decimation_warning(pitches, recommended),
        bounded,
    };
    println!("{}", Report::new("optics", config, None, result).to_json()?);
    Ok(())
}

#[derive(Serialize)]
struct DecimateResult {
    input: PathBuf,
    output: PathBuf,
    factor: usize,
    input_size: (usize, usize),
    output_size: (usize, usize),
    clipped_pixels: usize,
}

pub fn decimate(config: &RunConfig, input: &Path, output: &Path) -> CliResult<()> {
    run(config, || {
        let img =
            load_gray(input).map_err(|e| CliError::Runtime(format!("{}: {e}", input.display())))?;
        let (small, clipped_pixels) = decimate_clamped(&img, config.decimation_factor)?;
        if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        save_gray(&small, output)?;
        let result = DecimateResult {
            input: input.to_path_buf(),
            output: output.to_path_buf(),
            factor: config.decimation_factor,
            input_size: img.dims(),
            output_size: small.dims(),
            clipped_pixels,
        };
        println!(
            "{}",
            Report::new("decimate", config, None, result).to_json()?
        );
        Ok(())
    })
}
