//! Directory-level runs behind the `leukoseg` binary: segmentation with mask,
//! overlay and manifest output, evaluation against ground-truth masks, and
//! phantom dataset generation.
//!
//! Every run returns an [`Outcome`]; an `Err` means the invocation itself was
//! unusable (bad config, no inputs, unwritable output directory).

use std::collections::BTreeMap;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evalsynth::{
    evaluate, generate_phantom, summarize, EvalReport, LeukocyteSpec, PhantomParams, ReportSummary,
};
use crate::imagecore::io::{read_mask, read_rgb, write_gray, write_mask, write_rgb};
use crate::imagecore::{BinaryMask, RasterImage, Roi};
use crate::ivfs::Channel;
use crate::pipeline::{segment_with_debug, PipelineConfig, Segmentation, SiteFailure};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const PHANTOM_MANIFEST: &str = "phantoms.json";

const OVERLAY_RED: [u8; 3] = [255, 0, 0];

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PartialFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::PartialFailure => 1,
        }
    }
}

/// Process exit code for an invocation that could not run at all.
pub const EXIT_INVALID: i32 = 2;

/// Loads a pipeline config from TOML; missing keys keep their defaults.
pub fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    let config: PipelineConfig = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

/// Loads phantom parameters from TOML; missing keys keep their defaults.
pub fn load_phantom_params(path: Option<&Path>) -> anyhow::Result<PhantomParams> {
    let params: PhantomParams = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading params {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing params {}", p.display()))?
        }
        None => PhantomParams::default(),
    };
    params.validate()?;
    Ok(params)
}

/// Parses `N..M` (inclusive) or a single `N`.
pub fn parse_seed_range(text: &str) -> anyhow::Result<RangeInclusive<u64>> {
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (text.trim(), text.trim()),
    };
    let lo: u64 = lo.parse().with_context(|| format!("bad seed {lo:?}"))?;
    let hi: u64 = hi.parse().with_context(|| format!("bad seed {hi:?}"))?;
    if lo > hi {
        bail!("empty seed range {lo}..{hi}");
    }
    Ok(lo..=hi)
}

fn build_pool(threads: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn is_input_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("png" | "ppm" | "pnm")
    )
}

/// Expands directories into their PNG/PPM files, sorted by name.
pub fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_input_image(f))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no input images");
    }
    Ok(out)
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

/// Splits `key_role[_rest]` into key and role; names without a role tag give `None`.
pub fn pairing_key(file_stem: &str) -> Option<(&str, &str)> {
    let (key, rest) = file_stem.split_once('_')?;
    let role = rest.split('_').next().unwrap_or(rest);
    Some((key, role))
}

/// Paints mask borders (foreground pixels with a background 4-neighbour) red.
pub fn overlay(img: &RasterImage, masks: &[&BinaryMask]) -> RasterImage {
    let mut out = img.clone();
    for m in masks {
        for (x, y) in m.foreground() {
            let (xi, yi) = (x as i64, y as i64);
            let edge = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|(dx, dy)| !m.get_signed(xi + dx, yi + dy));
            if edge {
                out.set(x, y, OVERLAY_RED);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct SegmentArgs {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub debug: bool,
    pub threads: Option<usize>,
    /// Ground-truth directory; when set a report is written alongside the masks.
    pub gt: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFlags {
    pub debug: bool,
    pub gt_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub site: usize,
    pub roi: Roi,
    pub channel: Channel,
    pub threshold: u8,
    pub dec: Option<f64>,
    pub cell_area: usize,
    pub nucleus_area: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub site: usize,
    pub roi: Roi,
    pub reason: String,
}

impl From<&SiteFailure> for FailureRecord {
    fn from(f: &SiteFailure) -> Self {
        Self {
            site: f.site,
            roi: f.roi,
            reason: f.reason.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub path: PathBuf,
    pub stem: String,
    /// Wall time to read and segment the image.
    pub millis: f64,
    pub sites: Vec<SiteRecord>,
    pub site_failures: Vec<FailureRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub config: Option<PathBuf>,
    pub flags: RunFlags,
    pub images: Vec<ImageRecord>,
    /// Mean of the per-image times, in seconds.
    pub atpis_seconds: f64,
}

impl RunManifest {
    pub fn mean_millis(&self) -> f64 {
        if self.images.is_empty() {
            return 0.0;
        }
        self.images.iter().map(|r| r.millis).sum::<f64>() / self.images.len() as f64
    }
}

struct Processed {
    record: ImageRecord,
    image: Option<RasterImage>,
    seg: Option<Segmentation>,
}

fn process_one(path: &Path, config: &PipelineConfig, debug: bool) -> Processed {
    let stem = stem_of(path);
    let start = Instant::now();
    let run = read_rgb(path).and_then(|img| segment_with_debug(&img, config, debug).map(|s| (img, s)));
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let mut record = ImageRecord {
        path: path.to_path_buf(),
        stem,
        millis,
        sites: Vec::new(),
        site_failures: Vec::new(),
        error: None,
    };
    match run {
        Ok((img, seg)) => {
            record.sites = seg
                .results
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let w = r.winner();
                    SiteRecord {
                        site: k,
                        roi: r.site.combined_roi,
                        channel: r.winning_channel,
                        threshold: w.threshold,
                        dec: w.scores.map(|s| s.dec),
                        cell_area: r.cell_mask.count(),
                        nucleus_area: r.nucleus_mask.count(),
                    }
                })
                .collect();
            record.site_failures = seg.failures.iter().map(FailureRecord::from).collect();
            Processed {
                record,
                image: Some(img),
                seg: Some(seg),
            }
        }
        Err(e) => {
            record.error = Some(e.to_string());
            Processed {
                record,
                image: None,
                seg: None,
            }
        }
    }
}

fn write_artifacts(out: &Path, stem: &str, img: &RasterImage, seg: &Segmentation) -> anyhow::Result<()> {
    let mut cells = Vec::new();
    for (k, r) in seg.results.iter().enumerate() {
        write_mask(&out.join(format!("{stem}_cell_{k}.png")), &r.cell_mask)?;
        write_mask(&out.join(format!("{stem}_nucleus_{k}.png")), &r.nucleus_mask)?;
        cells.push(&r.cell_mask);
    }
    write_mask(&out.join(format!("{stem}_cell.png")), &seg.cell_union())?;
    write_rgb(&out.join(format!("{stem}_overlay.png")), &overlay(img, &cells))?;
    for d in &seg.debug {
        let site = d.site.map_or_else(|| "all".to_string(), |s| s.to_string());
        write_gray(&out.join(format!("{stem}_{site}_{}.png", d.stage)), &d.image)?;
    }
    Ok(())
}

/// Segments every input image and writes masks, overlays and the manifest.
pub fn run_segment(args: &SegmentArgs) -> anyhow::Result<(Outcome, RunManifest)> {
    let config = load_config(args.config.as_deref())?;
    let inputs = collect_inputs(&args.inputs)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let pool = build_pool(args.threads)?;

    let processed: Vec<Processed> =
        pool.install(|| inputs.par_iter().map(|p| process_one(p, &config, args.debug)).collect());

    let mut images = Vec::with_capacity(processed.len());
    let mut gt_pairs = Vec::new();
    for p in processed {
        let mut record = p.record;
        if let (Some(img), Some(seg)) = (&p.image, &p.seg) {
            if let Err(e) = write_artifacts(&args.out, &record.stem, img, seg) {
                record.error = Some(format!("writing outputs: {e:#}"));
            } else {
                gt_pairs.push((record.stem.clone(), seg.cell_union()));
            }
        }
        images.push(record);
    }

    let mut manifest = RunManifest {
        inputs,
        output_dir: args.out.clone(),
        config: args.config.clone(),
        flags: RunFlags {
            debug: args.debug,
            gt_dir: args.gt.clone(),
            threads: args.threads,
        },
        images,
        atpis_seconds: 0.0,
    };
    manifest.atpis_seconds = manifest.mean_millis() / 1e3;
    let failed = manifest.images.iter().any(|r| r.error.is_some());

    let mut outcome = if failed {
        Outcome::PartialFailure
    } else {
        Outcome::Success
    };
    if let Some(gt_dir) = &args.gt {
        let decisions = decisions_by_key(&manifest);
        let preds: BTreeMap<String, BinaryMask> = gt_pairs.into_iter().collect();
        let report = evaluate_pairs(&preds, &read_role_masks(gt_dir, "cell")?, &decisions)?;
        if !report.unpaired.is_empty() {
            outcome = Outcome::PartialFailure;
        }
        report.write(&args.out)?;
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(args.out.join(MANIFEST_NAME), json + "\n")?;
    Ok((outcome, manifest))
}

/// One evaluated image pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub image: String,
    pub sites: Option<usize>,
    pub sa: f64,
    pub or_rate: f64,
    pub ur_rate: f64,
    pub er_rate: f64,
    /// Winning decision values of the image's sites, `;`-separated.
    pub dec: String,
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRun {
    pub rows: Vec<EvalRow>,
    #[serde(skip)]
    pub reports: Vec<EvalReport>,
    pub summary: Option<ReportSummary>,
    /// Stems present on only one side.
    pub unpaired: Vec<String>,
}

impl EvalRun {
    /// Writes the per-pair CSV (with mean and SD rows) and the JSON report.
    pub fn write(&self, out: &Path) -> anyhow::Result<()> {
        let mut csv = csv::Writer::from_path(out.join(REPORT_CSV))?;
        for row in &self.rows {
            csv.serialize(row)?;
        }
        if let Some(s) = &self.summary {
            let rows = [
                ("mean", [s.sa_mean, s.or_mean, s.ur_mean, s.er_mean]),
                ("sd", [s.sa_sd, s.or_sd, s.ur_sd, s.er_sd]),
            ];
            for (label, [sa, or_rate, ur_rate, er_rate]) in rows {
                csv.serialize(EvalRow {
                    image: label.into(),
                    sites: None,
                    sa,
                    or_rate,
                    ur_rate,
                    er_rate,
                    dec: String::new(),
                    channel: String::new(),
                })?;
            }
        }
        csv.flush()?;
        fs::write(out.join(REPORT_JSON), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

type Decisions = BTreeMap<String, (usize, String, String)>;

fn decisions_by_key(manifest: &RunManifest) -> Decisions {
    manifest
        .images
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| {
            let dec = r
                .sites
                .iter()
                .map(|s| s.dec.map_or("".into(), |d| format!("{d:.4}")))
                .collect::<Vec<_>>();
            let ch = r.sites.iter().map(|s| s.channel.to_string()).collect::<Vec<_>>();
            (r.stem.clone(), (r.sites.len(), dec.join(";"), ch.join(";")))
        })
        .collect()
}

/// Reads every `<key>_<role>.{png,pgm,ppm,pnm}` mask of a directory, keyed by `key`.
pub fn read_role_masks(dir: &Path, role: &str) -> anyhow::Result<BTreeMap<String, BinaryMask>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        let ext_ok = matches!(
            p.extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase)
                .as_deref(),
            Some("png" | "pgm" | "ppm" | "pnm")
        );
        if !ext_ok || !p.is_file() {
            continue;
        }
        let stem = stem_of(&p);
        let Some((key, r)) = pairing_key(&stem) else { continue };
        // Only the exact `<key>_<role>` name pairs; `<key>_<role>_<k>` are per-site files.
        if r != role || stem.len() != key.len() + 1 + role.len() {
            continue;
        }
        let mask = read_mask(&p).with_context(|| format!("reading {}", p.display()))?;
        out.insert(key.to_string(), mask);
    }
    Ok(out)
}

fn evaluate_pairs(
    preds: &BTreeMap<String, BinaryMask>,
    gts: &BTreeMap<String, BinaryMask>,
    decisions: &Decisions,
) -> anyhow::Result<EvalRun> {
    if gts.is_empty() {
        bail!("no ground-truth masks found");
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut unpaired = Vec::new();
    for (key, gt) in gts {
        let Some(pred) = preds.get(key) else {
            unpaired.push(key.clone());
            continue;
        };
        let r = match evaluate(gt, pred) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("skipping {key}: {e}");
                unpaired.push(key.clone());
                continue;
            }
        };
        let (sites, dec, channel) = decisions
            .get(key)
            .cloned()
            .map_or((None, String::new(), String::new()), |(n, d, c)| (Some(n), d, c));
        rows.push(EvalRow {
            image: key.clone(),
            sites,
            sa: r.sa,
            or_rate: r.or_rate,
            ur_rate: r.ur_rate,
            er_rate: r.er_rate,
            dec,
            channel,
        });
        reports.push(r);
    }
    unpaired.extend(preds.keys().filter(|k| !gts.contains_key(*k)).cloned());
    unpaired.sort();
    for k in &unpaired {
        eprintln!("unpaired: {k}");
    }
    Ok(EvalRun {
        rows,
        summary: summarize(&reports),
        reports,
        unpaired,
    })
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    /// Directory of `<key>_cell.*` prediction masks, as written by a segment run.
    pub pred: PathBuf,
    pub gt: PathBuf,
    /// Report directory; defaults to the prediction directory.
    pub out: Option<PathBuf>,
}

/// Pairs prediction and ground-truth cell masks by key and writes the report.
pub fn run_eval(args: &EvalArgs) -> anyhow::Result<(Outcome, EvalRun)> {
    let gts = read_role_masks(&args.gt, "cell")?;
    if gts.is_empty() {
        bail!("no ground-truth masks in {}", args.gt.display());
    }
    let preds = read_role_masks(&args.pred, "cell")?;
    let decisions = match fs::read_to_string(args.pred.join(MANIFEST_NAME)) {
        Ok(text) => decisions_by_key(&serde_json::from_str(&text).context("parsing prediction manifest")?),
        Err(_) => Decisions::new(),
    };
    let run = evaluate_pairs(&preds, &gts, &decisions)?;
    let out = args.out.clone().unwrap_or_else(|| args.pred.clone());
    fs::create_dir_all(&out)?;
    run.write(&out)?;
    let outcome = if run.unpaired.is_empty() {
        Outcome::Success
    } else {
        Outcome::PartialFailure
    };
    Ok((outcome, run))
}

#[derive(Debug, Clone)]
pub struct PhantomArgs {
    pub params: Option<PathBuf>,
    pub seeds: RangeInclusive<u64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomRecord {
    pub seed: u64,
    pub stem: String,
    pub leukocytes: Vec<LeukocyteSpec>,
    pub erythrocytes: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomManifest {
    pub params: PhantomParams,
    pub phantoms: Vec<PhantomRecord>,
}

pub fn phantom_stem(seed: u64) -> String {
    format!("phantom{seed:04}")
}

/// Writes `phantomNNNN.png` with its `_cell`, `_nucleus` and `_rbc` PGM masks per seed.
pub fn run_phantoms(args: &PhantomArgs) -> anyhow::Result<(Outcome, PhantomManifest)> {
    let params = load_phantom_params(args.params.as_deref())?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let seeds: Vec<u64> = args.seeds.clone().collect();
    let generated: Vec<_> = seeds.par_iter().map(|&s| (s, generate_phantom(&params, s))).collect();
    let mut phantoms = Vec::new();
    for (seed, g) in generated {
        let stem = phantom_stem(seed);
        let record = match g {
            Ok(p) => {
                write_rgb(&args.out.join(format!("{stem}.png")), &p.image)?;
                write_mask(&args.out.join(format!("{stem}_cell.pgm")), &p.gt_cell)?;
                write_mask(&args.out.join(format!("{stem}_nucleus.pgm")), &p.gt_nucleus)?;
                write_mask(&args.out.join(format!("{stem}_rbc.pgm")), &p.gt_rbc)?;
                PhantomRecord {
                    seed,
                    stem,
                    leukocytes: p.leukocytes,
                    erythrocytes: p.erythrocytes.len(),
                    error: None,
                }
            }
            Err(e) => PhantomRecord {
                seed,
                stem,
                leukocytes: Vec::new(),
                erythrocytes: 0,
                error: Some(e.to_string()),
            },
        };
        phantoms.push(record);
    }
    let manifest = PhantomManifest { params, phantoms };
    fs::write(
        args.out.join(PHANTOM_MANIFEST),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    let outcome = if manifest.phantoms.iter().any(|p| p.error.is_some()) {
        Outcome::PartialFailure
    } else {
        Outcome::Success
    };
    Ok((outcome, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("1..10").unwrap(), 1..=10);
        assert_eq!(parse_seed_range("3").unwrap(), 3..=3);
        assert_eq!(parse_seed_range("2..=4").unwrap(), 2..=4);
        assert!(parse_seed_range("5..1").is_err());
        assert!(parse_seed_range("a..b").is_err());
    }

    #[test]
    fn pairing_keys() {
        assert_eq!(pairing_key("phantom0001_cell"), Some(("phantom0001", "cell")));
        assert_eq!(pairing_key("img_cell_2"), Some(("img", "cell")));
        assert_eq!(pairing_key("plain"), None);
    }

    #[test]
    fn overlay_marks_only_the_border() {
        let img = RasterImage::filled(9, 9, [0, 0, 0]).unwrap();
        let m = BinaryMask::from_fn(9, 9, |x, y| (2..=6).contains(&x) && (2..=6).contains(&y));
        let o = overlay(&img, &[&m]);
        assert_eq!(o.get(2, 4), OVERLAY_RED);
        assert_eq!(o.get(4, 4), [0, 0, 0]);
        assert_eq!(o.get(1, 4), [0, 0, 0]);
        let red = o.pixels().iter().filter(|p| **p == OVERLAY_RED).count();
        assert_eq!(red, 16);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = PipelineConfig {
            alpha: 0.8,
            beta: 0.2,
            search: crate::pipeline::SearchConfig {
                half_width: 30,
                ..Default::default()
            },
            ..Default::default()
        };
        let text = toml::to_string(&c).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        let partial: PipelineConfig = toml::from_str("alpha = 0.6\nbeta = 0.4\n[ccir]\nmax_iterations = 4\n").unwrap();
        assert_eq!(partial.alpha, 0.6);
        assert_eq!(partial.ccir.max_iterations, 4);
        assert_eq!(partial.search, PipelineConfig::default().search);
        let half: PipelineConfig = toml::from_str("[hsg]\nw1 = 0.5\n").unwrap();
        assert_eq!(half.hsg.w2, PipelineConfig::default().hsg.w2);
        assert!(toml::from_str::<PipelineConfig>("alpah = 0.7\n").is_err());
        assert!(toml::from_str::<PipelineConfig>("[ccir]\nmax_iteration = 3\n").is_err());
    }
}
