use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde_json::json;
use tsr_core::anchors::{dataset_stats, grid_best_ious, AnchorConfig, Coverage, TABLE_ASPECT_RATIOS};
use tsr_core::cocoeval::{evaluate_corpus, MatchConfig};
use tsr_core::formats::{generate_fixtures, write_atomic, AnnotationFile, FileKind, FixtureSpec, ImageRecord};
use tsr_core::kernels::run_invariant_checks;
use tsr_core::labelspace::{decode_pseudo, encode_pseudo};
use tsr_core::misalign::{misalignment_report, write_report_csv, MisalignFixture, PerturbationSpec};
use tsr_core::reconstruct::{build_grid, grid_to_html, ReconstructionConfig};
use tsr_core::teds::{corpus_teds, Complexity, TedsPair};
use tsr_core::{AnnotationSet, Error, LabelMode, Result};

use crate::Command;

/// Per-image failures of a run that otherwise completed.
pub type Failures = Vec<(String, Error)>;

const DEFAULT_MISALIGN_SPECS: [&str; 5] = ["dilate:0", "dilate:1", "snap:1", "shrink:3", "merge:1"];

pub fn run(command: Command) -> Result<Failures> {
    match command {
        Command::Stats { gt, histogram } => stats(&gt, histogram.as_deref()),
        Command::Anchors { gt, ratios } => anchors(&gt, ratios),
        Command::EncodeLabels {
            input,
            output,
            tolerance,
        } => encode_labels(&input, &output, tolerance),
        Command::DecodeLabels { input, output } => decode_labels(&input, &output),
        Command::Reconstruct {
            predictions,
            output,
            threshold,
        } => reconstruct(&predictions, &output, threshold),
        Command::Teds {
            html_dir,
            gt,
            per_sample,
        } => teds(&html_dir, &gt, per_sample.as_deref()),
        Command::CocoEval { predictions, gt, json } => coco_eval(&predictions, &gt, json.as_deref()),
        Command::Misalign { gt, specs, output } => misalign(&gt, specs, output.as_deref()),
        Command::KernelsCheck { seed } => kernels_check(seed),
        Command::Generate {
            output,
            tables,
            seed,
            span_probability,
            header_probability,
            projected_row_probability,
            min_rows,
            max_rows,
            min_cols,
            max_cols,
        } => generate(
            &output,
            &FixtureSpec {
                n_tables: tables,
                min_rows,
                max_rows,
                min_cols,
                max_cols,
                span_probability,
                header_probability,
                projected_row_probability,
                seed,
                ..FixtureSpec::default()
            },
        ),
    }
}

fn load(path: &Path, kind: FileKind) -> Result<AnnotationFile> {
    let loaded = AnnotationFile::load(path, kind)?;
    for w in &loaded.warnings {
        warn!("{}: {w}", path.display());
    }
    Ok(loaded.file)
}

/// Annotation sets in multi-label form, decoding pseudo classes if needed.
fn multi_label_sets(file: &AnnotationFile) -> Result<Vec<AnnotationSet>> {
    let sets = file.annotation_sets()?;
    match file.mode() {
        LabelMode::MultiLabel => Ok(sets),
        LabelMode::SingleLabel => sets.iter().map(decode_pseudo).collect(),
    }
}

fn fmt4(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn stats(gt: &Path, histogram: Option<&Path>) -> Result<Failures> {
    let file = load(gt, FileKind::GroundTruth)?;
    let s = dataset_stats(&file.annotation_sets()?)?;
    println!("images: {}", s.n_images);
    println!("objects: {}", s.n_objects);
    println!("avg objects/image: {:.2}", s.avg_objects_per_image);
    if let Some(path) = histogram {
        let mut buf = Vec::new();
        s.write_histogram_csv(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    Ok(Vec::new())
}

fn anchors(gt: &Path, ratios: Option<Vec<f64>>) -> Result<Failures> {
    let ratios = ratios.unwrap_or_else(|| TABLE_ASPECT_RATIOS.to_vec());
    let cfg = AnchorConfig::with_ratios(ratios)?;
    let file = load(gt, FileKind::GroundTruth)?;
    let mut best = Vec::new();
    for (img, set) in file.images.iter().zip(file.annotation_sets()?) {
        let boxes: Vec<_> = set.instances.iter().map(|i| i.bbox).collect();
        best.extend(grid_best_ious(&cfg, img.width as f64, img.height as f64, &boxes));
    }
    let cov = Coverage::from_best_ious(&best)?;
    let listed: Vec<String> = cfg.aspect_ratios().iter().map(|r| r.to_string()).collect();
    println!("ratios: {}", listed.join(","));
    println!("ground truths: {}", best.len());
    println!("best IoU >= 0.5: {:.4}", cov.fraction_iou_50);
    println!("best IoU >= 0.7: {:.4}", cov.fraction_iou_70);
    println!("mean best IoU: {:.4}", cov.mean_best_iou);
    Ok(Vec::new())
}

/// Rewrites each image through `f`, keeping image-level metadata.
fn transform_file(
    file: &AnnotationFile,
    mode: LabelMode,
    f: impl Fn(&AnnotationSet) -> Result<AnnotationSet>,
) -> Result<(AnnotationFile, Failures)> {
    let mut images = Vec::new();
    let mut failures = Vec::new();
    for (img, set) in file.images.iter().zip(file.annotation_sets()?) {
        match f(&set) {
            Ok(out) => {
                let mut rec = ImageRecord::from_annotation_set(&out, img.width, img.height);
                rec.html = img.html.clone();
                rec.extra = img.extra.clone();
                images.push(rec);
            }
            Err(e) => failures.push((img.image_id.clone(), e)),
        }
    }
    let mut out = AnnotationFile::new(mode, images);
    out.extra = file.extra.clone();
    Ok((out, failures))
}

fn encode_labels(input: &Path, output: &Path, tolerance: f64) -> Result<Failures> {
    let file = load(input, FileKind::Detections)?;
    let (out, failures) = transform_file(&file, LabelMode::SingleLabel, |s| encode_pseudo(s, tolerance))?;
    out.save(output)?;
    Ok(failures)
}

fn decode_labels(input: &Path, output: &Path) -> Result<Failures> {
    let file = load(input, FileKind::Detections)?;
    let (out, failures) = transform_file(&file, LabelMode::MultiLabel, decode_pseudo)?;
    out.save(output)?;
    Ok(failures)
}

fn html_path(dir: &Path, image_id: &str) -> Result<PathBuf> {
    if image_id.is_empty() || image_id.contains(['/', '\\']) || image_id.starts_with('.') {
        return Err(Error::InvalidInput(format!("image id `{image_id}` is not a safe file name")));
    }
    Ok(dir.join(format!("{image_id}.html")))
}

fn reconstruct(predictions: &Path, output: &Path, threshold: Option<f64>) -> Result<Failures> {
    let file = load(predictions, FileKind::Detections)?;
    let mut cfg = ReconstructionConfig::default();
    if let Some(t) = threshold {
        cfg.score_thresholds = [t; 7];
    }
    cfg.validate()?;
    fs::create_dir_all(output).map_err(|e| Error::Io {
        path: output.to_path_buf(),
        source: e,
    })?;
    let mut failures = Vec::new();
    for (img, set) in file.images.iter().zip(multi_label_sets(&file)?) {
        let written = build_grid(&set, &cfg)
            .and_then(|grid| write_atomic(html_path(output, &img.image_id)?, grid_to_html(&grid).as_bytes()));
        if let Err(e) = written {
            failures.push((img.image_id.clone(), e));
        }
    }
    println!("wrote {} of {} tables", file.images.len() - failures.len(), file.images.len());
    Ok(failures)
}

fn teds(html_dir: &Path, gt: &Path, per_sample: Option<&Path>) -> Result<Failures> {
    let file = load(gt, FileKind::GroundTruth)?;
    let mut failures = Vec::new();
    let mut pairs = Vec::new();
    for img in &file.images {
        let Some(gt_html) = img.html.clone() else {
            failures.push((
                img.image_id.clone(),
                Error::InvalidInput("ground truth has no html".into()),
            ));
            continue;
        };
        let path = html_path(html_dir, &img.image_id)?;
        let predicted_html = match fs::read_to_string(&path) {
            Ok(s) => s.trim().to_string(),
            Err(e) => {
                failures.push((img.image_id.clone(), Error::Io { path, source: e }));
                String::new()
            }
        };
        pairs.push(TedsPair {
            sample_id: img.image_id.clone(),
            predicted_html,
            ground_truth_html: gt_html,
        });
    }
    let report = corpus_teds(&pairs)?;
    for p in &report.pairs {
        if let Some(msg) = &p.prediction_error {
            if !failures.iter().any(|(id, _)| id == &p.sample_id) {
                failures.push((p.sample_id.clone(), Error::Corpus {
                    sample: p.sample_id.clone(),
                    message: format!("prediction does not parse: {msg}"),
                }));
            }
        }
    }
    let count = |c| report.pairs.iter().filter(|p| p.complexity == c).count();
    println!("Simple   {}  (n={})", fmt4(report.simple_mean), count(Complexity::Simple));
    println!("Complex  {}  (n={})", fmt4(report.complex_mean), count(Complexity::Complex));
    println!("Overall  {}  (n={})", fmt4(report.overall_mean), report.pairs.len());
    if let Some(path) = per_sample {
        let mut text = String::from("sample,complexity,teds\n");
        for p in &report.pairs {
            let c = match p.complexity {
                Complexity::Simple => "simple",
                Complexity::Complex => "complex",
            };
            text.push_str(&format!("{},{c},{:.6}\n", p.sample_id, p.score));
        }
        write_atomic(path, text.as_bytes())?;
    }
    Ok(failures)
}

fn coco_eval(predictions: &Path, gt: &Path, json_out: Option<&Path>) -> Result<Failures> {
    let pred_file = load(predictions, FileKind::Detections)?;
    let gt_file = load(gt, FileKind::GroundTruth)?;
    let (preds, gts) = if pred_file.mode() == gt_file.mode() {
        (pred_file.annotation_sets()?, gt_file.annotation_sets()?)
    } else {
        (multi_label_sets(&pred_file)?, multi_label_sets(&gt_file)?)
    };
    let r = evaluate_corpus(&preds, &gts, &MatchConfig::default())?;
    let lines = [
        ("AP", r.mean_ap),
        ("AP50", r.ap50),
        ("AP75", r.ap75),
        ("AP_small", r.ap_small),
        ("AP_medium", r.ap_medium),
        ("AP_large", r.ap_large),
    ];
    for (name, v) in lines {
        println!("{name} = {}", fmt4(v));
    }
    for (class, ap) in &r.per_class {
        println!("  {class}: {ap:.4}");
    }
    if let Some(path) = json_out {
        let per_class: serde_json::Map<String, serde_json::Value> =
            r.per_class.iter().map(|(c, ap)| (c.name().to_string(), json!(ap))).collect();
        let mut doc = serde_json::Map::new();
        for (name, v) in lines {
            doc.insert(name.to_string(), json!(v));
        }
        doc.insert("per_class".into(), serde_json::Value::Object(per_class));
        let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
    }
    Ok(Vec::new())
}

fn misalign(gt: &Path, specs: Vec<PerturbationSpec>, output: Option<&Path>) -> Result<Failures> {
    let specs = if specs.is_empty() {
        DEFAULT_MISALIGN_SPECS.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?
    } else {
        specs
    };
    let fixtures = MisalignFixture::from_file(&load(gt, FileKind::GroundTruth)?)?;
    let rows = misalignment_report(&fixtures, &specs)?;
    println!("{:<14} {:>8} {:>8}", "spec", "mAP", "TEDS");
    for r in &rows {
        println!("{:<14} {:>8.4} {:>8.4}", r.spec.label(), r.mean_ap, r.teds);
    }
    if let Some(path) = output {
        let mut buf = Vec::new();
        write_report_csv(&rows, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    Ok(Vec::new())
}

fn kernels_check(seed: u64) -> Result<Failures> {
    let mut failures = Vec::new();
    for c in run_invariant_checks(seed)? {
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            failures.push((c.name.to_string(), Error::Numerical(c.detail)));
        }
    }
    Ok(failures)
}

fn generate(output: &Path, spec: &FixtureSpec) -> Result<Failures> {
    let fx = generate_fixtures(spec)?;
    fs::create_dir_all(output).map_err(|e| Error::Io {
        path: output.to_path_buf(),
        source: e,
    })?;
    fx.ground_truth.save(output.join("gt.json"))?;
    fx.predictions.save(output.join("pred.json"))?;
    println!("wrote {} tables to {}", spec.n_tables, output.display());
    Ok(Vec::new())
}
