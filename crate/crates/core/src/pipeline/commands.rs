//! Batch commands. Each one reads a manifest, processes records on a worker
//! pool, writes per-record output files plus a stamp, and reports failing
//! records without letting them affect the others.
//!
//! Records are processed in id order, so outputs do not depend on the order
//! of lines in the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::fixtures::{generate_scene, FixtureSpec};
use super::io::{
    read_depth_png, read_image_png, read_label_png, read_logits, write_depth_png, write_image_png,
    write_label_png, write_logits,
};
use super::manifest::{FieldKind, Manifest, ManifestRecord};
use super::palette::colorize;
use super::stamp::Stamp;
use super::weights_file::WeightsFile;
use super::{with_workers, RunConfig};
use crate::classes::ClassTable;
use crate::classweights::{ClassWeights, FrequencyCounter, WeightMode};
use crate::dbst::{replica_id, synthesize_one, SampleSource, SynthConfig, SynthSample};
use crate::error::{Error, Result};
use crate::fusion::{decide_labels, fuse, fuse_labels, FusionConfig};
use crate::metrics::ConfusionMatrix;
use crate::raster::{check_dims, LabelMap};

pub const PARTIAL_MARKER: &str = "PARTIAL";
pub const FAILURES_FILE: &str = "failures.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordFailure {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub outputs: usize,
    pub failures: Vec<RecordFailure>,
}

impl RunReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    fn collect(results: Vec<(String, Result<usize>)>) -> Self {
        let mut report = RunReport::default();
        for (id, r) in results {
            match r {
                Ok(n) => report.outputs += n,
                Err(e) => report.failures.push(RecordFailure {
                    id,
                    message: e.to_string(),
                }),
            }
        }
        report
    }

    /// Writes the failure listing and the partial-output marker, or removes
    /// stale ones from an earlier run.
    fn finish(&self, out: &Path) -> Result<()> {
        let marker = out.join(PARTIAL_MARKER);
        let listing = out.join(FAILURES_FILE);
        if self.failures.is_empty() {
            for p in [marker, listing] {
                if p.exists() {
                    fs::remove_file(p)?;
                }
            }
            return Ok(());
        }
        let mut text = String::new();
        for f in &self.failures {
            let _ = writeln!(text, "{}\t{}", f.id, f.message.replace('\n', "; "));
        }
        fs::write(listing, text)?;
        fs::write(
            marker,
            format!(
                "{} record(s) failed; outputs in this directory are incomplete. See {FAILURES_FILE}.\n",
                self.failures.len()
            ),
        )?;
        Ok(())
    }
}

fn prepare_out(run: &RunConfig, subdirs: &[&str]) -> Result<()> {
    run.validate()?;
    for d in subdirs {
        fs::create_dir_all(run.out_dir.join(d))?;
    }
    fs::create_dir_all(&run.out_dir)?;
    Ok(())
}

fn sorted_records(manifest: &Manifest) -> Vec<ManifestRecord> {
    let mut recs = manifest.records.clone();
    recs.sort_by(|a, b| a.id.cmp(&b.id));
    recs
}

/// Manifest-relative names and resolved paths of the given fields.
fn input_files(
    manifest: &Manifest,
    records: &[ManifestRecord],
    kinds: &[FieldKind],
) -> Vec<(String, PathBuf)> {
    let mut files = Vec::new();
    for r in records {
        for &k in kinds {
            if let Some(p) = r.field(k) {
                files.push((p.display().to_string(), manifest.resolve(p)));
            }
        }
    }
    files
}

type FileWrite<'a> = (PathBuf, Box<dyn FnOnce(&Path) -> Result<()> + 'a>);

/// Writes a record's files; if any write fails, the ones already written are
/// removed so the record leaves nothing behind.
fn write_record(writes: Vec<FileWrite<'_>>) -> Result<usize> {
    let mut done: Vec<PathBuf> = Vec::new();
    let n = writes.len();
    for (path, write) in writes {
        if let Err(e) = write(&path) {
            let _ = fs::remove_file(&path);
            for p in done {
                let _ = fs::remove_file(p);
            }
            return Err(e);
        }
        done.push(path);
    }
    Ok(n)
}

fn absolute(p: PathBuf) -> PathBuf {
    fs::canonicalize(&p).unwrap_or(p)
}

fn class_json(table: &ClassTable) -> serde_json::Value {
    serde_json::to_value(table).expect("class table serializes")
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightsOptions {
    pub delta: f64,
    pub mode: WeightMode,
}

impl Default for WeightsOptions {
    fn default() -> Self {
        WeightsOptions {
            delta: crate::classweights::DEFAULT_DELTA,
            mode: WeightMode::Normalized,
        }
    }
}

/// Computes class frequencies over the manifest's label maps and writes
/// `weights.toml`.
pub fn cmd_weights(
    run: &RunConfig,
    manifest: &Manifest,
    opts: &WeightsOptions,
) -> Result<(RunReport, WeightsFile)> {
    manifest.require(&[FieldKind::Label])?;
    prepare_out(run, &[])?;
    let records = sorted_records(manifest);
    let table = &run.classes;
    let counted: Vec<(String, Result<FrequencyCounter>)> = with_workers(run.workers, || {
        records
            .par_iter()
            .map(|r| {
                let res = manifest.path(r, FieldKind::Label).and_then(|p| {
                    let map = read_label_png(&p, table)?;
                    let mut c = FrequencyCounter::new(table.len());
                    c.add(&map, table)?;
                    Ok(c)
                });
                (r.id.clone(), res)
            })
            .collect()
    })?;
    let mut total = FrequencyCounter::new(table.len());
    let mut results = Vec::new();
    for (id, c) in counted {
        results.push((
            id,
            c.map(|c| {
                total.merge(&c);
                0
            }),
        ));
    }
    let mut report = RunReport::collect(results);
    let stats = total.finish()?;
    let weights = ClassWeights::from_stats(&stats, opts.delta, opts.mode)?;
    let file = WeightsFile::new(table, &stats, opts.delta, &weights);
    file.write(&run.out_dir.join("weights.toml"))?;
    report.outputs = 1;
    Stamp::new(
        "weights",
        json!({ "classes": class_json(table), "options": opts }),
        None,
        &input_files(manifest, &records, &[FieldKind::Label]),
    )?
    .write(&run.out_dir)?;
    report.finish(&run.out_dir)?;
    Ok((report, file))
}

#[derive(Debug, Clone)]
pub struct FuseOptions {
    pub weights: WeightsFile,
    pub temperature: f64,
    pub save_scores: bool,
    pub colorize: bool,
}

/// Fuses both branches of every record into label PNGs under `labels/`
/// (plus `scores/` and `color/` when asked) and writes `manifest.jsonl`
/// pointing at the fused labels as pseudo-labels.
pub fn cmd_fuse(run: &RunConfig, manifest: &Manifest, opts: &FuseOptions) -> Result<RunReport> {
    manifest.require(&[FieldKind::LogitsDep, FieldKind::LogitsUda])?;
    opts.weights.check_against(&run.classes)?;
    let cfg = FusionConfig::new(opts.temperature, opts.weights.weights())?;
    let mut dirs = vec!["labels"];
    if opts.save_scores {
        dirs.push("scores");
    }
    if opts.colorize {
        dirs.push("color");
    }
    prepare_out(run, &dirs)?;
    let records = sorted_records(manifest);
    let out = &run.out_dir;
    let table = &run.classes;

    let results: Vec<(String, Result<usize>)> = with_workers(run.workers, || {
        records
            .par_iter()
            .map(|r| {
                let res = (|| {
                    let dep = read_logits(&manifest.path(r, FieldKind::LogitsDep)?)?;
                    let uda = read_logits(&manifest.path(r, FieldKind::LogitsUda)?)?;
                    let (labels, scores) = if opts.save_scores {
                        let s = fuse(&dep, &uda, &cfg)?;
                        (decide_labels(&s), Some(s.to_logit_tensor()))
                    } else {
                        (fuse_labels(&dep, &uda, &cfg)?, None)
                    };
                    let mut writes: Vec<FileWrite> = Vec::new();
                    let l2 = labels.clone();
                    writes.push((
                        out.join("labels").join(format!("{}.png", r.id)),
                        Box::new(move |p| write_label_png(p, &l2)),
                    ));
                    if let Some(s) = scores {
                        writes.push((
                            out.join("scores").join(format!("{}.lgt", r.id)),
                            Box::new(move |p| write_logits(p, &s)),
                        ));
                    }
                    if opts.colorize {
                        let c = colorize(&labels, table);
                        writes.push((
                            out.join("color").join(format!("{}.png", r.id)),
                            Box::new(move |p| write_image_png(p, &c)),
                        ));
                    }
                    write_record(writes)
                })();
                (r.id.clone(), res)
            })
            .collect()
    })?;

    let ok: Vec<ManifestRecord> = records
        .iter()
        .zip(&results)
        .filter(|(_, (_, res))| res.is_ok())
        .map(|(r, _)| ManifestRecord {
            id: r.id.clone(),
            image_path: r.image_path.as_ref().map(|p| absolute(manifest.resolve(p))),
            depth_path: r.depth_path.as_ref().map(|p| absolute(manifest.resolve(p))),
            label_path: Some(PathBuf::from("labels").join(format!("{}.png", r.id))),
            ..Default::default()
        })
        .collect();
    Manifest::write(&out.join("manifest.jsonl"), &ok)?;

    let report = RunReport::collect(results);
    Stamp::new(
        "fuse",
        json!({
            "classes": class_json(table),
            "temperature": opts.temperature,
            "weights": opts.weights,
            "save_scores": opts.save_scores,
            "colorize": opts.colorize,
        }),
        None,
        &input_files(
            manifest,
            &records,
            &[FieldKind::LogitsDep, FieldKind::LogitsUda],
        ),
    )?
    .write(out)?;
    report.finish(out)?;
    Ok(report)
}

/// Manifest-backed pool that loads and checks records on demand.
struct ManifestPool<'a> {
    manifest: &'a Manifest,
    records: &'a [ManifestRecord],
    table: &'a ClassTable,
    depth_scale: f64,
}

impl SampleSource for ManifestPool<'_> {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn id(&self, index: usize) -> &str {
        &self.records[index].id
    }

    fn load(&self, index: usize) -> Result<SynthSample> {
        let r = &self.records[index];
        let ctx = |e: Error| Error::MissingInput(format!("record `{}`: {e}", r.id));
        let image = read_image_png(&self.manifest.path(r, FieldKind::Image)?).map_err(ctx)?;
        let depth = read_depth_png(&self.manifest.path(r, FieldKind::Depth)?, self.depth_scale)
            .map_err(ctx)?;
        let label =
            read_label_png(&self.manifest.path(r, FieldKind::Label)?, self.table).map_err(ctx)?;
        check_dims(image.dims(), depth.dims()).map_err(ctx)?;
        check_dims(image.dims(), label.dims()).map_err(ctx)?;
        Ok(SynthSample {
            image,
            depth,
            label,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub synth: SynthConfig,
}

/// Synthesizes the augmented dataset into `images/` and `labels/` and writes
/// `manifest.jsonl` for it.
pub fn cmd_synth(run: &RunConfig, manifest: &Manifest, opts: &SynthOptions) -> Result<RunReport> {
    manifest.require(&[FieldKind::Image, FieldKind::Depth, FieldKind::Label])?;
    opts.synth.validate()?;
    prepare_out(run, &["images", "labels"])?;
    let records = sorted_records(manifest);
    let pool = ManifestPool {
        manifest,
        records: &records,
        table: &run.classes,
        depth_scale: run.depth_scale,
    };
    let cfg = &opts.synth;
    let out = &run.out_dir;
    let jobs: Vec<(usize, usize)> = (0..records.len())
        .flat_map(|b| (0..cfg.samples_per_base).map(move |r| (b, r)))
        .collect();

    let results: Vec<(String, Result<usize>)> = with_workers(run.workers, || {
        jobs.par_iter()
            .map(|&(b, k)| {
                let id = replica_id(&records[b].id, k);
                let res = synthesize_one(&pool, b, k, cfg).and_then(|o| {
                    let (img, lbl) = (o.image, o.label);
                    write_record(vec![
                        (
                            out.join("images").join(format!("{id}.png")),
                            Box::new(move |p: &Path| write_image_png(p, &img)),
                        ),
                        (
                            out.join("labels").join(format!("{id}.png")),
                            Box::new(move |p: &Path| write_label_png(p, &lbl)),
                        ),
                    ])
                });
                (id, res)
            })
            .collect()
    })?;

    let ok: Vec<ManifestRecord> = results
        .iter()
        .filter(|(_, r)| r.is_ok())
        .map(|(id, _)| ManifestRecord {
            id: id.clone(),
            image_path: Some(PathBuf::from("images").join(format!("{id}.png"))),
            label_path: Some(PathBuf::from("labels").join(format!("{id}.png"))),
            ..Default::default()
        })
        .collect();
    Manifest::write(&out.join("manifest.jsonl"), &ok)?;

    let report = RunReport::collect(results);
    Stamp::new(
        "synth",
        json!({
            "classes": class_json(&run.classes),
            "depth_scale": run.depth_scale,
            "n_images": cfg.n_images,
            "percentile": cfg.percentile,
            "things": cfg.things.ids(),
            "samples_per_base": cfg.samples_per_base,
            "include_base": cfg.include_base,
            "augment": cfg.augment,
        }),
        Some(cfg.seed),
        &input_files(
            manifest,
            &records,
            &[FieldKind::Image, FieldKind::Depth, FieldKind::Label],
        ),
    )?
    .write(out)?;
    report.finish(out)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Dep,
    Uda,
}

/// What `eval` compares against the manifest's ground-truth labels.
#[derive(Debug, Clone)]
pub enum EvalSource {
    /// Label PNGs named `<id>.png` in a directory.
    Predictions(PathBuf),
    /// Argmax of one branch's logits.
    Branch(Branch),
    /// Fused prediction of both branches.
    Fused {
        weights: WeightsFile,
        temperature: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassIou {
    pub id: u8,
    pub name: String,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub miou: f64,
    pub acc: f64,
    pub pixels: u64,
    pub per_class: Vec<ClassIou>,
}

impl EvalSummary {
    fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<4} {:<16} {:>7}", "id", "class", "IoU");
        for c in &self.per_class {
            let iou = c
                .iou
                .map_or("n/a".to_string(), |v| format!("{:.2}", 100.0 * v));
            let _ = writeln!(s, "{:<4} {:<16} {:>7}", c.id, c.name, iou);
        }
        let _ = writeln!(s, "mIoU {:.2}", 100.0 * self.miou);
        let _ = writeln!(s, "Acc  {:.2}", 100.0 * self.acc);
        s
    }
}

/// Accumulates a confusion matrix over all records and writes `eval.txt`
/// and `metrics.json`.
pub fn cmd_eval(
    run: &RunConfig,
    manifest: &Manifest,
    source: &EvalSource,
) -> Result<(RunReport, EvalSummary)> {
    let table = &run.classes;
    let needs: Vec<FieldKind> = match source {
        EvalSource::Predictions(_) => vec![FieldKind::Label],
        EvalSource::Branch(Branch::Dep) => vec![FieldKind::Label, FieldKind::LogitsDep],
        EvalSource::Branch(Branch::Uda) => vec![FieldKind::Label, FieldKind::LogitsUda],
        EvalSource::Fused { .. } => {
            vec![FieldKind::Label, FieldKind::LogitsDep, FieldKind::LogitsUda]
        }
    };
    manifest.require(&needs)?;
    let fusion = match source {
        EvalSource::Fused {
            weights,
            temperature,
        } => {
            weights.check_against(table)?;
            Some(FusionConfig::new(*temperature, weights.weights())?)
        }
        _ => None,
    };
    let records = sorted_records(manifest);
    if let EvalSource::Predictions(dir) = source {
        let missing: Vec<String> = records
            .iter()
            .map(|r| dir.join(format!("{}.png", r.id)))
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingInput(format!(
                "predictions not found: {}",
                missing.join(", ")
            )));
        }
    }
    prepare_out(run, &[])?;

    let predict = |r: &ManifestRecord| -> Result<LabelMap> {
        match source {
            EvalSource::Predictions(dir) => {
                read_label_png(&dir.join(format!("{}.png", r.id)), table)
            }
            EvalSource::Branch(Branch::Dep) => {
                Ok(read_logits(&manifest.path(r, FieldKind::LogitsDep)?)?.argmax())
            }
            EvalSource::Branch(Branch::Uda) => {
                Ok(read_logits(&manifest.path(r, FieldKind::LogitsUda)?)?.argmax())
            }
            EvalSource::Fused { .. } => {
                let dep = read_logits(&manifest.path(r, FieldKind::LogitsDep)?)?;
                let uda = read_logits(&manifest.path(r, FieldKind::LogitsUda)?)?;
                fuse_labels(&dep, &uda, fusion.as_ref().unwrap())
            }
        }
    };
    let matrices: Vec<(String, Result<ConfusionMatrix>)> = with_workers(run.workers, || {
        records
            .par_iter()
            .map(|r| {
                let res = (|| {
                    let gt = read_label_png(&manifest.path(r, FieldKind::Label)?, table)?;
                    let pred = predict(r)?;
                    let mut cm = ConfusionMatrix::new(table.len());
                    cm.accumulate(&gt, &pred, table)?;
                    Ok(cm)
                })();
                (r.id.clone(), res)
            })
            .collect()
    })?;
    let mut cm = ConfusionMatrix::new(table.len());
    let mut results = Vec::new();
    for (id, m) in matrices {
        let r = m.and_then(|m| cm.merge(&m).map(|_| 0));
        results.push((id, r));
    }
    let mut report = RunReport::collect(results);
    let (miou, acc) = cm.miou_and_acc()?;
    let summary = EvalSummary {
        miou,
        acc,
        pixels: cm.total(),
        per_class: cm
            .iou_per_class()
            .into_iter()
            .zip(table.classes())
            .map(|(iou, c)| ClassIou {
                id: c.id,
                name: c.name.clone(),
                iou,
            })
            .collect(),
    };
    let out = &run.out_dir;
    fs::write(out.join("eval.txt"), summary.table())?;
    let mut js = serde_json::to_string_pretty(&summary).expect("summary serializes");
    js.push('\n');
    fs::write(out.join("metrics.json"), js)?;
    report.outputs = 2;

    let mut inputs = input_files(manifest, &records, &needs);
    let source_cfg = match source {
        EvalSource::Predictions(dir) => {
            for r in &records {
                let name = format!("{}.png", r.id);
                inputs.push((format!("predictions/{name}"), dir.join(name)));
            }
            json!({ "predictions": true })
        }
        EvalSource::Branch(b) => json!({ "branch": b }),
        EvalSource::Fused {
            weights,
            temperature,
        } => {
            json!({ "fused": { "weights": weights, "temperature": temperature } })
        }
    };
    Stamp::new(
        "eval",
        json!({ "classes": class_json(table), "source": source_cfg }),
        None,
        &inputs,
    )?
    .write(out)?;
    report.finish(out)?;
    Ok((report, summary))
}

/// Writes a synthetic dataset (images, depth, labels, both logit branches),
/// its `manifest.jsonl` and `classes.toml`.
pub fn cmd_fixtures(run: &RunConfig, spec: &FixtureSpec) -> Result<RunReport> {
    spec.validate()?;
    let dirs = ["images", "depth", "labels", "logits_dep", "logits_uda"];
    prepare_out(run, &dirs)?;
    let out = &run.out_dir;
    let table = &run.classes;
    let scale = run.depth_scale;
    let rel = |dir: &str, id: &str, ext: &str| PathBuf::from(dir).join(format!("{id}.{ext}"));

    let results: Vec<(String, Result<usize>)> = with_workers(run.workers, || {
        (0..spec.scenes)
            .into_par_iter()
            .map(|i| {
                let id = super::fixtures::scene_id(i);
                let res = generate_scene(spec, table, i).and_then(|s| {
                    let SceneSample {
                        id: sid,
                        image,
                        depth,
                        label,
                        logits_dep,
                        logits_uda,
                    } = s;
                    let (label, dep, uda) =
                        (label.unwrap(), logits_dep.unwrap(), logits_uda.unwrap());
                    write_record(vec![
                        (
                            out.join(rel("images", &sid, "png")),
                            Box::new(move |p: &Path| write_image_png(p, &image)),
                        ),
                        (
                            out.join(rel("depth", &sid, "png")),
                            Box::new(move |p: &Path| write_depth_png(p, &depth, scale)),
                        ),
                        (
                            out.join(rel("labels", &sid, "png")),
                            Box::new(move |p: &Path| write_label_png(p, &label)),
                        ),
                        (
                            out.join(rel("logits_dep", &sid, "lgt")),
                            Box::new(move |p: &Path| write_logits(p, &dep)),
                        ),
                        (
                            out.join(rel("logits_uda", &sid, "lgt")),
                            Box::new(move |p: &Path| write_logits(p, &uda)),
                        ),
                    ])
                });
                (id, res)
            })
            .collect()
    })?;

    let records: Vec<ManifestRecord> = results
        .iter()
        .filter(|(_, r)| r.is_ok())
        .map(|(id, _)| ManifestRecord {
            id: id.clone(),
            image_path: Some(rel("images", id, "png")),
            depth_path: Some(rel("depth", id, "png")),
            label_path: Some(rel("labels", id, "png")),
            logits_dep_path: Some(rel("logits_dep", id, "lgt")),
            logits_uda_path: Some(rel("logits_uda", id, "lgt")),
        })
        .collect();
    Manifest::write(&out.join("manifest.jsonl"), &records)?;
    fs::write(out.join("classes.toml"), table.to_toml())?;

    let report = RunReport::collect(results);
    Stamp::new(
        "fixtures",
        json!({ "classes": class_json(table), "depth_scale": scale, "spec": spec }),
        Some(spec.seed),
        &[],
    )?
    .write(out)?;
    report.finish(out)?;
    Ok(report)
}

use crate::raster::SceneSample;
