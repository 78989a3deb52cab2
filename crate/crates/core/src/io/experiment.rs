//! End-to-end experiments: feature extraction, subject-split folds and the
//! frame-rate-halving protocol, rendered into a deterministic report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{ExperimentConfig, FoldSelection, PipelineKind, Protocol};
use crate::error::{Error, Result};
use crate::geom::{icosahedron_axes, PointCloudSequence, SequenceIndex};
use crate::hopc::{holistic_descriptor, HolisticDescriptor};
use crate::learn::eval::HALF_SPLIT_TAG;
use crate::learn::svm::argmax;
use crate::learn::{bow_encode, enumerate_folds, evaluate, kmeans_codebook, svm_train, EvalReport, FoldPipeline, FoldPlan, SampleMeta};
use crate::stkp::{describe_keypoint, detect_stkp, Keypoint};

/// Per-sequence features: one vector (holistic) or a bag of keypoint
/// descriptors.
#[derive(Debug, Clone)]
pub enum Features {
    Vectors(Vec<Vec<f64>>),
    Bags(Vec<Vec<Vec<f64>>>),
}

pub fn extract_holistic(seqs: &[PointCloudSequence], cfg: &ExperimentConfig) -> Result<Vec<HolisticDescriptor>> {
    let axes = icosahedron_axes(cfg.m)?;
    let params = cfg.holistic_params();
    seqs.iter().map(|s| holistic_descriptor(s, &axes, &params)).collect()
}

/// Detected keypoints of one sequence and their view-invariant descriptors.
pub fn extract_keypoints(seq: &PointCloudSequence, cfg: &ExperimentConfig) -> Result<(Vec<Keypoint>, Vec<Vec<f64>>)> {
    let axes = icosahedron_axes(cfg.m)?;
    let kps = detect_stkp(seq, &axes, &cfg.detector_params())?;
    let index = SequenceIndex::new(seq, cfg.r);
    let backend = cfg.backend();
    let desc = kps.par_iter().map(|k| describe_keypoint(&index, k, backend, &axes)).collect::<Result<Vec<_>>>()?;
    Ok((kps, desc))
}

pub fn extract_features(seqs: &[PointCloudSequence], cfg: &ExperimentConfig) -> Result<Features> {
    match cfg.pipeline {
        PipelineKind::Holistic => Ok(Features::Vectors(extract_holistic(seqs, cfg)?.into_iter().map(|h| h.h).collect())),
        PipelineKind::StkpBow => {
            Ok(Features::Bags(seqs.iter().map(|s| extract_keypoints(s, cfg).map(|(_, d)| d)).collect::<Result<_>>()?))
        }
    }
}

/// Trains on rows of one feature set and tests on rows of another; the two
/// coincide except under the speed protocol.
struct CrossPipeline<'a> {
    train: &'a Features,
    test: &'a Features,
    labels: &'a [u32],
    cfg: &'a ExperimentConfig,
}

fn most_frequent(labels: &[u32]) -> u32 {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let counts: Vec<f64> = classes.iter().map(|c| labels.iter().filter(|l| *l == c).count() as f64).collect();
    classes[argmax(&counts)]
}

impl FoldPipeline for CrossPipeline<'_> {
    fn run_fold(&self, train: &[usize], test: &[usize]) -> Result<Vec<u32>> {
        let y: Vec<u32> = train.iter().map(|&i| self.labels[i]).collect();
        let (xtr, xte, empty): (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<bool>) = match (self.train, self.test) {
            (Features::Vectors(a), Features::Vectors(b)) => (
                train.iter().map(|&i| a[i].clone()).collect(),
                test.iter().map(|&i| b[i].clone()).collect(),
                vec![false; test.len()],
            ),
            (Features::Bags(a), Features::Bags(b)) => {
                let pool: Vec<Vec<f64>> = train.iter().flat_map(|&i| a[i].iter().cloned()).collect();
                let book = kmeans_codebook(&pool, self.cfg.k, self.cfg.seed, self.cfg.kmeans_max_iter)?;
                let xtr = train.iter().map(|&i| bow_encode(&a[i], &book).map(|h| h.counts)).collect::<Result<_>>()?;
                let hte = test.iter().map(|&i| bow_encode(&b[i], &book)).collect::<Result<Vec<_>>>()?;
                let empty = hte.iter().map(|h| h.empty).collect();
                (xtr, hte.into_iter().map(|h| h.counts).collect(), empty)
            }
            _ => return Err(Error::data("train and test features come from different pipelines")),
        };
        let model = svm_train(&xtr, &y, self.cfg.c, self.cfg.kernel)?;
        let fallback = most_frequent(&y);
        Ok(xte
            .iter()
            .zip(&empty)
            .map(|(x, &e)| {
                if e {
                    log::warn!("sequence without keypoints predicted as the most frequent training class {fallback}");
                    fallback
                } else {
                    model.predict(x).label
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    /// Named evaluations: `standard`, or `full->decimated` and
    /// `decimated->full` under the speed protocol.
    pub sections: Vec<(String, EvalReport)>,
    /// Wall-clock phases. Not part of [`ReportBundle::report_text`].
    pub timing: Vec<(String, Duration)>,
}

impl ReportBundle {
    pub fn section(&self, name: &str) -> Option<&EvalReport> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn report_text(&self) -> String {
        let mut s = String::from("# config\n");
        s.push_str(&self.config.echo());
        for (name, rep) in &self.sections {
            let _ = write!(s, "\n# {name}\n{}", rep.summary());
        }
        s
    }

    pub fn folds_csv(&self) -> String {
        let mut s = String::new();
        for (name, rep) in &self.sections {
            let _ = write!(s, "# {name}\n{}", rep.to_csv());
        }
        s
    }

    pub fn timing_text(&self) -> String {
        self.timing.iter().map(|(k, d)| format!("{k}: {:.3} s\n", d.as_secs_f64())).collect()
    }

    /// Writes `report.txt`, `folds.csv` and `timing.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.txt"), self.report_text())?;
        fs::write(dir.join("folds.csv"), self.folds_csv())?;
        fs::write(dir.join("timing.txt"), self.timing_text())?;
        Ok(())
    }
}

/// Subject/label tags of a corpus, checked for completeness.
pub fn corpus_meta(data: &[PointCloudSequence]) -> Result<Vec<SampleMeta>> {
    data.iter()
        .enumerate()
        .map(|(i, s)| match (s.subject_id, s.action_label) {
            (Some(subject), Some(label)) => Ok(SampleMeta { subject, label }),
            _ => Err(Error::data(format!("sequence {i} lacks a subject or action tag"))),
        })
        .collect()
}

fn fold_plan(cfg: &ExperimentConfig, meta: &[SampleMeta]) -> Result<FoldPlan> {
    let subjects: Vec<u32> = meta.iter().map(|m| m.subject).collect();
    let mut plan = enumerate_folds(&subjects, cfg.train_count)?;
    if cfg.folds == FoldSelection::Half {
        plan.folds.retain(|f| f.tag.as_deref() == Some(HALF_SPLIT_TAG));
        if plan.folds.is_empty() {
            return Err(Error::config(format!(
                "folds = half needs train_count = {} for {} subjects",
                plan.subjects.len().div_ceil(2),
                plan.subjects.len()
            )));
        }
    }
    Ok(plan)
}

/// Runs the configured pipeline and protocol over a tagged corpus.
/// Configuration and data are validated before any features are computed.
pub fn run_experiment(cfg: &ExperimentConfig, data: &[PointCloudSequence]) -> Result<ReportBundle> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::data("empty corpus"));
    }
    let meta = corpus_meta(data)?;
    if let Some(i) = data.iter().position(|s| s.total_points() == 0) {
        return Err(Error::data(format!("sequence {i} has no points")));
    }
    let mut classes: Vec<u32> = meta.iter().map(|m| m.label).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::data("corpus needs at least two action classes"));
    }
    let plan = fold_plan(cfg, &meta)?;
    let labels: Vec<u32> = meta.iter().map(|m| m.label).collect();
    let mut timing = Vec::new();
    let mut sections = Vec::new();

    let clock = Instant::now();
    let full = extract_features(data, cfg)?;
    timing.push(("features".to_string(), clock.elapsed()));
    match cfg.protocol {
        Protocol::Standard => {
            let clock = Instant::now();
            let p = CrossPipeline { train: &full, test: &full, labels: &labels, cfg };
            sections.push(("standard".to_string(), evaluate(&p, &meta, &plan)?));
            timing.push(("evaluation".to_string(), clock.elapsed()));
        }
        Protocol::Speed => {
            let clock = Instant::now();
            let slow: Vec<PointCloudSequence> = data.iter().map(|s| s.decimate(cfg.decimation)).collect::<Result<_>>()?;
            let dec = extract_features(&slow, cfg)?;
            timing.push(("features (decimated)".to_string(), clock.elapsed()));
            let clock = Instant::now();
            let a = CrossPipeline { train: &full, test: &dec, labels: &labels, cfg };
            sections.push(("full->decimated".to_string(), evaluate(&a, &meta, &plan)?));
            let b = CrossPipeline { train: &dec, test: &full, labels: &labels, cfg };
            sections.push(("decimated->full".to_string(), evaluate(&b, &meta, &plan)?));
            timing.push(("evaluation".to_string(), clock.elapsed()));
        }
    }
    Ok(ReportBundle { config: cfg.clone(), sections, timing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Frame, Point3};

    fn tagged(subject: u32, label: u32) -> PointCloudSequence {
        let f = Frame::new(1, vec![Point3::new(subject as f64, label as f64, 0.0)]);
        PointCloudSequence::new(vec![f], 30.0).unwrap().with_tags(Some(subject), Some(label))
    }

    #[test]
    fn untagged_data_rejected_before_compute() {
        let mut data = vec![tagged(1, 0), tagged(2, 1)];
        data.push(PointCloudSequence::new(vec![Frame::new(1, vec![Point3::origin()])], 30.0).unwrap());
        let err = run_experiment(&ExperimentConfig::default(), &data).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn too_few_subjects_is_config_error() {
        let data = vec![tagged(1, 0), tagged(2, 1)];
        assert!(matches!(run_experiment(&ExperimentConfig::default(), &data), Err(Error::Config(_))));
    }

    #[test]
    fn half_selection_needs_matching_split() {
        let meta: Vec<SampleMeta> = (1..=4).map(|s| SampleMeta { subject: s, label: s % 2 }).collect();
        let cfg = ExperimentConfig { folds: FoldSelection::Half, train_count: 2, ..Default::default() };
        assert_eq!(fold_plan(&cfg, &meta).unwrap().folds.len(), 1);
        let cfg = ExperimentConfig { folds: FoldSelection::Half, train_count: 1, ..Default::default() };
        assert!(fold_plan(&cfg, &meta).is_err());
    }

    #[test]
    fn most_frequent_ties_lowest() {
        assert_eq!(most_frequent(&[3, 1, 3, 1, 2]), 1);
        assert_eq!(most_frequent(&[2, 2, 0]), 2);
    }
}
