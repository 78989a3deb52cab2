//! Experiment configuration as flat `key = value` text.
//!
//! Every key has a default; unknown or repeated keys are errors. The echo
//! lists every key in a fixed order, so two equal configs echo identically.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hopc::HolisticParams;
use crate::learn::KernelKind;
use crate::stkp::{DescriptorBackend, DetectorParams, LocalityParams, ScaleParams, SurfaceGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    Holistic,
    StkpBow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldSelection {
    /// Every `C(n, train_count)` split.
    All,
    /// Only the split training on the subjects at odd positions.
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Standard,
    /// Train at full frame rate and test on decimated sequences, then swap.
    Speed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorKind {
    Surface,
    AlignedHopc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pipeline: PipelineKind,
    pub r: f64,
    pub tau: usize,
    pub adaptive_spatial: bool,
    pub adaptive_temporal: bool,
    pub radii: Vec<f64>,
    pub delta_max: usize,
    pub theta: f64,
    pub m: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_t: usize,
    pub m_x: usize,
    pub m_y: usize,
    pub m_t: usize,
    pub descriptor: DescriptorKind,
    pub r_prime: Option<f64>,
    pub tau_prime: Option<usize>,
    pub eta_min: f64,
    pub top_n: Option<usize>,
    pub stride: usize,
    pub k: usize,
    pub kmeans_max_iter: usize,
    pub c: f64,
    pub kernel: KernelKind,
    pub seed: u64,
    pub train_count: usize,
    pub folds: FoldSelection,
    pub protocol: Protocol,
    pub decimation: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipeline: PipelineKind::Holistic,
            r: 1.0,
            tau: 2,
            adaptive_spatial: false,
            adaptive_temporal: false,
            radii: vec![0.5, 0.75, 1.0, 1.25, 1.5, 2.0],
            delta_max: 8,
            theta: 1.12,
            m: 20,
            n_x: 6,
            n_y: 5,
            n_t: 3,
            m_x: 20,
            m_y: 20,
            m_t: 3,
            descriptor: DescriptorKind::Surface,
            r_prime: None,
            tau_prime: None,
            eta_min: 0.05,
            top_n: None,
            stride: 1,
            k: 1000,
            kmeans_max_iter: 100,
            c: 1.0,
            kernel: KernelKind::HistogramIntersection,
            seed: 0,
            train_count: 5,
            folds: FoldSelection::All,
            protocol: Protocol::Standard,
            decimation: 2,
        }
    }
}

/// Every accepted key, in echo order.
pub const CONFIG_KEYS: &[&str] = &[
    "pipeline",
    "r",
    "tau",
    "adaptive_spatial",
    "adaptive_temporal",
    "radii",
    "delta_max",
    "theta",
    "m",
    "n_x",
    "n_y",
    "n_t",
    "m_x",
    "m_y",
    "m_t",
    "descriptor",
    "r_prime",
    "tau_prime",
    "eta_min",
    "top_n",
    "stride",
    "k",
    "kmeans_max_iter",
    "c",
    "kernel",
    "seed",
    "train_count",
    "folds",
    "protocol",
    "decimation",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(format!("{key}: cannot parse {v:?}")))
}

fn opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "auto" || v == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn show_opt<T: std::fmt::Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), |x| x.to_string())
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if seen.contains(&k) {
                return Err(Error::config(format!("line {}: duplicate key {k:?}", n + 1)));
            }
            seen.push(k);
            cfg.set(k, v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "pipeline" => {
                self.pipeline = match v {
                    "holistic" => PipelineKind::Holistic,
                    "stkp" => PipelineKind::StkpBow,
                    _ => return Err(Error::config(format!("pipeline: expected holistic or stkp, got {v:?}"))),
                }
            }
            "r" => self.r = num(key, v)?,
            "tau" => self.tau = num(key, v)?,
            "adaptive_spatial" => self.adaptive_spatial = flag(key, v)?,
            "adaptive_temporal" => self.adaptive_temporal = flag(key, v)?,
            "radii" => self.radii = v.split(',').map(|s| num(key, s.trim())).collect::<Result<_>>()?,
            "delta_max" => self.delta_max = num(key, v)?,
            "theta" => self.theta = num(key, v)?,
            "m" => self.m = num(key, v)?,
            "n_x" => self.n_x = num(key, v)?,
            "n_y" => self.n_y = num(key, v)?,
            "n_t" => self.n_t = num(key, v)?,
            "m_x" => self.m_x = num(key, v)?,
            "m_y" => self.m_y = num(key, v)?,
            "m_t" => self.m_t = num(key, v)?,
            "descriptor" => {
                self.descriptor = match v {
                    "surface" => DescriptorKind::Surface,
                    "aligned_hopc" => DescriptorKind::AlignedHopc,
                    _ => return Err(Error::config(format!("descriptor: expected surface or aligned_hopc, got {v:?}"))),
                }
            }
            "r_prime" => self.r_prime = opt(key, v)?,
            "tau_prime" => self.tau_prime = opt(key, v)?,
            "eta_min" => self.eta_min = num(key, v)?,
            "top_n" => self.top_n = opt(key, v)?,
            "stride" => self.stride = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "kmeans_max_iter" => self.kmeans_max_iter = num(key, v)?,
            "c" => self.c = num(key, v)?,
            "kernel" => {
                self.kernel = KernelKind::parse(v).ok_or_else(|| Error::config(format!("kernel: expected hik or linear, got {v:?}")))?
            }
            "seed" => self.seed = num(key, v)?,
            "train_count" => self.train_count = num(key, v)?,
            "folds" => {
                self.folds = match v {
                    "all" => FoldSelection::All,
                    "half" => FoldSelection::Half,
                    _ => return Err(Error::config(format!("folds: expected all or half, got {v:?}"))),
                }
            }
            "protocol" => {
                self.protocol = match v {
                    "standard" => Protocol::Standard,
                    "speed" => Protocol::Speed,
                    _ => return Err(Error::config(format!("protocol: expected standard or speed, got {v:?}"))),
                }
            }
            "decimation" => self.decimation = num(key, v)?,
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Text form of one key's current value.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "pipeline" => match self.pipeline {
                PipelineKind::Holistic => "holistic".into(),
                PipelineKind::StkpBow => "stkp".into(),
            },
            "r" => self.r.to_string(),
            "tau" => self.tau.to_string(),
            "adaptive_spatial" => self.adaptive_spatial.to_string(),
            "adaptive_temporal" => self.adaptive_temporal.to_string(),
            "radii" => self.radii.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            "delta_max" => self.delta_max.to_string(),
            "theta" => self.theta.to_string(),
            "m" => self.m.to_string(),
            "n_x" => self.n_x.to_string(),
            "n_y" => self.n_y.to_string(),
            "n_t" => self.n_t.to_string(),
            "m_x" => self.m_x.to_string(),
            "m_y" => self.m_y.to_string(),
            "m_t" => self.m_t.to_string(),
            "descriptor" => match self.descriptor {
                DescriptorKind::Surface => "surface".into(),
                DescriptorKind::AlignedHopc => "aligned_hopc".into(),
            },
            "r_prime" => show_opt(&self.r_prime, "auto"),
            "tau_prime" => show_opt(&self.tau_prime, "auto"),
            "eta_min" => self.eta_min.to_string(),
            "top_n" => show_opt(&self.top_n, "none"),
            "stride" => self.stride.to_string(),
            "k" => self.k.to_string(),
            "kmeans_max_iter" => self.kmeans_max_iter.to_string(),
            "c" => self.c.to_string(),
            "kernel" => self.kernel.name().into(),
            "seed" => self.seed.to_string(),
            "train_count" => self.train_count.to_string(),
            "folds" => match self.folds {
                FoldSelection::All => "all".into(),
                FoldSelection::Half => "half".into(),
            },
            "protocol" => match self.protocol {
                Protocol::Standard => "standard".into(),
                Protocol::Speed => "speed".into(),
            },
            "decimation" => self.decimation.to_string(),
            _ => return None,
        })
    }

    /// Every key with its value, one per line, parseable by [`Self::parse`].
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for k in CONFIG_KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("listed key"));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.m != 20 {
            return Err(Error::config(format!("only m = 20 directions are supported, got {}", self.m)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::config("c must be positive"));
        }
        if self.k == 0 || self.kmeans_max_iter == 0 {
            return Err(Error::config("k and kmeans_max_iter must be >= 1"));
        }
        if self.decimation < 2 && self.protocol == Protocol::Speed {
            return Err(Error::config("speed protocol needs decimation >= 2"));
        }
        if self.m_x == 0 || self.m_y == 0 || self.m_t == 0 {
            return Err(Error::config("surface grid sizes must be >= 1"));
        }
        if self.train_count == 0 {
            return Err(Error::config("train_count must be >= 1"));
        }
        self.holistic_params().scales.validate()?;
        if self.pipeline == PipelineKind::StkpBow {
            self.detector_params().validate()?;
        } else if self.theta <= 1.0 || self.n_x == 0 || self.n_y == 0 || self.n_t == 0 {
            return Err(Error::config("theta must exceed 1 and cell counts must be >= 1"));
        }
        Ok(())
    }

    pub fn scale_params(&self) -> ScaleParams {
        ScaleParams {
            r: self.r,
            tau: self.tau,
            radii: self.adaptive_spatial.then(|| self.radii.clone()),
            delta_max: self.adaptive_temporal.then_some(self.delta_max),
        }
    }

    pub fn holistic_params(&self) -> HolisticParams {
        HolisticParams { n_x: self.n_x, n_y: self.n_y, n_t: self.n_t, scales: self.scale_params(), theta: self.theta, stride: self.stride }
    }

    pub fn detector_params(&self) -> DetectorParams {
        let def = LocalityParams::defaults_for(self.r, self.tau);
        let locality = (self.r_prime.is_some() || self.tau_prime.is_some()).then(|| LocalityParams {
            r_prime: self.r_prime.unwrap_or(def.r_prime),
            tau_prime: self.tau_prime.unwrap_or(def.tau_prime),
        });
        DetectorParams {
            scales: self.scale_params(),
            theta: self.theta,
            locality,
            eta_min: self.eta_min,
            top_n: self.top_n,
            stride: self.stride,
        }
    }

    pub fn backend(&self) -> DescriptorBackend {
        match self.descriptor {
            DescriptorKind::Surface => DescriptorBackend::Surface(SurfaceGrid { m_x: self.m_x, m_y: self.m_y, m_t: self.m_t }),
            DescriptorKind::AlignedHopc => DescriptorBackend::AlignedHopc,
        }
    }
}
