//! Threshold presets and layered configuration.
//!
//! Precedence, lowest first: built-in defaults, `--preset`, config file,
//! explicit command-line flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::localizer::LocalizerConfig;
use crate::solver::SolverConfig;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "ESSLOC_CONFIG";

/// Number of retrieved database images kept per query.
pub const TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Indoor,
    Outdoor,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indoor" => Ok(SceneKind::Indoor),
            "outdoor" => Ok(SceneKind::Outdoor),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

/// How the pairwise essential matrices are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Regressed essential matrices (EssNet / NC-EssNet); no inner RANSAC.
    EssNet,
    /// SIFT matches + minimal solver in RANSAC.
    Sift5Pt,
    /// Learned matches + minimal solver in RANSAC.
    LearnableMatching,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "essnet" => Ok(Method::EssNet),
            "sift5pt" => Ok(Method::Sift5Pt),
            "learnable-matching" => Ok(Method::LearnableMatching),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// RANSAC thresholds for one method and scene type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Inner two-view threshold in pixels; `None` when there is no inner loop.
    pub t1_pixels: Option<f64>,
    /// Pair inlier angle in degrees.
    pub t2_degrees: f64,
}

pub fn ransac_thresholds(method: Method, scene: SceneKind) -> Thresholds {
    let (t1_pixels, t2_degrees) = match (method, scene) {
        (Method::EssNet, _) => (None, 5.0),
        (Method::Sift5Pt, SceneKind::Indoor) => (Some(0.5), 15.0),
        (Method::Sift5Pt, SceneKind::Outdoor) => (Some(0.5), 5.0),
        (Method::LearnableMatching, SceneKind::Indoor) => (Some(5.5), 20.0),
        (Method::LearnableMatching, SceneKind::Outdoor) => (Some(4.0), 15.0),
    };
    Thresholds {
        t1_pixels,
        t2_degrees,
    }
}

/// Pair-selection window `[a, b]` in meters.
pub fn pair_window(scene: SceneKind) -> (f64, f64) {
    match scene {
        SceneKind::Indoor => (0.05, 10.0),
        SceneKind::Outdoor => (3.0, 50.0),
    }
}

/// Two-view solver settings with the threshold kept in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub t1_pixels: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub min_inliers: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSettings {
            t1_pixels: 0.5,
            max_iterations: d.max_iterations,
            confidence: d.confidence,
            min_inliers: d.min_inliers,
        }
    }
}

impl SolverSettings {
    /// Converts to normalized units using the given focal length.
    pub fn to_solver_config(&self, focal: f64, seed: u64) -> SolverConfig {
        SolverConfig {
            inlier_threshold_t1: self.t1_pixels / focal,
            max_iterations: self.max_iterations,
            confidence: self.confidence,
            min_inliers: self.min_inliers,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub solver: SolverSettings,
    pub localizer: LocalizerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            solver: SolverSettings::default(),
            localizer: LocalizerConfig {
                top_k: TOP_K,
                ..LocalizerConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub t1_pixels: Option<f64>,
    pub max_iterations: Option<usize>,
    pub confidence: Option<f64>,
    pub min_inliers: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LocalizerSection {
    pub t2_degrees: Option<f64>,
    pub min_pair_distance: Option<f64>,
    pub max_pair_distance: Option<f64>,
    pub top_k: Option<usize>,
    pub min_triangulation_angle: Option<f64>,
    pub max_iterations: Option<usize>,
    pub confidence: Option<f64>,
    pub lo_iterations: Option<usize>,
    pub ignore_direction_sign: Option<bool>,
}

/// Contents of a TOML config file; every field optional.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub localizer: LocalizerSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

impl PipelineConfig {
    pub fn apply_preset(&mut self, scene: SceneKind, method: Method) {
        let th = ransac_thresholds(method, scene);
        if let Some(t1) = th.t1_pixels {
            self.solver.t1_pixels = t1;
        }
        self.localizer.alpha_max_t2 = th.t2_degrees;
        let (a, b) = pair_window(scene);
        self.localizer.min_pair_distance_a = a;
        self.localizer.max_pair_distance_b = b;
        self.localizer.top_k = TOP_K;
    }

    pub fn apply_file(&mut self, file: &ConfigFile) {
        if let Some(seed) = file.seed {
            self.set_seed(seed);
        }
        let s = &file.solver;
        let solver = &mut self.solver;
        if let Some(v) = s.t1_pixels {
            solver.t1_pixels = v;
        }
        if let Some(v) = s.max_iterations {
            solver.max_iterations = v;
        }
        if let Some(v) = s.confidence {
            solver.confidence = v;
        }
        if let Some(v) = s.min_inliers {
            solver.min_inliers = v;
        }
        let l = &file.localizer;
        let loc = &mut self.localizer;
        if let Some(v) = l.t2_degrees {
            loc.alpha_max_t2 = v;
        }
        if let Some(v) = l.min_pair_distance {
            loc.min_pair_distance_a = v;
        }
        if let Some(v) = l.max_pair_distance {
            loc.max_pair_distance_b = v;
        }
        if let Some(v) = l.top_k {
            loc.top_k = v;
        }
        if let Some(v) = l.min_triangulation_angle {
            loc.min_triangulation_angle = v;
        }
        if let Some(v) = l.max_iterations {
            loc.max_iterations = v;
        }
        if let Some(v) = l.confidence {
            loc.confidence = v;
        }
        if let Some(v) = l.lo_iterations {
            loc.lo_iterations = v;
        }
        if let Some(v) = l.ignore_direction_sign {
            loc.ignore_direction_sign = v;
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.localizer.seed = seed;
    }

    /// Layers defaults, preset, file and seed flag.
    pub fn resolve(
        preset: Option<(SceneKind, Method)>,
        file: Option<&ConfigFile>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        if let Some((scene, method)) = preset {
            cfg.apply_preset(scene, method);
        }
        if let Some(file) = file {
            cfg.apply_file(file);
        }
        if let Some(seed) = seed {
            cfg.set_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.solver.t1_pixels > 0.0) {
            return Err(Error::Config("t1_pixels must be positive".into()));
        }
        if !(self.solver.confidence > 0.0 && self.solver.confidence < 1.0) {
            return Err(Error::Config("solver confidence must lie in (0, 1)".into()));
        }
        self.localizer.validate()
    }
}

/// `key = value` lines, echoed into result file headers.
impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.solver;
        let l = &self.localizer;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "solver.t1_pixels = {}", s.t1_pixels)?;
        writeln!(f, "solver.max_iterations = {}", s.max_iterations)?;
        writeln!(f, "solver.confidence = {}", s.confidence)?;
        writeln!(f, "solver.min_inliers = {}", s.min_inliers)?;
        writeln!(f, "localizer.t2_degrees = {}", l.alpha_max_t2)?;
        writeln!(f, "localizer.min_pair_distance = {}", l.min_pair_distance_a)?;
        writeln!(f, "localizer.max_pair_distance = {}", l.max_pair_distance_b)?;
        writeln!(f, "localizer.top_k = {}", l.top_k)?;
        writeln!(f, "localizer.min_triangulation_angle = {}", l.min_triangulation_angle)?;
        writeln!(f, "localizer.max_iterations = {}", l.max_iterations)?;
        writeln!(f, "localizer.confidence = {}", l.confidence)?;
        writeln!(f, "localizer.lo_iterations = {}", l.lo_iterations)?;
        write!(f, "localizer.ignore_direction_sign = {}", l.ignore_direction_sign)
    }
}
