//! Whitespace-delimited text formats for datasets and localization results.
//!
//! Every file is one record per line; blank lines and lines starting with `#`
//! are skipped. Floats are written with Rust's shortest round-trip formatting
//! so that write followed by parse reproduces the exact bits.
//!
//! | file | record |
//! |------|--------|
//! | poses | `id qw qx qy qz tx ty tz` (world to camera) |
//! | queries | same as poses, ground truth for query images |
//! | intrinsics | `id fx fy cx cy`; id `*` sets a shared default |
//! | descriptors | `id v1 ... vD` |
//! | rankings | `query_id db_id rank` |
//! | matches | `query_id db_id xq yq xdb ydb` (pixels) |
//! | essentials | `query_id db_id e11 ... e33` row-major, `x_q^T E x_db = 0` |

pub mod adapters;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::essential::{project_to_essential, EssentialMatrix};
use crate::geometry::{Mat3, Pose, Rotation, UnitQuaternion, Vec3};
use crate::localizer::{ImagePair, PairSource};
use crate::retrieval::GlobalDescriptor;
use crate::simulator::{SyntheticMatches, SyntheticPairs, SyntheticScene};
use crate::solver::{CameraIntrinsics, Correspondence, Vec2};

/// Id used in the intrinsics file for calibration shared by all images.
pub const SHARED_INTRINSICS_ID: &str = "*";

/// Quaternions further than this from unit norm are rejected.
const QUATERNION_NORM_TOL: f64 = 1e-3;

/// Essential matrices adjusted by more than this on load trigger a warning.
const ESSENTIAL_ADJUST_WARN: f64 = 1e-3;

/// File names of the dataset components inside a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub poses: String,
    pub queries: String,
    pub intrinsics: String,
    pub descriptors: String,
    pub rankings: String,
    pub matches: String,
    pub essentials: String,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        DatasetLayout {
            poses: "poses.txt".into(),
            queries: "queries.txt".into(),
            intrinsics: "intrinsics.txt".into(),
            descriptors: "descriptors.txt".into(),
            rankings: "rankings.txt".into(),
            matches: "matches.txt".into(),
            essentials: "essentials.txt".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntrinsicsTable {
    pub shared: Option<CameraIntrinsics>,
    pub per_image: BTreeMap<String, CameraIntrinsics>,
}

impl IntrinsicsTable {
    pub fn shared(intr: CameraIntrinsics) -> Self {
        IntrinsicsTable {
            shared: Some(intr),
            per_image: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&CameraIntrinsics> {
        self.per_image.get(id).or(self.shared.as_ref())
    }

    pub fn is_empty(&self) -> bool {
        self.shared.is_none() && self.per_image.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMatch {
    pub query: Vec2,
    pub db: Vec2,
}

/// `(query_id, db_id)`.
pub type PairKey = (String, String);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneDataset {
    pub name: String,
    /// Database images.
    pub images: Vec<(String, Pose)>,
    /// Ground-truth query poses, when known.
    pub queries: Vec<(String, Pose)>,
    pub intrinsics: IntrinsicsTable,
    pub descriptors: Vec<GlobalDescriptor>,
    /// Database ids per query, best first.
    pub rankings: BTreeMap<String, Vec<String>>,
    pub matches: BTreeMap<PairKey, Vec<PixelMatch>>,
    pub essentials: BTreeMap<PairKey, EssentialMatrix>,
    pub essential_source: PairSource,
}

impl SceneDataset {
    /// Database images and query ground truth of a simulated scene, with
    /// shared intrinsics.
    pub fn from_synthetic(name: impl Into<String>, scene: &SyntheticScene) -> Self {
        SceneDataset {
            name: name.into(),
            images: scene
                .db_ids
                .iter()
                .cloned()
                .zip(scene.db_poses.iter().copied())
                .collect(),
            queries: vec![(scene.query_id.clone(), scene.query_pose)],
            intrinsics: IntrinsicsTable::shared(scene.intrinsics),
            ..SceneDataset::default()
        }
    }

    pub fn add_pairs(&mut self, query_id: &str, pairs: &SyntheticPairs) {
        for p in &pairs.pairs {
            self.essentials
                .insert((query_id.to_string(), p.db_id.clone()), p.essential);
        }
    }

    pub fn add_matches(&mut self, query_id: &str, db_id: &str, matches: &SyntheticMatches) {
        let list = matches
            .correspondences
            .iter()
            .map(|c| PixelMatch {
                query: c.pixel_query,
                db: c.pixel_db,
            })
            .collect();
        self.matches
            .insert((query_id.to_string(), db_id.to_string()), list);
    }

    /// Appends another dataset's components; ids must not collide.
    pub fn merge(&mut self, other: SceneDataset) -> Result<()> {
        if other.intrinsics.shared.is_some() && other.intrinsics.shared != self.intrinsics.shared {
            if self.intrinsics.shared.is_none() && self.images.is_empty() {
                self.intrinsics.shared = other.intrinsics.shared;
            } else {
                return Err(Error::Validation("datasets disagree on shared intrinsics".into()));
            }
        }
        self.images.extend(other.images);
        self.queries.extend(other.queries);
        self.intrinsics.per_image.extend(other.intrinsics.per_image);
        self.descriptors.extend(other.descriptors);
        self.rankings.extend(other.rankings);
        self.matches.extend(other.matches);
        self.essentials.extend(other.essentials);
        self.validate()
    }

    pub fn db_poses(&self) -> HashMap<String, Pose> {
        self.images.iter().cloned().collect()
    }

    /// Every query id mentioned by any component, sorted.
    pub fn query_ids(&self) -> Vec<String> {
        let mut ids: BTreeSet<&str> = self.queries.iter().map(|(id, _)| id.as_str()).collect();
        ids.extend(self.rankings.keys().map(String::as_str));
        ids.extend(self.matches.keys().map(|(q, _)| q.as_str()));
        ids.extend(self.essentials.keys().map(|(q, _)| q.as_str()));
        ids.into_iter().map(str::to_string).collect()
    }

    pub fn descriptor(&self, id: &str) -> Option<&GlobalDescriptor> {
        self.descriptors.iter().find(|d| d.id == id)
    }

    /// Calibrated correspondences of one pair.
    pub fn correspondences(&self, key: &PairKey) -> Result<Vec<Correspondence>> {
        let (q, db) = key;
        let matches = self
            .matches
            .get(key)
            .ok_or_else(|| Error::Link(format!("no matches for pair {q} {db}")))?;
        let qi = self.intrinsics_for(q)?;
        let di = self.intrinsics_for(db)?;
        Ok(matches
            .iter()
            .map(|m| Correspondence::from_pixels(di, qi, m.db, m.query))
            .collect())
    }

    pub fn intrinsics_for(&self, id: &str) -> Result<&CameraIntrinsics> {
        self.intrinsics
            .get(id)
            .ok_or_else(|| Error::Link(format!("no intrinsics for image {id}")))
    }

    /// Image pairs of `query_id` for the given database ids, in that order.
    pub fn image_pairs(&self, query_id: &str, db_ids: &[String]) -> Result<Vec<ImagePair>> {
        let poses = self.db_poses();
        db_ids
            .iter()
            .map(|db| {
                let key = (query_id.to_string(), db.clone());
                let essential = *self.essentials.get(&key).ok_or_else(|| {
                    Error::Link(format!("no essential matrix for pair {query_id} {db}"))
                })?;
                let db_pose = *poses
                    .get(db)
                    .ok_or_else(|| Error::Link(format!("unknown database image {db}")))?;
                Ok(ImagePair {
                    db_id: db.clone(),
                    db_pose,
                    essential,
                    source: self.essential_source,
                })
            })
            .collect()
    }

    /// Unique ids and resolvable references.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (id, _) in self.images.iter().chain(&self.queries) {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate image id {id}")));
            }
        }
        let mut seen = BTreeSet::new();
        for d in &self.descriptors {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::Validation(format!("duplicate descriptor id {}", d.id)));
            }
        }
        let db: BTreeSet<&str> = self.images.iter().map(|(id, _)| id.as_str()).collect();
        let check_db = |what: &str, id: &str| {
            if db.contains(id) {
                Ok(())
            } else {
                Err(Error::Link(format!("{what} refers to unknown database image {id}")))
            }
        };
        for ids in self.rankings.values() {
            for id in ids {
                check_db("ranking", id)?;
            }
        }
        for (q, d) in self.essentials.keys() {
            check_db("essential matrix", d)?;
            if db.contains(q.as_str()) {
                return Err(Error::Link(format!("query {q} is also a database image")));
            }
        }
        for (q, d) in self.matches.keys() {
            check_db("match list", d)?;
            self.intrinsics_for(q)?;
            self.intrinsics_for(d)?;
        }
        Ok(())
    }
}

/// Outcome of localizing one query.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryOutcome {
    Localized {
        pose: Pose,
        n_inliers: usize,
        iterations: usize,
        mean_angle: f64,
    },
    /// Error kind tag.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query_id: String,
    pub outcome: QueryOutcome,
}

impl QueryResult {
    pub fn pose(&self) -> Option<&Pose> {
        match &self.outcome {
            QueryOutcome::Localized { pose, .. } => Some(pose),
            QueryOutcome::Failed(_) => None,
        }
    }
}

struct Record {
    line: usize,
    fields: Vec<String>,
}

struct TextFile {
    path: PathBuf,
    comments: Vec<String>,
    records: Vec<Record>,
}

impl TextFile {
    fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_text(path, &text))
    }

    fn from_text(path: &Path, text: &str) -> Self {
        let mut comments = Vec::new();
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            records.push(Record {
                line: i + 1,
                fields: line.split_whitespace().map(str::to_string).collect(),
            });
        }
        TextFile {
            path: path.to_path_buf(),
            comments,
            records,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn expect_len(&self, rec: &Record, n: usize, what: &str) -> Result<()> {
        if rec.fields.len() != n {
            return Err(self.err(
                rec.line,
                format!("{what} needs {n} fields, found {}", rec.fields.len()),
            ));
        }
        Ok(())
    }

    fn float(&self, rec: &Record, i: usize) -> Result<f64> {
        let tok = &rec.fields[i];
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(rec.line, format!("expected a finite number, found {tok:?}"))),
        }
    }

    fn floats(&self, rec: &Record, range: std::ops::Range<usize>) -> Result<Vec<f64>> {
        range.map(|i| self.float(rec, i)).collect()
    }
}

fn parse_poses(file: &TextFile) -> Result<Vec<(String, Pose)>> {
    file.records
        .iter()
        .map(|rec| {
            file.expect_len(rec, 8, "pose")?;
            let v = file.floats(rec, 1..8)?;
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
            if (norm - 1.0).abs() > QUATERNION_NORM_TOL {
                return Err(Error::Validation(format!(
                    "{}:{}: quaternion norm {norm} is not unit",
                    file.path.display(),
                    rec.line
                )));
            }
            let q = UnitQuaternion::new(v[0], v[1], v[2], v[3])
                .map_err(|e| file.err(rec.line, e.to_string()))?;
            let pose = Pose::new(Rotation::from_quaternion(q), Vec3::new(v[4], v[5], v[6]))
                .map_err(|e| file.err(rec.line, e.to_string()))?;
            Ok((rec.fields[0].clone(), pose))
        })
        .collect()
}

fn parse_intrinsics(file: &TextFile) -> Result<IntrinsicsTable> {
    let mut table = IntrinsicsTable::default();
    for rec in &file.records {
        file.expect_len(rec, 5, "intrinsics")?;
        let v = file.floats(rec, 1..5)?;
        let intr = CameraIntrinsics::new(v[0], v[1], v[2], v[3])
            .map_err(|e| file.err(rec.line, e.to_string()))?;
        let id = &rec.fields[0];
        let dup = if id == SHARED_INTRINSICS_ID {
            table.shared.replace(intr).is_some()
        } else {
            table.per_image.insert(id.clone(), intr).is_some()
        };
        if dup {
            return Err(Error::Validation(format!(
                "{}:{}: duplicate intrinsics for {id}",
                file.path.display(),
                rec.line
            )));
        }
    }
    Ok(table)
}

fn parse_descriptors(file: &TextFile) -> Result<Vec<GlobalDescriptor>> {
    file.records
        .iter()
        .map(|rec| {
            if rec.fields.len() < 2 {
                return Err(file.err(rec.line, "descriptor needs an id and at least one value"));
            }
            let v = file.floats(rec, 1..rec.fields.len())?;
            GlobalDescriptor::new(rec.fields[0].clone(), v)
                .map_err(|e| file.err(rec.line, e.to_string()))
        })
        .collect()
}

fn parse_rankings(file: &TextFile) -> Result<BTreeMap<String, Vec<String>>> {
    let mut raw: BTreeMap<String, Vec<(i64, String)>> = BTreeMap::new();
    for rec in &file.records {
        file.expect_len(rec, 3, "ranking")?;
        let rank: i64 = rec.fields[2]
            .parse()
            .map_err(|_| file.err(rec.line, format!("rank {:?} is not an integer", rec.fields[2])))?;
        raw.entry(rec.fields[0].clone())
            .or_default()
            .push((rank, rec.fields[1].clone()));
    }
    let mut out = BTreeMap::new();
    for (q, mut list) in raw {
        list.sort();
        if list.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation(format!("query {q} has repeated ranks")));
        }
        out.insert(q, list.into_iter().map(|(_, id)| id).collect());
    }
    Ok(out)
}

fn parse_matches(file: &TextFile) -> Result<BTreeMap<PairKey, Vec<PixelMatch>>> {
    let mut out: BTreeMap<PairKey, Vec<PixelMatch>> = BTreeMap::new();
    for rec in &file.records {
        file.expect_len(rec, 6, "match")?;
        let v = file.floats(rec, 2..6)?;
        out.entry((rec.fields[0].clone(), rec.fields[1].clone()))
            .or_default()
            .push(PixelMatch {
                query: Vec2::new(v[0], v[1]),
                db: Vec2::new(v[2], v[3]),
            });
    }
    Ok(out)
}

/// Accepts a valid essential matrix as is; anything else is rescaled and
/// projected onto the essential manifold.
fn load_essential(m: Mat3) -> Result<(EssentialMatrix, f64)> {
    if let Ok(e) = EssentialMatrix::new(m) {
        return Ok((e, 0.0));
    }
    let norm = m.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateMatrix("zero matrix".into()));
    }
    let scaled = m * (2f64.sqrt() / norm);
    let e = project_to_essential(&scaled)?;
    Ok((e, (scaled - e.matrix()).norm()))
}

fn parse_essentials(file: &TextFile) -> Result<(BTreeMap<PairKey, EssentialMatrix>, PairSource)> {
    let mut source = PairSource::Ingested;
    for c in &file.comments {
        match c.split_whitespace().collect::<Vec<_>>()[..] {
            ["source", "solver"] => source = PairSource::Solver,
            ["source", "ingested"] => source = PairSource::Ingested,
            _ => {}
        }
    }
    let mut out = BTreeMap::new();
    for rec in &file.records {
        file.expect_len(rec, 11, "essential matrix")?;
        let v = file.floats(rec, 2..11)?;
        let (e, adjust) = load_essential(Mat3::from_row_slice(&v))
            .map_err(|e| file.err(rec.line, e.to_string()))?;
        if adjust > ESSENTIAL_ADJUST_WARN {
            warn!(
                "{}:{}: essential matrix adjusted by {adjust:.3e} during projection",
                file.path.display(),
                rec.line
            );
        }
        let key = (rec.fields[0].clone(), rec.fields[1].clone());
        if out.insert(key, e).is_some() {
            return Err(Error::Validation(format!(
                "{}:{}: duplicate pair {} {}",
                file.path.display(),
                rec.line,
                rec.fields[0],
                rec.fields[1]
            )));
        }
    }
    Ok((out, source))
}

fn read_optional(path: &Path) -> Result<Option<TextFile>> {
    if path.exists() {
        TextFile::read(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Reads a dataset directory. Only the poses file is required.
pub fn parse_dataset(root: &Path, layout: &DatasetLayout) -> Result<SceneDataset> {
    let images = parse_poses(&TextFile::read(&root.join(&layout.poses))?)?;
    let mut ds = SceneDataset {
        name: root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        images,
        ..SceneDataset::default()
    };
    if let Some(f) = read_optional(&root.join(&layout.queries))? {
        ds.queries = parse_poses(&f)?;
    }
    if let Some(f) = read_optional(&root.join(&layout.intrinsics))? {
        ds.intrinsics = parse_intrinsics(&f)?;
    }
    if let Some(f) = read_optional(&root.join(&layout.descriptors))? {
        ds.descriptors = parse_descriptors(&f)?;
    }
    if let Some(f) = read_optional(&root.join(&layout.rankings))? {
        ds.rankings = parse_rankings(&f)?;
    }
    if let Some(f) = read_optional(&root.join(&layout.matches))? {
        ds.matches = parse_matches(&f)?;
    }
    if let Some(f) = read_optional(&root.join(&layout.essentials))? {
        (ds.essentials, ds.essential_source) = parse_essentials(&f)?;
    }
    ds.validate()?;
    Ok(ds)
}

/// Reads a standalone poses file, e.g. query ground truth.
pub fn read_poses(path: &Path) -> Result<Vec<(String, Pose)>> {
    parse_poses(&TextFile::read(path)?)
}

/// Reads a standalone essentials file.
pub fn read_essentials(path: &Path) -> Result<(BTreeMap<PairKey, EssentialMatrix>, PairSource)> {
    parse_essentials(&TextFile::read(path)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pose_fields(out: &mut String, pose: &Pose) {
    let q = pose.rotation.quaternion();
    let t = pose.translation;
    let _ = write!(out, "{} {} {} {} {} {} {}", q.w, q.x, q.y, q.z, t.x, t.y, t.z);
}

pub fn format_poses(poses: &[(String, Pose)]) -> String {
    let mut s = String::new();
    for (id, pose) in poses {
        s.push_str(id);
        s.push(' ');
        pose_fields(&mut s, pose);
        s.push('\n');
    }
    s
}

pub fn format_essentials(
    essentials: &BTreeMap<PairKey, EssentialMatrix>,
    source: PairSource,
    header: &str,
) -> String {
    let mut s = String::new();
    for line in header.lines() {
        let _ = writeln!(s, "# {line}");
    }
    let tag = match source {
        PairSource::Solver => "solver",
        PairSource::Ingested => "ingested",
    };
    let _ = writeln!(s, "# source {tag}");
    for ((q, d), e) in essentials {
        let _ = write!(s, "{q} {d}");
        for v in e.to_row_major() {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_poses(path: &Path, poses: &[(String, Pose)]) -> Result<()> {
    write_text(path, &format_poses(poses))
}

pub fn write_essentials(
    path: &Path,
    essentials: &BTreeMap<PairKey, EssentialMatrix>,
    source: PairSource,
    header: &str,
) -> Result<()> {
    write_text(path, &format_essentials(essentials, source, header))
}

/// Writes every non-empty component of `ds` under `root`.
pub fn write_dataset(root: &Path, ds: &SceneDataset, layout: &DatasetLayout) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    write_poses(&root.join(&layout.poses), &ds.images)?;
    if !ds.queries.is_empty() {
        write_poses(&root.join(&layout.queries), &ds.queries)?;
    }
    if !ds.intrinsics.is_empty() {
        let mut s = String::new();
        let shared = ds.intrinsics.shared.iter().map(|i| (SHARED_INTRINSICS_ID, i));
        let per = ds.intrinsics.per_image.iter().map(|(id, i)| (id.as_str(), i));
        for (id, i) in shared.chain(per) {
            let _ = writeln!(s, "{id} {} {} {} {}", i.fx, i.fy, i.cx, i.cy);
        }
        write_text(&root.join(&layout.intrinsics), &s)?;
    }
    if !ds.descriptors.is_empty() {
        let mut s = String::new();
        for d in &ds.descriptors {
            s.push_str(&d.id);
            for v in d.vector() {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        write_text(&root.join(&layout.descriptors), &s)?;
    }
    if !ds.rankings.is_empty() {
        let mut s = String::new();
        for (q, ids) in &ds.rankings {
            for (rank, id) in ids.iter().enumerate() {
                let _ = writeln!(s, "{q} {id} {}", rank + 1);
            }
        }
        write_text(&root.join(&layout.rankings), &s)?;
    }
    if !ds.matches.is_empty() {
        let mut s = String::new();
        for ((q, d), list) in &ds.matches {
            for m in list {
                let _ = writeln!(s, "{q} {d} {} {} {} {}", m.query.x, m.query.y, m.db.x, m.db.y);
            }
        }
        write_text(&root.join(&layout.matches), &s)?;
    }
    if !ds.essentials.is_empty() {
        write_essentials(
            &root.join(&layout.essentials),
            &ds.essentials,
            ds.essential_source,
            "",
        )?;
    }
    Ok(())
}

/// Result file text. `header` lines are echoed as `#` comments.
pub fn format_results(results: &[QueryResult], header: &str) -> String {
    let mut s = String::new();
    for line in header.lines() {
        let _ = writeln!(s, "# {line}");
    }
    for r in results {
        match &r.outcome {
            QueryOutcome::Localized {
                pose,
                n_inliers,
                iterations,
                mean_angle,
            } => {
                let _ = write!(s, "{} ok ", r.query_id);
                pose_fields(&mut s, pose);
                let _ = writeln!(s, " {n_inliers} {iterations} {mean_angle}");
            }
            QueryOutcome::Failed(kind) => {
                let _ = writeln!(s, "{} failed {kind}", r.query_id);
            }
        }
    }
    s
}

pub fn write_results(path: &Path, results: &[QueryResult], header: &str) -> Result<()> {
    write_text(path, &format_results(results, header))
}

pub fn read_results(path: &Path) -> Result<Vec<QueryResult>> {
    let file = TextFile::read(path)?;
    file.records
        .iter()
        .map(|rec| {
            let status = rec.fields.get(1).map(String::as_str);
            let outcome = match status {
                Some("ok") => {
                    file.expect_len(rec, 12, "localized result")?;
                    let v = file.floats(rec, 2..9)?;
                    let q = UnitQuaternion::new(v[0], v[1], v[2], v[3])
                        .map_err(|e| file.err(rec.line, e.to_string()))?;
                    let int = |i: usize| {
                        rec.fields[i].parse::<usize>().map_err(|_| {
                            file.err(rec.line, format!("expected a count, found {:?}", rec.fields[i]))
                        })
                    };
                    QueryOutcome::Localized {
                        pose: Pose::new(Rotation::from_quaternion(q), Vec3::new(v[4], v[5], v[6]))?,
                        n_inliers: int(9)?,
                        iterations: int(10)?,
                        mean_angle: file.float(rec, 11)?,
                    }
                }
                Some("failed") => {
                    file.expect_len(rec, 3, "failed result")?;
                    QueryOutcome::Failed(rec.fields[2].clone())
                }
                _ => return Err(file.err(rec.line, "status must be `ok` or `failed`")),
            };
            Ok(QueryResult {
                query_id: rec.fields[0].clone(),
                outcome,
            })
        })
        .collect()
}
