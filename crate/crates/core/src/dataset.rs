//! Synthetic datasets: rendered mask and shaded images with ground-truth
//! poses, persisted as PGM files plus a JSON Lines manifest.
//!
//! Layout under the dataset root:
//!
//! ```text
//! manifest.jsonl      header line, then one record per line
//! masks/<id>.pgm      binary silhouettes (0 / 255)
//! shaded/<id>.pgm     flat-shaded 8-bit renders
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::image::{GrayImage, MaskImage};
use crate::mesh::{self, shapes, TriangleMesh, DEFAULT_CLOUD_POINTS};
use crate::pose::{Pose, Quaternion, UNIT_TOLERANCE};
use crate::render::{self, CameraIntrinsics, PoseSamplerConfig, DEFAULT_LIGHT};
use crate::seeds;

pub const MANIFEST_FORMAT: &str = "posenet-dataset";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    Mask,
    Shaded,
    Both,
}

impl ImageKind {
    pub fn has_mask(self) -> bool {
        matches!(self, ImageKind::Mask | ImageKind::Both)
    }

    pub fn has_shaded(self) -> bool {
        matches!(self, ImageKind::Shaded | ImageKind::Both)
    }
}

/// Which stored image a consumer reads as network input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    #[default]
    Mask,
    Shaded,
}

/// One object class: its mesh and the seed/size of its loss point cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    /// Built-in mesh name or path to an OBJ file.
    pub mesh: String,
    #[serde(default)]
    pub cloud_seed: u64,
    #[serde(default = "default_cloud_points")]
    pub cloud_points: usize,
}

fn default_cloud_points() -> usize {
    DEFAULT_CLOUD_POINTS
}

impl ClassSpec {
    pub fn builtin(name: &str) -> Self {
        ClassSpec {
            mesh: name.to_string(),
            cloud_seed: 0,
            cloud_points: DEFAULT_CLOUD_POINTS,
        }
    }

    pub fn load_mesh(&self) -> Result<TriangleMesh> {
        match shapes::by_name(&self.mesh) {
            Some(m) => Ok(m),
            None => mesh::load_obj(Path::new(&self.mesh)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub intrinsics: CameraIntrinsics,
    pub sampler: PoseSamplerConfig,
    pub classes: Vec<ClassSpec>,
    pub counts: Vec<usize>,
    pub kind: ImageKind,
    pub light: Vec3,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub class: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaded: Option<String>,
    pub position: Vec3,
    pub quaternion: [f64; 4],
}

impl Record {
    /// Ground-truth pose exactly as stored.
    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            orientation: Quaternion::from_array(self.quaternion),
        }
    }
}

/// Generation request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub classes: Vec<ClassSpec>,
    pub counts: Vec<usize>,
    #[serde(default = "default_intrinsics")]
    pub intrinsics: CameraIntrinsics,
    #[serde(default)]
    pub sampler: PoseSamplerConfig,
    #[serde(default = "default_kind")]
    pub kind: ImageKind,
    #[serde(default)]
    pub seed: u64,
}

fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::kinect_vga()
        .resized(80, 60)
        .expect("80x60 is a valid size")
}

fn default_kind() -> ImageKind {
    ImageKind::Mask
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            classes: vec![ClassSpec::builtin("tripod")],
            counts: vec![1000],
            intrinsics: default_intrinsics(),
            sampler: PoseSamplerConfig::default(),
            kind: ImageKind::Mask,
            seed: 0,
        }
    }
}

/// Writes JSON with every float as 17 significant digits.
struct F17;

impl serde_json::ser::Formatter for F17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

/// One JSON line with 17-digit floats.
pub fn to_json_line<T: Serialize>(value: &T) -> std::result::Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, F17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn record_id(class: usize, index: usize) -> String {
    format!("c{class}_{index:06}")
}

/// Renders one record's images; returns (pose, mask, shaded).
fn render_record(
    cfg: &GenerateConfig,
    mesh: &TriangleMesh,
    class: usize,
    index: usize,
) -> Result<(Pose, MaskImage, Option<GrayImage>)> {
    let mut rng = seeds::rng(cfg.seed, &[cfg.sampler.seed, class as u64, index as u64]);
    let (pose, mask) = render::sample_pose_with_mask(&cfg.sampler, mesh, &cfg.intrinsics, &mut rng)?;
    let shaded = if cfg.kind.has_shaded() {
        Some(render::render_shaded(mesh, &pose, &cfg.intrinsics, DEFAULT_LIGHT)?)
    } else {
        None
    };
    Ok((pose, mask, shaded))
}

/// Renders every record and writes images plus the manifest under `out`.
/// Output is a pure function of `cfg`.
pub fn generate_dataset(cfg: &GenerateConfig, out: &Path) -> Result<Dataset> {
    if cfg.classes.is_empty() || cfg.classes.len() != cfg.counts.len() {
        return Err(Error::Config(format!(
            "{} classes but {} counts",
            cfg.classes.len(),
            cfg.counts.len()
        )));
    }
    if let Some(c) = cfg.counts.iter().position(|&n| n == 0) {
        return Err(Error::Config(format!("class {c} has a zero count")));
    }
    cfg.intrinsics.validate()?;
    cfg.sampler.validate()?;
    let meshes = cfg
        .classes
        .iter()
        .map(ClassSpec::load_mesh)
        .collect::<Result<Vec<_>>>()?;
    // Store OBJ paths absolutely so the manifest stays loadable elsewhere.
    let mut classes = cfg.classes.clone();
    for c in classes.iter_mut().filter(|c| shapes::by_name(&c.mesh).is_none()) {
        c.mesh = fs::canonicalize(&c.mesh)
            .map_err(|e| Error::io(&c.mesh, e))?
            .to_string_lossy()
            .into_owned();
    }
    let header = ManifestHeader {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        intrinsics: cfg.intrinsics,
        sampler: cfg.sampler,
        classes,
        counts: cfg.counts.clone(),
        kind: cfg.kind,
        light: DEFAULT_LIGHT,
        seed: cfg.seed,
    };
    for sub in ["masks", "shaded"] {
        let wanted = if sub == "masks" {
            cfg.kind.has_mask()
        } else {
            cfg.kind.has_shaded()
        };
        if wanted {
            let d = out.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    let manifest_path = out.join(MANIFEST_FILE);
    let file = File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut w = BufWriter::new(file);
    let line = to_json_line(&header).map_err(|e| Error::json(&manifest_path, e))?;
    writeln!(w, "{line}").map_err(|e| Error::io(&manifest_path, e))?;

    let mut records = Vec::with_capacity(cfg.counts.iter().sum());
    for (class, (&count, mesh)) in cfg.counts.iter().zip(&meshes).enumerate() {
        for index in 0..count {
            let (pose, mask, shaded) = render_record(cfg, mesh, class, index)?;
            let id = record_id(class, index);
            let mut rec = Record {
                id: id.clone(),
                class,
                mask: None,
                shaded: None,
                position: pose.position,
                quaternion: pose.orientation.to_array(),
            };
            if cfg.kind.has_mask() {
                let rel = format!("masks/{id}.pgm");
                mask.write_pgm(&out.join(&rel))?;
                rec.mask = Some(rel);
            }
            if let Some(img) = shaded {
                let rel = format!("shaded/{id}.pgm");
                img.write_pgm(&out.join(&rel))?;
                rec.shaded = Some(rel);
            }
            let line = to_json_line(&rec).map_err(|e| Error::json(&manifest_path, e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(&manifest_path, e))?;
            records.push(rec);
        }
    }
    w.flush().map_err(|e| Error::io(&manifest_path, e))?;
    Dataset::from_parts(out.to_path_buf(), header, records, meshes)
}

/// In-memory dataset handle: header, records, meshes and loss clouds.
#[derive(Clone, Debug)]
pub struct Dataset {
    root: PathBuf,
    header: ManifestHeader,
    records: Vec<Record>,
    meshes: Vec<TriangleMesh>,
    clouds: Vec<Vec<Vec3>>,
}

/// Loads and validates a dataset from its manifest (or its directory).
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let root = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let file = File::open(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(&manifest, e))?,
        None => {
            return Err(Error::Format {
                path: manifest,
                msg: "empty manifest".into(),
            })
        }
    };
    let header: ManifestHeader = serde_json::from_str(&first).map_err(|e| Error::json(&manifest, e))?;
    if header.format != MANIFEST_FORMAT || header.version != MANIFEST_VERSION {
        return Err(Error::Format {
            path: manifest,
            msg: format!(
                "unsupported manifest {} v{} (expected {MANIFEST_FORMAT} v{MANIFEST_VERSION})",
                header.format, header.version
            ),
        });
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(&manifest, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::json(&manifest, e))?;
        records.push(rec);
    }
    let meshes = header
        .classes
        .iter()
        .map(ClassSpec::load_mesh)
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset::from_parts(root, header, records, meshes)?;
    ds.validate()?;
    Ok(ds)
}

impl Dataset {
    fn from_parts(
        root: PathBuf,
        header: ManifestHeader,
        records: Vec<Record>,
        meshes: Vec<TriangleMesh>,
    ) -> Result<Self> {
        let clouds = header
            .classes
            .iter()
            .zip(&meshes)
            .map(|(c, m)| mesh::sample_surface(m, c.cloud_points, c.cloud_seed).map(|pc| pc.points))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            root,
            header,
            records,
            meshes,
            clouds,
        })
    }

    fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        let n = self.num_classes();
        for rec in &self.records {
            let bad = |msg: String| Error::Validation {
                record: rec.id.clone(),
                msg,
            };
            if !ids.insert(rec.id.as_str()) {
                return Err(bad("duplicate id".into()));
            }
            if rec.class >= n {
                return Err(bad(format!("class {} but only {n} classes", rec.class)));
            }
            let q = Quaternion::from_array(rec.quaternion);
            if !q.is_canonical(UNIT_TOLERANCE) {
                return Err(bad(format!("quaternion {:?} is not in canonical form", rec.quaternion)));
            }
            if rec.position.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite position".into()));
            }
            if rec.mask.is_none() && rec.shaded.is_none() {
                return Err(bad("no image referenced".into()));
            }
            for rel in rec.mask.iter().chain(&rec.shaded) {
                let p = self.root.join(rel);
                if !p.is_file() {
                    return Err(Error::MissingFile {
                        record: rec.id.clone(),
                        path: p,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn header(&self) -> &ManifestHeader {
        &self.header
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.header.classes.len()
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.header.intrinsics
    }

    pub fn mesh(&self, class: usize) -> &TriangleMesh {
        &self.meshes[class]
    }

    /// Loss point cloud for `class`, regenerated from its seed.
    pub fn cloud(&self, class: usize) -> &[Vec3] {
        &self.clouds[class]
    }

    pub fn clouds(&self) -> &[Vec<Vec3>] {
        &self.clouds
    }

    pub fn load_mask(&self, i: usize) -> Result<MaskImage> {
        let rec = &self.records[i];
        let rel = rec.mask.as_ref().ok_or_else(|| Error::Validation {
            record: rec.id.clone(),
            msg: "record has no mask image".into(),
        })?;
        MaskImage::read_pgm(&self.root.join(rel))
    }

    pub fn load_shaded(&self, i: usize) -> Result<GrayImage> {
        let rec = &self.records[i];
        let rel = rec.shaded.as_ref().ok_or_else(|| Error::Validation {
            record: rec.id.clone(),
            msg: "record has no shaded image".into(),
        })?;
        GrayImage::read_pgm(&self.root.join(rel))
    }

    /// Image for `i` as 8-bit gray (masks become 0 / 255).
    pub fn load_gray(&self, i: usize, kind: InputKind) -> Result<GrayImage> {
        match kind {
            InputKind::Mask => self.load_mask(i).map(|m| m.to_gray()),
            InputKind::Shaded => self.load_shaded(i),
        }
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            root: self.root.clone(),
            header: self.header.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            meshes: self.meshes.clone(),
            clouds: self.clouds.clone(),
        }
    }

    /// First `n` records of each class, in stored order.
    pub fn take_per_class(&self, n: usize) -> Dataset {
        let mut taken = vec![0usize; self.num_classes()];
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let c = self.records[i].class;
                taken[c] += 1;
                taken[c] <= n
            })
            .collect();
        self.subset(&idx)
    }

    /// Record indices in a seeded random order.
    pub fn shuffled_indices(&self, seed: u64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seeds::rng(seed, &[]));
        idx
    }

    /// Per-class stratified split; each class contributes
    /// `round(n_c * train_fraction)` records to the training side, clamped so
    /// both sides keep at least one.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction {train_fraction} outside (0, 1)"
            )));
        }
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            by_class.entry(r.class).or_default().push(i);
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (class, mut idx) in by_class {
            if idx.len() < 2 {
                return Err(Error::Stratification(format!(
                    "class {class} has {} record(s); at least 2 are needed",
                    idx.len()
                )));
            }
            idx.shuffle(&mut seeds::rng(seed, &[class as u64]));
            let k = ((idx.len() as f64 * train_fraction).round() as usize).clamp(1, idx.len() - 1);
            let (a, b) = idx.split_at(k);
            train.extend_from_slice(a);
            test.extend_from_slice(b);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_cfg(n: usize, kind: ImageKind) -> GenerateConfig {
        GenerateConfig {
            counts: vec![n],
            kind,
            seed: 5,
            ..Default::default()
        }
    }

    fn rewrite_manifest(dir: &Path, f: impl Fn(&mut serde_json::Value)) {
        let p = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&p).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut v: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
        f(&mut v);
        lines[1] = v.to_string();
        fs::write(&p, lines.join("\n") + "\n").unwrap();
    }

    #[test]
    fn generates_requested_records() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_dataset(&small_cfg(10, ImageKind::Mask), dir.path()).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(fs::read_dir(dir.path().join("masks")).unwrap().count(), 10);
        for i in 0..ds.len() {
            assert!(!ds.load_mask(i).unwrap().touches_border());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = small_cfg(6, ImageKind::Both);
        generate_dataset(&cfg, a.path()).unwrap();
        generate_dataset(&cfg, b.path()).unwrap();
        for rel in ["manifest.jsonl", "masks/c0_000003.pgm", "shaded/c0_000005.pgm"] {
            assert_eq!(
                fs::read(a.path().join(rel)).unwrap(),
                fs::read(b.path().join(rel)).unwrap()
            );
        }
    }

    #[test]
    fn shaded_support_equals_mask() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate_dataset(&small_cfg(5, ImageKind::Both), dir.path()).unwrap();
        for i in 0..ds.len() {
            assert_eq!(ds.load_shaded(i).unwrap().to_mask(), ds.load_mask(i).unwrap());
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let gen = generate_dataset(&small_cfg(8, ImageKind::Mask), dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(gen.records(), loaded.records());
        assert_eq!(gen.header(), loaded.header());
        assert_eq!(gen.cloud(0), loaded.cloud(0));
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("e-1") || text.contains("e0"));
    }

    #[test]
    fn missing_file_names_record() {
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&small_cfg(3, ImageKind::Mask), dir.path()).unwrap();
        fs::remove_file(dir.path().join("masks/c0_000001.pgm")).unwrap();
        match load_dataset(dir.path()) {
            Err(Error::MissingFile { record, .. }) => assert_eq!(record, "c0_000001"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_canonical_quaternion_rejected() {
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&small_cfg(2, ImageKind::Mask), dir.path()).unwrap();
        rewrite_manifest(dir.path(), |v| {
            v["quaternion"] = serde_json::json!([-0.8, 0.6, 0.0, 0.0])
        });
        match load_dataset(dir.path()) {
            Err(Error::Validation { record, msg }) => {
                assert_eq!(record, "c0_000000");
                assert!(msg.contains("canonical"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&small_cfg(2, ImageKind::Mask), dir.path()).unwrap();
        rewrite_manifest(dir.path(), |v| {
            v["id"] = "c0_000001".into();
            v["mask"] = "masks/c0_000001.pgm".into();
        });
        assert!(matches!(load_dataset(dir.path()), Err(Error::Validation { .. })));
    }

    fn synthetic(per_class: &[usize]) -> Dataset {
        let header = ManifestHeader {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            intrinsics: default_intrinsics(),
            sampler: PoseSamplerConfig::default(),
            classes: vec![ClassSpec::builtin("cube"); per_class.len()],
            counts: per_class.to_vec(),
            kind: ImageKind::Mask,
            light: DEFAULT_LIGHT,
            seed: 0,
        };
        let mut records = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            for i in 0..n {
                records.push(Record {
                    id: record_id(c, i),
                    class: c,
                    mask: Some(String::new()),
                    shaded: None,
                    position: [0.0, 0.0, 1.0],
                    quaternion: [1.0, 0.0, 0.0, 0.0],
                });
            }
        }
        let meshes = vec![shapes::centered_cube(0.2); per_class.len()];
        Dataset::from_parts(PathBuf::new(), header, records, meshes).unwrap()
    }

    #[test]
    fn stratified_split() {
        let ds = synthetic(&[100, 100]);
        let (train, test) = ds.split(0.9, 3).unwrap();
        for c in 0..2 {
            assert_eq!(train.records().iter().filter(|r| r.class == c).count(), 90);
            assert_eq!(test.records().iter().filter(|r| r.class == c).count(), 10);
        }
        let (train2, _) = ds.split(0.9, 3).unwrap();
        assert_eq!(train.records(), train2.records());
        let mut ids: Vec<_> = train
            .records()
            .iter()
            .chain(test.records())
            .map(|r| r.id.clone())
            .collect();
        ids.sort();
        let mut all: Vec<_> = ds.records().iter().map(|r| r.id.clone()).collect();
        all.sort();
        assert_eq!(ids, all);
        assert!(matches!(
            synthetic(&[5, 1]).split(0.5, 0),
            Err(Error::Stratification(_))
        ));
        assert!(ds.split(1.0, 0).is_err());
    }

    #[test]
    fn take_per_class_keeps_order() {
        let ds = synthetic(&[5, 3]).take_per_class(2);
        let ids: Vec<_> = ds.records().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["c0_000000", "c0_000001", "c1_000000", "c1_000001"]);
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let line = to_json_line(&[v]).unwrap();
            let back: [f64; 1] = serde_json::from_str(&line).unwrap();
            prop_assert_eq!(back[0].to_bits(), v.to_bits());
        }
    }
}
