//! Triangle meshes, a minimal OBJ reader, and surface point clouds.

use std::fmt::Write as _;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

/// Triangles below this area (m^2) are dropped when a mesh is built.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Default number of loss points per object.
pub const DEFAULT_CLOUD_POINTS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates indices, drops degenerate triangles and checks extent.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidArgument(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite vertex".into()));
        }
        let triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .filter(|t| triangle_area(&vertices, *t) >= MIN_TRIANGLE_AREA)
            .collect();
        if triangles.is_empty() {
            return Err(Error::EmptyMesh("no non-degenerate triangles".into()));
        }
        let mesh = TriangleMesh { vertices, triangles };
        if mesh.bbox_diagonal() <= 0.0 {
            return Err(Error::InvalidArgument("mesh has zero extent".into()));
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn area(&self, t: usize) -> f64 {
        triangle_area(&self.vertices, self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn bbox(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        geom::norm(geom::sub(hi, lo))
    }

    /// OBJ text for this mesh (1-based indices).
    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_obj_string()).map_err(|e| Error::io(path, e))
    }
}

fn triangle_area(vertices: &[Vec3], t: [usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| vertices[i]);
    0.5 * geom::norm(geom::cross(geom::sub(b, a), geom::sub(c, a)))
}

/// Reads the `v`/`f` subset of Wavefront OBJ. Polygons are fan-triangulated;
/// normals, texture coordinates, groups and materials are ignored.
pub fn load_obj(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text, path)
}

pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Vec<usize>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            None => {}
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| perr(line_no, format!("bad vertex coordinate: {e}")))?;
                if !(3..=4).contains(&coords.len()) || coords.iter().any(|c| !c.is_finite()) {
                    return Err(perr(line_no, format!("malformed vertex record {line:?}")));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let mut idxs = Vec::new();
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| perr(line_no, format!("bad face index {tok:?}")))?;
                    if i <= 0 {
                        return Err(perr(
                            line_no,
                            format!("face index {i} not supported (must be positive)"),
                        ));
                    }
                    idxs.push(i as usize - 1);
                }
                if idxs.len() < 3 {
                    return Err(perr(line_no, "face needs at least 3 vertices".into()));
                }
                faces.push((line_no, idxs));
            }
            Some(_) => {}
        }
    }
    let mut triangles = Vec::new();
    for (line_no, idxs) in faces {
        if let Some(bad) = idxs.iter().find(|&&i| i >= vertices.len()) {
            return Err(perr(
                line_no,
                format!("face index {} out of range ({} vertices)", bad + 1, vertices.len()),
            ));
        }
        for k in 1..idxs.len() - 1 {
            triangles.push([idxs[0], idxs[k], idxs[k + 1]]);
        }
    }
    if triangles.is_empty() {
        return Err(Error::EmptyMesh(path.display().to_string()));
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| match e {
        Error::EmptyMesh(_) => Error::EmptyMesh(path.display().to_string()),
        other => other,
    })
}

/// Object-frame point set used by the point-cloud losses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub mesh_id: String,
    pub seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cloud made of the mesh vertices themselves.
    pub fn from_vertices(mesh: &TriangleMesh, mesh_id: &str) -> Self {
        PointCloud {
            points: mesh.vertices().to_vec(),
            mesh_id: mesh_id.to_string(),
            seed: 0,
        }
    }
}

/// Area-weighted uniform sample of `m` surface points, deterministic in
/// `seed`. Each point is a barycentric combination of one triangle picked by
/// inverting the cumulative area table.
pub fn sample_surface(mesh: &TriangleMesh, m: usize, seed: u64) -> Result<PointCloud> {
    let (points, _) = sample_surface_with_faces(mesh, m, seed)?;
    Ok(PointCloud {
        points,
        mesh_id: String::new(),
        seed,
    })
}

/// Like [`sample_surface`] but also returns the source triangle of each point.
pub fn sample_surface_with_faces(mesh: &TriangleMesh, m: usize, seed: u64) -> Result<(Vec<Vec3>, Vec<usize>)> {
    if m < 4 {
        return Err(Error::InvalidArgument(format!(
            "point cloud needs at least 4 points, got {m}"
        )));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles().len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles().len() {
        acc += mesh.area(t);
        cumulative.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(m);
    let mut faces = Vec::with_capacity(m);
    for _ in 0..m {
        let target = rng.random::<f64>() * total;
        let t = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let [a, b, c] = mesh.triangle(t);
        let p = geom::add(
            a,
            geom::add(geom::scale(geom::sub(b, a), u), geom::scale(geom::sub(c, a), v)),
        );
        points.push(p);
        faces.push(t);
    }
    Ok((points, faces))
}

/// Built-in meshes used by tests, examples and default datasets.
pub mod shapes {
    use super::*;

    /// Axis-aligned box spanning `lo..hi`, 12 outward-wound triangles.
    pub fn cuboid(lo: Vec3, hi: Vec3) -> (Vec<Vec3>, Vec<[usize; 3]>) {
        let v = |x: usize, y: usize, z: usize| {
            [
                if x == 0 { lo[0] } else { hi[0] },
                if y == 0 { lo[1] } else { hi[1] },
                if z == 0 { lo[2] } else { hi[2] },
            ]
        };
        let mut vertices = Vec::with_capacity(8);
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    vertices.push(v(x, y, z));
                }
            }
        }
        // vertex index = 4x + 2y + z
        let quads = [
            [0, 1, 3, 2], // x = lo
            [4, 6, 7, 5], // x = hi
            [0, 4, 5, 1], // y = lo
            [2, 3, 7, 6], // y = hi
            [0, 2, 6, 4], // z = lo
            [1, 5, 7, 3], // z = hi
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        (vertices, triangles)
    }

    fn union(parts: &[(Vec3, Vec3)]) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for &(lo, hi) in parts {
            let (v, t) = cuboid(lo, hi);
            let base = vertices.len();
            vertices.extend(v);
            triangles.extend(t.into_iter().map(|t| t.map(|i| i + base)));
        }
        TriangleMesh::new(vertices, triangles).expect("built-in mesh is valid")
    }

    /// Cube of side `size` centered on the origin.
    pub fn centered_cube(size: f64) -> TriangleMesh {
        let h = size / 2.0;
        union(&[([-h, -h, -h], [h, h, h])])
    }

    /// Cube of side `size` whose object-frame origin is the center of its
    /// `-z` face, so under the identity orientation that face lies exactly
    /// at the pose depth and faces the camera.
    pub fn face_anchored_cube(size: f64) -> TriangleMesh {
        let h = size / 2.0;
        union(&[([-h, -h, 0.0], [h, h, size])])
    }

    /// Three orthogonal arms of distinct lengths joined at a hub. The shape
    /// has no mirror symmetry, so its silhouettes are unambiguous in the
    /// orthographic limit.
    pub fn tripod() -> TriangleMesh {
        let hub = 0.075;
        let w = 0.06;
        let (lx, ly, lz) = (0.39, 0.255, 0.15);
        let parts = [
            ([-hub, -hub, -hub], [hub, hub, hub]),
            ([hub, -w, -w], [lx, w, w]),
            ([-w, hub, -w], [w, ly, w]),
            ([-w, -w, hub], [w, w, lz]),
        ];
        recenter(union(&parts))
    }

    /// Translates the mesh so its surface-area centroid is the origin.
    pub fn recenter(mesh: TriangleMesh) -> TriangleMesh {
        let mut c = [0.0; 3];
        let mut total = 0.0;
        for t in 0..mesh.triangles().len() {
            let [a, b, d] = mesh.triangle(t);
            let area = mesh.area(t);
            total += area;
            for k in 0..3 {
                c[k] += area * (a[k] + b[k] + d[k]) / 3.0;
            }
        }
        let c = geom::scale(c, 1.0 / total);
        let vertices = mesh.vertices().iter().map(|v| geom::sub(*v, c)).collect();
        TriangleMesh::new(vertices, mesh.triangles().to_vec()).expect("translation keeps validity")
    }

    /// Looks up a built-in mesh by name.
    pub fn by_name(name: &str) -> Option<TriangleMesh> {
        match name {
            "tripod" => Some(tripod()),
            "cube" => Some(centered_cube(0.2)),
            "face-cube" => Some(face_anchored_cube(0.2)),
            _ => None,
        }
    }

    pub const NAMES: [&str; 3] = ["tripod", "cube", "face-cube"];
}
