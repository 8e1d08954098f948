//! Pinhole projection, silhouette and flat-shaded rasterization, and the
//! random pose sampler that drives synthetic data generation.
//!
//! Pixel `(i, j)` covers `[i, i+1) x [j, j+1)` in image coordinates and is
//! sampled at its center. Coverage uses a top-left fill rule so a pixel
//! center on an edge shared by two triangles belongs to exactly one of them.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec3};
use crate::image::{GrayImage, MaskImage};
use crate::mesh::TriangleMesh;
use crate::pose::{Pose, Quaternion};

/// Vertices must be at least this far in front of the camera.
pub const MIN_DEPTH: f64 = 1e-6;

/// Consecutive rejections after which the sampler gives up.
pub const MAX_REJECTIONS: usize = 1000;

pub const DEFAULT_LIGHT: Vec3 = [0.0, 0.0, -1.0];

const AMBIENT: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid intrinsics {self:?}")))
        }
    }

    /// 640x480 camera with fx = fy = 525 and a centered principal point.
    pub fn kinect_vga() -> Self {
        CameraIntrinsics {
            fx: 525.0,
            fy: 525.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }

    /// Same camera resampled to a `width x height` image.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        CameraIntrinsics::new(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)
    }

    pub fn project(&self, p: Vec3) -> Result<[f64; 2]> {
        if !(p[2] > 0.0) {
            return Err(Error::BehindCamera { z: p[2] });
        }
        Ok([self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy])
    }
}

pub fn project_point(k: &CameraIntrinsics, p: Vec3) -> Result<[f64; 2]> {
    k.project(p)
}

#[inline]
fn orient(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Edge function evaluated in a canonical vertex order, so swapping `a` and
/// `b` negates the result exactly.
#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    if (a[0], a[1]) <= (b[0], b[1]) {
        orient(a, b, p)
    } else {
        -orient(b, a, p)
    }
}

#[inline]
fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

#[inline]
fn covers(w: f64, a: [f64; 2], b: [f64; 2]) -> bool {
    w > 0.0 || (w == 0.0 && is_top_left(a, b))
}

/// Calls `visit(x, y, weights)` for every pixel whose center is covered by
/// the projected triangle; `weights` are barycentric coordinates of the
/// pixel center relative to the original vertex order.
fn scan_triangle(tri: [[f64; 2]; 3], width: usize, height: usize, mut visit: impl FnMut(usize, usize, [f64; 3])) {
    let [a, mut b, mut c] = tri;
    let area = edge(a, b, c);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    let flipped = area < 0.0;
    if flipped {
        std::mem::swap(&mut b, &mut c);
    }
    let area = area.abs();
    let min_x = a[0].min(b[0]).min(c[0]);
    let max_x = a[0].max(b[0]).max(c[0]);
    let min_y = a[1].min(b[1]).min(c[1]);
    let max_y = a[1].max(b[1]).max(c[1]);
    let x0 = (min_x - 0.5).ceil().max(0.0);
    let y0 = (min_y - 0.5).ceil().max(0.0);
    let x1 = (max_x - 0.5).floor().min(width as f64 - 1.0);
    let y1 = (max_y - 0.5).floor().min(height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    for y in y0 as usize..=y1 as usize {
        let py = y as f64 + 0.5;
        for x in x0 as usize..=x1 as usize {
            let p = [x as f64 + 0.5, py];
            let wa = edge(b, c, p);
            let wb = edge(c, a, p);
            let wc = edge(a, b, p);
            if covers(wa, b, c) && covers(wb, c, a) && covers(wc, a, b) {
                let (la, lb, lc) = (wa / area, wb / area, wc / area);
                let weights = if flipped { [la, lc, lb] } else { [la, lb, lc] };
                visit(x, y, weights);
            }
        }
    }
}

fn transform_vertices(mesh: &TriangleMesh, pose: &Pose) -> Result<Vec<Vec3>> {
    let r = pose.rotation();
    mesh.vertices()
        .iter()
        .map(|v| {
            let p = geom::add(geom::mat_vec(&r, *v), pose.position);
            if p[2] > MIN_DEPTH {
                Ok(p)
            } else {
                Err(Error::BehindCamera { z: p[2] })
            }
        })
        .collect()
}

fn project_all(k: &CameraIntrinsics, cam: &[Vec3]) -> Result<Vec<[f64; 2]>> {
    cam.iter().map(|p| k.project(*p)).collect()
}

/// Binary silhouette: a pixel is set iff its center lies inside the
/// projection of at least one triangle.
pub fn rasterize_silhouette(mesh: &TriangleMesh, pose: &Pose, k: &CameraIntrinsics) -> Result<MaskImage> {
    let cam = transform_vertices(mesh, pose)?;
    let proj = project_all(k, &cam)?;
    let mut mask = MaskImage::new(k.width, k.height);
    for t in mesh.triangles() {
        scan_triangle(t.map(|i| proj[i]), k.width, k.height, |x, y, _| mask.set(x, y, true));
    }
    Ok(mask)
}

/// Silhouette of a single triangle of the mesh.
pub fn rasterize_triangle(
    mesh: &TriangleMesh,
    triangle: usize,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<MaskImage> {
    let cam = transform_vertices(mesh, pose)?;
    let proj = project_all(k, &cam)?;
    let mut mask = MaskImage::new(k.width, k.height);
    scan_triangle(
        mesh.triangles()[triangle].map(|i| proj[i]),
        k.width,
        k.height,
        |x, y, _| mask.set(x, y, true),
    );
    Ok(mask)
}

/// Flat Lambertian rendering with a z-buffer. `light_dir` points from the
/// surface toward the light. Every covered pixel receives at least the
/// ambient level, so the nonzero support equals the silhouette.
pub fn render_shaded(mesh: &TriangleMesh, pose: &Pose, k: &CameraIntrinsics, light_dir: Vec3) -> Result<GrayImage> {
    let ln = geom::norm(light_dir);
    if !(ln > 0.0) || !ln.is_finite() {
        return Err(Error::InvalidArgument("light direction must be nonzero".into()));
    }
    let light = geom::scale(light_dir, 1.0 / ln);
    let cam = transform_vertices(mesh, pose)?;
    let proj = project_all(k, &cam)?;
    let mut inv_depth = vec![f64::NEG_INFINITY; k.width * k.height];
    let mut image = GrayImage::new(k.width, k.height);
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|i| cam[i]);
        let mut n = geom::cross(geom::sub(b, a), geom::sub(c, a));
        let nn = geom::norm(n);
        if nn == 0.0 {
            continue;
        }
        n = geom::scale(n, 1.0 / nn);
        // the visible side faces the camera at the origin
        if geom::dot(n, a) > 0.0 {
            n = geom::scale(n, -1.0);
        }
        let lambert = geom::dot(n, light).max(0.0);
        let shade = (AMBIENT + (255.0 - AMBIENT) * lambert).round().clamp(1.0, 255.0) as u8;
        let inv_z = [1.0 / a[2], 1.0 / b[2], 1.0 / c[2]];
        scan_triangle(t.map(|i| proj[i]), k.width, k.height, |x, y, w| {
            let d = w[0] * inv_z[0] + w[1] * inv_z[1] + w[2] * inv_z[2];
            let idx = y * k.width + x;
            if d > inv_depth[idx] {
                inv_depth[idx] = d;
                image.set(x, y, shade);
            }
        });
    }
    Ok(image)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSamplerConfig {
    pub z_min: f64,
    pub z_max: f64,
    /// Fraction of the image width/height excluded at each side when
    /// placing the object origin.
    pub lateral_margin: f64,
    pub min_pixels: usize,
    pub seed: u64,
}

impl Default for PoseSamplerConfig {
    fn default() -> Self {
        PoseSamplerConfig {
            z_min: 0.6,
            z_max: 1.2,
            lateral_margin: 0.45,
            min_pixels: 20,
            seed: 0,
        }
    }
}

impl PoseSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_min > 0.0 && self.z_min <= self.z_max && self.z_max.is_finite()) {
            return Err(Error::Config(format!(
                "depth range [{}, {}] invalid",
                self.z_min, self.z_max
            )));
        }
        if !(0.0..0.5).contains(&self.lateral_margin) {
            return Err(Error::Config(format!(
                "lateral margin {} outside [0, 0.5)",
                self.lateral_margin
            )));
        }
        if self.min_pixels < 1 {
            return Err(Error::Config("min pixel count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Draws a pose with uniform orientation, uniform depth and uniform lateral
/// placement, resampling until the silhouette is large enough and clear of
/// the image border. Returns the pose and its silhouette.
pub fn sample_pose_with_mask<R: Rng + ?Sized>(
    cfg: &PoseSamplerConfig,
    mesh: &TriangleMesh,
    k: &CameraIntrinsics,
    rng: &mut R,
) -> Result<(Pose, MaskImage)> {
    cfg.validate()?;
    let (w, h) = (k.width as f64, k.height as f64);
    let m = cfg.lateral_margin;
    for _ in 0..MAX_REJECTIONS {
        let orientation = Quaternion::random_uniform(rng);
        let z = if cfg.z_max > cfg.z_min {
            rng.random_range(cfg.z_min..=cfg.z_max)
        } else {
            cfg.z_min
        };
        let u = m * w + rng.random::<f64>() * (1.0 - 2.0 * m) * w;
        let v = m * h + rng.random::<f64>() * (1.0 - 2.0 * m) * h;
        let position = [(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z];
        let pose = Pose { position, orientation };
        let mask = match rasterize_silhouette(mesh, &pose, k) {
            Ok(mask) => mask,
            Err(Error::BehindCamera { .. }) => continue,
            Err(e) => return Err(e),
        };
        if mask.count() >= cfg.min_pixels && !mask.touches_border() {
            return Ok((pose, mask));
        }
    }
    Err(Error::SamplerExhausted {
        attempts: MAX_REJECTIONS,
    })
}

pub fn sample_pose<R: Rng + ?Sized>(
    cfg: &PoseSamplerConfig,
    mesh: &TriangleMesh,
    k: &CameraIntrinsics,
    rng: &mut R,
) -> Result<Pose> {
    sample_pose_with_mask(cfg, mesh, k, rng).map(|(p, _)| p)
}
