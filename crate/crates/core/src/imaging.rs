//! Synthetic sensor: ground-truth corner projections, noisy geometric
//! observations gated by a detection-range model, and rasterized grayscale
//! checkerboard images for the full detection path.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detection::{CornerObservation, DetectionFailure};
use crate::geometry::{project_point, CameraIntrinsics, CueModel, GeometryError, PixelPoint, Pose};

pub const BACKGROUND: f64 = 0.5;
pub const BLACK: f64 = 0.05;
pub const WHITE: f64 = 0.95;
const SUPERSAMPLE: usize = 4;

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Bilinear sample at a real-valued pixel position (pixel centers at
    /// integer coordinates), clamped to the border.
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        let x0 = u.floor() as usize;
        let y0 = v.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// Binary PGM (P5), 8 bits per pixel.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_pgm())
    }
}

/// Camera imperfections applied by the synthetic sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationNoise {
    /// Std-dev of i.i.d. Gaussian corner noise in geometric mode, pixels.
    pub sigma_px: f64,
    /// Gaussian point-spread std-dev applied to rendered images, pixels.
    pub blur_radius: f64,
    /// Std-dev of additive intensity noise on rendered images.
    pub intensity_sigma: f64,
    pub seed: u64,
}

impl Default for ObservationNoise {
    fn default() -> Self {
        Self { sigma_px: 0.004, blur_radius: 1.0, intensity_sigma: 0.01, seed: 0 }
    }
}

impl ObservationNoise {
    pub fn noiseless() -> Self {
        Self { sigma_px: 0.0, blur_radius: 0.0, intensity_sigma: 0.0, seed: 0 }
    }
}

/// Single-threshold detection-range model: the cue is detectable while every
/// inner corner is inside the image and the projected square side is at least
/// `min_square_px`. This folds resolution and detector quality into one
/// number, so it only approximates measured valid ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub min_square_px: f64,
}

/// Maximum valid range of 120 mm squares at 720p.
pub const REFERENCE_RANGE_M: f64 = 17.5;

impl Visibility {
    /// Threshold that places the detection boundary of a fronto-parallel board
    /// with `square_size` squares at `max_range` meters.
    pub fn from_range(square_size: f64, fx: f64, max_range: f64) -> Self {
        Self { min_square_px: square_size * fx / max_range }
    }
}

impl Default for Visibility {
    fn default() -> Self {
        Self::from_range(0.120, CameraIntrinsics::hd720().fx, REFERENCE_RANGE_M)
    }
}

/// Exact projections of the cue corners, in the cue's row-major order.
pub fn ground_truth_corners(k: &CameraIntrinsics, pose: &Pose, cue: &CueModel) -> Result<Vec<PixelPoint>, GeometryError> {
    cue.corner_points.iter().map(|p| project_point(k, pose, p)).collect()
}

/// Smallest average square side along any grid row or column: the span
/// between its end corners over the number of squares it crosses. Averaging
/// along the line keeps the measure stable under corner noise.
pub fn min_projected_square(corners: &[PixelPoint], rows: usize, cols: usize) -> f64 {
    let rows_min = (0..rows)
        .filter(|_| cols > 1)
        .map(|r| corners[r * cols].dist(&corners[r * cols + cols - 1]) / (cols - 1) as f64);
    let cols_min = (0..cols)
        .filter(|_| rows > 1)
        .map(|c| corners[c].dist(&corners[(rows - 1) * cols + c]) / (rows - 1) as f64);
    rows_min.chain(cols_min).fold(f64::INFINITY, f64::min)
}

/// Geometric-fidelity observation: ground truth plus Gaussian pixel noise, or
/// a detection failure when the cue is out of view or too small to resolve.
pub fn observe_corners_geometric<R: Rng + ?Sized>(
    k: &CameraIntrinsics,
    pose: &Pose,
    cue: &CueModel,
    noise: &ObservationNoise,
    visibility: &Visibility,
    rng: &mut R,
) -> Result<CornerObservation, DetectionFailure> {
    let truth = ground_truth_corners(k, pose, cue).map_err(|_| DetectionFailure::BehindCamera)?;
    if !truth.iter().all(|p| k.contains(*p)) {
        return Err(DetectionFailure::OutOfView);
    }
    let side = min_projected_square(&truth, cue.rows, cue.cols);
    if side < visibility.min_square_px {
        return Err(DetectionFailure::TooSmall { side_px: side });
    }
    let corners = if noise.sigma_px > 0.0 {
        let normal = Normal::new(0.0, noise.sigma_px).expect("finite sigma");
        truth
            .iter()
            .map(|p| PixelPoint::new(p.u + normal.sample(rng), p.v + normal.sample(rng)))
            .collect()
    } else {
        truth
    };
    Ok(CornerObservation::new(corners, cue.rows, cue.cols))
}

/// Intensity of the printed board at cue-plane coordinates `(x, y)`:
/// checker squares, a one-square white quiet border, then background.
fn board_intensity(cue: &CueModel, x: f64, y: f64) -> f64 {
    let (hx, hy) = cue.half_extent();
    let s = cue.square_size;
    if x.abs() > hx + s || y.abs() > hy + s {
        return BACKGROUND;
    }
    if x.abs() >= hx || y.abs() >= hy {
        return WHITE;
    }
    let i = ((x + hx) / s).floor() as i64;
    let j = ((y + hy) / s).floor() as i64;
    if (i + j) % 2 == 0 {
        BLACK
    } else {
        WHITE
    }
}

/// Renders the cue as seen by the camera: 4×4 supersampled checkerboard on a
/// mid-gray background, Gaussian blur of `blur_radius`, then additive
/// intensity noise. A cue fully out of view yields a plain (noisy) background.
pub fn render_cue_image<R: Rng + ?Sized>(
    k: &CameraIntrinsics,
    pose: &Pose,
    cue: &CueModel,
    noise: &ObservationNoise,
    rng: &mut R,
) -> GrayImage {
    let (w, h) = (k.width as usize, k.height as usize);
    let mut img = GrayImage::filled(w, h, BACKGROUND);

    // plane-to-image homography H = A [r1 r2 t]
    let r = &pose.rotation;
    let t = &pose.translation;
    let hmat = k.matrix() * Matrix3::from_columns(&[r.column(0).into_owned(), r.column(1).into_owned(), *t]);
    if let Some(hinv) = hmat.try_inverse() {
        if let Some((x0, y0, x1, y1)) = board_bounds(k, pose, cue, noise.blur_radius) {
            let step = 1.0 / SUPERSAMPLE as f64;
            let norm = 1.0 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let mut acc = 0.0;
                    for sy in 0..SUPERSAMPLE {
                        let v = y as f64 - 0.5 + (sy as f64 + 0.5) * step;
                        for sx in 0..SUPERSAMPLE {
                            let u = x as f64 - 0.5 + (sx as f64 + 0.5) * step;
                            let q = hinv * Vector3::new(u, v, 1.0);
                            // q.z is the inverse depth of the plane point; <= 0 means the ray misses
                            acc += if q.z > 1e-12 { board_intensity(cue, q.x / q.z, q.y / q.z) } else { BACKGROUND };
                        }
                    }
                    img.set(x, y, acc * norm);
                }
            }
            if noise.blur_radius > 0.0 {
                gaussian_blur_region(&mut img, noise.blur_radius, (x0, y0, x1, y1));
            }
        }
    }

    if noise.intensity_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.intensity_sigma).expect("finite sigma");
        for v in img.data.iter_mut() {
            *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
    img
}

/// Pixel rectangle covering the board and its quiet border, padded for blur.
/// Falls back to the whole image when part of the board is behind the camera.
fn board_bounds(k: &CameraIntrinsics, pose: &Pose, cue: &CueModel, blur: f64) -> Option<(usize, usize, usize, usize)> {
    let (hx, hy) = cue.half_extent();
    let (bx, by) = (hx + cue.square_size, hy + cue.square_size);
    let outline = [(-bx, -by), (bx, -by), (bx, by), (-bx, by)];
    let (w, h) = (k.width as f64, k.height as f64);
    let mut umin = f64::INFINITY;
    let mut umax = f64::NEG_INFINITY;
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for (x, y) in outline {
        match project_point(k, pose, &Vector3::new(x, y, 0.0)) {
            Ok(p) => {
                umin = umin.min(p.u);
                umax = umax.max(p.u);
                vmin = vmin.min(p.v);
                vmax = vmax.max(p.v);
            }
            Err(_) => return Some((0, 0, k.width as usize - 1, k.height as usize - 1)),
        }
    }
    let pad = (3.0 * blur).ceil() + 2.0;
    let x0 = (umin - pad).floor().max(0.0);
    let y0 = (vmin - pad).floor().max(0.0);
    let x1 = (umax + pad).ceil().min(w - 1.0);
    let y1 = (vmax + pad).ceil().min(h - 1.0);
    if x0 > x1 || y0 > y1 {
        return None;
    }
    Some((x0 as usize, y0 as usize, x1 as usize, y1 as usize))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur restricted to a rectangle, with clamped borders.
/// Pixels outside the rectangle must be constant background for this to match
/// a full-image blur.
fn gaussian_blur_region(img: &mut GrayImage, sigma: f64, (x0, y0, x1, y1): (usize, usize, usize, usize)) {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (img.width as i64, img.height as i64);
    let mut tmp = img.clone();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let xx = (x as i64 + i as i64 - radius).clamp(0, w - 1) as usize;
                acc += kv * img.get(xx, y);
            }
            tmp.set(x, y, acc);
        }
    }
    for y in y0..=y1 {
        for x in x0..=x1 {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let yy = (y as i64 + i as i64 - radius).clamp(0, h - 1) as usize;
                acc += kv * tmp.get(x, yy);
            }
            img.set(x, y, acc);
        }
    }
}
