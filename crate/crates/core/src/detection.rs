//! Corner grid recovery from grayscale images: gradients, Harris-style coarse
//! candidates, Förstner sub-pixel refinement and gravity-up grid ordering.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PixelPoint;
use crate::imaging::{min_projected_square, GrayImage, Visibility};

/// Why a frame produced no usable corner grid. Failures are ordinary values in
/// the control loop: the vehicle falls back to scanning.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DetectionFailure {
    #[error("cue is behind the camera")]
    BehindCamera,
    #[error("cue corners fall outside the image")]
    OutOfView,
    #[error("projected square side {side_px:.2} px is below the resolvable minimum")]
    TooSmall { side_px: f64 },
    #[error("image smaller than 3x3")]
    ImageTooSmall,
    #[error("found {found} corner candidates, expected {expected}")]
    TooFewCandidates { found: usize, expected: usize },
    #[error("sub-pixel refinement failed")]
    RefineFailed,
    #[error("corners do not form a {rows}x{cols} grid")]
    GridFit { rows: usize, cols: usize },
}

/// Ordered corner grid, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerObservation {
    pub corners: Vec<PixelPoint>,
    pub rows: usize,
    pub cols: usize,
    /// Corner response per corner when produced by the image detector; empty
    /// for geometric-mode observations.
    pub responses: Vec<f64>,
}

impl CornerObservation {
    pub fn new(corners: Vec<PixelPoint>, rows: usize, cols: usize) -> Self {
        assert_eq!(corners.len(), rows * cols, "corner count must match the grid");
        Self { corners, rows, cols, responses: Vec::new() }
    }

    pub fn count(&self) -> usize {
        self.corners.len()
    }

    pub fn centroid(&self) -> PixelPoint {
        let n = self.corners.len() as f64;
        let (su, sv) = self.corners.iter().fold((0.0, 0.0), |(a, b), p| (a + p.u, b + p.v));
        PixelPoint::new(su / n, sv / n)
    }

    /// Debug dump with one `u,v,response` row per corner.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("u,v,response\n");
        for (i, p) in self.corners.iter().enumerate() {
            match self.responses.get(i) {
                Some(r) => out.push_str(&format!("{},{},{}\n", p.u, p.v, r)),
                None => out.push_str(&format!("{},{},\n", p.u, p.v)),
            }
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Vector2<f64> {
        let i = y * self.width + x;
        Vector2::new(self.gx[i], self.gy[i])
    }
}

/// Central differences in the interior, one-sided differences on the border.
pub fn image_gradients(img: &GrayImage) -> Result<GradientField, DetectionFailure> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(DetectionFailure::ImageTooSmall);
    }
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = if x == 0 {
                img.get(1, y) - img.get(0, y)
            } else if x == w - 1 {
                img.get(w - 1, y) - img.get(w - 2, y)
            } else {
                0.5 * (img.get(x + 1, y) - img.get(x - 1, y))
            };
            gy[i] = if y == 0 {
                img.get(x, 1) - img.get(x, 0)
            } else if y == h - 1 {
                img.get(x, h - 1) - img.get(x, h - 2)
            } else {
                0.5 * (img.get(x, y + 1) - img.get(x, y - 1))
            };
        }
    }
    Ok(GradientField { width: w, height: h, gx, gy })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub harris_k: f64,
    /// Side of the square structure-tensor window, pixels (odd).
    pub tensor_window: usize,
    /// Responses below this are treated as flat image.
    pub min_response: f64,
    pub max_half_window: f64,
    pub max_refine_iters: usize,
    /// Circle radii tried by the saddle test, pixels. Harris peaks sit up to
    /// about 1.5 px off the true corner, so the circle must be wider than that.
    pub saddle_radii: [f64; 3],
    pub visibility: Visibility,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            harris_k: 0.04,
            tensor_window: 5,
            min_response: 1e-3,
            max_half_window: 4.0,
            max_refine_iters: 10,
            saddle_radii: [2.5, 3.5, 4.5],
            visibility: Visibility::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub point: PixelPoint,
    pub response: f64,
}

/// Separable convolution of a full-size channel with a symmetric kernel,
/// clamping at the borders.
fn convolve_separable(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let xx = (x as i64 + i as i64 - r).clamp(0, w as i64 - 1) as usize;
                acc += k * src[y * w + xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let yy = (y as i64 + i as i64 - r).clamp(0, h as i64 - 1) as usize;
                acc += k * tmp[yy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Harris response `det(M) − k·tr(M)²` of the structure tensor accumulated
/// over a `window`×`window` neighborhood. Gaussian weights (σ = window/4)
/// make the response peak at the junction instead of plateauing around it.
pub fn harris_response(grad: &GradientField, k: f64, window: usize) -> Vec<f64> {
    let (w, h) = (grad.width, grad.height);
    let r = (window / 2) as i64;
    let sigma = window as f64 / 4.0;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|v| v / norm * window as f64).collect();
    let xx: Vec<f64> = grad.gx.iter().map(|g| g * g).collect();
    let xy: Vec<f64> = grad.gx.iter().zip(&grad.gy).map(|(a, b)| a * b).collect();
    let yy: Vec<f64> = grad.gy.iter().map(|g| g * g).collect();
    let sxx = convolve_separable(&xx, w, h, &kernel);
    let sxy = convolve_separable(&xy, w, h, &kernel);
    let syy = convolve_separable(&yy, w, h, &kernel);
    (0..w * h)
        .map(|i| {
            let (a, b, c) = (sxx[i], sxy[i], syy[i]);
            a * c - b * b - k * (a + c) * (a + c)
        })
        .collect()
}

/// The `expected` strongest response maxima at least `min_separation` pixels
/// apart, strongest first. Only checker saddles (alternating dark/bright
/// quadrants) qualify, which excludes the L-shaped corners on the board
/// outline.
pub fn corner_candidates(
    img: &GrayImage,
    grad: &GradientField,
    expected: usize,
    min_separation: f64,
    cfg: &DetectorConfig,
) -> Result<Vec<Candidate>, DetectionFailure> {
    assert!(expected >= 1);
    let (w, h) = (grad.width, grad.height);
    let response = harris_response(grad, cfg.harris_k, cfg.tensor_window);
    // 3×3 local maxima above the flat-image floor
    let mut peaks: Vec<(usize, usize, f64)> = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let r = response[y * w + x];
            if r <= cfg.min_response {
                continue;
            }
            let mut is_max = true;
            'n: for dy in 0..3 {
                for dx in 0..3 {
                    if dx == 1 && dy == 1 {
                        continue;
                    }
                    let (xx, yy) = (x + dx - 1, y + dy - 1);
                    let q = response[yy * w + xx];
                    // ties resolved toward the earlier pixel in raster order
                    if q > r || (q == r && (yy, xx) < (y, x)) {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                peaks.push((x, y, r));
            }
        }
    }
    peaks.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.1, a.0).cmp(&(b.1, b.0))));

    let mut accepted: Vec<Candidate> = Vec::with_capacity(expected);
    for (x, y, r) in peaks {
        let p = PixelPoint::new(x as f64, y as f64);
        if accepted.iter().all(|c| c.point.dist(&p) >= min_separation) && cfg.saddle_radii.iter().any(|&r| is_saddle(img, p, r)) {
            accepted.push(Candidate { point: p, response: r });
            if accepted.len() == expected {
                return Ok(accepted);
            }
        }
    }
    Err(DetectionFailure::TooFewCandidates { found: accepted.len(), expected })
}

/// Counts dark/bright alternations on a circle around `p`; a checker corner
/// shows four, an edge or L-corner two.
pub fn is_saddle(img: &GrayImage, p: PixelPoint, radius: f64) -> bool {
    const N: usize = 16;
    let samples: Vec<f64> = (0..N)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / N as f64;
            img.sample(p.u + radius * a.cos(), p.v + radius * a.sin())
        })
        .collect();
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let band = 0.15 * (hi - lo);
    if hi - lo <= 0.0 {
        return false;
    }
    let signs: Vec<bool> = samples.iter().filter(|&&s| (s - mid).abs() > band).map(|&s| s > mid).collect();
    if signs.is_empty() {
        return false;
    }
    let changes = (0..signs.len()).filter(|&i| signs[i] != signs[(i + 1) % signs.len()]).count();
    changes == 4
}

/// One closed-form Förstner step: the point minimizing the summed squared
/// projections of window gradients onto the offsets to that point.
pub fn forstner_refine(grad: &GradientField, c0: PixelPoint, half_window: f64) -> Result<PixelPoint, DetectionFailure> {
    let r = half_window.floor() as i64;
    if r < 1 {
        return Err(DetectionFailure::RefineFailed);
    }
    let (cx, cy) = (c0.u.round() as i64, c0.v.round() as i64);
    if cx - r < 0 || cy - r < 0 || cx + r >= grad.width as i64 || cy + r >= grad.height as i64 {
        return Err(DetectionFailure::RefineFailed);
    }
    let mut a = Matrix2::zeros();
    let mut b = Vector2::zeros();
    for y in cy - r..=cy + r {
        for x in cx - r..=cx + r {
            let g = grad.at(x as usize, y as usize);
            let ggt = g * g.transpose();
            a += ggt;
            b += ggt * Vector2::new(x as f64, y as f64);
        }
    }
    let tr = a.trace();
    if tr <= 0.0 || a.determinant() <= 1e-6 * tr * tr {
        return Err(DetectionFailure::RefineFailed);
    }
    let c = a.try_inverse().ok_or(DetectionFailure::RefineFailed)? * b;
    let refined = PixelPoint::new(c.x, c.y);
    if refined.dist(&c0) > half_window {
        return Err(DetectionFailure::RefineFailed);
    }
    Ok(refined)
}

/// Repeats the Förstner step, re-centering the window, until the estimate
/// settles. The final point stays within `half_window` of `c0`.
pub fn forstner_refine_iterated(
    grad: &GradientField,
    c0: PixelPoint,
    half_window: f64,
    max_iters: usize,
) -> Result<PixelPoint, DetectionFailure> {
    let mut c = forstner_refine(grad, c0, half_window)?;
    for _ in 1..max_iters {
        let next = forstner_refine(grad, c, half_window)?;
        if next.dist(&c0) > half_window {
            return Err(DetectionFailure::RefineFailed);
        }
        let moved = next.dist(&c);
        c = next;
        if moved < 1e-3 {
            break;
        }
    }
    Ok(c)
}

/// Total-least-squares line through points: (centroid, unit direction).
fn fit_line(points: &[PixelPoint]) -> (Vector2<f64>, Vector2<f64>) {
    let n = points.len() as f64;
    let c = points.iter().fold(Vector2::zeros(), |acc, p| acc + Vector2::new(p.u, p.v)) / n;
    let mut s = Matrix2::zeros();
    for p in points {
        let d = Vector2::new(p.u, p.v) - c;
        s += d * d.transpose();
    }
    // principal eigenvector of the 2×2 scatter matrix
    let theta = 0.5 * (2.0 * s[(0, 1)]).atan2(s[(0, 0)] - s[(1, 1)]);
    (c, Vector2::new(theta.cos(), theta.sin()))
}

fn line_distance(line: &(Vector2<f64>, Vector2<f64>), p: &PixelPoint) -> f64 {
    let d = Vector2::new(p.u, p.v) - line.0;
    (d.x * line.1.y - d.y * line.1.x).abs()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Orders an unordered perspective grid row-major from the top-left corner.
/// Rows are found by iterating line fits and nearest-line assignment; the top
/// row is the one with the smallest mean row coordinate (camera is level).
pub fn order_corner_grid(points: &[PixelPoint], rows: usize, cols: usize) -> Result<CornerObservation, DetectionFailure> {
    let fail = DetectionFailure::GridFit { rows, cols };
    if points.len() != rows * cols || rows == 0 || cols == 0 {
        return Err(fail);
    }
    let mut sorted: Vec<PixelPoint> = points.to_vec();
    sorted.sort_by(|a, b| a.v.total_cmp(&b.v).then(a.u.total_cmp(&b.u)));
    let mut groups: Vec<Vec<PixelPoint>> = sorted.chunks(cols).map(|c| c.to_vec()).collect();

    if cols >= 2 {
        for _ in 0..10 {
            let lines: Vec<_> = groups.iter().map(|g| fit_line(g)).collect();
            let mut next: Vec<Vec<PixelPoint>> = vec![Vec::new(); rows];
            for p in &sorted {
                let best = (0..rows)
                    .min_by(|&i, &j| line_distance(&lines[i], p).total_cmp(&line_distance(&lines[j], p)))
                    .unwrap();
                next[best].push(*p);
            }
            if next.iter().any(|g| g.len() != cols) {
                return Err(fail);
            }
            for g in next.iter_mut() {
                g.sort_by(|a, b| a.v.total_cmp(&b.v).then(a.u.total_cmp(&b.u)));
            }
            if next == groups {
                break;
            }
            groups = next;
        }
    }

    let mean_v = |g: &Vec<PixelPoint>| g.iter().map(|p| p.v).sum::<f64>() / g.len() as f64;
    groups.sort_by(|a, b| mean_v(a).total_cmp(&mean_v(b)));
    for g in groups.iter_mut() {
        g.sort_by(|a, b| a.u.total_cmp(&b.u));
    }
    let ordered: Vec<PixelPoint> = groups.concat();

    // residual check over both rows and columns
    let mut spacings = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let p = ordered[r * cols + c];
            if c + 1 < cols {
                spacings.push(p.dist(&ordered[r * cols + c + 1]));
            }
            if r + 1 < rows {
                spacings.push(p.dist(&ordered[(r + 1) * cols + c]));
            }
        }
    }
    let spacing = median(spacings);
    if spacing <= 0.0 {
        return Err(fail);
    }
    let tol = 0.25 * spacing;
    if cols >= 3 {
        for r in 0..rows {
            let row = &ordered[r * cols..(r + 1) * cols];
            let line = fit_line(row);
            if row.iter().any(|p| line_distance(&line, p) > tol) {
                return Err(fail);
            }
        }
    }
    if rows >= 3 {
        for c in 0..cols {
            let col: Vec<PixelPoint> = (0..rows).map(|r| ordered[r * cols + c]).collect();
            let line = fit_line(&col);
            if col.iter().any(|p| line_distance(&line, p) > tol) {
                return Err(fail);
            }
        }
    }
    Ok(CornerObservation::new(ordered, rows, cols))
}

/// Full image pipeline: candidates, iterated Förstner refinement, ordering,
/// and the resolvable-size gate shared with the geometric sensor.
pub fn detect_cue(img: &GrayImage, rows: usize, cols: usize, cfg: &DetectorConfig) -> Result<CornerObservation, DetectionFailure> {
    let grad = image_gradients(img)?;
    let expected = rows * cols;
    // squares narrower than the gate are rejected below, so half of it is a
    // safe suppression radius for every view that can succeed
    let candidates = corner_candidates(img, &grad, expected, 0.5 * cfg.visibility.min_square_px, cfg)?;

    let spacing = median(
        candidates
            .iter()
            .map(|c| {
                candidates
                    .iter()
                    .filter(|o| o.point != c.point)
                    .map(|o| o.point.dist(&c.point))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect(),
    );
    // Harris peaks sit about a pixel off each junction, so candidate spacing
    // reads low near the range limit; a third of it would drop the window to
    // 3×3 there, too small to localize the corner
    let half_window = cfg.max_half_window.min(spacing / 2.5);

    let mut refined = Vec::with_capacity(expected);
    for c in &candidates {
        let p = forstner_refine_iterated(&grad, c.point, half_window, cfg.max_refine_iters)?;
        refined.push((p, c.response));
    }
    let points: Vec<PixelPoint> = refined.iter().map(|r| r.0).collect();
    let mut obs = order_corner_grid(&points, rows, cols)?;
    obs.responses = obs
        .corners
        .iter()
        .map(|p| refined.iter().find(|r| r.0 == *p).map(|r| r.1).unwrap_or(0.0))
        .collect();

    let side = min_projected_square(&obs.corners, rows, cols);
    if side < cfg.visibility.min_square_px {
        return Err(DetectionFailure::TooSmall { side_px: side });
    }
    Ok(obs)
}
