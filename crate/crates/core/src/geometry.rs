//! Frames, rotations and the pinhole projection model.
//!
//! ## Frame conventions
//!
//! * **Cue frame** `C`: origin at the central inner corner of the checkerboard.
//!   `X_c` points to the right of an approaching camera, `Y_c` points down
//!   (gravity aligned, the gimbal keeps the camera level) and `Z_c = X_c × Y_c`
//!   points along the board normal *into* the board, i.e. away from the
//!   approaching camera. All corners lie in the plane `Z_c = 0`.
//! * **Camera frame**: standard optics, `Z` forward through the lens, `X`
//!   right, `Y` down.
//! * A [`Pose`] maps cue coordinates into camera coordinates,
//!   `p_cam = R·p_cue + t`. A camera squarely facing the board therefore has
//!   `R = I`, which is also the zero-rotation starting point of the PnP solver.
//! * **Heading frame**: forward/right/down axes obtained by the fixed cyclic
//!   permutation `(x, y, z) -> (z, x, y)` of the cue axes. Relative yaw is the
//!   ZYX yaw of the camera attitude expressed in this frame, positive when the
//!   camera nose is turned to the right of the board normal.

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest camera-frame depth that is still considered in front of the lens.
pub const MIN_DEPTH: f64 = 1e-6;

const ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("point lies behind the camera (depth {depth:.3e} m)")]
    BehindCamera { depth: f64 },
    #[error("matrix is not a proper rotation (orthonormality residual {residual:.3e})")]
    NotARotation { residual: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("invalid cue model: {0}")]
    InvalidCue(&'static str),
}

/// Pinhole intrinsics with the pixel pitch folded into the focal lengths,
/// so `fx = f_x / rho_u` and `fy = f_y / rho_v` are expressed in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, u0: f64, v0: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, u0, v0, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels, principal point at the image center, focal length from
    /// the horizontal field of view.
    pub fn from_hfov(width: u32, height: u32, hfov_deg: f64) -> Result<Self, GeometryError> {
        let half = 0.5 * hfov_deg.to_radians();
        if !(half > 0.0 && half < std::f64::consts::FRAC_PI_2) {
            return Err(GeometryError::InvalidIntrinsics("field of view must be in (0, 180) degrees"));
        }
        let f = 0.5 * width as f64 / half.tan();
        Self::new(f, f, 0.5 * width as f64, 0.5 * height as f64, width, height)
    }

    /// 1280×720 with a 69° horizontal field of view (fx = fy ≈ 931 px).
    pub fn hd720() -> Self {
        Self::from_hfov(1280, 720, 69.0).expect("default intrinsics are valid")
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fx.is_finite()) || !(self.fy > 0.0 && self.fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(self.u0 > 0.0 && self.u0 < self.width as f64) {
            return Err(GeometryError::InvalidIntrinsics("u0 must lie inside the image"));
        }
        if !(self.v0 > 0.0 && self.v0 < self.height as f64) {
            return Err(GeometryError::InvalidIntrinsics("v0 must lie inside the image"));
        }
        Ok(())
    }

    /// The 3×3 intrinsic matrix `A`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.u0, 0.0, self.fy, self.v0, 0.0, 0.0, 1.0)
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u <= (self.width - 1) as f64 && p.v <= (self.height - 1) as f64
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::hd720()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn dist(&self, other: &PixelPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Rigid transform from the cue frame into the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        check_rotation(&rotation, 1e-9)?;
        Ok(Self { rotation, translation })
    }

    /// Zero rotation vector and zero translation.
    pub fn zero() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_rodrigues(r: &Vector3<f64>, t: Vector3<f64>) -> Self {
        Self { rotation: rodrigues_to_matrix(r), translation: t }
    }

    /// Builds the pose of a level camera at `position` (cue frame, meters)
    /// whose nose is turned by `heading` radians about the vertical axis.
    pub fn from_camera_state(position: Vector3<f64>, heading: f64) -> Self {
        let rotation = heading_attitude(heading).transpose();
        let translation = -(rotation * position);
        Self { rotation, translation }
    }

    pub fn rodrigues(&self) -> Vector3<f64> {
        matrix_to_rodrigues(&self.rotation).expect("pose rotation is orthonormal")
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// The 3×4 extrinsic matrix `[R | t]`.
    pub fn extrinsic(&self) -> Matrix3x4<f64> {
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.set_column(3, &self.translation);
        m
    }
}

/// Checkerboard cue: `rows × cols` inner corners spaced `square_size` apart.
#[derive(Debug, Clone, PartialEq)]
pub struct CueModel {
    pub rows: usize,
    pub cols: usize,
    pub square_size: f64,
    pub corner_points: Vec<Vector3<f64>>,
}

impl CueModel {
    pub fn new(rows: usize, cols: usize, square_size: f64) -> Result<Self, GeometryError> {
        if rows < 2 || cols < 2 {
            return Err(GeometryError::InvalidCue("grid needs at least 2×2 inner corners"));
        }
        if !(square_size > 0.0 && square_size.is_finite()) {
            return Err(GeometryError::InvalidCue("square size must be positive"));
        }
        let cx = 0.5 * (cols - 1) as f64;
        let cy = 0.5 * (rows - 1) as f64;
        let corner_points = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| Vector3::new((c as f64 - cx) * square_size, (r as f64 - cy) * square_size, 0.0))
            })
            .collect();
        Ok(Self { rows, cols, square_size, corner_points })
    }

    pub fn count(&self) -> usize {
        self.rows * self.cols
    }

    /// Half extent of the printed squares (inner grid plus one square each side).
    pub fn half_extent(&self) -> (f64, f64) {
        (0.5 * (self.cols + 1) as f64 * self.square_size, 0.5 * (self.rows + 1) as f64 * self.square_size)
    }
}

impl Default for CueModel {
    /// 4×4 squares of 120 mm, i.e. a 3×3 inner-corner grid.
    fn default() -> Self {
        Self::new(3, 3, 0.120).expect("default cue is valid")
    }
}

/// Pinhole projection of a cue-frame point.
pub fn project_point(k: &CameraIntrinsics, pose: &Pose, p: &Vector3<f64>) -> Result<PixelPoint, GeometryError> {
    let pc = pose.transform(p);
    if pc.z <= MIN_DEPTH {
        return Err(GeometryError::BehindCamera { depth: pc.z });
    }
    Ok(PixelPoint { u: k.u0 + k.fx * pc.x / pc.z, v: k.v0 + k.fy * pc.y / pc.z })
}

/// Homogeneous form of the projection: `s·[u v 1]ᵀ = A·[R | t]·[X Y Z 1]ᵀ`.
pub fn project_homogeneous(k: &CameraIntrinsics, pose: &Pose, p: &Vector4<f64>) -> Vector3<f64> {
    k.matrix() * pose.extrinsic() * p
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map from an axis-angle vector to a rotation matrix.
pub fn rodrigues_to_matrix(r: &Vector3<f64>) -> Matrix3<f64> {
    let theta = r.norm();
    let k = skew(r);
    if theta < 1e-8 {
        // second-order Taylor expansion; exact to machine precision here
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * k * k
}

/// Logarithm map from a rotation matrix to its axis-angle vector, with the
/// rotation angle in `[0, π]`.
pub fn matrix_to_rodrigues(rot: &Matrix3<f64>) -> Result<Vector3<f64>, GeometryError> {
    check_rotation(rot, ORTHONORMAL_TOL)?;
    let w = 0.5 * Vector3::new(rot[(2, 1)] - rot[(1, 2)], rot[(0, 2)] - rot[(2, 0)], rot[(1, 0)] - rot[(0, 1)]);
    let sin_theta = w.norm();
    let cos_theta = (0.5 * (rot.trace() - 1.0)).clamp(-1.0, 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if theta < 1e-8 {
        return Ok(w);
    }
    if sin_theta > 1e-5 {
        return Ok(w * (theta / sin_theta));
    }

    // Near a half turn the skew part vanishes; recover the axis from the
    // symmetric part S = cosθ·I + (1 − cosθ)·n·nᵀ.
    let s = 0.5 * (rot + rot.transpose());
    let nn = (s - Matrix3::identity() * cos_theta) / (1.0 - cos_theta);
    let i = (0..3).max_by(|&a, &b| nn[(a, a)].total_cmp(&nn[(b, b)])).unwrap();
    let mut axis = nn.column(i).into_owned();
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

fn check_rotation(rot: &Matrix3<f64>, tol: f64) -> Result<(), GeometryError> {
    let residual = (rot.transpose() * rot - Matrix3::identity()).abs().max();
    let det = rot.determinant();
    if !residual.is_finite() || residual > tol || (det - 1.0).abs() > tol {
        return Err(GeometryError::NotARotation { residual: residual.max((det - 1.0).abs()) });
    }
    Ok(())
}

/// Camera position expressed in the cue frame, `−R⁻¹t = −Rᵀt`.
pub fn camera_position_in_cue(pose: &Pose) -> Vector3<f64> {
    -(pose.rotation.transpose() * pose.translation)
}

/// ZYX yaw of a rotation matrix, `atan2(R[1][0], R[0][0])`.
pub fn yaw_from_rotation(rot: &Matrix3<f64>) -> f64 {
    rot[(1, 0)].atan2(rot[(0, 0)])
}

/// Pure rotation by `alpha` about the third axis.
pub fn yaw_matrix(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Standard ZYX composition `Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn zyx_matrix(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let (sa, ca) = yaw.sin_cos();
    let (sb, cb) = pitch.sin_cos();
    let (sg, cg) = roll.sin_cos();
    Matrix3::new(
        ca * cb,
        ca * sb * sg - sa * cg,
        ca * sb * cg + sa * sg,
        sa * cb,
        sa * sb * sg + ca * cg,
        sa * sb * cg - ca * sg,
        -sb,
        cb * sg,
        cb * cg,
    )
}

/// Permutation taking cue axes (right, down, into-board) to heading axes
/// (forward, right, down).
fn cue_to_heading() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}

/// Camera attitude (camera axes as columns, in cue coordinates) for a level
/// camera turned by `heading` about the vertical axis.
pub fn heading_attitude(heading: f64) -> Matrix3<f64> {
    let q = cue_to_heading();
    q.transpose() * yaw_matrix(heading) * q
}

/// Relative heading of the camera with respect to the board normal, taken as
/// the yaw of the camera attitude expressed in the heading frame. Roll and
/// pitch residuals are discarded.
pub fn relative_heading(pose: &Pose) -> f64 {
    let q = cue_to_heading();
    yaw_from_rotation(&(q * pose.rotation.transpose() * q.transpose()))
}

/// The pose with its rotation replaced by the pure-heading rotation of the
/// same relative heading, as for a gimbal-leveled camera. Tilt estimates from
/// a small planar target are poorly conditioned; discarding them keeps their
/// error out of the recovered camera position.
pub fn leveled_pose(pose: &Pose) -> Pose {
    Pose { rotation: heading_attitude(relative_heading(pose)).transpose(), translation: pose.translation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn k931() -> CameraIntrinsics {
        CameraIntrinsics::new(931.0, 931.0, 640.0, 360.0, 1280, 720).unwrap()
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        rodrigues_to_matrix(&(axis.normalize() * rng.random_range(0.0..PI)))
    }

    #[test]
    fn default_intrinsics_match_hd_fov() {
        let k = CameraIntrinsics::hd720();
        assert!((k.fx - 931.2).abs() < 0.5, "fx = {}", k.fx);
        assert_eq!((k.u0, k.v0), (640.0, 360.0));
    }

    #[test]
    fn intrinsics_reject_bad_values() {
        assert!(CameraIntrinsics::new(-1.0, 931.0, 640.0, 360.0, 1280, 720).is_err());
        assert!(CameraIntrinsics::new(931.0, 931.0, 1300.0, 360.0, 1280, 720).is_err());
        assert!(CameraIntrinsics::new(931.0, 931.0, 640.0, 0.0, 1280, 720).is_err());
    }

    #[test]
    fn default_cue_layout() {
        let cue = CueModel::default();
        assert_eq!(cue.count(), 9);
        assert_eq!(cue.corner_points[0], Vector3::new(-0.12, -0.12, 0.0));
        assert_eq!(cue.corner_points[4], Vector3::zeros());
        assert_eq!(cue.corner_points[8], Vector3::new(0.12, 0.12, 0.0));
        for r in 0..3 {
            for c in 0..2 {
                let a = cue.corner_points[r * 3 + c];
                let b = cue.corner_points[r * 3 + c + 1];
                assert!(((b - a).norm() - 0.12).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let pose = Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 2.0)).unwrap();
        let px = project_point(&k931(), &pose, &Vector3::zeros()).unwrap();
        assert_eq!(px, PixelPoint::new(640.0, 360.0));
    }

    #[test]
    fn similar_triangles_offset() {
        let pose = Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 2.0)).unwrap();
        let px = project_point(&k931(), &pose, &Vector3::new(0.12, 0.0, 0.0)).unwrap();
        assert!((px.u - 695.86).abs() < 1e-9);
        assert_eq!(px.v, 360.0);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let pose = Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, -1.0)).unwrap();
        let err = project_point(&k931(), &pose, &Vector3::zeros()).unwrap_err();
        assert!(matches!(err, GeometryError::BehindCamera { .. }));
        let pose = Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 1e-7)).unwrap();
        assert!(project_point(&k931(), &pose, &Vector3::zeros()).is_err());
    }

    #[test]
    fn projection_matches_homogeneous_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = k931();
        let mut checked = 0;
        while checked < 500 {
            let rot = random_rotation(&mut rng);
            let t = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..6.0));
            let pose = Pose::new(rot, t).unwrap();
            let p = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if pose.transform(&p).z <= 0.5 {
                continue;
            }
            // s·[u, v, 1] = A [R|t] [X Y Z 1], with A built from its two factors
            let scale = Matrix3::new(1.0, 0.0, k.u0, 0.0, 1.0, k.v0, 0.0, 0.0, 1.0);
            let focal = nalgebra::Matrix3x4::new(k.fx, 0.0, 0.0, 0.0, 0.0, k.fy, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
            let mut ext = nalgebra::Matrix4::identity();
            ext.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
            ext.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
            let h = scale * focal * ext * Vector4::new(p.x, p.y, p.z, 1.0);
            let px = project_point(&k, &pose, &p).unwrap();
            assert!((px.u - h.x / h.z).abs() < 1e-9);
            assert!((px.v - h.y / h.z).abs() < 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn homogeneous_scale_invariance() {
        let k = k931();
        let pose = Pose::from_camera_state(Vector3::new(0.3, -0.2, -4.0), 0.2);
        let p = Vector3::new(0.1, -0.05, 0.0);
        let base = project_point(&k, &pose, &p).unwrap();
        for s in [0.01, 0.5, 3.0, 1e4] {
            let h = project_homogeneous(&k, &pose, &Vector4::new(s * p.x, s * p.y, s * p.z, s));
            assert!((h.x / h.z - base.u).abs() < 1e-9);
            assert!((h.y / h.z - base.v).abs() < 1e-9);
        }
    }

    #[test]
    fn rodrigues_basics() {
        assert_eq!(rodrigues_to_matrix(&Vector3::zeros()), Matrix3::identity());
        let r = rodrigues_to_matrix(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let y = r * Vector3::x();
        assert!((y - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn rodrigues_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize();
            let r = axis * rng.random_range(1e-6..3.0);
            let back = matrix_to_rodrigues(&rodrigues_to_matrix(&r)).unwrap();
            assert!((back - r).norm() < 1e-9, "{r:?} -> {back:?}");
        }
    }

    #[test]
    fn rodrigues_near_half_turn() {
        for angle in [PI - 1e-7, PI - 1e-4, PI] {
            let r = Vector3::new(1.0, 2.0, -0.5).normalize() * angle;
            let back = matrix_to_rodrigues(&rodrigues_to_matrix(&r)).unwrap();
            let same = (back - r).norm() < 1e-6;
            // at exactly π both ±axis describe the same rotation
            let flipped = angle == PI && (back + r).norm() < 1e-6;
            assert!(same || flipped, "{r:?} -> {back:?}");
        }
    }

    #[test]
    fn rodrigues_rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matrix_to_rodrigues(&m).is_err());
        assert!(matrix_to_rodrigues(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))).is_err());
        assert!(Pose::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn camera_position_examples() {
        let pose = Pose::new(Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(camera_position_in_cue(&pose), Vector3::new(-1.0, -2.0, -3.0));
        let half_turn_y = rodrigues_to_matrix(&Vector3::new(0.0, PI, 0.0));
        let pose = Pose::new(half_turn_y, Vector3::new(0.0, 0.0, 5.0)).unwrap();
        assert!((camera_position_in_cue(&pose) - Vector3::new(0.0, 0.0, 5.0)).norm() < 1e-12);
    }

    #[test]
    fn camera_position_matches_linear_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let rot = random_rotation(&mut rng);
            let t = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let pose = Pose::new(rot, t).unwrap();
            let oracle = rot.lu().solve(&(-t)).unwrap();
            assert!((camera_position_in_cue(&pose) - oracle).norm() < 1e-12);
        }
    }

    #[test]
    fn camera_state_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-17.0..-0.5));
            let heading = rng.random_range(-1.0..1.0);
            let pose = Pose::from_camera_state(p, heading);
            assert!(Pose::new(pose.rotation, pose.translation).is_ok());
            assert!((camera_position_in_cue(&pose) - p).norm() < 1e-12);
            assert!((relative_heading(&pose) - heading).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_distance_is_independent_of_heading() {
        let p = Vector3::new(0.4, -0.3, -6.0);
        for deg in [-30.0_f64, -10.0, 0.0, 15.0, 40.0] {
            let pose = Pose::from_camera_state(p, deg.to_radians());
            assert!((camera_position_in_cue(&pose).z - p.z).abs() < 1e-12);
        }
    }

    #[test]
    fn yaw_extraction() {
        assert_eq!(yaw_from_rotation(&Matrix3::identity()), 0.0);
        let a = 30f64.to_radians();
        assert!((yaw_from_rotation(&yaw_matrix(a)) - a).abs() < 1e-12);
        let m = yaw_matrix(a);
        assert_eq!(m.row(2).into_owned(), nalgebra::RowVector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn yaw_under_small_tilt_perturbations() {
        let yaw = 10f64.to_radians();
        let tilt = 0.5f64.to_radians();
        for (p, r) in [(tilt, tilt), (-tilt, tilt), (tilt, -tilt), (-tilt, -tilt), (tilt, 0.0), (0.0, -tilt)] {
            let rx = rodrigues_to_matrix(&Vector3::new(r, 0.0, 0.0));
            let ry = rodrigues_to_matrix(&Vector3::new(0.0, p, 0.0));
            for m in [yaw_matrix(yaw) * ry * rx, rx * ry * yaw_matrix(yaw), ry * yaw_matrix(yaw) * rx] {
                let err = (yaw_from_rotation(&m) - yaw).abs().to_degrees();
                assert!(err < 0.6, "err {err}");
            }
        }
    }

    #[test]
    fn zyx_matrix_is_orthonormal() {
        let m = zyx_matrix(0.3, -0.2, 0.9);
        assert!(Pose::new(m, Vector3::zeros()).is_ok());
        assert!((yaw_from_rotation(&m) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn heading_sign_convention() {
        // nose turned right: the board center appears left of the image center
        let k = CameraIntrinsics::hd720();
        let pose = Pose::from_camera_state(Vector3::new(0.0, 0.0, -5.0), 10f64.to_radians());
        let px = project_point(&k, &pose, &Vector3::zeros()).unwrap();
        assert!(px.u < k.u0);
        // camera moved to its right: the board appears to the left
        let pose = Pose::from_camera_state(Vector3::new(0.5, 0.0, -5.0), 0.0);
        let px = project_point(&k, &pose, &Vector3::zeros()).unwrap();
        assert!(px.u < k.u0);
    }
}
