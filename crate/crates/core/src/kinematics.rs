//! Pose algebra and Denavit–Hartenberg forward kinematics.
//!
//! Angles are radians and lengths millimetres throughout. Degrees only appear
//! at the config and CLI boundary.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix4};
use thiserror::Error;

use crate::Vec3;

/// Tolerance used when validating rotation matrices.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("rotation matrix is not orthonormal: {0}")]
    NotOrthonormal(String),
    #[error("invalid DH row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("invalid robot model field `{field}`: {reason}")]
    InvalidModel { field: String, reason: String },
}

/// 3×3 rotation whose columns are the unit vectors n, o, a of a mobile frame
/// expressed in the fixed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        RotationMatrix(Matrix3::identity())
    }

    /// Validates unit columns, mutual orthogonality and det = +1 within
    /// [`ORTHONORMAL_TOL`]. Nothing is repaired; see [`Self::orthonormalized`].
    pub fn new(m: Matrix3<f64>) -> Result<Self, KinematicsError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(KinematicsError::NotOrthonormal("non-finite entry".into()));
        }
        for i in 0..3 {
            let n = m.column(i).norm();
            if (n - 1.0).abs() > ORTHONORMAL_TOL {
                return Err(KinematicsError::NotOrthonormal(format!(
                    "column {i} has norm {n}"
                )));
            }
            for j in (i + 1)..3 {
                let d = m.column(i).dot(&m.column(j));
                if d.abs() > ORTHONORMAL_TOL {
                    return Err(KinematicsError::NotOrthonormal(format!(
                        "columns {i} and {j} have dot product {d}"
                    )));
                }
            }
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(KinematicsError::NotOrthonormal(format!("determinant {det}")));
        }
        Ok(RotationMatrix(m))
    }

    /// Builds from the three column vectors n, o, a.
    pub fn from_columns(n: Vec3, o: Vec3, a: Vec3) -> Result<Self, KinematicsError> {
        Self::new(Matrix3::from_columns(&[n, o, a]))
    }

    /// Nearest rotation (polar projection via SVD). Only runs when asked.
    pub fn orthonormalized(m: Matrix3<f64>) -> Result<Self, KinematicsError> {
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(KinematicsError::NotOrthonormal("SVD failed".into())),
        };
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Self::new(r)
    }

    /// Rotation about z by `theta`.
    pub fn about_z(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        RotationMatrix(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        RotationMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn n(&self) -> Vec3 {
        self.0.column(0).into_owned()
    }

    pub fn o(&self) -> Vec3 {
        self.0.column(1).into_owned()
    }

    pub fn a(&self) -> Vec3 {
        self.0.column(2).into_owned()
    }

    /// Coordinates of a mobile-frame vector in the fixed frame, `R · r`.
    pub fn rotate_to_fixed(&self, r_mobile: &Vec3) -> Vec3 {
        self.0 * r_mobile
    }
}

/// `R · r_mobile`; see [`RotationMatrix::rotate_to_fixed`].
pub fn rotate_to_fixed(rotation: &RotationMatrix, r_mobile: &Vec3) -> Vec3 {
    rotation.rotate_to_fixed(r_mobile)
}

/// Pose as a 4×4 homogeneous transform.
///
/// Only the rotation and position are stored. The perspective row is always
/// `(0, 0, 0)` and the scale always `1`, so [`Self::to_matrix`] emits an
/// exact `(0, 0, 0, 1)` bottom row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousTransform {
    pub rotation: RotationMatrix,
    pub position: Vec3,
}

impl HomogeneousTransform {
    pub fn identity() -> Self {
        HomogeneousTransform {
            rotation: RotationMatrix::identity(),
            position: Vec3::zeros(),
        }
    }

    pub fn new(rotation: RotationMatrix, position: Vec3) -> Self {
        HomogeneousTransform { rotation, position }
    }

    /// Parses a full 4×4 matrix, rejecting a non-null perspective row or a
    /// scale other than 1.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self, KinematicsError> {
        if m[(3, 0)] != 0.0 || m[(3, 1)] != 0.0 || m[(3, 2)] != 0.0 || m[(3, 3)] != 1.0 {
            return Err(KinematicsError::NotOrthonormal(
                "bottom row must be (0, 0, 0, 1)".into(),
            ));
        }
        let rotation = RotationMatrix::new(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        let position = m.fixed_view::<3, 1>(0, 3).into_owned();
        Ok(HomogeneousTransform { rotation, position })
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// `self · other`.
    pub fn compose(&self, other: &HomogeneousTransform) -> HomogeneousTransform {
        let r = self.rotation.matrix() * other.rotation.matrix();
        let p = self.rotation.matrix() * other.position + self.position;
        HomogeneousTransform {
            rotation: RotationMatrix::from_matrix_unchecked(r),
            position: p,
        }
    }

    /// Maps a point given in this frame into the reference frame.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.matrix() * p + self.position
    }
}

/// `a · b`; see [`HomogeneousTransform::compose`].
pub fn compose(a: &HomogeneousTransform, b: &HomogeneousTransform) -> HomogeneousTransform {
    a.compose(b)
}

/// One DH table row. The joint angle used in the link transform is
/// `q_k + theta_offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub theta_offset: f64,
    pub d: f64,
    pub a: f64,
    pub alpha: f64,
}

impl DhRow {
    pub fn new(theta_offset: f64, d: f64, a: f64, alpha: f64) -> Self {
        DhRow { theta_offset, d, a, alpha }
    }

    fn validate(&self, row: usize) -> Result<(), KinematicsError> {
        let vals = [self.theta_offset, self.d, self.a, self.alpha];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(KinematicsError::InvalidRow { row, reason: "non-finite parameter".into() });
        }
        if !(-PI..=PI).contains(&self.alpha) {
            return Err(KinematicsError::InvalidRow {
                row,
                reason: format!("alpha {} outside [-pi, pi]", self.alpha),
            });
        }
        Ok(())
    }
}

/// Link transform `^{k-1}T_k` for joint value `q_k`:
///
/// ```text
/// | cθ  -cα·sθ   sα·sθ   a·cθ |
/// | sθ   cα·cθ  -sα·cθ   a·sθ |
/// | 0    sα      cα      d    |
/// | 0    0       0       1    |
/// ```
///
/// with θ = q_k + θ_offset.
pub fn dh_link_transform(row: &DhRow, q_k: f64) -> HomogeneousTransform {
    let theta = q_k + row.theta_offset;
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    #[rustfmt::skip]
    let r = Matrix3::new(
        ct, -ca * st,  sa * st,
        st,  ca * ct, -sa * ct,
        0.0, sa,       ca,
    );
    HomogeneousTransform {
        rotation: RotationMatrix::from_matrix_unchecked(r),
        position: Vec3::new(row.a * ct, row.a * st, row.d),
    }
}

/// Six joint angles, split as shoulder/elbow `q13` and wrist `q46`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig {
    pub q: [f64; 6],
}

impl JointConfig {
    pub fn new(q: [f64; 6]) -> Self {
        JointConfig { q }
    }

    pub fn zeros() -> Self {
        JointConfig { q: [0.0; 6] }
    }

    pub fn from_parts(q13: [f64; 3], q46: [f64; 3]) -> Self {
        JointConfig { q: [q13[0], q13[1], q13[2], q46[0], q46[1], q46[2]] }
    }

    pub fn q13(&self) -> [f64; 3] {
        [self.q[0], self.q[1], self.q[2]]
    }

    pub fn q46(&self) -> [f64; 3] {
        [self.q[3], self.q[4], self.q[5]]
    }
}

/// Kinematic description of a 6R arm.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub rows: [DhRow; 6],
    /// L1…L5 in millimetres.
    pub link_lengths: [f64; 5],
    pub joint_limits: [(f64, f64); 6],
    /// mm/s
    pub max_tool_speed: f64,
    /// mm/s²
    pub max_tool_accel: f64,
}

pub const DEFAULT_JOINT_LIMITS: [(f64, f64); 6] = [(-PI, PI); 6];

impl RobotModel {
    /// Builds and validates a model from explicit rows.
    pub fn new(
        name: impl Into<String>,
        rows: [DhRow; 6],
        link_lengths: [f64; 5],
        joint_limits: [(f64, f64); 6],
        max_tool_speed: f64,
        max_tool_accel: f64,
    ) -> Result<Self, KinematicsError> {
        let model = RobotModel {
            name: name.into(),
            rows,
            link_lengths,
            joint_limits,
            max_tool_speed,
            max_tool_accel,
        };
        model.validate()?;
        Ok(model)
    }

    /// The IRB120-style table: rows
    /// `(q1, L1, 0, -π/2)`, `(q2 - π/2, 0, L2, 0)`, `(q3, 0, L3, -π/2)`,
    /// `(q4, L4, 0, π/2)`, `(q5, 0, 0, -π/2)`, `(q6 + π, L5, 0, 0)`.
    pub fn six_r(name: impl Into<String>, l: [f64; 5]) -> Result<Self, KinematicsError> {
        Self::new(
            name,
            Self::six_r_rows(l),
            l,
            DEFAULT_JOINT_LIMITS,
            1000.0,
            5000.0,
        )
    }

    pub fn six_r_rows(l: [f64; 5]) -> [DhRow; 6] {
        [
            DhRow::new(0.0, l[0], 0.0, -FRAC_PI_2),
            DhRow::new(-FRAC_PI_2, 0.0, l[1], 0.0),
            DhRow::new(0.0, 0.0, l[2], -FRAC_PI_2),
            DhRow::new(0.0, l[3], 0.0, FRAC_PI_2),
            DhRow::new(0.0, 0.0, 0.0, -FRAC_PI_2),
            DhRow::new(PI, l[4], 0.0, 0.0),
        ]
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (i, row) in self.rows.iter().enumerate() {
            row.validate(i + 1)?;
        }
        for (i, l) in self.link_lengths.iter().enumerate() {
            if !l.is_finite() || *l < 0.0 {
                return Err(KinematicsError::InvalidModel {
                    field: format!("L{}", i + 1),
                    reason: format!("length must be finite and non-negative, got {l}"),
                });
            }
        }
        for (i, (lo, hi)) in self.joint_limits.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(KinematicsError::InvalidModel {
                    field: format!("joint_limits[{}]", i + 1),
                    reason: format!("need min < max, got ({lo}, {hi})"),
                });
            }
        }
        if !(self.max_tool_speed > 0.0 && self.max_tool_speed.is_finite()) {
            return Err(KinematicsError::InvalidModel {
                field: "max_tool_speed".into(),
                reason: "must be positive".into(),
            });
        }
        if !(self.max_tool_accel > 0.0 && self.max_tool_accel.is_finite()) {
            return Err(KinematicsError::InvalidModel {
                field: "max_tool_accel".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// Upper bound on the distance from the base origin to the tool point.
    pub fn reach(&self) -> f64 {
        self.rows.iter().map(|r| r.d.abs() + r.a.abs()).sum()
    }

    /// Squared excursion outside the joint limits, summed over joints.
    pub fn limit_violation(&self, q: &JointConfig) -> f64 {
        q.q.iter()
            .zip(self.joint_limits.iter())
            .map(|(v, (lo, hi))| {
                if v < lo {
                    (lo - v).powi(2)
                } else if v > hi {
                    (v - hi).powi(2)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        self.limit_violation(q) == 0.0
    }
}

/// `^0T_6 = ^0T_1 · ^1T_2 · … · ^5T_6`. Joint limits are not checked here.
pub fn forward_kinematics(model: &RobotModel, q: &JointConfig) -> HomogeneousTransform {
    model
        .rows
        .iter()
        .zip(q.q.iter())
        .fold(HomogeneousTransform::identity(), |acc, (row, qk)| {
            acc.compose(&dh_link_transform(row, *qk))
        })
}

/// Tool point: column 4 of the forward kinematics.
pub fn tool_position(model: &RobotModel, q: &JointConfig) -> Vec3 {
    forward_kinematics(model, q).position
}
