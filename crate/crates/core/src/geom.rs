//! Rotations, frame bases, vectorization, and rotation-error metrics.
//!
//! The alignment unknown is the rotation taking vectors from the local world
//! frame (`w`) into the ECEF frame (`e`). This module provides a validated
//! rotation type, the column-stacking vectorization that turns the Doppler
//! projection into a linear form, local ENU bases for heading extraction, and
//! the angular error metrics used by the benchmark harness.
//!
//! Conventions fixed here and relied on repo-wide:
//! - `vectorize` stacks columns: `vec(R) = (R11, R21, R31, R12, ..., R33)`.
//! - `kron3(v, n)` is the Kronecker product with `v` varying slowest, so that
//!   `kron3(v, n) . vec(R) = n' R v` holds exactly.

use nalgebra::{Matrix3, Rotation3, SVector, Unit, Vector3};
use thiserror::Error;

use crate::float::{cst, to_f64, Float};

/// Orthonormality and determinant tolerance for a valid rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Body-frame forward axis (right-forward-up convention).
fn forward_axis<T: Float>() -> Vector3<T> {
    Vector3::new(T::zero(), T::one(), T::zero())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("matrix is not a rotation (orthogonality/determinant defect {defect:.3e})")]
    NotARotation { defect: f64 },
    #[error("matrix is numerically singular (smallest singular value {sigma_min:.3e})")]
    NearSingular { sigma_min: f64 },
    #[error("rotated forward axis is within 1e-9 of the local vertical; yaw undefined")]
    VerticalForward,
    #[error("basis vectors are not orthonormal or not right-handed")]
    NonOrthonormalBasis,
    #[error("ENU basis undefined at this position (origin or pole)")]
    DegenerateEnu,
}

/// Element of SO(3): the alignment unknown mapping w-frame vectors into ECEF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix<T: Float = f64>(Matrix3<T>);

impl<T: Float> RotationMatrix<T> {
    pub fn identity() -> Self {
        RotationMatrix(Matrix3::identity())
    }

    /// Validates orthonormality (`R'R = I` within 1e-9 Frobenius) and
    /// `det R = 1` within 1e-9 before wrapping.
    pub fn from_matrix(m: Matrix3<T>) -> Result<Self, GeomError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = (m.determinant() - T::one()).abs();
        let defect = if ortho > det { ortho } else { det };
        if defect > cst(ROTATION_TOL) {
            return Err(GeomError::NotARotation {
                defect: to_f64(defect),
            });
        }
        Ok(RotationMatrix(m))
    }

    /// Wraps without validation; caller asserts the invariants hold.
    pub fn from_matrix_unchecked(m: Matrix3<T>) -> Self {
        RotationMatrix(m)
    }

    /// Rodrigues exponential of a scaled-axis vector.
    pub fn from_scaled_axis(axis_angle: Vector3<T>) -> Self {
        RotationMatrix(Rotation3::new(axis_angle).into_inner())
    }

    pub fn from_axis_angle(axis: &Vector3<T>, angle: T) -> Self {
        let axis = Unit::new_normalize(*axis);
        RotationMatrix(Rotation3::from_axis_angle(&axis, angle).into_inner())
    }

    pub fn about_x(angle: T) -> Self {
        Self::from_axis_angle(&Vector3::x(), angle)
    }

    pub fn about_y(angle: T) -> Self {
        Self::from_axis_angle(&Vector3::y(), angle)
    }

    pub fn about_z(angle: T) -> Self {
        Self::from_axis_angle(&Vector3::z(), angle)
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    /// Applies the rotation to a vector; preserves the Euclidean norm.
    pub fn rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        self.0 * v
    }

    /// Column-stacked 9-vector of the rotation.
    pub fn to_vec9(&self) -> SVector<T, 9> {
        vectorize(&self.0)
    }

    /// Frobenius defect of the SO(3) invariants, for diagnostics.
    pub fn so3_defect(&self) -> T {
        let ortho = (self.0.transpose() * self.0 - Matrix3::identity()).norm();
        let det = (self.0.determinant() - T::one()).abs();
        if ortho > det {
            ortho
        } else {
            det
        }
    }
}

impl<T: Float> core::ops::Mul for RotationMatrix<T> {
    type Output = RotationMatrix<T>;
    fn mul(self, rhs: RotationMatrix<T>) -> RotationMatrix<T> {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl<T: Float> core::ops::Mul<Vector3<T>> for RotationMatrix<T> {
    type Output = Vector3<T>;
    fn mul(self, rhs: Vector3<T>) -> Vector3<T> {
        self.0 * rhs
    }
}

/// Homogeneous QCQP variable `x = [vec(R); y]`.
///
/// When feasible, `y` is plus or minus one and `unvectorize(r)/y` lies in
/// SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousVector<T: Float = f64> {
    data: SVector<T, 10>,
}

impl<T: Float> HomogeneousVector<T> {
    pub fn from_parts(rot9: SVector<T, 9>, y: T) -> Self {
        let mut data = SVector::<T, 10>::zeros();
        data.fixed_rows_mut::<9>(0).copy_from(&rot9);
        data[9] = y;
        HomogeneousVector { data }
    }

    pub fn from_rotation(r: &RotationMatrix<T>) -> Self {
        Self::from_parts(r.to_vec9(), T::one())
    }

    pub fn from_vector(data: SVector<T, 10>) -> Self {
        HomogeneousVector { data }
    }

    pub fn rotation_part(&self) -> SVector<T, 9> {
        self.data.fixed_rows::<9>(0).into_owned()
    }

    pub fn y(&self) -> T {
        self.data[9]
    }

    pub fn as_vector(&self) -> &SVector<T, 10> {
        &self.data
    }
}

/// Column-stacking vectorization of a 3x3 matrix.
pub fn vectorize<T: Float>(m: &Matrix3<T>) -> SVector<T, 9> {
    SVector::<T, 9>::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`]; `unvectorize(vectorize(M)) == M`.
pub fn unvectorize<T: Float>(v: &SVector<T, 9>) -> Matrix3<T> {
    Matrix3::from_column_slice(v.as_slice())
}

/// Kronecker product of two 3-vectors, `a` varying slowest:
/// `kron3(a, b)[3i + j] = a[i] * b[j]`.
pub fn kron3<T: Float>(a: &Vector3<T>, b: &Vector3<T>) -> SVector<T, 9> {
    let mut out = SVector::<T, 9>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = a[i] * b[j];
        }
    }
    out
}

/// Geodesic distance on SO(3) in degrees, `arccos((tr(R1'R2) - 1)/2)`.
///
/// The cosine is clamped to `[-1, 1]` to absorb round-off; the angle itself
/// is evaluated in `atan2` form (sine from the skew part of the relative
/// rotation) so that tiny and near-180-degree angles keep full precision.
pub fn geodesic_angle_deg<T: Float>(r1: &RotationMatrix<T>, r2: &RotationMatrix<T>) -> T {
    let d = r1.matrix().transpose() * r2.matrix();
    let mut c = (d.trace() - T::one()) / cst(2.0);
    if c > T::one() {
        c = T::one();
    }
    if c < -T::one() {
        c = -T::one();
    }
    // D - D' = 2 sin(theta) [axis]x and |[u]x|_F = sqrt(2)
    let s = ((d - d.transpose()).norm() / cst::<T>(8.0).sqrt()).min(T::one());
    s.atan2(c) * cst(180.0) / T::pi()
}

/// Local east-north-up basis expressed in ECEF coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnuBasis<T: Float = f64> {
    pub east: Vector3<T>,
    pub north: Vector3<T>,
    pub up: Vector3<T>,
}

impl<T: Float> EnuBasis<T> {
    /// Basis at an ECEF position using the spherical (geocentric) normal.
    pub fn from_ecef(p: &Vector3<T>) -> Result<Self, GeomError> {
        let norm = p.norm();
        if norm < T::one() {
            return Err(GeomError::DegenerateEnu);
        }
        let up = p / norm;
        let east_raw = Vector3::new(T::zero(), T::zero(), T::one()).cross(&up);
        let east_norm = east_raw.norm();
        if east_norm < cst(1e-9) {
            return Err(GeomError::DegenerateEnu);
        }
        let east = east_raw / east_norm;
        let north = up.cross(&east);
        Ok(EnuBasis { east, north, up })
    }

    /// Basis from explicit axes; checks orthonormality and right-handedness.
    pub fn from_axes(
        east: Vector3<T>,
        north: Vector3<T>,
        up: Vector3<T>,
    ) -> Result<Self, GeomError> {
        let tol: T = cst(1e-9);
        let unit = (east.norm() - T::one()).abs() < tol
            && (north.norm() - T::one()).abs() < tol
            && (up.norm() - T::one()).abs() < tol;
        let ortho = east.dot(&north).abs() < tol
            && east.dot(&up).abs() < tol
            && north.dot(&up).abs() < tol;
        let handed = (east.cross(&north) - up).norm() < tol;
        if !(unit && ortho && handed) {
            return Err(GeomError::NonOrthonormalBasis);
        }
        Ok(EnuBasis { east, north, up })
    }
}

/// Heading of the rotated body-forward axis in the local horizontal plane,
/// degrees in `(-180, 180]`, positive counterclockwise about `up`.
pub fn yaw_of_deg<T: Float>(r: &RotationMatrix<T>, basis: &EnuBasis<T>) -> Result<T, GeomError> {
    let f = r.rotate(&forward_axis());
    let e = f.dot(&basis.east);
    let n = f.dot(&basis.north);
    if (e * e + n * n).sqrt() < cst(1e-9) {
        return Err(GeomError::VerticalForward);
    }
    Ok((-e).atan2(n) * cst(180.0) / T::pi())
}

/// Wraps an angle difference in degrees into `(-180, 180]`.
pub fn wrap_angle_deg<T: Float>(angle: T) -> T {
    let full: T = cst(360.0);
    let half: T = cst(180.0);
    let mut a = angle % full;
    if a > half {
        a -= full;
    }
    if a <= -half {
        a += full;
    }
    a
}

/// Nearest rotation in Frobenius norm: orthogonal polar factor with
/// determinant correction.
pub fn project_to_so3<T: Float>(m: &Matrix3<T>) -> Result<RotationMatrix<T>, GeomError> {
    let svd = m.svd(true, true);
    let u = svd.u.ok_or(GeomError::NearSingular { sigma_min: 0.0 })?;
    let v_t = svd.v_t.ok_or(GeomError::NearSingular { sigma_min: 0.0 })?;
    let mut sigma_min = svd.singular_values[0];
    let mut argmin = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < sigma_min {
            sigma_min = *s;
            argmin = i;
        }
    }
    if sigma_min <= cst(1e-12) {
        return Err(GeomError::NearSingular {
            sigma_min: to_f64(sigma_min),
        });
    }
    let mut u = u;
    if (u * v_t).determinant() < T::zero() {
        // flip the singular pair with the smallest singular value
        for row in 0..3 {
            u[(row, argmin)] = -u[(row, argmin)];
        }
    }
    Ok(RotationMatrix(u * v_t))
}
