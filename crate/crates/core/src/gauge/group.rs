//! SU(2) and SO(3) with their common Lie algebra R^3.
//!
//! Algebra elements are coefficient vectors in an orthonormal basis for the
//! trace inner product: T_a = -i sigma_a / 2 with <X,Y> = -2 tr(XY) for
//! SU(2), and (L_a)_{bc} = -eps_{abc} with <X,Y> = -tr(XY)/2 for SO(3). In
//! both cases the bracket is the cross product and Ad is a rotation.
//!
//! SU(2) elements are unit quaternions (w, x, y, z) corresponding to the
//! matrix w I - i (x sigma_1 + y sigma_2 + z sigma_3).

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::Mul;
use thiserror::Error;

pub type Algebra = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("logarithm undefined: rotation angle {angle} at the cut locus")]
    LogBranch { angle: f64 },
    #[error("unknown group '{0}'")]
    Unknown(String),
    #[error("matrix data has length {got}, expected {expected}")]
    Shape { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    SU2,
    SO3,
}

impl Group {
    pub fn parse(s: &str) -> Result<Self, GroupError> {
        match s.to_ascii_lowercase().as_str() {
            "su2" | "su(2)" => Ok(Group::SU2),
            "so3" | "so(3)" => Ok(Group::SO3),
            _ => Err(GroupError::Unknown(s.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::SU2 => "SU(2)",
            Group::SO3 => "SO(3)",
        }
    }

    /// Identifier used in binary files.
    pub fn id(self) -> u64 {
        match self {
            Group::SU2 => 1,
            Group::SO3 => 2,
        }
    }

    pub fn from_id(id: u64) -> Option<Self> {
        match id {
            1 => Some(Group::SU2),
            2 => Some(Group::SO3),
            _ => None,
        }
    }

    pub fn identity(self) -> GroupElement {
        match self {
            Group::SU2 => GroupElement::Su2([1.0, 0.0, 0.0, 0.0]),
            Group::SO3 => GroupElement::So3(Matrix3::identity()),
        }
    }

    pub fn exp(self, x: &Algebra) -> GroupElement {
        let theta = x.norm();
        match self {
            Group::SU2 => {
                let half = 0.5 * theta;
                // sin(theta/2)/theta, stable near zero.
                let s = if theta < 1e-4 { 0.5 - theta * theta / 48.0 } else { half.sin() / theta };
                GroupElement::Su2([half.cos(), s * x[0], s * x[1], s * x[2]])
            }
            Group::SO3 => {
                let k = hat(x);
                let (a, b) = if theta < 1e-4 {
                    let t2 = theta * theta;
                    (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
                } else {
                    (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
                };
                GroupElement::So3(Matrix3::identity() + k * a + k * k * b)
            }
        }
    }

    /// Random element: exp of a vector with uniformly random direction and
    /// norm uniform in [0, amplitude).
    pub fn random<R: Rng + ?Sized>(self, rng: &mut R, amplitude: f64) -> GroupElement {
        self.exp(&random_algebra(rng, amplitude))
    }

    /// Element from stored matrix entries (SU(2): 2x2 complex row-major as
    /// (re, im) pairs; SO(3): 3x3 row-major).
    pub fn from_matrix_data(self, data: &[f64]) -> Result<GroupElement, GroupError> {
        match self {
            Group::SU2 => {
                if data.len() != 8 {
                    return Err(GroupError::Shape { got: data.len(), expected: 8 });
                }
                // [[w - iz, -y - ix], [y - ix, w + iz]]
                Ok(GroupElement::Su2([data[0], -data[3], data[4], -data[1]]))
            }
            Group::SO3 => {
                if data.len() != 9 {
                    return Err(GroupError::Shape { got: data.len(), expected: 9 });
                }
                Ok(GroupElement::So3(Matrix3::from_row_slice(data)))
            }
        }
    }

    /// Number of f64 entries in the stored matrix form.
    pub fn matrix_len(self) -> usize {
        match self {
            Group::SU2 => 8,
            Group::SO3 => 9,
        }
    }
}

/// Random algebra vector with uniform direction and norm in [0, amplitude).
pub fn random_algebra<R: Rng + ?Sized>(rng: &mut R, amplitude: f64) -> Algebra {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n * (amplitude * rng.gen::<f64>());
        }
    }
}

fn hat(x: &Algebra) -> Matrix3<f64> {
    Matrix3::new(0.0, -x[2], x[1], x[2], 0.0, -x[0], -x[1], x[0], 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupElement {
    Su2([f64; 4]),
    So3(Matrix3<f64>),
}

impl GroupElement {
    pub fn group(&self) -> Group {
        match self {
            GroupElement::Su2(_) => Group::SU2,
            GroupElement::So3(_) => Group::SO3,
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            GroupElement::Su2(q) => GroupElement::Su2([q[0], -q[1], -q[2], -q[3]]),
            GroupElement::So3(m) => GroupElement::So3(m.transpose()),
        }
    }

    /// Logarithm with norm below the cut locus (2 pi for SU(2), pi for SO(3)).
    pub fn log(&self) -> Result<Algebra, GroupError> {
        match self {
            GroupElement::Su2(q) => {
                let v = Vector3::new(q[1], q[2], q[3]);
                let s = v.norm();
                let theta = 2.0 * s.atan2(q[0]);
                if theta >= 2.0 * std::f64::consts::PI - 1e-6 {
                    return Err(GroupError::LogBranch { angle: theta });
                }
                if s < 1e-300 {
                    return Ok(Vector3::zeros());
                }
                let f = if s < 1e-4 {
                    // theta / s with theta = 2 atan(s / w).
                    let w = q[0];
                    2.0 / w * (1.0 - s * s / (3.0 * w * w))
                } else {
                    theta / s
                };
                Ok(v * f)
            }
            GroupElement::So3(m) => {
                let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
                let theta = c.acos();
                let vee = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
                if theta > std::f64::consts::PI - 1e-7 {
                    return Err(GroupError::LogBranch { angle: theta });
                }
                if theta < std::f64::consts::FRAC_PI_2 {
                    let f = if theta < 1e-4 { 0.5 + theta * theta / 12.0 } else { 0.5 * theta / theta.sin() };
                    return Ok(vee * f);
                }
                // Axis from the symmetric part, sign from the antisymmetric part.
                let b = (m + m.transpose()) * 0.5 - Matrix3::identity() * c;
                let diag = [b[(0, 0)], b[(1, 1)], b[(2, 2)]];
                let k = (0..3).max_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap()).unwrap();
                let mut axis = b.column(k).into_owned();
                axis /= axis.norm();
                if axis.dot(&vee) < 0.0 {
                    axis = -axis;
                }
                Ok(axis * theta)
            }
        }
    }

    /// Adjoint action Ad_g X = g X g^{-1} on algebra coefficients.
    pub fn adjoint(&self, x: &Algebra) -> Algebra {
        self.rotation() * x
    }

    /// Rotation matrix of the adjoint action.
    pub fn rotation(&self) -> Matrix3<f64> {
        match self {
            GroupElement::So3(m) => *m,
            GroupElement::Su2(q) => {
                let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
                Matrix3::new(
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - w * z),
                    2.0 * (x * z + w * y),
                    2.0 * (x * y + w * z),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - w * x),
                    2.0 * (x * z - w * y),
                    2.0 * (y * z + w * x),
                    1.0 - 2.0 * (x * x + y * y),
                )
            }
        }
    }

    /// Real part of the trace divided by the matrix size.
    pub fn re_tr(&self) -> f64 {
        match self {
            GroupElement::Su2(q) => q[0],
            GroupElement::So3(m) => m.trace() / 3.0,
        }
    }

    /// Matrix entries in the stored form (see [`Group::from_matrix_data`]).
    pub fn matrix_data(&self) -> Vec<f64> {
        match self {
            GroupElement::Su2(q) => {
                let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
                vec![w, -z, -y, -x, y, -x, w, z]
            }
            GroupElement::So3(m) => (0..9).map(|k| m[(k / 3, k % 3)]).collect(),
        }
    }

    /// Distance from the group: |q| - 1 or ||R^T R - I||.
    pub fn unitarity_defect(&self) -> f64 {
        match self {
            GroupElement::Su2(q) => (q.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs(),
            GroupElement::So3(m) => (m.transpose() * m - Matrix3::identity()).abs().max(),
        }
    }

    /// Frobenius distance of the stored matrix from the identity.
    pub fn distance_from_identity(&self) -> f64 {
        let id = self.group().identity().matrix_data();
        self.matrix_data().iter().zip(&id).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Re-project onto the group to remove accumulated round-off.
    pub fn normalized(&self) -> Self {
        match self {
            GroupElement::Su2(q) => {
                let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                GroupElement::Su2([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
            }
            GroupElement::So3(m) => GroupElement::So3(polar_rotation(m)),
        }
    }

    /// g^t = exp(t log g).
    pub fn powf(&self, t: f64) -> Result<Self, GroupError> {
        Ok(self.group().exp(&(self.log()? * t)))
    }
}

/// Nearest rotation to a 3x3 matrix (polar factor with det +1).
pub fn polar_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * vt;
    }
    r
}

fn qmul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: GroupElement) -> GroupElement {
        &self * &rhs
    }
}

impl Mul<&GroupElement> for &GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        match (self, rhs) {
            (GroupElement::Su2(a), GroupElement::Su2(b)) => GroupElement::Su2(qmul(a, b)),
            (GroupElement::So3(a), GroupElement::So3(b)) => GroupElement::So3(a * b),
            _ => panic!("product of elements from different groups"),
        }
    }
}
