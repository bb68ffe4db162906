//! Forward and inverse kinematics of the three-joint leg.
//!
//! Frame: origin at the abduction joint, x forward, y lateral (left
//! positive), z up. The abduction joint rotates about x, hip and knee pitch
//! about y, and the knee angle is measured relative to the thigh. With all
//! joints at zero the leg hangs straight down, offset laterally by the hip
//! link.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegGeometry {
    pub hip_len: f64,
    pub thigh_len: f64,
    pub shank_len: f64,
    pub side: Side,
}

impl LegGeometry {
    pub fn new(side: Side) -> Self {
        Self {
            hip_len: 0.1,
            thigh_len: 0.2,
            shank_len: 0.2,
            side,
        }
    }

    /// Signed lateral offset of the foot plane.
    pub fn lateral(&self) -> f64 {
        self.hip_len * self.side.sign()
    }

    /// Reachable planar distance range after abduction removal.
    pub fn planar_reach(&self) -> (f64, f64) {
        (
            (self.thigh_len - self.shank_len).abs(),
            self.thigh_len + self.shank_len,
        )
    }
}

/// Legs in the fixed order LF, RF, LH, RH.
pub fn leg_geometries() -> [LegGeometry; 4] {
    [
        LegGeometry::new(Side::Left),
        LegGeometry::new(Side::Right),
        LegGeometry::new(Side::Left),
        LegGeometry::new(Side::Right),
    ]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("foot target outside the leg workspace by {shortfall:.6} m")]
    OutOfWorkspace { shortfall: f64 },
    #[error("non-finite foot target")]
    NonFinite,
}

/// Per-joint angle limits for [abd, hip, knee].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimits {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            lower: [-0.8, -1.0, -2.7],
            upper: [0.8, 3.0, 0.0],
        }
    }
}

impl JointLimits {
    pub fn clamp(&self, joint: usize, angle: f64) -> f64 {
        angle.clamp(self.lower[joint % 3], self.upper[joint % 3])
    }

    /// Clamps a full 12-joint vector in place.
    pub fn clamp_all(&self, q: &mut [f64]) {
        for (i, a) in q.iter_mut().enumerate() {
            *a = self.clamp(i, *a);
        }
    }
}

/// Slack on the workspace test so boundary projections stay solvable.
const REACH_TOLERANCE: f64 = 1e-12;

/// Foot position in the sagittal plane of the un-abducted leg.
fn planar_fk(hip: f64, knee: f64, g: &LegGeometry) -> (f64, f64) {
    let x = -g.thigh_len * hip.sin() - g.shank_len * (hip + knee).sin();
    let z = -g.thigh_len * hip.cos() - g.shank_len * (hip + knee).cos();
    (x, z)
}

pub fn leg_fk(q: [f64; 3], geom: &LegGeometry) -> Vector3<f64> {
    let (x, zp) = planar_fk(q[1], q[2], geom);
    let l1 = geom.lateral();
    let (s, c) = q[0].sin_cos();
    Vector3::new(x, l1 * c - zp * s, l1 * s + zp * c)
}

/// Knee position in the leg frame.
pub fn knee_position(q: [f64; 3], geom: &LegGeometry) -> Vector3<f64> {
    let x = -geom.thigh_len * q[1].sin();
    let zp = -geom.thigh_len * q[1].cos();
    let l1 = geom.lateral();
    let (s, c) = q[0].sin_cos();
    Vector3::new(x, l1 * c - zp * s, l1 * s + zp * c)
}

/// ∂(foot position)/∂q, columns ordered [abd, hip, knee].
pub fn leg_jacobian(q: [f64; 3], geom: &LegGeometry) -> Matrix3<f64> {
    let (l2, l3) = (geom.thigh_len, geom.shank_len);
    let l1 = geom.lateral();
    let (h, k) = (q[1], q[2]);
    let (_, zp) = planar_fk(h, k, geom);
    let dx_dh = -l2 * h.cos() - l3 * (h + k).cos();
    let dx_dk = -l3 * (h + k).cos();
    let dz_dh = l2 * h.sin() + l3 * (h + k).sin();
    let dz_dk = l3 * (h + k).sin();
    let (s, c) = q[0].sin_cos();
    Matrix3::new(
        0.0,
        dx_dh,
        dx_dk,
        -l1 * s - zp * c,
        -s * dz_dh,
        -s * dz_dk,
        l1 * c - zp * s,
        c * dz_dh,
        c * dz_dk,
    )
}

/// Hip and knee angles placing the foot at (x, z) in the sagittal plane,
/// knee-backward branch (knee ≤ 0).
pub fn planar_ik(x: f64, z: f64, geom: &LegGeometry) -> Result<(f64, f64), KinematicsError> {
    if !(x.is_finite() && z.is_finite()) {
        return Err(KinematicsError::NonFinite);
    }
    let (l2, l3) = (geom.thigh_len, geom.shank_len);
    let (r_min, r_max) = geom.planar_reach();
    let r = x.hypot(z);
    if r > r_max + REACH_TOLERANCE {
        return Err(KinematicsError::OutOfWorkspace {
            shortfall: r - r_max,
        });
    }
    if r < r_min - REACH_TOLERANCE {
        return Err(KinematicsError::OutOfWorkspace {
            shortfall: r_min - r,
        });
    }
    let cos_k = ((r * r - l2 * l2 - l3 * l3) / (2.0 * l2 * l3)).clamp(-1.0, 1.0);
    let knee = -cos_k.acos();
    let hip = (-x).atan2(-z) - (l3 * knee.sin()).atan2(l2 + l3 * knee.cos());
    Ok((hip, knee))
}

pub fn leg_ik(p: &Vector3<f64>, geom: &LegGeometry) -> Result<[f64; 3], KinematicsError> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(KinematicsError::NonFinite);
    }
    let l1 = geom.lateral();
    let yz_sq = p.y * p.y + p.z * p.z;
    if yz_sq < l1 * l1 {
        return Err(KinematicsError::OutOfWorkspace {
            shortfall: l1.abs() - yz_sq.sqrt(),
        });
    }
    let zp = -(yz_sq - l1 * l1).sqrt();
    let abd = p.z.atan2(p.y) - zp.atan2(l1);
    let abd = (abd + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
        - std::f64::consts::PI;
    let (hip, knee) = planar_ik(p.x, zp, geom)?;
    Ok([abd, hip, knee])
}

/// Joint angles for a sagittal-plane waypoint with zero abduction.
pub fn sagittal_ik(point: [f64; 2], geom: &LegGeometry) -> Result<[f64; 3], KinematicsError> {
    let (hip, knee) = planar_ik(point[0], point[1], geom)?;
    Ok([0.0, hip, knee])
}

/// Whether a sagittal-plane point lies in the planar workspace annulus.
pub fn sagittal_reachable(point: [f64; 2], geom: &LegGeometry) -> bool {
    let (r_min, r_max) = geom.planar_reach();
    let r = point[0].hypot(point[1]);
    r >= r_min - REACH_TOLERANCE && r <= r_max + REACH_TOLERANCE
}

/// Radial projection of a sagittal point onto the reachable annulus.
pub fn project_to_workspace(point: [f64; 2], geom: &LegGeometry) -> [f64; 2] {
    let (r_min, r_max) = geom.planar_reach();
    let r = point[0].hypot(point[1]);
    if r > r_max {
        [point[0] * r_max / r, point[1] * r_max / r]
    } else if r < r_min {
        if r == 0.0 {
            // straight down is the only sensible direction at the origin
            [0.0, -r_min]
        } else {
            [point[0] * r_min / r, point[1] * r_min / r]
        }
    } else {
        point
    }
}
