//! Foot trajectories, their genetic encoding, and the reference optimizer
//! that evolves them with the learner's policy held fixed.

pub mod evaluate;
pub mod ga;

use crate::cpg::{Cpg, NUM_LEGS};
use crate::kinematics::{leg_geometries, project_to_workspace, sagittal_ik, sagittal_reachable, KinematicsError};
use crate::rbfn::{self, JointVector, RbfnConfig, RbfnError, RbfnParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use evaluate::{ec_evaluate, optimize_reference, FitnessRecord, RagOutcome};
pub use ga::{ga_generation, optimize_with, GaConfig, GenerationStats, OptimizeOutcome, UpdateRule};

pub const MIN_WAYPOINTS: usize = 4;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("a trajectory needs at least {MIN_WAYPOINTS} waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoint {index} of leg {leg} is unreachable: {source}")]
    Unreachable {
        leg: usize,
        index: usize,
        source: KinematicsError,
    },
    #[error(transparent)]
    Fit(#[from] RbfnError),
}

/// Closed foot path per leg in the hip's sagittal plane (x forward, z up),
/// waypoints spaced uniformly over one gait cycle starting at phase 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FootTrajectory {
    pub legs: [Vec<Point>; NUM_LEGS],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialTrajectory {
    /// Fore-aft travel during stance (m).
    pub stride: f64,
    /// Peak lift during swing (m).
    pub swing_height: f64,
    /// Foot height below the hip during stance (m).
    pub stance_z: f64,
    /// Fore-aft offset of the stride centre (m).
    pub x_offset: f64,
}

impl Default for InitialTrajectory {
    fn default() -> Self {
        Self {
            stride: 0.06,
            swing_height: 0.04,
            stance_z: -0.25,
            x_offset: 0.0,
        }
    }
}

impl InitialTrajectory {
    /// Point at `phase`: straight stance sweep backwards over [0, ½),
    /// half-sine swing forwards over [½, 1).
    pub fn point_at(&self, phase: f64) -> Point {
        let p = phase.rem_euclid(1.0);
        let half = 0.5 * self.stride;
        if p < 0.5 {
            let u = p / 0.5;
            [self.x_offset + half - self.stride * u, self.stance_z]
        } else {
            let u = (p - 0.5) / 0.5;
            [
                self.x_offset - half + self.stride * u,
                self.stance_z + self.swing_height * (std::f64::consts::PI * u).sin(),
            ]
        }
    }

    /// The same path for all legs, sampled at `k` phases.
    pub fn build(&self, k: usize) -> Result<FootTrajectory, TrajectoryError> {
        if k < MIN_WAYPOINTS {
            return Err(TrajectoryError::TooFewWaypoints(k));
        }
        let pts: Vec<Point> = (0..k).map(|i| self.point_at(i as f64 / k as f64)).collect();
        let traj = FootTrajectory {
            legs: std::array::from_fn(|_| pts.clone()),
        };
        traj.check_reachable()?;
        Ok(traj)
    }
}

impl FootTrajectory {
    pub fn uniform(points: Vec<Point>) -> Self {
        Self {
            legs: std::array::from_fn(|_| points.clone()),
        }
    }

    pub fn waypoint_count(&self) -> usize {
        self.legs[0].len()
    }

    /// Position of `leg`'s foot at `phase`, linear between waypoints and
    /// closing back to the first waypoint at phase 1.
    pub fn point_at(&self, leg: usize, phase: f64) -> Point {
        let pts = &self.legs[leg];
        let m = pts.len();
        let u = phase.rem_euclid(1.0) * m as f64;
        let i = (u.floor() as usize).min(m - 1);
        let s = u - i as f64;
        let (a, b) = (pts[i], pts[(i + 1) % m]);
        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
    }

    pub fn check_reachable(&self) -> Result<(), TrajectoryError> {
        let geoms = leg_geometries();
        for (leg, pts) in self.legs.iter().enumerate() {
            for (index, p) in pts.iter().enumerate() {
                if let Err(source) = sagittal_ik(*p, &geoms[leg]) {
                    return Err(TrajectoryError::Unreachable { leg, index, source });
                }
            }
        }
        Ok(())
    }

    /// Waypoints flattened leg by leg as x, z pairs.
    pub fn to_flat(&self) -> Vec<f64> {
        self.legs
            .iter()
            .flat_map(|l| l.iter().flat_map(|p| p.iter().copied()))
            .collect()
    }

    pub fn from_flat(values: &[f64], k: usize) -> Option<Self> {
        if k < MIN_WAYPOINTS || values.len() != NUM_LEGS * k * 2 {
            return None;
        }
        let legs = std::array::from_fn(|leg| {
            (0..k)
                .map(|i| {
                    let o = (leg * k + i) * 2;
                    [values[o], values[o + 1]]
                })
                .collect()
        });
        Some(Self { legs })
    }
}

/// k phase-uniform samples of every leg's path.
pub fn sample_waypoints(traj: &FootTrajectory, k: usize) -> Result<FootTrajectory, TrajectoryError> {
    if k < MIN_WAYPOINTS {
        return Err(TrajectoryError::TooFewWaypoints(k));
    }
    if k == traj.waypoint_count() {
        return Ok(traj.clone());
    }
    let legs = std::array::from_fn(|leg| (0..k).map(|i| traj.point_at(leg, i as f64 / k as f64)).collect());
    Ok(FootTrajectory { legs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenomeMode {
    /// One perturbation set applied to every leg.
    Shared,
    /// An independent perturbation set per leg.
    PerLeg,
}

/// Perturbation vectors v_a added to the waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    pub mode: GenomeMode,
    pub vectors: Vec<Point>,
}

impl Genome {
    pub fn zeros(mode: GenomeMode, k: usize) -> Self {
        let n = match mode {
            GenomeMode::Shared => k,
            GenomeMode::PerLeg => NUM_LEGS * k,
        };
        Self {
            mode,
            vectors: vec![[0.0, 0.0]; n],
        }
    }

    pub fn waypoints(&self) -> usize {
        match self.mode {
            GenomeMode::Shared => self.vectors.len(),
            GenomeMode::PerLeg => self.vectors.len() / NUM_LEGS,
        }
    }

    pub fn vector(&self, leg: usize, i: usize) -> Point {
        match self.mode {
            GenomeMode::Shared => self.vectors[i],
            GenomeMode::PerLeg => self.vectors[leg * self.waypoints() + i],
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum()
    }
}

/// p_I + v_a, then radial repair of any waypoint pushed out of reach.
pub fn apply_genome(waypoints: &FootTrajectory, genome: &Genome) -> FootTrajectory {
    let k = waypoints.waypoint_count();
    assert_eq!(genome.waypoints(), k, "genome and trajectory disagree on k");
    let geoms = leg_geometries();
    let legs = std::array::from_fn(|leg| {
        (0..k)
            .map(|i| {
                let p = waypoints.legs[leg][i];
                let v = genome.vector(leg, i);
                let q = [p[0] + v[0], p[1] + v[1]];
                if sagittal_reachable(q, &geoms[leg]) {
                    q
                } else {
                    project_to_workspace(q, &geoms[leg])
                }
            })
            .collect()
    });
    FootTrajectory { legs }
}

/// Joint targets for every leg at time `t`, read from the trajectory by IK.
pub fn joint_targets_at(traj: &FootTrajectory, cpg: &Cpg, t: f64) -> Result<JointVector, TrajectoryError> {
    let geoms = leg_geometries();
    let mut out = [0.0; rbfn::NUM_JOINTS];
    for leg in 0..NUM_LEGS {
        let phase = cpg.leg_phase(leg, t);
        let p = traj.point_at(leg, phase);
        let q = sagittal_ik(p, &geoms[leg]).map_err(|source| TrajectoryError::Unreachable {
            leg,
            index: (phase * traj.waypoint_count() as f64) as usize,
            source,
        })?;
        out[leg * 3..leg * 3 + 3].copy_from_slice(&q);
    }
    Ok(out)
}

/// Fits the RBFN so that its output at each distinct center time matches
/// the IK of the trajectory at that time.
pub fn fit_reference(traj: &FootTrajectory, cpg: &Cpg, cfg: &RbfnConfig) -> Result<RbfnParams, TrajectoryError> {
    let blank = RbfnParams::new(cpg, cfg.neurons, cfg.sigma_sq)?;
    let h = cfg.neurons;
    let period = cpg.period();
    // the last center repeats the first, so only H − 1 instants are distinct
    let targets = (0..h - 1)
        .map(|i| {
            let t = i as f64 * period / (h - 1) as f64;
            Ok((cpg.rhythm_at(t), joint_targets_at(traj, cpg, t)?))
        })
        .collect::<Result<Vec<_>, TrajectoryError>>()?;
    Ok(rbfn::fit(&targets, cfg.delta, &blank)?)
}

/// Rhythm generator plus fitted network: the reference action a_ref(t).
#[derive(Debug, Clone)]
pub struct Reference {
    pub cpg: Cpg,
    pub params: RbfnParams,
}

impl Reference {
    pub fn at(&self, t: f64) -> JointVector {
        rbfn::forward(&self.cpg.rhythm_at(t), &self.params)
    }
}
