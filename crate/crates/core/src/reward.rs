//! Six-term locomotion reward, joint power and the wide stability margin.

use crate::cpg::NUM_LEGS;
use crate::rbfn::NUM_JOINTS;
use serde::{Deserialize, Serialize};

/// Order of the weights and components: R_v, R_e, R_b, R_f, R_c, R_u.
pub const NUM_TERMS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FootTerm {
    /// −c_f Σ_contact ‖V_f‖² Δt: penalises foot speed while in contact.
    SpeedPenalty,
    /// Σ_contact c_f min(V_d, V_c), the tabulated expression taken literally.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMotionTerm {
    /// c_k (tanh(c_b ‖ω_xy‖²) − 1), the tabulated expression.
    Literal,
    /// −c_k tanh(c_b ‖ω_xy‖²): zero when still, more negative when rocking.
    Penalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub weights: [f64; NUM_TERMS],
    pub c_b: f64,
    pub c_f: f64,
    /// Use |τ·q̇| in the energy term instead of the signed product.
    pub absolute_energy: bool,
    pub foot_term: FootTerm,
    pub base_motion_term: BaseMotionTerm,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            weights: [1.5, 0.07, 0.6, 0.3, 0.1, 0.1],
            c_b: 4.0,
            c_f: 2.5,
            absolute_energy: false,
            foot_term: FootTerm::SpeedPenalty,
            base_motion_term: BaseMotionTerm::Literal,
        }
    }
}

/// Quantities the reward reads from one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardInputs {
    pub desired_speed: f64,
    /// Forward base speed (m/s).
    pub forward_speed: f64,
    pub torques: [f64; NUM_JOINTS],
    pub joint_velocities: [f64; NUM_JOINTS],
    /// Base roll and pitch rates (rad/s).
    pub angular_velocity_xy: [f64; 2],
    pub foot_contacts: [bool; NUM_LEGS],
    pub foot_velocities: [[f64; 3]; NUM_LEGS],
    /// Feet that should be in stance according to the gait phase.
    pub desired_supports: usize,
    pub unexpected_contacts: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub components: [f64; NUM_TERMS],
    pub curriculum: f64,
    pub total: f64,
}

/// c_k = 1 − tanh(4.5 · min(V_x − V_d, 0)²).
pub fn curriculum_factor(vx: f64, vd: f64) -> f64 {
    let m = (vx - vd).min(0.0);
    // 1 − tanh(x) = 2e^{−2x} / (1 + e^{−2x}), which stays positive far
    // longer than the direct difference.
    let e = (-9.0 * m * m).exp();
    2.0 * e / (1.0 + e)
}

pub fn compute_reward(inp: &RewardInputs, cfg: &RewardConfig) -> RewardBreakdown {
    let ck = curriculum_factor(inp.forward_speed, inp.desired_speed);
    let r_v = inp.desired_speed.min(inp.forward_speed);
    let work: f64 = inp
        .torques
        .iter()
        .zip(inp.joint_velocities.iter())
        .map(|(t, w)| if cfg.absolute_energy { (t * w).abs() } else { t * w })
        .sum();
    let r_e = -ck * work * inp.dt;
    let w2 = inp.angular_velocity_xy[0].powi(2) + inp.angular_velocity_xy[1].powi(2);
    let r_b = match cfg.base_motion_term {
        BaseMotionTerm::Literal => ck * ((cfg.c_b * w2).tanh() - 1.0),
        BaseMotionTerm::Penalty => -ck * (cfg.c_b * w2).tanh(),
    };
    let in_contact = inp.foot_contacts.iter().filter(|c| **c).count();
    let r_f = match cfg.foot_term {
        FootTerm::SpeedPenalty => {
            -cfg.c_f
                * inp
                    .foot_velocities
                    .iter()
                    .zip(inp.foot_contacts.iter())
                    .filter(|(_, c)| **c)
                    .map(|(v, _)| v.iter().map(|x| x * x).sum::<f64>())
                    .sum::<f64>()
                * inp.dt
        }
        FootTerm::Literal => in_contact as f64 * cfg.c_f * r_v,
    };
    let r_c = -(in_contact as f64 - inp.desired_supports as f64).max(0.0);
    let r_u = -(inp.unexpected_contacts as f64);
    let components = [r_v, r_e, r_b, r_f, r_c, r_u];
    let total = components
        .iter()
        .zip(cfg.weights.iter())
        .map(|(r, w)| r * w)
        .sum();
    RewardBreakdown {
        components,
        curriculum: ck,
        total,
    }
}

/// Σ |τ_i q̇_i| over all joints (W).
pub fn power(torques: &[f64], joint_velocities: &[f64]) -> f64 {
    torques
        .iter()
        .zip(joint_velocities)
        .map(|(t, w)| (t * w).abs())
        .sum()
}

/// Distance from the CoM ground projection to the support polygon's
/// diagonal intersection (four feet, ordered LF, RF, RH, LH) or centroid
/// (three feet). `None` for fewer than three supports or degenerate
/// diagonals.
pub fn wsm(com_xy: [f64; 2], supports: &[[f64; 2]]) -> Option<f64> {
    let centre = match supports.len() {
        3 => [
            (supports[0][0] + supports[1][0] + supports[2][0]) / 3.0,
            (supports[0][1] + supports[1][1] + supports[2][1]) / 3.0,
        ],
        4 => {
            // diagonals LF–RH and RF–LH
            let (a, c) = (supports[0], supports[2]);
            let (b, d) = (supports[1], supports[3]);
            let r = [c[0] - a[0], c[1] - a[1]];
            let s = [d[0] - b[0], d[1] - b[1]];
            let denom = r[0] * s[1] - r[1] * s[0];
            if denom.abs() < 1e-12 {
                return None;
            }
            let t = ((b[0] - a[0]) * s[1] - (b[1] - a[1]) * s[0]) / denom;
            [a[0] + t * r[0], a[1] + t * r[1]]
        }
        _ => return None,
    };
    Some((com_xy[0] - centre[0]).hypot(com_xy[1] - centre[1]))
}
