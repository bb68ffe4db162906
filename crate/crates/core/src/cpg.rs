//! Hopf-oscillator central pattern generator.
//!
//! Each leg carries an uncoupled supercritical Hopf oscillator
//!
//! ```text
//! ẋ = α(μ − r²)x − ωy
//! ẏ = α(μ − r²)y + ωx,      ω = 2π/T, r² = x² + y²
//! ```
//!
//! whose globally attracting limit cycle is the circle of radius √μ. The
//! per-leg rhythm is the x-component of the converged oscillator shifted by
//! a fixed fraction of the period.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Number of legs, ordered LF, RF, LH, RH.
pub const NUM_LEGS: usize = 4;

/// One rhythm value per leg.
pub type RhythmSignal = [f64; NUM_LEGS];

/// Samples per period in the precomputed rhythm table.
const TABLE_SAMPLES: usize = 4096;
/// Periods integrated before recording the table.
const TRANSIENT_PERIODS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CpgError {
    #[error("oscillator state is not finite")]
    NonFinite,
    #[error("integration step {dt} s must be in (0, T/100] with T = {period} s")]
    InvalidStep { dt: f64, period: f64 },
    #[error("invalid CPG configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CpgConfig {
    /// Squared limit-cycle amplitude.
    pub mu: f64,
    /// Convergence rate toward the limit cycle (1/s).
    pub alpha: f64,
    /// Period of the rhythm (s).
    pub period: f64,
    /// Per-leg phase lag as a fraction of the period, LF, RF, LH, RH.
    pub phase_offsets: [f64; NUM_LEGS],
}

impl CpgConfig {
    pub const WALK_OFFSETS: [f64; NUM_LEGS] = [0.0, 0.5, 0.25, 0.75];
    pub const TROT_OFFSETS: [f64; NUM_LEGS] = [0.0, 0.5, 0.5, 0.0];

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn validate(&self) -> Result<(), CpgError> {
        let bad = |msg: &str| Err(CpgError::InvalidConfig(msg.to_string()));
        if !(self.period.is_finite() && self.period > 0.0) {
            return bad("period must be positive");
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if self
            .phase_offsets
            .iter()
            .any(|o| !o.is_finite() || *o < 0.0 || *o >= 1.0)
        {
            return bad("phase offsets must lie in [0, 1)");
        }
        Ok(())
    }
}

impl Default for CpgConfig {
    fn default() -> Self {
        Self {
            mu: 0.16,
            alpha: 10.0,
            period: 2.0,
            phase_offsets: Self::WALK_OFFSETS,
        }
    }
}

/// A single oscillator's (x, y) pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HopfPoint {
    pub x: f64,
    pub y: f64,
}

impl HopfPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// State of the four per-leg oscillators.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OscillatorState {
    pub legs: [HopfPoint; NUM_LEGS],
}

impl OscillatorState {
    pub fn uniform(point: HopfPoint) -> Self {
        Self {
            legs: [point; NUM_LEGS],
        }
    }
}

fn vector_field(p: HopfPoint, cfg: &CpgConfig) -> HopfPoint {
    let omega = cfg.angular_frequency();
    let pull = cfg.alpha * (cfg.mu - (p.x * p.x + p.y * p.y));
    HopfPoint {
        x: pull * p.x - omega * p.y,
        y: pull * p.y + omega * p.x,
    }
}

fn rk4(p: HopfPoint, cfg: &CpgConfig, dt: f64) -> HopfPoint {
    let offset = |a: HopfPoint, k: HopfPoint, s: f64| HopfPoint {
        x: a.x + s * k.x,
        y: a.y + s * k.y,
    };
    let k1 = vector_field(p, cfg);
    let k2 = vector_field(offset(p, k1, 0.5 * dt), cfg);
    let k3 = vector_field(offset(p, k2, 0.5 * dt), cfg);
    let k4 = vector_field(offset(p, k3, dt), cfg);
    HopfPoint {
        x: p.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
        y: p.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
    }
}

/// Advances a single oscillator by one RK4 step. No step-size check.
pub fn step_point(p: HopfPoint, cfg: &CpgConfig, dt: f64) -> HopfPoint {
    rk4(p, cfg, dt)
}

/// Advances every leg oscillator by one fixed RK4 step of `dt` seconds.
pub fn step_oscillator(
    state: &OscillatorState,
    cfg: &CpgConfig,
    dt: f64,
) -> Result<OscillatorState, CpgError> {
    if !(dt > 0.0 && dt <= cfg.period / 100.0) {
        return Err(CpgError::InvalidStep {
            dt,
            period: cfg.period,
        });
    }
    if state.legs.iter().any(|p| !p.is_finite()) {
        return Err(CpgError::NonFinite);
    }
    let mut next = *state;
    for p in next.legs.iter_mut() {
        *p = rk4(*p, cfg, dt);
    }
    Ok(next)
}

/// Converged rhythm generator. Holds one period of the limit-cycle
/// x-component, sampled after the transient has died out, and serves
/// phase-shifted copies of it to each leg.
#[derive(Debug, Clone)]
pub struct Cpg {
    cfg: CpgConfig,
    table: Vec<f64>,
}

impl Cpg {
    pub fn new(cfg: CpgConfig) -> Result<Self, CpgError> {
        cfg.validate()?;
        let dt = cfg.period / TABLE_SAMPLES as f64;
        let mut p = HopfPoint::new(cfg.mu.sqrt(), 0.0);
        for _ in 0..TRANSIENT_PERIODS * TABLE_SAMPLES {
            p = rk4(p, &cfg, dt);
        }
        let mut table = Vec::with_capacity(TABLE_SAMPLES);
        for _ in 0..TABLE_SAMPLES {
            table.push(p.x);
            p = rk4(p, &cfg, dt);
        }
        Ok(Self { cfg, table })
    }

    pub fn config(&self) -> &CpgConfig {
        &self.cfg
    }

    pub fn period(&self) -> f64 {
        self.cfg.period
    }

    /// Unshifted rhythm ρ_base(t), periodic in T.
    pub fn base(&self, t: f64) -> f64 {
        let n = self.table.len();
        let u = t.rem_euclid(self.cfg.period) / self.cfg.period * n as f64;
        let i = (u.floor() as usize).min(n - 1);
        let s = u - i as f64;
        let at = |k: isize| self.table[k.rem_euclid(n as isize) as usize];
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        // Catmull-Rom on the periodic table.
        let s2 = s * s;
        let s3 = s2 * s;
        0.5 * (2.0 * p1
            + (p2 - p0) * s
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * s3)
    }

    /// ρ_j(t) = ρ_base(t − offset_j·T) for every leg.
    pub fn rhythm_at(&self, t: f64) -> RhythmSignal {
        let mut rho = [0.0; NUM_LEGS];
        for (r, off) in rho.iter_mut().zip(self.cfg.phase_offsets.iter()) {
            *r = self.base(t - off * self.cfg.period);
        }
        rho
    }

    /// Gait phase of `leg` in [0, 1).
    pub fn leg_phase(&self, leg: usize, t: f64) -> f64 {
        leg_phase(&self.cfg, leg, t)
    }
}

/// Gait phase of `leg` in [0, 1): fraction of the cycle elapsed since the
/// leg's own phase origin.
pub fn leg_phase(cfg: &CpgConfig, leg: usize, t: f64) -> f64 {
    (t / cfg.period - cfg.phase_offsets[leg]).rem_euclid(1.0)
}

/// Convenience wrapper that builds a [`Cpg`] for a single query.
pub fn rhythm_at(cfg: &CpgConfig, t: f64) -> Result<RhythmSignal, CpgError> {
    Ok(Cpg::new(*cfg)?.rhythm_at(t))
}
