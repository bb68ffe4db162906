//! Procedural terrain profiles varying along x only.

use serde::{Deserialize, Serialize};

pub const LEAD_IN: f64 = 1.0;
pub const UNIT_FLAT: f64 = 1.0;
pub const UNIT_SLOPE: f64 = 1.65;
pub const STEP_RISE: f64 = 0.15;
pub const STEP_RUN: f64 = 0.3;
pub const REPETITIONS: usize = 10;

/// One piece of a composite profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Flat { length: f64 },
    /// Straight ramp gaining `rise` over `length` (negative rise goes down).
    Slope { length: f64, rise: f64 },
    /// `steps` treads of depth `run`, each `rise` above the last.
    Stairs { steps: usize, run: f64, rise: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Flat { length } | Segment::Slope { length, .. } => length,
            Segment::Stairs { steps, run, .. } => steps as f64 * run,
        }
    }

    pub fn rise(&self) -> f64 {
        match *self {
            Segment::Flat { .. } => 0.0,
            Segment::Slope { rise, .. } => rise,
            Segment::Stairs { steps, rise, .. } => steps as f64 * rise,
        }
    }

    /// Height above the segment's start at local coordinate `s`.
    fn height(&self, s: f64) -> f64 {
        match *self {
            Segment::Flat { .. } => 0.0,
            Segment::Slope { length, rise } => rise * s / length,
            Segment::Stairs { steps, run, rise } => {
                let k = ((s / run).floor() as usize).min(steps);
                k as f64 * rise
            }
        }
    }

    fn slope(&self, _s: f64) -> f64 {
        match *self {
            Segment::Slope { length, rise } => rise / length,
            _ => 0.0,
        }
    }
}

/// Heightfield z(x, y), flat before `lead_in`, then the segments repeated
/// `repeat` times, then flat at the final height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSpec {
    pub lead_in: f64,
    pub segments: Vec<Segment>,
    pub repeat: usize,
}

impl Default for TerrainSpec {
    fn default() -> Self {
        Self::flat()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TerrainError {
    #[error("unknown terrain preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid terrain: {0}")]
    Invalid(String),
}

pub const PRESETS: [&str; 7] = [
    "flat",
    "slope15",
    "slope20",
    "stairs",
    "up_down_slope",
    "up_down_stairs",
    "upslope_downstairs",
];

fn slope_by_angle(deg: f64, length: f64) -> Segment {
    Segment::Slope {
        length,
        rise: deg.to_radians().tan() * length,
    }
}

impl TerrainSpec {
    pub fn flat() -> Self {
        Self {
            lead_in: LEAD_IN,
            segments: Vec::new(),
            repeat: 0,
        }
    }

    /// A single ramp of the given angle over one slope unit, then flat.
    pub fn slope(deg: f64) -> Self {
        Self {
            lead_in: LEAD_IN,
            segments: vec![slope_by_angle(deg, UNIT_SLOPE)],
            repeat: 1,
        }
    }

    pub fn stairs(steps: usize) -> Self {
        Self {
            lead_in: LEAD_IN,
            segments: vec![Segment::Stairs {
                steps,
                run: STEP_RUN,
                rise: STEP_RISE,
            }],
            repeat: 1,
        }
    }

    pub fn preset(name: &str) -> Result<Self, TerrainError> {
        let up = slope_by_angle(15.0, UNIT_SLOPE);
        let down = Segment::Slope {
            length: UNIT_SLOPE,
            rise: -up.rise(),
        };
        let flat = Segment::Flat { length: UNIT_FLAT };
        let stairs = |rise: f64| Segment::Stairs {
            steps: 4,
            run: STEP_RUN,
            rise,
        };
        Ok(match name {
            "flat" => Self::flat(),
            "slope15" => Self::slope(15.0),
            "slope20" => Self::slope(20.0),
            "stairs" => Self::stairs(20),
            "up_down_slope" => Self {
                lead_in: LEAD_IN,
                segments: vec![up, flat, down, flat],
                repeat: REPETITIONS,
            },
            "up_down_stairs" => Self {
                lead_in: LEAD_IN,
                segments: vec![stairs(STEP_RISE), flat, stairs(-STEP_RISE), flat],
                repeat: REPETITIONS,
            },
            "upslope_downstairs" => Self {
                lead_in: LEAD_IN,
                segments: vec![
                    up,
                    flat,
                    Segment::Stairs {
                        steps: 4,
                        run: STEP_RUN,
                        rise: -up.rise() / 4.0,
                    },
                    flat,
                ],
                repeat: REPETITIONS,
            },
            other => return Err(TerrainError::UnknownPreset(other.to_string())),
        })
    }

    pub fn validate(&self) -> Result<(), TerrainError> {
        if !(self.lead_in.is_finite() && self.lead_in >= 0.0) {
            return Err(TerrainError::Invalid("lead_in must be non-negative".into()));
        }
        for s in &self.segments {
            let ok = match *s {
                Segment::Flat { length } => length > 0.0 && length.is_finite(),
                Segment::Slope { length, rise } => length > 0.0 && length.is_finite() && rise.is_finite(),
                Segment::Stairs { steps, run, rise } => steps > 0 && run > 0.0 && run.is_finite() && rise.is_finite(),
            };
            if !ok {
                return Err(TerrainError::Invalid(format!("bad segment {s:?}")));
            }
        }
        Ok(())
    }

    fn unit_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    fn unit_rise(&self) -> f64 {
        self.segments.iter().map(Segment::rise).sum()
    }

    /// Segment containing `x` together with its local coordinate and base height.
    fn locate(&self, x: f64) -> Option<(&Segment, f64, f64)> {
        let u = x - self.lead_in;
        if u < 0.0 || self.segments.is_empty() || self.repeat == 0 {
            return None;
        }
        let unit = self.unit_length();
        let rep = (u / unit).floor();
        if rep >= self.repeat as f64 {
            return None;
        }
        let mut base = rep * self.unit_rise();
        let mut s = u - rep * unit;
        for seg in &self.segments {
            if s < seg.length() {
                return Some((seg, s, base));
            }
            s -= seg.length();
            base += seg.rise();
        }
        None
    }

    pub fn height(&self, x: f64, _y: f64) -> f64 {
        match self.locate(x) {
            Some((seg, s, base)) => base + seg.height(s),
            None => {
                if x < self.lead_in || self.segments.is_empty() {
                    0.0
                } else {
                    self.repeat as f64 * self.unit_rise()
                }
            }
        }
    }

    /// Ground slope dz/dx (zero on treads and flats).
    pub fn slope_at(&self, x: f64, _y: f64) -> f64 {
        self.locate(x).map_or(0.0, |(seg, s, _)| seg.slope(s))
    }

    /// Unit surface normal.
    pub fn normal(&self, x: f64, y: f64) -> [f64; 3] {
        let g = self.slope_at(x, y);
        let n = (1.0 + g * g).sqrt();
        [-g / n, 0.0, 1.0 / n]
    }

    /// (x, z) samples every `resolution` metres over [0, span].
    pub fn profile(&self, span: f64, resolution: f64) -> Vec<(f64, f64)> {
        let n = (span / resolution).round() as usize;
        (0..=n)
            .map(|i| {
                let x = i as f64 * resolution;
                (x, self.height(x, 0.0))
            })
            .collect()
    }
}
