use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerrainKind {
    Flat,
    Slope,
    Rough,
}

/// Ground profile `y = h(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terrain<T> {
    pub kind: TerrainKind,
    /// Incline angle for slopes (rad).
    pub slope_angle: T,
    /// Knot spacing of the rough height field (m).
    pub spacing: T,
    /// x coordinate of the first knot.
    pub origin_x: T,
    pub knots: Vec<T>,
    pub seed: u64,
}

pub const ROUGH_SPACING: f64 = 0.25;
pub const ROUGH_AMPLITUDE: f64 = 0.03;
const ROUGH_START: f64 = -5.0;
const ROUGH_END: f64 = 40.0;

impl<T: Real> Terrain<T> {
    pub fn flat() -> Self {
        Self {
            kind: TerrainKind::Flat,
            slope_angle: T::zero(),
            spacing: T::lit(ROUGH_SPACING),
            origin_x: T::zero(),
            knots: Vec::new(),
            seed: 0,
        }
    }

    pub fn slope(angle: T) -> Self {
        Self { kind: TerrainKind::Slope, slope_angle: angle, ..Self::flat() }
    }

    /// Uniform random knot heights in `[−0.03, 0.03]` m every 0.25 m.
    pub fn rough(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = ((ROUGH_END - ROUGH_START) / ROUGH_SPACING).round() as usize + 1;
        let knots = (0..n)
            .map(|_| T::lit(rng.random_range(-ROUGH_AMPLITUDE..=ROUGH_AMPLITUDE)))
            .collect();
        Self {
            kind: TerrainKind::Rough,
            origin_x: T::lit(ROUGH_START),
            knots,
            seed,
            ..Self::flat()
        }
    }

    /// Knot index and interpolation fraction for `x`, clamped to the sampled range.
    fn locate(&self, x: T) -> (usize, T) {
        let last = self.knots.len().saturating_sub(1);
        let s = ((x - self.origin_x) / self.spacing).max(T::zero());
        let i = s.floor().to_usize().unwrap_or(usize::MAX).min(last.saturating_sub(1));
        let frac = (s - T::from_usize(i).unwrap()).clamp_to(T::zero(), T::one());
        (i, frac)
    }

    pub fn height(&self, x: T) -> T {
        match self.kind {
            TerrainKind::Flat => T::zero(),
            TerrainKind::Slope => x * self.slope_angle.tan(),
            TerrainKind::Rough => match self.knots.len() {
                0 => T::zero(),
                1 => self.knots[0],
                _ => {
                    let (i, f) = self.locate(x);
                    self.knots[i] + (self.knots[i + 1] - self.knots[i]) * f
                }
            },
        }
    }

    /// Derivative `dh/dx`.
    pub fn slope_at(&self, x: T) -> T {
        match self.kind {
            TerrainKind::Flat => T::zero(),
            TerrainKind::Slope => self.slope_angle.tan(),
            TerrainKind::Rough => {
                if self.knots.len() < 2 {
                    return T::zero();
                }
                let s = (x - self.origin_x) / self.spacing;
                let n = T::from_usize(self.knots.len() - 1).unwrap();
                if s < T::zero() || s > n {
                    return T::zero();
                }
                let (i, _) = self.locate(x);
                (self.knots[i + 1] - self.knots[i]) / self.spacing
            }
        }
    }

    pub fn knot_x(&self, i: usize) -> T {
        self.origin_x + self.spacing * T::from_usize(i).unwrap()
    }
}
