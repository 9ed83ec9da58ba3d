//! Discrete measurement angles: multiples of pi/4, stored as integers mod 8.
//!
//! All angle arithmetic in the delegation protocols is closed over this set,
//! so angles are never represented as floats outside of the simulator kernels.

use core::fmt;
use core::ops::{Add, Neg, Sub};

use num_complex::Complex64;

/// An angle `k * pi/4` with `k` in `0..8`. `PI` corresponds to `k = 4`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct AngleIndex(u8);

/// `pi` as an [`AngleIndex`].
pub const PI: AngleIndex = AngleIndex(4);

// cos(k*pi/4) for k = 0..8. Exact dyadic values, no trig calls needed.
const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
const COS_TABLE: [f64; 8] = [
    1.0,
    FRAC_1_SQRT_2,
    0.0,
    -FRAC_1_SQRT_2,
    -1.0,
    -FRAC_1_SQRT_2,
    0.0,
    FRAC_1_SQRT_2,
];
const SIN_TABLE: [f64; 8] = [
    0.0,
    FRAC_1_SQRT_2,
    1.0,
    FRAC_1_SQRT_2,
    0.0,
    -FRAC_1_SQRT_2,
    -1.0,
    -FRAC_1_SQRT_2,
];

impl AngleIndex {
    /// Wraps any integer into the canonical `0..8` range.
    pub fn new(k: i64) -> Self {
        AngleIndex(k.rem_euclid(8) as u8)
    }

    /// The canonical representative in `0..8`.
    pub fn index(self) -> u8 {
        self.0
    }

    /// The angle in radians, `k * pi/4`.
    pub fn radians(self) -> f64 {
        f64::from(self.0) * core::f64::consts::FRAC_PI_4
    }

    /// `e^{i k pi/4}`, from an exact table.
    pub fn phase(self) -> Complex64 {
        Complex64::new(COS_TABLE[self.0 as usize], SIN_TABLE[self.0 as usize])
    }

    /// Multiplies the angle by `(-1)^bit`.
    pub fn negate_if(self, bit: u8) -> Self {
        if bit & 1 == 1 {
            -self
        } else {
            self
        }
    }

    /// Adds `pi` when `bit` is set.
    pub fn add_pi_if(self, bit: u8) -> Self {
        if bit & 1 == 1 {
            self + PI
        } else {
            self
        }
    }

    /// All eight angles in index order.
    pub fn all() -> impl Iterator<Item = AngleIndex> {
        (0u8..8).map(AngleIndex)
    }
}

impl Add for AngleIndex {
    type Output = AngleIndex;
    fn add(self, rhs: AngleIndex) -> AngleIndex {
        AngleIndex((self.0 + rhs.0) % 8)
    }
}

impl Sub for AngleIndex {
    type Output = AngleIndex;
    fn sub(self, rhs: AngleIndex) -> AngleIndex {
        AngleIndex((8 + self.0 - rhs.0) % 8)
    }
}

impl Neg for AngleIndex {
    type Output = AngleIndex;
    fn neg(self) -> AngleIndex {
        AngleIndex((8 - self.0) % 8)
    }
}

impl fmt::Debug for AngleIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}pi/4", self.0)
    }
}

impl fmt::Display for AngleIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_mod_eight() {
        assert_eq!(AngleIndex::new(9), AngleIndex::new(1));
        assert_eq!(AngleIndex::new(-1), AngleIndex::new(7));
        assert_eq!(AngleIndex::new(3) + AngleIndex::new(7), AngleIndex::new(2));
        assert_eq!(AngleIndex::new(1) - AngleIndex::new(3), AngleIndex::new(6));
        assert_eq!(-AngleIndex::new(0), AngleIndex::new(0));
    }

    #[test]
    fn phase_matches_trig() {
        for a in AngleIndex::all() {
            let p = a.phase();
            assert!((p.re - a.radians().cos()).abs() < 1e-15);
            assert!((p.im - a.radians().sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn pi_is_four_units() {
        assert_eq!(PI.index(), 4);
        assert_eq!((PI + PI).index(), 0);
        assert_eq!(AngleIndex::new(1).add_pi_if(1).index(), 5);
        assert_eq!(AngleIndex::new(3).negate_if(1).index(), 5);
    }
}
