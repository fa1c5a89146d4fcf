//! Unit conventions.
//!
//! Angles are carried in degrees, lengths in millimetres and forces in
//! newtons everywhere except inside torque arithmetic, which works in SI
//! (N, m, N·m). These helpers are the only place the factors appear.

use std::f64::consts::PI;

pub const MM_PER_M: f64 = 1000.0;

#[inline]
pub fn deg_to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

#[inline]
pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

#[inline]
pub fn mm_to_m(mm: f64) -> f64 {
    mm / MM_PER_M
}

#[inline]
pub fn m_to_mm(m: f64) -> f64 {
    m * MM_PER_M
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_conversions() {
        assert_eq!(deg_to_rad(180.0), PI);
        assert_eq!(rad_to_deg(PI / 2.0), 90.0);
        assert_eq!(mm_to_m(3.0), 0.003);
        assert_eq!(m_to_mm(0.002), 2.0);
    }

    proptest! {
        #[test]
        fn angle_round_trip(deg in -720.0f64..720.0) {
            let back = rad_to_deg(deg_to_rad(deg));
            prop_assert!((back - deg).abs() <= 1e-12 * deg.abs().max(1.0));
        }

        #[test]
        fn length_round_trip(mm in 0.0f64..1.0e6) {
            let back = m_to_mm(mm_to_m(mm));
            prop_assert!((back - mm).abs() <= 1e-12 * mm.max(1.0));
        }
    }
}
