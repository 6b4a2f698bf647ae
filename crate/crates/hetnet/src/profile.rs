//! LoS probability profiles and their closed-form disc integrals.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Probability that a link of length `r` km is line-of-sight.
///
/// The variants share one evaluation path so the 3GPP linear profile used in
/// production and the degenerate profiles used in tests exercise the same
/// code. `Custom` holds `(r, p)` knots interpolated linearly and clamped to
/// the first/last value outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LoSProfile {
    /// `p(r) = 1 - r/d_los` for `0 < r <= d_los`, zero beyond.
    Linear3gpp { d_los: f64 },
    /// Every link is NLoS.
    PureNlos,
    /// Every link is LoS.
    PureLos,
    /// Piecewise-linear table of `(r, p)` knots.
    Custom { knots: Vec<(f64, f64)> },
}

impl LoSProfile {
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            LoSProfile::Linear3gpp { d_los } => {
                if !(*d_los > 0.0 && d_los.is_finite()) {
                    return Err(Error::config(format!("d_los_km must be positive, got {d_los}")));
                }
            }
            LoSProfile::Custom { knots } => {
                if knots.is_empty() {
                    return Err(Error::config("custom LoS profile needs at least one knot"));
                }
                let mut prev = -1.0;
                for &(r, p) in knots {
                    if !(r >= 0.0 && r.is_finite() && r > prev) {
                        return Err(Error::config("custom LoS profile knots must have strictly increasing r >= 0"));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::config(format!("LoS probability {p} outside [0, 1]")));
                    }
                    prev = r;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// LoS probability at distance `r >= 0`. Total over all inputs.
    pub fn los_probability(&self, r: f64) -> f64 {
        match self {
            LoSProfile::Linear3gpp { d_los } => {
                if r <= *d_los {
                    1.0 - r / d_los
                } else {
                    0.0
                }
            }
            LoSProfile::PureNlos => 0.0,
            LoSProfile::PureLos => 1.0,
            LoSProfile::Custom { knots } => {
                if r <= knots[0].0 {
                    return knots[0].1;
                }
                let last = knots[knots.len() - 1];
                if r >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|&(kr, _)| kr <= r);
                let (r0, p0) = knots[i - 1];
                let (r1, p1) = knots[i];
                p0 + (p1 - p0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// `int_0^x p(u) 2 pi u du`, closed form per variant.
    ///
    /// This is the LoS void-probability exponent kernel; the NLoS complement
    /// is `pi x^2 - disc_los_mass(x)`.
    pub fn disc_los_mass(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            LoSProfile::Linear3gpp { d_los } => {
                let d = *d_los;
                if x <= d {
                    2.0 * PI * (x * x / 2.0 - x * x * x / (3.0 * d))
                } else {
                    PI * d * d / 3.0
                }
            }
            LoSProfile::PureNlos => 0.0,
            LoSProfile::PureLos => PI * x * x,
            LoSProfile::Custom { knots } => {
                // Segment integral of (a + b u) 2 pi u du = 2 pi (a u^2/2 + b u^3/3).
                let seg = |a: f64, b: f64, lo: f64, hi: f64| {
                    2.0 * PI * (a * (hi * hi - lo * lo) / 2.0 + b * (hi * hi * hi - lo * lo * lo) / 3.0)
                };
                let mut total = 0.0;
                let first = knots[0];
                if x <= first.0 {
                    return seg(first.1, 0.0, 0.0, x);
                }
                total += seg(first.1, 0.0, 0.0, first.0);
                for w in knots.windows(2) {
                    let (r0, p0) = w[0];
                    let (r1, p1) = w[1];
                    let hi = x.min(r1);
                    if hi <= r0 {
                        break;
                    }
                    let b = (p1 - p0) / (r1 - r0);
                    let a = p0 - b * r0;
                    total += seg(a, b, r0, hi);
                }
                let last = knots[knots.len() - 1];
                if x > last.0 {
                    total += seg(last.1, 0.0, last.0, x);
                }
                total
            }
        }
    }

    /// `int_0^x (1 - p(u)) 2 pi u du`.
    pub fn disc_nlos_mass(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        std::f64::consts::PI * x * x - self.disc_los_mass(x)
    }

    /// Radius beyond which `p(r)` is constant, and that constant value.
    ///
    /// Used to split integrals over `[x, inf)` into a finite piece plus an
    /// analytically tractable constant-probability tail.
    pub fn constant_tail(&self) -> (f64, f64) {
        match self {
            LoSProfile::Linear3gpp { d_los } => (*d_los, 0.0),
            LoSProfile::PureNlos => (0.0, 0.0),
            LoSProfile::PureLos => (0.0, 1.0),
            LoSProfile::Custom { knots } => {
                let last = knots[knots.len() - 1];
                (last.0, last.1)
            }
        }
    }

    /// Upper support of `r * p(r)` if bounded (profiles that hit exactly 0).
    pub fn los_support(&self) -> Option<f64> {
        let (r, p) = self.constant_tail();
        if p == 0.0 {
            Some(r)
        } else {
            None
        }
    }

    /// True when the profile never takes a value strictly inside (0, 1),
    /// so LoS tags need no randomness.
    pub fn is_deterministic(&self) -> bool {
        match self {
            LoSProfile::PureNlos | LoSProfile::PureLos => true,
            LoSProfile::Linear3gpp { .. } => false,
            LoSProfile::Custom { knots } => knots.iter().all(|&(_, p)| p == 0.0 || p == 1.0) && knots.len() == 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn linear_3gpp_values() {
        let p = LoSProfile::Linear3gpp { d_los: 0.3 };
        assert_relative_eq!(p.los_probability(0.15), 0.5, max_relative = 1e-15);
        assert_eq!(p.los_probability(0.3), 0.0);
        assert_eq!(p.los_probability(1.0), 0.0);
        assert_eq!(LoSProfile::PureNlos.los_probability(1.7), 0.0);
    }

    #[test]
    fn disc_mass_matches_quadrature() {
        let profiles = [
            LoSProfile::Linear3gpp { d_los: 0.3 },
            LoSProfile::PureLos,
            LoSProfile::Custom {
                knots: vec![(0.1, 0.9), (0.4, 0.35), (1.0, 0.1)],
            },
        ];
        for profile in &profiles {
            for &x in &[0.05, 0.2, 0.3, 0.7, 2.5] {
                let q = crate::quad::integrate(
                    |u| profile.los_probability(u) * 2.0 * std::f64::consts::PI * u,
                    0.0,
                    x,
                    crate::quad::Tolerance::new(1e-12, 1e-15),
                )
                .unwrap();
                assert_relative_eq!(profile.disc_los_mass(x), q.value, max_relative = 1e-9, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn custom_profile_interpolates_and_clamps() {
        let p = LoSProfile::Custom {
            knots: vec![(0.1, 0.8), (0.3, 0.2)],
        };
        assert_eq!(p.los_probability(0.0), 0.8);
        assert_relative_eq!(p.los_probability(0.2), 0.5, max_relative = 1e-12);
        assert_eq!(p.los_probability(5.0), 0.2);
    }

    proptest! {
        #[test]
        fn probability_in_unit_interval(r in 0.0f64..3.0, d in 0.01f64..1.0) {
            let p = LoSProfile::Linear3gpp { d_los: d };
            let v = p.los_probability(r);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn linear_profile_nonincreasing(r1 in 0.0f64..3.0, r2 in 0.0f64..3.0) {
            let p = LoSProfile::Linear3gpp { d_los: 0.3 };
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(p.los_probability(lo) >= p.los_probability(hi));
        }
    }
}
