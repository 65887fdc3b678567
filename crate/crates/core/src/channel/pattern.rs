//! Synthetic feed radiation pattern: uniformly illuminated circular
//! aperture, power pattern G_max·|2 J₁(u)/u|² with u = k_a·sin θ.

use std::sync::OnceLock;

use super::budget::LinkBudget;
use super::geometry::{angle_between, LatLon};
use super::layout::BeamLayout;

/// Aperture efficiency used to derive the peak gain from the aperture size.
pub const DEFAULT_APERTURE_EFFICIENCY: f64 = 0.65;

/// |2 J₁(u)/u|, the normalised amplitude pattern.
pub fn airy_amplitude(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0
    } else {
        (2.0 * libm::j1(u) / u).abs()
    }
}

/// u at which the power pattern drops to one half.
pub fn half_power_u() -> f64 {
    static U: OnceLock<f64> = OnceLock::new();
    *U.get_or_init(|| {
        let f = |u: f64| airy_amplitude(u).powi(2) - 0.5;
        let (mut lo, mut hi) = (0.1, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// First zero of J₁ (first null of the pattern).
pub const FIRST_NULL_U: f64 = 3.831_705_970_207_512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedPattern {
    /// Peak power gain, linear.
    pub peak_gain: f64,
    /// Aperture constant π·D/λ.
    pub k_a: f64,
}

impl FeedPattern {
    /// Pattern whose half-power half-angle is `half_angle_deg`.
    pub fn from_half_power_angle(half_angle_deg: f64, efficiency: f64) -> Self {
        let k_a = half_power_u() / half_angle_deg.to_radians().sin();
        Self {
            peak_gain: efficiency * k_a * k_a,
            k_a,
        }
    }

    /// Amplitude gain a(θ) = √(power gain).
    pub fn amplitude(&self, off_axis_rad: f64) -> f64 {
        self.peak_gain.sqrt() * airy_amplitude(self.k_a * off_axis_rad.sin())
    }

    pub fn gain_db(&self, off_axis_rad: f64) -> f64 {
        20.0 * self.amplitude(off_axis_rad).log10()
    }

    pub fn peak_gain_db(&self) -> f64 {
        10.0 * self.peak_gain.log10()
    }

    pub fn first_null_rad(&self) -> f64 {
        (FIRST_NULL_U / self.k_a).asin()
    }
}

/// Amplitude gain a_{kqn} from a feed pointed at `feed_boresight` towards a
/// user at `user`.
pub fn feed_gain(feed_boresight: LatLon, user: LatLon, layout: &BeamLayout, budget: &LinkBudget) -> f64 {
    let sat = budget.satellite();
    let theta = angle_between(&sat.direction_to(feed_boresight), &sat.direction_to(user));
    layout.pattern().amplitude(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_power_point() {
        let u = half_power_u();
        assert!((u - 1.6163).abs() < 1e-3);
        assert!((airy_amplitude(u).powi(2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boresight_is_peak() {
        let p = FeedPattern::from_half_power_angle(0.2, DEFAULT_APERTURE_EFFICIENCY);
        assert_eq!(p.amplitude(0.0), p.peak_gain.sqrt());
        assert!((p.gain_db(0.0) - p.peak_gain_db()).abs() < 1e-12);
    }

    #[test]
    fn first_null_is_zero() {
        let p = FeedPattern::from_half_power_angle(0.25, 1.0);
        assert!(p.amplitude(p.first_null_rad()) < 1e-6 * p.amplitude(0.0));
    }
}
