//! Two-slope LoS/NLoS path loss and the derived association constants.
//!
//! Units: distances in km, powers in linear mW, path gains dimensionless
//! (evaluated at a 1 km reference distance).

use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::profile::LoSProfile;

/// Network tier: macro or small-cell base stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Mbs,
    Scb,
}

/// Propagation environment: two-slope path loss plus per-tier LoS profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationModel {
    /// Linear path gain at 1 km, LoS slope.
    pub l_los: f64,
    /// Linear path gain at 1 km, NLoS slope.
    pub l_nlos: f64,
    /// LoS path loss exponent.
    pub alpha_los: f64,
    /// NLoS path loss exponent.
    pub alpha_nlos: f64,
    pub los_profile_mbs: LoSProfile,
    pub los_profile_scb: LoSProfile,
}

impl PropagationModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("L_los", self.l_los),
            ("L_nlos", self.l_nlos),
            ("alpha_los", self.alpha_los),
            ("alpha_nlos", self.alpha_nlos),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        self.los_profile_mbs.validate()?;
        self.los_profile_scb.validate()?;
        Ok(())
    }

    pub fn profile(&self, tier: Tier) -> &LoSProfile {
        match tier {
            Tier::Mbs => &self.los_profile_mbs,
            Tier::Scb => &self.los_profile_scb,
        }
    }

    /// LoS probability of a link of length `r` to a BS of the given tier.
    pub fn los_probability(&self, tier: Tier, r: f64) -> f64 {
        self.profile(tier).los_probability(r)
    }

    /// Two-slope path gain `L r^{-alpha}` for the realized branch.
    ///
    /// Errors on `r = 0` where the model is singular.
    pub fn path_loss(&self, r: f64, los: bool) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::numerical(format!(
                "path loss undefined at r = {r}; the power-law model is singular at the origin"
            )));
        }
        Ok(self.path_loss_unchecked(r, los))
    }

    #[inline]
    pub(crate) fn path_loss_unchecked(&self, r: f64, los: bool) -> f64 {
        if los {
            self.l_los * r.powf(-self.alpha_los)
        } else {
            self.l_nlos * r.powf(-self.alpha_nlos)
        }
    }

    /// Average biased received power (mW) from a BS of `tier` at distance `r`.
    ///
    /// MBS power is unbiased; SCB power carries the cell range expansion
    /// factor `B`, so only the product `B * P_s` matters.
    pub fn biased_received_power(
        &self,
        config: &NetworkConfig,
        tier: Tier,
        r: f64,
        los: bool,
    ) -> Result<f64> {
        let gain = self.path_loss(r, los)?;
        Ok(match tier {
            Tier::Mbs => config.p_m_mw * gain,
            Tier::Scb => config.bias * config.p_s_mw * gain,
        })
    }
}

/// The four Theorem-1 constants plus the exponent ratios, precomputed once
/// per (model, config) so repeated `powf` calls cannot drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// `alpha_los / alpha_nlos`.
    pub exp_ratio: f64,
    /// `alpha_nlos / alpha_los`.
    pub exp_ratio_inv: f64,
}

/// `k1 = (L_nl/L_l)^{1/a_nl}`, `k2 = (B P_s/P_m)^{1/a_l}`,
/// `k3 = (B P_s/P_m)^{1/a_nl}`, `k4 = (L_l/L_nl)^{1/a_l}`.
pub fn derived_constants(model: &PropagationModel, config: &NetworkConfig) -> DerivedConstants {
    let power_ratio = config.bias * config.p_s_mw / config.p_m_mw;
    let gain_ratio = model.l_nlos / model.l_los;
    DerivedConstants {
        k1: gain_ratio.powf(1.0 / model.alpha_nlos),
        k2: power_ratio.powf(1.0 / model.alpha_los),
        k3: power_ratio.powf(1.0 / model.alpha_nlos),
        k4: gain_ratio.recip().powf(1.0 / model.alpha_los),
        exp_ratio: model.alpha_los / model.alpha_nlos,
        exp_ratio_inv: model.alpha_nlos / model.alpha_los,
    }
}

/// The 3GPP parameterization used throughout the numerical studies:
/// `d_los = 0.3 km`, `L_los = 10^-10.38`, `L_nlos = 10^-14.54`,
/// `alpha_los = 2.09`, `alpha_nlos = 3.75`.
pub fn default_3gpp_model() -> PropagationModel {
    PropagationModel {
        l_los: 10f64.powf(-10.38),
        l_nlos: 10f64.powf(-14.54),
        alpha_los: 2.09,
        alpha_nlos: 3.75,
        los_profile_mbs: LoSProfile::Linear3gpp { d_los: 0.3 },
        los_profile_scb: LoSProfile::Linear3gpp { d_los: 0.3 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NetworkConfig;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn paper_config() -> NetworkConfig {
        NetworkConfig::paper_defaults()
    }

    #[test]
    fn reference_distance_gains() {
        let m = default_3gpp_model();
        assert_relative_eq!(m.path_loss(1.0, true).unwrap(), 10f64.powf(-10.38), max_relative = 1e-14);
        assert_relative_eq!(m.path_loss(1.0, false).unwrap(), 10f64.powf(-14.54), max_relative = 1e-14);
    }

    #[test]
    fn inverse_square_at_alpha_two() {
        let mut m = default_3gpp_model();
        m.alpha_los = 2.0;
        let l = m.l_los;
        assert_relative_eq!(m.path_loss(2.0, true).unwrap(), l / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_distance_is_an_error() {
        let m = default_3gpp_model();
        assert!(m.path_loss(0.0, true).is_err());
        assert!(m.biased_received_power(&paper_config(), Tier::Scb, 0.0, false).is_err());
    }

    #[test]
    fn k_constants_paper_defaults() {
        let m = default_3gpp_model();
        let mut c = paper_config();
        c.bias = 1.0;
        let k = derived_constants(&m, &c);
        // (B P_s / P_m)^{1/2.09} with P_m = 53 dBm, P_s = 33 dBm.
        assert_relative_eq!(k.k2, 0.01f64.powf(1.0 / 2.09), max_relative = 1e-13);
        assert_relative_eq!(k.k2, 0.1104, max_relative = 1e-3);
    }

    #[test]
    fn k_constants_collapse_cases() {
        let mut m = default_3gpp_model();
        m.l_nlos = m.l_los;
        let c = paper_config();
        let k = derived_constants(&m, &c);
        assert_relative_eq!(k.k1, 1.0, max_relative = 1e-14);
        assert_relative_eq!(k.k4, 1.0, max_relative = 1e-14);

        let m = default_3gpp_model();
        let mut c = paper_config();
        c.bias = c.p_m_mw / c.p_s_mw;
        let k = derived_constants(&m, &c);
        assert_relative_eq!(k.k2, 1.0, max_relative = 1e-12);
        assert_relative_eq!(k.k3, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn k4_is_inverse_power_of_k1() {
        let m = default_3gpp_model();
        let k = derived_constants(&m, &paper_config());
        assert_relative_eq!(k.k4, k.k1.powf(-k.exp_ratio_inv), max_relative = 1e-12);
    }

    #[test]
    fn mbs_reference_power() {
        let m = default_3gpp_model();
        let c = paper_config();
        let p = m.biased_received_power(&c, Tier::Mbs, 1.0, true).unwrap();
        assert_relative_eq!(p, c.p_m_mw * m.l_los, max_relative = 1e-14);
    }

    #[test]
    fn scb_power_depends_only_on_bias_power_product() {
        let m = default_3gpp_model();
        let mut a = paper_config();
        a.bias = 2.0;
        let mut b = paper_config();
        b.bias = 4.0;
        b.p_s_mw = a.p_s_mw / 2.0;
        for (r, los) in [(0.1, false), (0.25, true), (2.0, false)] {
            let pa = m.biased_received_power(&a, Tier::Scb, r, los).unwrap();
            let pb = m.biased_received_power(&b, Tier::Scb, r, los).unwrap();
            assert_relative_eq!(pa, pb, max_relative = 1e-12);
        }
    }

    #[test]
    fn scb_nlos_short_range_value() {
        // B = 1: P_s * L_nlos * 0.1^{-3.75} = P_s * L_nlos * 10^{3.75}
        let m = default_3gpp_model();
        let mut c = paper_config();
        c.bias = 1.0;
        let p = m.biased_received_power(&c, Tier::Scb, 0.1, false).unwrap();
        assert_relative_eq!(p, c.p_s_mw * m.l_nlos * 10f64.powf(3.75), max_relative = 1e-12);
    }

    #[test]
    fn bias_doubles_scb_power_exactly() {
        let m = default_3gpp_model();
        let mut c1 = paper_config();
        c1.bias = 1.0;
        let mut c2 = paper_config();
        c2.bias = 2.0;
        let p1 = m.biased_received_power(&c1, Tier::Scb, 0.4, true).unwrap();
        let p2 = m.biased_received_power(&c2, Tier::Scb, 0.4, true).unwrap();
        assert_relative_eq!(p2 / p1, 2.0, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn path_loss_strictly_decreasing(r1 in 1e-3f64..10.0, r2 in 1e-3f64..10.0, los in any::<bool>()) {
            prop_assume!(r1 != r2);
            let m = default_3gpp_model();
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(m.path_loss(lo, los).unwrap() > m.path_loss(hi, los).unwrap());
        }
    }
}
