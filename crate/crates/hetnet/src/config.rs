//! Network configuration: densities, antennas, powers, pilots, and the flat
//! `key = value` config file format.
//!
//! Powers enter the file in dBm and are converted to linear mW here, once,
//! so that every downstream computation works in a single unit system
//! (km, mW, dimensionless gains).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::LoSProfile;
use crate::propagation::PropagationModel;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Density prefactor used for the `xi_2` constant; the as-written form uses
/// `lambda_m` for both tiers, the alternative uses `lambda_s` for the SCB
/// tier as a sensitivity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Xi2Density {
    #[default]
    AsWritten,
    LambdaS,
}

/// Deployment and transmission parameters for the two-tier network.
///
/// dBm-valued inputs keep their original value (for lossless config
/// round-trips) alongside the derived linear mW used by all computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// MBS density, BS/km^2.
    pub lambda_m: f64,
    /// SCB density, BS/km^2 (may be 0: no small cells).
    pub lambda_s: f64,
    /// User density, users/km^2 (Monte Carlo only).
    pub lambda_u: f64,
    /// MBS antennas. Real-valued so the antenna-split study can evaluate
    /// fractional splits analytically; the simulator requires an integer.
    pub m_m: f64,
    /// SCB antennas.
    pub m_s: f64,
    /// Users scheduled per macro cell.
    pub n_users: u32,
    /// SCB association bias factor.
    pub bias: f64,
    /// Pilot length in symbols, `tau >= N`.
    pub tau: u32,
    pub p_m_dbm: f64,
    pub p_s_dbm: f64,
    pub p_p_dbm: f64,
    pub sigma2_dbm: f64,
    /// Linear transmit power of each MBS, mW.
    pub p_m_mw: f64,
    /// Linear transmit power of each SCB, mW.
    pub p_s_mw: f64,
    /// Linear pilot power, mW.
    pub p_p_mw: f64,
    /// Linear noise power, mW.
    pub sigma2_mw: f64,
}

impl NetworkConfig {
    /// The numerical-study defaults: `P_m = 53 dBm`, `P_s = 33 dBm`,
    /// `p_p = 24 dBm`, `sigma^2 = -104 dBm`, `lambda_m = 1`, plus the
    /// baseline `lambda_s = 10`, `M_m = 20`, `M_s = 5`, `N = 10`, `B = 1`.
    pub fn paper_defaults() -> Self {
        let mut cfg = Self {
            lambda_m: 1.0,
            lambda_s: 10.0,
            lambda_u: 1000.0,
            m_m: 20.0,
            m_s: 5.0,
            n_users: 10,
            bias: 1.0,
            tau: 10,
            p_m_dbm: 53.0,
            p_s_dbm: 33.0,
            p_p_dbm: 24.0,
            sigma2_dbm: -104.0,
            p_m_mw: 0.0,
            p_s_mw: 0.0,
            p_p_mw: 0.0,
            sigma2_mw: 0.0,
        };
        cfg.refresh_linear();
        cfg
    }

    fn refresh_linear(&mut self) {
        self.p_m_mw = dbm_to_mw(self.p_m_dbm);
        self.p_s_mw = dbm_to_mw(self.p_s_dbm);
        self.p_p_mw = dbm_to_mw(self.p_p_dbm);
        self.sigma2_mw = dbm_to_mw(self.sigma2_dbm);
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_m", self.lambda_m),
            ("lambda_u", self.lambda_u),
            ("B", self.bias),
            ("P_m_dBm (linear)", self.p_m_mw),
            ("P_s_dBm (linear)", self.p_s_mw),
            ("p_p_dBm (linear)", self.p_p_mw),
            ("sigma2_dBm (linear)", self.sigma2_mw),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if !(self.lambda_s >= 0.0 && self.lambda_s.is_finite()) {
            return Err(Error::config(format!("lambda_s must be nonnegative, got {}", self.lambda_s)));
        }
        if !(self.m_m >= 1.0 && self.m_m.is_finite()) {
            return Err(Error::config(format!("M_m must be >= 1, got {}", self.m_m)));
        }
        if !(self.m_s >= 1.0 && self.m_s.is_finite()) {
            return Err(Error::config(format!("M_s must be >= 1, got {}", self.m_s)));
        }
        if self.n_users < 1 {
            return Err(Error::config("N must be >= 1"));
        }
        if (self.tau as f64) < self.n_users as f64 {
            return Err(Error::config(format!(
                "tau = {} violates tau >= N (orthogonal pilots of length tau for N = {} users)",
                self.tau, self.n_users
            )));
        }
        Ok(())
    }

    /// `sigma^2 / (tau p_p)`: the (dimensionless) noise term of the MMSE
    /// estimator denominator.
    pub fn pilot_noise_term(&self) -> f64 {
        self.sigma2_mw / (self.tau as f64 * self.p_p_mw)
    }
}

/// How the per-branch mean serving gains `nu_1..nu_4` are evaluated.
///
/// The arithmetic moment `E[L R^-a]` diverges at small distances whenever
/// the exponent reaches 2, so it cannot be evaluated literally at the
/// 3GPP exponents. The contamination proxy uses `nu` inside a reciprocal
/// (an MMSE denominator), so the consistent regularization matches the
/// harmonic moment: `nu = 1/E[1/(phi + chi + sigma^2/(tau p_p))] - chi -
/// sigma^2/(tau p_p)`, which is finite for every exponent. A unity-gain
/// cap and the literal moment are kept for sensitivity checks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum NuMode {
    #[default]
    Harmonic,
    /// `E[min(cap, L R^-a)]`.
    GainCap(f64),
    /// `E[L R^-a]` as printed; errors at exponents >= 2.
    Literal,
}

/// Analysis knobs that are not part of the physical parameter set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub xi2_density: Xi2Density,
    pub nu_mode: NuMode,
}

/// Everything a config file defines.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub network: NetworkConfig,
    pub model: PropagationModel,
    pub analysis: AnalysisOptions,
}

const REQUIRED_KEYS: [&str; 17] = [
    "lambda_m",
    "lambda_s",
    "lambda_u",
    "M_m",
    "M_s",
    "N",
    "P_m_dBm",
    "P_s_dBm",
    "B",
    "tau",
    "p_p_dBm",
    "sigma2_dBm",
    "d_los_km",
    "L_los_dB",
    "L_nlos_dB",
    "alpha_los",
    "alpha_nlos",
];

const OPTIONAL_KEYS: [&str; 2] = ["xi2_density", "nu_mode"];

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::config(format!("key {key}: cannot parse `{value}` as a number")))
}

fn parse_u32(key: &str, value: &str) -> Result<u32> {
    value
        .parse::<u32>()
        .map_err(|_| Error::config(format!("key {key}: cannot parse `{value}` as a nonnegative integer")))
}

fn parse_nu_mode(value: &str) -> Result<NuMode> {
    if value == "harmonic" {
        return Ok(NuMode::Harmonic);
    }
    if value == "literal" {
        return Ok(NuMode::Literal);
    }
    if let Some(cap) = value.strip_prefix("cap:") {
        let cap = parse_f64("nu_mode", cap)?;
        if !(cap > 0.0) {
            return Err(Error::config("nu_mode cap must be positive"));
        }
        return Ok(NuMode::GainCap(cap));
    }
    Err(Error::config(format!(
        "nu_mode must be `harmonic`, `literal`, or `cap:<gain>`, got `{value}`"
    )))
}

/// Parse the flat `key = value` config format (`#` comments, one pair per
/// line, exactly the documented keys).
pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    for (line_no, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, got `{line}`", line_no + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if !REQUIRED_KEYS.contains(&key) && !OPTIONAL_KEYS.contains(&key) {
            return Err(Error::config(format!("line {}: unknown key `{key}`", line_no + 1)));
        }
        if seen.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::config(format!("duplicate key `{key}`")));
        }
    }

    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !seen.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(Error::config(format!("missing keys: {}", missing.join(", "))));
    }

    let get = |k: &str| seen.get(k).unwrap().as_str();

    let mut network = NetworkConfig {
        lambda_m: parse_f64("lambda_m", get("lambda_m"))?,
        lambda_s: parse_f64("lambda_s", get("lambda_s"))?,
        lambda_u: parse_f64("lambda_u", get("lambda_u"))?,
        m_m: parse_f64("M_m", get("M_m"))?,
        m_s: parse_f64("M_s", get("M_s"))?,
        n_users: parse_u32("N", get("N"))?,
        bias: parse_f64("B", get("B"))?,
        tau: parse_u32("tau", get("tau"))?,
        p_m_dbm: parse_f64("P_m_dBm", get("P_m_dBm"))?,
        p_s_dbm: parse_f64("P_s_dBm", get("P_s_dBm"))?,
        p_p_dbm: parse_f64("p_p_dBm", get("p_p_dBm"))?,
        sigma2_dbm: parse_f64("sigma2_dBm", get("sigma2_dBm"))?,
        p_m_mw: 0.0,
        p_s_mw: 0.0,
        p_p_mw: 0.0,
        sigma2_mw: 0.0,
    };
    network.refresh_linear();
    network.validate()?;

    let d_los = parse_f64("d_los_km", get("d_los_km"))?;
    let model = PropagationModel {
        l_los: db_to_linear(parse_f64("L_los_dB", get("L_los_dB"))?),
        l_nlos: db_to_linear(parse_f64("L_nlos_dB", get("L_nlos_dB"))?),
        alpha_los: parse_f64("alpha_los", get("alpha_los"))?,
        alpha_nlos: parse_f64("alpha_nlos", get("alpha_nlos"))?,
        los_profile_mbs: LoSProfile::Linear3gpp { d_los },
        los_profile_scb: LoSProfile::Linear3gpp { d_los },
    };
    model.validate()?;

    let mut analysis = AnalysisOptions::default();
    if let Some(v) = seen.get("xi2_density") {
        analysis.xi2_density = match v.as_str() {
            "as_written" => Xi2Density::AsWritten,
            "lambda_s" => Xi2Density::LambdaS,
            other => {
                return Err(Error::config(format!(
                    "xi2_density must be `as_written` or `lambda_s`, got `{other}`"
                )))
            }
        };
    }
    if let Some(v) = seen.get("nu_mode") {
        analysis.nu_mode = parse_nu_mode(v)?;
    }

    Ok(ParsedConfig {
        network,
        model,
        analysis,
    })
}

/// Parse a config file from disk.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config_str(&text)
}

/// Render a config back to the flat text format (lossless for values that
/// came from text, shortest round-trip float formatting otherwise).
pub fn config_to_text(cfg: &ParsedConfig) -> String {
    let d_los = match &cfg.model.los_profile_mbs {
        LoSProfile::Linear3gpp { d_los } => *d_los,
        // Only the linear profile is representable in the file format.
        _ => f64::NAN,
    };
    let mut s = String::new();
    let mut kv = |k: &str, v: f64| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("lambda_m", cfg.network.lambda_m);
    kv("lambda_s", cfg.network.lambda_s);
    kv("lambda_u", cfg.network.lambda_u);
    kv("M_m", cfg.network.m_m);
    kv("M_s", cfg.network.m_s);
    kv("N", cfg.network.n_users as f64);
    kv("P_m_dBm", cfg.network.p_m_dbm);
    kv("P_s_dBm", cfg.network.p_s_dbm);
    kv("B", cfg.network.bias);
    kv("tau", cfg.network.tau as f64);
    kv("p_p_dBm", cfg.network.p_p_dbm);
    kv("sigma2_dBm", cfg.network.sigma2_dbm);
    kv("d_los_km", d_los);
    kv("L_los_dB", 10.0 * cfg.model.l_los.log10());
    kv("L_nlos_dB", 10.0 * cfg.model.l_nlos.log10());
    kv("alpha_los", cfg.model.alpha_los);
    kv("alpha_nlos", cfg.model.alpha_nlos);
    if cfg.analysis.xi2_density == Xi2Density::LambdaS {
        let _ = writeln!(s, "xi2_density = lambda_s");
    }
    match cfg.analysis.nu_mode {
        NuMode::Harmonic => {}
        NuMode::Literal => {
            let _ = writeln!(s, "nu_mode = literal");
        }
        NuMode::GainCap(cap) => {
            let _ = writeln!(s, "nu_mode = cap:{cap}");
        }
    }
    s
}

/// Apply one `key=value` override (the CLI `--set` mechanism and the sweep
/// engine both route through here).
pub fn apply_set(cfg: &mut ParsedConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "lambda_m" => cfg.network.lambda_m = parse_f64(key, value)?,
        "lambda_s" => cfg.network.lambda_s = parse_f64(key, value)?,
        "lambda_u" => cfg.network.lambda_u = parse_f64(key, value)?,
        "M_m" => cfg.network.m_m = parse_f64(key, value)?,
        "M_s" => cfg.network.m_s = parse_f64(key, value)?,
        "N" => cfg.network.n_users = parse_u32(key, value)?,
        "B" => cfg.network.bias = parse_f64(key, value)?,
        "tau" => cfg.network.tau = parse_u32(key, value)?,
        "P_m_dBm" => cfg.network.p_m_dbm = parse_f64(key, value)?,
        "P_s_dBm" => cfg.network.p_s_dbm = parse_f64(key, value)?,
        "p_p_dBm" => cfg.network.p_p_dbm = parse_f64(key, value)?,
        "sigma2_dBm" => cfg.network.sigma2_dbm = parse_f64(key, value)?,
        "d_los_km" => {
            let d = parse_f64(key, value)?;
            cfg.model.los_profile_mbs = LoSProfile::Linear3gpp { d_los: d };
            cfg.model.los_profile_scb = LoSProfile::Linear3gpp { d_los: d };
        }
        "L_los_dB" => cfg.model.l_los = db_to_linear(parse_f64(key, value)?),
        "L_nlos_dB" => cfg.model.l_nlos = db_to_linear(parse_f64(key, value)?),
        "alpha_los" => cfg.model.alpha_los = parse_f64(key, value)?,
        "alpha_nlos" => cfg.model.alpha_nlos = parse_f64(key, value)?,
        "nu_mode" => cfg.analysis.nu_mode = parse_nu_mode(value)?,
        "xi2_density" => {
            cfg.analysis.xi2_density = match value {
                "as_written" => Xi2Density::AsWritten,
                "lambda_s" => Xi2Density::LambdaS,
                other => return Err(Error::config(format!("xi2_density: unknown value `{other}`"))),
            }
        }
        other => return Err(Error::config(format!("unknown key `{other}`"))),
    }
    let mut net = cfg.network.clone();
    net.refresh_linear();
    cfg.network = net;
    cfg.network.validate()?;
    cfg.model.validate()?;
    Ok(())
}

/// Parse a comma-separated `k=v,k=v` override list.
pub fn apply_set_list(cfg: &mut ParsedConfig, sets: &str) -> Result<()> {
    for pair in sets.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects k=v pairs, got `{pair}`")))?;
        apply_set(cfg, k.trim(), v.trim())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const PAPER_CFG: &str = include_str!("../../../paper.cfg");

    #[test]
    fn paper_config_parses_to_linear_mw() {
        let parsed = parse_config_str(PAPER_CFG).unwrap();
        assert_relative_eq!(parsed.network.p_m_mw, 10f64.powf(5.3), max_relative = 1e-12);
        assert_relative_eq!(parsed.network.p_m_mw, 1.995e5, max_relative = 1e-3);
        assert_relative_eq!(parsed.model.l_los, 10f64.powf(-10.38), max_relative = 1e-12);
        assert_relative_eq!(parsed.model.l_nlos, 10f64.powf(-14.54), max_relative = 1e-12);
        assert_eq!(parsed.analysis, AnalysisOptions::default());
    }

    #[test]
    fn tau_less_than_n_rejected() {
        let text = PAPER_CFG.replace("tau = 10", "tau = 7");
        let err = parse_config_str(&text).unwrap_err();
        assert!(err.to_string().contains("tau >= N"), "{err}");
    }

    #[test]
    fn empty_file_lists_all_missing_keys() {
        let err = parse_config_str("").unwrap_err();
        let msg = err.to_string();
        for key in REQUIRED_KEYS {
            assert!(msg.contains(key), "missing {key} in `{msg}`");
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{PAPER_CFG}\nbogus_key = 3\n");
        let err = parse_config_str(&text).unwrap_err();
        assert!(err.to_string().contains("bogus_key"));
    }

    #[test]
    fn round_trip_is_lossless() {
        let parsed = parse_config_str(PAPER_CFG).unwrap();
        let text = config_to_text(&parsed);
        let reparsed = parse_config_str(&text).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn set_overrides_and_revalidates() {
        let mut parsed = parse_config_str(PAPER_CFG).unwrap();
        apply_set_list(&mut parsed, "lambda_s=3,M_m=100").unwrap();
        assert_eq!(parsed.network.lambda_s, 3.0);
        assert_eq!(parsed.network.m_m, 100.0);
        assert!(apply_set(&mut parsed, "N", "40").is_err()); // tau = 10 < 40
    }

    #[test]
    fn paper_defaults_match_shipped_config() {
        let parsed = parse_config_str(PAPER_CFG).unwrap();
        assert_eq!(parsed.network, NetworkConfig::paper_defaults());
    }
}
