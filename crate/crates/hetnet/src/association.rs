//! User-association probabilities, mean per-BS loads, and serving-distance
//! densities for the two-tier LoS/NLoS network.
//!
//! Everything here reduces to void probabilities of the four thinned PPPs
//! (LoS/NLoS MBS, LoS/NLoS SCB). The `zeta` kernels are those void
//! probabilities; the branch association probabilities integrate them
//! against the nearest-point density of the candidate branch, and the
//! serving-distance pdfs are the same integrands normalized by the branch
//! probability.

use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::propagation::{derived_constants, DerivedConstants, PropagationModel};
use crate::quad::{self, Quad, Tolerance};

/// Association branch of the typical user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    MbsLos,
    MbsNlos,
    ScbLos,
    ScbNlos,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::MbsLos, Branch::MbsNlos, Branch::ScbLos, Branch::ScbNlos];

    pub fn label(self) -> &'static str {
        match self {
            Branch::MbsLos => "mbs_los",
            Branch::MbsNlos => "mbs_nlos",
            Branch::ScbLos => "scb_los",
            Branch::ScbNlos => "scb_nlos",
        }
    }

    pub fn is_mbs(self) -> bool {
        matches!(self, Branch::MbsLos | Branch::MbsNlos)
    }

    pub fn is_los(self) -> bool {
        matches!(self, Branch::MbsLos | Branch::ScbLos)
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Void probability of the MBS process outside the LoS/NLoS exclusion radii.
///
/// `zeta_1(x1, x2) = exp(-lambda_m [int_0^x1 p_m(u) 2 pi u du
///                        + int_0^x2 (1 - p_m(u)) 2 pi u du])`
pub fn zeta1(x1: f64, x2: f64, model: &PropagationModel, config: &NetworkConfig) -> f64 {
    let p = &model.los_profile_mbs;
    (-config.lambda_m * (p.disc_los_mass(x1) + p.disc_nlos_mass(x2))).exp()
}

/// Void probability of the SCB process; mirrors `zeta1` with `lambda_s`.
pub fn zeta2(x1: f64, x2: f64, model: &PropagationModel, config: &NetworkConfig) -> f64 {
    let p = &model.los_profile_scb;
    (-config.lambda_s * (p.disc_los_mass(x1) + p.disc_nlos_mass(x2))).exp()
}

/// The four association probabilities, tier totals, and mean loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub a_m_los: f64,
    pub a_m_nlos: f64,
    pub a_s_los: f64,
    pub a_s_nlos: f64,
    pub a_m: f64,
    pub a_s: f64,
    /// Mean users per MBS, `A_m * N`.
    pub n_m: f64,
    /// Mean users per SCB, `A_s * lambda_m * N / lambda_s`; absent when
    /// `lambda_s = 0`.
    pub n_s: Option<f64>,
    /// Summed quadrature error estimate across the four branch integrals.
    pub quad_error: f64,
}

impl AssociationReport {
    pub fn branch(&self, b: Branch) -> f64 {
        match b {
            Branch::MbsLos => self.a_m_los,
            Branch::MbsNlos => self.a_m_nlos,
            Branch::ScbLos => self.a_s_los,
            Branch::ScbNlos => self.a_s_nlos,
        }
    }
}

/// Precomputed evaluation context shared by association and rate analysis.
pub(crate) struct AssocCtx<'a> {
    pub model: &'a PropagationModel,
    pub config: &'a NetworkConfig,
    pub k: DerivedConstants,
}

impl<'a> AssocCtx<'a> {
    pub fn new(model: &'a PropagationModel, config: &'a NetworkConfig) -> Self {
        Self {
            model,
            config,
            k: derived_constants(model, config),
        }
    }

    /// Exclusion radii `[zeta1.x1, zeta1.x2, zeta2.x1, zeta2.x2]` for the
    /// event that a BS of `branch` at distance `r` wins the biased-power
    /// association. Shared verbatim with the rate kernel `Xi`.
    pub fn exclusion_radii(&self, branch: Branch, r: f64) -> [f64; 4] {
        let k = &self.k;
        match branch {
            Branch::MbsLos => {
                let rq = r.powf(k.exp_ratio);
                [r, k.k1 * rq, k.k2 * r, k.k1 * k.k3 * rq]
            }
            Branch::MbsNlos => {
                let rq = r.powf(k.exp_ratio_inv);
                [k.k4 * rq, r, k.k2 * k.k4 * rq, k.k3 * r]
            }
            Branch::ScbLos => {
                let rq = r.powf(k.exp_ratio);
                [r / k.k2, k.k1 / k.k3 * rq, r, k.k1 * rq]
            }
            Branch::ScbNlos => {
                let rq = r.powf(k.exp_ratio_inv);
                [k.k4 / k.k2 * rq, r / k.k3, k.k4 * rq, r]
            }
        }
    }

    /// Unnormalized serving-distance integrand: `A_branch * f_branch(r)`.
    pub fn branch_weight(&self, branch: Branch, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let [x1, x2, x3, x4] = self.exclusion_radii(branch, r);
        let z1 = zeta1(x1, x2, self.model, self.config);
        let z2 = zeta2(x3, x4, self.model, self.config);
        let (lambda, p_los) = if branch.is_mbs() {
            (self.config.lambda_m, self.model.los_probability(crate::propagation::Tier::Mbs, r))
        } else {
            (self.config.lambda_s, self.model.los_probability(crate::propagation::Tier::Scb, r))
        };
        let density = if branch.is_los() { p_los } else { 1.0 - p_los };
        2.0 * std::f64::consts::PI * lambda * r * density * z1 * z2
    }

    /// Integrate `g(r) * branch_weight(r)` over the branch support.
    pub fn weighted_integral(
        &self,
        branch: Branch,
        tol: Tolerance,
        g: impl Fn(f64) -> f64,
    ) -> std::result::Result<Quad, quad::QuadError> {
        let f = |r: f64| {
            let w = self.branch_weight(branch, r);
            if w == 0.0 {
                0.0
            } else {
                g(r) * w
            }
        };
        let profile = if branch.is_mbs() {
            &self.model.los_profile_mbs
        } else {
            &self.model.los_profile_scb
        };
        match (branch.is_los(), profile.los_support()) {
            // LoS weight vanishes beyond the profile support.
            (true, Some(d)) => quad::integrate(f, 0.0, d, tol),
            _ => quad::integrate_0_inf(f, tol),
        }
    }

    pub fn branch_probability(&self, branch: Branch, tol: Tolerance) -> std::result::Result<Quad, quad::QuadError> {
        self.weighted_integral(branch, tol, |_| 1.0)
    }
}

/// Theorem-1 association probabilities by adaptive quadrature.
///
/// The four probabilities must sum to one; a violation beyond `1e-4` is
/// reported as an error (it indicates a quadrature failure, never noise),
/// and the result is not renormalized.
pub fn association_probabilities(model: &PropagationModel, config: &NetworkConfig) -> Result<AssociationReport> {
    association_probabilities_with_tol(model, config, Tolerance::new(1e-8, 1e-12))
}

pub fn association_probabilities_with_tol(
    model: &PropagationModel,
    config: &NetworkConfig,
    tol: Tolerance,
) -> Result<AssociationReport> {
    config.validate()?;
    model.validate()?;
    let ctx = AssocCtx::new(model, config);
    let mut probs = [0.0f64; 4];
    let mut err_sum = 0.0;
    for (i, branch) in Branch::ALL.into_iter().enumerate() {
        let q = ctx.branch_probability(branch, tol)?;
        probs[i] = q.value;
        err_sum += q.error;
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-4 {
        return Err(Error::numerical(format!(
            "association probabilities sum to {sum:.8}, expected 1 within 1e-4 (quadrature bug or pathological profile)"
        )));
    }
    let a_m = probs[0] + probs[1];
    let a_s = probs[2] + probs[3];
    let (n_m, n_s) = loads(a_m, a_s, config);
    Ok(AssociationReport {
        a_m_los: probs[0],
        a_m_nlos: probs[1],
        a_s_los: probs[2],
        a_s_nlos: probs[3],
        a_m,
        a_s,
        n_m,
        n_s,
        quad_error: err_sum,
    })
}

fn loads(a_m: f64, a_s: f64, config: &NetworkConfig) -> (f64, Option<f64>) {
    let n_m = a_m * config.n_users as f64;
    let n_s = if config.lambda_s > 0.0 {
        Some(a_s * config.lambda_m * config.n_users as f64 / config.lambda_s)
    } else {
        None
    };
    (n_m, n_s)
}

/// Corollary-1 mean loads: `N_m = A_m N`, `N_s = A_s lambda_m N / lambda_s`.
pub fn mean_loads(report: &AssociationReport, config: &NetworkConfig) -> (f64, Option<f64>) {
    loads(report.a_m, report.a_s, config)
}

/// Theorem-2 serving-distance density for one association branch.
///
/// The normalizer (the branch probability) is computed once at
/// construction; evaluation afterwards is pure and thread-safe.
#[derive(Debug)]
pub struct ServingDistanceDensity {
    branch: Branch,
    model: PropagationModel,
    config: NetworkConfig,
    normalizer: f64,
    tol: Tolerance,
}

impl ServingDistanceDensity {
    pub fn new(branch: Branch, model: &PropagationModel, config: &NetworkConfig) -> Result<Self> {
        Self::with_tol(branch, model, config, Tolerance::new(1e-8, 1e-12))
    }

    pub fn with_tol(
        branch: Branch,
        model: &PropagationModel,
        config: &NetworkConfig,
        tol: Tolerance,
    ) -> Result<Self> {
        let ctx = AssocCtx::new(model, config);
        let prob = ctx.branch_probability(branch, tol)?;
        if prob.value <= 1e-12 {
            return Err(Error::DegenerateBranch(format!(
                "branch {branch} has probability {:.3e}; serving-distance density undefined",
                prob.value
            )));
        }
        Ok(Self {
            branch,
            model: model.clone(),
            config: config.clone(),
            normalizer: prob.value,
            tol,
        })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// The branch probability used as the normalizer.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Density value at `r` (1/km).
    pub fn pdf(&self, r: f64) -> f64 {
        let ctx = AssocCtx::new(&self.model, &self.config);
        ctx.branch_weight(self.branch, r) / self.normalizer
    }

    /// CDF at `r` by quadrature of the pdf.
    pub fn cdf(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        let ctx = AssocCtx::new(&self.model, &self.config);
        let q = quad::integrate(|u| ctx.branch_weight(self.branch, u), 0.0, r, self.tol)?;
        Ok((q.value / self.normalizer).clamp(0.0, 1.0))
    }
}

/// `int g(r) f_branch(r) dr` with the Theorem-2 density, by adaptive
/// quadrature. Errors when the branch is degenerate or the integral does
/// not converge (e.g. a divergent moment).
pub fn conditional_moment(
    branch: Branch,
    g: impl Fn(f64) -> f64,
    model: &PropagationModel,
    config: &NetworkConfig,
    tol: Tolerance,
) -> Result<Quad> {
    let ctx = AssocCtx::new(model, config);
    let prob = ctx.branch_probability(branch, tol)?;
    if prob.value <= 1e-12 {
        return Err(Error::DegenerateBranch(format!("branch {branch} has probability ~0")));
    }
    let q = ctx.weighted_integral(branch, tol, g)?;
    Ok(Quad {
        value: q.value / prob.value,
        error: q.error / prob.value,
        subdivisions: q.subdivisions,
    })
}

/// Closed-form single-slope association probability used as an independent
/// oracle: with pure-NLoS profiles on both tiers the network collapses to
/// nearest-BS max-power association on one slope, where
/// `A_m = lambda_m P_m^{2/a} / (lambda_m P_m^{2/a} + lambda_s (B P_s)^{2/a})`.
pub fn single_slope_mbs_probability(config: &NetworkConfig, alpha: f64) -> f64 {
    let wm = config.lambda_m * config.p_m_mw.powf(2.0 / alpha);
    let ws = config.lambda_s * (config.bias * config.p_s_mw).powf(2.0 / alpha);
    wm / (wm + ws)
}
