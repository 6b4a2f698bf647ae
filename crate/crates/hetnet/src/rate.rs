//! Achievable downlink rate approximation under pilot contamination.
//!
//! The rate is a four-branch double integral: for each association branch,
//! the conditional rate at serving distance `r` is a Laplace-transform
//! integral over `z` of the interference functional `Xi` times the signal
//! kernel `Psi`, weighted by the serving-distance law. The supporting
//! constants (`chi`, `xi`, `nu`, effective loads, and the contamination
//! proxy `mu1_tilde`) are integrals against the interfering-user density
//! and the serving-distance densities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{association_probabilities_with_tol, AssocCtx, AssociationReport, Branch};
use crate::config::{AnalysisOptions, NetworkConfig, NuMode, Xi2Density};
use crate::error::{Error, Result};
use crate::profile::LoSProfile;
use crate::propagation::PropagationModel;
use crate::quad::{self, Tolerance};

/// Quadrature tolerances for the rate evaluation. The inner `z` integral
/// runs tighter than the outer `r` integral; `Xi`'s own interference
/// integrals run tighter still.
#[derive(Debug, Clone, Copy)]
pub struct RateTolerances {
    pub outer_r: Tolerance,
    pub inner_z: Tolerance,
    pub xi_inner: Tolerance,
    pub constants: Tolerance,
    pub association: Tolerance,
}

impl Default for RateTolerances {
    fn default() -> Self {
        Self {
            outer_r: Tolerance::new(1e-6, 1e-12),
            inner_z: Tolerance::new(1e-7, 1e-13),
            xi_inner: Tolerance::new(1e-8, 1e-300),
            constants: Tolerance::new(1e-9, 1e-300),
            association: Tolerance::new(1e-8, 1e-12),
        }
    }
}

impl RateTolerances {
    /// Scale every tolerance by `factor` (the CLI `--tolerance` knob).
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            outer_r: self.outer_r.scaled(factor),
            inner_z: self.inner_z.scaled(factor),
            xi_inner: self.xi_inner.scaled(factor),
            constants: self.constants.scaled(factor),
            association: self.association.scaled(factor),
        }
    }
}

/// Intermediate constants of the rate approximation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateConstants {
    /// Mean macro-cell radius `1/sqrt(pi lambda_m)`, km.
    pub c_v: f64,
    /// Mean aggregate path loss from interfering users to an MBS.
    pub chi1: f64,
    /// Same, to an SCB.
    pub chi2: f64,
    /// Mean aggregate squared path loss from interfering MBSs.
    pub xi1: f64,
    /// Same, SCB tier.
    pub xi2: f64,
    /// Mean serving path gain per branch (capped, see `AnalysisOptions`).
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    pub nu4: f64,
    /// Effective load terms.
    pub n_m_eff: f64,
    pub n_s_eff: f64,
    /// Pilot-contamination interference proxy, mW.
    pub mu1_tilde: f64,
    /// `mu1_tilde + sigma^2`, mW.
    pub rho1: f64,
}

/// Rate report: total and per-branch contributions (already weighted by
/// the association probabilities).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    /// Approximate achievable downlink rate, bits/s/Hz.
    pub r_total: f64,
    pub r_m_los: f64,
    pub r_m_nlos: f64,
    pub r_s_los: f64,
    pub r_s_nlos: f64,
    pub constants: RateConstants,
    pub association: AssociationReport,
    /// Summed outer-quadrature error estimates.
    pub quadrature_error: f64,
}

impl RateReport {
    pub fn branch(&self, b: Branch) -> f64 {
        match b {
            Branch::MbsLos => self.r_m_los,
            Branch::MbsNlos => self.r_m_nlos,
            Branch::ScbLos => self.r_s_los,
            Branch::ScbNlos => self.r_s_nlos,
        }
    }
}

/// Density of same-pilot interfering users at distance `r` from a macro BS.
///
/// The raw expression `lambda_m [1 - zeta1(r, k1 r^e) - zeta1(k4 r^1/e, r)]`
/// is negative near the origin where both void probabilities approach one;
/// a density must be nonnegative, so the value is clamped to `[0, lambda_m]`.
/// The clamp is inert for the integrals taken from `C_v` outward at
/// moderate densities.
pub fn interferer_density(r: f64, model: &PropagationModel, config: &NetworkConfig) -> f64 {
    let ctx = AssocCtx::new(model, config);
    interferer_density_ctx(r, &ctx)
}

fn interferer_density_ctx(r: f64, ctx: &AssocCtx<'_>) -> f64 {
    let [x1, x2, _, _] = ctx.exclusion_radii(Branch::MbsLos, r);
    let z_los = crate::association::zeta1(x1, x2, ctx.model, ctx.config);
    let [y1, y2, _, _] = ctx.exclusion_radii(Branch::MbsNlos, r);
    let z_nlos = crate::association::zeta1(y1, y2, ctx.model, ctx.config);
    (ctx.config.lambda_m * (1.0 - z_los - z_nlos)).clamp(0.0, ctx.config.lambda_m)
}

fn require_rate_exponents(model: &PropagationModel) -> Result<()> {
    if model.alpha_los <= 2.0 || model.alpha_nlos <= 2.0 {
        return Err(Error::numerical(format!(
            "rate analysis requires path-loss exponents > 2 (plane-wide interference integrals diverge otherwise); got alpha_los = {}, alpha_nlos = {}",
            model.alpha_los, model.alpha_nlos
        )));
    }
    Ok(())
}

/// `int_x^inf (1 - e^{-c u^{-alpha}}) u du` in closed form via the lower
/// incomplete gamma function (`s = 2/alpha` must satisfy `s < 1`).
fn plane_tail_integral(x: f64, c: f64, alpha: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let s = 2.0 / alpha;
    debug_assert!(s < 1.0);
    let half_cs = 0.5 * c.powf(s);
    let a = 1.0 - s;
    if x <= 0.0 {
        return half_cs * statrs::function::gamma::gamma(a);
    }
    let w0 = c * x.powf(-alpha);
    if !w0.is_finite() || w0 > 500.0 {
        // e^{-w0} underflows; the incomplete gamma saturates.
        return half_cs * (statrs::function::gamma::gamma(a) - w0.powf(-s));
    }
    let lower = statrs::function::gamma::gamma_li(a, w0);
    half_cs * (lower - (-(-w0).exp_m1()) * w0.powf(-s))
}

/// `int_x^inf (1 - e^{-c u^{-alpha}}) p(u) u du` where `p` is the LoS
/// probability (`los = true`) or its complement. Finite profile pieces go
/// through adaptive quadrature; the constant tail is closed form.
fn xi_inner_integral(
    x: f64,
    c: f64,
    alpha: f64,
    profile: &LoSProfile,
    los: bool,
    tol: Tolerance,
) -> Result<f64> {
    if c <= 0.0 {
        return Ok(0.0);
    }
    let (r_tail, p_tail_los) = profile.constant_tail();
    let weight_tail = if los { p_tail_los } else { 1.0 - p_tail_los };
    let mut total = 0.0;
    if weight_tail > 0.0 {
        total += weight_tail * plane_tail_integral(x.max(r_tail), c, alpha);
    }
    if x < r_tail {
        let q = quad::integrate(
            |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                let p = profile.los_probability(u);
                let w = if los { p } else { 1.0 - p };
                if w == 0.0 {
                    return 0.0;
                }
                w * (-(-c * u.powf(-alpha)).exp_m1()) * u
            },
            x,
            r_tail,
            tol,
        )?;
        total += q.value;
    }
    Ok(total)
}

/// Interference Laplace functional `Xi(x1, x2, x3, x4)`: the probability-
/// like factor `E[exp(-z I / rho1)]` of the out-of-cell interference, with
/// per-branch exclusion radii `x1, x2` (MBS LoS/NLoS) and `x3, x4` (SCB).
pub fn xi_kernel(
    z: f64,
    x: [f64; 4],
    model: &PropagationModel,
    config: &NetworkConfig,
    rho1: f64,
) -> Result<f64> {
    xi_kernel_tol(z, x, model, config, rho1, Tolerance::new(1e-8, 1e-300))
}

pub(crate) fn xi_kernel_tol(
    z: f64,
    x: [f64; 4],
    model: &PropagationModel,
    config: &NetworkConfig,
    rho1: f64,
    tol: Tolerance,
) -> Result<f64> {
    if z == 0.0 {
        return Ok(1.0);
    }
    let mut exponent = 0.0;
    // MBS tier.
    if config.lambda_m > 0.0 {
        let c_los = z * config.p_m_mw * model.l_los / rho1;
        let c_nlos = z * config.p_m_mw * model.l_nlos / rho1;
        let i_los = xi_inner_integral(x[0], c_los, model.alpha_los, &model.los_profile_mbs, true, tol)?;
        let i_nlos = xi_inner_integral(x[1], c_nlos, model.alpha_nlos, &model.los_profile_mbs, false, tol)?;
        exponent += 2.0 * std::f64::consts::PI * config.lambda_m * (i_los + i_nlos);
    }
    // SCB tier.
    if config.lambda_s > 0.0 {
        let c_los = z * config.p_s_mw * model.l_los / rho1;
        let c_nlos = z * config.p_s_mw * model.l_nlos / rho1;
        let i_los = xi_inner_integral(x[2], c_los, model.alpha_los, &model.los_profile_scb, true, tol)?;
        let i_nlos = xi_inner_integral(x[3], c_nlos, model.alpha_nlos, &model.los_profile_scb, false, tol)?;
        exponent += 2.0 * std::f64::consts::PI * config.lambda_s * (i_los + i_nlos);
    }
    Ok((-exponent).exp())
}

/// Signal kernel `Psi`: difference of the two exponentials encoding the
/// use-and-forget SINR decomposition. Computed as
/// `exp(-zA) * (1 - exp(-z(B-A)))` with `B - A >= 0`, which is stable for
/// all `z` down to the `z -> 0` limit `z * (B - A)`.
pub fn psi_kernel(
    z: f64,
    p_tx: f64,
    n_eff: f64,
    m_antennas: f64,
    chi: f64,
    serving_gain: f64,
    config: &NetworkConfig,
    rho1: f64,
) -> f64 {
    let (a, gap) = psi_exponents(p_tx, n_eff, m_antennas, chi, serving_gain, config, rho1);
    (-z * a).exp() * (-(-z * gap).exp_m1())
}

/// `(A, B - A)` for `Psi = exp(-zA) - exp(-zB)`.
fn psi_exponents(
    p_tx: f64,
    n_eff: f64,
    m_antennas: f64,
    chi: f64,
    serving_gain: f64,
    config: &NetworkConfig,
    rho1: f64,
) -> (f64, f64) {
    let d = serving_gain + chi + config.pilot_noise_term();
    let base = serving_gain * serving_gain / (n_eff * d);
    let scale = p_tx / rho1;
    let a = scale * (serving_gain - base);
    let gap = scale * (m_antennas + 1.0) * base;
    (a, gap)
}

/// Per-branch kernel arguments for the rate integral.
struct BranchKernel {
    /// Transmit power of the serving tier, mW.
    p_tx: f64,
    /// Effective load of the serving tier.
    n_eff: f64,
    /// Antennas at the serving tier.
    m_antennas: f64,
    /// chi constant of the serving tier.
    chi: f64,
    /// Path-loss slope of the branch.
    l_gain: f64,
    alpha: f64,
}

impl BranchKernel {
    fn new(branch: Branch, model: &PropagationModel, config: &NetworkConfig, k: &RateConstants) -> Self {
        let (p_tx, n_eff, m_antennas, chi) = if branch.is_mbs() {
            (config.p_m_mw, k.n_m_eff, config.m_m, k.chi1)
        } else {
            (config.p_s_mw, k.n_s_eff, config.m_s, k.chi2)
        };
        let (l_gain, alpha) = if branch.is_los() {
            (model.l_los, model.alpha_los)
        } else {
            (model.l_nlos, model.alpha_nlos)
        };
        Self {
            p_tx,
            n_eff,
            m_antennas,
            chi,
            l_gain,
            alpha,
        }
    }

    fn serving_gain(&self, r: f64) -> f64 {
        self.l_gain * r.powf(-self.alpha)
    }
}

/// Compute the intermediate constants of the rate approximation.
///
/// The `nu` moments integrate the serving path gain capped at
/// `analysis.nu_gain_cap`; the raw moment diverges for exponents >= 2, see
/// `AnalysisOptions`.
pub fn rate_constants(
    model: &PropagationModel,
    config: &NetworkConfig,
    assoc: &AssociationReport,
    analysis: &AnalysisOptions,
    tol: &RateTolerances,
) -> Result<RateConstants> {
    require_rate_exponents(model)?;
    let ctx = AssocCtx::new(model, config);
    let c_v = 1.0 / (std::f64::consts::PI * config.lambda_m).sqrt();

    let mean_interference = |profile: &LoSProfile| -> Result<f64> {
        let q = quad::integrate_to_inf(
            |u| {
                let lam = interferer_density_ctx(u, &ctx);
                if lam == 0.0 {
                    return 0.0;
                }
                let p = profile.los_probability(u);
                let gain = model.l_los * u.powf(-model.alpha_los) * p
                    + model.l_nlos * u.powf(-model.alpha_nlos) * (1.0 - p);
                u * lam * gain
            },
            c_v,
            tol.constants,
        )?;
        Ok(2.0 * std::f64::consts::PI * q.value)
    };
    let chi1 = mean_interference(&model.los_profile_mbs)?;
    let chi2 = mean_interference(&model.los_profile_scb)?;

    let mean_sq_gain = |profile: &LoSProfile, lambda: f64| -> Result<f64> {
        let q = quad::integrate_to_inf(
            |u| {
                let p = profile.los_probability(u);
                let g = model.l_los * model.l_los * u.powf(-2.0 * model.alpha_los) * p
                    + model.l_nlos * model.l_nlos * u.powf(-2.0 * model.alpha_nlos) * (1.0 - p);
                u * g
            },
            c_v,
            tol.constants,
        )?;
        Ok(2.0 * std::f64::consts::PI * lambda * q.value)
    };
    let xi1 = mean_sq_gain(&model.los_profile_mbs, config.lambda_m)?;
    let xi2_lambda = match analysis.xi2_density {
        Xi2Density::AsWritten => config.lambda_m,
        Xi2Density::LambdaS => config.lambda_s,
    };
    let xi2 = mean_sq_gain(&model.los_profile_scb, xi2_lambda)?;

    let noise_term = config.pilot_noise_term();
    let mut nu = [0.0f64; 4];
    for (i, branch) in Branch::ALL.into_iter().enumerate() {
        if assoc.branch(branch) <= 1e-12 {
            continue; // degenerate branch contributes nothing to mu1
        }
        let kern = BranchKernel::new(branch, model, config, &dummy_constants(c_v));
        let chi = if branch.is_mbs() { chi1 } else { chi2 };
        let prob = assoc.branch(branch);
        nu[i] = match analysis.nu_mode {
            NuMode::Harmonic => {
                // Match the harmonic moment: the contamination proxy uses
                // nu inside the reciprocal MMSE denominator, so plug in
                // nu with 1/(nu + chi + n) = E[1/(phi + chi + n)].
                let c = chi + noise_term;
                let q = ctx.weighted_integral(branch, tol.constants, |r| 1.0 / (kern.serving_gain(r) + c))?;
                prob / q.value - c
            }
            NuMode::GainCap(cap) => {
                let q = ctx.weighted_integral(branch, tol.constants, |r| kern.serving_gain(r).min(cap))?;
                q.value / prob
            }
            NuMode::Literal => {
                let q = ctx.weighted_integral(branch, tol.constants, |r| kern.serving_gain(r))?;
                q.value / prob
            }
        };
    }

    let n_users = config.n_users as f64;
    let n_m_eff = assoc.a_m * (config.lambda_m * n_users - 1.0) / config.lambda_m + 1.0;
    let n_s_eff = if config.lambda_s > 0.0 {
        assoc.a_s * (config.lambda_m * n_users - 1.0) / config.lambda_s + 1.0
    } else {
        1.0 // unused: both SCB branches carry zero probability
    };

    let mut mu1 = 0.0;
    let weights = [
        (assoc.a_m_los, config.p_m_mw * config.m_m * xi1, n_m_eff, nu[0], chi1),
        (assoc.a_m_nlos, config.p_m_mw * config.m_m * xi1, n_m_eff, nu[1], chi1),
        (assoc.a_s_los, config.p_s_mw * config.m_s * xi2, n_s_eff, nu[2], chi2),
        (assoc.a_s_nlos, config.p_s_mw * config.m_s * xi2, n_s_eff, nu[3], chi2),
    ];
    for (a, pm_xi, n_eff, nu_i, chi_i) in weights {
        if a <= 1e-12 {
            continue;
        }
        mu1 += a * pm_xi / (n_eff * (nu_i + chi_i + noise_term));
    }
    let rho1 = mu1 + config.sigma2_mw;

    Ok(RateConstants {
        c_v,
        chi1,
        chi2,
        xi1,
        xi2,
        nu1: nu[0],
        nu2: nu[1],
        nu3: nu[2],
        nu4: nu[3],
        n_m_eff,
        n_s_eff,
        mu1_tilde: mu1,
        rho1,
    })
}

/// Placeholder constants for `BranchKernel` before the real ones exist
/// (only the tier-independent fields are read during `nu` computation).
fn dummy_constants(c_v: f64) -> RateConstants {
    RateConstants {
        c_v,
        chi1: 0.0,
        chi2: 0.0,
        xi1: 0.0,
        xi2: 0.0,
        nu1: 0.0,
        nu2: 0.0,
        nu3: 0.0,
        nu4: 0.0,
        n_m_eff: 1.0,
        n_s_eff: 1.0,
        mu1_tilde: 0.0,
        rho1: 1.0,
    }
}

/// Conditional rate at serving distance `r` for one branch:
/// `int_0^inf e^{-z}/(z ln 2) Xi(z) Psi(z) dz`.
///
/// The `Psi` exponents scale with the conditional SINR and reach 1e8 and
/// beyond, so the integrand's support runs from `z ~ 1/B` up to `z ~ 50`
/// across many decades. Substituting `z = e^v` makes every decade the same
/// width; the residual `[0, z_lo]` piece, where the integrand sits at its
/// `z -> 0` limit `(B - A)/ln 2`, is added analytically and is chosen to
/// contribute below 1e-8 bits.
fn z_integral(
    r: f64,
    branch: Branch,
    kern: &BranchKernel,
    ctx: &AssocCtx<'_>,
    constants: &RateConstants,
    tol: &RateTolerances,
) -> Result<f64> {
    let x = ctx.exclusion_radii(branch, r);
    let serving_gain = kern.serving_gain(r);
    if !serving_gain.is_finite() {
        // Sub-femtometre serving distances: the serving weight there is
        // zero to every representable digit.
        return Ok(0.0);
    }
    let (a_exp, gap) = psi_exponents(
        kern.p_tx,
        kern.n_eff,
        kern.m_antennas,
        kern.chi,
        serving_gain,
        ctx.config,
        constants.rho1,
    );
    let ln2 = std::f64::consts::LN_2;
    let z_lo = 1e-8 / (a_exp + gap + 1.0);
    let z_hi: f64 = 50.0; // e^{-50} ~ 2e-22: tail beyond is unrepresentable
    let left = gap / ln2 * z_lo;

    let integrand = |v: f64| -> f64 {
        let z = v.exp();
        let xi = match xi_kernel_tol(z, x, ctx.model, ctx.config, constants.rho1, tol.xi_inner) {
            Ok(v) => v,
            Err(_) => f64::NAN, // surfaces as a NonFinite quadrature error
        };
        if xi == 0.0 {
            return 0.0;
        }
        let psi = (-z * a_exp).exp() * (-(-z * gap).exp_m1());
        if psi == 0.0 {
            return 0.0;
        }
        // e^{-z}/(z ln2) * Xi * Psi, times the jacobian dz = z dv.
        (-z).exp() / ln2 * xi * psi
    };
    let q = quad::integrate(integrand, z_lo.ln(), z_hi.ln(), tol.inner_z)?;
    Ok(left + q.value)
}

/// Theorem-level rate approximation with explicit options.
pub fn achievable_rate_with(
    model: &PropagationModel,
    config: &NetworkConfig,
    analysis: &AnalysisOptions,
    tol: &RateTolerances,
) -> Result<RateReport> {
    config.validate()?;
    model.validate()?;
    require_rate_exponents(model)?;
    let assoc = association_probabilities_with_tol(model, config, tol.association)?;
    let constants = rate_constants(model, config, &assoc, analysis, tol)?;

    // The four branch integrals are independent; evaluate them in parallel.
    let results: Vec<Result<(f64, f64)>> = Branch::ALL
        .into_par_iter()
        .map(|branch| {
            if assoc.branch(branch) <= 1e-12 {
                return Ok((0.0, 0.0));
            }
            let ctx = AssocCtx::new(model, config);
            let kern = BranchKernel::new(branch, model, config, &constants);
            // branch_weight already carries A_branch * f_branch, so the
            // branch term needs no extra probability factor.
            let q = ctx.weighted_integral(branch, tol.outer_r, |r| {
                match z_integral(r, branch, &kern, &ctx, &constants, tol) {
                    Ok(v) => v,
                    Err(_) => f64::NAN,
                }
            })?;
            Ok((q.value, q.error))
        })
        .collect();

    let mut branches = [0.0f64; 4];
    let mut err = 0.0;
    for (i, res) in results.into_iter().enumerate() {
        let (v, e) = res?;
        branches[i] = v;
        err += e;
    }

    Ok(RateReport {
        r_total: branches.iter().sum(),
        r_m_los: branches[0],
        r_m_nlos: branches[1],
        r_s_los: branches[2],
        r_s_nlos: branches[3],
        constants,
        association: assoc,
        quadrature_error: err,
    })
}

/// Theorem-level rate approximation with default options and tolerances.
pub fn achievable_rate(model: &PropagationModel, config: &NetworkConfig) -> Result<RateReport> {
    achievable_rate_with(model, config, &AnalysisOptions::default(), &RateTolerances::default())
}
