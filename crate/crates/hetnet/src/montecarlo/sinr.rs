//! Exact downlink SINR of the typical user for one realization.
//!
//! Training and precoding are never materialized network-wide. For any BS,
//! the estimate of a user on pilot slot `n` is `eta * G_n` where `G_n` is
//! the (shared) received pilot vector of that slot: the sum of the same-
//! pilot users' channels plus scaled noise. The typical user's SINR only
//! involves inner products of the typical's channel (and, at the serving
//! BS, its estimate and estimation error) with those `G_n`, so:
//!
//! * at the serving BS, `g_typ` and the per-slot remainders `E_n` are drawn
//!   as explicit antenna vectors (`G_n = E_n`, plus `g_typ` when the slot is
//!   the typical's pilot);
//! * at every other BS, conditioned on `S = |g_typ|^2 ~ Gamma(M, phi)` the
//!   inner products `g_typ^H G_n` are independent `CN(a_n S, S v_n)`
//!   scalars, which is sampled directly.
//!
//! Both reductions are exact in distribution; `reference.rs` carries the
//! brute-force implementation used to verify that.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::Branch;
use crate::config::NetworkConfig;
use crate::propagation::{PropagationModel, Tier};

use super::geometry::{dot, draw_cn, draw_cn_vec, Cplx, Point};
use super::network::ScheduledNetwork;

/// Downlink SINR sample of the typical user.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SinrSample {
    pub branch: Branch,
    pub serving_distance_km: f64,
    /// Received signal power, mW.
    pub signal: f64,
    /// Aggregate interference power, mW (noise excluded).
    pub interference: f64,
    pub sinr: f64,
    /// `log2(1 + sinr)`, bits/s/Hz.
    pub rate: f64,
}

pub(crate) fn tx_power(config: &NetworkConfig, tier: Tier) -> f64 {
    match tier {
        Tier::Mbs => config.p_m_mw,
        Tier::Scb => config.p_s_mw,
    }
}

pub(crate) fn antennas(config: &NetworkConfig, tier: Tier) -> usize {
    match tier {
        Tier::Mbs => config.m_m as usize,
        Tier::Scb => config.m_s as usize,
    }
}

pub(crate) fn bs_position(net: &ScheduledNetwork, tier: Tier, idx: usize) -> Point {
    match tier {
        Tier::Mbs => net.real.mbs[idx],
        Tier::Scb => net.real.scb[idx],
    }
}

/// Realized path gain between a BS and a scheduled user (LoS tag applied).
pub(crate) fn link_gain(
    net: &ScheduledNetwork,
    model: &PropagationModel,
    tier: Tier,
    idx: usize,
    user: usize,
) -> f64 {
    let u = &net.sched[user];
    let d = bs_position(net, tier, idx).dist(&u.pos);
    let los = net.real.tagger.los(model, tier, idx, u.key, d);
    model.path_loss_unchecked(d, los)
}

/// One pilot slot at one BS: the users of that BS sharing the slot, the
/// MMSE denominator, and whether the typical user's channel contaminates
/// the slot's received pilot.
#[derive(Debug)]
pub(crate) struct PilotGroup {
    pub slot: usize,
    /// `sum_l phi_{b,(n,l)} + sigma^2/(tau p_p)`.
    pub denom: f64,
    /// Typical user's gain to this BS if the slot carries its pilot.
    pub typical_gain: Option<f64>,
    /// `(user index, phi, eta)` of this BS's users on the slot.
    pub users: Vec<(usize, f64, f64)>,
}

impl PilotGroup {
    /// Variance per antenna of the received pilot minus the typical's
    /// channel contribution.
    pub fn residual_var(&self) -> f64 {
        self.denom - self.typical_gain.unwrap_or(0.0)
    }
}

/// Build the pilot groups of one BS, slot-ascending.
pub(crate) fn pilot_groups(
    net: &ScheduledNetwork,
    model: &PropagationModel,
    config: &NetworkConfig,
    tier: Tier,
    idx: usize,
) -> Vec<PilotGroup> {
    let users = net.bs_user_indices(tier, idx);
    let mut slots: Vec<usize> = users.iter().map(|&u| net.sched[u].slot).collect();
    slots.sort_unstable();
    slots.dedup();

    let noise = config.pilot_noise_term();
    let typical_slot = net.typical().slot;
    slots
        .into_iter()
        .map(|slot| {
            let mut denom = noise;
            let mut typical_gain = None;
            for su in net.same_pilot_users(slot) {
                let g = link_gain(net, model, tier, idx, su);
                denom += g;
                if su == 0 {
                    typical_gain = Some(g);
                }
            }
            debug_assert!(slot != typical_slot || typical_gain.is_some());
            let members = users
                .iter()
                .copied()
                .filter(|&u| net.sched[u].slot == slot)
                .map(|u| {
                    let phi = link_gain(net, model, tier, idx, u);
                    (u, phi, phi / denom)
                })
                .collect();
            PilotGroup {
                slot,
                denom,
                typical_gain,
                users: members,
            }
        })
        .collect()
}

/// Exact SINR of the typical user; draws one coherence block of fading.
pub fn downlink_sinr(
    net: &ScheduledNetwork,
    model: &PropagationModel,
    config: &NetworkConfig,
    rng: &mut ChaCha8Rng,
) -> SinrSample {
    let typ = net.typical();
    let serving = typ.serving;
    let phi_t_serving = model.path_loss_unchecked(serving.dist, serving.los);

    let mut signal = 0.0f64;
    let mut interference = 0.0f64;

    // ---- Serving BS: explicit antenna vectors. ----
    {
        let tier = serving.tier;
        let idx = serving.idx;
        let m = antennas(config, tier);
        let p_tx = tx_power(config, tier);
        let users = net.bs_user_indices(tier, idx);
        debug_assert!(users.contains(&0), "typical user must be served");
        let kappa2 = 1.0 / users.len() as f64;
        let groups = pilot_groups(net, model, config, tier, idx);

        let g_t = draw_cn_vec(rng, phi_t_serving, m);
        // Received pilot vectors per group.
        let g_vecs: Vec<Vec<Cplx>> = groups
            .iter()
            .map(|g| {
                let mut v = draw_cn_vec(rng, g.residual_var(), m);
                if g.typical_gain.is_some() {
                    for (e, t) in v.iter_mut().zip(&g_t) {
                        *e = e.add(*t);
                    }
                }
                v
            })
            .collect();

        let tgroup = groups
            .iter()
            .position(|g| g.slot == typ.slot)
            .expect("typical's slot must form a group at the serving BS");
        let eta_t = phi_t_serving / groups[tgroup].denom;
        // Estimate and estimation error of the typical user's channel.
        let g_hat_t: Vec<Cplx> = g_vecs[tgroup].iter().map(|c| c.scale(eta_t)).collect();
        let g_tilde: Vec<Cplx> = g_hat_t.iter().zip(&g_t).map(|(a, b)| a.sub(*b)).collect();

        for (gi, group) in groups.iter().enumerate() {
            let d_sq = dot(&g_hat_t, &g_vecs[gi]).norm_sq();
            let e_sq = dot(&g_tilde, &g_vecs[gi]).norm_sq();
            for &(u, phi_u, eta_u) in &group.users {
                // f_u = kappa * eta_u G / sqrt(M phi_u eta_u)
                let c_u = p_tx * kappa2 * eta_u / (m as f64 * phi_u);
                if u == 0 {
                    signal = c_u * d_sq;
                } else {
                    interference += c_u * d_sq;
                }
                interference += c_u * e_sq;
            }
        }
    }

    // ---- All other BSs: scalar reductions. ----
    for tier in [Tier::Mbs, Tier::Scb] {
        let count = match tier {
            Tier::Mbs => net.real.mbs.len(),
            Tier::Scb => net.real.scb.len(),
        };
        let m = antennas(config, tier) as f64;
        let p_tx = tx_power(config, tier);
        for idx in 0..count {
            if tier == serving.tier && idx == serving.idx {
                continue;
            }
            let users = net.bs_user_indices(tier, idx);
            if users.is_empty() {
                continue; // silent BS
            }
            let kappa2 = 1.0 / users.len() as f64;
            let phi_bt = link_gain(net, model, tier, idx, 0);
            let groups = pilot_groups(net, model, config, tier, idx);
            // |g_typ|^2 ~ Gamma(M, phi).
            let s: f64 = rand_distr::Distribution::sample(
                &rand_distr::Gamma::new(m, phi_bt).expect("valid gamma"),
                rng,
            );
            for group in &groups {
                let a = if group.typical_gain.is_some() { s } else { 0.0 };
                let v = group.residual_var();
                let xi = draw_cn(rng, 1.0);
                let sv = (s * v).sqrt();
                let x = Cplx {
                    re: a + sv * xi.re,
                    im: sv * xi.im,
                };
                let x_sq = x.norm_sq();
                let coeff: f64 = group
                    .users
                    .iter()
                    .map(|&(_, phi_u, eta_u)| eta_u / (m * phi_u))
                    .sum();
                interference += p_tx * kappa2 * coeff * x_sq;
            }
        }
    }

    let sinr = signal / (interference + config.sigma2_mw);
    SinrSample {
        branch: serving.branch(),
        serving_distance_km: serving.dist,
        signal,
        interference,
        sinr,
        rate: (1.0 + sinr).log2(),
    }
}
