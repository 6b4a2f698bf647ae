//! Brute-force training and SINR: every channel vector drawn explicitly.
//!
//! This is the literal transcription of the system model — per-BS received
//! pilot matrices, MMSE estimates, MRT precoders, and the full interference
//! sums — kept alongside the production fast path as its distributional
//! oracle and for the estimator statistics checks. Costs scale with
//! (BS count) x (cells) x (antennas); use small windows.

use rand_chacha::ChaCha8Rng;

use crate::config::NetworkConfig;
use crate::propagation::{PropagationModel, Tier};

use super::geometry::{dot, draw_cn_vec, norm_sq, Cplx};
use super::network::ScheduledNetwork;
use super::sinr::{antennas, link_gain, tx_power, SinrSample};

/// Explicit MMSE training output for one user at one BS.
#[derive(Debug, Clone)]
pub struct UserEstimate {
    /// Scheduled-user index.
    pub user: usize,
    /// Realized path gain to the BS.
    pub phi: f64,
    /// MMSE coefficient `phi / (sum same-pilot phi + noise)`.
    pub eta: f64,
    /// Estimated channel vector.
    pub estimate: Vec<Cplx>,
    /// Estimation error `estimate - true channel`.
    pub error: Vec<Cplx>,
}

/// Training state of one BS: the estimates for each of its users.
#[derive(Debug, Clone)]
pub struct BsTraining {
    pub tier: Tier,
    pub idx: usize,
    pub estimates: Vec<UserEstimate>,
}

impl BsTraining {
    /// MRT precoder for one estimate: `kappa ghat / sqrt(M phi eta)`.
    pub fn precoder(&self, est: &UserEstimate, m: usize) -> Vec<Cplx> {
        let kappa = (1.0 / self.estimates.len() as f64).sqrt();
        let norm = (m as f64 * est.phi * est.eta).sqrt();
        est.estimate.iter().map(|c| c.scale(kappa / norm)).collect()
    }

    /// `tr(F F^H)` for this fading draw; averages to 1 over fading.
    pub fn precoder_trace(&self, m: usize) -> f64 {
        self.estimates
            .iter()
            .map(|e| norm_sq(&self.precoder(e, m)))
            .sum()
    }
}

/// Uplink training at one BS, drawing every same-pilot channel explicitly.
///
/// `g_typ` is the typical user's channel to this BS, drawn by the caller
/// so it can be shared with the downlink phase (the typical's channel
/// appears inside the received pilot of its slot — that is the pilot
/// contamination being modeled).
pub fn train_bs(
    net: &ScheduledNetwork,
    model: &PropagationModel,
    config: &NetworkConfig,
    tier: Tier,
    idx: usize,
    g_typ: &[Cplx],
    rng: &mut ChaCha8Rng,
) -> BsTraining {
    let m = antennas(config, tier);
    let users = net.bs_user_indices(tier, idx);
    let mut slots: Vec<usize> = users.iter().map(|&u| net.sched[u].slot).collect();
    slots.sort_unstable();
    slots.dedup();

    let noise = config.pilot_noise_term();
    let mut estimates: Vec<UserEstimate> = Vec::new();
    for slot in slots {
        // Received pilot vector for the slot: all same-pilot channels plus
        // pilot-matched noise of per-antenna variance sigma^2/(tau p_p).
        let mut g_sum = vec![Cplx::default(); m];
        let mut denom = noise;
        let mut own: Vec<(usize, f64, Vec<Cplx>)> = Vec::new();
        for su in net.same_pilot_users(slot) {
            let phi = link_gain(net, model, tier, idx, su);
            denom += phi;
            let g = if su == 0 {
                g_typ.to_vec()
            } else {
                draw_cn_vec(rng, phi, m)
            };
            for (acc, c) in g_sum.iter_mut().zip(&g) {
                *acc = acc.add(*c);
            }
            if users.contains(&su) {
                own.push((su, phi, g));
            }
        }
        let w = draw_cn_vec(rng, noise, m);
        for (acc, c) in g_sum.iter_mut().zip(&w) {
            *acc = acc.add(*c);
        }
        for (user, phi, g_true) in own {
            let eta = phi / denom;
            let estimate: Vec<Cplx> = g_sum.iter().map(|c| c.scale(eta)).collect();
            let error: Vec<Cplx> = estimate.iter().zip(&g_true).map(|(a, b)| a.sub(*b)).collect();
            estimates.push(UserEstimate {
                user,
                phi,
                eta,
                estimate,
                error,
            });
        }
    }
    BsTraining {
        tier,
        idx,
        estimates,
    }
}

/// Fully explicit downlink SINR of the typical user: trains every BS,
/// forms every precoder, and sums every interference term per the model's
/// SINR decomposition.
pub fn downlink_sinr_explicit(
    net: &ScheduledNetwork,
    model: &PropagationModel,
    config: &NetworkConfig,
    rng: &mut ChaCha8Rng,
) -> SinrSample {
    let typ = net.typical();
    let serving = typ.serving;
    let mut signal = 0.0;
    let mut interference = 0.0;

    for tier in [Tier::Mbs, Tier::Scb] {
        let count = match tier {
            Tier::Mbs => net.real.mbs.len(),
            Tier::Scb => net.real.scb.len(),
        };
        let m = antennas(config, tier);
        let p_tx = tx_power(config, tier);
        for idx in 0..count {
            let users = net.bs_user_indices(tier, idx);
            if users.is_empty() {
                continue;
            }
            let phi_bt = link_gain(net, model, tier, idx, 0);
            let g_typ = draw_cn_vec(rng, phi_bt, m);
            let training = train_bs(net, model, config, tier, idx, &g_typ, rng);
            let is_serving = tier == serving.tier && idx == serving.idx;
            let typ_est = training.estimates.iter().find(|e| e.user == 0);
            for est in &training.estimates {
                let f = training.precoder(est, m);
                if is_serving {
                    let te = typ_est.expect("typical trained at serving BS");
                    let d = dot(&te.estimate, &f).norm_sq();
                    if est.user == 0 {
                        signal = p_tx * d;
                    } else {
                        interference += p_tx * d;
                    }
                    interference += p_tx * dot(&te.error, &f).norm_sq();
                } else {
                    interference += p_tx * dot(&g_typ, &f).norm_sq();
                }
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
