//! Event-level Monte Carlo simulator.
//!
//! Each realization samples the three PPPs over a disc window with the
//! typical user pinned at the origin, tags every examined link LoS/NLoS,
//! schedules `N` users per macro cell, associates all scheduled users by
//! biased received power, and accumulates the typical user's exact
//! downlink SINR under MMSE training with universal pilot reuse.
//!
//! Realizations are independent substreams of a single master seed and
//! run in parallel; outputs are collected in realization order, so results
//! are bit-identical for any `--threads` setting.

mod geometry;
mod network;
pub mod reference;
mod rng;
mod sinr;

pub use geometry::{Cplx, Point};
pub use network::{
    associate, sample_network, schedule_and_associate, LinkTagger, Realization, SchedUser, ScheduledNetwork, Serving,
};
pub use sinr::{downlink_sinr, SinrSample};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::Branch;
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::propagation::PropagationModel;

/// Simulation setup: window, realization count, seed, and the physical
/// parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub window_radius: f64,
    pub n_realizations: usize,
    pub seed: u64,
    pub network: NetworkConfig,
    pub model: PropagationModel,
}

impl SimConfig {
    pub fn new(network: NetworkConfig, model: PropagationModel) -> Self {
        Self {
            window_radius: 6.0,
            n_realizations: 10_000,
            seed: 42,
            network,
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.model.validate()?;
        let c_v = 1.0 / (std::f64::consts::PI * self.network.lambda_m).sqrt();
        if self.window_radius < 5.0 * c_v {
            return Err(Error::config(format!(
                "window_radius = {} km is below 5 C_v = {:.3} km; edge effects would dominate",
                self.window_radius,
                5.0 * c_v
            )));
        }
        if self.n_realizations < 1 {
            return Err(Error::config("n_realizations must be >= 1"));
        }
        if self.network.m_m.fract() != 0.0 || self.network.m_s.fract() != 0.0 {
            return Err(Error::config(format!(
                "the simulator needs integer antenna counts, got M_m = {}, M_s = {}",
                self.network.m_m, self.network.m_s
            )));
        }
        Ok(())
    }
}

/// Aggregated simulation estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean_rate: f64,
    /// Normal-approximation 95% confidence half-width.
    pub ci95_half_width: f64,
    /// False when `n_realizations < 30`.
    pub ci_reliable: bool,
    /// Empirical branch frequencies in `Branch::ALL` order.
    pub branch_frequencies: [f64; 4],
    pub n_realizations: usize,
    /// Realizations that redrew the BS process to get a nonempty MBS tier.
    pub bs_resample_events: u64,
    /// User-process redraws triggered by under-filled macro cells.
    pub user_resample_events: u64,
    /// Cells left short of N users after the resample budget.
    pub deficient_cell_events: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationOutput {
    /// Per-realization samples, in realization order.
    pub samples: Vec<SinrSample>,
    pub estimate: RateEstimate,
}

fn run_one(sim: &SimConfig, idx: u64) -> Result<(SinrSample, u32, u32, u32)> {
    let mut rng = rng::realization_rng(sim.seed, idx);
    let real = sample_network(sim, idx, &mut rng);
    let bs_resamples = real.bs_resamples;
    let net = schedule_and_associate(real, &sim.model, &sim.network, &mut rng)?;
    let sample = downlink_sinr(&net, &sim.model, &sim.network, &mut rng);
    Ok((sample, bs_resamples, net.user_resamples, net.deficient_cells))
}

/// Full pipeline over all realizations: geometry, scheduling, training,
/// and SINR, one sample per realization.
pub fn run_simulation(sim: &SimConfig) -> Result<SimulationOutput> {
    sim.validate()?;
    let results: Result<Vec<_>> = (0..sim.n_realizations as u64)
        .into_par_iter()
        .map(|i| run_one(sim, i))
        .collect();
    let results = results?;

    let mut samples = Vec::with_capacity(results.len());
    let mut bs_res = 0u64;
    let mut user_res = 0u64;
    let mut deficient = 0u64;
    for (s, b, u, d) in results {
        samples.push(s);
        bs_res += b as u64;
        user_res += u as u64;
        deficient += d as u64;
    }
    let estimate = summarize(&samples, bs_res, user_res, deficient);
    Ok(SimulationOutput { samples, estimate })
}

/// Mean downlink rate with a 95% CI and branch frequencies.
pub fn estimate_rate(sim: &SimConfig) -> Result<RateEstimate> {
    Ok(run_simulation(sim)?.estimate)
}

fn summarize(samples: &[SinrSample], bs_res: u64, user_res: u64, deficient: u64) -> RateEstimate {
    let n = samples.len();
    let mean = samples.iter().map(|s| s.rate).sum::<f64>() / n as f64;
    let var = if n > 1 {
        samples.iter().map(|s| (s.rate - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let ci = 1.959963984540054 * (var / n as f64).sqrt();
    let mut freq = [0.0f64; 4];
    for s in samples {
        let i = Branch::ALL.iter().position(|&b| b == s.branch).unwrap();
        freq[i] += 1.0;
    }
    for f in &mut freq {
        *f /= n as f64;
    }
    RateEstimate {
        mean_rate: mean,
        ci95_half_width: ci,
        ci_reliable: n >= 30,
        branch_frequencies: freq,
        n_realizations: n,
        bs_resample_events: bs_res,
        user_resample_events: user_res,
        deficient_cell_events: deficient,
    }
}

/// Association-only fast path: the typical user's branch and serving
/// distance per realization, skipping users, training, and SINR. Used for
/// validating the association probabilities and serving-distance laws at
/// scale.
pub fn simulate_association(sim: &SimConfig) -> Result<Vec<(Branch, f64)>> {
    sim.validate()?;
    let out: Vec<(Branch, f64)> = (0..sim.n_realizations as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::realization_rng(sim.seed, i);
            let mut light = sim.clone();
            light.network.lambda_u = f64::MIN_POSITIVE; // no users needed
            let real = sample_network(&light, i, &mut rng);
            let serving = associate(&Point::ORIGIN, network::TYPICAL_KEY, &real, &sim.model, &sim.network);
            (serving.branch(), serving.dist)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::default_3gpp_model;
    use approx::assert_relative_eq;

    fn tiny_sim(seed: u64) -> SimConfig {
        let mut network = NetworkConfig::paper_defaults();
        network.lambda_s = 2.0;
        network.lambda_u = 200.0;
        network.n_users = 3;
        network.tau = 3;
        network.m_m = 6.0;
        network.m_s = 2.0;
        SimConfig {
            window_radius: 3.0,
            n_realizations: 64,
            seed,
            network,
            model: default_3gpp_model(),
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let sim = tiny_sim(7);
        let a = run_simulation(&sim).unwrap();
        let b = run_simulation(&sim).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.rate.to_bits(), y.rate.to_bits());
            assert_eq!(x.branch, y.branch);
        }
        let c = run_simulation(&SimConfig { seed: 8, ..sim }).unwrap();
        assert_ne!(a.samples[0].rate.to_bits(), c.samples[0].rate.to_bits());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let sim = tiny_sim(11);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| run_simulation(&sim)).unwrap();
        let b = pool4.install(|| run_simulation(&sim)).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.rate.to_bits(), y.rate.to_bits());
        }
    }

    #[test]
    fn sinr_sample_invariants() {
        let sim = tiny_sim(3);
        let out = run_simulation(&sim).unwrap();
        for s in &out.samples {
            assert!(s.signal >= 0.0 && s.interference >= 0.0);
            assert_relative_eq!(
                s.sinr,
                s.signal / (s.interference + sim.network.sigma2_mw),
                max_relative = 1e-12
            );
            assert_relative_eq!(s.rate, (1.0 + s.sinr).log2(), max_relative = 1e-12);
        }
        let f: f64 = out.estimate.branch_frequencies.iter().sum();
        assert_relative_eq!(f, 1.0, max_relative = 1e-12);
    }

    /// The production fast path must match the fully explicit reference in
    /// distribution: same geometry, many fading draws, compare means of
    /// signal and interference.
    #[test]
    fn fused_sinr_matches_explicit_reference() {
        let sim = tiny_sim(19);
        let mut rng = rng::realization_rng(sim.seed, 0);
        let real = sample_network(&sim, 0, &mut rng);
        let net = schedule_and_associate(real, &sim.model, &sim.network, &mut rng).unwrap();

        let draws = 4000;
        let mut fast = (0.0, 0.0);
        let mut slow = (0.0, 0.0);
        for i in 0..draws {
            let mut r1 = rng::realization_rng(900 + i, 1);
            let s1 = downlink_sinr(&net, &sim.model, &sim.network, &mut r1);
            fast.0 += s1.signal;
            fast.1 += s1.interference;
            let mut r2 = rng::realization_rng(901 + i, 2);
            let s2 = reference::downlink_sinr_explicit(&net, &sim.model, &sim.network, &mut r2);
            slow.0 += s2.signal;
            slow.1 += s2.interference;
        }
        let n = draws as f64;
        // Means over fading agree within a few percent at this sample size.
        assert_relative_eq!(fast.0 / n, slow.0 / n, max_relative = 0.10);
        assert_relative_eq!(fast.1 / n, slow.1 / n, max_relative = 0.10);
    }

    #[test]
    fn association_fast_path_matches_full_pipeline_distribution() {
        // The light path and the scheduled pipeline must give the same
        // typical-user branch for the same realization index.
        let mut sim = tiny_sim(23);
        sim.n_realizations = 200;
        let light = simulate_association(&sim).unwrap();
        let full = run_simulation(&sim).unwrap();
        let mut agree = 0;
        for ((b1, d1), s) in light.iter().zip(&full.samples) {
            if *b1 == s.branch {
                agree += 1;
            }
            assert_relative_eq!(*d1, s.serving_distance_km, max_relative = 1e-12);
        }
        assert_eq!(agree, 200);
    }

    #[test]
    fn window_validation() {
        let mut sim = tiny_sim(1);
        sim.window_radius = 0.5;
        assert!(sim.validate().is_err());
        let mut sim = tiny_sim(1);
        sim.network.m_m = 6.5;
        assert!(sim.validate().is_err());
    }
}
