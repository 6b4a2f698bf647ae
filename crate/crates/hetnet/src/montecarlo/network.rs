//! Deployment sampling, user scheduling, and biased association.

use rand_chacha::ChaCha8Rng;

use crate::association::Branch;
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::propagation::{PropagationModel, Tier};

use super::geometry::{poisson_count, sample_disc, Point};
use super::rng::{mix_key, u01, DOMAIN_TAG};
use super::SimConfig;

pub(crate) const TYPICAL_KEY: u64 = 0;

/// Pure-function LoS tagger: the tag of a (BS, user) link is a
/// deterministic function of the seed, realization, user-resample round,
/// and the two endpoint identities, so it is drawn exactly once per link
/// and shared by the training and data phases.
#[derive(Debug, Clone, Copy)]
pub struct LinkTagger {
    realization_key: u64,
    round: u64,
}

impl LinkTagger {
    fn new(seed: u64, realization: u64) -> Self {
        Self {
            realization_key: mix_key(&[seed, DOMAIN_TAG, realization]),
            round: 0,
        }
    }

    fn bs_code(tier: Tier, idx: usize) -> u64 {
        let t = match tier {
            Tier::Mbs => 1u64,
            Tier::Scb => 2u64,
        };
        (t << 56) | idx as u64
    }

    /// LoS tag for the link between BS `(tier, idx)` and the user with
    /// identity `user_key` at distance `r`.
    pub fn los(&self, model: &PropagationModel, tier: Tier, idx: usize, user_key: u64, r: f64) -> bool {
        let p = model.los_probability(tier, r);
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        // The typical user's links are invariant under user resampling.
        let round = if user_key == TYPICAL_KEY { 0 } else { self.round };
        u01(mix_key(&[self.realization_key, round, Self::bs_code(tier, idx), user_key])) < p
    }
}

/// One sampled deployment: BS and user coordinates plus the link tagger.
/// The typical user sits at the origin and is not part of `users`.
#[derive(Debug, Clone)]
pub struct Realization {
    pub mbs: Vec<Point>,
    pub scb: Vec<Point>,
    pub users: Vec<Point>,
    pub window_radius: f64,
    pub tagger: LinkTagger,
    /// BS process redraws needed to get at least one MBS in the window.
    pub bs_resamples: u32,
}

/// Sample the three PPPs over the disc window (Slivnyak: the typical user
/// is pinned at the origin on top of the user process).
pub fn sample_network(sim: &SimConfig, realization: u64, rng: &mut ChaCha8Rng) -> Realization {
    let area = std::f64::consts::PI * sim.window_radius * sim.window_radius;
    let mut bs_resamples = 0u32;
    let (mbs, scb) = loop {
        let n_mbs = poisson_count(rng, sim.network.lambda_m * area);
        let n_scb = poisson_count(rng, sim.network.lambda_s * area);
        let mbs: Vec<Point> = (0..n_mbs).map(|_| sample_disc(rng, sim.window_radius)).collect();
        let scb: Vec<Point> = (0..n_scb).map(|_| sample_disc(rng, sim.window_radius)).collect();
        if !mbs.is_empty() {
            break (mbs, scb);
        }
        // The typical user must have a scheduling MBS.
        bs_resamples += 1;
    };
    let n_users = poisson_count(rng, sim.network.lambda_u * area);
    let users: Vec<Point> = (0..n_users).map(|_| sample_disc(rng, sim.window_radius)).collect();
    Realization {
        mbs,
        scb,
        users,
        window_radius: sim.window_radius,
        tagger: LinkTagger::new(sim.seed, realization),
        bs_resamples,
    }
}

/// Strongest-BS search result within one tier.
#[derive(Debug, Clone, Copy)]
pub struct TierBest {
    pub idx: usize,
    pub los: bool,
    pub dist: f64,
    /// Biased received power for association scans, unbiased for coverage.
    pub power: f64,
}

/// Scan one tier for the BS with the strongest (optionally biased)
/// received power at `at`, LoS tags included.
///
/// Beyond the LoS-profile support every link is NLoS, where power is
/// monotone in distance, so only in-support BSs and the nearest remaining
/// BS need explicit power evaluations.
pub fn strongest_in_tier(
    at: &Point,
    user_key: u64,
    tier: Tier,
    points: &[Point],
    model: &PropagationModel,
    config: &NetworkConfig,
    tagger: &LinkTagger,
    biased: bool,
) -> Option<TierBest> {
    if points.is_empty() {
        return None;
    }
    let tx_power = match tier {
        Tier::Mbs => config.p_m_mw,
        Tier::Scb => {
            if biased {
                config.bias * config.p_s_mw
            } else {
                config.p_s_mw
            }
        }
    };
    let support = model.profile(tier).los_support();

    let mut best: Option<TierBest> = None;
    let mut consider = |idx: usize, d2: f64, los: bool| {
        let dist = d2.sqrt();
        let power = tx_power * model.path_loss_unchecked(dist, los);
        if best.map_or(true, |b| power > b.power) {
            best = Some(TierBest {
                idx,
                los,
                dist,
                power,
            });
        }
    };

    match support {
        Some(d_sup) => {
            let sup2 = d_sup * d_sup;
            let mut nearest_nlos: Option<(usize, f64)> = None;
            let mut note_nlos = |idx: usize, d2: f64, cur: &mut Option<(usize, f64)>| {
                if cur.map_or(true, |(_, cd2)| d2 < cd2) {
                    *cur = Some((idx, d2));
                }
            };
            for (idx, p) in points.iter().enumerate() {
                let d2 = at.dist2(p);
                if d2 <= sup2 {
                    let dist = d2.sqrt();
                    if tagger.los(model, tier, idx, user_key, dist) {
                        consider(idx, d2, true);
                    } else {
                        note_nlos(idx, d2, &mut nearest_nlos);
                    }
                } else {
                    note_nlos(idx, d2, &mut nearest_nlos);
                }
            }
            if let Some((idx, d2)) = nearest_nlos {
                consider(idx, d2, false);
            }
        }
        None => {
            // Unbounded profile: every link needs its own tag and power.
            for (idx, p) in points.iter().enumerate() {
                let d2 = at.dist2(p);
                let dist = d2.sqrt();
                let los = tagger.los(model, tier, idx, user_key, dist);
                consider(idx, d2, los);
            }
        }
    }
    best
}

/// Global biased-power association over both tiers.
pub fn associate(
    at: &Point,
    user_key: u64,
    real: &Realization,
    model: &PropagationModel,
    config: &NetworkConfig,
) -> Serving {
    let m = strongest_in_tier(at, user_key, Tier::Mbs, &real.mbs, model, config, &real.tagger, true);
    let s = strongest_in_tier(at, user_key, Tier::Scb, &real.scb, model, config, &real.tagger, true);
    let (tier, best) = match (m, s) {
        (Some(m), Some(s)) => {
            if m.power >= s.power {
                (Tier::Mbs, m)
            } else {
                (Tier::Scb, s)
            }
        }
        (Some(m), None) => (Tier::Mbs, m),
        (None, Some(s)) => (Tier::Scb, s),
        (None, None) => unreachable!("sample_network guarantees at least one MBS"),
    };
    Serving {
        tier,
        idx: best.idx,
        los: best.los,
        dist: best.dist,
    }
}

/// Serving-BS record for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Serving {
    pub tier: Tier,
    pub idx: usize,
    pub los: bool,
    pub dist: f64,
}

impl Serving {
    pub fn branch(&self) -> Branch {
        match (self.tier, self.los) {
            (Tier::Mbs, true) => Branch::MbsLos,
            (Tier::Mbs, false) => Branch::MbsNlos,
            (Tier::Scb, true) => Branch::ScbLos,
            (Tier::Scb, false) => Branch::ScbNlos,
        }
    }
}

/// One scheduled user.
#[derive(Debug, Clone)]
pub struct SchedUser {
    pub pos: Point,
    /// Tag identity (stable across the realization).
    pub key: u64,
    /// Macro cell that scheduled the user (MBS index).
    pub cell: usize,
    /// Pilot slot within the cell (0-based).
    pub slot: usize,
    pub serving: Serving,
}

/// Deployment plus schedules, associations, and per-BS user lists.
#[derive(Debug, Clone)]
pub struct ScheduledNetwork {
    pub real: Realization,
    /// Scheduled users; index 0 is the typical user at the origin.
    pub sched: Vec<SchedUser>,
    /// Scheduled-user indices per macro cell, by slot.
    pub cell_slots: Vec<Vec<usize>>,
    /// Associated scheduled-user indices per MBS / per SCB.
    pub mbs_users: Vec<Vec<usize>>,
    pub scb_users: Vec<Vec<usize>>,
    /// Cell and slot of the typical user.
    pub typical_cell: usize,
    /// User-process resamples triggered by under-filled macro cells.
    pub user_resamples: u32,
    /// Cells still short of N users after the resample budget.
    pub deficient_cells: u32,
}

impl ScheduledNetwork {
    pub fn typical(&self) -> &SchedUser {
        &self.sched[0]
    }

    pub fn bs_user_indices(&self, tier: Tier, idx: usize) -> &[usize] {
        match tier {
            Tier::Mbs => &self.mbs_users[idx],
            Tier::Scb => &self.scb_users[idx],
        }
    }

    /// Scheduled-user indices sharing pilot `slot` (one per cell that has
    /// that slot filled).
    pub fn same_pilot_users(&self, slot: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_slots
            .iter()
            .filter_map(move |slots| slots.get(slot).copied())
    }
}

const MAX_USER_RESAMPLES: u32 = 20;

/// Partition users into macro coverage cells by strongest unbiased MBS
/// power, schedule `N` per cell (the typical user force-included in its
/// own cell), then associate every scheduled user to the global
/// biased-power argmax.
///
/// Users are processed in generation order and a cell stops accepting
/// once full; by exchangeability of the i.i.d. user points this yields a
/// uniform N-subset of each cell's users while skipping most coverage
/// computations. Cells that cannot be filled from the window trigger a
/// user resample (counted); after `MAX_USER_RESAMPLES` rounds the
/// realization proceeds with the deficient cells partially filled
/// (counted separately).
pub fn schedule_and_associate(
    mut real: Realization,
    model: &PropagationModel,
    config: &NetworkConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ScheduledNetwork> {
    let n_per_cell = config.n_users as usize;
    let n_cells = real.mbs.len();

    let typical_cov = strongest_in_tier(
        &Point::ORIGIN,
        TYPICAL_KEY,
        Tier::Mbs,
        &real.mbs,
        model,
        config,
        &real.tagger,
        false,
    )
    .ok_or_else(|| Error::numerical("no MBS in window"))?;

    let mut user_resamples = 0u32;
    let (cell_members, deficient_cells) = loop {
        // cell_members[c] = (position, key) of users scheduled by cell c.
        let mut cell_members: Vec<Vec<(Point, u64)>> = vec![Vec::with_capacity(n_per_cell); n_cells];
        cell_members[typical_cov.idx].push((Point::ORIGIN, TYPICAL_KEY));
        let mut unfilled = n_cells
            - cell_members
                .iter()
                .filter(|m| m.len() >= n_per_cell)
                .count();
        for (i, pos) in real.users.iter().enumerate() {
            if unfilled == 0 {
                break;
            }
            let key = i as u64 + 1;
            let cov = strongest_in_tier(pos, key, Tier::Mbs, &real.mbs, model, config, &real.tagger, false)
                .expect("mbs nonempty");
            let members = &mut cell_members[cov.idx];
            if members.len() < n_per_cell {
                members.push((*pos, key));
                if members.len() == n_per_cell {
                    unfilled -= 1;
                }
            }
        }
        if unfilled == 0 || user_resamples >= MAX_USER_RESAMPLES {
            break (cell_members, unfilled as u32);
        }
        // Redraw the user process; tags move to a fresh round so the new
        // links get independent LoS draws.
        user_resamples += 1;
        real.tagger.round = user_resamples as u64;
        let area = std::f64::consts::PI * real.window_radius * real.window_radius;
        let n_users = poisson_count(rng, config.lambda_u * area);
        real.users = (0..n_users).map(|_| sample_disc(rng, real.window_radius)).collect();
    };

    // Flatten into the scheduled-user table, typical first.
    let mut sched: Vec<SchedUser> = Vec::with_capacity(n_cells * n_per_cell);
    let mut cell_slots: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
    // Typical user always occupies slot 0 of its cell.
    sched.push(SchedUser {
        pos: Point::ORIGIN,
        key: TYPICAL_KEY,
        cell: typical_cov.idx,
        slot: 0,
        serving: Serving {
            tier: Tier::Mbs,
            idx: 0,
            los: false,
            dist: 0.0,
        },
    });
    cell_slots[typical_cov.idx].push(0);
    for (cell, members) in cell_members.iter().enumerate() {
        for &(pos, key) in members {
            if key == TYPICAL_KEY {
                continue;
            }
            let slot = cell_slots[cell].len();
            cell_slots[cell].push(sched.len());
            sched.push(SchedUser {
                pos,
                key,
                cell,
                slot,
                serving: Serving {
                    tier: Tier::Mbs,
                    idx: 0,
                    los: false,
                    dist: 0.0,
                },
            });
        }
    }

    // Biased association for every scheduled user.
    let mut mbs_users: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
    let mut scb_users: Vec<Vec<usize>> = vec![Vec::new(); real.scb.len()];
    for i in 0..sched.len() {
        let serving = associate(&sched[i].pos, sched[i].key, &real, model, config);
        sched[i].serving = serving;
        match serving.tier {
            Tier::Mbs => mbs_users[serving.idx].push(i),
            Tier::Scb => scb_users[serving.idx].push(i),
        }
    }

    Ok(ScheduledNetwork {
        real,
        sched,
        cell_slots,
        mbs_users,
        scb_users,
        typical_cell: typical_cov.idx,
        user_resamples,
        deficient_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::rng::realization_rng;
    use crate::montecarlo::SimConfig;
    use crate::propagation::default_3gpp_model;

    fn small_sim() -> SimConfig {
        let mut network = NetworkConfig::paper_defaults();
        network.lambda_s = 3.0;
        network.lambda_u = 300.0;
        network.n_users = 4;
        network.tau = 4;
        SimConfig {
            window_radius: 3.0,
            n_realizations: 1,
            seed: 11,
            network,
            model: default_3gpp_model(),
        }
    }

    #[test]
    fn sampling_counts_match_means() {
        let sim = small_sim();
        let area = std::f64::consts::PI * 9.0;
        let n = 400;
        let mut tot_m = 0usize;
        let mut tot_s = 0usize;
        for i in 0..n {
            let mut rng = realization_rng(sim.seed, i as u64);
            let real = sample_network(&sim, i as u64, &mut rng);
            tot_m += real.mbs.len();
            tot_s += real.scb.len();
            for p in &real.scb {
                assert!(p.dist(&Point::ORIGIN) <= sim.window_radius + 1e-12);
            }
        }
        let mean_m = tot_m as f64 / n as f64;
        let exp_m = sim.network.lambda_m * area;
        let sigma = (exp_m / n as f64).sqrt();
        assert!((mean_m - exp_m).abs() < 4.0 * sigma, "mean {mean_m} vs {exp_m}");
        let mean_s = tot_s as f64 / n as f64;
        let exp_s = sim.network.lambda_s * area;
        assert!((mean_s - exp_s).abs() < 4.0 * (exp_s / n as f64).sqrt(), "mean {mean_s} vs {exp_s}");
    }

    #[test]
    fn no_scbs_when_density_zero() {
        let mut sim = small_sim();
        sim.network.lambda_s = 0.0;
        for i in 0..20 {
            let mut rng = realization_rng(3, i);
            let real = sample_network(&sim, i, &mut rng);
            assert!(real.scb.is_empty());
        }
    }

    #[test]
    fn los_tag_fraction_tracks_profile() {
        // At r = 0.15 under the 0.3 km linear profile the LoS probability
        // is 0.5; check the tag frequency over many (bs, user) pairs.
        let sim = small_sim();
        let tagger = LinkTagger::new(7, 0);
        let model = sim.model;
        let mut los = 0usize;
        let n = 40_000usize;
        for u in 0..n {
            if tagger.los(&model, Tier::Mbs, u % 57, u as u64 + 1, 0.15) {
                los += 1;
            }
        }
        let frac = los as f64 / n as f64;
        assert!((frac - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "frac = {frac}");
    }

    #[test]
    fn tags_are_stable_per_link() {
        let sim = small_sim();
        let tagger = LinkTagger::new(9, 4);
        for i in 0..200 {
            let a = tagger.los(&sim.model, Tier::Scb, i, 33, 0.21);
            let b = tagger.los(&sim.model, Tier::Scb, i, 33, 0.21);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn schedule_fills_cells_and_associates_everyone() {
        let sim = small_sim();
        let mut rng = realization_rng(sim.seed, 0);
        let real = sample_network(&sim, 0, &mut rng);
        let n_cells = real.mbs.len();
        let net = schedule_and_associate(real, &sim.model, &sim.network, &mut rng).unwrap();
        assert_eq!(net.typical().key, TYPICAL_KEY);
        assert_eq!(net.typical().slot, 0);
        // Every cell filled (dense users) and every scheduled user appears
        // in exactly one BS list.
        if net.deficient_cells == 0 {
            for slots in &net.cell_slots {
                assert_eq!(slots.len(), sim.network.n_users as usize);
            }
            assert_eq!(net.sched.len(), n_cells * sim.network.n_users as usize);
        }
        let mut seen = vec![0usize; net.sched.len()];
        for list in net.mbs_users.iter().chain(net.scb_users.iter()) {
            for &u in list {
                seen[u] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "each user in exactly one BS list");
        // Users associated to an MBS must be associated to their own cell's MBS.
        for u in &net.sched {
            if u.serving.tier == Tier::Mbs {
                assert_eq!(u.serving.idx, u.cell);
            }
        }
    }

    #[test]
    fn huge_bias_pushes_association_to_scbs() {
        let mut sim = small_sim();
        sim.network.bias = 1e9;
        let mut scb_assoc = 0usize;
        let mut total = 0usize;
        for i in 0..40 {
            let mut rng = realization_rng(5, i);
            let real = sample_network(&sim, i, &mut rng);
            if real.scb.is_empty() {
                continue;
            }
            let net = schedule_and_associate(real, &sim.model, &sim.network, &mut rng).unwrap();
            total += 1;
            if net.typical().serving.tier == Tier::Scb {
                scb_assoc += 1;
            }
        }
        assert!(total > 20);
        assert!(
            scb_assoc as f64 / total as f64 > 0.95,
            "bias -> inf should force SCB association ({scb_assoc}/{total})"
        );
    }
}
