//! Discrete-time population dynamics.
//!
//! Each [`Network::step`] runs three phases in a fixed order:
//!
//! 1. decay: links whose decayed strength is strictly below the threshold are
//!    removed,
//! 2. churn: machines may relocate and swap one interest,
//! 3. discovery: every visible ordered pair without a live link is scored
//!    against the profiles as they stand after churn, and all qualifying
//!    links are added at once.
//!
//! Because phase 3 runs after phase 1, a link that just expired may re-form
//! in the same step unless a refractory period is configured.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::social::{
    connection_strength, decayed_strength, should_connect, DecayParams, MachineId, MachineProfile,
    Weights,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Visibility {
    /// Every machine can reach every other machine.
    Infrastructure,
    /// Machines only see peers within `range` subspaces.
    Adhoc { range: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Churn {
    pub p_move: f64,
    pub p_interest: f64,
}

impl Churn {
    pub const NONE: Churn = Churn {
        p_move: 0.0,
        p_interest: 0.0,
    };
}

impl Default for Churn {
    fn default() -> Self {
        Self {
            p_move: 0.05,
            p_interest: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub machine_count: usize,
    pub subspace_count: usize,
    pub interest_universe: usize,
    pub interests_per_machine: usize,
    pub weights: Weights,
    pub decay: DecayParams,
    pub visibility: Visibility,
    pub churn: Churn,
    pub steps: u64,
    pub seed: u64,
    /// Multiply the decayed strength by the strength at formation.
    pub decay_scaled: bool,
    /// Steps a pair must wait after expiry before it may re-form.
    pub refractory: u64,
    /// Upper bound on [`Post::hop_limit`]; `None` means unbounded.
    pub hop_cap: Option<u32>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            machine_count: 100,
            subspace_count: 10,
            interest_universe: 10,
            interests_per_machine: 5,
            weights: Weights::default(),
            decay: DecayParams::default(),
            visibility: Visibility::Infrastructure,
            churn: Churn::default(),
            steps: 200,
            seed: 1,
            decay_scaled: false,
            refractory: 0,
            hop_cap: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.machine_count == 0 {
            return bad("machine_count must be > 0".into());
        }
        if self.machine_count > MachineId::MAX as usize {
            return bad(format!("machine_count exceeds {}", MachineId::MAX));
        }
        if self.subspace_count == 0 {
            return bad("subspace_count must be > 0".into());
        }
        if self.interest_universe == 0 {
            return bad("interest_universe must be > 0".into());
        }
        if self.interests_per_machine == 0 || self.interests_per_machine > self.interest_universe {
            return bad(format!(
                "interests_per_machine must be in 1..={}, got {}",
                self.interest_universe, self.interests_per_machine
            ));
        }
        if self.steps == 0 {
            return bad("steps must be > 0".into());
        }
        self.weights.validate()?;
        self.decay.validate()?;
        for (name, p) in [
            ("p_move", self.churn.p_move),
            ("p_interest", self.churn.p_interest),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        if let Visibility::Adhoc { range } = self.visibility {
            if range >= self.subspace_count {
                return bad(format!(
                    "adhoc range {range} must be < subspace_count {}",
                    self.subspace_count
                ));
            }
        }
        Ok(())
    }

    /// Normalizing distance for the spatial axis. A single subspace puts
    /// every pair at distance zero, so any positive value works there.
    pub fn max_distance(&self) -> f64 {
        self.subspace_count.saturating_sub(1).max(1) as f64
    }
}

/// Directed follower -> followee edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub follower: MachineId,
    pub followee: MachineId,
    pub created_at: u64,
    pub strength_at_formation: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub origin: MachineId,
    pub payload: Vec<u8>,
    pub hop_limit: u32,
}

impl Post {
    pub fn new(origin: MachineId, payload: impl Into<Vec<u8>>, hop_limit: u32) -> Self {
        Self {
            origin,
            payload: payload.into(),
            hop_limit,
        }
    }

    pub fn unlimited(origin: MachineId, payload: impl Into<Vec<u8>>) -> Self {
        Self::new(origin, payload, u32::MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    /// Index of the step that was executed (the counter before increment).
    pub step: u64,
    pub formed: usize,
    pub expired: usize,
    pub live: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTrace {
    pub machine_count: usize,
    pub reports: Vec<StepReport>,
}

impl RunTrace {
    pub fn mean_connections(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.machine_count as f64;
        self.reports.iter().map(move |r| r.live as f64 / m)
    }
}

/// A population of machines and its live follow graph.
#[derive(Debug, Clone)]
pub struct Network {
    machines: Vec<MachineProfile>,
    links: BTreeMap<(MachineId, MachineId), Link>,
    step: u64,
    config: SimConfig,
    rng: ChaCha8Rng,
    discovery: bool,
    expired_at: HashMap<(MachineId, MachineId), u64>,
}

impl Network {
    /// Places every machine in a uniform subspace with a uniform
    /// `interests_per_machine`-subset of the interest universe.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let machines = (0..config.machine_count)
            .map(|id| {
                let location = rng.gen_range(0..config.subspace_count);
                let interests = index::sample(
                    &mut rng,
                    config.interest_universe,
                    config.interests_per_machine,
                );
                MachineProfile::new(id as MachineId, location, interests)
            })
            .collect();
        Ok(Self {
            machines,
            links: BTreeMap::new(),
            step: 0,
            config,
            rng,
            discovery: true,
            expired_at: HashMap::new(),
        })
    }

    /// Builds a network around hand-made profiles. Ids must be `0..len` in
    /// order and any followees already present become links created at step 0.
    pub fn from_profiles(config: SimConfig, machines: Vec<MachineProfile>) -> Result<Self> {
        let config = SimConfig {
            machine_count: machines.len(),
            ..config
        };
        config.validate()?;
        let mut links = BTreeMap::new();
        for (idx, m) in machines.iter().enumerate() {
            if m.id as usize != idx {
                return Err(Error::InvalidConfig(format!(
                    "profile at index {idx} has id {}",
                    m.id
                )));
            }
            if m.location >= config.subspace_count {
                return Err(Error::InvalidProfile(format!(
                    "machine {} location {} outside 0..{}",
                    m.id, m.location, config.subspace_count
                )));
            }
            for f in m.followees() {
                if f as usize >= machines.len() {
                    return Err(Error::UnknownMachine(f));
                }
                links.insert(
                    (m.id, f),
                    Link {
                        follower: m.id,
                        followee: f,
                        created_at: 0,
                        strength_at_formation: 1.0,
                    },
                );
            }
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            machines,
            links,
            step: 0,
            config,
            rng,
            discovery: true,
            expired_at: HashMap::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn machines(&self) -> &[MachineProfile] {
        &self.machines
    }

    pub fn machine(&self, id: MachineId) -> Option<&MachineProfile> {
        self.machines.get(id as usize)
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn link(&self, follower: MachineId, followee: MachineId) -> Option<&Link> {
        self.links.get(&(follower, followee))
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    /// Turns phase 3 of [`Network::step`] on or off. With discovery off the
    /// link set only shrinks.
    pub fn set_discovery(&mut self, enabled: bool) {
        self.discovery = enabled;
    }

    fn can_see(&self, i: usize, j: usize) -> bool {
        match self.config.visibility {
            Visibility::Infrastructure => true,
            Visibility::Adhoc { range } => {
                self.machines[i]
                    .location
                    .abs_diff(self.machines[j].location)
                    <= range
            }
        }
    }

    /// Ordered pairs `(i, j)`, `i != j`, that can discover each other.
    pub fn visible_pairs(&self) -> Vec<(MachineId, MachineId)> {
        let m = self.machines.len();
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                if i != j && self.can_see(i, j) {
                    out.push((i as MachineId, j as MachineId));
                }
            }
        }
        out
    }

    pub fn step(&mut self) -> StepReport {
        let now = self.step;
        let expired = self.expire_links(now);
        self.apply_churn();
        let formed = if self.discovery {
            self.form_links(now)
        } else {
            0
        };
        self.step += 1;
        StepReport {
            step: now,
            formed,
            expired,
            live: self.links.len(),
        }
    }

    fn expire_links(&mut self, now: u64) -> usize {
        let DecayParams { a, c_th } = self.config.decay;
        let scaled = self.config.decay_scaled;
        let dead: Vec<(MachineId, MachineId)> = self
            .links
            .iter()
            .filter(|(_, link)| {
                let mut strength = decayed_strength(now - link.created_at, a);
                if scaled {
                    strength *= link.strength_at_formation;
                }
                strength < c_th
            })
            .map(|(key, _)| *key)
            .collect();
        for &(follower, followee) in &dead {
            self.links.remove(&(follower, followee));
            self.machines[follower as usize].unfollow(followee);
            if self.config.refractory > 0 {
                self.expired_at.insert((follower, followee), now);
            }
        }
        dead.len()
    }

    fn apply_churn(&mut self) {
        let Churn { p_move, p_interest } = self.config.churn;
        let s = self.config.subspace_count;
        let k = self.config.interest_universe;
        for machine in &mut self.machines {
            if self.rng.gen_bool(p_move) {
                machine.location = self.rng.gen_range(0..s);
            }
            if self.rng.gen_bool(p_interest) {
                let held: Vec<usize> = machine.interests().collect();
                let free: Vec<usize> = (0..k).filter(|x| !machine.has_interest(*x)).collect();
                if held.is_empty() || free.is_empty() {
                    continue;
                }
                let old = held[self.rng.gen_range(0..held.len())];
                let new = free[self.rng.gen_range(0..free.len())];
                machine.replace_interest(old, new);
            }
        }
    }

    fn form_links(&mut self, now: u64) -> usize {
        let weights = self.config.weights;
        let c_th = self.config.decay.c_th;
        let max_dist = self.config.max_distance();
        let refractory = self.config.refractory;
        let m = self.machines.len();

        let mut new_links = Vec::new();
        for i in 0..m {
            let mi = &self.machines[i];
            for j in 0..m {
                if i == j || !self.can_see(i, j) || mi.follows(j as MachineId) {
                    continue;
                }
                let key = (i as MachineId, j as MachineId);
                if refractory > 0 {
                    if let Some(&t) = self.expired_at.get(&key) {
                        if now < t + refractory {
                            continue;
                        }
                    }
                }
                let strength = connection_strength(mi, &self.machines[j], &weights, max_dist)
                    .expect("locations are within the configured space")
                    .total;
                if should_connect(strength, c_th) {
                    new_links.push((key, strength));
                }
            }
        }

        for &((follower, followee), strength) in &new_links {
            self.machines[follower as usize]
                .follow(followee)
                .expect("pairs exclude self");
            self.links.insert(
                (follower, followee),
                Link {
                    follower,
                    followee,
                    created_at: now,
                    strength_at_formation: strength,
                },
            );
            self.expired_at.remove(&(follower, followee));
        }
        new_links.len()
    }

    pub fn run(&mut self, steps: u64) -> Result<RunTrace> {
        if steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        let reports = (0..steps).map(|_| self.step()).collect();
        Ok(RunTrace {
            machine_count: self.machines.len(),
            reports,
        })
    }

    /// Machines reached when a post flows from followees to their followers,
    /// at most `hop_limit` hops from the origin. The origin is always
    /// included.
    pub fn disseminate(&self, post: &Post) -> Result<BTreeSet<MachineId>> {
        if post.origin as usize >= self.machines.len() {
            return Err(Error::UnknownMachine(post.origin));
        }
        if let Some(cap) = self.config.hop_cap {
            if post.hop_limit > cap {
                return Err(Error::InvalidPost(format!(
                    "hop limit {} exceeds cap {cap}",
                    post.hop_limit
                )));
            }
        }
        let mut followers: Vec<Vec<MachineId>> = vec![Vec::new(); self.machines.len()];
        for link in self.links.values() {
            followers[link.followee as usize].push(link.follower);
        }

        let mut reached = BTreeSet::from([post.origin]);
        let mut queue = VecDeque::from([(post.origin, 0u32)]);
        while let Some((m, hops)) = queue.pop_front() {
            if hops >= post.hop_limit {
                continue;
            }
            for &f in &followers[m as usize] {
                if reached.insert(f) {
                    queue.push_back((f, hops + 1));
                }
            }
        }
        Ok(reached)
    }

    #[cfg(test)]
    pub(crate) fn check_consistency(&self) {
        for m in &self.machines {
            let from_profile: BTreeSet<MachineId> = m.followees().collect();
            let from_links: BTreeSet<MachineId> = self
                .links
                .range((m.id, 0)..=(m.id, MachineId::MAX))
                .map(|(_, l)| l.followee)
                .collect();
            assert_eq!(from_profile, from_links, "machine {}", m.id);
        }
    }
}

/// Convenience wrapper: build a network from `config` and run it for
/// `config.steps` steps.
pub fn run(config: SimConfig) -> Result<(Network, RunTrace)> {
    let steps = config.steps;
    let mut net = Network::new(config)?;
    let trace = net.run(steps)?;
    Ok((net, trace))
}
