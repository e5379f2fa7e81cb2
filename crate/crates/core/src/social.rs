//! Connection strength between socially connected machines.
//!
//! A machine `i` evaluates a peer `j` along three axes:
//!
//! - interest: the fraction of `i`'s interests that `j` shares,
//! - spatial: one minus the normalized distance between their subspaces,
//! - neighbor: the fraction of `i`'s followees that `j` also follows.
//!
//! The weighted sum of the axes is the connection strength. A link forms when
//! the strength reaches the connection threshold, and once formed its strength
//! decays as `exp(-a * dt)` until it drops strictly below the threshold.
//!
//! Everything here is a pure function of its arguments.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type MachineId = u32;

/// Absolute tolerance on `w_interest + w_spatial + w_neighbor = 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// The public record of a machine: where it is, what it cares about, and
/// whom it follows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineProfile {
    pub id: MachineId,
    /// 0-based subspace index in a 1-D space.
    pub location: usize,
    interests: FixedBitSet,
    followees: FixedBitSet,
}

impl MachineProfile {
    pub fn new(id: MachineId, location: usize, interests: impl IntoIterator<Item = usize>) -> Self {
        let mut set = FixedBitSet::new();
        for interest in interests {
            set.grow(interest + 1);
            set.insert(interest);
        }
        Self {
            id,
            location,
            interests: set,
            followees: FixedBitSet::new(),
        }
    }

    /// Builder-style variant of [`MachineProfile::follow`].
    pub fn with_followees(
        mut self,
        followees: impl IntoIterator<Item = MachineId>,
    ) -> Result<Self> {
        for f in followees {
            self.follow(f)?;
        }
        Ok(self)
    }

    pub fn follow(&mut self, followee: MachineId) -> Result<()> {
        if followee == self.id {
            return Err(Error::InvalidProfile(format!(
                "machine {} cannot follow itself",
                self.id
            )));
        }
        let idx = followee as usize;
        self.followees.grow(idx + 1);
        self.followees.insert(idx);
        Ok(())
    }

    pub fn unfollow(&mut self, followee: MachineId) {
        let idx = followee as usize;
        if idx < self.followees.len() {
            self.followees.set(idx, false);
        }
    }

    pub fn follows(&self, other: MachineId) -> bool {
        self.followees.contains(other as usize)
    }

    pub fn has_interest(&self, interest: usize) -> bool {
        self.interests.contains(interest)
    }

    pub fn interests(&self) -> impl Iterator<Item = usize> + '_ {
        self.interests.ones()
    }

    pub fn interest_count(&self) -> usize {
        self.interests.count_ones(..)
    }

    pub fn followees(&self) -> impl Iterator<Item = MachineId> + '_ {
        self.followees.ones().map(|f| f as MachineId)
    }

    pub fn followee_count(&self) -> usize {
        self.followees.count_ones(..)
    }

    pub(crate) fn replace_interest(&mut self, old: usize, new: usize) {
        self.interests.set(old, false);
        self.interests.grow(new + 1);
        self.interests.insert(new);
    }
}

/// Axis weights; non-negative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub interest: f64,
    pub spatial: f64,
    pub neighbor: f64,
}

impl Weights {
    pub fn new(interest: f64, spatial: f64, neighbor: f64) -> Result<Self> {
        let w = Self {
            interest,
            spatial,
            neighbor,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn equal() -> Self {
        Self {
            interest: 1.0 / 3.0,
            spatial: 1.0 / 3.0,
            neighbor: 1.0 / 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("interest", self.interest),
            ("spatial", self.spatial),
            ("neighbor", self.neighbor),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "{name} weight must be finite and >= 0, got {v}"
                )));
            }
        }
        let sum = self.interest + self.spatial + self.neighbor;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!(
                "weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Self::equal()
    }
}

/// Decay constant (per step) and connection threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub a: f64,
    pub c_th: f64,
}

impl DecayParams {
    pub fn new(a: f64, c_th: f64) -> Result<Self> {
        let d = Self { a, c_th };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::InvalidDecay(format!(
                "decay constant must be > 0, got {}",
                self.a
            )));
        }
        if !(0.0..=1.0).contains(&self.c_th) {
            return Err(Error::InvalidDecay(format!(
                "connection threshold must lie in [0, 1], got {}",
                self.c_th
            )));
        }
        Ok(())
    }
}

impl Default for DecayParams {
    fn default() -> Self {
        Self { a: 0.1, c_th: 0.45 }
    }
}

/// Per-axis values and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthBreakdown {
    pub interest: f64,
    pub spatial: f64,
    pub neighbor: f64,
    pub total: f64,
}

/// Number of whole steps after creation at which a link is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Expiry {
    After(u64),
    Never,
}

fn overlap_ratio(own: &FixedBitSet, other: &FixedBitSet) -> f64 {
    let n = own.count_ones(..);
    if n == 0 {
        return 0.0;
    }
    own.intersection_count(other) as f64 / n as f64
}

/// `|I(i) ∩ I(j)| / |I(i)|`, or 0 when `i` has no interests.
pub fn interest_similarity(i: &MachineProfile, j: &MachineProfile) -> f64 {
    overlap_ratio(&i.interests, &j.interests)
}

/// `1 - |x(i) - x(j)| / max_dist`.
pub fn spatial_similarity(i: &MachineProfile, j: &MachineProfile, max_dist: f64) -> Result<f64> {
    if !(max_dist.is_finite() && max_dist > 0.0) {
        return Err(Error::InvalidDistance(format!(
            "max distance must be > 0, got {max_dist}"
        )));
    }
    let dist = i.location.abs_diff(j.location) as f64;
    if dist > max_dist {
        return Err(Error::InvalidDistance(format!(
            "distance {dist} between machines {} and {} exceeds max distance {max_dist}",
            i.id, j.id
        )));
    }
    Ok(1.0 - dist / max_dist)
}

/// `|N(i) ∩ N(j)| / |N(i)|` over followee sets, or 0 when `i` follows nobody.
pub fn neighbor_similarity(i: &MachineProfile, j: &MachineProfile) -> f64 {
    overlap_ratio(&i.followees, &j.followees)
}

pub fn connection_strength(
    i: &MachineProfile,
    j: &MachineProfile,
    weights: &Weights,
    max_dist: f64,
) -> Result<StrengthBreakdown> {
    let interest = interest_similarity(i, j);
    let spatial = spatial_similarity(i, j, max_dist)?;
    let neighbor = neighbor_similarity(i, j);
    let total =
        weights.interest * interest + weights.spatial * spatial + weights.neighbor * neighbor;
    Ok(StrengthBreakdown {
        interest,
        spatial,
        neighbor,
        // rounding in the weighted sum can overshoot 1 by an ulp
        total: total.clamp(0.0, 1.0),
    })
}

/// Link formation predicate: `c_ij >= c_th`.
pub fn should_connect(c_ij: f64, c_th: f64) -> bool {
    c_ij >= c_th
}

/// `exp(-a * delta_t)`.
pub fn decayed_strength(delta_t: u64, a: f64) -> f64 {
    (-a * delta_t as f64).exp()
}

/// Smallest `dt >= 1` with `exp(-a * dt) < c_th`.
///
/// A strength equal to the threshold keeps the link alive. `c_th = 0` never
/// expires and `c_th = 1` expires after one step.
pub fn link_expiry_step(a: f64, c_th: f64) -> Result<Expiry> {
    DecayParams::new(a, c_th)?;
    expiry_from(1.0, a, c_th)
}

/// Expiry of a link whose strength at formation was `initial` (the scaled
/// decay variant); `initial = 1` gives [`link_expiry_step`].
pub fn expiry_from(initial: f64, a: f64, c_th: f64) -> Result<Expiry> {
    DecayParams::new(a, c_th)?;
    if c_th == 0.0 {
        return Ok(Expiry::Never);
    }
    let below = |dt: u64| initial * decayed_strength(dt, a) < c_th;
    if initial <= 0.0 || below(1) {
        return Ok(Expiry::After(1));
    }
    // closed form, then settle against the exact comparison used at runtime
    let estimate = ((initial / c_th).ln() / a).floor().max(0.0) as u64 + 1;
    let mut dt = estimate.max(1);
    while dt > 1 && below(dt - 1) {
        dt -= 1;
    }
    while !below(dt) {
        dt += 1;
    }
    Ok(Expiry::After(dt))
}
