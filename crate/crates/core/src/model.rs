//! Domain types: mining power splits, rushing ability, strategies, revenue
//! breakdowns and relative extra rewards.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for comparisons between fractions.
pub const TOLERANCE: f64 = 1e-12;

fn within(name: &'static str, value: f64, lo: f64, hi: f64, bounds: &'static str) -> Result<f64> {
    if value.is_finite() && value >= lo - TOLERANCE && value <= hi + TOLERANCE {
        Ok(value)
    } else {
        Err(Error::Range {
            name,
            value,
            bounds,
        })
    }
}

/// Checks that `value` is a finite number in `[0, 1]`.
pub fn unit_fraction(name: &'static str, value: f64) -> Result<f64> {
    within(name, value, 0.0, 1.0, "[0, 1]")
}

/// Checks an attacker power: `0 <= alpha_a < 0.5`.
pub fn attacker_fraction(alpha_a: f64) -> Result<f64> {
    if (-TOLERANCE..0.5).contains(&alpha_a) {
        Ok(alpha_a)
    } else {
        Err(Error::Range {
            name: "alpha_a",
            value: alpha_a,
            bounds: "[0, 0.5)",
        })
    }
}

/// Normalized mining powers of the attacker, the attracted rational miners
/// and the public miners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSplit {
    alpha_a: f64,
    alpha_i: f64,
    alpha_h: f64,
}

impl PowerSplit {
    /// Builds a split from all three powers, validating ranges and the unit sum.
    pub fn new(alpha_a: f64, alpha_i: f64, alpha_h: f64) -> Result<Self> {
        attacker_fraction(alpha_a)?;
        within("alpha_i", alpha_i, 0.0, 0.5, "[0, 0.5]")?;
        unit_fraction("alpha_h", alpha_h)?;
        let sum = alpha_a + alpha_i + alpha_h;
        if (sum - 1.0).abs() > TOLERANCE {
            return Err(Error::Normalization { sum });
        }
        Ok(Self {
            alpha_a,
            alpha_i,
            alpha_h,
        })
    }

    /// Builds a split where the public miners hold whatever power remains.
    pub fn with_attracted(alpha_a: f64, alpha_i: f64) -> Result<Self> {
        let rest = 1.0 - alpha_a - alpha_i;
        let alpha_h = if rest < 0.0 && rest > -TOLERANCE {
            0.0
        } else {
            rest
        };
        Self::new(alpha_a, alpha_i, alpha_h)
    }

    pub fn alpha_a(&self) -> f64 {
        self.alpha_a
    }

    pub fn alpha_i(&self) -> f64 {
        self.alpha_i
    }

    pub fn alpha_h(&self) -> f64 {
        self.alpha_h
    }

    /// Power of everyone except the attacker, the "rest of the network" of
    /// classic selfish mining.
    pub fn alpha_r(&self) -> f64 {
        1.0 - self.alpha_a
    }

    /// Fails unless attacker plus attracted power is strictly below one half.
    pub fn require_apsm(&self) -> Result<()> {
        let combined = self.alpha_a + self.alpha_i;
        if combined < 0.5 {
            Ok(())
        } else {
            Err(Error::ApsmPower { combined })
        }
    }
}

/// Power of one rational miner considered on its own.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MinerPower(f64);

impl MinerPower {
    pub fn new(alpha_k: f64) -> Result<Self> {
        within("alpha_k", alpha_k, 0.0, 0.5, "[0, 0.5]").map(Self)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Fails if the miner and the attacker together exceed the whole network.
    pub fn paired_with(self, alpha_a: f64) -> Result<Self> {
        if self.0 <= 1.0 - alpha_a + TOLERANCE {
            Ok(self)
        } else {
            Err(Error::Range {
                name: "alpha_k",
                value: self.0,
                bounds: "[0, 1 - alpha_a]",
            })
        }
    }
}

/// Fraction of public miners that adopt the attacker's branch during a race.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct RushingAbility(f64);

impl RushingAbility {
    pub fn new(gamma: f64) -> Result<Self> {
        unit_fraction("gamma", gamma).map(|g| Self(g.clamp(0.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Mining strategy of the attacker. The declaration order is the tie-break
/// precedence used when two strategies earn the same profit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackerStrategy {
    Honest,
    Selfish,
    Psm,
    Apsm,
}

impl AttackerStrategy {
    pub const ALL: [AttackerStrategy; 4] = [Self::Honest, Self::Selfish, Self::Psm, Self::Apsm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Honest => "honest",
            Self::Selfish => "selfish",
            Self::Psm => "psm",
            Self::Apsm => "apsm",
        }
    }
}

impl fmt::Display for AttackerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackerStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown strategy `{s}` (expected honest, selfish, psm or apsm)")
            })
    }
}

/// Strategy of a rational miner facing an attacker that shares partial blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinerStrategy {
    /// Mine on the longest public chain.
    Public,
    /// Mine on the attacker's private branch.
    Greedy,
}

impl fmt::Display for MinerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Public => "public",
            Self::Greedy => "greedy",
        })
    }
}

/// Actor classes that can be credited with blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Attacker,
    Attracted,
    Honest,
    MinerK,
}

impl Actor {
    pub const ALL: [Actor; 4] = [Self::Attacker, Self::Attracted, Self::Honest, Self::MinerK];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Attacker => "attacker",
            Self::Attracted => "attracted",
            Self::Honest => "honest",
            Self::MinerK => "miner_k",
        }
    }
}

/// Block-generation rates per actor and the matching normalized profit shares.
///
/// `miner_k` is only populated by the single-rational-miner chains; elsewhere
/// it is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RevenueBreakdown {
    pub rev_attacker: f64,
    pub rev_attracted: f64,
    pub rev_honest: f64,
    pub rev_miner_k: f64,
    pub share_attacker: f64,
    pub share_attracted: f64,
    pub share_honest: f64,
    pub share_miner_k: f64,
}

impl RevenueBreakdown {
    /// Normalizes rates into shares. Zero total throughput yields zero shares.
    pub fn from_rates(rates: [f64; 4]) -> Self {
        let total: f64 = rates.iter().sum();
        let share = |r: f64| if total > 0.0 { r / total } else { 0.0 };
        Self {
            rev_attacker: rates[0],
            rev_attracted: rates[1],
            rev_honest: rates[2],
            rev_miner_k: rates[3],
            share_attacker: share(rates[0]),
            share_attracted: share(rates[1]),
            share_honest: share(rates[2]),
            share_miner_k: share(rates[3]),
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.rev_attacker + self.rev_attracted + self.rev_honest + self.rev_miner_k
    }

    pub fn share(&self, actor: Actor) -> f64 {
        match actor {
            Actor::Attacker => self.share_attacker,
            Actor::Attracted => self.share_attracted,
            Actor::Honest => self.share_honest,
            Actor::MinerK => self.share_miner_k,
        }
    }

    pub fn shares(&self) -> [f64; 4] {
        [
            self.share_attacker,
            self.share_attracted,
            self.share_honest,
            self.share_miner_k,
        ]
    }
}

/// Relative extra reward of one revenue over a baseline, as a fraction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Rer(pub f64);

impl Rer {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn percent(self) -> f64 {
        self.0 * 100.0
    }
}

impl fmt::Display for Rer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}%", self.percent())
    }
}

/// `(candidate - baseline) / baseline`.
pub fn rer(candidate: f64, baseline: f64) -> Result<Rer> {
    if !(baseline.is_finite() && baseline > 0.0) {
        return Err(Error::ZeroBaseline);
    }
    Ok(Rer((candidate - baseline) / baseline))
}

/// A validated (powers, rushing ability, strategy) triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitQuery {
    pub powers: PowerSplit,
    pub gamma: RushingAbility,
    pub strategy: AttackerStrategy,
}

impl ProfitQuery {
    pub fn new(
        powers: PowerSplit,
        gamma: RushingAbility,
        strategy: AttackerStrategy,
    ) -> Result<Self> {
        validate_scenario(powers, gamma, strategy)
    }
}

/// Returns the scenario unchanged when every constraint holds, including the
/// power cap that only applies to the advanced strategy.
pub fn validate_scenario(
    powers: PowerSplit,
    gamma: RushingAbility,
    strategy: AttackerStrategy,
) -> Result<ProfitQuery> {
    // Revalidate in case the split was built through deserialization.
    let powers = PowerSplit::new(powers.alpha_a, powers.alpha_i, powers.alpha_h)?;
    let gamma = RushingAbility::new(gamma.value())?;
    if strategy == AttackerStrategy::Apsm {
        powers.require_apsm()?;
    }
    Ok(ProfitQuery {
        powers,
        gamma,
        strategy,
    })
}
