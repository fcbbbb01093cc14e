//! Explicit Markov reward chains for each strategy, a stationary solver and
//! per-transition reward attribution.
//!
//! Every transition carries integer block credits per actor class. When an
//! outcome is random (a race split or the owner of a settling private block)
//! the transition is split into parallel edges, one per outcome, so rewards
//! stay integral.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Actor, PowerSplit, RevenueBreakdown, RushingAbility};

/// Depth used by the truncated cross-check solver unless told otherwise.
pub const DEFAULT_TRUNCATION_DEPTH: u32 = 64;

/// Which strategy, and whose point of view, a chain encodes.
///
/// For the two `*MinerPublic` variants the `alpha_i` slot of the power split
/// holds the power of the single rational miner `k`, who mines publicly;
/// nobody is attracted in those chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainVariant {
    Honest,
    Selfish,
    PsmAttacker,
    PsmMinerPublic,
    ApsmAttacker,
    ApsmMinerPublic,
}

impl ChainVariant {
    pub const ALL: [ChainVariant; 6] = [
        Self::Honest,
        Self::Selfish,
        Self::PsmAttacker,
        Self::PsmMinerPublic,
        Self::ApsmAttacker,
        Self::ApsmMinerPublic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Honest => "honest",
            Self::Selfish => "selfish",
            Self::PsmAttacker => "psm-attacker",
            Self::PsmMinerPublic => "psm-miner-public",
            Self::ApsmAttacker => "apsm-attacker",
            Self::ApsmMinerPublic => "apsm-miner-public",
        }
    }

    /// True for the chains that track a lone public rational miner.
    pub fn tracks_miner_k(self) -> bool {
        matches!(self, Self::PsmMinerPublic | Self::ApsmMinerPublic)
    }
}

impl fmt::Display for ChainVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChainVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown chain variant `{s}`"))
    }
}

/// State of the fork race seen from the attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateLabel {
    /// One public chain, nothing withheld.
    Zero,
    /// Two competing branches of equal length.
    ZeroPrime,
    /// Race in which the public block belongs to someone other than miner `k`.
    ZeroPrimeOther,
    /// Race in which the public block belongs to miner `k`.
    ZeroPrimeMinerK,
    /// Private branch ahead by the given number of blocks.
    Lead(u32),
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("0"),
            Self::ZeroPrime => f.write_str("0'"),
            Self::ZeroPrimeOther => f.write_str("0'_o"),
            Self::ZeroPrimeMinerK => f.write_str("0'_k"),
            Self::Lead(n) => write!(f, "{n}"),
        }
    }
}

/// Block credits per actor, indexed by [`Actor::index`].
pub type Credits = [u32; 4];

fn credit(pairs: &[(Actor, u32)]) -> Credits {
    let mut c = [0; 4];
    for &(actor, n) in pairs {
        c[actor.index()] += n;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: StateLabel,
    pub to: StateLabel,
    pub probability: f64,
    pub credits: Credits,
}

/// Birth-death tail of lead states deeper than `anchor`. From every tail
/// state the lead grows by one with probability `up`, or shrinks by one
/// through one of the `down` edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricTail {
    pub anchor: u32,
    pub up: f64,
    pub down: Vec<(f64, Credits)>,
}

impl GeometricTail {
    pub fn down_total(&self) -> f64 {
        self.down.iter().map(|(p, _)| p).sum()
    }

    /// Ratio between the probabilities of consecutive tail states.
    pub fn ratio(&self) -> f64 {
        self.up / self.down_total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub variant: ChainVariant,
    pub states: Vec<StateLabel>,
    pub transitions: Vec<Transition>,
    pub tail: Option<GeometricTail>,
}

struct Builder {
    states: Vec<StateLabel>,
    transitions: Vec<Transition>,
}

impl Builder {
    fn new(states: &[StateLabel]) -> Self {
        Self {
            states: states.to_vec(),
            transitions: Vec::new(),
        }
    }

    fn edge(
        &mut self,
        from: StateLabel,
        to: StateLabel,
        probability: f64,
        credits: &[(Actor, u32)],
    ) {
        if probability > 0.0 {
            self.transitions.push(Transition {
                from,
                to,
                probability,
                credits: credit(credits),
            });
        }
    }

    fn finish(self, variant: ChainVariant, tail: Option<GeometricTail>) -> ChainModel {
        ChainModel {
            variant,
            states: self.states,
            transitions: self.transitions,
            tail,
        }
    }
}

use Actor::{Attacker as A, Attracted as I, Honest as H, MinerK as K};
use StateLabel::{Lead, Zero, ZeroPrime, ZeroPrimeMinerK, ZeroPrimeOther};

/// Builds the chain of `variant` for the given powers and rushing ability.
pub fn build_chain(
    powers: PowerSplit,
    gamma: RushingAbility,
    variant: ChainVariant,
) -> Result<ChainModel> {
    let powers = PowerSplit::new(powers.alpha_a(), powers.alpha_i(), powers.alpha_h())?;
    let g = gamma.value();
    let a = powers.alpha_a();
    match variant {
        ChainVariant::Honest => Ok(honest_chain(powers)),
        ChainVariant::Selfish => Ok(apsm_attacker_chain(
            PowerSplit::with_attracted(a, 0.0)?,
            g,
            variant,
        )),
        ChainVariant::PsmAttacker => Ok(psm_attacker_chain(powers, g)),
        ChainVariant::PsmMinerPublic => Ok(psm_miner_chain(powers, g)),
        ChainVariant::ApsmAttacker => {
            powers.require_apsm()?;
            Ok(apsm_attacker_chain(powers, g, variant))
        }
        ChainVariant::ApsmMinerPublic => Ok(apsm_miner_chain(powers, g)),
    }
}

fn honest_chain(p: PowerSplit) -> ChainModel {
    let mut b = Builder::new(&[Zero]);
    b.edge(Zero, Zero, p.alpha_a(), &[(A, 1)]);
    b.edge(Zero, Zero, p.alpha_i(), &[(I, 1)]);
    b.edge(Zero, Zero, p.alpha_h(), &[(H, 1)]);
    b.finish(ChainVariant::Honest, None)
}

fn psm_attacker_chain(p: PowerSplit, g: f64) -> ChainModel {
    let (a, i, h) = (p.alpha_a(), p.alpha_i(), p.alpha_h());
    let mut b = Builder::new(&[Zero, ZeroPrime, Lead(1)]);
    b.edge(Zero, Lead(1), a, &[]);
    b.edge(Zero, Zero, i, &[(I, 1)]);
    b.edge(Zero, Zero, h, &[(H, 1)]);

    b.edge(Lead(1), Zero, a, &[(A, 2)]);
    b.edge(Lead(1), Zero, i, &[(A, 1), (I, 1)]);
    b.edge(Lead(1), ZeroPrime, h, &[]);

    b.edge(ZeroPrime, Zero, a, &[(A, 2)]);
    b.edge(ZeroPrime, Zero, i, &[(A, 1), (I, 1)]);
    b.edge(ZeroPrime, Zero, g * h, &[(A, 1), (H, 1)]);
    b.edge(ZeroPrime, Zero, (1.0 - g) * h, &[(H, 2)]);
    b.finish(ChainVariant::PsmAttacker, None)
}

/// Race edges when miner `k` mines publicly: `k` always extends its own block,
/// everyone else splits by `g`.
fn miner_race_edges(b: &mut Builder, a: f64, k: f64, h: f64, g: f64) {
    for from in [ZeroPrimeOther, ZeroPrimeMinerK] {
        b.edge(from, Zero, a, &[(A, 2)]);
    }
    b.edge(ZeroPrimeOther, Zero, g * k, &[(A, 1), (K, 1)]);
    b.edge(ZeroPrimeOther, Zero, (1.0 - g) * k, &[(H, 1), (K, 1)]);
    b.edge(ZeroPrimeOther, Zero, g * h, &[(A, 1), (H, 1)]);
    b.edge(ZeroPrimeOther, Zero, (1.0 - g) * h, &[(H, 2)]);

    b.edge(ZeroPrimeMinerK, Zero, k, &[(K, 2)]);
    b.edge(ZeroPrimeMinerK, Zero, g * h, &[(A, 1), (H, 1)]);
    b.edge(ZeroPrimeMinerK, Zero, (1.0 - g) * h, &[(K, 1), (H, 1)]);
}

fn psm_miner_chain(p: PowerSplit, g: f64) -> ChainModel {
    let (a, k, h) = (p.alpha_a(), p.alpha_i(), p.alpha_h());
    let mut b = Builder::new(&[Zero, Lead(1), ZeroPrimeOther, ZeroPrimeMinerK]);
    b.edge(Zero, Lead(1), a, &[]);
    b.edge(Zero, Zero, k, &[(K, 1)]);
    b.edge(Zero, Zero, h, &[(H, 1)]);

    b.edge(Lead(1), Zero, a, &[(A, 2)]);
    b.edge(Lead(1), ZeroPrimeOther, h, &[]);
    b.edge(Lead(1), ZeroPrimeMinerK, k, &[]);
    miner_race_edges(&mut b, a, k, h, g);
    b.finish(ChainVariant::PsmMinerPublic, None)
}

fn apsm_attacker_chain(p: PowerSplit, g: f64, variant: ChainVariant) -> ChainModel {
    let (a, i, h) = (p.alpha_a(), p.alpha_i(), p.alpha_h());
    // Probability that a private block after the first belongs to the attacker.
    let own = if a + i > 0.0 { a / (a + i) } else { 1.0 };
    let mut b = Builder::new(&[Zero, ZeroPrime, Lead(1), Lead(2)]);
    b.edge(Zero, Lead(1), a, &[]);
    b.edge(Zero, Zero, i, &[(I, 1)]);
    b.edge(Zero, Zero, h, &[(H, 1)]);

    b.edge(Lead(1), Lead(2), a + i, &[]);
    b.edge(Lead(1), ZeroPrime, h, &[]);

    b.edge(Lead(2), Lead(3), a + i, &[]);
    b.edge(Lead(2), Zero, own * h, &[(A, 2)]);
    b.edge(Lead(2), Zero, (1.0 - own) * h, &[(A, 1), (I, 1)]);

    b.edge(ZeroPrime, Zero, a, &[(A, 2)]);
    b.edge(ZeroPrime, Zero, i, &[(A, 1), (I, 1)]);
    b.edge(ZeroPrime, Zero, g * h, &[(A, 1), (H, 1)]);
    b.edge(ZeroPrime, Zero, (1.0 - g) * h, &[(H, 2)]);

    let mut down = vec![(own * h, credit(&[(A, 1)]))];
    if own < 1.0 {
        down.push(((1.0 - own) * h, credit(&[(I, 1)])));
    }
    b.finish(
        variant,
        Some(GeometricTail {
            anchor: 2,
            up: a + i,
            down,
        }),
    )
}

fn apsm_miner_chain(p: PowerSplit, g: f64) -> ChainModel {
    let (a, k, h) = (p.alpha_a(), p.alpha_i(), p.alpha_h());
    let mut b = Builder::new(&[Zero, Lead(1), ZeroPrimeOther, ZeroPrimeMinerK, Lead(2)]);
    b.edge(Zero, Lead(1), a, &[]);
    b.edge(Zero, Zero, k, &[(K, 1)]);
    b.edge(Zero, Zero, h, &[(H, 1)]);

    b.edge(Lead(1), Lead(2), a, &[]);
    b.edge(Lead(1), ZeroPrimeOther, h, &[]);
    b.edge(Lead(1), ZeroPrimeMinerK, k, &[]);
    miner_race_edges(&mut b, a, k, h, g);

    b.edge(Lead(2), Lead(3), a, &[]);
    b.edge(Lead(2), Zero, 1.0 - a, &[(A, 2)]);
    let tail = GeometricTail {
        anchor: 2,
        up: a,
        down: vec![(1.0 - a, credit(&[(A, 1)]))],
    };
    b.finish(ChainVariant::ApsmMinerPublic, Some(tail))
}

impl ChainModel {
    /// Checks that outgoing probabilities sum to one and that every edge
    /// points at a known state or at the entry of the tail.
    pub fn validate(&self) -> Result<()> {
        let entry = self.tail.as_ref().map(|t| Lead(t.anchor + 1));
        let mut out: HashMap<StateLabel, f64> = self.states.iter().map(|s| (*s, 0.0)).collect();
        for t in &self.transitions {
            if !(t.probability >= 0.0 && t.probability.is_finite()) {
                return Err(Error::SingularChain(format!(
                    "bad probability {} on {} -> {}",
                    t.probability, t.from, t.to
                )));
            }
            if !self.states.contains(&t.to) && Some(t.to) != entry {
                return Err(Error::SingularChain(format!(
                    "edge into unknown state {}",
                    t.to
                )));
            }
            *out.get_mut(&t.from).ok_or_else(|| {
                Error::SingularChain(format!("edge from unknown state {}", t.from))
            })? += t.probability;
        }
        for (state, total) in out {
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::SingularChain(format!("row {state} sums to {total}")));
            }
        }
        if let Some(tail) = &self.tail {
            let total = tail.up + tail.down_total();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::SingularChain(format!("tail rows sum to {total}")));
            }
            if tail.ratio().is_nan() || tail.ratio() >= 1.0 {
                return Err(Error::SingularChain(format!(
                    "tail ratio {} is not below 1",
                    tail.ratio()
                )));
            }
        }
        Ok(())
    }

    /// Replaces the tail with explicit lead states up to `depth`. The deepest
    /// state keeps its upward probability as a self-loop.
    pub fn truncated(&self, depth: u32) -> ChainModel {
        let Some(tail) = &self.tail else {
            return self.clone();
        };
        let mut model = ChainModel {
            tail: None,
            ..self.clone()
        };
        for n in tail.anchor + 1..=depth.max(tail.anchor + 1) {
            model.states.push(Lead(n));
            let up = if n == depth.max(tail.anchor + 1) {
                Lead(n)
            } else {
                Lead(n + 1)
            };
            model.transitions.push(Transition {
                from: Lead(n),
                to: up,
                probability: tail.up,
                credits: [0; 4],
            });
            for &(p, credits) in &tail.down {
                model.transitions.push(Transition {
                    from: Lead(n),
                    to: Lead(n - 1),
                    probability: p,
                    credits,
                });
            }
        }
        model
    }
}

/// Renders the chain as a plain-text transition table.
impl fmt::Display for ChainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {} chain", self.variant)?;
        writeln!(
            f,
            "from\tto\tprobability\tattacker\tattracted\thonest\tminer_k"
        )?;
        let row = |f: &mut fmt::Formatter<'_>, from: &str, to: &str, p: f64, c: &Credits| {
            writeln!(
                f,
                "{from}\t{to}\t{p}\t{}\t{}\t{}\t{}",
                c[0], c[1], c[2], c[3]
            )
        };
        for t in &self.transitions {
            row(
                f,
                &t.from.to_string(),
                &t.to.to_string(),
                t.probability,
                &t.credits,
            )?;
        }
        if let Some(tail) = &self.tail {
            let first = tail.anchor + 1;
            writeln!(f, "# for every n >= {first}")?;
            row(f, "n", "n+1", tail.up, &[0; 4])?;
            for (p, c) in &tail.down {
                row(f, "n", "n-1", *p, c)?;
            }
        }
        Ok(())
    }
}

/// Stationary mass of the geometric tail, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMass {
    /// Depth of the shallowest tail state.
    pub first_depth: u32,
    /// Probability of the shallowest tail state.
    pub first: f64,
    pub ratio: f64,
    /// Total probability of all tail states.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDist {
    pub states: Vec<StateLabel>,
    pub probabilities: Vec<f64>,
    pub tail: Option<TailMass>,
}

impl StationaryDist {
    /// Probability of a state, including states inside the tail.
    pub fn probability(&self, state: StateLabel) -> f64 {
        if let Some(pos) = self.states.iter().position(|s| *s == state) {
            return self.probabilities[pos];
        }
        match (state, self.tail) {
            (Lead(n), Some(t)) if n >= t.first_depth => {
                t.first * t.ratio.powi((n - t.first_depth) as i32)
            }
            _ => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum::<f64>() + self.tail.map_or(0.0, |t| t.mass)
    }
}

/// Solves `x A = b` style systems given as row-major `a` (n x n) and `b`, by
/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::SingularChain(
                "balance equations are degenerate".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot_row[col];
            if factor != 0.0 {
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= factor * p;
                }
                b[col + 1 + offset] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

/// Solves the balance equations of `model`.
///
/// A geometric tail is an excursion that always returns to its anchor, so the
/// finite states are solved with tail entries folded back onto the anchor and
/// the tail mass is then added in closed form.
pub fn stationary(model: &ChainModel) -> Result<StationaryDist> {
    model.validate()?;
    let n = model.states.len();
    let index: HashMap<StateLabel, usize> = model
        .states
        .iter()
        .enumerate()
        .map(|(k, s)| (*s, k))
        .collect();
    let anchor = model.tail.as_ref().map(|t| Lead(t.anchor));

    // Row r of the system is the balance equation of state r; the last row is
    // replaced by the normalization constraint.
    let mut m = vec![vec![0.0; n]; n];
    for t in &model.transitions {
        let from = index[&t.from];
        let to = index
            .get(&t.to)
            .copied()
            .unwrap_or_else(|| index[&anchor.expect("validated")]);
        m[to][from] += t.probability;
        m[from][from] -= t.probability;
    }
    m[n - 1] = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut probabilities = solve_linear(m, rhs)?;

    let tail = model.tail.as_ref().map(|t| {
        let ratio = t.ratio();
        let first = probabilities[index[&Lead(t.anchor)]] * ratio;
        TailMass {
            first_depth: t.anchor + 1,
            first,
            ratio,
            mass: first / (1.0 - ratio),
        }
    });
    let mut tail = tail;
    if let Some(t) = tail.as_mut() {
        let scale = 1.0 / (1.0 + t.mass);
        probabilities.iter_mut().for_each(|p| *p *= scale);
        t.first *= scale;
        t.mass *= scale;
    }
    for p in probabilities.iter_mut() {
        // Clamp round-off below zero on unreachable states.
        if *p < 0.0 && *p > -1e-15 {
            *p = 0.0;
        }
    }
    Ok(StationaryDist {
        states: model.states.clone(),
        probabilities,
        tail,
    })
}

/// Solves the chain with its tail cut at `depth`; used as a cross-check.
pub fn stationary_truncated(
    model: &ChainModel,
    depth: u32,
) -> Result<(ChainModel, StationaryDist)> {
    let cut = model.truncated(depth);
    let dist = stationary(&cut)?;
    Ok((cut, dist))
}

/// Expected credits per step for each actor, normalized into shares.
pub fn reward_rates(model: &ChainModel, dist: &StationaryDist) -> RevenueBreakdown {
    let mut rates = [0.0; 4];
    for t in &model.transitions {
        let weight = dist.probability(t.from) * t.probability;
        for (r, c) in rates.iter_mut().zip(t.credits) {
            *r += weight * f64::from(c);
        }
    }
    if let (Some(tail), Some(mass)) = (&model.tail, dist.tail) {
        for (p, credits) in &tail.down {
            for (r, c) in rates.iter_mut().zip(credits) {
                *r += mass.mass * p * f64::from(*c);
            }
        }
    }
    RevenueBreakdown::from_rates(rates)
}

/// Builds, solves and attributes rewards in one call.
pub fn solve(
    powers: PowerSplit,
    gamma: RushingAbility,
    variant: ChainVariant,
) -> Result<RevenueBreakdown> {
    let model = build_chain(powers, gamma, variant)?;
    let dist = stationary(&model)?;
    Ok(reward_rates(&model, &dist))
}
