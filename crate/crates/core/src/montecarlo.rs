//! Seeded, parallel, event-level Monte Carlo simulation of the fork race.
//!
//! One round is one block discovery. Rounds are cut into fixed batches of
//! [`BATCH_ROUNDS`]; batch `b` draws from a ChaCha8 stream keyed by the seed
//! with stream id `b`, so results do not depend on how many workers run the
//! batches. Each batch starts from the single-chain state and, once its quota
//! is spent, keeps stepping until the race is settled again. Every batch is
//! therefore a whole number of renewal cycles and every block it produces is
//! either credited or orphaned by the time it ends.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::{build_chain, ChainVariant};
use crate::error::{Error, Result};
use crate::model::{rer, Actor, PowerSplit, Rer, RushingAbility};

/// Rounds per batch. Fixed so that results are independent of worker count.
pub const BATCH_ROUNDS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rounds: u64,
    pub seed: u64,
    pub workers: usize,
    pub variant: ChainVariant,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Range {
                name: "rounds",
                value: 0.0,
                bounds: ">= 1",
            });
        }
        if self.workers == 0 {
            return Err(Error::Range {
                name: "workers",
                value: 0.0,
                bounds: ">= 1",
            });
        }
        Ok(())
    }
}

/// One value per actor class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerActor<T> {
    pub attacker: T,
    pub attracted: T,
    pub honest: T,
    pub miner_k: T,
}

impl<T: Copy> PerActor<T> {
    fn from_array(v: [T; 4]) -> Self {
        Self {
            attacker: v[0],
            attracted: v[1],
            honest: v[2],
            miner_k: v[3],
        }
    }

    pub fn get(&self, actor: Actor) -> T {
        match actor {
            Actor::Attacker => self.attacker,
            Actor::Attracted => self.attracted,
            Actor::Honest => self.honest,
            Actor::MinerK => self.miner_k,
        }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.attacker, self.attracted, self.honest, self.miner_k]
    }
}

/// Raw counters of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub events: u64,
    pub mined: [u64; 4],
    pub credited: [u64; 4],
    pub orphaned: [u64; 4],
    pub private_mined: u64,
    pub private_settled: u64,
    pub private_orphaned: u64,
}

impl Tally {
    fn merge(&mut self, other: &Tally) {
        self.events += other.events;
        for k in 0..4 {
            self.mined[k] += other.mined[k];
            self.credited[k] += other.credited[k];
            self.orphaned[k] += other.orphaned[k];
        }
        self.private_mined += other.private_mined;
        self.private_settled += other.private_settled;
        self.private_orphaned += other.private_orphaned;
    }

    pub fn total_credited(&self) -> u64 {
        self.credited.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub variant: ChainVariant,
    pub seed: u64,
    pub rounds_requested: u64,
    /// Requested rounds plus the extra rounds needed to settle open races.
    pub rounds_executed: u64,
    pub batches: u64,
    pub mined: PerActor<u64>,
    pub credited: PerActor<u64>,
    pub orphaned: PerActor<u64>,
    pub shares: PerActor<f64>,
    /// Batch-means standard error of each share.
    pub std_errors: PerActor<f64>,
    /// Standard error from treating credited blocks as independent draws.
    pub binomial_std_errors: PerActor<f64>,
}

impl SimReport {
    pub fn share(&self, actor: Actor) -> f64 {
        self.shares.get(actor)
    }

    pub fn std_error(&self, actor: Actor) -> f64 {
        self.std_errors.get(actor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rules {
    Honest,
    Psm,
    Apsm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Zero,
    Lead,
    /// Equal-length race; the public block belongs to the given actor.
    Race(Actor),
}

struct Walker {
    rules: Rules,
    /// Cumulative power thresholds for attacker and second class.
    cut_a: f64,
    cut_i: f64,
    /// Class of the second power slot: attracted, or a public miner `k`.
    second: Actor,
    gamma: f64,
    miner_k_loyal: bool,
    state: State,
    private: VecDeque<Actor>,
    tally: Tally,
}

impl Walker {
    fn new(powers: &PowerSplit, gamma: f64, variant: ChainVariant) -> Self {
        let (rules, second, alpha_i) = match variant {
            ChainVariant::Honest => (Rules::Honest, Actor::Attracted, powers.alpha_i()),
            ChainVariant::Selfish => (Rules::Apsm, Actor::Attracted, 0.0),
            ChainVariant::PsmAttacker => (Rules::Psm, Actor::Attracted, powers.alpha_i()),
            ChainVariant::ApsmAttacker => (Rules::Apsm, Actor::Attracted, powers.alpha_i()),
            ChainVariant::PsmMinerPublic => (Rules::Psm, Actor::MinerK, powers.alpha_i()),
            ChainVariant::ApsmMinerPublic => (Rules::Apsm, Actor::MinerK, powers.alpha_i()),
        };
        Self {
            rules,
            cut_a: powers.alpha_a(),
            cut_i: powers.alpha_a() + alpha_i,
            second,
            gamma,
            miner_k_loyal: second == Actor::MinerK,
            state: State::Zero,
            private: VecDeque::new(),
            tally: Tally::default(),
        }
    }

    fn credit(&mut self, actor: Actor) {
        self.tally.credited[actor.index()] += 1;
    }

    fn orphan(&mut self, actor: Actor) {
        self.tally.orphaned[actor.index()] += 1;
    }

    fn settle_private(&mut self) {
        if let Some(owner) = self.private.pop_front() {
            self.tally.private_settled += 1;
            self.credit(owner);
        }
    }

    fn orphan_private(&mut self) {
        while let Some(owner) = self.private.pop_front() {
            self.tally.private_orphaned += 1;
            self.orphan(owner);
        }
    }

    fn push_private(&mut self, owner: Actor) {
        self.tally.private_mined += 1;
        self.private.push_back(owner);
    }

    /// Whether blocks found by `actor` extend the attacker's branch.
    fn follows_attacker(&self, actor: Actor) -> bool {
        actor == Actor::Attacker || actor == Actor::Attracted
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) {
        let u: f64 = rng.gen();
        let finder = if u < self.cut_a {
            Actor::Attacker
        } else if u < self.cut_i {
            self.second
        } else {
            Actor::Honest
        };
        self.tally.events += 1;
        self.tally.mined[finder.index()] += 1;

        if self.rules == Rules::Honest {
            self.credit(finder);
            return;
        }

        match self.state {
            State::Zero => {
                if finder == Actor::Attacker {
                    self.push_private(finder);
                    self.state = State::Lead;
                } else {
                    self.credit(finder);
                }
            }
            State::Lead => self.step_lead(finder),
            State::Race(owner) => {
                if self.follows_attacker(finder) {
                    self.settle_private();
                    self.credit(finder);
                    self.orphan(owner);
                } else if self.miner_k_loyal && owner == Actor::MinerK && finder == Actor::MinerK {
                    self.credit(owner);
                    self.credit(finder);
                    self.orphan_private();
                } else if rng.gen::<f64>() < self.gamma {
                    self.settle_private();
                    self.credit(finder);
                    self.orphan(owner);
                } else {
                    self.credit(owner);
                    self.credit(finder);
                    self.orphan_private();
                }
                self.state = State::Zero;
            }
        }
    }

    fn step_lead(&mut self, finder: Actor) {
        let lead = self.private.len();
        if self.follows_attacker(finder) {
            match self.rules {
                Rules::Psm => {
                    self.settle_private();
                    self.credit(finder);
                    self.state = State::Zero;
                }
                _ => self.push_private(finder),
            }
            return;
        }
        match lead {
            1 => self.state = State::Race(finder),
            2 => {
                self.orphan(finder);
                self.settle_private();
                self.settle_private();
                self.state = State::Zero;
            }
            _ => {
                self.orphan(finder);
                self.settle_private();
            }
        }
    }
}

fn run_batch(
    powers: &PowerSplit,
    gamma: f64,
    variant: ChainVariant,
    seed: u64,
    batch: u64,
    quota: u64,
) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    let mut walker = Walker::new(powers, gamma, variant);
    for _ in 0..quota {
        walker.step(&mut rng);
    }
    while walker.state != State::Zero {
        walker.step(&mut rng);
    }
    walker.tally
}

fn std_errors(batches: &[Tally], total: &Tally) -> ([f64; 4], [f64; 4]) {
    let n = total.total_credited() as f64;
    let mut batch_means = [0.0; 4];
    let mut binomial = [0.0; 4];
    for k in 0..4 {
        let r = if n > 0.0 {
            total.credited[k] as f64 / n
        } else {
            0.0
        };
        binomial[k] = if n > 0.0 {
            (r * (1.0 - r) / n).sqrt()
        } else {
            0.0
        };
        let b = batches.len();
        batch_means[k] = if b >= 2 {
            let mean_t = n / b as f64;
            let ss: f64 = batches
                .iter()
                .map(|t| {
                    let d = t.credited[k] as f64 - r * t.total_credited() as f64;
                    d * d
                })
                .sum();
            (ss / (b as f64 * (b as f64 - 1.0) * mean_t * mean_t)).sqrt()
        } else {
            binomial[k]
        };
    }
    (batch_means, binomial)
}

/// Runs the raw batches and returns them in batch order with their total.
pub fn simulate_tallies(
    powers: &PowerSplit,
    gamma: RushingAbility,
    cfg: &SimConfig,
) -> Result<(Vec<Tally>, Tally)> {
    cfg.validate()?;
    build_chain(*powers, gamma, cfg.variant)?;
    let batches = cfg.rounds.div_ceil(BATCH_ROUNDS);
    let quota = |b: u64| BATCH_ROUNDS.min(cfg.rounds - b * BATCH_ROUNDS);
    let run = || -> Vec<Tally> {
        (0..batches)
            .into_par_iter()
            .map(|b| run_batch(powers, gamma.value(), cfg.variant, cfg.seed, b, quota(b)))
            .collect()
    };
    let tallies = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
    {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let mut total = Tally::default();
    for t in &tallies {
        total.merge(t);
    }
    Ok((tallies, total))
}

/// Simulates `cfg.rounds` block discoveries of the chosen strategy.
pub fn simulate(powers: &PowerSplit, gamma: RushingAbility, cfg: &SimConfig) -> Result<SimReport> {
    let (tallies, total) = simulate_tallies(powers, gamma, cfg)?;
    let n = total.total_credited() as f64;
    let shares = total
        .credited
        .map(|c| if n > 0.0 { c as f64 / n } else { 0.0 });
    let (se, binomial) = std_errors(&tallies, &total);
    Ok(SimReport {
        variant: cfg.variant,
        seed: cfg.seed,
        rounds_requested: cfg.rounds,
        rounds_executed: total.events,
        batches: tallies.len() as u64,
        mined: PerActor::from_array(total.mined),
        credited: PerActor::from_array(total.credited),
        orphaned: PerActor::from_array(total.orphaned),
        shares: PerActor::from_array(shares),
        std_errors: PerActor::from_array(se),
        binomial_std_errors: PerActor::from_array(binomial),
    })
}

/// One side of a simulated comparison: a scenario and the actor whose share
/// is compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSide {
    pub powers: PowerSplit,
    pub gamma: RushingAbility,
    pub variant: ChainVariant,
    pub actor: Actor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerEstimate {
    pub rer: Rer,
    pub std_error: f64,
    pub candidate: SimReport,
    pub baseline: SimReport,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one side, derived from the master seed and the scenario, so equal
/// scenarios share a stream and different scenarios get unrelated ones.
pub fn side_seed(master: u64, side: &SimSide) -> u64 {
    let variant = ChainVariant::ALL
        .iter()
        .position(|v| *v == side.variant)
        .unwrap_or(0) as u64;
    [
        variant,
        side.powers.alpha_a().to_bits(),
        side.powers.alpha_i().to_bits(),
        side.powers.alpha_h().to_bits(),
        side.gamma.value().to_bits(),
    ]
    .into_iter()
    .fold(splitmix64(master), |acc, word| splitmix64(acc ^ word))
}

/// Simulates both sides and returns the relative extra reward of the
/// candidate's share over the baseline's, with a propagated standard error.
/// `cfg.variant` is ignored; each side names its own.
pub fn simulate_rer(
    candidate: &SimSide,
    baseline: &SimSide,
    cfg: &SimConfig,
) -> Result<RerEstimate> {
    let run = |side: &SimSide| {
        let side_cfg = SimConfig {
            variant: side.variant,
            seed: side_seed(cfg.seed, side),
            ..*cfg
        };
        simulate(&side.powers, side.gamma, &side_cfg)
    };
    let a = run(candidate)?;
    let b = run(baseline)?;
    let (sa, sb) = (a.share(candidate.actor), b.share(baseline.actor));
    if b.credited.get(baseline.actor) == 0 {
        return Err(Error::ZeroBaseline);
    }
    let value = rer(sa, sb)?;
    let (ea, eb) = (a.std_error(candidate.actor), b.std_error(baseline.actor));
    let std_error = if sa > 0.0 {
        (sa / sb) * ((ea / sa).powi(2) + (eb / sb).powi(2)).sqrt()
    } else {
        ea / sb
    };
    Ok(RerEstimate {
        rer: value,
        std_error,
        candidate: a,
        baseline: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains;
    use proptest::prelude::*;

    fn g(x: f64) -> RushingAbility {
        RushingAbility::new(x).unwrap()
    }

    fn split(a: f64, i: f64) -> PowerSplit {
        PowerSplit::with_attracted(a, i).unwrap()
    }

    fn cfg(rounds: u64, seed: u64, workers: usize, variant: ChainVariant) -> SimConfig {
        SimConfig {
            rounds,
            seed,
            workers,
            variant,
        }
    }

    #[test]
    fn rejects_empty_runs() {
        let c = cfg(0, 1, 1, ChainVariant::PsmAttacker);
        assert!(matches!(
            simulate(&split(0.2, 0.1), g(0.0), &c),
            Err(Error::Range { name: "rounds", .. })
        ));
        let c = cfg(10, 1, 0, ChainVariant::PsmAttacker);
        assert!(simulate(&split(0.2, 0.1), g(0.0), &c).is_err());
        let c = cfg(10, 1, 1, ChainVariant::ApsmAttacker);
        assert!(matches!(
            simulate(&PowerSplit::new(0.3, 0.3, 0.4).unwrap(), g(0.0), &c),
            Err(Error::ApsmPower { .. })
        ));
    }

    #[test]
    fn zero_attacker_never_earns() {
        let c = cfg(50_000, 3, 1, ChainVariant::ApsmAttacker);
        let r = simulate(&split(0.0, 0.2), g(0.5), &c).unwrap();
        assert_eq!(r.credited.attacker, 0);
        assert_eq!(r.mined.attacker, 0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let base = cfg(300_000, 11, 1, ChainVariant::ApsmAttacker);
        let one = simulate(&split(0.3, 0.15), g(0.4), &base).unwrap();
        let four = simulate(&split(0.3, 0.15), g(0.4), &SimConfig { workers: 4, ..base }).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn shares_match_tallies() {
        let r = simulate(
            &split(0.25, 0.1),
            g(0.5),
            &cfg(200_000, 5, 2, ChainVariant::PsmAttacker),
        )
        .unwrap();
        let total: u64 = r.credited.to_array().iter().sum();
        for a in Actor::ALL {
            assert!((r.share(a) - r.credited.get(a) as f64 / total as f64).abs() <= 1e-12);
        }
        assert!(r.rounds_executed >= r.rounds_requested);
    }

    #[test]
    fn converges_to_the_chain_oracle() {
        let cases = [
            (ChainVariant::PsmAttacker, 0.3, 0.2, 0.3, Actor::Attacker),
            (ChainVariant::ApsmAttacker, 0.2, 0.2, 0.7, Actor::Attacker),
            (ChainVariant::PsmMinerPublic, 0.3, 0.2, 0.5, Actor::MinerK),
            (ChainVariant::ApsmMinerPublic, 0.35, 0.2, 0.5, Actor::MinerK),
            (ChainVariant::Selfish, 0.4, 0.1, 0.0, Actor::Attacker),
            (ChainVariant::Honest, 0.3, 0.1, 0.0, Actor::Attacker),
        ];
        for (variant, a, i, gamma, actor) in cases {
            let expected = chains::solve(split(a, i), g(gamma), variant)
                .unwrap()
                .share(actor);
            let r = simulate(&split(a, i), g(gamma), &cfg(2_000_000, 21, 1, variant)).unwrap();
            let se = r.std_error(actor);
            assert!(
                (r.share(actor) - expected).abs() <= 5.0 * se,
                "{variant}: {} vs {expected} (se {se})",
                r.share(actor)
            );
        }
    }

    #[test]
    fn identical_sides_give_zero() {
        let side = SimSide {
            powers: split(0.2, 0.1),
            gamma: g(0.5),
            variant: ChainVariant::PsmAttacker,
            actor: Actor::Attacker,
        };
        let est = simulate_rer(&side, &side, &cfg(100_000, 9, 1, ChainVariant::Honest)).unwrap();
        assert_eq!(est.rer.value(), 0.0);
    }

    #[test]
    fn empty_baseline_is_rejected() {
        let candidate = SimSide {
            powers: split(0.2, 0.1),
            gamma: g(0.5),
            variant: ChainVariant::PsmAttacker,
            actor: Actor::Attacker,
        };
        let baseline = SimSide {
            powers: split(0.0, 0.1),
            variant: ChainVariant::Honest,
            ..candidate
        };
        assert_eq!(
            simulate_rer(
                &candidate,
                &baseline,
                &cfg(10_000, 9, 1, ChainVariant::Honest)
            )
            .unwrap_err(),
            Error::ZeroBaseline
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn every_block_is_credited_or_orphaned(
            a in 0.0..0.45f64,
            f in 0.0..1.0f64,
            gamma in 0.0..=1.0f64,
            seed in any::<u64>(),
            v in 0usize..6,
        ) {
            let variant = ChainVariant::ALL[v];
            let i = f * (0.5 - a) * 0.99;
            let c = cfg(70_000, seed, 1, variant);
            let (_, t) = simulate_tallies(&split(a, i), g(gamma), &c).unwrap();
            for k in 0..4 {
                prop_assert_eq!(t.credited[k] + t.orphaned[k], t.mined[k]);
            }
            prop_assert!(t.total_credited() <= t.events);
            prop_assert_eq!(t.private_settled, t.private_mined - t.private_orphaned);
        }
    }
}
